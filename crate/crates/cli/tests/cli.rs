use std::path::Path;
use std::process::{Command, Output};

fn pdqrng(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdqrng")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn full_chain_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = pdqrng(&["simulate", "--out", "data", "--pulses", "131072", "--arm-pulses", "32768", "--seed", "5"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["pulses.pdqpt", "interference.pdqsy", "short_arm.pdqsy", "long_arm.pdqsy", "calibration.csv"] {
        assert!(d.join("data").join(f).is_file(), "{f}");
    }

    let o = pdqrng(
        &[
            "characterize",
            "--calibration",
            "data/calibration.csv",
            "--interference",
            "data/interference.pdqsy",
            "--order",
            "12",
            "--limits-out",
            "limits.json",
            "--impulse-out",
            "impulse.json",
        ],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let certify = |eta: &str, out: &str| {
        pdqrng(
            &[
                "certify",
                "--interference",
                "data/interference.pdqsy",
                "--short-arm",
                "data/short_arm.pdqsy",
                "--long-arm",
                "data/long_arm.pdqsy",
                "--limits",
                "limits.json",
                "--impulse",
                "impulse.json",
                "--n",
                "3",
                "--eta",
                eta,
                "--out",
                out,
                "--lp",
                "problem.lp",
            ],
            d,
        )
    };
    let o = certify("1.0", "cert.json");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("bits per symbol"));
    assert!(std::fs::read_to_string(d.join("problem.lp")).unwrap().contains("Subject To"));

    let o = certify("0.0", "narrow.json");
    assert_eq!(code(&o), 2);

    std::fs::write(d.join("seed.bin"), vec![0x5a; 1 << 16]).unwrap();
    let o = pdqrng(
        &[
            "extract",
            "--symbols",
            "data/interference.pdqsy",
            "--certificate",
            "cert.json",
            "--seed-file",
            "seed.bin",
            "--out",
            "bits.pdqbx",
        ],
        d,
    );
    // the seed file is far too short for the whole stream
    assert_eq!(code(&o), 1);
    let o = pdqrng(
        &[
            "extract",
            "--symbols",
            "data/interference.pdqsy",
            "--certificate",
            "cert.json",
            "--os-seed",
            "--length",
            "1000",
            "--out",
            "bits.pdqbx",
        ],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = pdqrng(
        &[
            "extract",
            "--symbols",
            "data/interference.pdqsy",
            "--certificate",
            "narrow.json",
            "--os-seed",
            "--out",
            "none.pdqbx",
        ],
        d,
    );
    assert_eq!(code(&o), 2);
    let o = pdqrng(
        &["extract", "--symbols", "data/interference.pdqsy", "--certificate", "cert.json", "--out", "x.pdqbx"],
        d,
    );
    assert_eq!(code(&o), 1);

    let o = pdqrng(
        &[
            "certify",
            "--interference",
            "missing.pdqsy",
            "--short-arm",
            "a",
            "--long-arm",
            "b",
            "--limits",
            "c",
            "--out",
            "d",
        ],
        d,
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.pdqsy"));
}

#[test]
fn dump_cdf_in_code_units() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pdqrng(
        &[
            "dump-cdf",
            "--p-s",
            "51",
            "--p-l",
            "51",
            "--visibility",
            "0.9",
            "--code-units",
            "--sigma-q",
            "1.0",
            "--points",
            "11",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (p, f) = l.split_once(',').unwrap();
            (p.parse().unwrap(), f.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0].1, 0.0);
    assert!((rows[10].1 - 1.0).abs() < 1e-12);
    assert!(rows.windows(2).all(|w| w[1].1 >= w[0].1 && w[1].0 > w[0].0));
    // peak power 102 + 0.9·102 codes plus 5% padding of the swing
    assert!((rows[10].0 - 202.98).abs() < 1e-6, "{}", rows[10].0);
}

#[test]
fn campaign_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
name = "cli"
seed = 3
write_pulses = false
[source]
kind = "synthetic"
pulses = 65536
arm_pulses = 16384
[certify]
n = [2]
[extract]
symbols = 2048
"#;
    std::fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let o = pdqrng(&["campaign", "--config", "c.toml", "--out", "run"], tmp.path());
    let c = code(&o);
    assert!(c == 0 || c == 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("run/manifest.json").is_file());
    let o = pdqrng(&["campaign", "--config", "absent.toml", "--out", "run2"], tmp.path());
    assert_eq!(code(&o), 1);
}
