use std::collections::HashMap;
use std::fs;
use std::path::Path;

use pdqrng::campaign::{load_config, run_campaign, CampaignConfig, Manifest};
use pdqrng::entropy::EntropyCertificate;
use pdqrng::{io, Error};

const SMALL: &str = r#"
name = "small"
seed = 7
svg = true

[source]
kind = "synthetic"
pulses = 131072
arm_pulses = 32768

[certify]
sigma_q = [4.71238898038469]
bits = [8, 4]
eta = [1.0, 0.5]
n = [3]

[extract]
symbols = 4096
"#;

fn run(dir: &Path) -> Manifest {
    let cfg = CampaignConfig::from_toml(SMALL).unwrap();
    run_campaign(&cfg, Path::new("."), dir).unwrap()
}

#[test]
fn rerun_is_byte_identical_and_chain_resolves() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = run(a.path());
    run(b.path());
    let ma = fs::read(a.path().join("manifest.json")).unwrap();
    assert_eq!(ma, fs::read(b.path().join("manifest.json")).unwrap());
    assert!(m.complete);

    let hashes: HashMap<&str, &str> = m.artifacts.iter().map(|x| (x.sha256.as_str(), x.path.as_str())).collect();
    for art in &m.artifacts {
        let bytes = fs::read(a.path().join(&art.path)).unwrap();
        assert_eq!(pdqrng::entropy::sha256_hex(&bytes), art.sha256, "{}", art.path);
        if art.kind == "certificate" {
            let cert = EntropyCertificate::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
            for (role, h) in &cert.inputs {
                assert!(hashes.contains_key(h.as_str()), "{role} of {} unresolved", art.path);
            }
            assert!(cert.detector.as_ref().unwrap().dominant);
        }
    }
    let kinds: Vec<&str> = m.artifacts.iter().map(|x| x.kind.as_str()).collect();
    for k in [
        "config",
        "pulse_train",
        "calibration",
        "symbols",
        "code_limits",
        "impulse_response",
        "certificate",
        "lp",
        "sweep",
        "plot",
        "bits",
    ] {
        assert!(kinds.contains(&k), "missing {k}");
    }
    let bound = m.primary_bound.unwrap();
    assert!(bound > 0.0 && bound < 8.0);

    let (header, bits) = io::decode_bits(&fs::read(a.path().join("extracted.pdqbx")).unwrap()).unwrap();
    assert_eq!(bits.len() as u64, m.extracted_bits.unwrap());
    assert_eq!(header.spec.input_symbols, 4096);
    let primary = fs::read(a.path().join(m.primary_certificate.as_ref().unwrap())).unwrap();
    assert_eq!(
        header.certificate_sha256,
        EntropyCertificate::from_json(std::str::from_utf8(&primary).unwrap()).unwrap().hash().unwrap()
    );

    let csv = fs::read_to_string(a.path().join("sweep_bits.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn file_source_reuses_artifacts() {
    let first = tempfile::tempdir().unwrap();
    run(first.path());
    let toml = r#"
name = "from-files"
seed = 1
write_pulses = false

[source]
kind = "files"
interference = "interference.pdqsy"
short_arm = "short_arm.pdqsy"
long_arm = "long_arm.pdqsy"
calibration = "calibration.csv"
recovery_order = 12

[certify]
n = [3]

[extract]
enabled = false
"#;
    let cfg_path = first.path().join("files.toml");
    fs::write(&cfg_path, toml).unwrap();
    let (cfg, base) = load_config(&cfg_path).unwrap();
    let out = tempfile::tempdir().unwrap();
    let m = run_campaign(&cfg, &base, out.path()).unwrap();
    assert!(m.primary_bound.is_some());
    assert!(m.extracted_bits.is_none());
}

#[test]
fn stage_failure_leaves_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let s =
        pdqrng::detection::SymbolStream::new(8, pdqrng::detection::StreamOrigin::Interference, vec![1; 5000]).unwrap();
    fs::write(dir.path().join("int.pdqsy"), io::encode_symbols(&s)).unwrap();
    fs::write(dir.path().join("cal.csv"), "reference_value,code\n0.5,0\n").unwrap();
    let toml = r#"
name = "broken"
seed = 1
[source]
kind = "files"
interference = "int.pdqsy"
short_arm = "int.pdqsy"
long_arm = "int.pdqsy"
calibration = "cal.csv"
"#;
    let cfg = CampaignConfig::from_toml(toml).unwrap();
    let out = dir.path().join("out");
    match run_campaign(&cfg, dir.path(), &out) {
        Err(Error::Stage { stage, partial_manifest, .. }) => {
            assert_eq!(stage, "acquire");
            let p = partial_manifest.unwrap();
            let m: Manifest = serde_json::from_slice(&fs::read(p).unwrap()).unwrap();
            assert!(!m.complete);
            assert_eq!(m.artifacts[0].path, "campaign.toml");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn config_validation() {
    let mut cfg = CampaignConfig::from_toml(SMALL).unwrap();
    let back = CampaignConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
    cfg.certify.eta.clear();
    assert!(matches!(cfg.validate(Path::new(".")), Err(Error::Config(_))));
    let missing = r#"
name = "m"
seed = 1
[source]
kind = "files"
interference = "nope.pdqsy"
short_arm = "nope.pdqsy"
long_arm = "nope.pdqsy"
calibration = "nope.csv"
"#;
    let cfg = CampaignConfig::from_toml(missing).unwrap();
    assert!(matches!(cfg.validate(Path::new("/nonexistent")), Err(Error::Config(_))));
    assert!(CampaignConfig::from_toml("name = 1").is_err());
}
