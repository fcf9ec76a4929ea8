use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use pdqrng::campaign::{load_config, run_campaign};
use pdqrng::cdf::{cdf_gaussian_phase, cdf_single_arm, cdf_uniform_phase, Arm};
use pdqrng::characterization::{characterize_chain, CodeLimits, ImpulseRecovery, DEFAULT_MIN_SAMPLES};
use pdqrng::detection::{StreamOrigin, SymbolStream};
use pdqrng::entropy::constraints::{ConstraintOptions, RangePolicy, DEFAULT_ALPHA};
use pdqrng::entropy::{stream_hash, Certifier, CertifyInput, CertifyParams, EntropyCertificate, DEFAULT_SIGMA_Q};
use pdqrng::extractor::{extract, BitString, ExtractorSpec};
use pdqrng::io;
use pdqrng::laser::ConditionVector;
use pdqrng::reference::{ReferenceConfig, ReferenceDataset};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_ERROR: u8 = 1;

#[derive(Parser)]
#[command(name = "pdqrng", version, about = "Certified randomness for phase-diffusion QRNGs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset: pulse train, three symbol streams and a calibration sweep.
    Simulate(SimulateArgs),
    /// Derive code limits and hangover bounds from a calibration sweep and the interference stream.
    Characterize(CharacterizeArgs),
    /// Certify a lower bound on the average min-entropy.
    Certify(CertifyArgs),
    /// Hash a symbol stream down to near-uniform bits sized by a certificate.
    Extract(ExtractArgs),
    /// Run a full campaign from a TOML config.
    Campaign(CampaignArgs),
    /// Write CDF values as CSV columns p,F.
    DumpCdf(DumpCdfArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, default_value_t = 1 << 20)]
    pulses: usize,
    #[arg(long, default_value_t = 1 << 18)]
    arm_pulses: usize,
    /// True phase-diffusion width used to draw the quantum phase.
    #[arg(long, default_value_t = 3.0 * PI)]
    sigma_true: f64,
    #[arg(long, default_value_t = 0.23)]
    p_s: f64,
    #[arg(long, default_value_t = 0.25)]
    p_l: f64,
    #[arg(long, default_value_t = 0.95)]
    visibility: f64,
    /// Per-pulse rms step of the classical phase random walk.
    #[arg(long, default_value_t = 0.05)]
    phase_walk: f64,
}

#[derive(Args)]
struct CharacterizeArgs {
    #[arg(long)]
    calibration: PathBuf,
    #[arg(long)]
    interference: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_SAMPLES)]
    min_samples: u64,
    /// Orders of impulse-response recovery; also the autocorrelation lag range.
    #[arg(long, default_value_t = pdqrng::characterization::DEFAULT_RECOVERY_ORDER)]
    order: usize,
    #[arg(long)]
    limits_out: PathBuf,
    #[arg(long)]
    impulse_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Singles,
    Dyadic,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    interference: PathBuf,
    #[arg(long)]
    short_arm: PathBuf,
    #[arg(long)]
    long_arm: PathBuf,
    #[arg(long)]
    limits: PathBuf,
    /// Impulse-recovery JSON recorded in the certificate.
    #[arg(long)]
    impulse: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SIGMA_Q)]
    sigma_q: f64,
    #[arg(long, default_value_t = 8)]
    bits: u8,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Grid resolution; the covering has n × n × 4n cells.
    #[arg(long, default_value_t = pdqrng::entropy::DEFAULT_RESOLUTION)]
    n: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::Dyadic)]
    range_policy: PolicyArg,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the LP in CPLEX LP format.
    #[arg(long)]
    lp: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    symbols: PathBuf,
    #[arg(long)]
    certificate: PathBuf,
    #[arg(long, default_value_t = 2f64.powi(-64))]
    epsilon: f64,
    /// Output length in bits; defaults to the leftover-hash maximum.
    #[arg(long)]
    length: Option<u64>,
    /// Seed material; must hold at least N·b + ℓ − 1 bits.
    #[arg(long, conflicts_with = "os_seed")]
    seed_file: Option<PathBuf>,
    /// Draw the seed from operating-system entropy.
    #[arg(long)]
    os_seed: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CdfArg {
    Gaussian,
    Uniform,
    Short,
    Long,
}

#[derive(Args)]
struct DumpCdfArgs {
    #[arg(long, value_enum, default_value_t = CdfArg::Gaussian)]
    kind: CdfArg,
    #[arg(long)]
    p_s: f64,
    #[arg(long)]
    p_l: f64,
    #[arg(long)]
    visibility: f64,
    #[arg(long, default_value_t = 0.0)]
    phi_c: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA_Q)]
    sigma_q: f64,
    /// Interpret powers as codes of an 8-bit full scale and print p in codes.
    #[arg(long)]
    code_units: bool,
    #[arg(long, default_value_t = 257)]
    points: usize,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Done,
    Infeasible,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = io::read(path)?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn read_stream(path: &Path, origin: StreamOrigin) -> Result<SymbolStream> {
    let s = io::decode_symbols(&io::read(path)?).with_context(|| format!("reading {}", path.display()))?;
    if s.origin() != origin {
        bail!("{} holds a {:?} stream, expected {:?}", path.display(), s.origin(), origin);
    }
    Ok(s)
}

fn simulate(a: SimulateArgs) -> Result<Outcome> {
    let cfg = ReferenceConfig {
        seed: a.seed,
        pulses: a.pulses,
        arm_pulses: a.arm_pulses,
        sigma_true: a.sigma_true,
        base: ConditionVector::new(a.p_s, a.p_l, a.visibility, 0.0)?,
        phase_walk_rms: a.phase_walk,
        ..Default::default()
    };
    let ds = ReferenceDataset::generate(&cfg)?;
    let out = &a.out;
    io::write(&out.join("pulses.pdqpt"), &io::encode_pulse_train(&ds.pulse_records(), cfg.sigma_true))?;
    io::write(&out.join("interference.pdqsy"), &io::encode_symbols(&ds.interference))?;
    io::write(&out.join("short_arm.pdqsy"), &io::encode_symbols(&ds.short))?;
    io::write(&out.join("long_arm.pdqsy"), &io::encode_symbols(&ds.long))?;
    io::write(&out.join("calibration.csv"), &io::encode_calibration(&ds.calibration)?)?;
    info!("wrote {} pulses to {}", cfg.pulses, out.display());
    Ok(Outcome::Done)
}

fn characterize(a: CharacterizeArgs) -> Result<Outcome> {
    let cal = io::decode_calibration(&io::read(&a.calibration)?)?;
    let stream = read_stream(&a.interference, StreamOrigin::Interference)?;
    let (limits, recovery) = characterize_chain(&cal, &stream, a.min_samples, a.order)?;
    io::write(&a.limits_out, serde_json::to_string(&limits)?.as_bytes())?;
    if let Some(p) = a.impulse_out {
        io::write(&p, serde_json::to_string_pretty(&recovery)?.as_bytes())?;
    }
    println!(
        "hangover [{:.6}, {:.6}], tap dominance ratio {:.4}",
        limits.hangover.zeta_minus,
        limits.hangover.zeta_plus,
        recovery.dominance_ratio()
    );
    Ok(Outcome::Done)
}

fn certify(a: CertifyArgs) -> Result<Outcome> {
    let interference = read_stream(&a.interference, StreamOrigin::Interference)?;
    let short = read_stream(&a.short_arm, StreamOrigin::ShortArm)?;
    let long = read_stream(&a.long_arm, StreamOrigin::LongArm)?;
    let limits: CodeLimits = read_json(&a.limits)?;
    let mut certifier =
        Certifier::new(CertifyInput { interference: &interference, short: &short, long: &long, limits: &limits })?;
    if let Some(p) = &a.impulse {
        let r: ImpulseRecovery = read_json(p)?;
        certifier = certifier.with_detector(&r);
    }
    let policy = match a.range_policy {
        PolicyArg::Singles => RangePolicy::Singles,
        PolicyArg::Dyadic => RangePolicy::SinglesAndDyadic,
    };
    let run = certifier.certify(&CertifyParams {
        sigma_q: a.sigma_q,
        bits: a.bits,
        eta: a.eta,
        n: a.n,
        constraints: ConstraintOptions { policy, alpha: a.alpha },
    })?;
    io::write(&a.out, run.certificate.to_json()?.as_bytes())?;
    if let Some(p) = &a.lp {
        io::write(p, run.lp_text().as_bytes())?;
    }
    match run.certificate.bound_bits_per_symbol {
        Some(b) => {
            println!("certified {b:.6} bits per symbol");
            Ok(Outcome::Done)
        }
        None => {
            println!(
                "infeasible: constraints admit no distribution (Farkas margin {:.3e})",
                run.certificate.farkas_margin.unwrap_or(f64::NAN)
            );
            Ok(Outcome::Infeasible)
        }
    }
}

fn extract_cmd(a: ExtractArgs) -> Result<Outcome> {
    let stream = io::decode_symbols(&io::read(&a.symbols)?)?;
    let cert_text = fs::read_to_string(&a.certificate).with_context(|| a.certificate.display().to_string())?;
    let cert = EntropyCertificate::from_json(&cert_text)?;
    let Some(k) = cert.bound_bits_per_symbol else {
        println!("certificate is infeasible; nothing to extract");
        return Ok(Outcome::Infeasible);
    };
    let stream = stream.rebin(cert.bits)?;
    let spec = ExtractorSpec::new(stream.len() as u64, cert.bits, k, a.epsilon, a.length)?;
    let need = spec.seed_bits() as usize;
    let seed_bytes = match (&a.seed_file, a.os_seed) {
        (Some(p), _) => io::read(p)?,
        (None, true) => {
            use rand::RngCore;
            let mut b = vec![0u8; need.div_ceil(8)];
            rand::rngs::OsRng.fill_bytes(&mut b);
            b
        }
        (None, false) => bail!("seed material required: pass --seed-file or --os-seed"),
    };
    let seed = BitString::from_bytes(&seed_bytes, need)?;
    let bits = extract(&stream, &spec, &seed)?;
    let header = io::BitFileHeader {
        family: "toeplitz".into(),
        spec,
        certificate_sha256: cert.hash()?,
        seed_sha256: seed.sha256(),
        input_sha256: stream_hash(&stream),
    };
    io::write(&a.out, &io::encode_bits(&header, &bits)?)?;
    println!("extracted {} bits", bits.len());
    Ok(Outcome::Done)
}

fn campaign(a: CampaignArgs) -> Result<Outcome> {
    let (cfg, base) = load_config(&a.config)?;
    let m = run_campaign(&cfg, &base, &a.out)?;
    println!("{} artifacts in {}", m.artifacts.len(), a.out.display());
    match m.primary_bound {
        Some(b) => {
            println!("primary bound {b:.6} bits per symbol");
            Ok(Outcome::Done)
        }
        None => {
            println!("primary certificate infeasible");
            Ok(Outcome::Infeasible)
        }
    }
}

fn dump_cdf(a: DumpCdfArgs) -> Result<Outcome> {
    let scale = if a.code_units { 256.0 } else { 1.0 };
    let x = ConditionVector::new(a.p_s / scale, a.p_l / scale, a.visibility, a.phi_c)?;
    if a.points < 2 {
        bail!("need at least two points");
    }
    let (lo, hi) = (x.min_power(), x.max_power());
    let pad = 0.05 * (hi - lo).max(1e-3);
    let mut out = String::from("p,F\n");
    for i in 0..a.points {
        let p = lo - pad + (hi - lo + 2.0 * pad) * i as f64 / (a.points - 1) as f64;
        let f = match a.kind {
            CdfArg::Gaussian => cdf_gaussian_phase(p, &x, a.sigma_q),
            CdfArg::Uniform => cdf_uniform_phase(p, &x),
            CdfArg::Short => cdf_single_arm(p, &x, Arm::Short),
            CdfArg::Long => cdf_single_arm(p, &x, Arm::Long),
        };
        out.push_str(&format!("{:.9},{:.12}\n", p * scale, f));
    }
    match a.out {
        Some(p) => io::write(&p, out.as_bytes())?,
        None => print!("{out}"),
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Characterize(a) => characterize(a),
        Command::Certify(a) => certify(a),
        Command::Extract(a) => extract_cmd(a),
        Command::Campaign(a) => campaign(a),
        Command::DumpCdf(a) => dump_cdf(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(EXIT_INFEASIBLE),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
