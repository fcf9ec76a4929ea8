//! One campaign = one directory: simulate or load data, characterize,
//! certify at a base point plus one-at-a-time sweeps, extract, and write a
//! manifest hashing every artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::characterization::{characterize_chain, CodeLimits, ImpulseRecovery, DEFAULT_MIN_SAMPLES};
use crate::detection::{StreamOrigin, SymbolStream};
use crate::entropy::constraints::{ConstraintOptions, RangePolicy, DEFAULT_ALPHA};
use crate::entropy::sweep::{self, SweepPoint};
use crate::entropy::{sha256_hex, Certifier, CertifyInput, CertifyParams, EntropyCertificate, DEFAULT_SIGMA_Q};
use crate::error::{Error, Result};
use crate::extractor::{extract, BitString, ExtractorSpec};
use crate::io;
use crate::plot;
use crate::reference::{ReferenceConfig, ReferenceDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    /// The synthetic reference generator; its seed is replaced by the master seed.
    Synthetic(ReferenceConfig),
    /// Existing symbol files and a calibration CSV, relative to the config file.
    Files {
        interference: PathBuf,
        short_arm: PathBuf,
        long_arm: PathBuf,
        calibration: PathBuf,
        #[serde(default = "default_min_samples")]
        min_samples: u64,
        #[serde(default = "default_order")]
        recovery_order: usize,
    },
}

fn default_min_samples() -> u64 {
    DEFAULT_MIN_SAMPLES
}

fn default_order() -> usize {
    crate::characterization::DEFAULT_RECOVERY_ORDER
}

/// Each list is swept with the others held at their first entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyPlan {
    pub sigma_q: Vec<f64>,
    pub bits: Vec<u8>,
    pub eta: Vec<f64>,
    pub n: Vec<usize>,
    pub range_policy: RangePolicy,
    pub alpha: f64,
}

impl Default for CertifyPlan {
    fn default() -> Self {
        Self {
            sigma_q: vec![DEFAULT_SIGMA_Q],
            bits: vec![8],
            eta: vec![1.0],
            n: vec![crate::entropy::DEFAULT_RESOLUTION],
            range_policy: RangePolicy::default(),
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl CertifyPlan {
    pub fn base(&self) -> CertifyParams {
        CertifyParams {
            sigma_q: self.sigma_q[0],
            bits: self.bits[0],
            eta: self.eta[0],
            n: self.n[0],
            constraints: ConstraintOptions { policy: self.range_policy.clone(), alpha: self.alpha },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case")]
pub enum SeedSource {
    /// Expanded from the master seed; reproducible.
    Master,
    /// Operating-system entropy; runs are no longer byte-identical.
    Os,
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractPlan {
    pub enabled: bool,
    pub epsilon: f64,
    /// Leading interference symbols fed to the extractor.
    pub symbols: usize,
    pub seed: SeedSource,
}

impl Default for ExtractPlan {
    fn default() -> Self {
        Self { enabled: true, epsilon: 2f64.powi(-64), symbols: 1 << 14, seed: SeedSource::Master }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub name: String,
    pub seed: u64,
    pub source: Source,
    #[serde(default)]
    pub certify: CertifyPlan,
    #[serde(default)]
    pub extract: ExtractPlan,
    #[serde(default)]
    pub svg: bool,
    /// Write the pulse train for synthetic sources.
    #[serde(default = "yes")]
    pub write_pulses: bool,
}

fn yes() -> bool {
    true
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks list contents and, for file sources, that every file exists
    /// relative to `base`.
    pub fn validate(&self, base: &Path) -> Result<()> {
        let c = &self.certify;
        if c.sigma_q.is_empty() || c.bits.is_empty() || c.eta.is_empty() || c.n.is_empty() {
            return Err(Error::Config("sigma_q, bits, eta and n lists must be nonempty".into()));
        }
        if let Some(s) = c.sigma_q.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("sigma_q {s} must be positive")));
        }
        if let Some(b) = c.bits.iter().find(|b| !(1..=8).contains(*b)) {
            return Err(Error::Config(format!("bit depth {b} outside 1..=8")));
        }
        if let Some(e) = c.eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::Config(format!("eta {e} outside [0, 1]")));
        }
        if c.n.contains(&0) {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        if !(c.alpha > 0.0 && c.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        if !(self.extract.epsilon > 0.0 && self.extract.epsilon < 1.0) {
            return Err(Error::Config("extract.epsilon must lie in (0, 1)".into()));
        }
        let mut files: Vec<&PathBuf> = Vec::new();
        if let Source::Files { interference, short_arm, long_arm, calibration, .. } = &self.source {
            files.extend([interference, short_arm, long_arm, calibration]);
        }
        if let SeedSource::File { path } = &self.extract.seed {
            files.push(path);
        }
        if let Some(f) = files.iter().find(|f| !base.join(f).is_file()) {
            return Err(Error::Config(format!("referenced file {} does not exist", base.join(f).display())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub kind: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub tool_version: String,
    pub complete: bool,
    pub primary_certificate: Option<String>,
    pub primary_bound: Option<f64>,
    pub extracted_bits: Option<u64>,
    pub artifacts: Vec<Artifact>,
}

struct Writer {
    dir: PathBuf,
    manifest: Manifest,
}

impl Writer {
    fn put(&mut self, rel: &str, kind: &str, bytes: &[u8]) -> Result<String> {
        io::write(&self.dir.join(rel), bytes)?;
        let hash = sha256_hex(bytes);
        self.manifest.artifacts.push(Artifact {
            path: rel.to_string(),
            kind: kind.to_string(),
            bytes: bytes.len() as u64,
            sha256: hash.clone(),
        });
        Ok(hash)
    }

    fn save_manifest(&self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        io::write(&path, serde_json::to_string_pretty(&self.manifest)?.as_bytes())?;
        Ok(path)
    }
}

struct Data {
    interference: SymbolStream,
    short: SymbolStream,
    long: SymbolStream,
    limits: CodeLimits,
    recovery: ImpulseRecovery,
}

fn staged<T>(w: &mut Writer, name: &'static str, f: impl FnOnce(&mut Writer) -> Result<T>) -> Result<T> {
    log::info!("campaign stage {name}");
    f(w).map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
        partial_manifest: w.save_manifest("manifest.partial.json").ok(),
    })
}

fn load_stream(path: &Path, origin: StreamOrigin) -> Result<SymbolStream> {
    let s = io::decode_symbols(&io::read(path)?)?;
    if s.origin() != origin {
        return Err(Error::format(format!("{} holds a {:?} stream, expected {origin:?}", path.display(), s.origin())));
    }
    Ok(s)
}

fn acquire(cfg: &CampaignConfig, base: &Path, w: &mut Writer) -> Result<Data> {
    let data = match &cfg.source {
        Source::Synthetic(rc) => {
            let rc = ReferenceConfig { seed: cfg.seed, ..rc.clone() };
            let ds = ReferenceDataset::generate(&rc)?;
            if cfg.write_pulses {
                w.put("pulses.pdqpt", "pulse_train", &io::encode_pulse_train(&ds.pulse_records(), rc.sigma_true))?;
            }
            w.put("calibration.csv", "calibration", &io::encode_calibration(&ds.calibration)?)?;
            Data {
                interference: ds.interference,
                short: ds.short,
                long: ds.long,
                limits: ds.limits,
                recovery: ds.recovery,
            }
        }
        Source::Files { interference, short_arm, long_arm, calibration, min_samples, recovery_order } => {
            let interference = load_stream(&base.join(interference), StreamOrigin::Interference)?;
            let short = load_stream(&base.join(short_arm), StreamOrigin::ShortArm)?;
            let long = load_stream(&base.join(long_arm), StreamOrigin::LongArm)?;
            let cal_bytes = io::read(&base.join(calibration))?;
            let cal = io::decode_calibration(&cal_bytes)?;
            w.put("calibration.csv", "calibration", &cal_bytes)?;
            let (limits, recovery) = characterize_chain(&cal, &interference, *min_samples, *recovery_order)?;
            Data { interference, short, long, limits, recovery }
        }
    };
    w.put("interference.pdqsy", "symbols", &io::encode_symbols(&data.interference))?;
    w.put("short_arm.pdqsy", "symbols", &io::encode_symbols(&data.short))?;
    w.put("long_arm.pdqsy", "symbols", &io::encode_symbols(&data.long))?;
    Ok(data)
}

fn cert_name(p: &CertifyParams) -> String {
    format!("certificates/s{:.6}_b{}_eta{:.4}_n{}", p.sigma_q, p.bits, p.eta, p.n)
}

fn seed_bits(cfg: &CampaignConfig, base: &Path, bits: usize) -> Result<BitString> {
    let mut bytes = vec![0u8; bits.div_ceil(8)];
    match &cfg.extract.seed {
        SeedSource::Master => ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed_5eed_5eed).fill_bytes(&mut bytes),
        SeedSource::Os => rand::rngs::OsRng.fill_bytes(&mut bytes),
        SeedSource::File { path } => bytes = io::read(&base.join(path))?,
    }
    BitString::from_bytes(&bytes, bits)
}

/// Runs the campaign into `out`, resolving relative input paths against
/// `base`. Returns the final manifest, also written to `manifest.json`.
pub fn run_campaign(cfg: &CampaignConfig, base: &Path, out: &Path) -> Result<Manifest> {
    cfg.validate(base)?;
    let mut w = Writer {
        dir: out.to_path_buf(),
        manifest: Manifest {
            name: cfg.name.clone(),
            seed: cfg.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            complete: false,
            primary_certificate: None,
            primary_bound: None,
            extracted_bits: None,
            artifacts: Vec::new(),
        },
    };
    std::fs::create_dir_all(out)?;
    w.put("campaign.toml", "config", cfg.to_toml()?.as_bytes())?;

    let data = staged(&mut w, "acquire", |w| acquire(cfg, base, w))?;

    let recovery = &data.recovery;
    staged(&mut w, "characterize", |w| {
        w.put("code_limits.json", "code_limits", serde_json::to_string(&data.limits)?.as_bytes())?;
        w.put("impulse_response.json", "impulse_response", serde_json::to_string_pretty(recovery)?.as_bytes())?;
        Ok(())
    })?;

    let input =
        CertifyInput { interference: &data.interference, short: &data.short, long: &data.long, limits: &data.limits };
    let plan = &cfg.certify;
    let base_params = plan.base();
    let primary_name = cert_name(&base_params);
    let primary = staged(&mut w, "certify", |w| {
        let certifier = Certifier::new(input)?.with_detector(recovery);
        let mut runs: BTreeMap<String, EntropyCertificate> = BTreeMap::new();
        let mut run = |p: &CertifyParams, w: &mut Writer| -> Result<Option<f64>> {
            let name = cert_name(p);
            if let Some(c) = runs.get(&name) {
                return Ok(c.bound_bits_per_symbol);
            }
            let c = certifier.certify(p)?;
            if *p == base_params {
                w.put(&format!("{name}.lp"), "lp", c.lp_text().as_bytes())?;
            }
            let bound = c.certificate.bound_bits_per_symbol;
            log::debug!("{name}: {bound:?}");
            runs.insert(name, c.certificate);
            Ok(bound)
        };
        run(&base_params, w)?;
        let axes: [(&str, usize); 4] =
            [("sigma_q", plan.sigma_q.len()), ("bits", plan.bits.len()), ("eta", plan.eta.len()), ("n", plan.n.len())];
        for (axis, len) in axes.into_iter().filter(|a| a.1 > 1) {
            let mut points = Vec::new();
            for i in 0..len {
                let mut p = base_params.clone();
                match axis {
                    "sigma_q" => p.sigma_q = plan.sigma_q[i],
                    "bits" => p.bits = plan.bits[i],
                    "eta" => p.eta = plan.eta[i],
                    _ => p.n = plan.n[i],
                }
                let bound = run(&p, w)?;
                points.push(SweepPoint { sigma_q: p.sigma_q, bits: p.bits, eta: p.eta, n: p.n, bound });
            }
            w.put(&format!("sweep_{axis}.csv"), "sweep", sweep::to_csv(&points).as_bytes())?;
            if cfg.svg {
                w.put(&format!("sweep_{axis}.svg"), "plot", plot::sweep_svg(&points, axis)?.as_bytes())?;
            }
        }
        for (name, cert) in &runs {
            w.put(&format!("{name}.json"), "certificate", cert.to_json()?.as_bytes())?;
        }
        Ok(runs.remove(&primary_name).expect("primary run recorded"))
    })?;
    w.manifest.primary_certificate = Some(format!("{primary_name}.json"));
    w.manifest.primary_bound = primary.bound_bits_per_symbol;

    if let (true, Some(k)) = (cfg.extract.enabled, primary.bound_bits_per_symbol) {
        let n_bits = staged(&mut w, "extract", |w| {
            let take = cfg.extract.symbols.min(data.interference.len());
            let stream = data.interference.rebin(base_params.bits)?;
            let stream = SymbolStream::new(stream.bits(), stream.origin(), stream.symbols()[..take].to_vec())?;
            let spec = ExtractorSpec::new(take as u64, base_params.bits, k, cfg.extract.epsilon, None)?;
            let seed = seed_bits(cfg, base, spec.seed_bits() as usize)?;
            let out = extract(&stream, &spec, &seed)?;
            let header = io::BitFileHeader {
                family: "toeplitz".into(),
                spec,
                certificate_sha256: primary.hash()?,
                seed_sha256: seed.sha256(),
                input_sha256: crate::entropy::stream_hash(&stream),
            };
            w.put("extracted.pdqbx", "bits", &io::encode_bits(&header, &out)?)?;
            Ok(out.len() as u64)
        })?;
        w.manifest.extracted_bits = Some(n_bits);
    }
    w.manifest.complete = true;
    w.save_manifest("manifest.json")?;
    let partial = out.join("manifest.partial.json");
    if partial.exists() {
        std::fs::remove_file(partial)?;
    }
    Ok(w.manifest)
}

/// Reads `path` as a campaign config; relative inputs resolve against its
/// directory.
pub fn load_config(path: &Path) -> Result<(CampaignConfig, PathBuf)> {
    let text = String::from_utf8(io::read(path)?).map_err(|e| Error::Config(e.to_string()))?;
    let cfg = CampaignConfig::from_toml(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}
