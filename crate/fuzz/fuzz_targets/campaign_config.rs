#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = pdqrng::campaign::CampaignConfig::from_toml(text) {
            let _ = cfg.validate(std::path::Path::new("/nonexistent"));
        }
    }
});
