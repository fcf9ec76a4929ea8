#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(limits) = serde_json::from_slice::<pdqrng::characterization::CodeLimits>(data) {
        for bits in 1..=limits.bits {
            let _ = limits.effective(bits, 0.5, true);
        }
    }
});
