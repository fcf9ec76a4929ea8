#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = pdqrng::io::decode_calibration(data) {
        let _ = pdqrng::characterization::characterize_digitizer(&rows, 4, 1);
    }
});
