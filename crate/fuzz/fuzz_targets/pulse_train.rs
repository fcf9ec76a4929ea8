#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((sigma, records)) = pdqrng::io::decode_pulse_train(data) {
        assert_eq!(pdqrng::io::encode_pulse_train(&records, sigma), data);
    }
});
