#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = pdqrng::io::decode_symbols(data) {
        assert_eq!(pdqrng::io::encode_symbols(&s), data);
        let _ = s.rebin(1);
    }
});
