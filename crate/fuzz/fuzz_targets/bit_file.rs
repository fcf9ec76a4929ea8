#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((header, bits)) = pdqrng::io::decode_bits(data) {
        assert_eq!(bits.len() as u64, header.spec.output_length);
    }
});
