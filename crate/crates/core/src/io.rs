//! On-disk formats. All integers and floats are little-endian.
//!
//! Pulse train: 64-byte header (`PDQRNGPT`, version u16, 6 reserved bytes,
//! count u64, σ_q f64, 32 reserved bytes) then 48-byte records
//! `p_s, p_l, V, φ_c, φ_q, power` as f64.
//!
//! Symbol stream: `PDQRNGSY`, version u16, bits u8, origin u8, count u64,
//! then one byte per symbol.
//!
//! Bit file: `PDQRNGBX`, version u16, header length u32, a JSON header, then
//! the output bits packed most significant bit first with zero padding.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{StreamOrigin, SymbolStream};
use crate::error::{Error, Result};
use crate::extractor::{BitString, ExtractorSpec};
use crate::laser::{ConditionVector, PulseRecord};

pub const PULSE_MAGIC: &[u8; 8] = b"PDQRNGPT";
pub const SYMBOL_MAGIC: &[u8; 8] = b"PDQRNGSY";
pub const BITS_MAGIC: &[u8; 8] = b"PDQRNGBX";
pub const VERSION: u16 = 1;

const PULSE_HEADER: usize = 64;
const PULSE_RECORD: usize = 48;
const SYMBOL_HEADER: usize = 20;
const BITS_PREFIX: usize = 14;
const MAX_JSON_HEADER: usize = 1 << 20;

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, at: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::format(format!("truncated input: need {n} bytes at offset {}", self.at)))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn rest(&self) -> &'a [u8] {
        &self.buf[self.at..]
    }
}

fn expect_magic(c: &mut Cursor, magic: &[u8; 8]) -> Result<()> {
    let m = c.take(8)?;
    if m != magic {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {}",
            String::from_utf8_lossy(m),
            String::from_utf8_lossy(magic)
        )));
    }
    let v = c.u16()?;
    if v != VERSION {
        return Err(Error::format(format!("unsupported version {v}")));
    }
    Ok(())
}

fn expect_zero(bytes: &[u8]) -> Result<()> {
    if bytes.iter().any(|&b| b != 0) {
        return Err(Error::format("nonzero reserved bytes"));
    }
    Ok(())
}

fn exact_len(rest: usize, count: u64, size: usize) -> Result<()> {
    let want = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(size))
        .ok_or_else(|| Error::format(format!("record count {count} too large")))?;
    if rest != want {
        return Err(Error::format(format!("body is {rest} bytes, header implies {want}")));
    }
    Ok(())
}

pub fn encode_pulse_train(records: &[PulseRecord], sigma_q: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(PULSE_HEADER + PULSE_RECORD * records.len());
    out.extend_from_slice(PULSE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&[0; 6]);
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    out.extend_from_slice(&sigma_q.to_le_bytes());
    out.extend_from_slice(&[0; 32]);
    for r in records {
        let x = &r.condition;
        for v in [x.p_s, x.p_l, x.visibility, x.phi_c, r.phi_q, r.power] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Returns `(σ_q, records)`.
pub fn decode_pulse_train(bytes: &[u8]) -> Result<(f64, Vec<PulseRecord>)> {
    let mut c = Cursor::new(bytes);
    expect_magic(&mut c, PULSE_MAGIC)?;
    expect_zero(c.take(6)?)?;
    let count = c.u64()?;
    let sigma = c.f64()?;
    expect_zero(c.take(32)?)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::format(format!("invalid σ_q {sigma}")));
    }
    exact_len(c.rest().len(), count, PULSE_RECORD)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut v = [0.0; 6];
        for slot in v.iter_mut() {
            *slot = c.f64()?;
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::format("non-finite pulse record"));
        }
        out.push(PulseRecord {
            condition: ConditionVector { p_s: v[0], p_l: v[1], visibility: v[2], phi_c: v[3] },
            phi_q: v[4],
            power: v[5],
        });
    }
    Ok((sigma, out))
}

pub fn encode_symbols(stream: &SymbolStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(SYMBOL_HEADER + stream.len());
    out.extend_from_slice(SYMBOL_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(stream.bits());
    out.push(stream.origin() as u8);
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    out.extend_from_slice(stream.symbols());
    out
}

pub fn decode_symbols(bytes: &[u8]) -> Result<SymbolStream> {
    let mut c = Cursor::new(bytes);
    expect_magic(&mut c, SYMBOL_MAGIC)?;
    let [bits, origin] = c.array()?;
    let origin = StreamOrigin::from_u8(origin).ok_or_else(|| Error::format(format!("unknown origin {origin}")))?;
    let count = c.u64()?;
    exact_len(c.rest().len(), count, 1)?;
    SymbolStream::new(bits, origin, c.rest().to_vec()).map_err(|e| Error::format(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationRow {
    reference_value: f64,
    code: u32,
}

/// `(reference_value, code)` pairs; reference values in code units.
pub fn decode_calibration(bytes: &[u8]) -> Result<Vec<(f64, u32)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["reference_value", "code"] {
        return Err(Error::format(format!("calibration columns must be reference_value,code; got {headers:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<CalibrationRow>() {
        let row = row?;
        if !row.reference_value.is_finite() {
            return Err(Error::format("non-finite reference value"));
        }
        out.push((row.reference_value, row.code));
    }
    Ok(out)
}

pub fn encode_calibration(rows: &[(f64, u32)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for &(reference_value, code) in rows {
        w.serialize(CalibrationRow { reference_value, code })?;
    }
    w.into_inner().map_err(|e| Error::format(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitFileHeader {
    pub family: String,
    pub spec: ExtractorSpec,
    pub certificate_sha256: String,
    pub seed_sha256: String,
    pub input_sha256: String,
}

pub fn encode_bits(header: &BitFileHeader, bits: &BitString) -> Result<Vec<u8>> {
    if bits.len() as u64 != header.spec.output_length {
        return Err(Error::param("bit count disagrees with header"));
    }
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(BITS_PREFIX + json.len() + bits.len() / 8 + 1);
    out.extend_from_slice(BITS_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&bits.to_bytes());
    Ok(out)
}

pub fn decode_bits(bytes: &[u8]) -> Result<(BitFileHeader, BitString)> {
    let mut c = Cursor::new(bytes);
    expect_magic(&mut c, BITS_MAGIC)?;
    let len = c.u32()? as usize;
    if len > MAX_JSON_HEADER {
        return Err(Error::format(format!("header of {len} bytes exceeds limit")));
    }
    let header: BitFileHeader = serde_json::from_slice(c.take(len)?).map_err(|e| Error::format(e.to_string()))?;
    let n = usize::try_from(header.spec.output_length).map_err(|_| Error::format("output length too large"))?;
    let body = c.rest();
    if body.len() != n.div_ceil(8) {
        return Err(Error::format(format!("body is {} bytes, header implies {}", body.len(), n.div_ceil(8))));
    }
    if n % 8 != 0 && body[body.len() - 1] & (0xff >> (n % 8)) != 0 {
        return Err(Error::format("nonzero padding bits"));
    }
    Ok((header, BitString::from_bytes(body, n)?))
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pulse(i: usize) -> PulseRecord {
        PulseRecord {
            condition: ConditionVector::new(0.2, 0.25, 0.9, i as f64 * 0.1).unwrap(),
            phi_q: -1.5 + i as f64,
            power: 0.4 + 0.01 * i as f64,
        }
    }

    #[test]
    fn pulse_header_layout() {
        let b = encode_pulse_train(&[pulse(0), pulse(1)], 4.5);
        assert_eq!(b.len(), 64 + 2 * 48);
        assert_eq!(&b[..8], b"PDQRNGPT");
        assert_eq!(u16::from_le_bytes([b[8], b[9]]), 1);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 4.5);
        assert_eq!(f64::from_le_bytes(b[64..72].try_into().unwrap()), 0.2);
        let (s, r) = decode_pulse_train(&b).unwrap();
        assert_eq!(s, 4.5);
        assert_eq!(r, vec![pulse(0), pulse(1)]);
    }

    #[test]
    fn pulse_length_mismatch_rejected() {
        let mut b = encode_pulse_train(&[pulse(0)], 1.0);
        b.pop();
        assert!(matches!(decode_pulse_train(&b), Err(Error::Format(_))));
        let mut b = encode_pulse_train(&[pulse(0)], 1.0);
        b[16] = 0xff;
        assert!(decode_pulse_train(&b).is_err());
    }

    #[test]
    fn symbol_header_layout() {
        let s = SymbolStream::new(3, StreamOrigin::LongArm, vec![7, 0, 5]).unwrap();
        let b = encode_symbols(&s);
        assert_eq!(&b[..8], b"PDQRNGSY");
        assert_eq!(&b[10..12], &[3, 2]);
        assert_eq!(u64::from_le_bytes(b[12..20].try_into().unwrap()), 3);
        assert_eq!(&b[20..], &[7, 0, 5]);
        assert_eq!(decode_symbols(&b).unwrap(), s);
    }

    #[test]
    fn out_of_range_symbol_rejected() {
        let s = SymbolStream::new(3, StreamOrigin::Interference, vec![7]).unwrap();
        let mut b = encode_symbols(&s);
        b[20] = 8;
        assert!(matches!(decode_symbols(&b), Err(Error::Format(_))));
    }

    #[test]
    fn calibration_csv() {
        let text = b"reference_value,code\n0.25,0\n 1.75 , 1\n";
        assert_eq!(decode_calibration(text).unwrap(), vec![(0.25, 0), (1.75, 1)]);
        assert!(decode_calibration(b"ref,code\n0.1,0\n").is_err());
        assert!(decode_calibration(b"reference_value,code\n0.1,-1\n").is_err());
        let rows = vec![(0.5, 3), (2.0, 7)];
        assert_eq!(decode_calibration(&encode_calibration(&rows).unwrap()).unwrap(), rows);
    }

    fn header(len: u64) -> BitFileHeader {
        BitFileHeader {
            family: "toeplitz".into(),
            spec: ExtractorSpec { input_symbols: 100, bits: 8, k_per_symbol: 2.0, epsilon: 1e-6, output_length: len },
            certificate_sha256: "ab".repeat(32),
            seed_sha256: "cd".repeat(32),
            input_sha256: "ef".repeat(32),
        }
    }

    #[test]
    fn bit_file_round_trip() {
        let bits = BitString::from_fn(13, |i| i % 3 == 0);
        let b = encode_bits(&header(13), &bits).unwrap();
        assert_eq!(&b[..8], b"PDQRNGBX");
        let (h, back) = decode_bits(&b).unwrap();
        assert_eq!(h, header(13));
        assert_eq!(back, bits);
        let mut bad = b.clone();
        *bad.last_mut().unwrap() |= 1;
        assert!(decode_bits(&bad).is_err());
    }

    proptest! {
        #[test]
        fn decoders_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = decode_pulse_train(&bytes);
            let _ = decode_symbols(&bytes);
            let _ = decode_calibration(&bytes);
            let _ = decode_bits(&bytes);
        }

        #[test]
        fn mutated_valid_files_never_panic(pos in 0usize..200, val in any::<u8>()) {
            let mut a = encode_pulse_train(&[pulse(0), pulse(1)], 2.0);
            let mut b = encode_symbols(&SymbolStream::new(8, StreamOrigin::ShortArm, (0..100).collect()).unwrap());
            let mut c = encode_bits(&header(13), &BitString::zeros(13)).unwrap();
            for buf in [&mut a, &mut b, &mut c] {
                let p = pos % buf.len();
                buf[p] = val;
            }
            let _ = decode_pulse_train(&a);
            let _ = decode_symbols(&b);
            let _ = decode_bits(&c);
        }

        #[test]
        fn symbol_round_trip(bits in 1u8..=8, raw in proptest::collection::vec(any::<u8>(), 0..300)) {
            let syms: Vec<u8> = raw.iter().map(|s| (*s as u16 % (1u16 << bits)) as u8).collect();
            let s = SymbolStream::new(bits, StreamOrigin::Interference, syms).unwrap();
            prop_assert_eq!(decode_symbols(&encode_symbols(&s)).unwrap(), s);
        }
    }
}
