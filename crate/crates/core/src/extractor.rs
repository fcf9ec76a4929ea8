//! Toeplitz hashing over GF(2), sized by the leftover hash lemma.
//!
//! Bit `i` of the output is `⊕_j T[i][j] x_j` with `T[i][j] = seed[i − j + n − 1]`.
//! Reversing the input turns every row into a sliding window over the seed,
//! so 64 consecutive outputs share one pass over the input words.
//!
//! Toeplitz matrices form a two-universal family, and the leftover hash lemma
//! holds for average min-entropy conditioned on side information, which is
//! what a certificate bounds. Trevisan's construction would need a far shorter
//! seed but is much slower and harder to get right; seed length is not a
//! constraint here.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::SymbolStream;
use crate::entropy::sha256_hex;
use crate::error::{Error, Result};

/// Packed bit string, bit `i` at word `i / 64`, position `i % 64`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_fn(len: usize, f: impl Fn(usize) -> bool) -> Self {
        let mut b = Self::zeros(len);
        for i in 0..len {
            if f(i) {
                b.set(i, true);
            }
        }
        b
    }

    /// First `len` bits of `bytes`, most significant bit of each byte first.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() * 8 < len {
            return Err(Error::param(format!("{} bytes cannot supply {len} bits", bytes.len())));
        }
        Ok(Self::from_fn(len, |i| bytes[i / 8] >> (7 - i % 8) & 1 == 1))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.get(i) {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        let m = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.len != other.len {
            return Err(Error::param("bit strings differ in length"));
        }
        Ok(Self { len: self.len, words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect() })
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&self.to_bytes())
    }

    /// Symbols as `bits`-wide big-endian groups.
    pub fn from_symbols(stream: &SymbolStream) -> Self {
        let b = stream.bits() as usize;
        let s = stream.symbols();
        Self::from_fn(s.len() * b, |i| s[i / b] >> (b - 1 - i % b) & 1 == 1)
    }
}

/// `max(0, floor(N·k − 2·log2(1/ε)))`.
pub fn size_output(input_symbols: u64, k_per_symbol: f64, epsilon: f64) -> Result<u64> {
    if !(k_per_symbol >= 0.0) || !k_per_symbol.is_finite() {
        return Err(Error::param("k_per_symbol must be finite and nonnegative"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon must lie in (0, 1)"));
    }
    let raw = input_symbols as f64 * k_per_symbol - 2.0 * (1.0 / epsilon).log2();
    Ok(if raw <= 0.0 { 0 } else { raw.floor() as u64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorSpec {
    pub input_symbols: u64,
    pub bits: u8,
    pub k_per_symbol: f64,
    pub epsilon: f64,
    pub output_length: u64,
}

impl ExtractorSpec {
    /// `output_length = None` takes the largest admissible length.
    pub fn new(
        input_symbols: u64,
        bits: u8,
        k_per_symbol: f64,
        epsilon: f64,
        output_length: Option<u64>,
    ) -> Result<Self> {
        if !(1..=8).contains(&bits) {
            return Err(Error::BitDepth(format!("{bits} bits outside 1..=8")));
        }
        if k_per_symbol > bits as f64 {
            return Err(Error::param(format!("{k_per_symbol} bits of entropy per {bits}-bit symbol")));
        }
        let max = size_output(input_symbols, k_per_symbol, epsilon)?;
        let output_length = output_length.unwrap_or(max);
        if output_length > max {
            return Err(Error::OutputTooLong { requested: output_length, max });
        }
        Ok(Self { input_symbols, bits, k_per_symbol, epsilon, output_length })
    }

    pub fn input_bits(&self) -> u64 {
        self.input_symbols * self.bits as u64
    }

    pub fn seed_bits(&self) -> u64 {
        if self.output_length == 0 {
            0
        } else {
            self.input_bits() + self.output_length - 1
        }
    }
}

fn window_word(seed: &[u64], bit: usize) -> u64 {
    let (w, r) = (bit / 64, bit % 64);
    let lo = seed.get(w).copied().unwrap_or(0);
    if r == 0 {
        lo
    } else {
        (lo >> r) | (seed.get(w + 1).copied().unwrap_or(0) << (64 - r))
    }
}

/// Toeplitz product of `seed` with the stream's bit vector.
pub fn extract(stream: &SymbolStream, spec: &ExtractorSpec, seed: &BitString) -> Result<BitString> {
    if stream.len() as u64 != spec.input_symbols || stream.bits() != spec.bits {
        return Err(Error::param(format!(
            "stream has {} symbols at {} bits, spec expects {} at {}",
            stream.len(),
            stream.bits(),
            spec.input_symbols,
            spec.bits
        )));
    }
    if seed.len() as u64 != spec.seed_bits() {
        return Err(Error::param(format!("seed has {} bits, family needs {}", seed.len(), spec.seed_bits())));
    }
    let max = size_output(spec.input_symbols, spec.k_per_symbol, spec.epsilon)?;
    if spec.output_length > max {
        return Err(Error::OutputTooLong { requested: spec.output_length, max });
    }
    let x = BitString::from_symbols(stream);
    Ok(toeplitz(&x, seed, spec.output_length as usize))
}

fn toeplitz(x: &BitString, seed: &BitString, out_len: usize) -> BitString {
    let n = x.len();
    let mut out = BitString::zeros(out_len);
    if out_len == 0 || n == 0 {
        return out;
    }
    let rev = BitString::from_fn(n, |k| x.get(n - 1 - k));
    let blocks: Vec<u64> = (0..out_len.div_ceil(64))
        .into_par_iter()
        .map(|q| {
            let mut acc = [0u64; 64];
            let base = 64 * q;
            for (k, &xk) in rev.words.iter().enumerate() {
                if xk == 0 {
                    continue;
                }
                let a = window_word(&seed.words, base + 64 * k);
                let b = window_word(&seed.words, base + 64 * k + 64);
                acc[0] ^= a & xk;
                for (r, slot) in acc.iter_mut().enumerate().skip(1) {
                    *slot ^= ((a >> r) | (b << (64 - r))) & xk;
                }
            }
            let mut word = 0u64;
            for (r, a) in acc.iter().enumerate() {
                word |= ((a.count_ones() & 1) as u64) << r;
            }
            word
        })
        .collect();
    out.words = blocks;
    if !out_len.is_multiple_of(64) {
        let last = out.words.len() - 1;
        out.words[last] &= (1u64 << (out_len % 64)) - 1;
    }
    out
}

/// Reference product straight from the matrix definition.
pub fn toeplitz_naive(x: &BitString, seed: &BitString, out_len: usize) -> BitString {
    let n = x.len();
    BitString::from_fn(out_len, |i| (0..n).filter(|&j| x.get(j) && seed.get(i + n - 1 - j)).count() % 2 == 1)
}
