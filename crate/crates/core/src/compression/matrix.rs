//! The matrices `H: [d·n] × {0,1}^ell → {0,1}^L`, their uniform sampling,
//! exhaustive enumeration and `.hmat` file format.

use std::fmt;
use std::io::{Read, Write};

use super::params::CompressionParams;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::ProtocolParams;
use crate::rng::{tag, RngSeed};

/// Largest matrix, in bits, that [`sample_matrix`] will build.
pub const MATRIX_BITS_CAP: f64 = (1u64 << 32) as f64;

/// A table of `d·n·N` entries of `L` bits each, stored flat: entry
/// `(round, party, r)` (zero-based) lives at `(round·n + party)·N + r`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MatrixH {
    cp: CompressionParams,
    entries: Vec<u64>,
}

impl MatrixH {
    /// Builds a matrix from its flat entries; each must fit in `L` bits.
    pub fn from_entries(cp: CompressionParams, entries: Vec<u64>) -> Result<Self> {
        let expected = cp.rows() * cp.row_len();
        if entries.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} entries, expected {expected}",
                entries.len()
            )));
        }
        let l = cp.base.message_bits;
        if l < 64 && entries.iter().any(|&e| e >> l != 0) {
            return Err(Error::ShapeMismatch(format!("entry wider than L={l} bits")));
        }
        Ok(MatrixH { cp, entries })
    }

    /// Builds a matrix from rows of bit strings, one row per `(round, party)`
    /// in slot order.
    pub fn from_rows(cp: CompressionParams, rows: &[&[&str]]) -> Result<Self> {
        if rows.len() != cp.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows, expected {}",
                rows.len(),
                cp.rows()
            )));
        }
        let mut entries = Vec::with_capacity(cp.rows() * cp.row_len());
        for row in rows {
            if row.len() != cp.row_len() {
                return Err(Error::ShapeMismatch(format!(
                    "row of {} entries, expected {}",
                    row.len(),
                    cp.row_len()
                )));
            }
            for text in *row {
                let b = BitString::parse(text)?;
                if b.len() != cp.base.message_bits {
                    return Err(Error::ShapeMismatch(format!(
                        "entry {text:?} is not {} bits",
                        cp.base.message_bits
                    )));
                }
                entries.push(b.to_u64().expect("L ≤ 64"));
            }
        }
        MatrixH::from_entries(cp, entries)
    }

    pub fn params(&self) -> &CompressionParams {
        &self.cp
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    fn row_start(&self, round: usize, party: usize) -> usize {
        (round * self.cp.base.parties + party) * self.cp.row_len()
    }

    /// Row `(round, party)` as integers indexed by `r`.
    pub fn row(&self, round: usize, party: usize) -> &[u64] {
        let s = self.row_start(round, party);
        &self.entries[s..s + self.cp.row_len()]
    }

    /// `H(round, party, r)` as an integer.
    pub fn value(&self, round: usize, party: usize, r: u64) -> u64 {
        self.row(round, party)[r as usize]
    }

    /// `H(round, party, r)`.
    pub fn get(&self, round: usize, party: usize, r: &BitString) -> BitString {
        let idx = r.to_u64().expect("ell ≤ 24");
        BitString::from_u64(self.value(round, party, idx), self.cp.base.message_bits)
    }

    pub fn rows_equal(&self, other: &MatrixH, round: usize, party: usize) -> bool {
        self.row(round, party) == other.row(round, party)
    }

    /// True when every row lists each of its values once.
    pub fn has_injective_rows(&self) -> bool {
        (0..self.cp.rows()).all(|k| {
            let s = k * self.cp.row_len();
            let mut row = self.entries[s..s + self.cp.row_len()].to_vec();
            row.sort_unstable();
            row.windows(2).all(|w| w[0] != w[1])
        })
    }

    /// Flat bit string: entry after entry, each entry little-endian.
    pub fn flat_bits(&self) -> BitString {
        let l = self.cp.base.message_bits;
        let parts: Vec<BitString> = self
            .entries
            .iter()
            .map(|&e| BitString::from_u64(e, l))
            .collect();
        BitString::concat(&parts)
    }

    /// Serialises as `.hmat`: `d`, `n`, `ell`, `L` as little-endian `u32`,
    /// then the flat bit string packed LSB-first into bytes, zero-padded.
    pub fn write_hmat<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let b = &self.cp.base;
        for x in [b.rounds, b.parties, self.cp.ell, b.message_bits] {
            w.write_all(&(x as u32).to_le_bytes())?;
        }
        let bits = self.flat_bits();
        let mut bytes = vec![0u8; bits.len().div_ceil(8)];
        for i in 0..bits.len() {
            if bits.bit(i) {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&bytes)
    }

    pub fn to_hmat(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_hmat(&mut out).expect("writing to a Vec");
        out
    }

    /// Parses `.hmat` data. The output width `m` is not stored in the file
    /// and must be supplied.
    pub fn read_hmat<R: Read>(mut r: R, output_bits: usize) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|e| Error::Malformed(format!("hmat header: {e}")))?;
        let field = |i: usize| {
            u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().expect("4 bytes")) as usize
        };
        let (d, n, ell, l) = (field(0), field(1), field(2), field(3));
        let cp = CompressionParams::new(ProtocolParams::new(n, d, l, output_bits), ell)
            .map_err(|e| Error::Malformed(format!("hmat header: {e}")))?;
        let total_bits = cp.rows() * cp.row_len() * l;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::Malformed(format!("hmat body: {e}")))?;
        if bytes.len() != total_bits.div_ceil(8) {
            return Err(Error::Malformed(format!(
                "hmat body has {} bytes, expected {}",
                bytes.len(),
                total_bits.div_ceil(8)
            )));
        }
        if total_bits % 8 != 0 && bytes[bytes.len() - 1] >> (total_bits % 8) != 0 {
            return Err(Error::Malformed("nonzero padding bits".into()));
        }
        let bit = |i: usize| (bytes[i / 8] >> (i % 8)) & 1 == 1;
        let entries = (0..cp.rows() * cp.row_len())
            .map(|e| (0..l).fold(0u64, |acc, b| acc | (bit(e * l + b) as u64) << b))
            .collect();
        MatrixH::from_entries(cp, entries)
    }
}

impl fmt::Debug for MatrixH {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = self.cp.base.message_bits;
        let rows: Vec<String> = (0..self.cp.rows())
            .map(|k| {
                let row = &self.entries[k * self.cp.row_len()..(k + 1) * self.cp.row_len()];
                let cells: Vec<String> = row
                    .iter()
                    .map(|&e| BitString::from_u64(e, l).to_string())
                    .collect();
                format!("[{}]", cells.join(","))
            })
            .collect();
        write!(f, "H{}", rows.join(""))
    }
}

/// Uniform matrix: every entry an independent uniform `L`-bit string drawn
/// in flat order from the stream at `seed.child(MATRIX)`.
pub fn sample_matrix(cp: &CompressionParams, seed: RngSeed) -> Result<MatrixH> {
    if cp.matrix_bits() > MATRIX_BITS_CAP {
        return Err(Error::cap(
            "matrix bits",
            cp.matrix_bits(),
            MATRIX_BITS_CAP as u128,
        ));
    }
    let mut rng = seed.child(tag::MATRIX).rng();
    let l = cp.base.message_bits;
    let entries = (0..cp.rows() * cp.row_len())
        .map(|_| BitString::random(l, &mut rng).to_u64().expect("L ≤ 64"))
        .collect();
    MatrixH::from_entries(*cp, entries)
}

/// `count` independent uniform matrices; matrix `k` uses `seed.path([MATRIX, k])`.
pub fn sample_matrices(
    cp: &CompressionParams,
    count: usize,
    seed: RngSeed,
) -> Result<Vec<MatrixH>> {
    (0..count)
        .map(|k| sample_matrix(cp, seed.path(&[tag::MATRIX, k as u64])))
        .collect()
}

/// Number of matrices in the family, `2^{d·n·N·L}`.
pub fn family_size(cp: &CompressionParams) -> f64 {
    cp.matrix_bits().exp2()
}

/// Every matrix exactly once, in lexicographic order of the flat bit string
/// (its first bit is the most significant position of the order).
pub fn enumerate_family(
    cp: &CompressionParams,
    cap: u128,
) -> Result<impl Iterator<Item = MatrixH>> {
    let bits = cp.matrix_bits();
    if bits > 24.0 || family_size(cp) > cap as f64 {
        return Err(Error::cap(
            "matrix family",
            family_size(cp),
            cap.min(1 << 24),
        ));
    }
    let bits = bits as usize;
    let cp = *cp;
    let l = cp.base.message_bits;
    let count = cp.rows() * cp.row_len();
    Ok((0..1u64 << bits).map(move |x| {
        let entries = (0..count)
            .map(|e| {
                (0..l).fold(0u64, |acc, b| {
                    acc | ((x >> (bits - 1 - (e * l + b))) & 1) << b
                })
            })
            .collect();
        MatrixH { cp, entries }
    }))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;

    fn cp(n: usize, d: usize, l: usize, ell: usize) -> CompressionParams {
        CompressionParams::new(ProtocolParams::new(n, d, l, 1), ell).unwrap()
    }

    #[test]
    fn family_counts() {
        assert_eq!(
            enumerate_family(&cp(1, 1, 1, 1), 1 << 24).unwrap().count(),
            4
        );
        assert_eq!(
            enumerate_family(&cp(2, 1, 2, 1), 1 << 24).unwrap().count(),
            256
        );
        for (n, d, l, ell) in [
            (1, 1, 2, 1),
            (2, 1, 1, 1),
            (1, 2, 2, 2),
            (3, 1, 1, 1),
            (1, 1, 3, 2),
        ] {
            let c = cp(n, d, l, ell);
            let all: HashSet<MatrixH> = enumerate_family(&c, 1 << 24).unwrap().collect();
            assert_eq!(all.len() as f64, family_size(&c));
        }
        assert!(enumerate_family(&cp(2, 2, 2, 2), 1 << 24)
            .err()
            .unwrap()
            .is_cap());
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let c = cp(2, 1, 2, 1);
        let strings: Vec<String> = enumerate_family(&c, 1 << 24)
            .unwrap()
            .map(|h| h.flat_bits().to_string())
            .collect();
        assert_eq!(strings[0], "00000000");
        assert_eq!(strings[1], "00000001");
        assert_eq!(strings[255], "11111111");
        assert!(strings.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sampling_is_reproducible_and_uniform_on_tiny_tables() {
        let c = cp(1, 1, 1, 1);
        assert_eq!(
            sample_matrix(&c, RngSeed(3)).unwrap(),
            sample_matrix(&c, RngSeed(3)).unwrap()
        );
        let mut counts = [0u32; 4];
        let samples = 100_000;
        for h in sample_matrices(&c, samples, RngSeed(11)).unwrap() {
            counts[(h.entries[0] | h.entries[1] << 1) as usize] += 1;
        }
        for c in counts {
            let f = c as f64 / samples as f64;
            // 4.5 standard deviations of a binomial proportion at p = 1/4.
            assert!(
                (f - 0.25).abs() < 4.5 * (0.25f64 * 0.75 / samples as f64).sqrt(),
                "{counts:?}"
            );
        }
    }

    #[test]
    fn sampled_bits_pass_chi_square() {
        let c = cp(2, 1, 4, 2);
        let samples = 10_000;
        let cells = c.rows() * c.row_len() * 4;
        let mut ones = vec![0u64; cells];
        for h in sample_matrices(&c, samples, RngSeed(5)).unwrap() {
            let bits = h.flat_bits();
            for (i, o) in ones.iter_mut().enumerate() {
                *o += bits.bit(i) as u64;
            }
        }
        // Sum of per-bit chi-square statistics, 32 degrees of freedom.
        let half = samples as f64 / 2.0;
        let chi: f64 = ones
            .iter()
            .map(|&o| 2.0 * (o as f64 - half).powi(2) / half)
            .sum();
        assert!(
            chi < 62.5,
            "chi-square {chi} exceeds the 0.999 quantile for 32 dof"
        );
    }

    #[test]
    fn hmat_round_trip_and_layout() {
        let c = cp(2, 1, 3, 1);
        let h = MatrixH::from_rows(c, &[&["100", "011"], &["111", "000"]]).unwrap();
        let bytes = h.to_hmat();
        assert_eq!(
            &bytes[..16],
            &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0]
        );
        // flat bits 100 011 111 000: byte 0 holds bits 0..8, byte 1 bits 8..12
        assert_eq!(bytes[16], 0b1111_0001);
        assert_eq!(bytes[17], 0b0000_0001);
        assert_eq!(MatrixH::read_hmat(&bytes[..], 1).unwrap(), h);
        let mut bad = bytes.clone();
        bad[17] = 0x80;
        assert!(MatrixH::read_hmat(&bad[..], 1).is_err());
    }

    #[test]
    fn injective_rows() {
        let c = cp(1, 1, 2, 1);
        assert!(MatrixH::from_rows(c, &[&["00", "11"]])
            .unwrap()
            .has_injective_rows());
        assert!(!MatrixH::from_rows(c, &[&["01", "01"]])
            .unwrap()
            .has_injective_rows());
    }

    proptest! {
        #[test]
        fn hmat_round_trip(seed in any::<u64>(), n in 1usize..3, d in 1usize..3, l in 1usize..6, ell in 1usize..3) {
            prop_assume!(ell <= l);
            let c = cp(n, d, l, ell);
            let h = sample_matrix(&c, RngSeed(seed)).unwrap();
            prop_assert_eq!(MatrixH::read_hmat(&h.to_hmat()[..], 1).unwrap(), h);
        }
    }
}
