//! The compressed protocol `Π_H` and the maps between long and short
//! transcripts.

use super::matrix::MatrixH;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::{MessageSpace, ProtocolSpec, Transcript, TranscriptEntry};

/// `Π_H`: every slot sends a uniform `ell`-bit index `r`; the output is the
/// base output on the transcript with each `r` replaced by `H(round, party, r)`.
pub fn compressed_protocol(spec: &ProtocolSpec, h: &MatrixH) -> Result<ProtocolSpec> {
    if h.params().base != *spec.params() {
        return Err(Error::ShapeMismatch(format!(
            "matrix built for {:?}, protocol has {:?}",
            h.params().base,
            spec.params()
        )));
    }
    let base = spec.clone();
    let matrix = h.clone();
    let label = format!("{}[H,ell={}]", spec.label(), h.params().ell);
    Ok(
        ProtocolSpec::new(label, h.params().short_params(), move |short| {
            base.output(&lift(&matrix, short))
        })
        .with_message_space(MessageSpace::UniformBits),
    )
}

/// Replaces every short message by its image under `H`, keeping order and
/// speaker status.
pub fn lift(h: &MatrixH, short: &Transcript) -> Transcript {
    let mut long = Transcript::new(short.parties(), short.rounds());
    for e in short.entries() {
        long.push(TranscriptEntry {
            message: h.get(e.round, e.party, &e.message),
            ..e.clone()
        })
        .expect("lifting preserves the schedule");
    }
    long
}

/// The preimage of `long` in row `(round, party)` with the smallest index, if any.
///
/// Indices are compared as little-endian integers, so `"01"` (value 2) comes
/// after `"10"` (value 1).
pub fn map_h(h: &MatrixH, round: usize, party: usize, long: &BitString) -> Option<BitString> {
    let target = long.to_u64()?;
    if long.len() != h.params().base.message_bits {
        return None;
    }
    h.row(round, party)
        .iter()
        .position(|&v| v == target)
        .map(|r| BitString::from_u64(r as u64, h.params().ell))
}

/// Slot-wise [`map_h`]; `None` as soon as one slot has no preimage.
pub fn map_transcript(h: &MatrixH, long: &Transcript) -> Option<Transcript> {
    let mut short = Transcript::new(long.parties(), long.rounds());
    for e in long.entries() {
        let message = map_h(h, e.round, e.party, &e.message)?;
        short
            .push(TranscriptEntry {
                message,
                ..e.clone()
            })
            .expect("same schedule");
    }
    Some(short)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::compression::matrix::sample_matrix;
    use crate::compression::CompressionParams;
    use crate::engine::enumerate_honest_outputs;
    use crate::model::{ProtocolParams, SpeakerStatus};
    use crate::protocols::make_xor_coin;
    use crate::rng::RngSeed;
    use crate::stats::statistical_distance;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    fn cp(n: usize, d: usize, l: usize, ell: usize) -> CompressionParams {
        CompressionParams::new(ProtocolParams::new(n, d, l, 1), ell).unwrap()
    }

    #[test]
    fn map_h_examples() {
        let c = cp(1, 1, 2, 1);
        let h = MatrixH::from_rows(c, &[&["00", "11"]]).unwrap();
        assert_eq!(map_h(&h, 0, 0, &bs("11")), Some(bs("1")));
        assert_eq!(map_h(&h, 0, 0, &bs("01")), None);
        let dup = MatrixH::from_rows(c, &[&["01", "01"]]).unwrap();
        assert_eq!(map_h(&dup, 0, 0, &bs("01")), Some(bs("0")));
    }

    #[test]
    fn map_transcript_examples() {
        let c = cp(2, 1, 2, 1);
        let h = MatrixH::from_rows(c, &[&["00", "11"], &["10", "10"]]).unwrap();
        let empty = Transcript::new(2, 1);
        assert_eq!(map_transcript(&h, &empty).unwrap().len(), 0);
        let entry = |party, m: &str| TranscriptEntry {
            round: 0,
            party,
            message: bs(m),
            status: SpeakerStatus::Honest,
        };
        let mut t = Transcript::new(2, 1);
        t.push(entry(0, "11")).unwrap();
        assert_eq!(map_transcript(&h, &t).unwrap().key(), vec![(0, bs("1"))]);
        t.push(entry(1, "01")).unwrap();
        assert_eq!(map_transcript(&h, &t), None);
    }

    #[test]
    fn xor_with_even_rows_is_constant() {
        let spec = make_xor_coin(2, 1, 2).unwrap();
        let h = MatrixH::from_rows(cp(2, 1, 2, 1), &[&["00", "11"], &["00", "11"]]).unwrap();
        let short = compressed_protocol(&spec, &h).unwrap();
        let dist = enumerate_honest_outputs(&short, 1 << 20).unwrap();
        assert_eq!(dist.support(), vec![0]);
    }

    #[test]
    fn constant_rows_give_constant_output() {
        let spec = make_xor_coin(2, 1, 2).unwrap();
        let h = MatrixH::from_rows(
            cp(2, 1, 2, 2),
            &[&["10", "10", "10", "10"], &["00", "00", "00", "00"]],
        )
        .unwrap();
        let short = compressed_protocol(&spec, &h).unwrap();
        let zero = Transcript::from_grid(2, 1, vec![bs("10"), bs("00")]);
        let dist = enumerate_honest_outputs(&short, 1 << 20).unwrap();
        assert_eq!(dist.support(), vec![spec.output_value(&zero)]);
    }

    #[test]
    fn identity_rows_preserve_the_output_distribution() {
        let spec = make_xor_coin(2, 1, 2).unwrap();
        let h = MatrixH::from_rows(
            cp(2, 1, 2, 2),
            &[&["00", "10", "01", "11"], &["00", "10", "01", "11"]],
        )
        .unwrap();
        let a = enumerate_honest_outputs(&spec, 1 << 20).unwrap();
        let b =
            enumerate_honest_outputs(&compressed_protocol(&spec, &h).unwrap(), 1 << 20).unwrap();
        assert!(
            statistical_distance(&a, &b).unwrap().exact().unwrap()
                == &num_rational::BigRational::from_integer(0.into())
        );
    }

    #[test]
    fn shape_mismatch() {
        let spec = make_xor_coin(3, 1, 2).unwrap();
        let h = sample_matrix(&cp(2, 1, 2, 1), RngSeed(0)).unwrap();
        assert!(matches!(
            compressed_protocol(&spec, &h),
            Err(Error::ShapeMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn map_h_round_trips(seed in any::<u64>(), l in 1usize..5, ell in 1usize..4, r in any::<u64>()) {
            prop_assume!(ell <= l);
            let c = cp(2, 2, l, ell);
            let h = sample_matrix(&c, RngSeed(seed)).unwrap();
            let r = BitString::from_u64(r % (1 << ell), ell);
            for (round, party) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let image = h.get(round, party, &r);
                let back = map_h(&h, round, party, &image).unwrap();
                prop_assert_eq!(h.get(round, party, &back), image);
            }
        }

        #[test]
        fn compressed_output_is_base_output_of_lift(seed in any::<u64>(), grid_seed in any::<u64>()) {
            let spec = make_xor_coin(2, 2, 3).unwrap();
            let h = sample_matrix(&cp(2, 2, 3, 2), RngSeed(seed)).unwrap();
            let short_spec = compressed_protocol(&spec, &h).unwrap();
            let grid: Vec<BitString> = (0..4).map(|k| BitString::from_u64((grid_seed >> (2 * k)) & 3, 2)).collect();
            let short = Transcript::from_grid(2, 2, grid.clone());
            let long = Transcript::from_grid(2, 2, grid.iter().enumerate().map(|(k, r)| h.get(k / 2, k % 2, r)).collect());
            prop_assert_eq!(short_spec.output(&short), spec.output(&long));
            prop_assert_eq!(lift(&h, &map_transcript(&h, &long).unwrap()), long);
        }
    }
}
