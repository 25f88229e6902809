//! Built-in public-coin protocols.

use std::fmt;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::{ProtocolParams, ProtocolSpec, Transcript};

/// Registered protocol constructors with their parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinProtocol {
    XorCoin {
        n: usize,
        d: usize,
        l: usize,
    },
    MajorityCoin {
        n: usize,
    },
    XorSelection {
        n: usize,
        d: usize,
        l: usize,
        m: usize,
    },
    LeaderElectionModN {
        n: usize,
        l: usize,
    },
}

impl BuiltinProtocol {
    pub const NAMES: [&'static str; 4] = [
        "xor_coin",
        "majority_coin",
        "xor_selection",
        "leader_election_mod_n",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinProtocol::XorCoin { .. } => "xor_coin",
            BuiltinProtocol::MajorityCoin { .. } => "majority_coin",
            BuiltinProtocol::XorSelection { .. } => "xor_selection",
            BuiltinProtocol::LeaderElectionModN { .. } => "leader_election_mod_n",
        }
    }

    pub fn build(&self) -> Result<ProtocolSpec> {
        match *self {
            BuiltinProtocol::XorCoin { n, d, l } => make_xor_coin(n, d, l),
            BuiltinProtocol::MajorityCoin { n } => make_majority_coin(n),
            BuiltinProtocol::XorSelection { n, d, l, m } => make_xor_selection(n, d, l, m),
            BuiltinProtocol::LeaderElectionModN { n, l } => make_leader_election_mod_n(n, l),
        }
    }
}

impl fmt::Display for BuiltinProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BuiltinProtocol::XorCoin { n, d, l } => write!(f, "xor_coin(n={n},d={d},L={l})"),
            BuiltinProtocol::MajorityCoin { n } => write!(f, "majority_coin(n={n})"),
            BuiltinProtocol::XorSelection { n, d, l, m } => {
                write!(f, "xor_selection(n={n},d={d},L={l},m={m})")
            }
            BuiltinProtocol::LeaderElectionModN { n, l } => {
                write!(f, "leader_election_mod_n(n={n},L={l})")
            }
        }
    }
}

fn checked(params: ProtocolParams) -> Result<ProtocolParams> {
    params.check()?;
    Ok(params)
}

/// Output is the XOR of every transcript bit.
pub fn make_xor_coin(n: usize, d: usize, l: usize) -> Result<ProtocolSpec> {
    let params = checked(ProtocolParams::new(n, d, l, 1))?;
    Ok(ProtocolSpec::new(
        format!("xor_coin(n={n},d={d},L={l})"),
        params,
        |t: &Transcript| {
            let parity = t
                .entries()
                .iter()
                .fold(false, |acc, e| acc ^ e.message.parity());
            BitString::from_u64(parity as u64, 1)
        },
    ))
}

/// One round of single bits; output is the majority bit.
pub fn make_majority_coin(n: usize) -> Result<ProtocolSpec> {
    if n.is_multiple_of(2) {
        return Err(Error::EvenParties(n));
    }
    let params = checked(ProtocolParams::new(n, 1, 1, 1))?;
    Ok(ProtocolSpec::new(
        format!("majority_coin(n={n})"),
        params,
        move |t: &Transcript| {
            let ones = t.entries().iter().filter(|e| e.message.bit(0)).count();
            BitString::from_u64((2 * ones > n) as u64, 1)
        },
    ))
}

/// Output is the bitwise XOR of the first `m` bits of every message.
pub fn make_xor_selection(n: usize, d: usize, l: usize, m: usize) -> Result<ProtocolSpec> {
    if m > l {
        return Err(Error::WidthMismatch {
            output_bits: m,
            message_bits: l,
        });
    }
    let params = checked(ProtocolParams::new(n, d, l, m))?;
    Ok(ProtocolSpec::new(
        format!("xor_selection(n={n},d={d},L={l},m={m})"),
        params,
        move |t: &Transcript| {
            let mut acc = BitString::zeros(m);
            for e in t.entries() {
                acc.xor_assign(&e.message.slice(0, m));
            }
            acc
        },
    ))
}

/// Output width of leader election among `n` parties.
pub fn leader_bits(n: usize) -> usize {
    (usize::BITS - (n.max(2) - 1).leading_zeros()) as usize
}

/// One round; output is the sum of all messages, read as little-endian
/// integers, modulo `n`, encoded in `ceil(log2 n)` bits (at least one).
pub fn make_leader_election_mod_n(n: usize, l: usize) -> Result<ProtocolSpec> {
    if l > 64 {
        return Err(Error::InvalidParams("leader election needs L ≤ 64".into()));
    }
    let m = leader_bits(n);
    let params = checked(ProtocolParams::new(n, 1, l, m))?;
    Ok(ProtocolSpec::new(
        format!("leader_election_mod_n(n={n},L={l})"),
        params,
        move |t: &Transcript| {
            let modulus = n as u128;
            let sum = t.entries().iter().fold(0u128, |acc, e| {
                (acc + e.message.to_u64().expect("L ≤ 64") as u128) % modulus
            });
            BitString::from_u64(sum as u64, m)
        },
    ))
}

/// Constant output, for tests and calibration.
pub fn make_constant(params: ProtocolParams, value: BitString) -> Result<ProtocolSpec> {
    let params = checked(params)?;
    if value.len() != params.output_bits {
        return Err(Error::WidthMismatch {
            output_bits: value.len(),
            message_bits: params.output_bits,
        });
    }
    Ok(ProtocolSpec::new(
        format!("constant({value})"),
        params,
        move |_: &Transcript| value.clone(),
    ))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use num_bigint::BigUint;
    use num_rational::BigRational;

    use super::*;
    use crate::engine::{enumerate_honest_outputs, validate_protocol};
    use crate::stats::Distribution;
    use crate::DEFAULT_ENUMERATION_CAP;

    fn bits(s: &[&str]) -> Vec<BitString> {
        s.iter().map(|x| BitString::parse(x).unwrap()).collect()
    }

    fn out(spec: &ProtocolSpec, grid: &[&str]) -> String {
        let p = spec.params();
        spec.output(&Transcript::from_grid(p.parties, p.rounds, bits(grid)))
            .to_string()
    }

    #[test]
    fn concrete_outputs() {
        let x = make_xor_coin(2, 2, 2).unwrap();
        assert_eq!(out(&x, &["00", "00", "00", "00"]), "0");
        assert_eq!(out(&x, &["10", "00", "11", "01"]), "0");
        assert_eq!(out(&x, &["10", "00", "11", "00"]), "1");
        let maj = make_majority_coin(3).unwrap();
        assert_eq!(out(&maj, &["1", "1", "0"]), "1");
        let maj5 = make_majority_coin(5).unwrap();
        assert_eq!(out(&maj5, &["0", "0", "0", "1", "1"]), "0");
        let sel = make_xor_selection(2, 1, 2, 2).unwrap();
        assert_eq!(out(&sel, &["01", "11"]), "10");
        assert_eq!(out(&make_xor_selection(1, 1, 2, 2).unwrap(), &["00"]), "00");
        let le = make_leader_election_mod_n(2, 1).unwrap();
        assert_eq!(out(&le, &["0", "1"]), "1");
    }

    #[test]
    fn constructor_errors() {
        assert_eq!(make_majority_coin(4).unwrap_err(), Error::EvenParties(4));
        assert!(matches!(
            make_xor_selection(2, 1, 1, 2),
            Err(Error::WidthMismatch { .. })
        ));
        assert!(make_xor_coin(2, 0, 1).is_err());
    }

    #[test]
    fn leader_width() {
        assert_eq!(leader_bits(1), 1);
        assert_eq!(leader_bits(2), 1);
        assert_eq!(leader_bits(3), 2);
        assert_eq!(leader_bits(4), 2);
        assert_eq!(leader_bits(5), 3);
    }

    #[test]
    fn builtins_validate() {
        for p in [
            BuiltinProtocol::XorCoin { n: 3, d: 2, l: 2 },
            BuiltinProtocol::MajorityCoin { n: 7 },
            BuiltinProtocol::XorSelection {
                n: 2,
                d: 3,
                l: 4,
                m: 3,
            },
            BuiltinProtocol::LeaderElectionModN { n: 5, l: 3 },
        ] {
            assert_eq!(validate_protocol(&p.build().unwrap()), Ok(()), "{p}");
        }
    }

    #[test]
    fn honest_distributions_are_uniform() {
        for (spec, w) in [
            (make_xor_coin(2, 1, 1).unwrap(), 1),
            (make_xor_coin(2, 2, 2).unwrap(), 1),
            (make_xor_selection(2, 1, 2, 2).unwrap(), 2),
            (make_xor_selection(2, 2, 3, 2).unwrap(), 2),
            (make_leader_election_mod_n(2, 2).unwrap(), 1),
        ] {
            assert_eq!(
                enumerate_honest_outputs(&spec, DEFAULT_ENUMERATION_CAP).unwrap(),
                Distribution::uniform(w),
                "{spec:?}"
            );
        }
        for n in [1, 3, 5, 7, 9] {
            let d =
                enumerate_honest_outputs(&make_majority_coin(n).unwrap(), DEFAULT_ENUMERATION_CAP)
                    .unwrap();
            assert_eq!(d, Distribution::uniform(1), "n={n}");
        }
    }

    #[test]
    fn leader_election_three_parties_matches_convolution() {
        // Residues of a uniform 2-bit value mod 3: {0, 3} -> 0, 1 -> 1, 2 -> 2.
        let single = [2u64, 1, 1];
        let mut acc = vec![1u64, 0, 0];
        for _ in 0..3 {
            let mut next = vec![0u64; 3];
            for (a, &ca) in acc.iter().enumerate() {
                for (b, &cb) in single.iter().enumerate() {
                    next[(a + b) % 3] += ca * cb;
                }
            }
            acc = next;
        }
        let counts: BTreeMap<u64, BigUint> = acc
            .iter()
            .enumerate()
            .map(|(k, &c)| (k as u64, BigUint::from(c)))
            .collect();
        let oracle = Distribution::exact_from_counts(2, counts, BigUint::from(64u32));
        let d = enumerate_honest_outputs(
            &make_leader_election_mod_n(3, 2).unwrap(),
            DEFAULT_ENUMERATION_CAP,
        )
        .unwrap();
        assert_eq!(d, oracle);
        assert_eq!(
            d.exact_mass(0).unwrap(),
            BigRational::new(22.into(), 64.into())
        );
        assert_eq!(
            d.exact_mass(3).unwrap(),
            BigRational::new(0.into(), 1.into())
        );
    }
}
