use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ProtocolParams;

/// Short message length `ell` (so `N = 2^ell`) on top of the base parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CompressionParams {
    pub base: ProtocolParams,
    pub ell: usize,
}

/// Largest supported `ell`; rows hold `2^ell` entries in memory.
pub const MAX_ELL: usize = 24;

impl CompressionParams {
    pub fn new(base: ProtocolParams, ell: usize) -> Result<Self> {
        base.check()?;
        if ell == 0 || ell > base.message_bits {
            return Err(Error::InvalidParams(format!(
                "1 ≤ ell ≤ L required (ell={ell}, L={})",
                base.message_bits
            )));
        }
        if ell > MAX_ELL {
            return Err(Error::InvalidParams(format!("ell ≤ {MAX_ELL} required")));
        }
        if base.message_bits > 64 {
            return Err(Error::InvalidParams("matrices support L ≤ 64".into()));
        }
        Ok(CompressionParams { base, ell })
    }

    /// `N = 2^ell`.
    pub fn row_len(&self) -> usize {
        1 << self.ell
    }

    /// Number of rows, `d·n`.
    pub fn rows(&self) -> usize {
        self.base.slots()
    }

    /// Total bits of a matrix, `d·n·N·L`.
    pub fn matrix_bits(&self) -> f64 {
        self.rows() as f64 * self.row_len() as f64 * self.base.message_bits as f64
    }

    /// Parameters of the compressed protocol.
    pub fn short_params(&self) -> ProtocolParams {
        ProtocolParams {
            message_bits: self.ell,
            ..self.base
        }
    }
}

/// `m·log2(n·d)^4`, rounded up. Exact whenever `n·d` is a power of two.
pub fn ell_formula(m: u64, n: u64, d: u64) -> Result<u64> {
    let nd = n
        .checked_mul(d)
        .ok_or_else(|| Error::InvalidParams("n·d overflows".into()))?;
    if nd < 2 {
        return Err(Error::InvalidParams("n·d ≥ 2 required".into()));
    }
    if nd.is_power_of_two() {
        let log = nd.trailing_zeros() as u64;
        return m
            .checked_mul(log.pow(4))
            .ok_or_else(|| Error::InvalidParams("ell overflows 64 bits".into()));
    }
    Ok((m as f64 * (nd as f64).log2().powi(4)).ceil() as u64)
}

/// The slack budget: `ε = 2^{−log²(dn)}` and
/// `μ* = (√ε + 1 − (1−ε)^{dn})·2dn`, next to the slack actually measured.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackBudget {
    pub epsilon: f64,
    pub mu_star: f64,
    /// `μ* ≥ 1`: the bound says nothing at these parameters.
    pub vacuous: bool,
    pub measured_slack: Option<f64>,
}

pub fn mu_star(n: u64, d: u64) -> Result<SlackBudget> {
    let dn = n
        .checked_mul(d)
        .ok_or_else(|| Error::InvalidParams("n·d overflows".into()))?;
    if dn < 2 {
        return Err(Error::InvalidParams("d·n ≥ 2 required".into()));
    }
    let log = (dn as f64).log2();
    let epsilon = (-(log * log)).exp2();
    // 1 − (1−ε)^{dn} without cancellation for tiny ε.
    let miss = -((dn as f64) * (-epsilon).ln_1p()).exp_m1();
    let mu = (epsilon.sqrt() + miss) * 2.0 * dn as f64;
    Ok(SlackBudget {
        epsilon,
        mu_star: mu,
        vacuous: mu >= 1.0,
        measured_slack: None,
    })
}

impl SlackBudget {
    pub fn with_measured(mut self, slack: f64) -> Self {
        self.measured_slack = Some(slack);
        self
    }
}

#[cfg(test)]
mod tests {
    use astro_float::{BigFloat, Consts, RoundingMode};

    use super::*;

    #[test]
    fn ell_examples() {
        assert_eq!(ell_formula(1, 2, 2).unwrap(), 16);
        assert_eq!(ell_formula(2, 4, 4).unwrap(), 512);
        assert_eq!(ell_formula(1, 2, 1).unwrap(), 1);
        // log2(3)^4 = 6.36...
        assert_eq!(ell_formula(1, 3, 1).unwrap(), 7);
        assert!(ell_formula(1, 1, 1).is_err());
    }

    #[test]
    fn mu_star_small() {
        let b = mu_star(2, 2).unwrap();
        assert_eq!(b.epsilon, 0.0625);
        let direct = (0.25 + 1.0 - 0.9375f64.powi(4)) * 8.0;
        assert!((b.mu_star - direct).abs() < 1e-12);
        assert!((b.mu_star - 3.820).abs() < 1e-3);
        assert!(b.vacuous);
    }

    /// 256-bit evaluation of the same expression, written out term by term.
    fn mu_star_oracle(n: u64, d: u64) -> f64 {
        let p = 256;
        let rm = RoundingMode::ToEven;
        let mut cc = Consts::new().unwrap();
        let dn = BigFloat::from_u64(n * d, p);
        let log = dn.log2(p, rm, &mut cc);
        let eps = BigFloat::from_u64(2, p).pow(&log.mul(&log, p, rm).neg(), p, rm, &mut cc);
        let one = BigFloat::from_u64(1, p);
        let keep = one.sub(&eps, p, rm).powi((n * d) as usize, p, rm);
        let total = eps
            .sqrt(p, rm)
            .add(&one.sub(&keep, p, rm), p, rm)
            .mul(&dn, p, rm)
            .mul(&BigFloat::from_u64(2, p), p, rm);
        total
            .format(astro_float::Radix::Dec, rm, &mut cc)
            .unwrap()
            .parse()
            .unwrap()
    }

    #[test]
    fn mu_star_matches_high_precision() {
        for (n, d) in [(2, 2), (10, 10), (3, 7), (64, 64)] {
            let fast = mu_star(n, d).unwrap().mu_star;
            let oracle = mu_star_oracle(n, d);
            assert!(
                ((fast - oracle) / oracle).abs() < 1e-12,
                "n={n} d={d}: {fast} vs {oracle}"
            );
        }
    }

    #[test]
    fn mu_star_vanishes() {
        let big = mu_star(1 << 20, 1 << 20).unwrap();
        assert!(big.mu_star < 1e-30 && !big.vacuous);
    }
}
