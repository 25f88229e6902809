//! Statistical distance, entropy, KL divergence and the entropy-to-distance
//! bound.
//!
//! Exact distributions are handled in two tiers: statistical distance stays
//! rational, while entropy and KL are transcendental and evaluated with
//! 256-bit binary floats. Each evaluation is a sum of at most `2^24` terms
//! whose individual rounding error is far below `2^-240`, so the result is
//! within [`ERROR_BUDGET_LOG2`] (that is, `2^-200`) of the true value.

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use super::distribution::{ratio_to_f64, Distribution, Prob};
use crate::error::{Error, Result};

/// Working precision, in bits, of exact-mode entropy and KL.
pub const PRECISION: usize = 256;

/// Exact-mode entropy and KL are within `2^ERROR_BUDGET_LOG2` of the truth.
pub const ERROR_BUDGET_LOG2: i32 = -200;

const RM: RoundingMode = RoundingMode::ToEven;

const LOG2_CACHE_LIMIT: usize = 1 << 16;

thread_local! {
    static LOG2_CACHE: std::cell::RefCell<std::collections::HashMap<BigInt, BigFloat>> = Default::default();
}

/// High-precision arithmetic context.
pub struct Precise {
    cc: Consts,
}

impl Precise {
    pub fn new() -> Self {
        Precise {
            cc: Consts::new().expect("astro-float constants"),
        }
    }

    pub fn int(&mut self, x: &BigInt) -> BigFloat {
        BigFloat::parse(&x.to_string(), Radix::Dec, PRECISION, RM, &mut self.cc)
    }

    pub fn ratio(&mut self, r: &BigRational) -> BigFloat {
        let n = self.int(r.numer());
        let d = self.int(r.denom());
        n.div(&d, PRECISION, RM)
    }

    pub fn small(&mut self, x: i64) -> BigFloat {
        self.int(&BigInt::from(x))
    }

    /// `log2(r)` for a positive rational, as `log2(num) - log2(den)`.
    pub fn log2_ratio(&mut self, r: &BigRational) -> BigFloat {
        let n = self.log2_int(r.numer());
        let d = self.log2_int(r.denom());
        n.sub(&d, PRECISION, RM)
    }

    /// `log2(x)` for a positive integer. Results are memoised per thread;
    /// the cache only ever holds values this same code computed.
    pub fn log2_int(&mut self, x: &BigInt) -> BigFloat {
        if let Some(v) = LOG2_CACHE.with(|c| c.borrow().get(x).cloned()) {
            return v;
        }
        let v = self.int(x).log2(PRECISION, RM, &mut self.cc);
        LOG2_CACHE.with(|c| {
            let mut c = c.borrow_mut();
            if c.len() >= LOG2_CACHE_LIMIT {
                c.clear();
            }
            c.insert(x.clone(), v.clone());
        });
        v
    }

    pub fn to_f64(&mut self, x: &BigFloat) -> f64 {
        if x.is_zero() {
            return 0.0;
        }
        let text = x
            .format(Radix::Dec, RM, &mut self.cc)
            .expect("formatting a finite float");
        text.parse().unwrap_or(f64::NAN)
    }

    /// `2^e` exactly.
    pub fn pow2(&mut self, e: i32) -> BigFloat {
        let p = self.small(2).powi(e.unsigned_abs() as usize, PRECISION, RM);
        if e < 0 {
            self.small(1).div(&p, PRECISION, RM)
        } else {
            p
        }
    }

    pub fn sqrt(&mut self, x: &BigFloat) -> BigFloat {
        x.sqrt(PRECISION, RM)
    }
}

thread_local! {
    static POOL: std::cell::RefCell<Option<Precise>> = const { std::cell::RefCell::new(None) };
}

/// A per-thread [`Precise`] context, returned to the thread on drop.
pub struct Pooled(Option<Precise>);

impl Precise {
    /// Reuses this thread's context; building one costs tens of microseconds.
    pub fn pooled() -> Pooled {
        Pooled(Some(
            POOL.with(|p| p.borrow_mut().take()).unwrap_or_default(),
        ))
    }
}

impl std::ops::Deref for Pooled {
    type Target = Precise;
    fn deref(&self) -> &Precise {
        self.0.as_ref().expect("present until drop")
    }
}

impl std::ops::DerefMut for Pooled {
    fn deref_mut(&mut self) -> &mut Precise {
        self.0.as_mut().expect("present until drop")
    }
}

impl Drop for Pooled {
    fn drop(&mut self) {
        let ctx = self.0.take();
        POOL.with(|p| *p.borrow_mut() = ctx);
    }
}

impl Default for Precise {
    fn default() -> Self {
        Self::new()
    }
}

fn same_universe(a: &Distribution, b: &Distribution) -> Result<()> {
    if a.width() != b.width() {
        return Err(Error::SupportMismatch(a.width(), b.width()));
    }
    Ok(())
}

/// `½·Σ|a(ω) − b(ω)|`. Exact when both inputs are exact.
pub fn statistical_distance(a: &Distribution, b: &Distribution) -> Result<Prob> {
    same_universe(a, b)?;
    let mut support = a.support();
    support.extend(b.support());
    support.sort_unstable();
    support.dedup();
    if let (Some(ma), Some(mb)) = (a.exact_masses(), b.exact_masses()) {
        let zero = BigRational::zero();
        let total = support.iter().fold(BigRational::zero(), |acc, k| {
            let x = ma.get(k).unwrap_or(&zero);
            let y = mb.get(k).unwrap_or(&zero);
            acc + (x - y).abs()
        });
        return Ok(Prob::Exact(total / BigInt::from(2)));
    }
    let total: f64 = support
        .iter()
        .map(|&k| (a.mass_f64(k) - b.mass_f64(k)).abs())
        .sum();
    Ok(Prob::Approx(total / 2.0))
}

/// Shannon entropy in bits. Exact inputs are evaluated at 256-bit precision
/// and then rounded.
pub fn entropy(a: &Distribution) -> f64 {
    match entropy_precise(a) {
        Ok(h) => Precise::pooled().to_f64(&h),
        Err(_) => a
            .support()
            .into_iter()
            .map(|k| a.mass_f64(k))
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.log2())
            .sum(),
    }
}

pub fn entropy_precise(a: &Distribution) -> Result<BigFloat> {
    let masses = a.exact_masses().ok_or(Error::RequiresExact)?;
    let mut ctx = Precise::pooled();
    let mut h = BigFloat::from_f64(0.0, PRECISION);
    for p in masses.values() {
        let term = ctx.ratio(p).mul(&ctx.log2_ratio(p), PRECISION, RM);
        h = h.sub(&term, PRECISION, RM);
    }
    Ok(h)
}

/// `Σ a(x)·log2(a(x)/b(x))` in bits.
pub fn kl_divergence(a: &Distribution, b: &Distribution) -> Result<f64> {
    same_universe(a, b)?;
    check_continuity(a, b)?;
    if a.is_exact() && b.is_exact() {
        let kl = kl_divergence_precise(a, b)?;
        return Ok(Precise::pooled().to_f64(&kl));
    }
    Ok(a.support()
        .into_iter()
        .map(|k| {
            let p = a.mass_f64(k);
            p * (p / b.mass_f64(k)).log2()
        })
        .sum())
}

pub fn kl_divergence_precise(a: &Distribution, b: &Distribution) -> Result<BigFloat> {
    same_universe(a, b)?;
    check_continuity(a, b)?;
    let (ma, mb) = match (a.exact_masses(), b.exact_masses()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::RequiresExact),
    };
    let mut ctx = Precise::pooled();
    let mut kl = BigFloat::from_f64(0.0, PRECISION);
    for (k, p) in ma {
        let term = ctx
            .ratio(p)
            .mul(&ctx.log2_ratio(&(p / &mb[k])), PRECISION, RM);
        kl = kl.add(&term, PRECISION, RM);
    }
    Ok(kl)
}

fn check_continuity(a: &Distribution, b: &Distribution) -> Result<()> {
    for k in a.support() {
        let missing = match b.mass(k) {
            Prob::Exact(r) => r.is_zero(),
            Prob::Approx(x) => x == 0.0,
        };
        if missing {
            return Err(Error::AbsoluteContinuityViolated { element: k });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PinskerReport {
    pub width: u32,
    /// `k − entropy(a)`.
    pub deficit: f64,
    pub sd_to_uniform: f64,
    /// `√(deficit / 2)`.
    pub bound: f64,
    pub holds: bool,
}

/// Checks `SD(a, U_k) ≤ √((k − entropy(a)) / 2)`. The comparison is made as
/// `2·SD² ≤ deficit + 2^-200` at full precision, so rounding inside the
/// entropy evaluation cannot cause a spurious failure at the uniform point.
pub fn pinsker_check(a: &Distribution) -> Result<PinskerReport> {
    if !a.is_exact() {
        return Err(Error::RequiresExact);
    }
    let k = a.width();
    if k > 24 {
        return Err(Error::cap(
            "uniform reference distribution",
            2f64.powi(k as i32),
            1 << 24,
        ));
    }
    let sd = statistical_distance(a, &Distribution::uniform(k))?;
    let sd = sd.exact().expect("both exact").clone();
    let mut ctx = Precise::pooled();
    let h = entropy_precise(a)?;
    let deficit = ctx.small(k as i64).sub(&h, PRECISION, RM);
    let sd_big = ctx.ratio(&sd);
    let lhs = sd_big
        .mul(&sd_big, PRECISION, RM)
        .mul(&ctx.small(2), PRECISION, RM);
    let rhs = deficit.add(&ctx.pow2(ERROR_BUDGET_LOG2), PRECISION, RM);
    let holds = lhs <= rhs;
    let deficit_f = ctx.to_f64(&deficit).max(0.0);
    Ok(PinskerReport {
        width: k,
        deficit: deficit_f,
        sd_to_uniform: ratio_to_f64(&sd),
        bound: (deficit_f / 2.0).sqrt(),
        holds,
    })
}

/// Whether `KL(a ‖ U_k)` and `k − entropy(a)` agree within `2^-200`.
pub fn kl_uniform_identity_holds(a: &Distribution) -> Result<bool> {
    let k = a.width();
    if k > 24 {
        return Err(Error::cap(
            "uniform reference distribution",
            2f64.powi(k as i32),
            1 << 24,
        ));
    }
    let kl = kl_divergence_precise(a, &Distribution::uniform(k))?;
    let mut ctx = Precise::pooled();
    let rhs = ctx.small(k as i64).sub(&entropy_precise(a)?, PRECISION, RM);
    Ok(within_budget(&kl, &rhs))
}

/// `|x − y| ≤ 2^-200`.
pub fn within_budget(x: &BigFloat, y: &BigFloat) -> bool {
    let mut ctx = Precise::pooled();
    let diff = x.sub(y, PRECISION, RM).abs();
    diff <= ctx.pow2(ERROR_BUDGET_LOG2)
}
