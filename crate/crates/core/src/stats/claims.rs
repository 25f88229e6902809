//! Exhaustive check of the counting claim: for `f: U → [M]` with
//! `α_i = Pr_u[f(u) = i]`, `E_u[α_{f(u)}] ≥ 1/M` and, for every `ε`,
//! `Pr_u[α_{f(u)} ≥ ε/M] ≥ 1 − ε`.
//!
//! With `c_i = |f⁻¹(i)|` and `ε = p/q` both conditions reduce to integer
//! inequalities: `M·Σc_i² ≥ |U|²`, and `q·Σ{c_i : c_i·M·q ≥ p·|U|} ≥ (q−p)·|U|`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimViolation {
    /// `f(u)` for `u = 0..|U|`.
    pub function: Vec<usize>,
    /// `None` for the expectation bound, otherwise the failing `ε`.
    pub epsilon: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClaimReport {
    pub u_size: usize,
    pub m: usize,
    pub epsilons: Vec<String>,
    pub functions_checked: u64,
    pub violations: Vec<ClaimViolation>,
}

pub fn claim_prob_verify(
    u_size: usize,
    m: usize,
    eps_grid: &[BigRational],
    cap: u128,
) -> Result<ClaimReport> {
    if u_size == 0 || m == 0 {
        return Err(Error::InvalidParams("|U| ≥ 1 and M ≥ 1 required".into()));
    }
    for e in eps_grid {
        if e.is_negative() || *e > BigRational::one() {
            return Err(Error::InvalidParams(format!("ε = {e} outside [0, 1]")));
        }
    }
    let total = (m as f64).powi(u_size as i32);
    if total > cap as f64 {
        return Err(Error::cap("functions U → [M]", total, cap));
    }
    let u = BigInt::from(u_size);
    let mm = BigInt::from(m);
    let mut f = vec![0usize; u_size];
    let mut violations = Vec::new();
    let mut checked = 0u64;
    loop {
        checked += 1;
        let mut counts = vec![0u64; m];
        for &i in &f {
            counts[i] += 1;
        }
        let square_sum: BigInt = counts.iter().map(|&c| BigInt::from(c * c)).sum();
        if &mm * square_sum < &u * &u {
            violations.push(ClaimViolation {
                function: f.clone(),
                epsilon: None,
                detail: "E[α_f(u)] < 1/M".into(),
            });
        }
        for eps in eps_grid {
            let (p, q) = (eps.numer(), eps.denom());
            let heavy: BigInt = counts
                .iter()
                .filter(|&&c| BigInt::from(c) * &mm * q >= p * &u)
                .map(|&c| BigInt::from(c))
                .sum();
            if heavy * q < (q - p) * &u {
                violations.push(ClaimViolation {
                    function: f.clone(),
                    epsilon: Some(eps.to_string()),
                    detail: "Pr[α_f(u) ≥ ε/M] < 1 − ε".into(),
                });
            }
        }
        // odometer over f
        let mut i = 0;
        loop {
            if i == u_size {
                return Ok(ClaimReport {
                    u_size,
                    m,
                    epsilons: eps_grid.iter().map(|e| e.to_string()).collect(),
                    functions_checked: checked,
                    violations,
                });
            }
            f[i] += 1;
            if f[i] < m {
                break;
            }
            f[i] = 0;
            i += 1;
        }
    }
}

/// Parses a plain decimal such as `0.25` into an exact rational.
pub fn parse_decimal(text: &str) -> Result<BigRational> {
    let bad = || Error::Malformed(format!("not a decimal number: {text:?}"));
    let t = text.trim();
    let (neg, t) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let value = BigRational::new(digits, scale);
    Ok(if neg { -value } else { value })
}

/// `ε` grid used throughout: 0.1, 0.25, 0.5, 0.9.
pub fn default_eps_grid() -> Vec<BigRational> {
    ["0.1", "0.25", "0.5", "0.9"]
        .iter()
        .map(|s| parse_decimal(s).expect("literal"))
        .collect()
}
