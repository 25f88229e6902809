use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// A probability: exact rational or floating point estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum Prob {
    Exact(BigRational),
    Approx(f64),
}

impl Prob {
    pub fn to_f64(&self) -> f64 {
        match self {
            Prob::Exact(r) => ratio_to_f64(r),
            Prob::Approx(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Prob::Exact(r) => Some(r),
            Prob::Approx(_) => None,
        }
    }
}

/// Exact values serialize as `"p/q"` strings, estimates as numbers.
impl serde::Serialize for Prob {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Prob::Exact(r) => s.serialize_str(&r.to_string()),
            Prob::Approx(x) => s.serialize_f64(*x),
        }
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    r.to_f64().unwrap_or_else(|| {
        // Fall back on digit-wise scaling for huge numerators and denominators.
        let n = r.numer().to_string();
        let d = r.denom().to_string();
        let scale = n.len().max(d.len()).saturating_sub(300) as i32;
        let nf: f64 = n[..n.len() - scale as usize].parse().unwrap_or(0.0);
        let df: f64 = d[..d.len() - scale as usize].parse().unwrap_or(1.0);
        nf / df
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Masses {
    Exact(BTreeMap<u64, BigRational>),
    Empirical {
        counts: BTreeMap<u64, u64>,
        samples: u64,
    },
}

/// A distribution over the universe `{0,1}^width`, elements encoded as
/// little-endian integers. Zero-mass elements are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    width: u32,
    masses: Masses,
}

impl Distribution {
    /// Exact distribution `count / total`.
    pub fn exact_from_counts(width: u32, counts: BTreeMap<u64, BigUint>, total: BigUint) -> Self {
        assert!(!total.is_zero(), "empty distribution");
        let total = BigInt::from(total);
        let masses = counts
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (k, BigRational::new(BigInt::from(c), total.clone())))
            .collect();
        Distribution {
            width,
            masses: Masses::Exact(masses),
        }
    }

    /// Exact distribution from rational masses; fails unless they are
    /// nonnegative and sum to exactly one.
    pub fn exact(width: u32, masses: BTreeMap<u64, BigRational>) -> Result<Self> {
        let mut sum = BigRational::zero();
        for (&k, m) in &masses {
            if m.is_negative() {
                return Err(Error::Malformed(format!("negative mass at {k:#x}")));
            }
            if width < 64 && k >> width != 0 {
                return Err(Error::Malformed(format!(
                    "element {k:#x} outside {width}-bit universe"
                )));
            }
            sum += m;
        }
        if !sum.is_one() {
            return Err(Error::Malformed(format!("masses sum to {sum}, not 1")));
        }
        let masses = masses.into_iter().filter(|(_, m)| !m.is_zero()).collect();
        Ok(Distribution {
            width,
            masses: Masses::Exact(masses),
        })
    }

    pub fn empirical(width: u32, counts: BTreeMap<u64, u64>) -> Self {
        let samples = counts.values().sum();
        assert!(
            samples > 0,
            "empirical distribution needs at least one sample"
        );
        let counts = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        Distribution {
            width,
            masses: Masses::Empirical { counts, samples },
        }
    }

    pub fn point_mass(width: u32, element: u64) -> Self {
        Distribution {
            width,
            masses: Masses::Exact([(element, BigRational::one())].into()),
        }
    }

    pub fn uniform(width: u32) -> Self {
        assert!(
            width <= 24,
            "uniform distribution over more than 2^24 elements"
        );
        let size = 1u64 << width;
        let mass = BigRational::new(BigInt::one(), BigInt::from(size));
        Distribution {
            width,
            masses: Masses::Exact((0..size).map(|k| (k, mass.clone())).collect()),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.masses, Masses::Exact(_))
    }

    pub fn kind(&self) -> &'static str {
        match &self.masses {
            Masses::Exact(m) if m.values().all(is_dyadic) => "exact",
            Masses::Exact(_) => "exact-rational",
            Masses::Empirical { .. } => "empirical",
        }
    }

    pub fn samples(&self) -> Option<u64> {
        match &self.masses {
            Masses::Empirical { samples, .. } => Some(*samples),
            Masses::Exact(_) => None,
        }
    }

    /// Elements with nonzero mass, ascending.
    pub fn support(&self) -> Vec<u64> {
        match &self.masses {
            Masses::Exact(m) => m.keys().copied().collect(),
            Masses::Empirical { counts, .. } => counts.keys().copied().collect(),
        }
    }

    pub fn mass(&self, element: u64) -> Prob {
        match &self.masses {
            Masses::Exact(m) => {
                Prob::Exact(m.get(&element).cloned().unwrap_or_else(BigRational::zero))
            }
            Masses::Empirical { counts, samples } => {
                Prob::Approx(counts.get(&element).copied().unwrap_or(0) as f64 / *samples as f64)
            }
        }
    }

    pub fn exact_mass(&self, element: u64) -> Option<BigRational> {
        match self.mass(element) {
            Prob::Exact(r) => Some(r),
            Prob::Approx(_) => None,
        }
    }

    pub fn mass_f64(&self, element: u64) -> f64 {
        self.mass(element).to_f64()
    }

    /// Total mass on a set of elements.
    pub fn mass_of<'a>(&self, elements: impl IntoIterator<Item = &'a u64>) -> Prob {
        match &self.masses {
            Masses::Exact(m) => Prob::Exact(
                elements
                    .into_iter()
                    .filter_map(|k| m.get(k))
                    .fold(BigRational::zero(), |a, b| a + b),
            ),
            Masses::Empirical { counts, samples } => {
                let hits: u64 = elements.into_iter().filter_map(|k| counts.get(k)).sum();
                Prob::Approx(hits as f64 / *samples as f64)
            }
        }
    }

    pub(crate) fn exact_masses(&self) -> Option<&BTreeMap<u64, BigRational>> {
        match &self.masses {
            Masses::Exact(m) => Some(m),
            Masses::Empirical { .. } => None,
        }
    }

    /// JSON form `{width, kind, entries}`. Exact entries with a power-of-two
    /// denominator are `[hex, numerator, log2(denominator)]`; other exact
    /// entries are `[hex, numerator, denominator]`; empirical entries are
    /// `[hex, count, samples]`. Integers that overflow `u64` become strings.
    pub fn to_json(&self) -> Value {
        let digits = (self.width as usize).div_ceil(4).max(1);
        let hex = |k: u64| format!("{k:0digits$x}");
        let entries: Vec<Value> = match &self.masses {
            Masses::Exact(m) => {
                let dyadic = m.values().all(is_dyadic);
                m.iter()
                    .map(|(&k, r)| {
                        let den = if dyadic {
                            json!(r.denom().bits() - 1)
                        } else {
                            big_json(r.denom())
                        };
                        json!([hex(k), big_json(r.numer()), den])
                    })
                    .collect()
            }
            Masses::Empirical { counts, samples } => counts
                .iter()
                .map(|(&k, &c)| json!([hex(k), c, samples]))
                .collect(),
        };
        json!({ "width": self.width, "kind": self.kind(), "entries": entries })
    }
}

fn is_dyadic(r: &BigRational) -> bool {
    r.denom().magnitude().count_ones() == 1
}

fn big_json(x: &BigInt) -> Value {
    match x.to_u64() {
        Some(v) => json!(v),
        None => json!(x.to_string()),
    }
}
