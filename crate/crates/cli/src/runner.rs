//! Dispatch from a validated configuration to the framework, producing a
//! JSON payload and the tabular artifacts.

use std::collections::BTreeMap;
use std::sync::Arc;

use forge_core::adversary::{
    value_of, Deterministic, GreedyMajority, LastSpeakerForcer, Passive, SecurityParams, TargetSet,
    ValueMode, ViewPolicy,
};
use forge_core::compression::{
    compressed_protocol, default_slack_levels, enumerate_family, hybrid_chain, reduction_soundness,
    sample_matrices, sample_matrix, security_sweep, shrinkage_check, simulation_check,
    CompressionParams, Family, MatrixH, MatrixSource,
};
use forge_core::engine::{enumerate_honest_outputs, run_honest};
use forge_core::protocols::BuiltinProtocol;
use forge_core::publiccoin::{public_coin_check, slot_message_counts, GeneralBuiltin};
use forge_core::stats::{
    chernoff_estimate, claim_prob_verify, empirical_distribution, entropy,
    kl_uniform_identity_holds, parse_decimal, pinsker_check, statistical_distance, Distribution,
    Prob, SampleConfig,
};
use forge_core::{BitString, Error, ProtocolSpec, Result, RngSeed};
use num_bigint::BigUint;
use num_rational::BigRational;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, MatrixSelection, ProtocolChoice, StrategyName};
use crate::Experiment;

/// Width of the random distributions in the entropy-bound suite.
pub const PINSKER_WIDTH: u32 = 3;

/// `ε` values at which the consistent-set shrinkage is reported.
pub const SHRINKAGE_EPSILONS: [f64; 3] = [0.01, 0.1, 0.5];

/// A result table, emitted as both `.csv` and `.dat`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",") + "\n";
        for r in &self.rows {
            out += &r.join(",");
            out.push('\n');
        }
        out
    }

    /// Whitespace-separated columns under a `#` header line.
    pub fn to_dat(&self) -> String {
        let mut out = format!("# {}\n", self.columns.join(" "));
        for r in &self.rows {
            out += &r.join(" ");
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub payload: Value,
    pub tables: Vec<Table>,
    /// Extra files written verbatim, by name.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    fn new(payload: Value) -> Self {
        Outcome {
            payload,
            tables: Vec::new(),
            files: Vec::new(),
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn prob(p: &Prob) -> String {
    match p {
        Prob::Exact(r) => r.to_string(),
        Prob::Approx(x) => x.to_string(),
    }
}

fn f(x: f64) -> String {
    x.to_string()
}

fn builtin(cfg: &ExperimentConfig) -> Result<(BuiltinProtocol, ProtocolSpec)> {
    match cfg.protocol {
        Some(ProtocolChoice::Builtin(p)) => Ok((p, p.build()?)),
        _ => Err(Error::InvalidParams(format!(
            "{} needs a built-in public-coin protocol",
            cfg.experiment
        ))),
    }
}

fn general(cfg: &ExperimentConfig) -> Result<GeneralBuiltin> {
    match cfg.protocol {
        Some(ProtocolChoice::General(g)) => Ok(g),
        _ => Err(Error::InvalidParams(
            "publiccoin-check needs a protocol with private randomness".into(),
        )),
    }
}

fn cap(cfg: &ExperimentConfig) -> u128 {
    cfg.caps.enumeration as u128
}

fn seed(cfg: &ExperimentConfig) -> RngSeed {
    RngSeed::new(cfg.seed)
}

fn target(cfg: &ExperimentConfig, spec: &ProtocolSpec) -> Result<TargetSet> {
    let sec = cfg.security.as_ref().expect("validated");
    TargetSet::parse(spec.params().output_bits, &sec.target)
}

fn security(cfg: &ExperimentConfig, spec: &ProtocolSpec, t: usize) -> Result<SecurityParams> {
    let sec = cfg.security.as_ref().expect("validated");
    SecurityParams::new(t, target(cfg, spec)?, parse_decimal(&sec.delta)?)
}

fn budget(cfg: &ExperimentConfig) -> usize {
    cfg.security.as_ref().and_then(|s| s.t).expect("validated")
}

fn compression(spec: &ProtocolSpec, ell: usize) -> Result<CompressionParams> {
    CompressionParams::new(*spec.params(), ell)
}

fn matrix_source(cfg: &ExperimentConfig) -> MatrixSource {
    let c = cfg.compression.as_ref().expect("validated");
    match c.matrices {
        MatrixSelection::All => MatrixSource::All,
        MatrixSelection::Sampled => MatrixSource::Sampled {
            count: c.count,
            seed: seed(cfg),
        },
        MatrixSelection::Bijective => MatrixSource::Bijective,
    }
}

/// Runs the configured experiment on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment {
        Experiment::Simulate => simulate(cfg),
        Experiment::CompressSweep => compress_sweep(cfg),
        Experiment::SecuritySweep => security_sweep_experiment(cfg),
        Experiment::Reduction => reduction(cfg),
        Experiment::HybridChain => hybrid(cfg),
        Experiment::PubliccoinCheck => publiccoin(cfg),
        Experiment::VerifyClaims => verify_claims(cfg),
        Experiment::Chernoff => chernoff(cfg),
    }
}

fn distribution_table(name: &str, d: &Distribution) -> Table {
    let mut t = Table::new(name, &["element", "mass", "mass_f64"]);
    for k in d.support() {
        let bits = BitString::from_u64(k, d.width() as usize).to_string();
        t.push(vec![bits, prob(&d.mass(k)), f(d.mass_f64(k))]);
    }
    t
}

fn simulate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, spec) = builtin(cfg)?;
    let width = spec.params().output_bits as u32;
    let states = spec.honest_state_count();
    let dist = if states <= cap(cfg) as f64 {
        enumerate_honest_outputs(&spec, cap(cfg))?
    } else if let Some(s) = &cfg.sampling {
        let sampler = |r: RngSeed| run_honest(&spec, r).output.to_u64().expect("m ≤ 64");
        empirical_distribution(&sampler, width, s.samples, seed(cfg))?
    } else {
        return Err(Error::cap(
            "honest randomness assignments",
            states,
            cap(cfg),
        ));
    };
    let sd = if width <= 24 {
        Some(statistical_distance(&dist, &Distribution::uniform(width))?)
    } else {
        None
    };
    let mut payload = json!({
        "protocol": spec.label(),
        "distribution": dist.to_json(),
        "entropy": entropy(&dist),
        "sd_to_uniform": sd.as_ref().map(to_value),
    });
    let mut out = Outcome::new(Value::Null);
    out.tables.push(distribution_table("distribution", &dist));

    if let Some(adv) = &cfg.adversary {
        let budgets = adv.budgets.clone().unwrap_or_else(|| vec![budget(cfg)]);
        let mode = match &cfg.sampling {
            Some(s) if states > cap(cfg) as f64 => ValueMode::Sampled {
                samples: s.samples,
                seed: seed(cfg),
                confidence: s.confidence,
            },
            _ => ValueMode::Exact,
        };
        let target = target(cfg, &spec)?;
        let mut table = Table::new(
            "bias",
            &[
                "t",
                "bias",
                "low",
                "high",
                "adversarial_mass",
                "honest_mass",
            ],
        );
        let mut rows = Vec::new();
        for &t in &budgets {
            let sec = security(cfg, &spec, t)?;
            let report = match adv.strategy {
                StrategyName::Passive => {
                    value_of(&spec, &Deterministic(Passive), &sec, mode, cap(cfg))?
                }
                StrategyName::GreedyMajority => value_of(
                    &spec,
                    &GreedyMajority::new(target.contains(1)),
                    &sec,
                    mode,
                    cap(cfg),
                )?,
                StrategyName::LastSpeakerForcer => value_of(
                    &spec,
                    &Deterministic(LastSpeakerForcer::new(spec.clone(), target.clone())),
                    &sec,
                    mode,
                    cap(cfg),
                )?,
            };
            let (lo, hi) = report.interval();
            table.push(vec![
                t.to_string(),
                prob(&report.value),
                f(lo),
                f(hi),
                prob(&report.adversarial_mass),
                prob(&report.honest_mass),
            ]);
            rows.push(json!({ "t": t, "report": to_value(&report), "interval": [lo, hi] }));
        }
        payload["bias"] =
            json!({ "strategy": adv.strategy, "target": target.bit_strings(), "budgets": rows });
        out.tables.push(table);
    }
    out.payload = payload;
    Ok(out)
}

fn compress_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, spec) = builtin(cfg)?;
    let comp = cfg.compression.as_ref().expect("validated");
    let source = matrix_source(cfg);
    let mut summary = Table::new(
        "compress_sweep",
        &["ell", "median_sd", "mean_sd", "two_thirds_sd", "max_sd"],
    );
    let mut histogram = Table::new("sd_counts", &["ell", "sd", "matrices"]);
    let mut rows = Vec::new();
    for &ell in &comp.ells {
        let cp = compression(&spec, ell)?;
        let report = simulation_check(&spec, &cp, &source, &comp.thresholds, cap(cfg))?;
        summary.push(vec![
            ell.to_string(),
            f(report.median.to_f64()),
            f(report.mean),
            f(report.two_thirds_quantile.to_f64()),
            f(report.max.to_f64()),
        ]);
        let mut counts: BTreeMap<&BigRational, usize> = BTreeMap::new();
        for sd in &report.sds {
            *counts.entry(sd.exact().expect("exact")).or_default() += 1;
        }
        for (sd, count) in counts {
            histogram.push(vec![ell.to_string(), sd.to_string(), count.to_string()]);
        }
        rows.push(json!({
            "ell": ell,
            "matrices": report.matrices,
            "source": report.source,
            "median": to_value(&report.median),
            "two_thirds_quantile": to_value(&report.two_thirds_quantile),
            "mean": report.mean,
            "max": to_value(&report.max),
            "all_zero": report.all_zero(),
            "thresholds": to_value(&report.thresholds),
        }));
    }
    let mut out = Outcome::new(json!({ "protocol": spec.label(), "levels": rows }));
    out.tables = vec![summary, histogram];
    Ok(out)
}

fn slack_levels(cfg: &ExperimentConfig) -> Result<Vec<BigRational>> {
    match cfg.compression.as_ref().and_then(|c| c.slack.as_ref()) {
        Some(list) => list.iter().map(|s| parse_decimal(s)).collect(),
        None => Ok(default_slack_levels()),
    }
}

fn single_ell(cfg: &ExperimentConfig) -> usize {
    cfg.compression.as_ref().expect("validated").ells[0]
}

fn security_sweep_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, spec) = builtin(cfg)?;
    let cp = compression(&spec, single_ell(cfg))?;
    let sec = security(cfg, &spec, budget(cfg))?;
    let report = security_sweep(
        &spec,
        &cp,
        &sec,
        &matrix_source(cfg),
        &slack_levels(cfg)?,
        cap(cfg),
    )?;
    let base = report.base_value.exact().cloned().expect("exact");
    let mut values = Table::new("values", &["matrix", "value", "difference"]);
    for (i, v) in report.values.iter().enumerate() {
        let v = v.exact().expect("exact");
        values.push(vec![i.to_string(), v.to_string(), (v - &base).to_string()]);
    }
    let mut cdf = Table::new("cdf", &["difference", "fraction"]);
    for p in &report.cdf {
        cdf.push(vec![f(p.difference.to_f64()), f(p.fraction.to_f64())]);
    }
    let mut out = Outcome::new(to_value(&report));
    out.tables = vec![values, cdf];
    out.files
        .push(("security_sweep.json".into(), report.to_json()));
    Ok(out)
}

fn build_family(cfg: &ExperimentConfig, spec: &ProtocolSpec) -> Result<Arc<Family>> {
    let cp = compression(spec, single_ell(cfg))?;
    let matrices: Vec<MatrixH> = match matrix_source(cfg) {
        MatrixSource::Sampled { count, seed } => sample_matrices(&cp, count, seed)?,
        _ => enumerate_family(&cp, cap(cfg))?.collect(),
    };
    let target = target(cfg, spec)?;
    let strategy = cfg
        .adversary
        .as_ref()
        .map_or(StrategyName::LastSpeakerForcer, |a| a.strategy);
    let family = Family::build(
        spec,
        matrices,
        |short: ProtocolSpec| -> Arc<dyn ViewPolicy> {
            match strategy {
                StrategyName::Passive => Arc::new(Passive),
                _ => Arc::new(LastSpeakerForcer::new(short, target.clone())),
            }
        },
    )?;
    Ok(Arc::new(family))
}

fn reduction(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, spec) = builtin(cfg)?;
    let family = build_family(cfg, &spec)?;
    let sec = security(cfg, &spec, budget(cfg))?;
    let s = cfg.sampling.as_ref().expect("validated");
    let report = reduction_soundness(&family, &sec, s.samples, seed(cfg), s.confidence, cap(cfg))?;
    let mut table = Table::new(
        "reduction",
        &[
            "min_member_value",
            "measured_slack",
            "exact_value",
            "sampled_value",
            "radius",
            "halt_fraction",
        ],
    );
    table.push(vec![
        prob(&report.min_member_value),
        prob(&report.measured_slack),
        prob(&report.exact_value),
        f(report.sampled_value),
        f(report.radius),
        f(report.halt_fraction),
    ]);
    let mut out = Outcome::new(json!({ "protocol": spec.label(), "soundness": to_value(&report) }));
    out.tables.push(table);
    Ok(out)
}

fn hybrid(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, spec) = builtin(cfg)?;
    let family = build_family(cfg, &spec)?;
    let t = budget(cfg);
    security(cfg, &spec, t)?.check_against(&spec)?;
    let chain = hybrid_chain(&family, t, cap(cfg))?;
    let shrinkage = shrinkage_check(&family, t, &SHRINKAGE_EPSILONS, cap(cfg))?;
    let top = chain.levels - 1;
    let mut levels = Table::new(
        "hybrid_levels",
        &["level", "sd_to_reduction", "sd_to_ideal", "halted_mass"],
    );
    for k in 0..chain.levels {
        levels.push(vec![
            k.to_string(),
            f(chain.distances[k][top]),
            f(chain.distances[k][0]),
            f(chain.halted[k]),
        ]);
    }
    let mut out = Outcome::new(json!({
        "protocol": spec.label(),
        "family_size": family.len(),
        "chain": to_value(&chain),
        "shrinkage": to_value(&shrinkage),
    }));
    out.tables.push(levels);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct SlotUniformity {
    entry_bits: usize,
    distinct_messages: usize,
    expected_messages: u64,
    sequences: u64,
    uniform: bool,
}

fn slot_uniformity(entry_bits: usize) -> Result<SlotUniformity> {
    let (counts, total) = slot_message_counts(entry_bits)?;
    let k = 1u64 << entry_bits;
    let expected: u64 = (1..=k).product();
    let uniform =
        counts.len() as u64 == expected && counts.values().all(|&c| c * expected == total);
    Ok(SlotUniformity {
        entry_bits,
        distinct_messages: counts.len(),
        expected_messages: expected,
        sequences: total,
        uniform,
    })
}

fn publiccoin(cfg: &ExperimentConfig) -> Result<Outcome> {
    let g = general(cfg)?.build();
    let report = public_coin_check(&g, cap(cfg))?;
    let mut widths = vec![1];
    if (2..=3).contains(&g.randomness_bits()) {
        widths.push(g.randomness_bits());
    }
    let uniformity: Vec<SlotUniformity> = widths
        .into_iter()
        .map(slot_uniformity)
        .collect::<Result<_>>()?;
    let mut table = Table::new(
        "publiccoin",
        &["protocol", "randomness_bits", "sd", "fallbacks"],
    );
    table.push(vec![
        report.protocol.clone(),
        report.randomness_bits.to_string(),
        prob(&report.sd),
        report.fallbacks.to_string(),
    ]);
    let mut out = Outcome::new(
        json!({ "check": to_value(&report), "slot_uniformity": to_value(&uniformity) }),
    );
    out.tables.push(table);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct PinskerSummary {
    width: u32,
    checked: usize,
    violations: usize,
    identity_failures: usize,
    /// Largest `SD / bound` over distributions with a positive bound.
    max_ratio: f64,
}

/// Corner cases followed by `count` random exact distributions.
fn pinsker_inputs(count: usize, seed: RngSeed) -> Vec<Distribution> {
    let k = PINSKER_WIDTH;
    let size = 1u64 << k;
    let mut out = vec![
        Distribution::uniform(k),
        Distribution::point_mass(k, 0),
        Distribution::point_mass(k, size - 1),
    ];
    let near = |tilt: u64| {
        let total = BigUint::from(size) << 20u32;
        let base = BigUint::from(1u32) << 20u32;
        let counts = (0..size)
            .map(|x| {
                let c = match x {
                    0 => &base + tilt,
                    1 => &base - tilt,
                    _ => base.clone(),
                };
                (x, c)
            })
            .collect();
        Distribution::exact_from_counts(k, counts, total)
    };
    out.push(near(1));
    out.push(near(1 << 10));
    out.push(Distribution::exact_from_counts(
        k,
        [(0, BigUint::from(1u32)), (5, BigUint::from(1u32))].into(),
        BigUint::from(2u32),
    ));
    let mut rng = seed.rng();
    for _ in 0..count {
        let mut counts: Vec<u64> = (0..size).map(|_| rng.gen_range(0..256)).collect();
        if counts.iter().all(|&c| c == 0) {
            counts[0] = 1;
        }
        let total: u64 = counts.iter().sum();
        let map = counts
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(x, c)| (x as u64, BigUint::from(c)))
            .collect();
        out.push(Distribution::exact_from_counts(
            k,
            map,
            BigUint::from(total),
        ));
    }
    out
}

fn pinsker_suite(count: usize, seed: RngSeed) -> Result<(PinskerSummary, Table)> {
    let inputs = pinsker_inputs(count, seed);
    let mut table = Table::new("pinsker", &["deficit", "sd", "bound"]);
    let mut summary = PinskerSummary {
        width: PINSKER_WIDTH,
        checked: 0,
        violations: 0,
        identity_failures: 0,
        max_ratio: 0.0,
    };
    for d in &inputs {
        let r = pinsker_check(d)?;
        summary.checked += 1;
        summary.violations += !r.holds as usize;
        if r.bound > 0.0 {
            summary.max_ratio = summary.max_ratio.max(r.sd_to_uniform / r.bound);
        }
        summary.identity_failures += !kl_uniform_identity_holds(d)? as usize;
        table.push(vec![f(r.deficit), f(r.sd_to_uniform), f(r.bound)]);
    }
    Ok((summary, table))
}

fn verify_claims(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = cfg.claims.as_ref().expect("validated");
    let eps: Vec<BigRational> = c
        .eps
        .iter()
        .map(|e| parse_decimal(e))
        .collect::<Result<_>>()?;
    let report = claim_prob_verify(c.u_size, c.m, &eps, cap(cfg))?;
    let mut payload = json!({ "claims": to_value(&report), "violations": report.violations.len() });
    let mut out = Outcome::new(Value::Null);
    if c.pinsker > 0 {
        let (summary, table) = pinsker_suite(c.pinsker, seed(cfg))?;
        payload["pinsker"] = to_value(&summary);
        out.tables.push(table);
    }
    out.payload = payload;
    Ok(out)
}

fn chernoff(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, base) = builtin(cfg)?;
    let s = cfg.sampling.as_ref().expect("validated");
    let (spec, matrix) = match &cfg.compression {
        Some(c) => {
            let cp = compression(&base, c.ells[0])?;
            let h = sample_matrix(&cp, seed(cfg))?;
            (
                compressed_protocol(&base, &h)?,
                Some(h.flat_bits().to_string()),
            )
        }
        None => (base, None),
    };
    let width = spec.params().output_bits;
    let element = match &s.element {
        Some(e) => {
            let b = BitString::parse(e)?;
            if b.len() != width {
                return Err(Error::WidthMismatch {
                    output_bits: width,
                    message_bits: b.len(),
                });
            }
            b.to_u64().expect("m ≤ 64")
        }
        None => 0,
    };
    let sampler = |r: RngSeed| run_honest(&spec, r).output.to_u64().expect("m ≤ 64");
    let sc = SampleConfig::new(s.samples, s.gamma)?;
    let estimate = chernoff_estimate(&sampler, element, &sc, seed(cfg));
    let exact = if spec.honest_state_count() <= cap(cfg) as f64 {
        Some(enumerate_honest_outputs(&spec, cap(cfg))?.mass(element))
    } else {
        None
    };
    let deviation = exact
        .as_ref()
        .map(|p| (estimate.estimate - p.to_f64()).abs());
    let mut table = Table::new(
        "chernoff",
        &["samples", "estimate", "exact", "gamma", "bound"],
    );
    table.push(vec![
        s.samples.to_string(),
        f(estimate.estimate),
        exact.as_ref().map_or("nan".into(), |p| f(p.to_f64())),
        f(s.gamma),
        f(estimate.bound),
    ]);
    let mut out = Outcome::new(json!({
        "protocol": spec.label(),
        "matrix": matrix,
        "element": BitString::from_u64(element, width).to_string(),
        "estimate": to_value(&estimate),
        "exact": exact.as_ref().map(to_value),
        "deviation": deviation,
        "within_gamma": deviation.map(|d| d <= s.gamma),
    }));
    out.tables.push(table);
    Ok(out)
}
