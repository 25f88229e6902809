//! Experiment configuration: a strict TOML schema with line-numbered
//! diagnostics.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use forge_core::protocols::BuiltinProtocol;
use forge_core::publiccoin::GeneralBuiltin;
use forge_core::stats::parse_decimal;
use forge_core::BitString;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUTPUT_DIR: &str = "forge-out";
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 24;
pub const DEFAULT_SAMPLES: u64 = 10_000;
pub const DEFAULT_GAMMA: f64 = 0.01;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;
pub const DEFAULT_MATRIX_COUNT: usize = 500;
pub const DEFAULT_THRESHOLDS: [f64; 1] = [0.01];

/// Help text listing every default.
pub const DEFAULTS_HELP: &str = "\
Defaults:
  seed = 0                      output_dir = \"forge-out\"
  protocol: n = 2, d = 1, L = 1, m = 1
  compression.matrices = \"all\" (or \"sampled\", \"bijective\"), compression.count = 500
  compression.thresholds = [0.01]
  security.delta = \"0\"
  sampling.samples = 10000, sampling.gamma = 0.01, sampling.confidence = 0.95
  sampling.element = all-zero output
  adversary.strategy = \"last_speaker_forcer\" (reduction, hybrid-chain)
  claims.eps = [\"0.1\", \"0.25\", \"0.5\", \"0.9\"], claims.pinsker = 0
  caps.enumeration = 16777216
Environment: FORGE_OUTPUT_DIR and FORGE_WORKERS override the config; flags override both.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    CompressSweep,
    SecuritySweep,
    Reduction,
    HybridChain,
    PubliccoinCheck,
    VerifyClaims,
    Chernoff,
}

impl Experiment {
    pub const NAMES: [&'static str; 8] = [
        "simulate",
        "compress-sweep",
        "security-sweep",
        "reduction",
        "hybrid-chain",
        "publiccoin-check",
        "verify-claims",
        "chernoff",
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }

    fn parse(name: &str) -> Option<Self> {
        use Experiment::*;
        let all = [
            Simulate,
            CompressSweep,
            SecuritySweep,
            Reduction,
            HybridChain,
            PubliccoinCheck,
            VerifyClaims,
            Chernoff,
        ];
        all.into_iter().find(|e| e.name() == name)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolChoice {
    Builtin(BuiltinProtocol),
    General(GeneralBuiltin),
}

impl Serialize for ProtocolChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ProtocolChoice::Builtin(p) => s.serialize_str(&p.to_string()),
            ProtocolChoice::General(g) => s.serialize_str(g.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixSelection {
    All,
    Sampled,
    Bijective,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionSection {
    pub ells: Vec<usize>,
    pub matrices: MatrixSelection,
    pub count: usize,
    pub thresholds: Vec<f64>,
    pub slack: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecuritySection {
    pub t: Option<usize>,
    #[serde(rename = "M")]
    pub target: Vec<String>,
    pub delta: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingSection {
    pub samples: u64,
    pub gamma: f64,
    pub confidence: f64,
    pub element: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Passive,
    GreedyMajority,
    LastSpeakerForcer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversarySection {
    pub strategy: StrategyName,
    pub budgets: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimsSection {
    pub u_size: usize,
    pub m: usize,
    pub eps: Vec<String>,
    pub pinsker: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Caps {
    pub enumeration: u64,
}

/// A validated configuration. `output_dir` is excluded from the hash: it
/// names where results go, not what they are.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub protocol: Option<ProtocolChoice>,
    pub compression: Option<CompressionSection>,
    pub security: Option<SecuritySection>,
    pub sampling: Option<SamplingSection>,
    pub adversary: Option<AdversarySection>,
    pub claims: Option<ClaimsSection>,
    pub caps: Caps,
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("configs serialize");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    seed: Option<u64>,
    output_dir: Option<String>,
    protocol: Option<RawProtocol>,
    compression: Option<RawCompression>,
    security: Option<RawSecurity>,
    sampling: Option<RawSampling>,
    adversary: Option<RawAdversary>,
    claims: Option<RawClaims>,
    caps: Option<RawCaps>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    name: String,
    n: Option<usize>,
    d: Option<usize>,
    #[serde(rename = "L")]
    l: Option<usize>,
    m: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompression {
    ell: Option<usize>,
    ells: Option<Vec<usize>>,
    matrices: Option<MatrixSelection>,
    count: Option<usize>,
    thresholds: Option<Vec<f64>>,
    slack: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSecurity {
    t: Option<usize>,
    #[serde(rename = "M")]
    target: Option<Vec<String>>,
    delta: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    samples: Option<u64>,
    gamma: Option<f64>,
    confidence: Option<f64>,
    element: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdversary {
    strategy: Option<StrategyName>,
    budgets: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClaims {
    u_size: Option<usize>,
    m: Option<usize>,
    eps: Option<Vec<String>>,
    pinsker: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCaps {
    enumeration: Option<u64>,
}

/// 1-based line of each `table.key` (and of each `[table]` header, under
/// the key `table`), as written in the source.
struct Locator {
    lines: HashMap<String, usize>,
}

impl Locator {
    fn line(&self, path: &str) -> Option<usize> {
        self.lines.get(path).copied().or_else(|| {
            let parent = path.rsplit_once('.')?.0;
            self.line(parent)
        })
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = None;
    for (i, c) in line.char_indices() {
        match (c, in_str) {
            ('"' | '\'', None) => in_str = Some(c),
            (q, Some(open)) if q == open => in_str = None,
            ('#', None) => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Scans keys and table headers. Duplicates are reported with both lines.
fn scan(text: &str) -> (Locator, Vec<ConfigError>) {
    let mut lines = HashMap::new();
    let mut errors = Vec::new();
    let mut table = String::new();
    let mut depth = 0i32;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw).trim();
        if depth > 0 {
            depth += bracket_balance(line);
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = header.trim().to_string();
            if let Some(first) = lines.insert(table.clone(), line_no) {
                errors.push(ConfigError {
                    line: Some(line_no),
                    message: format!("duplicate table [{table}] (first defined on line {first})"),
                });
            }
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            let key = key.trim().trim_matches('"');
            let path = if table.is_empty() {
                key.to_string()
            } else {
                format!("{table}.{key}")
            };
            if let Some(first) = lines.insert(path.clone(), line_no) {
                errors.push(ConfigError {
                    line: Some(line_no),
                    message: format!("duplicate key `{path}` (first defined on line {first})"),
                });
            }
            depth += bracket_balance(value);
        }
    }
    (Locator { lines }, errors)
}

fn bracket_balance(s: &str) -> i32 {
    let mut in_str = None;
    let mut balance = 0;
    for c in s.chars() {
        match (c, in_str) {
            ('"' | '\'', None) => in_str = Some(c),
            (q, Some(open)) if q == open => in_str = None,
            ('[' | '{', None) => balance += 1,
            (']' | '}', None) => balance -= 1,
            _ => {}
        }
    }
    balance
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Checker<'a> {
    loc: &'a Locator,
    errors: Vec<ConfigError>,
}

impl Checker<'_> {
    fn err(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line: self.loc.line(path),
            message: message.into(),
        });
    }

    fn required<T>(&mut self, value: Option<T>, path: &str) -> Option<T> {
        if value.is_none() {
            self.err(path, format!("{path} required"));
        }
        value
    }

    fn unused<T>(&mut self, value: &Option<T>, path: &str, why: &str) {
        if value.is_some() {
            self.err(path, format!("{path} is not used {why}"));
        }
    }
}

/// Parses and validates a configuration, collecting every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let (loc, dups) = scan(text);
    if !dups.is_empty() {
        return Err(ConfigErrors(dups));
    }
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        ConfigErrors(vec![ConfigError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().trim().to_string(),
        }])
    })?;
    let mut c = Checker {
        loc: &loc,
        errors: Vec::new(),
    };
    let experiment = Experiment::parse(&raw.experiment);
    if experiment.is_none() {
        c.err(
            "experiment",
            format!(
                "unknown experiment `{}`; expected one of {}",
                raw.experiment,
                Experiment::NAMES.join(", ")
            ),
        );
    }
    let needs_general = experiment == Some(Experiment::PubliccoinCheck);
    let protocol = raw
        .protocol
        .as_ref()
        .and_then(|p| protocol_choice(p, needs_general, &mut c));
    let compression = raw.compression.map(|r| compression_section(r, &mut c));
    let security = raw.security.map(|r| security_section(r, &mut c));
    let sampling = raw.sampling.map(|r| sampling_section(r, &mut c));
    let adversary = raw.adversary.map(|r| AdversarySection {
        strategy: r.strategy.unwrap_or(StrategyName::LastSpeakerForcer),
        budgets: r.budgets,
    });
    let claims = raw.claims.map(|r| claims_section(r, &mut c));
    let caps = Caps {
        enumeration: raw
            .caps
            .and_then(|r| r.enumeration)
            .unwrap_or(DEFAULT_ENUMERATION_CAP),
    };
    let cfg = experiment.map(|experiment| ExperimentConfig {
        experiment,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        output_dir: PathBuf::from(raw.output_dir.unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into())),
        protocol,
        compression,
        security,
        sampling,
        adversary,
        claims,
        caps,
    });
    if let Some(cfg) = &cfg {
        check_requirements(cfg, raw.protocol.is_some(), &mut c);
    }
    match cfg {
        Some(cfg) if c.errors.is_empty() => Ok(cfg),
        _ => Err(ConfigErrors(c.errors)),
    }
}

fn protocol_choice(p: &RawProtocol, general: bool, c: &mut Checker<'_>) -> Option<ProtocolChoice> {
    if general {
        for (v, k) in [(&p.n, "n"), (&p.d, "d"), (&p.l, "L"), (&p.m, "m")] {
            c.unused(
                v,
                &format!("protocol.{k}"),
                "by protocols with private randomness",
            );
        }
        return match GeneralBuiltin::parse(&p.name) {
            Some(g) => Some(ProtocolChoice::General(g)),
            None => {
                c.err(
                    "protocol.name",
                    format!(
                        "unknown protocol `{}`; expected one of {}",
                        p.name,
                        GeneralBuiltin::NAMES.join(", ")
                    ),
                );
                None
            }
        };
    }
    let n = p.n.unwrap_or(2);
    let d = p.d.unwrap_or(1);
    let l = p.l.unwrap_or(1);
    let m = p.m.unwrap_or(1);
    let why = format!("by {}", p.name);
    let builtin = match p.name.as_str() {
        "xor_coin" => {
            c.unused(&p.m, "protocol.m", &why);
            BuiltinProtocol::XorCoin { n, d, l }
        }
        "majority_coin" => {
            c.unused(&p.d, "protocol.d", &why);
            c.unused(&p.l, "protocol.L", &why);
            c.unused(&p.m, "protocol.m", &why);
            BuiltinProtocol::MajorityCoin {
                n: p.n.unwrap_or(3),
            }
        }
        "xor_selection" => BuiltinProtocol::XorSelection { n, d, l, m },
        "leader_election_mod_n" => {
            c.unused(&p.d, "protocol.d", &why);
            c.unused(&p.m, "protocol.m", &why);
            BuiltinProtocol::LeaderElectionModN { n, l }
        }
        other => {
            c.err(
                "protocol.name",
                format!(
                    "unknown protocol `{other}`; expected one of {}",
                    BuiltinProtocol::NAMES.join(", ")
                ),
            );
            return None;
        }
    };
    if let Err(e) = builtin.build() {
        c.err("protocol", format!("protocol: {e}"));
        return None;
    }
    Some(ProtocolChoice::Builtin(builtin))
}

fn compression_section(r: RawCompression, c: &mut Checker<'_>) -> CompressionSection {
    let ells = match (r.ell, r.ells) {
        (Some(_), Some(_)) => {
            c.err(
                "compression.ells",
                "give either compression.ell or compression.ells, not both",
            );
            Vec::new()
        }
        (Some(e), None) => vec![e],
        (None, Some(list)) => {
            if list.is_empty() {
                c.err("compression.ells", "compression.ells must not be empty");
            }
            list
        }
        (None, None) => Vec::new(),
    };
    if ells.contains(&0) {
        c.err("compression", "ell must be at least 1");
    }
    let matrices = r.matrices.unwrap_or(MatrixSelection::All);
    if matrices != MatrixSelection::Sampled && r.count.is_some() {
        c.err(
            "compression.count",
            "compression.count needs matrices = \"sampled\"",
        );
    }
    let thresholds = r.thresholds.unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        c.err("compression.thresholds", "thresholds must lie in [0, 1]");
    }
    if let Some(slack) = &r.slack {
        for s in slack {
            if parse_decimal(s).is_err() {
                c.err(
                    "compression.slack",
                    format!("slack level `{s}` is not a decimal"),
                );
            }
        }
    }
    let count = r.count.unwrap_or(DEFAULT_MATRIX_COUNT);
    if count == 0 {
        c.err("compression.count", "compression.count must be positive");
    }
    CompressionSection {
        ells,
        matrices,
        count,
        thresholds,
        slack: r.slack,
    }
}

fn security_section(r: RawSecurity, c: &mut Checker<'_>) -> SecuritySection {
    let delta = r.delta.unwrap_or_else(|| "0".into());
    if parse_decimal(&delta).is_err() {
        c.err(
            "security.delta",
            format!("security.delta `{delta}` is not a decimal"),
        );
    }
    let target = r.target.unwrap_or_default();
    for s in &target {
        if BitString::parse(s).is_err() {
            c.err("security.M", format!("`{s}` is not a bit string"));
        }
    }
    // Presence of t and M is checked per experiment; an empty M reads as absent.
    SecuritySection {
        t: r.t,
        target,
        delta,
    }
}

fn sampling_section(r: RawSampling, c: &mut Checker<'_>) -> SamplingSection {
    let samples = r.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples == 0 {
        c.err("sampling.samples", "sampling.samples must be positive");
    }
    let gamma = r.gamma.unwrap_or(DEFAULT_GAMMA);
    if !(gamma > 0.0 && gamma.is_finite()) {
        c.err("sampling.gamma", "sampling.gamma must be positive");
    }
    let confidence = r.confidence.unwrap_or(DEFAULT_CONFIDENCE);
    if !(confidence > 0.0 && confidence < 1.0) {
        c.err(
            "sampling.confidence",
            "sampling.confidence must lie in (0, 1)",
        );
    }
    if let Some(e) = &r.element {
        if BitString::parse(e).is_err() {
            c.err("sampling.element", format!("`{e}` is not a bit string"));
        }
    }
    SamplingSection {
        samples,
        gamma,
        confidence,
        element: r.element,
    }
}

fn claims_section(r: RawClaims, c: &mut Checker<'_>) -> ClaimsSection {
    let eps = r
        .eps
        .unwrap_or_else(|| ["0.1", "0.25", "0.5", "0.9"].map(String::from).to_vec());
    for e in &eps {
        if parse_decimal(e).is_err() {
            c.err("claims.eps", format!("`{e}` is not a decimal"));
        }
    }
    ClaimsSection {
        u_size: c.required(r.u_size, "claims.u_size").unwrap_or(0),
        m: c.required(r.m, "claims.m").unwrap_or(0),
        eps,
        pinsker: r.pinsker.unwrap_or(0),
    }
}

fn check_requirements(cfg: &ExperimentConfig, has_protocol: bool, c: &mut Checker<'_>) {
    use Experiment::*;
    let e = cfg.experiment;
    let needs_protocol = e != VerifyClaims;
    if needs_protocol && !has_protocol {
        c.err("protocol", "protocol required");
    }
    if !needs_protocol && has_protocol {
        c.err("protocol", format!("protocol is not used by {e}"));
    }
    let needs_compression = matches!(e, CompressSweep | SecuritySweep | Reduction | HybridChain);
    match &cfg.compression {
        None if needs_compression => c.err("compression", "compression required"),
        Some(comp) => {
            if !needs_compression && e != Chernoff {
                c.err("compression", format!("compression is not used by {e}"));
            }
            if comp.ells.is_empty() {
                c.err("compression.ell", "compression.ell required");
            } else if comp.ells.len() > 1 && e != CompressSweep {
                c.err(
                    "compression.ells",
                    format!("{e} takes a single compression.ell"),
                );
            }
            if comp.matrices == MatrixSelection::Bijective && e != CompressSweep {
                c.err(
                    "compression.matrices",
                    "bijective matrices are only used by compress-sweep",
                );
            }
        }
        None => {}
    }
    let adversarial_simulate = e == Simulate && cfg.adversary.is_some();
    let needs_security =
        matches!(e, SecuritySweep | Reduction | HybridChain) || adversarial_simulate;
    match &cfg.security {
        None if needs_security => {
            c.err("security", "security required");
        }
        Some(sec) => {
            if !needs_security {
                c.err(
                    "security",
                    format!("security is not used by {e} without an adversary"),
                );
            }
            if sec.target.is_empty() {
                c.err("security.M", "security.M required");
            }
            if sec.t.is_none()
                && !(adversarial_simulate
                    && cfg.adversary.as_ref().is_some_and(|a| a.budgets.is_some()))
            {
                c.err("security.t", "security.t required");
            }
        }
        None => {}
    }
    let needs_sampling = matches!(e, Reduction | Chernoff);
    if needs_sampling && cfg.sampling.is_none() {
        c.err("sampling", "sampling required");
    }
    if cfg.sampling.is_some() && !(needs_sampling || e == Simulate) {
        c.err("sampling", format!("sampling is not used by {e}"));
    }
    if let Some(a) = &cfg.adversary {
        match e {
            Simulate => {}
            Reduction | HybridChain => {
                if a.strategy == StrategyName::GreedyMajority {
                    c.err("adversary.strategy", "the reduction needs a deterministic strategy (passive or last_speaker_forcer)");
                }
                if a.budgets.is_some() {
                    c.err("adversary.budgets", "budgets come from security.t here");
                }
            }
            _ => c.err("adversary", format!("adversary is not used by {e}")),
        }
    }
    if e == VerifyClaims && cfg.claims.is_none() {
        c.err("claims", "claims required");
    }
    if e != VerifyClaims && cfg.claims.is_some() {
        c.err("claims", format!("claims is not used by {e}"));
    }
}
