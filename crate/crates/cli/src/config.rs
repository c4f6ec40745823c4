//! Scenario configuration: TOML in SI units (s, rad/s, m, radians).
//!
//! Parsing never stops at the first problem. Every unknown key, type error
//! and range violation is collected and reported together.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    StoreRelease,
    CatEntangle,
    SinglePhoton,
    AlgebraCheck,
    AdiabaticScan,
    #[serde(rename = "propagate-1d")]
    Propagate1d,
    PulseMatching,
    BandwidthScan,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::StoreRelease,
        Scenario::CatEntangle,
        Scenario::SinglePhoton,
        Scenario::AlgebraCheck,
        Scenario::AdiabaticScan,
        Scenario::Propagate1d,
        Scenario::PulseMatching,
        Scenario::BandwidthScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::StoreRelease => "store-release",
            Scenario::CatEntangle => "cat-entangle",
            Scenario::SinglePhoton => "single-photon",
            Scenario::AlgebraCheck => "algebra-check",
            Scenario::AdiabaticScan => "adiabatic-scan",
            Scenario::Propagate1d => "propagate-1d",
            Scenario::PulseMatching => "pulse-matching",
            Scenario::BandwidthScan => "bandwidth-scan",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown scenario '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomsConfig {
    /// Single-atom probe couplings (rad/s).
    pub g1: f64,
    pub g2: f64,
    pub n_atoms: f64,
    /// Excited-state decay (rad/s); unused by the Fock engine.
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub cutoff: usize,
    /// `coherent`, `cat-plus`, `cat-minus` or `single-photon`.
    pub input: String,
    /// Coherent amplitude (real part, imaginary part).
    pub alpha: f64,
    pub alpha_im: f64,
    /// `probe1` or `probe2`.
    pub input_mode: String,
    pub phi_e: f64,
    pub theta_edge: f64,
    /// Ramp and hold durations (s); default `20 / (g sqrt N)` and `2 / (g sqrt N)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hold: Option<f64>,
    /// `mixing-angle` or `cosine`.
    pub ramp_shape: String,
    /// Dark-population abort threshold; 0 disables the monitor.
    pub monitor_threshold: f64,
    pub min_fidelity: f64,
    /// Allowed deviation of the released entropy from the ideal (bits).
    pub entropy_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraConfig {
    pub cutoff: usize,
    pub draws: usize,
    /// Largest dark-state excitation checked.
    pub max_n: usize,
    /// Largest `i + j + k + l + n` in the degeneracy check.
    pub max_total: usize,
    pub tolerance: f64,
    pub eigen_tolerance: f64,
    pub mixing_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Ramp durations (s); default `10, 20, 40` times `1 / (g sqrt N)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramps: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumConfig {
    /// Collective couplings `g sqrt N` (rad/s).
    pub gn1: f64,
    pub gn2: f64,
    pub gamma: f64,
    /// Speed of light (m/s).
    pub c: f64,
    pub length: f64,
    pub n_atoms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    pub amplitude1: f64,
    pub amplitude2: f64,
    /// Gaussian centre and 1/e half width of the amplitude (s).
    pub center: f64,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub start: f64,
    pub end: f64,
    pub omega1: f64,
    pub omega2: f64,
    /// End values for a raised-cosine ramp; absent means constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to_omega1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to_omega2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagateConfig {
    pub nz: usize,
    /// Vacuum beyond the medium (m).
    pub pad: f64,
    pub t_end: f64,
    pub courant: f64,
    pub snapshot_every: usize,
    /// `csv`, `binary` or `both`.
    pub format: String,
    pub velocity_tolerance: f64,
    pub pulse: PulseConfig,
    pub segments: Vec<SegmentConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseMatchingConfig {
    /// Constant controls (rad/s); default `g sqrt N / sqrt 2` each.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega2: Option<f64>,
    pub ratio_tolerance: f64,
    pub rate_tolerance: f64,
    /// Reference lifetime of the mismatch field (s) and allowed factor.
    pub expected_lifetime: f64,
    pub lifetime_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub theta0: f64,
    pub theta1: f64,
    pub phi: f64,
    /// Input bandwidth over the initial transparency window.
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nz: Option<usize>,
    pub transmission_ratios: Vec<f64>,
    pub cells_per_width: usize,
    pub width_tolerance: f64,
    /// Ratios at or below this count as narrowband.
    pub narrowband_limit: f64,
    pub min_transmission: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub scenario: Scenario,
    pub seed: u64,
    pub atoms: AtomsConfig,
    pub protocol: ProtocolConfig,
    pub algebra: AlgebraConfig,
    pub scan: ScanConfig,
    pub medium: MediumConfig,
    pub propagate: PropagateConfig,
    pub pulse_matching: PulseMatchingConfig,
    pub bandwidth: BandwidthConfig,
}

/// Every problem found in a configuration.
#[derive(Debug, thiserror::Error)]
#[error("invalid configuration:\n  {}", .0.join("\n  "))]
pub struct ConfigErrors(pub Vec<String>);

impl Config {
    /// Defaults for a scenario.
    pub fn preset(scenario: Scenario) -> Self {
        let atoms = AtomsConfig { g1: 1e5, g2: 1e5, n_atoms: 1e8, gamma: 0.0 };
        let mut protocol = ProtocolConfig {
            cutoff: 12,
            input: "coherent".into(),
            alpha: 1.0,
            alpha_im: 0.0,
            input_mode: "probe1".into(),
            phi_e: FRAC_PI_4,
            theta_edge: dlambda::dynamics::DEFAULT_THETA_EDGE,
            ramp: None,
            hold: None,
            ramp_shape: "mixing-angle".into(),
            monitor_threshold: dlambda::dynamics::DEFAULT_MONITOR_THRESHOLD,
            min_fidelity: 0.99,
            entropy_tolerance: 1e-3,
        };
        match scenario {
            Scenario::CatEntangle => protocol.input = "cat-minus".into(),
            Scenario::SinglePhoton | Scenario::AdiabaticScan => {
                protocol.input = "single-photon".into();
                protocol.cutoff = 2;
                protocol.min_fidelity = 0.999;
                protocol.ramp = Some(40.0 / (atoms.g1 * atoms.n_atoms.sqrt()));
            }
            _ => {}
        }
        let mut medium = MediumConfig { gn1: 1e9, gn2: 1e9, gamma: 1e8, c: 3e8, length: 60.0, n_atoms: 1e8 };
        match scenario {
            Scenario::PulseMatching => medium.length = 0.6,
            Scenario::BandwidthScan => {
                medium.gn1 = 2e9;
                medium.gn2 = 2e9;
            }
            _ => {}
        }
        // theta = pi/4 with all light in the first probe
        let omega = medium.gn1;
        let propagate = PropagateConfig {
            nz: 2000,
            pad: 6.0,
            t_end: 5e-7,
            courant: 1.0,
            snapshot_every: 500,
            format: "csv".into(),
            velocity_tolerance: 0.02,
            pulse: PulseConfig { amplitude1: 1e-3, amplitude2: 0.0, center: 3e-8, width: 1e-8 },
            segments: vec![SegmentConfig { start: 0.0, end: 5e-7, omega1: omega, omega2: 0.0, to_omega1: None, to_omega2: None }],
        };
        Config {
            scenario,
            seed: 0,
            atoms,
            protocol,
            algebra: AlgebraConfig {
                cutoff: 8,
                draws: 20,
                max_n: 3,
                max_total: 4,
                tolerance: 1e-10,
                eigen_tolerance: 1e-9,
                mixing_tolerance: 1e-6,
            },
            scan: ScanConfig { ramps: None },
            medium,
            propagate,
            pulse_matching: PulseMatchingConfig {
                omega1: None,
                omega2: None,
                ratio_tolerance: 0.01,
                rate_tolerance: 0.10,
                expected_lifetime: 1e-10,
                lifetime_factor: 2.0,
            },
            bandwidth: BandwidthConfig {
                theta0: FRAC_PI_6,
                theta1: FRAC_PI_3,
                phi: 0.0,
                ratio: 0.05,
                nz: None,
                transmission_ratios: vec![0.1, 0.5, 1.0, 2.0],
                cells_per_width: 10,
                width_tolerance: 0.05,
                narrowband_limit: 0.1,
                min_transmission: 0.95,
            },
        }
    }

    /// Canonical TOML text of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// SHA-256 of [`Config::to_toml`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Collective couplings of the Fock engine.
    pub fn gn(&self) -> f64 {
        (self.atoms.g1.min(self.atoms.g2)) * self.atoms.n_atoms.sqrt()
    }
}

/// Parses and validates configuration text.
///
/// `scenario` fills in a missing `scenario` key; a conflicting one is an
/// error.
pub fn parse_config(text: &str, scenario: Option<Scenario>, overrides: &[String]) -> Result<Config, ConfigErrors> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| ConfigErrors(vec![e.to_string()]))?;
    let mut errors = Vec::new();
    for o in overrides {
        if let Err(e) = apply_override(&mut root, o) {
            errors.push(e);
        }
    }
    let cfg = resolve(root, scenario, &mut errors);
    match cfg {
        Some(c) if errors.is_empty() => Ok(c),
        _ => Err(ConfigErrors(errors)),
    }
}

/// Sets `dotted.key = value`, parsing `value` as a TOML value and falling
/// back to a bare string.
pub fn apply_override(root: &mut Table, spec: &str) -> Result<(), String> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| format!("override '{spec}' is not key=value"))?;
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("override key '{key}' is malformed"));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = entry.as_table_mut().ok_or_else(|| format!("override '{key}': '{p}' is not a table"))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Typed access to one table; remembers which keys were read so unknown
/// ones can be reported.
struct Reader<'e> {
    path: String,
    table: Table,
    used: BTreeSet<String>,
    errors: &'e mut Vec<String>,
}

impl<'e> Reader<'e> {
    fn new(path: &str, table: Table, errors: &'e mut Vec<String>) -> Self {
        Self { path: path.to_string(), table, used: BTreeSet::new(), errors }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn take(&mut self, k: &str) -> Option<Value> {
        self.used.insert(k.to_string());
        self.table.get(k).cloned()
    }

    fn error(&mut self, k: &str, msg: impl fmt::Display) {
        let key = self.key(k);
        self.errors.push(format!("{key}: {msg}"));
    }

    fn num(&mut self, k: &str, v: Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(x),
            Value::Integer(i) => Some(i as f64),
            other => {
                self.error(k, format!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn f64(&mut self, k: &str, default: f64) -> f64 {
        self.opt_f64(k).unwrap_or(default)
    }

    fn opt_f64(&mut self, k: &str) -> Option<f64> {
        let v = self.take(k)?;
        let x = self.num(k, v)?;
        if !x.is_finite() {
            self.error(k, "must be finite");
            return None;
        }
        Some(x)
    }

    fn keep_f64(&mut self, k: &str, default: Option<f64>) -> Option<f64> {
        self.opt_f64(k).or(default)
    }

    fn usize(&mut self, k: &str, default: usize) -> usize {
        self.opt_usize(k).unwrap_or(default)
    }

    fn opt_usize(&mut self, k: &str) -> Option<usize> {
        match self.take(k)? {
            Value::Integer(i) if i >= 0 => Some(i as usize),
            Value::Integer(i) => {
                self.error(k, format!("must be >= 0, got {i}"));
                None
            }
            other => {
                self.error(k, format!("expected an integer, got {}", other.type_str()));
                None
            }
        }
    }

    fn u64(&mut self, k: &str, default: u64) -> u64 {
        self.opt_usize(k).map(|x| x as u64).unwrap_or(default)
    }

    fn string(&mut self, k: &str, default: &str, allowed: &[&str]) -> String {
        let s = match self.take(k) {
            None => return default.to_string(),
            Some(Value::String(s)) => s,
            Some(other) => {
                self.error(k, format!("expected a string, got {}", other.type_str()));
                return default.to_string();
            }
        };
        if !allowed.is_empty() && !allowed.contains(&s.as_str()) {
            self.error(k, format!("'{s}' is not one of {}", allowed.join(", ")));
        }
        s
    }

    fn f64_list(&mut self, k: &str) -> Option<Vec<f64>> {
        match self.take(k)? {
            Value::Array(items) => {
                let vals: Vec<Option<f64>> = items.into_iter().map(|v| self.num(k, v)).collect();
                vals.into_iter().collect()
            }
            other => {
                self.error(k, format!("expected an array, got {}", other.type_str()));
                None
            }
        }
    }

    fn sub(&mut self, k: &str) -> Reader<'_> {
        let path = self.key(k);
        let table = match self.take(k) {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(other) => {
                self.error(k, format!("expected a table, got {}", other.type_str()));
                Table::new()
            }
        };
        Reader::new(&path, table, self.errors)
    }

    fn tables(&mut self, k: &str) -> Option<Vec<Table>> {
        match self.take(k)? {
            Value::Array(items) => {
                let mut out = Vec::new();
                for (i, v) in items.into_iter().enumerate() {
                    match v {
                        Value::Table(t) => out.push(t),
                        other => self.error(&format!("{k}[{i}]"), format!("expected a table, got {}", other.type_str())),
                    }
                }
                Some(out)
            }
            other => {
                self.error(k, format!("expected an array of tables, got {}", other.type_str()));
                None
            }
        }
    }

    fn check(&mut self, ok: bool, k: &str, msg: impl fmt::Display) {
        if !ok {
            self.error(k, msg);
        }
    }

    fn finish(self) {
        for k in self.table.keys() {
            if !self.used.contains(k) {
                let key = if self.path.is_empty() { k.clone() } else { format!("{}.{k}", self.path) };
                self.errors.push(format!("{key}: unknown key"));
            }
        }
    }
}

fn positive(x: f64) -> bool {
    x > 0.0
}

fn resolve(root: Table, scenario: Option<Scenario>, errors: &mut Vec<String>) -> Option<Config> {
    let mut r = Reader::new("", root, errors);
    let named = match r.take("scenario") {
        None => None,
        Some(Value::String(s)) => match s.parse::<Scenario>() {
            Ok(x) => Some(x),
            Err(e) => {
                r.error("scenario", e);
                None
            }
        },
        Some(other) => {
            r.error("scenario", format!("expected a string, got {}", other.type_str()));
            None
        }
    };
    let scenario = match (named, scenario) {
        (Some(a), Some(b)) if a != b => {
            r.error("scenario", format!("config is for '{a}' but '{b}' was requested"));
            b
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => {
            if r.table.get("scenario").is_none() {
                r.error("scenario", "missing");
            }
            // other keys cannot be checked without knowing the scenario
            return None;
        }
    };
    let d = Config::preset(scenario);
    let seed = r.u64("seed", d.seed);

    let atoms = {
        let mut s = r.sub("atoms");
        let a = AtomsConfig {
            g1: s.f64("g1", d.atoms.g1),
            g2: s.f64("g2", d.atoms.g2),
            n_atoms: s.f64("n_atoms", d.atoms.n_atoms),
            gamma: s.f64("gamma", d.atoms.gamma),
        };
        s.check(positive(a.g1), "g1", "must be > 0 rad/s");
        s.check(positive(a.g2), "g2", "must be > 0 rad/s");
        s.check(a.n_atoms >= 1.0, "n_atoms", "must be >= 1");
        s.check(a.gamma >= 0.0, "gamma", "must be >= 0 rad/s");
        s.finish();
        a
    };

    let protocol = {
        let p0 = &d.protocol;
        let mut s = r.sub("protocol");
        let p = ProtocolConfig {
            cutoff: s.usize("cutoff", p0.cutoff),
            input: s.string("input", &p0.input, &["coherent", "cat-plus", "cat-minus", "single-photon"]),
            alpha: s.f64("alpha", p0.alpha),
            alpha_im: s.f64("alpha_im", p0.alpha_im),
            input_mode: s.string("input_mode", &p0.input_mode, &["probe1", "probe2"]),
            phi_e: s.f64("phi_e", p0.phi_e),
            theta_edge: s.f64("theta_edge", p0.theta_edge),
            ramp: s.keep_f64("ramp", p0.ramp),
            hold: s.keep_f64("hold", p0.hold),
            ramp_shape: s.string("ramp_shape", &p0.ramp_shape, &["mixing-angle", "cosine"]),
            monitor_threshold: s.f64("monitor_threshold", p0.monitor_threshold),
            min_fidelity: s.f64("min_fidelity", p0.min_fidelity),
            entropy_tolerance: s.f64("entropy_tolerance", p0.entropy_tolerance),
        };
        s.check(p.cutoff <= dlambda::fock::MAX_CUTOFF, "cutoff", format!("must be <= {}", dlambda::fock::MAX_CUTOFF));
        s.check(p.cutoff >= 1, "cutoff", "must be >= 1");
        s.check((0.0..=FRAC_PI_2 * (1.0 + 1e-12)).contains(&p.phi_e), "phi_e", format!("{} rad is outside [0, pi/2]", p.phi_e));
        s.check(
            p.theta_edge > 0.0 && p.theta_edge <= dlambda::dynamics::MAX_THETA_EDGE,
            "theta_edge",
            format!("must lie in (0, {}] rad", dlambda::dynamics::MAX_THETA_EDGE),
        );
        s.check(p.ramp.is_none_or(positive), "ramp", "must be > 0 s");
        s.check(p.hold.is_none_or(|h| h >= 0.0), "hold", "must be >= 0 s");
        s.check((0.0..1.0).contains(&p.monitor_threshold), "monitor_threshold", "must lie in [0, 1)");
        s.check((0.0..=1.0).contains(&p.min_fidelity), "min_fidelity", "must lie in [0, 1]");
        s.check(positive(p.entropy_tolerance), "entropy_tolerance", "must be > 0");
        s.check(scenario != Scenario::CatEntangle || p.input.starts_with("cat-"), "input", "cat-entangle needs cat-plus or cat-minus");
        s.check(
            scenario != Scenario::SinglePhoton || p.input == "single-photon",
            "input",
            "single-photon needs the single-photon input",
        );
        s.finish();
        p
    };

    let algebra = {
        let a0 = &d.algebra;
        let mut s = r.sub("algebra");
        let a = AlgebraConfig {
            cutoff: s.usize("cutoff", a0.cutoff),
            draws: s.usize("draws", a0.draws),
            max_n: s.usize("max_n", a0.max_n),
            max_total: s.usize("max_total", a0.max_total),
            tolerance: s.f64("tolerance", a0.tolerance),
            eigen_tolerance: s.f64("eigen_tolerance", a0.eigen_tolerance),
            mixing_tolerance: s.f64("mixing_tolerance", a0.mixing_tolerance),
        };
        s.check(a.cutoff >= 2 && a.cutoff <= 10, "cutoff", "must lie in [2, 10]");
        s.check(a.max_n <= a.cutoff, "max_n", "must not exceed the cutoff");
        s.check(a.max_total + 2 <= 10, "max_total", "must be <= 8");
        s.check(a.draws >= 1, "draws", "must be >= 1");
        for (k, v) in [("tolerance", a.tolerance), ("eigen_tolerance", a.eigen_tolerance), ("mixing_tolerance", a.mixing_tolerance)] {
            s.check(positive(v), k, "must be > 0");
        }
        s.finish();
        a
    };

    let scan = {
        let mut s = r.sub("scan");
        let ramps = s.f64_list("ramps").or(d.scan.ramps.clone());
        if let Some(v) = &ramps {
            s.check(v.len() >= 2, "ramps", "needs at least two durations");
            s.check(v.iter().all(|&x| x > 0.0), "ramps", "durations must be > 0 s");
        }
        s.finish();
        ScanConfig { ramps }
    };

    let medium = {
        let m0 = &d.medium;
        let mut s = r.sub("medium");
        let m = MediumConfig {
            gn1: s.f64("gn1", m0.gn1),
            gn2: s.f64("gn2", m0.gn2),
            gamma: s.f64("gamma", m0.gamma),
            c: s.f64("c", m0.c),
            length: s.f64("length", m0.length),
            n_atoms: s.f64("n_atoms", m0.n_atoms),
        };
        for (k, v) in [("gn1", m.gn1), ("gn2", m.gn2), ("c", m.c), ("length", m.length)] {
            s.check(positive(v), k, "must be > 0");
        }
        s.check(m.gamma >= 0.0, "gamma", "must be >= 0 rad/s");
        s.check(m.n_atoms >= 1.0, "n_atoms", "must be >= 1");
        s.finish();
        m
    };

    let propagate = {
        let q0 = &d.propagate;
        let mut s = r.sub("propagate");
        let nz = s.usize("nz", q0.nz);
        let pad = s.f64("pad", q0.pad);
        let t_end = s.f64("t_end", q0.t_end);
        let courant = s.f64("courant", q0.courant);
        let snapshot_every = s.usize("snapshot_every", q0.snapshot_every);
        let format = s.string("format", &q0.format, &["csv", "binary", "both"]);
        let velocity_tolerance = s.f64("velocity_tolerance", q0.velocity_tolerance);
        s.check(nz >= 2, "nz", "must be >= 2");
        s.check(pad >= 0.0, "pad", "must be >= 0 m");
        s.check(positive(t_end), "t_end", "must be > 0 s");
        s.check(courant > 0.0 && courant <= 1.0, "courant", "must lie in (0, 1]");
        s.check(positive(velocity_tolerance), "velocity_tolerance", "must be > 0");
        let pulse = {
            let mut ps = s.sub("pulse");
            let p = PulseConfig {
                amplitude1: ps.f64("amplitude1", q0.pulse.amplitude1),
                amplitude2: ps.f64("amplitude2", q0.pulse.amplitude2),
                center: ps.f64("center", q0.pulse.center),
                width: ps.f64("width", q0.pulse.width),
            };
            ps.check(positive(p.width), "width", "must be > 0 s");
            ps.finish();
            p
        };
        let segments = match s.tables("segments") {
            None => q0.segments.clone(),
            Some(tables) => tables
                .into_iter()
                .enumerate()
                .map(|(i, t)| {
                    let mut g = Reader::new(&format!("propagate.segments[{i}]"), t, s.errors);
                    let seg = SegmentConfig {
                        start: g.f64("start", f64::NAN),
                        end: g.f64("end", f64::NAN),
                        omega1: g.f64("omega1", 0.0),
                        omega2: g.f64("omega2", 0.0),
                        to_omega1: g.opt_f64("to_omega1"),
                        to_omega2: g.opt_f64("to_omega2"),
                    };
                    g.check(!seg.start.is_nan(), "start", "missing");
                    g.check(!seg.end.is_nan(), "end", "missing");
                    let controls = [Some(seg.omega1), Some(seg.omega2), seg.to_omega1, seg.to_omega2];
                    g.check(controls.iter().flatten().all(|&x| x >= 0.0), "omega", "control amplitudes must be >= 0 rad/s");
                    g.check(seg.to_omega1.is_some() == seg.to_omega2.is_some(), "to_omega1", "ramps need both to_omega1 and to_omega2");
                    g.finish();
                    seg
                })
                .collect(),
        };
        check_segments(&segments, &mut s);
        s.finish();
        PropagateConfig { nz, pad, t_end, courant, snapshot_every, format, velocity_tolerance, pulse, segments }
    };

    let pulse_matching = {
        let p0 = &d.pulse_matching;
        let mut s = r.sub("pulse_matching");
        let p = PulseMatchingConfig {
            omega1: s.keep_f64("omega1", p0.omega1),
            omega2: s.keep_f64("omega2", p0.omega2),
            ratio_tolerance: s.f64("ratio_tolerance", p0.ratio_tolerance),
            rate_tolerance: s.f64("rate_tolerance", p0.rate_tolerance),
            expected_lifetime: s.f64("expected_lifetime", p0.expected_lifetime),
            lifetime_factor: s.f64("lifetime_factor", p0.lifetime_factor),
        };
        s.check(p.omega1.is_none_or(positive) && p.omega2.is_none_or(positive), "omega1", "controls must be > 0 rad/s");
        s.check(p.lifetime_factor >= 1.0, "lifetime_factor", "must be >= 1");
        for (k, v) in [("ratio_tolerance", p.ratio_tolerance), ("rate_tolerance", p.rate_tolerance), ("expected_lifetime", p.expected_lifetime)] {
            s.check(positive(v), k, "must be > 0");
        }
        s.finish();
        p
    };

    let bandwidth = {
        let b0 = &d.bandwidth;
        let mut s = r.sub("bandwidth");
        let b = BandwidthConfig {
            theta0: s.f64("theta0", b0.theta0),
            theta1: s.f64("theta1", b0.theta1),
            phi: s.f64("phi", b0.phi),
            ratio: s.f64("ratio", b0.ratio),
            nz: s.opt_usize("nz").or(b0.nz),
            transmission_ratios: s.f64_list("transmission_ratios").unwrap_or_else(|| b0.transmission_ratios.clone()),
            cells_per_width: s.usize("cells_per_width", b0.cells_per_width),
            width_tolerance: s.f64("width_tolerance", b0.width_tolerance),
            narrowband_limit: s.f64("narrowband_limit", b0.narrowband_limit),
            min_transmission: s.f64("min_transmission", b0.min_transmission),
        };
        for (k, v) in [("theta0", b.theta0), ("theta1", b.theta1)] {
            s.check(v > 0.0 && v < FRAC_PI_2, k, format!("{v} rad is outside (0, pi/2)"));
        }
        s.check((0.0..=FRAC_PI_2).contains(&b.phi), "phi", format!("{} rad is outside [0, pi/2]", b.phi));
        s.check(positive(b.ratio), "ratio", "must be > 0");
        s.check(b.transmission_ratios.iter().all(|&x| x > 0.0), "transmission_ratios", "must be > 0");
        s.check(b.cells_per_width >= 4, "cells_per_width", "must be >= 4");
        s.check(b.nz.is_none_or(|n| n >= 100), "nz", "must be >= 100");
        s.finish();
        b
    };

    r.finish();
    Some(Config { scenario, seed, atoms, protocol, algebra, scan, medium, propagate, pulse_matching, bandwidth })
}

fn check_segments(segments: &[SegmentConfig], s: &mut Reader<'_>) {
    if segments.is_empty() {
        s.error("segments", "at least one segment is required");
        return;
    }
    if segments[0].start > 0.0 {
        s.error("segments", format!("segment 0 starts at {} s; the schedule must cover t = 0", segments[0].start));
    }
    for (i, seg) in segments.iter().enumerate() {
        if seg.end <= seg.start {
            s.error("segments", format!("segment {i} has end {} <= start {}", seg.end, seg.start));
        }
    }
    for (i, w) in segments.windows(2).enumerate() {
        let tol = 1e-12 * w[0].end.abs().max(f64::MIN_POSITIVE);
        if w[1].start < w[0].end - tol {
            s.error("segments", format!("segments {i} and {} overlap on [{:e}, {:e}] s", i + 1, w[1].start, w[0].end));
        } else if w[1].start > w[0].end + tol {
            s.error("segments", format!("gap between segments {i} and {} on [{:e}, {:e}] s", i + 1, w[0].end, w[1].start));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_preset_defaults() {
        let cfg = parse_config("scenario = \"store-release\"", None, &[]).unwrap();
        assert_eq!(cfg, Config::preset(Scenario::StoreRelease));
    }

    #[test]
    fn every_error_is_reported() {
        let text = "scenario = \"store-release\"\nbogus = 1\n[protocol]\nphi_e = 2.0\ncutoff = 40\n[atoms]\ng1 = -1";
        let err = parse_config(text, None, &[]).unwrap_err();
        let all = err.0.join("\n");
        assert!(all.contains("bogus: unknown key"), "{all}");
        assert!(all.contains("protocol.phi_e: 2 rad is outside [0, pi/2]"), "{all}");
        assert!(all.contains("protocol.cutoff"), "{all}");
        assert!(all.contains("atoms.g1"), "{all}");
        assert_eq!(err.0.len(), 4);
    }

    #[test]
    fn overlapping_segments_name_the_interval() {
        let text = "scenario = \"propagate-1d\"\n[[propagate.segments]]\nstart = 0.0\nend = 2e-7\nomega1 = 1e9\n\
                    [[propagate.segments]]\nstart = 1e-7\nend = 5e-7\nomega1 = 1e9\n";
        let err = parse_config(text, None, &[]).unwrap_err();
        assert!(err.0[0].contains("overlap on [1e-7, 2e-7] s"), "{:?}", err.0);
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let err = parse_config("scenario = \"teleport\"", None, &[]).unwrap_err();
        assert!(err.0[0].contains("unknown scenario 'teleport'"));
    }

    #[test]
    fn overrides_patch_nested_keys() {
        let o = vec!["protocol.phi_e = 0.5".to_string(), "protocol.input=cat-plus".to_string()];
        let cfg = parse_config("", Some(Scenario::CatEntangle), &o).unwrap();
        assert_eq!(cfg.protocol.phi_e, 0.5);
        assert_eq!(cfg.protocol.input, "cat-plus");
    }

    #[test]
    fn round_trip_through_toml() {
        for s in Scenario::ALL {
            let cfg = Config::preset(s);
            let back = parse_config(&cfg.to_toml(), None, &[]).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
    }
}
