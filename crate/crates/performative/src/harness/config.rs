//! Flat key-value experiment configuration.
//!
//! The format is one `[plan]` section plus one `[scenario.NAME]` section
//! per experiment — `key = value` lines, `#` comments, no nesting — chosen
//! over structured formats so config diffs stay line-per-fact:
//!
//! ```text
//! [plan]
//! methods = plugin, dfo, sgd
//! budgets = 500, 1000, 2000
//! reps = 10
//! master_seed = 42
//!
//! [scenario.coin_base]
//! kind = coin
//! mu = 0.3
//! eta = 0.2
//! ```
//!
//! Unknown keys, duplicate keys, and malformed values are all errors
//! carrying the offending line number.

use crate::error::HarnessError;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// An optimization method the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Deploy, fit the atlas, optimize the modeled risk.
    Plugin,
    /// One-point zeroth-order search on the true risk.
    Dfo,
    /// Greedy stochastic gradient on the deployed distribution.
    Sgd,
    /// Gradient method with a numerically estimated mean-shift term.
    PerfGd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Plugin => "plugin",
            Method::Dfo => "dfo",
            Method::Sgd => "sgd",
            Method::PerfGd => "perfgd",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "plugin" => Some(Method::Plugin),
            "dfo" => Some(Method::Dfo),
            "sgd" => Some(Method::Sgd),
            "perfgd" => Some(Method::PerfGd),
            _ => None,
        }
    }
}

/// Whether baselines run with defaults or grid-tuned hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tuning {
    /// Untuned defaults; methods appear under their plain names.
    Off,
    /// Pick the best grid combo per (method, budget) on a dedicated
    /// tuning repetition, then run the plan with it; methods appear as
    /// `<name>_tuned` and tuning draws are ledgered separately.
    Grid,
}

/// The run plan: which methods, budgets, and repetitions to execute.
#[derive(Clone, Debug)]
pub struct PlanConfig {
    pub methods: Vec<Method>,
    /// Sample budgets, strictly increasing.
    pub budgets: Vec<usize>,
    pub reps: usize,
    pub master_seed: u64,
    /// Fresh draws per excess-risk evaluation (the evaluation ledger).
    pub eval_m: usize,
    /// Worker threads; 0 means use the environment/default.
    pub jobs: usize,
    pub tuning: Tuning,
    /// True-sample budget for sampling-based oracle computation.
    pub oracle_budget: u64,
    /// Output directory for CSV/plots/oracle cache, unless overridden.
    pub out_dir: Option<PathBuf>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            methods: vec![Method::Plugin, Method::Dfo, Method::Sgd, Method::PerfGd],
            budgets: vec![500, 1000, 2000, 4000, 8000, 16000, 32000],
            reps: 10,
            master_seed: 7,
            eval_m: 100_000,
            jobs: 0,
            tuning: Tuning::Off,
            oracle_budget: 1_000_000,
            out_dir: None,
        }
    }
}

impl PlanConfig {
    /// Enforce the structural invariants.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.methods.is_empty() {
            return Err(HarnessError::InvalidPlan("method list is empty".into()));
        }
        if self.budgets.is_empty() {
            return Err(HarnessError::InvalidPlan("budget list is empty".into()));
        }
        if !self.budgets.windows(2).all(|w| w[0] < w[1]) {
            return Err(HarnessError::InvalidPlan(format!(
                "budgets must be strictly increasing, got {:?}",
                self.budgets
            )));
        }
        if self.reps == 0 {
            return Err(HarnessError::InvalidPlan("repetitions must be >= 1".into()));
        }
        if self.eval_m < 2 {
            return Err(HarnessError::InvalidPlan(
                "eval_m must be >= 2 for a standard error".into(),
            ));
        }
        Ok(())
    }
}

/// Ground truth, atlas, loss, and exploration for one experiment.
#[derive(Clone, Debug)]
pub enum ScenarioConfig {
    /// Biased coin with quadratic response; linear-coin atlas, squared
    /// loss, theta in [0, 1].
    Coin { mu: f64, eta: f64 },
    /// Gaussian location family with optional quadratic term; linear
    /// location atlas with intercept, squared loss, theta in a ball.
    Location {
        d: usize,
        s: f64,
        sigma: f64,
        b_seed: u64,
        m1_seed: u64,
        m2_seed: u64,
        theta_radius: f64,
        intercept: bool,
    },
    /// Power-rho feature gaming over a synthetic base; linear-utility
    /// response atlas, logistic-ridge loss, theta in a ball.
    StratReg {
        d_x: usize,
        beta_tilde: f64,
        rho: f64,
        base_size: usize,
        base_seed: u64,
        ridge_lambda: f64,
        beta_max: f64,
        theta_radius: f64,
        manipulable: Option<Vec<usize>>,
    },
    /// Budgeted threshold gaming over a synthetic base; boundary-mass
    /// atlas, logistic-ridge loss, unit-norm scorers.
    StratClass {
        d_x: usize,
        beta_true: f64,
        threshold: f64,
        base_size: usize,
        base_seed: u64,
        beta_max: f64,
        epsilon: f64,
        ridge_lambda: f64,
    },
}

impl ScenarioConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ScenarioConfig::Coin { .. } => "coin",
            ScenarioConfig::Location { .. } => "location",
            ScenarioConfig::StratReg { .. } => "strat_reg",
            ScenarioConfig::StratClass { .. } => "strat_class",
        }
    }

    /// Canonical serialization: sorted `key=value` lines. Floats use the
    /// shortest round-trip form, so equal configs hash equally.
    pub fn canonical(&self) -> String {
        let mut kv: BTreeMap<&'static str, String> = BTreeMap::new();
        kv.insert("kind", self.kind_name().to_string());
        match self {
            ScenarioConfig::Coin { mu, eta } => {
                kv.insert("mu", format!("{mu}"));
                kv.insert("eta", format!("{eta}"));
            }
            ScenarioConfig::Location {
                d,
                s,
                sigma,
                b_seed,
                m1_seed,
                m2_seed,
                theta_radius,
                intercept,
            } => {
                kv.insert("d", format!("{d}"));
                kv.insert("s", format!("{s}"));
                kv.insert("sigma", format!("{sigma}"));
                kv.insert("b_seed", format!("{b_seed}"));
                kv.insert("m1_seed", format!("{m1_seed}"));
                kv.insert("m2_seed", format!("{m2_seed}"));
                kv.insert("theta_radius", format!("{theta_radius}"));
                kv.insert("intercept", format!("{intercept}"));
            }
            ScenarioConfig::StratReg {
                d_x,
                beta_tilde,
                rho,
                base_size,
                base_seed,
                ridge_lambda,
                beta_max,
                theta_radius,
                manipulable,
            } => {
                kv.insert("d_x", format!("{d_x}"));
                kv.insert("beta_tilde", format!("{beta_tilde}"));
                kv.insert("rho", format!("{rho}"));
                kv.insert("base_size", format!("{base_size}"));
                kv.insert("base_seed", format!("{base_seed}"));
                kv.insert("ridge_lambda", format!("{ridge_lambda}"));
                kv.insert("beta_max", format!("{beta_max}"));
                kv.insert("theta_radius", format!("{theta_radius}"));
                if let Some(idx) = manipulable {
                    let list: Vec<String> = idx.iter().map(|j| j.to_string()).collect();
                    kv.insert("manipulable", list.join(" "));
                }
            }
            ScenarioConfig::StratClass {
                d_x,
                beta_true,
                threshold,
                base_size,
                base_seed,
                beta_max,
                epsilon,
                ridge_lambda,
            } => {
                kv.insert("d_x", format!("{d_x}"));
                kv.insert("beta_true", format!("{beta_true}"));
                kv.insert("threshold", format!("{threshold}"));
                kv.insert("base_size", format!("{base_size}"));
                kv.insert("base_seed", format!("{base_seed}"));
                kv.insert("beta_max", format!("{beta_max}"));
                kv.insert("epsilon", format!("{epsilon}"));
                kv.insert("ridge_lambda", format!("{ridge_lambda}"));
            }
        }
        kv.iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// FNV-1a hash of the canonical form, in hex: the scenario identity
    /// used for oracle caching and CSV records.
    pub fn hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.canonical().as_bytes()))
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A parsed experiment file: the plan plus named scenarios, in file order.
#[derive(Clone, Debug)]
pub struct ParsedConfig {
    pub plan: PlanConfig,
    pub scenarios: Vec<(String, ScenarioConfig)>,
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<ParsedConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// One `key = value` occurrence with its source line.
struct Entry {
    line: usize,
    value: String,
}

/// Section bodies keyed by entry name, duplicates rejected at insert.
struct Section {
    header_line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    /// After consuming known keys, anything left is unknown.
    fn reject_leftovers(self, context: &str) -> Result<(), HarnessError> {
        if let Some((key, entry)) = self.entries.into_iter().next() {
            return Err(HarnessError::Config {
                line: entry.line,
                detail: format!("unknown key '{key}' in {context}"),
            });
        }
        Ok(())
    }
}

/// Parse the flat key-value format.
pub fn parse_config(text: &str) -> Result<ParsedConfig, HarnessError> {
    let mut plan_section: Option<Section> = None;
    // (name, section), in file order.
    let mut scenario_sections: Vec<(String, Section)> = Vec::new();
    let mut current: Option<&mut Section> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let header = header.strip_suffix(']').ok_or(HarnessError::Config {
                line: line_no,
                detail: "unterminated section header".into(),
            })?;
            let section = Section {
                header_line: line_no,
                entries: BTreeMap::new(),
            };
            if header == "plan" {
                if plan_section.is_some() {
                    return Err(HarnessError::Config {
                        line: line_no,
                        detail: "duplicate [plan] section".into(),
                    });
                }
                plan_section = Some(section);
                current = plan_section.as_mut();
            } else if let Some(name) = header.strip_prefix("scenario.") {
                if name.is_empty()
                    || !name
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                {
                    return Err(HarnessError::Config {
                        line: line_no,
                        detail: format!(
                            "scenario name '{name}' must be nonempty [A-Za-z0-9_-]"
                        ),
                    });
                }
                if scenario_sections.iter().any(|(n, _)| n == name) {
                    return Err(HarnessError::Config {
                        line: line_no,
                        detail: format!("duplicate scenario '{name}'"),
                    });
                }
                scenario_sections.push((name.to_string(), section));
                current = scenario_sections.last_mut().map(|(_, s)| s);
            } else {
                return Err(HarnessError::Config {
                    line: line_no,
                    detail: format!(
                        "unknown section '[{header}]' (expected [plan] or [scenario.NAME])"
                    ),
                });
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::Config {
                line: line_no,
                detail: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let Some(section) = current.as_deref_mut() else {
            return Err(HarnessError::Config {
                line: line_no,
                detail: "key outside any section".into(),
            });
        };
        if section
            .entries
            .insert(key.clone(), Entry { line: line_no, value })
            .is_some()
        {
            return Err(HarnessError::Config {
                line: line_no,
                detail: format!("duplicate key '{key}'"),
            });
        }
    }

    let plan = match plan_section {
        Some(section) => build_plan(section)?,
        None => PlanConfig::default(),
    };
    plan.validate()?;
    if scenario_sections.is_empty() {
        return Err(HarnessError::Config {
            line: 0,
            detail: "no [scenario.NAME] section".into(),
        });
    }
    let mut scenarios = Vec::with_capacity(scenario_sections.len());
    for (name, section) in scenario_sections {
        scenarios.push((name, build_scenario(section)?));
    }
    Ok(ParsedConfig { plan, scenarios })
}

fn parse_as<T: std::str::FromStr>(entry: &Entry, what: &str) -> Result<T, HarnessError> {
    entry.value.parse().map_err(|_| HarnessError::Config {
        line: entry.line,
        detail: format!("cannot parse '{}' as {what}", entry.value),
    })
}

fn take_or<T: std::str::FromStr>(
    section: &mut Section,
    key: &str,
    what: &str,
    default: T,
) -> Result<T, HarnessError> {
    match section.take(key) {
        Some(entry) => parse_as(&entry, what),
        None => Ok(default),
    }
}

fn take_required<T: std::str::FromStr>(
    section: &mut Section,
    key: &str,
    what: &str,
) -> Result<T, HarnessError> {
    let header_line = section.header_line;
    match section.take(key) {
        Some(entry) => parse_as(&entry, what),
        None => Err(HarnessError::Config {
            line: header_line,
            detail: format!("missing required key '{key}'"),
        }),
    }
}

fn build_plan(mut section: Section) -> Result<PlanConfig, HarnessError> {
    let mut plan = PlanConfig::default();
    if let Some(entry) = section.take("methods") {
        let mut methods = Vec::new();
        for part in entry.value.split(',') {
            let part = part.trim();
            let m = Method::parse(part).ok_or(HarnessError::Config {
                line: entry.line,
                detail: format!(
                    "unknown method '{part}' (expected plugin|dfo|sgd|perfgd)"
                ),
            })?;
            if methods.contains(&m) {
                return Err(HarnessError::Config {
                    line: entry.line,
                    detail: format!("method '{part}' listed twice"),
                });
            }
            methods.push(m);
        }
        plan.methods = methods;
    }
    if let Some(entry) = section.take("budgets") {
        let mut budgets = Vec::new();
        for part in entry.value.split(',') {
            let n: usize = part.trim().parse().map_err(|_| HarnessError::Config {
                line: entry.line,
                detail: format!("cannot parse budget '{}'", part.trim()),
            })?;
            budgets.push(n);
        }
        plan.budgets = budgets;
    }
    plan.reps = take_or(&mut section, "reps", "an integer", plan.reps)?;
    plan.master_seed = take_or(&mut section, "master_seed", "an integer", plan.master_seed)?;
    plan.eval_m = take_or(&mut section, "eval_m", "an integer", plan.eval_m)?;
    plan.jobs = take_or(&mut section, "jobs", "an integer", plan.jobs)?;
    plan.oracle_budget = take_or(
        &mut section,
        "oracle_budget",
        "an integer",
        plan.oracle_budget,
    )?;
    if let Some(entry) = section.take("tuning") {
        plan.tuning = match entry.value.as_str() {
            "off" => Tuning::Off,
            "grid" => Tuning::Grid,
            other => {
                return Err(HarnessError::Config {
                    line: entry.line,
                    detail: format!("unknown tuning mode '{other}' (expected off|grid)"),
                })
            }
        };
    }
    if let Some(entry) = section.take("out_dir") {
        plan.out_dir = Some(PathBuf::from(entry.value));
    }
    section.reject_leftovers("[plan]")?;
    Ok(plan)
}

fn build_scenario(mut section: Section) -> Result<ScenarioConfig, HarnessError> {
    let kind_entry = section.take("kind").ok_or(HarnessError::Config {
        line: section.header_line,
        detail: "missing required key 'kind'".into(),
    })?;
    let scenario = match kind_entry.value.as_str() {
        "coin" => ScenarioConfig::Coin {
            mu: take_required(&mut section, "mu", "a number")?,
            eta: take_or(&mut section, "eta", "a number", 0.0)?,
        },
        "location" => ScenarioConfig::Location {
            d: take_required(&mut section, "d", "an integer")?,
            s: take_or(&mut section, "s", "a number", 0.0)?,
            sigma: take_or(&mut section, "sigma", "a number", 0.5)?,
            b_seed: take_or(&mut section, "b_seed", "an integer", 11)?,
            m1_seed: take_or(&mut section, "m1_seed", "an integer", 12)?,
            m2_seed: take_or(&mut section, "m2_seed", "an integer", 13)?,
            theta_radius: take_or(&mut section, "theta_radius", "a number", 1.0)?,
            intercept: take_or(&mut section, "intercept", "true or false", true)?,
        },
        "strat_reg" => {
            let manipulable = match section.take("manipulable") {
                Some(entry) => {
                    let mut idx = Vec::new();
                    for part in entry.value.split(',') {
                        idx.push(part.trim().parse().map_err(|_| HarnessError::Config {
                            line: entry.line,
                            detail: format!("cannot parse index '{}'", part.trim()),
                        })?);
                    }
                    Some(idx)
                }
                None => None,
            };
            ScenarioConfig::StratReg {
                d_x: take_required(&mut section, "d_x", "an integer")?,
                beta_tilde: take_or(&mut section, "beta_tilde", "a number", 2.0)?,
                rho: take_or(&mut section, "rho", "a number", 2.0)?,
                base_size: take_or(&mut section, "base_size", "an integer", 1000)?,
                base_seed: take_or(&mut section, "base_seed", "an integer", 17)?,
                ridge_lambda: take_or(&mut section, "ridge_lambda", "a number", 0.001)?,
                beta_max: take_or(&mut section, "beta_max", "a number", 4.0)?,
                theta_radius: take_or(&mut section, "theta_radius", "a number", 1.0)?,
                manipulable,
            }
        }
        "strat_class" => ScenarioConfig::StratClass {
            d_x: take_required(&mut section, "d_x", "an integer")?,
            beta_true: take_or(&mut section, "beta_true", "a number", 0.2)?,
            threshold: take_or(&mut section, "threshold", "a number", 0.5)?,
            base_size: take_or(&mut section, "base_size", "an integer", 5000)?,
            base_seed: take_or(&mut section, "base_seed", "an integer", 19)?,
            beta_max: take_or(&mut section, "beta_max", "a number", 1.0)?,
            epsilon: take_or(&mut section, "epsilon", "a number", 0.01)?,
            ridge_lambda: take_or(&mut section, "ridge_lambda", "a number", 0.001)?,
        },
        other => {
            return Err(HarnessError::Config {
                line: kind_entry.line,
                detail: format!(
                    "unknown scenario kind '{other}' (expected coin|location|strat_reg|strat_class)"
                ),
            })
        }
    };
    section.reject_leftovers(&format!("a '{}' scenario", scenario.kind_name()))?;
    Ok(scenario)
}
