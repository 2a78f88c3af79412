use serde::Serialize;

use super::{McConfig, MAX_CAP_FRACTION};

/// How an item's estimate is compared with its bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `estimate ≤ bound + tolerance`
    Le,
    /// `estimate ≥ bound - tolerance`
    Ge,
    /// `|estimate - bound| ≤ tolerance`
    Eq,
}

/// One comparison inside a check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckItem {
    pub label: String,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckItem {
    pub fn new(label: impl Into<String>, estimate: f64, stderr: f64, relation: Relation, bound: f64, tolerance: f64) -> Self {
        let mut item = CheckItem {
            label: label.into(),
            estimate,
            stderr,
            bound,
            relation,
            tolerance,
            pass: false,
        };
        item.pass = item.slack() >= 0.0;
        item
    }

    /// Statistical upper bound with the usual 3·stderr gate.
    pub fn le(label: impl Into<String>, estimate: f64, stderr: f64, bound: f64) -> Self {
        Self::new(label, estimate, stderr, Relation::Le, bound, 3.0 * stderr)
    }

    pub fn ge(label: impl Into<String>, estimate: f64, stderr: f64, bound: f64) -> Self {
        Self::new(label, estimate, stderr, Relation::Ge, bound, 3.0 * stderr)
    }

    /// `|estimate - target| ≤ 3·stderr + allowance`
    pub fn eq(label: impl Into<String>, estimate: f64, stderr: f64, target: f64, allowance: f64) -> Self {
        Self::new(label, estimate, stderr, Relation::Eq, target, 3.0 * stderr + allowance)
    }

    /// Distance to failing; negative (or NaN) when the item fails.
    pub fn slack(&self) -> f64 {
        let s = match self.relation {
            Relation::Le => self.bound + self.tolerance - self.estimate,
            Relation::Ge => self.estimate - self.bound + self.tolerance,
            Relation::Eq => self.tolerance - (self.estimate - self.bound).abs(),
        };
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    }
}

/// The machine-readable result of one check. The headline numbers are
/// those of the item closest to failing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub cap_fraction: f64,
    pub items: Vec<CheckItem>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, items: Vec<CheckItem>) -> Self {
        let worst = items
            .iter()
            .min_by(|a, b| a.slack().total_cmp(&b.slack()))
            .cloned();
        let (estimate, stderr, bound) = worst.map_or((0.0, 0.0, 0.0), |w| (w.estimate, w.stderr, w.bound));
        CheckReport {
            name: name.into(),
            estimate,
            stderr,
            bound,
            pass: items.iter().all(|i| i.pass),
            n_paths: 0,
            dt: 0.0,
            seed: 0,
            cap_fraction: 0.0,
            items,
            notes: Vec::new(),
        }
    }

    /// Records the run parameters and applies the cap guard.
    pub fn with_run(mut self, cfg: &McConfig, n_paths: usize, cap_fraction: f64, cap_guard: bool) -> Self {
        self.n_paths = n_paths;
        self.dt = cfg.dt;
        self.seed = cfg.seed;
        self.cap_fraction = cap_fraction;
        if cap_guard && cap_fraction > MAX_CAP_FRACTION {
            if cfg.allow_cap {
                self.notes.push(format!("cap fraction {cap_fraction:.4} allowed by configuration"));
            } else {
                self.pass = false;
                self.notes.push(format!("cap fraction {cap_fraction:.4} exceeds {MAX_CAP_FRACTION}"));
            }
        }
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    pub fn item(&self, label: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.label == label)
    }
}
