//! Check names understood by `verify`.

/// The default suite, one report each.
pub const FULL_SUITE: [&str; 10] = [
    "value",
    "dpp",
    "deviation",
    "supermartingale",
    "submartingale",
    "moments",
    "occupation",
    "localization",
    "exhaustion",
    "p_invariance",
];

/// Available by name but not part of `full`.
pub const EXTRA: [&str; 2] = ["barrier", "insensitivity"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gamma {
    Zero,
    Tau,
    /// Exit from the domain shrunk by a quarter of its diameter.
    Exit,
    /// The fixed time `dpp_time`.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lambda {
    Zero,
    One,
    /// `4·Π(x_i - lo_i)(hi_i - x_i)/(hi_i - lo_i)²` over the bounding box.
    Bump,
}

pub const GAMMAS: [Gamma; 4] = [Gamma::Zero, Gamma::Tau, Gamma::Exit, Gamma::Fixed];
pub const LAMBDAS: [Lambda; 3] = [Lambda::Zero, Lambda::One, Lambda::Bump];

impl Gamma {
    pub fn name(self) -> &'static str {
        match self {
            Gamma::Zero => "zero",
            Gamma::Tau => "tau",
            Gamma::Exit => "exit",
            Gamma::Fixed => "fixed",
        }
    }
}

impl Lambda {
    pub fn name(self) -> &'static str {
        match self {
            Lambda::Zero => "0",
            Lambda::One => "1",
            Lambda::Bump => "bump",
        }
    }
}

/// One selected check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Check {
    Named(&'static str),
    /// `dpp` restricted to some `(γ, λ)` combinations.
    Dpp { label: String, rules: Vec<(Gamma, Lambda)> },
}

impl Check {
    pub fn label(&self) -> String {
        match self {
            Check::Named(n) => n.to_string(),
            Check::Dpp { label, .. } => label.clone(),
        }
    }
}

fn known(name: &str) -> Option<&'static str> {
    FULL_SUITE.iter().chain(EXTRA.iter()).copied().find(|n| *n == name)
}

fn parse_dpp(label: &str, args: &str) -> Result<Check, String> {
    let mut gammas: Vec<Gamma> = GAMMAS.to_vec();
    let mut lambdas: Vec<Lambda> = LAMBDAS.to_vec();
    for kv in args.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("check {label:?}: expected key=value, got {kv:?}"))?;
        match k {
            "gamma" => {
                gammas = vec![*GAMMAS
                    .iter()
                    .find(|g| g.name() == v)
                    .ok_or_else(|| format!("check {label:?}: unknown gamma {v:?} (zero, tau, exit, fixed)"))?]
            }
            "lambda" => {
                lambdas = vec![*LAMBDAS
                    .iter()
                    .find(|l| l.name() == v)
                    .ok_or_else(|| format!("check {label:?}: unknown lambda {v:?} (0, 1, bump)"))?]
            }
            _ => return Err(format!("check {label:?}: unknown key {k:?}")),
        }
    }
    let rules = gammas.iter().flat_map(|&g| lambdas.iter().map(move |&l| (g, l))).collect();
    Ok(Check::Dpp {
        label: label.to_string(),
        rules,
    })
}

/// Resolves `full` and parameterized `dpp:…` names.
pub fn expand(names: &[String]) -> Result<Vec<Check>, String> {
    if names.is_empty() {
        return Err("the check list is empty".to_string());
    }
    let mut out = Vec::new();
    for name in names {
        let name = name.trim();
        if name == "full" {
            out.extend(FULL_SUITE.iter().map(|n| Check::Named(n)));
        } else if let Some(args) = name.strip_prefix("dpp:") {
            out.push(parse_dpp(name, args)?);
        } else if let Some(k) = known(name) {
            out.push(Check::Named(k));
        } else {
            return Err(format!(
                "unknown check {name:?} (known: full, {}, {}, dpp:gamma=..,lambda=..)",
                FULL_SUITE.join(", "),
                EXTRA.join(", ")
            ));
        }
    }
    Ok(out)
}

/// Splits a `--checks` argument on commas, keeping `key=value` pieces with
/// the check they follow (`dpp:gamma=tau,lambda=1,value`).
pub fn split_list(arg: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for piece in arg.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match out.last_mut() {
            Some(prev) if piece.contains('=') && !piece.contains(':') && prev.contains(':') => {
                prev.push(',');
                prev.push_str(piece);
            }
            _ => out.push(piece.to_string()),
        }
    }
    out
}
