//! The `solve`, `verify` and `simulate` pipelines.

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use sdgame_core::domain::{verify_barrier, Barrier};
use sdgame_core::fd::{solve, Lattice, ValueField};
use sdgame_core::game::{plane_rotation, potential_game};
use sdgame_core::sde::write_paths_csv;
use sdgame_core::stats::mean_stderr;
use sdgame_core::strategy::strategy_pair_saddle;
use sdgame_core::verify::{
    deviation_check, dpp_residuals, exhaustion_check, insensitivity_check, localization_check, moment_check,
    occupation_check, p_invariance_check, run_paths, submartingale_check, supermartingale_check, value_check, CheckItem,
    CheckReport, Relation, Scenario,
};
use sdgame_core::{
    AlphaPlay, AlphaResponse, Domain, Error, GameSpec, LambdaRule, ParamPoint, ParamProcessRule, SolveReport, StopRule, Strategy,
    SubdomainFamily,
};
use serde::Serialize;

use crate::config::{Play, RunConfig};
use crate::registry::{self, Check, Gamma, Lambda};

/// A pipeline failure, mapped to an exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit 2.
    Config(String),
    /// Exit 1.
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(m) => Failure::Config(m),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Run(format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn create_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Lazily built shared state of one run.
struct Ctx<'a> {
    cfg: &'a RunConfig,
    spec: GameSpec,
    dom: Domain,
    x0: Vec<f64>,
    value: Option<Arc<ValueField>>,
    strategy_field: Option<Arc<ValueField>>,
    pair: Option<(AlphaResponse, Strategy)>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, Failure> {
        let (spec, dom) = cfg.game().map_err(|e| Failure::Config(e.0))?;
        let x0 = cfg.x0(&dom);
        Ok(Ctx {
            cfg,
            spec,
            dom,
            x0,
            value: None,
            strategy_field: None,
            pair: None,
        })
    }

    fn solve_at(&self, h: f64) -> Result<Arc<ValueField>, Failure> {
        let lat = Arc::new(Lattice::new(self.dom.clone(), h)?);
        let (u, _) = solve(&self.spec, lat, &self.cfg.solver)?;
        Ok(Arc::new(u))
    }

    fn value(&mut self) -> Result<Arc<ValueField>, Failure> {
        if self.value.is_none() {
            self.value = Some(self.solve_at(self.cfg.h)?);
        }
        Ok(self.value.clone().expect("set"))
    }

    fn strategy_field(&mut self) -> Result<Arc<ValueField>, Failure> {
        if self.strategy_field.is_none() {
            let f = match self.cfg.strategy_h {
                Some(h) if h != self.cfg.h => self.solve_at(h)?,
                _ => self.value()?,
            };
            self.strategy_field = Some(f);
        }
        Ok(self.strategy_field.clone().expect("set"))
    }

    fn pair(&mut self) -> Result<(AlphaResponse, Strategy), Failure> {
        if self.pair.is_none() {
            let u = self.strategy_field()?;
            let p = strategy_pair_saddle(&self.spec, &self.dom, u, self.cfg.eps(), self.cfg.mesh()).map_err(|e| match e {
                Error::ResidualTooLarge { .. } => Failure::Run(format!("{e}; refine strategy_h or relax eps")),
                other => other.into(),
            })?;
            self.pair = Some(p);
        }
        Ok(self.pair.clone().expect("set"))
    }

    fn saddle(&mut self) -> Result<Scenario, Failure> {
        let (a, b) = self.pair()?;
        Ok(Scenario::new(&self.spec, &self.dom, &self.x0, AlphaPlay::Response(a), b))
    }

    fn lambda(&self, l: Lambda) -> LambdaRule {
        match l {
            Lambda::Zero => LambdaRule::Zero,
            Lambda::One => LambdaRule::Constant(1.0),
            Lambda::Bump => {
                let (lo, hi) = self.dom.bounding_box();
                LambdaRule::feedback(move |_, x| {
                    let mut v = 4.0;
                    for i in 0..x.len() {
                        let w = hi[i] - lo[i];
                        v *= ((x[i] - lo[i]) * (hi[i] - x[i]) / (w * w)).max(0.0);
                    }
                    v
                })
            }
        }
    }

    fn stop(&self, g: Gamma) -> Result<StopRule, Failure> {
        Ok(match g {
            Gamma::Zero => StopRule::Zero,
            Gamma::Tau => StopRule::Tau,
            Gamma::Exit => StopRule::ExitSubdomain {
                domain: self.dom.shrink(0.25 * self.dom.diameter())?,
            },
            Gamma::Fixed => StopRule::FixedTime { t: self.cfg.dpp_time },
        })
    }

    fn scaled(&mut self, k: f64) -> Result<ValueField, Failure> {
        let v = self.value()?;
        let g = v.boundary().clone();
        Ok(ValueField::from_fn(v.lattice().clone(), |x| k * v.value_at(x), Arc::new(move |x| k * g(x))))
    }

    fn run_check(&mut self, check: &Check) -> Result<CheckReport, Failure> {
        let cfg = self.cfg;
        let mc = cfg.mc();
        let report = match check {
            Check::Dpp { label, rules } => self.dpp(label, rules)?,
            Check::Named("dpp") => {
                let all: Vec<(Gamma, Lambda)> = registry::GAMMAS
                    .iter()
                    .flat_map(|&g| registry::LAMBDAS.iter().map(move |&l| (g, l)))
                    .collect();
                self.dpp("dpp", &all)?
            }
            Check::Named("value") => {
                let v0 = self.value()?.value_at(&self.x0);
                value_check(&self.saddle()?, &mc, v0, None)?
            }
            Check::Named("deviation") => {
                let u = self.strategy_field()?;
                let v0 = self.value()?.value_at(&self.x0);
                deviation_check(&self.spec, &self.dom, &self.x0, u, v0, cfg.eps(), cfg.mesh(), &mc, &ParamProcessRule::ConstantBase)?
            }
            Check::Named("supermartingale") => {
                let u = self.strategy_field()?;
                let beta = Strategy::eps_optimal_beta(&self.spec, &self.dom, u, cfg.eps(), cfg.mesh())?;
                let alpha = AlphaPlay::constant(self.spec.controls.n_alpha() - 1);
                let sc = Scenario::new(&self.spec, &self.dom, &self.x0, alpha, beta);
                let v = self.value()?;
                let main = supermartingale_check(&sc, &mc, &v, cfg.eps(), &cfg.checkpoints)?;
                let adv = supermartingale_check(&sc, &mc, &self.scaled(-1.0)?, cfg.eps(), &cfg.checkpoints)?;
                with_guard(main, &adv, "sign-flipped field rejected")
            }
            Check::Named("submartingale") => {
                let u = self.strategy_field()?;
                let alpha = AlphaResponse::new(&self.spec, &self.dom, u, cfg.eps(), cfg.mesh())?;
                let sc = Scenario::new(&self.spec, &self.dom, &self.x0, AlphaPlay::Response(alpha), Strategy::Constant(0));
                let v = self.value()?;
                let main = submartingale_check(&sc, &mc, &v, cfg.eps(), &cfg.checkpoints)?;
                let adv = submartingale_check(&sc, &mc, &self.scaled(3.0)?, cfg.eps(), &cfg.checkpoints)?;
                with_guard(main, &adv, "reflected field rejected")
            }
            Check::Named("moments") => moment_check(&self.saddle()?, &mc, cfg.max_power, cfg.calib_paths, 5)?,
            Check::Named("occupation") => {
                let band = self.dom.shrink(0.4 * self.dom.diameter())?;
                let h = move |x: &[f64]| if band.contains(x) { 1.0 } else { 0.0 };
                occupation_check(&self.saddle()?, &mc, &h, cfg.max_power.min(2), cfg.calib_paths, 5)?
            }
            Check::Named("localization") => {
                let fam = SubdomainFamily::dyadic(self.dom.clone(), cfg.exhaustion.levels.iter().copied())?;
                let pspec = potential_game(&self.spec)?;
                let lat = Arc::new(Lattice::new(self.dom.clone(), cfg.h)?);
                let (phi, _) = solve(&pspec, lat, &cfg.solver)?;
                localization_check(&self.saddle()?, &mc, &fam, &|x| phi.value_at(x))?
            }
            Check::Named("exhaustion") => {
                let fam = SubdomainFamily::dyadic(self.dom.clone(), cfg.exhaustion.levels.iter().copied())?;
                exhaustion_check(&self.spec, &self.dom, &fam, cfg.h, &cfg.solver, cfg.exhaustion.tol)?
            }
            Check::Named("p_invariance") => {
                let mut rules = vec![ParamProcessRule::ConstantBase];
                if self.spec.noise_dim >= 2 {
                    let q = plane_rotation(self.spec.noise_dim, std::f64::consts::FRAC_PI_2);
                    rules.push(ParamProcessRule::TimeChangeRotation(ParamPoint::rotated(1.0, q)));
                }
                if 2.0 <= 1.0 / self.spec.delta1 {
                    rules.push(ParamProcessRule::TimeChangeRotation(ParamPoint::scaled(2.0)));
                }
                let allowance = cfg.p_allowance.unwrap_or(2.0 * cfg.dt);
                p_invariance_check(&self.saddle()?, &mc, &rules, allowance)?
            }
            Check::Named("barrier") => {
                // LG is linear in the scale of G, so one probe fixes the
                // scale whenever the quadratic shape works at all.
                let samples = self.dom.interior_samples(33);
                let probe = verify_barrier(&self.spec, &Barrier::quadratic(&self.dom, 1.0), &self.dom, &samples)?;
                let scale = if probe.max_lg < 0.0 { (1.01 / -probe.max_lg).max(1.0) } else { 1.0 };
                let bar = Barrier::quadratic(&self.dom, scale);
                let r = verify_barrier(&self.spec, &bar, &self.dom, &samples)?;
                CheckReport::new(
                    "barrier",
                    vec![
                        CheckItem::new("max LG", r.max_lg, 0.0, Relation::Le, -1.0, 1e-9),
                        CheckItem::new("min G", r.min_value, 0.0, Relation::Ge, 0.0, 0.0),
                        CheckItem::new("max |G| on boundary", r.boundary_max, 0.0, Relation::Le, 0.0, 1e-9),
                    ],
                )
                .note(format!("quadratic barrier, scale {scale:.6e}"))
            }
            Check::Named("insensitivity") => {
                let v = self.value()?;
                let samples = self.dom.interior_samples(9);
                let du = |x: &[f64]| v.field_derivatives(x).expect("interior sample");
                insensitivity_check(&self.spec, &du, &samples)
            }
            Check::Named(other) => return Err(Failure::Config(format!("unknown check {other:?}"))),
        };
        Ok(report)
    }

    fn dpp(&mut self, label: &str, rules: &[(Gamma, Lambda)]) -> Result<CheckReport, Failure> {
        let v = self.value()?;
        let mc = self.cfg.mc();
        let concrete: Vec<(StopRule, LambdaRule)> = rules
            .iter()
            .map(|&(g, l)| Ok((self.stop(g)?, self.lambda(l))))
            .collect::<Result<_, Failure>>()?;
        // γ = 0 needs no paths at all; skip the simulation if that is all.
        let ests = if rules.iter().all(|(g, _)| *g == Gamma::Zero) {
            None
        } else {
            Some(dpp_residuals(&self.saddle()?, &mc, &v, &concrete)?)
        };
        let mut items = Vec::new();
        let mut cap: f64 = 0.0;
        for (k, &(g, l)) in rules.iter().enumerate() {
            let name = format!("gamma={},lambda={}", g.name(), l.name());
            let (m, se) = match &ests {
                Some(e) => {
                    cap = cap.max(e[k].cap_fraction);
                    (e[k].mean, e[k].stderr)
                }
                None => (0.0, 0.0),
            };
            items.push(CheckItem::eq(name, m, se, 0.0, 0.0));
        }
        let n = if ests.is_some() { mc.n_paths } else { 0 };
        Ok(CheckReport::new(label, items).with_run(&mc, n, cap, true))
    }
}

fn with_guard(mut main: CheckReport, adversarial: &CheckReport, label: &str) -> CheckReport {
    let rejected = !adversarial.pass;
    main.items.push(CheckItem::new(label, if rejected { 0.0 } else { 1.0 }, 0.0, Relation::Le, 0.0, 0.0));
    main.pass &= rejected;
    main
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    game: &'a str,
    domain: &'a Domain,
    x0: &'a [f64],
    value_at_x0: f64,
    report: &'a SolveReport,
}

/// Writes `value_field.csv` and `solve_report.json`; true iff converged.
pub fn cmd_solve(cfg: &RunConfig) -> Result<bool, Failure> {
    let ctx = Ctx::new(cfg)?;
    create_out(&cfg.out)?;
    let lat = Arc::new(Lattice::new(ctx.dom.clone(), cfg.h)?);
    let (field, report) = match solve(&ctx.spec, lat.clone(), &cfg.solver) {
        Ok(r) => r,
        Err(Error::NoConvergence { iterations, residual, best }) => {
            let report = SolveReport {
                converged: false,
                outer_iterations: iterations,
                inner_iterations: 0,
                residual,
                residual_history: Vec::new(),
                lower_gap: f64::NAN,
                unknowns: lat.n_unknowns(),
                h: lat.h().to_vec(),
                tol: cfg.solver.tol,
            };
            (*best, report)
        }
        Err(e) => return Err(e.into()),
    };
    let csv = cfg.out.join("value_field.csv");
    let file = fs::File::create(&csv).map_err(|e| io_err(&csv, e))?;
    field.write_csv(BufWriter::new(file)).map_err(|e| io_err(&csv, e))?;
    let out = SolveOutput {
        game: &ctx.spec.name,
        domain: &ctx.dom,
        x0: &ctx.x0,
        value_at_x0: field.value_at(&ctx.x0),
        report: &report,
    };
    write_json(&cfg.out.join("solve_report.json"), &out)?;
    Ok(report.converged && report.residual <= cfg.solver.tol)
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    game: &'a str,
    seed: u64,
    pass: bool,
    reports: &'a [CheckReport],
}

/// Runs the selected checks and writes `verify_report.json`; true iff all
/// pass.
pub fn cmd_verify(cfg: &RunConfig) -> Result<(bool, Vec<CheckReport>), Failure> {
    let checks = registry::expand(&cfg.checks).map_err(Failure::Config)?;
    let mut ctx = Ctx::new(cfg)?;
    create_out(&cfg.out)?;
    let mut reports = Vec::new();
    for c in &checks {
        reports.push(ctx.run_check(c)?);
    }
    let pass = reports.iter().all(|r| r.pass);
    let out = VerifyOutput {
        game: &ctx.spec.name,
        seed: cfg.seed,
        pass,
        reports: &reports,
    };
    write_json(&cfg.out.join("verify_report.json"), &out)?;
    Ok((pass, reports))
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    game: &'a str,
    seed: u64,
    n_paths: usize,
    dt: f64,
    t_cap: f64,
    exited: usize,
    capped: usize,
    mean_tau: f64,
    stderr_tau: f64,
    mean_payoff: f64,
    stderr_payoff: f64,
}

/// Writes `paths.csv` and `simulate_summary.json`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), Failure> {
    let mut ctx = Ctx::new(cfg)?;
    create_out(&cfg.out)?;
    let sim = &cfg.simulate;
    let (na, nb) = (ctx.spec.controls.n_alpha(), ctx.spec.controls.n_beta());
    let alpha = match sim.alpha {
        Play::Saddle => AlphaPlay::Response(ctx.pair()?.0),
        Play::Constant(i) if i < na => AlphaPlay::constant(i),
        Play::Constant(i) => return Err(Failure::Config(format!("alpha index {i} out of range (0..{na})"))),
    };
    let beta = match sim.beta {
        Play::Saddle => ctx.pair()?.1,
        Play::Constant(j) if j < nb => Strategy::Constant(j),
        Play::Constant(j) => return Err(Failure::Config(format!("beta index {j} out of range (0..{nb})"))),
    };
    let sc = Scenario::new(&ctx.spec, &ctx.dom, &ctx.x0, alpha, beta).with_rule(sim.rule.to_rule());
    let mut mc = cfg.mc();
    mc.n_paths = sim.n_paths.max(2);
    let spec = ctx.spec.clone();
    let paths = run_paths(&sc, &mc, |p| (p.clone(), sdgame_core::sde::payoff(&spec, p)))?;
    let paths = &paths[..sim.n_paths];
    let csv = cfg.out.join("paths.csv");
    let file = fs::File::create(&csv).map_err(|e| io_err(&csv, e))?;
    write_paths_csv(paths.iter().enumerate().map(|(k, (p, _))| (k as u64, p)), BufWriter::new(file)).map_err(|e| io_err(&csv, e))?;
    let taus: Vec<f64> = paths.iter().map(|(p, _)| p.tau).collect();
    let pays: Vec<f64> = paths.iter().map(|(_, v)| *v).collect();
    let (mean_tau, stderr_tau) = mean_stderr(&taus);
    let (mean_payoff, stderr_payoff) = mean_stderr(&pays);
    let summary = SimulateSummary {
        game: &ctx.spec.name,
        seed: cfg.seed,
        n_paths: paths.len(),
        dt: cfg.dt,
        t_cap: mc.sim_config(&ctx.spec, &ctx.dom).t_cap,
        exited: paths.iter().filter(|(p, _)| p.exited).count(),
        capped: paths.iter().filter(|(p, _)| p.capped).count(),
        mean_tau,
        stderr_tau,
        mean_payoff,
        stderr_payoff,
    };
    write_json(&cfg.out.join("simulate_summary.json"), &summary)?;
    Ok(())
}
