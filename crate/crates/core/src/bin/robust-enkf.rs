use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};

use robust_enkf::bundle;
use robust_enkf::controller::ControlLaw;
use robust_enkf::dual_enkf::GainApprox;
use robust_enkf::dual_enkf::GainMode;
use robust_enkf::harness::{
    self, batch_cells, emit_results, parse_pde, DisturbanceKind, ExperimentConfig, ModelPath, Policy, Trained,
};
use robust_enkf::pde_sim::{PdeKind, Simulator};
use robust_enkf::riccati::{are_residual, lqr_gain, solve_are, LtiSystem};
use robust_enkf::{Error, Result};

#[derive(Parser)]
#[command(
    name = "robust-enkf",
    version,
    about = "Robust PDE stabilization with the dual ensemble Kalman filter"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run the dual EnKF and save the learned gain.
    Train(Common),
    /// Fit a DMDc reduced model from simulator snapshots and save it.
    FitDmdc(Common),
    /// Simulate one robust-controlled trajectory.
    Simulate(Common),
    /// Trial batch under the uncontrolled, optimal and robust policies.
    Batch(Common),
    /// Heat map of mean terminal ratios over disturbance amplitude and lambda.
    Grid(Common),
    /// Exact Riccati solution of the linearized (or reduced) system.
    Oracle(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_pde)]
    pde: Option<PdeKind>,
    #[arg(long)]
    model: Option<ModelPath>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    d0: Option<f64>,
    #[arg(long)]
    disturbance: Option<DisturbanceKind>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write per-trial terminal ratios to trials.csv.
    #[arg(long)]
    dump_trials: bool,
    /// Reuse a saved gain instead of training.
    #[arg(long)]
    gain: Option<PathBuf>,
    /// Reuse a saved reduced model on the dmdc path.
    #[arg(long)]
    reduced_model: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let cfg = ExperimentConfig::load(path, self.pde)?;
                if let Some(pde) = self.pde {
                    if pde != cfg.pde {
                        return Err(Error::Config(format!(
                            "--pde {pde} conflicts with {} in {}",
                            cfg.pde,
                            path.display()
                        )));
                    }
                }
                cfg
            }
            None => ExperimentConfig::defaults(self.pde.unwrap_or(PdeKind::Heat)),
        };
        if let Some(v) = self.model {
            cfg.model = v;
        }
        if let Some(v) = self.nu {
            cfg.nu = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.d0 {
            cfg.disturbance.d0 = v;
        }
        if let Some(v) = self.disturbance {
            cfg.disturbance.kind = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn reduced(&self) -> Result<Option<robust_enkf::reduced_model::ReducedModel>> {
        self.reduced_model
            .as_deref()
            .map(bundle::load_reduced_model)
            .transpose()
    }

    fn trained(&self, cfg: &ExperimentConfig) -> Result<Trained> {
        let Some(path) = &self.gain else {
            return harness::train(cfg, self.reduced()?);
        };
        let gain = bundle::load_gain(path)?;
        let sim = cfg.simulator()?;
        let reduced = match cfg.model {
            ModelPath::Full => None,
            ModelPath::Dmdc => Some(match self.reduced()? {
                Some(m) => m,
                None => harness::fit_reduced_model(cfg, &sim)?,
            }),
        };
        let n = reduced.as_ref().map_or(cfg.p, |m| m.n());
        let mut law = ControlLaw::new(
            gain,
            cfg.control_weights(n)?,
            cfg.robust_config(cfg.lambda)?,
            cfg.b_access,
        )?;
        if let Some(m) = &reduced {
            law = law.with_reduction(m.clone())?;
        }
        Ok(Trained { sim, law, reduced })
    }
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(verb: Verb) -> Result<()> {
    match verb {
        Verb::Train(c) => {
            let cfg = c.resolve()?;
            let trained = harness::train(&cfg, c.reduced()?)?;
            create_out(&c.out)?;
            bundle::save_gain(&c.out.join("gain.txt"), &trained.law.gain)?;
            if let Some(m) = &trained.reduced {
                bundle::save_reduced_model(&c.out.join("model.txt"), m)?;
            }
            harness::write_config_echo(&c.out.join("config.echo"), &cfg)?;
            println!("gain written to {}", c.out.join("gain.txt").display());
        }
        Verb::FitDmdc(c) => {
            let cfg = c.resolve()?;
            let model = harness::fit_reduced_model(&cfg, &cfg.simulator()?)?;
            create_out(&c.out)?;
            bundle::save_reduced_model(&c.out.join("model.txt"), &model)?;
            harness::write_config_echo(&c.out.join("config.echo"), &cfg)?;
            println!(
                "reduced model (n={}) written to {}",
                model.n(),
                c.out.join("model.txt").display()
            );
        }
        Verb::Simulate(c) => {
            let mut cfg = c.resolve()?;
            cfg.trials = 1;
            let trained = c.trained(&cfg)?;
            let batch = harness::run_trial_batch(&cfg, &trained, &[Policy::Robust])?;
            emit_results(&c.out, &cfg, Some(&batch), &batch_cells(&batch), c.dump_trials)?;
            report(&batch);
        }
        Verb::Batch(c) => {
            let cfg = c.resolve()?;
            let trained = c.trained(&cfg)?;
            let batch = harness::run_trial_batch(&cfg, &trained, &Policy::ALL)?;
            emit_results(&c.out, &cfg, Some(&batch), &batch_cells(&batch), c.dump_trials)?;
            report(&batch);
        }
        Verb::Grid(c) => {
            let cfg = c.resolve()?;
            let trained = c.trained(&cfg)?;
            let g = &cfg.grid;
            let cells = harness::run_grid(&cfg, &trained, &g.d0, &g.lambda, &g.kinds)?;
            emit_results(&c.out, &cfg, None, &cells, c.dump_trials)?;
            for cell in &cells {
                println!(
                    "{} d0={} lambda={} mean_terminal_ratio={:.6e} failures={}",
                    cell.kind,
                    cell.d0,
                    cell.lambda,
                    cell.mean_terminal_ratio(),
                    cell.failures
                );
            }
        }
        Verb::Oracle(c) => {
            let cfg = c.resolve()?;
            let sim = cfg.simulator()?;
            let (a, b) = match cfg.model {
                ModelPath::Full => (linearize(&sim), sim.basis.matrix().clone()),
                ModelPath::Dmdc => {
                    let m = match c.reduced()? {
                        Some(m) => m,
                        None => harness::fit_reduced_model(&cfg, &sim)?,
                    };
                    (m.a, m.b)
                }
            };
            let n = a.nrows();
            let w = cfg.control_weights(n)?;
            let sys = LtiSystem::new(a, b, w.c, w.r, w.g)?;
            let p = solve_are(&sys)?;
            lqr_gain(&sys, &p)?;
            let residual = are_residual(&sys, &p).norm();
            create_out(&c.out)?;
            let gain = GainApprox::from_value_matrix(p.clone(), GainMode::Linear)?;
            bundle::save_gain(&c.out.join("oracle.txt"), &gain)?;
            println!("n={n} are_residual={residual:.3e}");
            if let Some(path) = &c.gain {
                let learned = bundle::load_gain(path)?;
                let rel = (&learned.p - &p).norm() / p.norm();
                println!("relative Frobenius distance to {}: {rel:.6e}", path.display());
            }
        }
    }
    Ok(())
}

/// Exact Jacobian at the origin by central differences (quadratic terms cancel).
fn linearize(sim: &impl Simulator) -> DMatrix<f64> {
    let n = sim.state_dim();
    let zero_u = DVector::zeros(sim.control_dim());
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1e-3;
        let col = (sim.eval(&e, &zero_u) - sim.eval(&(-&e), &zero_u)) / 2e-3;
        a.set_column(j, &col);
    }
    a
}

fn report(batch: &harness::BatchResult) {
    for p in &batch.policies {
        println!(
            "{} lambda={} mean_terminal_ratio={:.6e} failures={}",
            p.policy.name(),
            p.lambda,
            p.mean_terminal_ratio(),
            p.failures
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
