//! Experiment configuration: built-in defaults per PDE, a strict TOML
//! overlay and an exact echo that reloads to the same configuration.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::bundle::fmt_f64;
use crate::controller::BAccess;
use crate::dual_enkf::Innovation;
use crate::error::{Error, Result};
use crate::pde_sim::{Boundary, PdeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturbanceKind {
    Sin,
    Const,
    None,
}

impl DisturbanceKind {
    pub fn name(self) -> &'static str {
        match self {
            DisturbanceKind::Sin => "sin",
            DisturbanceKind::Const => "const",
            DisturbanceKind::None => "none",
        }
    }
}

impl fmt::Display for DisturbanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DisturbanceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sin" => Ok(Self::Sin),
            "const" => Ok(Self::Const),
            "none" => Ok(Self::None),
            _ => Err(format!("unknown disturbance `{s}` (expected sin, const or none)")),
        }
    }
}

/// `d(t) = d₀·sin(t)·w`, `d₀·w` or `0`, with `w = 1` unless overridden.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    pub d0: f64,
    pub channels: Option<Vec<f64>>,
}

/// Where the controller gets its model from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelPath {
    Full,
    Dmdc,
}

impl ModelPath {
    pub fn name(self) -> &'static str {
        match self {
            ModelPath::Full => "full",
            ModelPath::Dmdc => "dmdc",
        }
    }
}

impl fmt::Display for ModelPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelPath {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Self::Full),
            "dmdc" => Ok(Self::Dmdc),
            _ => Err(format!("unknown model path `{s}` (expected full or dmdc)")),
        }
    }
}

pub fn parse_pde(s: &str) -> std::result::Result<PdeKind, String> {
    match s {
        "heat" => Ok(PdeKind::Heat),
        "burgers" => Ok(PdeKind::Burgers),
        _ => Err(format!("unknown pde `{s}` (expected heat or burgers)")),
    }
}

/// Cost weights as multiples of the identity: `Q = q·I`, `R = r·I`, `G = g·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightScales {
    pub q: f64,
    pub r: f64,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnkfSettings {
    pub particles: usize,
    pub horizon: f64,
    pub dt: f64,
    pub innovation: Innovation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmdcSettings {
    pub n: usize,
    pub trajectories: usize,
    pub steps: usize,
    pub amplitude: f64,
    pub hold: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridLists {
    pub d0: Vec<f64>,
    pub lambda: Vec<f64>,
    pub kinds: Vec<DisturbanceKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pde: PdeKind,
    pub model: ModelPath,
    pub nu: f64,
    pub p: usize,
    pub length: f64,
    pub boundary: Boundary,
    pub m: usize,
    pub t_sim: f64,
    pub dt_sim: f64,
    pub trials: usize,
    pub seed: u64,
    pub weights: WeightScales,
    pub lambda: f64,
    pub r: f64,
    pub b_access: BAccess,
    pub enkf: EnkfSettings,
    pub disturbance: DisturbanceSpec,
    pub dmdc: DmdcSettings,
    pub grid: GridLists,
}

impl ExperimentConfig {
    pub fn defaults(pde: PdeKind) -> Self {
        let grid = GridLists {
            d0: vec![0.0, 0.05, 0.1, 0.2],
            lambda: vec![0.0, 0.1, 0.2, 0.4],
            kinds: vec![DisturbanceKind::Sin, DisturbanceKind::Const],
        };
        let disturbance = DisturbanceSpec {
            kind: DisturbanceKind::Sin,
            d0: 0.1,
            channels: None,
        };
        let dmdc = DmdcSettings {
            n: 10,
            trajectories: 10,
            steps: 3000,
            amplitude: 0.5,
            hold: 1,
        };
        match pde {
            PdeKind::Heat => Self {
                pde,
                model: ModelPath::Full,
                nu: 0.002,
                p: 100,
                length: 1.0,
                boundary: Boundary::Periodic,
                m: 8,
                t_sim: 0.1,
                dt_sim: 1e-3,
                trials: 100,
                seed: 0,
                weights: WeightScales { q: 1.0, r: 1.0, g: 1.0 },
                lambda: 0.2,
                r: 0.002,
                b_access: BAccess::Known,
                enkf: EnkfSettings {
                    particles: 10_000,
                    horizon: 0.1,
                    dt: 1e-3,
                    innovation: Innovation::Averaged,
                },
                disturbance,
                dmdc: DmdcSettings {
                    steps: 100,
                    trajectories: 100,
                    ..dmdc
                },
                grid,
            },
            PdeKind::Burgers => Self {
                pde,
                model: ModelPath::Full,
                nu: 0.02,
                p: 128,
                length: 1.0,
                boundary: Boundary::Periodic,
                m: 10,
                t_sim: 3.0,
                dt_sim: 1e-3,
                trials: 100,
                seed: 0,
                weights: WeightScales { q: 1.0, r: 0.1, g: 1.0 },
                lambda: 0.2,
                r: 0.002,
                b_access: BAccess::Known,
                enkf: EnkfSettings {
                    particles: 1000,
                    horizon: 3.0,
                    dt: 5e-4,
                    innovation: Innovation::Averaged,
                },
                disturbance,
                dmdc,
                grid,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.nu > 0.0) {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        if self.p < 3 || self.m == 0 || self.m > self.p {
            return bad(format!("need p >= 3 and 1 <= m <= p, got p={} m={}", self.p, self.m));
        }
        if !(self.length > 0.0) {
            return bad(format!("length must be positive, got {}", self.length));
        }
        if !(self.t_sim > 0.0) || !(self.dt_sim > 0.0) {
            return bad("t_sim and dt_sim must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let w = self.weights;
        if !(w.q >= 0.0) || !(w.r > 0.0) || !(w.g > 0.0) {
            return bad("weights need q >= 0, r > 0, g > 0".into());
        }
        if !(self.lambda >= 0.0) || !(self.r > 0.0) {
            return bad("robust term needs lambda >= 0 and r > 0".into());
        }
        if self.enkf.particles < 2 || !(self.enkf.horizon > 0.0) || !(self.enkf.dt > 0.0) {
            return bad("enkf needs particles >= 2 and positive horizon and dt".into());
        }
        if !(self.disturbance.d0 >= 0.0) {
            return bad(format!("d0 must be nonnegative, got {}", self.disturbance.d0));
        }
        if let Some(ch) = &self.disturbance.channels {
            if ch.len() != self.m {
                return bad(format!(
                    "disturbance channels has {} entries, expected m={}",
                    ch.len(),
                    self.m
                ));
            }
        }
        if self.model == ModelPath::Dmdc && (self.dmdc.n == 0 || self.dmdc.n > self.p) {
            return bad(format!("dmdc n must lie in 1..={}", self.p));
        }
        if self.grid.d0.is_empty() || self.grid.lambda.is_empty() || self.grid.kinds.is_empty() {
            return bad("grid lists must be nonempty".into());
        }
        if self.grid.d0.iter().chain(&self.grid.lambda).any(|v| !(*v >= 0.0)) {
            return bad("grid d0 and lambda values must be nonnegative".into());
        }
        Ok(())
    }

    /// Number of simulation steps covering `[0, t_sim]`.
    pub fn sim_steps(&self) -> usize {
        ((self.t_sim / self.dt_sim) - 1e-9).ceil() as usize
    }

    /// Reads a configuration file on top of the defaults for its PDE
    /// (`pde_hint` when the file does not name one).
    pub fn load(path: &Path, pde_hint: Option<PdeKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, pde_hint).map_err(|e| match e {
            Error::Config(msg) => Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg,
            },
            other => other,
        })
    }

    pub fn parse(text: &str, pde_hint: Option<PdeKind>) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let pde = match file.experiment.as_ref().and_then(|e| e.pde.as_deref()) {
            Some(name) => parse_pde(name).map_err(Error::Config)?,
            None => pde_hint.unwrap_or(PdeKind::Heat),
        };
        let mut cfg = Self::defaults(pde);
        file.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolved configuration in the file format, floats at 17 significant digits.
    pub fn echo(&self) -> String {
        let f = |v: f64| fmt_f64(v);
        let list = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let boundary = match self.boundary {
            Boundary::Periodic => "periodic",
            Boundary::Dirichlet => "dirichlet",
        };
        let access = match self.b_access {
            BAccess::Known => "known",
            BAccess::SimulatorOnly => "simulator-only",
        };
        let innovation = match self.enkf.innovation {
            Innovation::Averaged => "averaged",
            Innovation::Literal => "literal",
        };
        writeln!(s, "[experiment]").unwrap();
        writeln!(s, "pde = \"{}\"", self.pde).unwrap();
        writeln!(s, "model = \"{}\"", self.model).unwrap();
        writeln!(s, "nu = {}", f(self.nu)).unwrap();
        writeln!(s, "p = {}", self.p).unwrap();
        writeln!(s, "length = {}", f(self.length)).unwrap();
        writeln!(s, "boundary = \"{boundary}\"").unwrap();
        writeln!(s, "m = {}", self.m).unwrap();
        writeln!(s, "t_sim = {}", f(self.t_sim)).unwrap();
        writeln!(s, "dt_sim = {}", f(self.dt_sim)).unwrap();
        writeln!(s, "trials = {}", self.trials).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "\n[weights]").unwrap();
        writeln!(s, "q = {}", f(self.weights.q)).unwrap();
        writeln!(s, "r = {}", f(self.weights.r)).unwrap();
        writeln!(s, "g = {}", f(self.weights.g)).unwrap();
        writeln!(s, "\n[robust]").unwrap();
        writeln!(s, "lambda = {}", f(self.lambda)).unwrap();
        writeln!(s, "r = {}", f(self.r)).unwrap();
        writeln!(s, "b_access = \"{access}\"").unwrap();
        writeln!(s, "\n[enkf]").unwrap();
        writeln!(s, "particles = {}", self.enkf.particles).unwrap();
        writeln!(s, "horizon = {}", f(self.enkf.horizon)).unwrap();
        writeln!(s, "dt = {}", f(self.enkf.dt)).unwrap();
        writeln!(s, "innovation = \"{innovation}\"").unwrap();
        writeln!(s, "\n[disturbance]").unwrap();
        writeln!(s, "kind = \"{}\"", self.disturbance.kind).unwrap();
        writeln!(s, "d0 = {}", f(self.disturbance.d0)).unwrap();
        if let Some(ch) = &self.disturbance.channels {
            writeln!(s, "channels = [{}]", list(ch)).unwrap();
        }
        writeln!(s, "\n[dmdc]").unwrap();
        writeln!(s, "n = {}", self.dmdc.n).unwrap();
        writeln!(s, "trajectories = {}", self.dmdc.trajectories).unwrap();
        writeln!(s, "steps = {}", self.dmdc.steps).unwrap();
        writeln!(s, "amplitude = {}", f(self.dmdc.amplitude)).unwrap();
        writeln!(s, "hold = {}", self.dmdc.hold).unwrap();
        writeln!(s, "\n[grid]").unwrap();
        writeln!(s, "d0 = [{}]", list(&self.grid.d0)).unwrap();
        writeln!(s, "lambda = [{}]", list(&self.grid.lambda)).unwrap();
        let kinds: Vec<String> = self.grid.kinds.iter().map(|k| format!("\"{k}\"")).collect();
        writeln!(s, "kinds = [{}]", kinds.join(", ")).unwrap();
        s
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<ExperimentSection>,
    weights: Option<WeightsSection>,
    robust: Option<RobustSection>,
    enkf: Option<EnkfSection>,
    disturbance: Option<DisturbanceSection>,
    dmdc: Option<DmdcSection>,
    grid: Option<GridSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    pde: Option<String>,
    model: Option<ModelPath>,
    nu: Option<f64>,
    p: Option<usize>,
    length: Option<f64>,
    boundary: Option<Boundary>,
    m: Option<usize>,
    t_sim: Option<f64>,
    dt_sim: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsSection {
    q: Option<f64>,
    r: Option<f64>,
    g: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobustSection {
    lambda: Option<f64>,
    r: Option<f64>,
    b_access: Option<BAccess>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnkfSection {
    particles: Option<usize>,
    horizon: Option<f64>,
    dt: Option<f64>,
    innovation: Option<Innovation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisturbanceSection {
    kind: Option<DisturbanceKind>,
    d0: Option<f64>,
    channels: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DmdcSection {
    n: Option<usize>,
    trajectories: Option<usize>,
    steps: Option<usize>,
    amplitude: Option<f64>,
    hold: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    d0: Option<Vec<f64>>,
    lambda: Option<Vec<f64>>,
    kinds: Option<Vec<DisturbanceKind>>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl FileConfig {
    fn apply(self, cfg: &mut ExperimentConfig) {
        if let Some(e) = self.experiment {
            set(&mut cfg.model, e.model);
            set(&mut cfg.nu, e.nu);
            set(&mut cfg.p, e.p);
            set(&mut cfg.length, e.length);
            set(&mut cfg.boundary, e.boundary);
            set(&mut cfg.m, e.m);
            set(&mut cfg.t_sim, e.t_sim);
            set(&mut cfg.dt_sim, e.dt_sim);
            set(&mut cfg.trials, e.trials);
            set(&mut cfg.seed, e.seed);
        }
        if let Some(w) = self.weights {
            set(&mut cfg.weights.q, w.q);
            set(&mut cfg.weights.r, w.r);
            set(&mut cfg.weights.g, w.g);
        }
        if let Some(r) = self.robust {
            set(&mut cfg.lambda, r.lambda);
            set(&mut cfg.r, r.r);
            set(&mut cfg.b_access, r.b_access);
        }
        if let Some(e) = self.enkf {
            set(&mut cfg.enkf.particles, e.particles);
            set(&mut cfg.enkf.horizon, e.horizon);
            set(&mut cfg.enkf.dt, e.dt);
            set(&mut cfg.enkf.innovation, e.innovation);
        }
        if let Some(d) = self.disturbance {
            set(&mut cfg.disturbance.kind, d.kind);
            set(&mut cfg.disturbance.d0, d.d0);
            if d.channels.is_some() {
                cfg.disturbance.channels = d.channels;
            }
        }
        if let Some(d) = self.dmdc {
            set(&mut cfg.dmdc.n, d.n);
            set(&mut cfg.dmdc.trajectories, d.trajectories);
            set(&mut cfg.dmdc.steps, d.steps);
            set(&mut cfg.dmdc.amplitude, d.amplitude);
            set(&mut cfg.dmdc.hold, d.hold);
        }
        if let Some(g) = self.grid {
            set(&mut cfg.grid.d0, g.d0);
            set(&mut cfg.grid.lambda, g.lambda);
            set(&mut cfg.grid.kinds, g.kinds);
        }
    }
}
