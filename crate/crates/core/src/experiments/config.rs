//! JSON scenario configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::density::{DensityMatrix, Tolerance};
use crate::error::{Result, SimError};
use crate::linalg::CMatrix;
use crate::scattering::Model;
use crate::spin::{pair_singlet, BasisIndex, MediatorSpin, SpinQuantum};
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Fig2,
    Fig3b,
    Fig4,
    Fig5,
    Sweep,
    FixedPoint,
}

impl Scenario {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "fig2" => Ok(Scenario::Fig2),
            "fig3b" => Ok(Scenario::Fig3b),
            "fig4" => Ok(Scenario::Fig4),
            "fig5" => Ok(Scenario::Fig5),
            "sweep" => Ok(Scenario::Sweep),
            "fixedpoint" => Ok(Scenario::FixedPoint),
            other => Err(SimError::Config(format!("unknown scenario '{other}'"))),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Scenario::Fig2 => "fig2",
            Scenario::Fig3b => "fig3b",
            Scenario::Fig4 => "fig4",
            Scenario::Fig5 => "fig5",
            Scenario::Sweep => "sweep",
            Scenario::FixedPoint => "fixedpoint",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    UpDown,
    Singlet,
    Mixed,
    Custom(PathBuf),
}

impl InitialState {
    pub fn build(&self, s: SpinQuantum) -> Result<DensityMatrix> {
        match self {
            InitialState::UpDown => {
                // m1 = +s, m2 = -s
                let idx = BasisIndex::new(MediatorSpin::Down, s.dim() - 1, 0).pair_flat(s);
                Ok(DensityMatrix::basis(s.pair_dim(), idx))
            }
            InitialState::Singlet => DensityMatrix::pure(&pair_singlet(s)),
            InitialState::Mixed => Ok(DensityMatrix::maximally_mixed(s.pair_dim())),
            InitialState::Custom(path) => {
                let rho = load_density_matrix(path)?;
                if rho.dim() != s.pair_dim() {
                    return Err(SimError::Config(format!(
                        "{}: matrix is {}x{}, pair space for s = {s} is {}",
                        path.display(),
                        rho.dim(),
                        rho.dim(),
                        s.pair_dim()
                    )));
                }
                Ok(rho)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            InitialState::UpDown => "up-down".into(),
            InitialState::Singlet => "singlet".into(),
            InitialState::Mixed => "mixed".into(),
            InitialState::Custom(p) => p.display().to_string(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

/// Reads `{"re": [[..]], "im": [[..]]}`. The matrix must already be a state;
/// it is never renormalized.
pub fn load_density_matrix(path: &Path) -> Result<DensityMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| SimError::Config(format!("cannot read matrix file {}: {e}", path.display())))?;
    let file: MatrixFile = serde_json::from_str(&text)
        .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
    let n = file.re.len();
    let im = file.im.unwrap_or_else(|| vec![vec![0.0; n]; n]);
    if n == 0 || im.len() != n || file.re.iter().chain(&im).any(|row| row.len() != n) {
        return Err(SimError::Config(format!(
            "{}: re/im must be square arrays of equal size",
            path.display()
        )));
    }
    let m = CMatrix::from_fn(n, n, |i, j| Complex64::new(file.re[i][j], im[i][j]));
    let tol = Tolerance {
        hermitian: 1e-9,
        trace: 1e-9,
        min_eigenvalue: -1e-9,
    };
    DensityMatrix::with_tolerance(m, tol)
        .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseMethod {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseGrid {
    pub tb_over_td: Vec<f64>,
    pub mu: Vec<f64>,
    pub trajectories: usize,
    pub method: NoiseMethod,
}

/// A fully resolved scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub model: Model,
    pub g_grid: Vec<f64>,
    pub q: u32,
    pub n_max: usize,
    pub r_pol_grid: Vec<f64>,
    pub initial_state: InitialState,
    pub s: SpinQuantum,
    pub noise: Option<NoiseGrid>,
    pub output_path: PathBuf,
    pub seed: u64,
    /// Raman coupling used against exchange coupling `g` in fig3b is
    /// `raman_scale * g`.
    pub raman_scale: f64,
    pub plot_script: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawInitial {
    Named(String),
    Custom { custom: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    tb_over_td: Vec<f64>,
    mu: Vec<f64>,
    #[serde(default)]
    trajectories: Option<usize>,
    #[serde(default)]
    method: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: String,
    model: Option<String>,
    g_grid: Option<Vec<f64>>,
    q: Option<u32>,
    n_max: Option<usize>,
    r_pol_grid: Option<Vec<f64>>,
    initial_state: Option<RawInitial>,
    s: Option<f64>,
    noise: Option<RawNoise>,
    output_path: Option<String>,
    seed: Option<u64>,
    raman_scale: Option<f64>,
    plot_script: Option<bool>,
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[count - 1] = hi;
    grid
}

/// `0, step, 2 step, ..., hi` built from integer multiples.
pub fn linear_grid(hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| hi * i as f64 / steps as f64).collect()
}

impl ScenarioConfig {
    /// Parses a config; relative paths inside it resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        let scenario = Scenario::parse(&raw.scenario)?;
        let model = match (&raw.model, scenario) {
            (Some(m), _) => Model::parse(m).map_err(|e| SimError::Config(e.to_string()))?,
            (None, Scenario::Fig2) => Model::Exchange,
            (None, Scenario::Fig3b) => Model::Exchange,
            (None, Scenario::Fig4 | Scenario::Fig5) => Model::Raman,
            (None, _) => return Err(SimError::Config(format!("scenario {} needs a model", scenario.id()))),
        };
        let default_g = match scenario {
            Scenario::Fig2 | Scenario::Fig3b => Some(log_grid(0.1, 10.0, 40)),
            Scenario::Fig4 | Scenario::Fig5 => Some(vec![1.5]),
            _ => None,
        };
        let g_grid = raw
            .g_grid
            .or(default_g)
            .ok_or_else(|| SimError::Config("g_grid is required".into()))?;
        let default_n = match scenario {
            Scenario::Fig3b => 5,
            _ => 10,
        };
        let r_pol_grid = raw.r_pol_grid.unwrap_or_else(|| match scenario {
            Scenario::Fig4 => linear_grid(1.0, 10),
            _ => vec![0.0],
        });
        let initial_state = match raw.initial_state {
            None => InitialState::UpDown,
            Some(RawInitial::Named(name)) => match name.as_str() {
                "up-down" => InitialState::UpDown,
                "singlet" => InitialState::Singlet,
                "mixed" => InitialState::Mixed,
                other => {
                    return Err(SimError::Config(format!("unknown initial_state '{other}'")))
                }
            },
            Some(RawInitial::Custom { custom }) => InitialState::Custom(base_dir.join(custom)),
        };
        let s = match raw.s {
            None => SpinQuantum::HALF,
            Some(v) => SpinQuantum::from_value(v).map_err(|e| SimError::Config(e.to_string()))?,
        };
        let noise = match raw.noise {
            Some(n) => Some(NoiseGrid {
                tb_over_td: n.tb_over_td,
                mu: n.mu,
                trajectories: n.trajectories.unwrap_or(2000),
                method: match n.method.as_deref() {
                    None | Some("exact") => NoiseMethod::Exact,
                    Some("monte_carlo") => NoiseMethod::MonteCarlo,
                    Some(other) => {
                        return Err(SimError::Config(format!("unknown noise method '{other}'")))
                    }
                },
            }),
            None if scenario == Scenario::Fig5 => Some(NoiseGrid {
                tb_over_td: linear_grid(1.0, 10),
                mu: vec![0.0, 0.5, 1.0],
                trajectories: 2000,
                method: NoiseMethod::MonteCarlo,
            }),
            None => None,
        };
        let output_path = base_dir.join(raw.output_path.unwrap_or_else(|| {
            if scenario == Scenario::FixedPoint {
                "fixedpoint.json".into()
            } else {
                format!("{}.csv", scenario.id())
            }
        }));
        let cfg = Self {
            scenario,
            model,
            g_grid,
            q: raw.q.unwrap_or(1),
            n_max: raw.n_max.unwrap_or(default_n),
            r_pol_grid,
            initial_state,
            s,
            noise,
            output_path,
            seed: raw.seed.unwrap_or(0),
            raman_scale: raw.raman_scale.unwrap_or(0.5),
            plot_script: raw.plot_script.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, base)
            .map_err(|e| SimError::Config(format!("{}: {}", path.display(), strip_prefix(&e))))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.g_grid.is_empty() || self.r_pol_grid.is_empty() {
            return bad("grids must be non-empty".into());
        }
        if self.n_max == 0 {
            return bad("n_max must be >= 1".into());
        }
        if self.q == 0 {
            return bad("q must be >= 1".into());
        }
        if let Some(g) = self.g_grid.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return bad(format!("g = {g} must be finite and >= 0"));
        }
        if let Some(r) = self.r_pol_grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return bad(format!("r_pol = {r} outside [0, 1]"));
        }
        if !(self.raman_scale.is_finite() && self.raman_scale > 0.0) {
            return bad("raman_scale must be > 0".into());
        }
        if let Some(noise) = &self.noise {
            if self.s != SpinQuantum::HALF {
                return bad("noise is only defined for s = 1/2".into());
            }
            if noise.tb_over_td.is_empty() || noise.mu.is_empty() {
                return bad("noise grids must be non-empty".into());
            }
            if noise.tb_over_td.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return bad("tb_over_td values must be finite and >= 0".into());
            }
            if noise.mu.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return bad("mu values must lie in [0, 1]".into());
            }
            if noise.trajectories == 0 {
                return bad("trajectories must be >= 1".into());
            }
        }
        if self.scenario == Scenario::Fig5 && self.noise.is_none() {
            return bad("fig5 needs a noise block".into());
        }
        Ok(())
    }
}

fn strip_prefix(e: &SimError) -> String {
    match e {
        SimError::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}
