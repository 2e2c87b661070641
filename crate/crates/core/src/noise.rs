//! Phase kicks on the two static pseudospins between injections.
//!
//! In each buffer window the pair is kicked collectively (same `Z` on both
//! spins) with probability `mu`, independently otherwise; each kick fires
//! with probability `p = (1 - exp(-tb_over_td)) / 2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    apply_transmit, conditioned_update, IterationRecord, KrausFamily, MediatorState,
    MIN_STEP_PROBABILITY,
};
use crate::density::DensityMatrix;
use crate::error::{Result, SimError};
use crate::linalg::{c, trace, CMatrix};
use crate::spin::fidelity_with_singlet;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    /// Buffer window over dephasing time.
    pub tb_over_td: f64,
    /// Probability that a window's kicks are correlated.
    pub mu: f64,
    pub trajectories: usize,
    pub seed: u64,
}

impl NoiseParams {
    pub fn new(tb_over_td: f64, mu: f64, trajectories: usize, seed: u64) -> Result<Self> {
        if !tb_over_td.is_finite() || tb_over_td < 0.0 {
            return Err(SimError::InvalidParameter(format!(
                "tb_over_td = {tb_over_td} must be finite and >= 0"
            )));
        }
        if !(0.0..=1.0).contains(&mu) {
            return Err(SimError::InvalidParameter(format!("mu = {mu} outside [0, 1]")));
        }
        if trajectories == 0 {
            return Err(SimError::InvalidParameter("trajectories must be >= 1".into()));
        }
        Ok(Self {
            tb_over_td,
            mu,
            trajectories,
            seed,
        })
    }

    /// Per-window phase-flip probability.
    pub fn flip_probability(&self) -> f64 {
        -0.5 * (-self.tb_over_td).exp_m1()
    }
}

/// Eigenvalue of `Z` on each spin for the four pair basis states.
const Z1: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];
const Z2: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

/// `U rho U` for a diagonal sign unitary `U`.
fn kick(rho: &CMatrix, signs: &[f64; 4]) -> CMatrix {
    CMatrix::from_fn(4, 4, |i, j| {
        if signs[i] * signs[j] < 0.0 {
            -rho[(i, j)]
        } else {
            rho[(i, j)]
        }
    })
}

fn both(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [a[0] * b[0], a[1] * b[1], a[2] * b[2], a[3] * b[3]]
}

fn check_pair(rho12: &CMatrix) -> Result<()> {
    if rho12.nrows() != 4 {
        return Err(SimError::DimensionMismatch {
            expected: 4,
            got: rho12.nrows(),
        });
    }
    Ok(())
}

fn dephase_matrix(rho: &CMatrix, p: &NoiseParams) -> CMatrix {
    let flip = p.flip_probability();
    if flip == 0.0 {
        return rho.clone();
    }
    let keep = c(1.0 - flip);
    let f = c(flip);
    let zz = both(&Z1, &Z2);
    let collective = rho * keep + kick(rho, &zz) * f;
    let first = rho * keep + kick(rho, &Z1) * f;
    let independent = &first * keep + kick(&first, &Z2) * f;
    collective * c(p.mu) + independent * c(1.0 - p.mu)
}

/// Exact dephasing channel for one buffer window (pseudospin pairs only).
pub fn dephasing_channel(rho12: &DensityMatrix, p: &NoiseParams) -> Result<DensityMatrix> {
    check_pair(rho12.matrix())?;
    Ok(DensityMatrix::from_matrix_unchecked(dephase_matrix(rho12.matrix(), p)))
}

/// Conditioned iteration with one dephasing window before every injection.
pub fn noisy_iterate(
    rho12: &DensityMatrix,
    rho_e: &MediatorState,
    k: &KrausFamily,
    n: usize,
    p: &NoiseParams,
) -> Result<Vec<IterationRecord>> {
    if n == 0 {
        return Err(SimError::InvalidParameter("number of steps must be >= 1".into()));
    }
    check_pair(rho12.matrix())?;
    let mut state = rho12.clone();
    let mut joint = 1.0;
    let mut records = Vec::with_capacity(n);
    for step in 1..=n {
        let dephased = dephasing_channel(&state, p)?;
        let (next, prob) = conditioned_update(&dephased, rho_e, k, step)?;
        joint *= prob;
        state = next;
        records.push(IterationRecord {
            step,
            fidelity: fidelity_with_singlet(&state)?,
            probability: joint,
            rho12: state.clone(),
        });
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Estimator {
    /// Every trajectory survives with weight equal to its cumulative
    /// transmission probability.
    #[default]
    Weighted,
    /// Detector clicks are sampled; reflected trajectories drop out.
    Sampled,
}

#[derive(Clone, Debug)]
pub struct MonteCarloRun {
    pub records: Vec<IterationRecord>,
    pub stderr_fidelity: Vec<f64>,
    pub stderr_probability: Vec<f64>,
}

struct Sample {
    weight: f64,
    fidelity: f64,
    state: CMatrix,
}

fn trajectory(
    index: usize,
    rho12: &CMatrix,
    rho_e: &MediatorState,
    k: &KrausFamily,
    n: usize,
    p: &NoiseParams,
    estimator: Estimator,
) -> Result<Vec<Sample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(index as u64);
    let flip = p.flip_probability();
    let mut state = rho12.clone();
    let mut weight = 1.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        // the draws happen even for dead trajectories so streams stay aligned
        let correlated = rng.random_bool(p.mu);
        let (k1, k2) = if correlated {
            let z = rng.random_bool(flip);
            (z, z)
        } else {
            (rng.random_bool(flip), rng.random_bool(flip))
        };
        let click: f64 = rng.random();
        if weight > 0.0 {
            let signs = match (k1, k2) {
                (false, false) => None,
                (true, false) => Some(Z1),
                (false, true) => Some(Z2),
                (true, true) => Some(both(&Z1, &Z2)),
            };
            if let Some(signs) = signs {
                state = kick(&state, &signs);
            }
            let next = apply_transmit(&state, rho_e.matrix(), k);
            let prob = trace(&next).re.clamp(0.0, 1.0);
            if prob <= MIN_STEP_PROBABILITY {
                weight = 0.0;
            } else {
                state = next / c(prob);
                match estimator {
                    Estimator::Weighted => weight *= prob,
                    Estimator::Sampled => {
                        if click >= prob {
                            weight = 0.0;
                        }
                    }
                }
            }
        }
        let fidelity = fidelity_with_singlet(&DensityMatrix::from_matrix_unchecked(state.clone()))?;
        out.push(Sample {
            weight,
            fidelity,
            state: state.clone(),
        });
    }
    Ok(out)
}

/// Seeded Monte Carlo over kick realizations. Trajectory `j` draws from
/// stream `j` of a generator keyed by `p.seed`, and the reduction runs in
/// trajectory order, so output is independent of thread scheduling.
pub fn monte_carlo_iterate(
    rho12: &DensityMatrix,
    rho_e: &MediatorState,
    k: &KrausFamily,
    n: usize,
    p: &NoiseParams,
) -> Result<MonteCarloRun> {
    monte_carlo_with(rho12, rho_e, k, n, p, Estimator::Weighted)
}

pub fn monte_carlo_with(
    rho12: &DensityMatrix,
    rho_e: &MediatorState,
    k: &KrausFamily,
    n: usize,
    p: &NoiseParams,
    estimator: Estimator,
) -> Result<MonteCarloRun> {
    if n == 0 {
        return Err(SimError::InvalidParameter("number of steps must be >= 1".into()));
    }
    if p.trajectories == 0 {
        return Err(SimError::InvalidParameter("trajectories must be >= 1".into()));
    }
    check_pair(rho12.matrix())?;
    let samples: Vec<Vec<Sample>> = (0..p.trajectories)
        .into_par_iter()
        .map(|j| trajectory(j, rho12.matrix(), rho_e, k, n, p, estimator))
        .collect::<Result<_>>()?;

    let m = p.trajectories as f64;
    let mut records = Vec::with_capacity(n);
    let mut stderr_fidelity = Vec::with_capacity(n);
    let mut stderr_probability = Vec::with_capacity(n);
    for step in 0..n {
        let column = samples.iter().map(|traj| &traj[step]);
        let total: f64 = column.clone().map(|s| s.weight).sum();
        if total <= 0.0 {
            return Err(SimError::VanishingProbability {
                step: step + 1,
                probability: 0.0,
            });
        }
        let mean_p = total / m;
        let mean_f = column.clone().map(|s| s.weight * s.fidelity).sum::<f64>() / total;
        let mut state = CMatrix::zeros(4, 4);
        for s in column.clone() {
            if s.weight > 0.0 {
                state += &s.state * c(s.weight);
            }
        }
        state /= c(total);

        let var_f: f64 = column
            .clone()
            .map(|s| (s.weight * (s.fidelity - mean_f)).powi(2))
            .sum();
        stderr_fidelity.push(var_f.sqrt() / total);
        let se_p = if p.trajectories > 1 {
            let var_w: f64 = column.map(|s| (s.weight - mean_p).powi(2)).sum::<f64>() / (m - 1.0);
            (var_w / m).sqrt()
        } else {
            0.0
        };
        stderr_probability.push(se_p);
        records.push(IterationRecord {
            step: step + 1,
            fidelity: mean_f,
            probability: mean_p,
            rho12: DensityMatrix::from_matrix_unchecked(state),
        });
    }
    Ok(MonteCarloRun {
        records,
        stderr_fidelity,
        stderr_probability,
    })
}
