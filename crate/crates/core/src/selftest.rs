//! Quick invariant suite behind `spinsim selftest`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{extract_kraus, iterate, transmit_step, KrausFamily, MediatorState};
use crate::density::DensityMatrix;
use crate::linalg::{frobenius, identity, trace};
use crate::noise::{dephasing_channel, noisy_iterate, NoiseParams};
use crate::scattering::{delta_overlap_matrix, rc_oracle, solve, Model, ScatterParams};
use crate::spin::{pair_singlet, MediatorSpin, SpinOperatorSet, SpinQuantum};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = std::result::Result<String, String>;
type Named = (&'static str, fn() -> Outcome);

fn kraus(model: Model, g: f64, q: u32, s: SpinQuantum) -> std::result::Result<KrausFamily, String> {
    let p = ScatterParams::resonant(model, g, q, s).map_err(|e| e.to_string())?;
    extract_kraus(&solve(&p).map_err(|e| e.to_string())?, s).map_err(|e| e.to_string())
}

fn up_down() -> DensityMatrix {
    DensityMatrix::basis(4, 2)
}

fn within(label: &str, value: f64, bound: f64) -> Outcome {
    if value < bound {
        Ok(format!("{label} = {value:.3e}"))
    } else {
        Err(format!("{label} = {value:.3e} (bound {bound:.0e})"))
    }
}

fn flux() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        let model = if i % 2 == 0 { Model::Exchange } else { Model::Raman };
        let p = ScatterParams::new(model, rng.random_range(0.05..10.0), rng.random_range(0.1..12.0), SpinQuantum::HALF)
            .map_err(|e| e.to_string())?;
        worst = worst.max(solve(&p).map_err(|e| e.to_string())?.flux_defect());
    }
    within("max flux defect", worst, 1e-10)
}

fn oracle() -> Outcome {
    let s = SpinQuantum::HALF;
    let ops = SpinOperatorSet::new(s);
    let mut worst: f64 = 0.0;
    for model in [Model::Exchange, Model::Raman] {
        for (g, q) in [(0.3, 1), (1.6, 2), (7.5, 3)] {
            let p = ScatterParams::resonant(model, g, q, s).map_err(|e| e.to_string())?;
            let table = solve(&p).map_err(|e| e.to_string())?;
            let reference = rc_oracle(&model.merged_coupling(&ops), g);
            worst = worst.max((&table.t - &reference.t).camax()).max((&table.r - &reference.r).camax());
        }
    }
    within("max entry deviation", worst, 1e-9)
}

fn singlet_fixed() -> Outcome {
    let s = SpinQuantum::HALF;
    let singlet = DensityMatrix::pure(&pair_singlet(s)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for model in [Model::Exchange, Model::Raman] {
        for r in [0.0, 0.4, 1.0] {
            let k = kraus(model, 2.3, 1, s)?;
            let out = transmit_step(&singlet, &MediatorState::polarized(r).map_err(|e| e.to_string())?, &k)
                .map_err(|e| e.to_string())?;
            worst = worst
                .max(frobenius(&(&out.unnormalized - singlet.matrix())))
                .max((out.probability - 1.0).abs());
        }
    }
    within("max deviation", worst, 1e-12)
}

fn anchor(g: f64, n: usize) -> Outcome {
    let k = kraus(Model::Exchange, g, 1, SpinQuantum::HALF)?;
    let recs = iterate(&up_down(), &MediatorState::unpolarized(), &k, n).map_err(|e| e.to_string())?;
    let last = &recs[n - 1];
    let msg = format!("F = {:.4}, P = {:.4}", last.fidelity, last.probability);
    if last.fidelity >= 0.95 && last.probability >= 0.5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn completeness() -> Outcome {
    let s = SpinQuantum::new(3).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for model in [Model::Exchange, Model::Raman] {
        let k = kraus(model, 1.1, 1, s)?;
        for a in MediatorSpin::ALL {
            for b in MediatorSpin::ALL {
                let d2 = s.pair_dim();
                let want = if a == b { identity(d2) } else { crate::linalg::CMatrix::zeros(d2, d2) };
                worst = worst.max(frobenius(&(k.completeness(a, b) - want)));
            }
        }
    }
    within("max defect", worst, 1e-10)
}

fn dephasing() -> Outcome {
    let mut worst: f64 = 0.0;
    for (tb, mu) in [(0.3, 0.0), (1.0, 0.5), (5.0, 1.0)] {
        let p = NoiseParams::new(tb, mu, 1, 0).map_err(|e| e.to_string())?;
        let rho = DensityMatrix::pure(&pair_singlet(SpinQuantum::HALF)).map_err(|e| e.to_string())?;
        let mixed = rho.matrix() * crate::linalg::c(0.5) + up_down().matrix() * crate::linalg::c(0.5);
        let out = dephasing_channel(&DensityMatrix::new(mixed).map_err(|e| e.to_string())?, &p)
            .map_err(|e| e.to_string())?;
        worst = worst.max((trace(out.matrix()).re - 1.0).abs()).max((-out.min_eigenvalue()).max(0.0));
    }
    within("trace/positivity defect", worst, 1e-12)
}

fn correlated_immunity() -> Outcome {
    let k = kraus(Model::Raman, 1.5, 1, SpinQuantum::HALF)?;
    let rho_e = MediatorState::unpolarized();
    let clean = iterate(&up_down(), &rho_e, &k, 6).map_err(|e| e.to_string())?;
    let p = NoiseParams::new(0.8, 1.0, 1, 0).map_err(|e| e.to_string())?;
    let noisy = noisy_iterate(&up_down(), &rho_e, &k, 6, &p).map_err(|e| e.to_string())?;
    let worst = clean
        .iter()
        .zip(&noisy)
        .map(|(a, b)| (a.fidelity - b.fidelity).abs())
        .fold(0.0, f64::max);
    within("max |dF|", worst, 1e-10)
}

fn high_spin() -> Outcome {
    let s = SpinQuantum::new(5).map_err(|e| e.to_string())?;
    let p = ScatterParams::resonant(Model::Exchange, 0.9, 1, s).map_err(|e| e.to_string())?;
    let table = solve(&p).map_err(|e| e.to_string())?;
    let k = extract_kraus(&table, s).map_err(|e| e.to_string())?;
    let singlet = DensityMatrix::pure(&pair_singlet(s)).map_err(|e| e.to_string())?;
    let out = transmit_step(&singlet, &MediatorState::unpolarized(), &k).map_err(|e| e.to_string())?;
    let worst = table
        .flux_defect()
        .max(frobenius(&(&out.unnormalized - singlet.matrix())))
        .max((out.probability - 1.0).abs());
    within("max defect (72-dim)", worst, 1e-9)
}

fn merge() -> Outcome {
    let m = |theta: f64| -> std::result::Result<f64, String> {
        let p = ScatterParams::new(Model::Exchange, 1.0, theta, SpinQuantum::HALF).map_err(|e| e.to_string())?;
        let table = solve(&p).map_err(|e| e.to_string())?;
        let a = delta_overlap_matrix(&p, &table, 0.0).map_err(|e| e.to_string())?;
        let b = delta_overlap_matrix(&p, &table, theta).map_err(|e| e.to_string())?;
        Ok(frobenius(&(a - b)))
    };
    let (on, off) = (m(PI)?, m(PI + 0.3)?);
    let msg = format!("resonant {on:.2e}, detuned {off:.2e}");
    if on < 1e-9 && off > 1e-3 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Runs every check in a fixed order.
pub fn run_all() -> Vec<Check> {
    let checks: [Named; 10] = [
        ("flux conservation off resonance", flux),
        ("resonant solver matches closed form", oracle),
        ("singlet is transmitted unchanged", singlet_fixed),
        ("anchor g=1.6 n=5: F>=0.95, P>=0.5", || anchor(1.6, 5)),
        ("anchor g=7.5 n=1: F>=0.95, P>=0.5", || anchor(7.5, 1)),
        ("Kraus completeness (s=3/2)", completeness),
        ("dephasing is trace and positivity preserving", dephasing),
        ("correlated kicks leave F unchanged", correlated_immunity),
        ("s=5/2 singlet fixed, flux conserved", high_spin),
        ("delta-overlap merge at resonance only", merge),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            let (passed, detail) = match f() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            Check { name, passed, detail }
        })
        .collect()
}
