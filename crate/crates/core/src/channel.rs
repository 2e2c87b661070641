//! Kraus operators on the static pair and the repeated, transmission
//! conditioned map built from them.

use std::f64::consts::PI;

use crate::density::DensityMatrix;
use crate::error::{Result, SimError};
use crate::linalg::{c, frobenius, hermitian_eigen, null_space, trace, unvec, vec_of, CMatrix, CVector};
use crate::scattering::AmplitudeTable;
use crate::spin::{fidelity_with_singlet, pair_spin_sq, pair_sz, MediatorSpin, SpinQuantum};

/// Transmitted and reflected pair operators, indexed `[outgoing][incoming]`
/// mediator label.
#[derive(Clone, Debug)]
pub struct KrausFamily {
    spin: SpinQuantum,
    pub t: [[CMatrix; 2]; 2],
    pub r: [[CMatrix; 2]; 2],
}

impl KrausFamily {
    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    pub fn pair_dim(&self) -> usize {
        self.spin.pair_dim()
    }

    pub fn transmitted(&self, out: MediatorSpin, inc: MediatorSpin) -> &CMatrix {
        &self.t[out.index()][inc.index()]
    }

    pub fn reflected(&self, out: MediatorSpin, inc: MediatorSpin) -> &CMatrix {
        &self.r[out.index()][inc.index()]
    }

    /// `sum_out (T[out][a]^† T[out][b] + R[out][a]^† R[out][b])`, which is
    /// `delta_ab` times the identity for a unitary scattering matrix.
    pub fn completeness(&self, a: MediatorSpin, b: MediatorSpin) -> CMatrix {
        let d2 = self.pair_dim();
        let mut acc = CMatrix::zeros(d2, d2);
        for out in MediatorSpin::ALL {
            let (o, a, b) = (out.index(), a.index(), b.index());
            acc += self.t[o][a].adjoint() * &self.t[o][b] + self.r[o][a].adjoint() * &self.r[o][b];
        }
        acc
    }
}

/// Reshapes the `2d^2 x 2d^2` amplitude matrices into the 2x2 grid of pair
/// operators.
pub fn extract_kraus(table: &AmplitudeTable, s: SpinQuantum) -> Result<KrausFamily> {
    let n = s.full_dim();
    if table.t.nrows() != n || table.t.ncols() != n || table.r.shape() != (n, n) {
        return Err(SimError::DimensionMismatch {
            expected: n,
            got: table.t.nrows(),
        });
    }
    let d2 = s.pair_dim();
    let block = |m: &CMatrix, out: usize, inc: usize| m.view((out * d2, inc * d2), (d2, d2)).into_owned();
    let grid = |m: &CMatrix| {
        [
            [block(m, 0, 0), block(m, 0, 1)],
            [block(m, 1, 0), block(m, 1, 1)],
        ]
    };
    Ok(KrausFamily {
        spin: s,
        t: grid(&table.t),
        r: grid(&table.r),
    })
}

/// Spin state of one injected mediator, basis `(down, up)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MediatorState {
    rho: DensityMatrix,
}

impl MediatorState {
    pub fn new(rho: DensityMatrix) -> Result<Self> {
        if rho.dim() != 2 {
            return Err(SimError::DimensionMismatch {
                expected: 2,
                got: rho.dim(),
            });
        }
        Ok(Self { rho })
    }

    /// `[(1 - r)|down><down| + (1 + r)|up><up|] / 2` with `r` in `[0, 1]`.
    pub fn polarized(r_pol: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r_pol) {
            return Err(SimError::InvalidParameter(format!(
                "polarization {r_pol} outside [0, 1]"
            )));
        }
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c((1.0 - r_pol) / 2.0);
        m[(1, 1)] = c((1.0 + r_pol) / 2.0);
        Ok(Self {
            rho: DensityMatrix::from_matrix_unchecked(m),
        })
    }

    pub fn unpolarized() -> Self {
        Self {
            rho: DensityMatrix::maximally_mixed(2),
        }
    }

    pub fn pure(spin: MediatorSpin) -> Self {
        Self {
            rho: DensityMatrix::basis(2, spin.index()),
        }
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn matrix(&self) -> &CMatrix {
        self.rho.matrix()
    }
}

/// One conditioned step: the state after `step` transmitted mediators.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub step: usize,
    pub fidelity: f64,
    /// Joint probability that all `step` mediators were transmitted.
    pub probability: f64,
    pub rho12: DensityMatrix,
}

/// Unnormalized transmitted state and its trace.
#[derive(Clone, Debug)]
pub struct TransmitOutcome {
    pub unnormalized: CMatrix,
    pub probability: f64,
}

impl TransmitOutcome {
    pub fn normalized(&self) -> Option<DensityMatrix> {
        (self.probability > 0.0).then(|| {
            DensityMatrix::from_matrix_unchecked(&self.unnormalized / c(self.probability))
        })
    }
}

fn check_shapes(rho12: &CMatrix, k: &KrausFamily) -> Result<()> {
    let d2 = k.pair_dim();
    if rho12.nrows() != d2 || rho12.ncols() != d2 {
        return Err(SimError::DimensionMismatch {
            expected: d2,
            got: rho12.nrows(),
        });
    }
    Ok(())
}

fn sandwich(ops: &[[CMatrix; 2]; 2], rho12: &CMatrix, rho_e: &CMatrix) -> CMatrix {
    let d2 = rho12.nrows();
    let mut out = CMatrix::zeros(d2, d2);
    for row in ops {
        for a in 0..2 {
            let left = &row[a] * rho12;
            for b in 0..2 {
                let w = rho_e[(a, b)];
                if w == c(0.0) {
                    continue;
                }
                out += (&left * row[b].adjoint()) * w;
            }
        }
    }
    out
}

/// `sum_out sum_ab (rho_e)_ab T[out][a] rho T[out][b]^†` on a raw operator.
pub fn apply_transmit(rho12: &CMatrix, rho_e: &CMatrix, k: &KrausFamily) -> CMatrix {
    sandwich(&k.t, rho12, rho_e)
}

pub fn apply_reflect(rho12: &CMatrix, rho_e: &CMatrix, k: &KrausFamily) -> CMatrix {
    sandwich(&k.r, rho12, rho_e)
}

/// Pair state after one scattering event with no detector (transmitted and
/// reflected branches both kept).
pub fn unconditioned_step(
    rho12: &DensityMatrix,
    rho_e: &MediatorState,
    k: &KrausFamily,
) -> Result<DensityMatrix> {
    check_shapes(rho12.matrix(), k)?;
    let out = apply_transmit(rho12.matrix(), rho_e.matrix(), k)
        + apply_reflect(rho12.matrix(), rho_e.matrix(), k);
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Unnormalized pair state given that the mediator was transmitted.
pub fn transmit_step(
    rho12: &DensityMatrix,
    rho_e: &MediatorState,
    k: &KrausFamily,
) -> Result<TransmitOutcome> {
    check_shapes(rho12.matrix(), k)?;
    let unnormalized = apply_transmit(rho12.matrix(), rho_e.matrix(), k);
    let probability = trace(&unnormalized).re.clamp(0.0, 1.0);
    Ok(TransmitOutcome {
        unnormalized,
        probability,
    })
}

/// Steps whose transmission probability is at or below this are undefined.
pub const MIN_STEP_PROBABILITY: f64 = 1e-14;

/// Conditions a normalized state on one more transmitted mediator.
pub(crate) fn conditioned_update(
    rho12: &DensityMatrix,
    rho_e: &MediatorState,
    k: &KrausFamily,
    step: usize,
) -> Result<(DensityMatrix, f64)> {
    let outcome = transmit_step(rho12, rho_e, k)?;
    if outcome.probability <= MIN_STEP_PROBABILITY {
        return Err(SimError::VanishingProbability {
            step,
            probability: outcome.probability,
        });
    }
    let next = outcome.normalized().expect("probability checked positive");
    Ok((next, outcome.probability))
}

/// `n` transmission-conditioned steps. Record `k` holds the normalized state,
/// its singlet fidelity, and the running product of step probabilities.
pub fn iterate(
    rho12: &DensityMatrix,
    rho_e: &MediatorState,
    k: &KrausFamily,
    n: usize,
) -> Result<Vec<IterationRecord>> {
    if n == 0 {
        return Err(SimError::InvalidParameter("number of steps must be >= 1".into()));
    }
    check_shapes(rho12.matrix(), k)?;
    let mut state = rho12.clone();
    let mut joint = 1.0;
    let mut records = Vec::with_capacity(n);
    for step in 1..=n {
        let (next, p) = conditioned_update(&state, rho_e, k, step)?;
        joint *= p;
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

/// `Tr[E~^n(rho)]` from repeated application of the unnormalized map.
pub fn transmitted_weight(
    rho12: &DensityMatrix,
    rho_e: &MediatorState,
    k: &KrausFamily,
    n: usize,
) -> Result<f64> {
    check_shapes(rho12.matrix(), k)?;
    let mut m = rho12.matrix().clone();
    for _ in 0..n {
        m = apply_transmit(&m, rho_e.matrix(), k);
    }
    Ok(trace(&m).re)
}

/// Matrix of the unnormalized transmitted map on column-stacked operators.
pub fn transmit_superoperator(k: &KrausFamily, rho_e: &MediatorState) -> CMatrix {
    let d2 = k.pair_dim();
    let dim = d2 * d2;
    let mut sup = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut unit = CMatrix::zeros(d2, d2);
        unit[(col % d2, col / d2)] = c(1.0);
        sup.set_column(col, &vec_of(&apply_transmit(&unit, rho_e.matrix(), k)));
    }
    sup
}

/// Agreement required for a state to count as fixed.
pub const FIXED_POINT_TOL: f64 = 1e-9;

/// Dimension of the operator space left invariant by the unnormalized map.
pub fn fixed_space_dim(k: &KrausFamily, rho_e: &MediatorState) -> usize {
    let sup = transmit_superoperator(k, rho_e);
    let dim = sup.nrows();
    null_space(&(sup - CMatrix::identity(dim, dim)), FIXED_POINT_TOL).ncols()
}

fn is_fixed(rho: &CMatrix, k: &KrausFamily, rho_e: &MediatorState) -> bool {
    frobenius(&(apply_transmit(rho, rho_e.matrix(), k) - rho)) < FIXED_POINT_TOL
}

/// States with `E~(rho) = rho`, hence transmitted with certainty and left
/// unchanged.
///
/// The fixed operators are found as the eigenvalue-1 space of the
/// superoperator. Their joint support is then resolved in the eigenbasis of
/// `S12^2` (with a small `S12z` admixture to split multiplets) and each
/// basis projector that is itself fixed is reported. Degenerate groups and
/// the whole support are tried as mixed states when no pure candidate passes.
pub fn fixed_points(k: &KrausFamily, rho_e: &MediatorState) -> Vec<DensityMatrix> {
    let d2 = k.pair_dim();
    let sup = transmit_superoperator(k, rho_e);
    let kernel = null_space(&(sup - CMatrix::identity(d2 * d2, d2 * d2)), FIXED_POINT_TOL);
    if kernel.ncols() == 0 {
        return Vec::new();
    }

    let mut cover = CMatrix::zeros(d2, d2);
    for col in kernel.column_iter() {
        let x = unvec(&col.into_owned(), d2);
        cover += &x * x.adjoint() + x.adjoint() * &x;
    }
    let (weights, vecs) = hermitian_eigen(&cover);
    let top = weights.last().copied().unwrap_or(0.0);
    let support: Vec<usize> = (0..d2).filter(|&i| weights[i] > 1e-9 * top.max(1.0)).collect();
    let mut basis = CMatrix::zeros(d2, support.len());
    for (dst, &src) in support.iter().enumerate() {
        basis.set_column(dst, &vecs.column(src));
    }

    let s = k.spin();
    let label = pair_spin_sq(s) + pair_sz(s) * c(PI / 10.0);
    let (levels, local) = hermitian_eigen(&(basis.adjoint() * label * &basis));
    let candidates = &basis * local;

    let mut found = Vec::new();
    let mut start = 0;
    while start < levels.len() {
        let mut end = start + 1;
        while end < levels.len() && (levels[end] - levels[start]).abs() < 1e-9 {
            end += 1;
        }
        let mut any = false;
        for i in start..end {
            let v: CVector = candidates.column(i).into_owned();
            let p = &v * v.adjoint();
            if is_fixed(&p, k, rho_e) {
                found.push(DensityMatrix::from_matrix_unchecked(p));
                any = true;
            }
        }
        if !any && end - start > 1 {
            let block = candidates.columns(start, end - start);
            let p = block * block.adjoint() / c((end - start) as f64);
            if is_fixed(&p, k, rho_e) {
                found.push(DensityMatrix::from_matrix_unchecked(p));
            }
        }
        start = end;
    }
    if found.is_empty() && !support.is_empty() {
        let p = &basis * basis.adjoint() / c(support.len() as f64);
        if is_fixed(&p, k, rho_e) {
            found.push(DensityMatrix::from_matrix_unchecked(p));
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, kron, projector};
    use crate::scattering::{solve, Model, ScatterParams};
    use crate::spin::{pair_singlet, partial_trace_mediator_matrix, BasisIndex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const HALF: SpinQuantum = SpinQuantum::HALF;

    fn kraus(model: Model, g: f64, q: u32, s: SpinQuantum) -> (AmplitudeTable, KrausFamily) {
        let table = solve(&ScatterParams::resonant(model, g, q, s).unwrap()).unwrap();
        let k = extract_kraus(&table, s).unwrap();
        (table, k)
    }

    fn pair_basis(m1: usize, m2: usize) -> DensityMatrix {
        DensityMatrix::basis(4, BasisIndex::new(MediatorSpin::Down, m1, m2).pair_flat(HALF))
    }

    fn up_down() -> DensityMatrix {
        pair_basis(1, 0)
    }

    fn singlet(s: SpinQuantum) -> DensityMatrix {
        DensityMatrix::pure(&pair_singlet(s)).unwrap()
    }

    fn random_mediator(rng: &mut ChaCha8Rng) -> MediatorState {
        let a = c(rng.random_range(-1.0..1.0)) + crate::linalg::I * rng.random_range(-1.0..1.0);
        let b = c(rng.random_range(-1.0..1.0)) + crate::linalg::I * rng.random_range(-1.0..1.0);
        let v = CVector::from_vec(vec![a, b]);
        let mix = rng.random_range(0.0..1.0);
        let m = projector(&(&v / c(v.norm()))) * c(mix) + identity(2) * c((1.0 - mix) / 2.0);
        MediatorState::new(DensityMatrix::new(m).unwrap()).unwrap()
    }

    /// Scatter the joint state with the full tables, then trace the mediator.
    fn brute_force(table: &AmplitudeTable, rho12: &DensityMatrix, rho_e: &MediatorState) -> (CMatrix, CMatrix) {
        let joint = kron(rho_e.matrix(), rho12.matrix());
        let t = &table.t * &joint * table.t.adjoint();
        let r = &table.r * &joint * table.r.adjoint();
        (partial_trace_mediator_matrix(&t), partial_trace_mediator_matrix(&r))
    }

    #[test]
    fn free_kraus_is_trivial() {
        let table = solve(&ScatterParams::new(Model::Exchange, 0.0, 1.3, HALF).unwrap()).unwrap();
        let k = extract_kraus(&table, HALF).unwrap();
        for out in 0..2 {
            for inc in 0..2 {
                let expected = if out == inc { identity(4) } else { CMatrix::zeros(4, 4) };
                assert!(frobenius(&(&k.t[out][inc] - expected)) < 1e-12);
                assert!(frobenius(&k.r[out][inc]) < 1e-12);
            }
        }
    }

    #[test]
    fn extract_rejects_wrong_spin() {
        let table = solve(&ScatterParams::resonant(Model::Exchange, 1.0, 1, HALF).unwrap()).unwrap();
        assert!(extract_kraus(&table, SpinQuantum::new(2).unwrap()).is_err());
    }

    #[test]
    fn exchange_kraus_respect_singlet_sector() {
        let (_, k) = kraus(Model::Exchange, 2.3, 1, HALF);
        let ps = projector(&pair_singlet(HALF));
        let perp = identity(4) - &ps;
        for row in k.t.iter().chain(k.r.iter()) {
            for op in row {
                assert!(frobenius(&(&ps * op * &perp)) < 1e-12);
                assert!(frobenius(&(&perp * op * &ps)) < 1e-12);
            }
        }
    }

    #[test]
    fn completeness_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let model = if rng.random_bool(0.5) { Model::Raman } else { Model::Exchange };
            let p = ScatterParams::new(model, rng.random_range(0.0..8.0), rng.random_range(0.1..9.0), HALF).unwrap();
            let k = extract_kraus(&solve(&p).unwrap(), HALF).unwrap();
            for a in MediatorSpin::ALL {
                for b in MediatorSpin::ALL {
                    let expected = if a == b { identity(4) } else { CMatrix::zeros(4, 4) };
                    assert!((k.completeness(a, b) - expected).camax() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn free_steps_leave_state_alone() {
        let table = solve(&ScatterParams::new(Model::Raman, 0.0, 2.0, HALF).unwrap()).unwrap();
        let k = extract_kraus(&table, HALF).unwrap();
        let rho = up_down();
        let rho_e = MediatorState::polarized(0.3).unwrap();
        let out = unconditioned_step(&rho, &rho_e, &k).unwrap();
        assert!(frobenius(&(out.matrix() - rho.matrix())) < 1e-12);
        let t = transmit_step(&rho, &rho_e, &k).unwrap();
        assert!((t.probability - 1.0).abs() < 1e-12);
        assert!(frobenius(&(t.unnormalized - rho.matrix())) < 1e-12);
    }

    #[test]
    fn singlet_unchanged_any_mediator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in [Model::Exchange, Model::Raman] {
            for _ in 0..5 {
                let g = rng.random_range(0.1..10.0);
                let (_, k) = kraus(model, g, rng.random_range(1..=3), HALF);
                let rho_e = random_mediator(&mut rng);
                let s = singlet(HALF);
                let out = unconditioned_step(&s, &rho_e, &k).unwrap();
                assert!(frobenius(&(out.matrix() - s.matrix())) < 1e-12);
                let t = transmit_step(&s, &rho_e, &k).unwrap();
                assert!((t.probability - 1.0).abs() < 1e-12);
                assert!(frobenius(&(t.unnormalized - s.matrix())) < 1e-12);
            }
        }
    }

    #[test]
    fn unconditioned_up_down_raises_fidelity() {
        let (table, k) = kraus(Model::Exchange, 1.0, 1, HALF);
        let rho = up_down();
        let rho_e = MediatorState::unpolarized();
        let out = unconditioned_step(&rho, &rho_e, &k).unwrap();
        assert!((out.trace() - c(1.0)).norm() < 1e-12);
        assert!(out.min_eigenvalue() > -1e-12);
        let (bt, br) = brute_force(&table, &rho, &rho_e);
        assert!(frobenius(&(out.matrix() - (bt + br))) < 1e-12);
        // fidelity of the transmitted branch rises above the initial 1/2
        let t = transmit_step(&rho, &rho_e, &k).unwrap();
        let f = fidelity_with_singlet(&t.normalized().unwrap()).unwrap();
        assert!(f > 0.5, "{f}");
    }

    #[test]
    fn kraus_matches_brute_force_with_coherent_mediators() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for model in [Model::Exchange, Model::Raman] {
            let p = ScatterParams::new(model, 1.9, 2.4, HALF).unwrap();
            let table = solve(&p).unwrap();
            let k = extract_kraus(&table, HALF).unwrap();
            let rho_e = random_mediator(&mut rng);
            let rho = DensityMatrix::pure(&CVector::from_vec(vec![c(0.1), c(0.7), crate::linalg::I * 0.4, c(-0.2)])).unwrap();
            let (bt, br) = brute_force(&table, &rho, &rho_e);
            let t = transmit_step(&rho, &rho_e, &k).unwrap();
            assert!(frobenius(&(&t.unnormalized - &bt)) < 1e-12);
            let u = unconditioned_step(&rho, &rho_e, &k).unwrap();
            assert!(frobenius(&(u.matrix() - (bt + br))) < 1e-12);
        }
    }

    #[test]
    fn raman_up_up_transparent_for_up_mediators() {
        let (_, k) = kraus(Model::Raman, 1.5, 1, HALF);
        let rho = pair_basis(1, 1);
        let t = transmit_step(&rho, &MediatorState::pure(MediatorSpin::Up), &k).unwrap();
        assert!((t.probability - 1.0).abs() < 1e-12);
        assert!(frobenius(&(t.unnormalized - rho.matrix())) < 1e-12);
    }

    #[test]
    fn anchor_points() {
        let rho_e = MediatorState::unpolarized();
        let (_, k) = kraus(Model::Exchange, 1.6, 1, HALF);
        let rec = iterate(&up_down(), &rho_e, &k, 5).unwrap();
        assert!(rec[4].fidelity > 0.95 && rec[4].probability > 0.5, "{:?}", (rec[4].fidelity, rec[4].probability));

        let (_, k) = kraus(Model::Exchange, 7.5, 1, HALF);
        let rec = iterate(&up_down(), &rho_e, &k, 1).unwrap();
        assert!(rec[0].fidelity > 0.95 && rec[0].probability > 0.5);
    }

    #[test]
    fn joint_probability_matches_unnormalized_trace() {
        let (_, k) = kraus(Model::Raman, 0.9, 2, HALF);
        let rho_e = MediatorState::polarized(0.4).unwrap();
        let rec = iterate(&up_down(), &rho_e, &k, 8).unwrap();
        for r in &rec {
            let w = transmitted_weight(&up_down(), &rho_e, &k, r.step).unwrap();
            assert!((w - r.probability).abs() < 1e-12);
        }
        for pair in rec.windows(2) {
            assert!(pair[1].probability <= pair[0].probability + 1e-15);
        }
    }

    #[test]
    fn convergence_to_singlet() {
        let rho_e = MediatorState::unpolarized();
        // the slowest triplet channel transmits 1/(1 + g^2/4) per step, so
        // weak coupling needs many more mediators
        for (g, steps) in [(0.5, 150), (1.6, 50), (7.5, 50)] {
            let (_, k) = kraus(Model::Exchange, g, 1, HALF);
            let rec = iterate(&up_down(), &rho_e, &k, steps).unwrap();
            for w in rec.windows(2) {
                assert!(w[1].fidelity >= w[0].fidelity - 1e-12, "g={g}");
            }
            let last = &rec[steps - 1];
            assert!(last.fidelity > 1.0 - 1e-6, "g={g} F={}", last.fidelity);
            assert!((last.probability - 0.5).abs() < 1e-6, "g={g} P={}", last.probability);
        }
    }

    #[test]
    fn vanishing_probability_reported() {
        // no physical pair state is opaque to every channel, so zero T by hand
        let (_, mut k) = kraus(Model::Exchange, 1.0, 1, HALF);
        for row in k.t.iter_mut() {
            for op in row.iter_mut() {
                op.fill(c(0.0));
            }
        }
        let err = iterate(&up_down(), &MediatorState::unpolarized(), &k, 3).unwrap_err();
        assert!(matches!(err, SimError::VanishingProbability { step: 1, .. }));
        assert!(iterate(&up_down(), &MediatorState::unpolarized(), &k, 0).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (_, k) = kraus(Model::Exchange, 1.0, 1, HALF);
        let bad = DensityMatrix::maximally_mixed(9);
        let rho_e = MediatorState::unpolarized();
        assert!(transmit_step(&bad, &rho_e, &k).is_err());
        assert!(unconditioned_step(&bad, &rho_e, &k).is_err());
        assert!(MediatorState::polarized(1.5).is_err());
    }

    #[test]
    fn exchange_singlet_only_fixed_point() {
        for g in [0.3, 1.6, 7.5] {
            let (_, k) = kraus(Model::Exchange, g, 1, HALF);
            let fps = fixed_points(&k, &MediatorState::unpolarized());
            assert_eq!(fps.len(), 1, "g={g}");
            assert!((fidelity_with_singlet(&fps[0]).unwrap() - 1.0).abs() < 1e-9);
            assert_eq!(fixed_space_dim(&k, &MediatorState::unpolarized()), 1);
        }
    }

    #[test]
    fn raman_fixed_points_depend_on_polarization() {
        let (_, k) = kraus(Model::Raman, 1.5, 1, HALF);
        let fps = fixed_points(&k, &MediatorState::pure(MediatorSpin::Up));
        assert_eq!(fps.len(), 2);
        let upup = pair_basis(1, 1);
        assert!(fps.iter().any(|f| (fidelity_with_singlet(f).unwrap() - 1.0).abs() < 1e-9));
        assert!(fps.iter().any(|f| frobenius(&(f.matrix() - upup.matrix())) < 1e-9));

        for r in [0.0, 0.5, 0.99] {
            let fps = fixed_points(&k, &MediatorState::polarized(r).unwrap());
            assert_eq!(fps.len(), 1, "r={r}");
            assert!((fidelity_with_singlet(&fps[0]).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn free_map_fixes_everything() {
        let table = solve(&ScatterParams::new(Model::Exchange, 0.0, PI, HALF).unwrap()).unwrap();
        let k = extract_kraus(&table, HALF).unwrap();
        let rho_e = MediatorState::unpolarized();
        assert_eq!(fixed_space_dim(&k, &rho_e), 16);
        assert_eq!(fixed_points(&k, &rho_e).len(), 4);
    }

    #[test]
    fn exchange_first_step_ignores_mediator_state_but_later_steps_do_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (_, k) = kraus(Model::Exchange, 1.6, 1, HALF);
        let reference = iterate(&up_down(), &MediatorState::unpolarized(), &k, 3).unwrap();
        for _ in 0..10 {
            let recs = iterate(&up_down(), &random_mediator(&mut rng), &k, 1).unwrap();
            assert!((recs[0].fidelity - reference[0].fidelity).abs() < 1e-12);
            assert!((recs[0].probability - reference[0].probability).abs() < 1e-12);
        }
        // polarized mediators leave the pair with net Sz after one step, and the
        // J = 3/2 and J = 1/2 channels transmit it differently
        let up = iterate(&up_down(), &MediatorState::pure(MediatorSpin::Up), &k, 3).unwrap();
        let down = iterate(&up_down(), &MediatorState::pure(MediatorSpin::Down), &k, 3).unwrap();
        assert!((up[1].probability - reference[1].probability).abs() > 1e-3);
        assert!((up[2].probability - down[2].probability).abs() < 1e-12);
    }

    #[test]
    fn raman_polarization_trends() {
        let (_, k) = kraus(Model::Raman, 1.5, 1, HALF);
        let runs: Vec<Vec<IterationRecord>> = (0..=10)
            .map(|i| iterate(&up_down(), &MediatorState::polarized(i as f64 / 10.0).unwrap(), &k, 10).unwrap())
            .collect();
        for n in 0..10 {
            for w in runs.windows(2) {
                assert!(w[1][n].fidelity <= w[0][n].fidelity + 1e-12);
                // more weight survives as |up,up> becomes a second dark state
                assert!(w[1][n].probability >= w[0][n].probability - 1e-12);
            }
        }
        assert!((runs[10][4].fidelity - 0.8667).abs() < 1e-3);
        assert!((runs[10][4].probability - 0.5769).abs() < 1e-3);
    }
}
