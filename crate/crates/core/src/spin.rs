//! Spin operators for one spin-1/2 mediator and two static spin-s particles.
//!
//! The composite basis is fixed: flat index `m_e * d^2 + m1 * d + m2`, with
//! `m_e` = 0 for down and 1 for up, and static index `i` carrying the magnetic
//! number `m = i - s`. Every table and operator in the crate uses it.

use std::fmt;

use crate::density::DensityMatrix;
use crate::error::{Result, SimError};
use crate::linalg::{c, identity, kron, CMatrix, CVector, I};
#[cfg(test)]
use crate::linalg::kron_vec;

/// Spin quantum number stored as `2s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinQuantum {
    two_s: u32,
}

impl SpinQuantum {
    pub const HALF: SpinQuantum = SpinQuantum { two_s: 1 };

    pub fn new(two_s: u32) -> Result<Self> {
        if two_s == 0 {
            return Err(SimError::InvalidParameter(
                "static spin must satisfy 2s >= 1".into(),
            ));
        }
        Ok(Self { two_s })
    }

    /// Parses a spin value such as `0.5` or `2.5`.
    pub fn from_value(s: f64) -> Result<Self> {
        let doubled = 2.0 * s;
        if !doubled.is_finite() || (doubled - doubled.round()).abs() > 1e-9 || doubled < 0.5 {
            return Err(SimError::InvalidParameter(format!(
                "spin {s} is not a positive half-integer"
            )));
        }
        Self::new(doubled.round() as u32)
    }

    pub fn two_s(self) -> u32 {
        self.two_s
    }

    pub fn value(self) -> f64 {
        self.two_s as f64 / 2.0
    }

    /// Single-particle dimension `2s + 1`.
    pub fn dim(self) -> usize {
        self.two_s as usize + 1
    }

    pub fn pair_dim(self) -> usize {
        self.dim() * self.dim()
    }

    /// Dimension of the mediator + pair space.
    pub fn full_dim(self) -> usize {
        2 * self.pair_dim()
    }

    pub fn magnetic_number(self, index: usize) -> f64 {
        index as f64 - self.value()
    }
}

impl fmt::Display for SpinQuantum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.two_s.is_multiple_of(2) {
            write!(f, "{}", self.two_s / 2)
        } else {
            write!(f, "{}/2", self.two_s)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MediatorSpin {
    Down = 0,
    Up = 1,
}

impl MediatorSpin {
    pub const ALL: [MediatorSpin; 2] = [MediatorSpin::Down, MediatorSpin::Up];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Label `(m_e, m1, m2)` of a composite basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub m_e: MediatorSpin,
    pub m1: usize,
    pub m2: usize,
}

impl BasisIndex {
    pub fn new(m_e: MediatorSpin, m1: usize, m2: usize) -> Self {
        Self { m_e, m1, m2 }
    }

    pub fn flat(self, s: SpinQuantum) -> usize {
        let d = s.dim();
        debug_assert!(self.m1 < d && self.m2 < d);
        self.m_e.index() * d * d + self.m1 * d + self.m2
    }

    pub fn from_flat(flat: usize, s: SpinQuantum) -> Self {
        let d = s.dim();
        let m_e = if flat / (d * d) == 0 {
            MediatorSpin::Down
        } else {
            MediatorSpin::Up
        };
        let pair = flat % (d * d);
        Self::new(m_e, pair / d, pair % d)
    }

    pub fn pair_flat(self, s: SpinQuantum) -> usize {
        self.m1 * s.dim() + self.m2
    }
}

/// Raising operator `S+` in the ascending basis.
pub fn raising(s: SpinQuantum) -> CMatrix {
    let d = s.dim();
    let j = s.value();
    let mut plus = CMatrix::zeros(d, d);
    for i in 0..d - 1 {
        let m = s.magnetic_number(i);
        plus[(i + 1, i)] = c((j * (j + 1.0) - m * (m + 1.0)).sqrt());
    }
    plus
}

/// `(Sx, Sy, Sz)` for a single spin, basis ordered by ascending `m`.
pub fn spin_matrices(s: SpinQuantum) -> [CMatrix; 3] {
    let d = s.dim();
    let plus = raising(s);
    let minus = plus.adjoint();
    let sx = (&plus + &minus) * c(0.5);
    let sy = (&plus - &minus) * (-I * 0.5);
    let sz = CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            c(s.magnetic_number(i))
        } else {
            c(0.0)
        }
    });
    [sx, sy, sz]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Site {
    First,
    Second,
    Both,
}

/// Spin operators of the mediator and of both static spins, embedded in the
/// full `2 d^2` space.
#[derive(Clone, Debug)]
pub struct SpinOperatorSet {
    spin: SpinQuantum,
    pub sigma: [CMatrix; 3],
    pub s1: [CMatrix; 3],
    pub s2: [CMatrix; 3],
    pub s12: [CMatrix; 3],
}

impl SpinOperatorSet {
    pub fn new(spin: SpinQuantum) -> Self {
        let d = spin.dim();
        let id_e = identity(2);
        let id_d = identity(d);
        let half = spin_matrices(SpinQuantum::HALF);
        let single = spin_matrices(spin);
        let sigma = half
            .clone()
            .map(|op| kron(&op, &identity(d * d)));
        let s1 = single
            .clone()
            .map(|op| kron(&id_e, &kron(&op, &id_d)));
        let s2 = single.map(|op| kron(&id_e, &kron(&id_d, &op)));
        let s12 = [&s1[0] + &s2[0], &s1[1] + &s2[1], &s1[2] + &s2[2]];
        Self {
            spin,
            sigma,
            s1,
            s2,
            s12,
        }
    }

    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    pub fn dim(&self) -> usize {
        self.spin.full_dim()
    }

    fn site_ops(&self, site: Site) -> &[CMatrix; 3] {
        match site {
            Site::First => &self.s1,
            Site::Second => &self.s2,
            Site::Both => &self.s12,
        }
    }

    pub fn sigma_plus(&self) -> CMatrix {
        &self.sigma[0] + &self.sigma[1] * I
    }

    pub fn site_plus(&self, site: Site) -> CMatrix {
        let ops = self.site_ops(site);
        &ops[0] + &ops[1] * I
    }

    /// `S_n^2` of mediator plus pair.
    pub fn total_spin_sq(&self) -> CMatrix {
        (0..3)
            .map(|k| {
                let t = &self.sigma[k] + &self.s12[k];
                &t * &t
            })
            .fold(CMatrix::zeros(self.dim(), self.dim()), |acc, m| acc + m)
    }

    pub fn pair_spin_sq(&self) -> CMatrix {
        (0..3)
            .map(|k| &self.s12[k] * &self.s12[k])
            .fold(CMatrix::zeros(self.dim(), self.dim()), |acc, m| acc + m)
    }

    pub fn mediator_spin_sq(&self) -> CMatrix {
        (0..3)
            .map(|k| &self.sigma[k] * &self.sigma[k])
            .fold(CMatrix::zeros(self.dim(), self.dim()), |acc, m| acc + m)
    }

    pub fn total_sz(&self) -> CMatrix {
        &self.sigma[2] + &self.s12[2]
    }
}

/// `sigma . S_site` (dimensionless).
pub fn exchange_coupling(ops: &SpinOperatorSet, which: Site) -> CMatrix {
    let site = ops.site_ops(which);
    (0..3)
        .map(|k| &ops.sigma[k] * &site[k])
        .fold(CMatrix::zeros(ops.dim(), ops.dim()), |acc, m| acc + m)
}

/// Flip-flop operator `sigma- S+_site + sigma+ S-_site`.
pub fn flipflop_site(ops: &SpinOperatorSet, which: Site) -> CMatrix {
    let sp = ops.sigma_plus();
    let tp = ops.site_plus(which);
    let term = sp.adjoint() * tp;
    &term + term.adjoint()
}

/// Flip-flop operator coupling the mediator to the total pair spin.
pub fn flipflop_coupling(ops: &SpinOperatorSet) -> CMatrix {
    flipflop_site(ops, Site::Both)
}

/// Total-spin-zero state of the pair: coefficient `(-1)^(s-m) / sqrt(2s+1)`
/// on `|m, -m>`.
pub fn pair_singlet(s: SpinQuantum) -> CVector {
    let d = s.dim();
    let norm = (d as f64).sqrt().recip();
    let mut v = CVector::zeros(d * d);
    for i in 0..d {
        let partner = d - 1 - i;
        let sign = if (s.two_s() as usize - i).is_multiple_of(2) { 1.0 } else { -1.0 };
        v[i * d + partner] = c(sign * norm);
    }
    v
}

/// `S12^2` on the pair space alone.
pub fn pair_spin_sq(s: SpinQuantum) -> CMatrix {
    let d = s.dim();
    let single = spin_matrices(s);
    let id = identity(d);
    (0..3)
        .map(|k| {
            let t = kron(&single[k], &id) + kron(&id, &single[k]);
            &t * &t
        })
        .fold(CMatrix::zeros(d * d, d * d), |acc, m| acc + m)
}

/// Pair-space `S1z + S2z`.
pub fn pair_sz(s: SpinQuantum) -> CMatrix {
    let d = s.dim();
    let single = spin_matrices(s);
    let id = identity(d);
    kron(&single[2], &id) + kron(&id, &single[2])
}

pub(crate) fn partial_trace_mediator_matrix(rho: &CMatrix) -> CMatrix {
    let half = rho.nrows() / 2;
    rho.view((0, 0), (half, half)) + rho.view((half, half), (half, half))
}

/// Traces the mediator out of a joint state.
pub fn partial_trace_mediator(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let n = rho.dim();
    let half = n / 2;
    let d = (half as f64).sqrt().round() as usize;
    if !n.is_multiple_of(2) || d * d != half || d < 2 {
        return Err(SimError::DimensionMismatch {
            expected: 2 * (d.max(2)).pow(2),
            got: n,
        });
    }
    Ok(DensityMatrix::from_matrix_unchecked(
        partial_trace_mediator_matrix(rho.matrix()),
    ))
}

/// Spin quantum number whose pair space has dimension `dim`.
pub fn spin_for_pair_dim(dim: usize) -> Result<SpinQuantum> {
    let d = (dim as f64).sqrt().round() as usize;
    if d < 2 || d * d != dim {
        return Err(SimError::DimensionMismatch {
            expected: d.max(2).pow(2),
            got: dim,
        });
    }
    SpinQuantum::new(d as u32 - 1)
}

/// `<Psi-|rho12|Psi->`.
pub fn fidelity_with_singlet(rho12: &DensityMatrix) -> Result<f64> {
    let s = spin_for_pair_dim(rho12.dim())?;
    Ok(rho12.expectation(&pair_singlet(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, frobenius, hermitian_eigen, hermiticity_defect, projector, trace};

    fn spins() -> Vec<SpinQuantum> {
        (1..=5).map(|k| SpinQuantum::new(k).unwrap()).collect()
    }

    fn assert_spectrum(m: &CMatrix, expected: &[f64]) {
        let (vals, _) = hermitian_eigen(m);
        let mut exp = expected.to_vec();
        exp.sort_by(f64::total_cmp);
        assert_eq!(vals.len(), exp.len());
        for (a, b) in vals.iter().zip(&exp) {
            assert!((a - b).abs() < 1e-12, "{vals:?} vs {exp:?}");
        }
    }

    #[test]
    fn zero_spin_rejected() {
        assert!(SpinQuantum::new(0).is_err());
        assert!(SpinQuantum::from_value(0.75).is_err());
        assert_eq!(SpinQuantum::from_value(2.5).unwrap().two_s(), 5);
    }

    #[test]
    fn half_spin_matrices() {
        let [sx, _, sz] = spin_matrices(SpinQuantum::HALF);
        // ascending order: index 0 is m = -1/2
        assert_eq!(sz[(0, 0)], c(-0.5));
        assert_eq!(sz[(1, 1)], c(0.5));
        assert_spectrum(&sx, &[-0.5, 0.5]);
    }

    #[test]
    fn trace_sz_squared_spin_five_halves() {
        let [_, _, sz] = spin_matrices(SpinQuantum::new(5).unwrap());
        assert!((trace(&(&sz * &sz)).re - 17.5).abs() < 1e-12);
    }

    #[test]
    fn angular_momentum_algebra() {
        for s in spins() {
            let ops = SpinOperatorSet::new(s);
            for set in [&ops.sigma, &ops.s1, &ops.s2] {
                for k in 0..3 {
                    assert!(hermiticity_defect(&set[k]) < 1e-14);
                    let (a, b, cc) = (k, (k + 1) % 3, (k + 2) % 3);
                    let lhs = commutator(&set[a], &set[b]);
                    assert!(frobenius(&(lhs - &set[cc] * I)) < 1e-12, "s={s}");
                }
            }
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(frobenius(&commutator(&ops.sigma[a], &ops.s1[b])), 0.0);
                    assert_eq!(frobenius(&commutator(&ops.s1[a], &ops.s2[b])), 0.0);
                    assert_eq!(frobenius(&commutator(&ops.sigma[a], &ops.s2[b])), 0.0);
                }
            }
        }
    }

    #[test]
    fn exchange_spectra_spin_half() {
        let ops = SpinOperatorSet::new(SpinQuantum::HALF);
        assert_spectrum(
            &exchange_coupling(&ops, Site::First),
            &[-0.75, -0.75, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25],
        );
        assert_spectrum(
            &exchange_coupling(&ops, Site::Both),
            &[-1.0, -1.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5],
        );
    }

    #[test]
    fn exchange_both_matches_total_spin_form() {
        for s in spins() {
            let ops = SpinOperatorSet::new(s);
            let lhs = exchange_coupling(&ops, Site::Both);
            let rhs = (ops.total_spin_sq() - ops.mediator_spin_sq() - ops.pair_spin_sq()) * c(0.5);
            assert!(frobenius(&(lhs - rhs)) < 1e-12);
        }
    }

    #[test]
    fn couplings_conserve_symmetries() {
        for s in spins() {
            let ops = SpinOperatorSet::new(s);
            let ex = exchange_coupling(&ops, Site::Both);
            for q in [ops.total_spin_sq(), ops.total_sz(), ops.pair_spin_sq()] {
                assert!(frobenius(&commutator(&ex, &q)) < 1e-12);
            }
            let ff = flipflop_coupling(&ops);
            assert!(hermiticity_defect(&ff) < 1e-14);
            assert!(frobenius(&commutator(&ff, &ops.total_sz())) < 1e-12);
        }
    }

    #[test]
    fn flipflop_spectrum_spin_half() {
        let ops = SpinOperatorSet::new(SpinQuantum::HALF);
        let r2 = 2f64.sqrt();
        assert_spectrum(
            &flipflop_coupling(&ops),
            &[-r2, -r2, 0.0, 0.0, 0.0, 0.0, r2, r2],
        );
    }

    #[test]
    fn flipflop_dark_states() {
        let s = SpinQuantum::HALF;
        let ops = SpinOperatorSet::new(s);
        let q = flipflop_coupling(&ops);
        for (me, m) in [(MediatorSpin::Up, 1), (MediatorSpin::Down, 0)] {
            let mut v = CVector::zeros(8);
            v[BasisIndex::new(me, m, m).flat(s)] = c(1.0);
            assert!((&q * v).norm() < 1e-15);
        }
        let chi = CVector::from_vec(vec![c(0.3) + I * 0.2, c(-0.7)]);
        let state = kron_vec(&chi, &pair_singlet(s));
        assert!((&q * state).norm() < 1e-14);
    }

    #[test]
    fn singlet_annihilated_by_couplings() {
        for s in spins() {
            let ops = SpinOperatorSet::new(s);
            let chi = CVector::from_vec(vec![c(0.6), I * 0.8]);
            let state = kron_vec(&chi, &pair_singlet(s));
            assert!((exchange_coupling(&ops, Site::Both) * &state).norm() < 1e-12);
            assert!((flipflop_coupling(&ops) * &state).norm() < 1e-12);
        }
    }

    #[test]
    fn singlet_spin_half_convention() {
        let v = pair_singlet(SpinQuantum::HALF);
        let h = 0.5f64.sqrt();
        // |up,down> is flat 2, |down,up> is flat 1
        assert!((v[2] - c(h)).norm() < 1e-15);
        assert!((v[1] + c(h)).norm() < 1e-15);
        assert_eq!(v[0], c(0.0));
        assert_eq!(v[3], c(0.0));
    }

    #[test]
    fn singlet_is_unique_null_vector() {
        for s in spins() {
            let sq = pair_spin_sq(s);
            let v = pair_singlet(s);
            assert!((v.norm() - 1.0).abs() < 1e-14);
            assert!((&sq * &v).norm() < 1e-12);
            let (vals, vecs) = hermitian_eigen(&sq);
            assert!(vals[0].abs() < 1e-12 && vals[1] > 0.5);
            let overlap = (vecs.column(0).adjoint() * &v)[(0, 0)].norm();
            assert!((overlap - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singlet_spin_one_formula() {
        // sum_m (-1)^(1-m) |m,-m> / sqrt(3), via the null space of S12^2
        let s = SpinQuantum::new(2).unwrap();
        let v = pair_singlet(s);
        let r3 = 3f64.sqrt().recip();
        assert!((v[BasisIndex::new(MediatorSpin::Down, 2, 0).pair_flat(s)] - c(r3)).norm() < 1e-15);
        assert!((v[BasisIndex::new(MediatorSpin::Down, 1, 1).pair_flat(s)] + c(r3)).norm() < 1e-15);
        assert!((v[BasisIndex::new(MediatorSpin::Down, 0, 2).pair_flat(s)] - c(r3)).norm() < 1e-15);
        let ns = crate::linalg::null_space(&pair_spin_sq(s), 1e-9);
        assert_eq!(ns.ncols(), 1);
        assert!(((ns.column(0).adjoint() * &v)[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product() {
        let s = SpinQuantum::HALF;
        let rho_e = DensityMatrix::pure(&CVector::from_vec(vec![c(1.0), I])).unwrap();
        let rho12 = DensityMatrix::pure(&pair_singlet(s)).unwrap();
        let out = partial_trace_mediator(&rho_e.tensor(&rho12)).unwrap();
        assert!(frobenius(&(out.matrix() - rho12.matrix())) < 1e-15);

        let mixed = partial_trace_mediator(&DensityMatrix::maximally_mixed(18)).unwrap();
        assert!(frobenius(&(mixed.matrix() - DensityMatrix::maximally_mixed(9).matrix())) < 1e-15);
    }

    #[test]
    fn partial_trace_bell_mediator_and_first_spin() {
        let s = SpinQuantum::HALF;
        let h = 0.5f64.sqrt();
        // (|down,down,up> + |up,up,up>)/sqrt(2)
        let mut v = CVector::zeros(8);
        v[BasisIndex::new(MediatorSpin::Down, 0, 1).flat(s)] = c(h);
        v[BasisIndex::new(MediatorSpin::Up, 1, 1).flat(s)] = c(h);
        let out = partial_trace_mediator(&DensityMatrix::pure(&v).unwrap()).unwrap();
        let up = CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]);
        let expected = kron(&(identity(2) * c(0.5)), &up);
        assert!(frobenius(&(out.matrix() - expected)) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_dim() {
        assert!(partial_trace_mediator(&DensityMatrix::maximally_mixed(6)).is_err());
        assert!(fidelity_with_singlet(&DensityMatrix::maximally_mixed(8)).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let s = SpinQuantum::HALF;
        let singlet = DensityMatrix::pure(&pair_singlet(s)).unwrap();
        assert!((fidelity_with_singlet(&singlet).unwrap() - 1.0).abs() < 1e-15);
        let updown = DensityMatrix::basis(4, BasisIndex::new(MediatorSpin::Down, 1, 0).pair_flat(s));
        assert!((fidelity_with_singlet(&updown).unwrap() - 0.5).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!((fidelity_with_singlet(&mixed).unwrap() - 0.25).abs() < 1e-15);
        let _ = projector(&pair_singlet(s));
    }
}
