//! Stationary multichannel scattering of one mediator off two point
//! scatterers at `x = 0` and `x = x0`.
//!
//! Positions are measured in units of `1/k`, so the second site sits at
//! `x = theta = k x0` and only `g` and `theta` enter. Amplitudes are reported
//! relative to free propagation: with no coupling `t = 1` and `r = 0`.
//!
//! In each region the spinor is
//!
//! ```text
//! I   (x < 0):       e^{ix} delta + r e^{-ix}
//! II  (0 < x < x0):  A e^{ix}     + B e^{-ix}
//! III (x > x0):      t e^{ix}
//! ```
//!
//! with one column of `r, A, B, t` per incoming spin channel.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::linalg::{c, hermitian_eigen, identity, CMatrix, CVector, I};
use crate::spin::{
    exchange_coupling, flipflop_coupling, flipflop_site, BasisIndex, Site, SpinOperatorSet,
    SpinQuantum,
};

/// Matching systems with a larger 1-norm condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    /// Heisenberg contact coupling with quadratic dispersion.
    Exchange,
    /// Polarization flip-flop coupling with linear dispersion.
    Raman,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Exchange => "exchange",
            Model::Raman => "raman",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "exchange" => Ok(Model::Exchange),
            "raman" => Ok(Model::Raman),
            other => Err(SimError::InvalidParameter(format!(
                "unknown model '{other}' (expected exchange or raman)"
            ))),
        }
    }

    /// Per-site internal coupling operators `(site 1, site 2)`.
    pub fn site_couplings(self, ops: &SpinOperatorSet) -> (CMatrix, CMatrix) {
        match self {
            Model::Exchange => (
                exchange_coupling(ops, Site::First),
                exchange_coupling(ops, Site::Second),
            ),
            Model::Raman => (flipflop_site(ops, Site::First), flipflop_site(ops, Site::Second)),
        }
    }

    /// The coupling operator of the merged scatterer at resonance.
    pub fn merged_coupling(self, ops: &SpinOperatorSet) -> CMatrix {
        match self {
            Model::Exchange => exchange_coupling(ops, Site::Both),
            Model::Raman => flipflop_coupling(ops),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterParams {
    pub model: Model,
    /// Dimensionless coupling `J/v`.
    pub g: f64,
    /// Dimensionless spacing `k x0`.
    pub theta: f64,
    pub spin: SpinQuantum,
}

impl ScatterParams {
    pub fn new(model: Model, g: f64, theta: f64, spin: SpinQuantum) -> Result<Self> {
        if !g.is_finite() || g < 0.0 {
            return Err(SimError::InvalidParameter(format!("coupling g = {g} must be finite and >= 0")));
        }
        if !theta.is_finite() || theta <= 0.0 {
            return Err(SimError::InvalidParameter(format!("theta = {theta} must be finite and > 0")));
        }
        Ok(Self {
            model,
            g,
            theta,
            spin,
        })
    }

    /// Parameters at the resonance condition `k x0 = q pi`.
    pub fn resonant(model: Model, g: f64, q: u32, spin: SpinQuantum) -> Result<Self> {
        if q == 0 {
            return Err(SimError::InvalidParameter("resonance order q must be >= 1".into()));
        }
        Self::new(model, g, q as f64 * PI, spin)
    }

    /// `Some(q)` when `theta = q pi` to 1e-9 relative.
    pub fn resonance_order(&self) -> Option<u32> {
        let q = (self.theta / PI).round();
        if q >= 1.0 && (self.theta - q * PI).abs() <= 1e-9 * self.theta {
            Some(q as u32)
        } else {
            None
        }
    }
}

/// Interior coefficients of region II.
#[derive(Clone, Debug)]
pub struct Interior {
    pub a: CMatrix,
    pub b: CMatrix,
}

/// Transmission and reflection amplitudes; column = incoming channel,
/// row = outgoing channel.
#[derive(Clone, Debug)]
pub struct AmplitudeTable {
    pub t: CMatrix,
    pub r: CMatrix,
    /// Absent for the merged-scatterer oracle.
    pub interior: Option<Interior>,
}

impl AmplitudeTable {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Largest `|sum_nu |t|^2 + |r|^2 - 1|` over incoming channels.
    pub fn flux_defect(&self) -> f64 {
        (0..self.dim())
            .map(|col| {
                let total: f64 = self
                    .t
                    .column(col)
                    .iter()
                    .chain(self.r.column(col).iter())
                    .map(|z| z.norm_sqr())
                    .sum();
                (total - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Probability that a mediator entering in `channel` is transmitted.
    pub fn transmission_probability(&self, channel: usize) -> f64 {
        self.t.column(channel).iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Dispatches on `p.model`.
pub fn solve(p: &ScatterParams) -> Result<AmplitudeTable> {
    match p.model {
        Model::Exchange => solve_exchange(p),
        Model::Raman => solve_raman(p),
    }
}

struct Blocks {
    n: usize,
    lhs: CMatrix,
    rhs: CMatrix,
}

impl Blocks {
    fn new(n: usize) -> Self {
        Self {
            n,
            lhs: CMatrix::zeros(4 * n, 4 * n),
            rhs: CMatrix::zeros(4 * n, n),
        }
    }

    fn set(&mut self, eq: usize, unknown: usize, block: &CMatrix) {
        let n = self.n;
        self.lhs.view_mut((eq * n, unknown * n), (n, n)).copy_from(block);
    }

    fn set_rhs(&mut self, eq: usize, block: &CMatrix) {
        let n = self.n;
        self.rhs.view_mut((eq * n, 0), (n, n)).copy_from(block);
    }

    /// Unknown order is `r, A, B, t`.
    fn solve(self) -> Result<AmplitudeTable> {
        let n = self.n;
        let norm = one_norm(&self.lhs);
        let inverse = self
            .lhs
            .try_inverse()
            .ok_or(SimError::SingularSystem { condition: f64::INFINITY })?;
        let condition = norm * one_norm(&inverse);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(SimError::SingularSystem { condition });
        }
        let x = inverse * self.rhs;
        let block = |k: usize| x.view((k * n, 0), (n, n)).into_owned();
        Ok(AmplitudeTable {
            r: block(0),
            interior: Some(Interior {
                a: block(1),
                b: block(2),
            }),
            t: block(3),
        })
    }
}

fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Exchange model: continuity at both sites and derivative jumps
/// `psi'(x+) - psi'(x-) = 2 g V_site psi(x_site)`.
pub fn solve_exchange(p: &ScatterParams) -> Result<AmplitudeTable> {
    if p.model != Model::Exchange {
        return Err(SimError::WrongModel { expected: "exchange" });
    }
    let ops = SpinOperatorSet::new(p.spin);
    let (v1, v2) = p.model.site_couplings(&ops);
    let n = ops.dim();
    let id = identity(n);
    let e = Complex64::from_polar(1.0, p.theta);
    let eb = e.conj();
    let two_g = c(2.0 * p.g);

    let mut sys = Blocks::new(n);
    // continuity at 0: 1 + r = A + B
    sys.set(0, 0, &id);
    sys.set(0, 1, &(-&id));
    sys.set(0, 2, &(-&id));
    sys.set_rhs(0, &(-&id));
    // jump at 0: i(A - B) - i(1 - r) = 2g V1 (A + B)
    let gv1 = &v1 * two_g;
    sys.set(1, 0, &(&id * I));
    sys.set(1, 1, &(&id * I - &gv1));
    sys.set(1, 2, &(-&id * I - &gv1));
    sys.set_rhs(1, &(&id * I));
    // continuity at x0: A e + B e* = t e
    sys.set(2, 1, &(&id * e));
    sys.set(2, 2, &(&id * eb));
    sys.set(2, 3, &(-&id * e));
    // jump at x0: i t e - i(A e - B e*) = 2g V2 t e
    sys.set(3, 1, &(-&id * (I * e)));
    sys.set(3, 2, &(&id * (I * eb)));
    sys.set(3, 3, &((&id * I - &v2 * two_g) * e));
    sys.solve()
}

/// Raman model: right and left movers with linear dispersion; at each site
/// `psi_R(+) - psi_R(-) = -i g Q Phi` and `psi_L(+) - psi_L(-) = +i g Q Phi`,
/// where `Phi` is the half-sum of the total field on both sides.
pub fn solve_raman(p: &ScatterParams) -> Result<AmplitudeTable> {
    if p.model != Model::Raman {
        return Err(SimError::WrongModel { expected: "raman" });
    }
    let ops = SpinOperatorSet::new(p.spin);
    let (q1, q2) = p.model.site_couplings(&ops);
    let n = ops.dim();
    let id = identity(n);
    let e = Complex64::from_polar(1.0, p.theta);
    let eb = e.conj();
    let h1 = &q1 * (I * (0.5 * p.g));
    let h2 = &q2 * (I * (0.5 * p.g));

    let mut sys = Blocks::new(n);
    // site 0, right movers: A - 1 + i g Q1 (1 + r + A + B)/2 = 0
    sys.set(0, 0, &h1);
    sys.set(0, 1, &(&id + &h1));
    sys.set(0, 2, &h1);
    sys.set_rhs(0, &(&id - &h1));
    // site 0, left movers: B - r - i g Q1 (1 + r + A + B)/2 = 0
    sys.set(1, 0, &(-&id - &h1));
    sys.set(1, 1, &(-&h1));
    sys.set(1, 2, &(&id - &h1));
    sys.set_rhs(1, &h1);
    // site x0, right movers: (t - A) e + i g Q2 (A e + B e* + t e)/2 = 0
    sys.set(2, 1, &((-&id + &h2) * e));
    sys.set(2, 2, &(&h2 * eb));
    sys.set(2, 3, &((&id + &h2) * e));
    // site x0, left movers: -B e* - i g Q2 (A e + B e* + t e)/2 = 0
    sys.set(3, 1, &(-&h2 * e));
    sys.set(3, 2, &((-&id - &h2) * eb));
    sys.set(3, 3, &(-&h2 * e));
    sys.solve()
}

/// Merged point scatterer: in each eigenchannel of `coupling` with eigenvalue
/// `kappa`, `t = 1/(1 + i g kappa)` and `r = -i g kappa/(1 + i g kappa)`.
pub fn rc_oracle(coupling: &CMatrix, g: f64) -> AmplitudeTable {
    let (values, vectors) = hermitian_eigen(coupling);
    let channel = |f: &dyn Fn(Complex64) -> Complex64| {
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(
            values.len(),
            values.iter().map(|&kappa| f(I * (g * kappa))),
        ));
        &vectors * diag * vectors.adjoint()
    };
    AmplitudeTable {
        t: channel(&|igk| (c(1.0) + igk).inv()),
        r: channel(&|igk| -igk / (c(1.0) + igk)),
        interior: None,
    }
}

/// Evaluates the stationary spinor for incoming channel `mu_in` at `x`
/// (units of `1/k`). Exactly at a site the two one-sided limits are averaged;
/// they coincide for the exchange model.
pub fn stationary_wavefunction(
    p: &ScatterParams,
    table: &AmplitudeTable,
    mu_in: BasisIndex,
    x: f64,
) -> Result<CVector> {
    let n = table.dim();
    if n != p.spin.full_dim() {
        return Err(SimError::DimensionMismatch {
            expected: p.spin.full_dim(),
            got: n,
        });
    }
    let interior = table.interior.as_ref().ok_or_else(|| {
        SimError::InvalidParameter("amplitude table carries no interior coefficients".into())
    })?;
    let col = mu_in.flat(p.spin);
    let fwd = Complex64::from_polar(1.0, x);
    let bwd = fwd.conj();

    let left = || {
        let mut v: CVector = table.r.column(col) * bwd;
        v[col] += fwd;
        v
    };
    let middle = || interior.a.column(col) * fwd + interior.b.column(col) * bwd;
    let right = || table.t.column(col) * fwd;

    let v = if x < 0.0 {
        left()
    } else if x == 0.0 {
        (left() + middle()) * c(0.5)
    } else if x < p.theta {
        middle()
    } else if x == p.theta {
        (middle() + right()) * c(0.5)
    } else {
        right()
    };
    Ok(v)
}

/// Matrix of `delta(x - x')` between stationary states:
/// `M[mu'', mu'] = sum_mu conj(Psi^{mu''}_mu(x')) Psi^{mu'}_mu(x')`.
pub fn delta_overlap_matrix(p: &ScatterParams, table: &AmplitudeTable, x: f64) -> Result<CMatrix> {
    let n = table.dim();
    let mut w = CMatrix::zeros(n, n);
    for col in 0..n {
        let psi = stationary_wavefunction(p, table, BasisIndex::from_flat(col, p.spin), x)?;
        w.set_column(col, &psi);
    }
    Ok(w.adjoint() * w)
}
