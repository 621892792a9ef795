//! The semidiscrete nonlinear wave and nonlinear Schrödinger systems in
//! canonical form, their time integrators, the tangent (variational) flow and
//! the symplectic 2-form.
//!
//! * wave: `H = sum (w^2/2 + (D+ v)^2/2 + V(v)) h`, so `v' = w`, `w' = v_2 - V'(v)`.
//! * NLS:  `H = sum (1/2)((D+ v)^2 + (D+ w)^2 - F(v^2 + w^2)) h`, so
//!   `v' = -w_2 - F'(v^2+w^2) w`, `w' = v_2 + F'(v^2+w^2) v`,
//!
//! where `u_2` is the three-point second difference.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{dot, LatticeField, Mesh};
use crate::variational::{Functional, LocalDensity, Site, StencilFunctional};

/// Canonical pair `(v, w)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalState {
    t: f64,
    v: LatticeField,
    w: LatticeField,
}

impl CanonicalState {
    pub fn new(t: f64, v: LatticeField, w: LatticeField) -> Result<Self> {
        if v.mesh() != w.mesh() {
            return Err(Error::MeshMismatch);
        }
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time must be finite, got {t}"
            )));
        }
        v.check_finite()?;
        w.check_finite()?;
        Ok(Self { t, v, w })
    }

    pub(crate) fn from_parts(t: f64, v: LatticeField, w: LatticeField) -> Self {
        debug_assert_eq!(v.mesh(), w.mesh());
        Self { t, v, w }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn v(&self) -> &LatticeField {
        &self.v
    }

    pub fn w(&self) -> &LatticeField {
        &self.w
    }

    pub fn mesh(&self) -> &Mesh {
        self.v.mesh()
    }

    pub fn into_parts(self) -> (f64, LatticeField, LatticeField) {
        (self.t, self.v, self.w)
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// `(v + eps dv, w + eps dw)` at the same time.
    pub fn perturbed(&self, eps: f64, dv: &LatticeField, dw: &LatticeField) -> Self {
        let mut v = self.v.clone();
        let mut w = self.w.clone();
        v.axpy(eps, dv);
        w.axpy(eps, dw);
        Self::from_parts(self.t, v, w)
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.v.len());
        y.extend_from_slice(self.v.values());
        y.extend_from_slice(self.w.values());
        y
    }

    fn from_vec(t: f64, mesh: Mesh, y: Vec<f64>) -> Self {
        let n = mesh.n_points();
        let mut v = y;
        let w = v.split_off(n);
        Self::from_parts(
            t,
            LatticeField::from_raw(mesh, v),
            LatticeField::from_raw(mesh, w),
        )
    }
}

/// Perturbation `(dv, dw)` carried along a base trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentState {
    dv: LatticeField,
    dw: LatticeField,
}

impl TangentState {
    pub fn new(dv: LatticeField, dw: LatticeField) -> Result<Self> {
        if dv.mesh() != dw.mesh() {
            return Err(Error::MeshMismatch);
        }
        dv.check_finite()?;
        dw.check_finite()?;
        Ok(Self { dv, dw })
    }

    pub fn zeros(mesh: Mesh) -> Self {
        Self {
            dv: LatticeField::zeros(mesh),
            dw: LatticeField::zeros(mesh),
        }
    }

    pub fn dv(&self) -> &LatticeField {
        &self.dv
    }

    pub fn dw(&self) -> &LatticeField {
        &self.dw
    }

    pub fn mesh(&self) -> &Mesh {
        self.dv.mesh()
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.dv.len());
        y.extend_from_slice(self.dv.values());
        y.extend_from_slice(self.dw.values());
        y
    }

    fn from_vec(mesh: Mesh, y: Vec<f64>) -> Self {
        let n = mesh.n_points();
        let mut dv = y;
        let dw = dv.split_off(n);
        Self {
            dv: LatticeField::from_raw(mesh, dv),
            dw: LatticeField::from_raw(mesh, dw),
        }
    }
}

/// `omega_h(xi, zeta) = h sum_j (dv^xi_j dw^zeta_j - dv^zeta_j dw^xi_j)`.
pub fn symplectic_form(xi: &TangentState, zeta: &TangentState) -> Result<f64> {
    if xi.mesh() != zeta.mesh() {
        return Err(Error::MeshMismatch);
    }
    let h = xi.mesh().h();
    let a = dot(xi.dv.values(), zeta.dw.values());
    let b = dot(zeta.dv.values(), xi.dw.values());
    Ok(h * (a - b))
}

/// Potential `V(v)` of the wave system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WavePotential {
    Zero,
    /// `V = c v^2 / 2`.
    Quadratic {
        c: f64,
    },
    /// `V = lambda v^4 / 4`.
    Quartic {
        lambda: f64,
    },
}

impl WavePotential {
    pub fn value(&self, v: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Quadratic { c } => 0.5 * c * v * v,
            Self::Quartic { lambda } => 0.25 * lambda * v.powi(4),
        }
    }

    pub fn derivative(&self, v: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Quadratic { c } => c * v,
            Self::Quartic { lambda } => lambda * v * v * v,
        }
    }

    pub fn second_derivative(&self, v: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Quadratic { c } => c,
            Self::Quartic { lambda } => 3.0 * lambda * v * v,
        }
    }

    /// Coefficient `C` if the potential is `C v^2 / 2` (zero counts, with `C = 0`).
    pub fn quadratic_coefficient(&self) -> Option<f64> {
        match *self {
            Self::Zero => Some(0.0),
            Self::Quadratic { c } => Some(c),
            Self::Quartic { .. } => None,
        }
    }
}

/// Nonlinearity `F(z)` of the NLS system, `z = v^2 + w^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NlsPotential {
    Zero,
    /// `F = c z^2 / 2`, the cubic Schrödinger nonlinearity.
    Cubic {
        c: f64,
    },
}

impl NlsPotential {
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cubic { c } => 0.5 * c * z * z,
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cubic { c } => c * z,
        }
    }

    pub fn second_derivative(&self, _z: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cubic { c } => c,
        }
    }
}

/// Wave energy density `w^2/2 + (D+ v)^2/2 + V(v)`.
#[derive(Debug, Clone, Copy)]
pub struct WaveEnergyDensity {
    pub potential: WavePotential,
}

impl LocalDensity for WaveEnergyDensity {
    fn offsets(&self) -> &[isize] {
        &[0, 1]
    }

    fn eval(&self, s: &Site) -> f64 {
        let g = (s.v[1] - s.v[0]) / s.h;
        0.5 * s.w[0] * s.w[0] + 0.5 * g * g + self.potential.value(s.v[0])
    }

    fn partials(&self, s: &Site, dv: &mut [f64], dw: &mut [f64]) {
        let g = (s.v[1] - s.v[0]) / s.h;
        dv[0] = -g / s.h + self.potential.derivative(s.v[0]);
        dv[1] = g / s.h;
        dw[0] = s.w[0];
        dw[1] = 0.0;
    }
}

/// NLS energy density `(1/2)((D+ v)^2 + (D+ w)^2 - F(v^2 + w^2))`.
#[derive(Debug, Clone, Copy)]
pub struct NlsEnergyDensity {
    pub potential: NlsPotential,
}

impl LocalDensity for NlsEnergyDensity {
    fn offsets(&self) -> &[isize] {
        &[0, 1]
    }

    fn eval(&self, s: &Site) -> f64 {
        let gv = (s.v[1] - s.v[0]) / s.h;
        let gw = (s.w[1] - s.w[0]) / s.h;
        let z = s.v[0] * s.v[0] + s.w[0] * s.w[0];
        0.5 * (gv * gv + gw * gw - self.potential.value(z))
    }

    fn partials(&self, s: &Site, dv: &mut [f64], dw: &mut [f64]) {
        let gv = (s.v[1] - s.v[0]) / s.h;
        let gw = (s.w[1] - s.w[0]) / s.h;
        let fp = self.potential.derivative(s.v[0] * s.v[0] + s.w[0] * s.w[0]);
        dv[0] = -gv / s.h - fp * s.v[0];
        dv[1] = gv / s.h;
        dw[0] = -gw / s.h - fp * s.w[0];
        dw[1] = gw / s.h;
    }
}

/// Energy functional of the wave system.
pub fn wave_energy(potential: WavePotential) -> StencilFunctional<WaveEnergyDensity> {
    StencilFunctional::new("energy", WaveEnergyDensity { potential })
}

/// Energy functional of the NLS system.
pub fn nls_energy(potential: NlsPotential) -> StencilFunctional<NlsEnergyDensity> {
    StencilFunctional::new("energy", NlsEnergyDensity { potential })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemKind {
    Wave(WavePotential),
    Nls(NlsPotential),
}

/// A canonical system: its Hamiltonian and hand-written right-hand sides.
#[derive(Clone)]
pub struct SystemSpec {
    kind: SystemKind,
    hamiltonian: Arc<dyn Functional>,
}

impl std::fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemSpec")
            .field("kind", &self.kind)
            .finish()
    }
}

pub fn wave_system(potential: WavePotential) -> SystemSpec {
    SystemSpec {
        kind: SystemKind::Wave(potential),
        hamiltonian: Arc::new(wave_energy(potential)),
    }
}

pub fn nls_system(potential: NlsPotential) -> SystemSpec {
    SystemSpec {
        kind: SystemKind::Nls(potential),
        hamiltonian: Arc::new(nls_energy(potential)),
    }
}

#[inline]
fn laplacian_at(mesh: &Mesh, u: &[f64], j: usize) -> f64 {
    let n = u.len();
    let (left, right) = if mesh.is_periodic() {
        (u[(j + n - 1) % n], u[(j + 1) % n])
    } else {
        (
            if j > 0 { u[j - 1] } else { 0.0 },
            if j + 1 < n { u[j + 1] } else { 0.0 },
        )
    };
    (right - 2.0 * u[j] + left) / (mesh.h() * mesh.h())
}

impl SystemSpec {
    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SystemKind::Wave(_) => "wave",
            SystemKind::Nls(_) => "nls",
        }
    }

    pub fn hamiltonian(&self) -> Arc<dyn Functional> {
        Arc::clone(&self.hamiltonian)
    }

    /// `(v', w')` at a state.
    pub fn rhs(&self, s: &CanonicalState) -> (LatticeField, LatticeField) {
        let mesh = *s.mesh();
        let mut out = vec![0.0; 2 * mesh.n_points()];
        self.rhs_into(&mesh, s.v().values(), s.w().values(), &mut out);
        let tmp = CanonicalState::from_vec(s.t(), mesh, out);
        let (_, v, w) = tmp.into_parts();
        (v, w)
    }

    /// Jacobian action `(dv', dw')` of the right-hand side at `s` on `(dv, dw)`.
    pub fn linearized_rhs(
        &self,
        s: &CanonicalState,
        dv: &LatticeField,
        dw: &LatticeField,
    ) -> (LatticeField, LatticeField) {
        let mesh = *s.mesh();
        let mut out = vec![0.0; 2 * mesh.n_points()];
        self.linearized_into(
            &mesh,
            s.v().values(),
            s.w().values(),
            dv.values(),
            dw.values(),
            &mut out,
        );
        let t = TangentState::from_vec(mesh, out);
        (t.dv, t.dw)
    }

    fn rhs_into(&self, mesh: &Mesh, v: &[f64], w: &[f64], out: &mut [f64]) {
        let n = v.len();
        let (dv, dw) = out.split_at_mut(n);
        match self.kind {
            SystemKind::Wave(pot) => {
                for j in 0..n {
                    dv[j] = w[j];
                    dw[j] = laplacian_at(mesh, v, j) - pot.derivative(v[j]);
                }
            }
            SystemKind::Nls(pot) => {
                for j in 0..n {
                    let fp = pot.derivative(v[j] * v[j] + w[j] * w[j]);
                    dv[j] = -laplacian_at(mesh, w, j) - fp * w[j];
                    dw[j] = laplacian_at(mesh, v, j) + fp * v[j];
                }
            }
        }
    }

    fn linearized_into(
        &self,
        mesh: &Mesh,
        v: &[f64],
        w: &[f64],
        xv: &[f64],
        xw: &[f64],
        out: &mut [f64],
    ) {
        let n = v.len();
        let (ov, ow) = out.split_at_mut(n);
        match self.kind {
            SystemKind::Wave(pot) => {
                for j in 0..n {
                    ov[j] = xw[j];
                    ow[j] = laplacian_at(mesh, xv, j) - pot.second_derivative(v[j]) * xv[j];
                }
            }
            SystemKind::Nls(pot) => {
                for j in 0..n {
                    let z = v[j] * v[j] + w[j] * w[j];
                    let fp = pot.derivative(z);
                    let dz = 2.0 * (v[j] * xv[j] + w[j] * xw[j]);
                    let fpp_dz = pot.second_derivative(z) * dz;
                    ov[j] = -laplacian_at(mesh, xw, j) - fpp_dz * w[j] - fp * xw[j];
                    ow[j] = laplacian_at(mesh, xv, j) + fpp_dz * v[j] + fp * xv[j];
                }
            }
        }
    }

    fn rhs_vec(&self, mesh: &Mesh, y: &[f64]) -> Vec<f64> {
        let n = mesh.n_points();
        let mut out = vec![0.0; 2 * n];
        self.rhs_into(mesh, &y[..n], &y[n..], &mut out);
        out
    }

    fn linearized_vec(&self, mesh: &Mesh, y: &[f64], x: &[f64]) -> Vec<f64> {
        let n = mesh.n_points();
        let mut out = vec![0.0; 2 * n];
        self.linearized_into(mesh, &y[..n], &y[n..], &x[..n], &x[n..], &mut out);
        out
    }

    /// Dense Jacobian of the right-hand side, column by column.
    fn jacobian(&self, mesh: &Mesh, y: &[f64]) -> DMatrix<f64> {
        let m = y.len();
        let mut jac = DMatrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for col in 0..m {
            e[col] = 1.0;
            let c = self.linearized_vec(mesh, y, &e);
            jac.set_column(col, &DVector::from_vec(c));
            e[col] = 0.0;
        }
        jac
    }
}

/// Time integrator selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Integrator {
    /// Classical fourth-order Runge-Kutta.
    Rk4,
    /// Implicit midpoint rule.
    Midpoint { newton_tol: f64, max_iter: usize },
}

impl Integrator {
    pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
    pub const DEFAULT_MAX_ITER: usize = 50;

    pub fn midpoint() -> Self {
        Self::Midpoint {
            newton_tol: Self::DEFAULT_NEWTON_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rk4 => "rk4",
            Self::Midpoint { .. } => "midpoint",
        }
    }
}

fn axpy_vec(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn check_finite_vec(y: &[f64]) -> Result<()> {
    match y.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

fn rk4_stages(sys: &SystemSpec, mesh: &Mesh, y: &[f64], dt: f64) -> [Vec<f64>; 4] {
    let k1 = sys.rhs_vec(mesh, y);
    let k2 = sys.rhs_vec(mesh, &axpy_vec(y, 0.5 * dt, &k1));
    let k3 = sys.rhs_vec(mesh, &axpy_vec(y, 0.5 * dt, &k2));
    let k4 = sys.rhs_vec(mesh, &axpy_vec(y, dt, &k3));
    [k1, k2, k3, k4]
}

fn rk4_combine(y: &[f64], dt: f64, k: &[Vec<f64>; 4]) -> Vec<f64> {
    (0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
        .collect()
}

/// One classical Runge-Kutta step.
pub fn step_rk4(sys: &SystemSpec, s: &CanonicalState, dt: f64) -> Result<CanonicalState> {
    check_dt(dt)?;
    let mesh = *s.mesh();
    let y = s.to_vec();
    let k = rk4_stages(sys, &mesh, &y, dt);
    let y1 = rk4_combine(&y, dt, &k);
    check_finite_vec(&y1)?;
    Ok(CanonicalState::from_vec(s.t() + dt, mesh, y1))
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt != 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "time step must be finite and nonzero, got {dt}"
        )))
    }
}

/// One implicit midpoint step `y1 = y0 + dt f((y0 + y1)/2)`.
///
/// The stage equation is solved by damped fixed-point iteration; if that stalls
/// the solver switches to Newton's method with a dense Jacobian. On success the
/// residual `max|y1 - y0 - dt f((y0+y1)/2)|` is below `newton_tol`.
pub fn step_midpoint(
    sys: &SystemSpec,
    s: &CanonicalState,
    dt: f64,
    newton_tol: f64,
    max_iter: usize,
) -> Result<CanonicalState> {
    check_dt(dt)?;
    if newton_tol.is_nan() || newton_tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "newton_tol must be positive, got {newton_tol}"
        )));
    }
    let mesh = *s.mesh();
    let y0 = s.to_vec();
    let residual_map = |y1: &[f64]| -> Vec<f64> {
        let mid: Vec<f64> = y0.iter().zip(y1).map(|(a, b)| 0.5 * (a + b)).collect();
        axpy_vec(&y0, dt, &sys.rhs_vec(&mesh, &mid))
    };

    // explicit midpoint predictor
    let f0 = sys.rhs_vec(&mesh, &y0);
    let mut y1 = axpy_vec(&y0, dt, &sys.rhs_vec(&mesh, &axpy_vec(&y0, 0.5 * dt, &f0)));
    let mut damping = 1.0;
    let mut previous = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut stalls = 0;
    while iterations < max_iter {
        let g = residual_map(&y1);
        residual = max_abs_diff(&y1, &g);
        if !residual.is_finite() {
            break;
        }
        if residual < newton_tol {
            // the image is one contraction closer to the fixed point
            return Ok(CanonicalState::from_vec(s.t() + dt, mesh, g));
        }
        if residual > 0.9 * previous {
            stalls += 1;
            damping *= 0.5;
            if stalls >= 3 {
                break;
            }
        }
        previous = residual;
        for (y, g) in y1.iter_mut().zip(&g) {
            *y += damping * (g - *y);
        }
        iterations += 1;
    }

    // Newton fallback on F(y1) = y1 - y0 - dt f((y0+y1)/2).
    let m = y0.len();
    while iterations < max_iter {
        let g = residual_map(&y1);
        let fval: Vec<f64> = y1.iter().zip(&g).map(|(a, b)| a - b).collect();
        residual = fval.iter().fold(0.0, |m, v| m.max(v.abs()));
        if residual < newton_tol {
            return Ok(CanonicalState::from_vec(s.t() + dt, mesh, y1));
        }
        if !residual.is_finite() {
            break;
        }
        let mid: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| 0.5 * (a + b)).collect();
        let jac = DMatrix::identity(m, m) - sys.jacobian(&mesh, &mid) * (0.5 * dt);
        let Some(delta) = jac.lu().solve(&DVector::from_vec(fval)) else {
            break;
        };
        for (y, d) in y1.iter_mut().zip(delta.iter()) {
            *y -= d;
        }
        iterations += 1;
    }
    Err(Error::SolverDivergence {
        residual,
        iterations,
    })
}

/// Advances one step with the chosen integrator.
pub fn step(
    sys: &SystemSpec,
    s: &CanonicalState,
    dt: f64,
    integrator: Integrator,
) -> Result<CanonicalState> {
    match integrator {
        Integrator::Rk4 => step_rk4(sys, s, dt),
        Integrator::Midpoint {
            newton_tol,
            max_iter,
        } => step_midpoint(sys, s, dt, newton_tol, max_iter),
    }
}

/// Number of steps of size `dt` covering `[0, t_end]`.
pub fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    check_dt(dt)?;
    if !(dt > 0.0 && t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}"
        )));
    }
    Ok((t_end / dt).round() as usize)
}

/// Integrates `n_steps` steps, calling `observe` on the initial state, on every
/// `stride`-th state, and on the final state. Times are set to `t0 + k dt`.
pub fn integrate(
    sys: &SystemSpec,
    state0: &CanonicalState,
    dt: f64,
    n_steps: usize,
    integrator: Integrator,
    stride: usize,
    mut observe: impl FnMut(usize, &CanonicalState) -> Result<()>,
) -> Result<CanonicalState> {
    let stride = stride.max(1);
    let t0 = state0.t();
    let mut state = state0.clone();
    observe(0, &state)?;
    for k in 1..=n_steps {
        state = step(sys, &state, dt, integrator)?.with_time(t0 + k as f64 * dt);
        if k % stride == 0 || k == n_steps {
            observe(k, &state)?;
        }
    }
    Ok(state)
}

/// All states of a run, one per step.
pub fn trajectory(
    sys: &SystemSpec,
    state0: &CanonicalState,
    dt: f64,
    n_steps: usize,
    integrator: Integrator,
) -> Result<Vec<CanonicalState>> {
    let mut out = Vec::with_capacity(n_steps + 1);
    integrate(sys, state0, dt, n_steps, integrator, 1, |_, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Solves `(I - dt/2 A) x1 = (I + dt/2 A) x0` for the midpoint tangent map.
fn midpoint_tangent_step(
    sys: &SystemSpec,
    mesh: &Mesh,
    mid: &[f64],
    x0: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let ax0 = sys.linearized_vec(mesh, mid, x0);
    let b = axpy_vec(x0, 0.5 * dt, &ax0);
    let scale = x0
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut x1 = axpy_vec(x0, dt, &ax0);
    let mut previous = f64::INFINITY;
    for _ in 0..200 {
        let next = axpy_vec(&b, 0.5 * dt, &sys.linearized_vec(mesh, mid, &x1));
        let change = max_abs_diff(&next, &x1);
        x1 = next;
        if change <= 4.0 * f64::EPSILON * scale {
            return Ok(x1);
        }
        if change > 0.9 * previous {
            break;
        }
        previous = change;
    }
    // slow or stalled contraction: solve directly
    let m = x0.len();
    let jac = DMatrix::identity(m, m) - sys.jacobian(mesh, mid) * (0.5 * dt);
    jac.lu()
        .solve(&DVector::from_vec(b))
        .map(|x| x.iter().copied().collect())
        .ok_or(Error::SolverDivergence {
            residual: f64::INFINITY,
            iterations: 0,
        })
}

/// Propagates a tangent vector along a stored base trajectory with the
/// linearization of the chosen integrator's step map.
///
/// `trajectory[k]` must sit at `t0 + k dt`. The midpoint tangent step uses the
/// Jacobian at the midpoint of consecutive base states, which is the exact
/// derivative of the midpoint map and preserves the symplectic form exactly.
pub fn evolve_tangent(
    sys: &SystemSpec,
    trajectory: &[CanonicalState],
    tangent0: &TangentState,
    dt: f64,
    integrator: Integrator,
) -> Result<Vec<TangentState>> {
    check_dt(dt)?;
    let Some(first) = trajectory.first() else {
        return Ok(Vec::new());
    };
    let mesh = *first.mesh();
    if tangent0.mesh() != &mesh {
        return Err(Error::MeshMismatch);
    }
    let t0 = first.t();
    for (k, s) in trajectory.iter().enumerate() {
        if s.mesh() != &mesh {
            return Err(Error::MeshMismatch);
        }
        let expected = t0 + k as f64 * dt;
        if (s.t() - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(Error::TimeGridMismatch {
                step: k,
                expected,
                found: s.t(),
            });
        }
    }
    let mut out = Vec::with_capacity(trajectory.len());
    out.push(tangent0.clone());
    let mut x = tangent0.to_vec();
    for pair in trajectory.windows(2) {
        let y0 = pair[0].to_vec();
        x = match integrator {
            Integrator::Rk4 => {
                let k = rk4_stages(sys, &mesh, &y0, dt);
                let l1 = sys.linearized_vec(&mesh, &y0, &x);
                let l2 = sys.linearized_vec(
                    &mesh,
                    &axpy_vec(&y0, 0.5 * dt, &k[0]),
                    &axpy_vec(&x, 0.5 * dt, &l1),
                );
                let l3 = sys.linearized_vec(
                    &mesh,
                    &axpy_vec(&y0, 0.5 * dt, &k[1]),
                    &axpy_vec(&x, 0.5 * dt, &l2),
                );
                let l4 =
                    sys.linearized_vec(&mesh, &axpy_vec(&y0, dt, &k[2]), &axpy_vec(&x, dt, &l3));
                rk4_combine(&x, dt, &[l1, l2, l3, l4])
            }
            Integrator::Midpoint { .. } => {
                let y1 = pair[1].to_vec();
                let mid: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| 0.5 * (a + b)).collect();
                midpoint_tangent_step(sys, &mesh, &mid, &x, dt)?
            }
        };
        check_finite_vec(&x)?;
        out.push(TangentState::from_vec(mesh, x.clone()));
    }
    Ok(out)
}

/// Streams states as CSV rows `t, v_0..v_{n-1}, w_0..w_{n-1}`.
pub struct TrajectoryWriter<W: Write> {
    out: W,
    n_points: usize,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W, n_points: usize) -> Result<Self> {
        let mut header = String::from("t");
        for prefix in ["v", "w"] {
            for j in 0..n_points {
                header.push_str(&format!(",{prefix}_{j}"));
            }
        }
        writeln!(out, "{header}")?;
        Ok(Self { out, n_points })
    }

    pub fn write(&mut self, s: &CanonicalState) -> Result<()> {
        if s.mesh().n_points() != self.n_points {
            return Err(Error::LengthMismatch {
                expected: self.n_points,
                got: s.mesh().n_points(),
            });
        }
        let mut line = format!("{:e}", s.t());
        for value in s.v().values().iter().chain(s.w().values()) {
            line.push_str(&format!(",{value:e}"));
        }
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete_ops::second_difference;
    use crate::lattice::Boundary;
    use crate::variational::{hamiltonian_field_of, poisson_bracket};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_state(mesh: Mesh, amp: f64, rng: &mut ChaCha8Rng) -> CanonicalState {
        let mut field = || {
            let values = (0..mesh.n_points())
                .map(|_| rng.gen_range(-amp..amp))
                .collect();
            LatticeField::new(mesh, values).unwrap()
        };
        let v = field();
        let w = field();
        CanonicalState::new(0.0, v, w).unwrap()
    }

    fn systems() -> Vec<SystemSpec> {
        vec![
            wave_system(WavePotential::Zero),
            wave_system(WavePotential::Quadratic { c: 1.0 }),
            wave_system(WavePotential::Quartic { lambda: 1.0 }),
            nls_system(NlsPotential::Zero),
            nls_system(NlsPotential::Cubic { c: 1.0 }),
        ]
    }

    fn meshes() -> [Mesh; 2] {
        [
            Mesh::new(0.1, 32, -1.6, Boundary::Periodic).unwrap(),
            Mesh::new(0.1, 32, -1.6, Boundary::CompactSupport).unwrap(),
        ]
    }

    #[test]
    fn canonical_state_validation() {
        let a = Mesh::new(0.1, 8, 0.0, Boundary::Periodic).unwrap();
        let b = Mesh::new(0.2, 8, 0.0, Boundary::Periodic).unwrap();
        assert!(matches!(
            CanonicalState::new(0.0, LatticeField::zeros(a), LatticeField::zeros(b)),
            Err(Error::MeshMismatch)
        ));
    }

    #[test]
    fn wave_stationary_constant() {
        let mesh = meshes()[0];
        let s = CanonicalState::new(
            0.0,
            LatticeField::constant(mesh, 0.7).unwrap(),
            LatticeField::zeros(mesh),
        )
        .unwrap();
        let (a, b) = wave_system(WavePotential::Zero).rhs(&s);
        assert_eq!(a.max_abs(), 0.0);
        assert!(b.max_abs() < 1e-12);
    }

    #[test]
    fn wave_quadratic_single_site() {
        let mesh = meshes()[0];
        let j = 5;
        let s = CanonicalState::new(0.0, LatticeField::unit(mesh, j), LatticeField::zeros(mesh))
            .unwrap();
        let (_, wdot) = wave_system(WavePotential::Quadratic { c: 2.0 }).rhs(&s);
        for (i, &value) in wdot.values().iter().enumerate() {
            let oracle = match i {
                i if i == j => -2.0 / 0.01 - 2.0,
                i if i + 1 == j || i == j + 1 => 1.0 / 0.01,
                _ => 0.0,
            };
            assert!((value - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn nls_free_is_linear_schrodinger() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_state(meshes()[1], 1.0, &mut rng);
        let (a, b) = nls_system(NlsPotential::Zero).rhs(&s);
        assert_eq!(a, second_difference(s.w()).scale(-1.0));
        assert_eq!(b, second_difference(s.v()));
    }

    #[test]
    fn nls_plane_wave_rotates() {
        let n = 64;
        let h = 0.1;
        let mesh = Mesh::new(h, n, 0.0, Boundary::Periodic).unwrap();
        let kappa = 2.0 * PI * 3.0 / (n as f64 * h);
        let v = LatticeField::from_fn(mesh, |x| (kappa * x).cos()).unwrap();
        let w = LatticeField::from_fn(mesh, |x| (kappa * x).sin()).unwrap();
        let s = CanonicalState::new(0.0, v.clone(), w.clone()).unwrap();
        let (a, b) = nls_system(NlsPotential::Zero).rhs(&s);
        let freq = (2.0 - 2.0 * (kappa * h).cos()) / (h * h);
        for j in 0..n {
            assert!((a.values()[j] - freq * w.values()[j]).abs() < 1e-10);
            assert!((b.values()[j] + freq * v.values()[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn rhs_is_canonical_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for mesh in meshes() {
            for sys in systems() {
                let field = hamiltonian_field_of(sys.hamiltonian());
                for _ in 0..5 {
                    let s = random_state(mesh, 1.0, &mut rng);
                    let (a, b) = sys.rhs(&s);
                    let (x, y) = field.eval(&s);
                    let scale = a.max_abs().max(b.max_abs());
                    assert!(a.zip_map(&x, |p, q| p - q).max_abs() <= 1e-12 * scale);
                    assert!(b.zip_map(&y, |p, q| p - q).max_abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn linearized_rhs_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mesh in meshes() {
            for sys in systems() {
                let s = random_state(mesh, 1.0, &mut rng);
                let d = random_state(mesh, 1.0, &mut rng);
                let (lv, lw) = sys.linearized_rhs(&s, d.v(), d.w());
                let mut defects = Vec::new();
                for eps in [1e-3, 1e-4] {
                    let (pv, pw) = sys.rhs(&s.perturbed(eps, d.v(), d.w()));
                    let (mv, mw) = sys.rhs(&s.perturbed(-eps, d.v(), d.w()));
                    let fv = pv.zip_map(&mv, |p, m| (p - m) / (2.0 * eps));
                    let fw = pw.zip_map(&mw, |p, m| (p - m) / (2.0 * eps));
                    let defect = fv.zip_map(&lv, |a, b| a - b).max_abs()
                        + fw.zip_map(&lw, |a, b| a - b).max_abs();
                    defects.push(defect);
                }
                let scale = lv.max_abs().max(lw.max_abs());
                // second order, or exact for linear systems
                assert!(
                    defects[1] < 1e-9 * scale || defects[0] / defects[1] > 60.0,
                    "{:?} {defects:?}",
                    sys.kind()
                );
            }
        }
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let mesh = meshes()[0];
        let zero =
            CanonicalState::new(0.0, LatticeField::zeros(mesh), LatticeField::zeros(mesh)).unwrap();
        for sys in systems() {
            let a = step_rk4(&sys, &zero, 1e-3).unwrap();
            let b = step_midpoint(&sys, &zero, 1e-3, 1e-12, 50).unwrap();
            assert_eq!(a.v().max_abs() + a.w().max_abs(), 0.0);
            assert_eq!(b.v().max_abs() + b.w().max_abs(), 0.0);
            assert_eq!(a.t(), 1e-3);
        }
    }

    /// Exact solution of the linear wave system for one Fourier mode.
    fn linear_wave_mode(mesh: Mesh, c: f64, mode: f64, t: f64) -> CanonicalState {
        let h = mesh.h();
        let kappa = 2.0 * PI * mode / mesh.length();
        let omega = ((2.0 - 2.0 * (kappa * h).cos()) / (h * h) + c).sqrt();
        let v = LatticeField::from_fn(mesh, |x| (kappa * x - omega * t).cos()).unwrap();
        let w = LatticeField::from_fn(mesh, |x| omega * (kappa * x - omega * t).sin()).unwrap();
        CanonicalState::new(t, v, w).unwrap()
    }

    #[test]
    fn rk4_converges_at_fourth_order_on_linear_mode() {
        let mesh = Mesh::new(0.1, 64, 0.0, Boundary::Periodic).unwrap();
        let sys = wave_system(WavePotential::Quadratic { c: 1.0 });
        let t_end = 1.0;
        let exact = linear_wave_mode(mesh, 1.0, 4.0, t_end);
        let mut errors = Vec::new();
        for dt in [1e-2, 5e-3] {
            let n = step_count(dt, t_end).unwrap();
            let s0 = linear_wave_mode(mesh, 1.0, 4.0, 0.0);
            let end = integrate(&sys, &s0, dt, n, Integrator::Rk4, n, |_, _| Ok(())).unwrap();
            let err = end.v().zip_map(exact.v(), |a, b| a - b).max_abs();
            errors.push(err);
        }
        let order = (errors[0] / errors[1]).log2();
        assert!(
            order > 3.8 && order < 4.3,
            "order {order}, errors {errors:?}"
        );
    }

    #[test]
    fn midpoint_conserves_mass_for_nls() {
        let mesh = Mesh::new(0.1, 64, -3.2, Boundary::Periodic).unwrap();
        let sys = nls_system(NlsPotential::Cubic { c: 1.0 });
        let v = LatticeField::from_fn(mesh, |x| 0.5 * (-x * x).exp() * (0.5 * x).cos()).unwrap();
        let w = LatticeField::from_fn(mesh, |x| 0.5 * (-x * x).exp() * (0.5 * x).sin()).unwrap();
        let s0 = CanonicalState::new(0.0, v, w).unwrap();
        let mass = |s: &CanonicalState| 0.5 * (s.v().norm().powi(2) + s.w().norm().powi(2));
        let n_steps = 200;
        let end = integrate(
            &sys,
            &s0,
            1e-3,
            n_steps,
            Integrator::midpoint(),
            n_steps,
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((mass(&end) - mass(&s0)).abs() <= n_steps as f64 * 1e-12);
    }

    #[test]
    fn midpoint_newton_fallback_handles_stiff_steps() {
        // dt far beyond the fixed-point contraction limit for h = 0.1
        let mesh = Mesh::new(0.1, 16, 0.0, Boundary::Periodic).unwrap();
        let sys = nls_system(NlsPotential::Zero);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_state(mesh, 1.0, &mut rng);
        let next = step_midpoint(&sys, &s, 0.05, 1e-12, 50).unwrap();
        let mass = |s: &CanonicalState| s.v().norm().powi(2) + s.w().norm().powi(2);
        assert!((mass(&next) - mass(&s)).abs() < 1e-10);
        assert!(matches!(
            step_midpoint(&sys, &s, 0.05, 1e-12, 1),
            Err(Error::SolverDivergence { .. })
        ));
    }

    #[test]
    fn rk4_time_reversal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mesh = meshes()[0];
        let sys = wave_system(WavePotential::Quartic { lambda: 1.0 });
        let s = random_state(mesh, 0.5, &mut rng);
        let dt = 1e-3;
        let back = step_rk4(&sys, &step_rk4(&sys, &s, dt).unwrap(), -dt).unwrap();
        let err = back.v().zip_map(s.v(), |a, b| a - b).max_abs()
            + back.w().zip_map(s.w(), |a, b| a - b).max_abs();
        // local error is O(dt^5) times the stiffness scale (h^-2 up to the 5th power)
        assert!(err < 1e-8, "{err}");
        assert!(back.t().abs() < 1e-15);
    }

    #[test]
    fn symplectic_form_examples() {
        let mesh = meshes()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_state(mesh, 1.0, &mut rng);
        let b = random_state(mesh, 1.0, &mut rng);
        let xi = TangentState::new(a.v().clone(), a.w().clone()).unwrap();
        let zeta = TangentState::new(b.v().clone(), b.w().clone()).unwrap();
        assert_eq!(symplectic_form(&xi, &xi).unwrap(), 0.0);
        let mut naive = 0.0;
        for j in 0..mesh.n_points() {
            naive += (a.v().values()[j] * b.w().values()[j]
                - b.v().values()[j] * a.w().values()[j])
                * mesh.h();
        }
        assert!((symplectic_form(&xi, &zeta).unwrap() - naive).abs() < 1e-14);

        let e = TangentState::new(LatticeField::unit(mesh, 3), LatticeField::zeros(mesh)).unwrap();
        let f = TangentState::new(LatticeField::zeros(mesh), LatticeField::unit(mesh, 3)).unwrap();
        assert_eq!(symplectic_form(&e, &f).unwrap(), mesh.h());
    }

    #[test]
    fn tangent_flow_properties() {
        let mesh = Mesh::new(0.1, 32, -1.6, Boundary::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s0 = random_state(mesh, 0.5, &mut rng);
        let d = random_state(mesh, 1.0, &mut rng);
        let xi0 = TangentState::new(d.v().clone(), d.w().clone()).unwrap();
        let dt = 1e-3;
        for integrator in [Integrator::Rk4, Integrator::midpoint()] {
            // zero stays zero
            let sys = nls_system(NlsPotential::Cubic { c: 1.0 });
            let traj = trajectory(&sys, &s0, dt, 20, integrator).unwrap();
            let zero =
                evolve_tangent(&sys, &traj, &TangentState::zeros(mesh), dt, integrator).unwrap();
            assert!(zero
                .iter()
                .all(|z| z.dv().max_abs() == 0.0 && z.dw().max_abs() == 0.0));

            // finite-difference consistency with two nonlinear runs
            let tangent = evolve_tangent(&sys, &traj, &xi0, dt, integrator).unwrap();
            let last = tangent.last().unwrap();
            let mut defects = Vec::new();
            for eps in [1e-4, 1e-5] {
                let pert = trajectory(
                    &sys,
                    &s0.perturbed(eps, xi0.dv(), xi0.dw()),
                    dt,
                    20,
                    integrator,
                )
                .unwrap();
                let end = pert.last().unwrap();
                let base = traj.last().unwrap();
                let dv = end.v().zip_map(base.v(), |a, b| (a - b) / eps);
                let defect = dv.zip_map(last.dv(), |a, b| a - b).max_abs();
                defects.push(defect);
            }
            assert!(defects[0] / defects[1] > 5.0, "{defects:?}");

            // linear system: tangent flow is the flow of the perturbation
            let lin = wave_system(WavePotential::Quadratic { c: 1.0 });
            let traj = trajectory(&lin, &s0, dt, 20, integrator).unwrap();
            let tangent = evolve_tangent(&lin, &traj, &xi0, dt, integrator).unwrap();
            let pert_state = CanonicalState::new(0.0, d.v().clone(), d.w().clone()).unwrap();
            let direct = trajectory(&lin, &pert_state, dt, 20, integrator).unwrap();
            let gap = tangent
                .last()
                .unwrap()
                .dv()
                .zip_map(direct.last().unwrap().v(), |a, b| a - b)
                .max_abs();
            assert!(gap < 1e-11, "{gap}");
        }
    }

    #[test]
    fn tangent_rejects_time_grid_mismatch() {
        let mesh = meshes()[0];
        let sys = wave_system(WavePotential::Zero);
        let s0 =
            CanonicalState::new(0.0, LatticeField::zeros(mesh), LatticeField::zeros(mesh)).unwrap();
        let traj = vec![s0.clone(), s0.clone().with_time(2e-3)];
        assert!(matches!(
            evolve_tangent(
                &sys,
                &traj,
                &TangentState::zeros(mesh),
                1e-3,
                Integrator::Rk4
            ),
            Err(Error::TimeGridMismatch { step: 1, .. })
        ));
    }

    #[test]
    fn midpoint_preserves_symplectic_form() {
        let mesh = Mesh::new(0.1, 32, -1.6, Boundary::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s0 = random_state(mesh, 0.5, &mut rng);
        let a = random_state(mesh, 1.0, &mut rng);
        let b = random_state(mesh, 1.0, &mut rng);
        let xi = TangentState::new(a.v().clone(), a.w().clone()).unwrap();
        let zeta = TangentState::new(b.v().clone(), b.w().clone()).unwrap();
        let dt = 1e-3;
        for sys in systems() {
            let traj = trajectory(&sys, &s0, dt, 100, Integrator::midpoint()).unwrap();
            let x = evolve_tangent(&sys, &traj, &xi, dt, Integrator::midpoint()).unwrap();
            let z = evolve_tangent(&sys, &traj, &zeta, dt, Integrator::midpoint()).unwrap();
            let w0 = symplectic_form(&xi, &zeta).unwrap();
            let w1 = symplectic_form(x.last().unwrap(), z.last().unwrap()).unwrap();
            assert!(
                (w1 - w0).abs() < 1e-11 * w0.abs(),
                "{:?}: {w0} {w1}",
                sys.kind()
            );
        }
    }

    #[test]
    fn energy_bracket_with_itself_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_state(meshes()[1], 1.0, &mut rng);
        for sys in systems() {
            let h = sys.hamiltonian();
            assert_eq!(poisson_bracket(h.as_ref(), h.as_ref(), &s), 0.0);
        }
    }

    #[test]
    fn trajectory_csv_layout() {
        let mesh = Mesh::new(0.5, 4, 0.0, Boundary::Periodic).unwrap();
        let s = CanonicalState::new(
            0.25,
            LatticeField::new(mesh, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            LatticeField::new(mesh, vec![-1.0, 0.5, 0.0, 0.1]).unwrap(),
        )
        .unwrap();
        let mut writer = TrajectoryWriter::new(Vec::new(), 4).unwrap();
        writer.write(&s).unwrap();
        let text = String::from_utf8(writer.into_inner()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,v_0,v_1,v_2,v_3,w_0,w_1,w_2,w_3");
        let row: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(row, vec![0.25, 1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 0.0, 0.1]);
    }
}
