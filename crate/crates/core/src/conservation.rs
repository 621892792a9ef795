//! Catalogue of conserved functionals of the wave and NLS systems, the
//! negative controls, drift monitoring and conservation verdicts.

use std::sync::Arc;

use serde::Serialize;

use crate::discrete_ops::{d_zero, even_difference, ShiftSeriesOperator};
use crate::error::{Error, Result};
use crate::lattice::{dot, LatticeField, Mesh, DEFAULT_BUFFER_FRACTION};
use crate::systems::{
    integrate, nls_energy, step_count, wave_energy, CanonicalState, Integrator, NlsPotential,
    SystemSpec, WavePotential,
};
use crate::variational::{Functional, HamiltonianVectorField};

/// Energy of the wave system.
pub fn energy_wave(potential: WavePotential) -> Arc<dyn Functional> {
    Arc::new(wave_energy(potential))
}

/// Energy of the NLS system.
pub fn energy_nls(potential: NlsPotential) -> Arc<dyn Functional> {
    Arc::new(nls_energy(potential))
}

fn apply_checked(op: &ShiftSeriesOperator, f: &LatticeField) -> LatticeField {
    op.apply(f)
        .unwrap_or_else(|e| panic!("{e}; validate the functional against its mesh first"))
}

fn check_skew(op: &ShiftSeriesOperator) -> Result<()> {
    if op.is_skew() {
        Ok(())
    } else {
        Err(Error::NotSkew)
    }
}

fn check_operator_fits(op: &ShiftSeriesOperator, mesh: &Mesh) -> Result<()> {
    if mesh.is_periodic() && op.width() > mesh.n_points() {
        return Err(Error::SupportTooWide {
            width: op.width(),
            n_points: mesh.n_points(),
        });
    }
    Ok(())
}

/// Momentum `P2 = sum w D̃₀(v) h = -sum v D̃₀(w) h`.
#[derive(Debug, Clone)]
pub struct Momentum {
    op: ShiftSeriesOperator,
}

/// Builds the momentum functional around a skew operator (normally `D̃₀`).
pub fn momentum(dtilde0: ShiftSeriesOperator) -> Result<Momentum> {
    check_skew(&dtilde0)?;
    Ok(Momentum { op: dtilde0 })
}

impl Momentum {
    pub fn operator(&self) -> &ShiftSeriesOperator {
        &self.op
    }

    /// The second sum form, `-sum v D̃₀(w) h`.
    pub fn value_transposed(&self, s: &CanonicalState) -> f64 {
        -s.mesh().h() * dot(s.v().values(), apply_checked(&self.op, s.w()).values())
    }
}

impl Functional for Momentum {
    fn name(&self) -> &str {
        "momentum"
    }

    fn density(&self, s: &CanonicalState) -> Vec<f64> {
        let dv = apply_checked(&self.op, s.v());
        s.w().zip_map(&dv, |w, d| w * d).into_values()
    }

    fn var_v(&self, s: &CanonicalState) -> LatticeField {
        apply_checked(&self.op, s.w()).scale(-1.0)
    }

    fn var_w(&self, s: &CanonicalState) -> LatticeField {
        apply_checked(&self.op, s.v())
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        check_operator_fits(&self.op, mesh)
    }
}

/// Mass `P3 = (1/2) sum (v^2 + w^2) h`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Mass;

pub fn mass() -> Mass {
    Mass
}

impl Functional for Mass {
    fn name(&self) -> &str {
        "mass"
    }

    fn density(&self, s: &CanonicalState) -> Vec<f64> {
        s.v()
            .zip_map(s.w(), |v, w| 0.5 * (v * v + w * w))
            .into_values()
    }

    fn var_v(&self, s: &CanonicalState) -> LatticeField {
        s.v().clone()
    }

    fn var_w(&self, s: &CanonicalState) -> LatticeField {
        s.w().clone()
    }
}

/// Largest hierarchy index accepted by default.
pub const DEFAULT_MAX_HIERARCHY_K: usize = 4;

/// `R_k = sum w D0(v_{2k}) h = -sum v D0(w_{2k}) h`, where `u_{2k}` is the k-fold
/// three-point second difference.
#[derive(Debug, Clone)]
pub struct HierarchyRk {
    k: usize,
    name: String,
}

pub fn hierarchy_rk(k: usize) -> HierarchyRk {
    HierarchyRk {
        k,
        name: format!("R{k}"),
    }
}

impl HierarchyRk {
    pub fn k(&self) -> usize {
        self.k
    }

    /// The second sum form, `-sum v D0(w_{2k}) h`.
    pub fn value_transposed(&self, s: &CanonicalState) -> f64 {
        let dw = d_zero(&even_difference(s.w(), self.k));
        -s.mesh().h() * dot(s.v().values(), dw.values())
    }
}

impl Functional for HierarchyRk {
    fn name(&self) -> &str {
        &self.name
    }

    fn density(&self, s: &CanonicalState) -> Vec<f64> {
        let dv = d_zero(&even_difference(s.v(), self.k));
        s.w().zip_map(&dv, |w, d| w * d).into_values()
    }

    fn var_v(&self, s: &CanonicalState) -> LatticeField {
        // transpose of D0 Δ^k is -Δ^k D0 (Δ symmetric, D0 skew)
        even_difference(&d_zero(s.w()), self.k).scale(-1.0)
    }

    fn var_w(&self, s: &CanonicalState) -> LatticeField {
        d_zero(&even_difference(s.v(), self.k))
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        let width = 2 * self.k + 3;
        if mesh.is_periodic() && width >= mesh.n_points() {
            return Err(Error::SupportTooWide {
                width,
                n_points: mesh.n_points(),
            });
        }
        Ok(())
    }
}

/// The space-time weights `alpha(t, x)` of the superposition functionals that
/// solve the discrete condition with `C = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TAlpha {
    One,
    T,
    X,
    TX,
    T2PlusX2,
}

impl TAlpha {
    pub const ALL: [TAlpha; 5] = [Self::One, Self::T, Self::X, Self::TX, Self::T2PlusX2];

    pub fn label(&self) -> &'static str {
        match self {
            Self::One => "1",
            Self::T => "t",
            Self::X => "x",
            Self::TX => "tx",
            Self::T2PlusX2 => "t2+x2",
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.label() == label)
    }

    pub fn alpha(&self, t: f64, x: f64) -> f64 {
        match self {
            Self::One => 1.0,
            Self::T => t,
            Self::X => x,
            Self::TX => t * x,
            Self::T2PlusX2 => t * t + x * x,
        }
    }

    pub fn alpha_t(&self, t: f64, x: f64) -> f64 {
        match self {
            Self::One | Self::X => 0.0,
            Self::T => 1.0,
            Self::TX => x,
            Self::T2PlusX2 => 2.0 * t,
        }
    }

    pub fn alpha_tt(&self, _t: f64, _x: f64) -> f64 {
        match self {
            Self::T2PlusX2 => 2.0,
            _ => 0.0,
        }
    }

    pub fn depends_on_x(&self) -> bool {
        matches!(self, Self::X | Self::TX | Self::T2PlusX2)
    }

    pub fn depends_on_t(&self) -> bool {
        matches!(self, Self::T | Self::TX | Self::T2PlusX2)
    }
}

/// Largest residual over mesh sites of
/// `alpha_tt - (alpha(x+h) - 2 alpha(x) + alpha(x-h))/h^2 + C alpha`.
///
/// `alpha` is evaluated on the unbounded lattice, so this checks the weight
/// itself rather than any boundary treatment.
pub fn condition_residual(alpha: TAlpha, c: f64, mesh: &Mesh, t: f64) -> f64 {
    let h = mesh.h();
    mesh.coords().into_iter().fold(0.0, |m, x| {
        let second =
            (alpha.alpha(t, x + h) - 2.0 * alpha.alpha(t, x) + alpha.alpha(t, x - h)) / (h * h);
        let r = alpha.alpha_tt(t, x) - second + c * alpha.alpha(t, x);
        m.max(r.abs())
    })
}

/// `T = sum (alpha(t,x) w - alpha_t(t,x) v) h`.
#[derive(Debug, Clone)]
pub struct SuperpositionT {
    alpha: TAlpha,
    name: String,
}

pub fn superposition_t(alpha: TAlpha) -> SuperpositionT {
    SuperpositionT {
        alpha,
        name: format!("T[{}]", alpha.label()),
    }
}

impl SuperpositionT {
    pub fn alpha(&self) -> TAlpha {
        self.alpha
    }

    fn weights(&self, mesh: &Mesh, t: f64, f: impl Fn(f64, f64) -> f64) -> LatticeField {
        LatticeField::from_raw(*mesh, mesh.coords().into_iter().map(|x| f(t, x)).collect())
    }
}

impl Functional for SuperpositionT {
    fn name(&self) -> &str {
        &self.name
    }

    fn density(&self, s: &CanonicalState) -> Vec<f64> {
        let a = self.alpha;
        let t = s.t();
        s.mesh()
            .coords()
            .into_iter()
            .zip(s.v().values().iter().zip(s.w().values()))
            .map(|(x, (&v, &w))| a.alpha(t, x) * w - a.alpha_t(t, x) * v)
            .collect()
    }

    fn var_v(&self, s: &CanonicalState) -> LatticeField {
        let a = self.alpha;
        self.weights(s.mesh(), s.t(), |t, x| -a.alpha_t(t, x))
    }

    fn var_w(&self, s: &CanonicalState) -> LatticeField {
        let a = self.alpha;
        self.weights(s.mesh(), s.t(), |t, x| a.alpha(t, x))
    }

    fn is_time_dependent(&self) -> bool {
        self.alpha.depends_on_t()
    }

    fn partial_t(&self, s: &CanonicalState) -> f64 {
        let a = self.alpha;
        let t = s.t();
        let sum: f64 = s
            .mesh()
            .coords()
            .into_iter()
            .zip(s.v().values().iter().zip(s.w().values()))
            .map(|(x, (&v, &w))| a.alpha_t(t, x) * w - a.alpha_tt(t, x) * v)
            .sum();
        s.mesh().h() * sum
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.alpha.depends_on_x() && mesh.is_periodic() {
            return Err(Error::PeriodicNotAllowed {
                what: "an x-dependent superposition weight",
            });
        }
        Ok(())
    }
}

/// `P★ = t H + sum x w D̃₀(v) h` for the wave system; not conserved.
#[derive(Clone)]
pub struct PStar {
    op: ShiftSeriesOperator,
    energy: Arc<dyn Functional>,
}

pub fn negative_p_star(dtilde0: ShiftSeriesOperator, potential: WavePotential) -> Result<PStar> {
    check_skew(&dtilde0)?;
    Ok(PStar {
        op: dtilde0,
        energy: energy_wave(potential),
    })
}

impl Functional for PStar {
    fn name(&self) -> &str {
        "pstar"
    }

    fn density(&self, s: &CanonicalState) -> Vec<f64> {
        let dv = apply_checked(&self.op, s.v());
        let mesh = s.mesh();
        let mut out: Vec<f64> = (0..mesh.n_points())
            .map(|j| mesh.x(j as isize) * s.w().values()[j] * dv.values()[j])
            .collect();
        // t H contributes t times the energy density; its stencil may reach
        // one site past the window, which is appended.
        let t = s.t();
        let energy = self.energy.density(s);
        if energy.len() == out.len() {
            for (o, e) in out.iter_mut().zip(energy) {
                *o += t * e;
            }
        } else {
            out.extend(energy.into_iter().map(|e| t * e));
        }
        out
    }

    fn var_v(&self, s: &CanonicalState) -> LatticeField {
        let mesh = *s.mesh();
        let xw = LatticeField::from_raw(
            mesh,
            s.w()
                .values()
                .iter()
                .enumerate()
                .map(|(j, w)| mesh.x(j as isize) * w)
                .collect(),
        );
        let mut out = apply_checked(&self.op, &xw).scale(-1.0);
        out.axpy(s.t(), &self.energy.var_v(s));
        out
    }

    fn var_w(&self, s: &CanonicalState) -> LatticeField {
        let mesh = *s.mesh();
        let dv = apply_checked(&self.op, s.v());
        let mut out = LatticeField::from_raw(
            mesh,
            dv.values()
                .iter()
                .enumerate()
                .map(|(j, d)| mesh.x(j as isize) * d)
                .collect(),
        );
        out.axpy(s.t(), &self.energy.var_w(s));
        out
    }

    fn is_time_dependent(&self) -> bool {
        true
    }

    fn partial_t(&self, s: &CanonicalState) -> f64 {
        self.energy.value(s)
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        if mesh.is_periodic() {
            return Err(Error::RequiresCompactSupport { what: "P★" });
        }
        Ok(())
    }
}

/// Discrete transcription of the Galilean functional
/// `P4 = sum ((x/2)(v^2 + w^2) + t (w D̃₀v - v D̃₀w)) h`; not conserved.
#[derive(Debug, Clone)]
pub struct Galilean {
    op: ShiftSeriesOperator,
}

pub fn negative_galilean(dtilde0: ShiftSeriesOperator) -> Result<Galilean> {
    check_skew(&dtilde0)?;
    Ok(Galilean { op: dtilde0 })
}

impl Functional for Galilean {
    fn name(&self) -> &str {
        "galilean"
    }

    fn density(&self, s: &CanonicalState) -> Vec<f64> {
        let mesh = s.mesh();
        let dv = apply_checked(&self.op, s.v());
        let dw = apply_checked(&self.op, s.w());
        let (v, w) = (s.v().values(), s.w().values());
        (0..mesh.n_points())
            .map(|j| {
                let x = mesh.x(j as isize);
                0.5 * x * (v[j] * v[j] + w[j] * w[j])
                    + s.t() * (w[j] * dv.values()[j] - v[j] * dw.values()[j])
            })
            .collect()
    }

    fn var_v(&self, s: &CanonicalState) -> LatticeField {
        let mesh = *s.mesh();
        let dw = apply_checked(&self.op, s.w());
        let v = s.v().values();
        LatticeField::from_raw(
            mesh,
            (0..mesh.n_points())
                .map(|j| mesh.x(j as isize) * v[j] - 2.0 * s.t() * dw.values()[j])
                .collect(),
        )
    }

    fn var_w(&self, s: &CanonicalState) -> LatticeField {
        let mesh = *s.mesh();
        let dv = apply_checked(&self.op, s.v());
        let w = s.w().values();
        LatticeField::from_raw(
            mesh,
            (0..mesh.n_points())
                .map(|j| mesh.x(j as isize) * w[j] + 2.0 * s.t() * dv.values()[j])
                .collect(),
        )
    }

    fn is_time_dependent(&self) -> bool {
        true
    }

    fn partial_t(&self, s: &CanonicalState) -> f64 {
        let h = s.mesh().h();
        let dv = apply_checked(&self.op, s.v());
        let dw = apply_checked(&self.op, s.w());
        h * (dot(s.w().values(), dv.values()) - dot(s.v().values(), dw.values()))
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        if mesh.is_periodic() {
            return Err(Error::RequiresCompactSupport {
                what: "the Galilean functional",
            });
        }
        Ok(())
    }
}

/// Evolutionary form of the scaling symmetry `2t d/dt + x d/dx - v d/dv - w d/dw`
/// of the NLS system, with `u_x` replaced by `D̃₀ u`:
/// `eta = -u - 2t u' - x D̃₀ u` for `u = v, w`.
pub fn nls_scaling_field(sys: SystemSpec, dtilde0: ShiftSeriesOperator) -> HamiltonianVectorField {
    HamiltonianVectorField::new("X5", move |s| {
        let (vdot, wdot) = sys.rhs(s);
        let mesh = *s.mesh();
        let make = |u: &LatticeField, udot: &LatticeField| {
            let du = apply_checked(&dtilde0, u);
            LatticeField::from_raw(
                mesh,
                (0..mesh.n_points())
                    .map(|j| {
                        -u.values()[j]
                            - 2.0 * s.t() * udot.values()[j]
                            - mesh.x(j as isize) * du.values()[j]
                    })
                    .collect(),
            )
        };
        (make(s.v(), &vdot), make(s.w(), &wdot))
    })
}

/// Scale-free bracket `|{P, H}| / (|grad P| |grad H|)`, with `h`-weighted norms.
///
/// By Cauchy-Schwarz the ratio never exceeds one.
pub fn bracket_ratio(p: &dyn Functional, hamiltonian: &dyn Functional, s: &CanonicalState) -> f64 {
    let h = s.mesh().h();
    let (pv, pw) = (p.var_v(s), p.var_w(s));
    let (hv, hw) = (hamiltonian.var_v(s), hamiltonian.var_w(s));
    let bracket = h * (dot(pv.values(), hw.values()) - dot(pw.values(), hv.values()));
    let norm = |a: &LatticeField, b: &LatticeField| {
        (h * (dot(a.values(), a.values()) + dot(b.values(), b.values()))).sqrt()
    };
    let scale = norm(&pv, &pw) * norm(&hv, &hw);
    if scale == 0.0 {
        bracket.abs()
    } else {
        bracket.abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Conserved,
    AffineConserved,
    Violated,
}

/// Threshold on the drift of a monitored functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DriftTolerance {
    /// Relative to `max_t |value(t)|`.
    Relative(f64),
    Absolute(f64),
}

/// Least-squares line `value ≈ a t + b`.
pub fn affine_fit(samples: &[(f64, f64)]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return (0.0, samples.first().map_or(0.0, |s| s.1));
    }
    let mean_t = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_v = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut stt, mut stv) = (0.0, 0.0);
    for &(t, v) in samples {
        stt += (t - mean_t) * (t - mean_t);
        stv += (t - mean_t) * (v - mean_v);
    }
    let a = if stt > 0.0 { stv / stt } else { 0.0 };
    (a, mean_v - a * mean_t)
}

/// Drift history and verdict for one functional.
#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    pub name: String,
    #[serde(skip)]
    pub samples: Vec<(f64, f64)>,
    /// `max |value(t) - value(0)|`.
    pub drift_raw: f64,
    /// `max |value(t) - (a t + b)|` after the least-squares affine fit.
    pub drift_detrended: f64,
    pub affine_fit: (f64, f64),
    /// Whether an affine offset may be discounted (autonomous functional).
    pub affine_permitted: bool,
    /// `max_t |value(t)|`.
    pub scale: f64,
    pub tolerance: DriftTolerance,
    pub verdict: Verdict,
}

impl ConservationReport {
    pub fn from_samples(
        name: impl Into<String>,
        samples: Vec<(f64, f64)>,
        affine_permitted: bool,
        tolerance: DriftTolerance,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no samples to report on".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument(
                "sample times must be strictly increasing".into(),
            ));
        }
        let v0 = samples[0].1;
        let drift_raw = samples.iter().fold(0.0f64, |m, s| m.max((s.1 - v0).abs()));
        let scale = samples.iter().fold(0.0f64, |m, s| m.max(s.1.abs()));
        let (a, b) = affine_fit(&samples);
        let drift_detrended = samples
            .iter()
            .fold(0.0f64, |m, &(t, v)| m.max((v - (a * t + b)).abs()));
        let mut report = Self {
            name: name.into(),
            samples,
            drift_raw,
            drift_detrended,
            affine_fit: (a, b),
            affine_permitted,
            scale,
            tolerance,
            verdict: Verdict::Violated,
        };
        report.verdict = report.classify(tolerance);
        Ok(report)
    }

    /// Drift threshold implied by a tolerance.
    pub fn threshold(&self, tolerance: DriftTolerance) -> f64 {
        match tolerance {
            DriftTolerance::Relative(r) => r * self.scale,
            DriftTolerance::Absolute(a) => a,
        }
    }

    fn classify(&self, tolerance: DriftTolerance) -> Verdict {
        let threshold = self.threshold(tolerance);
        if self.drift_raw <= threshold {
            Verdict::Conserved
        } else if self.affine_permitted && self.drift_detrended <= threshold {
            Verdict::AffineConserved
        } else {
            Verdict::Violated
        }
    }

    /// The same report judged under another tolerance.
    pub fn with_tolerance(&self, tolerance: DriftTolerance) -> Self {
        let mut out = self.clone();
        out.tolerance = tolerance;
        out.verdict = self.classify(tolerance);
        out
    }

    /// `drift_raw / scale` (or the raw drift when the functional vanishes).
    pub fn relative_drift(&self) -> f64 {
        if self.scale > 0.0 {
            self.drift_raw / self.scale
        } else {
            self.drift_raw
        }
    }

    pub fn is_conserved(&self) -> bool {
        self.verdict != Verdict::Violated
    }
}

/// Slope of `ln drift` against `ln dt` by least squares.
pub fn drift_order(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(dt, d)| (dt.ln(), d.ln())).collect();
    affine_fit(&logs).0
}

/// Settings for [`monitor`].
#[derive(Debug, Clone, Copy)]
pub struct MonitorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    /// Sample every `stride` steps.
    pub stride: usize,
    pub tolerance: DriftTolerance,
    /// Edge buffer fraction for the decay check on compact-support meshes.
    pub buffer_fraction: f64,
}

impl MonitorConfig {
    pub fn new(dt: f64, t_end: f64, integrator: Integrator, tolerance: DriftTolerance) -> Self {
        Self {
            dt,
            t_end,
            integrator,
            stride: 10,
            tolerance,
            buffer_fraction: DEFAULT_BUFFER_FRACTION,
        }
    }
}

/// Result of [`monitor`].
#[derive(Debug, Clone)]
pub struct MonitorRun {
    pub reports: Vec<ConservationReport>,
    pub final_state: CanonicalState,
    pub n_steps: usize,
    /// Largest edge-buffer magnitude seen (compact-support meshes only).
    pub max_decay_margin: Option<f64>,
}

impl MonitorRun {
    pub fn report(&self, name: &str) -> Option<&ConservationReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

/// Integrates `sys` and records every functional at each sampled state.
pub fn monitor(
    sys: &SystemSpec,
    functionals: &[Arc<dyn Functional>],
    state0: &CanonicalState,
    cfg: &MonitorConfig,
) -> Result<MonitorRun> {
    let mesh = *state0.mesh();
    for f in functionals {
        f.validate(&mesh)?;
    }
    let n_steps = step_count(cfg.dt, cfg.t_end)?;
    let mut samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); functionals.len()];
    let mut margin: Option<f64> = None;
    let final_state = integrate(
        sys,
        state0,
        cfg.dt,
        n_steps,
        cfg.integrator,
        cfg.stride,
        |_, s| {
            for (f, out) in functionals.iter().zip(samples.iter_mut()) {
                out.push((s.t(), f.value(s)));
            }
            if !mesh.is_periodic() {
                let m = s
                    .v()
                    .decay_margin(cfg.buffer_fraction)?
                    .max(s.w().decay_margin(cfg.buffer_fraction)?);
                margin = Some(margin.map_or(m, |old: f64| old.max(m)));
            }
            Ok(())
        },
    )?;
    let reports = functionals
        .iter()
        .zip(samples)
        .map(|(f, s)| {
            ConservationReport::from_samples(f.name(), s, !f.is_time_dependent(), cfg.tolerance)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonitorRun {
        reports,
        final_state,
        n_steps,
        max_decay_margin: margin,
    })
}
