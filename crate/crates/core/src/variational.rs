//! Sum-over-mesh functionals, their variational derivatives, the canonical
//! bracket, and evolutionary vector fields.
//!
//! A functional is `P = h sum_j P_j(t, x_j, v, w)`. For local densities the
//! variational derivative follows the adjoint-shift rule
//! `dP/dv_i = sum_j sum_s [i = j + s] dP_j/dv_{j+s}`, implemented once in
//! [`StencilFunctional`]. Nonlocal functionals implement [`Functional`] directly
//! with closed-form derivatives.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{dot, LatticeField, Mesh};
use crate::systems::CanonicalState;

/// A lattice functional with variational derivatives in closed form.
pub trait Functional: Send + Sync {
    fn name(&self) -> &str;

    /// Per-site density values. On compact-support meshes this may include sites
    /// just outside the window that a stencil reaches into.
    fn density(&self, s: &CanonicalState) -> Vec<f64>;

    /// `h * sum_j density_j`.
    fn value(&self, s: &CanonicalState) -> f64 {
        s.mesh().h() * self.density(s).iter().sum::<f64>()
    }

    /// `dP/dv`.
    fn var_v(&self, s: &CanonicalState) -> LatticeField;

    /// `dP/dw`.
    fn var_w(&self, s: &CanonicalState) -> LatticeField;

    /// True if the density depends explicitly on `t`.
    fn is_time_dependent(&self) -> bool {
        false
    }

    /// Explicit time derivative `dP/dt` at fixed fields.
    fn partial_t(&self, _s: &CanonicalState) -> f64 {
        0.0
    }

    /// Rejects meshes the functional cannot be evaluated on.
    fn validate(&self, _mesh: &Mesh) -> Result<()> {
        Ok(())
    }
}

/// Values seen by a local density at one site. `v[i]` is `v_{j + offsets[i]}`.
#[derive(Debug, Clone, Copy)]
pub struct Site<'a> {
    pub t: f64,
    pub x: f64,
    pub h: f64,
    pub v: &'a [f64],
    pub w: &'a [f64],
}

/// A density depending on finitely many shifted field values.
pub trait LocalDensity: Send + Sync {
    /// Shift offsets read by the density, in the order of [`Site::v`].
    fn offsets(&self) -> &[isize];

    fn eval(&self, site: &Site) -> f64;

    /// Writes `dP_j/dv_{j+s}` and `dP_j/dw_{j+s}` for each offset `s`.
    fn partials(&self, site: &Site, dv: &mut [f64], dw: &mut [f64]);
}

/// Functional built from a [`LocalDensity`]; derivatives by the adjoint-shift rule.
pub struct StencilFunctional<D> {
    name: String,
    density: D,
}

impl<D: LocalDensity> StencilFunctional<D> {
    pub fn new(name: impl Into<String>, density: D) -> Self {
        Self {
            name: name.into(),
            density,
        }
    }

    pub fn local_density(&self) -> &D {
        &self.density
    }

    /// Sites whose density is nonzero in general: the whole ring when periodic,
    /// otherwise every site whose stencil touches the window.
    fn site_range(&self, mesh: &Mesh) -> std::ops::Range<isize> {
        let n = mesh.n_points() as isize;
        if mesh.is_periodic() {
            return 0..n;
        }
        let offsets = self.density.offsets();
        let lo = offsets.iter().copied().max().unwrap_or(0);
        let hi = offsets.iter().copied().min().unwrap_or(0);
        -lo..n - hi
    }

    fn for_each_site(&self, s: &CanonicalState, mut f: impl FnMut(isize, &Site)) {
        let mesh = s.mesh();
        let offsets = self.density.offsets();
        let mut v = vec![0.0; offsets.len()];
        let mut w = vec![0.0; offsets.len()];
        for j in self.site_range(mesh) {
            for (i, &o) in offsets.iter().enumerate() {
                v[i] = s.v().at(j + o);
                w[i] = s.w().at(j + o);
            }
            let site = Site {
                t: s.t(),
                x: mesh.x(j),
                h: mesh.h(),
                v: &v,
                w: &w,
            };
            f(j, &site);
        }
    }

    fn derivatives(&self, s: &CanonicalState) -> (LatticeField, LatticeField) {
        let mesh = *s.mesh();
        let offsets = self.density.offsets();
        let mut out_v = vec![0.0; mesh.n_points()];
        let mut out_w = vec![0.0; mesh.n_points()];
        let mut dv = vec![0.0; offsets.len()];
        let mut dw = vec![0.0; offsets.len()];
        self.for_each_site(s, |j, site| {
            self.density.partials(site, &mut dv, &mut dw);
            for (i, &o) in offsets.iter().enumerate() {
                if let Some(k) = mesh.resolve(j + o) {
                    out_v[k] += dv[i];
                    out_w[k] += dw[i];
                }
            }
        });
        (
            LatticeField::from_raw(mesh, out_v),
            LatticeField::from_raw(mesh, out_w),
        )
    }
}

impl<D: LocalDensity> Functional for StencilFunctional<D> {
    fn name(&self) -> &str {
        &self.name
    }

    fn density(&self, s: &CanonicalState) -> Vec<f64> {
        let mut out = Vec::with_capacity(s.mesh().n_points() + 2);
        self.for_each_site(s, |_, site| out.push(self.density.eval(site)));
        out
    }

    fn var_v(&self, s: &CanonicalState) -> LatticeField {
        self.derivatives(s).0
    }

    fn var_w(&self, s: &CanonicalState) -> LatticeField {
        self.derivatives(s).1
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        let offsets = self.density.offsets();
        let lo = offsets.iter().copied().min().unwrap_or(0);
        let hi = offsets.iter().copied().max().unwrap_or(0);
        let width = (hi - lo + 1) as usize;
        if mesh.is_periodic() && width >= mesh.n_points() {
            return Err(Error::SupportTooWide {
                width,
                n_points: mesh.n_points(),
            });
        }
        Ok(())
    }
}

/// Canonical bracket `{P, L} = h sum_j (dP/dv dL/dw - dP/dw dL/dv)`.
pub fn poisson_bracket(p: &dyn Functional, l: &dyn Functional, s: &CanonicalState) -> f64 {
    let h = s.mesh().h();
    let a = dot(p.var_v(s).values(), l.var_w(s).values());
    let b = dot(p.var_w(s).values(), l.var_v(s).values());
    h * (a - b)
}

type FieldFn = dyn Fn(&CanonicalState) -> (LatticeField, LatticeField) + Send + Sync;

/// Evolutionary vector field `eta_v d/dv + eta_w d/dw`.
///
/// Hamiltonian when `(eta_v, eta_w) = (dP/dw, -dP/dv)` for some functional `P`.
#[derive(Clone)]
pub struct HamiltonianVectorField {
    name: String,
    eta: Arc<FieldFn>,
}

impl std::fmt::Debug for HamiltonianVectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianVectorField")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl HamiltonianVectorField {
    pub fn new(
        name: impl Into<String>,
        eta: impl Fn(&CanonicalState) -> (LatticeField, LatticeField) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            eta: Arc::new(eta),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `(eta_v, eta_w)` at a state.
    pub fn eval(&self, s: &CanonicalState) -> (LatticeField, LatticeField) {
        (self.eta)(s)
    }
}

/// `X_P = dP/dw d/dv - dP/dv d/dw`.
pub fn hamiltonian_field_of(p: Arc<dyn Functional>) -> HamiltonianVectorField {
    let name = format!("X[{}]", p.name());
    HamiltonianVectorField::new(name, move |s| (p.var_w(s), p.var_v(s).scale(-1.0)))
}

/// `max|eta_v - dP/dw| + max|eta_w + dP/dv|` at one state.
pub fn field_deviation(
    field: &HamiltonianVectorField,
    candidate: &dyn Functional,
    s: &CanonicalState,
) -> f64 {
    let (eta_v, eta_w) = field.eval(s);
    let dv = eta_v.zip_map(&candidate.var_w(s), |a, b| a - b).max_abs();
    let dw = eta_w.zip_map(&candidate.var_v(s), |a, b| a + b).max_abs();
    dv + dw
}

/// True iff `field` is the Hamiltonian field of `candidate` at every sample state.
pub fn is_hamiltonian_field(
    field: &HamiltonianVectorField,
    candidate: &dyn Functional,
    states: &[CanonicalState],
    tol: f64,
) -> bool {
    !states.is_empty()
        && states
            .iter()
            .all(|s| field_deviation(field, candidate, s) < tol)
}

/// Relative asymmetry of the derivative of `J^{-1} eta = (-eta_w, eta_v)`.
///
/// A Hamiltonian field has `J^{-1} eta = grad P`, whose derivative is a
/// symmetric Hessian, so `<a, Dg b> = <b, Dg a>` for all directions. The
/// directional derivatives are central differences with step `eps`; the
/// returned value is `|<a,Dg b> - <b,Dg a>| / max(|<a,Dg b>|, |<b,Dg a>|)`.
/// It stays at finite-difference noise for Hamiltonian fields and is of order
/// one for fields that admit no generating functional.
pub fn gradient_asymmetry(
    field: &HamiltonianVectorField,
    s: &CanonicalState,
    a: (&LatticeField, &LatticeField),
    b: (&LatticeField, &LatticeField),
    eps: f64,
) -> f64 {
    let directional = |d: (&LatticeField, &LatticeField)| {
        let plus = field.eval(&s.perturbed(eps, d.0, d.1));
        let minus = field.eval(&s.perturbed(-eps, d.0, d.1));
        // g = (-eta_w, eta_v)
        let gv = plus.1.zip_map(&minus.1, |p, m| -(p - m) / (2.0 * eps));
        let gw = plus.0.zip_map(&minus.0, |p, m| (p - m) / (2.0 * eps));
        (gv, gw)
    };
    let h = s.mesh().h();
    let pair = |x: (&LatticeField, &LatticeField), y: &(LatticeField, LatticeField)| {
        h * (dot(x.0.values(), y.0.values()) + dot(x.1.values(), y.1.values()))
    };
    let ab = pair(a, &directional(b));
    let ba = pair(b, &directional(a));
    let scale = ab.abs().max(ba.abs());
    if scale == 0.0 {
        0.0
    } else {
        (ab - ba).abs() / scale
    }
}

/// Central-difference Gateaux defect
/// `|(P(s + eps d) - P(s - eps d)) / (2 eps) - <dP/dv, d_v> - <dP/dw, d_w>|`
/// together with the round-off floor of the difference quotient.
pub fn gateaux_defect(
    p: &dyn Functional,
    s: &CanonicalState,
    dir_v: &LatticeField,
    dir_w: &LatticeField,
    eps: f64,
) -> (f64, f64) {
    let plus = p.value(&s.perturbed(eps, dir_v, dir_w));
    let minus = p.value(&s.perturbed(-eps, dir_v, dir_w));
    let fd = (plus - minus) / (2.0 * eps);
    let h = s.mesh().h();
    let exact =
        h * (dot(p.var_v(s).values(), dir_v.values()) + dot(p.var_w(s).values(), dir_w.values()));
    let magnitude = plus.abs().max(minus.abs()).max(p.value(s).abs());
    let floor = 64.0 * f64::EPSILON * magnitude / eps + 64.0 * f64::EPSILON * exact.abs();
    ((fd - exact).abs(), floor)
}

/// Outcome of a Gateaux test at several step sizes.
#[derive(Debug, Clone)]
pub struct GateauxCheck {
    /// `(eps, defect, round-off floor)` per step size, largest step first.
    pub defects: Vec<(f64, f64, f64)>,
    /// Observed convergence order between consecutive steps above the floor.
    pub orders: Vec<f64>,
    pub passed: bool,
}

/// Runs [`gateaux_defect`] for each step in `eps` and checks second-order decay.
///
/// A pair of consecutive steps passes if the defect decays at order at least
/// 1.8, or if the smaller-step defect already sits at the round-off floor (as
/// happens for quadratic functionals, whose central difference is exact).
pub fn gateaux_check(
    p: &dyn Functional,
    s: &CanonicalState,
    dir_v: &LatticeField,
    dir_w: &LatticeField,
    eps: &[f64],
) -> GateauxCheck {
    let mut steps = eps.to_vec();
    steps.sort_by(|a, b| b.total_cmp(a));
    let defects: Vec<(f64, f64, f64)> = steps
        .iter()
        .map(|&e| {
            let (d, floor) = gateaux_defect(p, s, dir_v, dir_w, e);
            (e, d, floor)
        })
        .collect();
    let mut orders = Vec::new();
    let mut passed = !defects.is_empty();
    for pair in defects.windows(2) {
        let (e1, d1, _) = pair[0];
        let (e2, d2, f2) = pair[1];
        if d2 <= f2 {
            continue;
        }
        let order = (d1 / d2).ln() / (e1 / e2).ln();
        orders.push(order);
        if order < 1.8 {
            passed = false;
        }
    }
    if defects.len() == 1 {
        passed = defects[0].1 <= defects[0].2;
    }
    GateauxCheck {
        defects,
        orders,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete_ops::{d_plus, second_difference};
    use crate::lattice::Boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct HalfWSquared;
    impl LocalDensity for HalfWSquared {
        fn offsets(&self) -> &[isize] {
            &[0]
        }
        fn eval(&self, s: &Site) -> f64 {
            0.5 * s.w[0] * s.w[0]
        }
        fn partials(&self, s: &Site, dv: &mut [f64], dw: &mut [f64]) {
            dv[0] = 0.0;
            dw[0] = s.w[0];
        }
    }

    struct HalfGradientSquared;
    impl LocalDensity for HalfGradientSquared {
        fn offsets(&self) -> &[isize] {
            &[0, 1]
        }
        fn eval(&self, s: &Site) -> f64 {
            let g = (s.v[1] - s.v[0]) / s.h;
            0.5 * g * g
        }
        fn partials(&self, s: &Site, dv: &mut [f64], dw: &mut [f64]) {
            let g = (s.v[1] - s.v[0]) / s.h;
            dv[0] = -g / s.h;
            dv[1] = g / s.h;
            dw[0] = 0.0;
            dw[1] = 0.0;
        }
    }

    struct QuarticPotential;
    impl LocalDensity for QuarticPotential {
        fn offsets(&self) -> &[isize] {
            &[0]
        }
        fn eval(&self, s: &Site) -> f64 {
            0.25 * s.v[0].powi(4) + s.x * s.w[0]
        }
        fn partials(&self, s: &Site, dv: &mut [f64], dw: &mut [f64]) {
            dv[0] = s.v[0].powi(3);
            dw[0] = s.x;
        }
    }

    fn random_state(mesh: Mesh, rng: &mut ChaCha8Rng) -> CanonicalState {
        let mut field = || {
            let values = (0..mesh.n_points())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            LatticeField::new(mesh, values).unwrap()
        };
        let v = field();
        let w = field();
        CanonicalState::new(0.3, v, w).unwrap()
    }

    fn meshes() -> [Mesh; 2] {
        [
            Mesh::new(0.2, 24, -1.0, Boundary::Periodic).unwrap(),
            Mesh::new(0.2, 24, -1.0, Boundary::CompactSupport).unwrap(),
        ]
    }

    #[test]
    fn pointwise_density_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for mesh in meshes() {
            let s = random_state(mesh, &mut rng);
            let f = StencilFunctional::new("w2", HalfWSquared);
            assert_eq!(f.var_w(&s), *s.w());
            assert_eq!(f.var_v(&s).max_abs(), 0.0);
            let naive: f64 = s.w().values().iter().map(|w| 0.5 * w * w * 0.2).sum();
            assert!((f.value(&s) - naive).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_density_gives_negative_second_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for mesh in meshes() {
            let s = random_state(mesh, &mut rng);
            let f = StencilFunctional::new("grad", HalfGradientSquared);
            let expected = second_difference(s.v()).scale(-1.0);
            let got = f.var_v(&s);
            for (a, b) in got.values().iter().zip(expected.values()) {
                assert!((a - b).abs() < 1e-11 * b.abs().max(1.0));
            }
            // value includes the edge term reaching into the window on compact meshes
            let mut naive: f64 = d_plus(s.v())
                .values()
                .iter()
                .map(|g| 0.5 * g * g * 0.2)
                .sum();
            if !mesh.is_periodic() {
                let g = s.v().values()[0] / 0.2;
                naive += 0.5 * g * g * 0.2;
            }
            assert!((f.value(&s) - naive).abs() < 1e-11 * naive);
        }
    }

    #[test]
    fn potential_density_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(meshes()[1], &mut rng);
        let f = StencilFunctional::new("quartic", QuarticPotential);
        assert_eq!(f.var_v(&s), s.v().map(|v| v.powi(3)));
        assert_eq!(f.var_w(&s).values(), s.mesh().coords().as_slice());
    }

    #[test]
    fn bracket_antisymmetry_and_self_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = StencilFunctional::new("grad", HalfGradientSquared);
        let b = StencilFunctional::new("quartic", QuarticPotential);
        let c = StencilFunctional::new("w2", HalfWSquared);
        for mesh in meshes() {
            let s = random_state(mesh, &mut rng);
            let fs: [&dyn Functional; 3] = [&a, &b, &c];
            for p in fs {
                assert_eq!(poisson_bracket(p, p, &s), 0.0);
                for l in fs {
                    let pl = poisson_bracket(p, l, &s);
                    let lp = poisson_bracket(l, p, &s);
                    assert!((pl + lp).abs() <= 1e-12 * pl.abs().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn bracket_is_bilinear() {
        struct Sum<'a>(&'a dyn Functional, &'a dyn Functional, f64);
        impl Functional for Sum<'_> {
            fn name(&self) -> &str {
                "sum"
            }
            fn density(&self, _s: &CanonicalState) -> Vec<f64> {
                unimplemented!()
            }
            fn value(&self, s: &CanonicalState) -> f64 {
                self.0.value(s) + self.2 * self.1.value(s)
            }
            fn var_v(&self, s: &CanonicalState) -> LatticeField {
                let mut f = self.0.var_v(s);
                f.axpy(self.2, &self.1.var_v(s));
                f
            }
            fn var_w(&self, s: &CanonicalState) -> LatticeField {
                let mut f = self.0.var_w(s);
                f.axpy(self.2, &self.1.var_w(s));
                f
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = StencilFunctional::new("grad", HalfGradientSquared);
        let b = StencilFunctional::new("quartic", QuarticPotential);
        let c = StencilFunctional::new("w2", HalfWSquared);
        let s = random_state(meshes()[0], &mut rng);
        let combo = Sum(&a, &b, 0.7);
        let lhs = poisson_bracket(&combo, &c, &s);
        let rhs = poisson_bracket(&a, &c, &s) + 0.7 * poisson_bracket(&b, &c, &s);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn hamiltonian_field_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p: Arc<dyn Functional> = Arc::new(StencilFunctional::new("quartic", QuarticPotential));
        let field = hamiltonian_field_of(Arc::clone(&p));
        let states: Vec<_> = (0..3)
            .map(|_| random_state(meshes()[1], &mut rng))
            .collect();
        assert!(is_hamiltonian_field(&field, p.as_ref(), &states, 1e-14));
        assert!(!is_hamiltonian_field(&field, p.as_ref(), &[], 1e-14));

        let shifted = {
            let field = field.clone();
            HamiltonianVectorField::new("shifted", move |s| {
                let (v, w) = field.eval(s);
                (v.map(|x| x + 1.0), w)
            })
        };
        assert!(!is_hamiltonian_field(&shifted, p.as_ref(), &states, 1e-6));
    }

    #[test]
    fn gradient_asymmetry_separates_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mesh = meshes()[0];
        let s = random_state(mesh, &mut rng);
        let a = random_state(mesh, &mut rng);
        let b = random_state(mesh, &mut rng);
        let p: Arc<dyn Functional> = Arc::new(StencilFunctional::new("quartic", QuarticPotential));
        let ham = hamiltonian_field_of(p);
        let asym = gradient_asymmetry(&ham, &s, (a.v(), a.w()), (b.v(), b.w()), 1e-4);
        assert!(asym < 1e-6, "{asym}");

        // (eta_v, eta_w) = (D+ v, 0): J^{-1} eta = (0, D+ v), not a gradient.
        let skewed = HamiltonianVectorField::new("skewed", |s| {
            (d_plus(s.v()), LatticeField::zeros(*s.mesh()))
        });
        let asym = gradient_asymmetry(&skewed, &s, (a.v(), a.w()), (b.v(), b.w()), 1e-4);
        assert!(asym > 1e-2, "{asym}");
    }

    #[test]
    fn gateaux_passes_for_stencil_functionals() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for mesh in meshes() {
            let s = random_state(mesh, &mut rng);
            let d = random_state(mesh, &mut rng);
            let fs: [&dyn Functional; 3] = [
                &StencilFunctional::new("grad", HalfGradientSquared),
                &StencilFunctional::new("quartic", QuarticPotential),
                &StencilFunctional::new("w2", HalfWSquared),
            ];
            for f in fs {
                let check = gateaux_check(f, &s, d.v(), d.w(), &[1e-4, 1e-5]);
                assert!(check.passed, "{}: {check:?}", f.name());
            }
        }
    }

    #[test]
    fn gateaux_detects_wrong_derivative() {
        struct Wrong;
        impl LocalDensity for Wrong {
            fn offsets(&self) -> &[isize] {
                &[0]
            }
            fn eval(&self, s: &Site) -> f64 {
                s.v[0].powi(3)
            }
            fn partials(&self, s: &Site, dv: &mut [f64], dw: &mut [f64]) {
                dv[0] = 2.0 * s.v[0] * s.v[0];
                dw[0] = 0.0;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_state(meshes()[0], &mut rng);
        let d = random_state(meshes()[0], &mut rng);
        let f = StencilFunctional::new("wrong", Wrong);
        assert!(!gateaux_check(&f, &s, d.v(), d.w(), &[1e-4, 1e-5]).passed);
    }

    #[test]
    fn validate_rejects_wide_periodic_stencil() {
        struct Wide;
        impl LocalDensity for Wide {
            fn offsets(&self) -> &[isize] {
                &[-2, 0, 2]
            }
            fn eval(&self, _: &Site) -> f64 {
                0.0
            }
            fn partials(&self, _: &Site, dv: &mut [f64], dw: &mut [f64]) {
                dv.fill(0.0);
                dw.fill(0.0);
            }
        }
        let f = StencilFunctional::new("wide", Wide);
        let small = Mesh::new(0.1, 4, 0.0, Boundary::Periodic).unwrap();
        assert!(f.validate(&small).is_err());
        let compact = Mesh::new(0.1, 4, 0.0, Boundary::CompactSupport).unwrap();
        assert!(f.validate(&compact).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn bracket_antisymmetric_on_random_states(seed in 0u64..1_000_000, periodic in proptest::bool::ANY) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_state(meshes()[usize::from(!periodic)], &mut rng);
            let a = StencilFunctional::new("grad", HalfGradientSquared);
            let b = StencilFunctional::new("quartic", QuarticPotential);
            let pl = poisson_bracket(&a, &b, &s);
            let lp = poisson_bracket(&b, &a, &s);
            proptest::prop_assert!((pl + lp).abs() <= 1e-12 * pl.abs().max(1.0));
        }
    }
}
