//! Second-order (Euler-Lagrange) form of the wave system and its Legendre
//! correspondence with the canonical form.
//!
//! `L = sum (vdot^2/2 - (D+ v)^2/2 - V(v)) h` gives `vddot = v_2 - V'(v)`, and
//! the Legendre map is `w = dL/dvdot = vdot`.

use crate::discrete_ops::{
    d_plus, d_zero, even_difference, second_difference, ShiftSeriesOperator,
};
use crate::error::{Error, Result};
use crate::lattice::{dot, LatticeField, Mesh};
use crate::systems::{CanonicalState, WavePotential};

/// `(v, vdot)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderState {
    t: f64,
    v: LatticeField,
    vdot: LatticeField,
}

impl SecondOrderState {
    pub fn new(t: f64, v: LatticeField, vdot: LatticeField) -> Result<Self> {
        if v.mesh() != vdot.mesh() {
            return Err(Error::MeshMismatch);
        }
        v.check_finite()?;
        vdot.check_finite()?;
        Ok(Self { t, v, vdot })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn v(&self) -> &LatticeField {
        &self.v
    }

    pub fn vdot(&self) -> &LatticeField {
        &self.vdot
    }

    pub fn mesh(&self) -> &Mesh {
        self.v.mesh()
    }
}

/// Acceleration `v_2 - V'(v)` from the discrete Euler-Lagrange equation.
pub fn euler_lagrange_rhs(potential: WavePotential, s: &SecondOrderState) -> LatticeField {
    let lap = second_difference(s.v());
    lap.zip_map(s.v(), |l, v| l - potential.derivative(v))
}

/// `w = vdot`.
pub fn legendre(s: &SecondOrderState) -> CanonicalState {
    CanonicalState::from_parts(s.t, s.v.clone(), s.vdot.clone())
}

/// `vdot = w`.
pub fn inverse_legendre(s: &CanonicalState) -> SecondOrderState {
    SecondOrderState {
        t: s.t(),
        v: s.v().clone(),
        vdot: s.w().clone(),
    }
}

fn gradient_energy(v: &LatticeField) -> f64 {
    // sum over every forward difference touching the window, (D+ v)^2 / 2
    let h = v.mesh().h();
    let mut total: f64 = d_plus(v).values().iter().map(|g| 0.5 * g * g).sum();
    if !v.mesh().is_periodic() {
        let g = v.values()[0] / h;
        total += 0.5 * g * g;
    }
    h * total
}

/// `L = sum (vdot^2/2 - (D+ v)^2/2 - V(v)) h`.
pub fn lagrangian(potential: WavePotential, s: &SecondOrderState) -> f64 {
    let h = s.mesh().h();
    let kinetic = 0.5 * h * dot(s.vdot.values(), s.vdot.values());
    let pot: f64 = h * s
        .v
        .values()
        .iter()
        .map(|&v| potential.value(v))
        .sum::<f64>();
    kinetic - gradient_energy(&s.v) - pot
}

/// Energy by the Legendre transform, `sum vdot dL/dvdot h - L`.
pub fn legendre_energy(potential: WavePotential, s: &SecondOrderState) -> f64 {
    let h = s.mesh().h();
    h * dot(s.vdot.values(), s.vdot.values()) - lagrangian(potential, s)
}

/// Momentum in velocity form, `sum vdot D̃₀(v) h`.
pub fn momentum_lagrangian(dtilde0: &ShiftSeriesOperator, s: &SecondOrderState) -> Result<f64> {
    let dv = dtilde0.apply(&s.v)?;
    Ok(s.mesh().h() * dot(s.vdot.values(), dv.values()))
}

/// Hierarchy member in velocity form, `sum vdot D0(v_{2k}) h`.
pub fn hierarchy_lagrangian(k: usize, s: &SecondOrderState) -> f64 {
    let dv = d_zero(&even_difference(&s.v, k));
    s.mesh().h() * dot(s.vdot.values(), dv.values())
}

/// Superposition functional in velocity form, `sum (alpha vdot - alpha_t v) h`.
pub fn superposition_lagrangian(
    alpha: impl Fn(f64, f64) -> f64,
    alpha_t: impl Fn(f64, f64) -> f64,
    s: &SecondOrderState,
) -> f64 {
    let t = s.t;
    let sum: f64 = s
        .mesh()
        .coords()
        .into_iter()
        .zip(s.v.values().iter().zip(s.vdot.values()))
        .map(|(x, (&v, &vd))| alpha(t, x) * vd - alpha_t(t, x) * v)
        .sum();
    s.mesh().h() * sum
}

/// Integrates the second-order system through its first-order embedding
/// `(v, vdot)' = (vdot, v_2 - V'(v))` with classical RK4, returning every state.
pub fn integrate_second_order(
    potential: WavePotential,
    s0: &SecondOrderState,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<SecondOrderState>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let accel = |v: &LatticeField, vd: &LatticeField| {
        euler_lagrange_rhs(
            potential,
            &SecondOrderState {
                t: 0.0,
                v: v.clone(),
                vdot: vd.clone(),
            },
        )
    };
    let advance = |base: &LatticeField, k: &LatticeField, a: f64| {
        let mut out = base.clone();
        out.axpy(a, k);
        out
    };
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(s0.clone());
    let t0 = s0.t;
    for step in 1..=n_steps {
        let s = out.last().expect("trajectory is never empty");
        let (v, vd) = (&s.v, &s.vdot);
        let k1v = vd.clone();
        let k1a = accel(v, vd);
        let v2 = advance(v, &k1v, 0.5 * dt);
        let vd2 = advance(vd, &k1a, 0.5 * dt);
        let k2v = vd2.clone();
        let k2a = accel(&v2, &vd2);
        let v3 = advance(v, &k2v, 0.5 * dt);
        let vd3 = advance(vd, &k2a, 0.5 * dt);
        let k3v = vd3.clone();
        let k3a = accel(&v3, &vd3);
        let v4 = advance(v, &k3v, dt);
        let vd4 = advance(vd, &k3a, dt);
        let k4v = vd4.clone();
        let k4a = accel(&v4, &vd4);
        let combine = |base: &LatticeField, k: [&LatticeField; 4]| {
            let values = (0..base.len())
                .map(|i| {
                    base.values()[i]
                        + dt / 6.0
                            * (k[0].values()[i]
                                + 2.0 * k[1].values()[i]
                                + 2.0 * k[2].values()[i]
                                + k[3].values()[i])
                })
                .collect();
            LatticeField::from_raw(*base.mesh(), values)
        };
        let next = SecondOrderState {
            t: t0 + step as f64 * dt,
            v: combine(v, [&k1v, &k2v, &k3v, &k4v]),
            vdot: combine(vd, [&k1a, &k2a, &k3a, &k4a]),
        };
        next.v.check_finite()?;
        next.vdot.check_finite()?;
        out.push(next);
    }
    Ok(out)
}
