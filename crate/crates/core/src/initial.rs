//! Initial-condition families and seeded random smooth states.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeField, Mesh};
use crate::systems::{CanonicalState, NlsPotential, SystemKind};

/// Named initial data. `g(x) = exp(-(x - center)^2 / (2 width^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `v = A g`, `w = 0`.
    Gaussian {
        center: f64,
        width: f64,
        amplitude: f64,
    },
    /// Wave: `v = A g`, `w = -A g'` (right-moving). NLS: same as `Gaussian`.
    MovingGaussian {
        center: f64,
        width: f64,
        amplitude: f64,
    },
    /// Wave: `v = A cos(kx)`, `w = A omega sin(kx)` with the lattice dispersion
    /// relation for `V = 0`. NLS: `v = A cos(kx)`, `w = A sin(kx)`.
    PlaneWave { wavenumber: f64, amplitude: f64 },
    /// `v = A g cos(kx)`, `w = A g sin(kx)`.
    Packet {
        center: f64,
        width: f64,
        amplitude: f64,
        wavenumber: f64,
    },
    /// Bright soliton of the continuum cubic NLS (`F = C z^2/2`, `C > 0`):
    /// `v + i w = A sech(eta (x - center)) exp(i k x)` with `eta = A sqrt(C/2)`.
    /// For the wave system the envelope is used with `w = 0`.
    Soliton {
        center: f64,
        amplitude: f64,
        wavenumber: f64,
    },
}

impl InitialCondition {
    pub fn family(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::MovingGaussian { .. } => "moving_gaussian",
            Self::PlaneWave { .. } => "plane_wave",
            Self::Packet { .. } => "packet",
            Self::Soliton { .. } => "soliton",
        }
    }

    /// Samples the initial data on `mesh` at `t = 0`.
    pub fn build(&self, kind: SystemKind, mesh: Mesh) -> Result<CanonicalState> {
        let gauss = |c: f64, s: f64| move |x: f64| (-(x - c) * (x - c) / (2.0 * s * s)).exp();
        let check_width = |s: f64| {
            if s > 0.0 && s.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "width must be positive, got {s}"
                )))
            }
        };
        let (v, w) = match *self {
            Self::Gaussian {
                center,
                width,
                amplitude,
            } => {
                check_width(width)?;
                let g = gauss(center, width);
                (
                    LatticeField::from_fn(mesh, |x| amplitude * g(x))?,
                    LatticeField::zeros(mesh),
                )
            }
            Self::MovingGaussian {
                center,
                width,
                amplitude,
            } => {
                check_width(width)?;
                let g = gauss(center, width);
                let v = LatticeField::from_fn(mesh, |x| amplitude * g(x))?;
                let w = match kind {
                    SystemKind::Wave(_) => LatticeField::from_fn(mesh, |x| {
                        amplitude * (x - center) / (width * width) * g(x)
                    })?,
                    SystemKind::Nls(_) => LatticeField::zeros(mesh),
                };
                (v, w)
            }
            Self::PlaneWave {
                wavenumber,
                amplitude,
            } => {
                let v = LatticeField::from_fn(mesh, |x| amplitude * (wavenumber * x).cos())?;
                let speed = match kind {
                    SystemKind::Wave(_) => {
                        let h = mesh.h();
                        ((2.0 - 2.0 * (wavenumber * h).cos()) / (h * h)).sqrt()
                    }
                    SystemKind::Nls(_) => 1.0,
                };
                let w =
                    LatticeField::from_fn(mesh, |x| amplitude * speed * (wavenumber * x).sin())?;
                (v, w)
            }
            Self::Packet {
                center,
                width,
                amplitude,
                wavenumber,
            } => {
                check_width(width)?;
                let g = gauss(center, width);
                (
                    LatticeField::from_fn(mesh, |x| amplitude * g(x) * (wavenumber * x).cos())?,
                    LatticeField::from_fn(mesh, |x| amplitude * g(x) * (wavenumber * x).sin())?,
                )
            }
            Self::Soliton {
                center,
                amplitude,
                wavenumber,
            } => {
                let eta = match kind {
                    SystemKind::Nls(NlsPotential::Cubic { c }) if c > 0.0 => {
                        amplitude.abs() * (0.5 * c).sqrt()
                    }
                    SystemKind::Nls(_) => {
                        return Err(Error::InvalidArgument(
                            "soliton data need a focusing cubic nonlinearity (c > 0)".into(),
                        ))
                    }
                    SystemKind::Wave(_) => amplitude.abs(),
                };
                let envelope = move |x: f64| amplitude / (eta * (x - center)).cosh();
                match kind {
                    SystemKind::Nls(_) => (
                        LatticeField::from_fn(mesh, |x| envelope(x) * (wavenumber * x).cos())?,
                        LatticeField::from_fn(mesh, |x| envelope(x) * (wavenumber * x).sin())?,
                    ),
                    SystemKind::Wave(_) => (
                        LatticeField::from_fn(mesh, envelope)?,
                        LatticeField::zeros(mesh),
                    ),
                }
            }
        };
        CanonicalState::new(0.0, v, w)
    }
}

/// Smooth random field: a sum of `bumps` Gaussians with random centres in the
/// middle half of the mesh, widths in `[0.5, 1.5]` and amplitudes in
/// `[-amplitude, amplitude]`.
pub fn random_smooth_field(
    mesh: Mesh,
    bumps: usize,
    amplitude: f64,
    rng: &mut impl Rng,
) -> LatticeField {
    let lo = mesh.x0() + 0.25 * mesh.length();
    let hi = mesh.x0() + 0.75 * mesh.length();
    let params: Vec<(f64, f64, f64)> = (0..bumps)
        .map(|_| {
            (
                rng.gen_range(lo..hi),
                rng.gen_range(0.5..1.5),
                rng.gen_range(-amplitude..amplitude),
            )
        })
        .collect();
    let values = mesh
        .coords()
        .into_iter()
        .map(|x| {
            params
                .iter()
                .map(|&(c, s, a)| a * (-(x - c) * (x - c) / (2.0 * s * s)).exp())
                .sum()
        })
        .collect();
    LatticeField::from_raw(mesh, values)
}

/// Random smooth canonical state at time `t`.
pub fn random_smooth_state(
    mesh: Mesh,
    t: f64,
    amplitude: f64,
    rng: &mut impl Rng,
) -> CanonicalState {
    let v = random_smooth_field(mesh, 3, amplitude, rng);
    let w = random_smooth_field(mesh, 3, amplitude, rng);
    CanonicalState::from_parts(t, v, w)
}
