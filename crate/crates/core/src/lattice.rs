//! Uniform one-dimensional lattices and real-valued fields on them.
//!
//! A [`Mesh`] is a fixed, uniformly spaced set of sites `x_j = x0 + j h`.
//! The infinite decaying line is replaced by one of two boundary modes:
//!
//! * [`Boundary::Periodic`]: index arithmetic wraps modulo `n_points`, so every
//!   summation-by-parts identity holds exactly.
//! * [`Boundary::CompactSupport`]: fields are identically zero outside the stored
//!   window and shifts read zeros beyond the edges. The decay hypothesis is then
//!   checked explicitly with [`LatticeField::decay_margin`].

use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default fraction of sites on each side treated as the edge buffer.
pub const DEFAULT_BUFFER_FRACTION: f64 = 0.1;
/// Default bound on field magnitudes inside the edge buffer.
pub const DEFAULT_DECAY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    CompactSupport,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("periodic"),
            Boundary::CompactSupport => f.write_str("compact_support"),
        }
    }
}

/// Uniform spatial mesh, fixed in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    h: f64,
    n_points: usize,
    x0: f64,
    boundary: Boundary,
}

impl Mesh {
    pub fn new(h: f64, n_points: usize, x0: f64, boundary: Boundary) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "spacing h must be positive, got {h}"
            )));
        }
        if n_points < 4 {
            return Err(Error::InvalidMesh(format!(
                "need at least 4 points, got {n_points}"
            )));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidMesh("x0 must be finite".into()));
        }
        Ok(Self {
            h,
            n_points,
            x0,
            boundary,
        })
    }

    /// Mesh of `n_points` sites centred on the origin.
    pub fn centered(h: f64, n_points: usize, boundary: Boundary) -> Result<Self> {
        Self::new(h, n_points, -(n_points as f64) * h / 2.0, boundary)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Coordinate of site `j`; `j` may lie outside the stored window.
    pub fn x(&self, j: isize) -> f64 {
        self.x0 + j as f64 * self.h
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n_points as isize).map(|j| self.x(j)).collect()
    }

    /// Length of the stored window, `n_points * h`.
    pub fn length(&self) -> f64 {
        self.n_points as f64 * self.h
    }

    /// Maps a possibly out-of-window index to a storage index.
    ///
    /// Periodic meshes wrap; compact-support meshes return `None` outside the window.
    #[inline]
    pub fn resolve(&self, j: isize) -> Option<usize> {
        let n = self.n_points as isize;
        match self.boundary {
            Boundary::Periodic => Some(j.rem_euclid(n) as usize),
            Boundary::CompactSupport => (0..n).contains(&j).then_some(j as usize),
        }
    }
}

/// Real-valued sequence on a [`Mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    mesh: Mesh,
    values: Vec<f64>,
}

impl LatticeField {
    /// Builds a field, rejecting wrong lengths and non-finite entries.
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_points() {
            return Err(Error::LengthMismatch {
                expected: mesh.n_points(),
                got: values.len(),
            });
        }
        let field = Self { mesh, values };
        field.check_finite()?;
        Ok(field)
    }

    /// Unchecked constructor for results of arithmetic on already valid fields.
    pub(crate) fn from_raw(mesh: Mesh, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), mesh.n_points());
        Self { mesh, values }
    }

    pub fn zeros(mesh: Mesh) -> Self {
        Self::from_raw(mesh, vec![0.0; mesh.n_points()])
    }

    pub fn constant(mesh: Mesh, c: f64) -> Result<Self> {
        Self::new(mesh, vec![c; mesh.n_points()])
    }

    /// Samples `f(x_j)` at every site.
    pub fn from_fn(mesh: Mesh, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(mesh, mesh.coords().into_iter().map(f).collect())
    }

    /// Kronecker delta at site `j`.
    pub fn unit(mesh: Mesh, j: usize) -> Self {
        let mut values = vec![0.0; mesh.n_points()];
        values[j] = 1.0;
        Self::from_raw(mesh, values)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    /// Value at a possibly out-of-window index, honouring the boundary mode.
    #[inline]
    pub fn at(&self, j: isize) -> f64 {
        self.mesh.resolve(j).map_or(0.0, |i| self.values[i])
    }

    /// `g_j = f_{j+s}`.
    pub fn shift(&self, s: isize) -> Self {
        let values = (0..self.len() as isize).map(|j| self.at(j + s)).collect();
        Self::from_raw(self.mesh, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.mesh, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Site-wise combination; panics if the meshes differ.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(
            self.mesh, other.mesh,
            "zip_map on fields of different meshes"
        );
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_raw(self.mesh, values)
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.mesh, other.mesh, "axpy on fields of different meshes");
        for (s, &o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L2 norm `sqrt(h sum f_j^2)`.
    pub fn norm(&self) -> f64 {
        (self.mesh.h * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// `h * sum_j f_j`.
    pub fn sum_functional(&self) -> f64 {
        self.mesh.h * self.values.iter().sum::<f64>()
    }

    /// `h * sum_j f_j g_j`.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        if self.mesh != other.mesh {
            return Err(Error::MeshMismatch);
        }
        Ok(self.mesh.h * dot(&self.values, &other.values))
    }

    /// Largest magnitude within the outer `buffer_fraction` of sites on each side.
    pub fn decay_margin(&self, buffer_fraction: f64) -> Result<f64> {
        if self.mesh.is_periodic() {
            return Err(Error::PeriodicNotAllowed {
                what: "decay margin",
            });
        }
        if !(buffer_fraction > 0.0 && buffer_fraction < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "buffer fraction must lie in (0, 0.5), got {buffer_fraction}"
            )));
        }
        let n = self.len();
        let m = ((buffer_fraction * n as f64).ceil() as usize).clamp(1, n / 2);
        let edges = self.values[..m].iter().chain(&self.values[n - m..]);
        Ok(edges.fold(0.0, |acc, v| acc.max(v.abs())))
    }

    /// Writes `index,x,value` rows at full round-trip precision.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,x,value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{:e},{:e}", j, self.mesh.x(j as isize), v)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`LatticeField::write_csv`].
    pub fn read_csv<R: BufRead>(input: R, mesh: Mesh) -> Result<Self> {
        let mut values = Vec::with_capacity(mesh.n_points());
        for (line_no, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line_no == 0 {
                if line != "index,x,value" {
                    return Err(Error::Parse(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected 3 columns",
                    line_no + 1
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))
            };
            let index: usize = cols[0]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))?;
            if index != values.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected index {}, found {index}",
                    line_no + 1,
                    values.len()
                )));
            }
            let x = parse(cols[1])?;
            let expected_x = mesh.x(index as isize);
            if (x - expected_x).abs() > 1e-9 * expected_x.abs().max(1.0) {
                return Err(Error::Parse(format!(
                    "line {}: coordinate {x} does not match mesh ({expected_x})",
                    line_no + 1
                )));
            }
            values.push(parse(cols[2])?);
        }
        Self::new(mesh, values)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Add for &LatticeField {
    type Output = LatticeField;
    fn add(self, rhs: Self) -> LatticeField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &LatticeField {
    type Output = LatticeField;
    fn sub(self, rhs: Self) -> LatticeField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &LatticeField {
    type Output = LatticeField;
    fn mul(self, a: f64) -> LatticeField {
        self.scale(a)
    }
}

impl Neg for &LatticeField {
    type Output = LatticeField;
    fn neg(self) -> LatticeField {
        self.map(|v| -v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn periodic(n: usize, h: f64) -> Mesh {
        Mesh::new(h, n, 0.0, Boundary::Periodic).unwrap()
    }

    #[test]
    fn mesh_rejects_bad_parameters() {
        assert!(Mesh::new(0.0, 8, 0.0, Boundary::Periodic).is_err());
        assert!(Mesh::new(-0.1, 8, 0.0, Boundary::Periodic).is_err());
        assert!(Mesh::new(0.1, 3, 0.0, Boundary::Periodic).is_err());
        assert!(Mesh::new(f64::NAN, 8, 0.0, Boundary::Periodic).is_err());
    }

    #[test]
    fn field_rejects_non_finite_and_wrong_length() {
        let mesh = periodic(4, 1.0);
        assert!(matches!(
            LatticeField::new(mesh, vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            LatticeField::new(mesh, vec![0.0; 5]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn sum_functional_examples() {
        let mesh = periodic(8, 0.5);
        assert_eq!(LatticeField::zeros(mesh).sum_functional(), 0.0);
        assert_eq!(
            LatticeField::constant(mesh, 1.0).unwrap().sum_functional(),
            4.0
        );

        let mesh = periodic(6, 0.1);
        let f = LatticeField::new(mesh, vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0]).unwrap();
        let naive = 0.1 * 1.0 + 0.1 * 2.0 + 0.1 * 3.0;
        assert!((f.sum_functional() - naive).abs() < 1e-15);
        assert!((f.sum_functional() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn inner_product_examples() {
        let mesh = periodic(4, 2.0);
        let z = LatticeField::zeros(mesh);
        assert_eq!(z.inner_product(&z).unwrap(), 0.0);
        let f = LatticeField::new(mesh, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let g = LatticeField::new(mesh, vec![3.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.inner_product(&g).unwrap(), 6.0);

        let other = periodic(4, 1.0);
        assert!(matches!(
            f.inner_product(&LatticeField::zeros(other)),
            Err(Error::MeshMismatch)
        ));
    }

    #[test]
    fn inner_product_matches_naive_loop() {
        let mesh = periodic(37, 0.3);
        let f = LatticeField::from_fn(mesh, |x| (1.3 * x).sin() + 0.2).unwrap();
        let g = LatticeField::from_fn(mesh, |x| (0.7 * x).cos() * x).unwrap();
        let mut naive = 0.0;
        let mut magnitude = 0.0;
        for j in 0..37 {
            naive += f.values()[j] * g.values()[j] * 0.3;
            magnitude += (f.values()[j] * g.values()[j] * 0.3).abs();
        }
        let got = f.inner_product(&g).unwrap();
        assert!((got - naive).abs() <= 1e-14 * magnitude);
    }

    #[test]
    fn decay_margin_examples() {
        let mesh = Mesh::new(0.1, 100, 0.0, Boundary::CompactSupport).unwrap();
        assert_eq!(LatticeField::zeros(mesh).decay_margin(0.1).unwrap(), 0.0);
        assert_eq!(
            LatticeField::constant(mesh, 1.0)
                .unwrap()
                .decay_margin(0.1)
                .unwrap(),
            1.0
        );

        // Gaussian centred at x = 5 (mid-domain), sigma = 1. The buffer spans the
        // first and last 10 sites, so the closest buffered site is x = 0.9 or 9.0.
        let sigma = 1.0;
        let g = LatticeField::from_fn(mesh, |x| (-(x - 5.0).powi(2) / (2.0 * sigma * sigma)).exp())
            .unwrap();
        let mut oracle: f64 = 0.0;
        for j in (0..10).chain(90..100) {
            let x = 0.1 * j as f64;
            oracle = oracle.max((-(x - 5.0f64).powi(2) / 2.0).exp());
        }
        assert_eq!(g.decay_margin(0.1).unwrap(), oracle);
        assert!(oracle <= (-(4.0f64).powi(2) / 2.0).exp());

        assert!(g.decay_margin(0.0).is_err());
        assert!(g.decay_margin(0.5).is_err());
        let p = periodic(16, 0.1);
        assert!(LatticeField::zeros(p).decay_margin(0.1).is_err());
    }

    #[test]
    fn compact_support_shift_reads_zero() {
        let mesh = Mesh::new(1.0, 4, 0.0, Boundary::CompactSupport).unwrap();
        let f = LatticeField::new(mesh, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.shift(1).values(), &[2.0, 3.0, 4.0, 0.0]);
        assert_eq!(f.shift(-1).values(), &[0.0, 1.0, 2.0, 3.0]);
        let p = Mesh::new(1.0, 4, 0.0, Boundary::Periodic).unwrap();
        let f = LatticeField::new(p, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.shift(1).values(), &[2.0, 3.0, 4.0, 1.0]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mesh = Mesh::new(0.1, 16, -0.8, Boundary::CompactSupport).unwrap();
        let f = LatticeField::from_fn(mesh, |x| (3.0 * x).sin() / 7.0 + 1e-300).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = LatticeField::read_csv(buf.as_slice(), mesh).unwrap();
        assert_eq!(f, g);
        assert!(LatticeField::read_csv("index,x,value\n0,0,1\n".as_bytes(), mesh).is_err());
    }

    fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0f64, n)
    }

    proptest! {
        #[test]
        fn inner_product_symmetric_and_bilinear(
            f in field_strategy(24), g in field_strategy(24), k in field_strategy(24),
            a in -3.0..3.0f64,
        ) {
            let mesh = periodic(24, 0.25);
            let f = LatticeField::new(mesh, f).unwrap();
            let g = LatticeField::new(mesh, g).unwrap();
            let k = LatticeField::new(mesh, k).unwrap();
            let fg = f.inner_product(&g).unwrap();
            let gf = g.inner_product(&f).unwrap();
            prop_assert!((fg - gf).abs() <= 1e-13 * fg.abs().max(1.0));

            let lhs = (&(&f * a) + &k).inner_product(&g).unwrap();
            let rhs = a * fg + k.inner_product(&g).unwrap();
            let scale = (a.abs() * f.norm() + k.norm()) * g.norm();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale.max(1.0));
        }

        #[test]
        fn sum_functional_is_additive(f in field_strategy(20), g in field_strategy(20)) {
            let mesh = periodic(20, 0.1);
            let f = LatticeField::new(mesh, f).unwrap();
            let g = LatticeField::new(mesh, g).unwrap();
            let lhs = (&f + &g).sum_functional();
            let rhs = f.sum_functional() + g.sum_functional();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * (f.max_abs() + g.max_abs()).max(1.0));
        }

        #[test]
        fn periodic_shifts_compose_exactly(f in field_strategy(17), s in -40isize..40) {
            let mesh = periodic(17, 0.5);
            let f = LatticeField::new(mesh, f).unwrap();
            prop_assert_eq!(f.shift(s).shift(-s), f.clone());
            prop_assert_eq!(f.shift(1).shift(-1), f);
        }
    }
}
