//! Shift operators, divided differences, and the nonlocal central operator `D̃₀`.
//!
//! `D̃₀` is the series `sum_k alpha_{2k+1} h^{2k} D0^{2k+1}`. Regrouped by shift
//! powers it becomes
//!
//! ```text
//! D̃₀ = 1/(2h) * sum_{p >= 0} c_p (S_{2p+1} - S_{-(2p+1)})
//! ```
//!
//! where every `c_p` is a convergent series of positive terms (up to the sign
//! `(-1)^p`). The shift-power form is the production path; the `alpha` form is
//! kept only to cross-check the regrouping.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::lattice::LatticeField;

/// Default truncation of the shift-power series.
pub const DEFAULT_P: usize = 64;
/// Default relative stopping tolerance for each `c_p` series.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Hard cap on series terms per coefficient. Reaching it means a bug: the series converge.
pub const MAX_SERIES_TERMS: u64 = 20_000_000_000;

/// `(f_{j+1} - f_j) / h`.
pub fn d_plus(f: &LatticeField) -> LatticeField {
    let h = f.mesh().h();
    let values = (0..f.len() as isize)
        .map(|j| (f.at(j + 1) - f.at(j)) / h)
        .collect();
    LatticeField::from_raw(*f.mesh(), values)
}

/// `(f_j - f_{j-1}) / h`.
pub fn d_minus(f: &LatticeField) -> LatticeField {
    let h = f.mesh().h();
    let values = (0..f.len() as isize)
        .map(|j| (f.at(j) - f.at(j - 1)) / h)
        .collect();
    LatticeField::from_raw(*f.mesh(), values)
}

/// `(f_{j+1} - f_{j-1}) / (2h)`.
pub fn d_zero(f: &LatticeField) -> LatticeField {
    let h = f.mesh().h();
    let values = (0..f.len() as isize)
        .map(|j| (f.at(j + 1) - f.at(j - 1)) / (2.0 * h))
        .collect();
    LatticeField::from_raw(*f.mesh(), values)
}

/// Three-point second difference `(f_{j+1} - 2 f_j + f_{j-1}) / h^2`.
///
/// On a periodic mesh this is exactly `d_minus(d_plus(f))`. On a compact-support
/// mesh the neighbours outside the window read as zero, which keeps the matrix
/// symmetric (a composition of the one-sided differences would not be).
pub fn second_difference(f: &LatticeField) -> LatticeField {
    let h2 = f.mesh().h() * f.mesh().h();
    let values = (0..f.len() as isize)
        .map(|j| (f.at(j + 1) - 2.0 * f.at(j) + f.at(j - 1)) / h2)
        .collect();
    LatticeField::from_raw(*f.mesh(), values)
}

/// `k`-fold second difference, the even lattice derivative `f_{2k}`.
pub fn even_difference(f: &LatticeField, k: usize) -> LatticeField {
    (0..k).fold(f.clone(), |acc, _| second_difference(&acc))
}

/// Linear operator `g_j = h^{-h_power} sum_k coeffs[k] f_{j+k}` with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSeriesOperator {
    coeffs: BTreeMap<isize, f64>,
    h_power: u32,
    skew: bool,
}

impl ShiftSeriesOperator {
    /// Builds an operator from `(offset, coefficient)` pairs; repeated offsets add up.
    pub fn new(coeffs: impl IntoIterator<Item = (isize, f64)>, h_power: u32) -> Self {
        let mut map = BTreeMap::new();
        for (k, c) in coeffs {
            *map.entry(k).or_insert(0.0) += c;
        }
        Self {
            coeffs: map,
            h_power,
            skew: false,
        }
    }

    pub fn identity() -> Self {
        Self::new([(0, 1.0)], 0)
    }

    /// `D+ = (S+ - 1)/h`.
    pub fn right_difference() -> Self {
        Self::new([(0, -1.0), (1, 1.0)], 1)
    }

    /// `D- = (1 - S-)/h`.
    pub fn left_difference() -> Self {
        Self::new([(-1, -1.0), (0, 1.0)], 1)
    }

    /// `D0 = (S+ - S-)/(2h)`.
    pub fn central_difference() -> Self {
        Self::new([(-1, -0.5), (1, 0.5)], 1)
            .into_skew()
            .expect("central difference is antisymmetric")
    }

    /// Sets the skew flag after verifying `c[-k] = -c[k]` and `c[0] = 0`.
    pub fn into_skew(mut self) -> Result<Self> {
        if !self.has_antisymmetric_coeffs() {
            return Err(Error::NotSkew);
        }
        self.skew = true;
        Ok(self)
    }

    fn has_antisymmetric_coeffs(&self) -> bool {
        self.coeffs.iter().all(|(&k, &c)| {
            let mirror = self.coeffs.get(&-k).copied().unwrap_or(0.0);
            c == -mirror
        })
    }

    pub fn is_skew(&self) -> bool {
        self.skew
    }

    pub fn h_power(&self) -> u32 {
        self.h_power
    }

    pub fn coeff(&self, k: isize) -> f64 {
        self.coeffs.get(&k).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.coeffs.iter().map(|(&k, &c)| (k, c))
    }

    /// Smallest and largest offsets carrying a coefficient.
    pub fn support(&self) -> Option<(isize, isize)> {
        let lo = *self.coeffs.keys().next()?;
        let hi = *self.coeffs.keys().next_back()?;
        Some((lo, hi))
    }

    /// Number of sites spanned by the stencil.
    pub fn width(&self) -> usize {
        self.support().map_or(0, |(lo, hi)| (hi - lo + 1) as usize)
    }

    /// Applies the operator under the field's boundary mode.
    ///
    /// On periodic meshes a stencil wider than the mesh would alias through
    /// the wrap-around and is rejected; use [`Self::fold_periodic`] to
    /// request the folded operator explicitly.
    pub fn apply(&self, f: &LatticeField) -> Result<LatticeField> {
        let mesh = *f.mesh();
        let n = mesh.n_points();
        if mesh.is_periodic() && self.width() > n {
            return Err(Error::SupportTooWide {
                width: self.width(),
                n_points: n,
            });
        }
        let scale = mesh.h().powi(self.h_power as i32);
        let src = f.values();
        let mut out = vec![0.0; n];
        for (&k, &c) in &self.coeffs {
            if mesh.is_periodic() {
                let shift = k.rem_euclid(n as isize) as usize;
                for (j, o) in out.iter_mut().enumerate() {
                    let i = j + shift;
                    *o += c * src[if i >= n { i - n } else { i }];
                }
            } else {
                for (j, o) in out.iter_mut().enumerate() {
                    let i = j as isize + k;
                    if (0..n as isize).contains(&i) {
                        *o += c * src[i as usize];
                    }
                }
            }
        }
        if self.h_power > 0 {
            for o in &mut out {
                *o /= scale;
            }
        }
        Ok(LatticeField::from_raw(mesh, out))
    }

    /// Formal adjoint: `c[k] -> c[-k]`.
    pub fn adjoint(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(&k, &c)| (-k, c)).collect(),
            h_power: self.h_power,
            skew: self.skew,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(&k, &c)| (k, a * c)).collect(),
            h_power: self.h_power,
            skew: self.skew,
        }
    }

    /// Operator product `self ∘ other` (shift polynomials multiply, `h` powers add).
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = BTreeMap::new();
        for (&a, &ca) in &self.coeffs {
            for (&b, &cb) in &other.coeffs {
                *out.entry(a + b).or_insert(0.0) += ca * cb;
            }
        }
        Self {
            coeffs: out,
            h_power: self.h_power + other.h_power,
            skew: false,
        }
    }

    /// Circulant folding for a periodic mesh of `n_points` sites.
    ///
    /// The result is the truncated operator acting on the periodic extension of
    /// the field: offsets are reduced into `(-n/2, n/2]` and their coefficients
    /// summed. Antisymmetry survives folding, so the skew flag is kept.
    pub fn fold_periodic(&self, n_points: usize) -> Self {
        let n = n_points as isize;
        let reduce = |k: isize| {
            let r = k.rem_euclid(n);
            if r > n / 2 {
                r - n
            } else {
                r
            }
        };
        let mut out = BTreeMap::new();
        for (&k, &c) in &self.coeffs {
            *out.entry(reduce(k)).or_insert(0.0) += c;
        }
        // With even n the offsets n/2 and -n/2 coincide, so an antisymmetric
        // operator contributes nothing there.
        if self.skew && n % 2 == 0 {
            out.remove(&(n / 2));
        }
        let folded = Self {
            coeffs: out,
            h_power: self.h_power,
            skew: false,
        };
        if self.skew {
            folded.symmetrize_skew()
        } else {
            folded
        }
    }

    fn symmetrize_skew(self) -> Self {
        let coeffs: BTreeMap<isize, f64> = self
            .coeffs
            .iter()
            .filter(|(&k, _)| k != 0)
            .map(|(&k, &c)| {
                let mirror = self.coeffs.get(&-k).copied().unwrap_or(0.0);
                (k, 0.5 * (c - mirror))
            })
            .collect();
        Self {
            coeffs,
            h_power: self.h_power,
            skew: true,
        }
    }

    /// Prepares the operator for a mesh: folds when a periodic mesh is narrower
    /// than the stencil, otherwise returns it unchanged.
    pub fn for_mesh(&self, mesh: &crate::lattice::Mesh) -> Self {
        if mesh.is_periodic() && self.width() > mesh.n_points() {
            self.fold_periodic(mesh.n_points())
        } else {
            self.clone()
        }
    }

    /// Fourier symbol at `theta = kappa h`: the operator maps `exp(i kappa x)`
    /// to `(re + i im) exp(i kappa x)`.
    pub fn symbol(&self, theta: f64, h: f64) -> (f64, f64) {
        let scale = h.powi(self.h_power as i32);
        let (re, im) = self.coeffs.iter().fold((0.0, 0.0), |(re, im), (&k, &c)| {
            let phase = k as f64 * theta;
            (re + c * phase.cos(), im + c * phase.sin())
        });
        (re / scale, im / scale)
    }
}

/// Coefficients of both forms of `D̃₀`.
#[derive(Debug, Clone)]
pub struct SeriesCoefficients {
    /// `alpha_1, alpha_3, ..., alpha_{2K+1}`.
    pub alpha: Vec<f64>,
    /// `c_0, ..., c_P` as truncated partial sums.
    pub c: Vec<f64>,
    /// Upper bound on the neglected tail of each `c_p` series.
    pub tails: Vec<f64>,
    /// Number of series terms summed for each `c_p`.
    pub terms: Vec<u64>,
    pub truncation_k: usize,
    pub truncation_p: usize,
    pub tol: f64,
}

impl SeriesCoefficients {
    /// Largest tail bound over all coefficients.
    pub fn tail_estimate(&self) -> f64 {
        self.tails.iter().fold(0.0, |m, &t| m.max(t))
    }
}

/// `alpha_{2k+1} = (-1)^k (2k-1)!! / (2^k k! (2k+1))` for `k = 0..=k_max`.
pub fn compute_alpha(k_max: usize) -> Vec<f64> {
    // a_k = (2k-1)!!/(2^k k!) obeys a_{k+1} = a_k (2k+1)/(2k+2).
    let mut a = 1.0;
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        out.push(sign * a / (2 * k + 1) as f64);
        a *= (2 * k + 1) as f64 / (2 * k + 2) as f64;
    }
    out
}

/// Natural log of the first term (`k = p`) of the `c_p` series,
/// `ln[ ((2p-1)!!)^2 / ((2p+1) 4^p (2p)!) ]`.
fn ln_first_term(p: usize) -> f64 {
    // ((2p-1)!!)^2 / (4^p (2p)!) = a_p / 4^p with a_p = (2p-1)!!/(2^p p!).
    let ln_a: f64 = (0..p)
        .map(|k| ((2 * k + 1) as f64 / (2 * k + 2) as f64).ln())
        .sum();
    ln_a - p as f64 * 4f64.ln() - ((2 * p + 1) as f64).ln()
}

/// Ratio of consecutive terms, `term_{k+1} / term_k`, of the `c_p` series.
#[inline]
fn term_ratio(k: f64, p: f64) -> f64 {
    let odd = 2.0 * k + 1.0;
    odd * odd / (4.0 * (k + 2.0 + p) * (k + 1.0 - p))
}

/// Bound on `sum_{k > last} term_k` from Stirling's inequality:
/// each term is below `exp(1/12k) / (pi k (k+1+p))`.
pub fn series_tail_bound(p: usize, last: u64) -> f64 {
    let first = last + 1;
    let harmonic: f64 = (first..=first + p as u64).map(|m| 1.0 / m as f64).sum();
    (1.0 / (12.0 * first as f64)).exp() * harmonic / (std::f64::consts::PI * (p + 1) as f64)
}

/// Sums the positive-term series for `|c_p|` until the current term drops below
/// `tol` times the partial sum. Returns `(|c_p|, last k summed)`.
fn sum_c_series(p: usize, tol: f64) -> Result<(f64, u64)> {
    let pf = p as f64;
    let mut k = p as u64;
    let mut ln_t = ln_first_term(p);
    // Terms grow quickly from k = p; walk in log space until they are representable.
    while ln_t < -600.0 {
        ln_t += term_ratio(k as f64, pf).ln();
        k += 1;
    }
    let mut term = ln_t.exp();
    let mut sum = 0.0;
    let mut kf = k as f64;
    // The stopping test is checked once per block; terms are monotone so this
    // only ever adds a few extra (tiny) terms.
    const BLOCK: u64 = 16;
    loop {
        for _ in 0..BLOCK {
            sum += term;
            term *= term_ratio(kf, pf);
            kf += 1.0;
        }
        k += BLOCK;
        if term < tol * sum {
            return Ok((sum, k - 1));
        }
        if k - p as u64 >= MAX_SERIES_TERMS {
            return Err(Error::SeriesDivergence {
                p,
                iterations: k - p as u64,
            });
        }
    }
}

/// Computes `c_0..=c_P` by partial summation, recording the tail bound of each.
pub fn compute_c(p_max: usize, tol: f64) -> Result<SeriesCoefficients> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "series tolerance must lie in (0, 1), got {tol}"
        )));
    }
    let mut c = Vec::with_capacity(p_max + 1);
    let mut tails = Vec::with_capacity(p_max + 1);
    let mut terms = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        let (abs, last) = sum_c_series(p, tol)?;
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        c.push(sign * abs);
        tails.push(series_tail_bound(p, last));
        terms.push(last - p as u64 + 1);
    }
    Ok(SeriesCoefficients {
        alpha: compute_alpha(p_max),
        c,
        tails,
        terms,
        truncation_k: p_max,
        truncation_p: p_max,
        tol,
    })
}

type CacheKey = (usize, u64);

fn coefficient_cache() -> &'static Mutex<HashMap<CacheKey, Arc<SeriesCoefficients>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<SeriesCoefficients>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Memoised [`compute_c`]; the series for large `P` are long.
pub fn compute_c_cached(p_max: usize, tol: f64) -> Result<Arc<SeriesCoefficients>> {
    let key = (p_max, tol.to_bits());
    if let Some(hit) = coefficient_cache().lock().unwrap().get(&key) {
        return Ok(Arc::clone(hit));
    }
    let fresh = Arc::new(compute_c(p_max, tol)?);
    coefficient_cache()
        .lock()
        .unwrap()
        .insert(key, Arc::clone(&fresh));
    Ok(fresh)
}

/// `D̃₀` truncated after `c_P`, from precomputed coefficients.
pub fn dtilde0_from(coeffs: &SeriesCoefficients) -> ShiftSeriesOperator {
    let pairs = coeffs.c.iter().enumerate().flat_map(|(p, &c)| {
        let k = 2 * p as isize + 1;
        [(k, 0.5 * c), (-k, -0.5 * c)]
    });
    ShiftSeriesOperator::new(pairs, 1)
        .into_skew()
        .expect("D̃₀ coefficients are antisymmetric by construction")
}

/// `D̃₀ = 1/(2h) sum_{p <= P} c_p (S_{2p+1} - S_{-(2p+1)})`.
pub fn build_dtilde0(p_max: usize, tol: f64) -> Result<ShiftSeriesOperator> {
    Ok(dtilde0_from(&*compute_c_cached(p_max, tol)?))
}

/// Cross-check route: `sum_{k <= K} alpha_{2k+1} h^{2k} D0^{2k+1}` expanded by
/// explicit repeated composition of `(S+ - S-)/2`.
pub fn dtilde0_alpha_form(k_max: usize) -> ShiftSeriesOperator {
    let alpha = compute_alpha(k_max);
    let half_width = 2 * k_max + 1;
    let offset = half_width as isize;
    let len = 2 * half_width + 1;
    // power holds ((S+ - S-)/2)^{2k+1}; start at k = 0.
    let mut power = vec![0.0; len];
    power[(offset + 1) as usize] = 0.5;
    power[(offset - 1) as usize] = -0.5;
    let mut total = vec![0.0; len];
    let square = |src: &[f64]| -> Vec<f64> {
        // multiply by ((S+ - S-)/2)^2 = (S_2 - 2 + S_-2)/4
        let mut out = vec![0.0; src.len()];
        for i in 0..src.len() {
            if src[i] == 0.0 {
                continue;
            }
            out[i] -= 0.5 * src[i];
            if i + 2 < src.len() {
                out[i + 2] += 0.25 * src[i];
            }
            if i >= 2 {
                out[i - 2] += 0.25 * src[i];
            }
        }
        out
    };
    for (k, &a) in alpha.iter().enumerate() {
        if k > 0 {
            power = square(&power);
        }
        for (t, &p) in total.iter_mut().zip(&power) {
            *t += a * p;
        }
    }
    let pairs = total
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c != 0.0)
        .map(|(i, c)| (i as isize - offset, c));
    ShiftSeriesOperator::new(pairs, 1)
}
