//! Grids, lattices, quadrature, and the sampled-window data model.
//!
//! A [`SampledWindow`] stores samples of a function on the cell midpoints
//! `x0 + (j + 1/2) dx`, `j = 0..n`. Every integral against a window is the
//! Riemann-midpoint sum over those cells; outside `[x0, x0 + n dx)` the
//! function is zero. Windows on grids with the same spacing whose origins
//! differ by a whole number of cells are *aligned* and pair exactly; any
//! other pairing goes through linear resampling (see [`GridPolicy`]).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Relative tolerance under which two grid spacings count as equal.
const SPACING_RTOL: f64 = 1e-12;
/// Offsets (in cells) closer than this to an integer snap to it.
const ALIGN_TOL: f64 = 1e-9;

/// Complex samples of a window on a uniform midpoint grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledWindow {
    samples: Vec<Complex64>,
    x0: f64,
    dx: f64,
    dim: usize,
}

impl SampledWindow {
    pub fn new(samples: Vec<Complex64>, x0: f64, dx: f64) -> Result<Self> {
        Self::with_dim(samples, x0, dx, 1)
    }

    pub fn with_dim(samples: Vec<Complex64>, x0: f64, dx: f64, dim: usize) -> Result<Self> {
        if dim != 1 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if samples.len() < 2 {
            return Err(param("samples", "a window needs at least two samples"));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(param("dx", format!("grid spacing must be positive, got {dx}")));
        }
        if !x0.is_finite() {
            return Err(param("x0", "grid origin must be finite"));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(param("samples", "samples must be finite"));
        }
        Ok(Self {
            samples,
            x0,
            dx,
            dim,
        })
    }

    /// Samples `f` on `n` midpoint cells covering `[lo, hi)`.
    pub fn from_fn(n: usize, lo: f64, hi: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(param("support", format!("empty support [{lo}, {hi})")));
        }
        if n < 2 {
            return Err(param("n", "a window needs at least two samples"));
        }
        let dx = (hi - lo) / n as f64;
        let samples = (0..n).map(|j| f(lo + (j as f64 + 0.5) * dx)).collect();
        Self::new(samples, lo, dx)
    }

    /// The zero window on the same grid.
    pub fn zeros_like(&self) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); self.samples.len()],
            ..self.clone()
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Right end of the grid, `x0 + n dx`.
    pub fn x_end(&self) -> f64 {
        self.x0 + self.samples.len() as f64 * self.dx
    }

    /// Position of the `j`-th sample.
    pub fn node(&self, j: usize) -> f64 {
        self.x0 + (j as f64 + 0.5) * self.dx
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            x0: self.x0,
            dx: self.dx,
            n: self.samples.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            samples: self.samples.iter().map(|z| z * c).collect(),
            ..self.clone()
        }
    }

    /// Linear interpolation of the zero-extended samples at `x`.
    pub fn eval(&self, x: f64) -> Complex64 {
        interp_at(&self.geometry(), |k| self.samples[k], x)
    }

    /// Resamples onto another grid by linear interpolation.
    pub fn resample(&self, target: GridGeometry) -> Result<Self> {
        let samples = (0..target.n)
            .map(|j| self.eval(target.node(j)))
            .collect();
        Self::new(samples, target.x0, target.dx)
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<Complex64>, x0: f64, dx: f64) -> Self {
        Self {
            samples,
            x0,
            dx,
            dim: 1,
        }
    }
}

/// Origin, spacing, and length of a midpoint grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl GridGeometry {
    pub fn node(&self, j: usize) -> f64 {
        self.x0 + (j as f64 + 0.5) * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x0 + self.n as f64 * self.dx
    }

    pub fn same_spacing(&self, other: &GridGeometry) -> bool {
        ((self.dx - other.dx) / self.dx).abs() <= SPACING_RTOL
    }

    /// Whole-cell offset of `other` relative to `self`, if the grids are aligned.
    pub fn aligned_offset(&self, other: &GridGeometry) -> Option<i64> {
        if !self.same_spacing(other) {
            return None;
        }
        let off = (other.x0 - self.x0) / self.dx;
        let r = off.round();
        ((off - r).abs() <= ALIGN_TOL).then_some(r as i64)
    }
}

/// How [`inner_product_with`] treats windows on incompatible grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridPolicy {
    pub allow_resample: bool,
    pub warn: bool,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            allow_resample: true,
            warn: true,
        }
    }
}

impl GridPolicy {
    pub const STRICT: GridPolicy = GridPolicy {
        allow_resample: false,
        warn: false,
    };
    pub const SILENT: GridPolicy = GridPolicy {
        allow_resample: true,
        warn: false,
    };
}

/// `∫ u(x) conj(v(x)) dx` with the default grid policy.
pub fn inner_product(u: &SampledWindow, v: &SampledWindow) -> Result<Complex64> {
    inner_product_with(u, v, GridPolicy::default())
}

/// `∫ u(x) conj(v(x)) dx`.
///
/// Aligned grids are paired cell by cell. Otherwise, when resampling is
/// allowed, the coarser window is interpolated onto the finer grid; with
/// equal spacing the first argument is moved onto the grid of the second.
pub fn inner_product_with(
    u: &SampledWindow,
    v: &SampledWindow,
    policy: GridPolicy,
) -> Result<Complex64> {
    let gu = u.geometry();
    let gv = v.geometry();
    if let Some(off) = gu.aligned_offset(&gv) {
        return Ok(aligned_sum(&gu, |k| u.samples[k], &gv, |j| v.samples[j], off));
    }
    if !policy.allow_resample {
        return Err(Error::GridMismatch(format!(
            "grids (x0={}, dx={}, n={}) and (x0={}, dx={}, n={}) are not aligned",
            gu.x0, gu.dx, gu.n, gv.x0, gv.dx, gv.n
        )));
    }
    if policy.warn {
        log::warn!(
            "resampling window onto a common grid (dx {} vs {}, x0 {} vs {})",
            gu.dx,
            gv.dx,
            gu.x0,
            gv.x0
        );
    }
    if gu.same_spacing(&gv) || gu.dx > gv.dx {
        Ok(interp_sum(&gu, |k| u.samples[k], &gv, |j| v.samples[j]))
    } else {
        Ok(interp_sum(&gv, |j| v.samples[j], &gu, |k| u.samples[k]).conj())
    }
}

/// `Σ_k a_k conj(b_{k+off}) dx` where `b` sits `off` cells to the right of `a`.
pub(crate) fn aligned_sum(
    ga: &GridGeometry,
    a: impl Fn(usize) -> Complex64,
    gb: &GridGeometry,
    b: impl Fn(usize) -> Complex64,
    off: i64,
) -> Complex64 {
    // index k in `a` pairs with j = k - off in `b`
    let k_lo = off.max(0);
    let k_hi = (ga.n as i64).min(gb.n as i64 + off);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in k_lo..k_hi {
        acc += a(k as usize) * b((k - off) as usize).conj();
    }
    acc * ga.dx
}

/// `Σ_j I[src](node_j) conj(dst_j) dx_dst`, with `I` the zero-padded linear
/// interpolant of the source samples.
pub(crate) fn interp_sum(
    gs: &GridGeometry,
    src: impl Fn(usize) -> Complex64,
    gd: &GridGeometry,
    dst: impl Fn(usize) -> Complex64,
) -> Complex64 {
    // interpolant is nonzero only on (x0 - dx/2, x_end + dx/2)
    let lo = gs.x0 - 0.5 * gs.dx;
    let hi = gs.x_end() + 0.5 * gs.dx;
    let j_lo = (((lo - gd.x0) / gd.dx - 0.5).floor().max(0.0)) as usize;
    let j_hi = ((((hi - gd.x0) / gd.dx - 0.5).ceil() + 1.0).max(0.0) as usize).min(gd.n);
    let mut acc = Complex64::new(0.0, 0.0);
    for j in j_lo..j_hi {
        let val = interp_at(gs, &src, gd.node(j));
        if val.re != 0.0 || val.im != 0.0 {
            acc += val * dst(j).conj();
        }
    }
    acc * gd.dx
}

pub(crate) fn interp_at(g: &GridGeometry, s: impl Fn(usize) -> Complex64, x: f64) -> Complex64 {
    let pos = (x - g.x0) / g.dx - 0.5;
    let mut k0 = pos.floor();
    let mut theta = pos - k0;
    if theta < ALIGN_TOL {
        theta = 0.0;
    } else if theta > 1.0 - ALIGN_TOL {
        theta = 0.0;
        k0 += 1.0;
    }
    let n = g.n as i64;
    let k0 = k0 as i64;
    let at = |k: i64| {
        if k >= 0 && k < n {
            s(k as usize)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    if theta == 0.0 {
        at(k0)
    } else {
        at(k0) * (1.0 - theta) + at(k0 + 1) * theta
    }
}

/// Analytic window presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowPreset {
    /// `χ_[0,1)`
    Box,
    /// `√2 χ_[0,1/2)`
    HalfBoxSqrt2,
    /// `2^{1/4} e^{-π x²}`, unit L² norm
    Gaussian,
    /// `√3 max(0, 1 - |2x - 1|)`, unit L² norm
    Hat,
}

impl WindowPreset {
    pub const ALL: [WindowPreset; 4] = [
        WindowPreset::Box,
        WindowPreset::HalfBoxSqrt2,
        WindowPreset::Gaussian,
        WindowPreset::Hat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WindowPreset::Box => "box",
            WindowPreset::HalfBoxSqrt2 => "half-box-sqrt2",
            WindowPreset::Gaussian => "gaussian",
            WindowPreset::Hat => "hat",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            WindowPreset::Box => indicator(x, 0.0, 1.0),
            WindowPreset::HalfBoxSqrt2 => std::f64::consts::SQRT_2 * indicator(x, 0.0, 0.5),
            WindowPreset::Gaussian => 2f64.powf(0.25) * (-PI * x * x).exp(),
            WindowPreset::Hat => 3f64.sqrt() * (1.0 - (2.0 * x - 1.0).abs()).max(0.0),
        }
    }
}

fn indicator(x: f64, lo: f64, hi: f64) -> f64 {
    if x >= lo && x < hi {
        1.0
    } else {
        0.0
    }
}

impl fmt::Display for WindowPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WindowPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WindowPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown window preset `{s}`")))
    }
}

/// Samples a preset on `n` midpoint cells of `support = [lo, hi)`.
pub fn window_preset(preset: WindowPreset, n: usize, support: (f64, f64)) -> Result<SampledWindow> {
    SampledWindow::from_fn(n, support.0, support.1, |x| Complex64::new(preset.eval(x), 0.0))
}

/// Points of the torus variable α with their quadrature weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TorusGrid {
    /// `α_j = (j + 1/2)/n`, each with weight `1/n`.
    pub fn midpoint(n_alpha: usize) -> Result<Self> {
        if n_alpha == 0 {
            return Err(param("n_alpha", "torus grid needs at least one point"));
        }
        let h = 1.0 / n_alpha as f64;
        Ok(Self {
            points: (0..n_alpha).map(|j| (j as f64 + 0.5) * h).collect(),
            weights: vec![h; n_alpha],
        })
    }

    /// An explicit list of points in `(0, 1]`, equally weighted. `α = 1`
    /// is accepted as the closure point of `(t, 1]`.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(param("grid.points", "torus grid needs at least one point"));
        }
        if let Some(p) = points.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(param("grid.points", format!("{p} is not in (0, 1]")));
        }
        let w = 1.0 / points.len() as f64;
        let n = points.len();
        Ok(Self {
            points,
            weights: vec![w; n],
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest gap between neighbouring points; one "grid-resolution unit".
    pub fn resolution(&self) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        self.points
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max)
    }
}

/// Integer coordinates `(m, n)` of a point `(a m, b n)` of `Λ₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeIndex {
    pub m: i64,
    pub n: i64,
}

impl LatticeIndex {
    pub const ORIGIN: LatticeIndex = LatticeIndex { m: 0, n: 0 };

    pub fn new(m: i64, n: i64) -> Self {
        Self { m, n }
    }

    pub fn is_origin(self) -> bool {
        self.m == 0 && self.n == 0
    }

    /// Chebyshev radius `max(|m|, |n|)`.
    pub fn radius(self) -> i64 {
        self.m.abs().max(self.n.abs())
    }
}

impl std::ops::Sub for LatticeIndex {
    type Output = LatticeIndex;
    fn sub(self, rhs: Self) -> Self {
        LatticeIndex::new(self.m - rhs.m, self.n - rhs.n)
    }
}

/// `Λ = aℤ × bℤ × ℤ` together with the truncation radii used for sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub a: f64,
    pub b: f64,
    pub k_max: i64,
    pub central_range: i64,
}

impl LatticeSpec {
    pub fn new(a: f64, b: f64, k_max: i64, central_range: i64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(param("lattice.a", format!("must be positive, got {a}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(param("lattice.b", format!("must be positive, got {b}")));
        }
        let ab = a * b;
        if (ab - ab.round()).abs() > 1e-12 {
            return Err(param(
                "lattice.a*b",
                format!("a*b = {ab} must be an integer"),
            ));
        }
        if k_max < 0 {
            return Err(param("lattice.k_max", "must be nonnegative"));
        }
        if central_range < 0 {
            return Err(param("lattice.central_range", "must be nonnegative"));
        }
        Ok(Self {
            a,
            b,
            k_max,
            central_range,
        })
    }

    /// Time-frequency coordinates `(a m, b n)`.
    pub fn point(&self, idx: LatticeIndex) -> (f64, f64) {
        (self.a * idx.m as f64, self.b * idx.n as f64)
    }

    /// All indices with `max(|m|, |n|) ≤ radius`, row-major in `(m, n)`.
    pub fn box_indices(radius: i64) -> Vec<LatticeIndex> {
        let mut out = Vec::with_capacity(((2 * radius + 1) * (2 * radius + 1)) as usize);
        for m in -radius..=radius {
            for n in -radius..=radius {
                out.push(LatticeIndex::new(m, n));
            }
        }
        out
    }

    /// Indices with Chebyshev radius exactly `radius`.
    pub fn ring_indices(radius: i64) -> Vec<LatticeIndex> {
        Self::box_indices(radius)
            .into_iter()
            .filter(|i| i.radius() == radius)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureKind {
    RiemannMidpoint,
    Trapezoid,
}

/// Composite rule on a bounded interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub kind: QuadratureKind,
    pub tolerance_report: f64,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self {
            kind: QuadratureKind::RiemannMidpoint,
            tolerance_report: 0.0,
        }
    }
}

impl QuadratureRule {
    pub fn new(kind: QuadratureKind) -> Self {
        Self {
            kind,
            tolerance_report: 0.0,
        }
    }

    /// Nodes and weights of the rule with `intervals` cells on `[lo, hi]`.
    pub fn nodes(&self, lo: f64, hi: f64, intervals: usize) -> Vec<(f64, f64)> {
        let n = intervals.max(1);
        let h = (hi - lo) / n as f64;
        match self.kind {
            QuadratureKind::RiemannMidpoint => (0..n)
                .map(|j| (lo + (j as f64 + 0.5) * h, h))
                .collect(),
            QuadratureKind::Trapezoid => (0..=n)
                .map(|j| {
                    let w = if j == 0 || j == n { 0.5 * h } else { h };
                    (lo + j as f64 * h, w)
                })
                .collect(),
        }
    }

    pub fn integrate(&self, lo: f64, hi: f64, intervals: usize, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .nodes(lo, hi, intervals)
            .into_iter()
            .map(|(x, w)| w * f(x))
            .collect();
        crate::reduce::pairwise_sum(&terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn unit_presets_have_unit_norm() {
        let b = window_preset(WindowPreset::Box, 4096, (0.0, 1.0)).unwrap();
        assert!((b.norm() - 1.0).abs() < 1e-10);
        let h = window_preset(WindowPreset::HalfBoxSqrt2, 4096, (0.0, 1.0)).unwrap();
        assert!((h.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_norm_against_fine_quadrature() {
        let g = window_preset(WindowPreset::Gaussian, 4096, (-8.0, 8.0)).unwrap();
        // independent oracle: trapezoid on a 16x finer grid of |g|^2
        let rule = QuadratureRule::new(QuadratureKind::Trapezoid);
        let oracle = rule.integrate(-8.0, 8.0, 65536, |x| WindowPreset::Gaussian.eval(x).powi(2));
        assert!((oracle - 1.0).abs() < 1e-12);
        assert!((g.norm() - oracle.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn box_against_half_box() {
        let b = window_preset(WindowPreset::Box, 4096, (0.0, 1.0)).unwrap();
        let h = window_preset(WindowPreset::HalfBoxSqrt2, 4096, (0.0, 1.0)).unwrap();
        let ip = inner_product(&b, &h).unwrap();
        assert!((ip.re - 0.5f64.sqrt()).abs() < 1e-8);
        assert!(ip.im.abs() < 1e-15);
    }

    #[test]
    fn zero_window_pairs_to_zero() {
        let g = window_preset(WindowPreset::Gaussian, 512, (-4.0, 4.0)).unwrap();
        assert_eq!(inner_product(&g, &g.zeros_like()).unwrap(), c(0.0));
    }

    #[test]
    fn unknown_preset_is_config_error() {
        assert!(matches!("sinc".parse::<WindowPreset>(), Err(Error::Config(_))));
        assert_eq!("hat".parse::<WindowPreset>().unwrap(), WindowPreset::Hat);
    }

    #[test]
    fn window_validation() {
        assert!(SampledWindow::new(vec![c(1.0)], 0.0, 0.1).is_err());
        assert!(SampledWindow::new(vec![c(1.0); 4], 0.0, 0.0).is_err());
        assert!(matches!(
            SampledWindow::with_dim(vec![c(1.0); 4], 0.0, 0.1, 2),
            Err(Error::UnsupportedDimension(2))
        ));
        assert!(SampledWindow::from_fn(8, 1.0, 1.0, |_| c(1.0)).is_err());
    }

    #[test]
    fn aligned_offset_grids_pair_exactly() {
        // same spacing, second grid shifted by 3 cells
        let u = SampledWindow::new(vec![c(1.0); 8], 0.0, 0.25).unwrap();
        let v = SampledWindow::new(vec![c(2.0); 8], 0.75, 0.25).unwrap();
        let ip = inner_product_with(&u, &v, GridPolicy::STRICT).unwrap();
        assert!((ip.re - 5.0 * 2.0 * 0.25).abs() < 1e-14);
    }

    #[test]
    fn aligned_pairing_matches_shifted_nodes() {
        let u = SampledWindow::from_fn(16, -1.0, 1.0, |x| c(x * x + x)).unwrap();
        let v = SampledWindow::from_fn(16, -0.5, 1.5, |x| c(1.0 + 3.0 * x)).unwrap();
        let expected: Complex64 = (0..16)
            .map(|k| u.geometry().node(k))
            .filter(|&x| x > -0.5 && x < 1.5)
            .map(|x| c((x * x + x) * (1.0 + 3.0 * x)))
            .sum::<Complex64>()
            * 0.125;
        for (a, b, e) in [(&u, &v, expected), (&v, &u, expected.conj())] {
            let ip = inner_product_with(a, b, GridPolicy::STRICT).unwrap();
            assert!((ip - e).norm() < 1e-12, "{ip} vs {e}");
        }
    }

    #[test]
    fn strict_policy_rejects_misaligned_grids() {
        let u = SampledWindow::new(vec![c(1.0); 8], 0.0, 0.25).unwrap();
        let v = SampledWindow::new(vec![c(1.0); 8], 0.1, 0.25).unwrap();
        assert!(matches!(
            inner_product_with(&u, &v, GridPolicy::STRICT),
            Err(Error::GridMismatch(_))
        ));
        // resampling moves `u` onto v's grid: overlap loses a fractional cell
        let ip = inner_product_with(&u, &v, GridPolicy::SILENT).unwrap();
        assert!(ip.re > 1.5 && ip.re < 2.0);
    }

    #[test]
    fn coarse_window_resampled_onto_fine_grid() {
        let coarse = SampledWindow::from_fn(64, 0.0, 1.0, |x| c(x)).unwrap();
        let fine = SampledWindow::from_fn(256, 0.0, 1.0, |_| c(1.0)).unwrap();
        let a = inner_product_with(&coarse, &fine, GridPolicy::SILENT).unwrap();
        let b = inner_product_with(&fine, &coarse, GridPolicy::SILENT).unwrap();
        assert!((a - b.conj()).norm() < 1e-15);
        assert!((a.re - 0.5).abs() < 1e-2);
    }

    #[test]
    fn torus_midpoint_grid_avoids_zero() {
        let g = TorusGrid::midpoint(7).unwrap();
        assert!(g.points().iter().all(|&a| a > 0.0 && a < 1.0));
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(TorusGrid::from_points(vec![0.0]).is_err());
        assert!(TorusGrid::from_points(vec![1.0]).is_ok());
    }

    #[test]
    fn lattice_requires_integral_product() {
        assert!(LatticeSpec::new(1.0, 2.0, 4, 2).is_ok());
        assert!(LatticeSpec::new(0.5, 4.0, 4, 2).is_ok());
        let err = LatticeSpec::new(1.0, 1.5, 4, 2).unwrap_err();
        assert!(err.to_string().contains("lattice.a*b"));
        assert_eq!(LatticeSpec::box_indices(2).len(), 25);
        assert_eq!(LatticeSpec::ring_indices(2).len(), 16);
    }

    #[test]
    fn quadrature_rules_integrate_one_exactly() {
        for kind in [QuadratureKind::RiemannMidpoint, QuadratureKind::Trapezoid] {
            let r = QuadratureRule::new(kind);
            assert_eq!(r.integrate(0.0, 1.0, 37, |_| 1.0), 1.0);
        }
    }

    #[test]
    fn smooth_inner_product_converges_at_second_order() {
        // hat window: midpoint sums of a piecewise-quadratic integrand with a
        // kink at 1/2; error falls by ~4 per halving against a 4x reference
        let ip = |n| {
            let u = window_preset(WindowPreset::Hat, n, (0.0, 1.0)).unwrap();
            let v = SampledWindow::from_fn(n, 0.0, 1.0, |x| c((3.0 * x).sin())).unwrap();
            inner_product(&u, &v).unwrap()
        };
        let reference = ip(4 * 4 * 51);
        let e1 = (ip(2 * 51) - reference).norm();
        let e2 = (ip(4 * 51) - reference).norm();
        assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
    }
}
