//! Plancherel-side data: Hilbert–Schmidt operators, operator fields
//! `σ ↦ H(σ)`, and their fiberization over the torus.
//!
//! Rank-one operators `c · (l ⊗ r)`, i.e. `f ↦ c ⟨f, r⟩ l`, are kept in
//! factored form and paired through window inner products. Dense operators
//! are integral kernels sampled on a pair of midpoint grids; their trace
//! inner product is the double midpoint sum of `K_A conj(K_B)`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{inner_product_with, GridGeometry, GridPolicy, QuadratureRule, SampledWindow};
use crate::heisenberg::{dilate, represented_inner, schrodinger_apply, GroupElement};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `|Pf(σ)| = |σ|^d` for the Heisenberg group.
pub fn pfaffian_weight(sigma: f64, d: u32) -> f64 {
    sigma.abs().powi(d as i32)
}

/// Kernel of a dense operator, row-major over `rows × cols`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub row_grid: GridGeometry,
    pub col_grid: GridGeometry,
    pub data: Vec<Complex64>,
}

impl KernelMatrix {
    pub fn new(row_grid: GridGeometry, col_grid: GridGeometry, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != row_grid.n * col_grid.n {
            return Err(Error::DimensionMismatch(format!(
                "kernel has {} entries, expected {}x{}",
                data.len(),
                row_grid.n,
                col_grid.n
            )));
        }
        Ok(Self {
            row_grid,
            col_grid,
            data,
        })
    }

    pub fn zeros(row_grid: GridGeometry, col_grid: GridGeometry) -> Self {
        Self {
            row_grid,
            col_grid,
            data: vec![ZERO; row_grid.n * col_grid.n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.col_grid.n + j]
    }

    fn cell(&self) -> f64 {
        self.row_grid.dx * self.col_grid.dx
    }

    fn same_shape(&self, other: &KernelMatrix) -> bool {
        self.row_grid.n == other.row_grid.n
            && self.col_grid.n == other.col_grid.n
            && self.row_grid.aligned_offset(&other.row_grid) == Some(0)
            && self.col_grid.aligned_offset(&other.col_grid) == Some(0)
    }

    fn hs_inner(&self, other: &KernelMatrix) -> Result<Complex64> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch(format!(
                "kernels of shape {}x{} and {}x{} on different grids",
                self.row_grid.n, self.col_grid.n, other.row_grid.n, other.col_grid.n
            )));
        }
        let s: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * self.cell())
    }

    /// `(π_σ(g) ∘ K)(x, x') = e^{2πiσz} e^{-2πiσ y x} K(x - g.x, x')`, kept on
    /// the same grids; mass shifted past the row grid is dropped.
    fn apply(&self, sigma: f64, g: GroupElement) -> Result<KernelMatrix> {
        let nr = self.row_grid.n;
        let nc = self.col_grid.n;
        let mut out = vec![ZERO; nr * nc];
        for j in 0..nc {
            let column: Vec<Complex64> = (0..nr).map(|i| self.get(i, j)).collect();
            let col = SampledWindow::new(column, self.row_grid.x0, self.row_grid.dx)?;
            let moved = schrodinger_apply(sigma, g, &col)?;
            for i in 0..nr {
                out[i * nc + j] = moved.eval(self.row_grid.node(i));
            }
        }
        KernelMatrix::new(self.row_grid, self.col_grid, out)
    }
}

/// A Hilbert–Schmidt operator on `L²(ℝ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HsOperator {
    Zero,
    RankOne {
        left: Arc<SampledWindow>,
        right: Arc<SampledWindow>,
        coeff: Complex64,
    },
    Dense(KernelMatrix),
}

impl HsOperator {
    pub fn rank_one(left: SampledWindow, right: SampledWindow, coeff: Complex64) -> Self {
        HsOperator::RankOne {
            left: Arc::new(left),
            right: Arc::new(right),
            coeff,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            HsOperator::Zero => true,
            HsOperator::RankOne { left, right, coeff } => {
                *coeff == ZERO || left.is_zero() || right.is_zero()
            }
            HsOperator::Dense(k) => k.data.iter().all(|z| *z == ZERO),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        match self {
            HsOperator::Zero => HsOperator::Zero,
            HsOperator::RankOne { left, right, coeff } => HsOperator::RankOne {
                left: left.clone(),
                right: right.clone(),
                coeff: coeff * c,
            },
            HsOperator::Dense(k) => HsOperator::Dense(KernelMatrix {
                data: k.data.iter().map(|z| z * c).collect(),
                ..k.clone()
            }),
        }
    }

    /// Samples the kernel on the given grids.
    pub fn to_dense(&self, row_grid: GridGeometry, col_grid: GridGeometry) -> KernelMatrix {
        match self {
            HsOperator::Zero => KernelMatrix::zeros(row_grid, col_grid),
            HsOperator::RankOne { left, right, coeff } => {
                let l: Vec<Complex64> = (0..row_grid.n).map(|i| left.eval(row_grid.node(i))).collect();
                let r: Vec<Complex64> = (0..col_grid.n)
                    .map(|j| right.eval(col_grid.node(j)).conj())
                    .collect();
                let data = l
                    .iter()
                    .flat_map(|li| r.iter().map(move |rj| coeff * li * rj))
                    .collect();
                KernelMatrix {
                    row_grid,
                    col_grid,
                    data,
                }
            }
            HsOperator::Dense(k) if k.same_shape(&KernelMatrix::zeros(row_grid, col_grid)) => k.clone(),
            HsOperator::Dense(k) => {
                let mut data = Vec::with_capacity(row_grid.n * col_grid.n);
                for i in 0..row_grid.n {
                    for j in 0..col_grid.n {
                        data.push(sample_kernel(k, row_grid.node(i), col_grid.node(j)));
                    }
                }
                KernelMatrix {
                    row_grid,
                    col_grid,
                    data,
                }
            }
        }
    }

    /// `π_σ(g) ∘ A`.
    pub fn apply(&self, sigma: f64, g: GroupElement) -> Result<HsOperator> {
        match self {
            HsOperator::Zero => Ok(HsOperator::Zero),
            HsOperator::RankOne { left, right, coeff } => Ok(HsOperator::RankOne {
                left: Arc::new(schrodinger_apply(sigma, g, left)?),
                right: right.clone(),
                coeff: *coeff,
            }),
            HsOperator::Dense(k) => Ok(HsOperator::Dense(k.apply(sigma, g)?)),
        }
    }

    pub fn hs_norm_sq(&self) -> f64 {
        match self {
            HsOperator::Zero => 0.0,
            HsOperator::RankOne { left, right, coeff } => {
                coeff.norm_sqr() * left.norm_sq() * right.norm_sq()
            }
            HsOperator::Dense(k) => k.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * k.cell(),
        }
    }
}

fn sample_kernel(k: &KernelMatrix, x: f64, xp: f64) -> Complex64 {
    // bilinear interpolation, zero outside the grids
    let rows: Vec<Complex64> = (0..k.row_grid.n)
        .map(|i| {
            crate::grid::interp_at(&k.col_grid, |j| k.get(i, j), xp)
        })
        .collect();
    crate::grid::interp_at(&k.row_grid, |i| rows[i], x)
}

/// Trace inner product `⟨A, B⟩ = tr(B* A)`.
///
/// For rank-one pairs this is `c_A conj(c_B) ⟨l_A, l_B⟩ conj(⟨r_A, r_B⟩)`.
pub fn hs_inner(a: &HsOperator, b: &HsOperator) -> Result<Complex64> {
    use HsOperator::*;
    match (a, b) {
        (Zero, _) | (_, Zero) => Ok(ZERO),
        (
            RankOne {
                left: la,
                right: ra,
                coeff: ca,
            },
            RankOne {
                left: lb,
                right: rb,
                coeff: cb,
            },
        ) => {
            let l = inner_product_with(la, lb, GridPolicy::SILENT)?;
            let r = inner_product_with(ra, rb, GridPolicy::SILENT)?;
            Ok(ca * cb.conj() * l * r.conj())
        }
        (Dense(ka), Dense(kb)) => ka.hs_inner(kb),
        (Dense(ka), r @ RankOne { .. }) => ka.hs_inner(&r.to_dense(ka.row_grid, ka.col_grid)),
        (r @ RankOne { .. }, Dense(kb)) => r.to_dense(kb.row_grid, kb.col_grid).hs_inner(kb),
    }
}

/// `⟨π_σ(g) ∘ A, B⟩` without materializing the translated operator when
/// both sides are rank one.
pub fn translated_hs_inner(
    sigma: f64,
    g: GroupElement,
    a: &HsOperator,
    b: &HsOperator,
) -> Result<Complex64> {
    use HsOperator::*;
    match (a, b) {
        (Zero, _) | (_, Zero) => Ok(ZERO),
        (
            RankOne {
                left: la,
                right: ra,
                coeff: ca,
            },
            RankOne {
                left: lb,
                right: rb,
                coeff: cb,
            },
        ) => {
            let l = represented_inner(sigma, g, la, lb)?;
            let r = inner_product_with(ra, rb, GridPolicy::SILENT)?;
            Ok(ca * cb.conj() * l * r.conj())
        }
        _ => hs_inner(&a.apply(sigma, g)?, b),
    }
}

/// Per-σ scalar multiplier from the whitelist `c` or `c |σ|^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScaleExpr {
    Constant { value: f64 },
    Power { coeff: f64, p: f64 },
}

impl Default for ScaleExpr {
    fn default() -> Self {
        ScaleExpr::Constant { value: 1.0 }
    }
}

impl ScaleExpr {
    pub fn constant(value: f64) -> Self {
        ScaleExpr::Constant { value }
    }

    pub fn power(p: f64) -> Self {
        ScaleExpr::Power { coeff: 1.0, p }
    }

    pub fn eval(&self, sigma: f64) -> f64 {
        match *self {
            ScaleExpr::Constant { value } => value,
            ScaleExpr::Power { coeff, p } => coeff * sigma.abs().powf(p),
        }
    }
}

/// `σ ↦ scale(σ) (v_σ ⊗ v_σ)` on `(lo, hi]`, zero elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneField {
    pub generator: Arc<SampledWindow>,
    pub support: (f64, f64),
    pub scale: ScaleExpr,
}

/// A dense operator held constant on `(lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseCell {
    pub lo: f64,
    pub hi: f64,
    pub kernel: KernelMatrix,
}

/// An operator-valued function of the central frequency `σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorField {
    RankOne(RankOneField),
    Dense { cells: Vec<DenseCell> },
}

impl OperatorField {
    pub fn zero() -> Self {
        OperatorField::Dense { cells: Vec::new() }
    }

    pub fn rank_one(v: SampledWindow, lo: f64, hi: f64, scale: ScaleExpr) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(param("support", format!("empty support ({lo}, {hi}]")));
        }
        Ok(OperatorField::RankOne(RankOneField {
            generator: Arc::new(v),
            support: (lo, hi),
            scale,
        }))
    }

    pub fn dense(cells: Vec<DenseCell>) -> Result<Self> {
        for c in &cells {
            if !(c.lo < c.hi) {
                return Err(param("cells", format!("empty cell ({}, {}]", c.lo, c.hi)));
            }
        }
        Ok(OperatorField::Dense { cells })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            OperatorField::RankOne(f) => f.generator.is_zero(),
            OperatorField::Dense { cells } => cells
                .iter()
                .all(|c| HsOperator::Dense(c.kernel.clone()).is_zero()),
        }
    }

    /// `H(σ)`.
    pub fn at(&self, sigma: f64) -> Result<HsOperator> {
        match self {
            OperatorField::RankOne(f) => {
                let (lo, hi) = f.support;
                if sigma == 0.0 || !(sigma > lo && sigma <= hi) || f.generator.is_zero() {
                    return Ok(HsOperator::Zero);
                }
                let vs = Arc::new(dilate(&f.generator, sigma)?);
                Ok(HsOperator::RankOne {
                    left: vs.clone(),
                    right: vs,
                    coeff: Complex64::new(f.scale.eval(sigma), 0.0),
                })
            }
            OperatorField::Dense { cells } => Ok(cells
                .iter()
                .find(|c| sigma > c.lo && sigma <= c.hi)
                .map(|c| HsOperator::Dense(c.kernel.clone()))
                .unwrap_or(HsOperator::Zero)),
        }
    }

    /// `∫ ‖H(σ)‖²_HS |σ| dσ`, integrated with `rule` on `intervals` cells.
    pub fn norm_sq(&self, rule: &QuadratureRule, intervals: usize) -> f64 {
        match self {
            OperatorField::RankOne(f) => {
                let v4 = f.generator.norm_sq().powi(2);
                let (lo, hi) = f.support;
                v4 * rule.integrate(lo, hi, intervals, |s| {
                    f.scale.eval(s).powi(2) * pfaffian_weight(s, 1)
                })
            }
            OperatorField::Dense { cells } => cells
                .iter()
                .map(|c| {
                    let k = HsOperator::Dense(c.kernel.clone()).hs_norm_sq();
                    k * rule.integrate(c.lo, c.hi, intervals, |s| pfaffian_weight(s, 1))
                })
                .sum(),
        }
    }
}

/// `σ ↦ scale(σ) P_σ` on `(t, 1]` with `P_σ = v_σ ⊗ v_σ`.
///
/// A zero generator yields the zero field.
pub fn build_ht(v: SampledWindow, t: f64, scale: Option<ScaleExpr>) -> Result<OperatorField> {
    if !(t > 0.0 && t < 1.0) {
        return Err(param("t", format!("{t} is not in (0, 1)")));
    }
    OperatorField::rank_one(v, t, 1.0, scale.unwrap_or_default())
}

/// The value `𝓕φ(α) = (H(α + m) |α + m|^{1/2})_{|m| ≤ M}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberElement {
    pub alpha: f64,
    pub radius: i64,
    pub entries: Vec<HsOperator>,
}

impl FiberElement {
    pub fn zero(alpha: f64, radius: i64) -> Self {
        Self {
            alpha,
            radius,
            entries: vec![HsOperator::Zero; (2 * radius + 1) as usize],
        }
    }

    /// `(m, σ = α + m, entry)` for every stored entry.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64, &HsOperator)> {
        self.entries.iter().enumerate().map(move |(i, e)| {
            let m = i as i64 - self.radius;
            (m, self.alpha + m as f64, e)
        })
    }

    pub fn entry(&self, m: i64) -> Option<&HsOperator> {
        if m.abs() > self.radius {
            return None;
        }
        self.entries.get((m + self.radius) as usize)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(HsOperator::is_zero)
    }

    fn check_compatible(&self, other: &FiberElement) -> Result<()> {
        if self.radius != other.radius || (self.alpha - other.alpha).abs() > 1e-12 {
            return Err(Error::DimensionMismatch(format!(
                "fibers at (α={}, M={}) and (α={}, M={})",
                self.alpha, self.radius, other.alpha, other.radius
            )));
        }
        Ok(())
    }

    /// `⟨x, y⟩ = Σ_m ⟨x(m), y(m)⟩_HS`.
    pub fn inner(&self, other: &FiberElement) -> Result<Complex64> {
        self.check_compatible(other)?;
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| hs_inner(a, b))
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(HsOperator::hs_norm_sq).sum()
    }

    /// `π̃_α(g) x`, acting on entry `m` by `π_{α+m}(g) ∘ x(m)`.
    pub fn apply(&self, g: GroupElement) -> Result<FiberElement> {
        let entries = self
            .iter()
            .map(|(_, sigma, e)| if e.is_zero() { Ok(HsOperator::Zero) } else { e.apply(sigma, g) })
            .collect::<Result<_>>()?;
        Ok(FiberElement {
            entries,
            ..self.clone()
        })
    }

    /// `⟨π̃_α(g) x, y⟩`.
    pub fn translated_inner(&self, g: GroupElement, other: &FiberElement) -> Result<Complex64> {
        self.check_compatible(other)?;
        self.iter()
            .zip(&other.entries)
            .map(|((_, sigma, a), b)| translated_hs_inner(sigma, g, a, b))
            .sum()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            entries: self.entries.iter().map(|e| e.scaled(c)).collect(),
            ..self.clone()
        }
    }
}

/// Periodizes a field at `α`: `entry(m) = H(α + m) |α + m|^{1/2}`.
pub fn fiberize(field: &OperatorField, alpha: f64, radius: i64) -> Result<FiberElement> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(param("alpha", format!("{alpha} is not in (0, 1]")));
    }
    if radius < 0 {
        return Err(param("M", "truncation radius must be nonnegative"));
    }
    let entries = (-radius..=radius)
        .map(|m| {
            let sigma = alpha + m as f64;
            let h = field.at(sigma)?;
            Ok(h.scaled(Complex64::new(pfaffian_weight(sigma, 1).sqrt(), 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    if let OperatorField::RankOne(f) = field {
        if f.support.0 >= 0.0 && f.support.1 <= 1.0 {
            debug_assert!(entries.iter().filter(|e| !e.is_zero()).count() <= 1);
        }
    }
    Ok(FiberElement {
        alpha,
        radius,
        entries,
    })
}
