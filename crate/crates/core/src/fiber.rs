//! Fiberwise frame theory at one torus point: the system
//! `{π̃_α(λ₁) 𝓕φ_k(α)}`, its range `J(α)`, frame bounds, alternate and
//! oblique duality, and the type-I / type-II classification.
//!
//! Linear algebra runs on explicit coordinates. Systems built from operator
//! fields are embedded jointly: per central frequency the left and right
//! factors of all rank-one entries are resampled onto a common grid and
//! reduced to orthonormal bases, so an entry `c (l ⊗ r)` becomes
//! `c (E*l) ⊗ conj(F*r)` and trace inner products become dot products.
//! Dense entries are flattened as `√cell · K`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{GridGeometry, LatticeIndex, LatticeSpec, SampledWindow};
use crate::heisenberg::GroupElement;
use crate::operator::{fiberize, FiberElement, HsOperator, KernelMatrix, OperatorField};

/// Upper bound on the total coordinate dimension of a fiber system.
pub const DIMENSION_CAP: usize = 64;

/// Relative singular-value cutoff for rank and range decisions.
pub const SVD_CUTOFF: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A finite sample of `Λ₁` with quadrature weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambda1Sample {
    pub points: Vec<GroupElement>,
    pub weights: Vec<f64>,
    /// Lattice coordinates when the sample is a subset of `aℤ × bℤ`.
    pub indices: Option<Vec<LatticeIndex>>,
}

impl Lambda1Sample {
    /// Lattice points with counting measure.
    pub fn discrete(lattice: &LatticeSpec, indices: Vec<LatticeIndex>) -> Self {
        Self {
            points: indices.iter().map(|i| GroupElement::from_lattice(lattice, *i)).collect(),
            weights: vec![1.0; indices.len()],
            indices: Some(indices),
        }
    }

    /// Midpoint sample of the box `[x0, x1) × [y0, y1)` with Lebesgue weights.
    pub fn continuous_box(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || !(x.1 > x.0) || !(y.1 > y.0) {
            return Err(param("lambda1_box", "box must be nonempty with at least one sample per axis"));
        }
        let hx = (x.1 - x.0) / nx as f64;
        let hy = (y.1 - y.0) / ny as f64;
        let mut points = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                points.push(GroupElement::new(
                    x.0 + (i as f64 + 0.5) * hx,
                    y.0 + (j as f64 + 0.5) * hy,
                    0.0,
                ));
            }
        }
        Ok(Self {
            weights: vec![hx * hy; points.len()],
            points,
            indices: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Which generator and which sample point a system vector comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemLabel {
    pub generator: usize,
    pub point: usize,
}

/// The family `{√w_j v_j}` at one torus point, in coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberSystem {
    pub alpha: f64,
    pub dim: usize,
    pub vectors: Vec<DVector<Complex64>>,
    pub weights: Vec<f64>,
    pub labels: Vec<SystemLabel>,
    /// The fiber elements behind the coordinates, for systems built from fields.
    pub elements: Option<Vec<FiberElement>>,
}

impl FiberSystem {
    /// A system given directly by coordinate vectors.
    pub fn from_coordinates(alpha: f64, vectors: Vec<DVector<Complex64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::EmptyFamily("fiber system has no vectors".into()));
        };
        let dim = first.len();
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch(format!("vector of length {} in a system of dimension {dim}", v.len())));
        }
        if dim > DIMENSION_CAP {
            return Err(Error::DimensionCap { dim, cap: DIMENSION_CAP });
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; vectors.len()]);
        if weights.len() != vectors.len() {
            return Err(Error::DimensionMismatch(format!("{} weights for {} vectors", weights.len(), vectors.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(param("weights", format!("{w} is not a positive weight")));
        }
        let labels = (0..vectors.len())
            .map(|j| SystemLabel { generator: 0, point: j })
            .collect();
        Ok(Self {
            alpha,
            dim,
            vectors,
            weights,
            labels,
            elements: None,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `D × K` matrix with columns `√w_j v_j`.
    pub fn weighted_matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.len());
        for (j, (v, w)) in self.vectors.iter().zip(&self.weights).enumerate() {
            m.set_column(j, &(v * Complex64::new(w.sqrt(), 0.0)));
        }
        m
    }

    fn is_zero(&self) -> bool {
        self.vectors.iter().all(|v| v.iter().all(|z| *z == ZERO))
    }
}

fn common_grid(windows: &[&SampledWindow]) -> GridGeometry {
    let dx = windows.iter().map(|w| w.dx()).fold(f64::INFINITY, f64::min);
    let x0 = windows.iter().map(|w| w.x0()).fold(f64::INFINITY, f64::min);
    let x1 = windows.iter().map(|w| w.x_end()).fold(f64::NEG_INFINITY, f64::max);
    let n = ((x1 - x0) / dx - 1e-9).ceil().max(1.0) as usize;
    GridGeometry { x0, dx, n }
}

/// Orthonormal-basis coordinates of a family of windows: column `i` of the
/// result is `E* w_i` for an orthonormal basis `E` of their span.
fn window_coordinates(windows: &[&SampledWindow]) -> Result<DMatrix<Complex64>> {
    let g = common_grid(windows);
    let mut m = DMatrix::zeros(g.n, windows.len());
    let s = g.dx.sqrt();
    for (i, w) in windows.iter().enumerate() {
        let r = w.resample(g)?;
        for (k, z) in r.samples().iter().enumerate() {
            m[(k, i)] = z * s;
        }
    }
    let t = thin_svd(&m);
    let mut out = DMatrix::zeros(t.singular.len(), windows.len());
    for (r, &sv) in t.singular.iter().enumerate() {
        for j in 0..windows.len() {
            out[(r, j)] = t.v[(j, r)].conj() * sv;
        }
    }
    Ok(out)
}

struct ThinSvd {
    u: DMatrix<Complex64>,
    v: DMatrix<Complex64>,
    singular: Vec<f64>,
}

/// Thin SVD truncated at `SVD_CUTOFF` relative to the largest singular value.
fn thin_svd(m: &DMatrix<Complex64>) -> ThinSvd {
    let (d, k) = m.shape();
    let empty = ThinSvd {
        u: DMatrix::zeros(d, 0),
        v: DMatrix::zeros(k, 0),
        singular: Vec::new(),
    };
    if d == 0 || k == 0 {
        return empty;
    }
    let fm = faer::Mat::<faer::c64>::from_fn(d, k, |i, j| {
        let z = m[(i, j)];
        faer::c64::new(z.re, z.im)
    });
    let Ok(svd) = fm.thin_svd() else {
        return empty;
    };
    let s = svd.S().column_vector();
    let smax = (0..s.nrows()).map(|i| s[i].re).fold(0.0, f64::max);
    let keep: Vec<usize> = (0..s.nrows())
        .filter(|&i| smax > 0.0 && s[i].re > SVD_CUTOFF * smax)
        .collect();
    let (fu, fv) = (svd.U(), svd.V());
    let to_c = |z: faer::c64| Complex64::new(z.re, z.im);
    ThinSvd {
        u: DMatrix::from_fn(d, keep.len(), |i, c| to_c(fu[(i, keep[c])])),
        v: DMatrix::from_fn(k, keep.len(), |i, c| to_c(fv[(i, keep[c])])),
        singular: keep.iter().map(|&i| s[i].re).collect(),
    }
}

fn flatten_dense(k: &KernelMatrix) -> Vec<Complex64> {
    let s = (k.row_grid.dx * k.col_grid.dx).sqrt();
    k.data.iter().map(|z| z * s).collect()
}

/// Coordinates of entry slot `m` for every element.
fn embed_slot(entries: &[&HsOperator]) -> Result<Vec<Vec<Complex64>>> {
    if entries.iter().all(|e| e.is_zero()) {
        return Ok(vec![Vec::new(); entries.len()]);
    }
    if let Some(HsOperator::Dense(k0)) = entries.iter().find(|e| matches!(e, HsOperator::Dense(_))) {
        return Ok(entries
            .iter()
            .map(|e| flatten_dense(&e.to_dense(k0.row_grid, k0.col_grid)))
            .collect());
    }
    let mut lefts = Vec::new();
    let mut rights = Vec::new();
    let mut owners = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        if let HsOperator::RankOne { left, right, coeff } = e {
            if !e.is_zero() {
                lefts.push(left.as_ref());
                rights.push(right.as_ref());
                owners.push((i, *coeff));
            }
        }
    }
    let l = window_coordinates(&lefts)?;
    let r = window_coordinates(&rights)?;
    let (p, q) = (l.nrows(), r.nrows());
    let mut out = vec![vec![ZERO; p * q]; entries.len()];
    for (col, (i, c)) in owners.iter().enumerate() {
        for a in 0..p {
            for b in 0..q {
                out[*i][a * q + b] = c * l[(a, col)] * r[(b, col)].conj();
            }
        }
    }
    Ok(out)
}

/// Jointly embeds several families of fiber elements into one coordinate
/// space, preserving all trace inner products.
pub fn embed_elements(families: &[Vec<FiberElement>]) -> Result<Vec<Vec<DVector<Complex64>>>> {
    let all: Vec<&FiberElement> = families.iter().flatten().collect();
    let Some(first) = all.first() else {
        return Err(Error::EmptyFamily("nothing to embed".into()));
    };
    let slots = first.entries.len();
    if let Some(e) = all.iter().find(|e| e.entries.len() != slots) {
        return Err(Error::DimensionMismatch(format!(
            "fiber truncations M={} and M={} differ",
            first.radius, e.radius
        )));
    }
    let mut coords: Vec<Vec<Complex64>> = vec![Vec::new(); all.len()];
    for s in 0..slots {
        let entries: Vec<&HsOperator> = all.iter().map(|e| &e.entries[s]).collect();
        for (c, part) in coords.iter_mut().zip(embed_slot(&entries)?) {
            c.extend(part);
        }
        let dim = coords[0].len();
        if dim > DIMENSION_CAP {
            return Err(Error::DimensionCap { dim, cap: DIMENSION_CAP });
        }
    }
    let mut it = coords.into_iter().map(DVector::from_vec);
    Ok(families
        .iter()
        .map(|f| it.by_ref().take(f.len()).collect())
        .collect())
}

fn system_elements(generators: &[OperatorField], sample: &Lambda1Sample, alpha: f64, truncation: i64) -> Result<(Vec<FiberElement>, Vec<SystemLabel>, Vec<f64>)> {
    if generators.is_empty() {
        return Err(Error::EmptyFamily("no generators".into()));
    }
    if sample.is_empty() {
        return Err(Error::EmptyFamily("empty Λ₁ sample".into()));
    }
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for (k, field) in generators.iter().enumerate() {
        let base = fiberize(field, alpha, truncation)?;
        for (j, (g, w)) in sample.points.iter().zip(&sample.weights).enumerate() {
            elements.push(base.apply(*g)?);
            labels.push(SystemLabel { generator: k, point: j });
            weights.push(*w);
        }
    }
    Ok((elements, labels, weights))
}

/// Builds several systems over the same `Λ₁` sample in a shared coordinate
/// space, so that they can be compared against each other.
pub fn build_fiber_systems(
    families: &[&[OperatorField]],
    sample: &Lambda1Sample,
    alpha: f64,
    truncation: i64,
) -> Result<Vec<FiberSystem>> {
    let parts = families
        .iter()
        .map(|g| system_elements(g, sample, alpha, truncation))
        .collect::<Result<Vec<_>>>()?;
    let elems: Vec<Vec<FiberElement>> = parts.iter().map(|p| p.0.clone()).collect();
    let coords = embed_elements(&elems)?;
    Ok(parts
        .into_iter()
        .zip(coords)
        .map(|((elements, labels, weights), vectors)| FiberSystem {
            alpha,
            dim: vectors.first().map_or(0, |v| v.len()),
            vectors,
            weights,
            labels,
            elements: Some(elements),
        })
        .collect())
}

/// `{π̃_α(λ₁) 𝓕φ_k(α)}` for the generators over the sample.
pub fn build_fiber_system(
    generators: &[OperatorField],
    sample: &Lambda1Sample,
    alpha: f64,
    truncation: i64,
) -> Result<FiberSystem> {
    Ok(build_fiber_systems(&[generators], sample, alpha, truncation)?.remove(0))
}

/// `G[i, j] = √(w_i w_j) ⟨v_i, v_j⟩`.
pub fn fiber_gram(system: &FiberSystem) -> DMatrix<Complex64> {
    let m = system.weighted_matrix();
    (m.adjoint() * m).transpose()
}

/// Orthonormal basis of the span of the system, from the SVD.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeBasis {
    pub alpha: f64,
    pub basis: DMatrix<Complex64>,
    pub rank: usize,
    pub svd_cutoff: f64,
    pub singular_values: Vec<f64>,
}

struct Decomposition {
    /// Orthonormal basis of the column space of the weighted matrix.
    range: DMatrix<Complex64>,
    /// Orthonormal basis of the row space, i.e. the range of the analysis map.
    corange: DMatrix<Complex64>,
    singular: Vec<f64>,
}

fn decompose(m: &DMatrix<Complex64>) -> Decomposition {
    let t = thin_svd(m);
    Decomposition {
        range: t.u,
        corange: t.v,
        singular: t.singular,
    }
}

/// An orthonormal basis of `J(α)`.
pub fn range_basis(system: &FiberSystem) -> RangeBasis {
    let d = decompose(&system.weighted_matrix());
    RangeBasis {
        alpha: system.alpha,
        rank: d.range.ncols(),
        basis: d.range,
        svd_cutoff: SVD_CUTOFF,
        singular_values: d.singular,
    }
}

/// Optimal frame bounds of the system on its span: the smallest and largest
/// nonzero eigenvalues of the Gram matrix.
pub fn fiber_frame_bounds(system: &FiberSystem) -> Result<(f64, f64)> {
    if system.is_zero() {
        return Err(Error::UndefinedBounds);
    }
    let d = decompose(&system.weighted_matrix());
    let lo = d.singular.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.singular.iter().copied().fold(0.0, f64::max);
    Ok((lo * lo, hi * hi))
}

fn check_compatible(a: &FiberSystem, b: &FiberSystem) -> Result<()> {
    if a.len() != b.len() || a.dim != b.dim {
        return Err(Error::DimensionMismatch(format!(
            "systems of {} vectors in dimension {} and {} vectors in dimension {}",
            a.len(),
            a.dim,
            b.len(),
            b.dim
        )));
    }
    if a.weights.iter().zip(&b.weights).any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0)) {
        return Err(Error::DimensionMismatch("systems carry different weights".into()));
    }
    Ok(())
}

/// `max_i ‖S u_i - u_i‖` over the columns of `basis`, with the worst column.
fn reproduction_residual(s: &DMatrix<Complex64>, basis: &DMatrix<Complex64>) -> (f64, Option<usize>) {
    let mut best = (0.0, None);
    for i in 0..basis.ncols() {
        let u = basis.column(i);
        let r = (s * u - u).norm();
        if r > best.0 || r.is_nan() {
            best = (r, Some(i));
        }
    }
    best
}

/// Result of a fiber dual check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberDualCheck {
    /// `h = Σ_j w_j ⟨h, ψ_j⟩ φ_j` on `J_𝒜(α)`.
    pub alternate: bool,
    pub residual: f64,
    /// Basis column of `J_𝒜(α)` attaining the residual.
    pub witness: Option<usize>,
    /// The role-swapped identity on `J_𝒜′(α)`.
    pub swapped: bool,
    pub swapped_residual: f64,
    /// Both directions hold.
    pub oblique: bool,
    pub tolerance: f64,
    pub rank: usize,
}

/// Duality test at one torus point.
pub fn check_fiber_dual(a: &FiberSystem, a_dual: &FiberSystem, tol: f64) -> Result<FiberDualCheck> {
    check_compatible(a, a_dual)?;
    let phi = a.weighted_matrix();
    let psi = a_dual.weighted_matrix();
    let j = decompose(&phi);
    let j_dual = decompose(&psi);
    let (residual, witness) = reproduction_residual(&(&phi * psi.adjoint()), &j.range);
    let (swapped_residual, _) = reproduction_residual(&(&psi * phi.adjoint()), &j_dual.range);
    let alternate = residual <= tol;
    let swapped = swapped_residual <= tol;
    Ok(FiberDualCheck {
        alternate,
        residual,
        witness,
        swapped,
        swapped_residual,
        oblique: alternate && swapped,
        tolerance: tol,
        rank: j.range.ncols(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub alpha: f64,
    pub alternate: bool,
    pub oblique: bool,
    pub type_i: bool,
    pub type_ii: bool,
    pub dual_residual: f64,
    pub swapped_residual: f64,
    /// Largest relative distance of a dual vector from `J_𝒜(α)`.
    pub type_i_residual: f64,
    pub type_i_witness: Option<usize>,
    /// Relative distance of the dual analysis range from that of the system.
    pub type_ii_residual: f64,
    pub rank: usize,
    pub dim: usize,
    pub tolerance: f64,
}

/// All flags of a candidate dual. Type flags are only set when the pair is
/// an alternate dual.
pub fn dual_report(a: &FiberSystem, a_dual: &FiberSystem, tol: f64) -> Result<DualReport> {
    let dual = check_fiber_dual(a, a_dual, tol)?;
    let phi = a.weighted_matrix();
    let psi = a_dual.weighted_matrix();
    let d = decompose(&phi);

    let mut type_i_residual: f64 = 0.0;
    let mut type_i_witness = None;
    for j in 0..psi.ncols() {
        let v = psi.column(j);
        let n = v.norm();
        if n == 0.0 {
            continue;
        }
        let off = (v - &d.range * (d.range.adjoint() * v)).norm() / n;
        if off > type_i_residual || off.is_nan() {
            type_i_residual = off;
            type_i_witness = Some(j);
        }
    }

    let analysis = psi.adjoint();
    let total = analysis.norm();
    let type_ii_residual = if total == 0.0 {
        0.0
    } else {
        (&analysis - &d.corange * (d.corange.adjoint() * &analysis)).norm() / total
    };

    Ok(DualReport {
        alpha: a.alpha,
        alternate: dual.alternate,
        oblique: dual.oblique,
        type_i: dual.alternate && type_i_residual <= tol,
        type_ii: dual.alternate && type_ii_residual <= tol,
        dual_residual: dual.residual,
        swapped_residual: dual.swapped_residual,
        type_i_residual,
        type_i_witness,
        type_ii_residual,
        rank: dual.rank,
        dim: a.dim,
        tolerance: tol,
    })
}

/// Type-I / type-II classification of an alternate dual.
pub fn classify_dual_type(a: &FiberSystem, a_dual: &FiberSystem, tol: f64) -> Result<DualReport> {
    let r = dual_report(a, a_dual, tol)?;
    if !r.alternate {
        return Err(Error::PrerequisiteFailure(format!(
            "not an alternate dual at alpha={}: residual {:e} exceeds {:e}",
            r.alpha, r.dual_residual, tol
        )));
    }
    Ok(r)
}

/// `G^k_{λ₁}(α) = ⟨f, π̃_α(λ₁) 𝓕φ_k(α)⟩` for every system vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberCoefficient {
    pub alpha: f64,
    pub labels: Vec<SystemLabel>,
    pub values: Vec<Complex64>,
}

impl FiberCoefficient {
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Coefficients of a fiber element against a system built from fields.
pub fn fiber_coefficients(f: &FiberElement, system: &FiberSystem) -> Result<FiberCoefficient> {
    let Some(elements) = &system.elements else {
        return Err(Error::DimensionMismatch(
            "system is given by coordinates; use fiber_coefficients_coords".into(),
        ));
    };
    let values = elements.iter().map(|e| f.inner(e)).collect::<Result<Vec<_>>>()?;
    Ok(FiberCoefficient {
        alpha: system.alpha,
        labels: system.labels.clone(),
        values,
    })
}

/// Coefficients of a coordinate vector against a system.
pub fn fiber_coefficients_coords(f: &DVector<Complex64>, system: &FiberSystem) -> Result<FiberCoefficient> {
    if f.len() != system.dim {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} against a system of dimension {}",
            f.len(),
            system.dim
        )));
    }
    Ok(FiberCoefficient {
        alpha: system.alpha,
        labels: system.labels.clone(),
        values: system.vectors.iter().map(|v| v.dotc(f)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{window_preset, WindowPreset};
    use crate::operator::{build_ht, ScaleExpr};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> DVector<Complex64> {
        DVector::from_fn(d, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn half_box(n: usize) -> SampledWindow {
        window_preset(WindowPreset::HalfBoxSqrt2, n, (0.0, 1.0)).unwrap()
    }

    #[test]
    fn single_generator_at_origin_is_the_fiber() {
        let phi = build_ht(half_box(256), 0.5, None).unwrap();
        let lat = LatticeSpec::new(1.0, 2.0, 1, 1).unwrap();
        let s = build_fiber_system(&[phi], &Lambda1Sample::discrete(&lat, vec![LatticeIndex::ORIGIN]), 0.75, 1).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.dim, 1);
        assert!((s.vectors[0].norm_squared() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_translates_have_scaled_identity_gram() {
        let phi = build_ht(half_box(512), 0.55, None).unwrap();
        let lat = LatticeSpec::new(1.0, 2.0, 1, 1).unwrap();
        let s = build_fiber_system(&[phi], &Lambda1Sample::discrete(&lat, LatticeSpec::box_indices(1)), 0.75, 1).unwrap();
        let g = fiber_gram(&s);
        let expected = DMatrix::<Complex64>::identity(9, 9) * c(0.75);
        assert!((g - expected).norm() < 1e-10);
    }

    #[test]
    fn zero_generator_has_rank_zero() {
        let z = SampledWindow::new(vec![c(0.0); 8], 0.0, 0.125).unwrap();
        let phi = build_ht(z, 0.5, None).unwrap();
        let lat = LatticeSpec::new(1.0, 1.0, 1, 1).unwrap();
        let s = build_fiber_system(&[phi], &Lambda1Sample::discrete(&lat, LatticeSpec::box_indices(1)), 0.75, 1).unwrap();
        assert_eq!(range_basis(&s).rank, 0);
        assert_eq!(fiber_frame_bounds(&s), Err(Error::UndefinedBounds));
    }

    #[test]
    fn empty_family_is_rejected() {
        let lat = LatticeSpec::new(1.0, 1.0, 1, 1).unwrap();
        let sample = Lambda1Sample::discrete(&lat, vec![LatticeIndex::ORIGIN]);
        assert!(matches!(build_fiber_system(&[], &sample, 0.5, 1), Err(Error::EmptyFamily(_))));
        assert!(matches!(FiberSystem::from_coordinates(0.5, vec![], None), Err(Error::EmptyFamily(_))));
    }

    #[test]
    fn embedding_preserves_fiber_inner_products() {
        let v = SampledWindow::from_fn(128, 0.0, 1.0, |x| Complex64::from_polar(1.0 + x, 2.0 * x)).unwrap();
        let phi = build_ht(v.clone(), 0.3, None).unwrap();
        let psi = build_ht(window_preset(WindowPreset::Hat, 128, (0.0, 1.0)).unwrap(), 0.3, Some(ScaleExpr::power(-0.5))).unwrap();
        let lat = LatticeSpec::new(0.5, 2.0, 1, 1).unwrap();
        let sample = Lambda1Sample::discrete(&lat, LatticeSpec::box_indices(1));
        let s = build_fiber_systems(&[&[phi], &[psi]], &sample, 0.5, 1).unwrap();
        let ea = s[0].elements.as_ref().unwrap();
        let eb = s[1].elements.as_ref().unwrap();
        for i in 0..ea.len() {
            for j in 0..eb.len() {
                let direct = ea[i].inner(&eb[j]).unwrap();
                let coords = s[1].vectors[j].dotc(&s[0].vectors[i]);
                assert!((direct - coords).norm() < 1e-10, "({i},{j}): {direct} vs {coords}");
            }
        }
    }

    #[test]
    fn gram_of_single_and_proportional_vectors() {
        let v = DVector::from_vec(vec![c(1.0), Complex64::new(0.0, 2.0)]);
        let s = FiberSystem::from_coordinates(0.5, vec![v.clone()], None).unwrap();
        assert!((fiber_gram(&s)[(0, 0)] - c(5.0)).norm() < 1e-15);
        let p = FiberSystem::from_coordinates(0.5, vec![v.clone(), &v * Complex64::new(0.0, -3.0)], None).unwrap();
        let g = fiber_gram(&p);
        assert!(g.determinant().norm() < 1e-12);
        assert_eq!(range_basis(&p).rank, 1);
    }

    #[test]
    fn frame_bounds_scale_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vs: Vec<_> = (0..4).map(|_| random_vec(&mut rng, 3)).collect();
        let s = FiberSystem::from_coordinates(0.5, vs.clone(), None).unwrap();
        let (a, b) = fiber_frame_bounds(&s).unwrap();
        let scaled = FiberSystem::from_coordinates(0.5, vs.iter().map(|v| v * c(3.0)).collect(), None).unwrap();
        let (a3, b3) = fiber_frame_bounds(&scaled).unwrap();
        assert!((a3 - 9.0 * a).abs() < 1e-10 * a3 && (b3 - 9.0 * b).abs() < 1e-10 * b3);
        let eig = fiber_gram(&s).symmetric_eigenvalues();
        let lo = eig.iter().copied().filter(|e| *e > 1e-9).fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(0.0, f64::max);
        assert!((a - lo).abs() < 1e-9 * lo && (b - hi).abs() < 1e-9 * hi);
    }

    #[test]
    fn orthonormal_system_is_self_dual_of_every_type() {
        let e: Vec<DVector<Complex64>> = (0..3)
            .map(|i| DVector::from_fn(3, |r, _| if r == i { c(1.0) } else { c(0.0) }))
            .collect();
        let s = FiberSystem::from_coordinates(0.5, e, None).unwrap();
        assert_eq!(fiber_frame_bounds(&s).unwrap(), (1.0, 1.0));
        let r = classify_dual_type(&s, &s, 1e-10).unwrap();
        assert!(r.alternate && r.oblique && r.type_i && r.type_ii);
        assert!(r.dual_residual < 1e-10);
    }

    #[test]
    fn rank_one_duality_is_the_bracket_condition() {
        let phi = DVector::from_vec(vec![c(0.6), Complex64::new(0.0, 0.8)]);
        let s = FiberSystem::from_coordinates(0.5, vec![phi.clone()], None).unwrap();
        let good = FiberSystem::from_coordinates(0.5, vec![phi.clone()], None).unwrap();
        assert!(check_fiber_dual(&s, &good, 1e-12).unwrap().alternate);
        let bad = FiberSystem::from_coordinates(0.5, vec![&phi * c(0.5)], None).unwrap();
        let r = check_fiber_dual(&s, &bad, 1e-6).unwrap();
        assert!(!r.alternate && (r.residual - 0.5).abs() < 1e-12);
    }

    fn canonical_dual(phi: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let s = phi * phi.adjoint();
        s.pseudo_inverse(1e-12).unwrap() * phi
    }

    fn columns(m: &DMatrix<Complex64>) -> Vec<DVector<Complex64>> {
        (0..m.ncols()).map(|j| m.column(j).into_owned()).collect()
    }

    #[test]
    fn pseudo_inverse_dual_passes_and_perturbation_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phi = DMatrix::from_columns(&(0..6).map(|_| random_vec(&mut rng, 4)).collect::<Vec<_>>());
        let psi = canonical_dual(&phi);
        let a = FiberSystem::from_coordinates(0.3, columns(&phi), None).unwrap();
        let b = FiberSystem::from_coordinates(0.3, columns(&psi), None).unwrap();
        let r = check_fiber_dual(&a, &b, 1e-8).unwrap();
        assert!(r.alternate && r.oblique);
        let mut noisy = psi.clone();
        noisy[(0, 0)] += c(1e-3);
        let p = FiberSystem::from_coordinates(0.3, columns(&noisy), None).unwrap();
        let r = check_fiber_dual(&a, &p, 1e-6).unwrap();
        assert!(!r.alternate && r.residual > 1e-4 && r.residual < 1e-2);
        assert!(matches!(classify_dual_type(&a, &p, 1e-6), Err(Error::PrerequisiteFailure(_))));
    }

    #[test]
    fn orthogonal_component_breaks_type_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base: Vec<DVector<Complex64>> = (0..4)
            .map(|_| {
                let mut v = random_vec(&mut rng, 4);
                v[3] = ZERO;
                v
            })
            .collect();
        let phi = DMatrix::from_columns(&base);
        let mut psi = canonical_dual(&phi);
        for j in 0..psi.ncols() {
            psi[(3, j)] = Complex64::new(0.5, j as f64);
        }
        let a = FiberSystem::from_coordinates(0.3, columns(&phi), None).unwrap();
        let b = FiberSystem::from_coordinates(0.3, columns(&psi), None).unwrap();
        let r = classify_dual_type(&a, &b, 1e-8).unwrap();
        assert!(r.alternate && !r.type_i);
    }

    #[test]
    fn coefficients_match_dense_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vs: Vec<_> = (0..5).map(|_| random_vec(&mut rng, 6)).collect();
        let s = FiberSystem::from_coordinates(0.4, vs.clone(), None).unwrap();
        let f = random_vec(&mut rng, 6);
        let c = fiber_coefficients_coords(&f, &s).unwrap();
        for (v, z) in vs.iter().zip(&c.values) {
            let oracle: Complex64 = f.iter().zip(v.iter()).map(|(a, b)| a * b.conj()).sum();
            assert!((oracle - z).norm() < 1e-14);
        }
        let zero = fiber_coefficients_coords(&DVector::zeros(6), &s).unwrap();
        assert!(zero.values.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn coefficients_of_a_system_vector_are_an_indicator() {
        let phi = build_ht(half_box(512), 0.55, None).unwrap();
        let lat = LatticeSpec::new(1.0, 2.0, 1, 1).unwrap();
        let s = build_fiber_system(&[phi], &Lambda1Sample::discrete(&lat, LatticeSpec::box_indices(1)), 0.75, 1).unwrap();
        let f = s.elements.as_ref().unwrap()[4].scaled(c(1.0 / 0.75f64.sqrt()));
        let co = fiber_coefficients(&f, &s).unwrap();
        for (i, z) in co.values.iter().enumerate() {
            let expected = if i == 4 { 0.75f64.sqrt() } else { 0.0 };
            assert!((z - c(expected)).norm() < 1e-10);
        }
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let v = DVector::<Complex64>::zeros(DIMENSION_CAP + 1);
        assert!(matches!(
            FiberSystem::from_coordinates(0.5, vec![v], None),
            Err(Error::DimensionCap { .. })
        ));
    }
}
