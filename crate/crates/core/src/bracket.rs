//! The bracket map `[φ, ψ](α) = ⟨𝓕φ(α), 𝓕ψ(α)⟩` and the verdicts built on
//! it: `Ω_φ`, the orthogonality condition, biorthogonality, Bessel bounds,
//! the reproducing formula and the Gabor application scan.
//!
//! Everything runs on the fiber side. Left translation by `λ ∈ Λ` becomes
//! `π̃_α(λ)` on fibers and central translation by `k ∈ ℤ` becomes the
//! character `e^{2πiαk}`, so a finite combination `f = Σ c_λ L_λ φ` has fiber
//! `Σ_{λ₁} e_f(λ₁)(α) π̃_α(λ₁) 𝓕φ(α)`. Inner products between translated
//! fibers reduce to
//!
//! `⟨π̃(λ)X, π̃(μ)Y⟩ = Σ_m e^{2πiσ_m x_μ (y_μ - y_λ)} ⟨π_{σ_m}(λ - μ) X_m, Y_m⟩`,
//!
//! which [`PairTable`] tabulates once per `α` over lattice differences.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{inner_product_with, GridPolicy, LatticeIndex, LatticeSpec, SampledWindow, TorusGrid};
use crate::heisenberg::{ambiguity, dilation_invariant_inner, gabor_inner, phase, GroupElement};
use crate::operator::{build_ht, fiberize, pfaffian_weight, translated_hs_inner, HsOperator, OperatorField};
use crate::reduce::{argmax, pairwise_sum_complex, try_ordered_map};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// `ε_Ω` as a fraction of the largest self-bracket value.
pub const OMEGA_RELATIVE_FLOOR: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Values of a function on the torus grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusFunction {
    pub grid: TorusGrid,
    pub values: Vec<Complex64>,
}

impl TorusFunction {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values on a torus grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn points(&self) -> &[f64] {
        self.grid.points()
    }

    /// `∫_𝕋 F(α) dα` with the grid weights.
    pub fn integral(&self) -> Complex64 {
        let terms: Vec<Complex64> = self
            .values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v * *w)
            .collect();
        pairwise_sum_complex(&terms)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |F(α) - target(α)|` over the points selected by `mask`.
    pub fn max_deviation(
        &self,
        target: impl Fn(f64) -> Complex64,
        mask: Option<&[bool]>,
    ) -> Option<(usize, f64)> {
        let devs: Vec<f64> = self
            .values
            .iter()
            .zip(self.points())
            .enumerate()
            .map(|(i, (v, a))| match mask {
                Some(m) if !m[i] => 0.0,
                _ => (v - target(*a)).norm(),
            })
            .collect();
        let any = mask.map_or(!devs.is_empty(), |m| m.iter().any(|b| *b));
        if !any {
            return None;
        }
        argmax(&devs)
    }
}

/// `Ω_φ` on the grid: `mask[i] = [φ, φ](α_i) > threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaSet {
    pub mask: Vec<bool>,
    pub threshold: f64,
}

impl OmegaSet {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

/// Where a check attained its largest violation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub index: Option<LatticeIndex>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: bool,
    pub max_violation: f64,
    pub worst_witness: Option<Witness>,
    pub tolerance: f64,
    pub truncation_residual: f64,
}

impl CheckReport {
    pub fn new(max_violation: f64, worst_witness: Option<Witness>, tolerance: f64, truncation_residual: f64) -> Self {
        Self {
            verdict: max_violation <= tolerance,
            max_violation,
            worst_witness,
            tolerance,
            truncation_residual,
        }
    }
}

/// Parameters shared by the checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub tol: f64,
    /// Fiber truncation radius `M`.
    pub truncation: i64,
    /// Absolute `ε_Ω`; the relative default applies when absent.
    pub epsilon: Option<f64>,
    /// Random lattice combinations per reproducing or Parseval check.
    pub trials: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            truncation: 1,
            epsilon: None,
            trials: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
enum Term {
    /// `weight · A_{v,w}(σ x, y)` where `weight = c_φ conj(c_ψ) |σ| conj⟨v, w⟩`.
    RankOne {
        sigma: f64,
        weight: Complex64,
        v: Arc<SampledWindow>,
        w: Arc<SampledWindow>,
    },
    General {
        sigma: f64,
        x: HsOperator,
        y: HsOperator,
    },
}

impl Term {
    fn sigma(&self) -> f64 {
        match self {
            Term::RankOne { sigma, .. } | Term::General { sigma, .. } => *sigma,
        }
    }

    /// `⟨π_σ(x, y, 0) X_m, Y_m⟩`.
    fn planar(&self, x: f64, y: f64) -> Result<Complex64> {
        match self {
            Term::RankOne { sigma, weight, v, w } => Ok(weight * ambiguity(v, w, sigma * x, y)?),
            Term::General { sigma, x: a, y: b } => {
                translated_hs_inner(*sigma, GroupElement::new(x, y, 0.0), a, b)
            }
        }
    }
}

/// The pairing `g ↦ ⟨π̃_α(g) 𝓕φ(α), 𝓕ψ(α)⟩` at one torus point.
#[derive(Clone, Debug)]
pub struct FiberCorrelation {
    pub alpha: f64,
    terms: Vec<Term>,
}

fn in_support(field: &OperatorField, sigma: f64) -> bool {
    match field {
        OperatorField::RankOne(f) => sigma > f.support.0 && sigma <= f.support.1 && !f.generator.is_zero(),
        OperatorField::Dense { cells } => cells.iter().any(|c| sigma > c.lo && sigma <= c.hi),
    }
}

impl FiberCorrelation {
    pub fn new(phi: &OperatorField, psi: &OperatorField, alpha: f64, truncation: i64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(param("alpha", format!("{alpha} is not in (0, 1]")));
        }
        let mut terms = Vec::new();
        if let (OperatorField::RankOne(f), OperatorField::RankOne(g)) = (phi, psi) {
            let vw = inner_product_with(&f.generator, &g.generator, GridPolicy::SILENT)?;
            for m in -truncation..=truncation {
                let sigma = alpha + m as f64;
                if sigma == 0.0 || !in_support(phi, sigma) || !in_support(psi, sigma) {
                    continue;
                }
                let c = f.scale.eval(sigma) * g.scale.eval(sigma) * pfaffian_weight(sigma, 1);
                terms.push(Term::RankOne {
                    sigma,
                    weight: vw.conj() * c,
                    v: f.generator.clone(),
                    w: g.generator.clone(),
                });
            }
        } else {
            let x = fiberize(phi, alpha, truncation)?;
            let y = fiberize(psi, alpha, truncation)?;
            for ((_, sigma, a), b) in x.iter().zip(&y.entries) {
                if !a.is_zero() && !b.is_zero() {
                    terms.push(Term::General {
                        sigma,
                        x: a.clone(),
                        y: b.clone(),
                    });
                }
            }
        }
        Ok(Self { alpha, terms })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `⟨π̃_α(g) 𝓕φ(α), 𝓕ψ(α)⟩`.
    pub fn translated(&self, g: GroupElement) -> Result<Complex64> {
        let mut acc = ZERO;
        for t in &self.terms {
            acc += phase(t.sigma() * g.z) * t.planar(g.x, g.y)?;
        }
        Ok(acc)
    }

    /// `[φ, ψ](α)`.
    pub fn value(&self) -> Result<Complex64> {
        self.translated(GroupElement::IDENTITY)
    }
}

/// Per-term values `⟨π_{σ_m}(a Δm, b Δn, 0) X_m, Y_m⟩` for every lattice
/// difference `Δ` in a box.
struct PairTable {
    radius: i64,
    a: f64,
    b: f64,
    sigmas: Vec<f64>,
    values: Vec<Complex64>,
}

impl PairTable {
    fn build(corr: &FiberCorrelation, lattice: &LatticeSpec, radius: i64) -> Result<Self> {
        let sigmas: Vec<f64> = corr.terms.iter().map(Term::sigma).collect();
        let mut values = Vec::with_capacity(sigmas.len() * ((2 * radius + 1) as usize).pow(2));
        for d in LatticeSpec::box_indices(radius) {
            let (x, y) = lattice.point(d);
            for t in &corr.terms {
                values.push(t.planar(x, y)?);
            }
        }
        Ok(Self {
            radius,
            a: lattice.a,
            b: lattice.b,
            sigmas,
            values,
        })
    }

    fn slot(&self, d: LatticeIndex) -> usize {
        debug_assert!(d.radius() <= self.radius);
        let w = 2 * self.radius + 1;
        ((d.m + self.radius) * w + (d.n + self.radius)) as usize * self.sigmas.len()
    }

    /// `⟨π̃(λ) X, π̃(μ) Y⟩`.
    fn pair(&self, lam: LatticeIndex, mu: LatticeIndex) -> Complex64 {
        let base = self.slot(lam - mu);
        let z = self.a * mu.m as f64 * (self.b * (mu.n - lam.n) as f64);
        self.sigmas
            .iter()
            .enumerate()
            .map(|(k, s)| phase(s * z) * self.values[base + k])
            .sum()
    }
}

fn lattice_group(lattice: &LatticeSpec, idx: LatticeIndex) -> GroupElement {
    GroupElement::from_lattice(lattice, idx)
}

fn per_alpha<U: Send>(
    grid: &TorusGrid,
    f: impl Fn(usize, f64) -> Result<U> + Sync + Send,
) -> Result<Vec<U>> {
    let idx: Vec<(usize, f64)> = grid.points().iter().copied().enumerate().collect();
    try_ordered_map(&idx, |(i, a)| f(*i, *a))
}

/// `[φ, ψ](α)` on every grid point.
pub fn bracket(phi: &OperatorField, psi: &OperatorField, grid: &TorusGrid, truncation: i64) -> Result<TorusFunction> {
    let values = per_alpha(grid, |_, a| FiberCorrelation::new(phi, psi, a, truncation)?.value())?;
    TorusFunction::new(grid.clone(), values)
}

/// `[L_{λ₁} φ, ψ](α) = ⟨π̃_α(λ₁) 𝓕φ(α), 𝓕ψ(α)⟩`.
///
/// For rank-one fields the summand at `σ` is
/// `c_φ c_ψ |σ| ⟨π_σ(λ₁) v_σ, w_σ⟩ conj⟨v, w⟩`.
pub fn translated_bracket(
    phi: &OperatorField,
    psi: &OperatorField,
    lattice: &LatticeSpec,
    idx: LatticeIndex,
    grid: &TorusGrid,
    truncation: i64,
) -> Result<TorusFunction> {
    let g = lattice_group(lattice, idx);
    let values = per_alpha(grid, |_, a| FiberCorrelation::new(phi, psi, a, truncation)?.translated(g))?;
    TorusFunction::new(grid.clone(), values)
}

fn omega_from(self_bracket: &TorusFunction, epsilon: Option<f64>) -> OmegaSet {
    let peak = self_bracket.values.iter().map(|z| z.re).fold(0.0, f64::max);
    let threshold = epsilon.unwrap_or(OMEGA_RELATIVE_FLOOR * peak);
    OmegaSet {
        mask: self_bracket.values.iter().map(|z| z.re > threshold).collect(),
        threshold,
    }
}

/// `Ω_φ = {α : [φ, φ](α) > ε}`; `ε` defaults to `1e-10 · max [φ, φ]`.
pub fn omega_set(phi: &OperatorField, grid: &TorusGrid, epsilon: Option<f64>, truncation: i64) -> Result<OmegaSet> {
    if let Some(e) = epsilon {
        if !(e >= 0.0) {
            return Err(param("epsilon", format!("{e} must be nonnegative")));
        }
    }
    Ok(omega_from(&bracket(phi, phi, grid, truncation)?, epsilon))
}

/// Largest `|value|` per grid point over `indices`, with the index attaining it.
fn sweep(
    corr: &[Option<FiberCorrelation>],
    lattice: &LatticeSpec,
    indices: &[LatticeIndex],
    target: impl Fn(LatticeIndex) -> Complex64 + Sync + Send,
) -> Result<Vec<(f64, Option<LatticeIndex>)>> {
    try_ordered_map(corr, |c| {
        let Some(c) = c else { return Ok((0.0, None)) };
        let mut best = (0.0, None);
        for &idx in indices {
            let dev = (c.translated(lattice_group(lattice, idx))? - target(idx)).norm();
            if dev > best.0 || dev.is_nan() {
                best = (dev, Some(idx));
            }
        }
        Ok(best)
    })
}

fn worst(
    grid: &TorusGrid,
    per_point: &[(f64, Option<LatticeIndex>)],
) -> (f64, Option<Witness>) {
    let mags: Vec<f64> = per_point.iter().map(|p| p.0).collect();
    match argmax(&mags) {
        Some((i, v)) if per_point[i].1.is_some() => (
            v,
            Some(Witness {
                alpha: grid.points()[i],
                index: per_point[i].1,
            }),
        ),
        _ => (0.0, None),
    }
}

fn nonzero_indices(radius: i64) -> Vec<LatticeIndex> {
    LatticeSpec::box_indices(radius)
        .into_iter()
        .filter(|i| !i.is_origin())
        .collect()
}

/// The orthogonality condition: `[φ, L_{λ₁} φ](α) = 0` for every `λ₁ ≠ 0`
/// with `|m|, |n| ≤ k_max` and every `α ∈ Ω_φ`.
pub fn check_orthogonality(
    phi: &OperatorField,
    lattice: &LatticeSpec,
    grid: &TorusGrid,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    if lattice.k_max < 1 {
        return Err(param("lattice.k_max", "orthogonality needs k_max >= 1"));
    }
    let omega = omega_set(phi, grid, opts.epsilon, opts.truncation)?;
    let corr = restricted_correlations(phi, phi, grid, &omega.mask, opts.truncation)?;
    let inner = sweep(&corr, lattice, &nonzero_indices(lattice.k_max), |_| ZERO)?;
    let ring = sweep(&corr, lattice, &LatticeSpec::ring_indices(lattice.k_max + 1), |_| ZERO)?;
    let (max, witness) = worst(grid, &inner);
    let (trunc, _) = worst(grid, &ring);
    Ok(CheckReport::new(max, witness, opts.tol, trunc))
}

fn restricted_correlations(
    phi: &OperatorField,
    psi: &OperatorField,
    grid: &TorusGrid,
    mask: &[bool],
    truncation: i64,
) -> Result<Vec<Option<FiberCorrelation>>> {
    per_alpha(grid, |i, a| {
        if mask[i] {
            FiberCorrelation::new(phi, psi, a, truncation).map(Some)
        } else {
            Ok(None)
        }
    })
}

/// Biorthogonality: `[φ, L_{λ₁} ψ](α) = δ_{λ₁, 0}` for `|m|, |n| ≤ k_max`,
/// evaluated on `Ω_φ`.
///
/// `[φ, L_λ ψ] = conj([L_λ ψ, φ])`, so the sweep runs on the `(ψ, φ)`
/// correlation.
pub fn check_biorthogonality(
    phi: &OperatorField,
    psi: &OperatorField,
    lattice: &LatticeSpec,
    grid: &TorusGrid,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let omega = omega_set(phi, grid, opts.epsilon, opts.truncation)?;
    let corr = restricted_correlations(psi, phi, grid, &omega.mask, opts.truncation)?;
    let delta = |i: LatticeIndex| if i.is_origin() { ONE } else { ZERO };
    let inner = sweep(&corr, lattice, &LatticeSpec::box_indices(lattice.k_max), delta)?;
    let ring = sweep(&corr, lattice, &LatticeSpec::ring_indices(lattice.k_max + 1), |_| ZERO)?;
    let (max, witness) = worst(grid, &inner);
    let (trunc, _) = worst(grid, &ring);
    Ok(CheckReport::new(max, witness, opts.tol, trunc))
}

/// Largest deviation of `[φ, L_λ ψ]` from `δ_{λ,0}` on the part of the grid
/// outside `Ω_φ`.
pub fn biorthogonality_off_omega(
    phi: &OperatorField,
    psi: &OperatorField,
    lattice: &LatticeSpec,
    grid: &TorusGrid,
    opts: &CheckOptions,
) -> Result<f64> {
    let omega = omega_set(phi, grid, opts.epsilon, opts.truncation)?;
    let off: Vec<bool> = omega.mask.iter().map(|b| !b).collect();
    let corr = restricted_correlations(psi, phi, grid, &off, opts.truncation)?;
    let delta = |i: LatticeIndex| if i.is_origin() { ONE } else { ZERO };
    let devs = sweep(&corr, lattice, &LatticeSpec::box_indices(lattice.k_max), delta)?;
    Ok(worst(grid, &devs).0)
}

/// A finite combination `f = Σ c L_{(λ₁, λ₀)} φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeCombination {
    pub terms: Vec<(LatticeIndex, i64, Complex64)>,
}

impl LatticeCombination {
    /// Up to `max_terms` distinct points with `|m|, |n| ≤ spatial_radius` and
    /// `|λ₀| ≤ central_range`, coefficients uniform in the unit square.
    pub fn random<R: Rng>(rng: &mut R, spatial_radius: i64, central_range: i64, max_terms: usize) -> Self {
        let count = rng.random_range(1..=max_terms.max(1));
        let mut seen = BTreeMap::new();
        for _ in 0..count {
            let idx = LatticeIndex::new(
                rng.random_range(-spatial_radius..=spatial_radius),
                rng.random_range(-spatial_radius..=spatial_radius),
            );
            let k = rng.random_range(-central_range..=central_range);
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            seen.entry((idx, k)).or_insert(c);
        }
        Self {
            terms: seen.into_iter().map(|((i, k), c)| (i, k, c)).collect(),
        }
    }

    /// `e_f(λ₁)(α) = Σ_{λ₀} c_{(λ₁, λ₀)} e^{2πiαλ₀}`.
    pub fn fiber_coefficients(&self, alpha: f64) -> Vec<(LatticeIndex, Complex64)> {
        let mut out: BTreeMap<LatticeIndex, Complex64> = BTreeMap::new();
        for (idx, k, c) in &self.terms {
            *out.entry(*idx).or_insert(ZERO) += c * phase(alpha * *k as f64);
        }
        out.into_iter().collect()
    }

    pub fn spatial_radius(&self) -> i64 {
        self.terms.iter().map(|t| t.0.radius()).max().unwrap_or(0)
    }
}

fn quadratic_form(gram: &PairTable, x: &[(LatticeIndex, Complex64)], y: &[(LatticeIndex, Complex64)]) -> Complex64 {
    let mut acc = ZERO;
    for (l, cl) in x {
        for (k, ck) in y {
            acc += cl * ck.conj() * gram.pair(*l, *k);
        }
    }
    acc
}

/// `‖𝓕f(α) - 𝓕R(α)‖ / ‖𝓕f(α)‖` where `R = Σ_{μ ∈ box(radius)} ⟨f, L_μ ψ⟩ L_μ φ`
/// after summing over `Λ₀`; `None` when `𝓕f(α)` is numerically zero.
fn reproducing_residual(
    gram: &PairTable,
    cross: &PairTable,
    coeffs: &[(LatticeIndex, Complex64)],
    radius: i64,
) -> Option<f64> {
    let mut r: BTreeMap<LatticeIndex, Complex64> = coeffs.iter().copied().collect();
    for mu in LatticeSpec::box_indices(radius) {
        let d: Complex64 = coeffs.iter().map(|(l, c)| c * cross.pair(*l, mu)).sum();
        *r.entry(mu).or_insert(ZERO) -= d;
    }
    let r: Vec<(LatticeIndex, Complex64)> = r.into_iter().collect();
    let norm_f = quadratic_form(gram, coeffs, coeffs).re;
    let scale: f64 = coeffs.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>() * gram.pair(LatticeIndex::ORIGIN, LatticeIndex::ORIGIN).re;
    if !(norm_f > 1e-12 * scale) {
        return None;
    }
    let res = quadratic_form(gram, &r, &r).re.max(0.0);
    Some((res / norm_f).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproducingReport {
    /// Overall verdict: residual (A) within `tol` and residual (B) within `10·tol`.
    pub report: CheckReport,
    /// `sup_{Ω_φ} |[φ, ψ](α) - 1|`.
    pub residual_a: f64,
    pub witness_a: Option<Witness>,
    /// Worst relative fiber residual over `Ω_φ` and the full-`Λ` trials.
    pub residual_b: f64,
    pub witness_b: Option<Witness>,
    /// Same residual with `f` and the reconstruction restricted to `Λ₀`.
    pub residual_lambda0: f64,
    pub verdict_a: bool,
    pub verdict_b: bool,
    /// Verdict of the `Λ₀`-only check.
    pub verdict_lambda0: bool,
    /// `(A) ≤ tol ⇔ (B) ≤ 10·tol`.
    pub consistent: bool,
    pub bracket: TorusFunction,
    /// Per-point `|[φ, ψ](α) - 1|` on `Ω_φ`, zero elsewhere.
    pub residual_a_profile: Vec<f64>,
    /// Per-point worst trial residual on `Ω_φ`, zero elsewhere.
    pub residual_b_profile: Vec<f64>,
    pub omega: OmegaSet,
    pub trials: usize,
}

fn ensure_orthogonal(name: &str, field: &OperatorField, lattice: &LatticeSpec, grid: &TorusGrid, opts: &CheckOptions) -> Result<()> {
    let r = check_orthogonality(field, lattice, grid, opts)?;
    if r.verdict {
        return Ok(());
    }
    let at = r
        .worst_witness
        .map(|w| format!(" at alpha={} lambda={:?}", w.alpha, w.index))
        .unwrap_or_default();
    Err(Error::HypothesisFailure(format!(
        "orthogonality condition fails for {name}: violation {:e}{at}",
        r.max_violation
    )))
}

/// The reproducing formula `f = Σ_λ ⟨f, L_λ ψ⟩ L_λ φ` on the span of
/// `φ`, tested both through the bracket (residual A) and through random
/// finite combinations on the fiber side (residual B).
pub fn check_reproducing(
    phi: &OperatorField,
    psi: &OperatorField,
    lattice: &LatticeSpec,
    grid: &TorusGrid,
    opts: &CheckOptions,
) -> Result<ReproducingReport> {
    ensure_orthogonal("phi", phi, lattice, grid, opts)?;
    ensure_orthogonal("psi", psi, lattice, grid, opts)?;
    let k = lattice.k_max;
    let rf = k.min(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let full: Vec<LatticeCombination> = (0..opts.trials)
        .map(|_| LatticeCombination::random(&mut rng, rf, lattice.central_range, 5))
        .collect();
    let central: Vec<LatticeCombination> = (0..opts.trials)
        .map(|_| LatticeCombination::random(&mut rng, 0, lattice.central_range, 5))
        .collect();

    let br = bracket(phi, psi, grid, opts.truncation)?;
    let omega = omega_set(phi, grid, opts.epsilon, opts.truncation)?;
    let profile_a: Vec<f64> = br
        .values
        .iter()
        .zip(&omega.mask)
        .map(|(v, m)| if *m { (v - ONE).norm() } else { 0.0 })
        .collect();

    let per_point = per_alpha(grid, |i, a| {
        if !omega.mask[i] {
            return Ok((0.0, 0.0));
        }
        let pp = FiberCorrelation::new(phi, phi, a, opts.truncation)?;
        let ps = FiberCorrelation::new(phi, psi, a, opts.truncation)?;
        let gram = PairTable::build(&pp, lattice, 2 * k)?;
        let cross = PairTable::build(&ps, lattice, k + rf)?;
        let mut worst_full: f64 = 0.0;
        for c in &full {
            if let Some(r) = reproducing_residual(&gram, &cross, &c.fiber_coefficients(a), k) {
                worst_full = worst_full.max(r);
            }
        }
        let mut worst_central: f64 = 0.0;
        for c in &central {
            if let Some(r) = reproducing_residual(&gram, &cross, &c.fiber_coefficients(a), 0) {
                worst_central = worst_central.max(r);
            }
        }
        Ok((worst_full, worst_central))
    })?;
    let profile_b: Vec<f64> = per_point.iter().map(|p| p.0).collect();
    let profile_0: Vec<f64> = per_point.iter().map(|p| p.1).collect();

    let witness_at = |i: usize| Witness {
        alpha: grid.points()[i],
        index: None,
    };
    let (ia, a) = argmax(&profile_a).unwrap_or((0, 0.0));
    let (ib, b) = argmax(&profile_b).unwrap_or((0, 0.0));
    let (_, b0) = argmax(&profile_0).unwrap_or((0, 0.0));
    let any = !omega.is_empty();
    let tol = opts.tol;
    let verdict_a = a <= tol;
    let verdict_b = b <= 10.0 * tol;
    let verdict_lambda0 = b0 <= 10.0 * tol;
    let trunc = check_orthogonality(phi, lattice, grid, opts)?.truncation_residual;
    Ok(ReproducingReport {
        report: CheckReport::new(a.max(b / 10.0), any.then(|| witness_at(ia)), tol, trunc),
        residual_a: a,
        witness_a: any.then(|| witness_at(ia)),
        residual_b: b,
        witness_b: any.then(|| witness_at(ib)),
        residual_lambda0: b0,
        verdict_a,
        verdict_b,
        verdict_lambda0,
        consistent: verdict_a == verdict_b,
        bracket: br,
        residual_a_profile: profile_a,
        residual_b_profile: profile_b,
        omega,
        trials: opts.trials,
    })
}

/// For a single generator under the orthogonality condition the optimal
/// Bessel bound is `ess sup [φ, φ]`.
pub fn bessel_bound(phi: &OperatorField, grid: &TorusGrid, truncation: i64) -> Result<f64> {
    let b = bracket(phi, phi, grid, truncation)?;
    Ok(b.values.iter().map(|z| z.re).fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselSum {
    /// `Σ_λ |⟨f, L_λ φ⟩|²` over `λ₁ ∈ box(k_max)` and all of `Λ₀`.
    pub analysis_energy: f64,
    pub norm_sq: f64,
}

/// Both sides of the Bessel inequality for `f = Σ c L_λ φ`, computed on the
/// fiber side. The `Λ₀` sum is exact through Parseval on the torus.
pub fn bessel_sum(
    phi: &OperatorField,
    lattice: &LatticeSpec,
    grid: &TorusGrid,
    f: &LatticeCombination,
    truncation: i64,
) -> Result<BesselSum> {
    let k = lattice.k_max;
    let rf = f.spatial_radius();
    let per_point = per_alpha(grid, |_, a| {
        let pp = FiberCorrelation::new(phi, phi, a, truncation)?;
        if pp.is_zero() {
            return Ok((0.0, 0.0));
        }
        let gram = PairTable::build(&pp, lattice, k + rf)?;
        let e = f.fiber_coefficients(a);
        let mut energy = 0.0;
        for mu in LatticeSpec::box_indices(k) {
            let c: Complex64 = e.iter().map(|(l, c)| c * gram.pair(*l, mu)).sum();
            energy += c.norm_sqr();
        }
        let small = PairTable::build(&pp, lattice, 2 * rf)?;
        Ok((energy, quadratic_form(&small, &e, &e).re))
    })?;
    let w = grid.weights();
    let energy: Vec<f64> = per_point.iter().zip(w).map(|(p, w)| p.0 * w).collect();
    let norm: Vec<f64> = per_point.iter().zip(w).map(|(p, w)| p.1 * w).collect();
    Ok(BesselSum {
        analysis_energy: crate::reduce::pairwise_sum(&energy),
        norm_sq: crate::reduce::pairwise_sum(&norm),
    })
}

/// `⟨f, g⟩ = Σ_{λ₁} ⟨f_{λ₁}, g_{λ₁}⟩` for random `f, g` in the span of
/// `φ`, where `f_{λ₁}` collects the `Λ₀`-translates at `λ₁`. The violation
/// is `|⟨f, g⟩ - Σ ⟨f_{λ₁}, g_{λ₁}⟩| / (‖f‖ ‖g‖)`.
pub fn decomposition_parseval_check(
    phi: &OperatorField,
    lattice: &LatticeSpec,
    grid: &TorusGrid,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    ensure_orthogonal("phi", phi, lattice, grid, opts)?;
    let rf = lattice.k_max.min(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pairs: Vec<(LatticeCombination, LatticeCombination)> = (0..opts.trials)
        .map(|_| {
            (
                LatticeCombination::random(&mut rng, rf, lattice.central_range, 5),
                LatticeCombination::random(&mut rng, rf, lattice.central_range, 5),
            )
        })
        .collect();
    // per point and trial: (full, split, ‖f‖², ‖g‖²)
    let per_point = per_alpha(grid, |_, a| {
        let pp = FiberCorrelation::new(phi, phi, a, opts.truncation)?;
        if pp.is_zero() {
            return Ok(vec![(ZERO, ZERO, 0.0, 0.0); pairs.len()]);
        }
        let gram = PairTable::build(&pp, lattice, 2 * rf)?;
        Ok(pairs
            .iter()
            .map(|(f, g)| {
                let ef = f.fiber_coefficients(a);
                let eg = g.fiber_coefficients(a);
                let full = quadratic_form(&gram, &ef, &eg);
                let mut split = ZERO;
                for (l, cf) in &ef {
                    if let Some((_, cg)) = eg.iter().find(|(k, _)| k == l) {
                        split += cf * cg.conj() * gram.pair(*l, *l);
                    }
                }
                let nf = quadratic_form(&gram, &ef, &ef).re;
                let ng = quadratic_form(&gram, &eg, &eg).re;
                (full, split, nf, ng)
            })
            .collect::<Vec<_>>())
    })?;
    let w = grid.weights();
    let mut violations = Vec::with_capacity(pairs.len());
    for t in 0..pairs.len() {
        let col = |f: &dyn Fn(&(Complex64, Complex64, f64, f64)) -> Complex64| {
            let terms: Vec<Complex64> = per_point.iter().zip(w).map(|(p, w)| f(&p[t]) * *w).collect();
            pairwise_sum_complex(&terms)
        };
        let full = col(&|p| p.0);
        let split = col(&|p| p.1);
        let nf = col(&|p| Complex64::new(p.2, 0.0)).re;
        let ng = col(&|p| Complex64::new(p.3, 0.0)).re;
        let denom = (nf * ng).sqrt();
        violations.push(if denom > 0.0 { (full - split).norm() / denom } else { 0.0 });
    }
    let v = argmax(&violations).map_or(0.0, |p| p.1);
    Ok(CheckReport::new(v, None, opts.tol, 0.0))
}

/// One row of the Gabor application scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaborScanRow {
    pub alpha: f64,
    pub hypothesis_ok: bool,
    /// `max_{λ₁ ≠ 0} max(|⟨π_α(λ₁)v_α, v_α⟩|, |⟨π_α(λ₁)w_α, w_α⟩|)`.
    pub hypothesis_violation: f64,
    /// `|α^{1/2} ⟨v_α, w_α⟩| - 1`.
    pub condition_profile: f64,
    pub residual_a: f64,
    pub residual_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaborScanReport {
    pub t: f64,
    pub rows: Vec<GaborScanRow>,
    /// `sup |condition_profile| ≤ tol`.
    pub condition_verdict: bool,
    pub reproducing_verdict: bool,
    /// Both sides of the equivalence agree.
    pub consistent: bool,
    /// The condition side, with its worst grid point.
    pub report: CheckReport,
    pub reproducing: ReproducingReport,
}

/// Orthonormality of `{π_α(λ₁) v_α}` and `{π_α(λ₁) w_α}` at each grid
/// point in `(t, 1]`: `(α, violation, worst λ₁)`.
pub fn gabor_hypothesis_profile(
    v: &SampledWindow,
    w: &SampledWindow,
    lattice: &LatticeSpec,
    t: f64,
    grid: &TorusGrid,
) -> Result<Vec<(f64, f64, Option<LatticeIndex>)>> {
    let indices = nonzero_indices(lattice.k_max);
    let pts: Vec<f64> = grid.points().iter().copied().filter(|a| *a > t).collect();
    try_ordered_map(&pts, |&a| {
        let mut best = (0.0, None);
        for &idx in &indices {
            let dv = gabor_inner(v, v, a, lattice, idx)?.norm();
            let dw = gabor_inner(w, w, a, lattice, idx)?.norm();
            let d = dv.max(dw);
            if d > best.0 {
                best = (d, Some(idx));
            }
        }
        Ok((a, best.0, best.1))
    })
}

/// Both sides of the Gabor application at one `t`: the condition
/// `|⟨v_α, w_α⟩| = α^{-1/2}` on `(t, 1]` and the reproducing formula for
/// `(𝓗_t, 𝓖_t)` built from `v` and `w`.
pub fn gabor_application_scan(
    v: &SampledWindow,
    w: &SampledWindow,
    lattice: &LatticeSpec,
    t: f64,
    grid: &TorusGrid,
    opts: &CheckOptions,
) -> Result<GaborScanReport> {
    for (name, x) in [("v", v), ("w", w)] {
        let n = x.norm();
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::HypothesisFailure(format!("window {name} has norm {n}, expected 1")));
        }
    }
    let hyp = gabor_hypothesis_profile(v, w, lattice, t, grid)?;
    if let Some((a, d, idx)) = hyp.iter().find(|h| h.1 > opts.tol) {
        return Err(Error::HypothesisFailure(format!(
            "Gabor family is not orthonormal at alpha={a}: |<pi(lambda)v, v>| = {d:e} at lambda={idx:?}"
        )));
    }
    let phi = build_ht(v.clone(), t, None)?;
    let psi = build_ht(w.clone(), t, None)?;
    let rep = check_reproducing(&phi, &psi, lattice, grid, opts)?;
    let mut rows = Vec::with_capacity(hyp.len());
    for (a, d, _) in &hyp {
        let i = grid.points().iter().position(|p| p == a).expect("scan point on grid");
        let vw = dilation_invariant_inner(v, w, *a)?;
        rows.push(GaborScanRow {
            alpha: *a,
            hypothesis_ok: *d <= opts.tol,
            hypothesis_violation: *d,
            condition_profile: (a.sqrt() * vw).norm() - 1.0,
            residual_a: rep.residual_a_profile[i],
            residual_b: rep.residual_b_profile[i],
        });
    }
    let cond: Vec<f64> = rows.iter().map(|r| r.condition_profile.abs()).collect();
    let (ci, cmax) = argmax(&cond).unwrap_or((0, 0.0));
    let condition_verdict = cmax <= opts.tol;
    let reproducing_verdict = rep.report.verdict;
    let consistent = condition_verdict == reproducing_verdict;
    let witness = rows.get(ci).map(|r| Witness {
        alpha: r.alpha,
        index: None,
    });
    Ok(GaborScanReport {
        t,
        rows,
        condition_verdict,
        reproducing_verdict,
        consistent,
        report: CheckReport::new(cmax, witness, opts.tol, rep.report.truncation_residual),
        reproducing: rep,
    })
}
