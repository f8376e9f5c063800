//! Schrödinger representation of the Heisenberg group on `L²(ℝ)`.
//!
//! `π_σ(x, y, z) f(x') = e^{2πiσz} e^{-2πiσ y x'} f(x' - x)`, with group law
//! `(x, y, z)(x', y', z') = (x + x', y + y', z + z' + x y')`. A translated
//! window keeps its samples and moves its grid origin by `x`, so
//! [`schrodinger_apply`] is exactly norm preserving; pairing the result with
//! a window on another grid goes through the resampling of
//! [`inner_product_with`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    aligned_sum, inner_product_with, interp_sum, GridGeometry, GridPolicy, LatticeIndex,
    LatticeSpec, SampledWindow,
};

/// A point `(x, y, z)` of the Heisenberg group with `d = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// The lattice point `(a m, b n, 0)`.
    pub fn from_lattice(lattice: &LatticeSpec, idx: LatticeIndex) -> Self {
        let (x, y) = lattice.point(idx);
        Self { x, y, z: 0.0 }
    }

    pub fn compose(self, rhs: Self) -> Self {
        Self {
            x: self.x + rhs.x,
            y: self.y + rhs.y,
            z: self.z + rhs.z + self.x * rhs.y,
        }
    }

    pub fn inverse(self) -> Self {
        Self {
            x: -self.x,
            y: -self.y,
            z: -self.z + self.x * self.y,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// A nonzero value `σ` of the dual of the center.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PlaneFrequency(f64);

impl PlaneFrequency {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma == 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidFrequency);
        }
        Ok(Self(sigma))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

pub(crate) fn phase(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * theta)
}

/// Geometry and sample accessor of `π_σ(g) f` without materializing it.
fn represented(
    sigma: f64,
    g: GroupElement,
    f: &SampledWindow,
) -> (GridGeometry, impl Fn(usize) -> Complex64 + '_) {
    let geo = GridGeometry {
        x0: f.x0() + g.x,
        dx: f.dx(),
        n: f.len(),
    };
    let central = phase(sigma * g.z);
    let samples = f.samples();
    let sample = move |k: usize| {
        let xp = geo.node(k);
        central * phase(-sigma * g.y * xp) * samples[k]
    };
    (geo, sample)
}

/// `π_σ(g) f`, returned on the grid of `f` translated by `g.x`.
pub fn schrodinger_apply(sigma: f64, g: GroupElement, f: &SampledWindow) -> Result<SampledWindow> {
    let sigma = PlaneFrequency::new(sigma)?.get();
    let (geo, sample) = represented(sigma, g, f);
    let samples = (0..geo.n).map(sample).collect();
    Ok(SampledWindow::from_parts_unchecked(samples, geo.x0, geo.dx))
}

/// `⟨π_σ(g) f, h⟩`, evaluated in one pass over the samples.
///
/// Produces the same floating-point result as
/// `inner_product_with(&schrodinger_apply(σ, g, f)?, h, GridPolicy::SILENT)`.
pub fn represented_inner(
    sigma: f64,
    g: GroupElement,
    f: &SampledWindow,
    h: &SampledWindow,
) -> Result<Complex64> {
    let sigma = PlaneFrequency::new(sigma)?.get();
    let (gf, sf) = represented(sigma, g, f);
    let gh = h.geometry();
    let sh = |j: usize| h.samples()[j];
    if let Some(off) = gf.aligned_offset(&gh) {
        return Ok(aligned_sum(&gf, sf, &gh, sh, off));
    }
    if gf.same_spacing(&gh) || gf.dx > gh.dx {
        Ok(interp_sum(&gf, sf, &gh, sh))
    } else {
        Ok(interp_sum(&gh, sh, &gf, sf).conj())
    }
}

/// `v_y(x) = |y|^{1/2} v(y x)`.
///
/// The samples are carried over exactly; only the grid is rescaled (and
/// reversed for `y < 0`).
pub fn dilate(v: &SampledWindow, y: f64) -> Result<SampledWindow> {
    if y == 0.0 || !y.is_finite() {
        return Err(Error::InvalidDilation);
    }
    let amp = y.abs().sqrt();
    let dx = v.dx() / y.abs();
    if y > 0.0 {
        let samples = v.samples().iter().map(|z| z * amp).collect();
        Ok(SampledWindow::from_parts_unchecked(samples, v.x0() / y, dx))
    } else {
        let samples = v.samples().iter().rev().map(|z| z * amp).collect();
        Ok(SampledWindow::from_parts_unchecked(samples, v.x_end() / y, dx))
    }
}

/// Ambiguity function `A(s, ν) = ∫ v(u - s) conj(w(u)) e^{-2πiνu} du`.
pub fn ambiguity(v: &SampledWindow, w: &SampledWindow, s: f64, nu: f64) -> Result<Complex64> {
    represented_inner(1.0, GroupElement::new(s, nu, 0.0), v, w)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(crate::error::param("alpha", format!("{alpha} is not in (0, 1]")))
    }
}

/// `⟨π_α(λ₁) v_α, w_α⟩` for `λ₁ = (a m, b n)`, via the ambiguity function
/// at `(α a m, b n)` on the undilated grids.
pub fn gabor_inner(
    v: &SampledWindow,
    w: &SampledWindow,
    alpha: f64,
    lattice: &LatticeSpec,
    idx: LatticeIndex,
) -> Result<Complex64> {
    check_alpha(alpha)?;
    let (x, y) = lattice.point(idx);
    ambiguity(v, w, alpha * x, y)
}

/// Same quantity as [`gabor_inner`], computed by dilating both windows and
/// applying the representation explicitly.
pub fn gabor_inner_direct(
    v: &SampledWindow,
    w: &SampledWindow,
    alpha: f64,
    lattice: &LatticeSpec,
    idx: LatticeIndex,
) -> Result<Complex64> {
    check_alpha(alpha)?;
    let va = dilate(v, alpha)?;
    let wa = dilate(w, alpha)?;
    let shifted = schrodinger_apply(alpha, GroupElement::from_lattice(lattice, idx), &va)?;
    inner_product_with(&shifted, &wa, GridPolicy::SILENT)
}

/// `⟨v_α, w_α⟩`, which equals `⟨v, w⟩` for every `α ≠ 0`.
pub fn dilation_invariant_inner(v: &SampledWindow, w: &SampledWindow, alpha: f64) -> Result<Complex64> {
    let va = dilate(v, alpha)?;
    let wa = dilate(w, alpha)?;
    let dilated = inner_product_with(&va, &wa, GridPolicy::SILENT)?;
    debug_assert!({
        let plain = inner_product_with(v, w, GridPolicy::SILENT)?;
        (dilated - plain).norm() <= 1e-10 * (1.0 + plain.norm())
    });
    Ok(dilated)
}
