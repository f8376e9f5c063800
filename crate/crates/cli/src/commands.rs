use std::fs;

use hgframe_core::bracket::{
    bessel_bound, bessel_sum, bracket, check_biorthogonality, check_orthogonality, check_reproducing,
    decomposition_parseval_check, gabor_application_scan, omega_set, CheckOptions, LatticeCombination,
    TorusFunction,
};
use hgframe_core::fiber::{dual_report, fiber_frame_bounds, FiberSystem};
use hgframe_core::grid::inner_product;
use hgframe_core::reduce::try_ordered_map;
use hgframe_core::Error;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::report::{Cell, Outcome, Trace};

/// Slack on the Bessel inequality for quadrature rounding.
const BESSEL_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Orth,
    Bio,
    Repro,
    Bessel,
    Parseval,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Orth => "orth",
            CheckKind::Bio => "bio",
            CheckKind::Repro => "repro",
            CheckKind::Bessel => "bessel",
            CheckKind::Parseval => "parseval",
        }
    }
}

fn options(cfg: &RunConfig) -> CheckOptions {
    CheckOptions {
        tol: cfg.tolerances.tol,
        truncation: cfg.truncation.m,
        epsilon: cfg.tolerances.epsilon,
        trials: cfg.tolerances.trials,
        seed: cfg.seed,
    }
}

fn re_im(z: Complex64) -> [Cell; 2] {
    [Cell::F(z.re), Cell::F(z.im)]
}

fn bracket_trace(name: &str, f: &TorusFunction) -> Trace {
    let mut t = Trace::new(name, vec!["alpha", "re", "im"]);
    for (a, z) in f.points().iter().zip(&f.values) {
        let [re, im] = re_im(*z);
        t.push(vec![Cell::F(*a), re, im]);
    }
    t
}

/// Brackets of the configured fields with their closed forms
/// `s_φ(α) s_ψ(α) α |⟨v, w⟩|²` on `(t, 1]`.
pub fn cmd_bracket(cfg: &RunConfig) -> CliResult<Outcome> {
    let t = cfg.field_config()?.t;
    let (phi, psi) = cfg.fields()?;
    let (v, w) = (cfg.primary_window()?, cfg.partner()?);
    let (sp, sq) = (cfg.scale()?, cfg.partner_scale()?);
    let grid = cfg.torus_grid()?;
    let m = cfg.truncation.m;
    let own = bracket(&phi, &phi, &grid, m)?;
    let cross = bracket(&phi, &psi, &grid, m)?;
    let vv = inner_product(&v, &v)?.norm_sqr();
    let vw = inner_product(&v, &w)?.norm_sqr();

    let mut trace = Trace::new(
        "bracket",
        vec![
            "alpha",
            "self_re",
            "self_im",
            "cross_re",
            "cross_im",
            "self_closed_form",
            "cross_closed_form",
            "self_deviation",
            "cross_deviation",
        ],
    );
    let (mut dev_self, mut dev_cross) = (0.0f64, 0.0f64);
    for (i, &a) in grid.points().iter().enumerate() {
        let on = a > t;
        let cf_self = if on { sp.eval(a) * sp.eval(a) * a * vv } else { 0.0 };
        let cf_cross = if on { sp.eval(a) * sq.eval(a) * a * vw } else { 0.0 };
        let ds = (own.values[i] - cf_self).norm();
        let dc = (cross.values[i] - cf_cross).norm();
        dev_self = dev_self.max(ds);
        dev_cross = dev_cross.max(dc);
        let [sr, si] = re_im(own.values[i]);
        let [cr, ci] = re_im(cross.values[i]);
        trace.push(vec![
            Cell::F(a),
            sr,
            si,
            cr,
            ci,
            Cell::F(cf_self),
            Cell::F(cf_cross),
            Cell::F(own.values[i].re - cf_self),
            Cell::F(cross.values[i].re - cf_cross),
        ]);
    }
    let tol = cfg.tolerances.tol;
    Ok(Outcome {
        verdict: Some(dev_self <= tol && dev_cross <= tol),
        result: json!({
            "max_self_deviation": dev_self,
            "max_cross_deviation": dev_cross,
            "self_bracket_integral": [own.integral().re, own.integral().im],
            "cross_bracket_integral": [cross.integral().re, cross.integral().im],
            "window_inner_sq": vw,
            "tolerance": tol,
        }),
        traces: vec![trace],
    })
}

pub fn cmd_check(cfg: &RunConfig, which: CheckKind) -> CliResult<Outcome> {
    let lattice = cfg.lattice_spec()?;
    let grid = cfg.torus_grid()?;
    let opts = options(cfg);
    let (phi, psi) = cfg.fields()?;
    match which {
        CheckKind::Orth => {
            let r = check_orthogonality(&phi, &lattice, &grid, &opts)?;
            let own = bracket(&phi, &phi, &grid, opts.truncation)?;
            let omega = omega_set(&phi, &grid, opts.epsilon, opts.truncation)?;
            let mut trace = Trace::new("self_bracket", vec!["alpha", "re", "im", "in_omega"]);
            for ((a, z), on) in own.points().iter().zip(&own.values).zip(&omega.mask) {
                let [re, im] = re_im(*z);
                trace.push(vec![Cell::F(*a), re, im, Cell::B(*on)]);
            }
            Ok(Outcome {
                verdict: Some(r.verdict),
                result: json!({ "check": "orth", "report": r, "omega_points": omega.count() }),
                traces: vec![trace],
            })
        }
        CheckKind::Bio => {
            let r = check_biorthogonality(&phi, &psi, &lattice, &grid, &opts)?;
            let cross = bracket(&phi, &psi, &grid, opts.truncation)?;
            Ok(Outcome {
                verdict: Some(r.verdict),
                result: json!({ "check": "bio", "report": r }),
                traces: vec![bracket_trace("cross_bracket", &cross)],
            })
        }
        CheckKind::Repro => {
            let r = check_reproducing(&phi, &psi, &lattice, &grid, &opts)?;
            let mut trace = Trace::new(
                "reproducing",
                vec!["alpha", "bracket_re", "bracket_im", "in_omega", "residual_A", "residual_B"],
            );
            for (i, a) in grid.points().iter().enumerate() {
                let [re, im] = re_im(r.bracket.values[i]);
                trace.push(vec![
                    Cell::F(*a),
                    re,
                    im,
                    Cell::B(r.omega.mask[i]),
                    Cell::F(r.residual_a_profile[i]),
                    Cell::F(r.residual_b_profile[i]),
                ]);
            }
            Ok(Outcome {
                verdict: Some(r.report.verdict),
                result: json!({
                    "check": "repro",
                    "report": r.report,
                    "residual_A": r.residual_a,
                    "witness_A": r.witness_a,
                    "residual_B": r.residual_b,
                    "witness_B": r.witness_b,
                    "residual_lambda0": r.residual_lambda0,
                    "verdict_A": r.verdict_a,
                    "verdict_B": r.verdict_b,
                    "verdict_lambda0": r.verdict_lambda0,
                    "consistent": r.consistent,
                    "omega_points": r.omega.count(),
                    "trials": r.trials,
                }),
                traces: vec![trace],
            })
        }
        CheckKind::Bessel => {
            let orth = check_orthogonality(&phi, &lattice, &grid, &opts)?;
            if !orth.verdict {
                return Err(Error::HypothesisFailure(format!(
                    "orthogonality condition fails for phi: violation {:e}",
                    orth.max_violation
                ))
                .into());
            }
            let bound = bessel_bound(&phi, &grid, opts.truncation)?;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut trace = Trace::new("bessel", vec!["trial", "analysis_energy", "norm_sq", "ratio"]);
            let mut worst = 0.0f64;
            let mut ok = true;
            for k in 0..opts.trials {
                let f = LatticeCombination::random(&mut rng, lattice.k_max.min(1), lattice.central_range, 5);
                let s = bessel_sum(&phi, &lattice, &grid, &f, opts.truncation)?;
                let ratio = if s.norm_sq > 0.0 { s.analysis_energy / s.norm_sq } else { 0.0 };
                ok &= s.analysis_energy <= bound * s.norm_sq * (1.0 + BESSEL_SLACK);
                worst = worst.max(ratio);
                trace.push(vec![
                    Cell::I(k as i64),
                    Cell::F(s.analysis_energy),
                    Cell::F(s.norm_sq),
                    Cell::F(ratio),
                ]);
            }
            Ok(Outcome {
                verdict: Some(ok),
                result: json!({
                    "check": "bessel",
                    "bessel_bound": bound,
                    "max_energy_ratio": worst,
                    "trials": opts.trials,
                }),
                traces: vec![trace],
            })
        }
        CheckKind::Parseval => {
            let r = decomposition_parseval_check(&phi, &lattice, &grid, &opts)?;
            Ok(Outcome {
                verdict: Some(r.verdict),
                result: json!({ "check": "parseval", "report": r, "trials": opts.trials }),
                traces: Vec::new(),
            })
        }
    }
}

/// Sweeps `t` and pairs the Gabor condition with the reproducing residuals.
pub fn cmd_gabor_scan(cfg: &RunConfig) -> CliResult<Outcome> {
    let lattice = cfg.lattice_spec()?;
    let grid = cfg.torus_grid()?;
    let opts = options(cfg);
    let (v, w) = (cfg.primary_window()?, cfg.partner()?);
    let t_list = match &cfg.scan {
        Some(s) => s.t_list.clone(),
        None => vec![cfg.field_config()?.t],
    };
    let mut trace = Trace::new(
        "gabor_scan",
        vec!["t", "alpha", "hypothesis_ok", "condition_profile", "residual_A", "residual_B"],
    );
    let mut per_t = Vec::new();
    let mut all_consistent = true;
    for &t in &t_list {
        let r = gabor_application_scan(&v, &w, &lattice, t, &grid, &opts)?;
        for row in &r.rows {
            trace.push(vec![
                Cell::F(t),
                Cell::F(row.alpha),
                Cell::B(row.hypothesis_ok),
                Cell::F(row.condition_profile),
                Cell::F(row.residual_a),
                Cell::F(row.residual_b),
            ]);
        }
        all_consistent &= r.consistent;
        per_t.push(json!({
            "t": t,
            "equivalence": if r.consistent { "consistent" } else { "inconsistent" },
            "condition_verdict": r.condition_verdict,
            "reproducing_verdict": r.reproducing_verdict,
            "condition_report": r.report,
            "residual_A": r.reproducing.residual_a,
            "residual_B": r.reproducing.residual_b,
            "residual_lambda0": r.reproducing.residual_lambda0,
        }));
    }
    Ok(Outcome {
        verdict: Some(all_consistent),
        result: json!({ "scan": per_t }),
        traces: vec![trace],
    })
}

/// A complex number as `[re, im]`.
pub type Pair = [f64; 2];

/// One torus point of a classification instance: the system, its candidate
/// dual, and optional weights shared by both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFiber {
    pub alpha: f64,
    pub system: Vec<Vec<Pair>>,
    pub dual: Vec<Vec<Pair>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyInstance {
    pub fibers: Vec<InstanceFiber>,
}

fn to_vectors(vs: &[Vec<Pair>]) -> Vec<DVector<Complex64>> {
    vs.iter()
        .map(|v| DVector::from_iterator(v.len(), v.iter().map(|[re, im]| Complex64::new(*re, *im))))
        .collect()
}

fn fiber_pair(f: &InstanceFiber) -> CliResult<(FiberSystem, FiberSystem)> {
    let a = FiberSystem::from_coordinates(f.alpha, to_vectors(&f.system), f.weights.clone())?;
    let b = FiberSystem::from_coordinates(f.alpha, to_vectors(&f.dual), f.weights.clone())?;
    Ok((a, b))
}

pub fn load_instance(cfg: &RunConfig) -> CliResult<ClassifyInstance> {
    let c = cfg
        .classify
        .as_ref()
        .ok_or_else(|| CliError::Config("missing section [classify]".into()))?;
    let path = cfg.resolve(&c.instance);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read instance {}: {e}", path.display())))?;
    let inst: ClassifyInstance = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("instance {}: {e}", path.display())))?;
    if inst.fibers.is_empty() {
        return Err(CliError::Config(format!("instance {} has no fibers", path.display())));
    }
    Ok(inst)
}

/// Per-α dual flags for an instance given in coordinates.
pub fn cmd_classify(cfg: &RunConfig) -> CliResult<Outcome> {
    classify_instance(&load_instance(cfg)?, cfg.tolerances.tol)
}

pub fn classify_instance(inst: &ClassifyInstance, tol: f64) -> CliResult<Outcome> {
    if inst.fibers.is_empty() {
        return Err(CliError::Config("instance has no fibers".into()));
    }
    let rows = try_ordered_map(&inst.fibers, |f| -> CliResult<_> {
        let (a, b) = fiber_pair(f)?;
        let r = dual_report(&a, &b, tol)?;
        let bounds = match fiber_frame_bounds(&a) {
            Ok(b) => Some(b),
            Err(Error::UndefinedBounds) => None,
            Err(e) => return Err(e.into()),
        };
        Ok((r, bounds))
    })?;
    let mut trace = Trace::new(
        "classify",
        vec![
            "alpha",
            "alternate",
            "oblique",
            "type_i",
            "type_ii",
            "dual_residual",
            "swapped_residual",
            "type_i_residual",
            "type_ii_residual",
            "rank",
            "lower_bound",
            "upper_bound",
        ],
    );
    for (r, bounds) in &rows {
        let (lo, hi) = bounds.unwrap_or((f64::NAN, f64::NAN));
        trace.push(vec![
            Cell::F(r.alpha),
            Cell::B(r.alternate),
            Cell::B(r.oblique),
            Cell::B(r.type_i),
            Cell::B(r.type_ii),
            Cell::F(r.dual_residual),
            Cell::F(r.swapped_residual),
            Cell::F(r.type_i_residual),
            Cell::F(r.type_ii_residual),
            Cell::I(r.rank as i64),
            Cell::F(lo),
            Cell::F(hi),
        ]);
    }
    let every = |f: fn(&hgframe_core::fiber::DualReport) -> bool| rows.iter().all(|(r, _)| f(r));
    let failing: Vec<f64> = rows.iter().filter(|(r, _)| !r.alternate).map(|(r, _)| r.alpha).collect();
    let fibers: Vec<_> = rows
        .iter()
        .map(|(r, b)| json!({ "report": r, "frame_bounds": b }))
        .collect();
    Ok(Outcome {
        verdict: Some(failing.is_empty()),
        result: json!({
            "alternate_everywhere": every(|r| r.alternate),
            "oblique_everywhere": every(|r| r.oblique),
            "type_i_everywhere": every(|r| r.type_i),
            "type_ii_everywhere": every(|r| r.type_ii),
            "non_alternate_alphas": failing,
            "fibers": fibers,
        }),
        traces: vec![trace],
    })
}
