//! Eigenfunction diagnostics and shape-preservation predictors.
//!
//! Quantifies how close an indicator shape is to an eigenfunction of
//! the adapted functional: the lambda formulas, the ratio image r = p/u,
//! the probe score T(u) at a tenth of the predicted extinction time,
//! linear decay fits, the two a_max predictors, and the sweep that maps
//! the critical anisotropy against ellipse eccentricity.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{AnisoError, Result};
use crate::grid::{a2tv_energy, ScalarGrid, TensorField, VectorField};
use crate::shapes::{
    max_curvature_point, rasterize, Mask, RasterShape, ShapeSpec, ShapeVariant,
};
use crate::solver::{a2tv_flow, FlowParams, FlowTrajectory, SolverParams};
use crate::tensor::build_set_tensor;

/// Isotropic eigenvalue of a calibrable set: perimeter over area.
pub fn lambda_tv(shape: &RasterShape) -> f64 {
    shape.perimeter() / shape.area()
}

/// Adapted eigenvalue: `a` times perimeter over area.
pub fn lambda_a2tv(shape: &RasterShape, a: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(AnisoError::InvalidParameter(format!(
            "anisotropy parameter must lie in (0, 1], got {a}"
        )));
    }
    Ok(a * lambda_tv(shape))
}

/// Ratio image `r = p / u` restricted to the support where
/// `|u| >= support_floor * max|u|`; pixels outside the support carry 0
/// and are excluded from the statistics.
#[derive(Debug, Clone)]
pub struct RatioImage {
    pub values: ScalarGrid,
    pub support: Mask,
    pub mean: f64,
    pub std: f64,
}

pub fn ratio_image(u: &ScalarGrid, p: &ScalarGrid, support_floor: f64) -> Result<RatioImage> {
    if !u.same_dims(p) {
        return Err(AnisoError::DimensionMismatch {
            expected_w: u.width(),
            expected_h: u.height(),
            got_w: p.width(),
            got_h: p.height(),
        });
    }
    if !(support_floor > 0.0) {
        return Err(AnisoError::InvalidParameter(
            "support floor must be positive".into(),
        ));
    }
    let max_abs = u.values().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let floor = support_floor * max_abs;
    let (w, h) = (u.width(), u.height());
    let mut values = ScalarGrid::zeros(w, h);
    let mut support = vec![false; w * h];
    let mut samples = Vec::new();
    for i in 0..w * h {
        let uv = u.values()[i];
        if uv.abs() >= floor && floor > 0.0 {
            let r = p.values()[i] / uv;
            values.values_mut()[i] = r;
            support[i] = true;
            samples.push(r);
        }
    }
    if samples.is_empty() {
        return Err(AnisoError::EmptySupport);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|&r| (r - mean) * (r - mean)).sum::<f64>() / samples.len() as f64;
    Ok(RatioImage {
        values,
        support: Mask::new(w, h, support)?,
        mean,
        std: var.sqrt(),
    })
}

/// Reference point for the probe score: the shape center for disks and
/// ellipses (where the paper defines it), otherwise the deepest
/// interior pixel of the mask.
fn reference_point(spec: &ShapeSpec, shape: &RasterShape) -> (f64, f64) {
    match spec.variant {
        ShapeVariant::Disk { .. } | ShapeVariant::Ellipse { .. } => spec.center,
        _ => {
            let mut mask = shape.mask().clone();
            let mut last = mask.clone();
            while mask.count() > 0 {
                last = mask.clone();
                mask = mask.erode(1);
            }
            for r in 0..last.height() {
                for c in 0..last.width() {
                    if last.get(r, c) {
                        return (c as f64, r as f64);
                    }
                }
            }
            spec.center
        }
    }
}

/// Probe point: the boundary location of maximal curvature, offset
/// inward by 5% of its distance to the reference point. For ellipses
/// this is the analytic `(ra - 0.05 ra, 0)` in shape coordinates.
fn probe_point(spec: &ShapeSpec, shape: &RasterShape, reference: (f64, f64)) -> Result<(f64, f64)> {
    match spec.variant {
        ShapeVariant::Ellipse { ra, .. } | ShapeVariant::Disk { r: ra } => {
            let eps = 0.05 * ra;
            let (s, c) = spec.rotation.sin_cos();
            let local = (ra - eps, 0.0);
            Ok((
                spec.center.0 + c * local.0 - s * local.1,
                spec.center.1 + s * local.0 + c * local.1,
            ))
        }
        _ => {
            let ((px, py), _) = max_curvature_point(shape)?;
            let dx = reference.0 - px;
            let dy = reference.1 - py;
            let d = (dx * dx + dy * dy).sqrt().max(1e-9);
            let eps = 0.05 * d;
            Ok((px + eps * dx / d, py + eps * dy / d))
        }
    }
}

/// Probe score `T(u) = (u(ref) - u(probe)) / u(ref)` evaluated on the
/// snapshot nearest `t = 1 / (10 lambda_a)`; zero for a shape that
/// decays uniformly, positive when the high-curvature region erodes
/// faster than the interior.
pub fn eigen_score(traj: &FlowTrajectory, spec: &ShapeSpec, lambda_a: f64) -> Result<f64> {
    if !(lambda_a > 0.0) {
        return Err(AnisoError::InvalidParameter(
            "eigenvalue must be positive".into(),
        ));
    }
    let t_eval = 1.0 / (10.0 * lambda_a);
    let t_end = *traj.times.last().ok_or_else(|| {
        AnisoError::TrajectoryTooShort("empty trajectory".into())
    })?;
    if t_end + 1e-12 < t_eval {
        return Err(AnisoError::TrajectoryTooShort(format!(
            "trajectory ends at {t_end} before the probe time {t_eval}"
        )));
    }
    let shape = rasterize(spec)?;
    let reference = reference_point(spec, &shape);
    let probe = probe_point(spec, &shape, reference)?;
    let snap = &traj.snapshots[traj.nearest_index(t_eval)];
    let u_ref = snap.sample_bilinear(reference.0, reference.1);
    let u_probe = snap.sample_bilinear(probe.0, probe.1);
    if u_ref.abs() < 1e-12 {
        return Err(AnisoError::DegenerateInput(
            "reference value vanished before the probe time".into(),
        ));
    }
    Ok((u_ref - u_probe) / u_ref)
}

/// Linear fit of the interior-exterior contrast over time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    /// Fitted d(contrast)/dt over the first 60% of the decay.
    pub slope: f64,
    pub r_squared: f64,
    /// Time where the contrast first drops below 2% of its initial
    /// value, linearly interpolated; None if never reached.
    pub extinction: Option<f64>,
}

/// Contrast between the eroded interior and eroded exterior of the mask.
fn contrast(u: &ScalarGrid, interior: &Mask, exterior: &Mask) -> f64 {
    let mut sum_in = 0.0;
    let mut n_in = 0usize;
    let mut sum_out = 0.0;
    let mut n_out = 0usize;
    for r in 0..u.height() {
        for c in 0..u.width() {
            if interior.get(r, c) {
                sum_in += u.get(r, c);
                n_in += 1;
            } else if exterior.get(r, c) {
                sum_out += u.get(r, c);
                n_out += 1;
            }
        }
    }
    sum_in / n_in.max(1) as f64 - sum_out / n_out.max(1) as f64
}

/// Fit the contrast decay of a flow against the linear eigenfunction
/// law. The fit window covers snapshots down to 40% of the initial
/// contrast (the first 60% of the decay).
pub fn decay_fit(traj: &FlowTrajectory, shape: &RasterShape) -> Result<DecayFit> {
    let interior = shape.mask().erode(3);
    let exterior = shape.mask().invert().erode(3);
    if interior.count() == 0 || exterior.count() == 0 {
        return Err(AnisoError::DegenerateInput(
            "shape too thin for eroded contrast measurement".into(),
        ));
    }
    let contrasts: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|u| contrast(u, &interior, &exterior))
        .collect();
    let c0 = contrasts[0];
    if c0.abs() < 1e-12 {
        return Err(AnisoError::DegenerateInput(
            "initial contrast is zero".into(),
        ));
    }
    let alive = contrasts.iter().filter(|&&c| c / c0 > 0.02).count();
    if alive < 5 {
        return Err(AnisoError::TrajectoryTooShort(format!(
            "only {alive} snapshots before extinction, need 5"
        )));
    }

    // least squares over the first 60% of the decay
    let window: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&contrasts)
        .take_while(|(_, &c)| c / c0 >= 0.4)
        .map(|(&t, &c)| (t, c))
        .collect();
    let n = window.len() as f64;
    let mean_t = window.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mean_c = window.iter().map(|(_, c)| c).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(t, c) in &window {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (c - mean_c);
        syy += (c - mean_c) * (c - mean_c);
    }
    if sxx == 0.0 {
        return Err(AnisoError::DegenerateInput("fit window too short".into()));
    }
    let slope = sxy / sxx;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };

    let threshold = 0.02 * c0;
    let mut extinction = None;
    for k in 1..contrasts.len() {
        if contrasts[k] < threshold && contrasts[k - 1] >= threshold {
            let t0 = traj.times[k - 1];
            let t1 = traj.times[k];
            let frac = (contrasts[k - 1] - threshold) / (contrasts[k - 1] - contrasts[k]);
            extinction = Some(t0 + frac * (t1 - t0));
            break;
        }
    }

    Ok(DecayFit {
        slope,
        r_squared,
        extinction,
    })
}

/// Largest anisotropy keeping a non-convex set calibrable: the hull
/// perimeter over the perimeter, identically the convexity measure.
pub fn a_max_nonconvex(shape: &RasterShape) -> f64 {
    crate::shapes::convexity_measure(shape)
}

/// Curvature-based bound: cube root of `(P/|C|) / kappa_max`, capped
/// at 1.
pub fn a_max_curvature(shape: &RasterShape, kappa_max: f64) -> Result<f64> {
    if !(kappa_max > 0.0) {
        return Err(AnisoError::InvalidParameter(
            "curvature must be positive".into(),
        ));
    }
    let lam = lambda_tv(shape);
    Ok((lam / kappa_max).cbrt().min(1.0))
}

/// Combined predictor: the smaller of the non-convexity and curvature
/// bounds.
pub fn a_max_combined(shape: &RasterShape, kappa_max: f64) -> Result<f64> {
    Ok(a_max_nonconvex(shape).min(a_max_curvature(shape, kappa_max)?))
}

/// `xi_tilde = A xi`, the field the plain divergence acts on.
pub fn xi_tilde(xi: &VectorField, a: &TensorField) -> Result<VectorField> {
    a.apply(xi)
}

/// Full diagnostic record of one eigenfunction test.
#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub lambda_theory: f64,
    pub lambda_estimate: f64,
    pub score_t: f64,
    pub ratio_mean: f64,
    pub ratio_std: f64,
    pub decay: DecayFit,
    pub is_eigen: bool,
}

/// Controls for [`eigen_test`].
#[derive(Debug, Clone)]
pub struct EigenTestConfig {
    pub a: f64,
    pub steps: usize,
    pub inner: SolverParams,
    pub first_step_max_iters: Option<usize>,
    pub score_bar: f64,
    pub support_floor: f64,
}

impl Default for EigenTestConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            steps: 12,
            inner: SolverParams::default(),
            first_step_max_iters: Some(20_000),
            score_bar: 0.0017,
            support_floor: 0.1,
        }
    }
}

/// Run the flow on a shape indicator and assemble the eigenfunction
/// diagnostics: theory and estimated eigenvalues, probe score, ratio
/// statistics and the decay fit. The flow covers 1.2 of the predicted
/// extinction time.
pub fn eigen_test(spec: &ShapeSpec, cfg: &EigenTestConfig) -> Result<EigenReport> {
    let mut flow_spec = spec.clone();
    flow_spec.zero_mean = true;
    let shape = rasterize(&flow_spec)?;
    let tensor = build_set_tensor(&shape, cfg.a)?;
    let lambda_theory = lambda_a2tv(&shape, cfg.a)?;

    // the estimate J/||u||^2 is evaluated on the plain indicator, where
    // it reduces to the coarea ratio
    let mut plain_spec = spec.clone();
    plain_spec.zero_mean = false;
    let plain = rasterize(&plain_spec)?;
    let j = a2tv_energy(plain.indicator(), &tensor)?;
    let norm2 = plain.indicator().values().iter().map(|v| v * v).sum::<f64>();
    let lambda_estimate = j / norm2;

    let horizon = 1.2 / lambda_theory;
    let dt = horizon / cfg.steps as f64;
    let mut flow = FlowParams::new(dt, cfg.steps, cfg.inner)?;
    flow.first_step_max_iters = cfg.first_step_max_iters;
    let traj = a2tv_flow(shape.indicator(), &tensor, &flow)?;

    let score_t = eigen_score(&traj, &flow_spec, lambda_theory)?;
    let ratio = ratio_image(&traj.snapshots[0], &traj.subgradients[0], cfg.support_floor)?;
    let decay = decay_fit(&traj, &shape)?;

    Ok(EigenReport {
        lambda_theory,
        lambda_estimate,
        score_t,
        ratio_mean: ratio.mean,
        ratio_std: ratio.std,
        decay,
        is_eigen: score_t <= cfg.score_bar,
    })
}

/// Controls for [`conjecture_sweep`].
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub ratios: Vec<f64>,
    pub a_values: Vec<f64>,
    pub ra: f64,
    pub score_bar: f64,
    pub grid: usize,
    pub steps: usize,
    pub inner: SolverParams,
    pub first_step_max_iters: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ratios: (3..=10).map(|i| i as f64 / 10.0).collect(),
            a_values: (5..=10).map(|i| i as f64 / 10.0).collect(),
            ra: 100.0,
            score_bar: 0.0017,
            grid: 256,
            steps: 5,
            inner: SolverParams::default(),
            first_step_max_iters: Some(20_000),
        }
    }
}

/// Sweep result: probe scores per (ratio, a) cell, the extracted
/// critical anisotropy per ratio (grid-snapped and crossing-interpolated)
/// and both curvature-bound readouts.
#[derive(Debug, Clone, Serialize)]
pub struct ConjectureSweep {
    pub ratios: Vec<f64>,
    pub a_values: Vec<f64>,
    pub ra: f64,
    pub score_bar: f64,
    /// scores[i][j] for ratio i, anisotropy j.
    pub scores: Vec<Vec<f64>>,
    /// Largest tested `a` whose score stays at or below the bar.
    pub a_cr_grid: Vec<Option<f64>>,
    /// Bar crossing of the score curve, linearly interpolated in `a`.
    pub a_cr_refined: Vec<Option<f64>>,
    /// `1 / a_cr^3` from the refined crossing.
    pub f_cr_exp: Vec<Option<f64>>,
    /// `max(kappa_max / (P/|C|), 1)` from measured geometry.
    pub f_cr_theory: Vec<f64>,
    pub notes: Vec<String>,
}

/// Run the ellipse eccentricity-anisotropy sweep. Cells are independent
/// flow runs and execute in parallel; the merge is a deterministic
/// reduce over the cell grid.
pub fn conjecture_sweep(cfg: &SweepConfig) -> Result<ConjectureSweep> {
    if cfg.ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0))
        || cfg.a_values.iter().any(|&a| !(a > 0.0 && a <= 1.0))
    {
        return Err(AnisoError::InvalidParameter(
            "ratios and anisotropies must lie in (0, 1]".into(),
        ));
    }
    let mut a_values = cfg.a_values.clone();
    a_values.sort_by(|x, y| x.partial_cmp(y).unwrap());

    // per-ratio geometry, measured once
    struct RatioGeom {
        spec: ShapeSpec,
        lambda_tv: f64,
        f_theory: f64,
    }
    let mut geoms = Vec::with_capacity(cfg.ratios.len());
    for &ratio in &cfg.ratios {
        let spec = ShapeSpec::centered(
            ShapeVariant::Ellipse {
                ra: cfg.ra,
                rb: ratio * cfg.ra,
            },
            cfg.grid,
            cfg.grid,
            1.0,
            true,
        );
        let shape = rasterize(&spec)?;
        let lam = lambda_tv(&shape);
        let kappa = crate::shapes::ellipse_max_curvature(cfg.ra, ratio * cfg.ra)?;
        geoms.push(RatioGeom {
            spec,
            lambda_tv: lam,
            f_theory: (kappa / lam).max(1.0),
        });
    }

    let cells: Vec<(usize, usize)> = (0..cfg.ratios.len())
        .flat_map(|i| (0..a_values.len()).map(move |j| (i, j)))
        .collect();
    let scores_flat: Result<Vec<((usize, usize), f64)>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let geom = &geoms[i];
            let a = a_values[j];
            let shape = rasterize(&geom.spec)?;
            let tensor = build_set_tensor(&shape, a)?;
            let lambda_a = a * geom.lambda_tv;
            let t_eval = 1.0 / (10.0 * lambda_a);
            let dt = t_eval / (cfg.steps - 1).max(1) as f64;
            let mut flow = FlowParams::new(dt, cfg.steps, cfg.inner)?;
            flow.first_step_max_iters = cfg.first_step_max_iters;
            let traj = a2tv_flow(shape.indicator(), &tensor, &flow)?;
            let score = eigen_score(&traj, &geom.spec, lambda_a)?;
            Ok(((i, j), score))
        })
        .collect();
    let scores_flat = scores_flat?;

    let mut scores = vec![vec![0.0; a_values.len()]; cfg.ratios.len()];
    for ((i, j), s) in scores_flat {
        scores[i][j] = s;
    }

    let mut a_cr_grid = Vec::new();
    let mut a_cr_refined = Vec::new();
    let mut f_cr_exp = Vec::new();
    let mut notes = Vec::new();
    for (i, row) in scores.iter().enumerate() {
        for j in 0..row.len() {
            for jj in j + 1..row.len() {
                if row[j] > row[jj] + 1e-4 {
                    notes.push(format!(
                        "score not monotone in a at ratio {}: T({}) = {:.3e} > T({}) = {:.3e}",
                        cfg.ratios[i], a_values[j], row[j], a_values[jj], row[jj]
                    ));
                }
            }
        }
        let last_pass = (0..row.len()).rev().find(|&j| row[j] <= cfg.score_bar);
        match last_pass {
            None => {
                a_cr_grid.push(None);
                a_cr_refined.push(None);
                f_cr_exp.push(None);
            }
            Some(j) => {
                a_cr_grid.push(Some(a_values[j]));
                let refined = if j + 1 < row.len() {
                    let (a0, s0) = (a_values[j], row[j]);
                    let (a1, s1) = (a_values[j + 1], row[j + 1]);
                    a0 + (cfg.score_bar - s0) * (a1 - a0) / (s1 - s0)
                } else {
                    a_values[j]
                };
                a_cr_refined.push(Some(refined));
                f_cr_exp.push(Some(1.0 / (refined * refined * refined)));
            }
        }
    }

    Ok(ConjectureSweep {
        ratios: cfg.ratios.clone(),
        a_values,
        ra: cfg.ra,
        score_bar: cfg.score_bar,
        scores,
        a_cr_grid,
        a_cr_refined,
        f_cr_exp,
        f_cr_theory: geoms.iter().map(|g| g.f_theory).collect(),
        notes,
    })
}
