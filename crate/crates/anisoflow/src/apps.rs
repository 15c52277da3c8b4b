//! Guided regularization applications.
//!
//! Both consume an anisotropy tensor built once from a guide image:
//! depth inpainting alternates a projection subproblem with a pointwise
//! closed-form fidelity update, and functional/structural fusion is a
//! single adapted ROF solve at a fixed fidelity weight.

use crate::error::{AnisoError, Result};
use crate::grid::{ScalarGrid, VectorField};
use crate::shapes::Mask;
use crate::solver::{chambolle_project, RofProblem, RofSolution, SolverParams};
use crate::tensor::{build_weickert_tensor, StructureTensorParams, WeickertParams};

/// Depth inpainting problem: depth with holes, the known-pixel mask, a
/// guide image the tensor is built from, and the coupling parameters.
#[derive(Debug, Clone)]
pub struct InpaintProblem {
    pub f: ScalarGrid,
    pub known_mask: Mask,
    pub guide: ScalarGrid,
    /// Fidelity weight on known pixels.
    pub mu: f64,
    /// Coupling of the two subproblems.
    pub theta: f64,
    pub tau: f64,
    /// Alternating sessions; each runs `inner_proj` projection steps.
    pub outer_iters: usize,
    pub inner_proj: usize,
    pub st: StructureTensorParams,
    pub wp: WeickertParams,
}

impl InpaintProblem {
    pub fn new(f: ScalarGrid, known_mask: Mask, guide: ScalarGrid) -> Result<Self> {
        if known_mask.width() != f.width()
            || known_mask.height() != f.height()
            || !guide.same_dims(&f)
        {
            return Err(AnisoError::DimensionMismatch {
                expected_w: f.width(),
                expected_h: f.height(),
                got_w: guide.width(),
                got_h: guide.height(),
            });
        }
        Ok(Self {
            f,
            known_mask,
            guide,
            mu: 80.0,
            theta: 5.0,
            tau: 0.125,
            outer_iters: 6000,
            inner_proj: 5,
            st: StructureTensorParams { sigma: 1.0, rho: 2.0 },
            wp: WeickertParams::default(),
        })
    }
}

/// Alternating minimization: the tensor comes from the guide once, the
/// dual field persists across sessions (warm start), each session runs
/// a few projection steps for `min_v J(v) + (1/2 theta) ||v - u||^2`,
/// then the fidelity update `u = (mu_hat theta f + v) / (1 + mu_hat theta)`
/// with `mu_hat = mu` on known pixels and 0 in the holes. Unknown
/// pixels start from the known-pixel mean.
pub fn inpaint(prob: &InpaintProblem) -> Result<ScalarGrid> {
    let known = prob.known_mask.count();
    if known == 0 {
        return Err(AnisoError::EmptyMask);
    }
    if !(prob.mu > 0.0 && prob.theta > 0.0) {
        return Err(AnisoError::InvalidParameter(
            "mu and theta must be positive".into(),
        ));
    }
    let (w, h) = (prob.f.width(), prob.f.height());
    let tensor = build_weickert_tensor(&prob.guide, &prob.st, &prob.wp);

    // initialize holes with the known-pixel mean
    let mut known_sum = 0.0;
    for r in 0..h {
        for c in 0..w {
            if prob.known_mask.get(r, c) {
                known_sum += prob.f.get(r, c);
            }
        }
    }
    let fill = known_sum / known as f64;
    let mut u = ScalarGrid::from_fn(w, h, |r, c| {
        if prob.known_mask.get(r, c) {
            prob.f.get(r, c)
        } else {
            fill
        }
    });

    let n = w * h;
    let inv_theta = 1.0 / prob.theta;
    let mut dual = VectorField::zeros(w, h);
    let mut av = VectorField::zeros(w, h);
    let mut g = VectorField::zeros(w, h);
    let mut ag = VectorField::zeros(w, h);
    let mut d = ScalarGrid::zeros(w, h);
    let mut work = ScalarGrid::zeros(w, h);

    for _ in 0..prob.outer_iters {
        for _ in 0..prob.inner_proj {
            crate::grid::apply_tensor_into(&tensor, &dual, &mut av);
            crate::grid::divergence_into(&av, &mut d);
            for i in 0..n {
                work.values_mut()[i] = d.values()[i] - inv_theta * u.values()[i];
            }
            crate::grid::gradient_into(&work, &mut g);
            crate::grid::apply_tensor_into(&tensor, &g, &mut ag);
            for i in 0..n {
                let gx = ag.x[i];
                let gy = ag.y[i];
                let denom = 1.0 + prob.tau * (gx * gx + gy * gy).sqrt();
                dual.x[i] = (dual.x[i] + prob.tau * gx) / denom;
                dual.y[i] = (dual.y[i] + prob.tau * gy) / denom;
            }
        }
        crate::grid::apply_tensor_into(&tensor, &dual, &mut av);
        crate::grid::divergence_into(&av, &mut d);
        let mt = prob.mu * prob.theta;
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let v = u.values()[i] - prob.theta * d.values()[i];
                u.values_mut()[i] = if prob.known_mask.get(r, c) {
                    (mt * prob.f.values()[i] + v) / (1.0 + mt)
                } else {
                    v
                };
            }
        }
    }
    Ok(u)
}

/// Fusion problem: low-resolution functional image regularized with the
/// structure of a guide.
#[derive(Debug, Clone)]
pub struct FusionProblem {
    pub f: ScalarGrid,
    pub guide: ScalarGrid,
    pub mu: f64,
    /// Weickert contrast parameter for the guide tensor.
    pub k: f64,
    pub st: StructureTensorParams,
    pub solver: SolverParams,
}

impl FusionProblem {
    pub fn new(f: ScalarGrid, guide: ScalarGrid) -> Result<Self> {
        if !guide.same_dims(&f) {
            return Err(AnisoError::DimensionMismatch {
                expected_w: f.width(),
                expected_h: f.height(),
                got_w: guide.width(),
                got_h: guide.height(),
            });
        }
        Ok(Self {
            f,
            guide,
            mu: 5.0 / 3.0,
            k: 0.1,
            st: StructureTensorParams { sigma: 1.0, rho: 2.0 },
            solver: SolverParams::default(),
        })
    }
}

/// Guided fusion: `min J_a2tv(u) + (mu/2) ||u - f||^2` with the tensor
/// built from the guide. Returns the full solver output.
pub fn fuse(prob: &FusionProblem) -> Result<RofSolution> {
    if !(prob.mu > 0.0 && prob.k > 0.0) {
        return Err(AnisoError::InvalidParameter(
            "mu and k must be positive".into(),
        ));
    }
    let wp = WeickertParams::with_k(prob.k)?;
    let tensor = build_weickert_tensor(&prob.guide, &prob.st, &wp);
    let rof = RofProblem::new(prob.f.clone(), tensor, prob.mu)?;
    chambolle_project(&rof, &prob.solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{a2tv_energy, gaussian_convolve, TensorField};

    fn all_known(w: usize, h: usize) -> Mask {
        Mask::new(w, h, vec![true; w * h]).unwrap()
    }

    #[test]
    fn inpaint_without_holes_reproduces_input() {
        let f = ScalarGrid::from_fn(48, 48, |r, c| if c < 24 { 0.2 } else { 0.8 } + r as f64 * 0.0);
        let guide = f.clone();
        let mut prob = InpaintProblem::new(f.clone(), all_known(48, 48), guide).unwrap();
        prob.outer_iters = 800;
        let u = inpaint(&prob).unwrap();
        let (lo, hi) = f.min_max();
        let range = hi - lo;
        let bound = range / (prob.mu * prob.theta) + 1e-3;
        let mut max_dev = 0.0f64;
        for i in 0..u.values().len() {
            max_dev = max_dev.max((u.values()[i] - f.values()[i]).abs());
        }
        assert!(max_dev <= bound, "max deviation {max_dev} > {bound}");
    }

    #[test]
    fn inpaint_rejects_empty_known_set() {
        let f = ScalarGrid::zeros(16, 16);
        let mask = Mask::new(16, 16, vec![false; 256]).unwrap();
        let prob = InpaintProblem::new(f.clone(), mask, f).unwrap();
        assert!(matches!(inpaint(&prob), Err(AnisoError::EmptyMask)));
    }

    #[test]
    fn inpaint_keeps_known_pixels_close() {
        // hole in the middle of a smooth ramp
        let f = ScalarGrid::from_fn(48, 48, |_, c| c as f64 / 47.0);
        let mut mask = vec![true; 48 * 48];
        for r in 18..30 {
            for c in 18..30 {
                mask[r * 48 + c] = false;
            }
        }
        let known = Mask::new(48, 48, mask).unwrap();
        let mut prob = InpaintProblem::new(f.clone(), known.clone(), f.clone()).unwrap();
        prob.outer_iters = 1500;
        let u = inpaint(&prob).unwrap();

        let (lo, hi) = f.min_max();
        let range = hi - lo;
        let mut sum_dev = 0.0;
        let mut count = 0usize;
        for r in 0..48 {
            for c in 0..48 {
                if known.get(r, c) {
                    sum_dev += (u.get(r, c) - f.get(r, c)).abs();
                    count += 1;
                }
            }
        }
        let mean_dev = sum_dev / count as f64;
        assert!(
            mean_dev <= 3.0 / (prob.mu * prob.theta) * range,
            "mean known-pixel deviation {mean_dev}"
        );
        // output bounded by the known-data range with 5% slack
        let (ulo, uhi) = u.min_max();
        assert!(ulo >= lo - 0.05 * range && uhi <= hi + 0.05 * range);
    }

    #[test]
    fn fusion_with_constant_guide_equals_plain_rof() {
        let f = ScalarGrid::from_fn(48, 48, |r, c| {
            ((r as f64 - 24.0).powi(2) + (c as f64 - 24.0).powi(2)).sqrt() / 24.0
        });
        let guide = ScalarGrid::constant(48, 48, 0.5);
        let mut prob = FusionProblem::new(f.clone(), guide).unwrap();
        prob.solver = prob.solver.with_max_iters(600);
        let fused = fuse(&prob).unwrap();

        let rof = RofProblem::new(f, TensorField::identity(48, 48), prob.mu).unwrap();
        let plain = chambolle_project(&rof, &prob.solver).unwrap();
        // constant guide gives the identity tensor, so the runs coincide
        assert_eq!(fused.u.values(), plain.u.values());
    }

    #[test]
    fn fusion_high_mu_stays_near_input() {
        let f = ScalarGrid::from_fn(48, 48, |r, c| ((r + c) % 7) as f64 / 7.0 + 0.1);
        let guide = gaussian_convolve(&f, 1.0);
        let mut prob = FusionProblem::new(f.clone(), guide).unwrap();
        prob.mu = 1000.0;
        prob.solver = prob.solver.with_max_iters(1500);
        let fused = fuse(&prob).unwrap();
        let mut d2 = 0.0;
        for i in 0..f.values().len() {
            let d = fused.u.values()[i] - f.values()[i];
            d2 += d * d;
        }
        let rel = d2.sqrt() / f.norm_l2();
        assert!(rel <= 0.01, "relative deviation {rel}");
    }

    #[test]
    fn fusion_energy_not_above_input_energy() {
        let f = ScalarGrid::from_fn(48, 48, |r, c| {
            if (r as i64 - 24).pow(2) + (c as i64 - 24).pow(2) <= 144 {
                1.0
            } else {
                0.0
            }
        });
        let f = gaussian_convolve(&f, 2.0);
        let guide = f.clone();
        let prob = FusionProblem::new(f.clone(), guide).unwrap();
        let fused = fuse(&prob).unwrap();

        let wp = WeickertParams::with_k(prob.k).unwrap();
        let tensor = build_weickert_tensor(&prob.guide, &prob.st, &wp);
        let energy = |u: &ScalarGrid| -> f64 {
            let j = a2tv_energy(u, &tensor).unwrap();
            let quad: f64 = u
                .values()
                .iter()
                .zip(f.values())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            j + 0.5 * prob.mu * quad
        };
        assert!(energy(&fused.u) <= energy(&f) + 1e-9);
    }
}
