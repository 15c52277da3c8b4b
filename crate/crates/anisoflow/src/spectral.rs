//! Nonlinear spectral transform over a gradient-flow trajectory.
//!
//! Bands are `phi_k = t_k (u_{k+1} - 2 u_k + u_{k-1}) / dt^2` at the
//! interior times, stored as densities so that `sum phi_k dt`
//! approximates the band integral. The residual `u(T) - T u_t(T)`
//! carries the boundary term of the truncated inverse transform, which
//! makes reconstruction a telescoping identity: it is exact in exact
//! arithmetic for any trajectory, converged or not.

use crate::error::{AnisoError, Result};
use crate::grid::ScalarGrid;
use crate::solver::FlowTrajectory;

/// Spectral bands with their times, the boundary residual and the mean
/// of the source image.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub times: Vec<f64>,
    pub bands: Vec<ScalarGrid>,
    pub residual: ScalarGrid,
    pub source_mean: f64,
    pub dt: f64,
}

/// Scale filters over the band times. The low-pass keeps the large
/// scales `t >= t_c` and carries the residual; the high-pass keeps
/// `t <= t_c` without it; the band-pass keeps `[t1, t2]` without it.
#[derive(Debug, Clone, Copy)]
pub enum SpectralFilter {
    Lpf { t_c: f64 },
    Hpf { t_c: f64 },
    Bpf { t1: f64, t2: f64 },
}

impl SpectralFilter {
    pub fn bpf(t1: f64, t2: f64) -> Result<Self> {
        if !(t1 <= t2) {
            return Err(AnisoError::InvalidParameter(
                "band-pass requires t1 <= t2".into(),
            ));
        }
        Ok(SpectralFilter::Bpf { t1, t2 })
    }

    fn weight(&self, t: f64) -> f64 {
        let pass = match *self {
            SpectralFilter::Lpf { t_c } => t >= t_c,
            SpectralFilter::Hpf { t_c } => t <= t_c,
            SpectralFilter::Bpf { t1, t2 } => t >= t1 && t <= t2,
        };
        if pass {
            1.0
        } else {
            0.0
        }
    }

    fn passes_residual(&self) -> bool {
        matches!(self, SpectralFilter::Lpf { .. })
    }
}

/// Amplitude per scale: `S(t_k) = sum_x |phi_k(x)|`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Spectrum {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Second-difference transform of a uniformly sampled trajectory.
pub fn decompose(traj: &FlowTrajectory) -> Result<SpectralDecomposition> {
    let n = traj.snapshots.len();
    if n < 3 {
        return Err(AnisoError::TrajectoryTooShort(format!(
            "need at least 3 snapshots, got {n}"
        )));
    }
    let dt = traj.times[1] - traj.times[0];
    for k in 0..n - 1 {
        if ((traj.times[k + 1] - traj.times[k]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(AnisoError::NonUniformDt);
        }
    }

    let (w, h) = (traj.snapshots[0].width(), traj.snapshots[0].height());
    let mut times = Vec::with_capacity(n - 2);
    let mut bands = Vec::with_capacity(n - 2);
    for k in 1..n - 1 {
        let t_k = traj.times[k];
        let mut band = ScalarGrid::zeros(w, h);
        let prev = traj.snapshots[k - 1].values();
        let cur = traj.snapshots[k].values();
        let next = traj.snapshots[k + 1].values();
        for i in 0..w * h {
            band.values_mut()[i] = t_k * (next[i] - 2.0 * cur[i] + prev[i]) / (dt * dt);
        }
        times.push(t_k);
        bands.push(band);
    }

    // residual u(T) - T u_t(T) with a backward difference at the end
    let t_end = traj.times[n - 1];
    let last = traj.snapshots[n - 1].values();
    let before = traj.snapshots[n - 2].values();
    let mut residual = ScalarGrid::zeros(w, h);
    for i in 0..w * h {
        let ut = (last[i] - before[i]) / dt;
        residual.values_mut()[i] = last[i] - t_end * ut;
    }

    Ok(SpectralDecomposition {
        times,
        bands,
        residual,
        source_mean: traj.snapshots[0].mean(),
        dt,
    })
}

/// Per-band sum of absolute values.
pub fn spectrum(dec: &SpectralDecomposition) -> Spectrum {
    let values = dec
        .bands
        .iter()
        .map(|b| b.values().iter().map(|v| v.abs()).sum())
        .collect();
    Spectrum {
        times: dec.times.clone(),
        values,
    }
}

/// Filtered reconstruction `sum_k H(t_k) phi_k dt`, plus the residual
/// when the filter passes the large-scale end.
pub fn apply_filter(dec: &SpectralDecomposition, filter: &SpectralFilter) -> ScalarGrid {
    filtered_sum(dec, filter, filter.passes_residual())
}

/// Same as [`apply_filter`] with an explicit residual override.
pub fn apply_filter_with_residual(
    dec: &SpectralDecomposition,
    filter: &SpectralFilter,
    include_residual: bool,
) -> ScalarGrid {
    filtered_sum(dec, filter, include_residual)
}

fn filtered_sum(
    dec: &SpectralDecomposition,
    filter: &SpectralFilter,
    include_residual: bool,
) -> ScalarGrid {
    let (w, h) = (dec.residual.width(), dec.residual.height());
    let mut out = ScalarGrid::zeros(w, h);
    for (band, &t) in dec.bands.iter().zip(&dec.times) {
        let wgt = filter.weight(t) * dec.dt;
        if wgt == 0.0 {
            continue;
        }
        for i in 0..w * h {
            out.values_mut()[i] += wgt * band.values()[i];
        }
    }
    if include_residual {
        for i in 0..w * h {
            out.values_mut()[i] += dec.residual.values()[i];
        }
    }
    out
}

/// Full inverse transform: all bands plus the residual. Reproduces the
/// trajectory's initial snapshot up to rounding.
pub fn reconstruct(dec: &SpectralDecomposition) -> ScalarGrid {
    apply_filter(dec, &SpectralFilter::Lpf { t_c: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TensorField;
    use crate::solver::{a2tv_flow, FlowParams, FlowTrajectory, SolverParams};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn relative_error(a: &ScalarGrid, b: &ScalarGrid) -> f64 {
        let mut d2 = 0.0;
        let mut n2 = 0.0;
        for i in 0..a.values().len() {
            let d = a.values()[i] - b.values()[i];
            d2 += d * d;
            n2 += b.values()[i] * b.values()[i];
        }
        (d2 / n2.max(1e-30)).sqrt()
    }

    fn synthetic_trajectory(
        f: &ScalarGrid,
        dt: f64,
        steps: usize,
        shape_fn: impl Fn(f64) -> f64,
    ) -> FlowTrajectory {
        let mut times = Vec::new();
        let mut snapshots = Vec::new();
        for k in 0..=steps {
            let t = k as f64 * dt;
            times.push(t);
            let s = shape_fn(t);
            snapshots.push(ScalarGrid::from_fn(f.width(), f.height(), |r, c| {
                s * f.get(r, c)
            }));
        }
        FlowTrajectory {
            times,
            snapshots,
            subgradients: Vec::new(),
            duals: Vec::new(),
            step_diagnostics: Vec::new(),
        }
    }

    #[test]
    fn constant_flow_gives_zero_bands() {
        let f = ScalarGrid::constant(16, 16, 2.0);
        let a = TensorField::identity(16, 16);
        let traj = a2tv_flow(&f, &a, &FlowParams::new(1.0, 4, SolverParams::default()).unwrap())
            .unwrap();
        let dec = decompose(&traj).unwrap();
        for band in &dec.bands {
            assert!(band.values().iter().all(|&v| v == 0.0));
        }
        assert_eq!(dec.residual.values(), f.values());
    }

    #[test]
    fn reconstruction_is_exact_for_random_flows() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let f = ScalarGrid::from_fn(32, 32, |_, _| rng.random_range(0.0..1.0));
        let a = TensorField::identity(32, 32);
        let inner = SolverParams::new(0.125, 150, 1e-6).unwrap();
        let traj = a2tv_flow(&f, &a, &FlowParams::new(0.05, 40, inner).unwrap()).unwrap();
        let dec = decompose(&traj).unwrap();
        let rec = reconstruct(&dec);
        assert!(relative_error(&rec, &f) <= 1e-6);
    }

    #[test]
    fn reconstruction_exact_under_truncation() {
        // truncating the flow early must not break completeness: the
        // residual carries the remainder
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let f = ScalarGrid::from_fn(24, 24, |_, _| rng.random_range(-1.0..1.0));
        for steps in [3, 7, 19] {
            let traj = synthetic_trajectory(&f, 0.35, steps, |t| (1.0 - 0.02 * t).max(0.0));
            let dec = decompose(&traj).unwrap();
            let rec = reconstruct(&dec);
            assert!(relative_error(&rec, &f) <= 1e-10, "steps = {steps}");
        }
    }

    #[test]
    fn filters_cover_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let f = ScalarGrid::from_fn(16, 16, |_, _| rng.random_range(0.0..1.0));
        let traj = synthetic_trajectory(&f, 0.5, 10, |t| (1.0 - 0.1 * t).max(0.0));
        let dec = decompose(&traj).unwrap();

        let full = apply_filter(&dec, &SpectralFilter::Lpf { t_c: 0.0 });
        assert!(relative_error(&full, &f) <= 1e-10);

        let none = apply_filter(&dec, &SpectralFilter::Hpf { t_c: 0.0 });
        assert!(none.values().iter().all(|&v| v == 0.0));

        // band-pass over everything plus residual also reconstructs
        let bpf = SpectralFilter::bpf(0.0, 1e9).unwrap();
        let rec = apply_filter_with_residual(&dec, &bpf, true);
        assert!(relative_error(&rec, &f) <= 1e-10);
    }

    #[test]
    fn filter_linearity_on_disjoint_supports() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let f = ScalarGrid::from_fn(16, 16, |_, _| rng.random_range(0.0..1.0));
        let traj = synthetic_trajectory(&f, 0.5, 12, |t| 1.0 / (1.0 + t));
        let dec = decompose(&traj).unwrap();

        // band times are multiples of 0.5; each lands in exactly one filter
        let h1 = SpectralFilter::bpf(0.0, 2.6).unwrap();
        let h2 = SpectralFilter::bpf(2.9, 6.0).unwrap();
        let combined = SpectralFilter::bpf(0.0, 6.0).unwrap();
        let f1 = apply_filter(&dec, &h1);
        let f2 = apply_filter(&dec, &h2);
        let fc = apply_filter(&dec, &combined);
        for i in 0..f1.values().len() {
            let sum = f1.values()[i] + f2.values()[i];
            assert!((sum - fc.values()[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn spectrum_nonnegative_and_localized_for_exact_decay() {
        let f = ScalarGrid::from_fn(32, 32, |r, c| {
            let x = c as f64 - 15.5;
            let y = r as f64 - 15.5;
            if x * x + y * y <= 64.0 {
                1.0
            } else {
                0.0
            }
        });
        let lambda = 0.1;
        let dt = 0.5;
        let traj = synthetic_trajectory(&f, dt, 30, |t| (1.0 - lambda * t).max(0.0));
        let dec = decompose(&traj).unwrap();
        let s = spectrum(&dec);
        assert!(s.values.iter().all(|&v| v >= 0.0));
        // the kink at t = 1/lambda concentrates the mass there
        let total: f64 = s.values.iter().sum();
        let near: f64 = s
            .times
            .iter()
            .zip(&s.values)
            .filter(|(&t, _)| (t - 10.0).abs() <= 1.0)
            .map(|(_, &v)| v)
            .sum();
        assert!(near / total >= 0.8, "mass near 1/lambda: {}", near / total);
    }

    #[test]
    fn rejects_short_and_nonuniform_trajectories() {
        let f = ScalarGrid::constant(8, 8, 1.0);
        let short = synthetic_trajectory(&f, 1.0, 1, |_| 1.0);
        assert!(matches!(
            decompose(&short),
            Err(AnisoError::TrajectoryTooShort(_))
        ));

        let mut bad = synthetic_trajectory(&f, 1.0, 4, |_| 1.0);
        bad.times[3] += 0.5;
        assert!(matches!(decompose(&bad), Err(AnisoError::NonUniformDt)));
    }
}
