//! Anisotropy tensor construction.
//!
//! Two routes produce the per-pixel symmetric matrix `A(x)` with
//! eigenvalues in (0, 1]: the Weickert structure-tensor route for
//! arbitrary images, and a single-parameter set route that attenuates
//! only the normal direction on the boundary band of a binary shape.
//! The tensor is computed once from its source and stays frozen during
//! flows and minimization.

use crate::error::{AnisoError, Result};
use crate::grid::{gaussian_convolve, gradient, ScalarGrid, TensorField};
use crate::shapes::RasterShape;

/// Smoothing scales of the structure tensor: `sigma` pre-smooths the
/// image before differentiation, `rho` smooths the tensor entries.
#[derive(Debug, Clone, Copy)]
pub struct StructureTensorParams {
    pub sigma: f64,
    pub rho: f64,
}

impl StructureTensorParams {
    pub fn new(sigma: f64, rho: f64) -> Result<Self> {
        if sigma < 0.0 || rho < 0.0 || !sigma.is_finite() || !rho.is_finite() {
            return Err(AnisoError::InvalidParameter(
                "structure tensor scales must be >= 0".into(),
            ));
        }
        Ok(Self { sigma, rho })
    }
}

impl Default for StructureTensorParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            rho: 4.0,
        }
    }
}

/// Weickert diffusivity parameters. The exponent and constant default
/// to m = 4 and c_m = 3.3.
#[derive(Debug, Clone, Copy)]
pub struct WeickertParams {
    pub k: f64,
    pub m: f64,
    pub c_m: f64,
}

impl WeickertParams {
    pub fn new(k: f64, m: f64, c_m: f64) -> Result<Self> {
        if !(k > 0.0) || !(m >= 1.0) || !(c_m > 0.0) {
            return Err(AnisoError::InvalidParameter(
                "require k > 0, m >= 1, c_m > 0".into(),
            ));
        }
        Ok(Self { k, m, c_m })
    }

    pub fn with_k(k: f64) -> Result<Self> {
        Self::new(k, 4.0, 3.3)
    }
}

impl Default for WeickertParams {
    fn default() -> Self {
        Self {
            k: 1.0,
            m: 4.0,
            c_m: 3.3,
        }
    }
}

/// Eigendecomposition of a symmetric 2x2 matrix: `mu1 >= mu2` with
/// orthonormal eigenvectors.
#[derive(Debug, Clone, Copy)]
pub struct EigenPair2 {
    pub mu1: f64,
    pub mu2: f64,
    pub v1: (f64, f64),
    pub v2: (f64, f64),
}

/// Closed-form symmetric 2x2 eigendecomposition. Ties within 1e-14
/// break deterministically to the coordinate axes; eigenvector signs are
/// fixed so the first nonzero component is positive.
pub fn eig2x2(a11: f64, a12: f64, a22: f64) -> EigenPair2 {
    let mean = 0.5 * (a11 + a22);
    let half_diff = 0.5 * (a11 - a22);
    let disc = (half_diff * half_diff + a12 * a12).sqrt();
    let mu1 = mean + disc;
    let mu2 = mean - disc;

    if mu1 - mu2 <= 1e-14 {
        return EigenPair2 {
            mu1,
            mu2,
            v1: (1.0, 0.0),
            v2: (0.0, 1.0),
        };
    }

    // pick the better-conditioned of the two eigenvector candidates
    let c1 = (a12, mu1 - a11);
    let c2 = (mu1 - a22, a12);
    let n1 = c1.0 * c1.0 + c1.1 * c1.1;
    let n2 = c2.0 * c2.0 + c2.1 * c2.1;
    let (vx, vy, nn) = if n1 >= n2 {
        (c1.0, c1.1, n1.sqrt())
    } else {
        (c2.0, c2.1, n2.sqrt())
    };
    let mut v1 = (vx / nn, vy / nn);
    if v1.0 < 0.0 || (v1.0 == 0.0 && v1.1 < 0.0) {
        v1 = (-v1.0, -v1.1);
    }
    let v2 = (-v1.1, v1.0);
    EigenPair2 { mu1, mu2, v1, v2 }
}

/// Smoothed structure tensor: the outer product of the sigma-smoothed
/// gradient with each of the three distinct entries rho-smoothed.
pub fn structure_tensor(u: &ScalarGrid, params: &StructureTensorParams) -> TensorField {
    let smoothed = gaussian_convolve(u, params.sigma);
    let g = gradient(&smoothed);
    let (w, h) = (u.width(), u.height());
    let mut j11 = ScalarGrid::zeros(w, h);
    let mut j12 = ScalarGrid::zeros(w, h);
    let mut j22 = ScalarGrid::zeros(w, h);
    for i in 0..w * h {
        j11.values_mut()[i] = g.x[i] * g.x[i];
        j12.values_mut()[i] = g.x[i] * g.y[i];
        j22.values_mut()[i] = g.y[i] * g.y[i];
    }
    let j11 = gaussian_convolve(&j11, params.rho);
    let j12 = gaussian_convolve(&j12, params.rho);
    let j22 = gaussian_convolve(&j22, params.rho);
    // smoothing an outer-product field keeps it PSD up to rounding;
    // clamp the determinant slack rather than erroring
    TensorField::from_planes(
        w,
        h,
        j11.into_values(),
        j12.into_values(),
        j22.into_values(),
    )
    .expect("structure tensor is PSD by construction")
}

/// Weickert's edge-stopping function: 1 for s <= 0, otherwise
/// `1 - exp(-c_m / (s/K)^m)`. Values lie in (0, 1] and decrease in s.
pub fn diffusivity(s: f64, params: &WeickertParams) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    let ratio = s / params.k;
    1.0 - (-params.c_m / ratio.powf(params.m)).exp()
}

/// Weickert tensor: per pixel the structure tensor is eigendecomposed,
/// the dominant eigenvalue is replaced by the diffusivity of its ratio
/// to the spatial mean `mu1_mean`, the minor one by 1, and the matrix is
/// reassembled as `V diag(c, 1) V^T`.
pub fn build_weickert_tensor(
    u: &ScalarGrid,
    st: &StructureTensorParams,
    wp: &WeickertParams,
) -> TensorField {
    let j = structure_tensor(u, st);
    let (w, h) = (u.width(), u.height());
    let n = w * h;

    let mut eigs = Vec::with_capacity(n);
    let mut mu1_sum = 0.0;
    for i in 0..n {
        let e = eig2x2(j.a11[i], j.a12[i], j.a22[i]);
        mu1_sum += e.mu1;
        eigs.push(e);
    }
    let mu1_mean = mu1_sum / n as f64;

    let mut a11 = vec![0.0; n];
    let mut a12 = vec![0.0; n];
    let mut a22 = vec![0.0; n];
    for i in 0..n {
        let e = &eigs[i];
        // constant images give mu1_mean = 0; the s <= 0 branch of the
        // diffusivity then yields the identity tensor
        let s = if mu1_mean > 0.0 { e.mu1 / mu1_mean } else { 0.0 };
        let c = diffusivity(s, wp);
        reconstruct(&mut a11[i], &mut a12[i], &mut a22[i], e, c, 1.0);
    }
    TensorField::from_planes(w, h, a11, a12, a22).expect("weickert tensor is PSD by construction")
}

/// Single-parameter set tensor: identity away from the boundary band of
/// the shape; on the band the eigenvalue along the outward normal is `a`
/// and 1 along the tangent.
pub fn build_set_tensor(shape: &RasterShape, a: f64) -> Result<TensorField> {
    set_tensor_from_indicator(shape.indicator(), a)
}

/// Set tensor from a raw indicator grid. The boundary band is where the
/// gradient magnitude of the sigma_b = 1.5 smoothed indicator exceeds a
/// fixed fraction of its maximum, and the normal direction is that
/// gradient; both are frozen at construction.
pub fn set_tensor_from_indicator(indicator: &ScalarGrid, a: f64) -> Result<TensorField> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(AnisoError::InvalidParameter(format!(
            "anisotropy parameter must lie in (0, 1], got {a}"
        )));
    }
    let (w, h) = (indicator.width(), indicator.height());
    let smoothed = gaussian_convolve(indicator, 1.5);
    let g = gradient(&smoothed);

    let mut mag = vec![0.0; w * h];
    let mut max_mag = 0.0f64;
    for i in 0..w * h {
        mag[i] = (g.x[i] * g.x[i] + g.y[i] * g.y[i]).sqrt();
        max_mag = max_mag.max(mag[i]);
    }
    let threshold = 0.05 * max_mag;

    let mut a11 = vec![1.0; w * h];
    let mut a12 = vec![0.0; w * h];
    let mut a22 = vec![1.0; w * h];
    if max_mag > 0.0 && a < 1.0 {
        for i in 0..w * h {
            if mag[i] > threshold {
                let nx = g.x[i] / mag[i];
                let ny = g.y[i] / mag[i];
                // A = a n n^T + t t^T with t the orthogonal tangent
                a11[i] = a * nx * nx + ny * ny;
                a22[i] = a * ny * ny + nx * nx;
                a12[i] = (a - 1.0) * nx * ny;
            }
        }
    }
    TensorField::from_planes(w, h, a11, a12, a22)
}

fn reconstruct(a11: &mut f64, a12: &mut f64, a22: &mut f64, e: &EigenPair2, l1: f64, l2: f64) {
    // V diag(l1, l2) V^T with orthonormal V keeps the result symmetric
    *a11 = l1 * e.v1.0 * e.v1.0 + l2 * e.v2.0 * e.v2.0;
    *a12 = l1 * e.v1.0 * e.v1.1 + l2 * e.v2.0 * e.v2.1;
    *a22 = l1 * e.v1.1 * e.v1.1 + l2 * e.v2.1 * e.v2.1;
}
