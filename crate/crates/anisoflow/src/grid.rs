//! Discrete calculus on 2-D grids.
//!
//! Grids use unit pixel spacing and row-major storage indexed as
//! `(row, col)`. The gradient is a forward difference with replicate
//! (Neumann) boundary; the divergence is the backward-difference scheme
//! that makes it the exact negative adjoint of the gradient under the
//! plain grid inner product, so `<grad_a(u), v> == -<u, div_a(v)>` holds
//! to machine precision for every symmetric tensor field.

use crate::error::{AnisoError, Result};

/// 2-D grid of real samples, row-major, unit spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

/// Per-pixel 2-component real vectors (x and y planes).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    width: usize,
    height: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Per-pixel symmetric 2x2 matrices stored as (a11, a12, a22) planes.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    width: usize,
    height: usize,
    pub a11: Vec<f64>,
    pub a12: Vec<f64>,
    pub a22: Vec<f64>,
}

/// PSD slack tolerated when validating tensors; eigen-reconstruction
/// carries rounding noise of this order.
pub const EPS_PSD: f64 = 1e-12;

impl ScalarGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(AnisoError::InvalidParameter(format!(
                "grid must be at least 2x2, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(AnisoError::InvalidParameter(format!(
                "value count {} does not match {width}x{height}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AnisoError::InvalidParameter(
                "grid contains non-finite values".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, c: f64) -> Self {
        Self {
            width,
            height,
            values: vec![c; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.width + col] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_dims(&self, other: &ScalarGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Bilinear sample at fractional pixel coordinates (x along columns,
    /// y along rows), clamped to the grid.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let c0 = xc.floor() as usize;
        let r0 = yc.floor() as usize;
        let c1 = (c0 + 1).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let fx = xc - c0 as f64;
        let fy = yc - r0 as f64;
        let v00 = self.get(r0, c0);
        let v01 = self.get(r0, c1);
        let v10 = self.get(r1, c0);
        let v11 = self.get(r1, c1);
        v00 * (1.0 - fx) * (1.0 - fy)
            + v01 * fx * (1.0 - fy)
            + v10 * (1.0 - fx) * fy
            + v11 * fx * fy
    }
}

impl VectorField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            x: vec![0.0; width * height],
            y: vec![0.0; width * height],
        }
    }

    pub fn from_components(width: usize, height: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != width * height || y.len() != width * height {
            return Err(AnisoError::InvalidParameter(
                "component length does not match dimensions".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            x,
            y,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn max_magnitude(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(&a, &b)| (a * a + b * b).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn same_dims_grid(&self, g: &ScalarGrid) -> bool {
        self.width == g.width() && self.height == g.height()
    }
}

impl TensorField {
    /// Identity tensor at every pixel.
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            a11: vec![1.0; width * height],
            a12: vec![0.0; width * height],
            a22: vec![1.0; width * height],
        }
    }

    pub fn from_planes(
        width: usize,
        height: usize,
        a11: Vec<f64>,
        a12: Vec<f64>,
        a22: Vec<f64>,
    ) -> Result<Self> {
        let n = width * height;
        if a11.len() != n || a12.len() != n || a22.len() != n {
            return Err(AnisoError::InvalidParameter(
                "plane length does not match dimensions".into(),
            ));
        }
        let field = Self {
            width,
            height,
            a11,
            a12,
            a22,
        };
        field.validate_psd()?;
        Ok(field)
    }

    /// Uniform scaling of the identity, `c * I`.
    pub fn scaled_identity(width: usize, height: usize, c: f64) -> Self {
        Self {
            width,
            height,
            a11: vec![c; width * height],
            a12: vec![0.0; width * height],
            a22: vec![c; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    fn validate_psd(&self) -> Result<()> {
        for i in 0..self.a11.len() {
            let (a, b, c) = (self.a11[i], self.a12[i], self.a22[i]);
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                return Err(AnisoError::InvalidParameter(
                    "tensor contains non-finite entries".into(),
                ));
            }
            if a < -EPS_PSD || c < -EPS_PSD || a * c - b * b < -EPS_PSD {
                return Err(AnisoError::InvalidParameter(format!(
                    "tensor not positive semidefinite at index {i}: ({a}, {b}, {c})"
                )));
            }
        }
        Ok(())
    }

    /// Per-pixel matrix-vector product `A(x) v(x)`.
    pub fn apply(&self, v: &VectorField) -> Result<VectorField> {
        if v.width() != self.width || v.height() != self.height {
            return Err(AnisoError::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: v.width(),
                got_h: v.height(),
            });
        }
        let mut out = VectorField::zeros(self.width, self.height);
        for i in 0..self.a11.len() {
            out.x[i] = self.a11[i] * v.x[i] + self.a12[i] * v.y[i];
            out.y[i] = self.a12[i] * v.x[i] + self.a22[i] * v.y[i];
        }
        Ok(out)
    }

    pub fn same_dims_grid(&self, g: &ScalarGrid) -> bool {
        self.width == g.width() && self.height == g.height()
    }
}

fn check_dims_grid(u: &ScalarGrid, a: &TensorField) -> Result<()> {
    if !a.same_dims_grid(u) {
        return Err(AnisoError::DimensionMismatch {
            expected_w: u.width(),
            expected_h: u.height(),
            got_w: a.width(),
            got_h: a.height(),
        });
    }
    Ok(())
}

fn check_dims_field(v: &VectorField, a: &TensorField) -> Result<()> {
    if v.width() != a.width() || v.height() != a.height() {
        return Err(AnisoError::DimensionMismatch {
            expected_w: a.width(),
            expected_h: a.height(),
            got_w: v.width(),
            got_h: v.height(),
        });
    }
    Ok(())
}

/// Forward-difference gradient with replicate boundary (zero in the last
/// column/row of each component).
pub fn gradient(u: &ScalarGrid) -> VectorField {
    let (w, h) = (u.width(), u.height());
    let mut g = VectorField::zeros(w, h);
    let v = u.values();
    for r in 0..h {
        let row = r * w;
        for c in 0..w - 1 {
            g.x[row + c] = v[row + c + 1] - v[row + c];
        }
        if r < h - 1 {
            for c in 0..w {
                g.y[row + c] = v[row + w + c] - v[row + c];
            }
        }
    }
    g
}

/// Backward-difference divergence, the exact negative adjoint of
/// [`gradient`]. The last column of the x component and last row of the
/// y component never enter (they pair with gradient entries fixed to 0).
pub fn divergence(p: &VectorField) -> ScalarGrid {
    let (w, h) = (p.width(), p.height());
    let mut d = ScalarGrid::zeros(w, h);
    let out = d.values_mut();
    for r in 0..h {
        let row = r * w;
        for c in 0..w {
            let i = row + c;
            let mut acc = 0.0;
            if c < w - 1 {
                acc += p.x[i];
            }
            if c > 0 {
                acc -= p.x[i - 1];
            }
            if r < h - 1 {
                acc += p.y[i];
            }
            if r > 0 {
                acc -= p.y[i - w];
            }
            out[i] = acc;
        }
    }
    d
}

/// Adapted gradient `A(x) * gradient(u)(x)`.
pub fn grad_a(u: &ScalarGrid, a: &TensorField) -> Result<VectorField> {
    check_dims_grid(u, a)?;
    a.apply(&gradient(u))
}

/// Adapted divergence `divergence(A v)`; satisfies
/// `<grad_a(u), v> = -<u, div_a(v)>` for all u, v.
pub fn div_a(v: &VectorField, a: &TensorField) -> Result<ScalarGrid> {
    check_dims_field(v, a)?;
    Ok(divergence(&a.apply(v)?))
}

/// Total variation energy adapted by the tensor field: the sum over
/// pixels of the Euclidean magnitude of `grad_a(u, A)`. With `A = I`
/// this is the discrete isotropic TV energy.
pub fn a2tv_energy(u: &ScalarGrid, a: &TensorField) -> Result<f64> {
    check_dims_grid(u, a)?;
    let g = grad_a(u, a)?;
    let mut e = 0.0;
    for i in 0..g.x.len() {
        e += (g.x[i] * g.x[i] + g.y[i] * g.y[i]).sqrt();
    }
    Ok(e)
}

/// In-place forward-difference gradient; `out` must match dimensions.
pub(crate) fn gradient_into(u: &ScalarGrid, out: &mut VectorField) {
    let (w, h) = (u.width(), u.height());
    let v = u.values();
    for r in 0..h {
        let row = r * w;
        for c in 0..w - 1 {
            out.x[row + c] = v[row + c + 1] - v[row + c];
        }
        out.x[row + w - 1] = 0.0;
        if r < h - 1 {
            for c in 0..w {
                out.y[row + c] = v[row + w + c] - v[row + c];
            }
        } else {
            for c in 0..w {
                out.y[row + c] = 0.0;
            }
        }
    }
}

/// In-place backward-difference divergence.
pub(crate) fn divergence_into(p: &VectorField, out: &mut ScalarGrid) {
    let (w, h) = (p.width(), p.height());
    let ov = out.values_mut();
    for r in 0..h {
        let row = r * w;
        for c in 0..w {
            let i = row + c;
            let mut acc = 0.0;
            if c < w - 1 {
                acc += p.x[i];
            }
            if c > 0 {
                acc -= p.x[i - 1];
            }
            if r < h - 1 {
                acc += p.y[i];
            }
            if r > 0 {
                acc -= p.y[i - w];
            }
            ov[i] = acc;
        }
    }
}

/// In-place per-pixel matrix-vector product.
pub(crate) fn apply_tensor_into(a: &TensorField, v: &VectorField, out: &mut VectorField) {
    for i in 0..a.a11.len() {
        out.x[i] = a.a11[i] * v.x[i] + a.a12[i] * v.y[i];
        out.y[i] = a.a12[i] * v.x[i] + a.a22[i] * v.y[i];
    }
}

/// Plain grid inner product `sum_i u_i v_i`.
pub fn inner_grid(u: &ScalarGrid, v: &ScalarGrid) -> f64 {
    u.values()
        .iter()
        .zip(v.values())
        .map(|(&a, &b)| a * b)
        .sum()
}

/// Field inner product `sum_i (ux_i vx_i + uy_i vy_i)`.
pub fn inner_field(u: &VectorField, v: &VectorField) -> f64 {
    let mut s = 0.0;
    for i in 0..u.x.len() {
        s += u.x[i] * v.x[i] + u.y[i] * v.y[i];
    }
    s
}

/// Separable Gaussian blur. The kernel is truncated at `ceil(4 sigma)`
/// taps per side, renormalized to unit sum, with mirror (half-sample
/// symmetric) boundary; that extension is the one that keeps the grid
/// mean invariant for symmetric kernels. `sigma = 0` is the identity.
pub fn gaussian_convolve(u: &ScalarGrid, sigma: f64) -> ScalarGrid {
    assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be >= 0");
    if sigma == 0.0 {
        return u.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let (w, h) = (u.width(), u.height());

    // horizontal pass
    let mut tmp = vec![0.0; w * h];
    let v = u.values();
    for r in 0..h {
        let row = r * w;
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let cc = mirror_index(c as isize + k as isize - radius as isize, w);
                acc += kv * v[row + cc];
            }
            tmp[row + c] = acc;
        }
    }
    // vertical pass
    let mut out = ScalarGrid::zeros(w, h);
    let ov = out.values_mut();
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let rr = mirror_index(r as isize + k as isize - radius as isize, h);
                acc += kv * tmp[rr * w + c];
            }
            ov[r * w + c] = acc;
        }
    }
    out
}

/// Half-sample symmetric index fold: ..., 1, 0 | 0, 1, ..., n-1 | n-1, ...
#[inline]
fn mirror_index(idx: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = idx.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// 1-D Gaussian taps at integer offsets in `[-ceil(4 sigma), ceil(4 sigma)]`,
/// normalized to unit sum.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    let s2 = 2.0 * sigma * sigma;
    for k in -(radius as isize)..=(radius as isize) {
        kernel.push((-((k * k) as f64) / s2).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for v in &mut kernel {
        *v /= sum;
    }
    kernel
}
