//! Synthetic shape rasterization and measured geometry.
//!
//! Shapes are defined analytically, rasterized to a binary mask by a
//! pixel-center membership test, and measured: area in pixels, sub-pixel
//! perimeter, convex-hull perimeter and curvature data. Contours are the
//! 0.5 level set of the lightly smoothed indicator, traced by marching
//! squares; tracing the raw binary staircase would overestimate smooth
//! contour lengths by several percent (up to 8% at intermediate slopes),
//! which would corrupt every `lambda = a P / |C|` comparison downstream.
//!
//! The grid indicator carries supersampled edge coverage for the same
//! reason: a hard 0/1 staircase makes the discrete gradient direction
//! oscillate around the true normal, inflating anisotropic energies.

use crate::error::{AnisoError, Result};
use crate::grid::{gaussian_convolve, ScalarGrid, VectorField};

/// Binary pixel mask.
#[derive(Debug, Clone)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(AnisoError::InvalidParameter(
                "mask length does not match dimensions".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
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
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn to_scalar(&self) -> ScalarGrid {
        let mut g = ScalarGrid::zeros(self.width, self.height);
        for (i, &b) in self.data.iter().enumerate() {
            g.values_mut()[i] = if b { 1.0 } else { 0.0 };
        }
        g
    }

    /// Morphological erosion by `iters` passes of a 3x3 structuring
    /// element; border pixels erode away.
    pub fn erode(&self, iters: usize) -> Mask {
        let mut cur = self.data.clone();
        let (w, h) = (self.width, self.height);
        for _ in 0..iters {
            let mut next = vec![false; w * h];
            for r in 1..h - 1 {
                for c in 1..w - 1 {
                    let mut all = true;
                    'probe: for dr in -1i64..=1 {
                        for dc in -1i64..=1 {
                            let i = (r as i64 + dr) as usize * w + (c as i64 + dc) as usize;
                            if !cur[i] {
                                all = false;
                                break 'probe;
                            }
                        }
                    }
                    next[r * w + c] = all;
                }
            }
            cur = next;
        }
        Mask {
            width: w,
            height: h,
            data: cur,
        }
    }

    /// Complement of the mask.
    pub fn invert(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| !b).collect(),
        }
    }
}

/// Analytic shape variants (dimensions in pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeVariant {
    Disk {
        r: f64,
    },
    Ellipse {
        ra: f64,
        rb: f64,
    },
    /// Annulus sector: outer/inner radii with a wedge of `opening`
    /// radians removed around the +x axis.
    CShape {
        outer: f64,
        inner: f64,
        opening: f64,
    },
    /// Two ellipse lobes joined by nothing, each with a thin rectangular
    /// protrusion; a complex non-convex, high-curvature test subject.
    NeuronPair {
        lobe_ra: f64,
        lobe_rb: f64,
        separation: f64,
        protrusion_len: f64,
        protrusion_w: f64,
    },
}

/// Placement and sampling of a shape on a grid.
#[derive(Debug, Clone)]
pub struct ShapeSpec {
    pub variant: ShapeVariant,
    /// Center in pixel coordinates (x along columns, y along rows).
    pub center: (f64, f64),
    pub width: usize,
    pub height: usize,
    /// Indicator height.
    pub h: f64,
    /// Subtract the grid mean so the indicator integrates to zero.
    pub zero_mean: bool,
    /// Rotation of the shape around its center, radians.
    pub rotation: f64,
}

impl ShapeSpec {
    pub fn centered(
        variant: ShapeVariant,
        width: usize,
        height: usize,
        h: f64,
        zero_mean: bool,
    ) -> Self {
        Self {
            variant,
            center: ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0),
            width,
            height,
            h,
            zero_mean,
            rotation: 0.0,
        }
    }

    pub fn with_rotation(mut self, rotation: f64) -> Self {
        self.rotation = rotation;
        self
    }

    fn circumradius(&self) -> f64 {
        match self.variant {
            ShapeVariant::Disk { r } => r,
            ShapeVariant::Ellipse { ra, .. } => ra,
            ShapeVariant::CShape { outer, .. } => outer,
            ShapeVariant::NeuronPair {
                lobe_ra,
                lobe_rb,
                separation,
                protrusion_len,
                ..
            } => separation / 2.0 + lobe_ra + lobe_rb.max(protrusion_len),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.variant {
            ShapeVariant::Disk { r } => r > 0.0,
            ShapeVariant::Ellipse { ra, rb } => ra >= rb && rb > 0.0,
            ShapeVariant::CShape {
                outer,
                inner,
                opening,
            } => outer > inner && inner > 0.0 && opening > 0.0 && opening < std::f64::consts::TAU,
            ShapeVariant::NeuronPair {
                lobe_ra,
                lobe_rb,
                separation,
                protrusion_len,
                protrusion_w,
            } => {
                lobe_ra >= lobe_rb
                    && lobe_rb > 0.0
                    && separation > 0.0
                    && protrusion_len >= 0.0
                    && protrusion_w >= 0.0
            }
        };
        if !ok {
            return Err(AnisoError::InvalidParameter(
                "invalid shape dimensions".into(),
            ));
        }
        let bound = self.circumradius();
        let (cx, cy) = self.center;
        let margin = 4.0;
        if cx - bound < margin
            || cy - bound < margin
            || cx + bound > self.width as f64 - 1.0 - margin
            || cy + bound > self.height as f64 - 1.0 - margin
        {
            return Err(AnisoError::ShapeOutOfBounds);
        }
        Ok(())
    }

    /// Membership test in shape-local coordinates (already rotated).
    fn contains_local(&self, x: f64, y: f64) -> bool {
        match self.variant {
            ShapeVariant::Disk { r } => x * x + y * y <= r * r,
            ShapeVariant::Ellipse { ra, rb } => {
                let u = x / ra;
                let v = y / rb;
                u * u + v * v <= 1.0
            }
            ShapeVariant::CShape {
                outer,
                inner,
                opening,
            } => {
                let r2 = x * x + y * y;
                if r2 < inner * inner || r2 > outer * outer {
                    return false;
                }
                y.atan2(x).abs() >= opening / 2.0
            }
            ShapeVariant::NeuronPair {
                lobe_ra,
                lobe_rb,
                separation,
                protrusion_len,
                protrusion_w,
            } => {
                let half = separation / 2.0;
                for (sx, dir) in [(-half, -1.0), (half, 1.0)] {
                    let lx = (x - sx) / lobe_ra;
                    let ly = y / lobe_rb;
                    if lx * lx + ly * ly <= 1.0 {
                        return true;
                    }
                    // protrusion: thin bar leaving the lobe vertically,
                    // opposite directions for the two lobes
                    let py = y * dir;
                    if (x - sx).abs() <= protrusion_w / 2.0
                        && py <= 0.0
                        && py >= -(lobe_rb + protrusion_len)
                    {
                        return true;
                    }
                }
                false
            }
        }
    }

    /// Membership at grid coordinates (pixel units).
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let x = px - self.center.0;
        let y = py - self.center.1;
        let (s, c) = (-self.rotation).sin_cos();
        self.contains_local(c * x - s * y, s * x + c * y)
    }
}

/// Rasterized shape with measured geometry.
#[derive(Debug, Clone)]
pub struct RasterShape {
    mask: Mask,
    area: f64,
    perimeter: f64,
    hull_perimeter: f64,
    indicator: ScalarGrid,
    center: (f64, f64),
}

impl RasterShape {
    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Pixel count of the mask.
    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn hull_perimeter(&self) -> f64 {
        self.hull_perimeter
    }

    pub fn indicator(&self) -> &ScalarGrid {
        &self.indicator
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }
}

/// Rasterize a shape: binary mask from the pixel-center test, indicator
/// from 8x8 supersampled coverage scaled to height `h` (optionally made
/// zero-mean), and measured geometry.
pub fn rasterize(spec: &ShapeSpec) -> Result<RasterShape> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut mask_data = vec![false; w * h];
    let mut coverage = vec![0.0f64; w * h];

    const SS: usize = 8;
    for r in 0..h {
        for c in 0..w {
            let (px, py) = (c as f64, r as f64);
            let center_in = spec.contains(px, py);
            mask_data[r * w + c] = center_in;

            // corners agree with the center -> pixel is fully in or out
            let mut uniform = true;
            for (dx, dy) in [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)] {
                if spec.contains(px + dx, py + dy) != center_in {
                    uniform = false;
                    break;
                }
            }
            coverage[r * w + c] = if uniform {
                if center_in {
                    1.0
                } else {
                    0.0
                }
            } else {
                let mut hits = 0usize;
                for i in 0..SS {
                    for j in 0..SS {
                        let sx = px - 0.5 + (i as f64 + 0.5) / SS as f64;
                        let sy = py - 0.5 + (j as f64 + 0.5) / SS as f64;
                        if spec.contains(sx, sy) {
                            hits += 1;
                        }
                    }
                }
                hits as f64 / (SS * SS) as f64
            };
        }
    }

    let mask = Mask::new(w, h, mask_data)?;
    let area = mask.count();
    if area == 0 {
        return Err(AnisoError::EmptyMask);
    }

    let mut indicator = ScalarGrid::zeros(w, h);
    for i in 0..w * h {
        indicator.values_mut()[i] = spec.h * coverage[i];
    }
    if spec.zero_mean {
        let m = indicator.mean();
        for v in indicator.values_mut() {
            *v -= m;
        }
    }

    let perimeter = mask_perimeter(&mask)?;
    let hull_perimeter = convex_hull_perimeter(&mask)?;

    Ok(RasterShape {
        mask,
        area: area as f64,
        perimeter,
        hull_perimeter,
        indicator,
        center: spec.center,
    })
}

/// Smoothing scale used before tracing the 0.5 level set.
const TRACE_SIGMA: f64 = 1.0;

fn smoothed_level_field(mask: &Mask) -> ScalarGrid {
    gaussian_convolve(&mask.to_scalar(), TRACE_SIGMA)
}

/// Sub-pixel contour length of the mask boundary: marching squares on
/// the 0.5 level set of the smoothed indicator, all contours summed.
pub fn mask_perimeter(mask: &Mask) -> Result<f64> {
    if mask.count() == 0 {
        return Err(AnisoError::EmptyMask);
    }
    let field = smoothed_level_field(mask);
    let contours = trace_contours(&field, 0.5);
    Ok(contours.iter().map(|c| polyline_length(c, true)).sum())
}

/// Perimeter of the convex hull of the traced boundary points.
pub fn convex_hull_perimeter(mask: &Mask) -> Result<f64> {
    if mask.count() == 0 {
        return Err(AnisoError::EmptyMask);
    }
    let field = smoothed_level_field(mask);
    let contours = trace_contours(&field, 0.5);
    let mut points: Vec<(f64, f64)> = contours.into_iter().flatten().collect();
    if points.len() < 3 {
        return Err(AnisoError::DegenerateInput(
            "too few boundary points for a hull".into(),
        ));
    }
    let hull = convex_hull(&mut points);
    Ok(polyline_length(&hull, true))
}

/// Convexity measure: hull perimeter over perimeter, in (0, 1], equal
/// to 1 exactly for convex sets up to discretization.
pub fn convexity_measure(shape: &RasterShape) -> f64 {
    shape.hull_perimeter() / shape.perimeter()
}

/// Maximum boundary curvature of an ellipse with semi-axes `ra >= rb`,
/// attained at the major-axis endpoints.
pub fn ellipse_max_curvature(ra: f64, rb: f64) -> Result<f64> {
    if !(ra >= rb && rb > 0.0) {
        return Err(AnisoError::InvalidParameter(
            "require ra >= rb > 0".into(),
        ));
    }
    Ok(ra / (rb * rb))
}

/// Perimeter minus `lambda` times area.
pub fn g_lambda(shape: &RasterShape, lambda: f64) -> f64 {
    shape.perimeter() - lambda * shape.area()
}

/// Result of the closed-form disk construction.
#[derive(Debug, Clone)]
pub struct AnalyticDisk {
    pub indicator: ScalarGrid,
    pub xi: VectorField,
    /// The product field `A xi` the plain divergence acts on; continuous
    /// across the disk boundary (`a X / r` inside and on the ring).
    pub xi_tilde: VectorField,
    pub p: ScalarGrid,
    pub lambda: f64,
    pub c0: f64,
    pub center: (f64, f64),
}

/// Closed-form calibration of a disk of radius `r` inside a circular
/// domain of radius `r0`: the indicator with the `c0 = 1 - r^2/r0^2`
/// offset, the piecewise dual field `xi`, the piecewise-constant
/// subgradient `p` (2a/r inside, -2ar/(c0 r0^2) in the annulus, 0
/// beyond) and the eigenvalue `2a/(h r)`.
///
/// The two components of `xi` are sampled on half-pixel staggered
/// offsets (x at +1/2 column, y at +1/2 row). That is where the
/// forward-difference dual variable lives, and it makes the discrete
/// `div_a` of the field second-order accurate against `p`. Pixels whose
/// staggered sample radius falls within one pixel of `|X| = r` form the
/// boundary ring carrying the unit radial field; any pixel pair whose
/// combined magnitude exceeds 1 is scaled back onto the unit ball.
pub fn analytic_disk(
    r: f64,
    r0: f64,
    a: f64,
    h: f64,
    width: usize,
    height: usize,
) -> Result<AnalyticDisk> {
    if !(r > 0.0 && r0 > r) {
        return Err(AnisoError::InvalidParameter("require 0 < r < r0".into()));
    }
    if !(a > 0.0 && a <= 1.0) {
        return Err(AnisoError::InvalidParameter("require a in (0, 1]".into()));
    }
    if h == 0.0 {
        return Err(AnisoError::InvalidParameter("height must be nonzero".into()));
    }
    let half_extent = (width.min(height) as f64 - 1.0) / 2.0;
    if r0 > half_extent - 2.0 {
        return Err(AnisoError::ShapeOutOfBounds);
    }

    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let c0 = 1.0 - (r * r) / (r0 * r0);

    let spec = ShapeSpec {
        variant: ShapeVariant::Disk { r },
        center: (cx, cy),
        width,
        height,
        h,
        zero_mean: false,
        rotation: 0.0,
    };
    let shape = rasterize(&spec)?;
    let mut indicator = shape.indicator().clone();
    for v in indicator.values_mut() {
        *v -= h * (1.0 - c0);
    }

    let xi_at = |x: f64, y: f64| -> (f64, f64) {
        let rad = (x * x + y * y).sqrt();
        if (rad - r).abs() <= 1.0 {
            let d = rad.max(r);
            (x / d, y / d)
        } else if rad < r {
            (a * x / r, a * y / r)
        } else if rad < r0 {
            let g = a * (r / c0) * (1.0 / (rad * rad) - 1.0 / (r0 * r0));
            (g * x, g * y)
        } else {
            (0.0, 0.0)
        }
    };

    // the continuous product field A xi, with the analytic tensor that
    // is the identity away from the boundary circle
    let tilde_at = |x: f64, y: f64| -> (f64, f64) {
        let rad = (x * x + y * y).sqrt();
        if rad < r {
            (a * x / r, a * y / r)
        } else if rad < r0 {
            let g = a * (r / c0) * (1.0 / (rad * rad) - 1.0 / (r0 * r0));
            (g * x, g * y)
        } else {
            (0.0, 0.0)
        }
    };

    let mut xi = VectorField::zeros(width, height);
    let mut xi_tilde = VectorField::zeros(width, height);
    for row in 0..height {
        for col in 0..width {
            let x = col as f64 - cx;
            let y = row as f64 - cy;
            let i = row * width + col;
            xi.x[i] = xi_at(x + 0.5, y).0;
            xi.y[i] = xi_at(x, y + 0.5).1;
            let mag = (xi.x[i] * xi.x[i] + xi.y[i] * xi.y[i]).sqrt();
            if mag > 1.0 {
                xi.x[i] /= mag;
                xi.y[i] /= mag;
            }
            xi_tilde.x[i] = tilde_at(x + 0.5, y).0;
            xi_tilde.y[i] = tilde_at(x, y + 0.5).1;
        }
    }

    let p_in = 2.0 * a / r;
    let p_out = -2.0 * a * r / (c0 * r0 * r0);
    let mut p = ScalarGrid::zeros(width, height);
    for row in 0..height {
        for col in 0..width {
            let x = col as f64 - cx;
            let y = row as f64 - cy;
            let rad = (x * x + y * y).sqrt();
            let v = if rad <= r {
                p_in
            } else if rad < r0 {
                p_out
            } else {
                0.0
            };
            p.set(row, col, v);
        }
    }

    Ok(AnalyticDisk {
        indicator,
        xi,
        xi_tilde,
        p,
        lambda: 2.0 * a / (h * r),
        c0,
        center: (cx, cy),
    })
}

/// Solve the opening angle of an annulus-sector C shape so that the
/// measured hull-perimeter ratio hits `target_ratio`, by bisection on
/// the measured value. The ratio grows monotonically with the opening.
pub fn calibrated_c_shape(
    width: usize,
    height: usize,
    outer: f64,
    inner: f64,
    target_ratio: f64,
    h: f64,
    zero_mean: bool,
) -> Result<(ShapeSpec, RasterShape)> {
    let measure = |opening: f64| -> Result<(ShapeSpec, RasterShape, f64)> {
        let spec = ShapeSpec::centered(
            ShapeVariant::CShape {
                outer,
                inner,
                opening,
            },
            width,
            height,
            h,
            zero_mean,
        );
        let shape = rasterize(&spec)?;
        let ratio = convexity_measure(&shape);
        Ok((spec, shape, ratio))
    };

    let mut lo = 0.3f64;
    let mut hi = 2.6f64;
    let (_, _, ratio_lo) = measure(lo)?;
    let (_, _, ratio_hi) = measure(hi)?;
    if !(ratio_lo <= target_ratio && target_ratio <= ratio_hi) {
        return Err(AnisoError::InvalidParameter(format!(
            "target ratio {target_ratio} outside attainable range [{ratio_lo}, {ratio_hi}]"
        )));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let (spec, shape, ratio) = measure(mid)?;
        if (ratio - target_ratio).abs() <= 5e-4 {
            return Ok((spec, shape));
        }
        if ratio < target_ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let (spec, shape, _) = measure(mid)?;
    Ok((spec, shape))
}

// ---------------------------------------------------------------------
// marching squares and polygon utilities
// ---------------------------------------------------------------------

/// Trace all closed contours of `field` at `level` with marching
/// squares; linear interpolation along cell edges, saddles resolved by
/// the cell average. Returns ordered point loops in (x, y) pixel
/// coordinates.
pub fn trace_contours(field: &ScalarGrid, level: f64) -> Vec<Vec<(f64, f64)>> {
    let (w, h) = (field.width(), field.height());
    let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::new();

    let interp = |va: f64, vb: f64| -> f64 {
        let t = (level - va) / (vb - va);
        t.clamp(1e-9, 1.0 - 1e-9)
    };

    for r in 0..h - 1 {
        for c in 0..w - 1 {
            let v00 = field.get(r, c);
            let v01 = field.get(r, c + 1);
            let v10 = field.get(r + 1, c);
            let v11 = field.get(r + 1, c + 1);
            let mut case = 0u8;
            if v00 > level {
                case |= 1;
            }
            if v01 > level {
                case |= 2;
            }
            if v11 > level {
                case |= 4;
            }
            if v10 > level {
                case |= 8;
            }
            if case == 0 || case == 15 {
                continue;
            }
            let x = c as f64;
            let y = r as f64;
            let top = (x + interp(v00, v01), y);
            let bottom = (x + interp(v10, v11), y + 1.0);
            let left = (x, y + interp(v00, v10));
            let right = (x + 1.0, y + interp(v01, v11));

            match case {
                1 | 14 => segments.push((left, top)),
                2 | 13 => segments.push((top, right)),
                4 | 11 => segments.push((right, bottom)),
                8 | 7 => segments.push((bottom, left)),
                3 | 12 => segments.push((left, right)),
                6 | 9 => segments.push((top, bottom)),
                5 | 10 => {
                    let avg = 0.25 * (v00 + v01 + v10 + v11);
                    let connected = (avg > level) == (case == 5);
                    if connected {
                        segments.push((left, top));
                        segments.push((right, bottom));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    chain_segments(segments)
}

fn point_key(p: (f64, f64)) -> (u64, u64) {
    (p.0.to_bits(), p.1.to_bits())
}

fn chain_segments(segments: Vec<((f64, f64), (f64, f64))>) -> Vec<Vec<(f64, f64)>> {
    use std::collections::HashMap;
    let mut incident: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, seg) in segments.iter().enumerate() {
        incident.entry(point_key(seg.0)).or_default().push(i);
        incident.entry(point_key(seg.1)).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut loops = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut path = vec![segments[start].0, segments[start].1];
        loop {
            let tail = *path.last().unwrap();
            let key = point_key(tail);
            let next = incident
                .get(&key)
                .and_then(|list| list.iter().copied().find(|&i| !used[i]));
            match next {
                Some(i) => {
                    used[i] = true;
                    let seg = segments[i];
                    let nxt = if point_key(seg.0) == key { seg.1 } else { seg.0 };
                    if point_key(nxt) == point_key(path[0]) {
                        break;
                    }
                    path.push(nxt);
                }
                None => break,
            }
        }
        if path.len() >= 3 {
            loops.push(path);
        }
    }
    loops
}

/// Length of a polyline, optionally closing the loop.
pub fn polyline_length(points: &[(f64, f64)], closed: bool) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut len = 0.0;
    for w in points.windows(2) {
        len += ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
    }
    if closed {
        let a = points[0];
        let b = *points.last().unwrap();
        len += ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    }
    len
}

/// Monotone-chain convex hull; returns vertices in counter-clockwise
/// order without repeating the first point.
pub fn convex_hull(points: &mut [(f64, f64)]) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| -> f64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in points.iter() {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in points.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Boundary point of maximal curvature, estimated on the longest traced
/// contour: points are smoothed by a short moving average, curvature at
/// each point comes from the circumscribed circle through the points
/// `k` steps away on either side (Menger curvature).
pub fn max_curvature_point(shape: &RasterShape) -> Result<((f64, f64), f64)> {
    let field = smoothed_level_field(shape.mask());
    let contours = trace_contours(&field, 0.5);
    let contour = contours
        .into_iter()
        .max_by(|a, b| a.len().cmp(&b.len()))
        .ok_or(AnisoError::EmptyMask)?;
    let n = contour.len();
    if n < 15 {
        return Err(AnisoError::DegenerateInput(
            "contour too short for curvature estimation".into(),
        ));
    }

    // moving average over 9 points to suppress tracing jitter
    let window = 4isize;
    let smooth: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let mut sx = 0.0;
            let mut sy = 0.0;
            for d in -window..=window {
                let j = (i as isize + d).rem_euclid(n as isize) as usize;
                sx += contour[j].0;
                sy += contour[j].1;
            }
            let m = (2 * window + 1) as f64;
            (sx / m, sy / m)
        })
        .collect();

    let k = 3isize;
    let mut kappas = vec![0.0f64; n];
    for i in 0..n {
        let a = smooth[(i as isize - k).rem_euclid(n as isize) as usize];
        let b = smooth[i];
        let c = smooth[(i as isize + k).rem_euclid(n as isize) as usize];
        let ab = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let bc = ((c.0 - b.0).powi(2) + (c.1 - b.1).powi(2)).sqrt();
        let ca = ((a.0 - c.0).powi(2) + (a.1 - c.1).powi(2)).sqrt();
        let area2 = ((b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)).abs();
        if ab * bc * ca > 0.0 {
            kappas[i] = 2.0 * area2 / (ab * bc * ca);
        }
    }
    // average nearby estimates before picking the maximum
    let mut best = ((0.0, 0.0), -1.0);
    for i in 0..n {
        let mut acc = 0.0;
        for d in -2isize..=2 {
            acc += kappas[(i as isize + d).rem_euclid(n as isize) as usize];
        }
        let kappa = acc / 5.0;
        if kappa > best.1 {
            best = (smooth[i], kappa);
        }
    }
    if best.1 < 0.0 {
        return Err(AnisoError::DegenerateInput("flat contour".into()));
    }
    Ok(best)
}
