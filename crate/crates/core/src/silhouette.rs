//! Binary silhouettes, the exact Euclidean distance transform and the smooth
//! silhouette field, with bilinear sampling that returns analytic gradients.
//!
//! Pixel `(x, y)` has its center at the continuous position `(x, y)`, so the
//! sampled domain of a `W x H` image is `[0, W-1] x [0, H-1]`.

use crate::grid::Grid;
use crate::{Error, Result, Vec2};

/// Binary mask of one view; 1 marks foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteImage {
    mask: Grid<u8>,
}

impl SilhouetteImage {
    /// Builds a mask from row-major 0/1 cells.
    pub fn new(width: usize, height: usize, cells: Vec<u8>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::invalid(format!(
                "silhouette must be at least 2x2, got {width}x{height}"
            )));
        }
        if cells.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|&&c| c > 1) {
            return Err(Error::invalid(format!("mask cell value {bad} is not 0 or 1")));
        }
        Ok(Self {
            mask: Grid::from_vec(width, height, cells),
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut foreground: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let grid = Grid::from_fn(width, height, |x, y| u8::from(foreground(x, y)));
        Self::new(width, height, grid.data().to_vec())
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.mask.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.mask.height()
    }

    #[inline]
    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.mask.get(x, y) == 1
    }

    /// Mask value at signed coordinates; 0 outside the image.
    #[inline]
    pub fn value_at(&self, x: i64, y: i64) -> f64 {
        f64::from(self.mask.get_signed(x, y).unwrap_or(0))
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.data().iter().filter(|&&c| c == 1).count()
    }

    pub fn mask(&self) -> &Grid<u8> {
        &self.mask
    }

    /// Foreground pixels with at least one background pixel among their
    /// in-image 4-neighbors.
    pub fn boundary_pixels(&self) -> Vec<(usize, usize)> {
        let (w, h) = (self.width() as i64, self.height() as i64);
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if !self.is_foreground(x as usize, y as usize) {
                    continue;
                }
                let touches_bg = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .any(|&(dx, dy)| self.mask.get_signed(x + dx, y + dy) == Some(0));
                if touches_bg {
                    out.push((x as usize, y as usize));
                }
            }
        }
        out
    }

    /// Bilinear sample of the mask, treating everything outside the image as
    /// background. Returns the value and its spatial gradient.
    pub fn sample(&self, p: Vec2) -> (f64, Vec2) {
        let x0 = p.x.floor();
        let y0 = p.y.floor();
        let fx = p.x - x0;
        let fy = p.y - y0;
        let (xi, yi) = (x0 as i64, y0 as i64);
        let v00 = self.value_at(xi, yi);
        let v10 = self.value_at(xi + 1, yi);
        let v01 = self.value_at(xi, yi + 1);
        let v11 = self.value_at(xi + 1, yi + 1);
        bilinear(v00, v10, v01, v11, fx, fy)
    }
}

#[inline]
pub(crate) fn bilinear(v00: f64, v10: f64, v01: f64, v11: f64, fx: f64, fy: f64) -> (f64, Vec2) {
    let value = (1.0 - fx) * (1.0 - fy) * v00
        + fx * (1.0 - fy) * v10
        + (1.0 - fx) * fy * v01
        + fx * fy * v11;
    let gx = (1.0 - fy) * (v10 - v00) + fy * (v11 - v01);
    let gy = (1.0 - fx) * (v01 - v00) + fx * (v11 - v10);
    (value, Vec2::new(gx, gy))
}

/// Bilinear interpolation of a real-valued grid at `p`, with the exact
/// derivative of the interpolating patch.
///
/// Positions outside `[0, W-1] x [0, H-1]` are clamped into the domain first;
/// the gradient along a clamped axis is then zero. Exactly on a cell edge the
/// cell of `floor(p)` is used.
pub fn sample_bilinear(field: &Grid<f64>, p: Vec2) -> (f64, Vec2) {
    let (w, h) = (field.width(), field.height());
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    let cx = p.x.clamp(0.0, max_x);
    let cy = p.y.clamp(0.0, max_y);
    let x0 = (cx.floor() as usize).min(w - 2);
    let y0 = (cy.floor() as usize).min(h - 2);
    let fx = cx - x0 as f64;
    let fy = cy - y0 as f64;
    let (value, mut grad) = bilinear(
        field.get(x0, y0),
        field.get(x0 + 1, y0),
        field.get(x0, y0 + 1),
        field.get(x0 + 1, y0 + 1),
        fx,
        fy,
    );
    if cx != p.x {
        grad.x = 0.0;
    }
    if cy != p.y {
        grad.y = 0.0;
    }
    (value, grad)
}

/// Exact Euclidean distance, in pixels, from every background pixel to the
/// nearest boundary pixel of the foreground. Foreground pixels get 0.
///
/// The nearest foreground pixel of a background pixel is always a boundary
/// pixel, so this runs the separable lower-envelope transform against the
/// whole foreground set.
pub fn distance_transform(img: &SilhouetteImage) -> Result<Grid<f64>> {
    if img.foreground_count() == 0 {
        return Err(Error::AllBackground);
    }
    let (w, h) = (img.width(), img.height());

    // Column pass: squared vertical distance to the nearest foreground cell.
    let mut cols = Grid::filled(w, h, None::<u64>);
    let mut buf_in = vec![None; h];
    let mut buf_out = vec![None; h];
    for x in 0..w {
        for (y, slot) in buf_in.iter_mut().enumerate() {
            *slot = img.is_foreground(x, y).then_some(0u64);
        }
        squared_edt_1d(&buf_in, &mut buf_out);
        for (y, v) in buf_out.iter().enumerate() {
            cols.set(x, y, *v);
        }
    }

    // Row pass combines the column distances.
    let mut out = Grid::filled(w, h, 0.0);
    let mut buf_in = vec![None; w];
    let mut buf_out = vec![None; w];
    for y in 0..h {
        for (x, slot) in buf_in.iter_mut().enumerate() {
            *slot = cols.get(x, y);
        }
        squared_edt_1d(&buf_in, &mut buf_out);
        for (x, v) in buf_out.iter().enumerate() {
            let sq = v.expect("foreground exists so every row resolves");
            out.set(x, y, (sq as f64).sqrt());
        }
    }
    Ok(out)
}

/// 1D squared distance transform over sampled parabolas `f(q) + (p - q)^2`.
/// `None` marks an empty site. Exact in integer arithmetic.
fn squared_edt_1d(f: &[Option<u64>], out: &mut [Option<u64>]) {
    let sites: Vec<(i64, i64)> = f
        .iter()
        .enumerate()
        .filter_map(|(q, v)| v.map(|v| (q as i64, v as i64)))
        .collect();
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = None);
        return;
    }
    // Lower envelope. `starts[k]` is the first integer position where parabola
    // `hull[k]` is minimal.
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(sites.len());
    let mut starts: Vec<i64> = Vec::with_capacity(sites.len());
    for &(q, fq) in &sites {
        loop {
            let Some(&(r, fr)) = hull.last() else {
                hull.push((q, fq));
                starts.push(i64::MIN);
                break;
            };
            // First integer p at which parabola q is <= parabola r:
            // p >= ((fq + q^2) - (fr + r^2)) / (2(q - r)), rounded up.
            let num = (fq + q * q) - (fr + r * r);
            let den = 2 * (q - r);
            let s = div_ceil(num, den);
            if s <= *starts.last().unwrap() {
                hull.pop();
                starts.pop();
            } else {
                hull.push((q, fq));
                starts.push(s);
                break;
            }
        }
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let p = p as i64;
        while k + 1 < hull.len() && starts[k + 1] <= p {
            k += 1;
        }
        let (q, fq) = hull[k];
        *o = Some((fq + (p - q) * (p - q)) as u64);
    }
}

fn div_ceil(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    let d = num.div_euclid(den);
    if num.rem_euclid(den) == 0 {
        d
    } else {
        d + 1
    }
}

/// Smooth silhouette field: 1 on the foreground, min-max normalized
/// `1 - d / W` on the background, where `d` is the pixel distance to the
/// foreground boundary and `W` the image width.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSilhouette {
    field: Grid<f64>,
}

impl SmoothSilhouette {
    pub fn from_silhouette(img: &SilhouetteImage) -> Result<Self> {
        smooth(img)
    }

    pub fn width(&self) -> usize {
        self.field.width()
    }

    pub fn height(&self) -> usize {
        self.field.height()
    }

    pub fn field(&self) -> &Grid<f64> {
        &self.field
    }

    /// Samples the field. Outside the image the field continues as
    /// `value(clamp(p)) - |p - clamp(p)| / W`, so off-image positions still
    /// get a gradient pointing back toward the image.
    pub fn sample(&self, p: Vec2) -> (f64, Vec2) {
        let (value, grad) = sample_bilinear(&self.field, p);
        let max_x = (self.width() - 1) as f64;
        let max_y = (self.height() - 1) as f64;
        let c = Vec2::new(p.x.clamp(0.0, max_x), p.y.clamp(0.0, max_y));
        let off = p - c;
        let dist = off.norm();
        if dist == 0.0 {
            return (value, grad);
        }
        let w = self.width() as f64;
        (value - dist / w, grad - off / (dist * w))
    }
}

/// Builds the smooth silhouette field of a mask.
pub fn smooth(img: &SilhouetteImage) -> Result<SmoothSilhouette> {
    let dist = distance_transform(img)?;
    let w = img.width() as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let raw = Grid::from_fn(img.width(), img.height(), |x, y| {
        if img.is_foreground(x, y) {
            None
        } else {
            let v = 1.0 - dist.get(x, y) / w;
            lo = lo.min(v);
            hi = hi.max(v);
            Some(v)
        }
    });
    let span = hi - lo;
    let field = raw.map(|v| match *v {
        None => 1.0,
        // A single distinct background distance leaves nothing to normalize.
        Some(_) if span <= 0.0 => 0.0,
        Some(v) => (v - lo) / span,
    });
    Ok(SmoothSilhouette { field })
}
