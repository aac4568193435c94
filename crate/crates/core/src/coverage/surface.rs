use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::hypot;

/// Neighbours used by the performance surface.
pub const SURFACE_NEIGHBOURS: usize = 5;
/// Default heatmap resolution per axis.
pub const HEATMAP_RESOLUTION: usize = 50;
/// Fraction of each axis range added on both sides of the heatmap.
pub const HEATMAP_PADDING: f64 = 0.05;

/// Inverse-distance weighted k-NN regressor over embedded points. Exact at
/// the training points.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnSurface {
    points: Vec<[f64; 2]>,
    values: Vec<f64>,
    k: usize,
}

pub fn fit_surface(points: &[[f64; 2]], values: &[f64]) -> Result<KnnSurface> {
    if points.len() != values.len() {
        return Err(Error::Contract("one value per point required".into()));
    }
    if points.is_empty() {
        return Err(Error::InsufficientData(
            "performance surface needs at least one scored point".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("surface values must be finite".into()));
    }
    Ok(KnnSurface {
        points: points.to_vec(),
        values: values.to_vec(),
        k: SURFACE_NEIGHBOURS.min(points.len()),
    })
}

impl KnnSurface {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn predict(&self, x: f64, y: f64) -> f64 {
        let mut d: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (hypot(p[0] - x, p[1] - y), i))
            .collect();
        let exact: Vec<f64> = d
            .iter()
            .filter(|(dist, _)| *dist <= 1e-12)
            .map(|&(_, i)| self.values[i])
            .collect();
        if !exact.is_empty() {
            return exact.iter().sum::<f64>() / exact.len() as f64;
        }
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (mut num, mut den) = (0.0, 0.0);
        for &(dist, i) in &d[..self.k] {
            num += self.values[i] / dist;
            den += 1.0 / dist;
        }
        num / den
    }
}

/// Regular grid of surface predictions. `values[row * resolution + col]`
/// holds the prediction at `(xs[col], ys[row])`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Heatmap {
    pub resolution: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let range = hi - lo;
    if range <= 0.0 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo - HEATMAP_PADDING * range, hi + HEATMAP_PADDING * range)
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![(lo + hi) / 2.0];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Evaluates `surface` on a `resolution × resolution` grid spanning the
/// padded bounding box of `coords`.
pub fn heatmap(surface: &KnnSurface, coords: &[[f64; 2]], resolution: usize) -> Result<Heatmap> {
    if coords.is_empty() || resolution == 0 {
        return Err(Error::Contract(
            "heatmap needs coordinates and a positive resolution".into(),
        ));
    }
    let fold = |k: usize| {
        coords.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[k]), hi.max(p[k]))
        })
    };
    let (x_min, x_max) = {
        let (lo, hi) = fold(0);
        padded(lo, hi)
    };
    let (y_min, y_max) = {
        let (lo, hi) = fold(1);
        padded(lo, hi)
    };
    let xs = axis(x_min, x_max, resolution);
    let ys = axis(y_min, y_max, resolution);
    let mut values = Vec::with_capacity(resolution * resolution);
    for &y in &ys {
        for &x in &xs {
            values.push(surface.predict(x, y));
        }
    }
    Ok(Heatmap {
        resolution,
        x_min,
        x_max,
        y_min,
        y_max,
        xs,
        ys,
        values,
    })
}
