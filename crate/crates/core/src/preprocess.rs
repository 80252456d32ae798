//! Contrast-limited adaptive histogram equalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaheConfig {
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Per-bin count limit as a fraction of the tile's pixel count; 1.0
    /// disables clipping.
    pub clip_limit: f64,
    pub bins: usize,
}

impl Default for ClaheConfig {
    fn default() -> Self {
        Self {
            tiles_x: 8,
            tiles_y: 8,
            clip_limit: 0.01,
            bins: 256,
        }
    }
}

impl ClaheConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tiles_x < 1 || self.tiles_y < 1 {
            return Err(Error::Config("CLAHE tile grid must be at least 1x1".into()));
        }
        if !(self.clip_limit > 0.0 && self.clip_limit <= 1.0) {
            return Err(Error::Config(format!(
                "CLAHE clip limit {} must lie in (0, 1]",
                self.clip_limit
            )));
        }
        if self.bins < 2 {
            return Err(Error::Config(
                "CLAHE needs at least 2 histogram bins".into(),
            ));
        }
        Ok(())
    }
}

#[inline]
fn bin_of(v: f64, bins: usize) -> usize {
    ((v * bins as f64) as usize).min(bins - 1)
}

/// Clipped-histogram equalization map for one tile: `map[b]` is the output
/// level for intensity bin `b`. Non-decreasing in `b` by construction.
pub fn equalization_map(
    values: impl Iterator<Item = f64>,
    clip_limit: f64,
    bins: usize,
) -> Vec<f64> {
    let mut hist = vec![0.0f64; bins];
    let mut n = 0usize;
    for v in values {
        hist[bin_of(v, bins)] += 1.0;
        n += 1;
    }
    let total = n as f64;
    let limit = clip_limit * total;
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    let share = excess / bins as f64;
    let mut acc = 0.0;
    hist.iter()
        .map(|h| {
            acc += h + share;
            (acc / total).min(1.0)
        })
        .collect()
}

/// Tile boundaries along one axis: `edges[t]..edges[t+1]` is tile `t`.
fn tile_edges(extent: usize, tiles: usize) -> Vec<usize> {
    (0..=tiles).map(|t| t * extent / tiles).collect()
}

/// For each coordinate along an axis, the two neighboring tile indices and
/// the weight of the second. Coordinates outside the outermost tile centers
/// use the nearest tile alone.
fn interpolation_axis(extent: usize, edges: &[usize]) -> Vec<(usize, usize, f64)> {
    let centers: Vec<f64> = edges
        .windows(2)
        .map(|e| (e[0] + e[1] - 1) as f64 / 2.0)
        .collect();
    let last = centers.len() - 1;
    (0..extent)
        .map(|x| {
            let x = x as f64;
            if x <= centers[0] {
                (0, 0, 0.0)
            } else if x >= centers[last] {
                (last, last, 0.0)
            } else {
                let t = centers.partition_point(|&c| c <= x) - 1;
                (t, t + 1, (x - centers[t]) / (centers[t + 1] - centers[t]))
            }
        })
        .collect()
}

pub fn clahe(img: &GrayImage, cfg: &ClaheConfig) -> Result<GrayImage> {
    cfg.validate()?;
    let (w, h) = img.dims();
    if cfg.tiles_x > w || cfg.tiles_y > h {
        return Err(Error::Config(format!(
            "CLAHE tile grid {}x{} exceeds image size {w}x{h}",
            cfg.tiles_x, cfg.tiles_y
        )));
    }
    let xe = tile_edges(w, cfg.tiles_x);
    let ye = tile_edges(h, cfg.tiles_y);

    let maps = par::map_indices(cfg.tiles_x * cfg.tiles_y, |t| {
        let (tx, ty) = (t % cfg.tiles_x, t / cfg.tiles_x);
        let values =
            (ye[ty]..ye[ty + 1]).flat_map(|j| (xe[tx]..xe[tx + 1]).map(move |i| img.get(i, j)));
        equalization_map(values, cfg.clip_limit, cfg.bins)
    });

    let ax = interpolation_axis(w, &xe);
    let ay = interpolation_axis(h, &ye);
    let tiles_x = cfg.tiles_x;
    let map_at = |tx: usize, ty: usize, b: usize| maps[ty * tiles_x + tx][b];

    let mut out = vec![0.0; w * h];
    par::for_each_chunk_mut(&mut out, w, |j, row| {
        let (y0, y1, wy) = ay[j];
        for (i, o) in row.iter_mut().enumerate() {
            let (x0, x1, wx) = ax[i];
            let b = bin_of(img.get(i, j), cfg.bins);
            let top = (1.0 - wx) * map_at(x0, y0, b) + wx * map_at(x1, y0, b);
            let bottom = (1.0 - wx) * map_at(x0, y1, b) + wx * map_at(x1, y1, b);
            *o = ((1.0 - wy) * top + wy * bottom).clamp(0.0, 1.0);
        }
    });
    GrayImage::new(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_tile(clip: f64) -> ClaheConfig {
        ClaheConfig {
            tiles_x: 1,
            tiles_y: 1,
            clip_limit: clip,
            bins: 256,
        }
    }

    #[test]
    fn constant_image_maps_to_single_level() {
        let img = GrayImage::constant(16, 16, 0.37).unwrap();
        for cfg in [ClaheConfig::default(), single_tile(1.0), single_tile(0.05)] {
            let out = clahe(&img, &cfg).unwrap();
            let first = out.pixels()[0];
            assert!(out.pixels().iter().all(|&v| v == first));
        }
    }

    #[test]
    fn two_level_cdf_by_hand() {
        // 6 pixels at 0.2 (bin 51), 10 at 0.8 (bin 204): CDF gives 6/16 and 16/16.
        let px: Vec<f64> = (0..16).map(|i| if i < 6 { 0.2 } else { 0.8 }).collect();
        let img = GrayImage::new(4, 4, px.clone()).unwrap();
        let out = clahe(&img, &single_tile(1.0)).unwrap();
        for (o, p) in out.pixels().iter().zip(&px) {
            let expect = if *p == 0.2 { 6.0 / 16.0 } else { 1.0 };
            assert!((o - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_larger_than_image_is_config_error() {
        let img = GrayImage::constant(4, 4, 0.5).unwrap();
        let cfg = ClaheConfig {
            tiles_x: 5,
            ..ClaheConfig::default()
        };
        assert!(matches!(clahe(&img, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            ClaheConfig {
                tiles_x: 0,
                ..Default::default()
            },
            ClaheConfig {
                clip_limit: 0.0,
                ..Default::default()
            },
            ClaheConfig {
                clip_limit: 1.5,
                ..Default::default()
            },
            ClaheConfig {
                bins: 1,
                ..Default::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn clipping_flattens_the_map() {
        let vals: Vec<f64> = (0..100).map(|i| if i < 90 { 0.5 } else { 0.9 }).collect();
        let unclipped = equalization_map(vals.iter().copied(), 1.0, 16);
        let clipped = equalization_map(vals.iter().copied(), 0.1, 16);
        // clipping lowers the jump at the dominant bin
        assert!(clipped[8] - clipped[7] < unclipped[8] - unclipped[7]);
        assert!((clipped[15] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_weights_stay_in_unit_range() {
        let edges = tile_edges(37, 5);
        for (a, b, wgt) in interpolation_axis(37, &edges) {
            assert!(a <= b && b < 5);
            assert!((0.0..1.0).contains(&wgt));
        }
    }
}
