use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lesionseg::gmm::{GmmConfig, VarianceMode};
use lesionseg::kmeans::KmeansConfig;
use lesionseg::preprocess::ClaheConfig;
use lesionseg::watershed::McwtConfig;
use lesionseg::{Enhancement, Method, MethodKind, PipelineConfig, PixelSpacing};

#[derive(Debug, Parser)]
#[command(
    name = "lesionseg",
    version,
    about = "Unsupervised bright-lesion segmentation and mask evaluation"
)]
pub struct Cli {
    /// Directory that receives every output file (created when missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Worker threads. Defaults to one per core.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Pixel spacing in millimeters, columns by rows, e.g. 0.7x0.7.
    #[arg(long, global = true, value_name = "DXxDY", value_parser = parse_spacing)]
    pub spacing: Option<PixelSpacing>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment one image and write its mask, an overlay and a manifest.
    Segment(SegmentArgs),
    /// Score a predicted mask against a reference mask.
    Evaluate(EvaluateArgs),
    /// Run several methods over a directory of cases and summarize.
    Benchmark(BenchmarkArgs),
    /// Generate synthetic disk phantoms with exact ground truth.
    Phantom(PhantomArgs),
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long, value_name = "FILE", required_unless_present = "manifest")]
    pub image: Option<PathBuf>,
    /// JSON file `{"x":..,"y":..,"w":..,"h":..}`; the whole image when absent.
    #[arg(long, value_name = "FILE")]
    pub roi: Option<PathBuf>,
    /// Reference mask; adds its contour to the overlay and prints metrics.
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = "mcwt")]
    pub method: MethodKind,
    #[command(flatten)]
    pub params: MethodFlags,
    /// Replay a previous run. Inputs and parameters come from the manifest.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    /// Case name for the CSV row; defaults to the prediction's file stem.
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long, default_value = "")]
    pub method: String,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Directory with one subdirectory per case holding image.png,
    /// truth.png and optionally roi.json.
    #[arg(long, value_name = "DIR", required_unless_present = "manifest")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "kmeans,gmm,mcwt")]
    pub methods: Vec<MethodKind>,
    /// Also sweep the watershed marker count over A..=B.
    #[arg(long, value_name = "A:B", value_parser = parse_sweep)]
    pub marker_sweep: Option<(usize, usize)>,
    #[command(flatten)]
    pub params: MethodFlags,
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// JSON phantom description for a single case.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["count", "manifest"])]
    pub spec: Option<PathBuf>,
    /// Emit a corpus of this many random single-lesion cases.
    #[arg(long, conflicts_with = "manifest")]
    pub count: Option<usize>,
    /// First seed of the corpus; case `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 1.5)]
    pub softness: f64,
    #[arg(long, value_name = "WxH", default_value = "64x64", value_parser = parse_grid)]
    pub size: (usize, usize),
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

/// Method parameters shared by `segment` and `benchmark`. Anything left
/// unset keeps the method's default.
#[derive(Debug, Clone, Default, Args)]
pub struct MethodFlags {
    /// Number of clusters (k-means, mixture).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for the mixture's collapse recovery.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Watershed marker count.
    #[arg(long)]
    pub markers: Option<usize>,
    /// Radius of the square structuring element for the gradient.
    #[arg(long)]
    pub se_radius: Option<usize>,
    /// Keep each brightest pixel as its own marker.
    #[arg(long)]
    pub no_merge_markers: bool,
    /// Share one variance across all mixture components.
    #[arg(long)]
    pub pooled_variance: bool,
    #[arg(long, value_name = "NxM", value_parser = parse_grid)]
    pub clahe_tiles: Option<(usize, usize)>,
    #[arg(long, value_name = "F")]
    pub clahe_clip: Option<f64>,
    #[arg(long, value_name = "N")]
    pub clahe_bins: Option<usize>,
    #[arg(long, conflicts_with_all = ["clahe_tiles", "clahe_clip", "clahe_bins", "clahe_full_image"])]
    pub no_clahe: bool,
    /// Enhance the whole image before cropping to the ROI.
    #[arg(long)]
    pub clahe_full_image: bool,
}

impl MethodFlags {
    pub fn pipeline(&self, kind: MethodKind) -> lesionseg::Result<PipelineConfig> {
        let method = match kind {
            MethodKind::Kmeans => {
                let d = KmeansConfig::default();
                Method::Kmeans(KmeansConfig {
                    k: self.k.unwrap_or(d.k),
                    max_iter: self.max_iter.unwrap_or(d.max_iter),
                    tol: self.tol.unwrap_or(d.tol),
                })
            }
            MethodKind::Gmm => {
                let d = GmmConfig::default();
                Method::Gmm(GmmConfig {
                    k: self.k.unwrap_or(d.k),
                    max_iter: self.max_iter.unwrap_or(d.max_iter),
                    tol: self.tol.unwrap_or(d.tol),
                    seed: self.seed.unwrap_or(d.seed),
                    variance_mode: if self.pooled_variance {
                        VarianceMode::Pooled
                    } else {
                        VarianceMode::PerComponent
                    },
                })
            }
            MethodKind::Mcwt => {
                let d = McwtConfig::default();
                Method::Mcwt(McwtConfig {
                    markers: self.markers.unwrap_or(d.markers),
                    se_radius: self.se_radius.unwrap_or(d.se_radius),
                    merge_markers: !self.no_merge_markers,
                })
            }
        };
        let clahe = (!self.no_clahe).then(|| {
            let d = ClaheConfig::default();
            let (tiles_x, tiles_y) = self.clahe_tiles.unwrap_or((d.tiles_x, d.tiles_y));
            ClaheConfig {
                tiles_x,
                tiles_y,
                clip_limit: self.clahe_clip.unwrap_or(d.clip_limit),
                bins: self.clahe_bins.unwrap_or(d.bins),
            }
        });
        let cfg = PipelineConfig {
            method,
            enhancement: Enhancement {
                clahe,
                before_crop: self.clahe_full_image,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn split_pair<'a>(s: &'a str, sep: &[char]) -> Result<(&'a str, &'a str), String> {
    s.split_once(sep)
        .ok_or_else(|| format!("expected two values separated by '{}'", sep[0]))
}

pub fn parse_spacing(s: &str) -> Result<PixelSpacing, String> {
    let (a, b) = split_pair(s, &['x', 'X'])?;
    let dx: f64 = a
        .trim()
        .parse()
        .map_err(|e| format!("bad column spacing '{a}': {e}"))?;
    let dy: f64 = b
        .trim()
        .parse()
        .map_err(|e| format!("bad row spacing '{b}': {e}"))?;
    PixelSpacing::new(dx, dy).map_err(|e| e.to_string())
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = split_pair(s, &['x', 'X'])?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad count '{t}': {e}"))
    };
    Ok((parse(a)?, parse(b)?))
}

pub fn parse_sweep(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = split_pair(s, &[':'])?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad marker count '{t}': {e}"))
    };
    let (lo, hi) = (parse(a)?, parse(b)?);
    if lo < 1 || hi < lo {
        return Err(format!("sweep range {lo}:{hi} must satisfy 1 <= A <= B"));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_forms() {
        assert_eq!(
            parse_spacing("0.5x2").unwrap(),
            PixelSpacing::new(0.5, 2.0).unwrap()
        );
        assert_eq!(parse_spacing("1X1").unwrap(), PixelSpacing::default());
        assert!(parse_spacing("0x1").is_err());
        assert!(parse_spacing("1.0").is_err());
    }

    #[test]
    fn sweep_range() {
        assert_eq!(parse_sweep("1:150").unwrap(), (1, 150));
        assert!(parse_sweep("0:3").is_err());
        assert!(parse_sweep("5:3").is_err());
    }

    #[test]
    fn flags_override_defaults() {
        let flags = MethodFlags {
            k: Some(3),
            pooled_variance: true,
            clahe_tiles: Some((4, 2)),
            ..Default::default()
        };
        let cfg = flags.pipeline(MethodKind::Gmm).unwrap();
        match cfg.method {
            Method::Gmm(g) => {
                assert_eq!(g.k, 3);
                assert_eq!(g.variance_mode, VarianceMode::Pooled);
                assert_eq!(g.max_iter, GmmConfig::default().max_iter);
            }
            other => panic!("{other:?}"),
        }
        let c = cfg.enhancement.clahe.unwrap();
        assert_eq!((c.tiles_x, c.tiles_y), (4, 2));
    }

    #[test]
    fn invalid_flags_fail_validation() {
        let flags = MethodFlags {
            k: Some(0),
            ..Default::default()
        };
        assert!(flags.pipeline(MethodKind::Gmm).is_err());
        let flags = MethodFlags {
            clahe_clip: Some(1.5),
            ..Default::default()
        };
        assert!(flags.pipeline(MethodKind::Kmeans).is_err());
    }
}
