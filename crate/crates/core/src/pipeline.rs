//! ROI crop, optional enhancement, and one of the three segmenters, producing
//! a full-size mask.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{gmm_segment, GmmConfig};
use crate::image::{crop_roi, select_lesion_cluster, BinaryMask, GrayImage, RegionOfInterest};
use crate::kmeans::{kmeans_cluster, KmeansConfig};
use crate::preprocess::{clahe, ClaheConfig};
use crate::watershed::{mcwt_segment_with, McwtConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Kmeans,
    Gmm,
    Mcwt,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [MethodKind::Kmeans, MethodKind::Gmm, MethodKind::Mcwt];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Kmeans => "kmeans",
            MethodKind::Gmm => "gmm",
            MethodKind::Mcwt => "mcwt",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" | "km" => Ok(MethodKind::Kmeans),
            "gmm" => Ok(MethodKind::Gmm),
            "mcwt" | "watershed" => Ok(MethodKind::Mcwt),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Method {
    Kmeans(KmeansConfig),
    Gmm(GmmConfig),
    Mcwt(McwtConfig),
}

impl Method {
    pub fn kind(&self) -> MethodKind {
        match self {
            Method::Kmeans(_) => MethodKind::Kmeans,
            Method::Gmm(_) => MethodKind::Gmm,
            Method::Mcwt(_) => MethodKind::Mcwt,
        }
    }

    pub fn default_for(kind: MethodKind) -> Self {
        match kind {
            MethodKind::Kmeans => Method::Kmeans(KmeansConfig::default()),
            MethodKind::Gmm => Method::Gmm(GmmConfig::default()),
            MethodKind::Mcwt => Method::Mcwt(McwtConfig::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Method::Kmeans(c) => c.validate(),
            Method::Gmm(c) => c.validate(),
            Method::Mcwt(c) => c.validate(),
        }
    }

    /// Segment an already cropped and enhanced image.
    pub fn run(&self, img: &GrayImage) -> Result<BinaryMask> {
        match self {
            Method::Kmeans(c) => select_lesion_cluster(&kmeans_cluster(img, c)?.labels, img),
            Method::Gmm(c) => select_lesion_cluster(&gmm_segment(img, c)?.labels, img),
            Method::Mcwt(c) => mcwt_segment_with(img, c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    /// `None` skips contrast enhancement.
    pub clahe: Option<ClaheConfig>,
    /// Enhance the whole image before cropping instead of the crop.
    pub before_crop: bool,
}

impl Default for Enhancement {
    fn default() -> Self {
        Self {
            clahe: Some(ClaheConfig::default()),
            before_crop: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub enhancement: Enhancement,
}

impl PipelineConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            enhancement: Enhancement::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        if let Some(c) = &self.enhancement.clahe {
            c.validate()?;
        }
        Ok(())
    }
}

/// Crop, enhance, and segment; the returned mask has the full image's shape
/// with background outside the ROI.
pub fn segment(
    img: &GrayImage,
    roi: Option<RegionOfInterest>,
    cfg: &PipelineConfig,
) -> Result<BinaryMask> {
    cfg.validate()?;
    let roi = roi.unwrap_or_else(|| RegionOfInterest::full(img.width(), img.height()));
    roi.check(img.width(), img.height())?;
    let prepared = match (&cfg.enhancement.clahe, cfg.enhancement.before_crop) {
        (None, _) => crop_roi(img, &roi)?,
        (Some(c), true) => crop_roi(&clahe(img, c)?, &roi)?,
        (Some(c), false) => clahe(&crop_roi(img, &roi)?, c)?,
    };
    let local = cfg.method.run(&prepared)?;
    local.paste_into(img.width(), img.height(), &roi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::dice;
    use crate::phantom::{generate_phantom, Disk, PhantomSpec};

    #[test]
    fn method_names_round_trip() {
        for k in MethodKind::ALL {
            assert_eq!(k.name().parse::<MethodKind>().unwrap(), k);
        }
        assert!("otsu".parse::<MethodKind>().is_err());
    }

    #[test]
    fn roi_mask_is_pasted_back() {
        let spec = PhantomSpec {
            width: 48,
            height: 40,
            lesions: vec![Disk {
                cx: 20.0,
                cy: 18.0,
                r: 6.0,
            }],
            lesion_intensity: 0.85,
            background_intensity: 0.25,
            softness: 0.0,
            noise_sigma: 0.0,
            seed: 0,
        };
        let (img, truth) = generate_phantom(&spec).unwrap();
        let roi = RegionOfInterest {
            x: 8,
            y: 6,
            w: 26,
            h: 26,
        };
        for kind in MethodKind::ALL {
            let cfg = PipelineConfig::new(Method::default_for(kind));
            let mask = segment(&img, Some(roi), &cfg).unwrap();
            assert_eq!(mask.dims(), (48, 40));
            assert!(dice(&mask, &truth).unwrap() >= 0.97, "{kind}");
        }
    }

    #[test]
    fn roi_outside_image() {
        let img = GrayImage::constant(10, 10, 0.5).unwrap();
        let cfg = PipelineConfig::new(Method::default_for(MethodKind::Kmeans));
        let roi = RegionOfInterest {
            x: 5,
            y: 5,
            w: 6,
            h: 2,
        };
        assert!(matches!(
            segment(&img, Some(roi), &cfg),
            Err(Error::RoiOutOfBounds { .. })
        ));
    }
}
