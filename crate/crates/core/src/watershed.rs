//! Marker-controlled watershed.
//!
//! Internal markers are the brightest pixels of the image, grouped into
//! connected components; the external marker is the image border. Regions
//! are grown over the morphological gradient by priority flooding, and every
//! pixel ends up in exactly one region (no watershed-line label).

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage, LabelMap};
use crate::morphology::{morphological_gradient, StructuringElement};

/// Label carried by the external (background) marker.
pub const BACKGROUND: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }
}

/// Neighbors of pixel `p` in a `w x h` grid, in a fixed order.
pub fn neighbors(p: usize, w: usize, h: usize, conn: Connectivity) -> impl Iterator<Item = usize> {
    let (i, j) = ((p % w) as isize, (p / w) as isize);
    conn.offsets().iter().filter_map(move |&(dx, dy)| {
        let (x, y) = (i + dx, j + dy);
        (x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h)
            .then(|| y as usize * w + x as usize)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Marker {
    pub i: usize,
    pub j: usize,
    /// Region label, `>= 1`.
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerSet {
    width: usize,
    height: usize,
    internal: Vec<Marker>,
    external: Vec<(usize, usize)>,
}

impl MarkerSet {
    pub fn new(
        width: usize,
        height: usize,
        internal: Vec<Marker>,
        external: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if internal.is_empty() || external.is_empty() {
            return Err(Error::MarkerConflict(
                "need at least one internal and one external marker".into(),
            ));
        }
        let mut seen = vec![false; width * height];
        let coords = internal
            .iter()
            .map(|m| (m.i, m.j))
            .chain(external.iter().copied());
        for (i, j) in coords {
            if i >= width || j >= height {
                return Err(Error::MarkerConflict(format!(
                    "marker ({i},{j}) outside {width}x{height}"
                )));
            }
            if std::mem::replace(&mut seen[j * width + i], true) {
                return Err(Error::MarkerConflict(format!(
                    "pixel ({i},{j}) marked twice"
                )));
            }
        }
        if internal.iter().any(|m| m.label == BACKGROUND) {
            return Err(Error::MarkerConflict(
                "internal markers need labels >= 1".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            internal,
            external,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn internal(&self) -> &[Marker] {
        &self.internal
    }

    pub fn external(&self) -> &[(usize, usize)] {
        &self.external
    }

    /// Number of distinct internal labels.
    pub fn region_count(&self) -> usize {
        let mut l: Vec<usize> = self.internal.iter().map(|m| m.label).collect();
        l.sort_unstable();
        l.dedup();
        l.len()
    }

    /// Seed label per pixel, `None` where unmarked.
    pub fn seed_labels(&self) -> Vec<Option<usize>> {
        let mut seeds = vec![None; self.width * self.height];
        for m in &self.internal {
            seeds[m.j * self.width + m.i] = Some(m.label);
        }
        for &(i, j) in &self.external {
            seeds[j * self.width + i] = Some(BACKGROUND);
        }
        seeds
    }
}

fn perimeter_len(w: usize, h: usize) -> usize {
    if w == 1 || h == 1 {
        w * h
    } else {
        2 * (w + h) - 4
    }
}

/// Pick the `n` brightest pixels (ties in row-major order) as internal
/// markers. With `merge` set, touching markers (8-connectivity) share one
/// label; otherwise each marker is its own region. Labels are numbered from
/// 1 in row-major order of each region's first pixel. Border pixels that are
/// not internal markers form the external marker.
pub fn select_markers_with(img: &GrayImage, n: usize, merge: bool) -> Result<MarkerSet> {
    let (w, h) = img.dims();
    let limit = img.len() - perimeter_len(w, h);
    if n < 1 || n > limit {
        return Err(Error::Config(format!(
            "marker count {n} outside 1..={limit} for a {w}x{h} image"
        )));
    }
    let px = img.pixels();
    let mut order: Vec<usize> = (0..px.len()).collect();
    // stable: equal intensities keep row-major order
    order.sort_by(|&a, &b| px[b].total_cmp(&px[a]));
    let mut chosen = vec![false; px.len()];
    for &p in &order[..n] {
        chosen[p] = true;
    }

    let mut label = vec![BACKGROUND; px.len()];
    let mut next = 1;
    let mut queue = VecDeque::new();
    for p in 0..px.len() {
        if !chosen[p] || label[p] != BACKGROUND {
            continue;
        }
        label[p] = next;
        if merge {
            queue.push_back(p);
            while let Some(q) = queue.pop_front() {
                for nb in neighbors(q, w, h, Connectivity::Eight) {
                    if chosen[nb] && label[nb] == BACKGROUND {
                        label[nb] = next;
                        queue.push_back(nb);
                    }
                }
            }
        }
        next += 1;
    }

    let internal: Vec<Marker> = (0..px.len())
        .filter(|&p| chosen[p])
        .map(|p| Marker {
            i: p % w,
            j: p / w,
            label: label[p],
        })
        .collect();
    let external: Vec<(usize, usize)> = (0..px.len())
        .map(|p| (p % w, p / w))
        .filter(|&(i, j)| (i == 0 || j == 0 || i + 1 == w || j + 1 == h) && !chosen[j * w + i])
        .collect();
    if external.is_empty() {
        return Err(Error::MarkerConflict(
            "internal markers cover the whole border; no room for the background marker".into(),
        ));
    }
    MarkerSet::new(w, h, internal, external)
}

pub fn select_markers(img: &GrayImage, n: usize) -> Result<MarkerSet> {
    select_markers_with(img, n, true)
}

#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    priority: f64,
    seq: u64,
    pixel: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Flood result plus the sequence of popped priorities.
#[derive(Debug, Clone)]
pub struct FloodTrace {
    pub labels: LabelMap,
    pub popped: Vec<f64>,
}

/// Priority flood from the markers.
///
/// Marker pixels are queued in row-major order at their gradient value. The
/// lowest entry is popped (ties first-in first-out) and each unlabeled
/// neighbor inherits its label, entering the queue at
/// `max(gradient, popped priority)`.
pub fn watershed_flood_traced(
    gradient: &GrayImage,
    markers: &MarkerSet,
    conn: Connectivity,
) -> Result<FloodTrace> {
    if gradient.dims() != markers.dims() {
        return Err(Error::shape(gradient.dims(), markers.dims()));
    }
    let (w, h) = gradient.dims();
    let g = gradient.pixels();
    let mut labels = markers.seed_labels();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for (p, l) in labels.iter().enumerate() {
        if l.is_some() {
            heap.push(Reverse(QueueEntry {
                priority: g[p],
                seq,
                pixel: p,
            }));
            seq += 1;
        }
    }
    let mut popped = Vec::with_capacity(w * h);
    while let Some(Reverse(e)) = heap.pop() {
        popped.push(e.priority);
        let lab = labels[e.pixel];
        for nb in neighbors(e.pixel, w, h, conn) {
            if labels[nb].is_none() {
                labels[nb] = lab;
                heap.push(Reverse(QueueEntry {
                    priority: g[nb].max(e.priority),
                    seq,
                    pixel: nb,
                }));
                seq += 1;
            }
        }
    }
    let labels: Vec<usize> = labels
        .into_iter()
        .map(|l| l.expect("grid is connected, flood reaches every pixel"))
        .collect();
    Ok(FloodTrace {
        labels: LabelMap::new(w, h, labels)?,
        popped,
    })
}

pub fn watershed_flood(
    gradient: &GrayImage,
    markers: &MarkerSet,
    conn: Connectivity,
) -> Result<LabelMap> {
    watershed_flood_traced(gradient, markers, conn).map(|t| t.labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McwtConfig {
    pub markers: usize,
    pub se_radius: usize,
    pub merge_markers: bool,
}

impl Default for McwtConfig {
    fn default() -> Self {
        Self {
            markers: 45,
            se_radius: 1,
            merge_markers: true,
        }
    }
}

impl McwtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.markers < 1 {
            return Err(Error::Config("watershed needs at least one marker".into()));
        }
        StructuringElement::square(self.se_radius).map(|_| ())
    }
}

/// Full pipeline: gradient, markers, 8-connected flood; foreground is every
/// region grown from an internal marker.
pub fn mcwt_segment_with(img: &GrayImage, cfg: &McwtConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    let se = StructuringElement::square(cfg.se_radius)?;
    let gradient = morphological_gradient(img, &se);
    let markers = select_markers_with(img, cfg.markers, cfg.merge_markers)?;
    let labels = watershed_flood(&gradient, &markers, Connectivity::Eight)?;
    BinaryMask::new(
        img.width(),
        img.height(),
        labels.labels().iter().map(|&l| l != BACKGROUND).collect(),
    )
}

pub fn mcwt_segment(
    img: &GrayImage,
    n_markers: usize,
    se: &StructuringElement,
) -> Result<BinaryMask> {
    mcwt_segment_with(
        img,
        &McwtConfig {
            markers: n_markers,
            se_radius: se.radius(),
            merge_markers: true,
        },
    )
}
