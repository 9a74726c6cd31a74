//! Partial action extraction from a flow sequence.
//!
//! Each frame is labeled by growing 8-connected regions of flow vectors whose
//! directions agree within `angle_threshold`. Labels are carried forward in
//! time by following each vector to where it points in the next frame; the
//! next frame's labeling then grows from those seeds before fresh labels are
//! handed out. Every label is finally cut out per frame, short-lived labels
//! are dropped, and the survivors are superimposed into one image each.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{angle_between, FlowField, FlowSequence, Vec2};
use crate::json;

/// How the per-frame images of one label are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Superposition {
    /// A cell keeps the vector from the first frame that occupied it.
    #[default]
    EarliestWins,
    /// A cell keeps the vector from the last frame that occupied it.
    LatestWins,
    /// A cell holds the mean of every vector that landed on it.
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    /// Largest angle (degrees) between two vectors that may share a label.
    pub angle_threshold: f64,
    /// Labels seen in fewer frames than this are discarded as noise.
    pub min_frames: usize,
    pub superposition: Superposition,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            angle_threshold: 45.0,
            min_frames: 3,
            superposition: Superposition::EarliestWins,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_threshold > 0.0 && self.angle_threshold <= 180.0) {
            return Err(Error::invalid(format!(
                "angle_threshold must be in (0, 180], got {}",
                self.angle_threshold
            )));
        }
        if self.min_frames < 1 {
            return Err(Error::invalid("min_frames must be >= 1"));
        }
        Ok(())
    }

    fn compatible(&self, u: Vec2, v: Vec2) -> bool {
        // zero vectors have no direction and never join a neighbor
        angle_between(u, v).is_ok_and(|a| a <= self.angle_threshold + 1e-9)
    }
}

/// A flow field with one label per cell; `0` means unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFlowField {
    flow: FlowField,
    labels: Vec<u32>,
}

impl LabeledFlowField {
    pub fn flow(&self) -> &FlowField {
        &self.flow
    }

    /// Row-major label grid.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[self.flow.index(x, y)]
    }

    /// Distinct nonzero labels in ascending order.
    pub fn distinct_labels(&self) -> Vec<u32> {
        let mut ls: Vec<u32> = self.labels.iter().copied().filter(|&l| l > 0).collect();
        ls.sort_unstable();
        ls.dedup();
        ls
    }
}

const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

fn grow(flow: &FlowField, labels: &mut [u32], start: usize, params: &SegmentationParams) {
    let (w, h) = flow.dims();
    let label = labels[start];
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        let v = flow.vectors()[i];
        for (dx, dy) in NEIGHBOURS {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if labels[j] == 0 && flow.presence()[j] && params.compatible(v, flow.vectors()[j]) {
                labels[j] = label;
                queue.push_back(j);
            }
        }
    }
}

/// Labels one frame.
///
/// Seeded labels are grown first, in raster order of their seed cells; then
/// every still-unlabeled present vector starts a fresh label taken from
/// `next_label`, which is advanced past each id handed out. Seeds on cells
/// without flow are ignored.
pub fn spatial_label(
    flow: &FlowField,
    seeds: Option<&[u32]>,
    params: &SegmentationParams,
    next_label: &mut u32,
) -> Result<LabeledFlowField> {
    params.validate()?;
    let n = flow.width() * flow.height();
    let mut labels = vec![0u32; n];
    if let Some(seeds) = seeds {
        if seeds.len() != n {
            return Err(Error::invalid(format!(
                "seed grid has {} cells, flow has {n}",
                seeds.len()
            )));
        }
        for i in 0..n {
            if flow.presence()[i] {
                labels[i] = seeds[i];
            }
        }
        let seeded: Vec<usize> = (0..n).filter(|&i| labels[i] > 0).collect();
        for i in seeded {
            grow(flow, &mut labels, i, params);
        }
    }
    for i in 0..n {
        if flow.presence()[i] && labels[i] == 0 {
            labels[i] = *next_label;
            *next_label += 1;
            grow(flow, &mut labels, i, params);
        }
    }
    Ok(LabeledFlowField {
        flow: flow.clone(),
        labels,
    })
}

/// Carries labels from one frame into the next.
///
/// A labeled vector `v` at `(x, y)` seeds the cell nearest to
/// `(x + vx·dt, y + vy·dt)` in `next` when that cell has flow within the
/// angle threshold of `v`. Targets outside the frame are skipped; when two
/// labels hit the same cell the lower id wins.
pub fn propagate_labels(
    labeled: &LabeledFlowField,
    next: &FlowField,
    dt: f64,
    params: &SegmentationParams,
) -> Result<Vec<u32>> {
    if labeled.flow.dims() != next.dims() {
        return Err(Error::invalid(format!(
            "labeled frame is {:?}, next frame is {:?}",
            labeled.flow.dims(),
            next.dims()
        )));
    }
    let (w, h) = next.dims();
    let mut seeds = vec![0u32; w * h];
    for (x, y, v) in labeled.flow.cells() {
        let label = labeled.label(x, y);
        if label == 0 {
            continue;
        }
        let tx = (x as f64 + v[0] * dt).round();
        let ty = (y as f64 + v[1] * dt).round();
        if !(tx >= 0.0 && ty >= 0.0 && tx < w as f64 && ty < h as f64) {
            continue;
        }
        let (tx, ty) = (tx as usize, ty as usize);
        let Some(u) = next.get(tx, ty) else { continue };
        if !params.compatible(v, u) {
            continue;
        }
        let slot = &mut seeds[ty * w + tx];
        if *slot == 0 || label < *slot {
            *slot = label;
        }
    }
    Ok(seeds)
}

/// Labels every frame of `seq`, carrying labels forward frame to frame.
/// Label ids are contiguous from 1 across the whole sequence.
pub fn label_sequence(seq: &FlowSequence, params: &SegmentationParams) -> Result<Vec<LabeledFlowField>> {
    params.validate()?;
    let mut next_label = 1u32;
    let mut out: Vec<LabeledFlowField> = Vec::with_capacity(seq.len());
    for frame in seq.frames() {
        let seeds = match out.last() {
            Some(prev) => Some(propagate_labels(prev, frame, seq.dt(), params)?),
            None => None,
        };
        out.push(spatial_label(frame, seeds.as_deref(), params, &mut next_label)?);
    }
    Ok(out)
}

/// One label's flow vectors from all of its frames combined into one image.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialActionImage {
    pub label: u32,
    field: FlowField,
    /// First and last frame (inclusive) in which the label appears.
    pub frame_span: (usize, usize),
}

impl PartialActionImage {
    pub fn new(label: u32, field: FlowField, frame_span: (usize, usize)) -> Result<Self> {
        if field.present_count() == 0 {
            return Err(Error::invalid(format!("partial action {label} has no flow")));
        }
        if frame_span.0 > frame_span.1 {
            return Err(Error::invalid(format!(
                "partial action {label}: frame span {frame_span:?} is reversed"
            )));
        }
        Ok(PartialActionImage {
            label,
            field,
            frame_span,
        })
    }

    pub fn field(&self) -> &FlowField {
        &self.field
    }

    pub fn width(&self) -> usize {
        self.field.width()
    }

    pub fn height(&self) -> usize {
        self.field.height()
    }
}

/// Partial action images in ascending label order.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialActionSequence {
    pub actions: Vec<PartialActionImage>,
    pub dt: f64,
}

impl PartialActionSequence {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        json::write(path, &PasFile::from(self))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: PasFile = json::read(path)?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct PasFile {
    dt: f64,
    width: usize,
    height: usize,
    actions: Vec<PasAction>,
}

#[derive(Serialize, Deserialize)]
struct PasAction {
    label: u32,
    frame_span: (usize, usize),
    cells: Vec<(usize, usize, f64, f64)>,
}

impl From<&PartialActionSequence> for PasFile {
    fn from(seq: &PartialActionSequence) -> Self {
        let (width, height) = seq.actions.first().map_or((0, 0), |a| a.field.dims());
        PasFile {
            dt: seq.dt,
            width,
            height,
            actions: seq
                .actions
                .iter()
                .map(|a| PasAction {
                    label: a.label,
                    frame_span: a.frame_span,
                    cells: a.field.cells().map(|(x, y, v)| (x, y, v[0], v[1])).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<PasFile> for PartialActionSequence {
    type Error = Error;

    fn try_from(file: PasFile) -> Result<Self> {
        let mut actions = Vec::with_capacity(file.actions.len());
        for a in file.actions {
            let mut field = FlowField::empty(file.width, file.height);
            for (x, y, vx, vy) in a.cells {
                if x >= file.width || y >= file.height {
                    return Err(Error::invalid(format!(
                        "action {}: cell ({x}, {y}) out of bounds",
                        a.label
                    )));
                }
                field.set(x, y, [vx, vy]);
            }
            actions.push(PartialActionImage::new(a.label, field, a.frame_span)?);
        }
        if actions.windows(2).any(|p| p[0].label >= p[1].label) {
            return Err(Error::invalid("partial actions must be in ascending label order"));
        }
        Ok(PartialActionSequence { actions, dt: file.dt })
    }
}

/// Turns a flow sequence into its partial action sequence.
///
/// An empty result (every label pruned) is valid.
pub fn segment(seq: &FlowSequence, params: &SegmentationParams) -> Result<PartialActionSequence> {
    if seq.is_empty() {
        return Err(Error::invalid("cannot segment an empty flow sequence"));
    }
    let labeled = label_sequence(seq, params)?;
    let (w, h) = seq.dims().expect("non-empty");

    // label -> frames in which it appears, in time order
    let mut occurrences: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (fi, frame) in labeled.iter().enumerate() {
        for label in frame.distinct_labels() {
            occurrences.entry(label).or_default().push(fi);
        }
    }

    let mut actions = Vec::new();
    for (label, frames) in occurrences {
        if frames.len() < params.min_frames {
            continue;
        }
        let mut sum = vec![[0.0f64; 2]; w * h];
        let mut count = vec![0u32; w * h];
        let mut field = FlowField::empty(w, h);
        for &fi in &frames {
            let frame = &labeled[fi];
            for (i, &l) in frame.labels.iter().enumerate() {
                if l != label {
                    continue;
                }
                let v = frame.flow.vectors()[i];
                let (x, y) = (i % w, i / w);
                match params.superposition {
                    Superposition::EarliestWins => {
                        if !field.is_present(x, y) {
                            field.set(x, y, v);
                        }
                    }
                    Superposition::LatestWins => field.set(x, y, v),
                    Superposition::Average => {
                        sum[i][0] += v[0];
                        sum[i][1] += v[1];
                        count[i] += 1;
                    }
                }
            }
        }
        if params.superposition == Superposition::Average {
            for (i, &c) in count.iter().enumerate() {
                if c > 0 {
                    let c = f64::from(c);
                    field.set(i % w, i / w, [sum[i][0] / c, sum[i][1] / c]);
                }
            }
        }
        let span = (frames[0], *frames.last().expect("non-empty"));
        actions.push(PartialActionImage::new(label, field, span)?);
    }

    Ok(PartialActionSequence { actions, dt: seq.dt() })
}
