//! Flow fields, block-matching optical flow and synthetic flow sequences.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;

/// A 2-D motion vector `(vx, vy)`.
pub type Vec2 = [f64; 2];

/// Dense grid of motion vectors for one frame.
///
/// Cells without a flow vector have `presence == false` and carry `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<Vec2>,
    presence: Vec<bool>,
}

impl FlowField {
    pub fn empty(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            vectors: vec![[0.0, 0.0]; width * height],
            presence: vec![false; width * height],
        }
    }

    /// Builds a field from row-major grids. Absent cells must hold `(0, 0)`.
    pub fn from_parts(width: usize, height: usize, vectors: Vec<Vec2>, presence: Vec<bool>) -> Result<Self> {
        let cells = width * height;
        if vectors.len() != cells || presence.len() != cells {
            return Err(Error::invalid(format!(
                "flow grids must have {width}x{height}={cells} cells, got {} vectors and {} presence flags",
                vectors.len(),
                presence.len()
            )));
        }
        if let Some(idx) = (0..cells).find(|&i| !presence[i] && vectors[i] != [0.0, 0.0]) {
            return Err(Error::invalid(format!(
                "absent cell ({}, {}) carries a nonzero vector",
                idx % width,
                idx / width
            )));
        }
        if vectors.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("flow vectors must be finite"));
        }
        Ok(FlowField {
            width,
            height,
            vectors,
            presence,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub(crate) fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// The vector at `(x, y)`, or `None` if no flow exists there.
    pub fn get(&self, x: usize, y: usize) -> Option<Vec2> {
        let i = self.index(x, y);
        self.presence[i].then_some(self.vectors[i])
    }

    pub fn is_present(&self, x: usize, y: usize) -> bool {
        self.presence[self.index(x, y)]
    }

    /// Marks `(x, y)` present with vector `v`.
    pub fn set(&mut self, x: usize, y: usize, v: Vec2) {
        let i = self.index(x, y);
        self.vectors[i] = v;
        self.presence[i] = true;
    }

    pub fn clear(&mut self, x: usize, y: usize) {
        let i = self.index(x, y);
        self.vectors[i] = [0.0, 0.0];
        self.presence[i] = false;
    }

    /// Row-major vector grid.
    pub fn vectors(&self) -> &[Vec2] {
        &self.vectors
    }

    /// Row-major presence mask.
    pub fn presence(&self) -> &[bool] {
        &self.presence
    }

    /// Present cells as `(x, y, vector)` in raster order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, Vec2)> + '_ {
        (0..self.vectors.len())
            .filter(|&i| self.presence[i])
            .map(|i| (i % self.width, i / self.width, self.vectors[i]))
    }

    pub fn present_count(&self) -> usize {
        self.presence.iter().filter(|&&p| p).count()
    }

    /// Multiplies every vector by `factor` (used to turn per-frame
    /// displacements into velocities).
    pub fn scaled(&self, factor: f64) -> FlowField {
        let mut out = self.clone();
        for v in &mut out.vectors {
            v[0] *= factor;
            v[1] *= factor;
        }
        out
    }
}

/// Ordered flow fields sharing one size, sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSequence {
    frames: Vec<FlowField>,
    dt: f64,
    pub metadata: BTreeMap<String, String>,
}

impl FlowSequence {
    pub fn new(frames: Vec<FlowField>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if let Some(first) = frames.first() {
            let dims = first.dims();
            if let Some(i) = frames.iter().position(|f| f.dims() != dims) {
                return Err(Error::invalid(format!(
                    "frame {i} is {:?} but frame 0 is {:?}",
                    frames[i].dims(),
                    dims
                )));
            }
        }
        Ok(FlowSequence {
            frames,
            dt,
            metadata: BTreeMap::new(),
        })
    }

    pub fn frames(&self) -> &[FlowField] {
        &self.frames
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(width, height)` of the frames, `None` for an empty sequence.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(FlowField::dims)
    }

    pub fn push(&mut self, frame: FlowField) -> Result<()> {
        if let Some(dims) = self.dims() {
            if frame.dims() != dims {
                return Err(Error::invalid(format!(
                    "frame is {:?}, sequence is {:?}",
                    frame.dims(),
                    dims
                )));
            }
        }
        self.frames.push(frame);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&FlowsFile::from(self)).expect("flow sequence serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FlowsFile = serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        file.try_into()
    }

    /// Writes the `.flows` JSON representation (present cells only).
    pub fn save(&self, path: &Path) -> Result<()> {
        json::write(path, &FlowsFile::from(self))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: FlowsFile = json::read(path)?;
        file.try_into().map_err(|e| match e {
            Error::InvalidInput(msg) => Error::InvalidInput(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FlowsFile {
    width: usize,
    height: usize,
    dt: f64,
    frames: Vec<FrameCells>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct FrameCells {
    cells: Vec<(usize, usize, f64, f64)>,
}

impl From<&FlowSequence> for FlowsFile {
    fn from(seq: &FlowSequence) -> Self {
        let (width, height) = seq.dims().unwrap_or((0, 0));
        FlowsFile {
            width,
            height,
            dt: seq.dt,
            frames: seq
                .frames
                .iter()
                .map(|f| FrameCells {
                    cells: f.cells().map(|(x, y, v)| (x, y, v[0], v[1])).collect(),
                })
                .collect(),
            metadata: seq.metadata.clone(),
        }
    }
}

impl TryFrom<FlowsFile> for FlowSequence {
    type Error = Error;

    fn try_from(file: FlowsFile) -> Result<Self> {
        let mut frames = Vec::with_capacity(file.frames.len());
        for (fi, frame) in file.frames.into_iter().enumerate() {
            let mut field = FlowField::empty(file.width, file.height);
            for (x, y, vx, vy) in frame.cells {
                if x >= file.width || y >= file.height {
                    return Err(Error::invalid(format!(
                        "frame {fi}: cell ({x}, {y}) outside {}x{}",
                        file.width, file.height
                    )));
                }
                if field.is_present(x, y) {
                    return Err(Error::invalid(format!("frame {fi}: duplicate cell ({x}, {y})")));
                }
                if !(vx.is_finite() && vy.is_finite()) {
                    return Err(Error::invalid(format!("frame {fi}: non-finite vector at ({x}, {y})")));
                }
                field.set(x, y, [vx, vy]);
            }
            frames.push(field);
        }
        let mut seq = FlowSequence::new(frames, file.dt)?;
        seq.metadata = file.metadata;
        Ok(seq)
    }
}

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    intensity: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, intensity: Vec<f64>) -> Result<Self> {
        if intensity.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} intensities for {width}x{height}, got {}",
                width * height,
                intensity.len()
            )));
        }
        if intensity.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("intensities must lie in [0, 1]"));
        }
        Ok(GrayFrame {
            width,
            height,
            intensity,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let intensity = (0..width * height).map(|i| f(i % width, i / width)).collect();
        GrayFrame::new(width, height, intensity)
    }

    /// Reads a binary (P5) or ASCII (P2) PGM file.
    pub fn load_pgm(path: &Path) -> Result<Self> {
        let img = image::ImageReader::open(path)
            .map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?
            .with_guessed_format()
            .map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?
            .decode()
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?;
        let luma = img.to_luma32f();
        let (w, h) = luma.dimensions();
        let intensity = luma
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v).clamp(0.0, 1.0))
            .collect();
        GrayFrame::new(w as usize, h as usize, intensity)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.intensity[y * self.width + x]
    }
}

/// Block-matching parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    /// Half-size of the correlation block.
    pub block_radius: usize,
    /// Largest integer displacement searched in each axis.
    pub search_radius: usize,
    /// Block intensity variance below which no flow is reported.
    pub min_texture: f64,
    /// Displacements shorter than this are reported as absent.
    pub magnitude_floor: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            block_radius: 2,
            search_radius: 3,
            min_texture: 1e-4,
            magnitude_floor: 0.5,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.block_radius < 1 || self.search_radius < 1 {
            return Err(Error::invalid("block_radius and search_radius must be >= 1"));
        }
        if !(self.min_texture >= 0.0) || !(self.magnitude_floor >= 0.0) {
            return Err(Error::invalid("min_texture and magnitude_floor must be >= 0"));
        }
        Ok(())
    }
}

/// Optical flow from `a` to `b` by exhaustive SSD block matching over
/// integer displacements.
///
/// Vectors are displacements per frame (dt = 1); divide by the real sampling
/// interval to get pixels/second. Only interior pixels, where both the block
/// and every displaced block fit in the frame, can carry flow. Among equal
/// SSD minima the shortest displacement wins, then the first in raster order.
pub fn compute_flow(a: &GrayFrame, b: &GrayFrame, p: &FlowParams) -> Result<FlowField> {
    p.validate()?;
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::invalid(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let margin = p.block_radius + p.search_radius;
    let min_side = 2 * margin + 1;
    if a.width < min_side || a.height < min_side {
        return Err(Error::invalid(format!(
            "{}x{} frame is too small for block radius {} and search radius {} (need {min_side})",
            a.width, a.height, p.block_radius, p.search_radius
        )));
    }

    let (w, h) = (a.width, a.height);
    let r = p.block_radius as isize;
    let s = p.search_radius as isize;
    let block_len = ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut field = FlowField::empty(w, h);

    for y in margin..h - margin {
        for x in margin..w - margin {
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for by in -r..=r {
                for bx in -r..=r {
                    let v = a.at((x as isize + bx) as usize, (y as isize + by) as usize);
                    sum += v;
                    sum_sq += v * v;
                }
            }
            let mean = sum / block_len;
            let variance = sum_sq / block_len - mean * mean;
            if variance < p.min_texture {
                continue;
            }

            let mut best = (f64::INFINITY, isize::MAX, 0isize, 0isize);
            for dy in -s..=s {
                for dx in -s..=s {
                    let mut ssd = 0.0;
                    for by in -r..=r {
                        for bx in -r..=r {
                            let ax = (x as isize + bx) as usize;
                            let ay = (y as isize + by) as usize;
                            let d = a.at(ax, ay) - b.at((ax as isize + dx) as usize, (ay as isize + dy) as usize);
                            ssd += d * d;
                        }
                    }
                    let len2 = dx * dx + dy * dy;
                    if ssd < best.0 || (ssd == best.0 && len2 < best.1) {
                        best = (ssd, len2, dx, dy);
                    }
                }
            }
            let v = [best.2 as f64, best.3 as f64];
            if (v[0] * v[0] + v[1] * v[1]).sqrt() >= p.magnitude_floor {
                field.set(x, y, v);
            }
        }
    }
    Ok(field)
}

/// Computes flow between each consecutive pair of frames and rescales the
/// displacements by `1 / dt`.
pub fn flow_sequence(frames: &[GrayFrame], dt: f64, p: &FlowParams) -> Result<FlowSequence> {
    if frames.len() < 2 {
        return Err(Error::invalid("need at least two frames to compute flow"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let fields = frames
        .windows(2)
        .map(|pair| compute_flow(&pair[0], &pair[1], p).map(|f| f.scaled(1.0 / dt)))
        .collect::<Result<Vec<_>>>()?;
    FlowSequence::new(fields, dt)
}

/// Angle in degrees between two nonzero vectors, in `[0, 180]`.
pub fn angle_between(u: Vec2, v: Vec2) -> Result<f64> {
    let nu = u[0].hypot(u[1]);
    let nv = v[0].hypot(v[1]);
    if !(nu > 0.0 && nv > 0.0) {
        return Err(Error::invalid("angle undefined for zero-magnitude vectors"));
    }
    let cos = ((u[0] * v[0] + u[1] * v[1]) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// One moving disc in a synthetic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobTrack {
    /// Disc center at the first active frame.
    pub start: Vec2,
    /// Velocity (pixels/second) for each active frame; the last entry
    /// repeats if the schedule is shorter than the active interval.
    pub velocities: Vec<Vec2>,
    pub radius: f64,
    /// Inclusive `[first, last]` frame interval.
    pub active: [usize; 2],
}

impl BlobTrack {
    /// A disc moving at constant velocity over `[first, last]`.
    pub fn constant(start: Vec2, velocity: Vec2, radius: f64, first: usize, last: usize) -> Self {
        BlobTrack {
            start,
            velocities: vec![velocity],
            radius,
            active: [first, last],
        }
    }

    fn velocity_at(&self, offset: usize) -> Vec2 {
        self.velocities[offset.min(self.velocities.len() - 1)]
    }
}

/// Description of a synthetic flow sequence made of moving discs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGestureSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub dt: f64,
    /// Amplitude of uniform per-component noise added to blob vectors.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub blobs: Vec<BlobTrack>,
}

impl SyntheticGestureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("canvas must be non-empty"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::invalid("noise amplitude must be >= 0"));
        }
        for (i, b) in self.blobs.iter().enumerate() {
            if !(b.radius >= 1.0) {
                return Err(Error::invalid(format!("blob {i}: radius must be >= 1")));
            }
            if b.velocities.is_empty() {
                return Err(Error::invalid(format!("blob {i}: empty velocity schedule")));
            }
            let [first, last] = b.active;
            if first > last || last >= self.frames {
                return Err(Error::invalid(format!(
                    "blob {i}: active interval [{first}, {last}] outside {} frames",
                    self.frames
                )));
            }
        }
        Ok(())
    }
}

/// Renders a [`SyntheticGestureSpec`]. Where blobs overlap, the later blob
/// in the list wins.
pub fn synthesize(spec: &SyntheticGestureSpec) -> Result<FlowSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut frames = Vec::with_capacity(spec.frames);

    for f in 0..spec.frames {
        let mut field = FlowField::empty(spec.width, spec.height);
        for blob in &spec.blobs {
            let [first, last] = blob.active;
            if f < first || f > last {
                continue;
            }
            let mut center = blob.start;
            for t in 0..f - first {
                let v = blob.velocity_at(t);
                center[0] += v[0] * spec.dt;
                center[1] += v[1] * spec.dt;
            }
            let vel = blob.velocity_at(f - first);
            let r = blob.radius;
            let lo_x = (center[0] - r).floor().max(0.0);
            let hi_x = (center[0] + r).ceil().min(spec.width as f64 - 1.0);
            let lo_y = (center[1] - r).floor().max(0.0);
            let hi_y = (center[1] + r).ceil().min(spec.height as f64 - 1.0);
            if lo_x > hi_x || lo_y > hi_y {
                continue;
            }
            for y in lo_y as usize..=hi_y as usize {
                for x in lo_x as usize..=hi_x as usize {
                    let dx = x as f64 - center[0];
                    let dy = y as f64 - center[1];
                    if dx * dx + dy * dy > r * r {
                        continue;
                    }
                    let mut v = vel;
                    if spec.noise > 0.0 {
                        v[0] += rng.random_range(-spec.noise..=spec.noise);
                        v[1] += rng.random_range(-spec.noise..=spec.noise);
                    }
                    field.set(x, y, v);
                }
            }
        }
        frames.push(field);
    }
    FlowSequence::new(frames, spec.dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize, seed: u64) -> GrayFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
        GrayFrame::new(w, h, v).unwrap()
    }

    #[test]
    fn identical_frames_give_no_flow() {
        let a = textured(20, 20, 1);
        let f = compute_flow(&a, &a, &FlowParams::default()).unwrap();
        assert_eq!(f.present_count(), 0);

        let zero_floor = FlowParams {
            magnitude_floor: 0.0,
            ..FlowParams::default()
        };
        let f = compute_flow(&a, &a, &zero_floor).unwrap();
        assert!(f.present_count() > 0);
        assert!(f.cells().all(|(_, _, v)| v == [0.0, 0.0]));
    }

    #[test]
    fn translated_frame_recovers_shift() {
        let a = textured(24, 24, 7);
        let b = GrayFrame::from_fn(24, 24, |x, y| if x >= 2 { a.at(x - 2, y) } else { 0.5 }).unwrap();
        let p = FlowParams::default();
        let f = compute_flow(&a, &b, &p).unwrap();
        let margin = p.block_radius + p.search_radius;
        // pixels whose displaced block stays inside copied content
        for y in margin..24 - margin {
            for x in margin..24 - margin - 2 {
                let v = f.get(x, y).expect("textured interior pixel has flow");
                assert!((v[0] - 2.0).abs() <= 0.5 && v[1].abs() <= 0.5, "({x},{y}) -> {v:?}");
            }
        }
    }

    #[test]
    fn too_small_frame_is_rejected() {
        let a = textured(4, 4, 3);
        let p = FlowParams {
            block_radius: 3,
            ..FlowParams::default()
        };
        assert!(matches!(compute_flow(&a, &a, &p), Err(Error::InvalidInput(_))));
        let b = textured(5, 4, 3);
        assert!(matches!(
            compute_flow(&a, &b, &FlowParams::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn flat_frames_carry_no_flow() {
        let a = GrayFrame::from_fn(16, 16, |_, _| 0.3).unwrap();
        let f = compute_flow(
            &a,
            &a,
            &FlowParams {
                magnitude_floor: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(f.present_count(), 0);
    }

    #[test]
    fn angles() {
        assert!((angle_between([1.0, 0.0], [0.0, 1.0]).unwrap() - 90.0).abs() < 1e-12);
        assert!(angle_between([1.0, 0.0], [2.0, 0.0]).unwrap().abs() < 1e-12);
        assert!((angle_between([1.0, 0.0], [-1.0, 1.0]).unwrap() - 135.0).abs() < 1e-12);
        assert!(angle_between([0.0, 0.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn synth_single_blob() {
        let spec = SyntheticGestureSpec {
            width: 30,
            height: 20,
            frames: 5,
            dt: 1.0,
            noise: 0.0,
            seed: 0,
            blobs: vec![BlobTrack::constant([5.0, 10.0], [3.0, 0.0], 2.0, 0, 4)],
        };
        let seq = synthesize(&spec).unwrap();
        assert_eq!(seq.len(), 5);
        for (i, frame) in seq.frames().iter().enumerate() {
            // radius-2 disc on integer center: 13 cells
            assert_eq!(frame.present_count(), 13);
            assert!(frame.cells().all(|(_, _, v)| v == [3.0, 0.0]));
            assert!(frame.is_present(5 + 3 * i, 10));
        }
    }

    #[test]
    fn synth_zero_blobs_is_empty() {
        let spec = SyntheticGestureSpec {
            width: 8,
            height: 8,
            frames: 3,
            dt: 0.5,
            noise: 1.0,
            seed: 9,
            blobs: vec![],
        };
        let seq = synthesize(&spec).unwrap();
        assert_eq!(seq.len(), 3);
        assert!(seq.frames().iter().all(|f| f.present_count() == 0));
    }

    #[test]
    fn synth_opposite_blobs() {
        let spec = SyntheticGestureSpec {
            width: 40,
            height: 20,
            frames: 4,
            dt: 1.0,
            noise: 0.0,
            seed: 0,
            blobs: vec![
                BlobTrack::constant([10.0, 10.0], [-2.0, 0.0], 3.0, 0, 3),
                BlobTrack::constant([28.0, 10.0], [2.0, 0.0], 3.0, 0, 3),
            ],
        };
        let seq = synthesize(&spec).unwrap();
        for frame in seq.frames() {
            let left: Vec<_> = frame.cells().filter(|c| c.0 < 20).collect();
            let right: Vec<_> = frame.cells().filter(|c| c.0 >= 20).collect();
            assert!(!left.is_empty() && !right.is_empty());
            for (_, _, l) in &left {
                for (_, _, r) in &right {
                    assert!((angle_between(*l, *r).unwrap() - 180.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn synth_later_blob_wins_overlap() {
        let spec = SyntheticGestureSpec {
            width: 10,
            height: 10,
            frames: 1,
            dt: 1.0,
            noise: 0.0,
            seed: 0,
            blobs: vec![
                BlobTrack::constant([5.0, 5.0], [1.0, 0.0], 2.0, 0, 0),
                BlobTrack::constant([5.0, 5.0], [0.0, 1.0], 1.0, 0, 0),
            ],
        };
        let seq = synthesize(&spec).unwrap();
        assert_eq!(seq.frames()[0].get(5, 5), Some([0.0, 1.0]));
        assert_eq!(seq.frames()[0].get(3, 5), Some([1.0, 0.0]));
    }

    #[test]
    fn synth_noise_is_seeded() {
        let mut spec = SyntheticGestureSpec {
            width: 20,
            height: 20,
            frames: 3,
            dt: 1.0,
            noise: 0.5,
            seed: 42,
            blobs: vec![BlobTrack::constant([8.0, 8.0], [2.0, 1.0], 3.0, 0, 2)],
        };
        let a = synthesize(&spec).unwrap();
        assert_eq!(a, synthesize(&spec).unwrap());
        for (_, _, v) in a.frames()[0].cells() {
            assert!((v[0] - 2.0).abs() <= 0.5 && (v[1] - 1.0).abs() <= 0.5);
        }
        spec.seed = 43;
        assert_ne!(a, synthesize(&spec).unwrap());
    }

    #[test]
    fn synth_rejects_bad_intervals() {
        let spec = SyntheticGestureSpec {
            width: 10,
            height: 10,
            frames: 3,
            dt: 1.0,
            noise: 0.0,
            seed: 0,
            blobs: vec![BlobTrack::constant([5.0, 5.0], [1.0, 0.0], 2.0, 1, 3)],
        };
        assert!(synthesize(&spec).is_err());
    }

    #[test]
    fn flows_json_rejects_out_of_bounds() {
        let text = r#"{"width":2,"height":2,"dt":1.0,"frames":[{"cells":[[2,0,1.0,0.0]]}]}"#;
        assert!(FlowSequence::from_json(text).is_err());
        let text = r#"{"width":2,"height":2,"dt":0.0,"frames":[]}"#;
        assert!(FlowSequence::from_json(text).is_err());
    }

    #[test]
    fn from_parts_checks_invariants() {
        assert!(FlowField::from_parts(2, 1, vec![[0.0, 0.0]; 2], vec![false; 2]).is_ok());
        assert!(FlowField::from_parts(2, 1, vec![[1.0, 0.0], [0.0, 0.0]], vec![false; 2]).is_err());
        assert!(FlowField::from_parts(2, 2, vec![[0.0, 0.0]; 2], vec![false; 2]).is_err());
    }
}
