use std::collections::BTreeSet;

use flowseq_core::flow::{synthesize, BlobTrack, FlowField, FlowSequence, SyntheticGestureSpec};
use flowseq_core::segmentation::{label_sequence, segment, spatial_label, SegmentationParams, Superposition};
use proptest::prelude::*;

const W: usize = 12;
const H: usize = 9;

/// Sparse random field; directions come from a few headings so that both
/// compatible and incompatible neighbours are common.
fn field() -> impl Strategy<Value = FlowField> {
    prop::collection::vec(prop::option::weighted(0.6, (0usize..8, 1.0..20.0f64)), W * H).prop_map(|cells| {
        let mut f = FlowField::empty(W, H);
        for (i, c) in cells.into_iter().enumerate() {
            if let Some((heading, mag)) = c {
                let t = heading as f64 * std::f64::consts::FRAC_PI_4;
                f.set(i % W, i / W, [mag * t.cos(), mag * t.sin()]);
            }
        }
        f
    })
}

fn sequence() -> impl Strategy<Value = FlowSequence> {
    (prop::collection::vec(field(), 1..6), 0.01..0.3f64).prop_map(|(frames, dt)| FlowSequence::new(frames, dt).unwrap())
}

fn neighbours(x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> {
    (-1isize..=1)
        .flat_map(|dy| (-1isize..=1).map(move |dx| (dx, dy)))
        .filter(|&d| d != (0, 0))
        .map(move |(dx, dy)| (x as isize + dx, y as isize + dy))
        .filter(|&(a, b)| a >= 0 && b >= 0 && (a as usize) < W && (b as usize) < H)
        .map(|(a, b)| (a as usize, b as usize))
}

fn angle(u: [f64; 2], v: [f64; 2]) -> f64 {
    let c = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn labels_cover_exactly_the_present_cells(seq in sequence()) {
        let params = SegmentationParams::default();
        let labeled = label_sequence(&seq, &params).unwrap();
        let mut seen = BTreeSet::new();
        for (lf, f) in labeled.iter().zip(seq.frames()) {
            for y in 0..H {
                for x in 0..W {
                    prop_assert_eq!(lf.label(x, y) != 0, f.is_present(x, y));
                    if lf.label(x, y) != 0 {
                        seen.insert(lf.label(x, y));
                    }
                }
            }
        }
        // ids are handed out contiguously from 1
        let expected: BTreeSet<u32> = (1..=seen.len() as u32).collect();
        prop_assert_eq!(seen, expected);
    }

    #[test]
    fn unseeded_regions_are_angle_chains(f in field(), thr in 10.0..100.0f64) {
        let params = SegmentationParams { angle_threshold: thr, ..Default::default() };
        let mut next = 1;
        let lf = spatial_label(&f, None, &params, &mut next).unwrap();
        for (x, y, v) in f.cells() {
            for (nx, ny) in neighbours(x, y) {
                if let Some(u) = f.get(nx, ny) {
                    if angle(u, v) <= thr - 1e-6 {
                        prop_assert_eq!(lf.label(x, y), lf.label(nx, ny));
                    }
                }
            }
        }
        // every cell of a label is reachable from its other cells through
        // compatible steps: flood fill over same-label compatible neighbours
        for label in lf.distinct_labels() {
            let cells: Vec<(usize, usize)> =
                f.cells().filter(|&(x, y, _)| lf.label(x, y) == label).map(|(x, y, _)| (x, y)).collect();
            let mut reached = BTreeSet::from([cells[0]]);
            let mut stack = vec![cells[0]];
            while let Some((x, y)) = stack.pop() {
                let v = f.get(x, y).unwrap();
                for (nx, ny) in neighbours(x, y) {
                    if lf.label(nx, ny) == label
                        && angle(v, f.get(nx, ny).unwrap()) <= thr + 1e-6
                        && reached.insert((nx, ny))
                    {
                        stack.push((nx, ny));
                    }
                }
            }
            prop_assert_eq!(reached.len(), cells.len());
        }
    }

    #[test]
    fn trailing_empty_frames_change_nothing(seq in sequence(), extra in 1usize..4) {
        let params = SegmentationParams { min_frames: 2, ..Default::default() };
        let before = segment(&seq, &params).unwrap();
        let mut longer = seq.clone();
        for _ in 0..extra {
            longer.push(FlowField::empty(W, H)).unwrap();
        }
        prop_assert_eq!(segment(&longer, &params).unwrap(), before);
    }

    #[test]
    fn segmentation_is_deterministic(seq in sequence()) {
        let params = SegmentationParams { min_frames: 1, superposition: Superposition::Average, ..Default::default() };
        prop_assert_eq!(segment(&seq, &params).unwrap(), segment(&seq, &params).unwrap());
    }

    #[test]
    fn partial_actions_stay_within_the_flow_support(seq in sequence()) {
        let params = SegmentationParams { min_frames: 1, ..Default::default() };
        let pas = segment(&seq, &params).unwrap();
        for a in &pas.actions {
            for (x, y, v) in a.field().cells() {
                let (first, last) = a.frame_span;
                prop_assert!(seq.frames()[first..=last].iter().any(|f| f.get(x, y) == Some(v)));
            }
        }
    }
}

#[test]
fn single_blob_image_is_union_of_its_frames() {
    let spec = SyntheticGestureSpec {
        width: 40,
        height: 24,
        frames: 9,
        dt: 0.05,
        noise: 0.0,
        seed: 0,
        blobs: vec![BlobTrack::constant([8.0, 12.0], [60.0, 0.0], 3.0, 1, 7)],
    };
    let seq = synthesize(&spec).unwrap();
    let pas = segment(&seq, &SegmentationParams::default()).unwrap();
    assert_eq!(pas.len(), 1);
    let action = &pas.actions[0];
    assert_eq!(action.frame_span, (1, 7));
    let union: BTreeSet<(usize, usize)> = seq
        .frames()
        .iter()
        .flat_map(|f| f.cells().map(|(x, y, _)| (x, y)))
        .collect();
    let cells: BTreeSet<(usize, usize)> = action.field().cells().map(|(x, y, _)| (x, y)).collect();
    assert_eq!(cells, union);
    assert!(action.field().cells().all(|(_, _, v)| v == [60.0, 0.0]));
}
