//! Synthetic gesture corpus with a pair of near-identical gestures.
//!
//! Four gestures are built from moving discs in two canvas regions. `lend`
//! and `return` share every partial action except a small flick that only
//! `lend` performs, and that flick is flagged important in `lend`.
//!
//! Queries can carry a *spurious flick*: a stray copy of that small motion
//! performed before the gesture proper. A `return` query with such a flick
//! has the same LCS length against both `lend` and `return`; only the
//! focused matcher, which must pair `lend`'s flick with the stray one and so
//! loses the matches before it, separates them.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::flow::{synthesize, BlobTrack, FlowSequence, SyntheticGestureSpec, Vec2};
use crate::pipeline::TrainingGesture;

/// One partial action: a disc sweeping through `center` along `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionTemplate {
    pub center: Vec2,
    pub direction: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureTemplate {
    pub name: String,
    pub actions: Vec<ActionTemplate>,
    /// 1-based positions in `actions`.
    pub important: BTreeSet<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    pub width: usize,
    pub height: usize,
    pub dt: f64,
    /// Disc speed in pixels/second.
    pub speed: f64,
    /// Frames each partial action lasts.
    pub action_frames: usize,
    /// Empty frames before, between and after actions.
    pub gap: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            width: 48,
            height: 36,
            dt: 1.0 / 60.0,
            speed: 120.0,
            action_frames: 5,
            gap: 2,
        }
    }
}

/// Query perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel {
    /// Uniform per-component flow noise amplitude, pixels/second.
    pub flow_noise: f64,
    /// Probability that a spurious flick precedes the gesture.
    pub spurious_rate: f64,
}

const REGION_A: Vec2 = [14.0, 18.0];
const REGION_B: Vec2 = [34.0, 18.0];
const HAND: f64 = 4.0;
const FLICK_RADIUS: f64 = 1.5;
const DIAG: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn action(center: Vec2, direction: Vec2, radius: f64) -> ActionTemplate {
    ActionTemplate {
        center,
        direction,
        radius,
    }
}

/// The small motion that tells `lend` from `return`.
pub fn flick() -> ActionTemplate {
    action(REGION_B, [-DIAG, -DIAG], FLICK_RADIUS)
}

/// `lend`, `order`, `return`, `say`.
pub fn twin_gestures() -> Vec<GestureTemplate> {
    let h1 = action(REGION_A, [0.0, -1.0], HAND);
    let h2 = action(REGION_B, [1.0, 0.0], HAND);
    let h3 = action(REGION_A, [DIAG, DIAG], HAND);
    vec![
        GestureTemplate {
            name: "lend".into(),
            actions: vec![h1, h2, flick(), h3],
            important: BTreeSet::from([3]),
        },
        GestureTemplate {
            name: "order".into(),
            actions: vec![
                action(REGION_B, [0.0, -1.0], HAND),
                action(REGION_A, [1.0, 0.0], HAND),
                action(REGION_B, [-1.0, 0.0], HAND),
            ],
            important: BTreeSet::new(),
        },
        GestureTemplate {
            name: "return".into(),
            actions: vec![h1, h2, h3],
            important: BTreeSet::new(),
        },
        GestureTemplate {
            name: "say".into(),
            actions: vec![action(REGION_A, [-1.0, 0.0], HAND), action(REGION_B, [0.0, 1.0], HAND)],
            important: BTreeSet::new(),
        },
    ]
}

/// Renders a sequence of actions performed one after another.
pub fn render(actions: &[ActionTemplate], cfg: &CorpusConfig, flow_noise: f64, seed: u64) -> Result<FlowSequence> {
    let step = cfg.speed * cfg.dt;
    let sweep = step * (cfg.action_frames as f64 - 1.0);
    let mut blobs = Vec::with_capacity(actions.len());
    let mut frame = cfg.gap;
    for a in actions {
        let velocity = [a.direction[0] * cfg.speed, a.direction[1] * cfg.speed];
        let start = [
            a.center[0] - a.direction[0] * sweep / 2.0,
            a.center[1] - a.direction[1] * sweep / 2.0,
        ];
        blobs.push(BlobTrack::constant(
            start,
            velocity,
            a.radius,
            frame,
            frame + cfg.action_frames - 1,
        ));
        frame += cfg.action_frames + cfg.gap;
    }
    synthesize(&SyntheticGestureSpec {
        width: cfg.width,
        height: cfg.height,
        frames: frame,
        dt: cfg.dt,
        noise: flow_noise,
        seed,
        blobs,
    })
}

/// `repetitions` noisy performances of every gesture, for dictionary
/// building.
pub fn training_set(
    gestures: &[GestureTemplate],
    cfg: &CorpusConfig,
    repetitions: usize,
    flow_noise: f64,
    seed: u64,
) -> Result<Vec<TrainingGesture>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gestures
        .iter()
        .map(|g| {
            let reps = (0..repetitions)
                .map(|_| render(&g.actions, cfg, flow_noise, rng.random()))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainingGesture {
                name: g.name.clone(),
                repetitions: reps,
                important: g.important.clone(),
            })
        })
        .collect()
}

/// A labeled query.
#[derive(Debug, Clone)]
pub struct Query {
    pub label: String,
    pub sequence: FlowSequence,
    pub spurious: bool,
}

/// `per_gesture` perturbed queries of every gesture.
pub fn queries(
    gestures: &[GestureTemplate],
    cfg: &CorpusConfig,
    per_gesture: usize,
    noise: NoiseLevel,
    seed: u64,
) -> Result<Vec<Query>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(gestures.len() * per_gesture);
    for g in gestures {
        for _ in 0..per_gesture {
            let spurious = rng.random_bool(noise.spurious_rate.clamp(0.0, 1.0));
            let mut actions = Vec::with_capacity(g.actions.len() + 1);
            if spurious {
                actions.push(flick());
            }
            actions.extend_from_slice(&g.actions);
            out.push(Query {
                label: g.name.clone(),
                sequence: render(&actions, cfg, noise.flow_noise, rng.random())?,
                spurious,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{segment, SegmentationParams};

    #[test]
    fn each_action_becomes_one_partial_action() {
        let cfg = CorpusConfig::default();
        for g in twin_gestures() {
            let seq = render(&g.actions, &cfg, 10.0, 5).unwrap();
            let pas = segment(&seq, &SegmentationParams::default()).unwrap();
            assert_eq!(pas.len(), g.actions.len(), "{}", g.name);
        }
    }

    #[test]
    fn spurious_flick_adds_a_leading_action() {
        let cfg = CorpusConfig::default();
        let gs = twin_gestures();
        let noise = NoiseLevel {
            flow_noise: 10.0,
            spurious_rate: 1.0,
        };
        let qs = queries(&gs[2..3], &cfg, 2, noise, 1).unwrap();
        for q in qs {
            assert!(q.spurious);
            let pas = segment(&q.sequence, &SegmentationParams::default()).unwrap();
            assert_eq!(pas.len(), 4);
        }
    }
}
