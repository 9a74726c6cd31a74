//! `flowseq`: synthesize flow sequences, build gesture dictionaries,
//! recognize queries and compare focused against unfocused matching.
//!
//! Machine-readable output goes to stdout as JSON, diagnostics to stderr.
//! Exit status is 0 on success, 2 for unusable input and 3 when a dictionary
//! cannot be built from otherwise readable training data.

mod manifest;

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use flowseq_core::corpus::{self, CorpusConfig, NoiseLevel};
use flowseq_core::flow::{flow_sequence, synthesize};
use flowseq_core::pipeline::{build_dictionary, evaluate, recognize_sequence, PipelineConfig, TrainingGesture};
use flowseq_core::segmentation::segment;
use flowseq_core::{FlowParams, FlowSequence, GestureDictionary, GrayFrame, SyntheticGestureSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;

use manifest::ManifestEntry;

#[derive(Parser)]
#[command(name = "flowseq", version, about = "Optical-flow gesture recognition")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// JSON run configuration (segmentation, flow, k, tau, ridge, seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed; overrides the seed in the config or spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic gesture spec to a .flows file.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute optical flow between consecutive PGM frames.
    Flow {
        #[arg(required = true, num_args = 2..)]
        frames: Vec<PathBuf>,
        /// Sampling interval between frames, in seconds.
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the partial action sequence of a .flows file.
    Segment {
        flows: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a gesture dictionary from a training manifest.
    BuildDict {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank dictionary entries against a query sequence.
    Recognize {
        dict: PathBuf,
        query: PathBuf,
        /// Ignore every important set.
        #[arg(long)]
        no_focus: bool,
    },
    /// Focused vs unfocused top-1 accuracy over a labeled test manifest.
    Eval { dict: PathBuf, manifest: PathBuf },
    /// Generate the synthetic twin-gesture corpus with train/test manifests.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        /// Training repetitions per gesture.
        #[arg(long, default_value_t = 30)]
        reps: usize,
        /// Test queries per gesture.
        #[arg(long, default_value_t = 25)]
        queries: usize,
        /// Flow noise amplitude, pixels/second.
        #[arg(long, default_value_t = 10.0)]
        flow_noise: f64,
        /// Probability that a test query starts with a spurious flick.
        #[arg(long, default_value_t = 0.5)]
        spurious_rate: f64,
    },
}

/// Everything tunable from `--config`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    #[serde(flatten)]
    pipeline: PipelineConfig,
    flow: FlowParams,
    seed: Option<u64>,
}

/// A readable training set that still does not yield a dictionary.
#[derive(Debug)]
struct BuildFailed(flowseq_core::Error);

impl fmt::Display for BuildFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot build dictionary: {}", self.0)
    }
}

impl std::error::Error for BuildFailed {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<BuildFailed>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.global.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if cli.global.seed.is_some() {
        config.seed = cli.global.seed;
    }

    match cli.command {
        Command::Synth { spec, out } => synth(&spec, out.as_deref(), &config),
        Command::Flow { frames, dt, out } => flow(&frames, dt, out.as_deref(), &config),
        Command::Segment { flows, out } => segment_cmd(&flows, out.as_deref(), &config),
        Command::BuildDict { manifest, out } => build_dict(&manifest, &out, &config),
        Command::Recognize { dict, query, no_focus } => recognize(&dict, &query, !no_focus, &config),
        Command::Eval { dict, manifest } => eval(&dict, &manifest, &config),
        Command::Corpus {
            out,
            reps,
            queries,
            flow_noise,
            spurious_rate,
        } => generate_corpus(
            &out,
            reps,
            queries,
            NoiseLevel {
                flow_noise,
                spurious_rate,
            },
            &config,
        ),
    }
}

fn print_line(text: &str) -> Result<()> {
    let mut stdout = io::stdout().lock();
    match writeln!(stdout, "{text}").and_then(|()| stdout.flush()) {
        // a closed pipe (`| head`) is the reader's choice, not a failure
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    print_line(&serde_json::to_string_pretty(value)?)
}

fn write_sequence(seq: &FlowSequence, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            seq.save(path)?;
            eprintln!("wrote {} frames to {}", seq.len(), path.display());
            Ok(())
        }
        None => print_line(&seq.to_json()),
    }
}

fn synth(spec_path: &Path, out: Option<&Path>, config: &RunConfig) -> Result<()> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading spec {}", spec_path.display()))?;
    let mut spec: SyntheticGestureSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing spec {}", spec_path.display()))?;
    if let Some(seed) = config.seed {
        spec.seed = seed;
    }
    write_sequence(&synthesize(&spec)?, out)
}

fn flow(frames: &[PathBuf], dt: f64, out: Option<&Path>, config: &RunConfig) -> Result<()> {
    let images = frames
        .iter()
        .map(|p| GrayFrame::load_pgm(p))
        .collect::<flowseq_core::Result<Vec<_>>>()?;
    write_sequence(&flow_sequence(&images, dt, &config.flow)?, out)
}

fn segment_cmd(flows: &Path, out: Option<&Path>, config: &RunConfig) -> Result<()> {
    let seq = FlowSequence::load(flows)?;
    let pas = segment(&seq, &config.pipeline.segmentation)?;
    eprintln!("{} partial actions", pas.len());
    if let Some(path) = out {
        pas.save(path)?;
    }
    let spans: Vec<_> = pas
        .actions
        .iter()
        .map(|a| json!({ "label": a.label, "frame_span": a.frame_span, "cells": a.field().present_count() }))
        .collect();
    print_json(&json!({ "partial_actions": spans }))
}

fn build_dict(manifest_path: &Path, out: &Path, config: &RunConfig) -> Result<()> {
    let entries = manifest::load(manifest_path)?;
    if entries.is_empty() {
        bail!("manifest {} lists no gestures", manifest_path.display());
    }
    let mut training = Vec::with_capacity(entries.len());
    for ManifestEntry { name, files, important } in entries {
        let repetitions = files
            .iter()
            .map(|f| FlowSequence::load(f))
            .collect::<flowseq_core::Result<Vec<_>>>()?;
        training.push(TrainingGesture {
            name,
            repetitions,
            important,
        });
    }
    let dict = build_dictionary(&training, &config.pipeline).map_err(BuildFailed)?;
    dict.save(out)?;
    eprintln!("wrote {} entries to {}", dict.entries().len(), out.display());
    print_json(&json!({
        "entries": dict.entries().iter().map(|e| json!({
            "name": e.name,
            "clusters": e.clusters.len(),
            "important": e.important,
        })).collect::<Vec<_>>(),
        "k": dict.k(),
        "tau": dict.tau(),
        "eigenvalues": dict.eigenspace().eigenvalues(),
    }))
}

fn recognize(dict_path: &Path, query: &Path, focus: bool, config: &RunConfig) -> Result<()> {
    let dict = GestureDictionary::load(dict_path)?;
    let seq = FlowSequence::load(query)?;
    let ranked = recognize_sequence(&dict, &seq, &config.pipeline.segmentation, focus)?;
    print_json(&ranked)
}

fn eval(dict_path: &Path, manifest_path: &Path, config: &RunConfig) -> Result<()> {
    let dict = GestureDictionary::load(dict_path)?;
    let mut queries = Vec::new();
    for entry in manifest::load(manifest_path)? {
        for f in &entry.files {
            queries.push((entry.name.clone(), FlowSequence::load(f)?));
        }
    }
    let report = evaluate(
        &dict,
        queries.iter().map(|(label, seq)| (label.as_str(), seq)),
        &config.pipeline.segmentation,
    );
    eprint!("{}", report.table());
    print_json(&report)
}

fn generate_corpus(out: &Path, reps: usize, per_gesture: usize, noise: NoiseLevel, config: &RunConfig) -> Result<()> {
    let seed = config.seed.unwrap_or(0);
    let cfg = CorpusConfig::default();
    let gestures = corpus::twin_gestures();
    let training = corpus::training_set(&gestures, &cfg, reps, noise.flow_noise, seed)?;
    let queries = corpus::queries(&gestures, &cfg, per_gesture, noise, seed.wrapping_add(1))?;

    for dir in ["train", "test"] {
        fs::create_dir_all(out.join(dir)).with_context(|| format!("creating {}", out.join(dir).display()))?;
    }
    let mut train_manifest = Vec::with_capacity(training.len());
    for g in &training {
        let mut files = Vec::with_capacity(g.repetitions.len());
        for (i, seq) in g.repetitions.iter().enumerate() {
            let rel = PathBuf::from("train").join(format!("{}_{i:03}.flows", g.name));
            seq.save(&out.join(&rel))?;
            files.push(rel);
        }
        train_manifest.push(ManifestEntry {
            name: g.name.clone(),
            files,
            important: g.important.clone(),
        });
    }
    let mut test_manifest: Vec<ManifestEntry> = Vec::new();
    for (i, q) in queries.iter().enumerate() {
        let rel = PathBuf::from("test").join(format!("{}_{i:03}.flows", q.label));
        q.sequence.save(&out.join(&rel))?;
        match test_manifest.iter_mut().find(|e| e.name == q.label) {
            Some(e) => e.files.push(rel),
            None => test_manifest.push(ManifestEntry {
                name: q.label.clone(),
                files: vec![rel],
                important: Default::default(),
            }),
        }
    }
    manifest::save(&out.join("train.json"), &train_manifest)?;
    manifest::save(&out.join("test.json"), &test_manifest)?;
    print_json(&json!({
        "train_manifest": out.join("train.json"),
        "test_manifest": out.join("test.json"),
        "training_sequences": training.iter().map(|g| g.repetitions.len()).sum::<usize>(),
        "test_sequences": queries.len(),
        "spurious_queries": queries.iter().filter(|q| q.spurious).count(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_fields_are_optional_and_flat() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"k": 6, "segmentation": {"min_frames": 2}, "flow": {"search_radius": 5}}"#)
                .unwrap();
        assert_eq!(cfg.pipeline.k, 6);
        assert_eq!(cfg.pipeline.segmentation.min_frames, 2);
        assert_eq!(cfg.pipeline.segmentation.angle_threshold, 45.0);
        assert_eq!(cfg.flow.search_radius, 5);
        assert_eq!(cfg.pipeline.tau, PipelineConfig::default().tau);
        assert_eq!(cfg.seed, None);
    }
}
