//! Gesture recognition from dense optical flow.
//!
//! The pipeline turns a sequence of flow fields into *partial actions*
//! (spatio-temporally coherent groups of flow vectors), projects each one
//! onto a low-dimensional eigenspace, and matches the resulting feature
//! sequence against a dictionary of Gaussian cluster sequences. Matching is
//! a minimum-cost path search over a weighted edit graph; dictionary entries
//! can flag *important* partial actions whose crossing edges are made so
//! expensive that the path is forced through their match when one exists.
//!
//! Module map:
//!
//! - [`flow`]: flow fields, block-matching optical flow, synthetic sequences.
//! - [`segmentation`]: labeling, propagation, pruning and superposition into
//!   partial action images.
//! - [`eigenspace`]: appearance vectors, PCA fitting and projection.
//! - [`dictionary`]: Gaussian clusters, Mahalanobis distance, persistence.
//! - [`matcher`]: edit graph, Dijkstra LCS, similarity, dictionary search.
//! - [`pipeline`]: glue for dictionary building and query feature extraction.
//! - [`corpus`]: a synthetic multi-gesture corpus with a twin pair.

// Validation is written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod dictionary;
pub mod eigenspace;
mod error;
pub mod flow;
mod json;
pub mod matcher;
pub mod pipeline;
pub mod segmentation;

pub use dictionary::{Cluster, GestureDictionary, GestureEntry};
pub use eigenspace::{AppearanceVector, EigenspaceModel, FeatureVector};
pub use error::{Error, Result};
pub use flow::{FlowField, FlowParams, FlowSequence, GrayFrame, SyntheticGestureSpec};
pub use matcher::{MatchGraph, MatchRelation, MatchResult, RankedMatch};
pub use segmentation::{
    LabeledFlowField, PartialActionImage, PartialActionSequence, SegmentationParams, Superposition,
};
