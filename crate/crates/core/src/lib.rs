//! Scene composition from spoken narratives and mouse traces.
//!
//! The pipeline tags each narrative word with a class label, retrieves
//! corpus images with similar narratives, and composes a segmentation canvas
//! from their masks placed where the user traced.

pub mod align;
pub mod compose;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod oracle;
pub mod render;
pub mod retrieval;
pub mod synth;
pub mod tagger;

pub use corpus::{Corpus, Example, LabelId, LabelKind, LabelMap, LabelTaxonomy, Scene, TimedWord, TracePoint};
pub use error::{Error, Result};
pub use geometry::{BinaryMask, Point, Polygon};
