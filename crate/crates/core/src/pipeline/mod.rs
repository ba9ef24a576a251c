//! The analysis workspace: six phases from background research to report,
//! with forward staleness propagation, snapshots and a replayable mutation
//! log.

mod background;
mod buckets;
mod coding;
mod model;
mod phase;
mod quote;
mod review;
mod score;
mod workspace;

pub use background::{MAX_CONCEPTS, MIN_CONCEPTS};
pub use buckets::{Bucket, BucketEdit, BucketSet};
pub use model::*;
pub use phase::{Phase, PhaseState, PhaseStatus, PhaseTable, Provenance};
pub use quote::{normalize_for_match, verify_quote, QuoteIndex};
pub use score::{score_phase, PhaseScore, ScoreReference};
pub use workspace::{
    Actor, ApplicationEdit, CodebookEdit, ConceptEdit, CreateSpec, Manifest, Mutation, Outcome, PhaseData, Progress,
    SnapshotMeta, Source, Workspace, no_progress, DEFAULT_SAMPLE_SIZE, FORMAT_VERSION, RETRIEVAL_K,
};
