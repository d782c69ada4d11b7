//! Apo/holo conformational benchmark: sequence-based chain and pocket
//! mapping, linkage validation and the signed score that places a query
//! between its reference state and the linked alternative state.

mod align;
mod mapping;
mod score;

pub use align::{smith_waterman, SequenceAlignment, GAP, MATCH, MISMATCH};
pub use mapping::{
    best_chain_mapping, chain_mapping_candidates, map_pocket, rank_chain_mappings, ChainMappingCandidate,
    PocketMapping, MIN_POCKET_COVERAGE,
};
pub use score::{
    conformational_score, confbench_score, validate_linkage, win_rate, ConfBenchLinkage, ConfBenchScore,
    ConformationLabel, LevelScore, PreparedLinkage, ScoreLevel, POCKET_RADIUS, VALIDATION_GATE,
};
