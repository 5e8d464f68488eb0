//! Compilation of procedure documents into dual programs.

mod doc;
mod extract;
mod matcher;
mod route_sheet;
mod synthesize;
pub mod text;

pub use doc::{split_sentences, DocKind, DocRow, ProcedureDoc};
pub use extract::{
    extract_actions, EntitySpan, ExtractedAction, ExtractedParam, Extraction, ExtractionEmpty,
    ExtractorAdapter, FlowMention, FlowRole, PseudoLabel, RuleExtractor, Vocabulary,
};
pub use matcher::{match_operation, op_scores, MatchCandidate, MatchConfig, MatchError};
pub use route_sheet::{program_to_route_sheet, RouteRow, RouteSheet};
pub use synthesize::{synthesize_program, SynthesisError};
