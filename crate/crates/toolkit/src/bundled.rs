//! Data shipped inside the binary.

use attrclause_core::evalkit::{Annotation, PatternLabel};
use attrclause_core::morphology::FixtureAnalyzer;

use crate::corpus::{self, CorpusEntry};
use crate::llm::MockBackend;

pub const CORPUS: &str = include_str!("../data/corpus.jsonl");
pub const FIXTURES: &str = include_str!("../data/fixtures.jsonl");
/// Printed prompt/response pairs for the row-5 demonstration.
pub const EXCHANGES: &str = include_str!("../data/exchanges.json");
/// Before/after scores for the five demonstration rows.
pub const ANNOTATIONS: &str = include_str!("../data/annotations.jsonl");
/// Pattern labels with the published per-class counts.
pub const PATTERN_LABELS: &str = include_str!("../data/pattern_labels.jsonl");
/// External-analyzer output for the row-5 sentence.
pub const APP1_5_ANALYSIS: &str = include_str!("../data/analysis/app1-5.mecab");

pub fn corpus() -> Vec<CorpusEntry> {
    corpus::parse(CORPUS).expect("bundled corpus is valid")
}

pub fn analyzer() -> FixtureAnalyzer {
    FixtureAnalyzer::new(crate::analysis::parse_fixtures(FIXTURES).expect("bundled fixtures are valid"))
}

pub fn mock_backend() -> MockBackend {
    MockBackend::from_json(EXCHANGES).expect("bundled exchanges are valid")
}

pub fn annotations() -> Vec<Annotation> {
    crate::annotate::parse_log(ANNOTATIONS).expect("bundled annotations are valid")
}

pub fn pattern_labels() -> Vec<PatternLabel> {
    crate::annotate::parse_labels(PATTERN_LABELS).expect("bundled labels are valid")
}
