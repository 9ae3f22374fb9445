//! Analysis core for pre-editing Japanese attributive clauses before
//! Japanese-to-Chinese machine translation.
//!
//! The crate is `no_std` (with `alloc`) and performs no IO. File formats,
//! the chat-completion client and the command line live in the companion
//! `attrclause` crate.
//!
//! Pipeline: [`morphology`] produces tokens, [`clause`] chunks them and
//! decides whether the sentence carries a nominative inner-relation
//! attributive clause, [`preedit`] splits such a sentence into two, and
//! [`prompts`] drives the LLM translation strategies. [`evalkit`] holds the
//! rubric and the score/pattern aggregation.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clause;
pub mod evalkit;
pub mod morphology;
pub mod preedit;
pub mod prompts;

pub use clause::{
    CaseRole, Chunk, ClauseCandidate, ClauseRules, RelationType, ScopeDecision,
    SubordinationClass,
};
pub use morphology::{
    Analyzer, AnalysisError, CharSpan, ConjugationForm, FixtureAnalyzer, PosCoarse, Provenance,
    Token, TokenizedSentence,
};
pub use preedit::{PreEditError, PreEditResult, StructuralReport};
pub use prompts::{
    ChatBackend, ChatMessage, ChatRole, Pipeline, PromptError, PromptStep, PromptTemplates,
    StepRecord, Strategy, StrategyError, TranslationRecord,
};
pub use evalkit::{Annotation, Report, Rubric, Score, Variant};
