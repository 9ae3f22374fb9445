//! Bunsetsu chunking and attributive-clause analysis.
//!
//! A sentence is in scope when it carries a "nominative" inner-relation
//! attributive clause: the modified noun fills a gap of the clause predicate
//! (inner relation), that gap is the nominative slot, and the main clause
//! predicate is verbal. Gap detection is a case-saturation heuristic over
//! the particles が/を/に found inside the clause; no selectional
//! restrictions are modelled.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::morphology::{ConjugationForm, PosCoarse, Token, TokenizedSentence};

/// One bunsetsu: a content word plus the particles, auxiliaries and
/// symbols attached to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// Token index range into the sentence.
    pub tokens: Range<usize>,
    /// Content head, relative to `tokens.start`.
    pub head_index: usize,
    pub is_predicate: bool,
    pub trailing_particles: Vec<String>,
}

impl Chunk {
    pub fn head<'a>(&self, sentence: &'a TokenizedSentence) -> &'a Token {
        &sentence.tokens[self.tokens.start + self.head_index]
    }

    pub fn slice<'a>(&self, sentence: &'a TokenizedSentence) -> &'a [Token] {
        &sentence.tokens[self.tokens.clone()]
    }

    /// Token range of the leading noun phrase (prefixes, nouns, noun
    /// suffixes) when the chunk is noun-headed.
    pub fn noun_phrase(&self, sentence: &TokenizedSentence) -> Option<Range<usize>> {
        let toks = self.slice(sentence);
        let mut end = 0;
        let mut has_noun = false;
        for tok in toks {
            let is_part = tok.is_prefix() || tok.pos == PosCoarse::Noun || is_opening_bracket(tok);
            if !is_part || is_nominalizer(tok) {
                break;
            }
            has_noun |= tok.pos == PosCoarse::Noun && !tok.is_suffix();
            end += 1;
        }
        has_noun.then(|| self.tokens.start..self.tokens.start + end)
    }

    fn has_topic_marker(&self, sentence: &TokenizedSentence) -> bool {
        self.after_head(sentence).iter().any(Token::is_topic_particle)
    }

    fn after_head<'a>(&self, sentence: &'a TokenizedSentence) -> &'a [Token] {
        &sentence.tokens[self.tokens.start + self.head_index + 1..self.tokens.end]
    }

    /// The chunk ends in a predicate form that can modify a following noun:
    /// no particle or punctuation after the predicate, and a terminal or
    /// adnominal form on the last word.
    fn is_adnominal_predicate(&self, sentence: &TokenizedSentence) -> bool {
        if !self.is_predicate {
            return false;
        }
        let last = &sentence.tokens[self.tokens.end - 1];
        matches!(last.pos, PosCoarse::Verb | PosCoarse::Adjective | PosCoarse::Auxiliary)
            && matches!(
                last.conjugation_form,
                None | Some(ConjugationForm::Terminal) | Some(ConjugationForm::Adnominal)
            )
    }
}

fn is_opening_bracket(tok: &Token) -> bool {
    tok.pos == PosCoarse::Symbol && (tok.fine(1) == "括弧開" || matches!(tok.surface.as_str(), "「" | "『" | "（" | "("))
}

fn is_nominalizer(tok: &Token) -> bool {
    tok.pos == PosCoarse::Noun && tok.fine(1) == "非自立" && matches!(tok.lemma.as_str(), "の" | "ん")
}

/// Whether `tok` may open a new chunk at all.
fn can_head(tok: &Token) -> bool {
    match tok.pos {
        PosCoarse::Noun => !tok.is_suffix() && !is_nominalizer(tok),
        PosCoarse::Verb | PosCoarse::Adjective => !tok.is_dependent(),
        PosCoarse::Adverb | PosCoarse::Other => true,
        PosCoarse::Symbol => is_opening_bracket(tok),
        PosCoarse::Particle | PosCoarse::Auxiliary => false,
    }
}

fn starts_chunk(prev: &Token, tok: &Token) -> bool {
    if !can_head(tok) {
        return false;
    }
    if prev.is_prefix() || is_opening_bracket(prev) {
        return false;
    }
    // compound nouns and サ変 noun + する stay together
    if prev.pos == PosCoarse::Noun && tok.pos == PosCoarse::Noun {
        return false;
    }
    if prev.is_sahen_noun() && tok.pos == PosCoarse::Verb && tok.lemma == "する" {
        return false;
    }
    true
}

fn is_head_candidate(tok: &Token) -> bool {
    match tok.pos {
        PosCoarse::Noun => !tok.is_suffix() && !is_nominalizer(tok),
        PosCoarse::Verb | PosCoarse::Adjective => !tok.is_dependent(),
        PosCoarse::Adverb | PosCoarse::Other => !tok.is_prefix(),
        _ => false,
    }
}

fn finish_chunk(sentence: &TokenizedSentence, range: Range<usize>) -> Chunk {
    let toks = &sentence.tokens[range.clone()];
    let head_index = toks.iter().rposition(is_head_candidate).unwrap_or(0);
    let head = &toks[head_index];
    let after = &toks[head_index + 1..];
    let is_predicate = matches!(head.pos, PosCoarse::Verb | PosCoarse::Adjective)
        || after.iter().any(Token::is_copula);
    let trailing_particles = after
        .iter()
        .filter(|t| t.pos == PosCoarse::Particle)
        .map(|t| t.surface.clone())
        .collect();
    Chunk { tokens: range, head_index, is_predicate, trailing_particles }
}

/// Partitions the sentence into bunsetsu, in order.
pub fn chunk(sentence: &TokenizedSentence) -> Vec<Chunk> {
    let tokens = &sentence.tokens;
    let mut chunks = Vec::new();
    let mut start = 0;
    for i in 1..tokens.len() {
        if starts_chunk(&tokens[i - 1], &tokens[i]) {
            chunks.push(finish_chunk(sentence, start..i));
            start = i;
        }
    }
    if !tokens.is_empty() {
        chunks.push(finish_chunk(sentence, start..tokens.len()));
    }
    chunks
}

/// Semantic role inventory for the modified noun.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseRole {
    Nominative,
    Accusative,
    Dative,
    Causative,
    Allative,
    Locative,
    Adverbial,
}

impl CaseRole {
    pub const ALL: [CaseRole; 7] = [
        Self::Nominative,
        Self::Accusative,
        Self::Dative,
        Self::Causative,
        Self::Allative,
        Self::Locative,
        Self::Adverbial,
    ];

    pub fn subordination_class(self) -> SubordinationClass {
        subordination_class(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "gap_role", rename_all = "snake_case")]
pub enum RelationType {
    Inner(CaseRole),
    Outer,
}

/// Strength of the modified noun's tie to the main-clause verb relative to
/// its tie to the clause verb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubordinationClass {
    /// "attributive clause verb > main clause verb"
    ClauseStronger,
    /// "attributive clause verb = main clause verb"
    Equal,
}

pub fn subordination_class(role: CaseRole) -> SubordinationClass {
    match role {
        CaseRole::Nominative => SubordinationClass::Equal,
        _ => SubordinationClass::ClauseStronger,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseCandidate {
    /// Token range of the attributive clause.
    pub clause_range: Range<usize>,
    /// Chunk index holding the modified noun.
    pub head_chunk: usize,
    /// Token range of the modified noun phrase (e.g. 白羽 + さん).
    pub head_noun: Range<usize>,
    /// Token index of the noun heading `head_noun`.
    pub head_noun_token: usize,
    /// Token index of the clause predicate's content head.
    pub clause_predicate: usize,
    pub relation: RelationType,
    pub main_predicate_verbal: bool,
}

impl ClauseCandidate {
    pub fn head_noun_surface(&self, sentence: &TokenizedSentence) -> String {
        sentence.surfaces(self.head_noun.clone())
    }

    pub fn clause_surface(&self, sentence: &TokenizedSentence) -> String {
        sentence.surfaces(self.clause_range.clone())
    }

    /// Whether this candidate (clause and head noun) sits inside the
    /// clause of `other`.
    pub fn is_embedded_in(&self, other: &ClauseCandidate) -> bool {
        self.clause_range.start >= other.clause_range.start
            && self.head_noun.end <= other.clause_range.end
            && self != other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeDecision {
    pub in_scope: bool,
    pub condition_inner_relation: bool,
    pub condition_main_predicate_verbal: bool,
    pub condition_nominative_gap: bool,
    pub reasons: Vec<String>,
}

impl ScopeDecision {
    fn from_flags(inner: bool, verbal: bool, nominative: bool, mut reasons: Vec<String>) -> Self {
        if !inner {
            reasons.push("outer relation: the modified noun fills no gap of the clause predicate".to_string());
        }
        if !verbal {
            reasons.push("main clause predicate is not a verb or verb phrase".to_string());
        }
        if inner && !nominative {
            reasons.push("the modified noun does not fill the nominative gap".to_string());
        }
        Self {
            in_scope: inner && verbal && nominative,
            condition_inner_relation: inner,
            condition_main_predicate_verbal: verbal,
            condition_nominative_gap: nominative,
            reasons,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RoleError {
    #[error("particle {0:?} after the modified noun has no role mapping")]
    UnmappedParticle(String),
}

/// Conjunctive particles that keep a preceding predicate inside the clause.
const CONTINUATIVE: [&str; 4] = ["て", "で", "ながら", "つつ"];

/// Content nouns that take outer-relation clauses.
pub const DEFAULT_OUTER_LEXICON: [&str; 8] =
    ["可能性", "こと", "事実", "話", "予定", "音", "におい", "気持ち"];

/// Tunable parts of the clause analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseRules {
    pub outer_lexicon: BTreeSet<String>,
}

impl Default for ClauseRules {
    fn default() -> Self {
        Self::with_outer_lexicon(DEFAULT_OUTER_LEXICON)
    }
}

impl ClauseRules {
    pub fn with_outer_lexicon<I, S>(nouns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { outer_lexicon: nouns.into_iter().map(Into::into).collect() }
    }

    /// Every predicate chunk directly followed by a noun-headed chunk, in
    /// sentence order.
    pub fn detect_attributive_clauses(
        &self,
        sentence: &TokenizedSentence,
        chunks: &[Chunk],
    ) -> Vec<ClauseCandidate> {
        let mut out = Vec::new();
        for (p, pred) in chunks.iter().enumerate() {
            let Some(next) = chunks.get(p + 1) else { break };
            if !pred.is_adnominal_predicate(sentence) {
                continue;
            }
            let Some(head_noun) = next.noun_phrase(sentence) else { continue };
            let head_noun_token = (head_noun.start..head_noun.end)
                .rev()
                .find(|&i| {
                    let t = &sentence.tokens[i];
                    t.pos == PosCoarse::Noun && !t.is_suffix()
                })
                .unwrap_or(head_noun.start);
            let first = clause_start(sentence, chunks, p);
            let mut cand = ClauseCandidate {
                clause_range: chunks[first].tokens.start..pred.tokens.end,
                head_chunk: p + 1,
                head_noun,
                head_noun_token,
                clause_predicate: pred.tokens.start + pred.head_index,
                relation: RelationType::Outer,
                main_predicate_verbal: false,
            };
            cand.relation = self.classify_relation(&cand, sentence);
            cand.main_predicate_verbal = main_predicate_is_verbal(sentence, &cand);
            out.push(cand);
        }
        out
    }

    /// Outer when the head noun is a content noun from the lexicon or every
    /// case slot of the clause predicate is filled; otherwise inner with the
    /// highest-priority open slot (nominative, accusative, dative).
    pub fn classify_relation(
        &self,
        candidate: &ClauseCandidate,
        sentence: &TokenizedSentence,
    ) -> RelationType {
        let head = &sentence.tokens[candidate.head_noun_token];
        let phrase = candidate.head_noun_surface(sentence);
        if self.outer_lexicon.contains(&phrase) || self.outer_lexicon.contains(&head.lemma) {
            return RelationType::Outer;
        }
        let filled = saturated_slots(&sentence.tokens[candidate.clause_range.clone()]);
        [CaseRole::Nominative, CaseRole::Accusative, CaseRole::Dative]
            .into_iter()
            .find(|r| !filled.contains(r))
            .map_or(RelationType::Outer, RelationType::Inner)
    }

    /// Candidates in order, each paired with its scope decision.
    pub fn analyze(&self, sentence: &TokenizedSentence) -> (Vec<Chunk>, Vec<ClauseCandidate>) {
        let chunks = chunk(sentence);
        let candidates = self.detect_attributive_clauses(sentence, &chunks);
        (chunks, candidates)
    }

    /// Evaluates the three scope conditions on the target candidate: the
    /// leftmost one that is not embedded in another candidate's clause.
    pub fn scope_check(&self, sentence: &TokenizedSentence) -> (Option<ClauseCandidate>, ScopeDecision) {
        let (_, candidates) = self.analyze(sentence);
        match select_target(&candidates) {
            None => (
                None,
                ScopeDecision {
                    in_scope: false,
                    condition_inner_relation: false,
                    condition_main_predicate_verbal: false,
                    condition_nominative_gap: false,
                    reasons: alloc::vec!["no attributive clause".to_string()],
                },
            ),
            Some(i) => {
                let cand = candidates[i].clone();
                let decision = decide(&cand, sentence);
                (Some(cand), decision)
            }
        }
    }

    /// Scope decision for an explicitly chosen candidate.
    pub fn decide(&self, candidate: &ClauseCandidate, sentence: &TokenizedSentence) -> ScopeDecision {
        let mut cand = candidate.clone();
        cand.relation = self.classify_relation(candidate, sentence);
        cand.main_predicate_verbal = main_predicate_is_verbal(sentence, candidate);
        decide(&cand, sentence)
    }
}

fn decide(cand: &ClauseCandidate, sentence: &TokenizedSentence) -> ScopeDecision {
    let inner = matches!(cand.relation, RelationType::Inner(_));
    let nominative = cand.relation == RelationType::Inner(CaseRole::Nominative);
    let reasons = alloc::vec![format!(
        "clause {:?} modifies {:?}",
        cand.clause_surface(sentence),
        cand.head_noun_surface(sentence)
    )];
    ScopeDecision::from_flags(inner, cand.main_predicate_verbal, nominative, reasons)
}

/// Index of the leftmost candidate not embedded in any other.
pub fn select_target(candidates: &[ClauseCandidate]) -> Option<usize> {
    candidates
        .iter()
        .position(|c| !candidates.iter().any(|o| c.is_embedded_in(o)))
}

/// Leftmost chunk of the clause ending at chunk `pred`. Extends to the
/// sentence start, stopping after a topic-marked chunk or a chunk closed by
/// a non-continuative conjunctive particle; both belong to the main clause.
fn clause_start(sentence: &TokenizedSentence, chunks: &[Chunk], pred: usize) -> usize {
    let mut first = pred;
    while first > 0 {
        let prev = &chunks[first - 1];
        if prev.has_topic_marker(sentence) || closes_subordinate_clause(prev, sentence) {
            break;
        }
        first -= 1;
    }
    first
}

fn closes_subordinate_clause(chunk: &Chunk, sentence: &TokenizedSentence) -> bool {
    chunk
        .after_head(sentence)
        .iter()
        .any(|t| t.is_conjunctive_particle() && !CONTINUATIVE.contains(&t.surface.as_str()))
        || chunk.slice(sentence).iter().any(Token::is_period)
}

fn saturated_slots(clause: &[Token]) -> BTreeSet<CaseRole> {
    let mut filled = BTreeSet::new();
    for tok in clause {
        if tok.is_topic_particle() {
            filled.insert(CaseRole::Nominative);
        } else if tok.is_case_particle() {
            match tok.surface.as_str() {
                "が" => {
                    filled.insert(CaseRole::Nominative);
                }
                "を" => {
                    filled.insert(CaseRole::Accusative);
                }
                "に" => {
                    filled.insert(CaseRole::Dative);
                }
                _ => {}
            }
        }
    }
    filled
}

/// Last predicate chunk of the sentence lying outside the clause.
fn main_predicate_chunk<'c>(
    sentence: &TokenizedSentence,
    chunks: &'c [Chunk],
    candidate: &ClauseCandidate,
) -> Option<&'c Chunk> {
    let _ = sentence;
    chunks.iter().rev().find(|c| {
        c.is_predicate
            && (c.tokens.end <= candidate.clause_range.start || c.tokens.start >= candidate.clause_range.end)
    })
}

/// True iff the main-clause predicate is headed by a verb. Adjectival and
/// copular predicates are not verbal.
pub fn main_predicate_is_verbal(sentence: &TokenizedSentence, candidate: &ClauseCandidate) -> bool {
    let chunks = chunk(sentence);
    main_predicate_chunk(sentence, &chunks, candidate).is_some_and(|c| {
        c.head(sentence).pos == PosCoarse::Verb && !c.after_head(sentence).iter().any(Token::is_copula)
    })
}

/// Role of the modified noun in the main clause, read off the particle
/// that follows it.
pub fn classify_main_clause_role(
    sentence: &TokenizedSentence,
    candidate: &ClauseCandidate,
) -> Result<CaseRole, RoleError> {
    let chunks = chunk(sentence);
    let head_chunk = &chunks[candidate.head_chunk];
    let after: Vec<&Token> = sentence.tokens[candidate.head_noun.end..head_chunk.tokens.end]
        .iter()
        .filter(|t| t.pos != PosCoarse::Symbol)
        .collect();
    let Some(particle) = after.first().filter(|t| t.pos == PosCoarse::Particle) else {
        return Ok(CaseRole::Adverbial);
    };
    let next_surface = after.get(1).map(|t| t.surface.as_str());
    match particle.surface.as_str() {
        "が" if !particle.is_conjunctive_particle() => Ok(CaseRole::Nominative),
        "は" => {
            let other_subject = chunks.iter().enumerate().any(|(i, c)| {
                i != candidate.head_chunk
                    && (c.tokens.start >= candidate.clause_range.end || c.tokens.end <= candidate.clause_range.start)
                    && c.after_head(sentence).iter().any(|t| t.is_case_particle() && t.surface == "が")
            });
            if other_subject {
                Err(RoleError::UnmappedParticle("は".to_string()))
            } else {
                Ok(CaseRole::Nominative)
            }
        }
        "を" => Ok(CaseRole::Accusative),
        "によって" => Ok(CaseRole::Causative),
        "に" if matches!(next_surface, Some("よっ") | Some("よる") | Some("より")) => Ok(CaseRole::Causative),
        "に" if particle.fine(1) == "副詞化" => Ok(CaseRole::Adverbial),
        "に" => {
            let causative = main_predicate_chunk(sentence, &chunks, candidate).is_some_and(|c| {
                c.slice(sentence)
                    .iter()
                    .any(|t| matches!(t.lemma.as_str(), "せる" | "させる"))
            });
            Ok(if causative { CaseRole::Causative } else { CaseRole::Dative })
        }
        "へ" => Ok(CaseRole::Allative),
        "で" => Ok(CaseRole::Locative),
        other => Err(RoleError::UnmappedParticle(other.to_string())),
    }
}
