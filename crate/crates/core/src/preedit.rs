//! Two-sentence pre-edit of an in-scope sentence.
//!
//! `[clause][noun][particle] main…` becomes
//! `[noun]は[clause]。` followed by the main clause with the noun left in
//! place. The predicate surface never changes: for verbs the adnominal and
//! terminal forms coincide.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clause::{chunk, ClauseCandidate, ClauseRules};
use crate::morphology::{PosCoarse, Token, TokenizedSentence};

const TOPIC: &str = "は";
const PERIOD: &str = "。";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreEditResult {
    /// The clause promoted to a sentence with the modified noun as topic.
    pub sentence_a: String,
    /// The original main clause with the modified noun in situ.
    pub sentence_b: String,
    #[serde(rename = "head_noun")]
    pub head_noun_surface: String,
    pub rule_trace: Vec<String>,
}

impl PreEditResult {
    pub fn joined(&self) -> String {
        let mut s = self.sentence_a.clone();
        s.push_str(&self.sentence_b);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreEditError {
    #[error("sentence is out of scope: {}", reasons.join("; "))]
    NotInScope { reasons: Vec<String> },
}

fn concat<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> String {
    tokens.into_iter().map(|t| t.surface.as_str()).collect()
}

/// Rewrites `sentence` around `candidate`. Fails unless the candidate
/// passes all three scope conditions.
pub fn preedit(
    rules: &ClauseRules,
    sentence: &TokenizedSentence,
    candidate: &ClauseCandidate,
) -> Result<PreEditResult, PreEditError> {
    let decision = rules.decide(candidate, sentence);
    if !decision.in_scope {
        return Err(PreEditError::NotInScope { reasons: decision.reasons });
    }
    let tokens = &sentence.tokens;
    let chunks = chunk(sentence);
    let head = candidate.head_noun_surface(sentence);
    let mut trace = Vec::new();

    let clause = &tokens[candidate.clause_range.clone()];
    let clause_text = concat(clause);
    let mut sentence_a = head.clone();
    sentence_a.push_str(TOPIC);
    sentence_a.push_str(clause_text.trim_end_matches('、'));
    sentence_a.push_str(PERIOD);
    trace.push(format!("promote {head} to clause subject with {TOPIC}"));
    trace.push(format!("close clause {clause_text:?} with {PERIOD}"));

    let head_chunk = &chunks[candidate.head_chunk];
    let mut head_phrase: Vec<&Token> = tokens[head_chunk.tokens.clone()].iter().collect();
    while head_phrase.last().is_some_and(|t| t.is_comma()) {
        head_phrase.pop();
        trace.push(format!("drop comma after {}", concat(head_phrase.iter().copied())));
    }
    let particle = tokens[candidate.head_noun.end..head_chunk.tokens.end]
        .iter()
        .find(|t| t.pos == PosCoarse::Particle)
        .map(|t| t.surface.as_str());
    let prefix = &tokens[..candidate.clause_range.start];
    let rest_chunks = &chunks[candidate.head_chunk + 1..];

    let mut b: Vec<&Token> = prefix.iter().collect();
    let subject_first = rest_chunks.first().filter(|c| {
        c.slice(sentence)
            .iter()
            .any(|t| t.is_topic_particle() || (t.is_case_particle() && t.surface == "が"))
    });
    match (particle, subject_first) {
        (Some("は") | Some("が"), _) | (_, None) => {
            b.extend(head_phrase);
            b.extend(&tokens[head_chunk.tokens.end..]);
        }
        (_, Some(subject)) if prefix.is_empty() => {
            let subject_tokens: Vec<&Token> = subject
                .slice(sentence)
                .iter()
                .take_while(|t| !t.is_comma())
                .collect();
            trace.push(format!(
                "place {} after main-clause subject {}",
                concat(head_phrase.iter().copied()),
                concat(subject_tokens.iter().copied())
            ));
            let skip = subject_tokens.len();
            b.extend(subject_tokens);
            b.extend(head_phrase);
            b.extend(&tokens[subject.tokens.start + skip..]);
        }
        _ => {
            b.extend(head_phrase);
            b.extend(&tokens[head_chunk.tokens.end..]);
        }
    }
    let mut sentence_b = concat(b);
    if !sentence_b.ends_with(PERIOD) {
        sentence_b.push_str(PERIOD);
        trace.push(format!("close main clause with {PERIOD}"));
    }
    trace.push(format!("keep {head} in the main clause"));

    Ok(PreEditResult { sentence_a, sentence_b, head_noun_surface: head, rule_trace: trace })
}

/// Outcome of [`structural_check`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub passed: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Clone)]
struct Entry {
    surface: Vec<char>,
    lemma: String,
    pos: PosCoarse,
}

/// Segments `text` into the fewest entries of `vocab`. `None` when the text
/// contains material the vocabulary cannot cover.
fn segment(text: &str, vocab: &[Entry]) -> Option<Vec<usize>> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let n = chars.len();
    let mut best: Vec<Option<(usize, usize, usize)>> = alloc::vec![None; n + 1];
    best[0] = Some((0, 0, usize::MAX));
    for i in 0..n {
        let Some((cost, _, _)) = best[i] else { continue };
        for (v, e) in vocab.iter().enumerate() {
            let len = e.surface.len();
            if i + len <= n && chars[i..i + len] == e.surface[..] {
                let better = best[i + len].is_none_or(|(c, _, _)| cost + 1 < c);
                if better {
                    best[i + len] = Some((cost + 1, i, v));
                }
            }
        }
    }
    best[n]?;
    let mut out = Vec::new();
    let mut pos = n;
    while pos > 0 {
        let (_, prev, v) = best[pos]?;
        out.push(v);
        pos = prev;
    }
    out.reverse();
    Some(out)
}

fn is_content(pos: PosCoarse) -> bool {
    matches!(pos, PosCoarse::Noun | PosCoarse::Verb | PosCoarse::Adjective | PosCoarse::Adverb)
}

fn count<'a>(keys: impl Iterator<Item = &'a str>) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for k in keys {
        *m.entry(k.to_string()).or_insert(0) += 1;
    }
    m
}

/// Validates a pre-edit against the original sentence without reusing the
/// rewrite logic: the output is re-segmented with the original's own token
/// inventory and token multisets are compared.
///
/// Allowed edits: one inserted は after the promoted noun, a second copy of
/// the noun, a sentence-final 。 and dropped commas.
pub fn structural_check(result: &PreEditResult, original: &TokenizedSentence) -> StructuralReport {
    let mut diags = Vec::new();
    let head = result.head_noun_surface.as_str();
    let mut head_topic = head.to_string();
    head_topic.push_str(TOPIC);

    if head.is_empty() {
        diags.push("empty head noun".to_string());
    }
    if !result.sentence_a.starts_with(&head_topic) {
        diags.push(format!("sentence_a does not start with {head_topic}"));
    }
    let occurrences = |s: &str| if head.is_empty() { 0 } else { s.matches(head).count() };
    for (name, s) in [("sentence_a", &result.sentence_a), ("sentence_b", &result.sentence_b)] {
        if !s.ends_with(PERIOD) {
            diags.push(format!("{name} does not end with {PERIOD}"));
        }
        if occurrences(s) == 0 {
            diags.push(format!("{name} does not contain {head}"));
        }
    }
    // the noun is repeated exactly once
    let before = occurrences(&original.text);
    let after = occurrences(&result.sentence_a) + occurrences(&result.sentence_b);
    if after != before + 1 {
        diags.push(format!("{head} occurs {after} times, expected {}", before + 1));
    }

    // vocabulary: original surfaces, first occurrence wins
    let mut vocab: Vec<Entry> = Vec::new();
    let mut canonical: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &original.tokens {
        if !canonical.contains_key(t.surface.as_str()) {
            canonical.insert(t.surface.as_str(), vocab.len());
            vocab.push(Entry { surface: t.surface.chars().collect(), lemma: t.lemma.clone(), pos: t.pos });
        }
    }
    for (s, pos) in [(TOPIC, PosCoarse::Particle), (PERIOD, PosCoarse::Symbol)] {
        if !canonical.contains_key(s) {
            vocab.push(Entry { surface: s.chars().collect(), lemma: s.to_string(), pos });
        }
    }
    let orig: Vec<&Entry> = original
        .tokens
        .iter()
        .map(|t| &vocab[canonical[t.surface.as_str()]])
        .collect();

    let seg_a = segment(&result.sentence_a, &vocab);
    let seg_b = segment(&result.sentence_b, &vocab);
    let seg_head = segment(head, &vocab);
    let (Some(seg_a), Some(seg_b), Some(seg_head)) = (seg_a, seg_b, seg_head) else {
        diags.push("output contains text absent from the original sentence".to_string());
        return StructuralReport { passed: false, diagnostics: diags };
    };
    let out: Vec<&Entry> = seg_a.iter().chain(&seg_b).map(|&i| &vocab[i]).collect();
    let head_entries: Vec<&Entry> = seg_head.iter().map(|&i| &vocab[i]).collect();
    let surface = |e: &&Entry| e.surface.iter().collect::<String>();

    // content lemmas: original plus one extra copy of the head noun
    let content = |es: &[&Entry]| {
        let lemmas: Vec<&str> = es.iter().filter(|e| is_content(e.pos)).map(|e| e.lemma.as_str()).collect();
        count(lemmas.into_iter())
    };
    let mut expected_content = content(&orig);
    for (k, v) in content(&head_entries) {
        *expected_content.entry(k).or_insert(0) += v;
    }
    if content(&out) != expected_content {
        diags.push("content words differ from the original plus the repeated head noun".to_string());
    }

    // every other token: only は inserted, commas may be dropped, 。 closes
    let is_punct = |s: &str| s == "、" || s == PERIOD;
    let out_surfaces: Vec<String> = out.iter().map(surface).collect();
    let orig_surfaces: Vec<String> = orig.iter().map(surface).collect();
    let mut expected = count(orig_surfaces.iter().map(String::as_str).filter(|s| !is_punct(s)));
    for e in &head_entries {
        *expected.entry(surface(e)).or_insert(0) += 1;
    }
    *expected.entry(TOPIC.to_string()).or_insert(0) += 1;
    let actual = count(out_surfaces.iter().map(String::as_str).filter(|s| !is_punct(s)));
    if actual != expected {
        let missing: Vec<&String> = expected.keys().filter(|k| actual.get(*k) < expected.get(*k)).collect();
        let extra: Vec<&String> = actual.keys().filter(|k| actual.get(*k) > expected.get(*k)).collect();
        diags.push(format!("token multiset mismatch: missing {missing:?}, extra {extra:?}"));
    }
    let commas = |v: &[String]| v.iter().filter(|s| *s == "、").count();
    if commas(&out_surfaces) > commas(&orig_surfaces) {
        diags.push("commas were added".to_string());
    }
    let periods = |v: &[String]| v.iter().filter(|s| *s == PERIOD).count();
    let orig_final = usize::from(orig_surfaces.last().is_some_and(|s| s == PERIOD));
    if periods(&out_surfaces) != periods(&orig_surfaces) - orig_final + 2 {
        diags.push("unexpected sentence-final punctuation".to_string());
    }

    StructuralReport { passed: diags.is_empty(), diagnostics: diags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::{ConjugationForm, Provenance};
    use alloc::vec;

    fn t(s: &str, lemma: &str, pos: PosCoarse, fine: &str) -> Token {
        Token::new(s, lemma, pos, fine)
    }

    /// テレビを壊した太郎は頭を下げた。
    fn ex_2_16() -> TokenizedSentence {
        let ta = || {
            t("た", "た", PosCoarse::Auxiliary, "助動詞,*,*,*").with_form(Some(ConjugationForm::Terminal))
        };
        TokenizedSentence::from_tokens(
            vec![
                t("テレビ", "テレビ", PosCoarse::Noun, "名詞,一般,*,*"),
                t("を", "を", PosCoarse::Particle, "助詞,格助詞,一般,*"),
                t("壊し", "壊す", PosCoarse::Verb, "動詞,自立,*,*").with_form(Some(ConjugationForm::Continuative)),
                ta(),
                t("太郎", "太郎", PosCoarse::Noun, "名詞,固有名詞,人名,名"),
                t("は", "は", PosCoarse::Particle, "助詞,係助詞,*,*"),
                t("頭", "頭", PosCoarse::Noun, "名詞,一般,*,*"),
                t("を", "を", PosCoarse::Particle, "助詞,格助詞,一般,*"),
                t("下げ", "下げる", PosCoarse::Verb, "動詞,自立,*,*").with_form(Some(ConjugationForm::Continuative)),
                ta(),
                t("。", "。", PosCoarse::Symbol, "記号,句点,*,*"),
            ],
            Provenance::Fixture,
        )
        .unwrap()
    }

    #[test]
    fn splits_nominative_clause() {
        let s = ex_2_16();
        let rules = ClauseRules::default();
        let (cand, _) = rules.scope_check(&s);
        let r = preedit(&rules, &s, &cand.unwrap()).unwrap();
        assert_eq!(r.sentence_a, "太郎はテレビを壊した。");
        assert_eq!(r.sentence_b, "太郎は頭を下げた。");
        assert!(structural_check(&r, &s).passed);
    }

    #[test]
    fn missing_head_in_b_fails() {
        let s = ex_2_16();
        let r = PreEditResult {
            sentence_a: "太郎はテレビを壊した。".into(),
            sentence_b: "頭を下げた。".into(),
            head_noun_surface: "太郎".into(),
            rule_trace: vec![],
        };
        let report = structural_check(&r, &s);
        assert!(!report.passed);
        assert!(report.diagnostics.iter().any(|d| d.contains("sentence_b does not contain 太郎")));
    }

    #[test]
    fn invented_noun_fails() {
        let s = ex_2_16();
        let r = PreEditResult {
            sentence_a: "太郎はテレビを壊した。".into(),
            sentence_b: "太郎は犬の頭を下げた。".into(),
            head_noun_surface: "太郎".into(),
            rule_trace: vec![],
        };
        assert!(!structural_check(&r, &s).passed);
    }

    #[test]
    fn dropped_word_fails() {
        let s = ex_2_16();
        let r = PreEditResult {
            sentence_a: "太郎は壊した。".into(),
            sentence_b: "太郎は頭を下げた。".into(),
            head_noun_surface: "太郎".into(),
            rule_trace: vec![],
        };
        assert!(!structural_check(&r, &s).passed);
    }
}
