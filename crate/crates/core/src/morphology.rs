//! Tokens, tokenized sentences and the analyzer interface.
//!
//! The canonical fine-grained tag vocabulary is the IPADIC one
//! (`名詞,固有名詞,人名,名` and so on). Tags from other analyzers are mapped
//! onto the coarse classes through [`coarse_pos`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosCoarse {
    Noun,
    Verb,
    Adjective,
    Particle,
    Auxiliary,
    Adverb,
    Symbol,
    Other,
}

impl PosCoarse {
    /// Content words: the classes that can head a bunsetsu.
    pub fn is_content(self) -> bool {
        matches!(self, Self::Noun | Self::Verb | Self::Adjective | Self::Adverb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugationForm {
    Adnominal,
    Terminal,
    Continuative,
    Other,
}

/// Half-open character range into the sentence text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: PosCoarse,
    /// Analyzer-convention subtag, IPADIC style: the four comma-separated
    /// part-of-speech levels.
    pub pos_fine: String,
    pub conjugation_form: Option<ConjugationForm>,
    pub span: CharSpan,
}

impl Token {
    /// Builds a token with an empty span; spans are assigned when the token
    /// is placed into a [`TokenizedSentence`].
    pub fn new(
        surface: impl Into<String>,
        lemma: impl Into<String>,
        pos: PosCoarse,
        pos_fine: impl Into<String>,
    ) -> Self {
        Self {
            surface: surface.into(),
            lemma: lemma.into(),
            pos,
            pos_fine: pos_fine.into(),
            conjugation_form: None,
            span: CharSpan { start: 0, end: 0 },
        }
    }

    pub fn with_form(mut self, form: Option<ConjugationForm>) -> Self {
        self.conjugation_form = form;
        self
    }

    /// `n`th comma-separated level of `pos_fine`, or `"*"` when absent.
    pub fn fine(&self, n: usize) -> &str {
        self.pos_fine.split(',').nth(n).unwrap_or("*")
    }

    fn fine_has(&self, tag: &str) -> bool {
        self.pos_fine.split(',').skip(1).any(|f| f == tag)
    }

    /// Dependent (非自立) or suffix (接尾) words attach to the preceding
    /// content word instead of heading a chunk of their own.
    pub fn is_dependent(&self) -> bool {
        self.fine_has("非自立") || self.fine_has("接尾")
    }

    pub fn is_suffix(&self) -> bool {
        self.pos == PosCoarse::Noun && self.fine(1) == "接尾"
    }

    pub fn is_prefix(&self) -> bool {
        self.fine(0) == "接頭詞" || self.fine(0) == "接頭辞"
    }

    pub fn is_case_particle(&self) -> bool {
        self.pos == PosCoarse::Particle && self.fine(1) == "格助詞"
    }

    pub fn is_conjunctive_particle(&self) -> bool {
        self.pos == PosCoarse::Particle && self.fine(1) == "接続助詞"
    }

    pub fn is_topic_particle(&self) -> bool {
        self.pos == PosCoarse::Particle && self.surface == "は" && self.fine(1) == "係助詞"
    }

    pub fn is_comma(&self) -> bool {
        self.pos == PosCoarse::Symbol && matches!(self.surface.as_str(), "、" | "，" | ",")
    }

    pub fn is_period(&self) -> bool {
        self.pos == PosCoarse::Symbol && matches!(self.surface.as_str(), "。" | "．")
    }

    /// Nouns that can take する directly (サ変接続), e.g. 殺害 in 殺害した.
    pub fn is_sahen_noun(&self) -> bool {
        self.pos == PosCoarse::Noun && self.fine(1) == "サ変接続"
    }

    pub fn is_copula(&self) -> bool {
        self.pos == PosCoarse::Auxiliary && matches!(self.lemma.as_str(), "だ" | "です" | "である")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Fixture,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedSentence {
    pub text: String,
    pub tokens: Vec<Token>,
    pub provenance: Provenance,
}

impl TokenizedSentence {
    /// Places `tokens` into `text`, assigning character spans. Whitespace
    /// between tokens is allowed; any other mismatch is a reconstruction
    /// error.
    pub fn assemble(
        text: &str,
        mut tokens: Vec<Token>,
        provenance: Provenance,
    ) -> Result<Self, AnalysisError> {
        if text.trim().is_empty() {
            return Err(AnalysisError::EmptyInput);
        }
        if tokens.is_empty() {
            return Err(AnalysisError::Reconstruction {
                offset: 0,
                detail: "no tokens for non-empty text".to_string(),
            });
        }
        let chars: Vec<char> = text.chars().collect();
        let mut pos = 0usize;
        for tok in tokens.iter_mut() {
            while pos < chars.len() && chars[pos].is_whitespace() && !tok.surface.starts_with(chars[pos]) {
                pos += 1;
            }
            let len = tok.surface.chars().count();
            if len == 0 {
                return Err(AnalysisError::Reconstruction {
                    offset: pos,
                    detail: "empty token surface".to_string(),
                });
            }
            let matches = pos + len <= chars.len()
                && chars[pos..pos + len].iter().copied().eq(tok.surface.chars());
            if !matches {
                return Err(AnalysisError::Reconstruction {
                    offset: pos,
                    detail: format!("token {:?} does not match the text", tok.surface),
                });
            }
            tok.span = CharSpan { start: pos, end: pos + len };
            pos += len;
        }
        if chars[pos..].iter().any(|c| !c.is_whitespace()) {
            return Err(AnalysisError::Reconstruction {
                offset: pos,
                detail: "text continues past the last token".to_string(),
            });
        }
        Ok(Self { text: text.to_string(), tokens, provenance })
    }

    /// Sentence whose text is the plain concatenation of the token surfaces.
    pub fn from_tokens(tokens: Vec<Token>, provenance: Provenance) -> Result<Self, AnalysisError> {
        let text: String = tokens.iter().map(|t| t.surface.as_str()).collect();
        Self::assemble(&text, tokens, provenance)
    }

    /// Rebuilds the text from token surfaces and the whitespace gaps
    /// between their spans.
    pub fn reconstruct(&self) -> String {
        let chars: Vec<char> = self.text.chars().collect();
        let mut out = String::with_capacity(self.text.len());
        let mut pos = 0;
        for tok in &self.tokens {
            out.extend(chars[pos.min(chars.len())..tok.span.start.min(chars.len())].iter());
            out.push_str(&tok.surface);
            pos = tok.span.end;
        }
        out.extend(chars[pos.min(chars.len())..].iter());
        out
    }

    /// Checks the span invariants: non-empty, strictly increasing,
    /// non-overlapping, and gaps made of whitespace only.
    pub fn check_invariants(&self) -> Result<(), AnalysisError> {
        let chars: Vec<char> = self.text.chars().collect();
        let mut prev_end = 0;
        for tok in &self.tokens {
            let span = tok.span;
            if span.is_empty() || span.start < prev_end || span.end > chars.len() {
                return Err(AnalysisError::Reconstruction {
                    offset: span.start,
                    detail: format!("bad span {}..{} for {:?}", span.start, span.end, tok.surface),
                });
            }
            if chars[prev_end..span.start].iter().any(|c| !c.is_whitespace()) {
                return Err(AnalysisError::Reconstruction {
                    offset: prev_end,
                    detail: "non-whitespace gap between tokens".to_string(),
                });
            }
            if !chars[span.start..span.end].iter().copied().eq(tok.surface.chars()) {
                return Err(AnalysisError::Reconstruction {
                    offset: span.start,
                    detail: format!("span text differs from surface {:?}", tok.surface),
                });
            }
            prev_end = span.end;
        }
        if self.reconstruct() != self.text {
            return Err(AnalysisError::Reconstruction {
                offset: prev_end,
                detail: "surfaces do not reconstruct the text".to_string(),
            });
        }
        Ok(())
    }

    pub fn surfaces(&self, range: core::ops::Range<usize>) -> String {
        self.tokens[range].iter().map(|t| t.surface.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("empty input sentence")]
    EmptyInput,
    #[error("no fixture analysis for {text:?}")]
    FixtureMiss { text: String },
    #[error("malformed analyzer record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("tokens do not reconstruct the text at char {offset}: {detail}")]
    Reconstruction { offset: usize, detail: String },
    #[error("analyzer failure: {0}")]
    Backend(String),
}

/// Produces tokenized sentences. Implementations must be deterministic.
pub trait Analyzer {
    fn analyze(&self, text: &str) -> Result<TokenizedSentence, AnalysisError>;
}

/// Lookup-only analyzer over gold analyses keyed by exact sentence text.
#[derive(Debug, Clone, Default)]
pub struct FixtureAnalyzer {
    by_text: BTreeMap<String, TokenizedSentence>,
}

impl FixtureAnalyzer {
    pub fn new(sentences: impl IntoIterator<Item = TokenizedSentence>) -> Self {
        let by_text = sentences
            .into_iter()
            .map(|mut s| {
                s.provenance = Provenance::Fixture;
                (s.text.clone(), s)
            })
            .collect();
        Self { by_text }
    }

    pub fn len(&self) -> usize {
        self.by_text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_text.is_empty()
    }

    pub fn contains(&self, text: &str) -> bool {
        self.by_text.contains_key(text)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &TokenizedSentence> {
        self.by_text.values()
    }
}

impl Analyzer for FixtureAnalyzer {
    fn analyze(&self, text: &str) -> Result<TokenizedSentence, AnalysisError> {
        if text.trim().is_empty() {
            return Err(AnalysisError::EmptyInput);
        }
        self.by_text
            .get(text)
            .cloned()
            .ok_or_else(|| AnalysisError::FixtureMiss { text: text.to_string() })
    }
}

/// Maps the top-level part-of-speech tag to a coarse class. Covers the
/// IPADIC names and the UniDic names that differ from them.
pub fn coarse_pos(tag: &str) -> PosCoarse {
    match tag {
        "名詞" | "代名詞" => PosCoarse::Noun,
        "動詞" => PosCoarse::Verb,
        "形容詞" => PosCoarse::Adjective,
        "助詞" => PosCoarse::Particle,
        "助動詞" => PosCoarse::Auxiliary,
        "副詞" => PosCoarse::Adverb,
        "記号" | "補助記号" => PosCoarse::Symbol,
        _ => PosCoarse::Other,
    }
}

/// Maps an IPADIC/UniDic conjugation form name. `*` means no conjugation.
pub fn conjugation_form(tag: &str) -> Option<ConjugationForm> {
    match tag {
        "*" | "" => None,
        "基本形" | "終止形-一般" => Some(ConjugationForm::Terminal),
        "連体形" | "体言接続" | "体言接続特殊" | "体言接続特殊２" | "連体形-一般" => {
            Some(ConjugationForm::Adnominal)
        }
        t if t.starts_with("連用") => Some(ConjugationForm::Continuative),
        _ => Some(ConjugationForm::Other),
    }
}

/// Minimum feature count of an IPADIC record (unknown words carry 7).
const MIN_FEATURES: usize = 7;

/// Parses MeCab-style output (`surface<TAB>features`, one token per line,
/// `EOS` terminating the sentence) for a single sentence.
pub fn parse_external_analysis(stream: &str) -> Result<TokenizedSentence, AnalysisError> {
    let mut sentences = parse_external_stream(stream)?;
    match sentences.len() {
        0 => Err(AnalysisError::EmptyInput),
        1 => Ok(sentences.remove(0)),
        n => Err(AnalysisError::MalformedRecord {
            line: 0,
            reason: format!("expected one sentence, found {n}"),
        }),
    }
}

/// Parses a stream that may hold several `EOS`-terminated sentences.
pub fn parse_external_stream(stream: &str) -> Result<Vec<TokenizedSentence>, AnalysisError> {
    let mut out = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let mut terminated = true;
    for (idx, raw) in stream.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line == "EOS" {
            if !current.is_empty() {
                out.push(TokenizedSentence::from_tokens(
                    core::mem::take(&mut current),
                    Provenance::External,
                )?);
            }
            terminated = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        terminated = false;
        current.push(parse_record(line, line_no)?);
    }
    if !terminated {
        return Err(AnalysisError::MalformedRecord {
            line: stream.lines().count(),
            reason: "missing EOS marker".to_string(),
        });
    }
    Ok(out)
}

fn parse_record(line: &str, line_no: usize) -> Result<Token, AnalysisError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 2 {
        return Err(AnalysisError::MalformedRecord {
            line: line_no,
            reason: format!("expected 2 tab-separated fields, found {}", fields.len()),
        });
    }
    let (surface, features) = (fields[0], fields[1]);
    if surface.is_empty() {
        return Err(AnalysisError::MalformedRecord { line: line_no, reason: "empty surface".to_string() });
    }
    let feats: Vec<&str> = features.split(',').collect();
    if feats.len() < MIN_FEATURES {
        return Err(AnalysisError::MalformedRecord {
            line: line_no,
            reason: format!("expected at least {MIN_FEATURES} features, found {}", feats.len()),
        });
    }
    let lemma = match feats[6] {
        "*" | "" => surface,
        l => l,
    };
    let pos_fine = feats[..4].join(",");
    Ok(Token::new(surface, lemma, coarse_pos(feats[0]), pos_fine).with_form(conjugation_form(feats[5])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const SAMPLE: &str = "太郎\t名詞,固有名詞,人名,名,*,*,太郎,タロウ,タロー\n\
                          は\t助詞,係助詞,*,*,*,*,は,ハ,ワ\n\
                          EOS\n";

    #[test]
    fn two_records_make_a_two_token_sentence() {
        let s = parse_external_analysis(SAMPLE).unwrap();
        assert_eq!(s.text, "太郎は");
        assert_eq!(s.tokens.len(), 2);
        assert_eq!(s.tokens[0].pos, PosCoarse::Noun);
        assert_eq!(s.tokens[0].pos_fine, "名詞,固有名詞,人名,名");
        assert_eq!(s.tokens[1].span, CharSpan { start: 2, end: 3 });
        assert_eq!(s.provenance, Provenance::External);
    }

    #[test]
    fn single_field_record_is_malformed_at_line_one() {
        let err = parse_external_analysis("太郎\nEOS\n").unwrap_err();
        assert_eq!(err, AnalysisError::MalformedRecord {
            line: 1,
            reason: "expected 2 tab-separated fields, found 1".to_string()
        });
    }

    #[test]
    fn unknown_pos_maps_to_other_and_keeps_tag() {
        let s = parse_external_analysis("ありがとう\t感動詞,*,*,*,*,*,ありがとう,アリガトウ,アリガトー\nEOS\n")
            .unwrap();
        assert_eq!(s.tokens[0].pos, PosCoarse::Other);
        assert_eq!(s.tokens[0].pos_fine, "感動詞,*,*,*");
    }

    #[test]
    fn missing_eos_is_reported() {
        let err = parse_external_analysis("太郎\t名詞,固有名詞,人名,名,*,*,太郎\n").unwrap_err();
        assert!(matches!(err, AnalysisError::MalformedRecord { .. }));
    }

    #[test]
    fn conjugation_forms() {
        assert_eq!(conjugation_form("基本形"), Some(ConjugationForm::Terminal));
        assert_eq!(conjugation_form("連用タ接続"), Some(ConjugationForm::Continuative));
        assert_eq!(conjugation_form("体言接続"), Some(ConjugationForm::Adnominal));
        assert_eq!(conjugation_form("未然形"), Some(ConjugationForm::Other));
        assert_eq!(conjugation_form("*"), None);
    }

    #[test]
    fn assemble_allows_whitespace_gaps() {
        let toks = vec![
            Token::new("答え", "答え", PosCoarse::Noun, "名詞,一般,*,*"),
            Token::new("太郎", "太郎", PosCoarse::Noun, "名詞,固有名詞,人名,名"),
        ];
        let s = TokenizedSentence::assemble("答え 太郎", toks, Provenance::External).unwrap();
        assert_eq!(s.tokens[1].span, CharSpan { start: 3, end: 5 });
        assert_eq!(s.reconstruct(), "答え 太郎");
        s.check_invariants().unwrap();
    }

    #[test]
    fn assemble_rejects_mismatch() {
        let toks = vec![Token::new("太郎", "太郎", PosCoarse::Noun, "名詞,一般,*,*")];
        assert!(matches!(
            TokenizedSentence::assemble("次郎", toks, Provenance::External),
            Err(AnalysisError::Reconstruction { .. })
        ));
    }

    #[test]
    fn fixture_analyzer_errors() {
        let a = FixtureAnalyzer::new([parse_external_analysis(SAMPLE).unwrap()]);
        assert_eq!(a.analyze("  "), Err(AnalysisError::EmptyInput));
        assert_eq!(a.analyze(""), Err(AnalysisError::EmptyInput));
        assert!(matches!(a.analyze("未知の文です。"), Err(AnalysisError::FixtureMiss { .. })));
        let s = a.analyze("太郎は").unwrap();
        assert_eq!(s.provenance, Provenance::Fixture);
        assert_eq!(s, a.analyze("太郎は").unwrap());
    }
}
