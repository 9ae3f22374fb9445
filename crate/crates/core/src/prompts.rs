//! Zero-shot prompt templates and the translation strategies built on them.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::clause::ClauseRules;
use crate::morphology::TokenizedSentence;
use crate::preedit::{preedit, PreEditError};

const SLOT: &str = "{payload}";
const DEFAULT_LANGUAGE: &str = "Chinese";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStep {
    DirectTranslate,
    IdentifyHeadNoun,
    Restructure,
    TranslateRestructured,
}

impl PromptStep {
    pub const ALL: [PromptStep; 4] = [
        Self::DirectTranslate,
        Self::IdentifyHeadNoun,
        Self::Restructure,
        Self::TranslateRestructured,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DirectTranslate => "direct-translate",
            Self::IdentifyHeadNoun => "identify-head-noun",
            Self::Restructure => "restructure",
            Self::TranslateRestructured => "translate-restructured",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Translate the source directly.
    Baseline,
    /// Ask the model for the head noun, let it restructure the sentence,
    /// then translate its restructuring.
    LlmAssisted,
    /// Restructure locally with [`preedit`], then translate.
    LocalPreEdit,
}

impl Strategy {
    pub fn steps(self) -> &'static [PromptStep] {
        match self {
            Self::Baseline => &[PromptStep::DirectTranslate],
            Self::LlmAssisted => &[
                PromptStep::IdentifyHeadNoun,
                PromptStep::Restructure,
                PromptStep::TranslateRestructured,
            ],
            Self::LocalPreEdit => &[PromptStep::TranslateRestructured],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::LlmAssisted => "llm-assisted",
            Self::LocalPreEdit => "local-preedit",
        }
    }
}

impl core::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "llm-assisted" => Ok(Self::LlmAssisted),
            "local-preedit" => Ok(Self::LocalPreEdit),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("empty prompt payload")]
    EmptyPayload,
    #[error("template for {0:?} has no {{payload}} slot")]
    MissingSlot(PromptStep),
    #[error("no Japanese noun found in response {0:?}")]
    Unparseable(String),
}

/// One template per [`PromptStep`], each with a single `{payload}` slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    direct_translate: String,
    identify_head_noun: String,
    restructure: String,
    translate_restructured: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            direct_translate: include_str!("../templates/direct_translate.txt").to_owned(),
            identify_head_noun: include_str!("../templates/identify_head_noun.txt").to_owned(),
            restructure: include_str!("../templates/restructure.txt").to_owned(),
            translate_restructured: include_str!("../templates/translate_restructured.txt").to_owned(),
        }
    }
}

impl PromptTemplates {
    pub fn from_parts(
        direct_translate: impl Into<String>,
        identify_head_noun: impl Into<String>,
        restructure: impl Into<String>,
        translate_restructured: impl Into<String>,
    ) -> Result<Self, PromptError> {
        let t = Self {
            direct_translate: direct_translate.into(),
            identify_head_noun: identify_head_noun.into(),
            restructure: restructure.into(),
            translate_restructured: translate_restructured.into(),
        };
        for step in PromptStep::ALL {
            if t.template(step).matches(SLOT).count() != 1 {
                return Err(PromptError::MissingSlot(step));
            }
        }
        Ok(t)
    }

    /// Replaces the target-language word and nothing else.
    pub fn with_target_language(mut self, language: &str) -> Self {
        for t in [
            &mut self.direct_translate,
            &mut self.identify_head_noun,
            &mut self.restructure,
            &mut self.translate_restructured,
        ] {
            *t = t.replace(DEFAULT_LANGUAGE, language);
        }
        self
    }

    pub fn template(&self, step: PromptStep) -> &str {
        match step {
            PromptStep::DirectTranslate => &self.direct_translate,
            PromptStep::IdentifyHeadNoun => &self.identify_head_noun,
            PromptStep::Restructure => &self.restructure,
            PromptStep::TranslateRestructured => &self.translate_restructured,
        }
    }

    pub fn render(&self, step: PromptStep, payload: &str) -> Result<String, PromptError> {
        if payload.trim().is_empty() {
            return Err(PromptError::EmptyPayload);
        }
        let template = self.template(step);
        let Some((before, after)) = template.split_once(SLOT) else {
            return Err(PromptError::MissingSlot(step));
        };
        let mut out = String::with_capacity(template.len() + payload.len());
        out.push_str(before);
        out.push_str(payload);
        out.push_str(after);
        Ok(out)
    }
}

/// Renders with the default templates.
pub fn render(step: PromptStep, payload: &str) -> Result<String, PromptError> {
    PromptTemplates::default().render(step, payload)
}

fn is_japanese(c: char) -> bool {
    matches!(c,
        '\u{3040}'..='\u{309F}' | '\u{30A0}'..='\u{30FF}' | '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}' | '\u{F900}'..='\u{FAFF}' | '々' | '〆')
}

fn is_hiragana(c: char) -> bool {
    ('\u{3040}'..='\u{309F}').contains(&c)
}

const QUOTES: [(&str, &str); 7] = [
    ("「", "」"),
    ("『", "』"),
    ("“", "”"),
    ("‘", "’"),
    ("**", "**"),
    ("\"", "\""),
    ("*", "*"),
];

const COPULAS: [&str; 4] = ["である", "です", "だ", "でした"];
const PARTICLES: [char; 7] = ['は', 'が', 'を', 'に', 'で', 'と', 'も'];

/// Extracts the head noun from the model's answer to the identification
/// prompt: a quoted or emphasized Japanese span if there is one, otherwise
/// the longest Japanese word in the final clause.
pub fn parse_head_noun_response(response: &str) -> Result<String, PromptError> {
    for (open, close) in QUOTES {
        let mut rest = response;
        while let Some(start) = rest.find(open) {
            let after = &rest[start + open.len()..];
            let Some(end) = after.find(close) else { break };
            let inner = after[..end].trim();
            if !inner.is_empty() && inner.chars().all(is_japanese) {
                return Ok(inner.to_string());
            }
            rest = &after[end + close.len()..];
        }
    }

    let clause = response
        .split(['.', '。', '!', '?', '！', '？', '\n'])
        .rfind(|s| s.chars().any(is_japanese))
        .ok_or_else(|| PromptError::Unparseable(response.to_string()))?;
    let mut words: Vec<&str> = clause
        .split(|c: char| !is_japanese(c))
        .filter(|w| !w.is_empty())
        .map(|w| COPULAS.iter().fold(w, |w, c| w.strip_suffix(c).filter(|s| !s.is_empty()).unwrap_or(w)))
        .filter(|w| !w.chars().all(is_hiragana))
        .collect();
    if words.is_empty() {
        return Err(PromptError::Unparseable(response.to_string()));
    }
    let bare: Vec<&str> = words
        .iter()
        .copied()
        .filter(|w| !w.ends_with(PARTICLES))
        .collect();
    if !bare.is_empty() {
        words = bare;
    }
    // longest wins; ties go to the later word
    let mut best = words[0];
    for w in &words[1..] {
        if w.chars().count() >= best.chars().count() {
            best = w;
        }
    }
    Ok(best.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: ChatRole::User, content: content.into() }
    }
}

/// A chat-completion backend. Every prompt step is sent as its own
/// single-turn conversation.
pub trait ChatBackend {
    type Error: fmt::Debug + fmt::Display;

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, Self::Error>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    type Error = B::Error;

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, Self::Error> {
        (**self).complete(messages)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: PromptStep,
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
}

/// One pipeline run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub sentence_id: String,
    pub strategy: Strategy,
    pub steps: Vec<StepRecord>,
    pub final_text: String,
    /// Source actually translated in the last step when it differs from the
    /// original sentence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restructured_source: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Timestamps>,
}

impl TranslationRecord {
    pub fn prompts(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.prompt.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError<E: fmt::Debug + fmt::Display> {
    #[error("backend error: {0}")]
    Backend(E),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    NotInScope(#[from] PreEditError),
}

/// Templates plus clause rules: everything a strategy run needs besides
/// the backend.
#[derive(Debug, Clone, Default)]
pub struct Pipeline {
    pub templates: PromptTemplates,
    pub rules: ClauseRules,
}

impl Pipeline {
    fn exchange<B: ChatBackend>(
        &self,
        backend: &B,
        step: PromptStep,
        payload: &str,
        steps: &mut Vec<StepRecord>,
    ) -> Result<String, StrategyError<B::Error>> {
        let prompt = self.templates.render(step, payload)?;
        let response = backend
            .complete(&[ChatMessage::user(prompt.clone())])
            .map_err(StrategyError::Backend)?;
        steps.push(StepRecord { step, prompt, response: response.clone() });
        Ok(response)
    }

    /// Runs `strategy` on `sentence`, threading each response into the next
    /// prompt.
    pub fn run_strategy<B: ChatBackend>(
        &self,
        strategy: Strategy,
        sentence_id: &str,
        sentence: &TokenizedSentence,
        backend: &B,
    ) -> Result<TranslationRecord, StrategyError<B::Error>> {
        let source = sentence.text.as_str();
        let mut steps = Vec::new();
        let mut diagnostics = Vec::new();
        let mut restructured_source = None;
        let mut strategy_run = strategy;

        let final_text = match strategy {
            Strategy::Baseline => self.exchange(backend, PromptStep::DirectTranslate, source, &mut steps)?,
            Strategy::LocalPreEdit => {
                let (candidate, decision) = self.rules.scope_check(sentence);
                let candidate = candidate
                    .filter(|_| decision.in_scope)
                    .ok_or(PreEditError::NotInScope { reasons: decision.reasons })?;
                let edited = preedit(&self.rules, sentence, &candidate)?.joined();
                let out = self.exchange(backend, PromptStep::TranslateRestructured, &edited, &mut steps)?;
                restructured_source = Some(edited);
                out
            }
            Strategy::LlmAssisted => {
                let mut probe = Vec::new();
                let answer = self.exchange(backend, PromptStep::IdentifyHeadNoun, source, &mut probe)?;
                match parse_head_noun_response(&answer) {
                    Err(e) => {
                        diagnostics.push(format!("{e}; falling back to baseline"));
                        strategy_run = Strategy::Baseline;
                        self.exchange(backend, PromptStep::DirectTranslate, source, &mut steps)?
                    }
                    Ok(head) => {
                        steps.append(&mut probe);
                        let trimmed = source.trim_end().trim_end_matches('。');
                        let restructured = self.exchange(backend, PromptStep::Restructure, trimmed, &mut steps)?;
                        let restructured = restructured.trim().to_string();
                        diagnostics.extend(self.compare_with_local(sentence, &head, &restructured));
                        let out =
                            self.exchange(backend, PromptStep::TranslateRestructured, &restructured, &mut steps)?;
                        restructured_source = Some(restructured);
                        out
                    }
                }
            }
        };

        Ok(TranslationRecord {
            sentence_id: sentence_id.to_string(),
            strategy: strategy_run,
            steps,
            final_text,
            restructured_source,
            diagnostics,
            timestamps: None,
        })
    }

    /// Differences between the model's head noun and restructuring and the
    /// local engine's.
    fn compare_with_local(&self, sentence: &TokenizedSentence, llm_head: &str, llm_restructured: &str) -> Vec<String> {
        let mut out = Vec::new();
        let (candidate, decision) = self.rules.scope_check(sentence);
        let Some(candidate) = candidate else {
            out.push("local analysis found no attributive clause".to_string());
            return out;
        };
        let local_head = candidate.head_noun_surface(sentence);
        if local_head != llm_head {
            out.push(format!("head noun differs: model {llm_head:?}, local {local_head:?}"));
        }
        if !decision.in_scope {
            out.push("local analysis: sentence out of scope".to_string());
            return out;
        }
        if let Ok(local) = preedit(&self.rules, sentence, &candidate) {
            if local.joined() != llm_restructured {
                out.push(format!(
                    "restructuring differs: model {llm_restructured:?}, local {:?}",
                    local.joined()
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_inserts_payload_verbatim() {
        assert_eq!(
            render(PromptStep::DirectTranslate, "太郎は頭を下げた。").unwrap(),
            "Translate the following sentence into Chinese: 太郎は頭を下げた。"
        );
        assert_eq!(
            render(PromptStep::TranslateRestructured, "太郎は頭を下げた。").unwrap(),
            "Translate the following sentence into Chinese. 太郎は頭を下げた。"
        );
        assert_eq!(render(PromptStep::Restructure, ""), Err(PromptError::EmptyPayload));
        assert_eq!(render(PromptStep::Restructure, " \n"), Err(PromptError::EmptyPayload));
    }

    #[test]
    fn language_override_touches_only_the_language_word() {
        let t = PromptTemplates::default().with_target_language("English");
        assert_eq!(
            t.render(PromptStep::DirectTranslate, "x").unwrap(),
            "Translate the following sentence into English: x"
        );
        assert_eq!(
            t.template(PromptStep::Restructure),
            PromptTemplates::default().template(PromptStep::Restructure)
        );
    }

    #[test]
    fn templates_need_exactly_one_slot() {
        assert_eq!(
            PromptTemplates::from_parts("a {payload}", "b", "c {payload}", "d {payload}"),
            Err(PromptError::MissingSlot(PromptStep::IdentifyHeadNoun))
        );
        assert!(PromptTemplates::from_parts("{payload}", "{payload}", "{payload}", "{payload}").is_ok());
    }

    #[test]
    fn strategy_step_lists() {
        assert_eq!(Strategy::Baseline.steps(), [PromptStep::DirectTranslate]);
        assert_eq!(Strategy::LlmAssisted.steps().len(), 3);
        assert_eq!(Strategy::LocalPreEdit.steps(), [PromptStep::TranslateRestructured]);
        for s in [Strategy::Baseline, Strategy::LlmAssisted, Strategy::LocalPreEdit] {
            assert_eq!(s.name().parse::<Strategy>(), Ok(s));
        }
    }

    #[test]
    fn head_noun_extraction() {
        assert_eq!(parse_head_noun_response("答えは 太郎 です").unwrap(), "太郎");
        assert_eq!(parse_head_noun_response("修飾されている名詞は「私」です。").unwrap(), "私");
        assert_eq!(parse_head_noun_response("The modified noun is **ユカリ** (Yukari).").unwrap(), "ユカリ");
        assert!(matches!(
            parse_head_noun_response("I cannot determine it."),
            Err(PromptError::Unparseable(_))
        ));
    }
}
