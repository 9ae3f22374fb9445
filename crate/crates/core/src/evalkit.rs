//! Translation quality rubric, annotations and aggregate reports.
//!
//! All arithmetic is exact (`Ratio<i64>`); rounding happens only when a
//! value is displayed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::clause::SubordinationClass;

/// Five-level Japanese-Chinese translation quality scale, best first.
pub const RUBRIC_LEVELS: [(u8, &str); 5] = [
    (
        5,
        "The original information is complete and accurate, with no omissions or mistranslations, and no grammatical errors. The translated content is natural and fluent, and is identical to the original content. Native Chinese speakers can easily understand the translation and obtain semantic information that is essentially the same as in the original text.",
    ),
    (
        4,
        "The original information is error-free, with no omissions or mistranslations, and no grammatical errors. The translated content closely resembles the original content in meaning and is also clear and natural. Native Chinese speakers can easily understand the translation and obtain semantic information that is essentially the same as in the original text.",
    ),
    (
        3,
        "The original information is largely complete and accurate, with few omissions or mistranslations, and few or no grammatical errors. The translated content is similar to the original content in meaning and is mostly clear and easy to understand. Native Chinese speakers can comprehend the translation with relative ease and obtain most of the semantic information in the original text.",
    ),
    (
        2,
        "The original information contains serious omissions or mistranslations, or major grammatical errors. The translated content significantly differs from the original content in meaning and is difficult to understand. Native Chinese speakers can comprehend the translation with difficulty but cannot obtain the same semantic information as in the original text.",
    ),
    (
        1,
        "The translation is incomprehensible to native Chinese speakers and fails to convey the intended meaning of the original text.",
    ),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rubric {
    levels: BTreeMap<u8, String>,
}

impl Default for Rubric {
    fn default() -> Self {
        Self { levels: RUBRIC_LEVELS.iter().map(|(k, v)| (*k, v.to_string())).collect() }
    }
}

impl Rubric {
    pub fn new(levels: BTreeMap<u8, String>) -> Result<Self, EvalError> {
        let keys: Vec<u8> = levels.keys().copied().collect();
        if keys != [1, 2, 3, 4, 5] || levels.values().any(|d| d.trim().is_empty()) {
            return Err(EvalError::InvalidRubric);
        }
        Ok(Self { levels })
    }

    pub fn describe(&self, score: Score) -> &str {
        &self.levels[&score.get()]
    }

    /// Levels from best to worst.
    pub fn levels(&self) -> impl Iterator<Item = (Score, &str)> {
        self.levels.iter().rev().map(|(k, v)| (Score(*k), v.as_str()))
    }
}

/// A rubric score, always in 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Score(u8);

impl Score {
    pub fn new(v: i64) -> Result<Self, EvalError> {
        if (1..=5).contains(&v) {
            Ok(Self(v as u8))
        } else {
            Err(EvalError::ScoreOutOfRange(v))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Score::new(v).map_err(serde::de::Error::custom)
    }
}

/// What was scored: the translation before or after the prompt, or any
/// other named strategy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    BeforePrompt,
    AfterPrompt,
    Named(String),
}

impl Variant {
    pub fn as_str(&self) -> &str {
        match self {
            Self::BeforePrompt => "before_prompt",
            Self::AfterPrompt => "after_prompt",
            Self::Named(s) => s,
        }
    }
}

impl From<&str> for Variant {
    fn from(s: &str) -> Self {
        match s {
            "before_prompt" => Self::BeforePrompt,
            "after_prompt" => Self::AfterPrompt,
            other => Self::Named(other.to_string()),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl Serialize for Variant {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Variant::from(s.as_str()))
    }
}

/// Target-side ordering chosen by a translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternChoice {
    /// Clause content first, then the main clause.
    #[serde(rename = "pattern_i")]
    PatternI,
    /// Modified noun and main clause first, clause content after.
    #[serde(rename = "pattern_ii")]
    PatternII,
    Other,
}

impl PatternChoice {
    pub const ALL: [PatternChoice; 3] = [Self::PatternI, Self::PatternII, Self::Other];

    pub fn label(self) -> &'static str {
        match self {
            Self::PatternI => "Pattern I",
            Self::PatternII => "Pattern II",
            Self::Other => "Others",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternLabel {
    pub class: SubordinationClass,
    pub choice: PatternChoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub entry_id: String,
    pub variant: Variant,
    pub score: Score,
    pub annotator_id: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("score {0} outside 1..=5")]
    ScoreOutOfRange(i64),
    #[error("no annotations for variant {0}")]
    EmptyVariant(Variant),
    #[error("rubric must define non-empty levels 1 to 5")]
    InvalidRubric,
    #[error("no pattern labels to tally")]
    NoLabels,
}

/// Exact rational, serialized as a numerator/denominator pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(pub Ratio<i64>);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        Self(Ratio::new(numer, denom))
    }

    pub fn from_integer(v: i64) -> Self {
        Self(Ratio::from_integer(v))
    }

    /// Value rounded half away from zero to one decimal, e.g. `3.2`.
    pub fn one_decimal(&self) -> String {
        let tenths = (self.0 * Ratio::from_integer(10)).round().to_integer();
        let sign = if tenths < 0 { "-" } else { "" };
        let abs = tenths.abs();
        format!("{sign}{}.{}", abs / 10, abs % 10)
    }

    /// One decimal with a trailing `.0` dropped, e.g. `60` or `87.5`.
    pub fn compact(&self) -> String {
        let s = self.one_decimal();
        match s.strip_suffix(".0") {
            Some("-0") => "0".to_string(),
            Some(t) => t.to_string(),
            None => s,
        }
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.one_decimal())
    }
}

#[derive(Serialize, Deserialize)]
struct RationalRepr {
    numerator: i64,
    denominator: i64,
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RationalRepr { numerator: *self.0.numer(), denominator: *self.0.denom() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = RationalRepr::deserialize(d)?;
        if r.denominator == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Self::new(r.numerator, r.denominator))
    }
}

fn mean(scores: &[Score]) -> Option<Rational> {
    if scores.is_empty() {
        return None;
    }
    let sum: i64 = scores.iter().map(|s| i64::from(s.get())).sum();
    Some(Rational::new(sum, scores.len() as i64))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub n: usize,
    pub mean: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryDelta {
    pub entry_id: String,
    pub before: Rational,
    pub after: Rational,
    pub delta: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub n: usize,
    pub before: VariantSummary,
    pub after: VariantSummary,
    /// (mean_after − mean_before) / mean_before × 100.
    pub improvement_percent: Option<Rational>,
    /// Every variant present in the input, including uncompared ones.
    pub variants: Vec<VariantSummary>,
    /// Entries scored under both compared variants.
    pub per_entry: Vec<EntryDelta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_tally: Option<PatternTally>,
}

impl Report {
    /// `before 3.2, after 4.4, +37.5%`
    pub fn summary_line(&self) -> String {
        let improvement = match &self.improvement_percent {
            Some(p) if !p.0.is_negative() => format!("+{}%", p.compact()),
            Some(p) => format!("{}%", p.compact()),
            None => "n/a".to_string(),
        };
        format!(
            "before {}, after {}, {}",
            self.before.mean.one_decimal(),
            self.after.mean.one_decimal(),
            improvement
        )
    }

    /// Table-style `Average 3.2 4.4 (37.5%)` cell text.
    pub fn average_cells(&self) -> (String, String) {
        let after = match &self.improvement_percent {
            Some(p) => format!("{} ({}%)", self.after.mean.one_decimal(), p.compact()),
            None => self.after.mean.one_decimal(),
        };
        (self.before.mean.one_decimal(), after)
    }
}

/// Compares `BeforePrompt` against `AfterPrompt`.
pub fn aggregate(annotations: &[Annotation]) -> Result<Report, EvalError> {
    aggregate_between(annotations, &Variant::BeforePrompt, &Variant::AfterPrompt)
}

pub fn aggregate_between(
    annotations: &[Annotation],
    before: &Variant,
    after: &Variant,
) -> Result<Report, EvalError> {
    let mut by_variant: BTreeMap<&Variant, Vec<Score>> = BTreeMap::new();
    let mut by_entry: BTreeMap<(&str, &Variant), Vec<Score>> = BTreeMap::new();
    for a in annotations {
        by_variant.entry(&a.variant).or_default().push(a.score);
        by_entry.entry((a.entry_id.as_str(), &a.variant)).or_default().push(a.score);
    }
    let summary = |v: &Variant| -> Result<VariantSummary, EvalError> {
        let scores = by_variant.get(v).ok_or_else(|| EvalError::EmptyVariant(v.clone()))?;
        Ok(VariantSummary { variant: v.clone(), n: scores.len(), mean: mean(scores).expect("non-empty") })
    };
    let before_s = summary(before)?;
    let after_s = summary(after)?;
    let improvement_percent = (!before_s.mean.0.is_zero()).then(|| {
        Rational((after_s.mean.0 - before_s.mean.0) / before_s.mean.0 * Ratio::from_integer(100))
    });
    let variants = by_variant
        .iter()
        .map(|(v, s)| VariantSummary { variant: (*v).clone(), n: s.len(), mean: mean(s).expect("non-empty") })
        .collect();

    let mut entries: Vec<&str> = annotations.iter().map(|a| a.entry_id.as_str()).collect();
    entries.sort_unstable();
    entries.dedup();
    let per_entry = entries
        .into_iter()
        .filter_map(|id| {
            let b = mean(by_entry.get(&(id, before))?)?;
            let a = mean(by_entry.get(&(id, after))?)?;
            Some(EntryDelta { entry_id: id.to_string(), before: b, after: a, delta: Rational(a.0 - b.0) })
        })
        .collect();

    let labels: Vec<PatternLabel> = annotations.iter().filter_map(|a| a.pattern).collect();
    let pattern_tally = (!labels.is_empty()).then(|| tally_patterns(&labels)).transpose()?;

    Ok(Report {
        n: annotations.len(),
        before: before_s,
        after: after_s,
        improvement_percent,
        variants,
        per_entry,
        pattern_tally,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyCell {
    pub class: SubordinationClass,
    pub choice: PatternChoice,
    pub count: usize,
    /// Share of the class column, in percent.
    pub percent: Option<Rational>,
}

/// Counts of pattern choices per subordination class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternTally {
    pub cells: Vec<TallyCell>,
    pub column_totals: BTreeMap<SubordinationClass, usize>,
}

const COLUMNS: [SubordinationClass; 2] = [SubordinationClass::ClauseStronger, SubordinationClass::Equal];

impl PatternTally {
    pub fn count(&self, class: SubordinationClass, choice: PatternChoice) -> usize {
        self.cell(class, choice).map_or(0, |c| c.count)
    }

    pub fn percent(&self, class: SubordinationClass, choice: PatternChoice) -> Option<Rational> {
        self.cell(class, choice).and_then(|c| c.percent)
    }

    fn cell(&self, class: SubordinationClass, choice: PatternChoice) -> Option<&TallyCell> {
        self.cells.iter().find(|c| c.class == class && c.choice == choice)
    }

    pub fn total(&self) -> usize {
        self.column_totals.values().sum()
    }

    /// Renders the tally as a table: one row per pattern, one column per
    /// subordination class, each cell `count (percent%)`.
    pub fn render(&self) -> String {
        let header = |c: SubordinationClass| match c {
            SubordinationClass::ClauseStronger => "attributive clause verb > main clause verb",
            SubordinationClass::Equal => "attributive clause verb = main clause verb",
        };
        let cell = |count: usize, pct: Option<Rational>| match pct {
            Some(p) => format!("{count} ({}%)", p.compact()),
            None => format!("{count} (-)"),
        };
        let mut rows: Vec<[String; 3]> = Vec::new();
        rows.push([String::new(), header(COLUMNS[0]).to_string(), header(COLUMNS[1]).to_string()]);
        for choice in PatternChoice::ALL {
            rows.push([
                choice.label().to_string(),
                cell(self.count(COLUMNS[0], choice), self.percent(COLUMNS[0], choice)),
                cell(self.count(COLUMNS[1], choice), self.percent(COLUMNS[1], choice)),
            ]);
        }
        let total = |c: SubordinationClass| {
            let n = self.column_totals.get(&c).copied().unwrap_or(0);
            cell(n, (n > 0).then(|| Rational::from_integer(100)))
        };
        rows.push(["Total".to_string(), total(COLUMNS[0]), total(COLUMNS[1])]);

        let width = |i: usize| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0);
        let (w0, w1) = (width(0), width(1));
        let mut out = String::new();
        for r in &rows {
            let pad = |s: &str, w: usize| {
                let mut s = s.to_string();
                s.extend(core::iter::repeat_n(' ', w - s.chars().count()));
                s
            };
            let line = format!("{}  {}  {}", pad(&r[0], w0), pad(&r[1], w1), r[2]);
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Counts and per-class column percentages.
pub fn tally_patterns(labels: &[PatternLabel]) -> Result<PatternTally, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::NoLabels);
    }
    let mut counts: BTreeMap<(SubordinationClass, PatternChoice), usize> = BTreeMap::new();
    let mut column_totals: BTreeMap<SubordinationClass, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry((l.class, l.choice)).or_insert(0) += 1;
        *column_totals.entry(l.class).or_insert(0) += 1;
    }
    let cells = COLUMNS
        .iter()
        .flat_map(|&class| PatternChoice::ALL.iter().map(move |&choice| (class, choice)))
        .map(|(class, choice)| {
            let count = counts.get(&(class, choice)).copied().unwrap_or(0);
            let total = column_totals.get(&class).copied().unwrap_or(0);
            let percent = (total > 0).then(|| Rational::new(100 * count as i64, total as i64));
            TallyCell { class, choice, count, percent }
        })
        .collect();
    Ok(PatternTally { cells, column_totals })
}
