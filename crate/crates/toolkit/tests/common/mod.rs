#![allow(dead_code)]

use attrclause_core::morphology::{ConjugationForm, PosCoarse, Provenance, Token, TokenizedSentence};
use proptest::prelude::*;

pub const HEADS: [(&str, &str); 6] = [
    ("太郎", "名詞,固有名詞,人名,名"),
    ("梶", "名詞,固有名詞,人名,姓"),
    ("平介", "名詞,固有名詞,人名,名"),
    ("ユカリ", "名詞,固有名詞,人名,名"),
    ("私", "名詞,代名詞,一般,*"),
    ("女性", "名詞,一般,*,*"),
];

pub const ARGS: [&str; 8] = ["テレビ", "頭", "啓子", "ケーキ", "洋服", "スイッチ", "レジ", "和室"];

/// (stem, lemma) of verbs whose past form is stem + た.
pub const VERBS: [(&str, &str); 6] = [
    ("壊し", "壊す"),
    ("買っ", "買う"),
    ("見", "見る"),
    ("食べ", "食べる"),
    ("入れ", "入れる"),
    ("下げ", "下げる"),
];

const CASES: [&str; 3] = ["を", "に", "で"];

fn noun(s: &str, fine: &str) -> Token {
    Token::new(s, s, PosCoarse::Noun, fine)
}

fn case(p: &str) -> Token {
    Token::new(p, p, PosCoarse::Particle, "助詞,格助詞,一般,*")
}

fn past(stem: &str, lemma: &str) -> [Token; 2] {
    [
        Token::new(stem, lemma, PosCoarse::Verb, "動詞,自立,*,*").with_form(Some(ConjugationForm::Continuative)),
        Token::new("た", "た", PosCoarse::Auxiliary, "助動詞,*,*,*").with_form(Some(ConjugationForm::Terminal)),
    ]
}

fn args(nouns: &[usize], cases: &[usize]) -> Vec<Token> {
    nouns
        .iter()
        .zip(cases)
        .flat_map(|(&n, &c)| [noun(ARGS[n], "名詞,一般,*,*"), case(CASES[c])])
        .collect()
}

/// [args を/に/で]* V-た HEAD は [args]* V-た 。 with a nominative gap, a
/// verbal main predicate and argument order permuted.
pub fn in_scope_sentence() -> impl Strategy<Value = TokenizedSentence> {
    let clause_cases = Just(vec![0usize, 1, 2]).prop_shuffle().prop_flat_map(|c| (1..=3usize).prop_map(move |n| c[..n].to_vec()));
    let main_cases = prop::collection::vec(0usize..3, 0..=2);
    let nouns = Just((0..ARGS.len()).collect::<Vec<_>>()).prop_shuffle();
    (clause_cases, main_cases, nouns, 0..HEADS.len(), 0..VERBS.len(), 0..VERBS.len()).prop_map(
        |(cc, mc, nouns, head, v1, v2)| {
            let mut toks = args(&nouns[..cc.len()], &cc);
            toks.extend(past(VERBS[v1].0, VERBS[v1].1));
            toks.push(noun(HEADS[head].0, HEADS[head].1));
            toks.push(Token::new("は", "は", PosCoarse::Particle, "助詞,係助詞,*,*"));
            toks.extend(args(&nouns[cc.len()..cc.len() + mc.len()], &mc));
            toks.extend(past(VERBS[v2].0, VERBS[v2].1));
            toks.push(Token::new("。", "。", PosCoarse::Symbol, "記号,句点,*,*"));
            TokenizedSentence::from_tokens(toks, Provenance::Fixture).expect("generated tokens are consistent")
        },
    )
}
