//! Substitution rules and their application to a lexicon.
//!
//! Rules file lines, `#` for comments, double quotes around multi-token
//! fields:
//!
//! ```text
//! SYLL  <id> <letter> <cmu> <target> <start|end|anywhere>
//! SEQ   <id> <letter-pattern> <cmu-pattern> <target-pattern>
//! AFFIX <id> <prefix|suffix> <letters> <cmu-seq> <target-seq>
//! ```
//!
//! Rules run kind by kind (affix, then sequence, then syllable), in file
//! order within a kind. A phone is rewritten at most once; whatever no rule
//! touched goes through the merge table.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align_letters, AlignedWord, EquivalenceSet};
use crate::error::{Error, Result};
use crate::letters::group_letters;
use crate::lexicon::{Lexicon, PronEntry};
use crate::phoneset::{Inventory, PhoneSet, PhoneSymbol};
use crate::syllable::{syllabify_lenient, SyllabifiedPron, SyllablePosition};

const DEFAULT_RULES: &str = include_str!("../data/default.rules");

/// Inventories a rule target label is looked up in, in order.
const TARGET_LOOKUP: [Inventory; 3] = [Inventory::Cls, Inventory::Common, Inventory::Cmu];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Affix,
    Sequence,
    Syllable,
}

impl RuleKind {
    /// Kinds in application order.
    pub const ORDER: [RuleKind; 3] = [RuleKind::Affix, RuleKind::Sequence, RuleKind::Syllable];
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::Affix => "affix",
            RuleKind::Sequence => "sequence",
            RuleKind::Syllable => "syllable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Start,
    End,
    Anywhere,
}

impl Position {
    pub fn admits(self, pos: SyllablePosition) -> bool {
        match self {
            Position::Anywhere => true,
            Position::Start => pos == SyllablePosition::Start,
            Position::End => pos == SyllablePosition::End,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Position::Start => "start",
            Position::End => "end",
            Position::Anywhere => "anywhere",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffixSide {
    Prefix,
    Suffix,
}

impl fmt::Display for AffixSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AffixSide::Prefix => "prefix",
            AffixSide::Suffix => "suffix",
        })
    }
}

/// One element of a sequence pattern; `*` binds exactly one letter unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern<T> {
    Wildcard,
    Item(T),
}

impl<T> Pattern<T> {
    fn is_wildcard(&self) -> bool {
        matches!(self, Pattern::Wildcard)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleBody {
    Syllable {
        letter: String,
        source: PhoneSymbol,
        target: PhoneSymbol,
        position: Position,
    },
    Sequence {
        letters: Vec<Pattern<String>>,
        source: Vec<Pattern<PhoneSymbol>>,
        target: Vec<Pattern<PhoneSymbol>>,
    },
    Affix {
        side: AffixSide,
        letters: String,
        source: Vec<PhoneSymbol>,
        target: Vec<PhoneSymbol>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub body: RuleBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleMatch {
    pub rule_id: String,
    pub word: String,
    /// Alignment columns the match covers.
    pub columns: Vec<usize>,
    /// Range of phone positions that get replaced.
    pub phones: Range<usize>,
    pub before: Vec<String>,
    pub after: Vec<String>,
}

impl RuleMatch {
    /// `word <TAB> rule_id <TAB> before <TAB> after`
    pub fn to_log_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.word,
            self.rule_id,
            self.before.join(" "),
            self.after.join(" ")
        )
    }
}

fn tokenize(line: &str) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut tok = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(ch) => tok.push(ch),
                    None => return Err(Error::parse(0, "unterminated quote")),
                }
            }
            tokens.push(tok);
        } else {
            let mut tok = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() || ch == '"' {
                    break;
                }
                tok.push(ch);
                chars.next();
            }
            tokens.push(tok);
        }
    }
    Ok(tokens)
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn phone_list(field: &str) -> Vec<&str> {
    field.split_whitespace().collect()
}

fn cmu_phone(label: &str, phones: &PhoneSet) -> Result<PhoneSymbol> {
    phones.strip_stress(label)
}

fn target_phone(label: &str, phones: &PhoneSet) -> Result<PhoneSymbol> {
    phones.resolve(label, &TARGET_LOOKUP)
}

fn letter_text(field: &str) -> Result<String> {
    let text = field.trim().to_ascii_lowercase();
    if text.is_empty() {
        return Err(Error::EmptyWord);
    }
    if let Some(ch) = text
        .chars()
        .find(|&c| !(c.is_ascii_lowercase() || matches!(c, '\'' | '-' | '.')))
    {
        return Err(Error::InvalidWord { word: text.clone(), ch });
    }
    Ok(text)
}

/// Splits a letter pattern into units. Space-separated tokens are taken as
/// given; runs of letters are grouped the way words are.
fn letter_pattern(field: &str) -> Result<Vec<Pattern<String>>> {
    let mut out = Vec::new();
    for token in field.split_whitespace() {
        let mut run = String::new();
        let flush = |run: &mut String, out: &mut Vec<Pattern<String>>| -> Result<()> {
            if !run.is_empty() {
                if field.contains(' ') {
                    out.push(Pattern::Item(letter_text(run)?));
                } else {
                    for unit in group_letters(run)? {
                        out.push(Pattern::Item(unit.text));
                    }
                }
                run.clear();
            }
            Ok(())
        };
        for c in token.chars() {
            if c == '*' {
                flush(&mut run, &mut out)?;
                out.push(Pattern::Wildcard);
            } else {
                run.push(c);
            }
        }
        flush(&mut run, &mut out)?;
    }
    if out.is_empty() {
        return Err(Error::EmptyWord);
    }
    Ok(out)
}

fn phone_pattern(
    field: &str,
    resolve: impl Fn(&str) -> Result<PhoneSymbol>,
) -> Result<Vec<Pattern<PhoneSymbol>>> {
    phone_list(field)
        .into_iter()
        .map(|t| {
            if t == "*" {
                Ok(Pattern::Wildcard)
            } else {
                resolve(t).map(Pattern::Item)
            }
        })
        .collect()
}

fn leading_wildcards<T>(p: &[Pattern<T>]) -> usize {
    p.iter().take_while(|x| x.is_wildcard()).count()
}

fn trailing_wildcards<T>(p: &[Pattern<T>]) -> usize {
    p.iter().rev().take_while(|x| x.is_wildcard()).count()
}

fn wildcards<T>(p: &[Pattern<T>]) -> usize {
    p.iter().filter(|x| x.is_wildcard()).count()
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl Rule {
    pub fn kind(&self) -> RuleKind {
        match self.body {
            RuleBody::Syllable { .. } => RuleKind::Syllable,
            RuleBody::Sequence { .. } => RuleKind::Sequence,
            RuleBody::Affix { .. } => RuleKind::Affix,
        }
    }

    /// Affix side, when this is an affix rule.
    pub fn affix_side(&self) -> Option<AffixSide> {
        match self.body {
            RuleBody::Affix { side, .. } => Some(side),
            _ => None,
        }
    }

    /// Parses one rules-file line. Blank and comment lines give `None`.
    pub fn parse_line(line: &str, phones: &PhoneSet) -> Result<Option<Rule>> {
        let tokens = tokenize(strip_comment(line))?;
        if tokens.is_empty() {
            return Ok(None);
        }
        let keyword = tokens[0].to_ascii_uppercase();
        let arity = |n: usize| -> Result<()> {
            if tokens.len() == n {
                Ok(())
            } else {
                Err(Error::parse(
                    0,
                    format!("{keyword} rules take {} fields, found {}", n - 1, tokens.len() - 1),
                ))
            }
        };
        let id = tokens.get(1).cloned().unwrap_or_default();
        if tokens.len() > 1 && !valid_id(&id) {
            return Err(Error::parse(0, format!("bad rule id `{id}`")));
        }
        let body = match keyword.as_str() {
            "SYLL" => {
                arity(6)?;
                let source = single_phone(&tokens[3], |l| cmu_phone(l, phones))?;
                let target = single_phone(&tokens[4], |l| target_phone(l, phones))?;
                let position = match tokens[5].to_ascii_lowercase().as_str() {
                    "start" => Position::Start,
                    "end" => Position::End,
                    "anywhere" => Position::Anywhere,
                    other => return Err(Error::parse(0, format!("bad syllable position `{other}`"))),
                };
                RuleBody::Syllable {
                    letter: letter_text(&tokens[2])?,
                    source,
                    target,
                    position,
                }
            }
            "SEQ" => {
                arity(5)?;
                let letters = letter_pattern(&tokens[2])?;
                let source = phone_pattern(&tokens[3], |l| cmu_phone(l, phones))?;
                let target = phone_pattern(&tokens[4], |l| target_phone(l, phones))?;
                check_sequence(&letters, &source, &target)?;
                RuleBody::Sequence {
                    letters,
                    source,
                    target,
                }
            }
            "AFFIX" => {
                arity(6)?;
                let side = match tokens[2].to_ascii_lowercase().as_str() {
                    "prefix" => AffixSide::Prefix,
                    "suffix" => AffixSide::Suffix,
                    other => return Err(Error::parse(0, format!("bad affix side `{other}`"))),
                };
                let letters = letter_text(&tokens[3])?;
                let source = phone_list(&tokens[4])
                    .into_iter()
                    .map(|l| cmu_phone(l, phones))
                    .collect::<Result<Vec<_>>>()?;
                let target = phone_list(&tokens[5])
                    .into_iter()
                    .map(|l| target_phone(l, phones))
                    .collect::<Result<Vec<_>>>()?;
                if source.is_empty() || target.is_empty() {
                    return Err(Error::parse(0, "affix rules need source and target phones"));
                }
                RuleBody::Affix {
                    side,
                    letters,
                    source,
                    target,
                }
            }
            other => return Err(Error::parse(0, format!("unknown rule kind `{other}`"))),
        };
        Ok(Some(Rule { id, body }))
    }

    /// Parses a rule given as a single line, e.g. from an API request.
    pub fn parse(text: &str, phones: &PhoneSet) -> Result<Rule> {
        let mut lines = text.lines().filter(|l| !strip_comment(l).trim().is_empty());
        let line = lines.next().ok_or_else(|| Error::parse(1, "empty rule"))?;
        if lines.next().is_some() {
            return Err(Error::parse(2, "expected a single rule"));
        }
        Rule::parse_line(line, phones)
            .map_err(|e| e.at_rule_line(1))?
            .ok_or_else(|| Error::parse(1, "empty rule"))
    }

    /// Every match of this rule in one aligned word.
    pub fn matches(&self, aligned: &AlignedWord, syll: &SyllabifiedPron, phones: &PhoneSet) -> Vec<RuleMatch> {
        let positions = aligned.cmu_positions();
        let mut out = Vec::new();
        match &self.body {
            RuleBody::Syllable {
                letter,
                source,
                target,
                position,
            } => {
                for (col, triplet) in aligned.columns.iter().enumerate() {
                    let (Some(unit), Some(phone), Some(idx)) = (&triplet.letter, &triplet.cmu, positions[col]) else {
                        continue;
                    };
                    if unit.text != *letter || phone != source {
                        continue;
                    }
                    let Ok(pos) = syll.position_in_syllable(idx) else {
                        continue;
                    };
                    if position.admits(pos) {
                        out.push(self.make_match(aligned, vec![col], idx..idx + 1, vec![target.clone()], phones));
                    }
                }
            }
            RuleBody::Affix {
                side,
                letters,
                source,
                target,
            } => {
                let unit_cols = aligned.unit_columns();
                let units = aligned.letter_units();
                let order: Vec<usize> = match side {
                    AffixSide::Prefix => (0..units.len()).collect(),
                    AffixSide::Suffix => (0..units.len()).rev().collect(),
                };
                let mut acc = 0;
                let mut taken = Vec::new();
                for u in order {
                    acc += units[u].text.len();
                    taken.push(u);
                    if acc >= letters.len() {
                        break;
                    }
                }
                // the affix must end on a unit boundary and leave a stem
                if acc != letters.len() || taken.len() == units.len() {
                    return out;
                }
                taken.sort_unstable();
                let text: String = taken.iter().map(|&u| units[u].text.as_str()).collect();
                if text != *letters {
                    return out;
                }
                let cols: Range<usize> = unit_cols[taken[0]].start..unit_cols[*taken.last().unwrap()].end;
                if let Some((span, found)) = phones_in(aligned, &positions, cols.clone()) {
                    if found == *source {
                        out.push(self.make_match(aligned, cols.collect(), span, target.clone(), phones));
                    }
                }
            }
            RuleBody::Sequence {
                letters,
                source,
                target,
            } => {
                let unit_cols = aligned.unit_columns();
                let units = aligned.letter_units();
                let k = letters.len();
                if units.len() < k {
                    return out;
                }
                let lead = leading_wildcards(letters);
                let trail = trailing_wildcards(letters);
                for start in 0..=units.len() - k {
                    let window = start..start + k;
                    let fits = letters.iter().zip(window.clone()).all(|(p, u)| match p {
                        Pattern::Wildcard => true,
                        Pattern::Item(t) => units[u].text == *t,
                    });
                    if !fits {
                        continue;
                    }
                    // phones owned by each unit in the window
                    let per_unit: Vec<Vec<PhoneSymbol>> = window
                        .clone()
                        .map(|u| {
                            aligned.columns[unit_cols[u].clone()]
                                .iter()
                                .filter_map(|c| c.cmu.clone())
                                .collect()
                        })
                        .collect();
                    let mut expected: Vec<PhoneSymbol> = Vec::new();
                    let mut actual: Vec<PhoneSymbol> = Vec::new();
                    let source_has_wildcards = source.iter().any(Pattern::is_wildcard);
                    let mut wild = per_unit.iter().zip(letters).filter(|(_, p)| p.is_wildcard());
                    for s in source {
                        match s {
                            Pattern::Item(p) => expected.push(p.clone()),
                            Pattern::Wildcard => expected.extend(wild.next().map(|(ph, _)| ph.clone()).unwrap_or_default()),
                        }
                    }
                    for (ph, p) in per_unit.iter().zip(letters) {
                        if source_has_wildcards || !p.is_wildcard() {
                            actual.extend(ph.iter().cloned());
                        }
                    }
                    if expected != actual {
                        continue;
                    }
                    let inner = start + lead..start + k - trail;
                    let cols = unit_cols[inner.start].start..unit_cols[inner.end - 1].end;
                    let Some((span, _)) = phones_in(aligned, &positions, cols.clone()) else {
                        continue;
                    };
                    let mut inner_wild = per_unit[lead..k - trail]
                        .iter()
                        .zip(&letters[lead..k - trail])
                        .filter(|(_, p)| p.is_wildcard())
                        .map(|(ph, _)| ph);
                    let mut replacement = Vec::new();
                    for t in &target[lead..target.len() - trail] {
                        match t {
                            Pattern::Item(p) => replacement.push(p.clone()),
                            Pattern::Wildcard => replacement.extend(inner_wild.next().cloned().unwrap_or_default()),
                        }
                    }
                    out.push(self.make_match(aligned, cols.collect(), span, replacement, phones));
                }
            }
        }
        out
    }

    fn make_match(
        &self,
        aligned: &AlignedWord,
        columns: Vec<usize>,
        span: Range<usize>,
        replacement: Vec<PhoneSymbol>,
        phones: &PhoneSet,
    ) -> RuleMatch {
        let source = aligned.cmu_phones();
        RuleMatch {
            rule_id: self.id.clone(),
            word: aligned.word.clone(),
            columns,
            before: source[span.clone()].iter().map(|p| p.label().to_string()).collect(),
            after: replacement
                .iter()
                .map(|p| {
                    phones
                        .to_common(p)
                        .map(|c| c.label().to_string())
                        .unwrap_or_else(|_| p.label().to_string())
                })
                .collect(),
            phones: span,
        }
    }
}

/// The phone span and phones under a column range; `None` when no column
/// in the range holds a phone.
fn phones_in(
    aligned: &AlignedWord,
    positions: &[Option<usize>],
    cols: Range<usize>,
) -> Option<(Range<usize>, Vec<PhoneSymbol>)> {
    let idx: Vec<usize> = cols.clone().filter_map(|c| positions[c]).collect();
    let (&first, &last) = (idx.first()?, idx.last()?);
    let found = cols.filter_map(|c| aligned.columns[c].cmu.clone()).collect();
    Some((first..last + 1, found))
}

fn single_phone(field: &str, resolve: impl Fn(&str) -> Result<PhoneSymbol>) -> Result<PhoneSymbol> {
    match phone_list(field).as_slice() {
        [one] => resolve(one),
        _ => Err(Error::parse(0, format!("syllable rules take exactly one phone, got `{field}`"))),
    }
}

fn check_sequence(
    letters: &[Pattern<String>],
    source: &[Pattern<PhoneSymbol>],
    target: &[Pattern<PhoneSymbol>],
) -> Result<()> {
    let wl = wildcards(letters);
    if wl == letters.len() {
        return Err(Error::ArityMismatch("letter pattern needs at least one literal unit".into()));
    }
    if source.is_empty() || target.is_empty() {
        return Err(Error::ArityMismatch("source and target must be non-empty".into()));
    }
    if wildcards(target) != wl {
        return Err(Error::ArityMismatch(format!(
            "letter pattern has {wl} wildcards, target has {}",
            wildcards(target)
        )));
    }
    let ws = wildcards(source);
    if ws != 0 && ws != wl {
        return Err(Error::ArityMismatch(format!(
            "letter pattern has {wl} wildcards, source has {ws}"
        )));
    }
    if leading_wildcards(target) != leading_wildcards(letters)
        || trailing_wildcards(target) != trailing_wildcards(letters)
    {
        return Err(Error::ArityMismatch(
            "edge wildcards in the target must mirror the letter pattern".into(),
        ));
    }
    if target.len() == leading_wildcards(target) + trailing_wildcards(target) && wl > 0 {
        return Err(Error::ArityMismatch("target has no phones to write".into()));
    }
    Ok(())
}

fn quoted(items: impl IntoIterator<Item = String>) -> String {
    let items: Vec<String> = items.into_iter().collect();
    if items.len() == 1 {
        items[0].clone()
    } else {
        format!("\"{}\"", items.join(" "))
    }
}

fn pattern_strings<T: fmt::Display>(p: &[Pattern<T>]) -> Vec<String> {
    p.iter()
        .map(|x| match x {
            Pattern::Wildcard => "*".to_string(),
            Pattern::Item(t) => t.to_string(),
        })
        .collect()
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            RuleBody::Syllable {
                letter,
                source,
                target,
                position,
            } => write!(f, "SYLL {} {letter} {source} {target} {position}", self.id),
            RuleBody::Sequence {
                letters,
                source,
                target,
            } => {
                let letters = pattern_strings(letters);
                let letters = if letters.len() == 1 {
                    letters[0].clone()
                } else {
                    format!("\"{}\"", letters.join(" "))
                };
                write!(
                    f,
                    "SEQ {} {letters} {} {}",
                    self.id,
                    quoted(pattern_strings(source)),
                    quoted(pattern_strings(target))
                )
            }
            RuleBody::Affix {
                side,
                letters,
                source,
                target,
            } => write!(
                f,
                "AFFIX {} {side} {letters} {} {}",
                self.id,
                quoted(source.iter().map(|p| p.label().to_string())),
                quoted(target.iter().map(|p| p.label().to_string()))
            ),
        }
    }
}

/// Rules in file order. Ids are unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// The shipped default rules, parsed against the built-in phone set.
    pub fn builtin() -> RuleSet {
        RuleSet::parse(DEFAULT_RULES, PhoneSet::builtin()).expect("shipped rules are valid")
    }

    pub fn default_text() -> &'static str {
        DEFAULT_RULES
    }

    pub fn parse(text: &str, phones: &PhoneSet) -> Result<Self> {
        let mut set = RuleSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if let Some(rule) = Rule::parse_line(line, phones).map_err(|e| e.at_rule_line(line_no))? {
                set.push(rule).map_err(|e| e.at_rule_line(line_no))?;
            }
        }
        Ok(set)
    }

    pub fn push(&mut self, rule: Rule) -> Result<()> {
        if self.get(&rule.id).is_some() {
            return Err(Error::DuplicateRuleId(rule.id));
        }
        self.rules.push(rule);
        Ok(())
    }

    pub fn remove(&mut self, id: &str) -> Option<Rule> {
        let pos = self.rules.iter().position(|r| r.id == id)?;
        Some(self.rules.remove(pos))
    }

    /// Replaces the rule with the same id in place, or appends.
    pub fn upsert(&mut self, rule: Rule) {
        match self.rules.iter_mut().find(|r| r.id == rule.id) {
            Some(slot) => *slot = rule,
            None => self.rules.push(rule),
        }
    }

    pub fn get(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rules in application order: by kind, then file order.
    pub fn in_application_order(&self) -> impl Iterator<Item = &Rule> {
        RuleKind::ORDER
            .into_iter()
            .flat_map(move |k| self.rules.iter().filter(move |r| r.kind() == k))
    }

    /// Canonical rules-file text, one rule per line.
    pub fn to_text(&self) -> String {
        self.rules.iter().map(|r| format!("{r}\n")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WordWarning {
    pub word: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ApplyOptions {
    /// Transform every pronunciation variant, not just the primary one.
    pub all_variants: bool,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ApplyOutput {
    pub lexicon: Lexicon,
    pub matches: Vec<RuleMatch>,
    pub warnings: Vec<WordWarning>,
}

impl ApplyOutput {
    /// Words with at least one logged match, sorted.
    pub fn changed_words(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut words: Vec<&str> = self
            .matches
            .iter()
            .map(|m| m.word.as_str())
            .filter(|w| seen.insert(*w))
            .collect();
        words.sort_unstable();
        words
    }

    pub fn write_match_log(&self, mut dest: impl std::io::Write) -> Result<()> {
        for m in &self.matches {
            writeln!(dest, "{}", m.to_log_line())?;
        }
        dest.flush()?;
        Ok(())
    }
}

/// Applies a rule set with a given phone set and letter↔CMU equivalences.
#[derive(Debug, Clone, Copy)]
pub struct RuleEngine<'a> {
    pub phones: &'a PhoneSet,
    pub equiv: &'a EquivalenceSet,
    pub rules: &'a RuleSet,
}

struct EntryResult {
    entry: PronEntry,
    matches: Vec<RuleMatch>,
    warnings: Vec<WordWarning>,
}

impl<'a> RuleEngine<'a> {
    pub fn new(phones: &'a PhoneSet, equiv: &'a EquivalenceSet, rules: &'a RuleSet) -> Self {
        Self { phones, equiv, rules }
    }

    fn default_image(&self, phones: &[PhoneSymbol]) -> Result<Vec<PhoneSymbol>> {
        phones.iter().map(|p| self.phones.to_common(p)).collect()
    }

    /// Transforms one pronunciation into common phones.
    pub fn apply_entry(&self, entry: &PronEntry) -> Result<(PronEntry, Vec<RuleMatch>, Vec<WordWarning>)> {
        let r = self.apply_one(entry)?;
        Ok((r.entry, r.matches, r.warnings))
    }

    fn apply_one(&self, entry: &PronEntry) -> Result<EntryResult> {
        let word = entry.word.clone();
        let default = self.default_image(&entry.phones)?;
        let plain = |warnings| -> Result<EntryResult> {
            Ok(EntryResult {
                entry: PronEntry::new(word.clone(), default.clone())?,
                matches: Vec::new(),
                warnings,
            })
        };
        // rule sources are CMU phones, so nothing else can match
        if entry.inventory() != Inventory::Cmu || self.rules.is_empty() {
            return plain(Vec::new());
        }
        let mut warnings = Vec::new();
        let aligned = match align_letters(&word, &entry.phones, self.equiv) {
            Ok(a) => a,
            Err(e) => {
                return plain(vec![WordWarning {
                    word: word.clone(),
                    message: format!("not aligned: {e}"),
                }])
            }
        };
        let (syll, flagged) = syllabify_lenient(&entry.phones);
        if flagged {
            warnings.push(WordWarning {
                word: word.clone(),
                message: "no vowel nucleus; treated as one syllable".into(),
            });
        }

        let mut claimed = vec![false; entry.phones.len()];
        let mut rewrites: BTreeMap<usize, (usize, Vec<PhoneSymbol>)> = BTreeMap::new();
        let mut matches = Vec::new();
        for rule in self.rules.in_application_order() {
            for m in rule.matches(&aligned, &syll, self.phones) {
                if claimed[m.phones.clone()].iter().any(|&c| c) {
                    continue;
                }
                let default_labels: Vec<&str> = default[m.phones.clone()].iter().map(PhoneSymbol::label).collect();
                if default_labels == m.after {
                    continue;
                }
                let replacement = m
                    .after
                    .iter()
                    .map(|l| self.phones.symbol(Inventory::Common, l))
                    .collect::<Result<Vec<_>>>()?;
                claimed[m.phones.clone()].iter_mut().for_each(|c| *c = true);
                rewrites.insert(m.phones.start, (m.phones.end, replacement));
                matches.push(m);
            }
        }

        let mut out = Vec::with_capacity(default.len());
        let mut i = 0;
        while i < default.len() {
            if let Some((end, replacement)) = rewrites.remove(&i) {
                out.extend(replacement);
                i = end;
            } else {
                out.push(default[i].clone());
                i += 1;
            }
        }
        if out.is_empty() {
            return Err(Error::Invariant(format!("rules deleted every phone of `{word}`")));
        }
        matches.sort_by_key(|m| m.phones.start);
        Ok(EntryResult {
            entry: PronEntry::new(word, out)?,
            matches,
            warnings,
        })
    }

    /// Transforms a whole lexicon. Output and match log are ordered by word
    /// whatever the parallelism.
    pub fn apply(&self, lexicon: &Lexicon, options: ApplyOptions) -> Result<ApplyOutput> {
        let work: Vec<&PronEntry> = lexicon
            .iter()
            .flat_map(|(_, variants)| {
                let n = if options.all_variants { variants.len() } else { 1 };
                variants.iter().take(n)
            })
            .collect();
        let run = || work.par_iter().map(|e| self.apply_one(e)).collect::<Result<Vec<_>>>();
        let results = match options.jobs {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?
                .install(run)?,
            None => run()?,
        };
        let mut out = Lexicon::new(Inventory::Common);
        let mut matches = Vec::new();
        let mut warnings = Vec::new();
        for r in results {
            out.insert(r.entry)?;
            matches.extend(r.matches);
            warnings.extend(r.warnings);
        }
        Ok(ApplyOutput {
            lexicon: out,
            matches,
            warnings,
        })
    }
}

/// Applies `rules` to every primary pronunciation in `lexicon`.
pub fn apply_rules(lexicon: &Lexicon, rules: &RuleSet, phones: &PhoneSet, equiv: &EquivalenceSet) -> Result<ApplyOutput> {
    RuleEngine::new(phones, equiv, rules).apply(lexicon, ApplyOptions::default())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WordDiff {
    pub word: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WhatIfReport {
    pub rule_id: String,
    pub words_examined: usize,
    pub changed_count: usize,
    pub changed: Vec<WordDiff>,
}

fn joined(entry: &PronEntry) -> String {
    entry.labels().join(" ")
}

/// Per-word differences between two transformed lexicons, primary variants.
pub fn diff_lexicons(before: &Lexicon, after: &Lexicon) -> Vec<WordDiff> {
    before
        .iter()
        .filter_map(|(word, variants)| {
            let b = variants.first()?;
            let a = after.primary(word)?;
            (b.phones != a.phones).then(|| WordDiff {
                word: word.to_string(),
                before: joined(b),
                after: joined(a),
            })
        })
        .collect()
}

/// `baseline` with `draft` added; a baseline rule with the same id is
/// replaced in place.
pub fn with_draft(baseline: &RuleSet, draft: &Rule) -> RuleSet {
    let mut next = baseline.clone();
    next.upsert(draft.clone());
    next
}

/// What adding `draft` to `baseline` would change over `lexicon`.
/// `baseline_output`, when given, must be the baseline applied to `lexicon`.
pub fn what_if(
    lexicon: &Lexicon,
    draft: &Rule,
    baseline: &RuleSet,
    phones: &PhoneSet,
    equiv: &EquivalenceSet,
    baseline_output: Option<&Lexicon>,
) -> Result<WhatIfReport> {
    let computed;
    let before = match baseline_output {
        Some(l) => l,
        None => {
            computed = RuleEngine::new(phones, equiv, baseline).apply(lexicon, ApplyOptions::default())?;
            &computed.lexicon
        }
    };
    let drafted = with_draft(baseline, draft);
    let after = RuleEngine::new(phones, equiv, &drafted).apply(lexicon, ApplyOptions::default())?;
    let changed = diff_lexicons(before, &after.lexicon);
    Ok(WhatIfReport {
        rule_id: draft.id.clone(),
        words_examined: lexicon.len(),
        changed_count: changed.len(),
        changed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::default_equivalences;
    use crate::lexicon::{parse_cmu_dict, ParseMode};

    fn ps() -> &'static PhoneSet {
        PhoneSet::builtin()
    }

    fn rule(line: &str) -> Rule {
        Rule::parse(line, ps()).unwrap()
    }

    fn rules(text: &str) -> RuleSet {
        RuleSet::parse(text, ps()).unwrap()
    }

    fn lex(text: &str) -> Lexicon {
        parse_cmu_dict(text.as_bytes(), ps(), ParseMode::Strict).unwrap().lexicon
    }

    fn cmu(labels: &str) -> Vec<PhoneSymbol> {
        labels.split_whitespace().map(|l| ps().strip_stress(l).unwrap()).collect()
    }

    fn aligned(word: &str, labels: &str) -> (AlignedWord, SyllabifiedPron) {
        let phones = cmu(labels);
        let a = align_letters(word, &phones, default_equivalences()).unwrap();
        (a, syllabify_lenient(&phones).0)
    }

    fn transform(rules_text: &str, dict: &str) -> ApplyOutput {
        apply_rules(&lex(dict), &rules(rules_text), ps(), default_equivalences()).unwrap()
    }

    fn primary(out: &ApplyOutput, word: &str) -> String {
        out.lexicon.primary(word).unwrap().labels().join(" ")
    }

    #[test]
    fn parse_syllable_rule() {
        let r = rule("SYLL r2 o AA ax anywhere");
        assert_eq!(r.kind(), RuleKind::Syllable);
        match &r.body {
            RuleBody::Syllable {
                letter,
                source,
                target,
                position,
            } => {
                assert_eq!(letter, "o");
                assert_eq!(source.label(), "AA");
                assert_eq!((target.label(), target.inventory()), ("ax", Inventory::Cls));
                assert_eq!(*position, Position::Anywhere);
            }
            _ => unreachable!(),
        }
        // uppercase letters from the published table are accepted
        assert_eq!(rule("SYLL r2 O AA ax anywhere"), r);
    }

    #[test]
    fn parse_sequence_rule() {
        let r = rule(r#"SEQ s1 *ul "Y AH L" "* u l""#);
        match &r.body {
            RuleBody::Sequence { letters, source, target } => {
                assert_eq!(
                    letters,
                    &vec![Pattern::Wildcard, Pattern::Item("u".into()), Pattern::Item("l".into())]
                );
                assert_eq!(source.len(), 3);
                assert_eq!(target.len(), 3);
                assert!(target[0].is_wildcard());
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn parse_affix_rule() {
        let r = rule(r#"AFFIX a1 suffix ted "T AH D" "t ee d""#);
        assert_eq!(r.affix_side(), Some(AffixSide::Suffix));
        assert_eq!(r.to_string(), r#"AFFIX a1 suffix ted "T AH D" "t ee d""#);
    }

    #[test]
    fn display_round_trips() {
        for line in [
            "SYLL r5 a EH AH end",
            r#"SEQ s1 "* u l" "Y AH L" "* u l""#,
            r#"AFFIX p1 prefix auto "AO T OW" "ax t o""#,
        ] {
            let r = rule(line);
            assert_eq!(rule(&r.to_string()), r);
        }
    }

    #[test]
    fn parse_errors() {
        let err = Rule::parse("SYLL x o QQ ax anywhere", ps()).unwrap_err();
        assert!(matches!(err.root(), Error::UnknownPhone { .. }));
        assert!(matches!(
            Rule::parse(r#"SEQ s *ul "Y AH L" "u l""#, ps()).unwrap_err().root(),
            Error::ArityMismatch(_)
        ));
        assert!(matches!(
            Rule::parse(r#"SEQ s *ul "* Y * L" "* u l""#, ps()).unwrap_err().root(),
            Error::ArityMismatch(_)
        ));
        assert!(Rule::parse("SYLL x o AA ax sideways", ps()).is_err());
        assert!(Rule::parse("SYLL x o AA", ps()).is_err());
        assert!(Rule::parse("FOO x o AA ax end", ps()).is_err());
        assert!(Rule::parse(r#"AFFIX a suffix ted "T AH D"#, ps()).is_err());
        let dup = RuleSet::parse("SYLL a o AA ax anywhere\nSYLL a e AH i end\n", ps()).unwrap_err();
        assert!(matches!(dup, Error::Rule { line: 2, .. }));
        assert!(matches!(dup.root(), Error::DuplicateRuleId(_)));
    }

    #[test]
    fn comments_and_order() {
        let set = rules("# header\nSYLL r2 o AA ax anywhere # trailing\n\nAFFIX a1 suffix ted \"T AH D\" \"t ee d\"\n");
        assert_eq!(set.len(), 2);
        let order: Vec<&str> = set.in_application_order().map(|r| r.id.as_str()).collect();
        assert_eq!(order, ["a1", "r2"]);
    }

    #[test]
    fn syllable_rule_matches_doctor() {
        let (a, s) = aligned("DOCTOR", "D AA1 K T ER0");
        let m = rule("SYLL r2 o AA ax anywhere").matches(&a, &s, ps());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].phones, 1..2);
        assert_eq!(m[0].before, ["AA"]);
        assert_eq!(m[0].after, ["ax"]);
    }

    #[test]
    fn syllable_rule_respects_position() {
        // BENEFIT: [B EH] [N AH] [F IH T]; AH under `e` closes its syllable
        let (a, s) = aligned("BENEFIT", "B EH1 N AH0 F IH0 T");
        let r1 = rule("SYLL r1 e AH i end");
        let m = r1.matches(&a, &s, ps());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].phones, 3..4);
        // CITED: AH sits inside [T AH D]
        let (a, s) = aligned("CITED", "S AY1 T AH0 D");
        assert!(r1.matches(&a, &s, ps()).is_empty());
    }

    #[test]
    fn no_matching_letter_gives_nothing() {
        let (a, s) = aligned("CALLED", "K AO1 L D");
        assert!(rule("SYLL r2 o AA ax anywhere").matches(&a, &s, ps()).is_empty());
    }

    #[test]
    fn sequence_rule_drops_glide() {
        let (a, s) = aligned("REGULAR", "R EH1 G Y AH0 L ER0");
        let m = rule(r#"SEQ s1 *ul "Y AH L" "* u l""#).matches(&a, &s, ps());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].before, ["Y", "AH", "L"]);
        assert_eq!(m[0].after, ["u", "l"]);
        assert_eq!(m[0].phones, 3..6);
    }

    #[test]
    fn sequence_rule_with_source_wildcard() {
        let (a, s) = aligned("REGULAR", "R EH1 G Y AH0 L ER0");
        let m = rule(r#"SEQ s2 "g * l" "G * L" "g * l""#).matches(&a, &s, ps());
        // the wildcard unit `u` owns Y and AH, which carry over unchanged
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].before, ["G", "Y", "AH", "L"]);
        assert_eq!(m[0].after, ["g", "y", "a", "l"]);
    }

    #[test]
    fn affix_rule_on_cited() {
        let out = transform("AFFIX a1 suffix ted \"T AH D\" \"t ee d\"\n", "CITED  S AY1 T AH0 D\n");
        assert_eq!(primary(&out, "CITED"), "s ai t ee d");
        assert_eq!(out.matches.len(), 1);
        assert_eq!(out.matches[0].to_log_line(), "CITED\ta1\tT AH D\tt ee d");
    }

    #[test]
    fn affix_must_sit_on_unit_boundary_and_leave_a_stem() {
        let r = rule(r#"AFFIX a1 suffix ted "T AH D" "t ee d""#);
        // "batted" groups as b-a-tt-e-d, so "ted" splits a unit
        let (a, s) = aligned("BATTED", "B AE1 T AH0 D");
        assert!(r.matches(&a, &s, ps()).is_empty());
        let p = rule(r#"AFFIX p1 prefix a "AH" "aa""#);
        let (a, s) = aligned("A", "AH0");
        assert!(p.matches(&a, &s, ps()).is_empty());
    }

    #[test]
    fn untouched_words_get_the_default_image() {
        let out = transform("SYLL r2 o AA ax anywhere\n", "CHECK  CH EH1 K\n");
        assert_eq!(primary(&out, "CHECK"), "CH e k");
        assert!(out.matches.is_empty());
        let out = transform("", "CHECK  CH EH1 K\n");
        assert_eq!(primary(&out, "CHECK"), "CH e k");
    }

    #[test]
    fn kind_precedence_and_single_rewrite() {
        // the affix rule claims the AH under `e`, so the syllable rule that
        // would also match it is skipped
        let text = "SYLL r1 e AH i anywhere\nAFFIX a1 suffix ted \"T AH D\" \"t ee d\"\n";
        let out = transform(text, "CITED  S AY1 T AH0 D\n");
        assert_eq!(primary(&out, "CITED"), "s ai t ee d");
        let ids: Vec<&str> = out.matches.iter().map(|m| m.rule_id.as_str()).collect();
        assert_eq!(ids, ["a1"]);
    }

    #[test]
    fn earlier_rule_of_same_kind_wins() {
        let text = "SYLL x o AA ax anywhere\nSYLL y o AA o anywhere\n";
        let out = transform(text, "DOCTOR  D AA1 K T ER0\n");
        assert_eq!(primary(&out, "DOCTOR"), "D ax k T ER");
    }

    #[test]
    fn no_op_targets_are_not_logged() {
        // AA already maps to aa through the merge table
        let out = transform("SYLL x o AA aa anywhere\n", "DOCTOR  D AA1 K T ER0\n");
        assert!(out.matches.is_empty());
    }

    #[test]
    fn cmu_label_targets_go_through_merge_table() {
        // the published table lists AH as a target; it lands on common `a`
        let out = transform("SYLL r5 a EH AH end\n", "ANY  EH1 N IY0\n");
        assert_eq!(primary(&out, "ANY"), "a n ii");
    }

    #[test]
    fn output_lexicon_is_common_and_stable() {
        let dict = "CITED  S AY1 T AH0 D\nDOCTOR  D AA1 K T ER0\nREGULAR  R EH1 G Y AH0 L ER0\n";
        let set = RuleSet::builtin();
        let once = apply_rules(&lex(dict), &set, ps(), default_equivalences()).unwrap();
        let again = apply_rules(&lex(dict), &set, ps(), default_equivalences()).unwrap();
        assert_eq!(once.lexicon, again.lexicon);
        for (_, v) in once.lexicon.iter() {
            assert!(v[0].phones.iter().all(|p| p.inventory() == Inventory::Common));
        }
        // a common lexicon is a fixed point
        let twice = apply_rules(&once.lexicon, &set, ps(), default_equivalences()).unwrap();
        assert_eq!(twice.lexicon, once.lexicon);
        assert!(twice.matches.is_empty());
    }

    #[test]
    fn parallel_apply_is_deterministic() {
        let dict = "CITED  S AY1 T AH0 D\nDOCTOR  D AA1 K T ER0\nREGULAR  R EH1 G Y AH0 L ER0\nHOT  HH AA1 T\n";
        let set = RuleSet::builtin();
        let engine = RuleEngine::new(ps(), default_equivalences(), &set);
        let a = engine.apply(&lex(dict), ApplyOptions { all_variants: false, jobs: Some(1) }).unwrap();
        let b = engine.apply(&lex(dict), ApplyOptions { all_variants: false, jobs: Some(4) }).unwrap();
        assert_eq!(a.lexicon, b.lexicon);
        assert_eq!(a.matches, b.matches);
    }

    #[test]
    fn all_variants_flag() {
        let dict = "CITED  S AY1 T AH0 D\nCITED(1)  S AY1 T IH0 D\n";
        let set = rules("");
        let engine = RuleEngine::new(ps(), default_equivalences(), &set);
        let primary_only = engine.apply(&lex(dict), ApplyOptions::default()).unwrap();
        assert_eq!(primary_only.lexicon.get("CITED").unwrap().len(), 1);
        let all = engine
            .apply(&lex(dict), ApplyOptions { all_variants: true, jobs: None })
            .unwrap();
        assert_eq!(all.lexicon.get("CITED").unwrap().len(), 2);
    }

    #[test]
    fn changed_words_match_log() {
        let dict = "CITED  S AY1 T AH0 D\nDOCTOR  D AA1 K T ER0\nCHECK  CH EH1 K\n";
        let out = transform(&RuleSet::builtin().to_text(), dict);
        let base = transform("", dict);
        let diffs = diff_lexicons(&base.lexicon, &out.lexicon);
        let diff_words: Vec<&str> = diffs.iter().map(|d| d.word.as_str()).collect();
        assert_eq!(out.changed_words(), diff_words);
    }

    const SLICE: &str = "CITED  S AY1 T AH0 D\nDOCTOR  D AA1 K T ER0\nCALLED  K AO1 L D\nCHECK  CH EH1 K\n\
                         SCHOOL  S K UW1 L\nPHONE  F OW1 N\nBOYISH  B OY1 IH0 SH\nA  AH0\nCAT  K AE1 T\nFISH  F IH1 SH\n";

    #[test]
    fn what_if_counts_doctor() {
        let slice = lex(SLICE);
        assert_eq!(slice.len(), 10);
        let draft = rule("SYLL r2 o AA ax anywhere");
        let report = what_if(&slice, &draft, &RuleSet::new(), ps(), default_equivalences(), None).unwrap();
        assert_eq!(report.changed_count, 1);
        assert_eq!(
            report.changed[0],
            WordDiff {
                word: "DOCTOR".into(),
                before: "D aa k T ER".into(),
                after: "D ax k T ER".into()
            }
        );
    }

    #[test]
    fn what_if_identical_draft_is_empty() {
        let slice = lex(SLICE);
        let baseline = rules("SYLL r2 o AA ax anywhere\n");
        let draft = rule("SYLL r2 o AA ax anywhere");
        let report = what_if(&slice, &draft, &baseline, ps(), default_equivalences(), None).unwrap();
        assert_eq!(report.changed_count, 0);
        assert!(report.changed.is_empty());
    }
}
