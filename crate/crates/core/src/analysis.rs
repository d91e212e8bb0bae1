//! Corpus-level reports: word selection by frequency, ambiguity clusters
//! over derivation-time alignments, and rule coverage.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io;

use serde::Serialize;

use crate::align::{AlignedWord, EquivalenceSet};
use crate::error::Result;
use crate::lexicon::Lexicon;
use crate::phoneset::{PhoneSet, PhoneSymbol};
use crate::rules::{AffixSide, ApplyOptions, ApplyOutput, RuleEngine, RuleKind, RuleSet};
use crate::syllable::{syllabify_lenient, SyllablePosition};

/// Marks a word edge in letter context.
pub const EDGE: &str = "#";

/// Words of `lexicon` among the first `top_k` entries of `freq_list`, minus
/// `exclude`, in frequency order. Matching ignores case.
pub fn select_words(lexicon: &Lexicon, freq_list: &[String], top_k: usize, exclude: &HashSet<String>) -> Vec<String> {
    let exclude: HashSet<String> = exclude.iter().map(|w| w.to_ascii_uppercase()).collect();
    let mut seen = HashSet::new();
    freq_list
        .iter()
        .take(top_k)
        .map(|w| w.trim().to_ascii_uppercase())
        .filter(|w| lexicon.contains(w) && !exclude.contains(w) && seen.insert(w.clone()))
        .collect()
}

/// One aligned column where an ambiguous CMU phone met a CLS phone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Occurrence {
    pub word: String,
    pub column: usize,
    /// Letter unit of the column, `_` when the column has none.
    pub letter: String,
    pub position: SyllablePosition,
    pub left: String,
    pub right: String,
}

/// Context key used for tallies: letter, syllable position and neighbours.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Context {
    pub letter: String,
    pub position: SyllablePosition,
    pub left: String,
    pub right: String,
}

impl Occurrence {
    pub fn context(&self) -> Context {
        Context {
            letter: self.letter.clone(),
            position: self.position,
            left: self.left.clone(),
            right: self.right.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AmbiguityCluster {
    pub source_cmu: String,
    /// CLS label to the columns that realised it.
    pub targets: BTreeMap<String, Vec<Occurrence>>,
    pub total: usize,
}

impl AmbiguityCluster {
    /// Occurrence counts per target and context.
    pub fn tallies(&self) -> BTreeMap<(String, Context), usize> {
        let mut out = BTreeMap::new();
        for (target, occs) in &self.targets {
            for o in occs {
                *out.entry((target.clone(), o.context())).or_default() += 1;
            }
        }
        out
    }

    /// Occurrence counts per target.
    pub fn target_counts(&self) -> BTreeMap<&str, usize> {
        self.targets.iter().map(|(t, o)| (t.as_str(), o.len())).collect()
    }
}

/// Clusters of CMU phones that align to two or more CLS phones across the
/// corpus, largest first. Words without a CLS side contribute nothing.
pub fn detect_ambiguities(alignments: &[AlignedWord]) -> Vec<AmbiguityCluster> {
    let mut by_source: BTreeMap<String, BTreeMap<String, Vec<Occurrence>>> = BTreeMap::new();
    for aligned in alignments {
        let units = aligned.letter_units();
        let owners = aligned.column_units();
        let positions = aligned.cmu_positions();
        let cmu: Vec<PhoneSymbol> = aligned.cmu_phones().into_iter().cloned().collect();
        let syll = syllabify_lenient(&cmu).0;
        for (col, triplet) in aligned.columns.iter().enumerate() {
            let (Some(src), Some(dst), Some(idx)) = (&triplet.cmu, &triplet.cls, positions[col]) else {
                continue;
            };
            let Ok(position) = syll.position_in_syllable(idx) else {
                continue;
            };
            let unit = owners[col];
            let text = |i: Option<usize>| {
                i.and_then(|i| units.get(i))
                    .map_or_else(|| EDGE.to_string(), |u| u.text.clone())
            };
            let occurrence = Occurrence {
                word: aligned.word.clone(),
                column: col,
                letter: triplet.letter.as_ref().map_or_else(|| "_".to_string(), |l| l.text.clone()),
                position,
                left: text(unit.checked_sub(1)),
                right: text(Some(unit + 1)),
            };
            by_source
                .entry(src.label().to_string())
                .or_default()
                .entry(dst.label().to_string())
                .or_default()
                .push(occurrence);
        }
    }

    let mut clusters: Vec<AmbiguityCluster> = by_source
        .into_iter()
        .filter(|(_, targets)| targets.len() >= 2)
        .map(|(source_cmu, mut targets)| {
            for occs in targets.values_mut() {
                occs.sort();
            }
            let total = targets.values().map(Vec::len).sum();
            AmbiguityCluster {
                source_cmu,
                targets,
                total,
            }
        })
        .collect();
    clusters.sort_by(|a, b| b.total.cmp(&a.total).then_with(|| a.source_cmu.cmp(&b.source_cmu)));
    clusters
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleFamily {
    Syllable,
    Sequence,
    Prefix,
    Suffix,
}

impl RuleFamily {
    pub const ALL: [RuleFamily; 4] = [RuleFamily::Syllable, RuleFamily::Sequence, RuleFamily::Prefix, RuleFamily::Suffix];

    pub fn name(self) -> &'static str {
        match self {
            RuleFamily::Syllable => "syllable",
            RuleFamily::Sequence => "sequence",
            RuleFamily::Prefix => "prefix",
            RuleFamily::Suffix => "suffix",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub id: String,
    pub family: RuleFamily,
    pub words_changed: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyRow {
    pub family: RuleFamily,
    pub words_changed: usize,
    pub percent: f64,
}

/// Words changed per rule, per family and overall. A word counts as
/// corrected when at least one rule rewrote it; the merge-table default
/// alone does not count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub lexicon_size: usize,
    pub rules: Vec<CoverageRow>,
    pub families: Vec<FamilyRow>,
    pub total_changed: usize,
    pub total_percent: f64,
}

fn percent(n: usize, of: usize) -> f64 {
    if of == 0 {
        0.0
    } else {
        100.0 * n as f64 / of as f64
    }
}

fn family_of(kind: RuleKind, side: Option<AffixSide>) -> RuleFamily {
    match (kind, side) {
        (RuleKind::Syllable, _) => RuleFamily::Syllable,
        (RuleKind::Sequence, _) => RuleFamily::Sequence,
        (RuleKind::Affix, Some(AffixSide::Prefix)) => RuleFamily::Prefix,
        (RuleKind::Affix, _) => RuleFamily::Suffix,
    }
}

impl CoverageReport {
    /// Aggregates an apply run over a lexicon of `lexicon_size` words.
    pub fn from_output(output: &ApplyOutput, rules: &RuleSet, lexicon_size: usize) -> Self {
        let mut per_rule: BTreeMap<&str, HashSet<&str>> = BTreeMap::new();
        let mut per_family: BTreeMap<RuleFamily, HashSet<&str>> = BTreeMap::new();
        let mut all: HashSet<&str> = HashSet::new();
        let families: BTreeMap<&str, RuleFamily> = rules
            .rules()
            .iter()
            .map(|r| (r.id.as_str(), family_of(r.kind(), r.affix_side())))
            .collect();
        for m in &output.matches {
            per_rule.entry(&m.rule_id).or_default().insert(&m.word);
            if let Some(&f) = families.get(m.rule_id.as_str()) {
                per_family.entry(f).or_default().insert(&m.word);
            }
            all.insert(&m.word);
        }
        let rows = rules
            .rules()
            .iter()
            .map(|r| {
                let n = per_rule.get(r.id.as_str()).map_or(0, HashSet::len);
                CoverageRow {
                    id: r.id.clone(),
                    family: families[r.id.as_str()],
                    words_changed: n,
                    percent: percent(n, lexicon_size),
                }
            })
            .collect();
        let family_rows = RuleFamily::ALL
            .into_iter()
            .map(|f| {
                let n = per_family.get(&f).map_or(0, HashSet::len);
                FamilyRow {
                    family: f,
                    words_changed: n,
                    percent: percent(n, lexicon_size),
                }
            })
            .collect();
        CoverageReport {
            lexicon_size,
            rules: rows,
            families: family_rows,
            total_changed: all.len(),
            total_percent: percent(all.len(), lexicon_size),
        }
    }

    pub fn rule(&self, id: &str) -> Option<&CoverageRow> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn family(&self, family: RuleFamily) -> &FamilyRow {
        self.families
            .iter()
            .find(|f| f.family == family)
            .expect("every family has a row")
    }

    /// Human-readable table with aligned columns.
    pub fn to_table(&self) -> String {
        let mut lines: Vec<[String; 4]> = vec![["rule".into(), "family".into(), "words".into(), "percent".into()]];
        for r in &self.rules {
            lines.push([
                r.id.clone(),
                r.family.name().into(),
                r.words_changed.to_string(),
                format!("{:.2}", r.percent),
            ]);
        }
        for f in &self.families {
            lines.push([
                format!("[{}]", f.family.name()),
                f.family.name().into(),
                f.words_changed.to_string(),
                format!("{:.2}", f.percent),
            ]);
        }
        lines.push([
            "[total]".into(),
            "-".into(),
            self.total_changed.to_string(),
            format!("{:.2}", self.total_percent),
        ]);
        let widths: Vec<usize> = (0..4).map(|i| lines.iter().map(|l| l[i].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for l in &lines {
            let _ = writeln!(
                out,
                "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}",
                l[0],
                l[1],
                l[2],
                l[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        }
        let _ = writeln!(out, "lexicon size: {}", self.lexicon_size);
        out
    }

    /// `scope <TAB> id <TAB> words <TAB> percent` rows with a header.
    pub fn write_tsv(&self, mut dest: impl io::Write) -> io::Result<()> {
        writeln!(dest, "scope\tid\twords\tpercent")?;
        for r in &self.rules {
            writeln!(dest, "rule\t{}\t{}\t{:.4}", r.id, r.words_changed, r.percent)?;
        }
        for f in &self.families {
            writeln!(dest, "family\t{}\t{}\t{:.4}", f.family.name(), f.words_changed, f.percent)?;
        }
        writeln!(dest, "total\t-\t{}\t{:.4}", self.total_changed, self.total_percent)?;
        writeln!(dest, "lexicon\t-\t{}\t100.0000", self.lexicon_size)
    }
}

/// Applies `rules` to `lexicon` and reports coverage.
pub fn coverage_stats(
    lexicon: &Lexicon,
    rules: &RuleSet,
    phones: &PhoneSet,
    equiv: &EquivalenceSet,
    options: ApplyOptions,
) -> Result<CoverageReport> {
    let output = RuleEngine::new(phones, equiv, rules).apply(lexicon, options)?;
    Ok(CoverageReport::from_output(&output, rules, lexicon.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::default_equivalences;
    use crate::lexicon::{parse_cmu_dict, ParseMode};

    fn ps() -> &'static PhoneSet {
        PhoneSet::builtin()
    }

    fn lex(text: &str) -> Lexicon {
        parse_cmu_dict(text.as_bytes(), ps(), ParseMode::Strict).unwrap().lexicon
    }

    fn dump(lines: &[&str]) -> Vec<AlignedWord> {
        lines
            .iter()
            .map(|l| AlignedWord::parse_dump_line(l, ps()).unwrap())
            .collect()
    }

    #[test]
    fn select_words_examples() {
        let l = lex("A  AH0\nB  B IY1\nC  S IY1\n");
        let freq: Vec<String> = ["C", "A", "D"].iter().map(|s| s.to_string()).collect();
        assert_eq!(select_words(&l, &freq, 2, &HashSet::new()), ["C", "A"]);
        let ex: HashSet<String> = ["a".to_string()].into();
        assert_eq!(select_words(&l, &freq, 2, &ex), ["C"]);
        assert!(select_words(&l, &[], 5, &HashSet::new()).is_empty());
    }

    #[test]
    fn clusters_from_mixed_mappings() {
        let corpus = dump(&[
            "DOCTOR\t0\td|D|dx o|AA|ax c|K|k t|T|tx o|ER|a _|_|r",
            "HOT\t0\th|HH|h o|AA|ax t|T|tx",
            "FATHER\t0\tf|F|ph a|AA|aa th|DH|d er|ER|a _|_|r",
        ]);
        let clusters = detect_ambiguities(&corpus);
        let sources: Vec<&str> = clusters.iter().map(|c| c.source_cmu.as_str()).collect();
        assert!(sources.contains(&"AA"));
        let aa = clusters.iter().find(|c| c.source_cmu == "AA").unwrap();
        assert_eq!(aa.target_counts(), BTreeMap::from([("aa", 1), ("ax", 2)]));
        let hot = &aa.targets["ax"].iter().find(|o| o.word == "HOT").unwrap();
        assert_eq!((hot.left.as_str(), hot.right.as_str()), ("h", "t"));
        assert_eq!(hot.position, SyllablePosition::Internal);
    }

    #[test]
    fn exclusive_mappings_and_single_words_give_nothing() {
        assert!(detect_ambiguities(&dump(&["HOT\t0\th|HH|h o|AA|ax t|T|tx"])).is_empty());
        let corpus = dump(&["HOT\t0\th|HH|h o|AA|ax t|T|tx", "POT\t0\tp|P|p o|AA|ax t|T|tx"]);
        assert!(detect_ambiguities(&corpus).is_empty());
        // no CLS side at all
        assert!(detect_ambiguities(&dump(&["HOT\t0\th|HH|_ o|AA|_ t|T|_"])).is_empty());
    }

    #[test]
    fn edge_context() {
        let corpus = dump(&["ON\t0\to|AA|ax n|N|n", "ART\t0\ta|AA|aa r|R|r t|T|tx"]);
        let aa = &detect_ambiguities(&corpus)[0];
        let on = &aa.targets["ax"][0];
        assert_eq!((on.left.as_str(), on.right.as_str()), (EDGE, "n"));
    }

    #[test]
    fn empty_rules_give_zero_coverage() {
        let l = lex("CITED  S AY1 T AH0 D\nDOCTOR  D AA1 K T ER0\n");
        let r = coverage_stats(&l, &RuleSet::new(), ps(), default_equivalences(), ApplyOptions::default()).unwrap();
        assert_eq!(r.total_changed, 0);
        assert_eq!(r.total_percent, 0.0);
        assert!(r.rules.is_empty());
        assert!(r.families.iter().all(|f| f.words_changed == 0));
    }

    #[test]
    fn coverage_counts_words_once() {
        let l = lex("CITED  S AY1 T AH0 D\nDOCTOR  D AA1 K T ER0\nCHECK  CH EH1 K\nHOT  HH AA1 T\n");
        let rules = RuleSet::parse(
            "SYLL r2 o AA ax anywhere\nAFFIX a1 suffix ted \"T AH D\" \"t ee d\"\n",
            ps(),
        )
        .unwrap();
        let r = coverage_stats(&l, &rules, ps(), default_equivalences(), ApplyOptions::default()).unwrap();
        assert_eq!(r.lexicon_size, 4);
        assert_eq!(r.rule("r2").unwrap().words_changed, 2);
        assert_eq!(r.rule("a1").unwrap().words_changed, 1);
        assert_eq!(r.family(RuleFamily::Suffix).words_changed, 1);
        assert_eq!(r.total_changed, 3);
        assert_eq!(r.total_percent, 75.0);
        assert!(r.to_table().contains("[total]"));
        let mut tsv = Vec::new();
        r.write_tsv(&mut tsv).unwrap();
        assert!(String::from_utf8(tsv).unwrap().contains("rule\tr2\t2\t50.0000"));
    }
}
