//! Monotone DP alignment of letter units, CMU phones and CLS phones.
//!
//! Pairwise alignments use unit costs: a substitution is free when the two
//! tokens are listed as equivalent (or equal ignoring case) and costs 1
//! otherwise; every gap costs 1. Among optimal alignments the traceback
//! prefers, walking back from the end, a substitution, then a source-only
//! column, then a target-only column. This puts gaps as far left as the
//! optimum allows.
//!
//! The three-way alignment joins letter↔CMU and CMU↔CLS alignments on the
//! CMU positions.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::ops::Range;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::letters::{group_letters, LetterUnit};
use crate::lexicon::{normalize_word, PronEntry};
use crate::phoneset::{Inventory, PhoneSet, PhoneSymbol, CLS_VOWELS, CMU_VOWELS};

/// Directed (source, target) token pairs that substitute at zero cost.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSet {
    pairs: HashMap<String, HashSet<String>>,
}

impl PairSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, src: impl Into<String>, dst: impl Into<String>) -> bool {
        self.pairs.entry(src.into()).or_default().insert(dst.into())
    }

    pub fn contains(&self, src: &str, dst: &str) -> bool {
        self.pairs.get(src).is_some_and(|s| s.contains(dst))
    }

    pub fn len(&self) -> usize {
        self.pairs.values().map(HashSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All pairs in sorted order.
    pub fn sorted(&self) -> BTreeSet<(String, String)> {
        self.pairs
            .iter()
            .flat_map(|(s, ds)| ds.iter().map(move |d| (s.clone(), d.clone())))
            .collect()
    }
}

impl<S: Into<String>, D: Into<String>> FromIterator<(S, D)> for PairSet {
    fn from_iter<I: IntoIterator<Item = (S, D)>>(iter: I) -> Self {
        let mut set = PairSet::new();
        for (s, d) in iter {
            set.insert(s, d);
        }
        set
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EquivalenceSet {
    pub letter_cmu: PairSet,
    pub cmu_cls: PairSet,
}

const LETTER_CMU: &[(&str, &str)] = &[
    ("p", "P"),
    ("b", "B"),
    ("t", "T"),
    ("d", "D"),
    ("k", "K"),
    ("c", "K"),
    ("c", "S"),
    ("q", "K"),
    ("x", "K"),
    ("x", "Z"),
    ("g", "G"),
    ("g", "JH"),
    ("f", "F"),
    ("ph", "F"),
    ("v", "V"),
    ("s", "S"),
    ("s", "Z"),
    ("s", "SH"),
    ("z", "Z"),
    ("m", "M"),
    ("n", "N"),
    ("n", "NG"),
    ("l", "L"),
    ("r", "R"),
    ("h", "HH"),
    ("w", "W"),
    ("y", "Y"),
    ("j", "JH"),
    ("sh", "SH"),
    ("ch", "CH"),
    ("ch", "K"),
    ("ch", "SH"),
    ("th", "TH"),
    ("th", "DH"),
    ("ng", "NG"),
    ("er", "ER"),
    ("er", "R"),
    ("ow", "W"),
];

const CMU_CLS: &[(&str, &str)] = &[
    ("T", "t"),
    ("T", "tx"),
    ("D", "d"),
    ("D", "dx"),
    ("TH", "th"),
    ("TH", "t"),
    ("DH", "d"),
    ("DH", "dh"),
    ("CH", "c"),
    ("CH", "ch"),
    ("JH", "jh"),
    ("V", "w"),
    ("V", "bh"),
    ("W", "w"),
    ("Z", "z"),
    ("Z", "j"),
    ("ZH", "z"),
    ("ZH", "sh"),
    ("ZH", "j"),
    ("F", "f"),
    ("F", "ph"),
    ("K", "kh"),
    ("K", "q"),
    ("G", "gq"),
    ("ER", "r"),
    ("Y", "i"),
];

fn is_vowel_unit(text: &str) -> bool {
    text == "ow" || text == "er" || text.bytes().all(|b| matches!(b, b'a' | b'e' | b'i' | b'o' | b'u' | b'y'))
}

impl EquivalenceSet {
    /// Zero-cost pairs for a phone set: the listed consonant anchors,
    /// doubled consonant letters, every vowel letter unit against every CMU
    /// vowel, the merge table, and every CMU vowel against every CLS vowel.
    pub fn for_phoneset(phones: &PhoneSet) -> Self {
        let mut letter_cmu: PairSet = LETTER_CMU.iter().copied().collect();
        let singles: Vec<(String, String)> = letter_cmu
            .sorted()
            .into_iter()
            .filter(|(l, _)| l.len() == 1 && l != "y")
            .collect();
        for (l, p) in singles {
            letter_cmu.insert(l.repeat(2), p);
        }
        for unit in vowel_units() {
            for v in CMU_VOWELS {
                letter_cmu.insert(unit.clone(), v);
            }
        }

        let mut cmu_cls: PairSet = CMU_CLS
            .iter()
            .copied()
            .filter(|(c, l)| {
                phones.inventory(Inventory::Cmu).contains(c) && phones.inventory(Inventory::Cls).contains(l)
            })
            .collect();
        for pair in phones.merge_table().pairs() {
            cmu_cls.insert(pair.cmu.clone(), pair.cls.clone());
        }
        for c in CMU_VOWELS.iter().filter(|v| phones.inventory(Inventory::Cmu).contains(v)) {
            for l in CLS_VOWELS.iter().filter(|v| phones.inventory(Inventory::Cls).contains(v)) {
                cmu_cls.insert(*c, *l);
            }
        }
        Self { letter_cmu, cmu_cls }
    }
}

/// Every one- or two-letter unit made of vowel letters, plus `ow` and `er`.
fn vowel_units() -> Vec<String> {
    const V: &[u8] = b"aeiouy";
    let mut units: Vec<String> = V.iter().map(|&c| (c as char).to_string()).collect();
    for &a in &V[..5] {
        for &b in V {
            units.push(format!("{}{}", a as char, b as char));
        }
    }
    units.push("ow".into());
    units.push("er".into());
    units.retain(|u| is_vowel_unit(u));
    units
}

/// The shipped equivalences for the built-in phone set.
pub fn default_equivalences() -> &'static EquivalenceSet {
    static DEFAULT: OnceLock<EquivalenceSet> = OnceLock::new();
    DEFAULT.get_or_init(|| EquivalenceSet::for_phoneset(PhoneSet::builtin()))
}

/// One column of a pairwise alignment: indices into source and target.
pub type PairColumn = (Option<usize>, Option<usize>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairAlignment {
    pub columns: Vec<PairColumn>,
    pub cost: u32,
}

pub fn substitution_cost(src: &str, dst: &str, equiv: &PairSet) -> u32 {
    if src.eq_ignore_ascii_case(dst) || equiv.contains(src, dst) {
        0
    } else {
        1
    }
}

/// Minimum-cost monotone alignment of `src` against `dst`.
pub fn align_pair<A: AsRef<str>, B: AsRef<str>>(src: &[A], dst: &[B], equiv: &PairSet) -> Result<PairAlignment> {
    if src.is_empty() || dst.is_empty() {
        return Err(Error::EmptySequence);
    }
    let (n, m) = (src.len(), dst.len());
    let width = m + 1;
    let mut cost = vec![0u32; (n + 1) * width];
    let mut sub = vec![0u32; n * m];
    for i in 0..n {
        for j in 0..m {
            sub[i * m + j] = substitution_cost(src[i].as_ref(), dst[j].as_ref(), equiv);
        }
    }
    for i in 0..=n {
        for j in 0..=m {
            cost[i * width + j] = match (i, j) {
                (0, _) => j as u32,
                (_, 0) => i as u32,
                _ => (cost[(i - 1) * width + j - 1] + sub[(i - 1) * m + j - 1])
                    .min(cost[(i - 1) * width + j] + 1)
                    .min(cost[i * width + j - 1] + 1),
            };
        }
    }

    let mut columns = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 && cost[(i - 1) * width + j - 1] + sub[(i - 1) * m + j - 1] == here {
            columns.push((Some(i - 1), Some(j - 1)));
            i -= 1;
            j -= 1;
        } else if i > 0 && cost[(i - 1) * width + j] + 1 == here {
            columns.push((Some(i - 1), None));
            i -= 1;
        } else {
            columns.push((None, Some(j - 1)));
            j -= 1;
        }
    }
    columns.reverse();
    Ok(PairAlignment {
        columns,
        cost: cost[n * width + m],
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Triplet {
    pub letter: Option<LetterUnit>,
    pub cmu: Option<PhoneSymbol>,
    pub cls: Option<PhoneSymbol>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignedWord {
    pub word: String,
    pub columns: Vec<Triplet>,
    pub cost: u32,
}

impl AlignedWord {
    pub fn letter_units(&self) -> Vec<&LetterUnit> {
        self.columns.iter().filter_map(|c| c.letter.as_ref()).collect()
    }

    pub fn cmu_phones(&self) -> Vec<&PhoneSymbol> {
        self.columns.iter().filter_map(|c| c.cmu.as_ref()).collect()
    }

    pub fn cls_phones(&self) -> Vec<&PhoneSymbol> {
        self.columns.iter().filter_map(|c| c.cls.as_ref()).collect()
    }

    pub fn has_cls(&self) -> bool {
        self.columns.iter().any(|c| c.cls.is_some())
    }

    /// For each column, the index of its CMU phone within the phone sequence.
    pub fn cmu_positions(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.columns
            .iter()
            .map(|c| {
                c.cmu.as_ref().map(|_| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    }

    /// For each column, the index of the letter unit it belongs to. Columns
    /// without a letter join the next lettered column; trailing ones join
    /// the last unit.
    pub fn column_units(&self) -> Vec<usize> {
        let units = self.columns.iter().filter(|c| c.letter.is_some()).count();
        let mut owner = vec![0; self.columns.len()];
        let mut next_unit = 0;
        let mut pending = Vec::new();
        for (i, col) in self.columns.iter().enumerate() {
            if col.letter.is_some() {
                for p in pending.drain(..) {
                    owner[p] = next_unit;
                }
                owner[i] = next_unit;
                next_unit += 1;
            } else {
                pending.push(i);
            }
        }
        let last = units.saturating_sub(1);
        for p in pending {
            owner[p] = last;
        }
        owner
    }

    /// Column range owned by each letter unit (see [`Self::column_units`]).
    pub fn unit_columns(&self) -> Vec<Range<usize>> {
        let owner = self.column_units();
        let units = self.columns.iter().filter(|c| c.letter.is_some()).count();
        let mut ranges: Vec<Option<Range<usize>>> = vec![None; units];
        for (col, &u) in owner.iter().enumerate() {
            if let Some(slot) = ranges.get_mut(u) {
                let r = slot.get_or_insert(col..col + 1);
                r.start = r.start.min(col);
                r.end = r.end.max(col + 1);
            }
        }
        ranges.into_iter().map(Option::unwrap_or_default).collect()
    }

    /// `WORD <TAB> cost <TAB> letter|cmu|cls ...` with `_` for gaps.
    pub fn to_dump_line(&self) -> String {
        let mut out = format!("{}\t{}\t", self.word, self.cost);
        for (i, c) in self.columns.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(
                out,
                "{}|{}|{}",
                c.letter.as_ref().map_or("_", |l| l.text.as_str()),
                c.cmu.as_ref().map_or("_", |p| p.label()),
                c.cls.as_ref().map_or("_", |p| p.label()),
            );
        }
        out
    }

    pub fn parse_dump_line(line: &str, phones: &PhoneSet) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [word, cost, cols] = fields.as_slice() else {
            return Err(Error::parse(0, "alignment records have 3 tab-separated fields"));
        };
        let word = normalize_word(word)?;
        let cost: u32 = cost
            .trim()
            .parse()
            .map_err(|_| Error::parse(0, format!("bad alignment cost `{cost}`")))?;
        let mut columns = Vec::new();
        let mut offset = 0;
        for col in cols.split(' ').filter(|c| !c.is_empty()) {
            let parts: Vec<&str> = col.split('|').collect();
            let [l, c, s] = parts.as_slice() else {
                return Err(Error::parse(0, format!("bad alignment column `{col}`")));
            };
            let letter = (*l != "_").then(|| {
                let unit = LetterUnit {
                    text: l.to_string(),
                    span: offset..offset + l.len(),
                };
                offset += l.len();
                unit
            });
            let cmu = (*c != "_").then(|| phones.symbol(Inventory::Cmu, c)).transpose()?;
            let cls = (*s != "_").then(|| phones.symbol(Inventory::Cls, s)).transpose()?;
            if letter.is_none() && cmu.is_none() && cls.is_none() {
                return Err(Error::parse(0, "all-gap alignment column"));
            }
            columns.push(Triplet { letter, cmu, cls });
        }
        Ok(Self { word, columns, cost })
    }
}

/// Parses a whole alignment dump, reporting line numbers.
pub fn parse_alignment_dump(text: &str, phones: &PhoneSet) -> Result<Vec<AlignedWord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            AlignedWord::parse_dump_line(l, phones).map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(i + 1, message),
                other => Error::parse(i + 1, other.to_string()),
            })
        })
        .collect()
}

fn lower_word(word: &str) -> String {
    word.to_ascii_lowercase()
}

/// Letter↔phone alignment with no CLS side, as used when applying rules.
pub fn align_letters(word: &str, phones: &[PhoneSymbol], equiv: &EquivalenceSet) -> Result<AlignedWord> {
    let units = group_letters(&lower_word(word))?;
    let texts: Vec<&str> = units.iter().map(|u| u.text.as_str()).collect();
    let labels: Vec<&str> = phones.iter().map(PhoneSymbol::label).collect();
    let la = align_pair(&texts, &labels, &equiv.letter_cmu)?;
    let columns = la
        .columns
        .iter()
        .map(|&(l, p)| Triplet {
            letter: l.map(|i| units[i].clone()),
            cmu: p.map(|j| phones[j].clone()),
            cls: None,
        })
        .collect();
    Ok(AlignedWord {
        word: word.to_ascii_uppercase(),
        columns,
        cost: la.cost,
    })
}

/// Three-way letter↔CMU↔CLS alignment, joined on CMU positions.
pub fn align_three_way(word: &str, cmu: &PronEntry, cls: &PronEntry, equiv: &EquivalenceSet) -> Result<AlignedWord> {
    if cmu.inventory() != Inventory::Cmu {
        return Err(Error::Invariant(format!("`{word}`: expected CMU phones")));
    }
    if cls.inventory() != Inventory::Cls {
        return Err(Error::Invariant(format!("`{word}`: expected CLS phones")));
    }
    let units = group_letters(&lower_word(word))?;
    let texts: Vec<&str> = units.iter().map(|u| u.text.as_str()).collect();
    let cmu_labels = cmu.labels();
    let cls_labels = cls.labels();
    let la = align_pair(&texts, &cmu_labels, &equiv.letter_cmu)?;
    let pc = align_pair(&cmu_labels, &cls_labels, &equiv.cmu_cls)?;

    let mut columns = Vec::with_capacity(la.columns.len() + pc.columns.len());
    let mut pc_iter = pc.columns.iter().peekable();
    let cls_only = |k: usize| Triplet {
        letter: None,
        cmu: None,
        cls: Some(cls.phones[k].clone()),
    };
    for &(l, c) in &la.columns {
        let letter = l.map(|i| units[i].clone());
        let Some(j) = c else {
            columns.push(Triplet {
                letter,
                cmu: None,
                cls: None,
            });
            continue;
        };
        while let Some(&&(None, Some(k))) = pc_iter.peek() {
            columns.push(cls_only(k));
            pc_iter.next();
        }
        let cls_phone = match pc_iter.next() {
            Some(&(Some(jj), k)) if jj == j => k.map(|k| cls.phones[k].clone()),
            _ => unreachable!("both pairwise alignments cover every CMU position in order"),
        };
        columns.push(Triplet {
            letter,
            cmu: Some(cmu.phones[j].clone()),
            cls: cls_phone,
        });
    }
    for &(_, k) in pc_iter {
        if let Some(k) = k {
            columns.push(cls_only(k));
        }
    }
    Ok(AlignedWord {
        word: word.to_ascii_uppercase(),
        columns,
        cost: la.cost + pc.cost,
    })
}
