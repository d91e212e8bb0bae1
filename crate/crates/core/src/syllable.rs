//! Maximal-onset syllabification of CMU phone sequences.
//!
//! Each syllable holds exactly one vowel. Between two vowels, the longest
//! suffix of the consonant cluster that is a whitelisted onset goes to the
//! following syllable and the rest closes the previous one. Word-initial and
//! word-final consonants join the first and last syllable whatever they are.

use std::fmt;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phoneset::{Inventory, PhoneSymbol};

pub use crate::phoneset::CMU_VOWELS as VOWELS;

/// Single consonants that may open a syllable. NG is absent: English never
/// starts a syllable with it.
const SINGLE_ONSETS: [&str; 23] = [
    "B", "CH", "D", "DH", "F", "G", "HH", "JH", "K", "L", "M", "N", "P", "R", "S", "SH", "T", "TH", "V", "W", "Y",
    "Z", "ZH",
];

const CLUSTER_ONSETS: &[&[&str]] = &[
    &["P", "R"],
    &["T", "R"],
    &["K", "R"],
    &["B", "R"],
    &["D", "R"],
    &["G", "R"],
    &["F", "R"],
    &["TH", "R"],
    &["SH", "R"],
    &["P", "L"],
    &["K", "L"],
    &["B", "L"],
    &["G", "L"],
    &["F", "L"],
    &["S", "L"],
    &["K", "W"],
    &["G", "W"],
    &["S", "W"],
    &["T", "W"],
    &["D", "W"],
    &["TH", "W"],
    &["S", "P"],
    &["S", "T"],
    &["S", "K"],
    &["S", "M"],
    &["S", "N"],
    &["S", "F"],
    &["P", "Y"],
    &["B", "Y"],
    &["K", "Y"],
    &["G", "Y"],
    &["F", "Y"],
    &["V", "Y"],
    &["M", "Y"],
    &["HH", "Y"],
    &["S", "T", "R"],
    &["S", "K", "R"],
    &["S", "P", "R"],
    &["S", "P", "L"],
    &["S", "K", "W"],
    &["S", "K", "Y"],
    &["S", "P", "Y"],
];

pub fn is_vowel(label: &str) -> bool {
    VOWELS.contains(&label)
}

/// Whether a consonant sequence may open a syllable word-medially.
pub fn is_legal_onset<S: AsRef<str>>(cluster: &[S]) -> bool {
    match cluster {
        [] => true,
        [single] => SINGLE_ONSETS.contains(&single.as_ref()),
        _ => CLUSTER_ONSETS
            .iter()
            .any(|o| o.len() == cluster.len() && o.iter().zip(cluster).all(|(a, b)| *a == b.as_ref())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SyllablePosition {
    Start,
    Internal,
    End,
}

impl fmt::Display for SyllablePosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyllablePosition::Start => "start",
            SyllablePosition::Internal => "internal",
            SyllablePosition::End => "end",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyllabifiedPron {
    pub phones: Vec<PhoneSymbol>,
    pub boundaries: Vec<Range<usize>>,
}

impl SyllabifiedPron {
    /// The whole sequence as one syllable, used when there is no vowel.
    pub fn single(phones: Vec<PhoneSymbol>) -> Self {
        let boundaries: Vec<Range<usize>> = std::iter::once(0..phones.len()).filter(|r| !r.is_empty()).collect();
        Self { phones, boundaries }
    }

    pub fn syllable_of(&self, index: usize) -> Option<usize> {
        self.boundaries.iter().position(|r| r.contains(&index))
    }

    /// Position of a phone inside its syllable. A phone that is alone in its
    /// syllable counts as `End`.
    pub fn position_in_syllable(&self, index: usize) -> Result<SyllablePosition> {
        let syl = self.syllable_of(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.phones.len(),
        })?;
        let range = &self.boundaries[syl];
        Ok(if index + 1 == range.end {
            SyllablePosition::End
        } else if index == range.start {
            SyllablePosition::Start
        } else {
            SyllablePosition::Internal
        })
    }

    /// Bracket notation, e.g. `[S AY] [T AH D]`.
    pub fn brackets(&self) -> String {
        self.boundaries
            .iter()
            .map(|r| {
                let labels: Vec<&str> = self.phones[r.clone()].iter().map(PhoneSymbol::label).collect();
                format!("[{}]", labels.join(" "))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Maximal-onset syllabification. Fails with `NoNucleus` when no vowel is
/// present.
pub fn syllabify(phones: &[PhoneSymbol]) -> Result<SyllabifiedPron> {
    if let Some(p) = phones.iter().find(|p| p.inventory() != Inventory::Cmu) {
        return Err(Error::UnknownPhone {
            label: p.label().to_string(),
            inventory: Inventory::Cmu,
        });
    }
    let nuclei: Vec<usize> = phones
        .iter()
        .enumerate()
        .filter(|(_, p)| is_vowel(p.label()))
        .map(|(i, _)| i)
        .collect();
    if nuclei.is_empty() {
        let labels: Vec<&str> = phones.iter().map(PhoneSymbol::label).collect();
        return Err(Error::NoNucleus(labels.join(" ")));
    }

    let mut starts = vec![0];
    for pair in nuclei.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        let cluster = &phones[prev + 1..next];
        let labels: Vec<&str> = cluster.iter().map(PhoneSymbol::label).collect();
        let onset_len = (0..=labels.len())
            .rev()
            .find(|&k| is_legal_onset(&labels[labels.len() - k..]))
            .unwrap_or(0);
        starts.push(next - onset_len);
    }
    let mut boundaries = Vec::with_capacity(starts.len());
    for (i, &s) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(phones.len());
        boundaries.push(s..end);
    }
    Ok(SyllabifiedPron {
        phones: phones.to_vec(),
        boundaries,
    })
}

/// Like [`syllabify`] but falls back to a single pseudo-syllable, returning
/// whether the fallback was taken.
pub fn syllabify_lenient(phones: &[PhoneSymbol]) -> (SyllabifiedPron, bool) {
    match syllabify(phones) {
        Ok(s) => (s, false),
        Err(_) => (SyllabifiedPron::single(phones.to_vec()), true),
    }
}
