//! Derives a non-native English pronunciation lexicon from a CMU-style
//! dictionary.
//!
//! The pipeline groups spelling into letter units, aligns them with CMU
//! phones (and, when deriving rules, with phones from a Devanagari
//! transliteration), syllabifies, and rewrites phones with substitution
//! rules. Whatever no rule touches is mapped through a merge table into a
//! common phone set shared by both source inventories.

mod config;

pub mod align;
pub mod analysis;
pub mod devanagari;
pub mod error;
pub mod letters;
pub mod lexicon;
pub mod phoneset;
pub mod rules;
pub mod syllable;

pub use align::{
    align_letters, align_pair, align_three_way, default_equivalences, parse_alignment_dump, AlignedWord,
    EquivalenceSet, PairAlignment, PairSet, Triplet,
};
pub use analysis::{
    coverage_stats, detect_ambiguities, select_words, AmbiguityCluster, CoverageReport, CoverageRow, FamilyRow,
    Occurrence, RuleFamily,
};
pub use devanagari::{devanagari_to_cls, AksharaMap, G2pOutput};
pub use error::{Error, Result};
pub use letters::{group_letters, LetterUnit};
pub use lexicon::{
    normalize_word, parse_cmu_dict, parse_lexicon, parse_translit_tsv, write_lexicon, Diagnostic, Lexicon,
    ParseMode, ParsedLexicon, PronEntry, TransliterationRecord,
};
pub use phoneset::{Inventory, MergePair, MergeTable, PhoneInventory, PhoneSet, PhoneSymbol};
pub use rules::{
    apply_rules, diff_lexicons, what_if, ApplyOptions, ApplyOutput, Rule, RuleEngine, RuleKind, RuleMatch,
    RuleSet, WhatIfReport, WordDiff,
};
pub use syllable::{syllabify, syllabify_lenient, SyllabifiedPron, SyllablePosition};
