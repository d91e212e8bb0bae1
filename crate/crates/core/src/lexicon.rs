//! Pronunciation dictionaries and transliteration files.
//!
//! The dictionary format is the CMU one: `WORD  PH1 PH2 ...`, alternate
//! pronunciations as `WORD(n)`, `;;;` comment lines. The newer lowercase
//! single-space layout with trailing `# comments` is accepted as well.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phoneset::{Inventory, PhoneSet, PhoneSymbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Bad lines are skipped and reported.
    #[default]
    Lenient,
    /// The first bad line aborts the parse.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PronEntry {
    pub word: String,
    pub phones: Vec<PhoneSymbol>,
    pub syllables: Option<Vec<Range<usize>>>,
}

impl PronEntry {
    pub fn new(word: impl Into<String>, phones: Vec<PhoneSymbol>) -> Result<Self> {
        let word = normalize_word(&word.into())?;
        if phones.is_empty() {
            return Err(Error::Invariant(format!("`{word}` has no phones")));
        }
        let inventory = phones[0].inventory();
        if phones.iter().any(|p| p.inventory() != inventory) {
            return Err(Error::Invariant(format!("`{word}` mixes phone inventories")));
        }
        Ok(Self {
            word,
            phones,
            syllables: None,
        })
    }

    pub fn inventory(&self) -> Inventory {
        self.phones[0].inventory()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.phones.iter().map(PhoneSymbol::label).collect()
    }

    pub fn with_syllables(mut self, syllables: Vec<Range<usize>>) -> Result<Self> {
        let mut next = 0;
        for r in &syllables {
            if r.start != next || r.end <= r.start {
                return Err(Error::Invariant(format!(
                    "syllables of `{}` do not tile the phone sequence",
                    self.word
                )));
            }
            next = r.end;
        }
        if next != self.phones.len() {
            return Err(Error::Invariant(format!(
                "syllables of `{}` do not cover the phone sequence",
                self.word
            )));
        }
        self.syllables = Some(syllables);
        Ok(self)
    }
}

/// Words mapped to their pronunciations; the first pronunciation is the
/// primary variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<PronEntry>>,
    inventory: Inventory,
}

impl Lexicon {
    pub fn new(inventory: Inventory) -> Self {
        Self {
            entries: BTreeMap::new(),
            inventory,
        }
    }

    pub fn inventory(&self) -> Inventory {
        self.inventory
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a pronunciation variant to its word.
    pub fn insert(&mut self, entry: PronEntry) -> Result<()> {
        if entry.inventory() != self.inventory {
            return Err(Error::Invariant(format!(
                "`{}` is {} but the lexicon holds {} phones",
                entry.word,
                entry.inventory(),
                self.inventory
            )));
        }
        self.entries.entry(entry.word.clone()).or_default().push(entry);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[PronEntry]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn primary(&self, word: &str) -> Option<&PronEntry> {
        self.entries.get(word).and_then(|v| v.first())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// Words in sorted order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[PronEntry])> {
        self.entries.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    /// A sub-lexicon holding only the listed words that are present.
    pub fn slice<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> Lexicon {
        let mut out = Lexicon::new(self.inventory);
        for w in words {
            if let Some(v) = self.entries.get(w) {
                out.entries.insert(w.to_string(), v.clone());
            }
        }
        out
    }

    /// Number of pronunciation variants across all words.
    pub fn variant_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

/// One skipped line from a lenient parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ParsedLexicon {
    pub lexicon: Lexicon,
    pub diagnostics: Vec<Diagnostic>,
}

/// Uppercases a word and checks it against `[A-Z][A-Z'\-\.]*`.
pub fn normalize_word(raw: &str) -> Result<String> {
    let word = raw.trim().to_ascii_uppercase();
    let mut chars = word.chars();
    match chars.next() {
        None => return Err(Error::EmptyWord),
        Some(c) if !c.is_ascii_uppercase() => {
            return Err(Error::InvalidWord { word: word.clone(), ch: c });
        }
        Some(_) => {}
    }
    if let Some(c) = chars.find(|&c| !(c.is_ascii_uppercase() || matches!(c, '\'' | '-' | '.'))) {
        return Err(Error::InvalidWord { word: word.clone(), ch: c });
    }
    Ok(word)
}

/// Parses a CMU-format dictionary, stripping stress from every phone.
pub fn parse_cmu_dict(input: impl BufRead, phones: &PhoneSet, mode: ParseMode) -> Result<ParsedLexicon> {
    parse_lexicon(input, phones, Inventory::Cmu, mode)
}

/// Parses a dictionary in CMU layout whose phones belong to `inventory`.
pub fn parse_lexicon(
    input: impl BufRead,
    phones: &PhoneSet,
    inventory: Inventory,
    mode: ParseMode,
) -> Result<ParsedLexicon> {
    let mut lexicon = Lexicon::new(inventory);
    let mut diagnostics = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        match parse_line(&line, line_no, phones, inventory) {
            Ok(None) => {}
            Ok(Some(entry)) => lexicon.insert(entry)?,
            Err(e) => match mode {
                ParseMode::Strict => return Err(e),
                ParseMode::Lenient => diagnostics.push(Diagnostic {
                    line: line_no,
                    message: e.to_string(),
                }),
            },
        }
    }
    Ok(ParsedLexicon { lexicon, diagnostics })
}

fn parse_line(line: &str, line_no: usize, phones: &PhoneSet, inventory: Inventory) -> Result<Option<PronEntry>> {
    if line.starts_with(";;;") {
        return Ok(None);
    }
    let content = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let mut fields = content.split_whitespace();
    let Some(head) = fields.next() else {
        return Ok(None);
    };
    let base = strip_variant(head);
    let word = normalize_word(base).map_err(|e| Error::parse(line_no, e.to_string()))?;
    let symbols = fields
        .map(|p| match inventory {
            Inventory::Cmu => phones.strip_stress(p),
            other => phones.symbol(other, p),
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::parse(line_no, e.to_string()))?;
    if symbols.is_empty() {
        return Err(Error::parse(line_no, format!("`{word}` has no pronunciation")));
    }
    PronEntry::new(word, symbols).map(Some)
}

fn strip_variant(head: &str) -> &str {
    if let Some(open) = head.rfind('(') {
        let inner = &head[open + 1..];
        if let Some(num) = inner.strip_suffix(')') {
            if !num.is_empty() && num.chars().all(|c| c.is_ascii_digit()) && open > 0 {
                return &head[..open];
            }
        }
    }
    head
}

/// Writes a lexicon in CMU layout: words sorted, alternates numbered from
/// `(2)` as in CMUdict, two spaces between word and phones.
pub fn write_lexicon(lexicon: &Lexicon, mut dest: impl Write) -> Result<()> {
    for (word, variants) in lexicon.iter() {
        for (i, entry) in variants.iter().enumerate() {
            if i == 0 {
                write!(dest, "{word}")?;
            } else {
                write!(dest, "{word}({})", i + 1)?;
            }
            write!(dest, " ")?;
            for p in &entry.phones {
                write!(dest, " {}", p.label())?;
            }
            writeln!(dest)?;
        }
    }
    dest.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransliterationRecord {
    pub word: String,
    pub devanagari: String,
    pub verified: bool,
}

pub(crate) fn is_devanagari_payload(text: &str) -> bool {
    !text.trim().is_empty() && text.chars().all(|c| c == ' ' || ('\u{0900}'..='\u{097F}').contains(&c))
}

/// Parses `WORD <TAB> devanagari [<TAB> verified]` records.
pub fn parse_translit_tsv(input: impl BufRead) -> Result<Vec<TransliterationRecord>> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (word, deva, flag) = match cols.as_slice() {
            [w, d] => (*w, *d, None),
            [w, d, f] => (*w, *d, Some(*f)),
            _ => {
                return Err(Error::parse(
                    line_no,
                    format!("expected 2 or 3 tab-separated columns, found {}", cols.len()),
                ))
            }
        };
        let word = normalize_word(word).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let devanagari = deva.trim();
        if !is_devanagari_payload(devanagari) {
            return Err(Error::Encoding {
                line: line_no,
                text: devanagari.to_string(),
            });
        }
        let verified = match flag.map(str::trim) {
            None | Some("") => false,
            Some("1" | "true" | "yes" | "y") => true,
            Some("0" | "false" | "no" | "n") => false,
            Some(other) => {
                return Err(Error::parse(line_no, format!("bad verified flag `{other}`")));
            }
        };
        out.push(TransliterationRecord {
            word,
            devanagari: devanagari.to_string(),
            verified,
        });
    }
    Ok(out)
}
