//! Devanagari to CLS phone conversion.
//!
//! Consonants carry an inherent `a`, suppressed by a following virama and
//! replaced by a following matra. Only a word-final inherent vowel is
//! deleted; medial ones are kept and their positions reported so that a
//! curator can check the transliteration.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::Serialize;

use crate::config::parse_sections;
use crate::error::{Error, Result};
use crate::phoneset::{Inventory, PhoneSet, PhoneSymbol, CLS_VOWELS};

const DEFAULT_CONFIG: &str = include_str!("../data/akshara.conf");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AksharaCategory {
    Consonant,
    IndependentVowel,
    Matra,
    Virama,
    Nukta,
    Nasal,
    Sign,
}

#[derive(Debug, Clone)]
pub struct AksharaMap {
    consonants: HashMap<String, PhoneSymbol>,
    vowels: HashMap<char, PhoneSymbol>,
    matras: HashMap<char, PhoneSymbol>,
    signs: HashMap<char, PhoneSymbol>,
    virama: HashSet<char>,
    nukta: HashSet<char>,
    nasal: HashSet<char>,
    inherent: PhoneSymbol,
    nasal_by_place: HashMap<&'static str, PhoneSymbol>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct G2pOutput {
    pub phones: Vec<PhoneSymbol>,
    /// Indices into `phones` of inherent vowels kept word-medially.
    pub medial_schwas: Vec<usize>,
}

fn single_char(token: &str, line: usize) -> Result<char> {
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(Error::config(line, format!("`{token}` must be a single codepoint"))),
    }
}

fn place_of(label: &str) -> Option<&'static str> {
    Some(match label {
        "k" | "kh" | "g" | "gh" | "q" | "x" | "gq" => "velar",
        "c" | "ch" | "j" | "jh" | "z" => "palatal",
        "tx" | "txh" | "dx" | "dxh" | "dxq" | "dxhq" => "retroflex",
        "t" | "th" | "d" | "dh" => "dental",
        "p" | "ph" | "b" | "bh" | "f" => "labial",
        _ => return None,
    })
}

impl AksharaMap {
    pub fn builtin() -> &'static AksharaMap {
        static BUILTIN: OnceLock<AksharaMap> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            AksharaMap::from_config(DEFAULT_CONFIG, PhoneSet::builtin()).expect("shipped akshara config is valid")
        })
    }

    pub fn default_config() -> &'static str {
        DEFAULT_CONFIG
    }

    pub fn from_config(text: &str, phones: &PhoneSet) -> Result<Self> {
        let cls = |label: &str, line: usize| {
            phones
                .symbol(Inventory::Cls, label)
                .map_err(|e| Error::config(line, e.to_string()))
        };
        let is_cls_vowel = |p: &PhoneSymbol| CLS_VOWELS.contains(&p.label());

        let mut consonants = HashMap::new();
        let mut vowels = HashMap::new();
        let mut matras = HashMap::new();
        let mut signs = HashMap::new();
        let mut virama = HashSet::new();
        let mut nukta = HashSet::new();
        let mut nasal = HashSet::new();
        let mut inherent = None;

        for section in parse_sections(text)? {
            for entry in &section.lines {
                let line = entry.line;
                let toks = &entry.tokens;
                match section.name.as_str() {
                    "consonant" | "vowel" | "matra" | "sign" => {
                        let [key, label] = toks.as_slice() else {
                            return Err(Error::config(line, "expected `<codepoint> <TAB> <CLS label>`"));
                        };
                        let phone = cls(label, line)?;
                        match section.name.as_str() {
                            "consonant" => {
                                if is_cls_vowel(&phone) {
                                    return Err(Error::config(line, format!("consonant maps to vowel `{label}`")));
                                }
                                consonants.insert(key.clone(), phone);
                            }
                            "vowel" | "matra" => {
                                if !is_cls_vowel(&phone) {
                                    return Err(Error::config(line, format!("vowel maps to non-vowel `{label}`")));
                                }
                                let c = single_char(key, line)?;
                                if section.name == "vowel" {
                                    vowels.insert(c, phone);
                                } else {
                                    matras.insert(c, phone);
                                }
                            }
                            _ => {
                                signs.insert(single_char(key, line)?, phone);
                            }
                        }
                    }
                    "virama" | "nukta" | "nasal" => {
                        for t in toks {
                            let c = single_char(t, line)?;
                            match section.name.as_str() {
                                "virama" => virama.insert(c),
                                "nukta" => nukta.insert(c),
                                _ => nasal.insert(c),
                            };
                        }
                    }
                    "inherent" => {
                        let [label] = toks.as_slice() else {
                            return Err(Error::config(line, "expected one label"));
                        };
                        inherent = Some(cls(label, line)?);
                    }
                    other => {
                        return Err(Error::config(section.line, format!("unknown section [{other}]")));
                    }
                }
            }
        }

        let mut nasal_by_place = HashMap::new();
        for (place, label) in [
            ("velar", "ng"),
            ("palatal", "nj"),
            ("retroflex", "nx"),
            ("dental", "n"),
            ("labial", "m"),
        ] {
            if let Ok(p) = phones.symbol(Inventory::Cls, label) {
                nasal_by_place.insert(place, p);
            }
        }
        if !nasal.is_empty() && !nasal_by_place.contains_key("labial") {
            return Err(Error::Invariant("nasal signs need CLS `m`".into()));
        }

        Ok(Self {
            consonants,
            vowels,
            matras,
            signs,
            virama,
            nukta,
            nasal,
            inherent: inherent.ok_or_else(|| Error::Invariant("missing [inherent] section".into()))?,
            nasal_by_place,
        })
    }

    pub fn category(&self, c: char) -> Option<AksharaCategory> {
        let mut buf = [0u8; 4];
        if self.consonants.contains_key(c.encode_utf8(&mut buf) as &str) {
            Some(AksharaCategory::Consonant)
        } else if self.vowels.contains_key(&c) {
            Some(AksharaCategory::IndependentVowel)
        } else if self.matras.contains_key(&c) {
            Some(AksharaCategory::Matra)
        } else if self.virama.contains(&c) {
            Some(AksharaCategory::Virama)
        } else if self.nukta.contains(&c) {
            Some(AksharaCategory::Nukta)
        } else if self.nasal.contains(&c) {
            Some(AksharaCategory::Nasal)
        } else if self.signs.contains_key(&c) {
            Some(AksharaCategory::Sign)
        } else {
            None
        }
    }

    /// The consonant starting at `chars[i]`, with how many codepoints it
    /// spans (two when a nukta follows).
    fn consonant_at(&self, chars: &[char], i: usize) -> Option<(PhoneSymbol, usize)> {
        let base = chars.get(i)?.to_string();
        let base_phone = self.consonants.get(&base)?;
        if let Some(&next) = chars.get(i + 1) {
            if self.nukta.contains(&next) {
                let key = format!("{base}{next}");
                let phone = self.consonants.get(&key).unwrap_or(base_phone);
                return Some((phone.clone(), 2));
            }
        }
        Some((base_phone.clone(), 1))
    }

    fn nasal_before(&self, chars: &[char], i: usize) -> PhoneSymbol {
        let place = self
            .consonant_at(chars, i)
            .and_then(|(p, _)| place_of(p.label()));
        place
            .and_then(|pl| self.nasal_by_place.get(pl))
            .or_else(|| self.nasal_by_place.get("labial"))
            .cloned()
            .expect("labial nasal checked at load")
    }

    pub fn convert(&self, text: &str) -> Result<G2pOutput> {
        let chars: Vec<char> = text.chars().collect();
        let mut phones = Vec::new();
        let mut medial_schwas = Vec::new();
        // the last consonant still carries its inherent vowel
        let mut pending = false;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c == ' ' {
                pending = false;
                i += 1;
                continue;
            }
            if let Some((phone, len)) = self.consonant_at(&chars, i) {
                if pending {
                    medial_schwas.push(phones.len());
                    phones.push(self.inherent.clone());
                }
                phones.push(phone);
                pending = true;
                i += len;
                continue;
            }
            match self.category(c) {
                Some(AksharaCategory::Virama) if pending => pending = false,
                Some(AksharaCategory::Matra) if pending => {
                    phones.push(self.matras[&c].clone());
                    pending = false;
                }
                Some(AksharaCategory::IndependentVowel) => {
                    if pending {
                        medial_schwas.push(phones.len());
                        phones.push(self.inherent.clone());
                        pending = false;
                    }
                    phones.push(self.vowels[&c].clone());
                }
                Some(AksharaCategory::Nasal) => {
                    if pending {
                        medial_schwas.push(phones.len());
                        phones.push(self.inherent.clone());
                        pending = false;
                    }
                    phones.push(self.nasal_before(&chars, i + 1));
                }
                Some(AksharaCategory::Sign) => {
                    if pending {
                        medial_schwas.push(phones.len());
                        phones.push(self.inherent.clone());
                        pending = false;
                    }
                    phones.push(self.signs[&c].clone());
                }
                _ => {
                    return Err(Error::UnmappedCodepoint {
                        codepoint: c as u32,
                        offset: i,
                    })
                }
            }
            i += 1;
        }
        Ok(G2pOutput { phones, medial_schwas })
    }
}

/// Converts Devanagari text with the shipped akshara map.
pub fn devanagari_to_cls(text: &str) -> Result<Vec<PhoneSymbol>> {
    AksharaMap::builtin().convert(text).map(|o| o.phones)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(text: &str) -> Vec<String> {
        devanagari_to_cls(text)
            .unwrap()
            .into_iter()
            .map(|p| p.label().to_string())
            .collect()
    }

    #[test]
    fn examples() {
        assert_eq!(labels("स्कूल"), ["s", "k", "uu", "l"]);
        assert_eq!(labels("की"), ["k", "ii"]);
        assert_eq!(labels("क"), ["k"]);
    }

    #[test]
    fn medial_schwa_is_kept_and_flagged() {
        let out = AksharaMap::builtin().convert("कमल").unwrap();
        let l: Vec<&str> = out.phones.iter().map(PhoneSymbol::label).collect();
        assert_eq!(l, ["k", "a", "m", "a", "l"]);
        assert_eq!(out.medial_schwas, vec![1, 3]);
    }

    #[test]
    fn candra_o_and_e() {
        assert_eq!(labels("डॉक्टर"), ["dx", "ax", "k", "tx", "a", "r"]);
        assert_eq!(labels("साइटेड"), ["s", "aa", "i", "tx", "ee", "dx"]);
    }

    #[test]
    fn nasal_is_homorganic() {
        assert_eq!(labels("हिंदी"), ["h", "i", "n", "d", "ii"]);
        assert_eq!(labels("संत"), ["s", "a", "n", "t"]);
        assert_eq!(labels("अंक"), ["a", "ng", "k"]);
    }

    #[test]
    fn nukta_forms() {
        // precomposed and decomposed spellings agree
        assert_eq!(labels("\u{095B}ीरो"), ["z", "ii", "r", "oo"]);
        assert_eq!(labels("\u{091C}\u{093C}ीरो"), ["z", "ii", "r", "oo"]);
        // unlisted letter + nukta falls back to the letter
        assert_eq!(labels("\u{092E}\u{093C}ा"), ["m", "aa"]);
    }

    #[test]
    fn unmapped_codepoint() {
        match devanagari_to_cls("क१") {
            Err(Error::UnmappedCodepoint { codepoint, offset }) => {
                assert_eq!((codepoint, offset), (0x0967, 1));
            }
            other => panic!("{other:?}"),
        }
        assert!(devanagari_to_cls("ि").is_err());
    }

    #[test]
    fn virama_never_lengthens() {
        for c in ['क', 'म', 'स', 'ट'] {
            let bare = labels(&format!("{c}{c}"));
            let with = labels(&format!("{c}\u{094D}{c}"));
            assert!(with.len() <= bare.len());
        }
    }

    #[test]
    fn output_is_cls() {
        let out = devanagari_to_cls("ज़िंदगी फ़ॉर्म").unwrap();
        assert!(out.iter().all(|p| p.inventory() == Inventory::Cls));
    }
}
