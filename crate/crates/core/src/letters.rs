//! Segmentation of spelled words into letter units.
//!
//! A letter unit is one or two letters that usually spell a single phone.
//! Scanning left to right, the first matching heuristic wins:
//!
//! 1. a fixed digram (`ph ch ng sh th er ow`)
//! 2. a doubled non-vowel letter (`ll`, `ss`, `yy`)
//! 3. a vowel followed by a vowel or `y` (`oy`, `ea`)
//! 4. a single character

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};

pub const DIGRAMS: [&str; 7] = ["ph", "ch", "ng", "sh", "th", "er", "ow"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LetterUnit {
    pub text: String,
    pub span: Range<usize>,
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn unit_len(bytes: &[u8], i: usize) -> usize {
    let Some(&next) = bytes.get(i + 1) else {
        return 1;
    };
    let cur = bytes[i];
    if !cur.is_ascii_lowercase() || !next.is_ascii_lowercase() {
        return 1;
    }
    if DIGRAMS.iter().any(|d| d.as_bytes() == [cur, next]) {
        return 2;
    }
    if cur == next && !is_vowel(cur) {
        return 2;
    }
    if is_vowel(cur) && (is_vowel(next) || next == b'y') {
        return 2;
    }
    1
}

/// Segments a word (letters plus `'`, `-`, `.`) into letter units. Upper
/// case input is folded to lower case.
pub fn group_letters(word: &str) -> Result<Vec<LetterUnit>> {
    if word.is_empty() {
        return Err(Error::EmptyWord);
    }
    let lower = word.to_ascii_lowercase();
    if let Some(ch) = lower
        .chars()
        .find(|&c| !(c.is_ascii_lowercase() || matches!(c, '\'' | '-' | '.')))
    {
        return Err(Error::InvalidWord {
            word: word.to_string(),
            ch,
        });
    }
    let bytes = lower.as_bytes();
    let mut units = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let len = unit_len(bytes, i);
        units.push(LetterUnit {
            text: lower[i..i + len].to_string(),
            span: i..i + len,
        });
        i += len;
    }
    Ok(units)
}
