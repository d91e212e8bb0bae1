//! Shared inputs for the pipeline benchmarks.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::OnceLock;

use lexiforge_core::{parse_cmu_dict, Lexicon, ParseMode, PhoneSet};

pub fn dict_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cmudict/cmudict.dict")
}

/// The full vendored dictionary, parsed once.
pub fn dictionary() -> &'static Lexicon {
    static LEX: OnceLock<Lexicon> = OnceLock::new();
    LEX.get_or_init(|| {
        let file = File::open(dict_path()).expect("vendored dictionary");
        parse_cmu_dict(BufReader::new(file), PhoneSet::builtin(), ParseMode::Lenient)
            .expect("dictionary parses")
            .lexicon
    })
}

/// Every `step`th word of the dictionary.
pub fn sample(step: usize) -> Lexicon {
    let words: Vec<&str> = dictionary().words().step_by(step.max(1)).collect();
    dictionary().slice(words)
}
