//! CMU, CLS and merged common phone inventories.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::config::parse_sections;
use crate::error::{Error, Result};

const DEFAULT_CONFIG: &str = include_str!("../data/phoneset.conf");

pub const CMU_SIZE: usize = 39;
pub const CLS_SIZE: usize = 59;
pub const COMMON_SIZE: usize = 73;
pub const MERGE_PAIRS: usize = CMU_SIZE + CLS_SIZE - COMMON_SIZE;

/// Syllable nuclei of the CMU set. ER counts as a vowel.
pub const CMU_VOWELS: [&str; 15] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW",
];

pub const CLS_VOWELS: [&str; 15] = [
    "a", "aa", "i", "ii", "u", "uu", "rq", "e", "ee", "ai", "o", "oo", "au", "ax", "ae",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inventory {
    Cmu,
    Cls,
    Common,
}

impl fmt::Display for Inventory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Inventory::Cmu => "CMU",
            Inventory::Cls => "CLS",
            Inventory::Common => "COMMON",
        })
    }
}

/// A phone label tagged with the inventory it belongs to.
///
/// Only [`PhoneSet`] hands these out, so a symbol's label is always a member
/// of its inventory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhoneSymbol {
    label: String,
    inventory: Inventory,
}

impl PhoneSymbol {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn inventory(&self) -> Inventory {
        self.inventory
    }
}

impl fmt::Display for PhoneSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl Serialize for PhoneSymbol {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhoneInventory {
    name: Inventory,
    members: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PhoneInventory {
    fn new(name: Inventory, members: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(members.len());
        for (i, label) in members.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::Invariant(format!("duplicate {name} label `{label}`")));
            }
        }
        Ok(Self {
            name,
            members,
            index,
        })
    }

    pub fn name(&self) -> Inventory {
        self.name
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergePair {
    pub cmu: String,
    pub cls: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MergeTable {
    pairs: Vec<MergePair>,
}

impl MergeTable {
    pub fn pairs(&self) -> &[MergePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// The three inventories plus the merge table that projects CMU and CLS
/// phones onto the common set. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct PhoneSet {
    cmu: PhoneInventory,
    cls: PhoneInventory,
    common: PhoneInventory,
    merge: MergeTable,
    cmu_to_cls: HashMap<String, String>,
}

impl PhoneSet {
    /// The shipped default configuration.
    pub fn builtin() -> &'static PhoneSet {
        static BUILTIN: OnceLock<PhoneSet> = OnceLock::new();
        BUILTIN.get_or_init(|| PhoneSet::from_config(DEFAULT_CONFIG).expect("shipped phoneset config is valid"))
    }

    pub fn default_config() -> &'static str {
        DEFAULT_CONFIG
    }

    pub fn from_config(text: &str) -> Result<Self> {
        let sections = parse_sections(text)?;
        let mut cmu = None;
        let mut cls = None;
        let mut pairs = None;
        for section in sections {
            match section.name.as_str() {
                "cmu" | "cls" => {
                    let mut labels = Vec::new();
                    for line in &section.lines {
                        for token in &line.tokens {
                            if section.name == "cmu" && token.ends_with(|c: char| c.is_ascii_digit()) {
                                return Err(Error::config(
                                    line.line,
                                    format!("CMU label `{token}` carries a stress digit"),
                                ));
                            }
                            labels.push(token.clone());
                        }
                    }
                    if section.name == "cmu" {
                        cmu = Some(labels);
                    } else {
                        cls = Some(labels);
                    }
                }
                "merge" => {
                    let mut list = Vec::new();
                    for line in &section.lines {
                        match line.tokens.as_slice() {
                            [c, l] => list.push((line.line, MergePair {
                                cmu: c.clone(),
                                cls: l.clone(),
                            })),
                            _ => {
                                return Err(Error::config(
                                    line.line,
                                    "merge entries take the form `CMU<TAB>CLS`",
                                ))
                            }
                        }
                    }
                    pairs = Some(list);
                }
                other => {
                    return Err(Error::config(section.line, format!("unknown section [{other}]")));
                }
            }
        }
        let cmu = cmu.ok_or_else(|| Error::Invariant("missing [cmu] section".into()))?;
        let cls = cls.ok_or_else(|| Error::Invariant("missing [cls] section".into()))?;
        let pairs = pairs.unwrap_or_default();
        Self::build(cmu, cls, pairs)
    }

    fn build(cmu: Vec<String>, cls: Vec<String>, pairs: Vec<(usize, MergePair)>) -> Result<Self> {
        let cmu = PhoneInventory::new(Inventory::Cmu, cmu)?;
        let cls = PhoneInventory::new(Inventory::Cls, cls)?;
        if cmu.len() != CMU_SIZE {
            return Err(Error::Invariant(format!(
                "CMU inventory has {} members, expected {CMU_SIZE}",
                cmu.len()
            )));
        }
        if cls.len() != CLS_SIZE {
            return Err(Error::Invariant(format!(
                "CLS inventory has {} members, expected {CLS_SIZE}",
                cls.len()
            )));
        }
        if let Some(shared) = cmu.members().iter().find(|l| cls.contains(l)) {
            return Err(Error::Invariant(format!("label `{shared}` is in both CMU and CLS")));
        }
        if pairs.len() != MERGE_PAIRS {
            return Err(Error::Invariant(format!(
                "merge table has {} pairs, expected {MERGE_PAIRS}",
                pairs.len()
            )));
        }

        let mut cmu_to_cls = HashMap::new();
        let mut seen_cls = BTreeSet::new();
        for (line, pair) in &pairs {
            if !cmu.contains(&pair.cmu) {
                return Err(Error::config(*line, format!("merge label `{}` is not a CMU phone", pair.cmu)));
            }
            if !cls.contains(&pair.cls) {
                return Err(Error::config(*line, format!("merge label `{}` is not a CLS phone", pair.cls)));
            }
            if cmu_to_cls.insert(pair.cmu.clone(), pair.cls.clone()).is_some() {
                return Err(Error::Invariant(format!("CMU label `{}` merged twice", pair.cmu)));
            }
            if !seen_cls.insert(pair.cls.clone()) {
                return Err(Error::Invariant(format!("CLS label `{}` merged twice", pair.cls)));
            }
        }

        // Merged phones take the CLS label, so the common set is every CLS
        // phone plus the CMU phones that were not merged.
        let common_members: Vec<String> = cmu
            .members()
            .iter()
            .filter(|l| !cmu_to_cls.contains_key(*l))
            .chain(cls.members().iter())
            .cloned()
            .collect();
        let common = PhoneInventory::new(Inventory::Common, common_members)?;
        if common.len() != COMMON_SIZE {
            return Err(Error::Invariant(format!(
                "common inventory has {} members, expected {COMMON_SIZE}",
                common.len()
            )));
        }

        Ok(Self {
            cmu,
            cls,
            common,
            merge: MergeTable {
                pairs: pairs.into_iter().map(|(_, p)| p).collect(),
            },
            cmu_to_cls,
        })
    }

    pub fn inventory(&self, name: Inventory) -> &PhoneInventory {
        match name {
            Inventory::Cmu => &self.cmu,
            Inventory::Cls => &self.cls,
            Inventory::Common => &self.common,
        }
    }

    pub fn merge_table(&self) -> &MergeTable {
        &self.merge
    }

    pub fn symbol(&self, inventory: Inventory, label: &str) -> Result<PhoneSymbol> {
        if self.inventory(inventory).contains(label) {
            Ok(PhoneSymbol {
                label: label.to_string(),
                inventory,
            })
        } else {
            Err(Error::UnknownPhone {
                label: label.to_string(),
                inventory,
            })
        }
    }

    /// Resolves a label against the inventories in the given order.
    pub fn resolve(&self, label: &str, order: &[Inventory]) -> Result<PhoneSymbol> {
        order
            .iter()
            .find_map(|&inv| self.symbol(inv, label).ok())
            .ok_or_else(|| Error::UnknownPhone {
                label: label.to_string(),
                inventory: order.first().copied().unwrap_or(Inventory::Common),
            })
    }

    /// Removes one trailing stress digit (0, 1 or 2) from a CMU label.
    pub fn strip_stress(&self, raw: &str) -> Result<PhoneSymbol> {
        let bare = raw.strip_suffix(['0', '1', '2']).unwrap_or(raw);
        self.symbol(Inventory::Cmu, bare)
    }

    /// Projects a phone onto the common inventory. Common phones map to
    /// themselves.
    pub fn to_common(&self, phone: &PhoneSymbol) -> Result<PhoneSymbol> {
        let label = match phone.inventory {
            Inventory::Cmu => {
                if !self.cmu.contains(&phone.label) {
                    return Err(unknown(phone));
                }
                self.cmu_to_cls.get(&phone.label).unwrap_or(&phone.label)
            }
            Inventory::Cls => {
                if !self.cls.contains(&phone.label) {
                    return Err(unknown(phone));
                }
                &phone.label
            }
            Inventory::Common => {
                if !self.common.contains(&phone.label) {
                    return Err(unknown(phone));
                }
                &phone.label
            }
        };
        Ok(PhoneSymbol {
            label: label.clone(),
            inventory: Inventory::Common,
        })
    }

    /// The merged CLS partner of a CMU label, if any.
    pub fn merged_cls(&self, cmu_label: &str) -> Option<&str> {
        self.cmu_to_cls.get(cmu_label).map(String::as_str)
    }
}

fn unknown(phone: &PhoneSymbol) -> Error {
    Error::UnknownPhone {
        label: phone.label.clone(),
        inventory: phone.inventory,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> &'static PhoneSet {
        PhoneSet::builtin()
    }

    #[test]
    fn default_sizes() {
        let s = set();
        assert_eq!(s.inventory(Inventory::Cmu).len(), 39);
        assert_eq!(s.inventory(Inventory::Cls).len(), 59);
        assert_eq!(s.inventory(Inventory::Common).len(), 73);
        assert_eq!(s.merge_table().len(), 25);
    }

    #[test]
    fn strip_stress_examples() {
        let s = set();
        assert_eq!(s.strip_stress("AH0").unwrap().label(), "AH");
        assert_eq!(s.strip_stress("EY1").unwrap().label(), "EY");
        assert_eq!(s.strip_stress("CH").unwrap().label(), "CH");
        assert!(matches!(s.strip_stress("ZZ9"), Err(Error::UnknownPhone { .. })));
        // only one digit comes off
        assert!(s.strip_stress("AH00").is_err());
    }

    #[test]
    fn to_common_examples() {
        let s = set();
        let ch = s.symbol(Inventory::Cmu, "CH").unwrap();
        let common = s.to_common(&ch).unwrap();
        assert_eq!((common.label(), common.inventory()), ("CH", Inventory::Common));
        let aa = s.symbol(Inventory::Cmu, "AA").unwrap();
        assert_eq!(s.to_common(&aa).unwrap().label(), "aa");
        let cls_aa = s.symbol(Inventory::Cls, "aa").unwrap();
        assert_eq!(s.to_common(&cls_aa).unwrap().label(), "aa");
    }

    #[test]
    fn to_common_is_idempotent_and_pairs_collapse() {
        let s = set();
        for inv in [Inventory::Cmu, Inventory::Cls] {
            for label in s.inventory(inv).members() {
                let once = s.to_common(&s.symbol(inv, label).unwrap()).unwrap();
                assert_eq!(s.to_common(&once).unwrap(), once);
            }
        }
        for pair in s.merge_table().pairs() {
            let c = s.to_common(&s.symbol(Inventory::Cmu, &pair.cmu).unwrap()).unwrap();
            let l = s.to_common(&s.symbol(Inventory::Cls, &pair.cls).unwrap()).unwrap();
            assert_eq!(c, l);
        }
    }

    #[test]
    fn image_has_73_members() {
        let s = set();
        let image: BTreeSet<String> = [Inventory::Cmu, Inventory::Cls]
            .into_iter()
            .flat_map(|inv| {
                s.inventory(inv)
                    .members()
                    .iter()
                    .map(move |l| s.to_common(&s.symbol(inv, l).unwrap()).unwrap().label().to_string())
            })
            .collect();
        assert_eq!(image.len(), 73);
    }

    fn config_with_merge(merge: &str) -> String {
        let base = PhoneSet::default_config();
        let head = &base[..base.find("\n[merge]").unwrap() + 1];
        format!("{head}[merge]\n{merge}")
    }

    fn default_merge_lines() -> Vec<String> {
        set()
            .merge_table()
            .pairs()
            .iter()
            .map(|p| format!("{}\t{}", p.cmu, p.cls))
            .collect()
    }

    #[test]
    fn twenty_four_pairs_is_an_invariant_error() {
        let lines = default_merge_lines();
        let text = config_with_merge(&lines[..24].join("\n"));
        assert!(matches!(PhoneSet::from_config(&text), Err(Error::Invariant(_))));
    }

    #[test]
    fn duplicate_cmu_in_pairs_is_an_invariant_error() {
        let mut lines = default_merge_lines();
        // AA twice, paired with two different CLS vowels
        lines[24] = "AA\tax".to_string();
        let text = config_with_merge(&lines.join("\n"));
        assert!(matches!(PhoneSet::from_config(&text), Err(Error::Invariant(_))));
    }

    #[test]
    fn malformed_merge_line_reports_line() {
        let text = config_with_merge("AA aa extra\n");
        match PhoneSet::from_config(&text) {
            Err(Error::Config { line, .. }) => assert!(line > 1),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn merge_label_outside_inventory() {
        let mut lines = default_merge_lines();
        lines[0] = "AA\tzz".to_string();
        let text = config_with_merge(&lines.join("\n"));
        assert!(matches!(PhoneSet::from_config(&text), Err(Error::Config { .. })));
    }
}
