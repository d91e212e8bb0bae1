//! Line-oriented `[section]` config files shared by the phoneset and akshara maps.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ConfigLine {
    pub line: usize,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Section {
    pub name: String,
    pub line: usize,
    pub lines: Vec<ConfigLine>,
}

/// Splits config text into sections. `#` starts a comment; blank lines are
/// ignored; content before the first header is an error.
pub(crate) fn parse_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::config(line, format!("unterminated section header `{content}`")))?
                .trim();
            if name.is_empty() {
                return Err(Error::config(line, "empty section name"));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(Error::config(line, format!("section [{name}] repeated")));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                lines: Vec::new(),
            });
            continue;
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| Error::config(line, "entry outside of any section"))?;
        section.lines.push(ConfigLine {
            line,
            tokens: content.split_whitespace().map(str::to_string).collect(),
        });
    }
    Ok(sections)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let text = "# header\n[a]\nx y # trailing\n\n[b]\nz\n";
        let sections = parse_sections(text).unwrap();
        assert_eq!(sections.len(), 2);
        assert_eq!(sections[0].lines[0].tokens, vec!["x", "y"]);
        assert_eq!(sections[0].lines[0].line, 3);
        assert_eq!(sections[1].lines[0].tokens, vec!["z"]);
    }

    #[test]
    fn entry_before_header_is_rejected() {
        let err = parse_sections("AA\n[cmu]\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
    }

    #[test]
    fn repeated_section_is_rejected() {
        assert!(parse_sections("[a]\nx\n[a]\ny\n").is_err());
    }
}
