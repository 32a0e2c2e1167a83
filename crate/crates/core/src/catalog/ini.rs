//! Minimal INI reader: `[section]` headers, `key = value` lines, `#` or `;`
//! comments. Section names may repeat.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct IniError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<(String, String)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn parse_ini(text: &str) -> Result<Vec<Section>, IniError> {
    let mut out: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let n = i + 1;
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| IniError { line: n, message: "unterminated section header".into() })?;
            out.push(Section { name: name.trim().to_string(), line: n, entries: Vec::new() });
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| IniError { line: n, message: format!("expected key = value, got '{line}'") })?;
        let section = out
            .last_mut()
            .ok_or_else(|| IniError { line: n, message: "key outside of any section".into() })?;
        section.entries.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Split a comma-separated list, dropping empty items.
pub fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let s = parse_ini("# c\n[a]\nx = 1\n; c\n[a]\ny=2 \n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].get("x"), Some("1"));
        assert_eq!(s[1].get("y"), Some("2"));
        assert_eq!(list(" P_t, P_x ,, Q1"), vec!["P_t", "P_x", "Q1"]);
    }

    #[test]
    fn errors_carry_lines() {
        assert_eq!(parse_ini("x = 1").unwrap_err().line, 1);
        assert_eq!(parse_ini("[a]\n\nnope").unwrap_err().line, 3);
        assert!(parse_ini("[a").is_err());
    }
}
