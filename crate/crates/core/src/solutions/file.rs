//! `[solution]` blocks:
//!
//! ```text
//! [solution]
//! id = my-family
//! system = 3-1
//! u = alpha1*exp(alpha1*t)/(alpha2 + exp(alpha1*t))
//! v = -alpha1*alpha2/(alpha2 + exp(alpha1*t))
//! constraints = alpha2 + exp(alpha1*t) != 0
//! params = alpha1 = 1, alpha2 = 1
//! t = 0:1
//! x = 0:3
//! ```
//!
//! `u` and `v` may contain `{s}` for the branch sign, chosen by
//! `branch = upper | lower`.

use thiserror::Error;

use super::{Branch, SampleSpec, SolutionError, SolutionFamily};
use crate::catalog::{list, parse_ini, IniError};

#[derive(Debug, Error)]
pub enum SolutionFileError {
    #[error(transparent)]
    Ini(#[from] IniError),
    #[error("[solution] at line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("[solution] at line {line}: {source}")]
    Solution { line: usize, source: SolutionError },
}

fn range(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once(':')?;
    let (a, b) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    (b > a).then_some((a, b))
}

pub fn parse_solution_file(text: &str) -> Result<Vec<SolutionFamily>, SolutionFileError> {
    let mut out = Vec::new();
    for s in parse_ini(text)? {
        let invalid = |message: String| SolutionFileError::Invalid { line: s.line, message };
        if s.name != "solution" {
            return Err(invalid(format!("unexpected section [{}]", s.name)));
        }
        let req = |k: &str| s.get(k).ok_or_else(|| invalid(format!("missing key '{k}'")));
        let (u, v) = (req("u")?, req("v")?);
        let id = s.get("id").unwrap_or("solution");
        let system = s.get("system").unwrap_or("3-1");
        let t = s.get("t").map_or(Some((0.0, 1.0)), range).ok_or_else(|| invalid("bad t range".into()))?;
        let x = s.get("x").map_or(Some((0.0, 1.0)), range).ok_or_else(|| invalid("bad x range".into()))?;
        let mut params = Vec::new();
        for item in list(s.get("params").unwrap_or("")) {
            let (k, val) = item.split_once('=').ok_or_else(|| invalid(format!("bad parameter '{item}'")))?;
            let val: f64 = val.trim().parse().map_err(|_| invalid(format!("bad value in '{item}'")))?;
            params.push((k.trim().to_string(), val));
        }
        let pv: Vec<(&str, f64)> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let cons = list(s.get("constraints").unwrap_or(""));
        let cons: Vec<&str> = cons.iter().map(String::as_str).collect();
        let sample = SampleSpec::new(t, x, &pv);
        let wrap = |source| SolutionFileError::Solution { line: s.line, source };
        let fam = match s.get("branch") {
            Some("upper") | Some("lower") => {
                let b = if s.get("branch") == Some("upper") { Branch::Upper } else { Branch::Lower };
                SolutionFamily::branched(id, system, u, v, b, &cons, sample).map_err(wrap)?
            }
            None | Some("") | Some("none") => SolutionFamily::new(id, system, u, v, &cons, sample).map_err(wrap)?,
            Some(other) => return Err(invalid(format!("branch must be upper or lower, not '{other}'"))),
        };
        out.push(fam);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_a_block() {
        let text = "[solution]\nid = s\nsystem = 3-2\nu = -1/t {s} sqrt(sin(x))\nv = -1/t {s} sqrt(sin(x))\n\
                    branch = lower\nconstraints = sin(x) >= 0\nparams = lambda1 = 1\nt = 0.5:2\nx = 0.1:3\n";
        let f = parse_solution_file(text).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].branch, Some(Branch::Lower));
        assert_eq!(f[0].sample.t, (0.5, 2.0));
        assert_eq!(f[0].u, crate::expr::parse("-1/t - sqrt(sin(x))").unwrap());
    }

    #[test]
    fn rejects_missing_v() {
        assert!(parse_solution_file("[solution]\nu = 1\n").is_err());
    }
}
