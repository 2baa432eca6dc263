//! Parameter paths into a JSON model file.
//!
//! A path is a dotted key sequence with optional `[i]` indices, such as
//! `kernel.rho.atoms[3].loc`. Several paths may be joined with commas; a
//! leading `-` sets that target to the negated value, which keeps symmetric
//! measures symmetric while one parameter moves.
//!
//! Inside `[loc, mass]` pairs the names `loc` and `mass` select the entries;
//! inside `[lo, hi, mass]` triples `lo`, `hi` and `mass` do. A leading `rho`
//! falls back to `kernel.rho` when the file has no top-level `rho`.

use cbm_core::CbmError;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Key(String),
    Index(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    text: String,
    negate: bool,
    segments: Vec<Segment>,
}

fn bad(path: &str, message: impl Into<String>) -> CbmError {
    CbmError::Config {
        field: format!("param {path}"),
        message: message.into(),
    }
}

fn parse_one(raw: &str) -> Result<Target, CbmError> {
    let raw = raw.trim();
    let (negate, body) = match raw.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, raw),
    };
    if body.is_empty() {
        return Err(bad(raw, "empty path"));
    }
    let mut segments = Vec::new();
    for piece in body.split('.') {
        let (name, mut rest) = match piece.find('[') {
            Some(i) => (&piece[..i], &piece[i..]),
            None => (piece, ""),
        };
        if name.is_empty() && segments.is_empty() {
            return Err(bad(raw, "path must start with a key"));
        }
        if !name.is_empty() {
            segments.push(Segment::Key(name.to_string()));
        }
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(|| bad(raw, "unclosed '['"))?;
            let idx = rest[1..close]
                .parse::<usize>()
                .map_err(|_| bad(raw, format!("bad index '{}'", &rest[1..close])))?;
            segments.push(Segment::Index(idx));
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return Err(bad(raw, "unexpected text after ']'"));
            }
        }
    }
    Ok(Target {
        text: raw.to_string(),
        negate,
        segments,
    })
}

pub fn parse_targets(spec: &str) -> Result<Vec<Target>, CbmError> {
    spec.split(',').map(parse_one).collect()
}

fn tuple_alias(name: &str, len: usize) -> Option<usize> {
    match (len, name) {
        (2, "loc") => Some(0),
        (2, "mass") => Some(1),
        (3, "lo") => Some(0),
        (3, "hi") => Some(1),
        (3, "mass") => Some(2),
        _ => None,
    }
}

impl Target {
    pub fn text(&self) -> &str {
        &self.text
    }

    fn resolve<'v>(&self, root: &'v mut Value) -> Result<&'v mut Value, CbmError> {
        let mut segments = self.segments.clone();
        if let (Some(Segment::Key(first)), Value::Object(map)) = (segments.first(), &*root) {
            if first == "rho" && !map.contains_key("rho") && map.contains_key("kernel") {
                segments.insert(0, Segment::Key("kernel".into()));
            }
        }
        let mut cur = root;
        for seg in &segments {
            cur = match (seg, cur) {
                (Segment::Key(k), Value::Object(map)) => map
                    .get_mut(k)
                    .ok_or_else(|| bad(&self.text, format!("no key '{k}'")))?,
                (Segment::Key(k), Value::Array(items)) => {
                    let len = items.len();
                    let i = tuple_alias(k, len).ok_or_else(|| {
                        bad(
                            &self.text,
                            format!("'{k}' does not name an entry of a {len}-tuple"),
                        )
                    })?;
                    &mut items[i]
                }
                (Segment::Index(i), Value::Array(items)) => {
                    let len = items.len();
                    items.get_mut(*i).ok_or_else(|| {
                        bad(&self.text, format!("index {i} out of range (length {len})"))
                    })?
                }
                (seg, _) => return Err(bad(&self.text, format!("cannot descend into {seg:?}"))),
            };
        }
        Ok(cur)
    }

    /// Sets the target to `value` (or `-value`), which must replace a number.
    pub fn apply(&self, root: &mut Value, value: f64) -> Result<(), CbmError> {
        let slot = self.resolve(root)?;
        if !slot.is_number() {
            return Err(bad(&self.text, "target is not a number"));
        }
        let v = if self.negate { -value } else { value };
        *slot = serde_json::Number::from_f64(v)
            .map(Value::Number)
            .ok_or_else(|| bad(&self.text, "value is not finite"))?;
        Ok(())
    }
}

/// `steps` evenly spaced points from `from` to `to` inclusive.
pub fn grid(from: f64, to: f64, steps: usize) -> Result<Vec<f64>, CbmError> {
    if !(from.is_finite() && to.is_finite()) {
        return Err(CbmError::Config {
            field: "from".into(),
            message: "range must be finite".into(),
        });
    }
    match steps {
        0 => Err(CbmError::Config {
            field: "steps".into(),
            message: "at least one step is required".into(),
        }),
        1 => Ok(vec![from]),
        n => Ok((0..n)
            .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
            .collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn parses_indices_and_negation() {
        let t = parse_targets("rho.atoms[3].loc, -rho.atoms[0].loc").unwrap();
        assert_eq!(t.len(), 2);
        assert!(!t[0].negate && t[1].negate);
        assert_eq!(
            t[0].segments,
            vec![
                Segment::Key("rho".into()),
                Segment::Key("atoms".into()),
                Segment::Index(3),
                Segment::Key("loc".into())
            ]
        );
        assert!(parse_targets("mu.atoms[x]").is_err());
        assert!(parse_targets("mu.atoms[1").is_err());
        assert!(parse_targets("-").is_err());
    }

    #[test]
    fn applies_through_kernel_alias() {
        let mut cfg = json!({
            "mu": {"type": "uniform", "lo": -0.1, "hi": 0.1},
            "kernel": {"type": "additive", "rho": {"type": "discrete", "atoms": [[-0.3, 0.5], [0.3, 0.5]]}}
        });
        for t in parse_targets("rho.atoms[1].loc,-rho.atoms[0].loc").unwrap() {
            t.apply(&mut cfg, 0.35).unwrap();
        }
        assert_eq!(
            cfg["kernel"]["rho"]["atoms"],
            json!([[-0.35, 0.5], [0.35, 0.5]])
        );
        let hi = parse_targets("mu.hi").unwrap();
        hi[0].apply(&mut cfg, 0.2).unwrap();
        assert_eq!(cfg["mu"]["hi"], json!(0.2));
    }

    #[test]
    fn rejects_missing_and_non_numeric_targets() {
        let mut cfg = json!({"mu": {"type": "uniform", "lo": -0.1, "hi": 0.1}});
        let err = parse_targets("mu.width").unwrap()[0]
            .apply(&mut cfg, 1.0)
            .unwrap_err();
        assert!(matches!(err, CbmError::Config { ref field, .. } if field == "param mu.width"));
        assert!(parse_targets("mu.type").unwrap()[0]
            .apply(&mut cfg, 1.0)
            .is_err());
    }

    #[test]
    fn grid_is_inclusive() {
        let g = grid(0.2, 0.4, 21).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.2);
        assert_eq!(g[20], 0.4);
        assert!((g[10] - 0.3).abs() < 1e-15);
        assert_eq!(grid(1.0, 2.0, 1).unwrap(), vec![1.0]);
        assert!(grid(0.0, 1.0, 0).is_err());
    }
}
