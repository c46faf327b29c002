//! Built-in classes and the plain-text class file format.
//!
//! Spec strings: `thresholds:n`, `points:n`, `intervals:n`, `full:n`,
//! `random:n:m:seed`. Anything else is treated as a path to a class file:
//! first line `n m`, followed by `m` lines of `n` characters in `{0,1}`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::class::HypothesisClass;
use super::labels::Labels;
use crate::error::{Error, Result};

fn build(n: usize, vectors: Vec<Labels>) -> HypothesisClass {
    HypothesisClass::new(n, vectors).expect("generator produced consistent lengths")
}

/// `h_t(x) = 1` iff `x ≥ t`, for `t = 0..=n`.
pub fn thresholds(n: usize) -> HypothesisClass {
    build(
        n,
        (0..=n).map(|t| Labels::from_bits((0..n).map(|x| x >= t))).collect(),
    )
}

/// Singletons `1[x = p]` plus the all-zeros function.
pub fn points(n: usize) -> HypothesisClass {
    let mut v: Vec<Labels> = (0..n)
        .map(|p| Labels::from_bits((0..n).map(|x| x == p)))
        .collect();
    v.push(Labels::from_bits((0..n).map(|_| false)));
    build(n, v)
}

/// Indicators of `[a, b)` for `0 ≤ a ≤ b ≤ n` (the empty interval once).
pub fn intervals(n: usize) -> HypothesisClass {
    let mut v = Vec::new();
    for a in 0..=n {
        for b in a..=n {
            v.push(Labels::from_bits((0..n).map(|x| a <= x && x < b)));
        }
    }
    build(n, v)
}

/// All `2^n` labelings.
pub fn full(n: usize) -> HypothesisClass {
    assert!(n <= 20, "full:{n} is too large to enumerate");
    build(
        n,
        (0u64..1 << n)
            .map(|mask| Labels::from_bits((0..n).map(|x| mask >> x & 1 == 1)))
            .collect(),
    )
}

/// `m` uniformly random labelings (duplicates dropped, so possibly fewer).
pub fn random(n: usize, m: usize, seed: u64) -> HypothesisClass {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build(
        n,
        (0..m)
            .map(|_| Labels::from_bits((0..n).map(|_| rng.gen::<bool>())))
            .collect(),
    )
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} `{s}`")))
}

/// Resolves a class spec: a generator name or a file path.
pub fn from_spec(spec: &str) -> Result<HypothesisClass> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["thresholds", n] => Ok(thresholds(parse_usize(n, "n")?)),
        ["points", n] => Ok(points(parse_usize(n, "n")?)),
        ["intervals", n] => Ok(intervals(parse_usize(n, "n")?)),
        ["full", n] => {
            let n = parse_usize(n, "n")?;
            if n > 20 {
                return Err(Error::param("class", "full:n supports n ≤ 20"));
            }
            Ok(full(n))
        }
        ["random", n, m, seed] => Ok(random(
            parse_usize(n, "n")?,
            parse_usize(m, "m")?,
            seed.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad seed `{seed}`")))?,
        )),
        _ if Path::new(spec).exists() => read_class_file(Path::new(spec)),
        _ => Err(Error::Unknown {
            kind: "class",
            name: spec.to_string(),
        }),
    }
}

pub fn read_class_file(path: &Path) -> Result<HypothesisClass> {
    parse_class(&std::fs::read_to_string(path)?)
}

pub fn parse_class(text: &str) -> Result<HypothesisClass> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header line".into()))?;
    let mut fields = header.split_whitespace();
    let (n, m) = match (fields.next(), fields.next(), fields.next()) {
        (Some(n), Some(m), None) => (parse_usize(n, "n")?, parse_usize(m, "m")?),
        _ => return Err(Error::Parse(format!("header must be `n m`, got `{header}`"))),
    };
    let mut rows = Vec::with_capacity(m);
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.len() != n {
            return Err(Error::Parse(format!(
                "row {i} has {} characters, expected {n}",
                line.len()
            )));
        }
        let bits = line
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("row {i}: unexpected `{other}`"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        rows.push(Labels::from_bits(bits));
    }
    if rows.len() != m {
        return Err(Error::Parse(format!(
            "expected {m} rows, found {}",
            rows.len()
        )));
    }
    HypothesisClass::new(n, rows)
}

/// Serializes a class in the text file format.
pub fn format_class(class: &HypothesisClass) -> String {
    let mut out = format!("{} {}\n", class.domain_size(), class.len());
    for h in class.hypotheses() {
        out.push_str(&h.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_sizes() {
        assert_eq!(thresholds(4).len(), 5);
        assert_eq!(points(8).len(), 9);
        // n(n+1)/2 nonempty intervals plus the empty one
        assert_eq!(intervals(4).len(), 11);
        assert_eq!(full(3).len(), 8);
        assert!(random(6, 20, 1).len() <= 20);
    }

    #[test]
    fn spec_strings() {
        assert_eq!(from_spec("thresholds:8").unwrap().len(), 9);
        assert_eq!(from_spec("random:5:10:7").unwrap().domain_size(), 5);
        assert!(matches!(
            from_spec("bogus:3"),
            Err(Error::Unknown { kind: "class", .. })
        ));
        assert!(from_spec("thresholds:x").is_err());
    }

    #[test]
    fn file_format_roundtrip() {
        let c = intervals(5);
        let parsed = parse_class(&format_class(&c)).unwrap();
        assert_eq!(parsed.hypotheses(), c.hypotheses());
    }

    #[test]
    fn file_format_errors() {
        assert!(parse_class("").is_err());
        assert!(parse_class("2 1\n011\n").is_err());
        assert!(parse_class("2 2\n01\n").is_err());
        assert!(parse_class("2 1\n0a\n").is_err());
    }
}
