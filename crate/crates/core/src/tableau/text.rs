//! Line-oriented tableau format.
//!
//! ```text
//! # comment
//! name wso3-p3
//! s 4
//! dirk
//! claimed_order 3
//! claimed_wso 3
//! a 1 1 1.3756543551000000e-1
//! ...
//! b 1 5.9761291500000000e-1
//! c 1 1.3756543551000000e-1
//! ```
//!
//! Indices are 1-based. `a` lines list nonzero entries only. `dirk` is a
//! declaration that `A` is lower triangular and is checked on parse. `c` lines
//! are optional; when present they must agree with the row sums of `A`.
//! Decimals are written with 17 significant digits so that parsing recovers
//! every coefficient bit for bit.

use std::fmt::Write;

use nalgebra::{DMatrix, DVector};

use super::ButcherTableau;
use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-13;

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn serialize(t: &ButcherTableau) -> String {
    let s = t.stages();
    let mut out = String::new();
    let _ = writeln!(out, "name {}", t.name());
    if let Some(p) = t.provenance() {
        let _ = writeln!(out, "# {p}");
    }
    let _ = writeln!(out, "s {s}");
    if t.is_dirk() {
        let _ = writeln!(out, "dirk");
    }
    if let Some(p) = t.claimed_order() {
        let _ = writeln!(out, "claimed_order {p}");
    }
    if let Some(q) = t.claimed_wso() {
        let _ = writeln!(out, "claimed_wso {q}");
    }
    for i in 0..s {
        for j in 0..s {
            let v = t.a()[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "a {} {} {}", i + 1, j + 1, fmt_f64(v));
            }
        }
    }
    for j in 0..s {
        let _ = writeln!(out, "b {} {}", j + 1, fmt_f64(t.b()[j]));
    }
    for i in 0..s {
        let _ = writeln!(out, "c {} {}", i + 1, fmt_f64(t.c()[i]));
    }
    out
}

struct Pending {
    name: Option<String>,
    s: Option<usize>,
    dirk: Option<usize>,
    a: Vec<(usize, usize, usize, f64)>,
    b: Vec<(usize, usize, f64)>,
    c: Vec<(usize, usize, f64)>,
    claimed_order: Option<u32>,
    claimed_wso: Option<u32>,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| err(line, format!("cannot parse {what} from `{tok}`")))
}

pub fn parse(text: &str) -> Result<ButcherTableau> {
    let mut p = Pending {
        name: None,
        s: None,
        dirk: None,
        a: vec![],
        b: vec![],
        c: vec![],
        claimed_order: None,
        claimed_wso: None,
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let key = toks.next().unwrap_or_default();
        match key {
            "name" => {
                let rest: Vec<&str> = toks.collect();
                if rest.is_empty() {
                    return Err(err(line, "missing name"));
                }
                p.name = Some(rest.join(" "));
                continue;
            }
            "s" => p.s = Some(num(toks.next(), line, "stage count")?),
            "dirk" => p.dirk = Some(line),
            "claimed_order" => p.claimed_order = Some(num(toks.next(), line, "claimed order")?),
            "claimed_wso" => p.claimed_wso = Some(num(toks.next(), line, "claimed wso")?),
            "a" => {
                let i = num(toks.next(), line, "row index")?;
                let j = num(toks.next(), line, "column index")?;
                let v = num(toks.next(), line, "coefficient")?;
                p.a.push((line, i, j, v));
            }
            "b" | "c" => {
                let j = num(toks.next(), line, "index")?;
                let v = num(toks.next(), line, "coefficient")?;
                if key == "b" {
                    p.b.push((line, j, v));
                } else {
                    p.c.push((line, j, v));
                }
            }
            other => return Err(err(line, format!("unknown key `{other}`"))),
        }
        if let Some(extra) = toks.next() {
            return Err(err(line, format!("unexpected trailing token `{extra}`")));
        }
    }

    let s = p.s.ok_or_else(|| err(0, "missing `s` line"))?;
    if s == 0 {
        return Err(err(0, "stage count must be positive"));
    }
    let check_index = |line: usize, i: usize| {
        if i == 0 || i > s {
            Err(err(line, format!("index {i} out of range 1..={s}")))
        } else {
            Ok(i - 1)
        }
    };

    let mut a = DMatrix::zeros(s, s);
    for &(line, i, j, v) in &p.a {
        let (i, j) = (check_index(line, i)?, check_index(line, j)?);
        if p.dirk.is_some() && j > i {
            return Err(err(
                line,
                format!("entry a {} {} lies above the diagonal of a dirk tableau", i + 1, j + 1),
            ));
        }
        a[(i, j)] = v;
    }
    let mut b = DVector::zeros(s);
    let mut seen = vec![false; s];
    for &(line, j, v) in &p.b {
        let j = check_index(line, j)?;
        b[j] = v;
        seen[j] = true;
    }
    if let Some(missing) = seen.iter().position(|x| !x) {
        return Err(err(0, format!("missing weight b {}", missing + 1)));
    }

    let name = p.name.unwrap_or_else(|| "unnamed".to_string());
    let t = ButcherTableau::new(a, b, name)?.with_claims(p.claimed_order, p.claimed_wso);
    for &(line, i, v) in &p.c {
        let i = check_index(line, i)?;
        let sum = t.c()[i];
        if (sum - v).abs() > ROW_SUM_TOL {
            return Err(err(
                line,
                format!(
                    "c {} = {v} disagrees with row sum {sum} of A (|diff| = {:.3e})",
                    i + 1,
                    (sum - v).abs()
                ),
            ));
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::{registry, registry_get};

    #[test]
    fn backward_euler_text() {
        let t = registry_get("backward-euler").unwrap();
        let text = serialize(&t);
        assert!(text.contains("s 1"));
        assert!(text.contains("a 1 1 1.0"));
    }

    #[test]
    fn round_trip_registry() {
        for e in registry() {
            let back = parse(&serialize(&e.tableau)).unwrap();
            assert_eq!(back.a(), e.tableau.a());
            assert_eq!(back.b(), e.tableau.b());
            assert_eq!(back.name(), e.tableau.name());
            assert_eq!(back.claimed_order(), e.tableau.claimed_order());
        }
    }

    #[test]
    fn c_line_disagreeing_with_row_sum_is_rejected() {
        let text = "s 2\na 1 1 0.5\na 2 1 0.3\na 2 2 0.2\nb 1 0.3\nb 2 0.2\nc 1 0.5\nc 2 0.6\n";
        match parse(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("c 2"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn upper_entry_in_dirk_is_rejected() {
        let text = "s 2\ndirk\na 1 2 0.5\nb 1 1\nb 2 0\n";
        assert!(matches!(parse(text), Err(Error::Parse { line: 3, .. })));
        // without the declaration the same matrix is accepted
        assert!(parse("s 2\na 1 2 0.5\nb 1 1\nb 2 0\n").is_ok());
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse("s x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("s 1\na 1 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("s 1\nq 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("s 1\na 2 1 1.0\nb 1 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse("a 1 1 1.0\n").is_err());
        assert!(parse("s 1\na 1 1 1.0\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let t = parse("# header\n\nname be # trailing\ns 1\na 1 1 1.0\nb 1 1.0\n").unwrap();
        assert_eq!(t.name(), "be");
        assert_eq!(t.c()[0], 1.0);
    }
}
