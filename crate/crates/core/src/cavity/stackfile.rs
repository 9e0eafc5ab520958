//! Plain-text layer tables.
//!
//! ```text
//! # incidence medium and exit medium
//! ambient   1.4761
//! substrate 3.461
//!
//! # index  thickness_nm  [repeat]
//! 2.09     110.05
//! 1.0      720.0
//! 3.461+1e-4i  397.4          # n + ik: absorbing film
//!
//! # quarter-wave shorthand: qwl index center_nm [count]
//! qwl 2.09 920
//!
//! # blocks repeat everything up to the matching `end`
//! repeat 7
//!   qwl 2.09 920
//!   qwl 1.48 920
//! end
//! ```
//!
//! Layers are listed from the ambient side towards the substrate. Blank lines
//! and `#` comments are ignored.

use std::fmt::Write as _;

use super::transfer::{Layer, LayerStack};
use crate::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn number(tok: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| parse_err(line, format!("{what}: not a number: {tok}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what} must be finite")));
    }
    Ok(v)
}

fn count(tok: &str, line: usize, what: &str) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(parse_err(line, format!("{what} must be a positive integer, got {tok}"))),
    }
}

/// Parses `n`, or `n+ki` / `n-ki` (only `+k` with `k ≥ 0` is physical).
fn index(tok: &str, line: usize) -> Result<(f64, f64)> {
    let Some(body) = tok.strip_suffix('i') else {
        return Ok((number(tok, line, "index")?, 0.0));
    };
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'))
        .ok_or_else(|| parse_err(line, format!("malformed complex index: {tok}")))?;
    let n = number(&body[..split], line, "index")?;
    let k = number(&body[split..], line, "extinction")?;
    if k < 0.0 {
        return Err(parse_err(line, format!("negative extinction in {tok} would be gain")));
    }
    Ok((n, k))
}

enum Frame {
    Root,
    Repeat { times: usize, opened_at: usize },
}

pub fn parse_stack(text: &str) -> Result<LayerStack> {
    let mut ambient = None;
    let mut substrate = None;
    // Stack of (frame, layers collected in it).
    let mut frames: Vec<(Frame, Vec<Layer>)> = vec![(Frame::Root, Vec::new())];

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let layers = &mut frames.last_mut().expect("root frame").1;
        match toks[0] {
            "ambient" | "substrate" => {
                if toks.len() != 2 {
                    return Err(parse_err(ln, format!("{} takes exactly one index", toks[0])));
                }
                if frames.len() > 1 {
                    return Err(parse_err(ln, format!("{} not allowed inside repeat", toks[0])));
                }
                let v = number(toks[1], ln, toks[0])?;
                if v < 1.0 {
                    return Err(parse_err(ln, format!("{} index must be ≥ 1", toks[0])));
                }
                let slot = if toks[0] == "ambient" { &mut ambient } else { &mut substrate };
                if slot.replace(v).is_some() {
                    return Err(parse_err(ln, format!("{} given twice", toks[0])));
                }
            }
            "qwl" => {
                if !(3..=4).contains(&toks.len()) {
                    return Err(parse_err(ln, "expected: qwl index center_nm [count]"));
                }
                let (n, k) = index(toks[1], ln)?;
                let center = number(toks[2], ln, "center wavelength")?;
                let reps = toks.get(3).map(|t| count(t, ln, "count")).transpose()?.unwrap_or(1);
                if n < 1.0 || center <= 0.0 {
                    return Err(parse_err(ln, "index must be ≥ 1 and centre positive"));
                }
                let mut l = Layer::quarter_wave(n, center);
                l.extinction = k;
                layers.extend(std::iter::repeat_n(l, reps));
            }
            "repeat" => {
                if toks.len() != 2 {
                    return Err(parse_err(ln, "expected: repeat N"));
                }
                let times = count(toks[1], ln, "repeat count")?;
                frames.push((Frame::Repeat { times, opened_at: ln }, Vec::new()));
            }
            "end" => {
                if toks.len() != 1 {
                    return Err(parse_err(ln, "end takes no arguments"));
                }
                let (frame, body) = frames.pop().expect("root frame");
                let Frame::Repeat { times, .. } = frame else {
                    return Err(parse_err(ln, "end without repeat"));
                };
                let parent = &mut frames.last_mut().ok_or_else(|| parse_err(ln, "end without repeat"))?.1;
                for _ in 0..times {
                    parent.extend_from_slice(&body);
                }
            }
            _ => {
                if !(2..=3).contains(&toks.len()) {
                    return Err(parse_err(ln, "expected: index thickness_nm [repeat]"));
                }
                let (n, k) = index(toks[0], ln)?;
                let d = number(toks[1], ln, "thickness")?;
                let reps = toks.get(2).map(|t| count(t, ln, "repeat")).transpose()?.unwrap_or(1);
                if n < 1.0 {
                    return Err(parse_err(ln, format!("index must be ≥ 1, got {n}")));
                }
                if d <= 0.0 {
                    return Err(parse_err(ln, format!("thickness must be positive, got {d}")));
                }
                let l = Layer { index: n, extinction: k, thickness_nm: d };
                layers.extend(std::iter::repeat_n(l, reps));
            }
        }
    }

    if frames.len() > 1 {
        if let (Frame::Repeat { opened_at, .. }, _) = &frames[frames.len() - 1] {
            return Err(parse_err(*opened_at, "repeat block never closed"));
        }
    }
    let layers = frames.pop().expect("root frame").1;
    let ambient = ambient.ok_or_else(|| parse_err(0, "missing ambient"))?;
    let substrate = substrate.ok_or_else(|| parse_err(0, "missing substrate"))?;
    let stack = LayerStack { ambient, layers, substrate };
    stack.validate()?;
    Ok(stack)
}

/// Serialises a stack in the same grammar, one layer per line, collapsing
/// consecutive identical layers into a repeat count.
pub fn format_stack(stack: &LayerStack) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ambient {}", stack.ambient);
    let _ = writeln!(out, "substrate {}", stack.substrate);
    let mut k = 0;
    while k < stack.layers.len() {
        let l = stack.layers[k];
        let mut run = 1;
        while k + run < stack.layers.len() && stack.layers[k + run] == l {
            run += 1;
        }
        let idx = if l.extinction > 0.0 { format!("{}+{}i", l.index, l.extinction) } else { format!("{}", l.index) };
        if run > 1 {
            let _ = writeln!(out, "{idx} {} {run}", l.thickness_nm);
        } else {
            let _ = writeln!(out, "{idx} {}", l.thickness_nm);
        }
        k += run;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows_qwl_and_repeats() {
        let s = parse_stack(
            "ambient 1.0\nsubstrate 1.5\n# comment\nrepeat 2\n  qwl 2.0 800\n  1.5 100 2\nend\n3.0+1e-3i 50\n",
        )
        .unwrap();
        assert_eq!(s.layers.len(), 7);
        assert_eq!(s.layers[0].thickness_nm, 100.0);
        assert_eq!(s.layers[2].index, 1.5);
        assert_eq!(s.layers[6].extinction, 1e-3);
    }

    #[test]
    fn nested_repeat() {
        let s = parse_stack("ambient 1\nsubstrate 1\nrepeat 3\nrepeat 2\n2 10\nend\n1.5 5\nend\n").unwrap();
        assert_eq!(s.layers.len(), 9);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_stack("ambient 1\nsubstrate 1.5\n2.0 abc\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_stack("ambient 1\nsubstrate 1.5\nrepeat 2\n2 10\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_stack("ambient 1\nsubstrate 1.5\nend\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_stack("ambient 1\nsubstrate 1.5\n0.5 10\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_stack("ambient 1\nsubstrate 1.5\n2 -4\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn missing_media_rejected() {
        assert!(parse_stack("substrate 1.5\n").is_err());
        assert!(parse_stack("ambient 1.5\n").is_err());
    }

    #[test]
    fn format_roundtrip() {
        let s = parse_stack("ambient 1.4761\nsubstrate 3.461\nrepeat 3\nqwl 2.09 920\nqwl 1.48 920\nend\n3.4+0.001i 10\n").unwrap();
        let back = parse_stack(&format_stack(&s)).unwrap();
        assert_eq!(s, back);
    }
}
