//! Plain-text file formats (UTF-8, LF line endings).
//!
//! ```text
//! ea <n> <0|1 self-loops>        expected adjacency, followed by either
//! dense                          n rows of n space-separated decimals, or
//! sparse                         lines `i j p` (0-based, unlisted entries 0)
//!
//! dg <n>                         sampled digraph, one `i j` line per arc
//! # seed <s>                     optional: the sampling seed
//!
//! tm <n>                         transition matrix, same `dense` block as `ea`
//!
//! dist <n>                       distribution, one value per line
//! ```
//!
//! Lines starting with `#` are comments everywhere; `dg` readers pick the seed
//! out of a `# seed` comment. Blank lines are ignored. Numbers are written in
//! Rust's shortest round-trip form, distributions with 17 significant digits,
//! so every writer's output reads back to an equal value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::chain::{Distribution, TransitionMatrix};
use crate::randgraph::{ExpectedAdjacency, SampledDigraph};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Dense,
    Sparse,
}

impl Layout {
    /// Sparse when fewer than a quarter of the entries are nonzero.
    pub fn auto(a: &ExpectedAdjacency) -> Self {
        let nonzero = a.entries().iter().filter(|&&p| p != 0.0).count();
        if 4 * nonzero < a.n() * a.n() {
            Layout::Sparse
        } else {
            Layout::Dense
        }
    }
}

/// Any document this module can read, told apart by its header keyword.
#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    Expected(ExpectedAdjacency),
    Digraph(SampledDigraph),
    Transition(TransitionMatrix),
    Distribution(Distribution),
}

fn push_dense_rows(out: &mut String, m: &DMatrix<f64>) {
    out.push_str("dense\n");
    for row in m.row_iter() {
        let line = row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        out.push_str(&line);
        out.push('\n');
    }
}

pub fn expected_to_string(a: &ExpectedAdjacency, layout: Layout) -> String {
    let mut out = format!("ea {} {}\n", a.n(), u8::from(a.allow_self_loops()));
    match layout {
        Layout::Dense => push_dense_rows(&mut out, a.entries()),
        Layout::Sparse => {
            out.push_str("sparse\n");
            for i in 0..a.n() {
                for j in 0..a.n() {
                    let p = a.get(i, j);
                    if p != 0.0 {
                        let _ = writeln!(out, "{i} {j} {p}");
                    }
                }
            }
        }
    }
    out
}

pub fn digraph_to_string(g: &SampledDigraph) -> String {
    let mut out = format!("dg {}\n", g.n());
    if let Some(seed) = g.seed() {
        let _ = writeln!(out, "# seed {seed}");
    }
    for (i, j) in g.arcs() {
        let _ = writeln!(out, "{i} {j}");
    }
    out
}

pub fn transition_to_string(p: &TransitionMatrix) -> String {
    let mut out = format!("tm {}\n", p.n());
    push_dense_rows(&mut out, p.matrix());
    out
}

pub fn distribution_to_string(d: &Distribution) -> String {
    let mut out = format!("dist {}\n", d.len());
    for x in d.values() {
        let _ = writeln!(out, "{x:.16e}");
    }
    out
}

/// Non-comment, non-blank lines with their 1-based line numbers.
struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (idx, raw) in self.inner.by_ref() {
            self.last = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Some((idx + 1, line));
        }
        None
    }

    fn expect_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_line()
            .ok_or_else(|| Error::parse(self.last + 1, format!("unexpected end of input, expected {what}")))
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{token}`")))
}

fn parse_dense(lines: &mut Lines<'_>, n: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let (ln, line) = lines.expect_line("a matrix row")?;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != n {
            return Err(Error::parse(ln, format!("expected {n} values, found {}", values.len())));
        }
        for (j, tok) in values.into_iter().enumerate() {
            m[(i, j)] = parse_num(ln, tok, "number")?;
        }
    }
    Ok(m)
}

fn expect_end(lines: &mut Lines<'_>) -> Result<()> {
    match lines.next_line() {
        Some((ln, _)) => Err(Error::parse(ln, "trailing content")),
        None => Ok(()),
    }
}

fn header<'a>(lines: &mut Lines<'a>) -> Result<(usize, Vec<&'a str>)> {
    let (ln, line) = lines.expect_line("a header")?;
    Ok((ln, line.split_whitespace().collect()))
}

fn parse_expected_body(lines: &mut Lines<'_>, ln: usize, tokens: &[&str]) -> Result<ExpectedAdjacency> {
    if tokens.len() != 3 {
        return Err(Error::parse(ln, "expected header `ea <n> <0|1>`"));
    }
    let n: usize = parse_num(ln, tokens[1], "size")?;
    let loops = match tokens[2] {
        "0" => false,
        "1" => true,
        other => return Err(Error::parse(ln, format!("self-loop flag must be 0 or 1, got `{other}`"))),
    };
    let (bl, block) = lines.expect_line("`dense` or `sparse`")?;
    let m = match block {
        "dense" => parse_dense(lines, n)?,
        "sparse" => {
            let mut m = DMatrix::zeros(n, n);
            let mut seen = DMatrix::from_element(n, n, false);
            while let Some((ln, line)) = lines.next_line() {
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(Error::parse(ln, "expected `i j p`"));
                }
                let i: usize = parse_num(ln, t[0], "row index")?;
                let j: usize = parse_num(ln, t[1], "column index")?;
                if i >= n || j >= n {
                    return Err(Error::parse(ln, format!("index ({i},{j}) out of range for n = {n}")));
                }
                if seen[(i, j)] {
                    return Err(Error::parse(ln, format!("duplicate entry ({i},{j})")));
                }
                seen[(i, j)] = true;
                m[(i, j)] = parse_num(ln, t[2], "probability")?;
            }
            m
        }
        other => return Err(Error::parse(bl, format!("expected `dense` or `sparse`, got `{other}`"))),
    };
    expect_end(lines)?;
    Ok(ExpectedAdjacency::from_matrix(m, loops))
}

fn parse_digraph_body(text: &str, lines: &mut Lines<'_>, ln: usize, tokens: &[&str]) -> Result<SampledDigraph> {
    if tokens.len() != 2 {
        return Err(Error::parse(ln, "expected header `dg <n>`"));
    }
    let n: usize = parse_num(ln, tokens[1], "size")?;
    let mut adjacency = DMatrix::<u8>::zeros(n, n);
    while let Some((ln, line)) = lines.next_line() {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 2 {
            return Err(Error::parse(ln, "expected `i j`"));
        }
        let i: usize = parse_num(ln, t[0], "tail")?;
        let j: usize = parse_num(ln, t[1], "head")?;
        if i >= n || j >= n {
            return Err(Error::parse(ln, format!("arc ({i},{j}) out of range for n = {n}")));
        }
        adjacency[(i, j)] = 1;
    }
    let mut seed = None;
    for (idx, raw) in text.lines().enumerate() {
        if let Some(rest) = raw.trim().strip_prefix('#') {
            let t: Vec<&str> = rest.split_whitespace().collect();
            if t.len() == 2 && t[0] == "seed" {
                seed = Some(parse_num(idx + 1, t[1], "seed")?);
            }
        }
    }
    Ok(SampledDigraph::from_adjacency(adjacency)?.with_seed(seed))
}

fn parse_transition_body(lines: &mut Lines<'_>, ln: usize, tokens: &[&str]) -> Result<TransitionMatrix> {
    if tokens.len() != 2 {
        return Err(Error::parse(ln, "expected header `tm <n>`"));
    }
    let n: usize = parse_num(ln, tokens[1], "size")?;
    let (bl, block) = lines.expect_line("`dense`")?;
    if block != "dense" {
        return Err(Error::parse(bl, format!("expected `dense`, got `{block}`")));
    }
    let m = parse_dense(lines, n)?;
    expect_end(lines)?;
    TransitionMatrix::new(m)
}

fn parse_distribution_body(lines: &mut Lines<'_>, ln: usize, tokens: &[&str]) -> Result<Distribution> {
    if tokens.len() != 2 {
        return Err(Error::parse(ln, "expected header `dist <n>`"));
    }
    let n: usize = parse_num(ln, tokens[1], "size")?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, line) = lines.expect_line("a value")?;
        values.push(parse_num(ln, line, "number")?);
    }
    expect_end(lines)?;
    Distribution::new(values)
}

/// Reads any supported document, dispatching on the header keyword.
pub fn parse_document(text: &str) -> Result<Document> {
    let mut lines = Lines::new(text);
    let (ln, tokens) = header(&mut lines)?;
    match tokens[0] {
        "ea" => parse_expected_body(&mut lines, ln, &tokens).map(Document::Expected),
        "dg" => parse_digraph_body(text, &mut lines, ln, &tokens).map(Document::Digraph),
        "tm" => parse_transition_body(&mut lines, ln, &tokens).map(Document::Transition),
        "dist" => parse_distribution_body(&mut lines, ln, &tokens).map(Document::Distribution),
        other => Err(Error::parse(ln, format!("unknown header `{other}`"))),
    }
}

fn wrong_kind(want: &str) -> Error {
    Error::parse(1, format!("expected a `{want}` document"))
}

pub fn parse_expected(text: &str) -> Result<ExpectedAdjacency> {
    match parse_document(text)? {
        Document::Expected(a) => Ok(a),
        _ => Err(wrong_kind("ea")),
    }
}

pub fn parse_digraph(text: &str) -> Result<SampledDigraph> {
    match parse_document(text)? {
        Document::Digraph(g) => Ok(g),
        _ => Err(wrong_kind("dg")),
    }
}

pub fn parse_transition(text: &str) -> Result<TransitionMatrix> {
    match parse_document(text)? {
        Document::Transition(p) => Ok(p),
        _ => Err(wrong_kind("tm")),
    }
}

pub fn parse_distribution(text: &str) -> Result<Distribution> {
    match parse_document(text)? {
        Document::Distribution(d) => Ok(d),
        _ => Err(wrong_kind("dist")),
    }
}

pub fn read_document(path: impl AsRef<Path>) -> Result<Document> {
    parse_document(&fs::read_to_string(path)?)
}

pub fn read_expected(path: impl AsRef<Path>) -> Result<ExpectedAdjacency> {
    parse_expected(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dense_and_sparse_read_back() {
        let a = ExpectedAdjacency::from_fn(3, false, |i, j| if i == j { 0.0 } else { 0.1 * (i + 2 * j) as f64 + 0.05 });
        for layout in [Layout::Dense, Layout::Sparse] {
            let text = expected_to_string(&a, layout);
            assert_eq!(parse_expected(&text).unwrap(), a);
        }
    }

    #[test]
    fn dense_layout_text() {
        let a = ExpectedAdjacency::uniform(2, 0.5);
        assert_eq!(expected_to_string(&a, Layout::Dense), "ea 2 0\ndense\n0 0.5\n0.5 0\n");
        assert_eq!(expected_to_string(&a, Layout::Sparse), "ea 2 0\nsparse\n0 1 0.5\n1 0 0.5\n");
    }

    #[test]
    fn digraph_keeps_seed() {
        let a = ExpectedAdjacency::uniform(5, 0.5);
        let g = crate::randgraph::sample(&a, 7).unwrap();
        let text = digraph_to_string(&g);
        assert!(text.starts_with("dg 5\n# seed 7\n"));
        assert_eq!(parse_digraph(&text).unwrap(), g);
    }

    #[test]
    fn distribution_has_17_digits() {
        let d = Distribution::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let text = distribution_to_string(&d);
        assert_eq!(text, "dist 2\n3.3333333333333331e-1\n6.6666666666666663e-1\n");
        assert_eq!(parse_distribution(&text).unwrap(), d);
    }

    #[test]
    fn transition_reads_back() {
        let p = TransitionMatrix::new(DMatrix::from_row_slice(2, 2, &[0.25, 0.75, 1.0, 0.0])).unwrap();
        let text = transition_to_string(&p);
        assert_eq!(text, "tm 2\ndense\n0.25 0.75\n1 0\n");
        assert_eq!(parse_transition(&text).unwrap(), p);
    }

    #[test]
    fn malformed_header_reports_line_one() {
        for text in ["ea 3\n", "ea x 0\n", "graph 3\n", "ea 2 2\ndense\n0 1\n1 0\n"] {
            let err = parse_document(text).unwrap_err();
            assert!(err.to_string().starts_with("parse error line 1"), "{text:?}: {err}");
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_expected("ea 2 0\ndense\n0 0.5\n0.5\n").unwrap_err();
        assert!(err.to_string().starts_with("parse error line 4"), "{err}");
        let err = parse_expected("ea 2 0\nsparse\n0 1 0.5\n# note\n5 0 1\n").unwrap_err();
        assert!(err.to_string().starts_with("parse error line 5"), "{err}");
        let err = parse_expected("ea 2 0\nsparse\n0 1 0.5\n0 1 0.25\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        let err = parse_expected("ea 2 0\ndense\n0 1\n").unwrap_err();
        assert!(err.to_string().starts_with("parse error line 4"), "{err}");
    }

    #[test]
    fn parser_keeps_invalid_probabilities_for_validation() {
        let a = parse_expected("ea 2 0\ndense\n0 1.5\n1 0\n").unwrap();
        assert_eq!(a.validate().len(), 1);
    }

    proptest! {
        #[test]
        fn expected_round_trip(n in 1usize..6, w in proptest::collection::vec(0.0f64..=1.0, 36), loops in any::<bool>()) {
            let a = ExpectedAdjacency::from_fn(n, loops, |i, j| if !loops && i == j { 0.0 } else { w[i * 6 + j] });
            for layout in [Layout::Dense, Layout::Sparse] {
                prop_assert_eq!(&parse_expected(&expected_to_string(&a, layout)).unwrap(), &a);
            }
        }

        #[test]
        fn distribution_round_trip(w in proptest::collection::vec(0.001f64..1.0, 1..30)) {
            let s: f64 = w.iter().sum();
            let d = Distribution::new(w.iter().map(|x| x / s).collect()).unwrap();
            prop_assert_eq!(parse_distribution(&distribution_to_string(&d)).unwrap(), d);
        }
    }
}
