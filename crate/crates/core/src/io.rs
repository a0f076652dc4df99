//! Plain-text file formats.
//!
//! All formats accept blank lines and `#` comments. Node and frame indices
//! are 0-based.
//!
//! * Edge list: `timestamp a b` per line, whitespace or comma separated.
//!   Node ids are arbitrary tokens, compacted to `0..N` in sorted order
//!   (numerically when every id is a non-negative integer).
//! * Cube: a header `N T`, then one `t i j` line per edge.
//! * Activity: a header `N T`, then one `t i` line per active entry.
//! * Allocation: `N` comma-separated rows of `T` labels.
//! * Matrix: comma-separated rows of reals, `NA` for undefined.
//! * Parameters: `k <K>`, then sections `theta`, `p`, `q` of `K` rows and an
//!   optional `pi` section of `K+1` rows.
//! * Hyperparameters: `name = value` lines setting every entry of one of
//!   `delta`, `eta0`, `zeta0`, `a_p`, `b_p`, `a_q`, `b_q`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::genmodel::{sticky_transitions, stationary_distribution, ModelParameters};
use crate::icl::HyperScalars;
use crate::matrix::Matrix;
use crate::netcube::{AdjacencyCube, Event, EventList, NodeActivity};
use crate::suffstats::AllocationMatrix;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers. Trailing
/// comments are stripped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(k, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((k + 1, l))
    })
}

fn fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// An edge list with its compacted node ids; `ids[k]` is the original id of
/// node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEdgeList {
    pub events: EventList,
    pub ids: Vec<String>,
}

pub fn parse_edge_list(text: &str) -> Result<ParsedEdgeList> {
    let mut raw = Vec::new();
    for (line, l) in content_lines(text) {
        let f = fields(l);
        if f.len() != 3 {
            return Err(parse_err(line, format!("expected 'timestamp a b', got {} fields", f.len())));
        }
        let time: f64 = parse_num(f[0], line, "timestamp")?;
        if !time.is_finite() {
            return Err(parse_err(line, format!("non-finite timestamp '{}'", f[0])));
        }
        for id in &f[1..] {
            if id.starts_with('-') {
                return Err(parse_err(line, format!("negative node id '{id}'")));
            }
        }
        if f[1] == f[2] {
            return Err(parse_err(line, format!("self-interaction of node '{}'", f[1])));
        }
        raw.push((line, time, f[1].to_string(), f[2].to_string()));
    }
    if raw.is_empty() {
        return Err(Error::Input("edge list has no events".into()));
    }
    let mut ids: Vec<String> = raw.iter().flat_map(|r| [r.2.clone(), r.3.clone()]).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.iter().all(|s| s.parse::<u64>().is_ok()) {
        ids.sort_by_key(|s| s.parse::<u64>().unwrap());
        // "01" and "1" are the same node
        ids.dedup_by_key(|s| s.parse::<u64>().unwrap());
    }
    let numeric = ids.iter().all(|s| s.parse::<u64>().is_ok());
    let index: HashMap<String, usize> = ids
        .iter()
        .enumerate()
        .map(|(k, s)| (canonical(s, numeric), k))
        .collect();
    let events = raw
        .iter()
        .map(|(_, time, a, b)| Event {
            time: *time,
            i: index[&canonical(a, numeric)],
            j: index[&canonical(b, numeric)],
        })
        .collect();
    Ok(ParsedEdgeList {
        events: EventList::new(ids.len(), events),
        ids,
    })
}

fn canonical(id: &str, numeric: bool) -> String {
    if numeric {
        id.parse::<u64>().unwrap().to_string()
    } else {
        id.to_string()
    }
}

pub fn read_edge_list(path: &Path) -> Result<ParsedEdgeList> {
    parse_edge_list(&read(path)?)
}

fn parse_header(lines: &mut dyn Iterator<Item = (usize, &str)>, what: &str) -> Result<(usize, usize)> {
    let (line, l) = lines
        .next()
        .ok_or_else(|| Error::Input(format!("{what} file is empty")))?;
    let f = fields(l);
    if f.len() != 2 {
        return Err(parse_err(line, "expected header 'N T'"));
    }
    let n: usize = parse_num(f[0], line, "node count")?;
    let t: usize = parse_num(f[1], line, "frame count")?;
    if n == 0 || t == 0 {
        return Err(parse_err(line, "N and T must be positive"));
    }
    Ok((n, t))
}

fn parse_index(tok: &str, bound: usize, line: usize, what: &str) -> Result<usize> {
    let v: usize = parse_num(tok, line, what)?;
    if v >= bound {
        return Err(parse_err(line, format!("{what} {v} is outside 0..{bound}")));
    }
    Ok(v)
}

/// Parses a cube file. Without `activity` the degree rule applies.
pub fn parse_cube(text: &str, activity: Option<NodeActivity>) -> Result<AdjacencyCube> {
    let mut lines = content_lines(text);
    let (n, t_max) = parse_header(&mut lines, "cube")?;
    let mut frames = vec![Vec::new(); t_max];
    for (line, l) in lines {
        let f = fields(l);
        if f.len() != 3 {
            return Err(parse_err(line, "expected 't i j'"));
        }
        let t = parse_index(f[0], t_max, line, "frame")?;
        let i = parse_index(f[1], n, line, "node")?;
        let j = parse_index(f[2], n, line, "node")?;
        if i == j {
            return Err(parse_err(line, format!("self-loop on node {i}")));
        }
        if let Some(a) = &activity {
            if !a.is_active(i, t) || !a.is_active(j, t) {
                return Err(parse_err(line, format!("edge ({i}, {j}) at frame {t} has an inactive endpoint")));
            }
        }
        frames[t].push((i, j));
    }
    if let Some(a) = &activity {
        if a.n_nodes() != n || a.n_frames() != t_max {
            return Err(Error::Input(format!(
                "activity is {}x{} but cube is {n}x{t_max}",
                a.n_nodes(),
                a.n_frames()
            )));
        }
    }
    AdjacencyCube::from_edges(n, frames, activity)
}

pub fn parse_activity(text: &str) -> Result<NodeActivity> {
    let mut lines = content_lines(text);
    let (n, t_max) = parse_header(&mut lines, "activity")?;
    let mut a = NodeActivity::inactive(n, t_max);
    for (line, l) in lines {
        let f = fields(l);
        if f.len() != 2 {
            return Err(parse_err(line, "expected 't i'"));
        }
        let t = parse_index(f[0], t_max, line, "frame")?;
        let i = parse_index(f[1], n, line, "node")?;
        a.set(i, t, true);
    }
    Ok(a)
}

pub fn format_cube(cube: &AdjacencyCube) -> String {
    let mut s = format!("# t i j\n{} {}\n", cube.n_nodes(), cube.n_frames());
    for t in 0..cube.n_frames() {
        for &(i, j) in cube.edges(t) {
            let _ = writeln!(s, "{t} {i} {j}");
        }
    }
    s
}

pub fn format_activity(a: &NodeActivity) -> String {
    let mut s = format!("# t i\n{} {}\n", a.n_nodes(), a.n_frames());
    for t in 0..a.n_frames() {
        for i in 0..a.n_nodes() {
            if a.is_active(i, t) {
                let _ = writeln!(s, "{t} {i}");
            }
        }
    }
    s
}

/// Reads a cube and, if given, its activity file.
pub fn read_cube(path: &Path, activity: Option<&Path>) -> Result<AdjacencyCube> {
    let activity = activity.map(|p| read(p).and_then(|s| parse_activity(&s))).transpose()?;
    parse_cube(&read(path)?, activity)
}

pub fn write_cube(path: &Path, cube: &AdjacencyCube) -> Result<()> {
    write(path, &format_cube(cube))
}

pub fn write_activity(path: &Path, a: &NodeActivity) -> Result<()> {
    write(path, &format_activity(a))
}

/// Parses an allocation. `k_up` defaults to the largest label (at least 1).
pub fn parse_allocation(text: &str, k_up: Option<usize>) -> Result<AllocationMatrix> {
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for (line, l) in content_lines(text) {
        let row = l
            .split(',')
            .map(|tok| parse_num::<u32>(tok.trim(), line, "label"))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(line, format!("expected {} labels, got {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input("allocation file is empty".into()));
    }
    let max = rows.iter().flatten().copied().max().unwrap_or(0).max(1) as usize;
    let k_up = k_up.unwrap_or(max);
    if max > k_up {
        return Err(Error::Input(format!("label {max} exceeds k_up={k_up}")));
    }
    AllocationMatrix::from_rows(&rows, k_up)
}

pub fn format_allocation(z: &AllocationMatrix) -> String {
    let mut s = String::new();
    for row in z.to_rows() {
        let cells: Vec<String> = row.iter().map(u32::to_string).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn read_allocation(path: &Path, k_up: Option<usize>) -> Result<AllocationMatrix> {
    parse_allocation(&read(path)?, k_up)
}

pub fn write_allocation(path: &Path, z: &AllocationMatrix) -> Result<()> {
    write(path, &format_allocation(z))
}

/// Shortest round-tripping representation.
pub fn format_real(v: f64) -> String {
    format!("{v}")
}

pub fn format_matrix(m: &Matrix<Option<f64>>) -> String {
    let mut s = String::new();
    for r in 0..m.rows() {
        let cells: Vec<String> = m
            .row(r)
            .iter()
            .map(|v| v.map_or_else(|| "NA".to_string(), format_real))
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn parse_matrix(text: &str) -> Result<Matrix<Option<f64>>> {
    let mut rows = Vec::new();
    for (line, l) in content_lines(text) {
        let row = l
            .split(',')
            .map(|tok| match tok.trim() {
                "NA" => Ok(None),
                tok => parse_num::<f64>(tok, line, "value").map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, row));
    }
    if let Some((line, _)) = rows.iter().find(|r| r.1.len() != rows[0].1.len()) {
        return Err(parse_err(*line, "rows have different lengths"));
    }
    Matrix::from_rows(rows.into_iter().map(|r| r.1).collect())
        .ok_or_else(|| Error::Input("matrix file is empty".into()))
}

pub fn format_params(params: &ModelParameters) -> String {
    let mut s = format!("k {}\n", params.k());
    for (name, m) in [("theta", &params.theta), ("p", &params.p), ("q", &params.q), ("pi", &params.pi)] {
        s.push_str(name);
        s.push('\n');
        for r in 0..m.rows() {
            let cells: Vec<String> = m.row(r).iter().map(|&v| format_real(v)).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
    }
    let alpha: Vec<String> = params.alpha.iter().map(|&v| format_real(v)).collect();
    let _ = writeln!(s, "alpha\n{}", alpha.join(" "));
    s
}

/// Parses parameters. Without a `pi` section, labels never go inactive and
/// stay in place with probability `default_stay`; without `alpha`, the
/// stationary distribution of `pi` is used.
pub fn parse_params(text: &str, default_stay: f64) -> Result<ModelParameters> {
    let mut lines = content_lines(text).peekable();
    let (line, l) = lines
        .next()
        .ok_or_else(|| Error::Input("parameter file is empty".into()))?;
    let f = fields(l);
    if f.len() != 2 || f[0] != "k" {
        return Err(parse_err(line, "expected 'k <K>'"));
    }
    let k: usize = parse_num(f[1], line, "group count")?;
    if k == 0 {
        return Err(parse_err(line, "k must be positive"));
    }
    let mut sections: HashMap<String, Vec<Vec<f64>>> = HashMap::new();
    while let Some((line, l)) = lines.next() {
        let name = l.to_string();
        let n_rows = match name.as_str() {
            "theta" | "p" | "q" => k,
            "pi" => k + 1,
            "alpha" => 1,
            _ => return Err(parse_err(line, format!("unknown section '{name}'"))),
        };
        if sections.contains_key(&name) {
            return Err(parse_err(line, format!("duplicate section '{name}'")));
        }
        let n_cols = if name == "theta" || name == "p" || name == "q" { k } else { k + 1 };
        let mut rows = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            let (rl, row) = lines
                .next()
                .ok_or_else(|| parse_err(line, format!("section '{name}' needs {n_rows} rows")))?;
            let vals = fields(row)
                .iter()
                .map(|tok| parse_num::<f64>(tok, rl, "value"))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != n_cols {
                return Err(parse_err(rl, format!("expected {n_cols} values, got {}", vals.len())));
            }
            rows.push(vals);
        }
        sections.insert(name, rows);
    }
    let mut take = |name: &str| -> Result<Matrix> {
        let rows = sections
            .remove(name)
            .ok_or_else(|| Error::Input(format!("parameter file lacks section '{name}'")))?;
        Ok(Matrix::from_rows(rows).expect("rectangular"))
    };
    let theta = take("theta")?;
    let p = take("p")?;
    let q = take("q")?;
    let pi = match take("pi") {
        Ok(pi) => pi,
        Err(_) => sticky_transitions(k, default_stay)?,
    };
    let alpha = match take("alpha") {
        Ok(a) => a.row(0).to_vec(),
        Err(_) => stationary_distribution(&pi),
    };
    let params = ModelParameters { theta, p, q, pi, alpha };
    params.validate()?;
    Ok(params)
}

pub fn read_params(path: &Path, default_stay: f64) -> Result<ModelParameters> {
    parse_params(&read(path)?, default_stay)
}

pub fn write_params(path: &Path, params: &ModelParameters) -> Result<()> {
    write(path, &format_params(params))
}

/// Applies `name = value` overrides on top of `base`.
pub fn parse_hyper_overrides(text: &str, base: HyperScalars) -> Result<HyperScalars> {
    let mut s = base;
    for (line, l) in content_lines(text) {
        let (key, value) = l
            .split_once('=')
            .ok_or_else(|| parse_err(line, "expected 'name = value'"))?;
        let v: f64 = parse_num(value.trim(), line, "hyperparameter")?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(parse_err(line, format!("hyperparameter must be positive, got {v}")));
        }
        let slot = match key.trim() {
            "delta" => &mut s.delta,
            "eta0" => &mut s.eta0,
            "zeta0" => &mut s.zeta0,
            "a_p" => &mut s.a_p,
            "b_p" => &mut s.b_p,
            "a_q" => &mut s.a_q,
            "b_q" => &mut s.b_q,
            other => return Err(parse_err(line, format!("unknown hyperparameter '{other}'"))),
        };
        *slot = v;
    }
    Ok(s)
}

pub fn read_hyper_overrides(path: &Path, base: HyperScalars) -> Result<HyperScalars> {
    parse_hyper_overrides(&read(path)?, base)
}
