//! Text formats: channel files, training CSV, and number printing.
//!
//! A channel file is a `dmc |X| |Y|` header followed by `|X|` rows of `|Y|`
//! whitespace-separated probabilities; `#` starts a comment.

use std::fmt::Write as _;

use fblearn_core::{Dmc, TrainingSet};

use crate::CliError;

fn parse_err(line: usize, col: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        line,
        col,
        message: message.into(),
    }
}

/// Whitespace-separated tokens of a line with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((line[..s].chars().count() + 1, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((line[..s].chars().count() + 1, &line[s..]));
    }
    out
}

pub fn parse_channel_file(text: &str) -> Result<Dmc, CliError> {
    let mut header: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokens(content);
        if toks.is_empty() {
            continue;
        }
        match header {
            None => {
                if toks[0].1 != "dmc" {
                    return Err(parse_err(line_no, toks[0].0, "expected header `dmc <inputs> <outputs>`"));
                }
                if toks.len() != 3 {
                    return Err(parse_err(line_no, toks[0].0, "header needs exactly two sizes"));
                }
                let size = |(col, t): (usize, &str)| {
                    t.parse::<usize>()
                        .ok()
                        .filter(|&v| v > 0)
                        .ok_or_else(|| parse_err(line_no, col, format!("invalid alphabet size `{t}`")))
                };
                header = Some((size(toks[1])?, size(toks[2])?));
            }
            Some((nx, ny)) => {
                if rows.len() == nx {
                    return Err(parse_err(line_no, toks[0].0, format!("more than {nx} rows")));
                }
                if toks.len() != ny {
                    let col = toks.get(ny).map_or(content.chars().count() + 1, |t| t.0);
                    return Err(parse_err(line_no, col, format!("expected {ny} entries, found {}", toks.len())));
                }
                let row = toks
                    .iter()
                    .map(|&(col, t)| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| parse_err(line_no, col, format!("invalid probability `{t}`")))
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                rows.push(row);
            }
        }
    }
    let Some((nx, _)) = header else {
        return Err(parse_err(last_line.max(1), 1, "missing `dmc` header"));
    };
    if rows.len() != nx {
        return Err(parse_err(last_line.max(1), 1, format!("expected {nx} rows, found {}", rows.len())));
    }
    Ok(Dmc::new(&rows)?)
}

/// Channel file text; shortest round-trip decimals make re-parsing exact.
pub fn write_channel_file(w: &Dmc) -> String {
    let mut s = format!("dmc {} {}\n", w.num_inputs(), w.num_outputs());
    for row in w.rows() {
        let line: Vec<String> = row.iter().map(|p| format!("{p}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

/// Headerless `x,y` pairs with 0-based indices.
pub fn parse_training_file(text: &str, num_inputs: usize, num_outputs: usize) -> Result<TrainingSet, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, 1, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != 2 {
            return Err(parse_err(line, 1, format!("expected 2 columns, found {}", record.len())));
        }
        let mut pair = [0usize; 2];
        for (k, (field, limit)) in record.iter().zip([num_inputs, num_outputs]).enumerate() {
            let v: usize = field
                .parse()
                .map_err(|_| parse_err(line, k + 1, format!("invalid index `{field}`")))?;
            if v >= limit {
                return Err(CliError::IndexOutOfRange {
                    line,
                    col: k + 1,
                    value: v,
                    limit,
                });
            }
            pair[k] = v;
        }
        pairs.push((pair[0], pair[1]));
    }
    if pairs.is_empty() {
        return Err(parse_err(1, 1, "training file has no pairs"));
    }
    Ok(TrainingSet::new(pairs, num_inputs, num_outputs)?)
}

pub fn write_training_file(set: &TrainingSet) -> String {
    let mut s = String::with_capacity(set.len() * 4);
    for &(x, y) in set.pairs() {
        let _ = writeln!(s, "{x},{y}");
    }
    s
}

/// Twelve significant digits in `%g` style.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
