use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::SummaryRow;

const COLUMNS: [&str; 14] = [
    "id",
    "algorithm",
    "max_iter",
    "restarts",
    "runs",
    "scored",
    "num_opt",
    "suboptimal",
    "avg_gap",
    "worse",
    "worse_diff",
    "better",
    "better_diff",
    "avg_ms",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{:.2}", 100.0 * x))
}

/// Aligned table; gaps and diffs in percent with two decimals.
pub fn format_text(rows: &[SummaryRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("bench results"));
    }
    let cells: Vec<[String; 14]> = rows
        .iter()
        .map(|r| {
            [
                r.grid_id.to_string(),
                r.algorithm.clone(),
                r.max_nonimproving.to_string(),
                r.restarts.to_string(),
                r.runs.to_string(),
                r.scored_runs.to_string(),
                r.num_opt.to_string(),
                r.suboptimal.to_string(),
                pct(r.avg_gap),
                r.worse.to_string(),
                pct(r.worse_diff),
                r.better.to_string(),
                pct(r.better_diff),
                r.avg_ms.map_or_else(|| "NA".to_string(), |x| format!("{x:.1}")),
            ]
        })
        .collect();
    let mut header = COLUMNS.map(String::from);
    for k in [8, 10, 12] {
        header[k].push('%');
    }
    let widths: Vec<usize> =
        (0..14).map(|k| cells.iter().map(|c| c[k].len()).chain([header[k].len()]).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for line in std::iter::once(&header).chain(&cells) {
        let parts: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(out, "{}", parts.join("  ")).unwrap();
    }
    Ok(out)
}

/// Comma-separated table with full-precision fractions.
pub fn to_delimited(rows: &[SummaryRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("bench results"));
    }
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.grid_id,
            r.algorithm,
            r.max_nonimproving,
            r.restarts,
            r.runs,
            r.scored_runs,
            r.num_opt,
            r.suboptimal,
            opt(r.avg_gap),
            r.worse,
            opt(r.worse_diff),
            r.better,
            opt(r.better_diff),
            opt(r.avg_ms)
        )
        .unwrap();
    }
    Ok(out)
}

pub fn parse_delimited(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == COLUMNS.join(",") => {}
        _ => return Err(Error::MalformedFormat { line: 1, reason: "unexpected header".into() }),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |reason: String| Error::MalformedFormat { line: i + 1, reason };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != COLUMNS.len() {
                return Err(bad(format!("expected {} fields, found {}", COLUMNS.len(), f.len())));
            }
            let int = |k: usize| f[k].parse::<usize>().map_err(|_| bad(format!("bad {}: {:?}", COLUMNS[k], f[k])));
            let real = |k: usize| match f[k] {
                "NA" => Ok(None),
                s => s.parse::<f64>().map(Some).map_err(|_| bad(format!("bad {}: {s:?}", COLUMNS[k]))),
            };
            Ok(SummaryRow {
                grid_id: int(0)?,
                algorithm: f[1].to_string(),
                max_nonimproving: int(2)?,
                restarts: int(3)?,
                runs: int(4)?,
                scored_runs: int(5)?,
                num_opt: int(6)?,
                suboptimal: int(7)?,
                avg_gap: real(8)?,
                worse: int(9)?,
                worse_diff: real(10)?,
                better: int(11)?,
                better_diff: real(12)?,
                avg_ms: real(13)?,
            })
        })
        .collect()
}
