use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Instance, Operation, Time};

/// Parses the standard job-shop text format: a header line `n m`, then one
/// line per job of `machine ptime` pairs with 0-indexed machines.
///
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_standard(text: &str, id: &str) -> Result<Instance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(Error::MalformedFormat { line: 1, reason: "missing header".into() })?;
    let nums = parse_ints(hline, header)?;
    let [n_jobs, n_machines] = nums[..] else {
        return Err(Error::MalformedFormat { line: hline, reason: format!("header must be `n m`, got {header:?}") });
    };
    let (n_jobs, n_machines) = (n_jobs as usize, n_machines as usize);
    if n_jobs == 0 || n_machines == 0 {
        return Err(Error::MalformedFormat { line: hline, reason: "job and machine counts must be positive".into() });
    }

    let mut routes = Vec::with_capacity(n_jobs);
    for job in 0..n_jobs {
        let Some((lno, line)) = lines.next() else {
            return Err(Error::MalformedFormat {
                line: hline,
                reason: format!("expected {n_jobs} job lines, found {job}"),
            });
        };
        let nums = parse_ints(lno, line)?;
        if nums.is_empty() || nums.len() % 2 != 0 {
            return Err(Error::MalformedFormat { line: lno, reason: "expected `machine ptime` pairs".into() });
        }
        let mut seen = vec![false; n_machines];
        let mut route = Vec::with_capacity(nums.len() / 2);
        for pair in nums.chunks(2) {
            let machine = pair[0] as usize;
            if machine >= n_machines {
                return Err(Error::MalformedFormat {
                    line: lno,
                    reason: format!("machine {machine} outside [0, {n_machines})"),
                });
            }
            if seen[machine] {
                return Err(Error::DuplicateMachineInRoute { job, machine });
            }
            seen[machine] = true;
            let duration = Time::try_from(pair[1])
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::MalformedFormat { line: lno, reason: format!("bad processing time {}", pair[1]) })?;
            route.push(Operation { machine, duration });
        }
        routes.push(route);
    }
    if let Some((lno, _)) = lines.next() {
        return Err(Error::MalformedFormat { line: lno, reason: "trailing content after last job".into() });
    }
    Instance::new(id, n_machines, routes)
}

fn parse_ints(line: usize, text: &str) -> Result<Vec<u64>> {
    text.split_whitespace()
        .map(|t| t.parse::<u64>().map_err(|_| Error::MalformedFormat { line, reason: format!("not an integer: {t:?}") }))
        .collect()
}

pub fn write_standard(inst: &Instance) -> String {
    let mut out = format!("{} {}\n", inst.n_jobs(), inst.n_machines());
    for route in inst.routes() {
        let line: Vec<String> = route.iter().map(|o| format!("{} {}", o.machine, o.duration)).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// Reads an instance file; the id is the file stem.
pub fn read_standard(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    parse_standard(&text, id)
}
