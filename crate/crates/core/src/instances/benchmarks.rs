use std::collections::BTreeMap;

use crate::error::Result;
use crate::model::{Instance, Time};

use super::parse_standard;

/// Known optimal makespans of the shipped benchmark instances.
pub const REFERENCE_OPTIMA: &[(&str, Time)] = &[
    ("orb01", 1059),
    ("orb02", 888),
    ("orb03", 1005),
    ("orb04", 1005),
    ("orb05", 887),
    ("orb06", 1010),
    ("orb07", 397),
    ("orb08", 899),
    ("orb09", 934),
    ("ta01", 1231),
    ("ta02", 1244),
    ("ta03", 1218),
    ("ta04", 1175),
    ("ta05", 1224),
    ("ta06", 1238),
    ("ta07", 1227),
    ("ta08", 1217),
    ("ta09", 1274),
    ("ta10", 1241),
];

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../data/benchmarks/", $name, ".txt")))),*]
    };
}

const SHIPPED: &[(&str, &str)] = shipped!(
    "orb01", "orb02", "orb03", "orb04", "orb05", "orb06", "orb07", "orb08", "orb09", "ta01", "ta02",
    "ta03", "ta04", "ta05", "ta06", "ta07", "ta08", "ta09", "ta10",
);

pub fn benchmark_names() -> impl Iterator<Item = &'static str> {
    SHIPPED.iter().map(|(n, _)| *n)
}

/// Loads a shipped benchmark instance by (case-insensitive) name.
pub fn benchmark(name: &str) -> Option<Result<Instance>> {
    let key = name.to_ascii_lowercase();
    SHIPPED.iter().find(|(n, _)| *n == key).map(|(n, text)| parse_standard(text, n))
}

pub fn reference_optimum(name: &str) -> Option<Time> {
    let key = name.to_ascii_lowercase();
    REFERENCE_OPTIMA.iter().find(|(n, _)| *n == key).map(|&(_, v)| v)
}

/// Instance name to optimal makespan, loadable from a `name value` text file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReferenceOptima(pub BTreeMap<String, Time>);

impl ReferenceOptima {
    pub fn shipped() -> Self {
        Self(REFERENCE_OPTIMA.iter().map(|&(n, v)| (n.to_string(), v)).collect())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(name), Some(value), None) = (it.next(), it.next(), it.next()) else {
                return Err(crate::Error::MalformedFormat { line: i + 1, reason: "expected `name optimum`".into() });
            };
            let value = value.parse().map_err(|_| crate::Error::MalformedFormat {
                line: i + 1,
                reason: format!("bad optimum {value:?}"),
            })?;
            map.insert(name.to_ascii_lowercase(), value);
        }
        Ok(Self(map))
    }

    pub fn get(&self, name: &str) -> Option<Time> {
        self.0.get(&name.to_ascii_lowercase()).copied()
    }
}
