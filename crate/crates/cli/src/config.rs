//! Parameter grids, config-file loading and the flag/file merge.
//!
//! A config file is TOML. Top-level `seed`, `jobs`, `out` and `format` apply
//! to every subcommand; parameters live in a table named after the
//! subcommand, with the same keys as the long flags:
//!
//! ```toml
//! seed = 7
//! [lyapunov-scan-L]
//! J = 1.76
//! L = "4..44"
//! ```
//!
//! Flags given on the command line replace file values key by key.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use spinchaos::quantum::Spin;

use crate::CliError;

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.trim().parse::<usize>().map_err(|_| format!("not a non-negative integer: {s:?}"))
}

/// A list of reals: `1.76`, `0.79,1.76` or the inclusive range `0.5..2.0:0.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some((range, step)) = s.split_once(':') {
            let (a, b) = range.split_once("..").ok_or_else(|| format!("expected a..b:step, got {s:?}"))?;
            let (a, b, h) = (parse_f64(a)?, parse_f64(b)?, parse_f64(step)?);
            if !(h > 0.0) || b < a {
                return Err(format!("empty or unordered range {s:?}"));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            return Ok(Grid((0..=n).map(|k| a + h * k as f64).collect()));
        }
        let v: Result<Vec<f64>, String> = s.split(',').map(parse_f64).collect();
        let v = v?;
        if v.is_empty() {
            return Err("empty list".into());
        }
        Ok(Grid(v))
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// A list of non-negative integers: `18`, `6,18,19`, `4..44` or `4..44:2`
/// (ranges inclusive).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntGrid(pub Vec<usize>);

impl FromStr for IntGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some((a, rest)) = s.split_once("..") {
            let (b, step) = match rest.split_once(':') {
                Some((b, h)) => (b, parse_usize(h)?),
                None => (rest, 1),
            };
            let (a, b) = (parse_usize(a)?, parse_usize(b)?);
            if step == 0 || b < a {
                return Err(format!("empty or unordered range {s:?}"));
            }
            return Ok(IntGrid((a..=b).step_by(step).collect()));
        }
        let v: Result<Vec<usize>, String> = s.split(',').map(parse_usize).collect();
        Ok(IntGrid(v?))
    }
}

impl fmt::Display for IntGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Quantum chains to run: `S:L` items separated by `;`, where L is an
/// [`IntGrid`], e.g. `1/2:12..14;1:7..8`.
#[derive(Debug, Clone, PartialEq)]
pub struct Systems(pub Vec<(Spin, Vec<usize>)>);

impl FromStr for Systems {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for item in s.split(';').map(str::trim).filter(|x| !x.is_empty()) {
            let (spin, ls) = item.split_once(':').ok_or_else(|| format!("expected S:L, got {item:?}"))?;
            let spin = Spin::from_str(spin.trim()).map_err(|e| e.to_string())?;
            out.push((spin, IntGrid::from_str(ls)?.0));
        }
        if out.is_empty() {
            return Err("no systems given".into());
        }
        Ok(Systems(out))
    }
}

impl fmt::Display for Systems {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(s, l)| format!("{s}:{}", IntGrid(l.clone()))).collect();
        f.write_str(&parts.join(";"))
    }
}

/// Grids appear in files as strings, numbers or arrays; they are always
/// written back as strings.
#[derive(Deserialize)]
#[serde(untagged)]
enum Loose {
    Num(f64),
    List(Vec<f64>),
    Text(String),
}

fn loose_text(l: Loose) -> String {
    match l {
        Loose::Num(x) => x.to_string(),
        Loose::List(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        Loose::Text(s) => s,
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = loose_text(Loose::deserialize(d)?);
                <$t>::from_str(&text).map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Grid);
string_serde!(IntGrid);
string_serde!(Systems);

/// Spin given as `1/2`, `1.5` or `2` on the command line or in a file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinArg(pub Spin);

impl FromStr for SpinArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Spin::from_str(s.trim()).map(SpinArg).map_err(|e| e.to_string())
    }
}

impl fmt::Display for SpinArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

string_serde!(SpinArg);

/// Parsed config file.
#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    pub global: Map<String, Value>,
    pub tables: Map<String, Value>,
}

const GLOBAL_KEYS: [&str; 5] = ["seed", "jobs", "out", "format", "subcommand"];

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        let value = serde_json::to_value(table).map_err(|e| e.to_string())?;
        Ok(Self::from_json(value)?)
    }

    /// Splits a JSON object into global keys and per-subcommand tables.
    pub fn from_json(value: Value) -> Result<Self, String> {
        let Value::Object(map) = value else { return Err("config must be a table".into()) };
        let mut out = FileConfig::default();
        for (k, v) in map {
            if GLOBAL_KEYS.contains(&k.as_str()) {
                out.global.insert(k, v);
            } else if v.is_object() {
                out.tables.insert(k, v);
            } else {
                return Err(format!("unknown top-level key {k:?}"));
            }
        }
        Ok(out)
    }

    pub fn table(&self, name: &str) -> Map<String, Value> {
        match self.tables.get(name) {
            Some(Value::Object(m)) => m.clone(),
            _ => Map::new(),
        }
    }
}

/// File values overlaid with every flag that was given.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Map<String, Value>, what: &str) -> Result<T, CliError> {
    let mut merged = file;
    if let Value::Object(given) = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))? {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("[{what}]: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse() {
        assert_eq!(Grid::from_str("1.76").unwrap().0, vec![1.76]);
        assert_eq!(Grid::from_str("0.79,1.76").unwrap().0, vec![0.79, 1.76]);
        let g = Grid::from_str("0.5..1.0:0.25").unwrap().0;
        assert_eq!(g, vec![0.5, 0.75, 1.0]);
        assert_eq!(Grid::from_str("0.8..1.6:0.1").unwrap().0.len(), 9);
        assert!(Grid::from_str("1..0:0.1").is_err());
        assert_eq!(IntGrid::from_str("4..8").unwrap().0, vec![4, 5, 6, 7, 8]);
        assert_eq!(IntGrid::from_str("4..8:2").unwrap().0, vec![4, 6, 8]);
        assert_eq!(IntGrid::from_str("6,18").unwrap().0, vec![6, 18]);
        let s = Systems::from_str("1/2:12..14;1:7,8").unwrap();
        assert_eq!(s.0.len(), 2);
        assert_eq!(s.0[1].1, vec![7, 8]);
        assert_eq!(Systems::from_str(&s.to_string()).unwrap(), s);
    }

    #[derive(Serialize, Deserialize, Debug, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Demo {
        #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
        j: Option<Grid>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt: Option<f64>,
    }

    #[test]
    fn flags_win_over_file() {
        let file = FileConfig::parse("seed = 3\n[demo]\nJ = [0.79, 1.76]\ndt = 0.01\n").unwrap();
        assert_eq!(file.global["seed"], 3);
        let flags = Demo { j: None, dt: Some(0.001) };
        let m: Demo = merge(&flags, file.table("demo"), "demo").unwrap();
        assert_eq!(m, Demo { j: Some(Grid(vec![0.79, 1.76])), dt: Some(0.001) });
        let bad = FileConfig::parse("[demo]\nJJ = 1\n").unwrap();
        assert!(merge(&flags, bad.table("demo"), "demo").is_err());
    }
}
