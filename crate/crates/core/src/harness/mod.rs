//! Batch driver: JSON config in, one CSV row per grid cell plus a JSON
//! transcript out.
//!
//! A config is a flat object of parameters for one experiment kind. Any
//! value may be an array, which makes it a grid axis; the grid is the
//! Cartesian product of the axes in the kind's parameter order, last
//! parameter fastest. An empty array gives an empty grid.

mod runners;
mod suites;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Name of the generator behind every seeded quantity.
pub const RNG_NAME: &str = "ChaCha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    LbNonsmooth,
    LbSmooth,
    PolyakWorst,
    CutGame,
    Interp,
    ZooValidate,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::LbNonsmooth,
        Kind::LbSmooth,
        Kind::PolyakWorst,
        Kind::CutGame,
        Kind::Interp,
        Kind::ZooValidate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::LbNonsmooth => "lb-nonsmooth",
            Kind::LbSmooth => "lb-smooth",
            Kind::PolyakWorst => "polyak-worst",
            Kind::CutGame => "cut-game",
            Kind::Interp => "interp",
            Kind::ZooValidate => "zoo-validate",
        }
    }

    pub fn params(self) -> &'static [Param] {
        runners::params(self)
    }

    /// CSV header for this kind.
    pub fn header(self, runtime: bool) -> Vec<String> {
        let mut h: Vec<String> = self.params().iter().map(|p| p.name.to_string()).collect();
        h.extend(
            ["measured", "bound", "relation", "pass", "note"]
                .iter()
                .map(|s| s.to_string()),
        );
        if runtime {
            h.push("runtime_s".into());
        }
        h
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ParamType {
    Int { min: i64, max: i64 },
    /// Open or closed lower end, closed upper end.
    Float { min: f64, min_open: bool, max: f64 },
    /// Like `Float` but `null` is allowed and means "module default".
    OptFloat { min: f64, max: f64 },
    Choice(&'static [&'static str]),
    Bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub name: &'static str,
    pub ty: ParamType,
    /// JSON text of the default; `None` makes the parameter required.
    pub default: Option<&'static str>,
}

impl Param {
    fn check(&self, v: &Value) -> std::result::Result<(), String> {
        let name = self.name;
        match self.ty {
            ParamType::Int { min, max } => match v.as_i64() {
                Some(i) if i >= min && i <= max => Ok(()),
                _ => Err(format!("{name} must be an integer in [{min}, {max}], got {v}")),
            },
            ParamType::Float { min, min_open, max } => match v.as_f64() {
                Some(x) if (x > min || (!min_open && x == min)) && x <= max => Ok(()),
                _ => {
                    let open = if min_open { "(" } else { "[" };
                    Err(format!("{name} must be a number in {open}{min}, {max}], got {v}"))
                }
            },
            ParamType::OptFloat { min, max } => match v {
                Value::Null => Ok(()),
                _ => match v.as_f64() {
                    Some(x) if x > min && x <= max => Ok(()),
                    _ => Err(format!("{name} must be null or a number in ({min}, {max}], got {v}")),
                },
            },
            ParamType::Choice(opts) => match v.as_str() {
                Some(s) if opts.contains(&s) => Ok(()),
                _ => Err(format!("{name} must be one of {opts:?}, got {v}")),
            },
            ParamType::Bool => match v {
                Value::Bool(_) => Ok(()),
                _ => Err(format!("{name} must be a boolean, got {v}")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// One list of values per parameter, in `kind.params()` order.
    pub axes: Vec<Vec<Value>>,
    /// Whether the CSV carries the wall-clock column.
    pub runtime: bool,
}

impl ExperimentConfig {
    /// Parses and validates a config. `seed`, when given, replaces any
    /// seed in the file.
    pub fn parse(kind: Kind, text: &str, seed: Option<u64>) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let Value::Object(mut obj) = v else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        if let Some(k) = obj.remove("kind") {
            if k.as_str() != Some(kind.as_str()) {
                return Err(Error::Config(format!(
                    "config is for kind {k}, command was {kind}"
                )));
            }
        }
        let runtime = match obj.remove("runtime") {
            None => true,
            Some(Value::Bool(b)) => b,
            Some(other) => {
                return Err(Error::Config(format!("runtime must be a boolean, got {other}")))
            }
        };
        if let Some(s) = seed {
            obj.insert("seed".into(), Value::from(s));
        }
        let mut axes = Vec::new();
        for p in kind.params() {
            let raw = match (obj.remove(p.name), p.default) {
                (Some(v), _) => v,
                (None, Some(d)) => serde_json::from_str(d).expect("defaults are valid JSON"),
                (None, None) => {
                    return Err(Error::Config(format!("{kind}: missing parameter {}", p.name)))
                }
            };
            let values = match raw {
                Value::Array(a) => a,
                other => vec![other],
            };
            for v in &values {
                p.check(v).map_err(|e| Error::Config(format!("{kind}: {e}")))?;
            }
            axes.push(values);
        }
        if let Some(extra) = obj.keys().next() {
            return Err(Error::Config(format!("{kind}: unknown parameter {extra:?}")));
        }
        let cfg = ExperimentConfig {
            kind,
            axes,
            runtime,
        };
        for cell in cfg.cells() {
            runners::precheck(kind, &cell).map_err(|e| match e {
                Error::Config(m) => Error::Config(m),
                other => Error::Config(format!("{kind} {}: {other}", cell.describe())),
            })?;
        }
        Ok(cfg)
    }

    pub fn cells(&self) -> Vec<Cell> {
        let params = self.kind.params();
        if self.axes.iter().any(|a| a.is_empty()) {
            return Vec::new();
        }
        let mut out = vec![Vec::<Value>::new()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        p
                    })
                })
                .collect();
        }
        out.into_iter()
            .map(|values| Cell { params, values })
            .collect()
    }
}

/// One point of the grid.
#[derive(Debug, Clone)]
pub struct Cell {
    params: &'static [Param],
    values: Vec<Value>,
}

impl Cell {
    fn get(&self, name: &str) -> &Value {
        let i = self
            .params
            .iter()
            .position(|p| p.name == name)
            .unwrap_or_else(|| panic!("no parameter {name}"));
        &self.values[i]
    }

    pub fn int(&self, name: &str) -> i64 {
        self.get(name).as_i64().expect("validated integer")
    }

    pub fn usize(&self, name: &str) -> usize {
        self.int(name) as usize
    }

    pub fn seed(&self) -> u64 {
        self.get("seed").as_u64().expect("validated seed")
    }

    pub fn float(&self, name: &str) -> f64 {
        self.get(name).as_f64().expect("validated number")
    }

    pub fn opt_float(&self, name: &str) -> Option<f64> {
        self.get(name).as_f64()
    }

    pub fn str(&self, name: &str) -> &str {
        self.get(name).as_str().expect("validated string")
    }

    pub fn describe(&self) -> String {
        self.params
            .iter()
            .zip(&self.values)
            .map(|(p, v)| format!("{}={}", p.name, csv_value(v)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn object(&self) -> Map<String, Value> {
        self.params
            .iter()
            .zip(&self.values)
            .map(|(p, v)| (p.name.to_string(), v.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    /// Passing needs `measured >= bound`.
    #[serde(rename = ">=")]
    Ge,
    /// Passing needs `measured <= bound`.
    #[serde(rename = "<=")]
    Le,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Le => "<=",
        }
    }
}

/// What a runner reports for one cell.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub measured: f64,
    pub bound: f64,
    pub relation: Relation,
    /// Every check of the cell, including the measured-vs-bound one.
    pub pass: bool,
    /// Names of failed checks, `;`-separated; empty on success.
    pub note: String,
    pub transcript: Value,
}

impl Outcome {
    fn failed(e: &Error) -> Self {
        Outcome {
            measured: f64::NAN,
            bound: f64::NAN,
            relation: Relation::Ge,
            pass: false,
            note: format!("error: {e}"),
            transcript: Value::Null,
        }
    }
}

/// Collects named checks into a pass flag and a note.
#[derive(Debug, Default)]
pub(crate) struct Checks {
    failed: Vec<String>,
}

impl Checks {
    pub(crate) fn check(&mut self, ok: bool, name: impl Into<String>) {
        if !ok {
            self.failed.push(name.into());
        }
    }

    pub(crate) fn finish(
        self,
        measured: f64,
        bound: f64,
        relation: Relation,
        transcript: Value,
    ) -> Outcome {
        Outcome {
            measured,
            bound,
            relation,
            pass: self.failed.is_empty(),
            note: self.failed.join(";"),
            transcript,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub index: usize,
    pub params: Map<String, Value>,
    pub measured: f64,
    pub bound: f64,
    pub relation: Relation,
    pub pass: bool,
    pub note: String,
    pub runtime_s: f64,
    pub transcript: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: Kind,
    pub rng: &'static str,
    #[serde(skip)]
    pub runtime: bool,
    pub rows: Vec<Row>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.kind.header(self.runtime))?;
        for row in &self.rows {
            let mut rec: Vec<String> = self
                .kind
                .params()
                .iter()
                .map(|p| csv_value(&row.params[p.name]))
                .collect();
            rec.push(row.measured.to_string());
            rec.push(row.bound.to_string());
            rec.push(row.relation.as_str().to_string());
            rec.push(row.pass.to_string());
            rec.push(row.note.clone());
            if self.runtime {
                rec.push(format!("{:.3}", row.runtime_s));
            }
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| Error::Io(e.to_string()))
    }
}

fn csv_value(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.to_string(),
            None => n.as_f64().map(|x| x.to_string()).unwrap_or_default(),
        },
        other => other.to_string(),
    }
}

/// Runs one cell; errors become failing rows.
pub fn run_cell(kind: Kind, cell: &Cell) -> Outcome {
    runners::run(kind, cell).unwrap_or_else(|e| Outcome::failed(&e))
}

/// Runs every cell, at most `threads` at a time (all cores when `None`).
/// Rows come back in grid order whatever the scheduling.
pub fn run(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Report> {
    let cells = cfg.cells();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(index, cell)| {
                let t0 = Instant::now();
                let o = run_cell(cfg.kind, cell);
                let runtime_s = t0.elapsed().as_secs_f64();
                log::info!("{} row {index}: {} pass={}", cfg.kind, cell.describe(), o.pass);
                Row {
                    index,
                    params: cell.object(),
                    measured: o.measured,
                    bound: o.bound,
                    relation: o.relation,
                    pass: o.pass,
                    note: o.note,
                    runtime_s,
                    transcript: o.transcript,
                }
            })
            .collect()
    });
    Ok(Report {
        kind: cfg.kind,
        rng: RNG_NAME,
        runtime: cfg.runtime,
        rows,
    })
}

/// `HYPERGCONV_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("HYPERGCONV_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "HYPERGCONV_THREADS must be a positive integer, got {s:?}"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in Kind::ALL {
            assert_eq!(k.as_str().parse::<Kind>().unwrap(), k);
        }
        assert!("lb".parse::<Kind>().is_err());
    }

    #[test]
    fn grid_shapes() {
        let cfg =
            ExperimentConfig::parse(Kind::LbNonsmooth, r#"{"T": [4, 8, 16], "r": [1, 2, 5], "player": "rgd"}"#, None)
                .unwrap();
        assert_eq!(cfg.cells().len(), 9);
        // last parameter runs fastest
        let c = cfg.cells();
        assert_eq!(c[0].int("T"), 4);
        assert_eq!(c[1].float("r"), 2.0);
        let empty = ExperimentConfig::parse(Kind::LbNonsmooth, r#"{"T": [], "r": 1}"#, None).unwrap();
        assert!(empty.cells().is_empty());
        let rep = run(&empty, Some(1)).unwrap();
        let csv = rep.csv_string().unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("T,r,player,seed,measured,bound"));
    }

    #[test]
    fn config_errors() {
        let bad = [
            "not json",
            "[1, 2]",
            r#"{"r": 1}"#,
            r#"{"T": 1, "r": 1}"#,
            r#"{"T": 4, "r": -1}"#,
            r#"{"T": 4, "r": 1, "player": "newton"}"#,
            r#"{"T": 4, "r": 1, "bogus": 3}"#,
            r#"{"kind": "interp", "T": 4, "r": 1}"#,
            r#"{"T": 4, "r": 1, "runtime": "yes"}"#,
        ];
        for text in bad {
            let e = ExperimentConfig::parse(Kind::LbNonsmooth, text, None).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{text}: {e:?}");
        }
    }

    #[test]
    fn seed_override() {
        let cfg =
            ExperimentConfig::parse(Kind::LbNonsmooth, r#"{"T": 4, "r": 1, "player": "random", "seed": [1, 2]}"#, Some(9))
                .unwrap();
        let cells = cfg.cells();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].seed(), 9);
    }

    #[test]
    fn single_cell_matches_run_cell() {
        let cfg = ExperimentConfig::parse(
            Kind::LbNonsmooth,
            r#"{"T": 4, "r": 1, "player": "polyak", "runtime": false}"#,
            None,
        )
        .unwrap();
        let rep = run(&cfg, Some(1)).unwrap();
        let o = run_cell(Kind::LbNonsmooth, &cfg.cells()[0]);
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].measured, o.measured);
        assert!(rep.passed());
        let csv = rep.csv_string().unwrap();
        assert!(!csv.contains("runtime_s"));
    }
}
