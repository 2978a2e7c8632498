//! Period 1x1 deaths and exposures tables in the Human Mortality Database
//! layout.
//!
//! The text form has free-text preamble lines, a header line naming the
//! `Year Age Female Male Total` columns, and whitespace-aligned rows. The
//! comma-separated form has the same columns. Missing values are written
//! `.`; the last age group is open (`110+`).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgeYearWindow, DataPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Deaths,
    Exposures,
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableKind::Deaths => "deaths",
            TableKind::Exposures => "exposures",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sex {
    Female,
    Male,
    Total,
}

impl Sex {
    pub fn name(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
            Sex::Total => "total",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "female" | "f" => Ok(Sex::Female),
            "male" | "m" => Ok(Sex::Male),
            "total" | "t" | "both" => Ok(Sex::Total),
            other => Err(Error::InvalidParameter(format!(
                "unknown sex {other:?}; expected female, male or total"
            ))),
        }
    }
}

/// One `(year, age)` row. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct VitalRow {
    pub year: i32,
    /// Exact age, or the lower bound of the open interval.
    pub age: i32,
    pub open_age: bool,
    pub female: Option<f64>,
    pub male: Option<f64>,
    pub total: Option<f64>,
}

impl VitalRow {
    pub fn value(&self, sex: Sex) -> Option<f64> {
        match sex {
            Sex::Female => self.female,
            Sex::Male => self.male,
            Sex::Total => self.total,
        }
    }
}

/// Deaths or central exposures keyed by `(year, age)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVitalTable {
    pub kind: TableKind,
    rows: BTreeMap<(i32, i32), VitalRow>,
}

impl RawVitalTable {
    pub fn new(kind: TableKind) -> Self {
        RawVitalTable {
            kind,
            rows: BTreeMap::new(),
        }
    }

    /// Adds a row, rejecting negative values and repeated `(year, age)`.
    pub fn insert(&mut self, row: VitalRow) -> Result<()> {
        for (sex, v) in [(Sex::Female, row.female), (Sex::Male, row.male), (Sex::Total, row.total)] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Data(format!(
                        "{} for year {}, age {}, {sex} is {v}; values must be finite and non-negative",
                        self.kind, row.year, row.age
                    )));
                }
            }
        }
        let key = (row.year, row.age);
        if self.rows.contains_key(&key) {
            return Err(Error::Data(format!(
                "duplicate {} row for year {}, age {}",
                self.kind, row.year, row.age
            )));
        }
        self.rows.insert(key, row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &VitalRow> {
        self.rows.values()
    }

    pub fn row(&self, year: i32, age: i32) -> Option<&VitalRow> {
        self.rows.get(&(year, age))
    }

    pub fn read(path: impl AsRef<Path>, kind: TableKind) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file), kind, &path.display().to_string())
    }

    /// Parses either layout; the delimiter is taken from the header line.
    pub fn parse<R: BufRead>(reader: R, kind: TableKind, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut table = RawVitalTable::new(kind);
        let mut csv = None;
        for (k, line) in reader.lines().enumerate() {
            let ln = k + 1;
            let line = line.map_err(|e| err(ln, e.to_string()))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let comma = trimmed.contains(',');
            let fields: Vec<&str> = if comma {
                trimmed.split(',').map(|f| f.trim().trim_matches('"')).collect()
            } else {
                trimmed.split_whitespace().collect()
            };
            let Some(is_csv) = csv else {
                if is_header(&fields) {
                    csv = Some(comma);
                }
                continue;
            };
            if comma != is_csv {
                return Err(err(ln, "delimiter differs from the header line".into()));
            }
            if fields.len() != 5 {
                return Err(err(ln, format!("expected 5 columns, found {}", fields.len())));
            }
            let Some(year) = parse_year(fields[0]).map_err(|m| err(ln, m))? else {
                continue;
            };
            let (age, open_age) = parse_age(fields[1]).map_err(|m| err(ln, m))?;
            let mut vals = [None; 3];
            for (slot, f) in vals.iter_mut().zip(&fields[2..]) {
                *slot = parse_value(f).map_err(|m| err(ln, m))?;
            }
            table
                .insert(VitalRow {
                    year,
                    age,
                    open_age,
                    female: vals[0],
                    male: vals[1],
                    total: vals[2],
                })
                .map_err(|e| err(ln, e.to_string()))?;
        }
        if csv.is_none() {
            return Err(err(0, "no `Year Age Female Male Total` header line found".into()));
        }
        Ok(table)
    }

    /// Writes the whitespace-aligned text layout.
    pub fn write_text<W: Write>(&self, mut w: W, title: &str) -> std::io::Result<()> {
        writeln!(w, "{title}")?;
        writeln!(w)?;
        writeln!(w, "  Year          Age             Female            Male           Total")?;
        let fmt = |v: Option<f64>| v.map_or_else(|| ".".to_string(), |x| format!("{x:?}"));
        for r in self.rows.values() {
            let age = if r.open_age {
                format!("{}+", r.age)
            } else {
                r.age.to_string()
            };
            writeln!(
                w,
                "  {:<4}  {:>10}  {:>24}  {:>24}  {:>24}",
                r.year,
                age,
                fmt(r.female),
                fmt(r.male),
                fmt(r.total)
            )?;
        }
        Ok(())
    }

    /// Value for `(year, age, sex)`, failing with a message naming the cell
    /// when the row or value is missing or the row is an open age group.
    pub fn cell(&self, year: i32, age: i32, sex: Sex) -> Result<f64> {
        let row = self.row(year, age).ok_or_else(|| {
            Error::Data(format!("{} missing for year {year}, age {age}", self.kind))
        })?;
        if row.open_age {
            return Err(Error::Data(format!(
                "age {age}+ is an open interval and cannot be used in the window"
            )));
        }
        row.value(sex).ok_or_else(|| {
            Error::Data(format!(
                "{} missing for year {year}, age {age}, {sex}",
                self.kind
            ))
        })
    }
}

fn is_header(fields: &[&str]) -> bool {
    let lower: Vec<String> = fields.iter().map(|f| f.to_ascii_lowercase()).collect();
    lower == ["year", "age", "female", "male", "total"]
}

/// Years may carry a `-`/`+` suffix marking rows before and after a
/// territorial change; the `-` rows are skipped.
fn parse_year(s: &str) -> std::result::Result<Option<i32>, String> {
    if s.ends_with('-') {
        return Ok(None);
    }
    s.trim_end_matches('+')
        .parse()
        .map(Some)
        .map_err(|_| format!("invalid year {s:?}"))
}

fn parse_age(s: &str) -> std::result::Result<(i32, bool), String> {
    let (digits, open) = match s.strip_suffix('+') {
        Some(d) => (d, true),
        None => (s, false),
    };
    let age: i32 = digits.parse().map_err(|_| format!("invalid age {s:?}"))?;
    if age < 0 {
        return Err(format!("negative age {age}"));
    }
    Ok((age, open))
}

fn parse_value(s: &str) -> std::result::Result<Option<f64>, String> {
    if s == "." || s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| format!("invalid number {s:?}"))
}

/// Log crude death rates `ln(D / E)` on `window` for one sex.
pub fn crude_rates(
    deaths: &RawVitalTable,
    exposures: &RawVitalTable,
    sex: Sex,
    window: &AgeYearWindow,
) -> Result<DataPanel> {
    let mut y = DMatrix::zeros(window.n_ages(), window.n_years());
    for (j, year) in window.years().enumerate() {
        for (i, age) in window.ages().enumerate() {
            let d = deaths.cell(year, age, sex)?;
            let e = exposures.cell(year, age, sex)?;
            if !(e > 0.0) {
                return Err(Error::Data(format!(
                    "zero exposure at age {age}, year {year} ({sex})"
                )));
            }
            if !(d > 0.0) {
                return Err(Error::Data(format!(
                    "zero deaths at age {age}, year {year} ({sex}); the log rate is undefined"
                )));
            }
            y[(i, j)] = (d / e).ln();
        }
    }
    DataPanel::new(*window, y)
}

/// Death probability from a central rate under a constant force of
/// mortality: `q = 1 - exp(-m)`.
pub fn q_from_m(m: f64) -> f64 {
    -(-m).exp_m1()
}

/// Approximate initial exposure `E + D / 2` from central exposure and
/// deaths.
pub fn initial_exposure(central_exposure: f64, deaths: f64) -> f64 {
    central_exposure + 0.5 * deaths
}

/// Deaths `exp(y)` and unit exposures reproducing `panel`, filled in for
/// every sex.
pub fn tables_from_panel(panel: &DataPanel) -> (RawVitalTable, RawVitalTable) {
    let mut deaths = RawVitalTable::new(TableKind::Deaths);
    let mut exposures = RawVitalTable::new(TableKind::Exposures);
    let w = panel.window();
    for (j, year) in w.years().enumerate() {
        for (i, age) in w.ages().enumerate() {
            let d = panel.log_rates()[(i, j)].exp();
            let row = |v: f64| VitalRow {
                year,
                age,
                open_age: false,
                female: Some(v),
                male: Some(v),
                total: Some(v),
            };
            deaths.insert(row(d)).expect("fresh cell");
            exposures.insert(row(1.0)).expect("fresh cell");
        }
    }
    (deaths, exposures)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEATHS_TXT: &str = "\
United Kingdom, Deaths (period 1x1), \tLast modified: 01 Jan 2020;  Methods Protocol: v6 (2017)

  Year          Age             Female            Male           Total
  2000           65             10.00           1000.00         1010.00
  2000           66              0.00             20.00           20.00
  2000         110+              1.00                .             1.00
  2001-          65              9.00              9.00           18.00
  2001+          65             12.00             11.00           23.00
  2001           66             13.00             14.00           27.00
";

    const EXPOSURES_CSV: &str = "\
Year,Age,Female,Male,Total
2000,65,1000.0,1000.0,2000.0
2000,66,100.0,20.0,120.0
2001,65,100.0,0.0,100.0
2001,66,50.0,28.0,78.0
";

    #[test]
    fn parses_text_layout() {
        let t = RawVitalTable::parse(DEATHS_TXT.as_bytes(), TableKind::Deaths, "d.txt").unwrap();
        assert_eq!(t.len(), 5);
        let open = t.row(2000, 110).unwrap();
        assert!(open.open_age && open.male.is_none());
        assert_eq!(t.cell(2001, 65, Sex::Female).unwrap(), 12.0);
        assert!(t.cell(2000, 110, Sex::Total).is_err());
    }

    #[test]
    fn parses_csv_layout() {
        let t = RawVitalTable::parse(EXPOSURES_CSV.as_bytes(), TableKind::Exposures, "e.csv").unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.cell(2000, 66, Sex::Male).unwrap(), 20.0);
    }

    #[test]
    fn rejects_duplicates_negatives_and_missing_header() {
        let dup = "Year Age Female Male Total\n2000 1 1 1 2\n2000 1 1 1 2\n";
        let e = RawVitalTable::parse(dup.as_bytes(), TableKind::Deaths, "x").unwrap_err();
        assert!(e.to_string().contains("x: line 3") && e.to_string().contains("duplicate"), "{e}");
        let neg = "Year Age Female Male Total\n2000 1 -1 1 2\n";
        assert!(RawVitalTable::parse(neg.as_bytes(), TableKind::Deaths, "x").is_err());
        assert!(RawVitalTable::parse("2000 1 1 1 2\n".as_bytes(), TableKind::Deaths, "x").is_err());
    }

    #[test]
    fn crude_rates_and_cell_errors() {
        let d = RawVitalTable::parse(DEATHS_TXT.as_bytes(), TableKind::Deaths, "d").unwrap();
        let e = RawVitalTable::parse(EXPOSURES_CSV.as_bytes(), TableKind::Exposures, "e").unwrap();
        let w = AgeYearWindow::new(65..=66, 2000..=2001).unwrap();
        let p = crude_rates(&d, &e, Sex::Total, &w).unwrap();
        assert!((p.get(65, 2000).unwrap() - (1010.0f64 / 2000.0).ln()).abs() < 1e-15);

        let msg = crude_rates(&d, &e, Sex::Female, &w).unwrap_err().to_string();
        assert!(msg.contains("zero deaths at age 66, year 2000"), "{msg}");
        let msg = crude_rates(&d, &e, Sex::Male, &w).unwrap_err().to_string();
        assert!(msg.contains("zero exposure at age 65, year 2001"), "{msg}");
        let w2 = AgeYearWindow::new(65..=67, 2000..=2001).unwrap();
        let msg = crude_rates(&d, &e, Sex::Total, &w2).unwrap_err().to_string();
        assert!(msg.contains("year 2000, age 67"), "{msg}");
    }

    #[test]
    fn rate_arithmetic() {
        let mut d = RawVitalTable::new(TableKind::Deaths);
        let mut e = RawVitalTable::new(TableKind::Exposures);
        for (year, dv, ev) in [(2000, 10.0, 1000.0), (2001, 7.5, 7.5)] {
            for (t, v) in [(&mut d, dv), (&mut e, ev)] {
                for age in 0..=1 {
                    t.insert(VitalRow {
                        year,
                        age,
                        open_age: false,
                        female: Some(v),
                        male: Some(v),
                        total: Some(v),
                    })
                    .unwrap();
                }
            }
        }
        let w = AgeYearWindow::new(0..=1, 2000..=2001).unwrap();
        let p = crude_rates(&d, &e, Sex::Male, &w).unwrap();
        assert!((p.get(0, 2000).unwrap() - (-4.605_170_185_988_091)).abs() < 1e-12);
        assert_eq!(p.get(1, 2001).unwrap(), 0.0);
        assert!((q_from_m(0.01) - 0.009_950_166_250_831_947).abs() < 1e-15);
        assert_eq!(initial_exposure(1000.0, 10.0), 1005.0);
    }

    #[test]
    fn panel_round_trips_through_text_tables() {
        let w = AgeYearWindow::new(65..=68, 1990..=1994).unwrap();
        let y = DMatrix::from_fn(4, 5, |i, j| -5.0 + 0.3 * i as f64 - 0.07 * j as f64);
        let panel = DataPanel::new(w, y).unwrap();
        let (d, e) = tables_from_panel(&panel);
        let mut dt = Vec::new();
        let mut et = Vec::new();
        d.write_text(&mut dt, "synthetic, Deaths").unwrap();
        e.write_text(&mut et, "synthetic, Exposures").unwrap();
        let d2 = RawVitalTable::parse(dt.as_slice(), TableKind::Deaths, "d").unwrap();
        let e2 = RawVitalTable::parse(et.as_slice(), TableKind::Exposures, "e").unwrap();
        let back = crude_rates(&d2, &e2, Sex::Female, &w).unwrap();
        let diff = (back.log_rates() - panel.log_rates()).abs().max();
        assert!(diff < 1e-12, "{diff}");
    }
}
