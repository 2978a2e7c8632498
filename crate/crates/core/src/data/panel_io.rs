//! Panel CSV (ages down, years across) and JSON encodings.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgeYearWindow, DataPanel};

/// Writes `age,<year>,<year>,...` followed by one row per age.
pub fn write_panel_csv<W: Write>(panel: &DataPanel, mut w: W) -> std::io::Result<()> {
    let win = panel.window();
    write!(w, "age")?;
    for year in win.years() {
        write!(w, ",{year}")?;
    }
    writeln!(w)?;
    for (i, age) in win.ages().enumerate() {
        write!(w, "{age}")?;
        for j in 0..win.n_years() {
            write!(w, ",{:?}", panel.log_rates()[(i, j)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_panel_csv<R: BufRead>(reader: R, source: &str) -> Result<DataPanel> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate().filter(|(_, l)| {
        l.as_ref().map_or(true, |s| !s.trim().is_empty())
    });
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(0, "empty panel file".into()))?;
    let header = header.map_err(|e| err(1, e.to_string()))?;
    let mut cols = header.split(',').map(str::trim);
    if !cols.next().is_some_and(|c| c.eq_ignore_ascii_case("age")) {
        return Err(err(1, "first header column must be `age`".into()));
    }
    let years: Vec<i32> = cols
        .map(|c| c.parse().map_err(|_| err(1, format!("invalid year {c:?}"))))
        .collect::<Result<_>>()?;

    let mut ages = Vec::new();
    let mut values = Vec::new();
    for (k, line) in lines {
        let ln = k + 1;
        let line = line.map_err(|e| err(ln, e.to_string()))?;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != years.len() + 1 {
            return Err(err(
                ln,
                format!("expected {} fields, found {}", years.len() + 1, fields.len()),
            ));
        }
        ages.push(
            fields[0]
                .parse::<i32>()
                .map_err(|_| err(ln, format!("invalid age {:?}", fields[0])))?,
        );
        for f in &fields[1..] {
            values.push(f.parse::<f64>().map_err(|_| err(ln, format!("invalid number {f:?}")))?);
        }
    }
    let window = AgeYearWindow::from_lists(&ages, &years)?;
    let y = DMatrix::from_row_slice(ages.len(), years.len(), &values);
    DataPanel::new(window, y)
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PanelRepr {
    window: AgeYearWindow,
    /// One row per age.
    log_rates: Vec<Vec<f64>>,
}

pub fn panel_to_json(panel: &DataPanel) -> serde_json::Value {
    let repr = PanelRepr {
        window: *panel.window(),
        log_rates: panel
            .log_rates()
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
    };
    serde_json::to_value(repr).expect("plain data serializes")
}

pub fn panel_from_json(value: serde_json::Value) -> Result<DataPanel> {
    let repr: PanelRepr = serde_json::from_value(value).map_err(|e| Error::Data(e.to_string()))?;
    let (p, n) = (repr.window.n_ages(), repr.window.n_years());
    if repr.log_rates.len() != p || repr.log_rates.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "panel rows do not form a {p}x{n} grid"
        )));
    }
    DataPanel::new(repr.window, DMatrix::from_fn(p, n, |i, j| repr.log_rates[i][j]))
}
