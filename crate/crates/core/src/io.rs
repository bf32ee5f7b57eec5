//! CSV and JSON artifacts.
//!
//! Network states use a long format with header `t,kind,index,value`, where
//! `kind` is `a` (per vertex) or `x` (per edge); a trajectory is the
//! concatenation of its snapshots. Continuum fields use `kind,i,j,value` with
//! `kind` one of `a`, `x1`, `x2`, next to a JSON file holding the grid.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::continuum::{ContinuumField, TensorGrid};
use crate::dynamics::NetworkState;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct StateRow<'a> {
    t: f64,
    kind: &'a str,
    index: usize,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldRow<'a> {
    kind: &'a str,
    i: usize,
    j: usize,
    value: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Long-format CSV of one or more snapshots.
pub fn states_to_csv<'a>(states: impl IntoIterator<Item = &'a NetworkState>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for st in states {
        for (index, &value) in st.a.iter().enumerate() {
            w.serialize(StateRow { t: st.t, kind: "a", index, value }).map_err(csv_err)?;
        }
        for (index, &value) in st.x.iter().enumerate() {
            w.serialize(StateRow { t: st.t, kind: "x", index, value }).map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Reads the long format back; for a trajectory only the last snapshot is
/// returned.
pub fn state_from_csv(text: &str) -> Result<NetworkState> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut t_last = f64::NEG_INFINITY;
    let mut a: Vec<Option<f64>> = Vec::new();
    let mut x: Vec<Option<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row: StateRow = rec.deserialize(None).map_err(csv_err)?;
        if row.t > t_last {
            t_last = row.t;
            a.clear();
            x.clear();
        } else if row.t < t_last {
            return Err(Error::Config(format!("state csv: time {} after {}", row.t, t_last)));
        }
        let slot = match row.kind {
            "a" => &mut a,
            "x" => &mut x,
            other => return Err(Error::Config(format!("state csv: unknown kind {other:?}"))),
        };
        if slot.len() <= row.index {
            slot.resize(row.index + 1, None);
        }
        slot[row.index] = Some(row.value);
    }
    let dense = |v: Vec<Option<f64>>, what: &str| -> Result<Vec<f64>> {
        v.into_iter()
            .enumerate()
            .map(|(k, o)| o.ok_or_else(|| Error::Config(format!("state csv: missing {what}[{k}]"))))
            .collect()
    };
    if a.is_empty() {
        return Err(Error::Config("state csv: no rows".into()));
    }
    Ok(NetworkState {
        a: dense(a, "a")?,
        x: dense(x, "x")?,
        t: t_last,
    })
}

pub fn field_to_csv(f: &ContinuumField) -> Result<String> {
    let g = &f.grid;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut put = |kind, i, j, value| w.serialize(FieldRow { kind, i, j, value }).map_err(csv_err);
    for j in 0..g.ny {
        for i in 0..g.nx {
            put("a", i, j, f.a[g.cell(i, j)])?;
        }
    }
    for j in 0..g.ny {
        for i in 0..g.nx.saturating_sub(1) {
            put("x1", i, j, f.x1[j * (g.nx - 1) + i])?;
        }
    }
    for j in 0..g.ny.saturating_sub(1) {
        for i in 0..g.nx {
            put("x2", i, j, f.x2[j * g.nx + i])?;
        }
    }
    finish(w)
}

pub fn field_from_csv(grid: TensorGrid, text: &str) -> Result<ContinuumField> {
    let mut f = ContinuumField::uniform(grid, f64::NAN, f64::NAN);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row: FieldRow = rec.deserialize(None).map_err(csv_err)?;
        let (i, j) = (row.i, row.j);
        let slot = match row.kind {
            "a" if i < grid.nx && j < grid.ny => &mut f.a[grid.cell(i, j)],
            "x1" if i + 1 < grid.nx && j < grid.ny => &mut f.x1[j * (grid.nx - 1) + i],
            "x2" if i < grid.nx && j + 1 < grid.ny => &mut f.x2[j * grid.nx + i],
            _ => return Err(Error::Config(format!("field csv: bad row {} ({i}, {j})", row.kind))),
        };
        *slot = row.value;
    }
    if f.a.iter().chain(&f.x1).chain(&f.x2).any(|v| v.is_nan()) {
        return Err(Error::Config("field csv: missing values".into()));
    }
    Ok(f)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
