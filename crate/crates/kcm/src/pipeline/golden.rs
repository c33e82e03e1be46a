use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column layout of golden and computed cell files.
pub const GOLDEN_HEADER: [&str; 6] = ["table", "row", "column", "value", "tolerance", "origin"];
pub const COMPUTED_HEADER: [&str; 4] = ["table", "row", "column", "value"];

/// Reference tables bundled with the crate.
pub const BUILTIN_TABLES: [&str; 4] = [
    "effective_dimensions",
    "fragmentation",
    "level_statistics",
    "ppxpp_components",
];

fn builtin_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "effective_dimensions" => include_str!("../../data/golden/effective_dimensions.csv"),
        "fragmentation" => include_str!("../../data/golden/fragmentation.csv"),
        "level_statistics" => include_str!("../../data/golden/level_statistics.csv"),
        "ppxpp_components" => include_str!("../../data/golden/ppxpp_components.csv"),
        _ => return None,
    })
}

/// One reference value with its acceptance tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenCell {
    pub table: String,
    pub row: String,
    pub column: String,
    pub value: f64,
    /// Absolute tolerance; `0` on an integer value means exact equality.
    pub tolerance: f64,
    /// Where the reference value was taken from.
    pub origin: String,
}

/// A value produced by a run, addressed like a golden cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComputedCell {
    pub table: String,
    pub row: String,
    pub column: String,
    pub value: f64,
}

impl ComputedCell {
    pub fn new(table: &str, row: impl Into<String>, column: impl Into<String>, value: f64) -> Self {
        ComputedCell {
            table: table.into(),
            row: row.into(),
            column: column.into(),
            value,
        }
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], what: &str) -> Result<()> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema(format!(
            "{what} header is {:?}, expected {expected:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// The cells of one golden table keyed by `(row, column)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldenTable {
    pub name: String,
    cells: BTreeMap<(String, String), GoldenCell>,
}

impl GoldenTable {
    pub fn builtin(name: &str) -> Result<Self> {
        let text = builtin_text(name)
            .ok_or_else(|| Error::Config(format!("no built-in golden table {name:?}")))?;
        Self::from_reader(text.as_bytes())
    }

    /// A built-in name or a path to a golden CSV.
    pub fn open(name_or_path: &str) -> Result<Self> {
        if builtin_text(name_or_path).is_some() {
            Self::builtin(name_or_path)
        } else {
            Self::load(name_or_path)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Parse a long-format table; the file must hold exactly one table with
    /// unique `(row, column)` cells.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        check_header(&mut rdr, &GOLDEN_HEADER, "golden table")?;
        let mut name: Option<String> = None;
        let mut cells = BTreeMap::new();
        for (line, rec) in rdr.deserialize::<GoldenCell>().enumerate() {
            let cell = rec.map_err(|e| Error::Schema(format!("golden record {}: {e}", line + 1)))?;
            if !cell.value.is_finite() || cell.tolerance.is_nan() || cell.tolerance < 0.0 {
                return Err(Error::Schema(format!(
                    "golden record {}: value and tolerance must be finite, tolerance nonnegative",
                    line + 1
                )));
            }
            match &name {
                None => name = Some(cell.table.clone()),
                Some(n) if *n != cell.table => {
                    return Err(Error::Schema(format!(
                        "golden file mixes tables {n:?} and {:?}",
                        cell.table
                    )))
                }
                Some(_) => {}
            }
            let key = (cell.row.clone(), cell.column.clone());
            if cells.insert(key, cell).is_some() {
                return Err(Error::Schema(format!("golden record {} duplicates a cell", line + 1)));
            }
        }
        let name = name.ok_or_else(|| Error::Schema("golden table is empty".into()))?;
        Ok(GoldenTable { name, cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, row: &str, column: &str) -> Option<&GoldenCell> {
        self.cells.get(&(row.to_string(), column.to_string()))
    }

    pub fn cells(&self) -> impl Iterator<Item = &GoldenCell> {
        self.cells.values()
    }

    pub fn rows(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|(r, _)| r.as_str()).collect()
    }

    pub fn columns(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|(_, c)| c.as_str()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for cell in self.cells.values() {
            w.serialize(cell)?;
        }
        w.flush().map_err(|e| Error::io("<golden>", e))?;
        Ok(())
    }
}

pub fn write_computed_csv<W: Write>(cells: &[ComputedCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPUTED_HEADER)?;
    for c in cells {
        w.write_record([
            c.table.as_str(),
            c.row.as_str(),
            c.column.as_str(),
            &format_value(c.value),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<cells>", e))?;
    Ok(())
}

pub fn read_computed_csv<R: Read>(reader: R) -> Result<Vec<ComputedCell>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &COMPUTED_HEADER, "computed cells")?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Schema(format!("computed record {}: {e}", i + 1))))
        .collect()
}

/// Integers print without a fraction, everything else in scientific notation
/// with 12 decimals.
pub fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.12e}")
    }
}

/// The verdict on one cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellComparison {
    pub table: String,
    pub row: String,
    pub column: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    /// `|actual − expected|`.
    pub abs_deviation: f64,
    /// `|actual − expected| / |expected|`, infinite when only `expected` is 0.
    pub rel_deviation: f64,
    pub passed: bool,
    pub origin: String,
}

impl CellComparison {
    fn new(g: &GoldenCell, actual: f64) -> Self {
        let abs_deviation = (actual - g.value).abs();
        let rel_deviation = if abs_deviation == 0.0 {
            0.0
        } else {
            abs_deviation / g.value.abs()
        };
        CellComparison {
            table: g.table.clone(),
            row: g.row.clone(),
            column: g.column.clone(),
            expected: g.value,
            actual,
            tolerance: g.tolerance,
            abs_deviation,
            rel_deviation,
            passed: cell_passes(g.value, actual, g.tolerance),
            origin: g.origin.clone(),
        }
    }
}

impl fmt::Display for CellComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}, {}]: expected {} got {} (tolerance {})",
            self.table,
            self.row,
            self.column,
            format_value(self.expected),
            format_value(self.actual),
            self.tolerance
        )
    }
}

/// Outcome of checking a run against one golden table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoldenReport {
    pub table: String,
    pub comparisons: Vec<CellComparison>,
    /// Computed cells with no golden counterpart.
    pub unmatched: Vec<ComputedCell>,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.comparisons.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellComparison> {
        self.comparisons.iter().filter(|c| !c.passed)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "table",
            "row",
            "column",
            "expected",
            "actual",
            "tolerance",
            "abs_deviation",
            "rel_deviation",
            "passed",
        ])?;
        for c in &self.comparisons {
            w.write_record([
                c.table.as_str(),
                c.row.as_str(),
                c.column.as_str(),
                &format_value(c.expected),
                &format_value(c.actual),
                &format_value(c.tolerance),
                &format_value(c.abs_deviation),
                &format_value(c.rel_deviation),
                if c.passed { "true" } else { "false" },
            ])?;
        }
        w.flush().map_err(|e| Error::io("<comparison>", e))?;
        Ok(())
    }
}

fn cell_passes(expected: f64, actual: f64, tolerance: f64) -> bool {
    if tolerance == 0.0 {
        expected == actual
    } else {
        (expected - actual).abs() <= tolerance
    }
}

/// Compare the computed cells of `golden.name` against the table.
///
/// Cells present on only one side are not failures, but a run that shares
/// no `(row, column)` address with the table has the wrong schema.
pub fn compare_golden(golden: &GoldenTable, computed: &[ComputedCell]) -> Result<GoldenReport> {
    let mine: Vec<&ComputedCell> = computed.iter().filter(|c| c.table == golden.name).collect();
    if mine.is_empty() {
        return Err(Error::Schema(format!("no computed cells for golden table {:?}", golden.name)));
    }
    let mut seen = BTreeSet::new();
    let mut comparisons = Vec::new();
    let mut unmatched = Vec::new();
    for c in mine {
        if !seen.insert((c.row.as_str(), c.column.as_str())) {
            return Err(Error::Schema(format!(
                "computed cell {}[{}, {}] appears twice",
                c.table, c.row, c.column
            )));
        }
        match golden.get(&c.row, &c.column) {
            Some(g) => comparisons.push(CellComparison::new(g, c.value)),
            None => unmatched.push(c.clone()),
        }
    }
    if comparisons.is_empty() {
        let cols: Vec<&str> = golden.columns().into_iter().collect();
        return Err(Error::Schema(format!(
            "none of the computed cells address golden table {:?} (columns {cols:?})",
            golden.name
        )));
    }
    Ok(GoldenReport {
        table: golden.name.clone(),
        comparisons,
        unmatched,
    })
}
