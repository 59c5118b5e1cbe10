//! Plain-text artifacts: CSV tables, density grids and their metadata headers.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::basis::SpectralField;
use crate::error::{Error, Result};

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Write `contents` to a sibling temporary file and rename it into place.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// `#`-prefixed metadata lines at the top of every artifact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Header {
    pub lines: Vec<String>,
}

impl Header {
    pub fn new() -> Self {
        Header::default()
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.lines.push(format!("{key}: {value}"));
        self
    }

    /// Append a multi-line block verbatim.
    pub fn block(&mut self, title: &str, text: &str) -> &mut Self {
        self.lines.push(format!("{title}:"));
        self.lines.extend(text.lines().map(|l| format!("  {l}")));
        self
    }

    /// Value of the first `key: value` line.
    pub fn get(&self, key: &str) -> Option<&str> {
        let prefix = format!("{key}: ");
        self.lines.iter().find_map(|l| l.strip_prefix(&prefix))
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|l| format!("# {l}\n")).collect()
    }
}

/// Format a float so that it parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn render_csv(header: &Header, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.render();
    s.push_str(&columns.join(","));
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv(
    path: &Path,
    header: &Header,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    atomic_write(path, render_csv(header, columns, rows).as_bytes())
}

/// A parsed CSV artifact.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Header,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut header = Header::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                header
                    .lines
                    .push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            match &columns {
                None => columns = Some(cells),
                Some(c) if c.len() != cells.len() => {
                    return Err(Error::Config(format!(
                        "row '{line}' has {} cells, expected {}",
                        cells.len(),
                        c.len()
                    )))
                }
                Some(_) => rows.push(cells),
            }
        }
        let columns = columns.ok_or_else(|| Error::Config("CSV has no column line".into()))?;
        Ok(CsvTable {
            header,
            columns,
            rows,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Column `name` parsed as floats.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .column(name)
            .ok_or_else(|| Error::Config(format!("missing column '{name}'")))?;
        self.rows
            .iter()
            .map(|r| {
                r[i].parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad number '{}': {e}", r[i])))
            })
            .collect()
    }
}

/// Uniform grid axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        (0..self.n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

/// Grid file: a `# x_min x_max nx [y_min y_max ny]` line, the metadata
/// header, then one row per `x` point.
pub fn render_grid(header: &Header, axes: &[Axis], values: &[f64]) -> Result<String> {
    let expected: usize = axes.iter().map(|a| a.n).product();
    if axes.is_empty() || axes.len() > 2 || values.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "grid of {} axes needs {expected} values, got {}",
            axes.len(),
            values.len()
        )));
    }
    let mut s = String::from("#");
    for a in axes {
        write!(s, " {} {} {}", fmt_f64(a.min), fmt_f64(a.max), a.n).unwrap();
    }
    s.push('\n');
    s.push_str(&header.render());
    let row = if axes.len() == 2 { axes[1].n } else { 1 };
    for chunk in values.chunks(row) {
        let cells: Vec<String> = chunk.iter().map(|v| format!("{v:.12e}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    Ok(s)
}

/// Evaluate `field` on the grid and write it.
pub fn write_field_grid(
    path: &Path,
    header: &Header,
    field: &SpectralField,
    axes: &[Axis],
) -> Result<()> {
    let pts: Vec<Vec<f64>> = axes.iter().map(Axis::points).collect();
    let values = field.evaluate_grid(&pts)?;
    atomic_write(path, render_grid(header, axes, &values)?.as_bytes())
}

/// Parse a grid file back into its axes and values.
pub fn parse_grid(text: &str) -> Result<(Vec<Axis>, Vec<f64>)> {
    let mut lines = text.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Config("empty grid file".into()))?;
    let nums: Vec<&str> = first.trim_start_matches('#').split_whitespace().collect();
    if nums.len() != 3 && nums.len() != 6 {
        return Err(Error::Config(format!("bad grid header '{first}'")));
    }
    let bad = |s: &str| Error::Config(format!("bad grid header value '{s}'"));
    let axes = nums
        .chunks(3)
        .map(|c| {
            Ok(Axis {
                min: c[0].parse().map_err(|_| bad(c[0]))?,
                max: c[1].parse().map_err(|_| bad(c[1]))?,
                n: c[2].parse().map_err(|_| bad(c[2]))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::new();
    for l in lines.filter(|l| !l.starts_with('#')) {
        for v in l.split_whitespace() {
            values.push(
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad grid value '{v}'")))?,
            );
        }
    }
    Ok((axes, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut h = Header::new();
        h.push("seed", 3);
        let text = render_csv(&h, &["a", "b"], &[vec!["1".into(), "2.5".into()]]);
        let t = CsvTable::parse(&text).unwrap();
        assert_eq!(t.header.get("seed"), Some("3"));
        assert_eq!(t.floats("b").unwrap(), vec![2.5]);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
