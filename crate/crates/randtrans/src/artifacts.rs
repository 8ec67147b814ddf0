//! Deterministic run artifacts: RFC-4180 CSV writing, a content-hash
//! manifest covering every file a run produces, and long-format plot-data
//! emission.
//!
//! Reruns with the same config and seed must produce byte-identical files;
//! everything here formats floats with Rust's shortest-roundtrip `Display`
//! and iterates in fixed orders.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::Result;

/// Quote a field per RFC 4180 when it contains commas, quotes or newlines.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') || s.contains('\r') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write a CSV file with a header row; returns the path for manifest entry.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    out.push_str(
        &header
            .iter()
            .map(|h| csv_field(h))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for row in rows {
        out.push_str(
            &row.iter()
                .map(|f| csv_field(f))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(path.to_path_buf())
}

/// Minimal reader for the CSV dialect written by [`write_csv`].
pub fn read_csv(text: &str) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut row = Vec::new();
    let mut field = String::new();
    let mut quoted = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    field.push('"');
                }
                '"' => quoted = false,
                _ => field.push(c),
            }
        } else {
            match c {
                '"' => quoted = true,
                ',' => row.push(std::mem::take(&mut field)),
                '\n' => {
                    row.push(std::mem::take(&mut field));
                    rows.push(std::mem::take(&mut row));
                }
                '\r' => {}
                _ => field.push(c),
            }
        }
    }
    if !field.is_empty() || !row.is_empty() {
        row.push(field);
        rows.push(row);
    }
    rows
}

/// Content-hash manifest over every artifact a run writes.
#[derive(Debug, Default)]
pub struct Manifest {
    entries: BTreeMap<String, String>,
    root: PathBuf,
}

impl Manifest {
    pub fn new(root: &Path) -> Self {
        Manifest {
            entries: BTreeMap::new(),
            root: root.to_path_buf(),
        }
    }

    /// Register a written file; records its sha256.
    pub fn add(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let name = path
            .strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        self.entries.insert(name, hex_string(&digest));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Write `manifest.csv` under the root; entries sorted by name.
    pub fn write(&self) -> Result<PathBuf> {
        let path = self.root.join("manifest.csv");
        write_csv(
            &path,
            &["artifact", "sha256"],
            self.entries
                .iter()
                .map(|(k, v)| vec![k.clone(), v.clone()]),
        )
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Convert a report CSV into long-format plot rows `(series, x, y)`.
/// `series` names the y-column so several columns of one report can be
/// overlaid by external plotting tools.
pub fn plot_rows(
    csv_text: &str,
    x_col: &str,
    y_cols: &[&str],
) -> Vec<(String, String, String)> {
    let rows = read_csv(csv_text);
    if rows.is_empty() {
        return Vec::new();
    }
    let header = &rows[0];
    let xi = match header.iter().position(|h| h == x_col) {
        Some(i) => i,
        None => return Vec::new(),
    };
    let mut out = Vec::new();
    for y in y_cols {
        if let Some(yi) = header.iter().position(|h| h == y) {
            for row in &rows[1..] {
                if row.len() > xi.max(yi) {
                    out.push((y.to_string(), row[xi].clone(), row[yi].clone()));
                }
            }
        }
    }
    out
}

/// Write the long-format plot CSV next to a report.
pub fn emit_plot_data(
    report_path: &Path,
    x_col: &str,
    y_cols: &[&str],
    manifest: &mut Manifest,
) -> Result<PathBuf> {
    let text = std::fs::read_to_string(report_path)?;
    let rows = plot_rows(&text, x_col, y_cols);
    let plot_path = report_path.with_extension("plot.csv");
    let written = write_csv(
        &plot_path,
        &["series", "x", "y"],
        rows.into_iter().map(|(s, x, y)| vec![s, x, y]),
    )?;
    manifest.add(&written)?;
    Ok(written)
}

/// Format a float with Rust's shortest-roundtrip representation.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(
            &path,
            &["a", "b"],
            vec![
                vec!["plain".into(), "with,comma".into()],
                vec!["with\"quote".into(), "line\nbreak".into()],
            ],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows = read_csv(&text);
        assert_eq!(rows[1], vec!["plain", "with,comma"]);
        assert_eq!(rows[2], vec!["with\"quote", "line\nbreak"]);
    }

    #[test]
    fn manifest_is_deterministic_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new(dir.path());
        let p1 = write_csv(&dir.path().join("b.csv"), &["x"], vec![vec!["1".into()]]).unwrap();
        let p2 = write_csv(&dir.path().join("a.csv"), &["x"], vec![vec!["2".into()]]).unwrap();
        m.add(&p1).unwrap();
        m.add(&p2).unwrap();
        let mp = m.write().unwrap();
        let text = std::fs::read_to_string(&mp).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].starts_with("a.csv,"));
        assert!(lines[2].starts_with("b.csv,"));
        // identical content hashes on rerun
        let mut m2 = Manifest::new(dir.path());
        m2.add(&p1).unwrap();
        m2.add(&p2).unwrap();
        m2.write().unwrap();
        assert_eq!(text, std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap());
    }

    #[test]
    fn plot_rows_fixture_golden() {
        let csv = "r,lhs,rhs,margin\n1,0.5,0.7,-0.2\n2,0.9,1.1,-0.2\n";
        let rows = plot_rows(csv, "r", &["lhs", "margin"]);
        assert_eq!(
            rows,
            vec![
                ("lhs".into(), "1".into(), "0.5".into()),
                ("lhs".into(), "2".into(), "0.9".into()),
                ("margin".into(), "1".into(), "-0.2".into()),
                ("margin".into(), "2".into(), "-0.2".into()),
            ]
        );
        // missing x column yields nothing rather than junk
        assert!(plot_rows(csv, "nope", &["lhs"]).is_empty());
    }
}
