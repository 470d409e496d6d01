//! Tab-separated input readers and artifact writers.
//!
//! All inputs are UTF-8 text, one record per line, fields separated by a
//! single tab. Empty lines are skipped everywhere; lines starting with `#`
//! are comments in the knowledge-graph format only. Windows line endings are
//! tolerated. Every parse failure reports its 1-based line number.

use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use crate::error::CliError;

/// Reads `path` as UTF-8, mapping a missing file to its dedicated error and
/// an encoding failure to the line where the bad byte sits.
fn read_text(path: &Path) -> Result<String, CliError> {
    let bytes = match fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Err(CliError::MissingFile(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    String::from_utf8(bytes).map_err(|e| {
        let upto = e.utf8_error().valid_up_to();
        let line = 1 + e.as_bytes()[..upto].iter().filter(|&&b| b == b'\n').count();
        CliError::MalformedLine {
            path: path.to_path_buf(),
            line,
            what: "not valid UTF-8".into(),
        }
    })
}

/// Reads a configuration file as UTF-8 text with the same missing-file
/// mapping as the data readers.
pub fn read_config_text(path: &Path) -> Result<String, CliError> {
    read_text(path)
}

fn malformed(path: &Path, line: usize, what: impl Into<String>) -> CliError {
    CliError::MalformedLine { path: path.to_path_buf(), line, what: what.into() }
}

/// Walks non-empty lines with their 1-based numbers, stripping `\r`.
fn records(text: &str, comments: bool) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim_end_matches('\r')))
        .filter(move |(_, line)| !line.is_empty() && !(comments && line.starts_with('#')))
}

fn split_fields<'a, const N: usize>(
    path: &Path,
    line_no: usize,
    line: &'a str,
) -> Result<[&'a str; N], CliError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != N {
        return Err(malformed(
            path,
            line_no,
            format!("expected {N} tab-separated fields, found {}", fields.len()),
        ));
    }
    if fields.iter().any(|f| f.is_empty()) {
        return Err(malformed(path, line_no, "empty field"));
    }
    Ok(fields.try_into().expect("length checked above"))
}

/// `head<TAB>relation<TAB>tail` triples; `#` comment lines allowed.
pub fn read_kg(path: &Path) -> Result<Vec<(String, String, String)>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line_no, line) in records(&text, true) {
        let [h, r, t] = split_fields(path, line_no, line)?;
        out.push((h.to_string(), r.to_string(), t.to_string()));
    }
    Ok(out)
}

/// `user<TAB>item<TAB>rating` rows with a numeric rating.
pub fn read_ratings(path: &Path) -> Result<Vec<(String, String, f64)>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line_no, line) in records(&text, false) {
        let [user, item, rating] = split_fields(path, line_no, line)?;
        let rating: f64 = rating
            .parse()
            .map_err(|_| malformed(path, line_no, format!("unparseable rating {rating:?}")))?;
        if !rating.is_finite() {
            return Err(malformed(path, line_no, "rating must be finite"));
        }
        out.push((user.to_string(), item.to_string(), rating));
    }
    Ok(out)
}

/// `item<TAB>entity` anchoring rows.
pub fn read_item_map(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line_no, line) in records(&text, false) {
        let [item, entity] = split_fields(path, line_no, line)?;
        out.push((item.to_string(), entity.to_string()));
    }
    Ok(out)
}

/// Writes an artifact in one shot so identical content means identical bytes.
pub fn write_artifact(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)?;
    Ok(())
}
