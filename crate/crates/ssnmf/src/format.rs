//! Plain-text file formats: matrix CSV, `key=value` metadata, term lists and
//! the tab-separated corpus format.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ssnmf_core::text::{Corpus, Document, Split};
use ssnmf_core::{Mask, Matrix, NonnegMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: missing key `{key}`", path.display())]
    MissingKey { path: PathBuf, key: String },
    #[error("{}: {source}", path.display())]
    Invalid {
        path: PathBuf,
        #[source]
        source: ssnmf_core::Error,
    },
}

/// A parse failure before a file path is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError { line, message: message.into() }
    }

    pub fn at(self, path: &Path) -> FormatError {
        FormatError::Parse { path: path.to_path_buf(), line: self.line, message: self.message }
    }
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    fs::write(path, text).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

pub fn create_dir(path: &Path) -> Result<(), FormatError> {
    fs::create_dir_all(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Entries {
    Real,
    Nonneg,
    Binary,
}

fn parse_csv(text: &str, entries: Entries) -> Result<Matrix, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| ParseError::new(1, "empty file, expected `rows,cols`"))?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    let (rows, cols) = match dims.as_slice() {
        [r, c] => match (r.parse::<usize>(), c.parse::<usize>()) {
            (Ok(r), Ok(c)) => (r, c),
            _ => return Err(ParseError::new(1, format!("bad header `{header}`, expected `rows,cols`"))),
        },
        _ => return Err(ParseError::new(1, format!("bad header `{header}`, expected `rows,cols`"))),
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (line, content) in lines {
        if content.is_empty() {
            continue;
        }
        if seen == rows {
            return Err(ParseError::new(line, format!("expected {rows} rows, found more")));
        }
        let start = data.len();
        for field in content.split(',') {
            let field = field.trim();
            let value: f64 = field.parse().map_err(|_| ParseError::new(line, format!("`{field}` is not a number")))?;
            if !value.is_finite() {
                return Err(ParseError::new(line, format!("`{field}` is not finite")));
            }
            match entries {
                Entries::Nonneg if value < 0.0 => {
                    return Err(ParseError::new(line, format!("negative entry {value}")));
                }
                Entries::Binary if value != 0.0 && value != 1.0 => {
                    return Err(ParseError::new(line, format!("mask entry {value} is not 0 or 1")));
                }
                _ => {}
            }
            data.push(value);
        }
        if data.len() - start != cols {
            return Err(ParseError::new(line, format!("expected {cols} columns, found {}", data.len() - start)));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(ParseError::new(text.lines().count().max(1), format!("expected {rows} rows, found {seen}")));
    }
    Ok(Matrix::from_vec(rows, cols, data).expect("shape and entries checked"))
}

pub fn parse_matrix(text: &str) -> Result<Matrix, ParseError> {
    parse_csv(text, Entries::Real)
}

pub fn parse_nonneg(text: &str) -> Result<NonnegMatrix, ParseError> {
    parse_csv(text, Entries::Nonneg).map(|m| NonnegMatrix::new(m).expect("entries checked"))
}

pub fn parse_mask(text: &str) -> Result<Mask, ParseError> {
    parse_csv(text, Entries::Binary).map(|m| Mask::new(m).expect("entries checked"))
}

/// `rows,cols` header, then one comma-separated row per line. Values use
/// Rust's shortest round-trip decimal form.
pub fn format_matrix(m: &Matrix) -> String {
    let mut out = format!("{},{}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a string");
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<Matrix, FormatError> {
    parse_matrix(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn read_nonneg(path: &Path) -> Result<NonnegMatrix, FormatError> {
    parse_nonneg(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn read_mask(path: &Path) -> Result<Mask, FormatError> {
    parse_mask(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<(), FormatError> {
    write_text(path, &format_matrix(m))
}

/// Ordered `key=value` lines. Blank lines and lines starting with `#` are
/// skipped on read.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Meta {
    entries: Vec<(String, String)>,
}

impl Meta {
    pub fn new() -> Self {
        Meta::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut meta = Meta::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ParseError::new(i + 1, format!("expected key=value, found `{line}`")))?;
            meta.push(k.trim(), v.trim());
        }
        Ok(meta)
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Meta::parse(&read_text(path)?).map_err(|e| e.at(path))
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        write_text(path, &self.to_string())
    }

    /// Looks up and parses `key`, attributing failures to `path`.
    pub fn value<T: FromStr>(&self, key: &str, path: &Path) -> Result<T, FormatError> {
        let raw =
            self.get(key).ok_or_else(|| FormatError::MissingKey { path: path.to_path_buf(), key: key.to_string() })?;
        raw.parse().map_err(|_| {
            let line = self.entries.iter().position(|(k, _)| k == key).unwrap_or(0) + 1;
            FormatError::Parse { path: path.to_path_buf(), line, message: format!("bad value `{raw}` for `{key}`") }
        })
    }
}

impl std::fmt::Display for Meta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// One entry per line, in order.
pub fn format_lines(items: &[String]) -> String {
    items.iter().map(|t| format!("{t}\n")).collect()
}

pub fn read_lines(path: &Path) -> Result<Vec<String>, FormatError> {
    Ok(read_text(path)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

/// `id<TAB>label1,label2,...<TAB>split<TAB>text`, one document per line.
pub fn parse_corpus(text: &str) -> Result<Corpus, ParseError> {
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(4, '\t');
        let (Some(id), Some(labels), Some(split), Some(body)) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(ParseError::new(line_no, "expected 4 tab-separated fields: id, labels, split, text"));
        };
        let id = id.trim();
        if id.is_empty() {
            return Err(ParseError::new(line_no, "empty document id"));
        }
        let split: Split =
            split.trim().parse().map_err(|_| ParseError::new(line_no, format!("unknown split `{}`", split.trim())))?;
        let labels = labels.split(',').map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        docs.push((line_no, Document { id: id.to_string(), labels, split, text: body.to_string() }));
    }
    let mut seen = std::collections::HashSet::new();
    for (line_no, doc) in &docs {
        if !seen.insert(doc.id.as_str()) {
            return Err(ParseError::new(*line_no, format!("duplicate document id `{}`", doc.id)));
        }
    }
    Ok(Corpus::new(docs.into_iter().map(|(_, d)| d).collect()).expect("ids checked"))
}

pub fn format_corpus(corpus: &Corpus) -> String {
    corpus
        .documents()
        .iter()
        .map(|d| format!("{}\t{}\t{}\t{}\n", d.id, d.labels.join(","), d.split, d.text.replace(['\t', '\n'], " ")))
        .collect()
}

pub fn read_corpus(path: &Path) -> Result<Corpus, FormatError> {
    parse_corpus(&read_text(path)?).map_err(|e| e.at(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let m = Matrix::from_rows(&[[1.0, 0.5, 1e-12], [3.25, 0.0, 1e20]]).unwrap();
        let text = format_matrix(&m);
        assert!(!text.contains('e'));
        assert_eq!(parse_matrix(&text).unwrap(), m);
    }

    #[test]
    fn scientific_notation_is_accepted() {
        assert_eq!(parse_matrix("1,2\n1e-3, 2.5E2\n").unwrap().as_slice(), &[1e-3, 250.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(parse_matrix("2,2\n1,2\n3,x\n").unwrap_err().line, 3);
        assert_eq!(parse_matrix("2,2\n1,2\n3\n").unwrap_err().line, 3);
        assert_eq!(parse_matrix("2 2\n").unwrap_err().line, 1);
        assert_eq!(parse_nonneg("1,2\n1,-1\n").unwrap_err().line, 2);
        assert_eq!(parse_mask("1,2\n1,0.5\n").unwrap_err().line, 2);
        assert_eq!(parse_matrix("1,1\nNaN\n").unwrap_err().line, 2);
        assert!(parse_matrix("2,1\n1\n").is_err());
        assert!(parse_matrix("1,1\n1\n2\n").is_err());
    }

    #[test]
    fn meta_round_trip() {
        let mut meta = Meta::new();
        meta.push("loss", "df").push("rank", 13);
        let again = Meta::parse(&format!("# header\n{meta}")).unwrap();
        assert_eq!(again, meta);
        assert_eq!(again.value::<usize>("rank", Path::new("meta")).unwrap(), 13);
        assert!(matches!(again.value::<usize>("tol", Path::new("meta")), Err(FormatError::MissingKey { .. })));
        assert_eq!(Meta::parse("a=1\nbroken\n").unwrap_err().line, 2);
    }

    #[test]
    fn corpus_lines() {
        let corpus = parse_corpus("d1\tsci,space\ttrain\tOrbit of the moon\nd2\trec\ttest\tHockey night\n").unwrap();
        assert_eq!(corpus.documents()[0].labels, ["sci", "space"]);
        assert_eq!(corpus.documents()[1].split, Split::Test);
        assert_eq!(parse_corpus(&format_corpus(&corpus)).unwrap(), corpus);
        assert_eq!(parse_corpus("d1\ta\ttrain\tx\nd2\ta\tlater\ty\n").unwrap_err().line, 2);
        assert_eq!(parse_corpus("d1\ta\ttrain\n").unwrap_err().line, 1);
        assert_eq!(parse_corpus("d1\ta\ttrain\tx\n\nd1\tb\ttest\ty\n").unwrap_err().line, 3);
    }
}
