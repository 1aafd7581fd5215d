//! Numeric data matrices and tagged term datasets.
//!
//! Row names may carry a class tag as an integer prefix separated from the
//! rest of the name by whitespace, e.g. `"4   coat protein"` is tag 4 with
//! term `"coat protein"`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Tsv,
}

impl MatrixFormat {
    fn delimiter(self) -> u8 {
        match self {
            MatrixFormat::Csv => b',',
            MatrixFormat::Tsv => b'\t',
        }
    }

    /// Guess the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("tab") => {
                MatrixFormat::Tsv
            }
            _ => MatrixFormat::Csv,
        }
    }
}

/// Split a row name into its class tag and the remaining label.
///
/// Only a strictly positive integer followed by whitespace counts as a tag.
pub fn parse_class_tag(name: &str) -> (Option<u32>, &str) {
    let trimmed = name.trim_start();
    let digits = trimmed.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return (None, name);
    }
    let rest = &trimmed[digits..];
    if !rest.starts_with(char::is_whitespace) {
        return (None, name);
    }
    match trimmed[..digits].parse::<u32>() {
        Ok(tag) if tag >= 1 => (Some(tag), rest.trim()),
        _ => (None, name),
    }
}

/// N×d matrix of finite reals with row names and optional class tags.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    row_names: Vec<String>,
    col_names: Vec<String>,
    class_tags: Vec<Option<u32>>,
}

impl DataMatrix {
    /// Build from row vectors. Row names default to `1..=N`; class tags are
    /// parsed from the names.
    pub fn from_rows(rows: Vec<Vec<f64>>, row_names: Option<Vec<String>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidData("matrix has no rows".into()));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::InvalidData("matrix has no columns".into()));
        }
        let mut values = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Format {
                    line: i + 1,
                    message: format!("ragged row: expected {d} cells, found {}", row.len()),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    col: j + 1,
                    value: row[j].to_string(),
                });
            }
            values.extend_from_slice(row);
        }
        let row_names = match row_names {
            Some(names) if names.len() != n => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: names.len(),
                })
            }
            Some(names) => names,
            None => (1..=n).map(|i| i.to_string()).collect(),
        };
        let class_tags = row_names.iter().map(|s| parse_class_tag(s).0).collect();
        Ok(DataMatrix {
            rows: n,
            cols: d,
            values,
            row_names,
            col_names: (1..=d).map(|j| format!("V{j}")).collect(),
            class_tags,
        })
    }

    pub fn with_col_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: names.len(),
            });
        }
        self.col_names = names;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_names(&self) -> &[String] {
        &self.row_names
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn class_tags(&self) -> &[Option<u32>] {
        &self.class_tags
    }

    /// Tags for every row, or `None` if any row is untagged.
    pub fn complete_tags(&self) -> Option<Vec<u32>> {
        self.class_tags.iter().copied().collect()
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let rows = idx.iter().map(|&i| self.row(i).to_vec()).collect();
        let names = idx.iter().map(|&i| self.row_names[i].clone()).collect();
        DataMatrix::from_rows(rows, Some(names))?.with_col_names(self.col_names.clone())
    }

    /// Write as a delimited table with a header row and row names in the
    /// first column. Values use the shortest representation that parses back
    /// to the same bits.
    pub fn write<W: Write>(&self, out: W, format: MatrixFormat) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(format.delimiter())
            .from_writer(out);
        let mut header = vec!["name".to_string()];
        header.extend(self.col_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.rows {
            let mut rec = vec![self.row_names[i].clone()];
            rec.extend(self.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path, format: MatrixFormat) -> Result<()> {
        self.write(File::create(path)?, format)
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Load a numeric table. A header row is recognised when any cell after the
/// first is non-numeric. The first column holds row names when any of its
/// cells is non-numeric or the header is one cell shorter than the rows.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DataMatrix> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    read_matrix(File::open(path)?, format)
}

pub fn read_matrix<R: Read>(input: R, format: MatrixFormat) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let mut records: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let cells: Vec<String> = rec.iter().map(str::to_string).collect();
        if cells.iter().all(|c| c.is_empty()) {
            continue;
        }
        records.push((line, cells));
    }
    if records.is_empty() {
        return Err(Error::InvalidData("no data rows".into()));
    }

    let header = {
        let first = &records[0].1;
        let looks_like_header = first.iter().skip(1).any(|c| parse_number(c).is_none());
        if looks_like_header {
            Some(records.remove(0))
        } else {
            None
        }
    };
    if records.is_empty() {
        return Err(Error::InvalidData("no data rows after header".into()));
    }

    let width = records[0].1.len();
    for (line, cells) in &records {
        if cells.len() != width {
            return Err(Error::Format {
                line: *line,
                message: format!("ragged row: expected {width} cells, found {}", cells.len()),
            });
        }
    }

    let header_short = header.as_ref().is_some_and(|(_, h)| h.len() + 1 == width);
    let header_blank_first = header
        .as_ref()
        .is_some_and(|(_, h)| h.len() == width && h[0].is_empty());
    let names_in_first = header_short
        || header_blank_first
        || records.iter().any(|(_, c)| parse_number(&c[0]).is_none());
    if let Some((line, h)) = &header {
        let expected = if header_short { width - 1 } else { width };
        if h.len() != expected {
            return Err(Error::Format {
                line: *line,
                message: format!("header has {} cells, rows have {width}", h.len()),
            });
        }
    }

    let first_value_col = usize::from(names_in_first);
    if width <= first_value_col {
        return Err(Error::InvalidData("no numeric columns".into()));
    }
    let mut rows = Vec::with_capacity(records.len());
    let mut names = Vec::with_capacity(records.len());
    for (i, (_, cells)) in records.iter().enumerate() {
        let mut row = Vec::with_capacity(width - first_value_col);
        for (j, cell) in cells.iter().enumerate().skip(first_value_col) {
            match parse_number(cell) {
                Some(v) => row.push(v),
                None => {
                    return Err(Error::Parse {
                        row: i + 1,
                        col: j + 1,
                        value: cell.clone(),
                    })
                }
            }
        }
        rows.push(row);
        names.push(if names_in_first {
            cells[0].clone()
        } else {
            (i + 1).to_string()
        });
    }
    let m = DataMatrix::from_rows(rows, Some(names))?;
    match header {
        Some((_, h)) => {
            let skip = if header_short { 0 } else { first_value_col };
            let cols = h.into_iter().skip(skip).collect();
            m.with_col_names(cols)
        }
        None => Ok(m),
    }
}

/// How a term is broken into features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LanguageModel {
    /// whole words
    TermTerm,
    /// dictionary radicals found as substrings
    TermRadical,
    /// adjacent word pairs
    TermBigram,
    /// adjacent word triples
    TermTrigram,
}

impl LanguageModel {
    pub fn name(self) -> &'static str {
        match self {
            LanguageModel::TermTerm => "TM-TM",
            LanguageModel::TermRadical => "TM-RD",
            LanguageModel::TermBigram => "TM-BG",
            LanguageModel::TermTrigram => "TM-TG",
        }
    }
}

impl fmt::Display for LanguageModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LanguageModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TM-TM" | "TM" | "TERM-TERM" => Ok(LanguageModel::TermTerm),
            "TM-RD" | "RD" | "TERM-RADICAL" => Ok(LanguageModel::TermRadical),
            "TM-BG" | "BG" | "TERM-BIGRAM" => Ok(LanguageModel::TermBigram),
            "TM-TG" | "TG" | "TERM-TRIGRAM" => Ok(LanguageModel::TermTrigram),
            other => Err(Error::InvalidParameter(format!("unknown language model {other:?}"))),
        }
    }
}

/// Lowercase and collapse whitespace runs to single spaces.
pub fn normalize_term(term: &str) -> String {
    term.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn word_ngrams(words: &[&str], n: usize) -> BTreeSet<String> {
    if words.len() < n {
        return BTreeSet::new();
    }
    words.windows(n).map(|w| w.join(" ")).collect()
}

/// Break a term into its token set. `radicals` is only consulted for the
/// radical model.
pub fn tokenize_term(term: &str, model: LanguageModel, radicals: &[String]) -> BTreeSet<String> {
    let norm = normalize_term(term);
    let words: Vec<&str> = norm.split(' ').filter(|w| !w.is_empty()).collect();
    match model {
        LanguageModel::TermTerm => word_ngrams(&words, 1),
        LanguageModel::TermBigram => word_ngrams(&words, 2),
        LanguageModel::TermTrigram => word_ngrams(&words, 3),
        LanguageModel::TermRadical => radicals
            .iter()
            .map(|r| normalize_term(r))
            .filter(|r| !r.is_empty() && norm.contains(r.as_str()))
            .collect(),
    }
}

/// Terms with optional class tags plus the feature vocabulary they are
/// described by.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDataset {
    terms: Vec<String>,
    tags: Vec<Option<u32>>,
    features: Vec<String>,
    model: LanguageModel,
}

impl TermDataset {
    pub fn new(
        terms: Vec<(Option<u32>, String)>,
        features: Vec<String>,
        model: LanguageModel,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidData("term list is empty".into()));
        }
        let mut seen = HashSet::new();
        let mut tags = Vec::with_capacity(terms.len());
        let mut out = Vec::with_capacity(terms.len());
        for (tag, term) in terms {
            let norm = normalize_term(&term);
            if norm.is_empty() {
                return Err(Error::InvalidData("empty term".into()));
            }
            if !seen.insert(norm.clone()) {
                return Err(Error::InvalidData(format!("duplicate term {norm:?}")));
            }
            tags.push(tag);
            out.push(norm);
        }
        let features: Vec<String> = features.iter().map(|f| normalize_term(f)).collect();
        if features.is_empty() || features.iter().any(String::is_empty) {
            return Err(Error::InvalidData("feature list is empty".into()));
        }
        let mut fs = HashSet::new();
        if let Some(dup) = features.iter().find(|f| !fs.insert(f.as_str())) {
            return Err(Error::InvalidData(format!("duplicate feature {dup:?}")));
        }
        Ok(TermDataset {
            terms: out,
            tags,
            features,
            model,
        })
    }

    /// Use every token produced by the model over all terms as the feature
    /// list. Not available for the radical model, whose dictionary is input.
    pub fn with_derived_features(
        terms: Vec<(Option<u32>, String)>,
        model: LanguageModel,
    ) -> Result<Self> {
        if model == LanguageModel::TermRadical {
            return Err(Error::InvalidParameter(
                "the radical model needs an explicit radical dictionary".into(),
            ));
        }
        let vocab: BTreeSet<String> = terms
            .iter()
            .flat_map(|(_, t)| tokenize_term(t, model, &[]))
            .collect();
        TermDataset::new(terms, vocab.into_iter().collect(), model)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn tags(&self) -> &[Option<u32>] {
        &self.tags
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn model(&self) -> LanguageModel {
        self.model
    }

    /// Row names in the tagged convention, e.g. `"4 coat protein"`.
    pub fn row_names(&self) -> Vec<String> {
        self.terms
            .iter()
            .zip(&self.tags)
            .map(|(t, tag)| match tag {
                Some(k) => format!("{k} {t}"),
                None => t.clone(),
            })
            .collect()
    }

    /// Token set of each term restricted to the feature list.
    pub fn token_sets(&self) -> Vec<BTreeSet<String>> {
        let features: HashSet<&str> = self.features.iter().map(String::as_str).collect();
        self.terms
            .iter()
            .map(|t| {
                tokenize_term(t, self.model, &self.features)
                    .into_iter()
                    .filter(|tok| features.contains(tok.as_str()))
                    .collect()
            })
            .collect()
    }
}

/// Binary term × feature occurrence matrix.
pub fn build_feature_matrix(dataset: &TermDataset) -> Result<DataMatrix> {
    let sets = dataset.token_sets();
    let rows: Vec<Vec<f64>> = sets
        .iter()
        .map(|set| {
            dataset
                .features()
                .iter()
                .map(|f| if set.contains(f) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    if rows.iter().all(|r| r.iter().all(|&v| v == 0.0)) {
        log::warn!("feature matrix is all zero; correspondence analysis is undefined on it");
    }
    DataMatrix::from_rows(rows, Some(dataset.row_names()))?
        .with_col_names(dataset.features().to_vec())
}

/// Read a term list: one term per line, optionally prefixed by a class tag.
pub fn load_terms(path: &Path) -> Result<Vec<(Option<u32>, String)>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    read_terms(BufReader::new(File::open(path)?))
}

pub fn read_terms<R: BufRead>(input: R) -> Result<Vec<(Option<u32>, String)>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (tag, term) = parse_class_tag(&line);
        out.push((tag, term.trim().to_string()));
    }
    Ok(out)
}

/// Read a feature dictionary: one token per line.
pub fn load_features(path: &Path) -> Result<Vec<String>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let tok = line.trim();
        if !tok.is_empty() {
            out.push(tok.to_string());
        }
    }
    Ok(out)
}
