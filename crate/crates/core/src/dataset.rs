// SPDX-License-Identifier: MIT OR Apache-2.0

//! Harmful/safe statement pairs.
//!
//! A [`PairDataset`] holds `N` statements in ascending id order. The first
//! `N/2` share one label and the second `N/2` the opposite label; statement
//! `k` of the first half is paired with statement `k` of the second half.
//! Which polarity occupies the first half is read from the labels.
//!
//! Also here: contrastive completions ([`build_contrast_inputs`]), control
//! token substitution ([`substitute_polarity_token`]) and token statistics
//! ([`dataset_stats`]). Token matching is whole-word and case-insensitive,
//! with word boundaries at non-alphanumeric characters.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PaccsError, Result};
use crate::io_util;

/// Default agreement suffix.
pub const DEFAULT_SUFFIX_YES: &str = " Yes";
/// Default disagreement suffix.
pub const DEFAULT_SUFFIX_NO: &str = " No";

/// Control tokens used in place of the negation marker.
pub const CONTROL_TOKENS: [&str; 6] = ["ttt", "eps", "moo", "urm", "432", "/////"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Harmful,
    Safe,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Harmful => 0,
            Label::Safe => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Harmful),
            1 => Some(Label::Safe),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub id: u64,
    pub text: String,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairType {
    Antagonistic,
    Concurrent,
    Mixed,
}

impl std::str::FromStr for PairType {
    type Err = PaccsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "antagonistic" => Ok(PairType::Antagonistic),
            "concurrent" => Ok(PairType::Concurrent),
            "mixed" => Ok(PairType::Mixed),
            other => Err(PaccsError::Config(format!("unknown pair type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    /// Guess from the file extension (`.csv`, otherwise JSONL).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Jsonl,
        }
    }
}

/// Validated harmful/safe pair dataset. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairDataset {
    name: String,
    pair_type: PairType,
    statements: Vec<Statement>,
}

/// On-disk record, shared by the CSV and JSONL readers.
#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: u64,
    statement: String,
    label: u8,
}

fn invalid(invariant: &'static str, detail: impl Into<String>) -> PaccsError {
    PaccsError::Validation {
        invariant,
        detail: detail.into(),
    }
}

impl PairDataset {
    /// Sort by id and check every pairing invariant.
    pub fn new(name: impl Into<String>, pair_type: PairType, mut statements: Vec<Statement>) -> Result<Self> {
        statements.sort_by_key(|s| s.id);
        if statements.is_empty() {
            return Err(invalid("non_empty", "dataset has no statements"));
        }
        for w in statements.windows(2) {
            if w[0].id == w[1].id {
                return Err(invalid("unique_ids", format!("id {} appears more than once", w[0].id)));
            }
        }
        if let Some(s) = statements.iter().find(|s| s.text.trim().is_empty()) {
            return Err(invalid("non_empty_text", format!("statement {} has empty text", s.id)));
        }
        let n = statements.len();
        if !n.is_multiple_of(2) {
            return Err(invalid("even_count", format!("{n} statements cannot be split into pairs")));
        }
        let half = n / 2;
        let first = statements[0].label;
        if let Some(s) = statements[..half].iter().find(|s| s.label != first) {
            return Err(invalid(
                "half_homogeneity",
                format!("first half starts with label {} but id {} has label {}", first.as_u8(), s.id, s.label.as_u8()),
            ));
        }
        let second = statements[half].label;
        if let Some(s) = statements[half..].iter().find(|s| s.label != second) {
            return Err(invalid(
                "half_homogeneity",
                format!("second half starts with label {} but id {} has label {}", second.as_u8(), s.id, s.label.as_u8()),
            ));
        }
        if first == second {
            return Err(invalid(
                "paired_opposites",
                format!("both halves carry label {}; pair (id {}, id {})", first.as_u8(), statements[0].id, statements[half].id),
            ));
        }
        Ok(PairDataset {
            name: name.into(),
            pair_type,
            statements,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pair_type(&self) -> PairType {
        self.pair_type
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn n_pairs(&self) -> usize {
        self.statements.len() / 2
    }

    /// Label shared by the first half.
    pub fn first_half_label(&self) -> Label {
        self.statements[0].label
    }

    /// `(safe, harmful)` statements of pair `i`.
    pub fn pair(&self, i: usize) -> (&Statement, &Statement) {
        let a = &self.statements[i];
        let b = &self.statements[i + self.n_pairs()];
        if a.label == Label::Safe {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn harmful(&self) -> impl Iterator<Item = &Statement> {
        self.statements.iter().filter(|s| s.label == Label::Harmful)
    }

    pub fn safe(&self) -> impl Iterator<Item = &Statement> {
        self.statements.iter().filter(|s| s.label == Label::Safe)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_pair_type(mut self, pair_type: PairType) -> Self {
        self.pair_type = pair_type;
        self
    }

    /// Canonical JSONL: one `{"id","statement","label"}` object per line, in id order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.statements {
            let rec = Record {
                id: s.id,
                statement: s.text.clone(),
                label: s.label.as_u8(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.statements {
            w.serialize(Record {
                id: s.id,
                statement: s.text.clone(),
                label: s.label.as_u8(),
            })?;
        }
        let bytes = w.into_inner().map_err(|e| PaccsError::io("csv buffer", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// SHA-256 hex digest of [`PairDataset::to_jsonl`].
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }

    pub fn save(&self, path: &Path, format: DataFormat) -> Result<()> {
        let text = match format {
            DataFormat::Jsonl => self.to_jsonl(),
            DataFormat::Csv => self.to_csv()?,
        };
        io_util::write_atomic(path, text.as_bytes())
    }
}

fn record_to_statement(rec: Record, path: &Path, line: usize) -> Result<Statement> {
    let label = Label::from_u8(rec.label).ok_or_else(|| PaccsError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("label must be 0 or 1, got {}", rec.label),
    })?;
    Ok(Statement {
        id: rec.id,
        text: rec.statement,
        label,
    })
}

fn parse_jsonl(text: &str, path: &Path) -> Result<Vec<Statement>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| PaccsError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(record_to_statement(rec, path, idx + 1)?);
    }
    Ok(out)
}

fn parse_csv(text: &str, path: &Path) -> Result<Vec<Statement>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in rdr.deserialize::<Record>() {
        match row {
            Ok(rec) => {
                // header is line 1, so the first record is line 2 unless quoting spans lines
                let line = out.len() + 2;
                out.push(record_to_statement(rec, path, line)?);
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                return Err(PaccsError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(out)
}

/// Load a dataset from CSV (`id,statement,label`) or JSONL. The dataset is
/// named after the file stem and tagged [`PairType::Mixed`]; use
/// [`PairDataset::with_pair_type`] to override.
pub fn load_pair_dataset(path: &Path, format: DataFormat) -> Result<PairDataset> {
    let text = io_util::read_to_string(path)?;
    let statements = match format {
        DataFormat::Jsonl => parse_jsonl(&text, path)?,
        DataFormat::Csv => parse_csv(&text, path)?,
    };
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    PairDataset::new(name, PairType::Mixed, statements)
}

// ---------------------------------------------------------------------------
// Contrastive completions
// ---------------------------------------------------------------------------

/// The four completions of one pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastPair {
    pub safe_id: u64,
    pub harm_id: u64,
    /// A⁺: safe statement + agreement suffix.
    pub safe_yes: String,
    /// A⁻: safe statement + disagreement suffix.
    pub safe_no: String,
    /// Ā⁺: harmful statement + agreement suffix.
    pub harm_yes: String,
    /// Ā⁻: harmful statement + disagreement suffix.
    pub harm_no: String,
}

#[derive(Debug, Clone)]
pub struct ContrastInputs {
    pub pairs: Vec<ContrastPair>,
    pub suffix_yes: String,
    pub suffix_no: String,
    pub warnings: Vec<String>,
}

impl ContrastInputs {
    pub fn len(&self) -> usize {
        self.pairs.len() * 4
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn build_contrast_inputs(ds: &PairDataset, suffix_yes: &str, suffix_no: &str) -> Result<ContrastInputs> {
    if suffix_yes.is_empty() || suffix_no.is_empty() {
        return Err(PaccsError::Config("completion suffixes must be non-empty".into()));
    }
    let mut warnings = Vec::new();
    if suffix_yes == suffix_no {
        let msg = format!("agreement and disagreement suffixes are identical ({suffix_yes:?}); contrast is degenerate");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let pairs = (0..ds.n_pairs())
        .map(|i| {
            let (safe, harm) = ds.pair(i);
            ContrastPair {
                safe_id: safe.id,
                harm_id: harm.id,
                safe_yes: format!("{}{suffix_yes}", safe.text),
                safe_no: format!("{}{suffix_no}", safe.text),
                harm_yes: format!("{}{suffix_yes}", harm.text),
                harm_no: format!("{}{suffix_no}", harm.text),
            }
        })
        .collect();
    Ok(ContrastInputs {
        pairs,
        suffix_yes: suffix_yes.to_string(),
        suffix_no: suffix_no.to_string(),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Whole-word token matching
// ---------------------------------------------------------------------------

fn chars_eq_ci(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// Byte ranges of non-overlapping whole-word, case-insensitive matches.
fn token_matches(text: &str, token: &str) -> Vec<(usize, usize)> {
    let tok: Vec<char> = token.chars().collect();
    if tok.is_empty() {
        return Vec::new();
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i + tok.len() <= chars.len() {
        let hit = tok.iter().enumerate().all(|(j, &t)| chars_eq_ci(chars[i + j].1, t));
        let left_ok = i == 0 || !chars[i - 1].1.is_alphanumeric();
        let right_ok = chars.get(i + tok.len()).is_none_or(|(_, c)| !c.is_alphanumeric());
        if hit && left_ok && right_ok {
            let start = chars[i].0;
            let end = chars.get(i + tok.len()).map_or(text.len(), |(b, _)| *b);
            out.push((start, end));
            i += tok.len();
        } else {
            i += 1;
        }
    }
    out
}

/// Number of whole-word occurrences of `token` in `text`.
pub fn count_token(text: &str, token: &str) -> usize {
    token_matches(text, token).len()
}

pub fn contains_token(text: &str, token: &str) -> bool {
    count_token(text, token) > 0
}

/// Replace every whole-word occurrence of `target`; returns the new text
/// and the number of substitutions.
pub fn replace_token(text: &str, target: &str, replacement: &str) -> (String, usize) {
    let hits = token_matches(text, target);
    if hits.is_empty() {
        return (text.to_string(), 0);
    }
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for &(s, e) in &hits {
        out.push_str(&text[last..s]);
        out.push_str(replacement);
        last = e;
    }
    out.push_str(&text[last..]);
    (out, hits.len())
}

/// Control-token perturbation: replace `target` (e.g. `not`) with a
/// meaningless `replacement` in every statement. Ids and labels are kept.
pub fn substitute_polarity_token(ds: &PairDataset, target: &str, replacement: &str) -> Result<(PairDataset, usize)> {
    if target.is_empty() {
        return Err(PaccsError::Config("substitution target must be non-empty".into()));
    }
    let mut total = 0;
    let statements = ds
        .statements
        .iter()
        .map(|s| {
            let (text, n) = replace_token(&s.text, target, replacement);
            total += n;
            Statement {
                id: s.id,
                text,
                label: s.label,
            }
        })
        .collect();
    let out = PairDataset::new(ds.name.clone(), ds.pair_type, statements)?;
    Ok((out, total))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n_total: usize,
    pub n_pairs: usize,
    pub token: String,
    pub frac_token_harm: f64,
    pub frac_token_safe: f64,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_total\tn_pairs\ttoken\tfrac_token_harm\tfrac_token_safe")?;
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            self.n_total, self.n_pairs, self.token, self.frac_token_harm, self.frac_token_safe
        )
    }
}

pub fn dataset_stats(ds: &PairDataset, token: &str) -> DatasetStats {
    let frac = |it: &mut dyn Iterator<Item = &Statement>| {
        let (mut hit, mut n) = (0usize, 0usize);
        for s in it {
            n += 1;
            if contains_token(&s.text, token) {
                hit += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            hit as f64 / n as f64
        }
    };
    DatasetStats {
        n_total: ds.len(),
        n_pairs: ds.n_pairs(),
        token: token.to_string(),
        frac_token_harm: frac(&mut ds.harmful()),
        frac_token_safe: frac(&mut ds.safe()),
    }
}

/// Placeholder dataset of `n_pairs` numbered statements, used when a
/// synthetic archive is generated without a real dataset.
pub fn synthetic_pair_dataset(n_pairs: usize) -> Result<PairDataset> {
    let n = n_pairs as u64;
    let mut statements = Vec::with_capacity(2 * n_pairs);
    for i in 0..n {
        statements.push(Statement {
            id: i,
            text: format!("Synthetic harmful statement {i}."),
            label: Label::Harmful,
        });
    }
    for i in 0..n {
        statements.push(Statement {
            id: n + i,
            text: format!("Synthetic safe statement {i}."),
            label: Label::Safe,
        });
    }
    PairDataset::new("synthetic", PairType::Antagonistic, statements)
}
