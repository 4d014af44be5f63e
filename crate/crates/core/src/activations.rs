// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-layer activation archives.
//!
//! On disk an archive is a directory holding `manifest.json` and one raw
//! little-endian `f32` file per (layer, variant), row-major with shape
//! `[n_pairs, hidden_dim]`, named `layer{l}_{variant}.f32`. Layer 0 is the
//! embedding output. Encoder-decoder archives (`token_policy = both`) keep
//! no matrices themselves; their manifest lists two sub-archives under
//! `parts` (`enc`, `dec`) that are read and evaluated separately.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PaccsError, Result};
use crate::io_util;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DTYPE_F32LE: &str = "f32le";

/// The four contrastive inputs of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Safe statement + "Yes" (x⁺).
    SafeYes,
    /// Safe statement + "No" (x⁻).
    SafeNo,
    /// Harmful statement + "Yes" (x̄⁺).
    HarmYes,
    /// Harmful statement + "No" (x̄⁻).
    HarmNo,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::SafeYes, Variant::SafeNo, Variant::HarmYes, Variant::HarmNo];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SafeYes => "x_plus",
            Variant::SafeNo => "x_minus",
            Variant::HarmYes => "xbar_plus",
            Variant::HarmNo => "xbar_minus",
        }
    }

    pub fn file_stem(self, layer: usize) -> String {
        format!("layer{layer}_{}", self.name())
    }
}

/// Dense row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(PaccsError::Integrity(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(PaccsError::Integrity("ragged rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Column means in f64.
    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0f64; self.cols];
        for i in 0..self.rows {
            for (acc, &v) in m.iter_mut().zip(self.row(i)) {
                *acc += v as f64;
            }
        }
        let n = self.rows.max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(rows: usize, cols: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != rows * cols * 4 {
            return Err(PaccsError::Integrity(format!(
                "expected {} floats ({rows}x{cols}), file holds {} bytes",
                rows * cols,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Matrix { rows, cols, data })
    }
}

/// One layer's hidden states for the four contrastive inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub layer_index: usize,
    pub x_plus: Matrix,
    pub x_minus: Matrix,
    pub xbar_plus: Matrix,
    pub xbar_minus: Matrix,
}

impl LayerActivations {
    pub fn new(layer_index: usize, x_plus: Matrix, x_minus: Matrix, xbar_plus: Matrix, xbar_minus: Matrix) -> Result<Self> {
        let la = LayerActivations {
            layer_index,
            x_plus,
            x_minus,
            xbar_plus,
            xbar_minus,
        };
        let shape = la.x_plus.shape();
        for v in Variant::ALL {
            let m = la.get(v);
            if m.shape() != shape {
                return Err(PaccsError::Integrity(format!(
                    "layer {layer_index}: variant {} has shape {:?}, expected {:?}",
                    v.name(),
                    m.shape(),
                    shape
                )));
            }
            if !m.is_finite() {
                return Err(PaccsError::NonFinite {
                    layer: layer_index,
                    variant: v.name().to_string(),
                });
            }
        }
        Ok(la)
    }

    pub fn get(&self, v: Variant) -> &Matrix {
        match v {
            Variant::SafeYes => &self.x_plus,
            Variant::SafeNo => &self.x_minus,
            Variant::HarmYes => &self.xbar_plus,
            Variant::HarmNo => &self.xbar_minus,
        }
    }

    fn get_mut(&mut self, v: Variant) -> &mut Matrix {
        match v {
            Variant::SafeYes => &mut self.x_plus,
            Variant::SafeNo => &mut self.x_minus,
            Variant::HarmYes => &mut self.xbar_plus,
            Variant::HarmNo => &mut self.xbar_minus,
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.x_plus.rows()
    }

    pub fn dim(&self) -> usize {
        self.x_plus.cols()
    }

    pub fn select_pairs(&self, idx: &[usize]) -> LayerActivations {
        LayerActivations {
            layer_index: self.layer_index,
            x_plus: self.x_plus.select_rows(idx),
            x_minus: self.x_minus.select_rows(idx),
            xbar_plus: self.xbar_plus.select_rows(idx),
            xbar_minus: self.xbar_minus.select_rows(idx),
        }
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationPolicy {
    CenterOnly,
    #[default]
    CenterAndScale,
}

/// Which matrices share normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormGrouping {
    /// Yes-completions (x⁺ with x̄⁺) and No-completions (x⁻ with x̄⁻) are
    /// each normalized as one pooled group. Removes the suffix offset while
    /// keeping the safe/harmful contrast.
    #[default]
    SuffixPooled,
    /// Each of the four variant matrices is normalized on its own. Removes
    /// any constant per-variant offset, including the safe/harmful contrast
    /// when it is constant across pairs.
    PerVariant,
}

const ZERO_STD: f64 = 1e-10;

fn group_stats(mats: &[&Matrix]) -> (Vec<f64>, Vec<f64>) {
    let cols = mats[0].cols();
    let n: usize = mats.iter().map(|m| m.rows()).sum();
    let mut mean = vec![0.0f64; cols];
    for m in mats {
        for i in 0..m.rows() {
            for (acc, &v) in mean.iter_mut().zip(m.row(i)) {
                *acc += v as f64;
            }
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let mut var = vec![0.0f64; cols];
    for m in mats {
        for i in 0..m.rows() {
            for ((acc, &v), mu) in var.iter_mut().zip(m.row(i)).zip(&mean) {
                let d = v as f64 - mu;
                *acc += d * d;
            }
        }
    }
    let std = var
        .iter()
        .zip(&mean)
        .map(|(v, mu)| {
            let s = (v / n as f64).sqrt();
            if s <= ZERO_STD * (1.0 + mu.abs()) {
                1.0
            } else {
                s
            }
        })
        .collect();
    (mean, std)
}

fn apply(m: &Matrix, mean: &[f64], std: Option<&[f64]>) -> Matrix {
    let cols = m.cols();
    let data = m
        .data()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let j = k % cols;
            let c = v as f64 - mean[j];
            (match std {
                Some(s) => c / s[j],
                None => c,
            }) as f32
        })
        .collect();
    Matrix {
        rows: m.rows(),
        cols,
        data,
    }
}

/// Mean-center (and optionally scale to unit standard deviation) along the
/// pair axis. Dimensions with zero variance are divided by 1.
pub fn normalize_layer(acts: &LayerActivations, policy: NormalizationPolicy, grouping: NormGrouping) -> Result<LayerActivations> {
    if policy == NormalizationPolicy::CenterAndScale && acts.n_pairs() < 2 {
        return Err(PaccsError::Config(format!(
            "center_and_scale needs at least 2 pairs, layer {} has {}",
            acts.layer_index,
            acts.n_pairs()
        )));
    }
    let groups: Vec<Vec<Variant>> = match grouping {
        NormGrouping::SuffixPooled => vec![
            vec![Variant::SafeYes, Variant::HarmYes],
            vec![Variant::SafeNo, Variant::HarmNo],
        ],
        NormGrouping::PerVariant => Variant::ALL.iter().map(|&v| vec![v]).collect(),
    };
    let mut out = acts.clone();
    for group in groups {
        let mats: Vec<&Matrix> = group.iter().map(|&v| acts.get(v)).collect();
        let (mean, std) = group_stats(&mats);
        let scale = (policy == NormalizationPolicy::CenterAndScale).then_some(std.as_slice());
        for &v in &group {
            *out.get_mut(v) = apply(acts.get(v), &mean, scale);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Archive
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenPolicy {
    FirstToken,
    LastToken,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub model_id: String,
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub n_pairs: usize,
    pub token_policy: TokenPolicy,
    pub dataset_fingerprint: String,
    pub dtype: String,
    #[serde(default)]
    pub files: BTreeMap<String, String>,
    /// Sub-archive directories (relative) for `token_policy = both`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<BTreeMap<String, String>>,
    /// Extractor or generator metadata (`hidden_state_point`, suffixes,
    /// synthetic config, ...), carried through untouched.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl ArchiveManifest {
    pub fn new(model_id: impl Into<String>, n_layers: usize, hidden_dim: usize, n_pairs: usize, token_policy: TokenPolicy, dataset_fingerprint: impl Into<String>) -> Self {
        let mut files = BTreeMap::new();
        if token_policy != TokenPolicy::Both {
            for l in 0..n_layers {
                for v in Variant::ALL {
                    let stem = v.file_stem(l);
                    files.insert(stem.clone(), format!("{stem}.f32"));
                }
            }
        }
        ArchiveManifest {
            model_id: model_id.into(),
            n_layers,
            hidden_dim,
            n_pairs,
            token_policy,
            dataset_fingerprint: dataset_fingerprint.into(),
            dtype: DTYPE_F32LE.to_string(),
            files,
            parts: None,
            extra: BTreeMap::new(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.dtype != DTYPE_F32LE {
            return Err(PaccsError::Structural(format!("unsupported dtype `{}`", self.dtype)));
        }
        if self.token_policy == TokenPolicy::Both {
            return Ok(());
        }
        if self.n_layers == 0 || self.hidden_dim == 0 || self.n_pairs == 0 {
            return Err(PaccsError::Structural(format!(
                "n_layers, hidden_dim and n_pairs must be positive (got {}, {}, {})",
                self.n_layers, self.hidden_dim, self.n_pairs
            )));
        }
        for l in 0..self.n_layers {
            for v in Variant::ALL {
                if !self.files.contains_key(&v.file_stem(l)) {
                    return Err(PaccsError::Structural(format!("manifest lists no file for layer {l}, variant {}", v.name())));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    #[default]
    Eager,
    /// Validate file sizes at open time, read matrices on demand.
    Lazy,
}

#[derive(Debug, Clone)]
enum LayerSlot {
    Loaded(LayerActivations),
    Deferred,
}

/// Activation archive, either loaded from disk or built in memory.
#[derive(Debug, Clone)]
pub struct ActivationArchive {
    manifest: ArchiveManifest,
    root: Option<PathBuf>,
    layers: Vec<LayerSlot>,
}

impl ActivationArchive {
    /// Build an in-memory archive. The manifest's shape fields are checked
    /// against the supplied layers.
    pub fn from_layers(manifest: ArchiveManifest, layers: Vec<LayerActivations>) -> Result<Self> {
        manifest.check()?;
        if manifest.token_policy == TokenPolicy::Both {
            return Err(PaccsError::Structural("an archive with token_policy both holds parts, not layers".into()));
        }
        if layers.len() != manifest.n_layers {
            return Err(PaccsError::Integrity(format!("manifest declares {} layers, got {}", manifest.n_layers, layers.len())));
        }
        for (i, la) in layers.iter().enumerate() {
            if la.layer_index != i {
                return Err(PaccsError::Integrity(format!("layer at position {i} has index {}", la.layer_index)));
            }
            if la.n_pairs() != manifest.n_pairs || la.dim() != manifest.hidden_dim {
                return Err(PaccsError::Integrity(format!(
                    "layer {i} has shape [{}, {}], manifest says [{}, {}]",
                    la.n_pairs(),
                    la.dim(),
                    manifest.n_pairs,
                    manifest.hidden_dim
                )));
            }
        }
        Ok(ActivationArchive {
            manifest,
            root: None,
            layers: layers.into_iter().map(LayerSlot::Loaded).collect(),
        })
    }

    pub fn manifest(&self) -> &ArchiveManifest {
        &self.manifest
    }

    pub fn n_layers(&self) -> usize {
        self.manifest.n_layers
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    /// Layer `idx`, read from disk first if the archive was opened lazily.
    pub fn layer(&self, idx: usize) -> Result<Cow<'_, LayerActivations>> {
        match self.layers.get(idx) {
            Some(LayerSlot::Loaded(la)) => Ok(Cow::Borrowed(la)),
            Some(LayerSlot::Deferred) => {
                let root = self.root.as_deref().expect("deferred layers come from disk");
                Ok(Cow::Owned(load_layer(root, &self.manifest, idx)?))
            }
            None => Err(PaccsError::Structural(format!("layer {idx} out of range (n_layers = {})", self.n_layers()))),
        }
    }

    /// Write matrices and manifest into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| PaccsError::io(format!("creating {}", dir.display()), e))?;
        for l in 0..self.n_layers() {
            let la = self.layer(l)?;
            for v in Variant::ALL {
                let file = &self.manifest.files[&v.file_stem(l)];
                io_util::write_atomic(&dir.join(file), &la.get(v).to_le_bytes())?;
            }
        }
        write_manifest(dir, &self.manifest)
    }
}

fn write_manifest(dir: &Path, manifest: &ArchiveManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    io_util::write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
}

fn read_manifest(dir: &Path) -> Result<ArchiveManifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(PaccsError::Structural(format!("missing {}", path.display())));
    }
    let text = io_util::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| PaccsError::Structural(format!("{}: {e}", path.display())))
}

fn variant_path(root: &Path, manifest: &ArchiveManifest, layer: usize, v: Variant) -> Result<PathBuf> {
    let file = manifest
        .files
        .get(&v.file_stem(layer))
        .ok_or_else(|| PaccsError::Structural(format!("manifest lists no file for layer {layer}, variant {}", v.name())))?;
    let path = root.join(file);
    if !path.is_file() {
        return Err(PaccsError::Structural(format!("missing layer {layer} variant {} file {}", v.name(), path.display())));
    }
    Ok(path)
}

fn load_layer(root: &Path, manifest: &ArchiveManifest, layer: usize) -> Result<LayerActivations> {
    let mut mats = Vec::with_capacity(4);
    for v in Variant::ALL {
        let path = variant_path(root, manifest, layer, v)?;
        let bytes = std::fs::read(&path).map_err(|e| PaccsError::io(format!("reading {}", path.display()), e))?;
        let m = Matrix::from_le_bytes(manifest.n_pairs, manifest.hidden_dim, &bytes)
            .map_err(|e| PaccsError::Integrity(format!("layer {layer} variant {}: {e}", v.name())))?;
        if !m.is_finite() {
            return Err(PaccsError::NonFinite {
                layer,
                variant: v.name().to_string(),
            });
        }
        mats.push(m);
    }
    let mut it = mats.into_iter();
    let (a, b, c, d) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    LayerActivations::new(layer, a, b, c, d)
}

/// Read and validate an archive eagerly.
pub fn read_activation_archive(dir: &Path) -> Result<ActivationArchive> {
    read_activation_archive_with(dir, LoadMode::Eager)
}

pub fn read_activation_archive_with(dir: &Path, mode: LoadMode) -> Result<ActivationArchive> {
    let manifest = read_manifest(dir)?;
    if manifest.token_policy == TokenPolicy::Both {
        return Err(PaccsError::Structural(format!(
            "{} is an encoder-decoder archive; open it with open_archive_set",
            dir.display()
        )));
    }
    manifest.check()?;
    let expected = (manifest.n_pairs * manifest.hidden_dim * 4) as u64;
    let mut layers = Vec::with_capacity(manifest.n_layers);
    for l in 0..manifest.n_layers {
        match mode {
            LoadMode::Eager => layers.push(LayerSlot::Loaded(load_layer(dir, &manifest, l)?)),
            LoadMode::Lazy => {
                for v in Variant::ALL {
                    let path = variant_path(dir, &manifest, l, v)?;
                    let len = std::fs::metadata(&path)
                        .map_err(|e| PaccsError::io(format!("stat {}", path.display()), e))?
                        .len();
                    if len != expected {
                        return Err(PaccsError::Integrity(format!(
                            "layer {l} variant {}: expected {expected} bytes, file holds {len}",
                            v.name()
                        )));
                    }
                }
                layers.push(LayerSlot::Deferred);
            }
        }
    }
    Ok(ActivationArchive {
        manifest,
        root: Some(dir.to_path_buf()),
        layers,
    })
}

/// Open an archive directory, expanding encoder-decoder archives into
/// their parts. Returns `(part tag, archive)`; the tag is `None` for
/// single-stack archives.
pub fn open_archive_set(dir: &Path, mode: LoadMode) -> Result<Vec<(Option<String>, ActivationArchive)>> {
    let manifest = read_manifest(dir)?;
    if manifest.token_policy != TokenPolicy::Both {
        return Ok(vec![(None, read_activation_archive_with(dir, mode)?)]);
    }
    let parts = manifest
        .parts
        .as_ref()
        .filter(|p| !p.is_empty())
        .ok_or_else(|| PaccsError::Structural(format!("{}: token_policy both requires `parts`", dir.display())))?;
    let mut out = Vec::new();
    for (tag, rel) in parts {
        let sub = read_activation_archive_with(&dir.join(rel), mode)?;
        if sub.manifest.dataset_fingerprint != manifest.dataset_fingerprint {
            return Err(PaccsError::Integrity(format!("part `{tag}` was extracted from a different dataset")));
        }
        out.push((Some(tag.clone()), sub));
    }
    Ok(out)
}

/// Write an encoder-decoder archive: one top-level manifest plus one
/// sub-archive directory per part, named `{dir name}.{tag}`.
pub fn write_archive_parts(dir: &Path, model_id: &str, parts: &[(&str, &ActivationArchive)]) -> Result<()> {
    let first = parts
        .first()
        .ok_or_else(|| PaccsError::Config("an encoder-decoder archive needs at least one part".into()))?
        .1;
    let base = dir.file_name().and_then(|s| s.to_str()).unwrap_or("archive").to_string();
    let mut top = ArchiveManifest::new(model_id, 0, first.manifest.hidden_dim, first.manifest.n_pairs, TokenPolicy::Both, first.manifest.dataset_fingerprint.clone());
    let mut map = BTreeMap::new();
    for (tag, arch) in parts {
        let rel = format!("{base}.{tag}");
        arch.write(&dir.join(&rel))?;
        map.insert((*tag).to_string(), rel);
    }
    top.parts = Some(map);
    write_manifest(dir, &top)
}
