//! Labelled datasets and how they come to exist.
//!
//! A [`LabeledDataset`] is a dense row-major feature matrix with one ±1 label
//! per row. The module provides three sources — a two-Gaussian synthetic
//! generator, the Spambase CSV format, and the MNIST IDX format — plus a
//! seeded train/outlier-train/validation/test split.
//!
//! Datasets validate on construction (finite features, labels in {-1, +1},
//! consistent row lengths) and all mutating helpers re-validate, so any
//! dataset handed to a trainer or attack is structurally sound.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A dense binary-classification dataset: `n` rows of `d` features with
/// labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>, // row-major, n * d entries
    labels: Vec<f64>,
    n: usize,
    d: usize,
}

impl LabeledDataset {
    /// Build a dataset from per-row feature vectors. Requires at least one
    /// row (use [`LabeledDataset::from_flat`] with an explicit `d` for
    /// possibly-empty datasets).
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset(
                "cannot infer dimensionality from zero rows".into(),
            ));
        }
        let d = rows[0].len();
        let n = rows.len();
        let mut features = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            let _ = i;
            features.extend_from_slice(row);
        }
        Self::from_flat(n, d, features, labels)
    }

    /// Build a dataset from a flat row-major feature buffer.
    pub fn from_flat(n: usize, d: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: features.len(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        for (idx, &v) in features.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature {
                    row: idx / d.max(1),
                    col: idx % d.max(1),
                });
            }
        }
        for (i, &y) in labels.iter().enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(Error::InvalidLabel { index: i, value: y });
            }
        }
        Ok(Self {
            features,
            labels,
            n,
            d,
        })
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.n
    }

    /// True when the dataset has no rows.
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Feature dimensionality.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Feature row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    /// Label of row `i`.
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// All labels.
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// The flat row-major feature buffer.
    pub fn features_flat(&self) -> &[f64] {
        &self.features
    }

    /// Iterate over `(row, label)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.n).map(move |i| (self.row(i), self.labels[i]))
    }

    /// Overwrite feature row `i` (validates finiteness and length).
    pub fn set_row(&mut self, i: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: row.len(),
            });
        }
        for (col, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature { row: i, col });
            }
        }
        self.features[i * self.d..(i + 1) * self.d].copy_from_slice(row);
        Ok(())
    }

    /// Overwrite the label of row `i` (must be ±1).
    pub fn set_label(&mut self, i: usize, label: f64) -> Result<()> {
        if label != 1.0 && label != -1.0 {
            return Err(Error::InvalidLabel {
                index: i,
                value: label,
            });
        }
        self.labels[i] = label;
        Ok(())
    }

    /// Append one row.
    pub fn push_row(&mut self, row: &[f64], label: f64) -> Result<()> {
        if row.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: row.len(),
            });
        }
        for (col, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature { row: self.n, col });
            }
        }
        if label != 1.0 && label != -1.0 {
            return Err(Error::InvalidLabel {
                index: self.n,
                value: label,
            });
        }
        self.features.extend_from_slice(row);
        self.labels.push(label);
        self.n += 1;
        Ok(())
    }

    /// New dataset holding this one's rows followed by `other`'s.
    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(LabeledDataset {
            features,
            labels,
            n: self.n + other.n,
            d: self.d,
        })
    }

    /// New dataset holding the given rows, in the given order.
    ///
    /// # Panics
    ///
    /// Panics if any index is out of bounds.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset {
            features,
            labels,
            n: indices.len(),
            d: self.d,
        }
    }

    /// Indices of rows carrying the given label.
    pub fn indices_with_label(&self, label: f64) -> Vec<usize> {
        (0..self.n).filter(|&i| self.labels[i] == label).collect()
    }
}

/// Features-only view used by outlier scorers (which never see labels).
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    data: Vec<f64>, // row-major
    n: usize,
    d: usize,
}

impl Features {
    /// Copy the feature rows out of a labelled dataset.
    pub fn from_labeled(data: &LabeledDataset) -> Self {
        Features {
            data: data.features.clone(),
            n: data.n,
            d: data.d,
        }
    }

    /// Build from per-row vectors.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset(
                "cannot infer dimensionality from zero rows".into(),
            ));
        }
        let d = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            if let Some(col) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row: i, col });
            }
            data.extend_from_slice(row);
        }
        Ok(Features {
            data,
            n: rows.len(),
            d,
        })
    }

    /// New view holding the given rows, in the given order.
    ///
    /// # Panics
    ///
    /// Panics if any index is out of bounds.
    pub fn subset(&self, indices: &[usize]) -> Features {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Features {
            data,
            n: indices.len(),
            d: self.d,
        }
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.n
    }

    /// True when there are no rows.
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Feature dimensionality.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

/// Parameters of the two-Gaussian synthetic task: one isotropic Gaussian per
/// class, `cov_scale * I` covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    /// Mean of the +1 class.
    pub mean_pos: Vec<f64>,
    /// Mean of the -1 class.
    pub mean_neg: Vec<f64>,
    /// Shared isotropic covariance scale (the variance of each coordinate).
    pub cov_scale: f64,
    /// Points drawn per class.
    pub n_per_class: usize,
    /// PRNG seed.
    pub seed: u64,
}

/// Draw `2 * n_per_class` points, the +1 class first, each coordinate
/// `mean + sqrt(cov_scale) * z` with `z` standard normal.
///
/// Fully deterministic in `spec.seed`: each point consumes `ceil(d / 2)`
/// Box-Muller pairs, discarding the spare deviate when `d` is odd.
pub fn gen_gaussian_binary(spec: &GaussianSpec) -> Result<LabeledDataset> {
    let d = spec.mean_pos.len();
    if spec.mean_neg.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: spec.mean_neg.len(),
        });
    }
    if d == 0 {
        return Err(Error::InvalidConfig("class means must have dimension >= 1".into()));
    }
    if !(spec.cov_scale.is_finite() && spec.cov_scale > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "cov_scale must be positive and finite, got {}",
            spec.cov_scale
        )));
    }
    if spec.n_per_class == 0 {
        return Err(Error::InvalidConfig("n_per_class must be >= 1".into()));
    }
    for (name, mean) in [("mean_pos", &spec.mean_pos), ("mean_neg", &spec.mean_neg)] {
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name} contains a non-finite value")));
        }
    }

    let sd = spec.cov_scale.sqrt();
    let mut prng = rng::rng_from_seed(spec.seed);
    let n = 2 * spec.n_per_class;
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (mean, label) in [(&spec.mean_pos, 1.0), (&spec.mean_neg, -1.0)] {
        for _ in 0..spec.n_per_class {
            let mut coord = 0;
            while coord < d {
                let (z0, z1) = rng::standard_normal_pair(&mut prng);
                features.push(mean[coord] + sd * z0);
                coord += 1;
                if coord < d {
                    features.push(mean[coord] + sd * z1);
                    coord += 1;
                }
            }
            labels.push(label);
        }
    }
    LabeledDataset::from_flat(n, d, features, labels)
}

/// Sizes and seed of the four-way split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Rows for the attacked training set.
    pub n_train: usize,
    /// Rows for the trusted set the defence fits its scorers on.
    pub n_od_train: usize,
    /// Rows for the attacker's validation set.
    pub n_val: usize,
    /// Permutation seed.
    #[serde(default)]
    pub seed: u64,
}

/// The four disjoint pieces produced by [`split`]. `test` holds whatever the
/// first three pieces leave over and may be empty.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: LabeledDataset,
    pub od_train: LabeledDataset,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
}

/// Split a dataset into train / outlier-train / validation / test by a
/// seeded permutation.
///
/// The permutation is Fisher-Yates under ChaCha8, so a given `(dataset,
/// spec)` pair always yields the same split.
pub fn split(data: &LabeledDataset, spec: &SplitSpec) -> Result<DatasetSplit> {
    let requested = spec.n_train + spec.n_od_train + spec.n_val;
    if requested > data.len() {
        return Err(Error::InfeasibleSplit {
            requested,
            available: data.len(),
        });
    }
    let mut prng = rng::rng_from_seed(spec.seed);
    let perm = rng::permutation(&mut prng, data.len());
    let (a, b, c) = (
        spec.n_train,
        spec.n_train + spec.n_od_train,
        spec.n_train + spec.n_od_train + spec.n_val,
    );
    Ok(DatasetSplit {
        train: data.subset(&perm[..a]),
        od_train: data.subset(&perm[a..b]),
        val: data.subset(&perm[b..c]),
        test: data.subset(&perm[c..]),
    })
}

/// Number of feature columns kept from the Spambase CSV (the word- and
/// character-frequency block; the three capital-run-length columns are
/// dropped).
pub const SPAMBASE_KEPT_FEATURES: usize = 54;
const SPAMBASE_TOTAL_COLUMNS: usize = 58;

/// Load the Spambase CSV: 57 feature columns plus a trailing 0/1 label.
///
/// Keeps the first 54 features, binarized to {0, 1} by `value > 0`; maps
/// label 1 (spam) to +1 and 0 to -1; drops duplicate (features, label) rows,
/// keeping first occurrences in file order.
pub fn load_spambase(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut seen: HashSet<(Vec<u8>, i8)> = HashSet::new();
    let mut record = 0usize;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        record += 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != SPAMBASE_TOTAL_COLUMNS {
            return Err(Error::MalformedData {
                path: display,
                record,
                msg: format!(
                    "expected {SPAMBASE_TOTAL_COLUMNS} comma-separated fields, got {}",
                    fields.len()
                ),
            });
        }
        let mut binarized = Vec::with_capacity(SPAMBASE_KEPT_FEATURES);
        for (i, field) in fields.iter().take(SPAMBASE_KEPT_FEATURES).enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::MalformedData {
                path: display.clone(),
                record,
                msg: format!("field {i} is not a number: {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::MalformedData {
                    path: display.clone(),
                    record,
                    msg: format!("field {i} is not finite"),
                });
            }
            binarized.push(u8::from(value > 0.0));
        }
        let raw_label = fields[SPAMBASE_TOTAL_COLUMNS - 1].trim();
        let label = match raw_label {
            "1" => 1.0,
            "0" => -1.0,
            _ => {
                return Err(Error::MalformedData {
                    path: display,
                    record,
                    msg: format!("label must be 0 or 1, got {raw_label:?}"),
                })
            }
        };
        if seen.insert((binarized.clone(), if label > 0.0 { 1 } else { -1 })) {
            rows.extend(binarized.iter().map(|&b| f64::from(b)));
            labels.push(label);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset(format!("{display} contains no records")));
    }
    let n = labels.len();
    LabeledDataset::from_flat(n, SPAMBASE_KEPT_FEATURES, rows, labels)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize, path: &str) -> Result<u32> {
    let end = offset + 4;
    if end > bytes.len() {
        return Err(Error::MalformedData {
            path: path.into(),
            record: 0,
            msg: format!("file truncated at byte {offset}"),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

/// Load the digit-1-versus-7 slice of an MNIST IDX image/label file pair.
///
/// Keeps only digits 1 (label -1) and 7 (label +1); pixel values are scaled
/// to `[0, 1]` by dividing by 255. Works for any image geometry declared in
/// the header (MNIST proper gives 28x28, hence 784 features).
pub fn load_mnist_1v7(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let img_name = images_path.display().to_string();
    let lbl_name = labels_path.display().to_string();

    let img = read_file(images_path)?;
    let magic = read_be_u32(&img, 0, &img_name)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::MalformedData {
            path: img_name,
            record: 0,
            msg: format!("bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"),
        });
    }
    let n_img = read_be_u32(&img, 4, &img_name)? as usize;
    let rows = read_be_u32(&img, 8, &img_name)? as usize;
    let cols = read_be_u32(&img, 12, &img_name)? as usize;
    let d = rows * cols;
    let pixels = &img[16.min(img.len())..];
    if pixels.len() != n_img * d {
        return Err(Error::MalformedData {
            path: img_name,
            record: 0,
            msg: format!(
                "pixel payload holds {} bytes, header declares {} x {} x {}",
                pixels.len(),
                n_img,
                rows,
                cols
            ),
        });
    }

    let lbl = read_file(labels_path)?;
    let magic = read_be_u32(&lbl, 0, &lbl_name)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::MalformedData {
            path: lbl_name,
            record: 0,
            msg: format!("bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"),
        });
    }
    let n_lbl = read_be_u32(&lbl, 4, &lbl_name)? as usize;
    let label_bytes = &lbl[8.min(lbl.len())..];
    if label_bytes.len() != n_lbl {
        return Err(Error::MalformedData {
            path: lbl_name,
            record: 0,
            msg: format!(
                "label payload holds {} bytes, header declares {}",
                label_bytes.len(),
                n_lbl
            ),
        });
    }
    if n_img != n_lbl {
        return Err(Error::MalformedData {
            path: img_name,
            record: 0,
            msg: format!("{n_img} images but {n_lbl} labels"),
        });
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_img {
        let digit = label_bytes[i];
        let label = match digit {
            1 => -1.0,
            7 => 1.0,
            _ => continue,
        };
        features.extend(
            pixels[i * d..(i + 1) * d]
                .iter()
                .map(|&p| f64::from(p) / 255.0),
        );
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} contains no digit-1 or digit-7 examples",
            images_path.display()
        )));
    }
    let n = labels.len();
    LabeledDataset::from_flat(n, d, features, labels)
}
