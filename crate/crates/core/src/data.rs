//! Multi-view datasets: model, manifest I/O, semi-supervised label splits and
//! a synthetic generator.
//!
//! A manifest is a `key = value` text file:
//!
//! ```text
//! # comments start with '#'
//! name = msrc-v1
//! classes = 7
//! labels = labels.txt
//! view.0 = color.txt
//! view.1 = gabor.txt
//! ```
//!
//! Relative paths resolve against the manifest's directory. View files use the
//! matrix text format; the labels file holds one base-10 class id per line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ndmath::{io, Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub name: String,
    /// One `m × n_v` feature matrix per view.
    pub views: Vec<Matrix>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl MultiViewDataset {
    pub fn new(
        name: impl Into<String>,
        views: Vec<Matrix>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            views,
            labels,
            num_classes,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::config("dataset needs at least one view"));
        }
        let m = self.labels.len();
        for (v, x) in self.views.iter().enumerate() {
            if x.rows() != m {
                return Err(Error::config(format!(
                    "view {v} has {} rows but there are {m} labels",
                    x.rows()
                )));
            }
            if x.cols() == 0 {
                return Err(Error::config(format!("view {v} has no features")));
            }
            if !x.is_finite() {
                return Err(Error::NonFinite(format!("features of view {v}")));
            }
        }
        if self.num_classes == 0 {
            return Err(Error::config("need at least one class"));
        }
        let counts = self.class_counts_checked()?;
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::config(format!("class {c} has no samples")));
        }
        Ok(())
    }

    fn class_counts_checked(&self) -> Result<Vec<usize>> {
        let mut counts = vec![0; self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            if y >= self.num_classes {
                return Err(Error::config(format!(
                    "label {y} of sample {i} out of range for {} classes",
                    self.num_classes
                )));
            }
            counts[y] += 1;
        }
        Ok(counts)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.class_counts_checked().expect("labels validated at construction")
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    /// Standardizes every column of every view to zero mean and unit
    /// (population) variance. Constant columns are only centered.
    pub fn standardize(&mut self) {
        for x in &mut self.views {
            standardize_columns(x);
        }
    }
}

fn standardize_columns(x: &mut Matrix) {
    let (m, n) = x.shape();
    if m == 0 {
        return;
    }
    for j in 0..n {
        let mean = (0..m).map(|i| x.get(i, j)).sum::<f64>() / m as f64;
        let var = (0..m).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / m as f64;
        let std = var.sqrt();
        for i in 0..m {
            let centered = x.get(i, j) - mean;
            x.set(i, j, if std > 0.0 { centered / std } else { centered });
        }
    }
}

/// Labeled index set `Ω` and its one-hot label matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelInfo {
    /// Strictly increasing sample indices.
    pub omega: Vec<usize>,
    /// `|Ω| × c` one-hot rows aligned with `omega`.
    pub onehot: Matrix,
    pub label_ratio: f64,
}

impl LabelInfo {
    /// Builds the one-hot matrix for an explicit index set.
    pub fn from_indices(dataset: &MultiViewDataset, mut omega: Vec<usize>, label_ratio: f64) -> Result<Self> {
        omega.sort_unstable();
        omega.dedup();
        if omega.is_empty() {
            return Err(Error::config("labeled set is empty"));
        }
        if let Some(&bad) = omega.iter().find(|&&i| i >= dataset.num_samples()) {
            return Err(Error::config(format!("labeled index {bad} out of range")));
        }
        let mut onehot = Matrix::zeros(omega.len(), dataset.num_classes);
        for (r, &i) in omega.iter().enumerate() {
            onehot.set(r, dataset.labels[i], 1.0);
        }
        Ok(Self {
            omega,
            onehot,
            label_ratio,
        })
    }

    /// Indices not in `Ω`, ascending.
    pub fn unlabeled(&self, m: usize) -> Vec<usize> {
        let mut mask = vec![false; m];
        for &i in &self.omega {
            mask[i] = true;
        }
        (0..m).filter(|&i| !mask[i]).collect()
    }
}

/// Stratified random split: per class, `round(ratio * class_size)` indices
/// (at least one).
pub fn split_labels(dataset: &MultiViewDataset, ratio: f64, seed: u64) -> Result<LabelInfo> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config(format!("label ratio must lie in (0, 1), got {ratio}")));
    }
    let m = dataset.num_samples();
    let c = dataset.num_classes;
    let target = (ratio * m as f64).round() as usize;
    if target < c {
        return Err(Error::config(format!(
            "label ratio {ratio} gives {target} labeled samples, fewer than the {c} classes"
        )));
    }
    let mut rng = SeededRng::from_u64(seed).fork(0x5eed_1abe);
    let mut omega = Vec::with_capacity(target + c);
    for class in 0..c {
        let mut members: Vec<usize> = (0..m).filter(|&i| dataset.labels[i] == class).collect();
        let take = ((ratio * members.len() as f64).round() as usize).clamp(1, members.len());
        rng.shuffle(&mut members);
        omega.extend_from_slice(&members[..take]);
    }
    LabelInfo::from_indices(dataset, omega, ratio)
}

/// Parameters for [`gen_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub samples: usize,
    pub classes: usize,
    /// Feature dimension of each view; its length is the number of views.
    pub dims: Vec<usize>,
    /// Gaussian noise std of each view.
    pub noise: Vec<f64>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            samples: 300,
            classes: 3,
            dims: vec![10, 8, 6],
            noise: vec![0.3, 0.5, 0.8],
            seed: 0,
        }
    }
}

/// Gaussian-blob multi-view data: per view, one standard-normal centroid per
/// class; each sample is its class centroid plus view-specific noise.
/// Labels cycle `0, 1, …, c-1` so classes are balanced.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<MultiViewDataset> {
    if cfg.classes == 0 || cfg.samples < 2 * cfg.classes {
        return Err(Error::config(format!(
            "need at least 2 samples per class ({} samples, {} classes)",
            cfg.samples, cfg.classes
        )));
    }
    if cfg.dims.is_empty() {
        return Err(Error::config("need at least one view"));
    }
    if cfg.dims.len() != cfg.noise.len() {
        return Err(Error::config(format!(
            "{} view dims but {} noise levels",
            cfg.dims.len(),
            cfg.noise.len()
        )));
    }
    if let Some(d) = cfg.dims.iter().find(|&&d| d < 2) {
        return Err(Error::config(format!("view dimension {d} < 2")));
    }
    if let Some(s) = cfg.noise.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::config(format!("invalid noise level {s}")));
    }

    let labels: Vec<usize> = (0..cfg.samples).map(|i| i % cfg.classes).collect();
    let base = SeededRng::from_u64(cfg.seed);
    let views = cfg
        .dims
        .iter()
        .zip(&cfg.noise)
        .enumerate()
        .map(|(v, (&dim, &noise))| {
            let mut rng = base.fork(v as u64 + 1);
            let centroids = rng.normal_matrix(cfg.classes, dim, 0.0, 1.0);
            Matrix::from_fn(cfg.samples, dim, |i, j| {
                centroids.get(labels[i], j) + rng.normal(0.0, noise)
            })
        })
        .collect();
    MultiViewDataset::new(
        format!("synthetic-m{}-c{}-s{}", cfg.samples, cfg.classes, cfg.seed),
        views,
        labels,
        cfg.classes,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Column-standardize every view after parsing.
    pub standardize: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { standardize: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub name: Option<String>,
    pub classes: usize,
    pub labels: PathBuf,
    pub views: Vec<PathBuf>,
}

/// Parses a manifest. Paths are returned resolved against its directory.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut name = None;
    let mut classes = None;
    let mut labels = None;
    let mut views = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(path, n + 1, "expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "name" => name = Some(value.to_string()),
            "classes" => {
                classes = Some(value.parse::<usize>().map_err(|e| {
                    Error::parse(path, n + 1, format!("bad class count `{value}`: {e}"))
                })?)
            }
            "labels" => labels = Some(dir.join(value)),
            _ => {
                let Some(idx) = key.strip_prefix("view.") else {
                    return Err(Error::parse(path, n + 1, format!("unknown key `{key}`")));
                };
                let idx: usize = idx
                    .parse()
                    .map_err(|e| Error::parse(path, n + 1, format!("bad view index `{idx}`: {e}")))?;
                if views.insert(idx, dir.join(value)).is_some() {
                    return Err(Error::parse(path, n + 1, format!("duplicate view.{idx}")));
                }
            }
        }
    }
    let missing = |what: &str| Error::parse(path, text.lines().count().max(1), format!("missing `{what}`"));
    Ok(Manifest {
        name,
        classes: classes.ok_or_else(|| missing("classes"))?,
        labels: labels.ok_or_else(|| missing("labels"))?,
        views: if views.is_empty() {
            return Err(missing("view.<i>"));
        } else {
            views.into_values().collect()
        },
    })
}

fn read_labels(path: &Path, classes: usize) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let y: usize = line
            .parse()
            .map_err(|e| Error::parse(path, n + 1, format!("bad label `{line}`: {e}")))?;
        if y >= classes {
            return Err(Error::parse(
                path,
                n + 1,
                format!("label {y} out of range for {classes} classes"),
            ));
        }
        labels.push(y);
    }
    Ok(labels)
}

/// Loads the dataset described by a manifest file.
pub fn load_dataset(manifest: impl AsRef<Path>, opts: LoadOptions) -> Result<MultiViewDataset> {
    let manifest_path = manifest.as_ref();
    let mf = read_manifest(manifest_path)?;
    let labels = read_labels(&mf.labels, mf.classes)?;
    let mut views = Vec::with_capacity(mf.views.len());
    for path in &mf.views {
        let x = io::read_matrix(path)?;
        if x.rows() != labels.len() {
            return Err(Error::parse(
                path,
                1,
                format!(
                    "view has {} rows but {} has {} labels",
                    x.rows(),
                    mf.labels.display(),
                    labels.len()
                ),
            ));
        }
        views.push(x);
    }
    let name = mf.name.unwrap_or_else(|| {
        manifest_path
            .file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
    });
    let mut ds = MultiViewDataset::new(name, views, labels, mf.classes)?;
    if opts.standardize {
        ds.standardize();
    }
    Ok(ds)
}

/// Writes views, labels and a manifest into `dir`; returns the manifest path.
pub fn write_dataset(dataset: &MultiViewDataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = format!(
        "name = {}\nclasses = {}\nlabels = labels.txt\n",
        dataset.name, dataset.num_classes
    );
    for (v, x) in dataset.views.iter().enumerate() {
        let file = format!("view{v}.txt");
        io::write_matrix(dir.join(&file), x)?;
        manifest.push_str(&format!("view.{v} = {file}\n"));
    }
    let labels: String = dataset.labels.iter().map(|y| format!("{y}\n")).collect();
    let labels_path = dir.join("labels.txt");
    fs::write(&labels_path, labels).map_err(|e| Error::io(&labels_path, e))?;
    let manifest_path = dir.join("manifest.txt");
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture(dir: &Path, rows: [usize; 2], labels: &str) -> PathBuf {
        for (v, &r) in rows.iter().enumerate() {
            let x = Matrix::from_fn(r, 3, |i, j| (i * 3 + j) as f64);
            io::write_matrix(dir.join(format!("v{v}.txt")), &x).unwrap();
        }
        fs::write(dir.join("labels.txt"), labels).unwrap();
        let mf = dir.join("manifest.txt");
        fs::write(
            &mf,
            "classes = 2\nlabels = labels.txt\nview.0 = v0.txt\nview.1 = v1.txt\n",
        )
        .unwrap();
        mf
    }

    #[test]
    fn loads_two_view_fixture() {
        let tmp = tempfile::tempdir().unwrap();
        let mf = fixture(tmp.path(), [4, 4], "0\n1\n0\n1\n");
        let ds = load_dataset(&mf, LoadOptions { standardize: false }).unwrap();
        assert_eq!(ds.num_samples(), 4);
        assert_eq!(ds.num_views(), 2);
        assert_eq!(ds.num_classes, 2);
        assert_eq!(ds.name, "manifest");
    }

    #[test]
    fn row_mismatch_names_file() {
        let tmp = tempfile::tempdir().unwrap();
        let mf = fixture(tmp.path(), [4, 5], "0\n1\n0\n1\n");
        let err = load_dataset(&mf, LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("v1.txt"), "{err}");
    }

    #[test]
    fn out_of_range_label_names_line() {
        let tmp = tempfile::tempdir().unwrap();
        let mf = fixture(tmp.path(), [4, 4], "0\n1\n7\n1\n");
        let err = load_dataset(&mf, LoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("labels.txt:3"), "{msg}");
    }

    #[test]
    fn missing_manifest_is_io_error() {
        let err = load_dataset("/nonexistent/missing.txt", LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("missing.txt"));
    }

    #[test]
    fn standardization() {
        let mut ds = MultiViewDataset::new(
            "s",
            vec![Matrix::from_rows(&[[1.0, 5.0], [3.0, 5.0]])],
            vec![0, 1],
            2,
        )
        .unwrap();
        ds.standardize();
        assert_eq!(ds.views[0], Matrix::from_rows(&[[-1.0, 0.0], [1.0, 0.0]]));
    }

    #[test]
    fn synthetic_is_balanced_and_deterministic() {
        let cfg = SyntheticConfig::default();
        let ds = gen_synthetic(&cfg).unwrap();
        assert_eq!(ds.class_counts(), vec![100, 100, 100]);
        assert_eq!(ds.view_dims(), vec![10, 8, 6]);
        assert_eq!(ds, gen_synthetic(&cfg).unwrap());
    }

    #[test]
    fn zero_noise_collapses_classes() {
        let cfg = SyntheticConfig {
            samples: 12,
            noise: vec![0.0, 0.0, 0.0],
            ..SyntheticConfig::default()
        };
        let ds = gen_synthetic(&cfg).unwrap();
        for x in &ds.views {
            for i in 0..12 {
                assert_eq!(x.row(i), x.row(i % 3));
            }
        }
    }

    #[test]
    fn synthetic_parameter_errors() {
        let bad = SyntheticConfig {
            samples: 5,
            ..SyntheticConfig::default()
        };
        assert!(gen_synthetic(&bad).is_err());
        let bad = SyntheticConfig {
            dims: vec![10, 1, 6],
            ..SyntheticConfig::default()
        };
        assert!(gen_synthetic(&bad).is_err());
    }

    #[test]
    fn split_one_per_class_on_tiny_set() {
        let ds = MultiViewDataset::new("t", vec![Matrix::zeros(4, 2)], vec![0, 1, 0, 1], 2).unwrap();
        let info = split_labels(&ds, 0.5, 3).unwrap();
        assert_eq!(info.omega.len(), 2);
        let classes: Vec<usize> = info.omega.iter().map(|&i| ds.labels[i]).collect();
        assert!(classes.contains(&0) && classes.contains(&1));
    }

    #[test]
    fn split_msrc_shape() {
        let labels: Vec<usize> = (0..210).map(|i| i % 7).collect();
        let ds = MultiViewDataset::new("msrc", vec![Matrix::zeros(210, 2)], labels, 7).unwrap();
        let info = split_labels(&ds, 0.10, 0).unwrap();
        assert_eq!(info.omega.len(), 21);
        let mut per_class = [0; 7];
        for &i in &info.omega {
            per_class[ds.labels[i]] += 1;
        }
        assert_eq!(per_class, [3; 7]);
        assert_eq!(info, split_labels(&ds, 0.10, 0).unwrap());
        assert!(split_labels(&ds, 0.01, 0).is_err());
        assert!(split_labels(&ds, 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_invariants(seed in 0u64..1000, ratio in 0.05f64..0.6) {
            let ds = gen_synthetic(&SyntheticConfig { samples: 60, ..SyntheticConfig::default() }).unwrap();
            let info = split_labels(&ds, ratio, seed).unwrap();
            prop_assert!(info.omega.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(info.omega.iter().all(|&i| i < 60));
            for c in 0..3 {
                prop_assert!(info.omega.iter().any(|&i| ds.labels[i] == c));
            }
            for (r, &i) in info.omega.iter().enumerate() {
                let row = info.onehot.row(r);
                prop_assert_eq!(row.iter().sum::<f64>(), 1.0);
                prop_assert_eq!(row[ds.labels[i]], 1.0);
            }
        }

        #[test]
        fn write_then_load_round_trips(seed in 0u64..50, samples in 6usize..20) {
            let ds = gen_synthetic(&SyntheticConfig { samples, seed, ..SyntheticConfig::default() }).unwrap();
            let tmp = tempfile::tempdir().unwrap();
            let mf = write_dataset(&ds, tmp.path()).unwrap();
            let back = load_dataset(&mf, LoadOptions { standardize: false }).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
