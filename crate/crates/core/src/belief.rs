//! Representation stack for the high-dimension/low-sample regime: a ridge
//! teacher with cross-validated regularization, pseudo-labeling clamped to
//! the empirical label range, a weighted teacher-student network, and a
//! bootstrap ensemble whose member disagreement is the epistemic
//! uncertainty.

use crate::error::{Error, Result};
use crate::indices;
use crate::nn::{
    self, Activation, LayerSpec, Network, NetworkCheckpoint, TrainConfig, WeightedDataset,
};
use crate::rng::{derive_seed, seeded_rng};
use crate::synth::Spectrum;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Feature representation handed to the teacher, student, and ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// The ten spectral indices.
    Physics,
    /// Reflectance at every visible/NIR band (the SWIR anchor excluded).
    Raw,
    /// Indices concatenated with the raw bands.
    Combined,
}

/// Map spectra to the chosen feature matrix. All spectra must share a grid.
pub fn extract_features(kind: FeatureKind, spectra: &[Spectrum]) -> Result<Array2<f64>> {
    match kind {
        FeatureKind::Physics => indices::features_matrix(spectra),
        FeatureKind::Raw => raw_matrix(spectra),
        FeatureKind::Combined => {
            let phys = indices::features_matrix(spectra)?;
            let raw = raw_matrix(spectra)?;
            Ok(ndarray::concatenate(Axis(1), &[phys.view(), raw.view()])
                .expect("row counts match"))
        }
    }
}

fn raw_matrix(spectra: &[Spectrum]) -> Result<Array2<f64>> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::Shape("no spectra".into()))?;
    let bands = first.grid().visible_band_indices();
    let mut out = Array2::zeros((spectra.len(), bands.len()));
    for (i, s) in spectra.iter().enumerate() {
        if s.grid() != first.grid() {
            return Err(Error::Shape("spectra use different grids".into()));
        }
        for (j, &b) in bands.iter().enumerate() {
            out[[i, j]] = s.values()[b];
        }
    }
    Ok(out)
}

/// Per-feature z-scoring from training statistics. Constant features pass
/// through centered (scale 1) instead of exploding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let sd = x
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(col, &m)| {
                let v = col.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / n;
                let s = v.sqrt();
                if s < 1e-9 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Self {
            mean: mean.to_vec(),
            sd,
        }
    }

    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            sd: vec![1.0; width],
        }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "feature width {} does not match standardizer width {}",
                x.ncols(),
                self.mean.len()
            )));
        }
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.sd[j];
            }
        }
        Ok(out)
    }
}

/// Closed-form ridge regressor with an unpenalized intercept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub reg_strength: f64,
}

/// Solve the penalized normal equations on centered data. The intercept is
/// recovered from the means, so it carries no penalty.
pub fn fit_ridge(features: &Array2<f64>, targets: &Array1<f64>, reg: f64) -> Result<RidgeModel> {
    let (n, d) = (features.nrows(), features.ncols());
    if n < 2 {
        return Err(Error::Shape("ridge needs at least 2 rows".into()));
    }
    if n != targets.len() {
        return Err(Error::Shape("row counts disagree".into()));
    }
    if !(reg > 0.0) {
        return Err(Error::Config("reg_strength must be > 0".into()));
    }
    let x_mean = features.mean_axis(Axis(0)).expect("non-empty");
    let y_mean = targets.mean().expect("non-empty");
    let xc = features - &x_mean;
    let yc = targets - y_mean;

    let mut gram = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = xc.column(i).dot(&xc.column(j));
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
        gram[(i, i)] += reg;
    }
    let rhs = DVector::from_fn(d, |i, _| xc.column(i).dot(&yc));
    let chol = gram
        .cholesky()
        .expect("gram + reg*I is positive definite for reg > 0");
    let w = chol.solve(&rhs);
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - x_mean.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>();
    Ok(RidgeModel {
        weights,
        intercept,
        reg_strength: reg,
    })
}

impl RidgeModel {
    pub fn predict(&self, features: &Array2<f64>) -> Result<Array1<f64>> {
        if features.ncols() != self.weights.len() {
            return Err(Error::Shape(format!(
                "feature width {} does not match model width {}",
                features.ncols(),
                self.weights.len()
            )));
        }
        let w = ndarray::ArrayView1::from(&self.weights[..]);
        Ok(features.dot(&w) + self.intercept)
    }
}

/// Grid value minimizing mean validation MSE over shuffled folds; ties break
/// toward larger regularization.
pub fn ridge_cv(
    features: &Array2<f64>,
    targets: &Array1<f64>,
    reg_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let n = features.nrows();
    if folds < 2 {
        return Err(Error::Config("folds must be >= 2".into()));
    }
    if reg_grid.is_empty() {
        return Err(Error::Config("reg grid must be non-empty".into()));
    }
    if n < folds {
        return Err(Error::Config(format!("n = {n} < folds = {folds}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut seeded_rng(seed));

    let mut grid: Vec<f64> = reg_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut best = (f64::INFINITY, grid[0]);
    for &reg in &grid {
        let mut total = 0.0;
        for fold in 0..folds {
            let val: Vec<usize> = order
                .iter()
                .copied()
                .skip(fold)
                .step_by(folds)
                .collect();
            let train: Vec<usize> = order
                .iter()
                .copied()
                .enumerate()
                .filter(|(i, _)| i % folds != fold)
                .map(|(_, v)| v)
                .collect();
            let model = fit_ridge(
                &features.select(Axis(0), &train),
                &targets.select(Axis(0), &train),
                reg,
            )?;
            let pred = model.predict(&features.select(Axis(0), &val))?;
            let truth = targets.select(Axis(0), &val);
            total += (&pred - &truth).mapv(|r| r * r).mean().unwrap();
        }
        let mean = total / folds as f64;
        // `<=` so exact ties prefer the larger (later) regularization.
        if mean <= best.0 {
            best = (mean, reg);
        }
    }
    Ok(best.1)
}

/// Teacher predictions on the unlabeled pool, clamped to the empirical
/// training-label range. Pseudo samples train at weight 1.
#[derive(Debug, Clone)]
pub struct PseudoLabeledSet {
    pub features: Array2<f64>,
    pub labels: Array1<f64>,
    pub clamp_range: (f64, f64),
}

impl PseudoLabeledSet {
    pub const SAMPLE_WEIGHT: f64 = 1.0;

    pub fn empty(width: usize) -> Self {
        Self {
            features: Array2::zeros((0, width)),
            labels: Array1::zeros(0),
            clamp_range: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn pseudo_label(
    teacher: &RidgeModel,
    pool_features: &Array2<f64>,
    train_targets: &Array1<f64>,
) -> Result<PseudoLabeledSet> {
    if pool_features.nrows() == 0 {
        return Err(Error::Shape("unlabeled pool is empty".into()));
    }
    let lo = train_targets.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = train_targets
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let labels = teacher
        .predict(pool_features)?
        .mapv(|v| v.clamp(lo, hi));
    Ok(PseudoLabeledSet {
        features: pool_features.to_owned(),
        labels,
        clamp_range: (lo, hi),
    })
}

/// Student architecture and training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudentConfig {
    pub hidden: (usize, usize),
    pub dropout: f64,
    pub labeled_weight: f64,
    pub pseudo_weight: f64,
    pub train: TrainConfig,
}

impl Default for StudentConfig {
    fn default() -> Self {
        Self {
            hidden: (64, 32),
            dropout: 0.3,
            labeled_weight: 10.0,
            pseudo_weight: 1.0,
            train: TrainConfig {
                epochs: 200,
                batch_size: 64,
                learning_rate: 5e-3,
                seed: 0,
                optimizer: nn::OptimizerKind::default(),
            },
        }
    }
}

/// Weight-10 dataset over labeled samples (weight configurable).
pub fn labeled_dataset(
    features: &Array2<f64>,
    targets: &Array1<f64>,
    weight: f64,
) -> Result<WeightedDataset> {
    WeightedDataset::new(
        features.to_owned(),
        targets.to_owned(),
        Array1::from_elem(targets.len(), weight),
    )
}

/// Train the two-hidden-layer student (batch norm, ReLU, dropout) on the
/// concatenation of the labeled anchors and the pseudo-labeled pool.
pub fn train_student(
    labeled: &WeightedDataset,
    pseudo: &PseudoLabeledSet,
    cfg: &StudentConfig,
) -> Result<Network> {
    let width = labeled.inputs.ncols();
    let data = if pseudo.is_empty() {
        labeled.clone()
    } else {
        let pseudo_data = WeightedDataset::new(
            pseudo.features.clone(),
            pseudo.labels.clone(),
            Array1::from_elem(pseudo.len(), cfg.pseudo_weight),
        )?;
        labeled.concat(&pseudo_data)?
    };
    let specs = [
        LayerSpec::new(width, cfg.hidden.0, Activation::Relu)
            .with_batch_norm()
            .with_dropout(cfg.dropout),
        LayerSpec::new(cfg.hidden.0, cfg.hidden.1, Activation::Relu)
            .with_batch_norm()
            .with_dropout(cfg.dropout),
        LayerSpec::new(cfg.hidden.1, 1, Activation::Identity),
    ];
    let net = Network::new(&specs, derive_seed(cfg.train.seed, "student_init", 0))?;
    nn::train(net, &data, &cfg.train)
}

/// Ensemble fitting hyperparameters. Members stay shallow: one hidden layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeliefConfig {
    pub members: usize,
    pub feature_kind: FeatureKind,
    pub hidden: usize,
    pub standardize: bool,
    pub train: TrainConfig,
}

impl Default for BeliefConfig {
    fn default() -> Self {
        Self {
            members: 10,
            feature_kind: FeatureKind::Physics,
            hidden: 32,
            standardize: true,
            train: TrainConfig {
                epochs: 300,
                batch_size: 16,
                learning_rate: 1e-2,
                seed: 0,
                optimizer: nn::OptimizerKind::default(),
            },
        }
    }
}

/// Bootstrap ensemble: mean prediction is the belief, member disagreement
/// (population standard deviation) is the uncertainty.
#[derive(Debug, Clone)]
pub struct BeliefEnsemble {
    members: Vec<Network>,
    feature_kind: FeatureKind,
    scaler: Standardizer,
    clamp_range: (f64, f64),
    target_mean: f64,
    target_sd: f64,
}

impl BeliefEnsemble {
    /// Assemble directly from trained members; test hooks and custom
    /// pipelines use this. Members must share layer shapes.
    pub fn from_members(
        members: Vec<Network>,
        feature_kind: FeatureKind,
        scaler: Standardizer,
        clamp_range: (f64, f64),
        target_mean: f64,
        target_sd: f64,
    ) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Shape("ensemble needs at least one member".into()))?;
        if members.iter().any(|m| m.specs() != first.specs()) {
            return Err(Error::Shape("ensemble members must share layer shape".into()));
        }
        if first.input_width() != scaler.mean.len() {
            return Err(Error::Shape(
                "standardizer width does not match member input width".into(),
            ));
        }
        Ok(Self {
            members,
            feature_kind,
            scaler,
            clamp_range,
            target_mean,
            target_sd,
        })
    }

    pub fn members(&self) -> &[Network] {
        &self.members
    }

    pub fn feature_kind(&self) -> FeatureKind {
        self.feature_kind
    }

    pub fn scaler(&self) -> &Standardizer {
        &self.scaler
    }

    pub fn clamp_range(&self) -> (f64, f64) {
        self.clamp_range
    }

    pub fn target_stats(&self) -> (f64, f64) {
        (self.target_mean, self.target_sd)
    }

    /// Belief mean and disagreement at each feature row. The variance is the
    /// population form (divide by member count), matching the definition of
    /// disagreement rather than a sample estimate.
    pub fn predict(&self, features: &Array2<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        let z = self.scaler.transform(features)?;
        let m = self.members.len() as f64;
        let mut mu = Array1::zeros(features.nrows());
        let mut m2 = Array1::zeros(features.nrows());
        let mut outputs = Vec::with_capacity(self.members.len());
        for member in &self.members {
            let out = member.predict(&z)?;
            mu += &out;
            outputs.push(out);
        }
        mu.mapv_inplace(|v| v / m);
        for out in &outputs {
            m2 += &(out - &mu).mapv(|d| d * d);
        }
        let mut sigma = m2.mapv(|v| (v / m).sqrt());
        // Disagreement is exactly zero when every member emits the same
        // value; don't let the mean's rounding manufacture a tiny sigma.
        for i in 0..sigma.len() {
            if outputs.iter().all(|o| o[i] == outputs[0][i]) {
                sigma[i] = 0.0;
                mu[i] = outputs[0][i];
            }
        }
        Ok((mu, sigma))
    }

    /// Feature extraction plus [`BeliefEnsemble::predict`].
    pub fn predict_spectra(&self, spectra: &[Spectrum]) -> Result<(Array1<f64>, Array1<f64>)> {
        let features = extract_features(self.feature_kind, spectra)?;
        self.predict(&features)
    }
}

/// Fit a bootstrap ensemble: each member trains on an independent
/// with-replacement resample of size `n`, with a member-specific seed.
pub fn fit_ensemble(
    features: &Array2<f64>,
    targets: &Array1<f64>,
    cfg: &BeliefConfig,
    seed: u64,
) -> Result<BeliefEnsemble> {
    if cfg.members == 0 {
        return Err(Error::Config("ensemble needs at least one member".into()));
    }
    let n = features.nrows();
    if n == 0 || n != targets.len() {
        return Err(Error::Shape("features/targets disagree or are empty".into()));
    }
    let width = features.ncols();
    let scaler = if cfg.standardize {
        Standardizer::fit(features)
    } else {
        Standardizer::identity(width)
    };
    let z = scaler.transform(features)?;

    let mut members = Vec::with_capacity(cfg.members);
    for m in 0..cfg.members {
        let mut rng = seeded_rng(derive_seed(seed, "bootstrap", m as u64));
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let x = z.select(Axis(0), &idx);
        let y = targets.select(Axis(0), &idx);
        let data = WeightedDataset::uniform(x, y)?;
        let specs = [
            LayerSpec::new(width, cfg.hidden, Activation::Relu),
            LayerSpec::new(cfg.hidden, 1, Activation::Identity),
        ];
        let net = Network::new(&specs, derive_seed(seed, "member_init", m as u64))?;
        let train_cfg = TrainConfig {
            seed: derive_seed(seed, "member_train", m as u64),
            ..cfg.train
        };
        members.push(nn::train(net, &data, &train_cfg)?);
    }
    let lo = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = targets.mean().unwrap();
    let sd = ((targets - mean).mapv(|d| d * d).mean().unwrap()).sqrt();
    BeliefEnsemble::from_members(
        members,
        cfg.feature_kind,
        scaler,
        (lo, hi),
        mean,
        sd.max(1e-9),
    )
}

/// Fit an ensemble straight from spectra.
pub fn fit_belief(
    spectra: &[Spectrum],
    targets: &Array1<f64>,
    cfg: &BeliefConfig,
    seed: u64,
) -> Result<BeliefEnsemble> {
    let features = extract_features(cfg.feature_kind, spectra)?;
    fit_ensemble(&features, targets, cfg, seed)
}

#[derive(Debug, Serialize, Deserialize)]
struct BeliefFile {
    format_version: u32,
    feature_kind: FeatureKind,
    scaler: Standardizer,
    clamp_range: (f64, f64),
    target_mean: f64,
    target_sd: f64,
    members: Vec<NetworkCheckpoint>,
}

/// Serialize the ensemble: manifest plus one network checkpoint per member.
pub fn save_belief(ensemble: &BeliefEnsemble, path: &Path) -> Result<()> {
    let file = BeliefFile {
        format_version: 1,
        feature_kind: ensemble.feature_kind,
        scaler: ensemble.scaler.clone(),
        clamp_range: ensemble.clamp_range,
        target_mean: ensemble.target_mean,
        target_sd: ensemble.target_sd,
        members: ensemble.members.iter().map(NetworkCheckpoint::from).collect(),
    };
    let out = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(out), &file)?;
    Ok(())
}

pub fn load_belief(path: &Path) -> Result<BeliefEnsemble> {
    let file: BeliefFile = serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(path)?,
    ))?;
    if file.format_version != 1 {
        return Err(Error::Config(format!(
            "unsupported belief format version {}",
            file.format_version
        )));
    }
    let members = file
        .members
        .into_iter()
        .map(Network::try_from)
        .collect::<Result<Vec<_>>>()?;
    BeliefEnsemble::from_members(
        members,
        file.feature_kind,
        file.scaler,
        file.clamp_range,
        file.target_mean,
        file.target_sd,
    )
}
