//! Synthetic lake scenes: a spatially correlated concentration field over
//! candidate stations plus per-station hyperspectral reflectance from a
//! saturating two-endmember forward model.
//!
//! The forward model is `rho(l) = rho_w(l) + u * delta(l) + noise`, where
//! `u = c / (c + c_half)` saturates with concentration `c`. The endmember
//! tables are pinned at the control wavelengths below and interpolated onto
//! the working grid, with signs chosen so every downstream index moves in
//! its physically expected direction as a bloom intensifies.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// Control wavelengths (nm) referenced by the spectral indices, plus the
/// short-wave-infrared anchor used by the floating-algae baseline.
pub const CONTROL_NM: [f64; 10] = [
    443.0, 555.0, 620.0, 665.0, 680.0, 681.0, 709.0, 753.0, 865.0, 1240.0,
];

/// Default short-wave-infrared anchor wavelength (nm).
pub const SWIR_ANCHOR_NM: f64 = 1240.0;

/// Clear-water reflectance at the control wavelengths.
const RHO_WATER: [f64; 10] = [
    0.020, 0.015, 0.008, 0.006, 0.0058, 0.0058, 0.004, 0.002, 0.001, 0.0005,
];

/// Bloom endmember response at the control wavelengths.
const DELTA_BLOOM: [f64; 10] = [
    -0.010, 0.004, -0.004, -0.004, 0.001, 0.004, 0.010, 0.002, 0.006, 0.0,
];

/// Diagonal jitter added to the field covariance before factorization.
const COV_JITTER: f64 = 1e-10;

/// Strictly increasing wavelength grid covering the control range and the
/// short-wave-infrared anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthGrid {
    nm: Vec<f64>,
}

impl WavelengthGrid {
    pub fn new(nm: Vec<f64>) -> Result<Self> {
        if nm.len() < 2 {
            return Err(Error::Config("grid needs at least two bands".into()));
        }
        if nm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid must be strictly increasing".into()));
        }
        let (lo, hi) = (nm[0], *nm.last().unwrap());
        if lo > CONTROL_NM[0] || hi < SWIR_ANCHOR_NM {
            return Err(Error::Config(format!(
                "grid [{lo}, {hi}] must bracket the control wavelengths and the \
                 {SWIR_ANCHOR_NM} nm anchor"
            )));
        }
        Ok(Self { nm })
    }

    /// `n_visible` evenly spaced bands over 400-900 nm plus the SWIR anchor.
    /// The visible/NIR count is the raw feature dimension downstream.
    pub fn standard(n_visible: usize) -> Self {
        let step = 500.0 / (n_visible - 1) as f64;
        let mut nm: Vec<f64> = (0..n_visible).map(|i| 400.0 + step * i as f64).collect();
        nm.push(SWIR_ANCHOR_NM);
        Self::new(nm).expect("standard grid is valid")
    }

    /// Exactly the ten control wavelengths; index values on this grid equal
    /// the endmember tables with no interpolation error.
    pub fn control_points() -> Self {
        Self::new(CONTROL_NM.to_vec()).expect("control grid is valid")
    }

    pub fn len(&self) -> usize {
        self.nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nm.is_empty()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.nm
    }

    /// Bands at or below 900 nm; the "raw" feature set excludes the anchor.
    pub fn visible_band_indices(&self) -> Vec<usize> {
        self.nm
            .iter()
            .enumerate()
            .filter(|(_, &w)| w <= 900.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Bracketing band indices and interpolation fraction for `nm`.
    pub fn bracket(&self, nm: f64) -> Result<(usize, usize, f64)> {
        let (lo, hi) = (self.nm[0], *self.nm.last().unwrap());
        if !(lo..=hi).contains(&nm) {
            return Err(Error::WavelengthOutOfRange {
                wavelength_nm: nm,
                lo,
                hi,
            });
        }
        match self.nm.binary_search_by(|w| w.partial_cmp(&nm).unwrap()) {
            Ok(i) => Ok((i, i, 0.0)),
            Err(i) => {
                let (a, b) = (i - 1, i);
                let t = (nm - self.nm[a]) / (self.nm[b] - self.nm[a]);
                Ok((a, b, t))
            }
        }
    }
}

/// Reflectance over a wavelength grid; values are dimensionless and >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Arc<WavelengthGrid>,
    reflectance: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: Arc<WavelengthGrid>, reflectance: Vec<f64>) -> Result<Self> {
        if reflectance.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} reflectance values for a {}-band grid",
                reflectance.len(),
                grid.len()
            )));
        }
        if reflectance.iter().any(|&r| !r.is_finite() || r < 0.0) {
            return Err(Error::Shape("reflectance must be finite and >= 0".into()));
        }
        Ok(Self { grid, reflectance })
    }

    pub fn grid(&self) -> &Arc<WavelengthGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.reflectance
    }
}

/// Saturating two-endmember reflectance model on a fixed grid.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    grid: Arc<WavelengthGrid>,
    rho_w: Vec<f64>,
    delta: Vec<f64>,
    c_half: f64,
}

/// Piecewise-linear interpolation of a control-wavelength table, clamped at
/// the table ends.
fn interp_table(table: &[f64; 10], nm: f64) -> f64 {
    if nm <= CONTROL_NM[0] {
        return table[0];
    }
    if nm >= CONTROL_NM[9] {
        return table[9];
    }
    let i = CONTROL_NM.partition_point(|&w| w <= nm);
    let (a, b) = (i - 1, i);
    let t = (nm - CONTROL_NM[a]) / (CONTROL_NM[b] - CONTROL_NM[a]);
    table[a] + t * (table[b] - table[a])
}

impl ForwardModel {
    /// `delta_scale` perturbs the bloom endmember; used to emulate a shifted
    /// acquisition year in the ablation experiments.
    pub fn new(grid: Arc<WavelengthGrid>, c_half: f64, delta_scale: f64) -> Result<Self> {
        if c_half <= 0.0 {
            return Err(Error::Config("c_half must be > 0".into()));
        }
        let rho_w = grid
            .wavelengths()
            .iter()
            .map(|&nm| interp_table(&RHO_WATER, nm))
            .collect();
        let delta = grid
            .wavelengths()
            .iter()
            .map(|&nm| delta_scale * interp_table(&DELTA_BLOOM, nm))
            .collect();
        Ok(Self {
            grid,
            rho_w,
            delta,
            c_half,
        })
    }

    pub fn grid(&self) -> &Arc<WavelengthGrid> {
        &self.grid
    }

    /// Saturation level `u = c / (c + c_half)` in `[0, 1)`.
    pub fn saturation(&self, concentration: f64) -> f64 {
        concentration / (concentration + self.c_half)
    }

    /// Render one spectrum; per-band Gaussian noise, clipped at zero.
    pub fn reflectance_of(&self, concentration: f64, noise_sd: f64, seed: u64) -> Result<Spectrum> {
        if concentration < 0.0 {
            return Err(Error::Config("concentration must be >= 0".into()));
        }
        if noise_sd < 0.0 {
            return Err(Error::Config("noise_sd must be >= 0".into()));
        }
        let u = self.saturation(concentration);
        let mut rng = seeded_rng(seed);
        let values = self
            .rho_w
            .iter()
            .zip(&self.delta)
            .map(|(&w, &d)| {
                let noise = if noise_sd > 0.0 {
                    noise_sd * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                (w + u * d + noise).max(0.0)
            })
            .collect();
        Spectrum::new(self.grid.clone(), values)
    }
}

/// Station layout in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Halton low-discrepancy sequence (bases 2 and 3, skipping index 0).
    Halton,
    /// Fixed eight-station layout for reproducible baselines.
    WesternBasin8,
}

/// The named eight-station preset.
const WESTERN_BASIN_8: [(f64, f64); 8] = [
    (0.12, 0.62), (0.25, 0.35), (0.38, 0.78), (0.47, 0.20),
    (0.58, 0.55), (0.70, 0.85), (0.81, 0.30), (0.92, 0.66),
];

fn van_der_corput(mut index: usize, base: usize) -> f64 {
    let mut result = 0.0;
    let mut denom = 1.0;
    while index > 0 {
        denom *= base as f64;
        result += (index % base) as f64 / denom;
        index /= base;
    }
    result
}

/// Deterministic station coordinates for a layout.
pub fn station_layout(layout: Layout, n_stations: usize) -> Result<Vec<(f64, f64)>> {
    match layout {
        Layout::Halton => Ok((1..=n_stations)
            .map(|i| (van_der_corput(i, 2), van_der_corput(i, 3)))
            .collect()),
        Layout::WesternBasin8 => {
            if n_stations != 8 {
                return Err(Error::Config(format!(
                    "western_basin_8 layout is fixed at 8 stations, requested {n_stations}"
                )));
            }
            Ok(WESTERN_BASIN_8.to_vec())
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub n_stations: usize,
    pub correlation_length: f64,
    /// Multiplies the log-normal field; the marginal is `scale * exp(N(0,1))`.
    pub scale: f64,
    pub bloom_threshold: f64,
    pub layout: Layout,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            n_stations: 8,
            correlation_length: 0.4,
            scale: 1.0,
            bloom_threshold: 1.5,
            layout: Layout::Halton,
        }
    }
}

/// Ground-truth concentrations at fixed station coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationField {
    pub station_coords: Vec<(f64, f64)>,
    pub truth: Vec<f64>,
    pub bloom_threshold: f64,
    pub scale: f64,
}

impl ConcentrationField {
    pub fn n_stations(&self) -> usize {
        self.truth.len()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (xa, ya) = self.station_coords[a];
        let (xb, yb) = self.station_coords[b];
        ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt()
    }

    /// Scene diameter: the maximum pairwise station distance.
    pub fn max_pairwise_distance(&self) -> f64 {
        let n = self.n_stations();
        let mut best = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }

    /// Log-field values `g = ln(truth / scale)`.
    pub fn log_field(&self) -> Vec<f64> {
        self.truth.iter().map(|&t| (t / self.scale).ln()).collect()
    }
}

/// Draw a concentration field: stations from the layout, log-field from a
/// zero-mean Gaussian process with exponential covariance
/// `exp(-dist / correlation_length)`, sampled by Cholesky factorization.
pub fn generate_field_cfg(cfg: &FieldConfig, seed: u64) -> Result<ConcentrationField> {
    if cfg.n_stations < 2 {
        return Err(Error::Config("need at least 2 stations".into()));
    }
    if !(cfg.correlation_length > 0.0) {
        return Err(Error::Config("correlation_length must be > 0".into()));
    }
    let coords = station_layout(cfg.layout, cfg.n_stations)?;
    let n = cfg.n_stations;
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let (xi, yi) = coords[i];
        let (xj, yj) = coords[j];
        let d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
        (-d / cfg.correlation_length).exp() + if i == j { COV_JITTER } else { 0.0 }
    });
    let chol = cov.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let mut rng = seeded_rng(seed);
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let g = chol.l() * z;
    let truth = g.iter().map(|&gi| cfg.scale * gi.exp()).collect();
    Ok(ConcentrationField {
        station_coords: coords,
        truth,
        bloom_threshold: cfg.bloom_threshold,
        scale: cfg.scale,
    })
}

/// [`generate_field_cfg`] with default scale, threshold, and layout.
pub fn generate_field(
    n_stations: usize,
    correlation_length: f64,
    seed: u64,
) -> Result<ConcentrationField> {
    generate_field_cfg(
        &FieldConfig {
            n_stations,
            correlation_length,
            ..FieldConfig::default()
        },
        seed,
    )
}

/// One sampling event: per-station spectra plus an unlabeled spectrum pool.
#[derive(Debug, Clone)]
pub struct Scene {
    pub field: ConcentrationField,
    pub spectra: Vec<Spectrum>,
    pub unlabeled: Vec<Spectrum>,
    pub seed: u64,
}

impl Scene {
    pub fn n_stations(&self) -> usize {
        self.field.n_stations()
    }
}

/// Render station spectra from the field truths and draw an unlabeled pool
/// from the field's marginal distribution (labels discarded).
pub fn render_scene(
    field: &ConcentrationField,
    model: &ForwardModel,
    unlabeled_count: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Scene> {
    let spectra = field
        .truth
        .iter()
        .enumerate()
        .map(|(i, &c)| model.reflectance_of(c, noise_sd, derive_seed(seed, "station", i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut pool_rng = seeded_rng(derive_seed(seed, "pool", 0));
    let unlabeled = (0..unlabeled_count)
        .map(|i| {
            let c = field.scale * pool_rng.sample::<f64, _>(StandardNormal).exp();
            model.reflectance_of(c, noise_sd, derive_seed(seed, "pool_spectrum", i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scene {
        field: field.clone(),
        spectra,
        unlabeled,
        seed,
    })
}

/// Labeled draws from the marginal concentration distribution; the
/// synthetic stand-in for historical station measurements.
pub fn sample_labeled(
    model: &ForwardModel,
    n: usize,
    noise_sd: f64,
    scale: f64,
    seed: u64,
) -> Result<(Vec<Spectrum>, Vec<f64>)> {
    let mut rng = seeded_rng(derive_seed(seed, "labeled", 0));
    let mut spectra = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let c = scale * rng.sample::<f64, _>(StandardNormal).exp();
        spectra.push(model.reflectance_of(c, noise_sd, derive_seed(seed, "labeled_spectrum", i as u64))?);
        targets.push(c);
    }
    Ok((spectra, targets))
}

/// Everything needed to draw i.i.d. scenes over a fixed station layout.
#[derive(Debug, Clone)]
pub struct SceneGenerator {
    pub field_cfg: FieldConfig,
    pub model: ForwardModel,
    pub noise_sd: f64,
    pub unlabeled_count: usize,
}

impl SceneGenerator {
    pub fn scene(&self, seed: u64) -> Result<Scene> {
        let field = generate_field_cfg(&self.field_cfg, derive_seed(seed, "field", 0))?;
        render_scene(
            &field,
            &self.model,
            self.unlabeled_count,
            self.noise_sd,
            derive_seed(seed, "noise", 0),
        )
    }
}

/// Portable scene file: stations, truths, grid, spectra matrices.
#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    format_version: u32,
    seed: u64,
    scale: f64,
    bloom_threshold: f64,
    station_coords: Vec<(f64, f64)>,
    truth: Vec<f64>,
    grid_nm: Vec<f64>,
    station_reflectance: Vec<Vec<f64>>,
    unlabeled_reflectance: Vec<Vec<f64>>,
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    let grid = scene
        .spectra
        .first()
        .map(|s| s.grid().wavelengths().to_vec())
        .unwrap_or_default();
    let file = SceneFile {
        format_version: 1,
        seed: scene.seed,
        scale: scene.field.scale,
        bloom_threshold: scene.field.bloom_threshold,
        station_coords: scene.field.station_coords.clone(),
        truth: scene.field.truth.clone(),
        grid_nm: grid,
        station_reflectance: scene.spectra.iter().map(|s| s.values().to_vec()).collect(),
        unlabeled_reflectance: scene.unlabeled.iter().map(|s| s.values().to_vec()).collect(),
    };
    let out = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(out), &file)?;
    Ok(())
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let file: SceneFile = serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(path)?,
    ))?;
    if file.format_version != 1 {
        return Err(Error::Config(format!(
            "unsupported scene format version {}",
            file.format_version
        )));
    }
    let grid = Arc::new(WavelengthGrid::new(file.grid_nm)?);
    let spectra = file
        .station_reflectance
        .into_iter()
        .map(|v| Spectrum::new(grid.clone(), v))
        .collect::<Result<Vec<_>>>()?;
    let unlabeled = file
        .unlabeled_reflectance
        .into_iter()
        .map(|v| Spectrum::new(grid.clone(), v))
        .collect::<Result<Vec<_>>>()?;
    if spectra.len() != file.truth.len() || file.truth.len() != file.station_coords.len() {
        return Err(Error::Shape("station counts disagree in scene file".into()));
    }
    Ok(Scene {
        field: ConcentrationField {
            station_coords: file.station_coords,
            truth: file.truth,
            bloom_threshold: file.bloom_threshold,
            scale: file.scale,
        },
        spectra,
        unlabeled,
        seed: file.seed,
    })
}

/// CSV rows of `(station, x, y, truth)`.
pub fn field_truth_csv(field: &ConcentrationField) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["station", "x", "y", "truth"])?;
    for (i, ((x, y), t)) in field.station_coords.iter().zip(&field.truth).enumerate() {
        w.write_record(&[i.to_string(), x.to_string(), y.to_string(), t.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("utf8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn control_model() -> ForwardModel {
        ForwardModel::new(Arc::new(WavelengthGrid::control_points()), 1.0, 1.0).unwrap()
    }

    #[test]
    fn clear_water_matches_table_exactly() {
        let model = control_model();
        let s = model.reflectance_of(0.0, 0.0, 1).unwrap();
        assert_eq!(s.values(), &RHO_WATER);
    }

    #[test]
    fn half_saturation_is_band_midpoint() {
        let model = control_model();
        let clear = model.reflectance_of(0.0, 0.0, 1).unwrap();
        // u = 0.5 at c = c_half; extreme c approximates u = 1.
        let mid = model.reflectance_of(1.0, 0.0, 1).unwrap();
        for ((m, c), (w, d)) in mid
            .values()
            .iter()
            .zip(clear.values())
            .zip(RHO_WATER.iter().zip(DELTA_BLOOM.iter()))
        {
            let full = w + d;
            assert_abs_diff_eq!(*m, (c + full) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn saturated_bands_approach_rho_plus_delta() {
        let model = control_model();
        let s = model.reflectance_of(1e12, 0.0, 1).unwrap();
        for (v, (w, d)) in s.values().iter().zip(RHO_WATER.iter().zip(DELTA_BLOOM.iter())) {
            assert_abs_diff_eq!(*v, (w + d).max(0.0), epsilon = 1e-9);
        }
    }

    #[test]
    fn reflectance_nonnegative_under_heavy_noise() {
        let model = control_model();
        for seed in 0..50 {
            let s = model.reflectance_of(2.0, 0.05, seed).unwrap();
            assert!(s.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn bands_move_monotonically_with_concentration() {
        let grid = Arc::new(WavelengthGrid::standard(117));
        let model = ForwardModel::new(grid, 1.0, 1.0).unwrap();
        let cs = [0.0, 0.3, 1.0, 3.0, 10.0, 100.0];
        let spectra: Vec<_> = cs
            .iter()
            .map(|&c| model.reflectance_of(c, 0.0, 0).unwrap())
            .collect();
        for band in 0..model.grid().len() {
            let sign = model.delta[band].signum();
            for pair in spectra.windows(2) {
                let diff = pair[1].values()[band] - pair[0].values()[band];
                if sign > 0.0 {
                    assert!(diff >= -1e-15);
                } else if sign < 0.0 {
                    assert!(diff <= 1e-15);
                } else {
                    assert_abs_diff_eq!(diff, 0.0, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn field_is_deterministic_per_seed() {
        let a = generate_field(8, 0.4, 99).unwrap();
        let b = generate_field(8, 0.4, 99).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.station_coords, b.station_coords);
        let c = generate_field(8, 0.4, 100).unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn infinite_correlation_flattens_the_field() {
        let field = generate_field(8, 1e6, 5).unwrap();
        let mean = field.truth.iter().sum::<f64>() / 8.0;
        let sd = (field.truth.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / 8.0).sqrt();
        assert!(sd / mean < 0.01, "cv = {}", sd / mean);
    }

    #[test]
    fn nearby_stations_correlate_more_strongly() {
        // Monte-Carlo over seeds with fixed Halton coordinates.
        let probe = generate_field(8, 0.3, 0).unwrap();
        let mut near = (0, 1, f64::INFINITY);
        let mut far = (0, 1, 0.0_f64);
        for i in 0..8 {
            for j in (i + 1)..8 {
                let d = probe.distance(i, j);
                if d < near.2 {
                    near = (i, j, d);
                }
                if d > far.2 {
                    far = (i, j, d);
                }
            }
        }
        let mut gs: Vec<Vec<f64>> = Vec::new();
        for seed in 0..500 {
            gs.push(generate_field(8, 0.3, seed).unwrap().log_field());
        }
        let corr = |a: usize, b: usize| {
            let xa: Vec<f64> = gs.iter().map(|g| g[a]).collect();
            let xb: Vec<f64> = gs.iter().map(|g| g[b]).collect();
            let ma = xa.iter().sum::<f64>() / xa.len() as f64;
            let mb = xb.iter().sum::<f64>() / xb.len() as f64;
            let cov = xa
                .iter()
                .zip(&xb)
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>();
            let va = xa.iter().map(|x| (x - ma).powi(2)).sum::<f64>();
            let vb = xb.iter().map(|y| (y - mb).powi(2)).sum::<f64>();
            cov / (va * vb).sqrt()
        };
        let c_near = corr(near.0, near.1);
        let c_far = corr(far.0, far.1);
        assert!(
            c_near > c_far,
            "near pair corr {c_near} should exceed far pair corr {c_far}"
        );
    }

    #[test]
    fn render_seed_only_controls_noise() {
        let grid = Arc::new(WavelengthGrid::standard(117));
        let model = ForwardModel::new(grid, 1.0, 1.0).unwrap();
        let field = generate_field(8, 0.4, 123).unwrap();
        let a = render_scene(&field, &model, 0, 2e-4, 1).unwrap();
        let b = render_scene(&field, &model, 0, 2e-4, 2).unwrap();
        assert_eq!(a.field.truth, b.field.truth);
        assert_ne!(a.spectra[0].values(), b.spectra[0].values());
    }

    #[test]
    fn empty_pool_is_valid() {
        let model = control_model();
        let field = generate_field(4, 0.4, 7).unwrap();
        let scene = render_scene(&field, &model, 0, 0.0, 9).unwrap();
        assert!(scene.unlabeled.is_empty());
        assert_eq!(scene.spectra.len(), 4);
    }

    #[test]
    fn noiseless_station_spectra_are_exact_forward_outputs() {
        let model = control_model();
        let field = generate_field(4, 0.4, 7).unwrap();
        let scene = render_scene(&field, &model, 0, 0.0, 9).unwrap();
        for (s, &c) in scene.spectra.iter().zip(&field.truth) {
            let expected = model.reflectance_of(c, 0.0, 0).unwrap();
            assert_eq!(s.values(), expected.values());
        }
    }

    #[test]
    fn scene_file_round_trip() {
        let grid = Arc::new(WavelengthGrid::standard(21));
        let model = ForwardModel::new(grid, 1.0, 1.0).unwrap();
        let field = generate_field(5, 0.4, 3).unwrap();
        let scene = render_scene(&field, &model, 7, 1e-4, 11).unwrap();
        let dir = std::env::temp_dir().join("bloomsense_scene_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("scene.json");
        save_scene(&scene, &path).unwrap();
        let loaded = load_scene(&path).unwrap();
        assert_eq!(scene.field.truth, loaded.field.truth);
        assert_eq!(scene.spectra[2].values(), loaded.spectra[2].values());
        assert_eq!(scene.unlabeled.len(), loaded.unlabeled.len());
    }

    #[test]
    fn halton_layout_is_fixed_and_distinct() {
        let a = station_layout(Layout::Halton, 50).unwrap();
        let b = station_layout(Layout::Halton, 50).unwrap();
        assert_eq!(a, b);
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                assert_ne!(a[i], a[j]);
            }
        }
    }

    #[test]
    fn grid_must_cover_control_range() {
        assert!(WavelengthGrid::new(vec![500.0, 900.0, 1240.0]).is_err());
        assert!(WavelengthGrid::new(vec![400.0, 900.0]).is_err());
        assert!(WavelengthGrid::new(vec![400.0, 400.0, 1240.0]).is_err());
        assert!(WavelengthGrid::new(vec![400.0, 650.0, 1240.0]).is_ok());
    }

    #[test]
    fn standard_grid_has_expected_raw_dimension() {
        let g = WavelengthGrid::standard(117);
        assert_eq!(g.len(), 118);
        assert_eq!(g.visible_band_indices().len(), 117);
        let g286 = WavelengthGrid::standard(286);
        assert_eq!(g286.visible_band_indices().len(), 286);
    }
}
