//! Ten bio-optical spectral indices mapping a reflectance spectrum to a
//! low-dimensional feature vector. Band lookups interpolate linearly so the
//! transform is robust to grid resolution.

use crate::error::{Error, Result};
use crate::synth::{Spectrum, SWIR_ANCHOR_NM};
use ndarray::Array2;

/// Feature order of [`PhysicsFeatures::values`] and of batch CSV headers.
pub const FEATURE_NAMES: [&str; 10] = [
    "ci", "ndci", "mci", "fai", "pc", "chl_red", "bg", "gr", "nir", "ndi",
];

/// Number of physics features.
pub const N_FEATURES: usize = 10;

/// Denominators smaller than this are treated as degenerate.
const MIN_DENOM: f64 = 1e-12;

/// The ten-dimensional index vector, ordered
/// `(CI, NDCI, MCI, FAI, PC, ChlRed, BG, GR, NIR, NDI)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsFeatures {
    pub values: [f64; N_FEATURES],
}

/// Reflectance at `wavelength_nm`, linearly interpolated between the two
/// bracketing grid bands; exact on-grid.
pub fn band_at(spectrum: &Spectrum, wavelength_nm: f64) -> Result<f64> {
    let (a, b, t) = spectrum.grid().bracket(wavelength_nm)?;
    let values = spectrum.values();
    Ok(values[a] + t * (values[b] - values[a]))
}

fn checked_div(num: f64, denom: f64, index: &'static str) -> Result<f64> {
    if denom.abs() < MIN_DENOM {
        return Err(Error::DegenerateSpectrum {
            index,
            min_abs: MIN_DENOM,
        });
    }
    Ok(num / denom)
}

/// Compute all ten indices with the default SWIR anchor.
pub fn compute_indices(spectrum: &Spectrum) -> Result<PhysicsFeatures> {
    compute_indices_with(spectrum, SWIR_ANCHOR_NM)
}

/// Compute all ten indices using `swir_nm` as the floating-algae baseline
/// anchor. Ratio denominators with magnitude below `1e-12` raise a
/// degenerate-spectrum error naming the offending index.
pub fn compute_indices_with(spectrum: &Spectrum, swir_nm: f64) -> Result<PhysicsFeatures> {
    let r443 = band_at(spectrum, 443.0)?;
    let r555 = band_at(spectrum, 555.0)?;
    let r620 = band_at(spectrum, 620.0)?;
    let r665 = band_at(spectrum, 665.0)?;
    let r680 = band_at(spectrum, 680.0)?;
    let r681 = band_at(spectrum, 681.0)?;
    let r709 = band_at(spectrum, 709.0)?;
    let r753 = band_at(spectrum, 753.0)?;
    let r865 = band_at(spectrum, 865.0)?;
    let r_swir = band_at(spectrum, swir_nm)?;
    if (swir_nm - 665.0).abs() < 1.0 {
        return Err(Error::Config(format!(
            "SWIR anchor {swir_nm} nm too close to the 665 nm red band"
        )));
    }

    let ci = r681 - r665;
    let mci = r709 - (r681 + r753) / 2.0;
    // Red/NIR/SWIR baseline subtraction at 865 nm.
    let fai = r865 - (r665 + (r_swir - r665) * (865.0 - 665.0) / (swir_nm - 665.0));
    let pc = checked_div(r620, r665, "PC")?;
    let chl_red = checked_div(r680, r665, "ChlRed")?;
    let bg = checked_div(r443, r555, "BG")?;
    let gr = checked_div(r555, r665, "GR")?;
    let nir = checked_div(r865, r665, "NIR")?;
    let ndci = checked_div(r709 - r665, r709 + r665, "NDCI")?;
    let ndi = checked_div(r665 - r620, r665 + r620, "NDI")?;

    Ok(PhysicsFeatures {
        values: [ci, ndci, mci, fai, pc, chl_red, bg, gr, nir, ndi],
    })
}

/// Batch transform: one row of ten indices per spectrum.
pub fn features_matrix(spectra: &[Spectrum]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((spectra.len(), N_FEATURES));
    for (i, s) in spectra.iter().enumerate() {
        let f = compute_indices(s)?;
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&f.values));
    }
    Ok(out)
}

/// CSV of the batch transform with the ten-column header.
pub fn features_csv(spectra: &[Spectrum]) -> Result<String> {
    let features = features_matrix(spectra)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FEATURE_NAMES)?;
    for row in features.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("utf8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{ForwardModel, WavelengthGrid};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn flat_spectrum(v: f64) -> Spectrum {
        let grid = Arc::new(WavelengthGrid::control_points());
        Spectrum::new(grid.clone(), vec![v; grid.len()]).unwrap()
    }

    #[test]
    fn flat_spectrum_identities() {
        let f = compute_indices(&flat_spectrum(0.01)).unwrap();
        let [ci, ndci, mci, fai, pc, chl_red, bg, gr, nir, ndi] = f.values;
        for zero in [ci, ndci, mci, fai, ndi] {
            assert_abs_diff_eq!(zero, 0.0, epsilon = 1e-15);
        }
        for one in [pc, chl_red, bg, gr, nir] {
            assert_abs_diff_eq!(one, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn band_interpolation_midpoint() {
        let grid = Arc::new(WavelengthGrid::new(vec![400.0, 600.0, 1240.0]).unwrap());
        let s = Spectrum::new(grid, vec![0.002, 0.004, 0.001]).unwrap();
        assert_abs_diff_eq!(band_at(&s, 500.0).unwrap(), 0.003, epsilon = 1e-15);
        assert_abs_diff_eq!(band_at(&s, 600.0).unwrap(), 0.004, epsilon = 1e-15);
    }

    #[test]
    fn out_of_range_band_is_an_error() {
        let s = flat_spectrum(0.01);
        match band_at(&s, 2500.0) {
            Err(Error::WavelengthOutOfRange { .. }) => {}
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn all_zero_spectrum_names_pc() {
        match compute_indices(&flat_spectrum(0.0)) {
            Err(Error::DegenerateSpectrum { index: "PC", .. }) => {}
            other => panic!("expected degenerate PC, got {other:?}"),
        }
    }

    #[test]
    fn saturated_forward_model_values_on_control_grid() {
        let grid = Arc::new(WavelengthGrid::control_points());
        let model = ForwardModel::new(grid, 1.0, 1.0).unwrap();
        // u -> 1 in the saturating limit.
        let s = model.reflectance_of(1e12, 0.0, 0).unwrap();
        let f = compute_indices(&s).unwrap();
        assert_abs_diff_eq!(f.values[4], 2.0, epsilon = 1e-9); // PC = 0.004/0.002
        assert_abs_diff_eq!(f.values[1], 0.75, epsilon = 1e-9); // NDCI
        assert_abs_diff_eq!(f.values[0], 0.0078, epsilon = 1e-9); // CI = 0.0098-0.002
    }

    #[test]
    fn clear_vs_bloom_index_directions() {
        let grid = Arc::new(WavelengthGrid::control_points());
        let model = ForwardModel::new(grid, 1.0, 1.0).unwrap();
        let clear = compute_indices(&model.reflectance_of(0.0, 0.0, 0).unwrap()).unwrap();
        assert_abs_diff_eq!(clear.values[1], -0.2, epsilon = 1e-12); // NDCI clear
        assert_abs_diff_eq!(clear.values[6], 0.02 / 0.015, epsilon = 1e-12); // BG clear
    }

    #[test]
    fn index_monotonicity_in_concentration() {
        for grid in [WavelengthGrid::control_points(), WavelengthGrid::standard(117)] {
            let model = ForwardModel::new(Arc::new(grid), 1.0, 1.0).unwrap();
            let cs = [0.0, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0, 200.0];
            let feats: Vec<PhysicsFeatures> = cs
                .iter()
                .map(|&c| compute_indices(&model.reflectance_of(c, 0.0, 0).unwrap()).unwrap())
                .collect();
            // NDCI, CI, PC, NIR non-decreasing; BG non-increasing.
            for (idx, rising) in [(1, true), (0, true), (4, true), (8, true), (6, false)] {
                for pair in feats.windows(2) {
                    let d = pair[1].values[idx] - pair[0].values[idx];
                    if rising {
                        assert!(d >= -1e-12, "{} fell: {d}", FEATURE_NAMES[idx]);
                    } else {
                        assert!(d <= 1e-12, "{} rose: {d}", FEATURE_NAMES[idx]);
                    }
                }
            }
        }
    }

    #[test]
    fn scale_equivariance() {
        let grid = Arc::new(WavelengthGrid::standard(117));
        let model = ForwardModel::new(grid.clone(), 1.0, 1.0).unwrap();
        let mut rng = crate::rng::seeded_rng(4);
        for _ in 0..200 {
            use rand::Rng;
            let c: f64 = rng.random_range(0.0..5.0);
            let s = model.reflectance_of(c, 1e-4, rng.random()).unwrap();
            let k: f64 = rng.random_range(0.1..10.0);
            let scaled =
                Spectrum::new(grid.clone(), s.values().iter().map(|v| k * v).collect()).unwrap();
            let f = compute_indices(&s).unwrap();
            let g = compute_indices(&scaled).unwrap();
            // Ratio/normalized indices invariant; difference indices scale by k.
            for idx in [1, 4, 5, 6, 7, 8, 9] {
                assert_abs_diff_eq!(f.values[idx], g.values[idx], epsilon = 1e-9);
            }
            for idx in [0, 2, 3] {
                assert_abs_diff_eq!(k * f.values[idx], g.values[idx], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn batch_matches_single_and_is_pure() {
        let grid = Arc::new(WavelengthGrid::standard(33));
        let model = ForwardModel::new(grid, 1.0, 1.0).unwrap();
        let spectra: Vec<Spectrum> = (0..5)
            .map(|i| model.reflectance_of(i as f64 * 0.5, 1e-4, i).unwrap())
            .collect();
        let m1 = features_matrix(&spectra).unwrap();
        let m2 = features_matrix(&spectra).unwrap();
        assert_eq!(m1, m2);
        for (i, s) in spectra.iter().enumerate() {
            let f = compute_indices(s).unwrap();
            for j in 0..N_FEATURES {
                assert_eq!(m1[[i, j]], f.values[j]);
            }
        }
        let csv = features_csv(&spectra).unwrap();
        assert!(csv.starts_with("ci,ndci,mci,fai,pc,chl_red,bg,gr,nir,ndi\n"));
    }
}
