//! Optical-intensity to hemoglobin conversion.
//!
//! Raw dual-wavelength intensities become optical-density changes
//! (`ΔOD = -log10(I/I0)`), which a 2x2 linear solve per channel and sample
//! turns into oxy-/deoxyhemoglobin concentration changes. The continuous
//! concentration streams are then low-pass filtered (see [`filter`]).

pub mod filter;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{design_lowpass, FilterRealization, FilterSpec};

/// Fixed dual-wavelength pair of the acquisition hardware, in nm.
pub const WAVELENGTHS_NM: [f64; 2] = [695.0, 830.0];

/// Continuous dual-wavelength intensity recording.
///
/// Intensities are stored channel-major: row `2*c` holds channel `c` at the
/// first wavelength, row `2*c + 1` the second. One column per sample.
#[derive(Debug, Clone)]
pub struct OpticalRecording {
    pub sample_rate_hz: f64,
    pub wavelengths_nm: [f64; 2],
    /// Shape `(2 * channels, samples)`.
    pub intensities: Array2<f64>,
    /// Baseline intensity I0 per (channel, wavelength) row, length `2 * channels`.
    pub reference_intensities: Vec<f64>,
}

impl OpticalRecording {
    pub fn channels(&self) -> usize {
        self.intensities.nrows() / 2
    }

    pub fn samples(&self) -> usize {
        self.intensities.ncols()
    }

    /// Checks the structural invariants: row count even and matching the
    /// reference vector, strictly positive intensities, positive rate.
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if self.intensities.nrows() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "intensity rows must pair both wavelengths per channel, got {} rows",
                self.intensities.nrows()
            )));
        }
        if self.reference_intensities.len() != self.intensities.nrows() {
            return Err(Error::InvalidInput(format!(
                "reference intensities ({}) do not match intensity rows ({})",
                self.reference_intensities.len(),
                self.intensities.nrows()
            )));
        }
        for (row, &i0) in self.reference_intensities.iter().enumerate() {
            if !(i0 > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "reference intensity for channel {} wavelength {} nm is {} (must be > 0)",
                    row / 2 + 1,
                    WAVELENGTHS_NM[row % 2],
                    i0
                )));
            }
        }
        Ok(())
    }
}

/// Molar extinction table plus geometry for the 2x2 conversion.
///
/// `epsilon` is expressed in 1/(µM·mm) so that the solved concentrations come
/// out directly in µM with no hidden unit factor; the shipped default file
/// carries conventional literature coefficients rescaled to that unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionTable {
    /// Rows: wavelength (695, 830 nm); columns: species (HbO, HbR).
    pub epsilon: [[f64; 2]; 2],
    pub source_distance_mm: f64,
    /// Differential pathlength factor per wavelength.
    pub dpf: [f64; 2],
    pub wavelengths_nm: [f64; 2],
}

/// On-disk schema of the extinction config file.
#[derive(Debug, Deserialize)]
struct ExtinctionFile {
    source_distance_mm: f64,
    wavelengths: Vec<ExtinctionRow>,
}

#[derive(Debug, Deserialize)]
struct ExtinctionRow {
    nm: f64,
    epsilon_hbo: f64,
    epsilon_hbr: f64,
    dpf: f64,
}

const BUNDLED_EXTINCTION: &str = include_str!("../../data/extinction.toml");

impl ExtinctionTable {
    /// The bundled default table (conventional literature values; explicitly
    /// configuration, not instrument ground truth).
    pub fn bundled() -> ExtinctionTable {
        Self::from_toml_str(BUNDLED_EXTINCTION, "<bundled extinction.toml>")
            .expect("bundled extinction table must parse")
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<ExtinctionTable> {
        let file: ExtinctionFile =
            toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        if file.wavelengths.len() != 2 {
            return Err(Error::parse(
                origin,
                format!("expected 2 wavelength rows, got {}", file.wavelengths.len()),
            ));
        }
        let table = ExtinctionTable {
            epsilon: [
                [file.wavelengths[0].epsilon_hbo, file.wavelengths[0].epsilon_hbr],
                [file.wavelengths[1].epsilon_hbo, file.wavelengths[1].epsilon_hbr],
            ],
            source_distance_mm: file.source_distance_mm,
            dpf: [file.wavelengths[0].dpf, file.wavelengths[1].dpf],
            wavelengths_nm: [file.wavelengths[0].nm, file.wavelengths[1].nm],
        };
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &std::path::Path) -> Result<ExtinctionTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.source_distance_mm > 0.0) {
            return Err(Error::Config(format!(
                "source-detector distance must be positive, got {} mm",
                self.source_distance_mm
            )));
        }
        if self.dpf.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Config(format!("DPF must be positive, got {:?}", self.dpf)));
        }
        let cond = condition_number_2x2(&self.path_matrix());
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::Config(format!(
                "extinction matrix is singular or ill-conditioned (cond = {cond:.3e})"
            )));
        }
        Ok(())
    }

    /// The matrix actually solved against: `M[λ][species] = ε·d·DPF(λ)`,
    /// mapping concentrations in µM to ΔOD.
    pub fn path_matrix(&self) -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        for lam in 0..2 {
            let path = self.source_distance_mm * self.dpf[lam];
            for sp in 0..2 {
                m[lam][sp] = self.epsilon[lam][sp] * path;
            }
        }
        m
    }
}

/// 2-norm condition number of a 2x2 matrix via the singular values of AᵀA.
fn condition_number_2x2(m: &[[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    // Gram matrix entries
    let g11 = a * a + c * c;
    let g12 = a * b + c * d;
    let g22 = b * b + d * d;
    let tr = g11 + g22;
    let det = g11 * g22 - g12 * g12;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l1 = tr / 2.0 + disc;
    let l2 = tr / 2.0 - disc;
    if l2 <= 0.0 {
        f64::INFINITY
    } else {
        (l1 / l2).sqrt()
    }
}

/// Per-channel Δ[HbO]/Δ[HbR] time series in µM, channel-major
/// (`(channels, samples)`).
#[derive(Debug, Clone)]
pub struct HemoSeries {
    pub sample_rate_hz: f64,
    pub hbo: Array2<f64>,
    pub hbr: Array2<f64>,
}

impl HemoSeries {
    pub fn channels(&self) -> usize {
        self.hbo.nrows()
    }

    pub fn samples(&self) -> usize {
        self.hbo.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hbo.dim() != self.hbr.dim() {
            return Err(Error::InvalidInput(format!(
                "HbO shape {:?} does not match HbR shape {:?}",
                self.hbo.dim(),
                self.hbr.dim()
            )));
        }
        if self.hbo.iter().any(|v| !v.is_finite()) || self.hbr.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite hemoglobin value".into()));
        }
        Ok(())
    }
}

/// ΔOD = -log10(I / I0), elementwise, same `(2 * channels, samples)` shape.
///
/// Fails on the first nonpositive intensity, naming channel and sample.
pub fn optical_density(recording: &OpticalRecording) -> Result<Array2<f64>> {
    recording.validate()?;
    let mut od = Array2::zeros(recording.intensities.raw_dim());
    for ((row, col), &i) in recording.intensities.indexed_iter() {
        if !(i > 0.0) {
            return Err(Error::InvalidInput(format!(
                "nonpositive intensity {} at channel {} wavelength {} nm sample {}",
                i,
                row / 2 + 1,
                recording.wavelengths_nm[row % 2],
                col
            )));
        }
        od[(row, col)] = -(i / recording.reference_intensities[row]).log10();
    }
    Ok(od)
}

/// Solves the per-channel 2x2 system `ΔOD(λ) = ε(λ,·)·d·DPF(λ) · (ΔHbO, ΔHbR)`
/// for every sample. Input shape `(2 * channels, samples)`.
pub fn mbll_invert(od: &Array2<f64>, sample_rate_hz: f64, table: &ExtinctionTable) -> Result<HemoSeries> {
    table.validate()?;
    if od.nrows() % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "ΔOD rows must pair both wavelengths per channel, got {}",
            od.nrows()
        )));
    }
    let m = table.path_matrix();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ];
    let channels = od.nrows() / 2;
    let samples = od.ncols();
    let mut hbo = Array2::zeros((channels, samples));
    let mut hbr = Array2::zeros((channels, samples));
    for ch in 0..channels {
        for t in 0..samples {
            let d0 = od[(2 * ch, t)];
            let d1 = od[(2 * ch + 1, t)];
            hbo[(ch, t)] = inv[0][0] * d0 + inv[0][1] * d1;
            hbr[(ch, t)] = inv[1][0] * d0 + inv[1][1] * d1;
        }
    }
    Ok(HemoSeries {
        sample_rate_hz,
        hbo,
        hbr,
    })
}

/// Intensities → ΔOD → concentrations in one step.
pub fn convert_recording(recording: &OpticalRecording, table: &ExtinctionTable) -> Result<HemoSeries> {
    let od = optical_density(recording)?;
    mbll_invert(&od, recording.sample_rate_hz, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn recording_from(intensities: Array2<f64>, reference: Vec<f64>) -> OpticalRecording {
        OpticalRecording {
            sample_rate_hz: 10.0,
            wavelengths_nm: WAVELENGTHS_NM,
            intensities,
            reference_intensities: reference,
        }
    }

    /// Table whose path matrix is exactly the identity: concentrations pass
    /// straight through.
    fn identity_table() -> ExtinctionTable {
        ExtinctionTable {
            epsilon: [[1.0, 0.0], [0.0, 1.0]],
            source_distance_mm: 1.0,
            dpf: [1.0, 1.0],
            wavelengths_nm: WAVELENGTHS_NM,
        }
    }

    #[test]
    fn od_is_zero_at_reference() {
        let rec = recording_from(Array2::from_elem((4, 10), 2.5), vec![2.5; 4]);
        let od = optical_density(&rec).unwrap();
        assert!(od.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn od_decade_drop_is_one() {
        let mut i = Array2::from_elem((2, 3), 10.0);
        i[(1, 2)] = 1.0;
        let rec = recording_from(i, vec![10.0, 10.0]);
        let od = optical_density(&rec).unwrap();
        assert_relative_eq!(od[(1, 2)], 1.0, max_relative = 1e-12);
        assert_eq!(od[(0, 0)], 0.0);
    }

    #[test]
    fn od_rejects_nonpositive_intensity() {
        let mut i = Array2::from_elem((2, 3), 1.0);
        i[(0, 1)] = 0.0;
        let rec = recording_from(i, vec![1.0, 1.0]);
        let err = optical_density(&rec).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("channel 1"), "{msg}");
        assert!(msg.contains("sample 1"), "{msg}");
    }

    #[test]
    fn od_round_trips_random_intensities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let i0: Vec<f64> = (0..8).map(|_| rng.gen_range(0.5..20.0)).collect();
        let i = Array2::from_shape_fn((8, 50), |_| rng.gen_range(0.01..30.0));
        let rec = recording_from(i.clone(), i0.clone());
        let od = optical_density(&rec).unwrap();
        for ((row, col), &v) in od.indexed_iter() {
            let back = 10f64.powf(-v) * i0[row];
            assert_relative_eq!(back, i[(row, col)], max_relative = 1e-12);
        }
    }

    #[test]
    fn invert_zero_od_gives_zero_concentration() {
        let od = Array2::zeros((6, 5));
        let hemo = mbll_invert(&od, 10.0, &ExtinctionTable::bundled()).unwrap();
        assert!(hemo.hbo.iter().all(|&v| v == 0.0));
        assert!(hemo.hbr.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invert_identity_table_passes_values_through() {
        let mut od = Array2::zeros((2, 1));
        od[(0, 0)] = 0.3;
        od[(1, 0)] = 0.7;
        let hemo = mbll_invert(&od, 10.0, &identity_table()).unwrap();
        assert_relative_eq!(hemo.hbo[(0, 0)], 0.3, max_relative = 1e-15);
        assert_relative_eq!(hemo.hbr[(0, 0)], 0.7, max_relative = 1e-15);
    }

    #[test]
    fn invert_matches_independent_cramer_solver() {
        // Oracle: Cramer's rule on the same 2x2 system, written separately.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let table = ExtinctionTable {
                epsilon: [
                    [rng.gen_range(0.01..2.0), rng.gen_range(0.01..2.0)],
                    [rng.gen_range(0.01..2.0), rng.gen_range(0.01..2.0)],
                ],
                source_distance_mm: rng.gen_range(5.0..50.0),
                dpf: [rng.gen_range(1.0..9.0), rng.gen_range(1.0..9.0)],
                wavelengths_nm: WAVELENGTHS_NM,
            };
            if table.validate().is_err() {
                continue; // skip the rare near-singular draw
            }
            let od0 = rng.gen_range(-1.0..1.0);
            let od1 = rng.gen_range(-1.0..1.0);
            let mut od = Array2::zeros((2, 1));
            od[(0, 0)] = od0;
            od[(1, 0)] = od1;
            let hemo = mbll_invert(&od, 10.0, &table).unwrap();

            let m = table.path_matrix();
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let hbo = (od0 * m[1][1] - od1 * m[0][1]) / det;
            let hbr = (m[0][0] * od1 - m[1][0] * od0) / det;
            assert_relative_eq!(hemo.hbo[(0, 0)], hbo, max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(hemo.hbr[(0, 0)], hbr, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_table_is_rejected() {
        let table = ExtinctionTable {
            epsilon: [[1.0, 2.0], [2.0, 4.0]],
            source_distance_mm: 30.0,
            dpf: [6.0, 6.0],
            wavelengths_nm: WAVELENGTHS_NM,
        };
        assert!(matches!(table.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn bundled_table_is_valid_and_well_conditioned() {
        let table = ExtinctionTable::bundled();
        table.validate().unwrap();
        assert_eq!(table.wavelengths_nm, WAVELENGTHS_NM);
        assert_eq!(table.source_distance_mm, 30.0);
    }
}
