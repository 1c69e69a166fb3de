//! Single-detection-rate threshold of the Wigner-function local realistic model.
//!
//! The model departs from quantum predictions when the single detection rate
//! satisfies
//!
//! ```text
//! R_S < eta F^2 R_c^2 / (2 L d^2 lambda sqrt(tau T))
//! ```
//!
//! All quantities are SI.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Mean of the 633 nm and 789 nm down-converted wavelengths.
pub const DEFAULT_WAVELENGTH: f64 = 711e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApparatusGeometry {
    /// detection quantum efficiency
    pub eta: f64,
    /// focal distance of the lens in front of the detectors (m)
    pub focal_f: f64,
    /// radius of the active area of the nonlinear medium (m)
    pub active_radius_rc: f64,
    /// crystal-to-detector distance (m)
    pub distance_d: f64,
    /// mean detected wavelength (m)
    pub wavelength_lambda: f64,
    /// photon coherence time (s)
    pub coherence_tau: f64,
    /// detector active depth (m)
    pub depth_l: f64,
    /// absorption time (s)
    pub absorb_t: f64,
}

impl ApparatusGeometry {
    /// Apparatus of the reported experiment with `T = 10 ns`.
    pub fn reference() -> Self {
        ApparatusGeometry {
            eta: 0.51,
            focal_f: 0.9e-2,
            active_radius_rc: 1e-3,
            distance_d: 0.75,
            wavelength_lambda: DEFAULT_WAVELENGTH,
            coherence_tau: 4.2e-13,
            depth_l: 3e-5,
            absorb_t: 10e-9,
        }
    }

    pub fn with_absorb_t(self, absorb_t: f64) -> Self {
        ApparatusGeometry { absorb_t, ..self }
    }

    fn validate_without_t(&self) -> Result<()> {
        let fields = [
            (self.eta, "eta"),
            (self.focal_f, "focal_F"),
            (self.active_radius_rc, "active_radius_Rc"),
            (self.distance_d, "distance_d"),
            (self.wavelength_lambda, "wavelength_lambda"),
            (self.coherence_tau, "coherence_tau"),
            (self.depth_l, "depth_L"),
        ];
        for (v, name) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidGeometry(name));
            }
        }
        if self.eta > 1.0 {
            return Err(ModelError::InvalidGeometry("eta"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_without_t()?;
        if !(self.absorb_t.is_finite() && self.absorb_t > 0.0) {
            return Err(ModelError::InvalidGeometry("absorb_T"));
        }
        Ok(())
    }

    /// `eta F^2 R_c^2 / (2 L d^2 lambda)`, dimensionless.
    fn prefactor(&self) -> f64 {
        self.eta * self.focal_f.powi(2) * self.active_radius_rc.powi(2)
            / (2.0 * self.depth_l * self.distance_d.powi(2) * self.wavelength_lambda)
    }
}

/// Threshold single rate in counts per second.
pub fn threshold_rate(g: &ApparatusGeometry) -> Result<f64> {
    g.validate()?;
    Ok(g.prefactor() / (g.coherence_tau * g.absorb_t).sqrt())
}

/// Absorption time at which the threshold equals `observed_rate`. The
/// geometry's own `absorb_t` is ignored. For `T < T*` the model predicts a
/// deviation at that rate.
pub fn critical_t(g: &ApparatusGeometry, observed_rate: f64) -> Result<f64> {
    g.validate_without_t()?;
    if !(observed_rate.is_finite() && observed_rate > 0.0) {
        return Err(ModelError::NonPositiveRate(observed_rate));
    }
    Ok((g.prefactor() / observed_rate).powi(2) / g.coherence_tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    DeviationExpected,
    QuantumRegime,
}

/// `DeviationExpected` iff the observed rate is strictly below the threshold.
pub fn classify_regime(g: &ApparatusGeometry, observed_rate: f64) -> Result<Regime> {
    if !(observed_rate.is_finite() && observed_rate > 0.0) {
        return Err(ModelError::NonPositiveRate(observed_rate));
    }
    Ok(if observed_rate < threshold_rate(g)? {
        Regime::DeviationExpected
    } else {
        Regime::QuantumRegime
    })
}
