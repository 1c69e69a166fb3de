//! JSON run configuration. Angles are degrees and lengths/times use the units
//! in the field names; everything is converted to SI radians on the way in.
//! Every section and field is optional and defaults to the reference
//! experiment (f = 0.4, eta = 0.51, 50 /s dark counts).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ch::{AngleQuad, ChMode, EfficiencyModel, PolarizerPair};
use crate::lhv::ApparatusGeometry;
use crate::montecarlo::{CoincidenceLogic, DetectorModel};
use crate::state::{EntangledState, Transmission};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("config error in `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateSection {
    pub f_re: f64,
    pub f_im: f64,
}

impl Default for StateSection {
    fn default() -> Self {
        StateSection { f_re: 0.4, f_im: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmissionSection {
    pub eps_par: f64,
    pub eps_perp: f64,
}

impl Default for TransmissionSection {
    fn default() -> Self {
        TransmissionSection {
            eps_par: 1.0,
            eps_perp: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolarizerSection {
    pub theta1_deg: f64,
    pub theta2_deg: f64,
    pub theta1p_deg: f64,
    pub theta2p_deg: f64,
    pub arm1: TransmissionSection,
    pub arm2: TransmissionSection,
}

impl Default for PolarizerSection {
    fn default() -> Self {
        PolarizerSection {
            theta1_deg: 72.24,
            theta2_deg: 45.0,
            theta1p_deg: 17.76,
            theta2p_deg: 0.0,
            arm1: TransmissionSection::default(),
            arm2: TransmissionSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub eta1: f64,
    pub eta2: f64,
    pub dark_rate1: f64,
    pub dark_rate2: f64,
    pub jitter_ns: f64,
    pub window_ns: f64,
    /// Add accidental coincidences `R1 R2 w` to predicted coincidence rates.
    pub accidentals: bool,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection {
            eta1: 0.51,
            eta2: 0.51,
            dark_rate1: 50.0,
            dark_rate2: 50.0,
            jitter_ns: 0.0,
            window_ns: 10.0,
            accidentals: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub eta: f64,
    pub focal_mm: f64,
    pub active_radius_mm: f64,
    pub distance_m: f64,
    pub wavelength_nm: f64,
    pub coherence_fs: f64,
    pub depth_m: f64,
    pub absorb_ns: f64,
    /// observed single detection rate (counts/s)
    pub observed_rate: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            eta: 0.51,
            focal_mm: 9.0,
            active_radius_mm: 1.0,
            distance_m: 0.75,
            wavelength_nm: 711.0,
            coherence_fs: 420.0,
            depth_m: 3e-5,
            absorb_ns: 10.0,
            observed_rate: 1e5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    /// Emitted pairs per second. When unset it is chosen so the analytic
    /// CH_exp equals `ch_exp_target`.
    pub pair_rate: Option<f64>,
    pub ch_exp_target: f64,
    /// Seconds per setting. When unset it is sized so the expected CH_exp
    /// significance equals `target_significance`.
    pub duration_s: Option<f64>,
    pub target_significance: f64,
    pub seed: u64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            pair_rate: None,
            ch_exp_target: 513.0,
            duration_s: None,
            target_significance: 25.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    TrueSingles,
    CoincidenceSubstituted,
}

impl From<ModeName> for ChMode {
    fn from(m: ModeName) -> ChMode {
        match m {
            ModeName::TrueSingles => ChMode::TrueSingles,
            ModeName::CoincidenceSubstituted => ChMode::CoincidenceSubstituted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub mode: ModeName,
    /// Common detector efficiency used for the maximization; CH is per pair.
    pub eta: f64,
    pub starts: usize,
    pub seed: u64,
    pub critical_efficiency: bool,
    pub resolution: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            mode: ModeName::TrueSingles,
            eta: 1.0,
            starts: 64,
            seed: 0x5eed,
            critical_efficiency: true,
            resolution: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub state: StateSection,
    pub polarizers: PolarizerSection,
    pub detectors: DetectorSection,
    pub geometry: GeometrySection,
    pub protocol: ProtocolSection,
    pub optimizer: OptimizerSection,
}

fn finite(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(field, "must be a finite number"))
    }
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(field, format!("must be > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(field, format!("must be >= 0, got {v}")))
    }
}

fn unit(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError::new(field, format!("must lie in [0, 1], got {v}")))
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // serde names the offending field in the message itself
            ConfigError::new(field_from_serde(&msg), msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field; the error names the first offending one.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.state()?;
        self.quad()?;
        self.polarizer_pair()?;
        self.detectors()?;
        self.logic()?;
        self.geometry()?;
        positive("geometry.observed_rate", self.geometry.observed_rate)?;
        if let Some(r) = self.protocol.pair_rate {
            non_negative("protocol.pair_rate", r)?;
        }
        positive("protocol.ch_exp_target", self.protocol.ch_exp_target)?;
        if let Some(d) = self.protocol.duration_s {
            positive("protocol.duration_s", d)?;
        }
        positive("protocol.target_significance", self.protocol.target_significance)?;
        unit("optimizer.eta", self.optimizer.eta)?;
        if self.optimizer.starts == 0 {
            return Err(ConfigError::new("optimizer.starts", "must be at least 1"));
        }
        positive("optimizer.resolution", self.optimizer.resolution)?;
        Ok(())
    }

    pub fn state(&self) -> Result<EntangledState, ConfigError> {
        let (re, im) = (
            finite("state.f_re", self.state.f_re)?,
            finite("state.f_im", self.state.f_im)?,
        );
        EntangledState::new(re, im).map_err(|e| ConfigError::new("state.f_re", e.to_string()))
    }

    pub fn quad(&self) -> Result<AngleQuad, ConfigError> {
        let p = &self.polarizers;
        Ok(AngleQuad::from_degrees([
            finite("polarizers.theta1_deg", p.theta1_deg)?,
            finite("polarizers.theta2_deg", p.theta2_deg)?,
            finite("polarizers.theta1p_deg", p.theta1p_deg)?,
            finite("polarizers.theta2p_deg", p.theta2p_deg)?,
        ]))
    }

    pub fn polarizer_pair(&self) -> Result<PolarizerPair, ConfigError> {
        let conv = |name: &str, t: TransmissionSection| {
            unit(&format!("polarizers.{name}.eps_par"), t.eps_par)?;
            unit(&format!("polarizers.{name}.eps_perp"), t.eps_perp)?;
            Transmission::new(t.eps_par, t.eps_perp)
                .map_err(|e| ConfigError::new(format!("polarizers.{name}.eps_perp"), e.to_string()))
        };
        Ok(PolarizerPair {
            arm1: conv("arm1", self.polarizers.arm1)?,
            arm2: conv("arm2", self.polarizers.arm2)?,
        })
    }

    pub fn detectors(&self) -> Result<(DetectorModel, DetectorModel), ConfigError> {
        let d = &self.detectors;
        let jitter = non_negative("detectors.jitter_ns", d.jitter_ns)? * 1e-9;
        let make = |eta_field: &str, eta: f64, dark_field: &str, dark: f64| -> Result<DetectorModel, ConfigError> {
            Ok(DetectorModel {
                eta: unit(eta_field, eta)?,
                dark_rate: non_negative(dark_field, dark)?,
                jitter_sigma: jitter,
            })
        };
        Ok((
            make("detectors.eta1", d.eta1, "detectors.dark_rate1", d.dark_rate1)?,
            make("detectors.eta2", d.eta2, "detectors.dark_rate2", d.dark_rate2)?,
        ))
    }

    pub fn logic(&self) -> Result<CoincidenceLogic, ConfigError> {
        let w = positive("detectors.window_ns", self.detectors.window_ns)? * 1e-9;
        CoincidenceLogic::new(w).map_err(|e| ConfigError::new("detectors.window_ns", e.to_string()))
    }

    /// Window used for predicted accidentals, if enabled.
    pub fn accidental_window(&self) -> Result<Option<f64>, ConfigError> {
        let w = self.logic()?.window();
        Ok(self.detectors.accidentals.then_some(w))
    }

    /// Efficiency model for the given pair rate with dark counts as backgrounds.
    pub fn efficiency(&self, pair_rate: f64) -> Result<EfficiencyModel, ConfigError> {
        let (d1, d2) = self.detectors()?;
        Ok(EfficiencyModel {
            eta1: d1.eta,
            eta2: d2.eta,
            pair_rate: non_negative("protocol.pair_rate", pair_rate)?,
            background1: d1.dark_rate,
            background2: d2.dark_rate,
        })
    }

    pub fn geometry(&self) -> Result<ApparatusGeometry, ConfigError> {
        let g = &self.geometry;
        let eta = positive("geometry.eta", g.eta)?;
        if eta > 1.0 {
            return Err(ConfigError::new("geometry.eta", format!("must be <= 1, got {eta}")));
        }
        Ok(ApparatusGeometry {
            eta,
            focal_f: positive("geometry.focal_mm", g.focal_mm)? / 1e3,
            active_radius_rc: positive("geometry.active_radius_mm", g.active_radius_mm)? / 1e3,
            distance_d: positive("geometry.distance_m", g.distance_m)?,
            wavelength_lambda: positive("geometry.wavelength_nm", g.wavelength_nm)? / 1e9,
            coherence_tau: positive("geometry.coherence_fs", g.coherence_fs)? / 1e15,
            depth_l: positive("geometry.depth_m", g.depth_m)?,
            absorb_t: positive("geometry.absorb_ns", g.absorb_ns)? / 1e9,
        })
    }
}

/// Pulls a dotted field path out of a serde_json message where possible.
fn field_from_serde(msg: &str) -> String {
    for key in ["unknown field `", "missing field `"] {
        if let Some(rest) = msg.split(key).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "<document>".to_string()
}
