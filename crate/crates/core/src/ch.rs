//! Clauser-Horne sum, expected count rates and Poisson error propagation.
//!
//! ```text
//! CH = N(t1,t2) - N(t1,t2') + N(t1',t2) + N(t1',t2') - N(t1') - N(t2)
//! ```
//!
//! In [`ChMode::TrueSingles`] the last two terms are single counts; in
//! [`ChMode::CoincidenceSubstituted`] they are the coincidences recorded with the
//! opposite polarizer removed, `N(t1',inf)` and `N(inf,t2)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::state::{
    joint_pass_probability, pass_absent_probability, single_pass_probability, Arm, EntangledState,
    PolarizerSetting, Transmission,
};

/// Analyzer angles `(theta1, theta2, theta1', theta2')` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleQuad {
    pub theta1: f64,
    pub theta2: f64,
    pub theta1p: f64,
    pub theta2p: f64,
}

impl AngleQuad {
    pub fn new(theta1: f64, theta2: f64, theta1p: f64, theta2p: f64) -> Self {
        AngleQuad {
            theta1,
            theta2,
            theta1p,
            theta2p,
        }
    }

    pub fn from_degrees(deg: [f64; 4]) -> Self {
        Self::from_array(deg.map(f64::to_radians))
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        AngleQuad::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.theta1, self.theta2, self.theta1p, self.theta2p]
    }

    pub fn to_degrees(&self) -> [f64; 4] {
        self.to_array().map(f64::to_degrees)
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().all(|a| a.is_finite()) {
            Ok(())
        } else {
            Err(ModelError::NonFiniteInput("angle"))
        }
    }
}

/// Transmissions of the arm-1 and arm-2 polarizers; the angle comes from the
/// setting being measured.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolarizerPair {
    pub arm1: Transmission,
    pub arm2: Transmission,
}

impl PolarizerPair {
    pub const IDEAL: PolarizerPair = PolarizerPair {
        arm1: Transmission::IDEAL,
        arm2: Transmission::IDEAL,
    };

    pub fn symmetric(t: Transmission) -> Self {
        PolarizerPair { arm1: t, arm2: t }
    }

    pub fn validate(&self) -> Result<()> {
        self.arm1.validate()?;
        self.arm2.validate()
    }

    pub fn is_symmetric(&self) -> bool {
        self.arm1 == self.arm2
    }
}

/// Detector efficiencies, emitted pair rate and uncorrelated background rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyModel {
    pub eta1: f64,
    pub eta2: f64,
    pub pair_rate: f64,
    pub background1: f64,
    pub background2: f64,
}

impl EfficiencyModel {
    /// Unit efficiency, one pair per unit time, no background: rates become
    /// per-pair probabilities.
    pub const IDEAL: EfficiencyModel = EfficiencyModel {
        eta1: 1.0,
        eta2: 1.0,
        pair_rate: 1.0,
        background1: 0.0,
        background2: 0.0,
    };

    pub fn symmetric(eta: f64, pair_rate: f64) -> Self {
        EfficiencyModel {
            eta1: eta,
            eta2: eta,
            pair_rate,
            background1: 0.0,
            background2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !unit(self.eta1) {
            return Err(ModelError::InvalidEfficiency("eta1"));
        }
        if !unit(self.eta2) {
            return Err(ModelError::InvalidEfficiency("eta2"));
        }
        if !nonneg(self.pair_rate) {
            return Err(ModelError::InvalidEfficiency("pair_rate"));
        }
        if !nonneg(self.background1) {
            return Err(ModelError::InvalidEfficiency("background1"));
        }
        if !nonneg(self.background2) {
            return Err(ModelError::InvalidEfficiency("background2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChMode {
    TrueSingles,
    CoincidenceSubstituted,
}

impl fmt::Display for ChMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChMode::TrueSingles => "true-singles",
            ChMode::CoincidenceSubstituted => "coincidence-substituted",
        })
    }
}

/// The six measurement settings entering the CH sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    T1T2,
    T1T2p,
    T1pT2,
    T1pT2p,
    T1pInf,
    InfT2,
}

impl Setting {
    pub const ALL: [Setting; 6] = [
        Setting::T1T2,
        Setting::T1T2p,
        Setting::T1pT2,
        Setting::T1pT2p,
        Setting::T1pInf,
        Setting::InfT2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Setting::T1T2 => "t1t2",
            Setting::T1T2p => "t1t2p",
            Setting::T1pT2 => "t1pt2",
            Setting::T1pT2p => "t1pt2p",
            Setting::T1pInf => "t1pinf",
            Setting::InfT2 => "inft2",
        }
    }

    pub fn from_label(label: &str) -> Option<Setting> {
        Setting::ALL.into_iter().find(|s| s.label() == label)
    }

    /// Sign of the term in the CH sum.
    pub fn sign(self) -> f64 {
        match self {
            Setting::T1T2 | Setting::T1pT2 | Setting::T1pT2p => 1.0,
            Setting::T1T2p | Setting::T1pInf | Setting::InfT2 => -1.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Analyzer angles of each arm; `None` means the polarizer is removed.
    pub fn angles(self, quad: &AngleQuad) -> (Option<f64>, Option<f64>) {
        match self {
            Setting::T1T2 => (Some(quad.theta1), Some(quad.theta2)),
            Setting::T1T2p => (Some(quad.theta1), Some(quad.theta2p)),
            Setting::T1pT2 => (Some(quad.theta1p), Some(quad.theta2)),
            Setting::T1pT2p => (Some(quad.theta1p), Some(quad.theta2p)),
            Setting::T1pInf => (Some(quad.theta1p), None),
            Setting::InfT2 => (None, Some(quad.theta2)),
        }
    }

    pub fn polarizers(
        self,
        quad: &AngleQuad,
        pols: &PolarizerPair,
    ) -> Result<(PolarizerSetting, PolarizerSetting)> {
        let (a, b) = self.angles(quad);
        let make = |theta: Option<f64>, t: Transmission| match theta {
            Some(theta) => PolarizerSetting::new(theta, t),
            None => Ok(PolarizerSetting::Absent),
        };
        Ok((make(a, pols.arm1)?, make(b, pols.arm2)?))
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: Setting,
    pub counts: u64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChResult {
    pub value: f64,
    pub std_error: f64,
    pub significance: f64,
    pub mode: ChMode,
}

/// The four coincidence probabilities combined with their CH signs.
fn coincidence_sum(state: &EntangledState, quad: &AngleQuad, pols: &PolarizerPair) -> Result<f64> {
    let mut sum = 0.0;
    for setting in &Setting::ALL[..4] {
        let (p1, p2) = setting.polarizers(quad, pols)?;
        sum += setting.sign() * joint_pass_probability(state, &p1, &p2)?;
    }
    Ok(sum)
}

fn checked(quad: &AngleQuad, pols: &PolarizerPair, eff: &EfficiencyModel) -> Result<()> {
    quad.validate()?;
    pols.validate()?;
    eff.validate()
}

/// CH with true single counts: the form free of the detection loophole.
pub fn ch_true(
    state: &EntangledState,
    quad: &AngleQuad,
    pols: &PolarizerPair,
    eff: &EfficiencyModel,
) -> Result<f64> {
    checked(quad, pols, eff)?;
    let coinc = coincidence_sum(state, quad, pols)?;
    let p1 = single_pass_probability(state, &PolarizerSetting::new(quad.theta1p, pols.arm1)?, Arm::One)?;
    let p2 = single_pass_probability(state, &PolarizerSetting::new(quad.theta2, pols.arm2)?, Arm::Two)?;
    let rp = eff.pair_rate;
    Ok(rp * eff.eta1 * eff.eta2 * coinc
        - (rp * eff.eta1 * p1 + eff.background1)
        - (rp * eff.eta2 * p2 + eff.background2))
}

/// CH with singles replaced by polarizer-removed coincidences.
pub fn ch_exp(
    state: &EntangledState,
    quad: &AngleQuad,
    pols: &PolarizerPair,
    eff: &EfficiencyModel,
) -> Result<f64> {
    checked(quad, pols, eff)?;
    let coinc = coincidence_sum(state, quad, pols)?;
    let p1 = pass_absent_probability(state, &PolarizerSetting::new(quad.theta1p, pols.arm1)?, Arm::One)?;
    let p2 = pass_absent_probability(state, &PolarizerSetting::new(quad.theta2, pols.arm2)?, Arm::Two)?;
    Ok(eff.pair_rate * eff.eta1 * eff.eta2 * (coinc - p1 - p2))
}

pub fn ch_value(
    mode: ChMode,
    state: &EntangledState,
    quad: &AngleQuad,
    pols: &PolarizerPair,
    eff: &EfficiencyModel,
) -> Result<f64> {
    match mode {
        ChMode::TrueSingles => ch_true(state, quad, pols, eff),
        ChMode::CoincidenceSubstituted => ch_exp(state, quad, pols, eff),
    }
}

/// Expected per-second rates for one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettingRates {
    pub setting: Setting,
    pub coincidence: f64,
    pub singles1: f64,
    pub singles2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedRates {
    pub settings: [SettingRates; 6],
    pub window: Option<f64>,
}

impl ExpectedRates {
    pub fn get(&self, setting: Setting) -> &SettingRates {
        &self.settings[setting.index()]
    }

    /// CH_exp evaluated on these rates.
    pub fn ch_exp(&self) -> f64 {
        self.settings.iter().map(|r| r.setting.sign() * r.coincidence).sum()
    }

    /// Variance of the CH_exp estimate per unit duration: a run of `t` seconds
    /// per setting has standard error `sqrt(variance_rate() / t)`.
    pub fn variance_rate(&self) -> f64 {
        self.settings.iter().map(|r| r.coincidence).sum()
    }

    /// Per-setting duration at which CH_exp reaches the target significance.
    pub fn duration_for_significance(&self, target: f64) -> Result<f64> {
        let ch = self.ch_exp();
        if !(ch > 0.0) || !(target > 0.0) {
            return Err(ModelError::InvalidArgument(
                "significance target needs a positive CH_exp and target",
            ));
        }
        Ok((target / ch).powi(2) * self.variance_rate())
    }
}

/// Signal rates (and optional accidentals) at all six settings. With a
/// coincidence window `w`, each coincidence rate gains `R1 * R2 * w` from the
/// setting's singles rates.
pub fn expected_count_rates(
    state: &EntangledState,
    quad: &AngleQuad,
    pols: &PolarizerPair,
    eff: &EfficiencyModel,
    window: Option<f64>,
) -> Result<ExpectedRates> {
    checked(quad, pols, eff)?;
    if let Some(w) = window {
        if !(w.is_finite() && w > 0.0) {
            return Err(ModelError::InvalidArgument("coincidence window must be positive"));
        }
    }
    let rp = eff.pair_rate;
    let rates = Setting::ALL.map(|setting| -> Result<SettingRates> {
        let (pol1, pol2) = setting.polarizers(quad, pols)?;
        let pass1 = match pol1 {
            PolarizerSetting::Absent => 1.0,
            _ => single_pass_probability(state, &pol1, Arm::One)?,
        };
        let pass2 = match pol2 {
            PolarizerSetting::Absent => 1.0,
            _ => single_pass_probability(state, &pol2, Arm::Two)?,
        };
        let joint = match (pol1.is_present(), pol2.is_present()) {
            (true, true) => joint_pass_probability(state, &pol1, &pol2)?,
            (true, false) => pass1,
            (false, true) => pass2,
            (false, false) => 1.0,
        };
        let singles1 = rp * eff.eta1 * pass1 + eff.background1;
        let singles2 = rp * eff.eta2 * pass2 + eff.background2;
        let accidental = window.map_or(0.0, |w| singles1 * singles2 * w);
        Ok(SettingRates {
            setting,
            coincidence: rp * eff.eta1 * eff.eta2 * joint + accidental,
            singles1,
            singles2,
        })
    });
    let mut out = Vec::with_capacity(6);
    for r in rates {
        out.push(r?);
    }
    Ok(ExpectedRates {
        settings: out.try_into().expect("six settings"),
        window,
    })
}

/// Pair rate at which the analytic CH_exp equals `target` per second. CH_exp
/// is linear in the pair rate.
pub fn pair_rate_for_ch_exp(
    state: &EntangledState,
    quad: &AngleQuad,
    pols: &PolarizerPair,
    eff: &EfficiencyModel,
    target: f64,
) -> Result<f64> {
    let unit = EfficiencyModel {
        pair_rate: 1.0,
        ..*eff
    };
    let per_pair = ch_exp(state, quad, pols, &unit)?;
    if !(per_pair > 0.0) {
        return Err(ModelError::InvalidArgument("CH_exp is not positive at this setting"));
    }
    Ok(target / per_pair)
}

/// CH estimate from six count records with independent Poisson errors.
/// A zero standard error yields significance 0.
pub fn estimate_ch(records: &[CountRecord], mode: ChMode) -> Result<ChResult> {
    let mut slots: [Option<&CountRecord>; 6] = [None; 6];
    for r in records {
        let slot = &mut slots[r.setting.index()];
        if slot.is_some() {
            return Err(ModelError::DuplicateSetting(r.setting.label()));
        }
        *slot = Some(r);
    }
    let mut value = 0.0;
    let mut variance = 0.0;
    for (setting, slot) in Setting::ALL.iter().zip(slots) {
        let r = slot.ok_or(ModelError::MissingSetting(setting.label()))?;
        if !(r.duration > 0.0) || !r.duration.is_finite() {
            return Err(ModelError::ZeroDuration(setting.label()));
        }
        let n = r.counts as f64;
        value += setting.sign() * n / r.duration;
        variance += n / (r.duration * r.duration);
    }
    let std_error = variance.sqrt();
    let significance = if std_error > 0.0 { value / std_error } else { 0.0 };
    Ok(ChResult {
        value,
        std_error,
        significance,
        mode,
    })
}
