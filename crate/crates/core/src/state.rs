//! Non-maximally entangled polarization state `(|HH> + f|VV>) / sqrt(1 + |f|^2)` and
//! the closed-form detection probabilities for a pair of imperfect polarizers.
//!
//! Angle convention: every analyzer angle in this crate is measured from the
//! vertical (V) axis, in radians. An analyzer at `theta` transmits the H
//! component with amplitude `sin(theta)` and the V component with `cos(theta)`.
//! The aligned/orthogonal transmissions `eps_par`/`eps_perp` weight the two
//! eigen-axes of the polarizer.

use crate::error::{ModelError, Result};

/// Entanglement parameter `f` of the state. `|f| <= 1`; `f = 1` is maximal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntangledState {
    f_re: f64,
    f_im: f64,
}

impl EntangledState {
    pub fn new(f_re: f64, f_im: f64) -> Result<Self> {
        validate_state(f_re, f_im)
    }

    /// Real-valued `f`, the case the optimizer and the CLI work with.
    pub fn real(f: f64) -> Result<Self> {
        validate_state(f, 0.0)
    }

    pub fn f_re(&self) -> f64 {
        self.f_re
    }

    pub fn f_im(&self) -> f64 {
        self.f_im
    }

    /// `|f|^2`
    pub fn f_norm_sqr(&self) -> f64 {
        self.f_re * self.f_re + self.f_im * self.f_im
    }

    /// `1 / (1 + |f|^2)`
    pub fn normalization(&self) -> f64 {
        1.0 / (1.0 + self.f_norm_sqr())
    }

    /// `f + f*`, the coefficient of the interference term.
    fn interference(&self) -> f64 {
        2.0 * self.f_re
    }
}

/// Builds a validated state. `|f| > 1` is rejected rather than relabeled,
/// since relabeling swaps H and V and with them the meaning of every angle.
pub fn validate_state(f_re: f64, f_im: f64) -> Result<EntangledState> {
    if !f_re.is_finite() {
        return Err(ModelError::NonFiniteInput("f_re"));
    }
    if !f_im.is_finite() {
        return Err(ModelError::NonFiniteInput("f_im"));
    }
    let modulus = f_re.hypot(f_im);
    if modulus > 1.0 {
        return Err(ModelError::EntanglementOutOfRange(modulus));
    }
    Ok(EntangledState { f_re, f_im })
}

/// Aligned and orthogonal intensity transmissions of one polarizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub eps_par: f64,
    pub eps_perp: f64,
}

impl Transmission {
    pub const IDEAL: Transmission = Transmission {
        eps_par: 1.0,
        eps_perp: 0.0,
    };

    /// Transmits both axes fully; equivalent to removing the polarizer.
    pub const OPEN: Transmission = Transmission {
        eps_par: 1.0,
        eps_perp: 1.0,
    };

    pub fn new(eps_par: f64, eps_perp: f64) -> Result<Self> {
        let t = Transmission { eps_par, eps_perp };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eps_par.is_finite()
            && self.eps_perp.is_finite()
            && 0.0 <= self.eps_perp
            && self.eps_perp <= self.eps_par
            && self.eps_par <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidTransmission {
                eps_par: self.eps_par,
                eps_perp: self.eps_perp,
            })
        }
    }
}

impl Default for Transmission {
    fn default() -> Self {
        Transmission::IDEAL
    }
}

/// One arm's polarization analyzer, or its absence (the `inf` setting).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolarizerSetting {
    Present {
        theta: f64,
        eps_par: f64,
        eps_perp: f64,
    },
    Absent,
}

impl PolarizerSetting {
    pub fn new(theta: f64, transmission: Transmission) -> Result<Self> {
        if !theta.is_finite() {
            return Err(ModelError::NonFiniteInput("theta"));
        }
        transmission.validate()?;
        Ok(PolarizerSetting::Present {
            theta,
            eps_par: transmission.eps_par,
            eps_perp: transmission.eps_perp,
        })
    }

    pub fn ideal(theta: f64) -> Self {
        PolarizerSetting::Present {
            theta,
            eps_par: 1.0,
            eps_perp: 0.0,
        }
    }

    pub fn is_present(&self) -> bool {
        matches!(self, PolarizerSetting::Present { .. })
    }

    fn present(&self) -> Result<Analyzer> {
        match *self {
            PolarizerSetting::Present {
                theta,
                eps_par,
                eps_perp,
            } => Ok(Analyzer {
                sin: theta.sin(),
                cos: theta.cos(),
                par: eps_par,
                perp: eps_perp,
            }),
            PolarizerSetting::Absent => Err(ModelError::PolarizerAbsent),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    One,
    Two,
}

struct Analyzer {
    sin: f64,
    cos: f64,
    par: f64,
    perp: f64,
}

/// Per-pair probabilities of the four pass/block outcome combinations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointOutcomeDistribution {
    pub p_pp: f64,
    pub p_pb: f64,
    pub p_bp: f64,
    pub p_bb: f64,
}

impl JointOutcomeDistribution {
    pub fn as_array(&self) -> [f64; 4] {
        [self.p_pp, self.p_pb, self.p_bp, self.p_bb]
    }

    pub fn total(&self) -> f64 {
        self.p_pp + self.p_pb + self.p_bp + self.p_bb
    }
}

/// Probability that both photons of a pair pass their polarizers.
pub fn joint_pass_probability(
    state: &EntangledState,
    pol1: &PolarizerSetting,
    pol2: &PolarizerSetting,
) -> Result<f64> {
    let a = pol1.present()?;
    let b = pol2.present()?;
    Ok(joint_from_analyzers(state, &a, &b))
}

fn joint_from_analyzers(state: &EntangledState, a: &Analyzer, b: &Analyzer) -> f64 {
    let (s1, c1, s2, c2) = (a.sin * a.sin, a.cos * a.cos, b.sin * b.sin, b.cos * b.cos);
    let hh = a.par * b.par * s1 * s2
        + a.perp * b.perp * c1 * c2
        + a.perp * b.par * c1 * s2
        + a.par * b.perp * s1 * c2;
    let vv = a.perp * b.perp * s1 * s2
        + a.par * b.par * c1 * c2
        + a.par * b.perp * c1 * s2
        + a.perp * b.par * s1 * c2;
    let cross = (a.par * b.par + a.perp * b.perp - a.par * b.perp - a.perp * b.par)
        * (a.sin * b.sin * a.cos * b.cos);
    let p = (hh + state.f_norm_sqr() * vv + state.interference() * cross) * state.normalization();
    p.clamp(0.0, 1.0)
}

fn single_from_analyzer(state: &EntangledState, a: &Analyzer) -> f64 {
    let (s, c) = (a.sin * a.sin, a.cos * a.cos);
    let h = a.par * s + a.perp * c;
    let v = a.par * c + a.perp * s;
    ((h + state.f_norm_sqr() * v) * state.normalization()).clamp(0.0, 1.0)
}

/// Probability that the photon in one arm passes its polarizer, irrespective
/// of the other photon. The state is symmetric so the arm does not enter.
pub fn single_pass_probability(
    state: &EntangledState,
    pol: &PolarizerSetting,
    _arm: Arm,
) -> Result<f64> {
    Ok(single_from_analyzer(state, &pol.present()?))
}

/// Pass probability on `arm` with the opposite arm's polarizer removed. Per
/// emitted pair this is the single pass probability; detector efficiencies
/// are applied by the caller.
pub fn pass_absent_probability(
    state: &EntangledState,
    pol: &PolarizerSetting,
    arm: Arm,
) -> Result<f64> {
    single_pass_probability(state, pol, arm)
}

pub fn joint_outcome_distribution(
    state: &EntangledState,
    pol1: &PolarizerSetting,
    pol2: &PolarizerSetting,
) -> Result<JointOutcomeDistribution> {
    let a = pol1.present()?;
    let b = pol2.present()?;
    let p_pp = joint_from_analyzers(state, &a, &b);
    let p1 = single_from_analyzer(state, &a);
    let p2 = single_from_analyzer(state, &b);
    // Clamp the derived entries against rounding so each stays a probability.
    let p_pb = (p1 - p_pp).max(0.0);
    let p_bp = (p2 - p_pp).max(0.0);
    let p_bb = (1.0 - p_pp - p_pb - p_bp).max(0.0);
    Ok(JointOutcomeDistribution {
        p_pp,
        p_pb,
        p_bp,
        p_bb,
    })
}

/// Outcome distribution for any combination of present and absent
/// polarizers. An absent polarizer always passes its photon.
pub fn outcome_distribution(
    state: &EntangledState,
    pol1: &PolarizerSetting,
    pol2: &PolarizerSetting,
) -> Result<JointOutcomeDistribution> {
    match (pol1.is_present(), pol2.is_present()) {
        (true, true) => joint_outcome_distribution(state, pol1, pol2),
        (true, false) => {
            let p = single_pass_probability(state, pol1, Arm::One)?;
            Ok(JointOutcomeDistribution {
                p_pp: p,
                p_pb: 0.0,
                p_bp: 1.0 - p,
                p_bb: 0.0,
            })
        }
        (false, true) => {
            let p = single_pass_probability(state, pol2, Arm::Two)?;
            Ok(JointOutcomeDistribution {
                p_pp: p,
                p_pb: 1.0 - p,
                p_bp: 0.0,
                p_bb: 0.0,
            })
        }
        (false, false) => Ok(JointOutcomeDistribution {
            p_pp: 1.0,
            p_pb: 0.0,
            p_bp: 0.0,
            p_bb: 0.0,
        }),
    }
}

const VISIBILITY_GRID: usize = 720;

/// Visibility of the coincidence curve as the arm-2 analyzer is rotated
/// through a half turn with arm 1 fixed.
///
/// The curve is a quadratic form in `(cos theta2, sin theta2)`, so its extrema
/// are the eigenvalues of a 2x2 symmetric matrix recovered from three samples.
/// A coarse grid scan guards the analytic extrema.
pub fn visibility(
    state: &EntangledState,
    pol1: &PolarizerSetting,
    eps2_par: f64,
    eps2_perp: f64,
) -> Result<f64> {
    let a = pol1.present()?;
    let t2 = Transmission::new(eps2_par, eps2_perp)?;
    let curve = |theta2: f64| {
        let b = Analyzer {
            sin: theta2.sin(),
            cos: theta2.cos(),
            par: t2.eps_par,
            perp: t2.eps_perp,
        };
        joint_from_analyzers(state, &a, &b)
    };
    let at_v = curve(0.0);
    let at_h = curve(std::f64::consts::FRAC_PI_2);
    let off_diag = curve(std::f64::consts::FRAC_PI_4) - 0.5 * (at_v + at_h);
    let mid = 0.5 * (at_v + at_h);
    let radius = (0.5 * (at_v - at_h)).hypot(off_diag);
    let mut n_max = mid + radius;
    let mut n_min = (mid - radius).max(0.0);
    for k in 0..VISIBILITY_GRID {
        let n = curve(std::f64::consts::PI * k as f64 / VISIBILITY_GRID as f64);
        n_max = n_max.max(n);
        n_min = n_min.min(n);
    }
    let denom = n_max + n_min;
    if denom <= 0.0 {
        return Err(ModelError::DegenerateCurve);
    }
    Ok(((n_max - n_min) / denom).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    /// Projective-measurement oracle: enumerate the aligned/orthogonal eigen-axes
    /// of both polarizers and weight each projective probability by its
    /// transmission product. Independent of the closed form above.
    fn path_oracle(f: f64, th1: f64, th2: f64, t1: Transmission, t2: Transmission) -> f64 {
        let amp = |a: f64, b: f64| a.sin() * b.sin() + f * a.cos() * b.cos();
        let axes = |th: f64, t: Transmission| {
            [
                (th, t.eps_par),
                (th + std::f64::consts::FRAC_PI_2, t.eps_perp),
            ]
        };
        let mut total = 0.0;
        for (a, w1) in axes(th1, t1) {
            for (b, w2) in axes(th2, t2) {
                total += w1 * w2 * amp(a, b).powi(2);
            }
        }
        total / (1.0 + f * f)
    }

    fn present(theta: f64, par: f64, perp: f64) -> PolarizerSetting {
        PolarizerSetting::new(theta, Transmission::new(par, perp).unwrap()).unwrap()
    }

    #[test]
    fn validate_state_examples() {
        let s = validate_state(1.0, 0.0).unwrap();
        assert_eq!(s.normalization(), 0.5);
        let s = validate_state(0.4, 0.0).unwrap();
        assert_abs_diff_eq!(s.normalization(), 1.0 / 1.16, epsilon = 1e-15);
        assert_abs_diff_eq!(s.normalization(), 0.86207, epsilon = 1e-5);
        assert_eq!(
            validate_state(f64::NAN, 0.0),
            Err(ModelError::NonFiniteInput("f_re"))
        );
        assert!(validate_state(0.0, f64::INFINITY).is_err());
        assert!(matches!(
            validate_state(1.5, 0.0),
            Err(ModelError::EntanglementOutOfRange(_))
        ));
        assert!(validate_state(0.6, 0.8).is_ok());
    }

    #[test]
    fn transmission_ordering_is_enforced() {
        assert!(Transmission::new(0.9, 0.95).is_err());
        assert!(Transmission::new(1.1, 0.0).is_err());
        assert!(Transmission::new(0.5, -0.1).is_err());
        assert!(Transmission::new(0.95, 0.02).is_ok());
    }

    #[test]
    fn joint_pass_examples() {
        let s1 = EntangledState::real(1.0).unwrap();
        let p = joint_pass_probability(&s1, &PolarizerSetting::ideal(0.0), &PolarizerSetting::ideal(0.0)).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);

        let s0 = EntangledState::real(0.0).unwrap();
        let p = joint_pass_probability(&s0, &PolarizerSetting::ideal(deg(90.0)), &PolarizerSetting::ideal(0.0)).unwrap();
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-15);

        // amplitude oracle value
        let s = EntangledState::real(0.4).unwrap();
        let p = joint_pass_probability(
            &s,
            &PolarizerSetting::ideal(deg(72.24)),
            &PolarizerSetting::ideal(deg(45.0)),
        )
        .unwrap();
        assert_abs_diff_eq!(p, 0.497_516_466_155_622_1, epsilon = 1e-12);

        // four-path oracle value
        let pol = present(deg(45.0), 0.95, 0.02);
        let p = joint_pass_probability(&s1, &pol, &pol).unwrap();
        assert_abs_diff_eq!(p, 0.45145, epsilon = 1e-12);
    }

    #[test]
    fn absent_polarizer_is_an_error() {
        let s = EntangledState::real(0.4).unwrap();
        let p = PolarizerSetting::ideal(0.3);
        assert_eq!(
            joint_pass_probability(&s, &p, &PolarizerSetting::Absent),
            Err(ModelError::PolarizerAbsent)
        );
        assert_eq!(
            joint_outcome_distribution(&s, &PolarizerSetting::Absent, &p),
            Err(ModelError::PolarizerAbsent)
        );
        assert_eq!(
            single_pass_probability(&s, &PolarizerSetting::Absent, Arm::One),
            Err(ModelError::PolarizerAbsent)
        );
    }

    #[test]
    fn distribution_examples() {
        let s1 = EntangledState::real(1.0).unwrap();
        let d = joint_outcome_distribution(&s1, &PolarizerSetting::ideal(0.0), &PolarizerSetting::ideal(0.0)).unwrap();
        for (got, want) in d.as_array().iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let s0 = EntangledState::real(0.0).unwrap();
        let d = joint_outcome_distribution(&s0, &PolarizerSetting::ideal(0.0), &PolarizerSetting::ideal(0.0)).unwrap();
        for (got, want) in d.as_array().iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let s = EntangledState::real(0.4).unwrap();
        let d = joint_outcome_distribution(
            &s,
            &PolarizerSetting::ideal(deg(72.24)),
            &PolarizerSetting::ideal(deg(45.0)),
        )
        .unwrap();
        let want = [
            0.497_516_466_155_622_06,
            0.297_176_086_758_222_2,
            0.002_483_533_844_377_77,
            0.202_823_913_241_777_84,
        ];
        for (got, want) in d.as_array().iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_and_absent_examples() {
        let s1 = EntangledState::real(1.0).unwrap();
        for th in [0.0, 0.3, 1.1, 2.9] {
            let p = single_pass_probability(&s1, &PolarizerSetting::ideal(th), Arm::Two).unwrap();
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        }
        let p = pass_absent_probability(&s1, &PolarizerSetting::ideal(deg(22.5)), Arm::One).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);

        let s = EntangledState::real(0.4).unwrap();
        let p = single_pass_probability(&s, &PolarizerSetting::ideal(0.0), Arm::One).unwrap();
        assert_abs_diff_eq!(p, 0.16 / 1.16, epsilon = 1e-15);
        let p = pass_absent_probability(&s, &PolarizerSetting::ideal(0.0), Arm::One).unwrap();
        assert_abs_diff_eq!(p, 0.13793, epsilon = 1e-5);

        // two-path oracle
        let p = single_pass_probability(&s, &present(deg(30.0), 0.95, 0.02), Arm::One).unwrap();
        assert_abs_diff_eq!(p, 0.316_637_931_034_482_7, epsilon = 1e-12);

        // pinned, and cross-checked against a wide-open second arm
        let pol = PolarizerSetting::ideal(deg(17.76));
        let p = pass_absent_probability(&s, &pol, Arm::One).unwrap();
        assert_abs_diff_eq!(p, 0.205_307_447_086_155_56, epsilon = 1e-12);
        let open = present(0.7, 1.0, 1.0);
        let d = joint_outcome_distribution(&s, &pol, &open).unwrap();
        assert_abs_diff_eq!(d.p_pp, p, epsilon = 1e-12);
    }

    #[test]
    fn outcome_distribution_handles_absent_arms() {
        let s = EntangledState::real(0.4).unwrap();
        let both = outcome_distribution(&s, &PolarizerSetting::Absent, &PolarizerSetting::Absent).unwrap();
        assert_eq!(both.p_pp, 1.0);
        let pol = PolarizerSetting::ideal(deg(17.76));
        let one = outcome_distribution(&s, &pol, &PolarizerSetting::Absent).unwrap();
        assert_abs_diff_eq!(one.p_pp, 0.205_307_447_086_155_56, epsilon = 1e-12);
        assert_abs_diff_eq!(one.total(), 1.0, epsilon = 1e-15);
        let two = outcome_distribution(&s, &PolarizerSetting::Absent, &pol).unwrap();
        assert_abs_diff_eq!(two.p_pp, one.p_pp, epsilon = 1e-15);
        assert_eq!(two.p_bp, 0.0);
    }

    #[test]
    fn visibility_examples() {
        for f in [0.2, 0.4, 1.0] {
            let s = EntangledState::real(f).unwrap();
            for th in [30.0, 45.0, 72.24] {
                let v = visibility(&s, &PolarizerSetting::ideal(deg(th)), 1.0, 0.0).unwrap();
                assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
            }
        }
        let s0 = EntangledState::real(0.0).unwrap();
        let v = visibility(&s0, &PolarizerSetting::ideal(deg(45.0)), 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);

        // grid-scan oracle over 10^4 points
        let s = EntangledState::real(0.4).unwrap();
        let pol = present(deg(45.0), 0.95, 0.02);
        let v = visibility(&s, &pol, 0.95, 0.02).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..10_000 {
            let th2 = std::f64::consts::PI * k as f64 / 10_000.0;
            let n = path_oracle(0.4, deg(45.0), th2, Transmission::new(0.95, 0.02).unwrap(), Transmission::new(0.95, 0.02).unwrap());
            lo = lo.min(n);
            hi = hi.max(n);
        }
        let grid = (hi - lo) / (hi + lo);
        assert_abs_diff_eq!(grid, 0.940_165_660_670_134_1, epsilon = 1e-12);
        assert!(v < 1.0);
        assert_abs_diff_eq!(v, grid, epsilon = 1e-6);
        assert!(v >= grid - 1e-12);
    }

    #[test]
    fn visibility_degenerate_curve() {
        let s = EntangledState::real(0.4).unwrap();
        let dark = present(0.3, 0.0, 0.0);
        assert_eq!(visibility(&s, &dark, 1.0, 0.0), Err(ModelError::DegenerateCurve));
        let pol = PolarizerSetting::ideal(0.3);
        assert_eq!(visibility(&s, &pol, 0.0, 0.0), Err(ModelError::DegenerateCurve));
    }

    #[test]
    fn normalization_and_marginals_over_random_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let r: f64 = rng.random_range(0.0..1.0);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let s = EntangledState::new(r * phase.cos(), r * phase.sin()).unwrap();
            let mut pol = || {
                let par: f64 = rng.random_range(0.0..=1.0);
                let perp: f64 = rng.random_range(0.0..=par);
                present(rng.random_range(-4.0..4.0), par, perp)
            };
            let (p1, p2) = (pol(), pol());
            let d = joint_outcome_distribution(&s, &p1, &p2).unwrap();
            assert!((d.total() - 1.0).abs() <= 1e-12);
            for p in d.as_array() {
                assert!((0.0..=1.0).contains(&p));
            }
            let m1 = single_pass_probability(&s, &p1, Arm::One).unwrap();
            let m2 = single_pass_probability(&s, &p2, Arm::Two).unwrap();
            assert!((d.p_pp + d.p_pb - m1).abs() <= 1e-12);
            assert!((d.p_pp + d.p_bp - m2).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn arm_swap_symmetry(f in 0.0..=1.0f64, th1 in -4.0..4.0f64, th2 in -4.0..4.0f64,
                             par1 in 0.0..=1.0f64, r1 in 0.0..=1.0f64, par2 in 0.0..=1.0f64, r2 in 0.0..=1.0f64) {
            let s = EntangledState::real(f).unwrap();
            let a = present(th1, par1, par1 * r1);
            let b = present(th2, par2, par2 * r2);
            let ab = joint_pass_probability(&s, &a, &b).unwrap();
            let ba = joint_pass_probability(&s, &b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-14);
        }

        #[test]
        fn closed_form_matches_path_oracle(f in 0.0..=1.0f64, th1 in -4.0..4.0f64, th2 in -4.0..4.0f64,
                                           par1 in 0.0..=1.0f64, r1 in 0.0..=1.0f64, par2 in 0.0..=1.0f64, r2 in 0.0..=1.0f64) {
            let s = EntangledState::real(f).unwrap();
            let t1 = Transmission::new(par1, par1 * r1).unwrap();
            let t2 = Transmission::new(par2, par2 * r2).unwrap();
            let p = joint_pass_probability(&s, &PolarizerSetting::new(th1, t1).unwrap(), &PolarizerSetting::new(th2, t2).unwrap()).unwrap();
            prop_assert!((p - path_oracle(f, th1, th2, t1, t2)).abs() <= 1e-12);
        }

        #[test]
        fn ideal_reduction_to_amplitude(f in 0.0..=1.0f64, th1 in -4.0..4.0f64, th2 in -4.0..4.0f64) {
            let s = EntangledState::real(f).unwrap();
            let p = joint_pass_probability(&s, &PolarizerSetting::ideal(th1), &PolarizerSetting::ideal(th2)).unwrap();
            let amp = f * th1.cos() * th2.cos() + th1.sin() * th2.sin();
            prop_assert!((p - amp * amp / (1.0 + f * f)).abs() <= 1e-12);
        }

        #[test]
        fn pure_state_visibility_is_one(f in 0.01..=1.0f64, th1 in 0.05..1.52f64) {
            let s = EntangledState::real(f).unwrap();
            let v = visibility(&s, &PolarizerSetting::ideal(th1), 1.0, 0.0).unwrap();
            prop_assert!((v - 1.0).abs() <= 1e-9);
        }
    }
}
