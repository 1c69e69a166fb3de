//! Event-level simulation of the counting experiment: Poisson pair emission,
//! polarizer outcomes, detector thinning and dark counts, and coincidence
//! matching of the two timestamp streams.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ch::{AngleQuad, CountRecord, EfficiencyModel, PolarizerPair, Setting};
use crate::error::{ModelError, Result};
use crate::state::{outcome_distribution, EntangledState, PolarizerSetting};

/// Default coincidence window (s).
pub const DEFAULT_WINDOW: f64 = 10e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub eta: f64,
    /// dark counts per second
    pub dark_rate: f64,
    /// standard deviation of the Gaussian timing jitter (s)
    pub jitter_sigma: f64,
}

impl DetectorModel {
    pub fn new(eta: f64, dark_rate: f64, jitter_sigma: f64) -> Result<Self> {
        let d = DetectorModel {
            eta,
            dark_rate,
            jitter_sigma,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && (0.0..=1.0).contains(&self.eta)) {
            return Err(ModelError::InvalidDetector("eta"));
        }
        if !(self.dark_rate.is_finite() && self.dark_rate >= 0.0) {
            return Err(ModelError::InvalidDetector("dark_rate"));
        }
        if !(self.jitter_sigma.is_finite() && self.jitter_sigma >= 0.0) {
            return Err(ModelError::InvalidDetector("jitter_sigma"));
        }
        Ok(())
    }
}

/// Start-stop coincidence logic with a total acceptance width `window`,
/// centered on zero delay: events pair when `|t1 - t2| <= window / 2`.
/// Each event takes part in at most one coincidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceLogic {
    window: f64,
}

impl CoincidenceLogic {
    pub fn new(window: f64) -> Result<Self> {
        if !(window.is_finite() && window > 0.0) {
            return Err(ModelError::InvalidArgument("coincidence window must be positive"));
        }
        Ok(CoincidenceLogic { window })
    }

    pub fn window(&self) -> f64 {
        self.window
    }
}

impl Default for CoincidenceLogic {
    fn default() -> Self {
        CoincidenceLogic {
            window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub channel: u8,
    pub timestamps: Vec<f64>,
}

impl EventStream {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.timestamps.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairOutcome {
    pub pass1: bool,
    pub pass2: bool,
}

/// SplitMix64 finalizer applied to `master + (index + 1) * golden gamma`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn poisson_times(rng: &mut ChaCha8Rng, rate: f64, duration: f64) -> Vec<f64> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let gap = Exp::new(rate).expect("positive rate");
    let mut times = Vec::with_capacity((rate * duration * 1.05) as usize + 16);
    let mut t = gap.sample(rng);
    while t < duration {
        times.push(t);
        t += gap.sample(rng);
    }
    times
}

/// Homogeneous Poisson emission times in `[0, duration)`.
pub fn simulate_pair_emissions(pair_rate: f64, duration: f64, seed: u64) -> Result<Vec<f64>> {
    if !(pair_rate.is_finite() && pair_rate >= 0.0) {
        return Err(ModelError::InvalidArgument("pair rate must be non-negative"));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(ModelError::InvalidArgument("duration must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(poisson_times(&mut rng, pair_rate, duration))
}

/// Independent pass/block outcomes for `n_pairs` pairs. An absent polarizer
/// passes every photon.
pub fn apply_measurement(
    state: &EntangledState,
    pol1: &PolarizerSetting,
    pol2: &PolarizerSetting,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<PairOutcome>> {
    let d = outcome_distribution(state, pol1, pol2)?;
    let c_pp = d.p_pp;
    let c_pb = c_pp + d.p_pb;
    let c_bp = c_pb + d.p_bp;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_pairs)
        .map(|_| {
            let u: f64 = rng.random();
            if u < c_pp {
                PairOutcome { pass1: true, pass2: true }
            } else if u < c_pb {
                PairOutcome { pass1: true, pass2: false }
            } else if u < c_bp {
                PairOutcome { pass1: false, pass2: true }
            } else {
                PairOutcome { pass1: false, pass2: false }
            }
        })
        .collect())
}

/// Turns passing photons into detector timestamps and merges dark counts.
/// Jittered events falling outside `[0, duration]` are dropped.
pub fn apply_detection(
    emissions: &[f64],
    outcomes: &[PairOutcome],
    det1: &DetectorModel,
    det2: &DetectorModel,
    duration: f64,
    seed: u64,
) -> Result<(EventStream, EventStream)> {
    det1.validate()?;
    det2.validate()?;
    if emissions.len() != outcomes.len() {
        return Err(ModelError::InvalidArgument("one outcome per emission required"));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(ModelError::InvalidArgument("duration must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |d: &DetectorModel| {
        (d.jitter_sigma > 0.0).then(|| Normal::new(0.0, d.jitter_sigma).expect("finite sigma"))
    };
    let (jit1, jit2) = (jitter(det1), jitter(det2));
    let expected = |d: &DetectorModel| (emissions.len() as f64 * d.eta) as usize + 16;
    let mut t1 = Vec::with_capacity(expected(det1));
    let mut t2 = Vec::with_capacity(expected(det2));
    for (&t, o) in emissions.iter().zip(outcomes) {
        if o.pass1 && rng.random::<f64>() < det1.eta {
            t1.push(t + jit1.map_or(0.0, |n| n.sample(&mut rng)));
        }
        if o.pass2 && rng.random::<f64>() < det2.eta {
            t2.push(t + jit2.map_or(0.0, |n| n.sample(&mut rng)));
        }
    }
    t1.extend(poisson_times(&mut rng, det1.dark_rate, duration));
    t2.extend(poisson_times(&mut rng, det2.dark_rate, duration));
    let finish = |mut ts: Vec<f64>, channel| {
        ts.retain(|&t| (0.0..=duration).contains(&t));
        ts.sort_by(f64::total_cmp);
        EventStream { channel, timestamps: ts }
    };
    Ok((finish(t1, 1), finish(t2, 2)))
}

/// Keeps each event independently with probability `keep`.
pub fn thin_stream(stream: &EventStream, keep: f64, seed: u64) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EventStream {
        channel: stream.channel,
        timestamps: stream
            .timestamps
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < keep)
            .collect(),
    }
}

/// Greedy one-shot coincidence count. Walking both streams in time order, the
/// earliest unconsumed event pairs with the earliest unconsumed event of the
/// other stream if the two lie within the window; otherwise it is discarded.
pub fn match_coincidences(s1: &EventStream, s2: &EventStream, logic: &CoincidenceLogic) -> Result<u64> {
    if !s1.is_sorted() {
        return Err(ModelError::UnsortedStream(s1.channel));
    }
    if !s2.is_sorted() {
        return Err(ModelError::UnsortedStream(s2.channel));
    }
    let half = 0.5 * logic.window;
    let (a, b) = (&s1.timestamps, &s2.timestamps);
    let (mut i, mut j, mut count) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        let (x, y) = (a[i], b[j]);
        // timestamps are only resolved to a few ulps of their magnitude
        let slack = 4.0 * f64::EPSILON * x.abs().max(y.abs());
        if (x - y).abs() <= half + slack {
            count += 1;
            i += 1;
            j += 1;
        } else if x < y {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(count)
}

/// Everything needed to simulate the six-setting measurement schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub state: EntangledState,
    pub quad: AngleQuad,
    pub pols: PolarizerPair,
    pub det1: DetectorModel,
    pub det2: DetectorModel,
    pub pair_rate: f64,
    /// seconds per setting
    pub duration: f64,
    pub logic: CoincidenceLogic,
    pub seed: u64,
}

impl ProtocolParams {
    /// Efficiency model matching these detectors, for analytic comparison.
    pub fn efficiency(&self) -> EfficiencyModel {
        EfficiencyModel {
            eta1: self.det1.eta,
            eta2: self.det2.eta,
            pair_rate: self.pair_rate,
            background1: self.det1.dark_rate,
            background2: self.det2.dark_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglesRecord {
    pub setting: Setting,
    pub counts1: u64,
    pub counts2: u64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    /// coincidence counts, in [`Setting::ALL`] order
    pub records: Vec<CountRecord>,
    pub singles: Vec<SinglesRecord>,
}

/// Timestamp streams of one setting. Each setting draws from its own
/// sub-seed `derive_seed(seed, setting index)`.
pub fn simulate_setting(params: &ProtocolParams, setting: Setting) -> Result<(EventStream, EventStream)> {
    let sub = derive_seed(params.seed, setting.index() as u64);
    let emissions = simulate_pair_emissions(params.pair_rate, params.duration, derive_seed(sub, 0))?;
    let (pol1, pol2) = setting.polarizers(&params.quad, &params.pols)?;
    let outcomes = apply_measurement(&params.state, &pol1, &pol2, emissions.len(), derive_seed(sub, 1))?;
    apply_detection(
        &emissions,
        &outcomes,
        &params.det1,
        &params.det2,
        params.duration,
        derive_seed(sub, 2),
    )
}

/// Runs the six settings with equal durations. Settings are simulated
/// concurrently and collected in canonical order.
pub fn run_protocol(params: &ProtocolParams) -> Result<ProtocolRun> {
    params.quad.validate()?;
    params.pols.validate()?;
    let results: Vec<Result<(CountRecord, SinglesRecord)>> = Setting::ALL
        .par_iter()
        .map(|&setting| {
            let (s1, s2) = simulate_setting(params, setting)?;
            let counts = match_coincidences(&s1, &s2, &params.logic)?;
            Ok((
                CountRecord {
                    setting,
                    counts,
                    duration: params.duration,
                },
                SinglesRecord {
                    setting,
                    counts1: s1.len() as u64,
                    counts2: s2.len() as u64,
                    duration: params.duration,
                },
            ))
        })
        .collect();
    let mut records = Vec::with_capacity(6);
    let mut singles = Vec::with_capacity(6);
    for r in results {
        let (c, s) = r?;
        records.push(c);
        singles.push(s);
    }
    Ok(ProtocolRun { records, singles })
}

/// Two-column text export: `channel,timestamp_s` with 12 significant digits,
/// channel 1 first.
pub fn write_event_streams<W: Write>(out: &mut W, s1: &EventStream, s2: &EventStream) -> io::Result<()> {
    writeln!(out, "channel,timestamp_s")?;
    for s in [s1, s2] {
        for t in &s.timestamps {
            writeln!(out, "{},{:.11e}", s.channel, t)?;
        }
    }
    Ok(())
}
