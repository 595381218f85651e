//! Monte Carlo execution of pulse programs on a single defect.
//!
//! Each shot follows one charge trajectory (exponential waiting times from
//! the laser-dependent rates) and one nuclear-spin trajectory. Nuclear
//! states survive charge conversion; they relax towards the fully mixed state
//! with the `T1` of whichever manifold is occupied. An rf pulse acts on the
//! transition of the occupied manifold closest to its frequency, with the flip
//! probability taken from the Bloch integrator. The bright state only
//! responds while the electron sits in `m_S = 0`.
//!
//! Initialization succeeds with probability `F`. A shot reports the true
//! flip (final state against the post-initialization state) only when both
//! initialization and readout succeed and the complement otherwise, which
//! bounds the contrast to `[1 − F², F²]`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{flip_probability_with, BlochError, DriveParams, IntegratorConfig};
use crate::dsl::{expand_sweeps, Instruction, LaserColor, ProgramError, PulseProgram, Value};
use crate::kinetics::{evolve_populations, steady_state, ChargeKinetics, ChargePopulations, KineticsError, Laser};
use crate::readout::{ReadoutError, ReadoutModel};
use crate::spin::{dark_line_visibility, DarkBranch, HalfInt, SpinSystem};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QndError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("rf frequency must be positive, got {0} Hz")]
    RfFrequency(f64),
    #[error("instruction {0} drives a transition before any nuclear initialization")]
    UndefinedTransition(usize),
    #[error("program has no nuclear initialization to compare the readout against")]
    NoInitialization,
    #[error("n_shots must be ≥ 1")]
    NoShots,
    #[error("grid is empty")]
    EmptyGrid,
    #[error("RNG stream index overflows at point {point} with {n_shots} shots per point")]
    RngStreamExhausted { point: u64, n_shots: u64 },
    #[error("electron polarization must lie in [0, 1], got {0}")]
    Polarization(f64),
    #[error("contrast 2F² − 1 vanishes or is negative for F = {0}")]
    ContrastUndefined(f64),
    #[error(transparent)]
    Bloch(#[from] BlochError),
    #[error(transparent)]
    Readout(#[from] ReadoutError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeState {
    Bright,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Probability of `m_S = 0` on entering the bright state or after a
    /// laser pulse.
    pub p_pol: f64,
    /// Green power that sets the charge distribution at the start of a shot.
    pub green_power_mw: f64,
    /// Field at and above which only one dark `m_M` branch is populated.
    pub visibility_threshold_t: f64,
    /// Replaces the green steady state at the start of each shot.
    pub initial_populations: Option<ChargePopulations>,
    pub integrator: IntegratorConfig,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            p_pol: 0.92,
            green_power_mw: crate::kinetics::DEFAULT_GREEN_POWER_MW,
            visibility_threshold_t: 0.4,
            initial_populations: None,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub system: SpinSystem,
    pub kinetics: ChargeKinetics,
    pub readout: ReadoutModel,
    pub options: ExperimentOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub initial_charge: ChargeState,
    /// Charge state during the first rf pulse, if any.
    pub charge_at_rf: Option<ChargeState>,
    pub charge_at_readout: ChargeState,
    pub nuclear_flip_true: bool,
    pub reported_flip: bool,
    pub rng_stream_id: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub shots: u64,
    pub flips: u64,
}

impl Tally {
    fn add(&mut self, flip: bool) {
        self.shots += 1;
        self.flips += u64::from(flip);
    }

    fn merge(self, o: Tally) -> Tally {
        Tally { shots: self.shots + o.shots, flips: self.flips + o.flips }
    }

    pub fn fraction(&self) -> f64 {
        if self.shots == 0 {
            0.0
        } else {
            self.flips as f64 / self.shots as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChargeBreakdown {
    pub bright: Tally,
    pub dark: Tally,
}

impl ChargeBreakdown {
    fn add(&mut self, state: ChargeState, flip: bool) {
        match state {
            ChargeState::Bright => self.bright.add(flip),
            ChargeState::Dark => self.dark.add(flip),
        }
    }

    fn merge(self, o: ChargeBreakdown) -> ChargeBreakdown {
        ChargeBreakdown { bright: self.bright.merge(o.bright), dark: self.dark.merge(o.dark) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub n_shots: u64,
    pub flips: u64,
    pub flip_fraction: f64,
    /// Binomial standard error `√(f(1−f)/n)`.
    pub stderr: f64,
    /// Reported flips split by the charge state at the start of the shot.
    pub by_initial_charge: ChargeBreakdown,
    /// Split by the charge state during the first rf pulse.
    pub by_charge_at_rf: ChargeBreakdown,
    /// Number of shots in which the nuclear state really changed.
    pub true_flips: u64,
}

impl ExperimentResult {
    pub fn from_records(records: &[ShotRecord]) -> Self {
        records.iter().fold(Accumulator::default(), |a, r| a.push(r)).finish()
    }
}

#[derive(Default, Clone, Copy)]
struct Accumulator {
    all: Tally,
    initial: ChargeBreakdown,
    at_rf: ChargeBreakdown,
    true_flips: u64,
}

impl Accumulator {
    fn push(mut self, r: &ShotRecord) -> Self {
        self.all.add(r.reported_flip);
        self.initial.add(r.initial_charge, r.reported_flip);
        if let Some(c) = r.charge_at_rf {
            self.at_rf.add(c, r.reported_flip);
        }
        self.true_flips += u64::from(r.nuclear_flip_true);
        self
    }

    fn merge(self, o: Self) -> Self {
        Self {
            all: self.all.merge(o.all),
            initial: self.initial.merge(o.initial),
            at_rf: self.at_rf.merge(o.at_rf),
            true_flips: self.true_flips + o.true_flips,
        }
    }

    fn finish(self) -> ExperimentResult {
        let n = self.all.shots;
        let f = self.all.fraction();
        ExperimentResult {
            n_shots: n,
            flips: self.all.flips,
            flip_fraction: f,
            stderr: if n == 0 { 0.0 } else { (f * (1.0 - f) / n as f64).sqrt() },
            by_initial_charge: self.initial,
            by_charge_at_rf: self.at_rf,
            true_flips: self.true_flips,
        }
    }
}

/// `(1 − F²) + p_res·(2F² − 1)·P_flip`: reported flip fraction when a share
/// `p_res` of the shots sees the resonant flip probability `P_flip`.
pub fn expected_flip_fraction(fidelity: f64, p_resonant: f64, p_flip: f64) -> f64 {
    let f2 = fidelity * fidelity;
    (1.0 - f2) + p_resonant * (2.0 * f2 - 1.0) * p_flip
}

/// Populations recovered from NMR line amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeducedPopulations {
    /// Clamped to `[0, 1]`.
    pub p_bright: f64,
    /// Clamped to `[0, 1]`.
    pub p_dark: f64,
    /// `1 − p_bright − p_dark` from the clamped values.
    pub remainder: f64,
    pub raw_bright: f64,
    pub raw_dark: f64,
}

/// Inverts the contrast algebra. A dark line only ever flips half of its
/// population (saturated incoherent drive), hence the factor 2.
pub fn deduce_populations(bright_amp: f64, dark_amp: f64, fidelity: f64) -> Result<DeducedPopulations, QndError> {
    let contrast = 2.0 * fidelity * fidelity - 1.0;
    if !(contrast > 0.0) || fidelity > 1.0 {
        return Err(QndError::ContrastUndefined(fidelity));
    }
    let base = 1.0 - fidelity * fidelity;
    let raw_bright = (bright_amp - base) / contrast;
    let raw_dark = 2.0 * (dark_amp - base) / contrast;
    let p_bright = raw_bright.clamp(0.0, 1.0);
    let p_dark = raw_dark.clamp(0.0, 1.0);
    Ok(DeducedPopulations { p_bright, p_dark, remainder: 1.0 - p_bright - p_dark, raw_bright, raw_dark })
}

/// Photon shot noise: scales `signal` so that its sum is `total_counts` and
/// draws a Poisson count per bin. Returns the counts as floats.
pub fn shot_noise_counts(signal: &[f64], total_counts: f64, seed: u64) -> Vec<f64> {
    let sum: f64 = signal.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    signal
        .iter()
        .map(|&s| {
            let mean = s / sum * total_counts;
            if mean > 0.0 {
                rand_distr::Poisson::new(mean).expect("positive mean").sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect()
}

/// Rectangular rf pulse parameters shared by the scan helpers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfPulse {
    pub rabi_hz: f64,
    pub duration_s: f64,
}

/// `init → rf → readout`.
pub fn rf_program(target: HalfInt, frequency_hz: f64, pulse: RfPulse) -> PulseProgram {
    PulseProgram {
        name: "rf".into(),
        instructions: vec![
            Instruction::InitNuclear { target },
            Instruction::Rf {
                frequency: Value::Fixed(frequency_hz),
                rabi: Value::Fixed(pulse.rabi_hz),
                duration: Value::Fixed(pulse.duration_s),
            },
            Instruction::Readout,
        ],
        sweeps: Vec::new(),
    }
}

/// `init → red pulse → rf → readout`, one row of the dark-state map.
pub fn red_then_rf_program(target: HalfInt, red_power_mw: f64, red_s: f64, frequency_hz: f64, pulse: RfPulse) -> PulseProgram {
    let mut p = rf_program(target, frequency_hz, pulse);
    p.name = "red_then_rf".into();
    p.instructions.insert(
        1,
        Instruction::Laser { color: LaserColor::Red, power: Value::Fixed(red_power_mw * 1e-3), duration: Value::Fixed(red_s) },
    );
    p
}

#[derive(Clone, Copy)]
struct RfEffect {
    from: HalfInt,
    to: HalfInt,
    p: f64,
}

#[derive(Clone, Copy)]
enum Step {
    Init(HalfInt),
    /// Rates in 1/s.
    Laser { r_bd: f64, r_db: f64, duration: f64, lit: bool },
    Wait(f64),
    Rf { bright: RfEffect, dark: [RfEffect; 2] },
    Readout,
}

/// Bit pattern of `(frequency, rabi, duration)` of an rf pulse.
type RfKey = [u64; 3];

/// Bright effect plus one per dark branch.
type RfEffects = (RfEffect, [RfEffect; 2]);

type RfCache = HashMap<RfKey, RfEffects>;

#[derive(Clone, Copy, PartialEq)]
enum Occupied {
    Bright { ms0: bool },
    Dark(DarkBranch),
}

impl Occupied {
    fn charge(self) -> ChargeState {
        match self {
            Occupied::Bright { .. } => ChargeState::Bright,
            Occupied::Dark(_) => ChargeState::Dark,
        }
    }
}

fn fixed(v: &Value, index: usize) -> Result<f64, QndError> {
    match v {
        Value::Fixed(x) => Ok(*x),
        Value::Sweep(name) => Err(ProgramError::UnresolvedSweep { index, name: name.clone() }.into()),
    }
}

fn branch_index(b: DarkBranch) -> usize {
    match b {
        DarkBranch::Plus => 0,
        DarkBranch::Minus => 1,
    }
}

impl Experiment {
    pub fn new(system: SpinSystem, kinetics: ChargeKinetics, readout: ReadoutModel) -> Self {
        Self { system, kinetics, readout, options: ExperimentOptions::default() }
    }

    pub fn with_options(mut self, options: ExperimentOptions) -> Self {
        self.options = options;
        self
    }

    fn fidelity(&self) -> Result<f64, QndError> {
        Ok(self.readout.effective_fidelity()?)
    }

    /// Charge distribution at the start of every shot.
    pub fn initial_populations(&self) -> Result<ChargePopulations, QndError> {
        match self.options.initial_populations {
            Some(p) => Ok(ChargePopulations::new(p.p_bright, p.p_dark)?),
            None => Ok(steady_state(&self.kinetics, Laser::Green, self.options.green_power_mw)?),
        }
    }

    fn visible_branches(&self) -> Vec<DarkBranch> {
        dark_line_visibility(self.system.field_t(), self.options.visibility_threshold_t)
    }

    fn validate(&self) -> Result<(), QndError> {
        self.readout.validate()?;
        self.kinetics.validate()?;
        if !(0.0..=1.0).contains(&self.options.p_pol) {
            return Err(QndError::Polarization(self.options.p_pol));
        }
        Ok(())
    }

    fn rf_effect(&self, branch: Option<DarkBranch>, rf_hz: f64, rabi_hz: f64, duration_s: f64) -> Result<RfEffect, QndError> {
        let manifold = match branch {
            None => self.system.bright(),
            Some(b) => self.system.dark(b),
        };
        let t = self.system.nearest_transition(manifold, rf_hz * 1e-6);
        let relax = manifold.relaxation();
        let drive = DriveParams::new(rabi_hz, rf_hz - t.frequency_mhz * 1e6, duration_s);
        let p = flip_probability_with(&drive, relax.t2_s, relax.t1_s, &self.options.integrator)?;
        Ok(RfEffect { from: t.m_from, to: t.m_to, p })
    }

    fn rf_effects(&self, f: f64, rabi: f64, duration: f64) -> Result<RfEffects, QndError> {
        Ok((
            self.rf_effect(None, f, rabi, duration)?,
            [
                self.rf_effect(Some(DarkBranch::Plus), f, rabi, duration)?,
                self.rf_effect(Some(DarkBranch::Minus), f, rabi, duration)?,
            ],
        ))
    }

    /// Effects of every distinct fixed rf pulse in `programs`, integrated once.
    fn rf_cache(&self, programs: &[PulseProgram]) -> Result<RfCache, QndError> {
        let mut keys: Vec<RfKey> = programs
            .iter()
            .flat_map(|p| &p.instructions)
            .filter_map(|ins| match ins {
                Instruction::Rf { frequency: Value::Fixed(f), rabi: Value::Fixed(r), duration: Value::Fixed(d) } if *f > 0.0 => {
                    Some([f.to_bits(), r.to_bits(), d.to_bits()])
                }
                _ => None,
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_par_iter()
            .map(|k| Ok((k, self.rf_effects(f64::from_bits(k[0]), f64::from_bits(k[1]), f64::from_bits(k[2]))?)))
            .collect()
    }

    fn compile(&self, program: &PulseProgram, cache: Option<&RfCache>) -> Result<Vec<Step>, QndError> {
        program.validate_for(self.system.isotope())?;
        let mut steps = Vec::with_capacity(program.instructions.len());
        let mut initialized = false;
        for (i, ins) in program.instructions.iter().enumerate() {
            let step = match ins {
                Instruction::InitNuclear { target } => {
                    initialized = true;
                    Step::Init(*target)
                }
                Instruction::Laser { color, power, duration } => {
                    let power_mw = fixed(power, i)? * 1e3;
                    let laser = match color {
                        LaserColor::Red => Laser::Red,
                        LaserColor::Green => Laser::Green,
                    };
                    let (r_bd, r_db) = self.kinetics.rates(laser, power_mw);
                    let duration = fixed(duration, i)?;
                    Step::Laser { r_bd: r_bd * 1e6, r_db: r_db * 1e6, duration, lit: power_mw > 0.0 && duration > 0.0 }
                }
                Instruction::Wait { duration } => Step::Wait(fixed(duration, i)?),
                Instruction::Rf { frequency, rabi, duration } => {
                    if !initialized {
                        return Err(QndError::UndefinedTransition(i));
                    }
                    let f = fixed(frequency, i)?;
                    if !(f > 0.0) {
                        return Err(QndError::RfFrequency(f));
                    }
                    let (rabi, duration) = (fixed(rabi, i)?, fixed(duration, i)?);
                    let cached = cache.and_then(|c| c.get(&[f.to_bits(), rabi.to_bits(), duration.to_bits()]));
                    let (bright, dark) = match cached {
                        Some(e) => *e,
                        None => self.rf_effects(f, rabi, duration)?,
                    };
                    Step::Rf { bright, dark }
                }
                Instruction::Readout => {
                    if !initialized {
                        return Err(QndError::NoInitialization);
                    }
                    Step::Readout
                }
            };
            steps.push(step);
        }
        Ok(steps)
    }

    /// Closed-form flip fraction for the compiled program: the charge
    /// distribution follows the master equation up to the first rf pulse and
    /// the result is [`expected_flip_fraction`]. Nuclear `T1` and
    /// initialization failures into a level the pulse does not address (N14)
    /// are neglected.
    pub fn analytic_flip_fraction(&self, program: &PulseProgram) -> Result<f64, QndError> {
        self.validate()?;
        let steps = self.compile(program, None)?;
        let f = self.fidelity()?;
        let mut pop = self.initial_populations()?;
        let mut target = None;
        let branches = self.visible_branches();
        for (ins, step) in program.instructions.iter().zip(&steps) {
            match (ins, step) {
                (_, Step::Init(t)) => target = Some(*t),
                (Instruction::Laser { color, power, duration }, _) => {
                    let laser = match color {
                        LaserColor::Red => Laser::Red,
                        LaserColor::Green => Laser::Green,
                    };
                    pop = evolve_populations(pop, &self.kinetics, laser, fixed(power, 0)? * 1e3, fixed(duration, 0)?);
                }
                (_, Step::Rf { bright, dark }) => {
                    let t = target.expect("compile checks initialization");
                    let hit = |e: &RfEffect| if e.from == t || e.to == t { e.p } else { 0.0 };
                    let dark_share: f64 =
                        branches.iter().map(|b| hit(&dark[branch_index(*b)])).sum::<f64>() / branches.len() as f64;
                    let p = pop.p_bright * self.options.p_pol * hit(bright) + pop.p_dark * dark_share;
                    return Ok(expected_flip_fraction(f, 1.0, p));
                }
                _ => {}
            }
        }
        Ok(expected_flip_fraction(f, 0.0, 0.0))
    }

    /// Every shot of one grid point. Shot `s` of point `k` draws from stream
    /// `k·n_shots + s` of a ChaCha8 generator keyed by `seed`.
    pub fn run_shots(&self, program: &PulseProgram, n_shots: u64, seed: u64, point_index: u64) -> Result<Vec<ShotRecord>, QndError> {
        let ctx = self.prepare(program, n_shots, point_index, None)?;
        Ok((0..n_shots).into_par_iter().map(|s| self.shot(&ctx, seed, ctx.base + s)).collect())
    }

    /// Aggregated result of one grid point; see [`Experiment::run_shots`].
    pub fn run_point(&self, program: &PulseProgram, n_shots: u64, seed: u64, point_index: u64) -> Result<ExperimentResult, QndError> {
        self.run_point_cached(program, n_shots, seed, point_index, None)
    }

    fn run_point_cached(
        &self,
        program: &PulseProgram,
        n_shots: u64,
        seed: u64,
        point_index: u64,
        cache: Option<&RfCache>,
    ) -> Result<ExperimentResult, QndError> {
        let ctx = self.prepare(program, n_shots, point_index, cache)?;
        Ok((0..n_shots)
            .into_par_iter()
            .map(|s| Accumulator::default().push(&self.shot(&ctx, seed, ctx.base + s)))
            .reduce(Accumulator::default, Accumulator::merge)
            .finish())
    }

    pub fn run_sequence(&self, program: &PulseProgram, n_shots: u64, seed: u64) -> Result<ExperimentResult, QndError> {
        self.run_point(program, n_shots, seed, 0)
    }

    /// Runs each program as its own grid point (point index = position).
    pub fn run_grid(&self, programs: &[PulseProgram], n_shots: u64, seed: u64) -> Result<Vec<ExperimentResult>, QndError> {
        if programs.is_empty() {
            return Err(QndError::EmptyGrid);
        }
        if n_shots == 0 {
            return Err(QndError::NoShots);
        }
        self.validate()?;
        let cache = self.rf_cache(programs)?;
        programs.par_iter().enumerate().map(|(i, p)| self.run_point_cached(p, n_shots, seed, i as u64, Some(&cache))).collect()
    }

    /// Expands the program's sweeps and runs every point.
    pub fn run_sweeps(&self, program: &PulseProgram, n_shots: u64, seed: u64) -> Result<Vec<(Vec<(String, f64)>, ExperimentResult)>, QndError> {
        let points = expand_sweeps(program)?;
        let programs: Vec<PulseProgram> = points.iter().map(|p| p.program.clone()).collect();
        let results = self.run_grid(&programs, n_shots, seed)?;
        Ok(points.into_iter().map(|p| p.coordinates).zip(results).collect())
    }

    pub fn rabi_scan(
        &self,
        target: HalfInt,
        frequency_hz: f64,
        rabi_hz: f64,
        durations_s: &[f64],
        n_shots: u64,
        seed: u64,
    ) -> Result<Vec<ExperimentResult>, QndError> {
        let programs: Vec<_> =
            durations_s.iter().map(|&t| rf_program(target, frequency_hz, RfPulse { rabi_hz, duration_s: t })).collect();
        self.run_grid(&programs, n_shots, seed)
    }

    pub fn spectrum_scan(
        &self,
        target: HalfInt,
        frequencies_hz: &[f64],
        pulse: RfPulse,
        n_shots: u64,
        seed: u64,
    ) -> Result<Vec<ExperimentResult>, QndError> {
        let programs: Vec<_> = frequencies_hz.iter().map(|&f| rf_program(target, f, pulse)).collect();
        self.run_grid(&programs, n_shots, seed)
    }

    /// Rows follow `red_lengths_s`, columns `frequencies_hz`.
    #[allow(clippy::too_many_arguments)]
    pub fn map2d(
        &self,
        target: HalfInt,
        frequencies_hz: &[f64],
        red_lengths_s: &[f64],
        red_power_mw: f64,
        pulse: RfPulse,
        n_shots: u64,
        seed: u64,
    ) -> Result<Vec<Vec<ExperimentResult>>, QndError> {
        if frequencies_hz.is_empty() || red_lengths_s.is_empty() {
            return Err(QndError::EmptyGrid);
        }
        let programs: Vec<_> = red_lengths_s
            .iter()
            .flat_map(|&l| frequencies_hz.iter().map(move |&f| red_then_rf_program(target, red_power_mw, l, f, pulse)))
            .collect();
        let flat = self.run_grid(&programs, n_shots, seed)?;
        Ok(flat.chunks(frequencies_hz.len()).map(<[_]>::to_vec).collect())
    }

    fn prepare(&self, program: &PulseProgram, n_shots: u64, point_index: u64, cache: Option<&RfCache>) -> Result<ShotContext, QndError> {
        if n_shots == 0 {
            return Err(QndError::NoShots);
        }
        self.validate()?;
        let base = point_index
            .checked_mul(n_shots)
            .and_then(|b| b.checked_add(n_shots - 1).map(|_| b))
            .ok_or(QndError::RngStreamExhausted { point: point_index, n_shots })?;
        let steps = self.compile(program, cache)?;
        let levels = self.system.isotope().projections();
        let branches = self.visible_branches();
        let t1 = [
            self.system.bright().relaxation().t1_s,
            self.system.dark(DarkBranch::Plus).relaxation().t1_s,
            self.system.dark(DarkBranch::Minus).relaxation().t1_s,
        ];
        Ok(ShotContext {
            steps,
            levels,
            branches,
            t1,
            initial: self.initial_populations()?,
            fidelity: self.fidelity()?,
            base,
        })
    }

    fn shot(&self, ctx: &ShotContext, seed: u64, stream: u64) -> ShotRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let p_pol = self.options.p_pol;
        let enter_dark = |rng: &mut ChaCha8Rng| {
            let b = &ctx.branches;
            Occupied::Dark(if b.len() == 1 { b[0] } else { b[rng.random_range(0..b.len())] })
        };
        let mut occ = if rng.random_bool(ctx.initial.p_dark) {
            enter_dark(&mut rng)
        } else {
            Occupied::Bright { ms0: rng.random_bool(p_pol) }
        };
        let initial_charge = occ.charge();
        let mut m = ctx.levels[rng.random_range(0..ctx.levels.len())];
        let mut reference = m;
        let mut init_ok = true;
        let mut charge_at_rf = None;

        for step in &ctx.steps {
            match *step {
                Step::Init(target) => {
                    init_ok = rng.random_bool(ctx.fidelity);
                    m = if init_ok {
                        target
                    } else {
                        let others: Vec<HalfInt> = ctx.levels.iter().copied().filter(|&l| l != target).collect();
                        others[rng.random_range(0..others.len())]
                    };
                    reference = m;
                }
                Step::Laser { r_bd, r_db, duration, lit } => {
                    let mut remaining = duration;
                    loop {
                        let out = match occ {
                            Occupied::Bright { .. } => r_bd,
                            Occupied::Dark(_) => r_db,
                        };
                        let wait = if out > 0.0 { Exp::new(out).expect("positive rate").sample(&mut rng) } else { f64::INFINITY };
                        if wait >= remaining {
                            ctx.relax(&mut m, occ, remaining, &mut rng);
                            break;
                        }
                        ctx.relax(&mut m, occ, wait, &mut rng);
                        remaining -= wait;
                        occ = match occ {
                            Occupied::Bright { .. } => enter_dark(&mut rng),
                            Occupied::Dark(_) => Occupied::Bright { ms0: rng.random_bool(p_pol) },
                        };
                    }
                    if lit {
                        if let Occupied::Bright { .. } = occ {
                            occ = Occupied::Bright { ms0: rng.random_bool(p_pol) };
                        }
                    }
                }
                Step::Wait(t) => ctx.relax(&mut m, occ, t, &mut rng),
                Step::Rf { bright, dark } => {
                    charge_at_rf.get_or_insert(occ.charge());
                    let effect = match occ {
                        Occupied::Bright { ms0: true } => Some(bright),
                        Occupied::Bright { ms0: false } => None,
                        Occupied::Dark(b) => Some(dark[branch_index(b)]),
                    };
                    if let Some(e) = effect {
                        let partner = if m == e.from {
                            Some(e.to)
                        } else if m == e.to {
                            Some(e.from)
                        } else {
                            None
                        };
                        if let Some(p) = partner {
                            if rng.random_bool(e.p) {
                                m = p;
                            }
                        }
                    }
                }
                Step::Readout => break,
            }
        }
        let true_flip = m != reference;
        let readout_ok = self.readout.sample(true_flip, &mut rng) == true_flip;
        ShotRecord {
            initial_charge,
            charge_at_rf,
            charge_at_readout: occ.charge(),
            nuclear_flip_true: true_flip,
            reported_flip: true_flip ^ !(init_ok && readout_ok),
            rng_stream_id: stream,
        }
    }
}

struct ShotContext {
    steps: Vec<Step>,
    levels: Vec<HalfInt>,
    branches: Vec<DarkBranch>,
    /// Nuclear T1 for bright, dark+ and dark−.
    t1: [f64; 3],
    initial: ChargePopulations,
    fidelity: f64,
    base: u64,
}

impl ShotContext {
    /// With probability `1 − e^(−dt/T1)` the nuclear state is replaced by a
    /// uniformly random level.
    fn relax(&self, m: &mut HalfInt, occ: Occupied, dt: f64, rng: &mut ChaCha8Rng) {
        if dt <= 0.0 {
            return;
        }
        let t1 = match occ {
            Occupied::Bright { .. } => self.t1[0],
            Occupied::Dark(b) => self.t1[1 + branch_index(b)],
        };
        if rng.random::<f64>() < -(-dt / t1).exp_m1() {
            *m = self.levels[rng.random_range(0..self.levels.len())];
        }
    }
}
