//! Particle swarm search for ASTFT window schedules.
//!
//! Each particle is a whole 16-entry schedule. Fitness is the negative L1
//! distance between the unit-sum ASTFT magnitude and a unit-sum WVD target.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, shape, Result};
use crate::tfa::{
    astft_with_nfft, rescale_grid, wvd, TfGrid, WindowSchedule, MAX_WINDOW, MIN_WINDOW, SCHEDULE_SECTIONS,
};

const DIMS: usize = SCHEDULE_SECTIONS;
/// Fixed DFT length inside the fitness so every candidate shares one
/// frequency axis; otherwise the bin grid moves with the longest window and
/// the landscape picks up ripples unrelated to concentration.
const FITNESS_NFFT: usize = MAX_WINDOW + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub repeats: usize,
    /// Stop once the global best has not improved for this many iterations.
    pub stall_iterations: usize,
    pub seed: u64,
    /// ASTFT hop used inside the fitness.
    pub hop: usize,
    /// The WVD target is resampled once to this size before the search.
    pub aim_rows: usize,
    pub aim_cols: usize,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            max_iterations: 20,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            min_len: MIN_WINDOW,
            max_len: MAX_WINDOW,
            repeats: 10,
            stall_iterations: 5,
            seed: 0,
            hop: crate::tfa::DEFAULT_HOP,
            aim_rows: 64,
            aim_cols: 128,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(invalid("swarm_size must be >= 2"));
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return Err(invalid("inertia must lie in (0, 1)"));
        }
        if !(self.cognitive >= 0.0 && self.social >= 0.0) {
            return Err(invalid("acceleration coefficients must be nonnegative"));
        }
        if self.min_len < MIN_WINDOW || self.max_len > MAX_WINDOW || self.min_len > self.max_len {
            return Err(invalid(format!(
                "bounds [{}, {}] must lie inside [{MIN_WINDOW}, {MAX_WINDOW}]",
                self.min_len, self.max_len
            )));
        }
        if self.repeats == 0 {
            return Err(invalid("repeats must be >= 1"));
        }
        if self.hop == 0 || self.aim_rows == 0 || self.aim_cols == 0 {
            return Err(invalid("hop and aim dimensions must be >= 1"));
        }
        Ok(())
    }

    fn velocity_limit(&self) -> f64 {
        (self.max_len - self.min_len) as f64 / 4.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: [f64; DIMS],
    pub velocity: [f64; DIMS],
    pub best_position: [f64; DIMS],
    pub best_fitness: f64,
}

impl Particle {
    pub fn schedule(&self) -> WindowSchedule {
        to_schedule(&self.position)
    }
}

fn to_schedule(position: &[f64; DIMS]) -> WindowSchedule {
    let mut lengths = [0usize; DIMS];
    for (l, p) in lengths.iter_mut().zip(position) {
        *l = (p.round() as usize).clamp(MIN_WINDOW, MAX_WINDOW);
    }
    WindowSchedule::new(lengths).expect("rounded positions stay within bounds")
}

/// Swarm state; the caller alternates [`Swarm::step`] and [`Swarm::absorb`].
#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best: [f64; DIMS],
    pub global_fitness: f64,
    config: SwarmConfig,
}

impl Swarm {
    /// Positions uniform in bounds, velocities zero, no fitness yet.
    pub fn new<R: Rng>(config: &SwarmConfig, rng: &mut R) -> Self {
        let (lo, hi) = (config.min_len as f64, config.max_len as f64);
        let particles = (0..config.swarm_size)
            .map(|_| {
                let mut position = [0.0; DIMS];
                for p in &mut position {
                    *p = rng.gen_range(lo..=hi);
                }
                Particle {
                    position,
                    velocity: [0.0; DIMS],
                    best_position: position,
                    best_fitness: f64::NEG_INFINITY,
                }
            })
            .collect();
        Self {
            particles,
            global_best: [lo; DIMS],
            global_fitness: f64::NEG_INFINITY,
            config: config.clone(),
        }
    }

    /// One velocity/position update with clamping.
    pub fn step<R: Rng>(&mut self, rng: &mut R) {
        let c = &self.config;
        let vmax = c.velocity_limit();
        let (lo, hi) = (c.min_len as f64, c.max_len as f64);
        for p in &mut self.particles {
            for d in 0..DIMS {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let v = c.inertia * p.velocity[d]
                    + c.cognitive * r1 * (p.best_position[d] - p.position[d])
                    + c.social * r2 * (self.global_best[d] - p.position[d]);
                p.velocity[d] = v.clamp(-vmax, vmax);
                p.position[d] = (p.position[d] + p.velocity[d]).clamp(lo, hi);
            }
        }
    }

    /// Records fitness values for the current positions. Returns whether the
    /// global best improved.
    pub fn absorb(&mut self, fitness: &[f64]) -> bool {
        assert_eq!(fitness.len(), self.particles.len());
        let mut improved = false;
        for (p, &f) in self.particles.iter_mut().zip(fitness) {
            if f > p.best_fitness {
                p.best_fitness = f;
                p.best_position = p.position;
            }
            if f > self.global_fitness {
                self.global_fitness = f;
                self.global_best = p.position;
                improved = true;
            }
        }
        improved
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub best_schedule: WindowSchedule,
    pub best_fitness: f64,
    /// Global-best fitness after initialization, then after each iteration.
    pub fitness_trace: Vec<f64>,
}

/// Runs the swarm against any schedule objective (higher is better).
pub fn optimize_with<F>(config: &SwarmConfig, objective: F) -> Result<PsoResult>
where
    F: Fn(&WindowSchedule) -> Result<f64> + Sync,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut swarm = Swarm::new(config, &mut rng);
    let evaluate = |swarm: &Swarm| -> Result<Vec<f64>> {
        swarm.particles.par_iter().map(|p| objective(&p.schedule())).collect()
    };
    let f = evaluate(&swarm)?;
    swarm.absorb(&f);
    let mut trace = vec![swarm.global_fitness];
    let mut stall = 0;
    for _ in 0..config.max_iterations {
        swarm.step(&mut rng);
        let f = evaluate(&swarm)?;
        if swarm.absorb(&f) {
            stall = 0;
        } else {
            stall += 1;
        }
        trace.push(swarm.global_fitness);
        if stall >= config.stall_iterations {
            break;
        }
    }
    Ok(PsoResult {
        best_schedule: to_schedule(&swarm.global_best),
        best_fitness: swarm.global_fitness,
        fitness_trace: trace,
    })
}

/// WVD magnitude of `signal`, box-averaged down to the target size.
pub fn aim_grid(signal: &[f64], rows: usize, cols: usize) -> Result<TfGrid> {
    rescale_grid(&wvd(signal)?, rows, cols)
}

/// Negative L1 distance between the unit-sum ASTFT (rescaled to the aim's
/// size) and the unit-sum aim. Always <= 0.
pub fn fitness(schedule: &WindowSchedule, signal: &[f64], aim: &TfGrid, hop: usize) -> Result<f64> {
    let aim = aim.unit_sum();
    fitness_normalized(schedule, signal, &aim, hop)
}

/// The ASTFT as the fitness sees it: fixed DFT length, rescaled to
/// `rows x cols`, not yet normalized.
pub fn candidate_grid(schedule: &WindowSchedule, signal: &[f64], hop: usize, rows: usize, cols: usize) -> Result<TfGrid> {
    rescale_grid(&astft_with_nfft(signal, schedule, hop, FITNESS_NFFT)?, rows, cols)
}

fn fitness_normalized(schedule: &WindowSchedule, signal: &[f64], aim: &TfGrid, hop: usize) -> Result<f64> {
    let grid = candidate_grid(schedule, signal, hop, aim.rows(), aim.cols())?.unit_sum();
    if grid.values().len() != aim.values().len() {
        return Err(shape("aim size mismatch"));
    }
    Ok(-grid.values().iter().zip(aim.values()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

pub fn pso_optimize(signal: &[f64], config: &SwarmConfig) -> Result<PsoResult> {
    config.validate()?;
    check_signal(signal)?;
    let aim = aim_grid(signal, config.aim_rows, config.aim_cols)?.unit_sum();
    optimize_with(config, |s| fitness_normalized(s, signal, &aim, config.hop))
}

fn check_signal(signal: &[f64]) -> Result<()> {
    if signal.len() < SCHEDULE_SECTIONS {
        return Err(invalid(format!(
            "signal of {} samples is too short for {SCHEDULE_SECTIONS} sections",
            signal.len()
        )));
    }
    Ok(())
}

/// One run per seed in `seed..seed + repeats`, sharing one aim grid.
pub fn repeated_runs(signal: &[f64], config: &SwarmConfig) -> Result<Vec<PsoResult>> {
    config.validate()?;
    check_signal(signal)?;
    let aim = aim_grid(signal, config.aim_rows, config.aim_cols)?.unit_sum();
    (0..config.repeats as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = SwarmConfig { seed: config.seed.wrapping_add(i), ..config.clone() };
            optimize_with(&cfg, |s| fitness_normalized(s, signal, &aim, config.hop))
        })
        .collect()
}

/// Elementwise mode of the best schedules of [`repeated_runs`].
pub fn repeated_mode(signal: &[f64], config: &SwarmConfig) -> Result<WindowSchedule> {
    let runs = repeated_runs(signal, config)?;
    let schedules: Vec<WindowSchedule> = runs.iter().map(|r| r.best_schedule).collect();
    mode_schedule(&schedules)
}

/// Per-section mode; ties go to the smaller length.
pub fn mode_schedule(schedules: &[WindowSchedule]) -> Result<WindowSchedule> {
    if schedules.is_empty() {
        return Err(invalid("mode of zero schedules"));
    }
    let mut out = [0usize; DIMS];
    for (d, slot) in out.iter_mut().enumerate() {
        let mut counts = [0usize; MAX_WINDOW + 1];
        for s in schedules {
            counts[s.lengths()[d]] += 1;
        }
        // max_by_key keeps the last maximum, so scan from the top down.
        *slot = (MIN_WINDOW..=MAX_WINDOW).rev().max_by_key(|&l| counts[l]).expect("nonempty range");
    }
    WindowSchedule::new(out)
}

pub fn write_trace_csv(path: &Path, result: &PsoResult) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iteration,best_fitness")?;
    for (i, f) in result.fitness_trace.iter().enumerate() {
        writeln!(w, "{i},{f}")?;
    }
    w.flush()?;
    Ok(())
}
