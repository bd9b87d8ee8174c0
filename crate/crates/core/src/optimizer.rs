//! Simulator-in-the-loop genetic search, surrogate seeding and an exhaustive oracle.
//!
//! Every candidate the search looks at costs one full circulation solve, and the
//! evaluation budget counts exactly those solves. Plain GA starts from random
//! genomes; the surrogate-assisted variant starts from designs proposed by the
//! inverse models and then runs the very same GA.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hydro::{evaluate, BladeGeometry, Requirement, SolverOptions};
use crate::space::{decode, encode, seeded_rng, DesignSpaceConfig, Genome, SimRng};
use crate::surrogate::{leaf_records, RandomForest, RegressionTree};

/// Spread factor of blend crossover.
const BLEND_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    /// Total simulator calls allowed, seeds included.
    pub eval_budget: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    /// Per-gene mutation probability.
    pub mutation_prob: f64,
    /// Mutation standard deviation as a fraction of each gene's range.
    pub mutation_sigma_frac: f64,
    pub elite_count: usize,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 20,
            eval_budget: 400,
            tournament_size: 3,
            crossover_prob: 0.9,
            mutation_prob: 0.2,
            mutation_sigma_frac: 0.1,
            elite_count: 2,
            rng_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.population_size < 2 {
            return fail(format!(
                "population_size must be >= 2, got {}",
                self.population_size
            ));
        }
        if self.eval_budget < self.population_size {
            return fail(format!(
                "eval_budget {} is smaller than the population {}",
                self.eval_budget, self.population_size
            ));
        }
        if self.tournament_size == 0 {
            return fail("tournament_size must be positive".into());
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.mutation_sigma_frac.is_finite() && self.mutation_sigma_frac >= 0.0) {
            return fail("mutation_sigma_frac must be non-negative".into());
        }
        if self.elite_count >= self.population_size {
            return fail(format!(
                "elite_count {} must be below population_size {}",
                self.elite_count, self.population_size
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "GA")]
    Ga,
    #[serde(rename = "SAO")]
    Sao,
    #[serde(rename = "exhaustive")]
    Exhaustive,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ga => "GA",
            Method::Sao => "SAO",
            Method::Exhaustive => "exhaustive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub evaluation_index: usize,
    /// Zero for infeasible candidates.
    pub candidate_efficiency: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub entries: Vec<TraceEntry>,
    pub method: Method,
    pub requirement: Requirement,
}

impl OptimizationTrace {
    /// Best efficiency after the first `count` evaluations.
    pub fn best_after(&self, count: usize) -> f64 {
        match count.min(self.entries.len()) {
            0 => 0.0,
            n => self.entries[n - 1].best_so_far,
        }
    }

    pub fn final_best(&self) -> f64 {
        self.best_after(self.entries.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    /// `None` when no feasible design was found.
    pub best_geometry: Option<BladeGeometry>,
    pub best_efficiency: f64,
    pub trace: OptimizationTrace,
    pub evaluations_used: usize,
}

/// Records evaluations and tracks the incumbent.
struct Recorder {
    entries: Vec<TraceEntry>,
    best: Option<(BladeGeometry, f64)>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            entries: Vec::new(),
            best: None,
        }
    }

    fn record(&mut self, geometry: &BladeGeometry, efficiency: f64) {
        if efficiency > 0.0 && self.best.is_none_or(|(_, b)| efficiency > b) {
            self.best = Some((*geometry, efficiency));
        }
        self.entries.push(TraceEntry {
            evaluation_index: self.entries.len(),
            candidate_efficiency: efficiency,
            best_so_far: self.best.map_or(0.0, |(_, b)| b),
        });
    }

    fn finish(self, method: Method, requirement: Requirement) -> OptimizationResult {
        let evaluations_used = self.entries.len();
        OptimizationResult {
            best_geometry: self.best.map(|(g, _)| g),
            best_efficiency: self.best.map_or(0.0, |(_, b)| b),
            trace: OptimizationTrace {
                entries: self.entries,
                method,
                requirement,
            },
            evaluations_used,
        }
    }
}

/// Efficiency used as GA fitness; infeasible designs score zero.
pub fn fitness(geometry: &BladeGeometry, req: &Requirement, solver: &SolverOptions) -> f64 {
    let perf = evaluate(geometry, req, solver);
    if perf.feasible {
        perf.efficiency
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
struct Individual {
    genome: Genome,
    fitness: f64,
}

/// Evaluates genomes in order, stopping at the budget. Returns the evaluated prefix.
fn evaluate_batch(
    genomes: Vec<Genome>,
    req: &Requirement,
    space: &DesignSpaceConfig,
    solver: &SolverOptions,
    budget_left: usize,
    recorder: &mut Recorder,
) -> Vec<Individual> {
    let take = genomes.len().min(budget_left);
    let scored: Vec<(Genome, BladeGeometry, f64)> = genomes[..take]
        .par_iter()
        .map(|g| {
            let geometry = decode(g, space);
            (*g, geometry, fitness(&geometry, req, solver))
        })
        .collect();
    scored
        .into_iter()
        .map(|(genome, geometry, fitness)| {
            recorder.record(&geometry, fitness);
            Individual { genome, fitness }
        })
        .collect()
}

fn clamp_genome(genome: &mut Genome, space: &DesignSpaceConfig) {
    for (v, (lo, hi)) in genome.values.iter_mut().zip(space.gene_ranges()) {
        *v = v.clamp(lo, hi);
    }
    genome.blade_index = genome.blade_index.min(space.blade_counts.len() - 1);
}

fn tournament<'a>(population: &'a [Individual], size: usize, rng: &mut SimRng) -> &'a Individual {
    let mut winner = &population[rng.gen_range(0..population.len())];
    for _ in 1..size {
        let challenger = &population[rng.gen_range(0..population.len())];
        if challenger.fitness > winner.fitness {
            winner = challenger;
        }
    }
    winner
}

/// BLX-α on the continuous genes; each child inherits one parent's blade count.
fn blend(a: &Genome, b: &Genome, rng: &mut SimRng) -> Genome {
    let mut values = [0.0; 4];
    for ((v, x), y) in values.iter_mut().zip(a.values).zip(b.values) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let spread = hi - lo;
        *v = if spread > 0.0 {
            rng.gen_range(lo - BLEND_ALPHA * spread..=hi + BLEND_ALPHA * spread)
        } else {
            lo
        };
    }
    Genome {
        values,
        blade_index: if rng.gen_bool(0.5) {
            a.blade_index
        } else {
            b.blade_index
        },
    }
}

fn mutate(genome: &mut Genome, cfg: &GaConfig, space: &DesignSpaceConfig, rng: &mut SimRng) {
    for (v, (lo, hi)) in genome.values.iter_mut().zip(space.gene_ranges()) {
        if rng.gen_bool(cfg.mutation_prob) {
            let z: f64 = rng.sample(StandardNormal);
            *v += z * cfg.mutation_sigma_frac * (hi - lo);
        }
    }
    if rng.gen_bool(cfg.mutation_prob) {
        genome.blade_index = rng.gen_range(0..space.blade_counts.len());
    }
}

fn run_genetic(
    req: &Requirement,
    seeds: &[BladeGeometry],
    cfg: &GaConfig,
    space: &DesignSpaceConfig,
    solver: &SolverOptions,
    method: Method,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    space.validate()?;
    req.validate()?;
    let mut rng = seeded_rng(cfg.rng_seed, 0);
    let mut recorder = Recorder::new();

    let mut initial: Vec<Genome> = Vec::with_capacity(cfg.population_size);
    let mut seen: Vec<BladeGeometry> = Vec::new();
    for seed in seeds {
        if initial.len() == cfg.population_size {
            break;
        }
        let genome = encode(seed, space);
        let canonical = decode(&genome, space);
        if !seen.contains(&canonical) {
            seen.push(canonical);
            initial.push(genome);
        }
    }
    while initial.len() < cfg.population_size {
        initial.push(Genome::random(space, &mut rng));
    }
    let mut population =
        evaluate_batch(initial, req, space, solver, cfg.eval_budget, &mut recorder);

    while recorder.entries.len() < cfg.eval_budget {
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| population[b].fitness.total_cmp(&population[a].fitness));
        let elites: Vec<Individual> = ranked
            .iter()
            .take(cfg.elite_count)
            .map(|&i| population[i])
            .collect();

        let brood = cfg.population_size - elites.len();
        let mut children = Vec::with_capacity(brood);
        while children.len() < brood {
            let a = tournament(&population, cfg.tournament_size, &mut rng).genome;
            let b = tournament(&population, cfg.tournament_size, &mut rng).genome;
            let (mut c1, mut c2) = if rng.gen_bool(cfg.crossover_prob) {
                (blend(&a, &b, &mut rng), blend(&a, &b, &mut rng))
            } else {
                (a, b)
            };
            for child in [&mut c1, &mut c2] {
                mutate(child, cfg, space, &mut rng);
                clamp_genome(child, space);
            }
            children.push(c1);
            if children.len() < brood {
                children.push(c2);
            }
        }
        let left = cfg.eval_budget - recorder.entries.len();
        let evaluated = evaluate_batch(children, req, space, solver, left, &mut recorder);
        population = elites;
        population.extend(evaluated);
    }
    Ok(recorder.finish(method, *req))
}

/// Generational GA with simulator-in-the-loop fitness.
///
/// `initial_seeds` (possibly empty) head the first population after
/// deduplication; random genomes fill the rest.
pub fn run_ga(
    req: &Requirement,
    initial_seeds: &[BladeGeometry],
    cfg: &GaConfig,
    space: &DesignSpaceConfig,
    solver: &SolverOptions,
) -> Result<OptimizationResult> {
    run_genetic(req, initial_seeds, cfg, space, solver, Method::Ga)
}

/// Candidate designs from both surrogates, best predicted or recorded efficiency first.
///
/// The forest's decoded prediction is always in the pool; the tree contributes
/// every training design stored in the leaf the requirement routes to.
pub fn sao_seeds(
    forest: &RandomForest,
    tree: &RegressionTree,
    train_data: &Dataset,
    req: &Requirement,
    k: usize,
    space: &DesignSpaceConfig,
) -> Result<Vec<BladeGeometry>> {
    let prediction = forest.predict(req);
    let mut pool = vec![(prediction.geometry(space), prediction.efficiency())];
    pool.extend(
        leaf_records(tree, req, train_data)?
            .into_iter()
            .map(|r| (r.geometry, r.efficiency)),
    );
    pool.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut seeds: Vec<BladeGeometry> = Vec::new();
    for (g, _) in pool {
        if seeds.len() == k {
            break;
        }
        if !seeds.contains(&g) {
            seeds.push(g);
        }
    }
    Ok(seeds)
}

/// Surrogate-assisted optimization: the GA started from [`sao_seeds`].
#[allow(clippy::too_many_arguments)]
pub fn run_sao(
    req: &Requirement,
    forest: &RandomForest,
    tree: &RegressionTree,
    train_data: &Dataset,
    cfg: &GaConfig,
    space: &DesignSpaceConfig,
    solver: &SolverOptions,
) -> Result<OptimizationResult> {
    let seeds = sao_seeds(forest, tree, train_data, req, cfg.population_size, space)?;
    run_genetic(req, &seeds, cfg, space, solver, Method::Sao)
}

/// Evaluates every design; ties go to the earliest.
pub fn brute_force(
    req: &Requirement,
    designs: &[BladeGeometry],
    solver: &SolverOptions,
) -> Result<OptimizationResult> {
    if designs.is_empty() {
        return Err(Error::Config(
            "brute force needs at least one design".into(),
        ));
    }
    let scores: Vec<f64> = designs
        .par_iter()
        .map(|g| fitness(g, req, solver))
        .collect();
    let mut recorder = Recorder::new();
    for (g, s) in designs.iter().zip(scores) {
        recorder.record(g, s);
    }
    Ok(recorder.finish(Method::Exhaustive, *req))
}

/// Writes `eval_index,candidate_eta,best_so_far` rows under a `# method=... ` comment.
pub fn write_trace(trace: &OptimizationTrace, seed: u64, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let r = &trace.requirement;
    writeln!(
        out,
        "# method={} requirement={},{},{} seed={seed}",
        trace.method, r.thrust, r.ship_speed, r.rpm
    )?;
    writeln!(out, "eval_index,candidate_eta,best_so_far")?;
    for e in &trace.entries {
        writeln!(
            out,
            "{},{:.16e},{:.16e}",
            e.evaluation_index, e.candidate_efficiency, e.best_so_far
        )?;
    }
    out.flush()?;
    Ok(())
}
