use std::fs;
use std::path::{Path, PathBuf};

use propsao::dataset::{self, Dataset};
use propsao::hydro::{BladeGeometry, Requirement};
use propsao::optimizer::{run_ga, run_sao, write_trace, Method, OptimizationResult};
use propsao::space::{sample_requirement, seeded_rng};
use propsao::surrogate::{
    evaluate_model, fit_forest, fit_tree, load_forest, load_tree, save_forest, save_tree,
    EvalReport, ForestOptions, RandomForest, RegressionTree, TreeOptions,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ToolConfig;
use crate::failure::Failure;
use crate::manifest::{default_path, ManifestBuilder};
use crate::{CompareArgs, GenDataArgs, MethodArg, ModelArgs, OptimizeArgs, TrainArgs};

pub struct Context {
    config_path: Option<PathBuf>,
    manifest_path: Option<PathBuf>,
    jobs: usize,
    config: ToolConfig,
}

impl Context {
    pub fn new(
        config_path: Option<PathBuf>,
        manifest_path: Option<PathBuf>,
        jobs: Option<usize>,
    ) -> Result<Self, Failure> {
        let config = ToolConfig::load(config_path.as_deref())?;
        let jobs = jobs.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get)
        });
        Ok(Self {
            config_path,
            manifest_path,
            jobs,
            config,
        })
    }

    fn manifest(&self, command: &str) -> Result<ManifestBuilder, Failure> {
        self.config.validate()?;
        Ok(ManifestBuilder::start(
            command,
            self.config_path.as_deref(),
            &self.config,
        ))
    }

    fn manifest_path(&self, fallback: PathBuf) -> PathBuf {
        self.manifest_path.clone().unwrap_or(fallback)
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

pub fn gen_data(mut ctx: Context, args: GenDataArgs) -> Result<(), Failure> {
    if let Some(seed) = args.seed {
        ctx.config.space.rng_seed = seed;
    }
    if args.count == 0 {
        return Err(Failure::usage("--count must be positive"));
    }
    let mut manifest = ctx.manifest("gen-data")?;
    manifest.seed(ctx.config.space.rng_seed).output(&args.out);
    let ds = dataset::generate(
        &ctx.config.space,
        &ctx.config.solver,
        args.count,
        args.floor,
        ctx.jobs,
    )?;
    dataset::save(&ds, &args.out)?;
    println!(
        "kept {} of {} requested records -> {}",
        ds.len(),
        args.count,
        args.out.display()
    );
    manifest.write(&ctx.manifest_path(default_path(&args.out)))
}

#[derive(Serialize)]
struct TrainingSummary {
    accuracy: f64,
    mean_residual: f64,
    records: usize,
}

#[derive(Serialize)]
struct TrainReport {
    dataset_fingerprint: String,
    records: usize,
    train_records: usize,
    test_records: usize,
    trees: usize,
    seed: u64,
    forest_test: EvalReport,
    tree_training: TrainingSummary,
}

pub fn train(ctx: Context, args: TrainArgs) -> Result<(), Failure> {
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| args.out_forest.with_extension("report.json"));
    let mut manifest = ctx.manifest("train")?;
    manifest
        .seed(args.seed)
        .input(&args.data)
        .output(&args.out_forest)
        .output(&args.out_tree)
        .output(&report_path);

    let data = dataset::load(&args.data)?;
    let (train_set, test_set) = dataset::split(&data, args.test_frac, args.seed)?;
    let forest = fit_forest(&train_set, args.trees, args.seed, &ForestOptions::default())?;
    let tree = fit_tree(&data, &TreeOptions::default())?;
    save_forest(&forest, &args.out_forest)?;
    save_tree(&tree, &args.out_tree)?;

    let forest_test = evaluate_model(&forest, &test_set)?;
    let tree_report = evaluate_model(&tree, &data)?;
    println!(
        "forest: accuracy {:.4} on {} held-out records, mean residual {:.3e}",
        forest_test.accuracy,
        forest_test.residuals.len(),
        forest_test.mean_residual
    );
    println!(
        "tree: training accuracy {:.4} on {} records, mean residual {:.3e}",
        tree_report.accuracy,
        tree_report.residuals.len(),
        tree_report.mean_residual
    );
    let report = TrainReport {
        dataset_fingerprint: data.fingerprint(),
        records: data.len(),
        train_records: train_set.len(),
        test_records: test_set.len(),
        trees: args.trees,
        seed: args.seed,
        forest_test,
        tree_training: TrainingSummary {
            accuracy: tree_report.accuracy,
            mean_residual: tree_report.mean_residual,
            records: tree_report.residuals.len(),
        },
    };
    write_json(&report, &report_path)?;
    manifest.write(&ctx.manifest_path(default_path(&args.out_forest)))
}

struct Models {
    forest: RandomForest,
    tree: RegressionTree,
    data: Dataset,
}

fn model_paths(models: &ModelArgs) -> Result<(&Path, &Path, &Path), Failure> {
    match (&models.forest, &models.tree, &models.data) {
        (Some(f), Some(t), Some(d)) => Ok((f, t, d)),
        _ => Err(Failure::usage("SAO needs --forest, --tree and --data")),
    }
}

fn load_models(forest: &Path, tree: &Path, data: &Path) -> Result<Models, Failure> {
    Ok(Models {
        forest: load_forest(forest)?,
        tree: load_tree(tree)?,
        data: dataset::load(data)?,
    })
}

#[derive(Serialize)]
struct OptimizeSummary {
    method: Method,
    requirement: Requirement,
    seed: u64,
    best_geometry: Option<BladeGeometry>,
    best_eta: f64,
    evaluations: usize,
}

pub fn optimize(mut ctx: Context, args: OptimizeArgs) -> Result<(), Failure> {
    let paths = match args.method {
        MethodArg::Sao => Some(model_paths(&args.models)?),
        MethodArg::Ga => None,
    };
    if let Some(budget) = args.budget {
        ctx.config.ga.eval_budget = budget;
    }
    if let Some(seed) = args.seed {
        ctx.config.ga.rng_seed = seed;
    }
    let summary_path = args
        .summary
        .clone()
        .unwrap_or_else(|| args.trace_out.with_extension("json"));
    let mut manifest = ctx.manifest("optimize")?;
    manifest.seed(ctx.config.ga.rng_seed);
    if let Some((f, t, d)) = paths {
        manifest.input(f).input(t).input(d);
    }
    manifest.output(&args.trace_out).output(&summary_path);

    let cfg = &ctx.config;
    let req = args.requirement;
    let result = match paths {
        Some((f, t, d)) => {
            let m = load_models(f, t, d)?;
            run_sao(
                &req,
                &m.forest,
                &m.tree,
                &m.data,
                &cfg.ga,
                &cfg.space,
                &cfg.solver,
            )?
        }
        None => run_ga(&req, &[], &cfg.ga, &cfg.space, &cfg.solver)?,
    };
    write_trace(&result.trace, cfg.ga.rng_seed, &args.trace_out)?;
    write_json(
        &OptimizeSummary {
            method: result.trace.method,
            requirement: req,
            seed: cfg.ga.rng_seed,
            best_geometry: result.best_geometry,
            best_eta: result.best_efficiency,
            evaluations: result.evaluations_used,
        },
        &summary_path,
    )?;
    println!(
        "{}: best efficiency {:.6} after {} evaluations",
        result.trace.method, result.best_efficiency, result.evaluations_used
    );
    manifest.write(&ctx.manifest_path(default_path(&args.trace_out)))
}

#[derive(Deserialize)]
struct RequirementRow {
    thrust: f64,
    ship_speed: f64,
    rpm: f64,
}

fn read_requirements(path: &Path) -> Result<Vec<Requirement>, Failure> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<RequirementRow>() {
        let row = row.map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        out.push(Requirement::new(row.thrust, row.ship_speed, row.rpm)?);
    }
    if out.is_empty() {
        return Err(Failure::usage(format!(
            "{}: no requirements",
            path.display()
        )));
    }
    Ok(out)
}

#[derive(Serialize)]
struct PairRow {
    requirement: usize,
    thrust: f64,
    ship_speed: f64,
    rpm: f64,
    repeat: usize,
    seed: u64,
    ga_best: f64,
    sao_best: f64,
    ga_first_best: f64,
    sao_first_best: f64,
    winner: &'static str,
}

#[derive(Serialize)]
struct CompareSummary {
    pairs: usize,
    budget: usize,
    repeats: usize,
    sao_wins: usize,
    ga_wins: usize,
    ties: usize,
    /// Fraction of pairs where SAO's final best is at least GA's.
    win_rate: f64,
    /// Same comparison after the first population.
    first_population_win_rate: f64,
}

fn winner(ga: f64, sao: f64) -> &'static str {
    if sao > ga {
        "SAO"
    } else if ga > sao {
        "GA"
    } else {
        "tie"
    }
}

pub fn compare(mut ctx: Context, args: CompareArgs) -> Result<(), Failure> {
    let (f, t, d) = model_paths(&args.models)?;
    if args.repeats == 0 {
        return Err(Failure::usage("--repeats must be at least 1"));
    }
    if let Some(budget) = args.budget {
        ctx.config.ga.eval_budget = budget;
    }
    let base_seed = args.seed.unwrap_or(ctx.config.ga.rng_seed);
    let mut manifest = ctx.manifest("compare")?;
    manifest.input(f).input(t).input(d);

    let requirements = match (&args.requirements_file, args.sample) {
        (Some(path), _) => {
            manifest.input(path);
            read_requirements(path)?
        }
        (None, Some(n)) if n > 0 => {
            let mut rng = seeded_rng(base_seed, 0);
            (0..n)
                .map(|_| sample_requirement(&ctx.config.space, &mut rng))
                .collect()
        }
        _ => return Err(Failure::usage("--sample must be at least 1")),
    };
    let models = load_models(f, t, d)?;

    let trace_dir = args.out_dir.join("traces");
    fs::create_dir_all(&trace_dir)?;
    let summary_csv = args.out_dir.join("summary.csv");
    let summary_json = args.out_dir.join("summary.json");
    let mut rows = Vec::new();
    let cfg = &ctx.config;
    let population = cfg.ga.population_size;
    for (i, req) in requirements.iter().enumerate() {
        let mut seeds = seeded_rng(base_seed, 1 + i as u64);
        for repeat in 0..args.repeats {
            let seed: u64 = seeds.gen();
            manifest.seed(seed);
            let ga_cfg = propsao::optimizer::GaConfig {
                rng_seed: seed,
                ..cfg.ga.clone()
            };
            let ga = run_ga(req, &[], &ga_cfg, &cfg.space, &cfg.solver)?;
            let sao = run_sao(
                req,
                &models.forest,
                &models.tree,
                &models.data,
                &ga_cfg,
                &cfg.space,
                &cfg.solver,
            )?;
            for (tag, result) in [("ga", &ga), ("sao", &sao)] {
                let path = trace_dir.join(format!("req{i:02}_rep{repeat}_{tag}.csv"));
                write_trace(&result.trace, seed, &path)?;
                manifest.output(&path);
            }
            rows.push(pair_row(i, repeat, seed, req, &ga, &sao, population));
        }
    }

    let mut writer = csv::Writer::from_path(&summary_csv)?;
    for row in &rows {
        writer.serialize(row)?;
    }
    writer.flush()?;

    let pairs = rows.len();
    let count = |pred: &dyn Fn(&PairRow) -> bool| rows.iter().filter(|r| pred(r)).count();
    let summary = CompareSummary {
        pairs,
        budget: cfg.ga.eval_budget,
        repeats: args.repeats,
        sao_wins: count(&|r| r.winner == "SAO"),
        ga_wins: count(&|r| r.winner == "GA"),
        ties: count(&|r| r.winner == "tie"),
        win_rate: count(&|r| r.sao_best >= r.ga_best) as f64 / pairs as f64,
        first_population_win_rate: count(&|r| r.sao_first_best >= r.ga_first_best) as f64
            / pairs as f64,
    };
    write_json(&summary, &summary_json)?;
    println!(
        "{} pairs: SAO {} / GA {} / tie {}; SAO >= GA in {:.1}% (first population {:.1}%)",
        pairs,
        summary.sao_wins,
        summary.ga_wins,
        summary.ties,
        100.0 * summary.win_rate,
        100.0 * summary.first_population_win_rate
    );
    manifest.output(&summary_csv).output(&summary_json);
    manifest.write(&ctx.manifest_path(args.out_dir.join("manifest.json")))
}

fn pair_row(
    requirement: usize,
    repeat: usize,
    seed: u64,
    req: &Requirement,
    ga: &OptimizationResult,
    sao: &OptimizationResult,
    population: usize,
) -> PairRow {
    PairRow {
        requirement,
        thrust: req.thrust,
        ship_speed: req.ship_speed,
        rpm: req.rpm,
        repeat,
        seed,
        ga_best: ga.best_efficiency,
        sao_best: sao.best_efficiency,
        ga_first_best: ga.trace.best_after(population),
        sao_first_best: sao.trace.best_after(population),
        winner: winner(ga.best_efficiency, sao.best_efficiency),
    }
}
