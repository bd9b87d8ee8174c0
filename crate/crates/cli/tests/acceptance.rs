//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! The process exits 0 once every criterion has been run; set
//! `ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use propsao::dataset::{self, Dataset};
use propsao::hydro::{
    build_grid, evaluate, ideal_efficiency, solve_optimal_circulation, FrozenInduction,
    Requirement, SolverOptions, THRUST_TOLERANCE,
};
use propsao::optimizer::{brute_force, run_ga, GaConfig};
use propsao::space::{
    default_config, enumerate_lattice, sample_geometry, sample_requirement, seeded_rng, GeneLattice,
};
use propsao::surrogate::{
    fit_forest, fit_tree, leaf_records, load_forest, load_tree, save_forest, save_tree,
    ForestOptions, InverseModel, TargetVector, TreeOptions,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn propsao(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_propsao"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "propsao {} failed: {}",
            args.first().unwrap_or(&""),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn benchmark_requirements_file() -> String {
    format!(
        "{}/../../configs/benchmark_requirements.csv",
        env!("CARGO_MANIFEST_DIR")
    )
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn probes(n: usize, seed: u64) -> Vec<Requirement> {
    let cfg = default_config();
    let mut rng = seeded_rng(seed, 99);
    (0..n).map(|_| sample_requirement(&cfg, &mut rng)).collect()
}

fn stationarity_ok(
    req: &Requirement,
    geom: &propsao::hydro::BladeGeometry,
    opts: &SolverOptions,
) -> bool {
    let Ok(sol) = solve_optimal_circulation(geom, req, opts) else {
        return false;
    };
    let Ok(grid) = build_grid(geom, opts.station_count) else {
        return false;
    };
    let Ok(frozen) = FrozenInduction::new(&grid, &sol.inflow_angle, geom) else {
        return false;
    };
    let lambda = sol.lagrange_multiplier;
    let h = |c: &[f64]| frozen.lagrangian(c, lambda, &grid, geom, req, opts.density);
    let bound =
        1e-3 * h(&sol.circulation).abs() / sol.circulation.iter().copied().fold(0.0, f64::max);
    sol.circulation.iter().enumerate().all(|(i, &g)| {
        if g == 0.0 {
            return true;
        }
        let mut plus = sol.circulation.clone();
        let mut minus = sol.circulation.clone();
        plus[i] += 1e-3 * g;
        minus[i] -= 1e-3 * g;
        ((h(&plus) - h(&minus)) / (2e-3 * g)).abs() <= bound
    })
}

fn solver_physics() -> Outcome {
    let cfg = default_config();
    let opts = SolverOptions::default();
    let (mut feasible, mut attempts) = (0, 0u64);
    let (mut thrust_ok, mut bound_ok, mut stationary) = (0, 0, 0);
    while feasible < 500 {
        let mut rng = seeded_rng(2024, attempts);
        attempts += 1;
        let req = sample_requirement(&cfg, &mut rng);
        let geom = sample_geometry(&cfg, &mut rng);
        let perf = evaluate(&geom, &req, &opts);
        if !perf.feasible {
            continue;
        }
        feasible += 1;
        thrust_ok += usize::from((perf.thrust - req.thrust).abs() / req.thrust <= THRUST_TOLERANCE);
        let ideal = ideal_efficiency(&req, geom.diameter, opts.density);
        bound_ok += usize::from(perf.efficiency > 0.0 && perf.efficiency < ideal);
        stationary += usize::from(stationarity_ok(&req, &geom, &opts));
    }
    outcome(
        thrust_ok == 500 && bound_ok == 500 && stationary == 500,
        format!(
            "{feasible} feasible pairs from {attempts} draws: thrust {thrust_ok}/500, \
             0 < eta < ideal {bound_ok}/500, stationary {stationary}/500"
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut space = default_config();
    space.blade_counts = vec![4];
    space.lattice = Some(GeneLattice {
        diameters: vec![1.0, 1.4, 1.8],
        hub_ratios: vec![0.15, 0.2, 0.25],
        chord_on_catalog: true,
    });
    let solver = SolverOptions::default();
    let req = Requirement::new(51783.0, 7.5, 3551.0).expect("valid requirement");
    let designs = enumerate_lattice(&space).expect("lattice is enumerable");
    let oracle = match brute_force(&req, &designs, &solver) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut hits = 0;
    for seed in 0..20 {
        let cfg = GaConfig {
            eval_budget: 2000,
            rng_seed: seed,
            ..GaConfig::default()
        };
        match run_ga(&req, &[], &cfg, &space, &solver) {
            Ok(r) => hits += usize::from(r.best_efficiency == oracle.best_efficiency),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    outcome(
        hits >= 19,
        format!(
            "{hits}/20 GA runs found the {}-design optimum eta = {:.6}",
            designs.len(),
            oracle.best_efficiency
        ),
    )
}

fn surrogate_properties(data: &Dataset) -> Outcome {
    let mut corpus = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for rec in &data.records {
        if corpus.len() == 2000 {
            break;
        }
        if seen.insert(rec.requirement.as_array().map(f64::to_bits)) {
            corpus.push(*rec);
        }
    }
    let corpus = Dataset::from_records(corpus);
    let tree = match fit_tree(&corpus, &TreeOptions::default()) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let memorized = corpus
        .records
        .iter()
        .filter(|r| tree.predict(&r.requirement) == TargetVector::from_record(r))
        .count();
    let found = corpus.records[..1000]
        .iter()
        .filter(|r| leaf_records(&tree, &r.requirement, &corpus).is_ok_and(|list| list.contains(r)))
        .count();
    let forest = match fit_forest(&corpus, 100, 3, &ForestOptions::default()) {
        Ok(f) => f,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut worst: f64 = 0.0;
    for req in probes(1000, 5) {
        let got = forest.predict(&req);
        for k in 0..got.0.len() {
            let mean = forest
                .trees
                .iter()
                .map(|t| t.predict(&req).0[k])
                .sum::<f64>()
                / forest.trees.len() as f64;
            worst = worst.max((got.0[k] - mean).abs() / mean.abs().max(f64::MIN_POSITIVE));
        }
    }
    outcome(
        memorized == corpus.len() && found == 1000 && worst <= 1e-12,
        format!(
            "memorized {memorized}/{}, leaf lookups {found}/1000, forest-mean deviation {worst:.1e}",
            corpus.len()
        ),
    )
}

fn metric_reproduction(dir: &Path) -> Result<Outcome, String> {
    let data = dir.join("data.csv");
    let forest = dir.join("forest.json");
    let tree = dir.join("tree.json");
    let report = dir.join("report.json");
    propsao(&[
        "gen-data",
        "--count",
        "20000",
        "--seed",
        "0",
        "-o",
        p(&data),
    ])?;
    propsao(&[
        "train",
        "--data",
        p(&data),
        "--trees",
        "100",
        "--test-frac",
        "0.05",
        "--seed",
        "0",
        "--out-forest",
        p(&forest),
        "--out-tree",
        p(&tree),
        "--report",
        p(&report),
    ])?;
    let r = read_json(&report)?;
    let accuracy = r["forest_test"]["accuracy"]
        .as_f64()
        .ok_or("report lacks accuracy")?;
    let records = r["records"].as_u64().unwrap_or(0);
    let target = if accuracy >= 0.70 { "met" } else { "missed" };
    Ok(outcome(
        records >= 20000 && accuracy >= 0.50,
        format!(
            "accuracy {accuracy:.4} on {} held-out of {records} records \
             (fail line 0.50, target 0.70 {target})",
            r["test_records"]
        ),
    ))
}

fn sao_vs_ga(dir: &Path) -> Result<Outcome, String> {
    let out_dir = dir.join("compare");
    propsao(&[
        "compare",
        "--requirements-file",
        &benchmark_requirements_file(),
        "--budget",
        "400",
        "--repeats",
        "3",
        "--seed",
        "0",
        "--forest",
        p(&dir.join("forest.json")),
        "--tree",
        p(&dir.join("tree.json")),
        "--data",
        p(&dir.join("data.csv")),
        "--out-dir",
        p(&out_dir),
    ])?;
    let s = read_json(&out_dir.join("summary.json"))?;
    let final_rate = s["win_rate"].as_f64().ok_or("summary lacks win_rate")?;
    let first_rate = s["first_population_win_rate"]
        .as_f64()
        .ok_or("summary lacks first rate")?;
    Ok(outcome(
        s["pairs"] == 24 && final_rate >= 0.70 && first_rate >= 0.80,
        format!(
            "{} pairs: SAO >= GA final {:.1}% (need 70%), first population {:.1}% (need 80%)",
            s["pairs"],
            100.0 * final_rate,
            100.0 * first_rate
        ),
    ))
}

fn run_pipeline(dir: &Path) -> Result<(), String> {
    let d = |name: &str| dir.join(name);
    propsao(&[
        "gen-data",
        "--count",
        "600",
        "--seed",
        "7",
        "-o",
        p(&d("data.csv")),
    ])?;
    propsao(&[
        "train",
        "--data",
        p(&d("data.csv")),
        "--trees",
        "20",
        "--seed",
        "3",
        "--out-forest",
        p(&d("forest.json")),
        "--out-tree",
        p(&d("tree.json")),
    ])?;
    propsao(&[
        "optimize",
        "--method",
        "ga",
        "--requirement",
        "51783,7.5,3551",
        "--budget",
        "200",
        "--seed",
        "5",
        "--trace-out",
        p(&d("ga.csv")),
    ])?;
    propsao(&[
        "optimize",
        "--method",
        "sao",
        "--requirement",
        "51783,7.5,3551",
        "--budget",
        "200",
        "--seed",
        "5",
        "--forest",
        p(&d("forest.json")),
        "--tree",
        p(&d("tree.json")),
        "--data",
        p(&d("data.csv")),
        "--trace-out",
        p(&d("sao.csv")),
    ])?;
    propsao(&[
        "compare",
        "--sample",
        "2",
        "--budget",
        "60",
        "--repeats",
        "2",
        "--forest",
        p(&d("forest.json")),
        "--tree",
        p(&d("tree.json")),
        "--data",
        p(&d("data.csv")),
        "--out-dir",
        p(&d("cmp")),
    ])
}

const DETERMINISTIC_FILES: [&str; 12] = [
    "data.csv",
    "forest.json",
    "tree.json",
    "forest.report.json",
    "ga.csv",
    "ga.json",
    "sao.csv",
    "sao.json",
    "cmp/summary.csv",
    "cmp/summary.json",
    "cmp/traces/req00_rep0_ga.csv",
    "cmp/traces/req01_rep1_sao.csv",
];

fn determinism(dir: &Path) -> Result<Outcome, String> {
    let (a, b) = (dir.join("a"), dir.join("b"));
    for d in [&a, &b] {
        fs::create_dir_all(d).map_err(|e| e.to_string())?;
        run_pipeline(d)?;
    }
    let differing: Vec<&str> = DETERMINISTIC_FILES
        .iter()
        .copied()
        .filter(|f| match (fs::read(a.join(f)), fs::read(b.join(f))) {
            (Ok(x), Ok(y)) => x != y,
            _ => true,
        })
        .collect();
    Ok(outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "{} output files byte-identical across reruns",
                DETERMINISTIC_FILES.len()
            )
        } else {
            format!("differing or missing: {}", differing.join(", "))
        },
    ))
}

fn persistence(dir: &Path) -> Result<Outcome, String> {
    let err = |e: propsao::Error| e.to_string();
    let data = dataset::generate(&default_config(), &SolverOptions::default(), 800, 0.5, 1)
        .map_err(err)?;
    let csv = dir.join("roundtrip.csv");
    dataset::save(&data, &csv).map_err(err)?;
    let reloaded = dataset::load(&csv).map_err(err)?;
    let forest = fit_forest(&data, 25, 1, &ForestOptions::default()).map_err(err)?;
    let refit = fit_forest(&reloaded, 25, 1, &ForestOptions::default()).map_err(err)?;
    let tree = fit_tree(&data, &TreeOptions::default()).map_err(err)?;
    let (fp, tp) = (dir.join("rt_forest.json"), dir.join("rt_tree.json"));
    save_forest(&forest, &fp).map_err(err)?;
    save_tree(&tree, &tp).map_err(err)?;
    let forest2 = load_forest(&fp).map_err(err)?;
    let tree2 = load_tree(&tp).map_err(err)?;

    let probes = probes(100, 8);
    let data_same = reloaded.records == data.records
        && probes.iter().all(|r| refit.predict(r) == forest.predict(r));
    let models_same = probes
        .iter()
        .all(|r| forest2.predict(r) == forest.predict(r) && tree2.predict(r) == tree.predict(r));
    Ok(outcome(
        data_same && models_same,
        format!(
            "dataset reload {}, model reload {} on {} probes",
            if data_same { "identical" } else { "differs" },
            if models_same { "identical" } else { "differs" },
            probes.len()
        ),
    ))
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let root = work.path();
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Result<Outcome, String>| {
        let start = Instant::now();
        let o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {name}: {} [{secs:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((name, o, secs));
    };

    run("1 solver physics", &mut || Ok(solver_physics()));
    run("2 oracle equivalence", &mut || Ok(oracle_equivalence()));
    run("4 metric reproduction", &mut || metric_reproduction(root));
    run("3 surrogate properties", &mut || {
        let data = dataset::load(&root.join("data.csv")).map_err(|e| e.to_string())?;
        Ok(surrogate_properties(&data))
    });
    run("5 SAO vs GA", &mut || sao_vs_ga(root));
    run("6 determinism", &mut || determinism(&root.join("det")));
    run("7 persistence", &mut || persistence(root));

    let passed = results.iter().filter(|(_, o, _)| o.pass).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed != results.len() {
        std::process::exit(1);
    }
}
