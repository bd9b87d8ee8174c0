use std::fs;

use propsao::dataset::{generate, load, save, split, Dataset, CSV_HEADER};
use propsao::hydro::{evaluate, SolverOptions};
use propsao::space::default_config;
use propsao::Error;
use proptest::prelude::*;

fn small_dataset(count: usize) -> Dataset {
    generate(&default_config(), &SolverOptions::default(), count, 0.5, 1).unwrap()
}

const GOOD_ROW: &str = "51783,7.5,3551,4,1.2,0.24,0.15,1,0.008,0.61";

fn write_csv(body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    fs::write(&path, body).unwrap();
    (dir, path)
}

#[test]
fn csv_roundtrip_is_exact() {
    let ds = small_dataset(40);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    save(&ds, &path).unwrap();
    let back = load(&path).unwrap();
    assert_eq!(back.records, ds.records);
    assert_eq!(back.fingerprint(), ds.fingerprint());

    let again = dir.path().join("e.csv");
    save(&back, &again).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn header_only_file_is_empty_dataset() {
    let (_dir, path) = write_csv(&format!("{}\n", CSV_HEADER.join(",")));
    assert!(load(&path).unwrap().is_empty());
}

#[test]
fn out_of_range_efficiency_is_rejected() {
    let row = GOOD_ROW.replace("0.61", "1.2");
    let (_dir, path) = write_csv(&format!("{}\n{GOOD_ROW}\n{row}\n", CSV_HEADER.join(",")));
    let err = load(&path).unwrap_err();
    assert!(matches!(err, Error::Invariant(_)), "{err}");
    assert!(err.to_string().contains(":3:"), "{err}");
}

#[test]
fn missing_column_is_a_schema_error() {
    let header = CSV_HEADER[..9].join(",");
    let (_dir, path) = write_csv(&format!(
        "{header}\n51783,7.5,3551,4,1.2,0.24,0.15,1,0.008\n"
    ));
    let err = load(&path).unwrap_err();
    assert!(matches!(err, Error::Schema(_)), "{err}");
    assert!(err.to_string().contains("efficiency"), "{err}");
}

#[test]
fn malformed_row_reports_its_line() {
    let bad = GOOD_ROW.replace("1.2,", "wide,");
    let body = format!("{}\n{GOOD_ROW}\n{GOOD_ROW}\n{bad}\n", CSV_HEADER.join(","));
    let (_dir, path) = write_csv(&body);
    match load(&path).unwrap_err() {
        Error::Parse { line, message, .. } => {
            assert_eq!(line, 4);
            assert!(message.contains("diameter"), "{message}");
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn labels_reproduce_under_reevaluation() {
    let ds = small_dataset(25);
    let opts = SolverOptions::default();
    for rec in &ds.records {
        let perf = evaluate(&rec.geometry, &rec.requirement, &opts);
        assert!(perf.feasible);
        assert!((perf.efficiency - rec.efficiency).abs() <= 1e-12);
    }
}

#[test]
fn generation_ignores_worker_count() {
    let cfg = default_config();
    let opts = SolverOptions::default();
    let one = generate(&cfg, &opts, 60, 0.5, 1).unwrap();
    let eight = generate(&cfg, &opts, 60, 0.5, 8).unwrap();
    assert_eq!(one.records, eight.records);
}

#[test]
fn different_seeds_give_different_data() {
    let mut cfg = default_config();
    let a = generate(&cfg, &SolverOptions::default(), 20, 0.5, 1).unwrap();
    cfg.rng_seed = 9;
    let b = generate(&cfg, &SolverOptions::default(), 20, 0.5, 1).unwrap();
    assert_ne!(a.fingerprint(), b.fingerprint());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn split_is_a_partition(n in 2usize..200, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let base = small_template();
        let records = (0..n)
            .map(|i| {
                let mut r = base;
                r.requirement.thrust += i as f64;
                r
            })
            .collect();
        let ds = Dataset::from_records(records);
        let (train, test) = split(&ds, frac, seed).unwrap();
        prop_assert_eq!(test.len(), ((frac * n as f64).round() as usize).min(n));
        prop_assert_eq!(train.len() + test.len(), n);
        let mut all: Vec<f64> = train
            .records
            .iter()
            .chain(&test.records)
            .map(|r| r.requirement.thrust)
            .collect();
        all.sort_by(f64::total_cmp);
        let expected: Vec<f64> = ds.records.iter().map(|r| r.requirement.thrust).collect();
        prop_assert_eq!(all, expected);
    }
}

fn small_template() -> propsao::dataset::DesignRecord {
    use std::sync::OnceLock;
    static TEMPLATE: OnceLock<propsao::dataset::DesignRecord> = OnceLock::new();
    *TEMPLATE.get_or_init(|| small_dataset(1).records[0])
}
