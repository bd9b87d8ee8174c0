//! Labeled design corpus: generation by simulation, CSV persistence and train/test split.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hydro::{evaluate, BladeGeometry, Requirement, SolverOptions};
use crate::space::{sample_geometry, sample_requirement, seeded_rng, DesignSpaceConfig};

pub const CSV_HEADER: [&str; 10] = [
    "thrust_n",
    "speed_mps",
    "rpm",
    "blade_count",
    "diameter_m",
    "hub_diameter_m",
    "chord_root",
    "taper_exp",
    "cd",
    "efficiency",
];

/// Default lower efficiency bound for kept designs.
pub const DEFAULT_EFFICIENCY_FLOOR: f64 = 0.5;

/// Attempts allowed per requested record before generation gives up.
pub const ATTEMPTS_PER_RECORD: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub requirement: Requirement,
    pub geometry: BladeGeometry,
    pub efficiency: f64,
}

impl DesignRecord {
    pub fn validate(&self) -> Result<()> {
        self.requirement.validate()?;
        self.geometry.validate()?;
        if !(self.efficiency > 0.0 && self.efficiency < 1.0) {
            return Err(Error::Invariant(format!(
                "efficiency {} outside (0, 1)",
                self.efficiency
            )));
        }
        Ok(())
    }

    fn fields(&self) -> [f64; 10] {
        let r = &self.requirement;
        let g = &self.geometry;
        [
            r.thrust,
            r.ship_speed,
            r.rpm,
            f64::from(g.blade_count),
            g.diameter,
            g.hub_diameter,
            g.chord_root,
            g.taper_exp,
            g.section_drag_coeff,
            self.efficiency,
        ]
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.fields()
            .iter()
            .zip(other.fields().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }

    fn pair_key(&self) -> [u64; 9] {
        let f = self.fields();
        let mut key = [0; 9];
        for (k, v) in key.iter_mut().zip(&f[..9]) {
            *k = v.to_bits();
        }
        key
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<DesignRecord>,
    /// Space the records were drawn from; not persisted in the CSV.
    pub generation_config: Option<DesignSpaceConfig>,
    pub efficiency_floor: f64,
}

impl Dataset {
    pub fn from_records(records: Vec<DesignRecord>) -> Self {
        Self {
            records,
            generation_config: None,
            efficiency_floor: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// SHA-256 over the bit patterns of every record, hex encoded.
    pub fn fingerprint(&self) -> String {
        fingerprint_records(&self.records)
    }

    fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i]).collect(),
            generation_config: self.generation_config.clone(),
            efficiency_floor: self.efficiency_floor,
        }
    }
}

pub fn fingerprint_records(records: &[DesignRecord]) -> String {
    let mut hasher = Sha256::new();
    hasher.update((records.len() as u64).to_le_bytes());
    for rec in records {
        for v in rec.fields() {
            hasher.update(v.to_bits().to_le_bytes());
        }
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Samples designs, evaluates them and keeps feasible ones at or above the efficiency floor.
///
/// Attempt `i` draws from stream `i` of the config seed, and records are kept in
/// attempt order, so the result does not depend on `parallelism`.
pub fn generate(
    cfg: &DesignSpaceConfig,
    solver: &SolverOptions,
    target_count: usize,
    efficiency_floor: f64,
    parallelism: usize,
) -> Result<Dataset> {
    if target_count == 0 {
        return Err(Error::Config("target_count must be positive".into()));
    }
    if !(0.0..1.0).contains(&efficiency_floor) {
        return Err(Error::Config(format!(
            "efficiency floor must lie in [0, 1), got {efficiency_floor}"
        )));
    }
    cfg.validate()?;
    solver.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let budget = target_count.saturating_mul(ATTEMPTS_PER_RECORD);
    let batch = target_count.clamp(64, 4096);
    let mut records = Vec::with_capacity(target_count);
    let mut seen = HashSet::new();
    let mut attempt = 0;
    while attempt < budget && records.len() < target_count {
        let end = (attempt + batch).min(budget);
        let evaluated: Vec<Option<DesignRecord>> = pool.install(|| {
            (attempt..end)
                .into_par_iter()
                .map(|i| {
                    let mut rng = seeded_rng(cfg.rng_seed, i as u64);
                    let requirement = sample_requirement(cfg, &mut rng);
                    let geometry = sample_geometry(cfg, &mut rng);
                    let perf = evaluate(&geometry, &requirement, solver);
                    (perf.feasible && perf.efficiency >= efficiency_floor).then_some(DesignRecord {
                        requirement,
                        geometry,
                        efficiency: perf.efficiency,
                    })
                })
                .collect()
        });
        for rec in evaluated.into_iter().flatten() {
            if records.len() == target_count {
                break;
            }
            if seen.insert(rec.pair_key()) {
                records.push(rec);
            }
        }
        attempt = end;
    }
    if records.is_empty() {
        return Err(Error::Generation(format!(
            "attempt budget exhausted: no design reached efficiency {efficiency_floor} in {budget} attempts"
        )));
    }
    records.sort_by(DesignRecord::canonical_cmp);
    Ok(Dataset {
        records,
        generation_config: Some(cfg.clone()),
        efficiency_floor,
    })
}

fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", CSV_HEADER.join(","))?;
    for rec in &ds.records {
        let f = rec.fields();
        let row: Vec<String> = f
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if i == 3 {
                    rec.geometry.blade_count.to_string()
                } else {
                    format_float(*v)
                }
            })
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != CSV_HEADER {
        let missing: Vec<&str> = CSV_HEADER
            .iter()
            .copied()
            .filter(|c| !found.contains(c))
            .collect();
        return Err(Error::Schema(if missing.is_empty() {
            format!("{}: unexpected header {:?}", path.display(), found)
        } else {
            format!("{}: missing columns {:?}", path.display(), missing)
        }));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if row.len() != CSV_HEADER.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                CSV_HEADER.len(),
                row.len()
            )));
        }
        let mut v = [0.0; 10];
        for (i, (slot, cell)) in v.iter_mut().zip(row.iter()).enumerate() {
            if i == 3 {
                continue;
            }
            *slot = cell
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(format!("column {}: {e}", CSV_HEADER[i])))?;
        }
        let blade_count: u32 = row[3]
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("column blade_count: {e}")))?;
        let rec = DesignRecord {
            requirement: Requirement {
                thrust: v[0],
                ship_speed: v[1],
                rpm: v[2],
            },
            geometry: BladeGeometry {
                blade_count,
                diameter: v[4],
                hub_diameter: v[5],
                chord_root: v[6],
                taper_exp: v[7],
                section_drag_coeff: v[8],
            },
            efficiency: v[9],
        };
        rec.validate()
            .map_err(|e| Error::Invariant(format!("{}:{line}: {e}", path.display())))?;
        records.push(rec);
    }
    Ok(Dataset::from_records(records))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Random disjoint partition with `round(test_fraction * n)` test records.
///
/// Both halves keep the original record order.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = ds.len();
    let n_test = ((test_fraction * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed, 0));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}
