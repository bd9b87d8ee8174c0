//! Requirement and geometry spaces: bounds, sampling and the GA genome.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydro::{
    BladeGeometry, Requirement, ALLOWED_BLADE_COUNTS, CHORD_ROOT_BOUNDS, TAPER_EXP_BOUNDS,
};

/// Seeded random stream used everywhere in the toolkit.
pub type SimRng = ChaCha8Rng;

/// Independent stream `stream` under master seed `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Optional discretization of the continuous genes. Used for enumerable test spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneLattice {
    /// Allowed diameters, m. Empty leaves the gene continuous.
    #[serde(default)]
    pub diameters: Vec<f64>,
    /// Allowed hub ratios. Empty leaves the gene continuous.
    #[serde(default)]
    pub hub_ratios: Vec<f64>,
    /// Snap `(chord_root, taper_exp)` to the nearest catalog entry.
    #[serde(default)]
    pub chord_on_catalog: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSpaceConfig {
    /// N
    pub thrust_range: (f64, f64),
    /// m/s
    pub speed_range: (f64, f64),
    /// rev/min
    pub rpm_range: (f64, f64),
    /// m
    pub diameter_range: (f64, f64),
    pub hub_ratio_range: (f64, f64),
    pub blade_counts: Vec<u32>,
    /// `(chord_root, taper_exp)` profiles drawn during data generation.
    pub chord_catalog: Vec<(f64, f64)>,
    /// GA search bounds for `chord_root`.
    pub chord_root_range: (f64, f64),
    /// GA search bounds for `taper_exp`.
    pub taper_exp_range: (f64, f64),
    /// Section drag coefficient assigned to every generated or decoded design.
    pub section_drag_coeff: f64,
    pub rng_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<GeneLattice>,
}

impl Default for DesignSpaceConfig {
    fn default() -> Self {
        let roots = [0.10, 0.15, 0.20];
        let tapers = [0.5, 1.0, 2.0];
        let chord_catalog = roots
            .iter()
            .flat_map(|&r| tapers.iter().map(move |&t| (r, t)))
            .collect();
        Self {
            thrust_range: (10e3, 500e3),
            speed_range: (5.0, 20.0),
            rpm_range: (500.0, 4000.0),
            diameter_range: (0.5, 4.0),
            hub_ratio_range: (0.15, 0.30),
            blade_counts: vec![3, 4, 5, 6],
            chord_catalog,
            chord_root_range: (0.10, 0.20),
            taper_exp_range: (0.5, 2.0),
            section_drag_coeff: 0.008,
            rng_seed: 0,
            lattice: None,
        }
    }
}

pub fn default_config() -> DesignSpaceConfig {
    DesignSpaceConfig::default()
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must satisfy min < max, got ({lo}, {hi})"
        )))
    }
}

fn within(name: &str, (lo, hi): (f64, f64), (min, max): (f64, f64)) -> Result<()> {
    if lo >= min && hi <= max {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} ({lo}, {hi}) must lie within [{min}, {max}]"
        )))
    }
}

impl DesignSpaceConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("thrust_range", self.thrust_range)?;
        check_range("speed_range", self.speed_range)?;
        check_range("rpm_range", self.rpm_range)?;
        check_range("diameter_range", self.diameter_range)?;
        check_range("hub_ratio_range", self.hub_ratio_range)?;
        check_range("chord_root_range", self.chord_root_range)?;
        check_range("taper_exp_range", self.taper_exp_range)?;
        for (name, (lo, _)) in [
            ("thrust_range", self.thrust_range),
            ("speed_range", self.speed_range),
            ("rpm_range", self.rpm_range),
            ("diameter_range", self.diameter_range),
        ] {
            if lo <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        within(
            "hub_ratio_range",
            self.hub_ratio_range,
            (f64::MIN_POSITIVE, 1.0 - f64::EPSILON),
        )?;
        within("chord_root_range", self.chord_root_range, CHORD_ROOT_BOUNDS)?;
        within("taper_exp_range", self.taper_exp_range, TAPER_EXP_BOUNDS)?;
        if self.blade_counts.is_empty() {
            return Err(Error::Config("blade_counts is empty".into()));
        }
        if let Some(z) = self
            .blade_counts
            .iter()
            .find(|z| !ALLOWED_BLADE_COUNTS.contains(z))
        {
            return Err(Error::Config(format!(
                "blade count {z} not in {ALLOWED_BLADE_COUNTS:?}"
            )));
        }
        if self.chord_catalog.is_empty() {
            return Err(Error::Config("chord_catalog is empty".into()));
        }
        for &(root, taper) in &self.chord_catalog {
            if !(CHORD_ROOT_BOUNDS.0..=CHORD_ROOT_BOUNDS.1).contains(&root)
                || !(TAPER_EXP_BOUNDS.0..=TAPER_EXP_BOUNDS.1).contains(&taper)
            {
                return Err(Error::Config(format!(
                    "catalog profile ({root}, {taper}) outside geometry bounds"
                )));
            }
        }
        if !(self.section_drag_coeff.is_finite() && self.section_drag_coeff >= 0.0) {
            return Err(Error::Config(
                "section_drag_coeff must be non-negative".into(),
            ));
        }
        if let Some(lattice) = &self.lattice {
            let bad = |levels: &[f64], range: (f64, f64)| {
                levels.iter().any(|v| !(range.0..=range.1).contains(v))
            };
            if bad(&lattice.diameters, self.diameter_range)
                || bad(&lattice.hub_ratios, self.hub_ratio_range)
            {
                return Err(Error::Config(
                    "lattice levels must lie inside their gene ranges".into(),
                ));
            }
        }
        Ok(())
    }

    /// Bounds of the four continuous genes, in genome order.
    pub fn gene_ranges(&self) -> [(f64, f64); 4] {
        [
            self.diameter_range,
            self.hub_ratio_range,
            self.chord_root_range,
            self.taper_exp_range,
        ]
    }
}

pub fn sample_requirement<R: Rng + ?Sized>(cfg: &DesignSpaceConfig, rng: &mut R) -> Requirement {
    Requirement {
        thrust: rng.gen_range(cfg.thrust_range.0..cfg.thrust_range.1),
        ship_speed: rng.gen_range(cfg.speed_range.0..cfg.speed_range.1),
        rpm: rng.gen_range(cfg.rpm_range.0..cfg.rpm_range.1),
    }
}

/// Uniform diameter and hub ratio, a catalog chord profile and a uniform blade count.
pub fn sample_geometry<R: Rng + ?Sized>(cfg: &DesignSpaceConfig, rng: &mut R) -> BladeGeometry {
    let diameter = rng.gen_range(cfg.diameter_range.0..cfg.diameter_range.1);
    let hub_ratio = rng.gen_range(cfg.hub_ratio_range.0..cfg.hub_ratio_range.1);
    let (chord_root, taper_exp) = cfg.chord_catalog[rng.gen_range(0..cfg.chord_catalog.len())];
    let blade_count = cfg.blade_counts[rng.gen_range(0..cfg.blade_counts.len())];
    BladeGeometry {
        blade_count,
        diameter,
        hub_diameter: hub_ratio * diameter,
        chord_root,
        taper_exp,
        section_drag_coeff: cfg.section_drag_coeff,
    }
}

/// GA chromosome: `[diameter, hub_ratio, chord_root, taper_exp]` plus a blade-count index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub values: [f64; 4],
    pub blade_index: usize,
}

impl Genome {
    pub fn random<R: Rng + ?Sized>(cfg: &DesignSpaceConfig, rng: &mut R) -> Self {
        let ranges = cfg.gene_ranges();
        let mut values = [0.0; 4];
        for (v, (lo, hi)) in values.iter_mut().zip(ranges) {
            *v = rng.gen_range(lo..hi);
        }
        Self {
            values,
            blade_index: rng.gen_range(0..cfg.blade_counts.len()),
        }
    }
}

pub fn encode(geom: &BladeGeometry, cfg: &DesignSpaceConfig) -> Genome {
    let blade_index = cfg
        .blade_counts
        .iter()
        .enumerate()
        .min_by_key(|(_, &z)| z.abs_diff(geom.blade_count))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Genome {
        values: [
            geom.diameter,
            geom.hub_ratio(),
            geom.chord_root,
            geom.taper_exp,
        ],
        blade_index,
    }
}

fn nearest(levels: &[f64], value: f64) -> f64 {
    levels
        .iter()
        .copied()
        .min_by(|a, b| (a - value).abs().total_cmp(&(b - value).abs()))
        .unwrap_or(value)
}

/// Clamps every gene into range (and onto the lattice, if any) and builds the geometry.
pub fn decode(genome: &Genome, cfg: &DesignSpaceConfig) -> BladeGeometry {
    let ranges = cfg.gene_ranges();
    let mut v = genome.values;
    for (x, (lo, hi)) in v.iter_mut().zip(ranges) {
        *x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
    }
    if let Some(lattice) = &cfg.lattice {
        if !lattice.diameters.is_empty() {
            v[0] = nearest(&lattice.diameters, v[0]);
        }
        if !lattice.hub_ratios.is_empty() {
            v[1] = nearest(&lattice.hub_ratios, v[1]);
        }
        if lattice.chord_on_catalog {
            let span_root = ranges[2].1 - ranges[2].0;
            let span_taper = ranges[3].1 - ranges[3].0;
            let (root, taper) = cfg
                .chord_catalog
                .iter()
                .copied()
                .min_by(|a, b| {
                    let d = |p: &(f64, f64)| {
                        ((p.0 - v[2]) / span_root).powi(2) + ((p.1 - v[3]) / span_taper).powi(2)
                    };
                    d(a).total_cmp(&d(b))
                })
                .unwrap_or((v[2], v[3]));
            v[2] = root;
            v[3] = taper;
        }
    }
    let blade_index = genome.blade_index.min(cfg.blade_counts.len() - 1);
    BladeGeometry {
        blade_count: cfg.blade_counts[blade_index],
        diameter: v[0],
        hub_diameter: v[1] * v[0],
        chord_root: v[2],
        taper_exp: v[3],
        section_drag_coeff: cfg.section_drag_coeff,
    }
}

/// Every design on the lattice, in diameter / hub ratio / catalog order.
///
/// Returns `None` unless the config carries a lattice that fixes all continuous genes.
pub fn enumerate_lattice(cfg: &DesignSpaceConfig) -> Option<Vec<BladeGeometry>> {
    let lattice = cfg.lattice.as_ref()?;
    if lattice.diameters.is_empty() || lattice.hub_ratios.is_empty() || !lattice.chord_on_catalog {
        return None;
    }
    let mut out = Vec::new();
    for &z in &cfg.blade_counts {
        for &d in &lattice.diameters {
            for &h in &lattice.hub_ratios {
                for &(root, taper) in &cfg.chord_catalog {
                    out.push(BladeGeometry {
                        blade_count: z,
                        diameter: d,
                        hub_diameter: h * d,
                        chord_root: root,
                        taper_exp: taper,
                        section_drag_coeff: cfg.section_drag_coeff,
                    });
                }
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ranges_cover_benchmark_requirements() {
        let cfg = default_config();
        cfg.validate().unwrap();
        assert!(cfg.thrust_range.0 <= 51783.0 && 51783.0 <= cfg.thrust_range.1);
        assert!(cfg.speed_range.0 <= 7.5 && 7.5 <= cfg.speed_range.1);
        assert!(cfg.rpm_range.0 <= 3551.0 && 3551.0 <= cfg.rpm_range.1);
        assert_eq!(cfg.chord_catalog.len(), 9);
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = default_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: DesignSpaceConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn sampling_is_seeded() {
        let cfg = default_config();
        let a = sample_requirement(&cfg, &mut seeded_rng(42, 0));
        let b = sample_requirement(&cfg, &mut seeded_rng(42, 0));
        assert_eq!(a, b);
        let a = sample_geometry(&cfg, &mut seeded_rng(42, 0));
        let b = sample_geometry(&cfg, &mut seeded_rng(42, 0));
        assert_eq!(a, b);

        let mut r1 = seeded_rng(1, 0);
        let mut r2 = seeded_rng(2, 0);
        let s1: Vec<_> = (0..1000)
            .map(|_| sample_requirement(&cfg, &mut r1))
            .collect();
        let s2: Vec<_> = (0..1000)
            .map(|_| sample_requirement(&cfg, &mut r2))
            .collect();
        assert_ne!(s1, s2);
    }

    #[test]
    fn samples_respect_ranges_and_catalog() {
        let cfg = default_config();
        let mut rng = seeded_rng(9, 0);
        for _ in 0..1000 {
            let r = sample_requirement(&cfg, &mut rng);
            assert!((cfg.thrust_range.0..cfg.thrust_range.1).contains(&r.thrust));
            assert!((cfg.speed_range.0..cfg.speed_range.1).contains(&r.ship_speed));
            assert!((cfg.rpm_range.0..cfg.rpm_range.1).contains(&r.rpm));
            let g = sample_geometry(&cfg, &mut rng);
            g.validate().unwrap();
            assert!(cfg.chord_catalog.contains(&(g.chord_root, g.taper_exp)));
        }
    }

    #[test]
    fn catalog_profiles_are_positive_inside_the_span() {
        let cfg = default_config();
        for &(root, taper) in &cfg.chord_catalog {
            for i in 1..1000 {
                let x = i as f64 / 1000.0;
                assert!(crate::hydro::chord_profile(root, taper, x) > 0.0);
            }
        }
    }

    #[test]
    fn decode_clamps_and_indexes() {
        let cfg = default_config();
        let g = decode(
            &Genome {
                values: [10.0, 0.2, 0.15, 1.0],
                blade_index: 2,
            },
            &cfg,
        );
        assert_eq!(g.diameter, cfg.diameter_range.1);
        assert_eq!(g.blade_count, 5);
        let g = decode(
            &Genome {
                values: [-3.0, -1.0, 9.0, f64::NAN],
                blade_index: 99,
            },
            &cfg,
        );
        assert_eq!(g.diameter, cfg.diameter_range.0);
        assert_eq!(g.hub_ratio(), cfg.hub_ratio_range.0);
        assert_eq!(g.chord_root, cfg.chord_root_range.1);
        assert_eq!(g.blade_count, 6);
        g.validate().unwrap();
    }

    #[test]
    fn lattice_snaps_and_enumerates() {
        let cfg = DesignSpaceConfig {
            blade_counts: vec![4],
            lattice: Some(GeneLattice {
                diameters: vec![1.0, 2.0, 3.0],
                hub_ratios: vec![0.15, 0.2, 0.25],
                chord_on_catalog: true,
            }),
            ..default_config()
        };
        cfg.validate().unwrap();
        let all = enumerate_lattice(&cfg).unwrap();
        assert_eq!(all.len(), 81);
        let g = decode(
            &Genome {
                values: [1.4, 0.21, 0.13, 1.6],
                blade_index: 0,
            },
            &cfg,
        );
        assert_eq!(g.diameter, 1.0);
        assert_eq!(g.hub_ratio(), 0.2);
        assert_eq!((g.chord_root, g.taper_exp), (0.15, 2.0));
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = DesignSpaceConfig {
            thrust_range: (5.0, 5.0),
            ..default_config()
        };
        assert!(bad.validate().is_err());
        let bad = DesignSpaceConfig {
            chord_catalog: vec![],
            ..default_config()
        };
        assert!(bad.validate().is_err());
        let bad = DesignSpaceConfig {
            blade_counts: vec![2],
            ..default_config()
        };
        assert!(bad.validate().is_err());
    }
}
