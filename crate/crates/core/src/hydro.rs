//! Moderately loaded lifting-line model of a marine propeller.
//!
//! The blade is discretized into `M` radial panels carrying bound circulation
//! `Γ_i`. Induced velocities come from a local helical-sheet closure:
//! the swirl at the lifting line is the bound circulation shed by `Z` blades,
//! reduced by the Prandtl tip and hub loss factor, and the axial component is
//! set so that the induced velocity is perpendicular to the local relative
//! flow. With that closure each station behaves like a blade-element momentum
//! annulus.
//!
//! The optimum circulation minimizes torque subject to a thrust constraint by
//! making `H = Q + λ(T - T_req)` stationary in every `Γ_i` and in `λ`. The
//! nonlinear system is handled by freezing the induction coefficients (inflow
//! angles and loss factors), solving the per-station stationarity conditions
//! for a given multiplier, root-finding the multiplier on the thrust
//! constraint, then relaxing and thawing the coefficients until the
//! circulation stops changing.
//!
//! Sign convention: tangential induced velocity is negative (it opposes blade
//! rotation), so the relative tangential speed is `ωr + u_t`. The multiplier
//! is therefore non-positive; the root-find works on `-λ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Density of seawater, kg/m³.
pub const SEAWATER_DENSITY: f64 = 1025.0;

/// Relative thrust error allowed for a feasible design.
pub const THRUST_TOLERANCE: f64 = 1e-3;

/// Operating demand: required thrust, ship speed and shaft speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Requirement {
    /// Required thrust, N.
    pub thrust: f64,
    /// Axial inflow speed, m/s.
    pub ship_speed: f64,
    /// Shaft speed, rev/min.
    pub rpm: f64,
}

impl Requirement {
    pub fn new(thrust: f64, ship_speed: f64, rpm: f64) -> Result<Self> {
        let req = Self {
            thrust,
            ship_speed,
            rpm,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if positive(self.thrust) && positive(self.ship_speed) && positive(self.rpm) {
            Ok(())
        } else {
            Err(Error::Invariant(format!(
                "requirement components must be positive and finite: {self:?}"
            )))
        }
    }

    /// Angular velocity, rad/s.
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.rpm / 60.0
    }

    /// Rotation rate, rev/s.
    pub fn revs_per_second(&self) -> f64 {
        self.rpm / 60.0
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.thrust, self.ship_speed, self.rpm]
    }
}

pub const ALLOWED_BLADE_COUNTS: [u32; 4] = [3, 4, 5, 6];
pub const CHORD_ROOT_BOUNDS: (f64, f64) = (0.02, 0.4);
pub const TAPER_EXP_BOUNDS: (f64, f64) = (0.25, 4.0);

/// Physical design vector of a propeller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BladeGeometry {
    pub blade_count: u32,
    /// Tip diameter, m.
    pub diameter: f64,
    /// Hub diameter, m.
    pub hub_diameter: f64,
    /// Peak chord-to-diameter ratio, reached at the hub end of the blade.
    pub chord_root: f64,
    /// Planform exponent: `c/D(x) = chord_root * (1 - x²)^(taper_exp / 2)`.
    pub taper_exp: f64,
    /// Section drag coefficient, uniform along the span.
    pub section_drag_coeff: f64,
}

impl BladeGeometry {
    pub fn validate(&self) -> Result<()> {
        if !ALLOWED_BLADE_COUNTS.contains(&self.blade_count) {
            return Err(Error::Geometry(format!(
                "blade count {} not in {:?}",
                self.blade_count, ALLOWED_BLADE_COUNTS
            )));
        }
        if !(self.diameter.is_finite() && self.hub_diameter.is_finite())
            || self.hub_diameter <= 0.0
            || self.hub_diameter >= self.diameter
        {
            return Err(Error::Geometry(format!(
                "need 0 < hub diameter < diameter, got hub {} and tip {}",
                self.hub_diameter, self.diameter
            )));
        }
        let (lo, hi) = CHORD_ROOT_BOUNDS;
        if !(lo..=hi).contains(&self.chord_root) {
            return Err(Error::Geometry(format!(
                "chord_root {} outside [{lo}, {hi}]",
                self.chord_root
            )));
        }
        let (lo, hi) = TAPER_EXP_BOUNDS;
        if !(lo..=hi).contains(&self.taper_exp) {
            return Err(Error::Geometry(format!(
                "taper_exp {} outside [{lo}, {hi}]",
                self.taper_exp
            )));
        }
        if !(self.section_drag_coeff.is_finite() && self.section_drag_coeff >= 0.0) {
            return Err(Error::Geometry(format!(
                "section drag coefficient must be non-negative, got {}",
                self.section_drag_coeff
            )));
        }
        Ok(())
    }

    pub fn tip_radius(&self) -> f64 {
        0.5 * self.diameter
    }

    pub fn hub_radius(&self) -> f64 {
        0.5 * self.hub_diameter
    }

    pub fn hub_ratio(&self) -> f64 {
        self.hub_diameter / self.diameter
    }

    /// Chord-to-diameter ratio at normalized span station `x ∈ [0, 1]`.
    pub fn chord_ratio_at(&self, x: f64) -> f64 {
        chord_profile(self.chord_root, self.taper_exp, x)
    }

    /// Dimensional chord at normalized span station `x`, m.
    pub fn chord_at(&self, x: f64) -> f64 {
        self.diameter * self.chord_ratio_at(x)
    }
}

/// Chord distribution family `c/D(x) = root * (1 - x²)^(taper / 2)`.
pub fn chord_profile(chord_root: f64, taper_exp: f64, x: f64) -> f64 {
    chord_root * (1.0 - x * x).max(0.0).powf(0.5 * taper_exp)
}

/// Numerical controls of the circulation solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Fluid density, kg/m³.
    pub density: f64,
    /// Number of radial panels.
    pub station_count: usize,
    /// Under-relaxation weight applied to each new circulation estimate.
    pub relaxation: f64,
    /// Convergence threshold on `max |ΔΓ| / max Γ`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            density: SEAWATER_DENSITY,
            station_count: 20,
            relaxation: 0.5,
            tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::Config(format!(
                "density must be positive, got {}",
                self.density
            )));
        }
        if self.station_count < 4 {
            return Err(Error::Config(format!(
                "station_count must be at least 4, got {}",
                self.station_count
            )));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::Config(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Uniform midpoint panels between hub and tip.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub hub_radius: f64,
    pub tip_radius: f64,
    /// Control-point radii at panel midpoints, m.
    pub radii: Vec<f64>,
    /// Panel widths, m.
    pub widths: Vec<f64>,
    /// `(r - r_hub) / (R - r_hub)` at each control point.
    pub normalized: Vec<f64>,
}

impl RadialGrid {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

pub fn build_grid(geom: &BladeGeometry, station_count: usize) -> Result<RadialGrid> {
    if station_count < 4 {
        return Err(Error::Config(format!(
            "station_count must be at least 4, got {station_count}"
        )));
    }
    let hub = geom.hub_radius();
    let tip = geom.tip_radius();
    if !(hub > 0.0 && hub < tip) {
        return Err(Error::Geometry(format!(
            "hub radius {hub} must lie strictly inside tip radius {tip}"
        )));
    }
    let m = station_count as f64;
    let span = tip - hub;
    let width = span / m;
    let normalized: Vec<f64> = (0..station_count).map(|i| (i as f64 + 0.5) / m).collect();
    let radii = normalized.iter().map(|x| hub + x * span).collect();
    Ok(RadialGrid {
        hub_radius: hub,
        tip_radius: tip,
        radii,
        widths: vec![width; station_count],
        normalized,
    })
}

/// Prandtl tip-and-hub circulation loss factor at radius `r` for inflow angle `beta`.
pub fn prandtl_loss(r: f64, beta: f64, geom: &BladeGeometry) -> Result<f64> {
    if !(beta > 0.0 && beta < 0.5 * PI) {
        return Err(Error::NumericDomain(format!(
            "inflow angle {beta} rad outside (0, π/2)"
        )));
    }
    let tip = geom.tip_radius();
    let hub = geom.hub_radius();
    if !(r > hub && r < tip) {
        return Err(Error::NumericDomain(format!(
            "radius {r} outside open interval ({hub}, {tip})"
        )));
    }
    let z = f64::from(geom.blade_count);
    let denom = 2.0 * r * beta.sin();
    let factor = |gap: f64| (2.0 / PI) * (-z * gap / denom).exp().acos();
    Ok(factor(tip - r) * factor(r - hub))
}

/// Induced velocities `(u_a, u_t)` produced by circulation `Γ` at the given inflow angles.
pub fn induced_velocities(
    circulation: &[f64],
    grid: &RadialGrid,
    inflow_angles: &[f64],
    geom: &BladeGeometry,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let induction = FrozenInduction::new(grid, inflow_angles, geom)?;
    if circulation.len() != induction.len() {
        return Err(Error::Config(format!(
            "circulation has {} stations, grid has {}",
            circulation.len(),
            induction.len()
        )));
    }
    Ok(induction.induced(circulation))
}

/// Induction coefficients frozen at a set of inflow angles.
///
/// `u_t,i = -tangential_i * Γ_i` and `u_a,i = axial_i * Γ_i`.
#[derive(Debug, Clone)]
pub struct FrozenInduction {
    pub loss_factors: Vec<f64>,
    pub tangential: Vec<f64>,
    pub axial: Vec<f64>,
}

impl FrozenInduction {
    pub fn new(grid: &RadialGrid, inflow_angles: &[f64], geom: &BladeGeometry) -> Result<Self> {
        if inflow_angles.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} inflow angles for {} stations",
                inflow_angles.len(),
                grid.len()
            )));
        }
        let z = f64::from(geom.blade_count);
        let n = grid.len();
        let mut loss_factors = Vec::with_capacity(n);
        let mut tangential = Vec::with_capacity(n);
        let mut axial = Vec::with_capacity(n);
        for (&r, &beta) in grid.radii.iter().zip(inflow_angles) {
            let f = prandtl_loss(r, beta, geom)?;
            if f <= 0.0 {
                return Err(Error::NumericDomain(format!(
                    "zero loss factor at r = {r}; control point sits on the tip"
                )));
            }
            let kt = z / (4.0 * PI * r * f);
            loss_factors.push(f);
            tangential.push(kt);
            axial.push(kt / beta.tan());
        }
        Ok(Self {
            loss_factors,
            tangential,
            axial,
        })
    }

    pub fn len(&self) -> usize {
        self.tangential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tangential.is_empty()
    }

    pub fn induced(&self, circulation: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ua = circulation
            .iter()
            .zip(&self.axial)
            .map(|(g, a)| a * g)
            .collect();
        let ut = circulation
            .iter()
            .zip(&self.tangential)
            .map(|(g, k)| -k * g)
            .collect();
        (ua, ut)
    }

    /// `H = Q + λ (T - T_req)` with the induced velocities following `Γ` through
    /// the frozen coefficients.
    pub fn lagrangian(
        &self,
        circulation: &[f64],
        multiplier: f64,
        grid: &RadialGrid,
        geom: &BladeGeometry,
        req: &Requirement,
        density: f64,
    ) -> f64 {
        let (ua, ut) = self.induced(circulation);
        let loads = thrust_torque(circulation, &ua, &ut, grid, geom, req, density);
        loads.torque + multiplier * (loads.thrust - req.thrust)
    }
}

/// Integrated blade loads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loads {
    /// N
    pub thrust: f64,
    /// N·m
    pub torque: f64,
}

/// Thrust and torque from circulation plus section viscous drag.
pub fn thrust_torque(
    circulation: &[f64],
    axial_induced: &[f64],
    tangential_induced: &[f64],
    grid: &RadialGrid,
    geom: &BladeGeometry,
    req: &Requirement,
    density: f64,
) -> Loads {
    let va = req.ship_speed;
    let omega = req.omega();
    let mut thrust = 0.0;
    let mut torque = 0.0;
    for i in 0..grid.len() {
        let r = grid.radii[i];
        let dr = grid.widths[i];
        let axial = va + axial_induced[i];
        let tangential = omega * r + tangential_induced[i];
        let v_total = axial.hypot(tangential);
        let drag = 0.5 * v_total * geom.chord_at(grid.normalized[i]) * geom.section_drag_coeff;
        let gamma = circulation[i];
        thrust += (tangential * gamma - drag * axial) * dr;
        torque += (axial * gamma + drag * tangential) * r * dr;
    }
    let scale = density * f64::from(geom.blade_count);
    Loads {
        thrust: scale * thrust,
        torque: scale * torque,
    }
}

/// Output of the circulation optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculationSolution {
    pub circulation: Vec<f64>,
    /// Multiplier `λ` of `H = Q + λ (T - T_req)`; non-positive.
    pub lagrange_multiplier: f64,
    pub axial_induced: Vec<f64>,
    pub tangential_induced: Vec<f64>,
    pub inflow_angle: Vec<f64>,
    /// Local hydrodynamic pitch over diameter, `2π r tan β / D`.
    pub pitch_ratio: Vec<f64>,
    pub converged: bool,
    /// Set when the demand cannot be met with non-negative circulation.
    pub infeasible: bool,
    pub iterations: usize,
}

/// Per-station data with the induction coefficients frozen.
///
/// All quantities are per unit `ρ Z Δr`; torque terms carry the extra `r`.
#[derive(Debug, Clone, Copy)]
struct Station {
    r: f64,
    omega_r: f64,
    va: f64,
    kt: f64,
    ka: f64,
    /// `½ c C_D`
    half_drag: f64,
}

impl Station {
    /// Section thrust per unit `ρ Z Δr`.
    fn thrust(&self, gamma: f64) -> f64 {
        let a = self.va + self.ka * gamma;
        let b = self.omega_r - self.kt * gamma;
        b * gamma - self.half_drag * a.hypot(b) * a
    }

    /// First and second derivative of `q - μ t` with respect to `Γ`.
    fn stationarity(&self, gamma: f64, mu: f64) -> (f64, f64) {
        let (ka, kt, d) = (self.ka, self.kt, self.half_drag);
        let a = self.va + ka * gamma;
        let b = self.omega_r - kt * gamma;
        let v = a.hypot(b);
        let p = ka * a - kt * b;
        let dv = p / v;
        let d2v = (ka * ka + kt * kt) / v - p * p / (v * v * v);

        let dt = b - kt * gamma - d * (dv * a + ka * v);
        let d2t = -2.0 * kt - d * (d2v * a + 2.0 * ka * dv);
        let dq = self.r * (a + ka * gamma + d * (dv * b - kt * v));
        let d2q = self.r * (2.0 * ka + d * (d2v * b - 2.0 * kt * dv));
        (dq - mu * dt, d2q - mu * d2t)
    }

    /// Circulation making the station stationary for multiplier `-mu`; clamped at zero.
    fn optimal_circulation(&self, mu: f64) -> f64 {
        let (g0, _) = self.stationarity(0.0, mu);
        if g0 >= 0.0 {
            return 0.0;
        }
        // Inviscid closed form as the starting point.
        let inviscid =
            (mu * self.omega_r - self.r * self.va) / (2.0 * (self.r * self.ka + mu * self.kt));
        let mut lo = 0.0;
        let mut hi = (0.5 * self.omega_r / self.kt).max(2.0 * inviscid);
        let mut expansions = 0;
        while self.stationarity(hi, mu).0 <= 0.0 {
            lo = hi;
            hi *= 2.0;
            expansions += 1;
            if expansions > 60 {
                return hi;
            }
        }
        let mut x = if inviscid > lo && inviscid < hi {
            inviscid
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..100 {
            let (g, h) = self.stationarity(x, mu);
            if g == 0.0 {
                return x;
            }
            if g < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - g / h;
            let next = if h > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let step = (next - x).abs();
            x = next;
            if step <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi {
                break;
            }
        }
        x
    }
}

fn frozen_stations(
    grid: &RadialGrid,
    induction: &FrozenInduction,
    geom: &BladeGeometry,
    req: &Requirement,
) -> Vec<Station> {
    let omega = req.omega();
    (0..grid.len())
        .map(|i| Station {
            r: grid.radii[i],
            omega_r: omega * grid.radii[i],
            va: req.ship_speed,
            kt: induction.tangential[i],
            ka: induction.axial[i],
            half_drag: 0.5 * geom.chord_at(grid.normalized[i]) * geom.section_drag_coeff,
        })
        .collect()
}

/// Solves every station for `mu` and returns the circulation with the resulting thrust.
fn circulation_for(
    stations: &[Station],
    widths: &[f64],
    mu: f64,
    thrust_scale: f64,
    out: &mut [f64],
) -> f64 {
    let mut thrust = 0.0;
    for ((s, dr), g) in stations.iter().zip(widths).zip(out.iter_mut()) {
        *g = s.optimal_circulation(mu);
        thrust += s.thrust(*g) * dr;
    }
    thrust_scale * thrust
}

/// Root-finds `-λ` so the frozen-coefficient optimum meets the thrust demand.
///
/// Returns `None` when no multiplier reaches the demand.
fn solve_multiplier(
    stations: &[Station],
    widths: &[f64],
    target: f64,
    thrust_scale: f64,
    guess: f64,
    out: &mut [f64],
) -> Option<f64> {
    let mut residual = |mu: f64| circulation_for(stations, widths, mu, thrust_scale, out) - target;
    let f_guess = residual(guess);
    let (mut lo, mut f_lo, mut hi, mut f_hi);
    if f_guess >= 0.0 {
        hi = guess;
        f_hi = f_guess;
        lo = 0.8 * guess;
        f_lo = residual(lo);
        while f_lo > 0.0 {
            hi = lo;
            f_hi = f_lo;
            lo *= 0.5;
            if lo < 1e-12 * guess {
                // At mu = 0 every station is unloaded and thrust is pure drag.
                lo = 0.0;
                f_lo = residual(0.0);
                break;
            }
            f_lo = residual(lo);
        }
    } else {
        lo = guess;
        f_lo = f_guess;
        hi = 1.25 * guess;
        f_hi = residual(hi);
        let mut expansions = 0;
        while f_hi < 0.0 {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            expansions += 1;
            if expansions > 64 {
                return None;
            }
            f_hi = residual(hi);
        }
    }
    // Illinois-modified regula falsi on the bracket; thrust is monotone in mu.
    let mut side = 0i8;
    let mut mid = hi;
    for _ in 0..200 {
        mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let f_mid = residual(mid);
        if f_mid.abs() <= 1e-12 * target {
            return Some(mid);
        }
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            f_hi = f_mid;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    residual(mid);
    Some(mid)
}

/// Finds the torque-minimizing circulation that delivers the required thrust.
pub fn solve_optimal_circulation(
    geom: &BladeGeometry,
    req: &Requirement,
    options: &SolverOptions,
) -> Result<CirculationSolution> {
    geom.validate()?;
    req.validate()?;
    options.validate()?;
    let grid = build_grid(geom, options.station_count)?;
    let m = grid.len();
    let omega = req.omega();
    let va = req.ship_speed;
    let z = f64::from(geom.blade_count);
    let thrust_scale = options.density * z;

    let mean_radius = 0.5 * (grid.hub_radius + grid.tip_radius);
    let span = grid.tip_radius - grid.hub_radius;
    let initial = req.thrust / (options.density * z * omega * mean_radius * span);
    let mut circulation = vec![initial; m];
    let mut beta: Vec<f64> = grid
        .radii
        .iter()
        .map(|r| (va / (omega * r)).atan())
        .collect();
    let mut ua = vec![0.0; m];
    let mut ut = vec![0.0; m];
    let mut solved = vec![0.0; m];
    let mut mu = 1.25 * va / omega;
    let mut converged = false;
    let mut clamped = false;
    let mut iterations = 0;

    for iteration in 1..=options.max_iterations {
        iterations = iteration;
        let induction = FrozenInduction::new(&grid, &beta, geom)?;
        let stations = frozen_stations(&grid, &induction, geom, req);
        let Some(next_mu) = solve_multiplier(
            &stations,
            &grid.widths,
            req.thrust,
            thrust_scale,
            mu,
            &mut solved,
        ) else {
            return Ok(CirculationSolution {
                pitch_ratio: pitch_ratio(&grid, &beta, geom.diameter),
                circulation,
                lagrange_multiplier: -mu,
                axial_induced: ua,
                tangential_induced: ut,
                inflow_angle: beta,
                converged: false,
                infeasible: true,
                iterations,
            });
        };
        mu = next_mu;
        clamped = solved.iter().any(|&g| g <= 0.0);

        // Relaxing toward a state whose swirl exceeds the blade speed would leave
        // the inflow angles undefined; the solved circulation never does, so fall
        // back to it for this step.
        let w = options.relaxation;
        let mut relaxed: Vec<f64> = circulation
            .iter()
            .zip(&solved)
            .map(|(g, s)| (1.0 - w) * g + w * s)
            .collect();
        if relaxed
            .iter()
            .zip(&induction.tangential)
            .zip(&grid.radii)
            .any(|((g, k), r)| omega * r - k * g <= 0.0)
        {
            relaxed.copy_from_slice(&solved);
        }
        let mut max_change: f64 = 0.0;
        let mut max_gamma: f64 = 0.0;
        for (g, next) in circulation.iter_mut().zip(relaxed) {
            max_change = max_change.max((next - *g).abs());
            max_gamma = max_gamma.max(next);
            *g = next;
        }
        let (a, t) = induction.induced(&circulation);
        ua = a;
        ut = t;
        for i in 0..m {
            beta[i] = (va + ua[i]).atan2(omega * grid.radii[i] + ut[i]);
        }
        if max_gamma > 0.0 && max_change / max_gamma < options.tolerance {
            converged = true;
            break;
        }
    }

    let infeasible = converged && clamped;
    Ok(CirculationSolution {
        pitch_ratio: pitch_ratio(&grid, &beta, geom.diameter),
        circulation,
        lagrange_multiplier: -mu,
        axial_induced: ua,
        tangential_induced: ut,
        inflow_angle: beta,
        converged: converged && !clamped,
        infeasible,
        iterations,
    })
}

fn pitch_ratio(grid: &RadialGrid, beta: &[f64], diameter: f64) -> Vec<f64> {
    grid.radii
        .iter()
        .zip(beta)
        .map(|(r, b)| 2.0 * PI * r * b.tan() / diameter)
        .collect()
}

/// Open-water performance of a design at its optimum circulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub thrust: f64,
    pub torque: f64,
    /// `T Va / (Q ω)`; zero when the solve produced no usable loads.
    pub efficiency: f64,
    pub advance_ratio: f64,
    pub feasible: bool,
}

/// Open-water efficiency `T Va / (Q ω)`.
pub fn open_water_efficiency(thrust: f64, torque: f64, ship_speed: f64, omega: f64) -> f64 {
    thrust * ship_speed / (torque * omega)
}

/// Runs the circulation optimization and integrates the resulting loads.
///
/// Never fails; invalid inputs and failed solves come back with `feasible == false`.
pub fn evaluate(geom: &BladeGeometry, req: &Requirement, options: &SolverOptions) -> Performance {
    let advance_ratio = req.ship_speed / (req.revs_per_second() * geom.diameter);
    let unusable = Performance {
        thrust: 0.0,
        torque: 0.0,
        efficiency: 0.0,
        advance_ratio,
        feasible: false,
    };
    let Ok(solution) = solve_optimal_circulation(geom, req, options) else {
        return unusable;
    };
    if !solution.converged {
        return unusable;
    }
    let Ok(grid) = build_grid(geom, options.station_count) else {
        return unusable;
    };
    let loads = thrust_torque(
        &solution.circulation,
        &solution.axial_induced,
        &solution.tangential_induced,
        &grid,
        geom,
        req,
        options.density,
    );
    let efficiency = open_water_efficiency(loads.thrust, loads.torque, req.ship_speed, req.omega());
    let thrust_ok = (loads.thrust - req.thrust).abs() / req.thrust <= THRUST_TOLERANCE;
    let feasible = thrust_ok && efficiency.is_finite() && efficiency > 0.0 && efficiency < 1.0;
    Performance {
        thrust: loads.thrust,
        torque: loads.torque,
        efficiency: if efficiency.is_finite() {
            efficiency
        } else {
            0.0
        },
        advance_ratio,
        feasible,
    }
}

/// Actuator-disk thrust loading coefficient `T / (½ ρ Va² π R²)`.
pub fn thrust_coefficient(req: &Requirement, diameter: f64, density: f64) -> f64 {
    let radius = 0.5 * diameter;
    req.thrust / (0.5 * density * req.ship_speed.powi(2) * PI * radius * radius)
}

/// Momentum-theory upper bound on efficiency, `2 / (1 + √(1 + C_T))`.
pub fn ideal_efficiency(req: &Requirement, diameter: f64, density: f64) -> f64 {
    ideal_efficiency_from_loading(thrust_coefficient(req, diameter, density))
}

pub fn ideal_efficiency_from_loading(thrust_coefficient: f64) -> f64 {
    2.0 / (1.0 + (1.0 + thrust_coefficient).sqrt())
}
