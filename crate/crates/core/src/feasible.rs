//! Feasible initial states: grid sweep of closed-loop episodes, fitting of
//! the boundary inequalities and Lyapunov verification inside the fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_3;

use crate::config::DockingConfig;
use crate::controller::{lyapunov_rate, Gains};
use crate::error::{DockError, Result};
use crate::geometry::{CameraSpec, LandmarkSpec, PolarState};
use crate::simulator::{run_episode, ActuatorModel, EpisodeParams, InitialState, Outcome};

/// Evenly spaced samples `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.steps {
            return self.max;
        }
        self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
    }

    fn validate(&self, field: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(DockError::invalid(field, "need finite min < max"));
        }
        if self.steps < 2 {
            return Err(DockError::invalid(field, "need at least 2 steps"));
        }
        Ok(())
    }
}

/// Regular grid over the polar state space, `rho`-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateGrid {
    pub rho: AxisRange,
    pub alpha: AxisRange,
    pub phi: AxisRange,
}

impl Default for StateGrid {
    fn default() -> Self {
        Self {
            rho: AxisRange::new(0.1, 2.0, 21),
            alpha: AxisRange::new(-FRAC_PI_3, FRAC_PI_3, 21),
            phi: AxisRange::new(-FRAC_PI_3, FRAC_PI_3, 21),
        }
    }
}

impl StateGrid {
    pub fn validate(&self) -> Result<()> {
        self.rho.validate("grid.rho")?;
        self.alpha.validate("grid.alpha")?;
        self.phi.validate("grid.phi")?;
        if !(self.rho.min > 0.0) {
            return Err(DockError::invalid("grid.rho", "min must be > 0"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rho.steps * self.alpha.steps * self.phi.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(rho, alpha, phi)` axis indices of a flat index.
    pub fn unflatten(&self, index: usize) -> [usize; 3] {
        let na = self.alpha.steps;
        let np = self.phi.steps;
        [index / (na * np), (index / np) % na, index % np]
    }

    pub fn flatten(&self, [i, j, k]: [usize; 3]) -> usize {
        (i * self.alpha.steps + j) * self.phi.steps + k
    }

    pub fn state(&self, index: usize) -> PolarState {
        let [i, j, k] = self.unflatten(index);
        PolarState {
            rho: self.rho.value(i),
            alpha: self.alpha.value(j),
            phi: self.phi.value(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityLabel {
    pub index: usize,
    pub state: PolarState,
    /// Converged without ever losing the object from view.
    pub feasible: bool,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

/// Episode settings for sweeps: the config's geometry and gains with an ideal actuator.
pub fn sweep_params(cfg: &DockingConfig) -> Result<EpisodeParams> {
    Ok(EpisodeParams::from_config(cfg)?.with_actuator(ActuatorModel::ideal()))
}

/// Labels every grid point by running one episode from it. Order follows the grid index.
pub fn sweep(grid: &StateGrid, params: &EpisodeParams) -> Result<Vec<FeasibilityLabel>> {
    grid.validate()?;
    params.validate()?;
    Ok((0..grid.len())
        .into_par_iter()
        .map(|index| label_point(index, grid.state(index), params))
        .collect())
}

fn label_point(index: usize, state: PolarState, params: &EpisodeParams) -> FeasibilityLabel {
    match run_episode(&InitialState::Polar(state), params, None) {
        Ok(r) => FeasibilityLabel {
            index,
            state,
            feasible: r.outcome == Outcome::Converged,
            outcome: r.outcome,
            fault: r.fault,
        },
        Err(e) => FeasibilityLabel {
            index,
            state,
            feasible: false,
            outcome: Outcome::Fault,
            fault: Some(e.to_string()),
        },
    }
}

/// Fitted boundary parameters plus the clipping box of the sampled space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFit {
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub k7: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// `|alpha|` bound of the space the fit was made in.
    pub alpha_limit: f64,
    /// `|phi|` bound of the space the fit was made in.
    pub phi_limit: f64,
}

impl BoundaryFit {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.k4,
            self.k5,
            self.k6,
            self.k7,
            self.rho_min,
            self.alpha_limit,
            self.phi_limit,
        ];
        if !positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(DockError::invalid("fit", "k4..k7, rho_min and limits must be positive"));
        }
        if !(self.rho_min < self.rho_max && self.rho_max.is_finite()) {
            return Err(DockError::invalid("fit.rho_max", "need rho_min < rho_max"));
        }
        Ok(())
    }

    /// Fitted inequalities restricted to the sampled space.
    pub fn contains(&self, s: &PolarState, cam: &CameraSpec, lm: &LandmarkSpec) -> bool {
        s.alpha.abs() <= self.alpha_limit && s.phi.abs() <= self.phi_limit && in_fitted_region(s, self, cam, lm)
    }
}

/// The three fitted inequalities:
///
/// ```text
/// rho_min <= rho <= rho_max
/// |phi + k4 beta| <= rho / (k5 (r + l))
/// |alpha - k6 phi| <= k7 rho (1 - |phi + k4 beta| k5 (r + l) / rho) alpha_bar
/// ```
pub fn in_fitted_region(s: &PolarState, fit: &BoundaryFit, cam: &CameraSpec, lm: &LandmarkSpec) -> bool {
    if !(fit.rho_min <= s.rho && s.rho <= fit.rho_max) {
        return false;
    }
    let phi_bound = s.rho / (fit.k5 * (lm.r + cam.l));
    let phi_dev = (s.phi + fit.k4 * lm.beta).abs();
    if phi_dev > phi_bound {
        return false;
    }
    let alpha_bound = if phi_bound > 0.0 {
        fit.k7 * s.rho * (1.0 - phi_dev / phi_bound) * cam.alpha_bar
    } else {
        0.0
    };
    (s.alpha - fit.k6 * s.phi).abs() <= alpha_bound
}

/// Controls what counts as a forbidden point when fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Forbid grid neighbours (within this many cells) of infeasible points.
    pub margin_cells: usize,
    /// Also forbid sampled states whose Lyapunov rate is above `guard_rate`.
    pub lyapunov_guard: bool,
    /// Quasi-random states over the sampled space checked by the guard.
    pub guard_samples: usize,
    /// Rates above this (slightly negative) level count as violations for the guard.
    pub guard_rate: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            margin_cells: 1,
            lyapunov_guard: true,
            guard_samples: 200_000,
            guard_rate: -5e-4,
        }
    }
}

const CANDIDATES: usize = 81;
/// Fit, sample the candidate region, forbid what the guard finds, refit.
const MAX_GUARD_ROUNDS: usize = 8;

fn log_candidates(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Clone, Copy)]
struct Shape {
    k4: f64,
    k5: f64,
    k6: f64,
    k7: f64,
}

/// Where an off-grid forbidden state sits along the `rho` levels.
#[derive(Clone, Copy)]
enum RhoSlot {
    Level(usize),
    /// Strictly between levels `i` and `i + 1`.
    Gap(usize),
}

/// Grid points prepared for repeated region tests.
struct Problem<'a> {
    grid: &'a StateGrid,
    cam: CameraSpec,
    lm: LandmarkSpec,
    states: Vec<PolarState>,
    /// 1 for a coverable feasible point, -1 for a forbidden point, 0 otherwise.
    weight: Vec<i8>,
    /// Forbidden states off the grid.
    extra: Vec<(PolarState, RhoSlot)>,
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Score {
    covered: usize,
    /// Tie-break: prefer fewer grid points inside overall, hugging the feasible set.
    neg_inside: i64,
}

impl Problem<'_> {
    /// Best `rho` interval for a shape: the run of clean rho levels covering
    /// the most feasible points.
    fn evaluate(&self, shape: Shape) -> Option<(Score, usize, usize)> {
        let levels = self.grid.rho.steps;
        let mut gain = vec![0usize; levels];
        let mut inside = vec![0usize; levels];
        let mut dirty = vec![false; levels];
        // dirty_gap[i]: an interval may not span levels i and i + 1
        let mut dirty_gap = vec![false; levels];
        let fit = self.as_fit(shape, self.grid.rho.min, self.grid.rho.max);
        for (idx, s) in self.states.iter().enumerate() {
            let w = self.weight[idx];
            let level = self.grid.unflatten(idx)[0];
            if dirty[level] && w >= 0 {
                continue;
            }
            if !in_fitted_region(s, &fit, &self.cam, &self.lm) {
                continue;
            }
            inside[level] += 1;
            match w {
                1 => gain[level] += 1,
                -1 => dirty[level] = true,
                _ => {}
            }
        }
        for (s, slot) in &self.extra {
            let already = match *slot {
                RhoSlot::Level(i) => dirty[i],
                RhoSlot::Gap(i) => dirty_gap[i],
            };
            if already || !in_fitted_region(s, &fit, &self.cam, &self.lm) {
                continue;
            }
            match *slot {
                RhoSlot::Level(i) => dirty[i] = true,
                RhoSlot::Gap(i) => dirty_gap[i] = true,
            }
        }

        let mut best: Option<(Score, usize, usize)> = None;
        let mut start = 0;
        while start < levels {
            if dirty[start] {
                start += 1;
                continue;
            }
            let mut end = start + 1;
            while end < levels && !dirty[end] && !dirty_gap[end - 1] {
                end += 1;
            }
            // trim empty levels at both ends so the interval hugs the covered points
            let (mut lo, mut hi) = (start, end - 1);
            while lo < hi && gain[lo] == 0 {
                lo += 1;
            }
            while hi > lo && gain[hi] == 0 {
                hi -= 1;
            }
            if lo == hi {
                if hi + 1 < end {
                    hi += 1;
                } else if lo > start {
                    lo -= 1;
                }
            }
            let score = Score {
                covered: gain[lo..=hi].iter().sum(),
                neg_inside: -(inside[lo..=hi].iter().sum::<usize>() as i64),
            };
            if lo < hi && best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, lo, hi));
            }
            start = end;
        }
        best
    }

    fn as_fit(&self, shape: Shape, rho_min: f64, rho_max: f64) -> BoundaryFit {
        BoundaryFit {
            k4: shape.k4,
            k5: shape.k5,
            k6: shape.k6,
            k7: shape.k7,
            rho_min,
            rho_max,
            alpha_limit: self.grid.alpha.min.abs().max(self.grid.alpha.max.abs()),
            phi_limit: self.grid.phi.min.abs().max(self.grid.phi.max.abs()),
        }
    }
}

/// Chooses `k4..k7` and the `rho` bounds to cover as many feasible grid points
/// as possible while keeping every forbidden point outside.
///
/// Coarse lattice search over log-spaced candidates, then coordinate refinement.
/// `gains` feeds the Lyapunov guard.
pub fn fit_boundary(
    labels: &[FeasibilityLabel],
    grid: &StateGrid,
    cam: &CameraSpec,
    lm: &LandmarkSpec,
    gains: &Gains,
    settings: &FitSettings,
) -> Result<BoundaryFit> {
    grid.validate()?;
    if labels.len() != grid.len() {
        return Err(DockError::FitFailure(format!(
            "{} labels for a grid of {} points",
            labels.len(),
            grid.len()
        )));
    }
    let mut labels: Vec<&FeasibilityLabel> = labels.iter().collect();
    labels.sort_by_key(|l| l.index);
    if labels.iter().enumerate().any(|(i, l)| l.index != i) {
        return Err(DockError::FitFailure("labels do not cover the grid indices".into()));
    }

    let forbidden = forbidden_grid_points(&labels, grid, settings.margin_cells);
    let weight: Vec<i8> = labels
        .iter()
        .zip(&forbidden)
        .map(|(l, &f)| {
            if f {
                -1
            } else if l.feasible {
                1
            } else {
                0
            }
        })
        .collect();
    let extra = if settings.lyapunov_guard {
        guard_points(grid, cam, lm, gains, settings)
    } else {
        Vec::new()
    };
    let mut problem = Problem {
        grid,
        cam: *cam,
        lm: *lm,
        states: labels.iter().map(|l| l.state).collect(),
        weight,
        extra,
    };

    for _ in 0..MAX_GUARD_ROUNDS {
        let (score, shape, lo, hi) = search(&problem)
            .ok_or_else(|| DockError::FitFailure("no sound region with nonzero volume exists".into()))?;
        if score.covered == 0 {
            return Err(DockError::FitFailure("no feasible point can be covered soundly".into()));
        }
        let fit = problem.as_fit(shape, grid.rho.value(lo), grid.rho.value(hi));
        fit.validate()?;
        if !settings.lyapunov_guard {
            return Ok(fit);
        }
        // counterexamples from inside the candidate, where box-wide samples are sparse
        let found: Vec<_> = region_halton(&fit, cam, lm, settings.guard_samples / 2, [17, 19, 23])
            .into_par_iter()
            .filter(|s| !lyapunov_rate(s, gains, cam, lm).is_ok_and(|v| v <= settings.guard_rate))
            .map(|s| (s, rho_slot(grid, s.rho)))
            .collect();
        if found.is_empty() {
            return Ok(fit);
        }
        problem.extra.extend(found);
    }
    Err(DockError::FitFailure(format!(
        "Lyapunov guard still finds violations after {MAX_GUARD_ROUNDS} refits"
    )))
}

/// Lattice search then coordinate refinement over the shape parameters.
fn search(problem: &Problem) -> Option<(Score, Shape, usize, usize)> {
    let lm = &problem.lm;
    let fine = log_candidates(1e-2, 1e2, CANDIDATES);
    let coarse: Vec<f64> = fine.iter().copied().step_by(8).collect();
    let k4s: Vec<f64> = if lm.beta == 0.0 { vec![1.0] } else { coarse.clone() };

    let consider = |shape: Shape, best: &mut Option<(Score, Shape, usize, usize)>| {
        if let Some((score, lo, hi)) = problem.evaluate(shape) {
            if best.as_ref().is_none_or(|b| score > b.0) {
                *best = Some((score, shape, lo, hi));
            }
        }
    };
    let mut lattice = Vec::with_capacity(k4s.len() * coarse.len().pow(3));
    for &k4 in &k4s {
        for &k5 in &coarse {
            for &k6 in &coarse {
                for &k7 in &coarse {
                    lattice.push(Shape { k4, k5, k6, k7 });
                }
            }
        }
    }
    // parallel over the lattice; the reduction keeps the first best in lattice order
    let best = lattice
        .par_iter()
        .enumerate()
        .filter_map(|(i, &shape)| {
            problem
                .evaluate(shape)
                .map(|(score, lo, hi)| (i, (score, shape, lo, hi)))
        })
        .reduce_with(|a, b| {
            let (sa, sb) = (a.1 .0, b.1 .0);
            if sb > sa || (sb == sa && b.0 < a.0) {
                b
            } else {
                a
            }
        })
        .map(|(_, v)| v);
    let mut current = best?;

    // coordinate refinement on the fine candidates
    for _ in 0..20 {
        let before = current.0;
        for coord in 0..4 {
            if coord == 0 && lm.beta == 0.0 {
                continue;
            }
            let mut local = Some(current);
            for &v in &fine {
                let mut shape = current.1;
                match coord {
                    0 => shape.k4 = v,
                    1 => shape.k5 = v,
                    2 => shape.k6 = v,
                    _ => shape.k7 = v,
                }
                consider(shape, &mut local);
            }
            current = local.expect("seeded with the current best");
        }
        if current.0 == before {
            break;
        }
    }

    Some(current)
}

fn forbidden_grid_points(labels: &[&FeasibilityLabel], grid: &StateGrid, margin: usize) -> Vec<bool> {
    let mut forbidden = vec![false; labels.len()];
    let m = margin as isize;
    let dims = [grid.rho.steps, grid.alpha.steps, grid.phi.steps];
    for l in labels.iter().filter(|l| !l.feasible) {
        let c = grid.unflatten(l.index);
        for di in -m..=m {
            for dj in -m..=m {
                for dk in -m..=m {
                    let n = [c[0] as isize + di, c[1] as isize + dj, c[2] as isize + dk];
                    if n.iter().zip(&dims).all(|(&v, &d)| v >= 0 && (v as usize) < d) {
                        forbidden[grid.flatten(n.map(|v| v as usize))] = true;
                    }
                }
            }
        }
    }
    forbidden
}

/// Quasi-random states over the grid's box (Halton bases 7, 11, 13) whose
/// Lyapunov rate is not safely negative.
fn guard_points(
    grid: &StateGrid,
    cam: &CameraSpec,
    lm: &LandmarkSpec,
    gains: &Gains,
    settings: &FitSettings,
) -> Vec<(PolarState, RhoSlot)> {
    let lerp = |r: &AxisRange, u: f64| r.min + (r.max - r.min) * u;
    (1..=settings.guard_samples)
        .into_par_iter()
        .filter_map(|i| {
            let s = PolarState {
                rho: lerp(&grid.rho, halton(i, 7)),
                alpha: lerp(&grid.alpha, halton(i, 11)),
                phi: lerp(&grid.phi, halton(i, 13)),
            };
            if lyapunov_rate(&s, gains, cam, lm).is_ok_and(|v| v <= settings.guard_rate) {
                return None;
            }
            Some((s, rho_slot(grid, s.rho)))
        })
        .collect()
}

fn rho_slot(grid: &StateGrid, rho: f64) -> RhoSlot {
    let step = (grid.rho.max - grid.rho.min) / (grid.rho.steps - 1) as f64;
    let p = (rho - grid.rho.min) / step;
    let i = p.floor();
    if p - i < 1e-9 {
        RhoSlot::Level(i as usize)
    } else if i + 1.0 - p < 1e-9 {
        RhoSlot::Level(i as usize + 1)
    } else {
        RhoSlot::Gap(i as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovViolation {
    pub state: PolarState,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub samples_requested: usize,
    pub samples_evaluated: usize,
    pub violation_count: usize,
    /// First violations found, at most [`MAX_LISTED_VIOLATIONS`].
    pub violations: Vec<LyapunovViolation>,
    pub max_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl LyapunovReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

pub const MAX_LISTED_VIOLATIONS: usize = 100;

/// Radical inverse of `i` in `base`.
fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Maps a unit-cube point into the fitted region, or `None` where the region
/// is empty for that `rho`.
fn region_point(u: [f64; 3], fit: &BoundaryFit, cam: &CameraSpec, lm: &LandmarkSpec) -> Option<PolarState> {
    let rho = fit.rho_min + (fit.rho_max - fit.rho_min) * u[0];
    let phi_bound = rho / (fit.k5 * (lm.r + cam.l));
    let center = -fit.k4 * lm.beta;
    let phi_lo = (center - phi_bound).max(-fit.phi_limit);
    let phi_hi = (center + phi_bound).min(fit.phi_limit);
    if phi_lo > phi_hi {
        return None;
    }
    let phi = phi_lo + (phi_hi - phi_lo) * u[1];
    let half = fit.k7 * rho * (1.0 - (phi - center).abs() / phi_bound) * cam.alpha_bar;
    let a_lo = (fit.k6 * phi - half).max(-fit.alpha_limit);
    let a_hi = (fit.k6 * phi + half).min(fit.alpha_limit);
    if a_lo > a_hi {
        return None;
    }
    let alpha = a_lo + (a_hi - a_lo) * u[2];
    Some(PolarState { rho, alpha, phi })
}

/// Quasi-random points inside the fitted region (Halton sequence in bases 2, 3, 5
/// mapped through the region's parameterization). Skipped indices do not count.
pub fn region_samples(fit: &BoundaryFit, cam: &CameraSpec, lm: &LandmarkSpec, count: usize) -> Vec<PolarState> {
    region_halton(fit, cam, lm, count, [2, 3, 5])
}

fn region_halton(
    fit: &BoundaryFit,
    cam: &CameraSpec,
    lm: &LandmarkSpec,
    count: usize,
    bases: [usize; 3],
) -> Vec<PolarState> {
    let mut out = Vec::with_capacity(count);
    let max_draws = count.saturating_mul(20).max(1000);
    for i in 1..=max_draws {
        if out.len() == count {
            break;
        }
        let u = bases.map(|b| halton(i, b));
        if let Some(s) = region_point(u, fit, cam, lm) {
            if fit.contains(&s, cam, lm) {
                out.push(s);
            }
        }
    }
    out
}

/// Evaluates the Lyapunov rate at quasi-random points of the fitted region.
pub fn verify_lyapunov(
    fit: &BoundaryFit,
    cam: &CameraSpec,
    lm: &LandmarkSpec,
    gains: &Gains,
    samples: usize,
) -> Result<LyapunovReport> {
    fit.validate()?;
    let points = region_samples(fit, cam, lm, samples);
    let mut report = LyapunovReport {
        samples_requested: samples,
        samples_evaluated: points.len(),
        violation_count: 0,
        violations: Vec::new(),
        max_rate: None,
        warning: None,
    };
    if points.is_empty() {
        report.warning = Some("fitted region is empty; nothing to verify".into());
        return Ok(report);
    }
    if points.len() < samples {
        report.warning = Some(format!(
            "only {} of {samples} samples fell inside the region",
            points.len()
        ));
    }
    for s in points {
        let rate = lyapunov_rate(&s, gains, cam, lm).unwrap_or(f64::NAN);
        report.max_rate = Some(report.max_rate.map_or(rate, |m: f64| m.max(rate)));
        if !(rate < 0.0) {
            report.violation_count += 1;
            if report.violations.len() < MAX_LISTED_VIOLATIONS {
                report.violations.push(LyapunovViolation { state: s, rate });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn case1() -> (CameraSpec, LandmarkSpec) {
        let cfg = DockingConfig::preset("case1").unwrap();
        (cfg.camera, cfg.landmark)
    }

    fn gains() -> Gains {
        let (cam, lm) = case1();
        Gains::designed(0.15, 0.6, &cam, &lm).unwrap()
    }

    fn literal(s: &PolarState, f: &BoundaryFit, cam: &CameraSpec, lm: &LandmarkSpec) -> bool {
        let rl = lm.r + cam.l;
        let lhs_phi = (s.phi + f.k4 * lm.beta).abs();
        let rhs_phi = s.rho / (f.k5 * rl);
        let nested = if rhs_phi == 0.0 {
            0.0
        } else {
            f.k7 * s.rho * (1.0 - lhs_phi / rhs_phi) * cam.alpha_bar
        };
        f.rho_min <= s.rho && s.rho <= f.rho_max && lhs_phi <= rhs_phi && (s.alpha - f.k6 * s.phi).abs() <= nested
    }

    fn some_fit() -> BoundaryFit {
        BoundaryFit {
            k4: 1.0,
            k5: 2.0,
            k6: 0.5,
            k7: 1.5,
            rho_min: 0.2,
            rho_max: 1.8,
            alpha_limit: FRAC_PI_3,
            phi_limit: FRAC_PI_3,
        }
    }

    #[test]
    fn region_examples() {
        let (cam, _) = case1();
        let lm = LandmarkSpec::new(0.9, -0.3, 0.0).unwrap();
        let f = some_fit();
        let phi = -f.k4 * lm.beta;
        let corner = PolarState {
            rho: f.rho_max,
            alpha: f.k6 * phi,
            phi,
        };
        assert!(in_fitted_region(&corner, &f, &cam, &lm));
        let (cam, lm) = case1();
        for rho in [f.rho_min, 1.0, f.rho_max] {
            assert!(in_fitted_region(
                &PolarState {
                    rho,
                    alpha: 0.0,
                    phi: 0.0
                },
                &f,
                &cam,
                &lm
            ));
        }
        assert!(!in_fitted_region(
            &PolarState {
                rho: 1.9,
                alpha: 0.0,
                phi: 0.0
            },
            &f,
            &cam,
            &lm
        ));
    }

    proptest! {
        #[test]
        fn region_matches_literal_transcription(
            rho in 0.0f64..2.5, alpha in -1.2f64..1.2, phi in -1.2f64..1.2,
            k in prop::array::uniform4(0.05f64..5.0), beta in -0.5f64..0.5,
        ) {
            let (cam, _) = case1();
            let lm = LandmarkSpec::new(0.9, beta, 0.0).unwrap();
            let f = BoundaryFit { k4: k[0], k5: k[1], k6: k[2], k7: k[3], ..some_fit() };
            let s = PolarState { rho, alpha, phi };
            prop_assert_eq!(in_fitted_region(&s, &f, &cam, &lm), literal(&s, &f, &cam, &lm));
        }
    }

    #[test]
    fn grid_indexing_round_trips() {
        let g = StateGrid::default();
        assert_eq!(g.len(), 9261);
        for idx in [0, 1, 20, 21, 440, 441, 9260] {
            assert_eq!(g.flatten(g.unflatten(idx)), idx);
        }
        let last = g.state(9260);
        assert_eq!((last.rho, last.alpha, last.phi), (2.0, FRAC_PI_3, FRAC_PI_3));
        let mid = g.state(g.flatten([0, 10, 10]));
        assert!(mid.alpha.abs() < 1e-15 && mid.phi.abs() < 1e-15);
    }

    fn synthetic_labels(grid: &StateGrid, inside: impl Fn(&PolarState) -> bool) -> Vec<FeasibilityLabel> {
        (0..grid.len())
            .map(|index| {
                let state = grid.state(index);
                let feasible = inside(&state);
                FeasibilityLabel {
                    index,
                    state,
                    feasible,
                    outcome: if feasible {
                        Outcome::Converged
                    } else {
                        Outcome::FovViolation
                    },
                    fault: None,
                }
            })
            .collect()
    }

    #[test]
    fn separable_box_is_fitted_soundly() {
        let (cam, lm) = case1();
        let grid = StateGrid {
            rho: AxisRange::new(0.1, 2.0, 11),
            alpha: AxisRange::new(-FRAC_PI_3, FRAC_PI_3, 11),
            phi: AxisRange::new(-FRAC_PI_3, FRAC_PI_3, 11),
        };
        // box sized so the fitted family can enclose it: the alpha band widens with rho
        let labels = synthetic_labels(&grid, |s| {
            s.rho >= 1.0 && s.rho <= 1.8 && s.alpha.abs() < 0.3 && s.phi.abs() < 0.1
        });
        let settings = FitSettings {
            margin_cells: 0,
            lyapunov_guard: false,
            ..FitSettings::default()
        };
        let fit = fit_boundary(&labels, &grid, &cam, &lm, &gains(), &settings).unwrap();
        let inside: Vec<_> = labels.iter().filter(|l| fit.contains(&l.state, &cam, &lm)).collect();
        assert!(inside.iter().all(|l| l.feasible));
        let total = labels.iter().filter(|l| l.feasible).count();
        let covered = inside.len();
        assert!(covered as f64 >= 0.9 * total as f64, "{covered}/{total}");
    }

    #[test]
    fn all_feasible_fills_the_space() {
        let (cam, lm) = case1();
        let grid = StateGrid {
            rho: AxisRange::new(0.1, 2.0, 6),
            alpha: AxisRange::new(-FRAC_PI_3, FRAC_PI_3, 5),
            phi: AxisRange::new(-FRAC_PI_3, FRAC_PI_3, 5),
        };
        let labels = synthetic_labels(&grid, |_| true);
        let settings = FitSettings {
            lyapunov_guard: false,
            ..FitSettings::default()
        };
        let fit = fit_boundary(&labels, &grid, &cam, &lm, &gains(), &settings).unwrap();
        assert_eq!((fit.rho_min, fit.rho_max), (0.1, 2.0));
        let covered = labels.iter().filter(|l| fit.contains(&l.state, &cam, &lm)).count();
        // rho = rho_min still has a narrow phi band, so nearly everything is covered
        assert!(covered + 25 >= labels.len(), "{covered}");
    }

    #[test]
    fn no_feasible_points_is_a_fit_failure() {
        let (cam, lm) = case1();
        let grid = StateGrid {
            rho: AxisRange::new(0.1, 2.0, 4),
            alpha: AxisRange::new(-1.0, 1.0, 3),
            phi: AxisRange::new(-1.0, 1.0, 3),
        };
        let labels = synthetic_labels(&grid, |_| false);
        assert!(matches!(
            fit_boundary(&labels, &grid, &cam, &lm, &gains(), &FitSettings::default()),
            Err(DockError::FitFailure(_))
        ));
    }

    #[test]
    fn samples_stay_inside_and_empty_region_warns() {
        let (cam, lm) = case1();
        let f = some_fit();
        let pts = region_samples(&f, &cam, &lm, 500);
        assert_eq!(pts.len(), 500);
        assert!(pts.iter().all(|s| f.contains(s, &cam, &lm)));

        // phi band sits entirely outside the clipping box
        let lm = LandmarkSpec::new(0.9, 1.5, 0.0).unwrap();
        let f = BoundaryFit { k5: 50.0, ..f };
        let report = verify_lyapunov(&f, &cam, &lm, &gains(), 100).unwrap();
        assert_eq!(report.samples_evaluated, 0);
        assert!(report.passed());
        assert!(report.warning.is_some());
    }
}
