//! Upper/lower potentials, the pressure function over periodic-orbit sums,
//! Bowen-equation roots and the dimension bracket, plus the diameter-sum
//! cross-check.

use crate::error::{IfsError, Result};
use crate::maps::{global_bounds, SemigroupSystem};
use crate::numeric::{log_sum_exp, CompensatedSum};
use crate::symdyn::{self, periodic_orbit, periodic_words, PeriodicWord};
use rayon::prelude::*;

const BISECTION_MAX_ITER: usize = 200;
/// Successive Bowen roots within this distance declare the p-schedule
/// converged.
pub const ROOT_CONVERGENCE_TOL: f64 = 1e-3;
const REGULARITY_DENSITY: u32 = 64;

/// Which singular value feeds the potential: log l (upper) or log s (lower).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Upper,
    Lower,
}

/// Finite-p pressure value with the change from the previous level as a
/// convergence diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureEstimate {
    pub t: f64,
    pub p: u32,
    pub value: f64,
    pub residual: f64,
}

/// Bowen roots of the upper and lower potentials with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionBounds {
    pub t_lo: f64,
    pub t_up: f64,
    pub p_used: u32,
    /// Change of the pressure at the located roots between the last two
    /// schedule levels.
    pub pressure_residual_at_roots: f64,
    pub bisection_tolerance: f64,
    /// Change of the roots themselves between the last two schedule levels.
    pub root_delta_lo: f64,
    pub root_delta_up: f64,
    /// Both root deltas below `ROOT_CONVERGENCE_TOL`.
    pub converged: bool,
    /// Regularity verdict of the sampled global bounds; when false the
    /// bracket is advisory.
    pub regular: bool,
}

/// Per-word Birkhoff sums of both potentials at a fixed period, in
/// lexicographic word order. Pressure evaluations at any t reuse the sums.
#[derive(Debug, Clone)]
pub struct BirkhoffCache {
    pub p: u32,
    sums_up: Vec<f64>,
    sums_lo: Vec<f64>,
}

/// Birkhoff sums of log l and log s along the periodic orbit of a word.
/// Each factor is evaluated at the point its branch is applied to.
fn birkhoff_sums(system: &SemigroupSystem, word: &PeriodicWord) -> Result<(f64, f64)> {
    let orbit = periodic_orbit(system, word)?;
    let p = word.len();
    let symbols = &word.word().symbols;
    let mut up = CompensatedSum::new();
    let mut lo = CompensatedSum::new();
    for k in 0..p {
        let at = orbit[(k + 1) % p];
        let sd = system
            .family
            .inverse_branch_derivative(symbols[k] as usize, at)?
            .singular_data()?;
        up.add(sd.l.ln());
        lo.add(sd.s.ln());
    }
    Ok((up.value(), lo.value()))
}

impl BirkhoffCache {
    pub fn build(system: &SemigroupSystem, p: u32) -> Result<Self> {
        let words = periodic_words(&system.transition, p, system.word_budget)?;
        let sums: Vec<(f64, f64)> = words
            .par_iter()
            .map(|w| birkhoff_sums(system, w))
            .collect::<Result<_>>()?;
        Ok(Self {
            p,
            sums_up: sums.iter().map(|s| s.0).collect(),
            sums_lo: sums.iter().map(|s| s.1).collect(),
        })
    }

    fn sums(&self, kind: PotentialKind) -> &[f64] {
        match kind {
            PotentialKind::Upper => &self.sums_up,
            PotentialKind::Lower => &self.sums_lo,
        }
    }

    /// P_p(t phi) = (1/p) log sum over Fix(sigma^p) of exp(t * Birkhoff sum).
    pub fn pressure(&self, kind: PotentialKind, t: f64) -> f64 {
        let scaled: Vec<f64> = self.sums(kind).iter().map(|&s| t * s).collect();
        log_sum_exp(&scaled) / self.p as f64
    }

    /// Largest per-level mean of the potential; must be negative for the
    /// Bowen equation to have a positive root.
    pub fn max_mean_potential(&self, kind: PotentialKind) -> f64 {
        self.sums(kind)
            .iter()
            .map(|&s| s / self.p as f64)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn word_count(&self) -> usize {
        self.sums_up.len()
    }

    /// Bisection for P_p(t phi) = 0 on [0, t_hi]; the pressure is strictly
    /// decreasing in t because the potential is strictly negative.
    pub fn bowen_root(&self, kind: PotentialKind, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(IfsError::Config(format!("tolerance {tol} must be positive")));
        }
        let max_phi = self.max_mean_potential(kind);
        let p0 = self.pressure(kind, 0.0);
        if max_phi >= 0.0 {
            return Err(IfsError::NoSignChange { t_hi: f64::NAN });
        }
        if p0.abs() <= tol {
            return Ok(0.0);
        }
        let t_hi = p0 / (-max_phi) + 1.0;
        if self.pressure(kind, t_hi) >= 0.0 {
            return Err(IfsError::NoSignChange { t_hi });
        }
        let (mut lo, mut hi) = (0.0, t_hi);
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..BISECTION_MAX_ITER {
            mid = 0.5 * (lo + hi);
            let pm = self.pressure(kind, mid);
            if pm.abs() <= tol {
                return Ok(mid);
            }
            if pm > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }
}

/// One potential value along a periodic orbit: log l (or log s) of branch
/// i_k at the orbit point the branch is applied to.
pub fn potential_eval(
    system: &SemigroupSystem,
    kind: PotentialKind,
    word: &PeriodicWord,
    k: usize,
) -> Result<f64> {
    let p = word.len();
    if k >= p {
        return Err(IfsError::Config(format!("orbit index {k} out of range for period {p}")));
    }
    let orbit = periodic_orbit(system, word)?;
    let sd = system
        .family
        .inverse_branch_derivative(word.word().symbols[k] as usize, orbit[(k + 1) % p])?
        .singular_data()?;
    Ok(match kind {
        PotentialKind::Upper => sd.l.ln(),
        PotentialKind::Lower => sd.s.ln(),
    })
}

/// Finite-p pressure with the p-1 level as residual diagnostic.
pub fn pressure(
    system: &SemigroupSystem,
    kind: PotentialKind,
    t: f64,
    p: u32,
) -> Result<PressureEstimate> {
    if p == 0 {
        return Err(IfsError::Config("pressure needs p >= 1".into()));
    }
    let cache = BirkhoffCache::build(system, p)?;
    let value = cache.pressure(kind, t);
    let residual = if p >= 2 {
        (value - BirkhoffCache::build(system, p - 1)?.pressure(kind, t)).abs()
    } else {
        f64::INFINITY
    };
    Ok(PressureEstimate { t, p, value, residual })
}

/// Bowen root at the deepest level of the system's p-schedule.
pub fn bowen_root(system: &SemigroupSystem, kind: PotentialKind, tol: f64) -> Result<f64> {
    let p = *system.p_schedule.last().expect("validated nonempty schedule");
    BirkhoffCache::build(system, p)?.bowen_root(kind, tol)
}

/// Bowen roots of both potentials across the schedule. Bounds are computed
/// even when the system fails the regularity check; the verdict is carried
/// in the `regular` flag.
pub fn dimension_bounds(
    system: &SemigroupSystem,
    tol: f64,
    p_schedule: &[u32],
) -> Result<DimensionBounds> {
    if p_schedule.is_empty() {
        return Err(IfsError::Config("empty p schedule".into()));
    }
    let regular = global_bounds(system, REGULARITY_DENSITY)?.regular;

    let mut prev: Option<(BirkhoffCache, f64, f64)> = None;
    let mut last: Option<(BirkhoffCache, f64, f64)> = None;
    for &p in p_schedule {
        let cache = BirkhoffCache::build(system, p)?;
        let t_up = cache.bowen_root(PotentialKind::Upper, tol)?;
        let t_lo = cache.bowen_root(PotentialKind::Lower, tol)?;
        prev = last.take();
        last = Some((cache, t_lo, t_up));
    }
    let (cache, t_lo, t_up) = last.expect("nonempty schedule");
    let (root_delta_lo, root_delta_up, pressure_residual) = match &prev {
        Some((pc, plo, pup)) => (
            (t_lo - plo).abs(),
            (t_up - pup).abs(),
            (cache.pressure(PotentialKind::Lower, t_lo) - pc.pressure(PotentialKind::Lower, t_lo))
                .abs()
                .max(
                    (cache.pressure(PotentialKind::Upper, t_up)
                        - pc.pressure(PotentialKind::Upper, t_up))
                    .abs(),
                ),
        ),
        None => (0.0, 0.0, 0.0),
    };
    Ok(DimensionBounds {
        t_lo,
        t_up,
        p_used: cache.p,
        pressure_residual_at_roots: pressure_residual,
        bisection_tolerance: tol,
        root_delta_lo,
        root_delta_up,
        converged: root_delta_lo < ROOT_CONVERGENCE_TOL && root_delta_up < ROOT_CONVERGENCE_TOL,
        regular,
    })
}

/// Sum of sampled cylinder diameters raised to the power t over all
/// admissible words of length p, accumulated in lexicographic order.
pub fn diameter_sum(system: &SemigroupSystem, t: f64, p: u32) -> Result<f64> {
    let estimates = symdyn::cylinder_diameters(system, p, 64)?;
    let mut acc = CompensatedSum::new();
    for est in &estimates {
        acc.add(est.sampled_diameter.powf(t));
    }
    Ok(acc.value())
}
