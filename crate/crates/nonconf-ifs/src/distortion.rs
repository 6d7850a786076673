//! Theoretical distortion-constant ledger and the empirical verification of
//! ellipse containment and angle distortion on randomized word/point/radius
//! suites.

use crate::error::{IfsError, Result};
use crate::maps::{global_bounds, GlobalBounds, SemigroupSystem, WirtingerDerivative};
use crate::numeric::SplitMix64;
use crate::symdyn::Word;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;

/// Word-length cap for randomized trials; the constant table is computed up
/// to this index.
pub const DEFAULT_M_MAX: usize = 10;
const DELTA_FLOOR: f64 = 1e-6;
const MIN_BOUNDARY_SAMPLES: usize = 256;

/// The constant ledger: kappa_m = sum of l^((alpha-beta) i), the radius
/// delta(epsilon) found by halving search, Theta_epsilon <= 1 and the table
/// C_m = 1 + epsilon + delta^beta * kappa_m.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalConstants {
    pub epsilon: f64,
    pub delta: f64,
    pub l0: f64,
    pub beta: f64,
    pub kappa_inf: f64,
    pub theta: f64,
    pub c_inf: f64,
    /// C_0 ..= C_m_max; a word of length m is bounded by C_{m-1}.
    pub c_table: Vec<f64>,
}

impl TheoreticalConstants {
    /// Containment constant for a composition of `len` generators.
    pub fn c_for_word_len(&self, len: usize) -> f64 {
        if len == 0 {
            1.0
        } else {
            self.c_table[(len - 1).min(self.c_table.len() - 1)]
        }
    }
}

/// Geometric series sum_{i>=0} l^((alpha-beta) i); requires beta < alpha.
pub fn kappa_inf(l: f64, alpha: f64, beta: f64) -> f64 {
    1.0 / (1.0 - l.powf(alpha - beta))
}

fn kappa_m(l: f64, alpha: f64, beta: f64, m: usize) -> f64 {
    (0..=m).map(|i| l.powf((alpha - beta) * i as f64)).sum()
}

/// Builds the constant ledger for a regular system. Delta is the largest
/// value in a halving search from min(1, diam(W)) such that the sampled
/// Taylor remainders satisfy |R_i| <= (epsilon/2) inf||D(g_i)|| |w - z| and
/// Theta_epsilon <= 1; the C_m recursion C_{M-1} + B_M <= C_M is then
/// verified for every M <= m_max.
pub fn theoretical_constants(
    system: &SemigroupSystem,
    bounds: &GlobalBounds,
    epsilon: f64,
    m_max: usize,
) -> Result<TheoreticalConstants> {
    if !(epsilon > 0.0) {
        return Err(IfsError::Config(format!("epsilon = {epsilon} must be positive")));
    }
    let alpha = system.alpha;
    let beta = bounds.beta;
    if beta >= alpha {
        return Err(IfsError::BetaNotBelowAlpha { beta, alpha });
    }
    let l = bounds.l_max;
    let s = bounds.s_min;
    let l0 = system.holder_constant;
    let kap_inf = kappa_inf(l, alpha, beta);

    // per-branch infimum of the operator norm, for the remainder condition
    let grid = system.region.grid(24);
    let mut inf_norm = vec![f64::INFINITY; system.branch_count()];
    for branch in 0..system.branch_count() {
        for &z in &grid {
            let sd = system
                .family
                .inverse_branch_derivative(branch, z)?
                .singular_data()?;
            inf_norm[branch] = inf_norm[branch].min(sd.l);
        }
    }

    let theta_of = |delta: f64| (l0 / s) * (1.0 + epsilon + kap_inf).powf(1.0 + alpha) * delta.powf(alpha - beta);
    let remainder_ok = |delta: f64| -> Result<bool> {
        if l0 == 0.0 {
            return Ok(true);
        }
        let bases = system.region.grid(12);
        for branch in 0..system.branch_count() {
            let budget = epsilon / 2.0 * inf_norm[branch];
            for &z in &bases {
                let gz = system.family.inverse_branch(branch, z)?;
                let dz = system.family.inverse_branch_derivative(branch, z)?;
                for &radius in &[delta, delta / 2.0, delta / 4.0] {
                    for k in 0..8 {
                        let w = z + Complex64::from_polar(radius, TAU * k as f64 / 8.0);
                        if !system.region.contains(w, 0.0) {
                            continue;
                        }
                        let gw = system.family.inverse_branch_near(branch, w, gz)?;
                        let remainder = (gw - gz - dz.apply(w - z)).norm();
                        if remainder > budget * radius {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    };

    let mut delta = system.region.diameter().min(1.0);
    loop {
        if theta_of(delta) <= 1.0 && remainder_ok(delta)? {
            break;
        }
        delta /= 2.0;
        if delta < DELTA_FLOOR {
            return Err(IfsError::DeltaUnderflow { floor: DELTA_FLOOR });
        }
    }

    let c_table: Vec<f64> = (0..=m_max)
        .map(|m| 1.0 + epsilon + delta.powf(beta) * kappa_m(l, alpha, beta, m))
        .collect();
    let c_inf = 1.0 + epsilon + delta.powf(beta) * kap_inf;
    // the recursion that drives the induction; holds by construction once
    // theta <= 1, re-checked here against rounding
    for m in 1..=m_max {
        let b_m = (l0 / s) * c_table[m - 1].powf(1.0 + alpha)
            * delta.powf(alpha)
            * l.powf((alpha - beta) * m as f64);
        if c_table[m - 1] + b_m > c_table[m] + 1e-12 {
            return Err(IfsError::Config(format!(
                "constant recursion failed at m = {m}: {} + {b_m} > {}",
                c_table[m - 1],
                c_table[m]
            )));
        }
    }

    Ok(TheoreticalConstants {
        epsilon,
        delta,
        l0,
        beta,
        kappa_inf: kap_inf,
        theta: theta_of(delta),
        c_inf,
        c_table,
    })
}

/// One containment measurement: the preimage of the displaced image circle
/// under the linearization, as min/max radius ratios, plus the largest angle
/// between true displacements and their linearizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionTrial {
    pub word_len: usize,
    pub base: Complex64,
    pub radius: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub max_angle_dev: f64,
}

/// Composition value, chain-rule derivative and the intermediate images of
/// g_w at z. `anchors[m]` is the value after the last m branches; they seed
/// the smooth continuation of nearby boundary points.
fn word_chain(
    system: &SemigroupSystem,
    word: &Word,
    z: Complex64,
) -> Result<(Complex64, WirtingerDerivative, Vec<Complex64>)> {
    let mut value = z;
    let mut total = WirtingerDerivative::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    let mut anchors = Vec::with_capacity(word.len() + 1);
    anchors.push(z);
    for &sym in word.symbols.iter().rev() {
        let branch = sym as usize;
        let d = system.family.inverse_branch_derivative(branch, value)?;
        total = d.compose(&total);
        value = system.family.inverse_branch(branch, value)?;
        anchors.push(value);
    }
    Ok((value, total, anchors))
}

/// g_w continued smoothly along a center chain; the composition is smooth on
/// a small disk even when the disk straddles a sector cut.
fn word_eval_near(
    system: &SemigroupSystem,
    word: &Word,
    w: Complex64,
    anchors: &[Complex64],
) -> Result<Complex64> {
    let mut value = w;
    for (m, &sym) in word.symbols.iter().rev().enumerate() {
        value = system
            .family
            .inverse_branch_near(sym as usize, value, anchors[m + 1])?;
    }
    Ok(value)
}

/// Ratio and angle measurements for g_w on the sampled boundary of B(z, r).
pub fn empirical_distortion(
    system: &SemigroupSystem,
    word: &Word,
    z: Complex64,
    r: f64,
    samples: usize,
) -> Result<DistortionTrial> {
    if samples < MIN_BOUNDARY_SAMPLES {
        return Err(IfsError::Config(format!(
            "samples = {samples} below the minimum of {MIN_BOUNDARY_SAMPLES}"
        )));
    }
    if !system.transition.is_word_admissible(word) {
        return Err(IfsError::Config(format!("word {word} is not admissible")));
    }
    if system.region.boundary_distance(z) + 1e-12 < r {
        return Err(IfsError::OutsideRegion {
            point: z + Complex64::new(r, 0.0),
        });
    }
    let (y0, deriv, anchors) = word_chain(system, word, z)?;
    let inv = deriv.invert()?;
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max: f64 = 0.0;
    let mut max_angle: f64 = 0.0;
    for j in 0..samples {
        let v = Complex64::from_polar(r, TAU * j as f64 / samples as f64);
        let yj = word_eval_near(system, word, z + v, &anchors)?;
        let u = inv.apply(yj - y0);
        let ratio = u.norm() / r;
        ratio_min = ratio_min.min(ratio);
        ratio_max = ratio_max.max(ratio);
        let lin = deriv.apply(v);
        let angle = ((yj - y0) / lin).arg().abs();
        max_angle = max_angle.max(angle);
    }
    Ok(DistortionTrial {
        word_len: word.len(),
        base: z,
        radius: r,
        ratio_min,
        ratio_max,
        max_angle_dev: max_angle,
    })
}

/// A trial compared against its theoretical constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub trial: DistortionTrial,
    pub c_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct DistortionReport {
    pub constants: TheoreticalConstants,
    pub radius: f64,
    pub trials: Vec<TrialOutcome>,
    /// Largest of ratio_max and 1/ratio_min across trials.
    pub empirical_c: f64,
    pub pass: bool,
}

fn require_regular(system: &SemigroupSystem) -> Result<GlobalBounds> {
    let gb = global_bounds(system, 64)?;
    if !gb.regular {
        return Err(IfsError::NotRegular {
            detail: format!(
                "K_max = {} vs 1/l_max^alpha = {}",
                gb.k_max,
                1.0 / gb.l_max.powf(system.alpha)
            ),
        });
    }
    Ok(gb)
}

/// Deterministic trial inputs: a random admissible word of length 1..=m_max
/// and an interior base point at distance >= r from the region boundary.
fn draw_trial(
    system: &SemigroupSystem,
    rng: &mut SplitMix64,
    m_max: usize,
    r: f64,
) -> Result<(Word, Complex64)> {
    let n = system.branch_count();
    let len = 1 + rng.below(m_max as u64) as usize;
    let mut symbols = Vec::with_capacity(len);
    let mut prev = rng.below(n as u64) as usize;
    symbols.push(prev as u8);
    for _ in 1..len {
        let successors: Vec<usize> =
            (0..n).filter(|&j| system.transition.allows(prev, j)).collect();
        let next = successors[rng.below(successors.len() as u64) as usize];
        symbols.push(next as u8);
        prev = next;
    }
    let bb = system.region.bounding_box();
    for _ in 0..100_000 {
        let z = Complex64::new(rng.uniform(bb.x0, bb.x1), rng.uniform(bb.y0, bb.y1));
        if system.region.boundary_distance(z) >= r {
            return Ok((Word::new(symbols), z));
        }
    }
    Err(IfsError::Config(
        "could not sample an interior point; radius too large for the region".into(),
    ))
}

/// Randomized containment suite at r = delta(epsilon): every trial must land
/// inside [1/C_m, C_m] for its word length. Failures are recorded, not
/// raised. Deterministic for a given seed.
pub fn verify_containment(
    system: &SemigroupSystem,
    trials: usize,
    seed: u64,
    epsilon: f64,
) -> Result<DistortionReport> {
    let gb = require_regular(system)?;
    let constants = theoretical_constants(system, &gb, epsilon, DEFAULT_M_MAX)?;
    let radius = constants.delta.min(0.45 * system.region.inradius());

    let mut master = SplitMix64::new(seed);
    let inputs: Vec<(Word, Complex64)> = (0..trials)
        .map(|_| draw_trial(system, &mut master, DEFAULT_M_MAX, radius))
        .collect::<Result<_>>()?;

    let outcomes: Vec<TrialOutcome> = inputs
        .par_iter()
        .map(|(word, z)| -> Result<TrialOutcome> {
            let trial = empirical_distortion(system, word, *z, radius, MIN_BOUNDARY_SAMPLES)?;
            let c = constants.c_for_word_len(word.len());
            let pass = trial.ratio_min >= 1.0 / c && trial.ratio_max <= c;
            Ok(TrialOutcome { trial, c_bound: c, pass })
        })
        .collect::<Result<_>>()?;

    let empirical_c = outcomes
        .iter()
        .map(|o| o.trial.ratio_max.max(1.0 / o.trial.ratio_min))
        .fold(1.0, f64::max);
    let pass = outcomes.iter().all(|o| o.pass);
    Ok(DistortionReport {
        constants,
        radius,
        trials: outcomes,
        empirical_c,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleBucket {
    pub radius: f64,
    pub max_angle_dev: f64,
}

#[derive(Debug, Clone)]
pub struct AngleReport {
    pub buckets: Vec<AngleBucket>,
    /// Deviations never grow as the radius halves.
    pub monotone: bool,
    /// Last-bucket deviation over first-bucket deviation.
    pub shrink_ratio: f64,
}

/// Replays the same trial words and base points across halving radius
/// buckets and aggregates the worst angle deviation per bucket.
pub fn angle_report(
    system: &SemigroupSystem,
    trials: usize,
    seed: u64,
    epsilon: f64,
) -> Result<AngleReport> {
    let gb = require_regular(system)?;
    let constants = theoretical_constants(system, &gb, epsilon, DEFAULT_M_MAX)?;
    let r_base = constants.delta.min(0.45 * system.region.inradius());

    let mut master = SplitMix64::new(seed);
    let inputs: Vec<(Word, Complex64)> = (0..trials)
        .map(|_| draw_trial(system, &mut master, DEFAULT_M_MAX, r_base))
        .collect::<Result<_>>()?;

    let mut buckets = Vec::new();
    for k in 0..4 {
        let r = r_base / 2f64.powi(k);
        let worst = inputs
            .par_iter()
            .map(|(word, z)| {
                empirical_distortion(system, word, *z, r, MIN_BOUNDARY_SAMPLES)
                    .map(|t| t.max_angle_dev)
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        buckets.push(AngleBucket {
            radius: r,
            max_angle_dev: worst,
        });
    }
    let monotone = buckets.windows(2).all(|w| w[1].max_angle_dev <= w[0].max_angle_dev + 1e-15);
    let shrink_ratio = if buckets[0].max_angle_dev > 0.0 {
        buckets.last().unwrap().max_angle_dev / buckets[0].max_angle_dev
    } else {
        0.0
    };
    Ok(AngleReport {
        buckets,
        monotone,
        shrink_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::builtin;
    use crate::maps::SafetyFactors;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kappa_formula() {
        assert!((kappa_inf(0.5, 1.0, 0.5) - 3.414213562373095).abs() < 1e-12);
        assert!((kappa_m(0.5, 1.0, 0.0, 1) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn affine_constants_have_zero_remainder() {
        let sys = builtin::cantor_third();
        let gb = crate::maps::global_bounds_with(&sys, 16, SafetyFactors::none()).unwrap();
        let tc = theoretical_constants(&sys, &gb, 0.5, 10).unwrap();
        assert_eq!(tc.l0, 0.0);
        assert_eq!(tc.theta, 0.0);
        // remainder never binds, so delta is the capped region reach
        assert!((tc.delta - sys.region.diameter().min(1.0)).abs() < 1e-15);
        for m in 1..tc.c_table.len() {
            assert!(tc.c_table[m] >= tc.c_table[m - 1]);
            assert!(tc.c_table[m] <= tc.c_inf + 1e-12);
        }
    }

    #[test]
    fn beta_above_alpha_rejected() {
        let sys = {
            let mut s = builtin::anisotropic_half_third();
            s.alpha = 0.2; // beta of the anisotropic family is about 0.585
            s
        };
        let gb = global_bounds(&sys, 32).unwrap();
        assert!(matches!(
            theoretical_constants(&sys, &gb, 0.5, 5),
            Err(IfsError::BetaNotBelowAlpha { .. })
        ));
    }

    #[test]
    fn quad_constants_shrink_with_epsilon() {
        let sys = builtin::quad_conjugate(c64(0.1, 0.0), c64(0.1, 0.0)).unwrap();
        let gb = global_bounds(&sys, 64).unwrap();
        let mut previous_delta = f64::INFINITY;
        let mut previous_c = f64::INFINITY;
        for eps in [0.5, 0.25, 0.125] {
            let tc = theoretical_constants(&sys, &gb, eps, 10).unwrap();
            assert!(tc.theta <= 1.0);
            assert!(tc.delta <= previous_delta);
            assert!(tc.c_inf <= previous_c);
            previous_delta = tc.delta;
            previous_c = tc.c_inf;
        }
    }

    #[test]
    fn affine_trials_are_exact() {
        let sys = builtin::anisotropic_half_third();
        let w = Word::new(vec![0, 1, 0]);
        let z = c64(0.5, 0.5);
        let t = empirical_distortion(&sys, &w, z, 0.2, 256).unwrap();
        assert!((t.ratio_min - 1.0).abs() < 1e-12);
        assert!((t.ratio_max - 1.0).abs() < 1e-12);
        assert!(t.max_angle_dev < 1e-12);
    }

    #[test]
    fn identity_word_is_the_base_case() {
        let sys = builtin::cantor_third();
        let t = empirical_distortion(&sys, &Word::new(vec![]), c64(0.5, 0.0), 0.1, 256).unwrap();
        assert!((t.ratio_min - 1.0).abs() < 1e-14);
        assert!((t.ratio_max - 1.0).abs() < 1e-14);
        assert!(t.max_angle_dev < 1e-14);
    }

    #[test]
    fn circle_trial_second_order_bound() {
        let sys = builtin::quad_conjugate(c64(0.0, 0.0), c64(0.0, 0.0)).unwrap();
        let t = empirical_distortion(&sys, &Word::new(vec![0]), c64(1.0, 0.0), 1e-3, 256).unwrap();
        assert!(t.ratio_min >= 1.0 - 5e-3 && t.ratio_min <= 1.0);
        assert!(t.ratio_max <= 1.0 + 5e-3 && t.ratio_max >= 1.0);
    }

    #[test]
    fn ratio_excess_halves_with_radius() {
        let sys = builtin::quad_conjugate(c64(0.0, 0.0), c64(0.0, 0.0)).unwrap();
        let w = Word::new(vec![0, 1]);
        let z = c64(1.0, 0.0);
        let big = empirical_distortion(&sys, &w, z, 2e-2, 256).unwrap();
        let small = empirical_distortion(&sys, &w, z, 1e-2, 256).unwrap();
        assert!(small.ratio_max - 1.0 <= 0.6 * (big.ratio_max - 1.0));
    }

    #[test]
    fn containment_passes_on_builtin_regular_systems() {
        for sys in [
            builtin::cantor_third(),
            builtin::anisotropic_half_third(),
            builtin::quad_conjugate(c64(0.1, 0.0), c64(0.1, 0.0)).unwrap(),
            builtin::power_modulus(2, 2.2, c64(0.1, 0.0)).unwrap(),
        ] {
            let report = verify_containment(&sys, 25, 7, 0.5).unwrap();
            assert!(report.pass, "trials failed: {:?}", report
                .trials
                .iter()
                .find(|o| !o.pass));
            assert_eq!(report.trials.len(), 25);
            for o in &report.trials {
                // the linearization is exact at the center, so the unit
                // ratio is sandwiched (up to cancellation noise)
                assert!(o.trial.ratio_min <= 1.0 + 1e-9);
                assert!(o.trial.ratio_max >= 1.0 - 1e-9);
                assert!(o.trial.ratio_max / o.trial.ratio_min >= 1.0);
            }
        }
    }

    #[test]
    fn containment_rejects_non_regular_systems() {
        let mut sys = builtin::anisotropic_half_third();
        sys.alpha = 0.2; // 1/l^alpha = 2^0.2 < K = 1.5
        assert!(verify_containment(&sys, 5, 1, 0.5).is_err());
    }

    #[test]
    fn trials_are_deterministic() {
        let sys = builtin::quad_conjugate(c64(0.1, 0.0), c64(0.1, 0.0)).unwrap();
        let a = verify_containment(&sys, 10, 42, 0.5).unwrap();
        let b = verify_containment(&sys, 10, 42, 0.5).unwrap();
        for (x, y) in a.trials.iter().zip(&b.trials) {
            assert_eq!(x.trial.ratio_min, y.trial.ratio_min);
            assert_eq!(x.trial.ratio_max, y.trial.ratio_max);
        }
        let c = verify_containment(&sys, 10, 43, 0.5).unwrap();
        assert!(a
            .trials
            .iter()
            .zip(&c.trials)
            .any(|(x, y)| x.trial.base != y.trial.base));
    }

    #[test]
    fn distortion_is_submultiplicative() {
        let sys = builtin::quad_conjugate(c64(0.1, 0.0), c64(0.1, 0.0)).unwrap();
        let u = Word::new(vec![0, 1]);
        let v = Word::new(vec![1, 0, 0]);
        let uv = Word::new(vec![0, 1, 1, 0, 0]);
        let z = c64(1.0, 0.2);
        let r = 1e-3;
        let c_emp = |t: &DistortionTrial| t.ratio_max.max(1.0 / t.ratio_min);
        // matched base points: u acts on the image of z under g_v
        let gv_z = crate::symdyn::apply_word(&sys, &v, z).unwrap();
        let t_uv = empirical_distortion(&sys, &uv, z, r, 256).unwrap();
        let t_v = empirical_distortion(&sys, &v, z, r, 256).unwrap();
        let t_u = empirical_distortion(&sys, &u, gv_z, r, 256).unwrap();
        assert!(c_emp(&t_uv) <= c_emp(&t_u) * c_emp(&t_v) * (1.0 + 1e-9));
    }

    #[test]
    fn angle_deviation_shrinks_linearly() {
        let sys = builtin::quad_conjugate(c64(0.0, 0.0), c64(0.0, 0.0)).unwrap();
        let report = angle_report(&sys, 20, 11, 0.5).unwrap();
        assert!(report.monotone);
        assert!(report.shrink_ratio <= 0.25 + 1e-9);
        assert!(report.buckets[0].max_angle_dev > 0.0);
    }

    #[test]
    fn affine_angles_vanish() {
        // zero up to cancellation noise on the contracted differences
        let report = angle_report(&builtin::cantor_third(), 10, 3, 0.5).unwrap();
        for b in &report.buckets {
            assert!(b.max_angle_dev < 1e-9);
        }
    }
}
