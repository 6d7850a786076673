use crate::error::{IfsError, Result};
use crate::maps::{GeneratorFamily, Region};
use crate::symdyn::TransitionMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

pub const DEFAULT_WORD_BUDGET: u64 = 1 << 24;
pub const DEFAULT_P_SCHEDULE: [u32; 4] = [6, 8, 10, 12];
const REGION_TOL: f64 = 1e-9;

/// Multiplicative safety applied to grid suprema/infima; grid sampling only
/// sees finitely many points, the factors absorb the gap to the true
/// extremes of the Lipschitz derivative fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyFactors {
    pub inflate: f64,
    pub deflate: f64,
}

impl Default for SafetyFactors {
    fn default() -> Self {
        Self {
            inflate: 1.01,
            deflate: 0.99,
        }
    }
}

impl SafetyFactors {
    pub fn none() -> Self {
        Self {
            inflate: 1.0,
            deflate: 1.0,
        }
    }
}

/// Construction inputs for a semigroup system.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub family: GeneratorFamily,
    pub region: Region,
    /// Hölder exponent of the generators; 1 for the built-in smooth families.
    pub alpha: f64,
    /// Markov transition matrix; full shift when absent.
    pub transition: Option<TransitionMatrix>,
    /// Override for the Hölder remainder constant; estimated when absent.
    pub holder_constant: Option<f64>,
    pub word_budget: u64,
    pub p_schedule: Vec<u32>,
}

impl SystemSpec {
    pub fn new(family: GeneratorFamily, region: Region) -> Self {
        Self {
            family,
            region,
            alpha: 1.0,
            transition: None,
            holder_constant: None,
            word_budget: DEFAULT_WORD_BUDGET,
            p_schedule: DEFAULT_P_SCHEDULE.to_vec(),
        }
    }
}

/// A validated contracting semigroup: generator family, invariant working
/// region, smoothness data and Markov structure. Immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct SemigroupSystem {
    pub family: GeneratorFamily,
    pub region: Region,
    pub alpha: f64,
    pub transition: TransitionMatrix,
    pub holder_constant: f64,
    pub word_budget: u64,
    pub p_schedule: Vec<u32>,
}

impl SemigroupSystem {
    pub fn branch_count(&self) -> usize {
        self.family.branch_count()
    }

    /// Inverse branch evaluation restricted to the closed working region.
    pub fn inverse_branch_eval(&self, branch: usize, w: Complex64) -> Result<Complex64> {
        if !self.region.contains(w, REGION_TOL) {
            return Err(IfsError::OutsideRegion { point: w });
        }
        self.family.inverse_branch(branch, w)
    }

    /// Derivative of the inverse branch at w, with the same region check.
    pub fn inverse_branch_derivative(
        &self,
        branch: usize,
        w: Complex64,
    ) -> Result<crate::maps::WirtingerDerivative> {
        if !self.region.contains(w, REGION_TOL) {
            return Err(IfsError::OutsideRegion { point: w });
        }
        self.family.inverse_branch_derivative(branch, w)
    }
}

/// Sampled global bounds over the region and the regularity verdict
/// K_max < 1 / l_max^alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalBounds {
    pub l_max: f64,
    pub s_min: f64,
    pub k_max: f64,
    /// Smallest exponent with K_i(z) <= (1/l_i(z))^beta on the samples;
    /// zero for conformal families.
    pub beta: f64,
    pub regular: bool,
    /// 1/l_max^alpha - K_max; positive exactly when regular.
    pub margin: f64,
    pub sample_density: u32,
}

/// Validates the family/region pair and assembles the immutable system.
/// Checks performed on sampled boundary and a coarse interior grid: branch
/// images stay inside the region, every branch is contracting, and affine
/// branch images are pairwise disjoint (sector families are disjoint by the
/// branch-labelling convention).
pub fn build_system(spec: SystemSpec) -> Result<SemigroupSystem> {
    let SystemSpec {
        family,
        region,
        alpha,
        transition,
        holder_constant,
        word_budget,
        p_schedule,
    } = spec;

    region.validate()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(IfsError::Config(format!("alpha = {alpha} outside (0, 1]")));
    }
    if p_schedule.is_empty() || p_schedule.iter().any(|&p| p == 0) {
        return Err(IfsError::Config("p_schedule must be nonempty and positive".into()));
    }

    let n = family.branch_count();
    if n == 0 {
        return Err(IfsError::Config("family has no branches".into()));
    }
    match &family {
        GeneratorFamily::QuadConjugate { b, .. } => {
            if let Region::Annulus { r_min, .. } = &region {
                if b.norm() >= 2.0 * r_min {
                    return Err(IfsError::Config(format!(
                        "|b| = {} must stay below 2 r_min = {}",
                        b.norm(),
                        2.0 * r_min
                    )));
                }
            }
            if region.contains_origin() {
                return Err(IfsError::Config(
                    "quad-conjugate region must exclude the origin".into(),
                ));
            }
        }
        GeneratorFamily::PowerModulus { n, gamma, .. } => {
            if *gamma <= 0.0 {
                return Err(IfsError::Config(format!("gamma = {gamma} must be positive")));
            }
            if *n < 2 {
                return Err(IfsError::Config("power-modulus needs n >= 2".into()));
            }
            if region.contains_origin() {
                return Err(IfsError::Config(
                    "power-modulus region must exclude the origin".into(),
                ));
            }
        }
        GeneratorFamily::Affine(branches) => {
            for (i, br) in branches.iter().enumerate() {
                let sd = br.derivative().singular_data()?;
                if sd.l >= 1.0 {
                    return Err(IfsError::NotContracting {
                        branch: i,
                        point: region.seed_point(),
                        l: sd.l,
                    });
                }
            }
        }
    }

    let transition = match transition {
        Some(t) => {
            if t.symbol_count() != n {
                return Err(IfsError::Config(format!(
                    "transition matrix is {}x{} but the family has {n} branches",
                    t.symbol_count(),
                    t.symbol_count()
                )));
            }
            t
        }
        None => TransitionMatrix::full(n),
    };

    // invariance + contraction on boundary and a coarse interior grid
    let mut samples = region.boundary_samples(256);
    samples.extend(region.grid(24));
    for branch in 0..n {
        for &w in &samples {
            let image = family.inverse_branch(branch, w)?;
            if !region.contains(image, REGION_TOL) {
                return Err(IfsError::RegionNotInvariant { branch, point: w, image });
            }
            let sd = family.inverse_branch_derivative(branch, w)?.singular_data()?;
            if sd.l >= 1.0 {
                return Err(IfsError::NotContracting { branch, point: w, l: sd.l });
            }
        }
    }

    // affine branch images must be pairwise separated
    if let GeneratorFamily::Affine(_) = &family {
        let images: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                samples
                    .iter()
                    .map(|&w| family.inverse_branch(i, w).unwrap())
                    .collect()
            })
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                let mut min_dist = f64::INFINITY;
                for a in &images[i] {
                    for b in &images[j] {
                        min_dist = min_dist.min((a - b).norm());
                    }
                }
                if min_dist < REGION_TOL {
                    return Err(IfsError::BranchOverlap { first: i, second: j });
                }
            }
        }
    }

    let mut system = SemigroupSystem {
        family,
        region,
        alpha,
        transition,
        holder_constant: 0.0,
        word_budget,
        p_schedule,
    };
    system.holder_constant = match holder_constant {
        Some(l0) => l0,
        None => estimate_holder_constant(&system),
    };
    Ok(system)
}

/// Hölder constant of the Taylor remainder of the generators, estimated as
/// twice the largest sampled |R(w, z)| / |w - z|^(1+alpha) over separations
/// in [1e-4, 1e-1]. Affine generators have zero remainder exactly.
fn estimate_holder_constant(system: &SemigroupSystem) -> f64 {
    if matches!(system.family, GeneratorFamily::Affine(_)) {
        return 0.0;
    }
    let bases = system.region.grid(12);
    let mags = [1e-4, 1e-3, 1e-2, 1e-1];
    let dirs = 8;
    let mut worst: f64 = 0.0;
    for branch in 0..system.branch_count() {
        for &z in &bases {
            let (gz, dz) = match (
                system.family.inverse_branch(branch, z),
                system.family.inverse_branch_derivative(branch, z),
            ) {
                (Ok(g), Ok(d)) => (g, d),
                _ => continue,
            };
            for &m in &mags {
                for k in 0..dirs {
                    let th = std::f64::consts::TAU * k as f64 / dirs as f64;
                    let w = z + Complex64::from_polar(m, th);
                    if !system.region.contains(w, 0.0) {
                        continue;
                    }
                    // continue the branch from g(z) so cut-straddling pairs
                    // measure the smooth local map, not the sector jump
                    let Ok(gw) = system.family.inverse_branch_near(branch, w, gz) else {
                        continue;
                    };
                    let remainder = (gw - gz - dz.apply(w - z)).norm();
                    worst = worst.max(remainder / m.powf(1.0 + system.alpha));
                }
            }
        }
    }
    2.0 * worst
}

/// Global bounds with the default safety factors.
pub fn global_bounds(system: &SemigroupSystem, sample_density: u32) -> Result<GlobalBounds> {
    global_bounds_with(system, sample_density, SafetyFactors::default())
}

/// Extremes of the singular data over a deterministic grid, inflated or
/// deflated by the safety factors, plus the exponent
/// beta = sup log K_i(z) / log(1/l_i(z)) and the regularity verdict.
pub fn global_bounds_with(
    system: &SemigroupSystem,
    sample_density: u32,
    safety: SafetyFactors,
) -> Result<GlobalBounds> {
    if sample_density < 16 {
        return Err(IfsError::Config(format!(
            "sample_density = {sample_density} below the minimum of 16"
        )));
    }
    let mut pts = system.region.grid(sample_density);
    pts.extend(system.region.boundary_samples(4 * sample_density as usize));
    let conformal = system.family.is_conformal();

    let per_point = |w: &Complex64| -> Result<(f64, f64, f64, f64)> {
        let mut l_max: f64 = 0.0;
        let mut s_min = f64::INFINITY;
        let mut k_max: f64 = 1.0;
        let mut beta: f64 = 0.0;
        for branch in 0..system.branch_count() {
            let sd = system
                .family
                .inverse_branch_derivative(branch, *w)?
                .singular_data()?;
            if sd.l >= 1.0 {
                return Err(IfsError::NotContracting {
                    branch,
                    point: *w,
                    l: sd.l,
                });
            }
            l_max = l_max.max(sd.l);
            s_min = s_min.min(sd.s);
            k_max = k_max.max(sd.k);
            if sd.k > 1.0 {
                beta = beta.max(sd.k.ln() / (1.0 / sd.l).ln());
            }
        }
        Ok((l_max, s_min, k_max, beta))
    };

    let folded = pts
        .par_iter()
        .map(per_point)
        .try_reduce(
            || (0.0, f64::INFINITY, 1.0, 0.0),
            |a, b| Ok((a.0.max(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3))),
        )?;
    let (raw_l, raw_s, raw_k, beta) = folded;

    let l_max = raw_l * safety.inflate;
    let s_min = raw_s * safety.deflate;
    // conformal families have dilatation exactly 1; no inflation there
    let (k_max, beta) = if conformal { (1.0, 0.0) } else { (raw_k * safety.inflate, beta) };
    let margin = 1.0 / l_max.powf(system.alpha) - k_max;
    Ok(GlobalBounds {
        l_max,
        s_min,
        k_max,
        beta,
        regular: margin > 0.0,
        margin,
        sample_density,
    })
}

/// Built-in example systems used by tests and as config templates.
pub mod builtin {
    use super::*;
    use crate::maps::{AffineBranch, Rect};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Two similarity maps of ratio 1/3 on [0, 1]; the middle-thirds Cantor
    /// set as a planar IFS.
    pub fn cantor_third() -> SemigroupSystem {
        let family = GeneratorFamily::Affine(vec![
            AffineBranch { a: c(1.0 / 3.0, 0.0), b: c(0.0, 0.0), t: c(0.0, 0.0) },
            AffineBranch { a: c(1.0 / 3.0, 0.0), b: c(0.0, 0.0), t: c(2.0 / 3.0, 0.0) },
        ]);
        let region = Region::Rects(vec![Rect::new(0.0, 1.0, -0.5, 0.5)]);
        build_system(SystemSpec::new(family, region)).expect("builtin cantor system")
    }

    /// Two anisotropic affine maps contracting by 1/2 horizontally and 1/3
    /// vertically, with disjoint images in the unit square.
    pub fn anisotropic_half_third() -> SemigroupSystem {
        let d = AffineBranch {
            a: c(5.0 / 12.0, 0.0),
            b: c(1.0 / 12.0, 0.0),
            t: c(0.0, 0.0),
        };
        let family = GeneratorFamily::Affine(vec![
            d,
            AffineBranch { t: c(0.5, 2.0 / 3.0), ..d },
        ]);
        let region = Region::Rects(vec![Rect::new(0.0, 1.0, 0.0, 1.0)]);
        build_system(SystemSpec::new(family, region)).expect("builtin anisotropic system")
    }

    /// Golden-mean subshift realized by two conformal similarities of ratio
    /// 1/2 (one rotated to keep the images disjoint).
    pub fn golden_mean_half() -> SemigroupSystem {
        let family = GeneratorFamily::Affine(vec![
            AffineBranch { a: c(0.5, 0.0), b: c(0.0, 0.0), t: c(0.0, 0.0) },
            AffineBranch { a: c(0.0, 0.5), b: c(0.0, 0.0), t: c(0.85, 0.05) },
        ]);
        let region = Region::Rects(vec![Rect::new(0.0, 1.0, 0.0, 0.6)]);
        let transition = TransitionMatrix::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let mut spec = SystemSpec::new(family, region);
        spec.transition = Some(transition);
        build_system(spec).expect("builtin golden-mean system")
    }

    /// Inverse branches of f(z) = z^2 + b conj(z) + c on the default annulus.
    pub fn quad_conjugate(b: Complex64, c: Complex64) -> Result<SemigroupSystem> {
        let family = GeneratorFamily::QuadConjugate { b, c };
        build_system(SystemSpec::new(family, Region::default_annulus()))
    }

    /// Inverse branches of f(z) = z^n |z|^(gamma-n) + c on the default annulus.
    pub fn power_modulus(n: u32, gamma: f64, c: Complex64) -> Result<SemigroupSystem> {
        let family = GeneratorFamily::PowerModulus { n, gamma, c };
        build_system(SystemSpec::new(family, Region::default_annulus()))
    }
}
