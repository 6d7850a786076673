//! Markov symbolic dynamics: transition matrix, admissible and periodic
//! words, the projection onto the limit set and cylinder diameter estimates.

use crate::error::{IfsError, Result};
use crate::maps::SemigroupSystem;
use num_complex::Complex64;
use rayon::prelude::*;

const FIXED_POINT_STEP_TOL: f64 = 1e-12;
const FIXED_POINT_RESIDUAL_TOL: f64 = 1e-11;
const FIXED_POINT_MAX_SWEEPS: usize = 20_000;

/// Slack constant folded into cylinder product bounds; stands in for the
/// uniform distortion constant of the regular systems exercised here.
const CYLINDER_SLACK: f64 = 2.0;

/// 0/1 transition matrix of a subshift of finite type.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    entries: Vec<Vec<u8>>,
}

impl TransitionMatrix {
    pub fn new(entries: Vec<Vec<u8>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|row| row.len() != n) {
            return Err(IfsError::Config("transition matrix must be square and nonempty".into()));
        }
        if entries.iter().any(|row| row.iter().all(|&e| e == 0)) {
            return Err(IfsError::Config("transition matrix has an all-zero row".into()));
        }
        if entries.iter().flatten().any(|&e| e > 1) {
            return Err(IfsError::Config("transition entries must be 0 or 1".into()));
        }
        Ok(Self { n, entries })
    }

    /// Full shift on n symbols.
    pub fn full(n: usize) -> Self {
        Self {
            n,
            entries: vec![vec![1; n]; n],
        }
    }

    pub fn symbol_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn allows(&self, from: usize, to: usize) -> bool {
        self.entries[from][to] == 1
    }

    /// A^p in saturating u128 arithmetic; saturation only matters for budget
    /// checks, where it already means "too many".
    fn power(&self, p: u32) -> Vec<Vec<u128>> {
        let id: Vec<Vec<u128>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| u128::from(i == j)).collect())
            .collect();
        let base: Vec<Vec<u128>> = self
            .entries
            .iter()
            .map(|row| row.iter().map(|&e| e as u128).collect())
            .collect();
        let mut acc = id;
        for _ in 0..p {
            acc = mat_mul(&acc, &base);
        }
        acc
    }

    /// Number of admissible words of length p (sum of the entries of A^(p-1)).
    pub fn count_admissible(&self, p: u32) -> u128 {
        if p == 0 {
            return 1;
        }
        self.power(p - 1).iter().flatten().copied().fold(0u128, u128::saturating_add)
    }

    /// Number of cyclically admissible words of length p (trace of A^p).
    pub fn count_periodic(&self, p: u32) -> u128 {
        let m = self.power(p);
        (0..self.n).map(|i| m[i][i]).fold(0u128, u128::saturating_add)
    }

    pub fn is_word_admissible(&self, word: &Word) -> bool {
        word.symbols
            .windows(2)
            .all(|pair| self.allows(pair[0] as usize, pair[1] as usize))
    }

    pub fn is_word_cyclic(&self, word: &Word) -> bool {
        if word.symbols.is_empty() {
            return false;
        }
        self.is_word_admissible(word)
            && self.allows(
                *word.symbols.last().unwrap() as usize,
                word.symbols[0] as usize,
            )
    }

    /// Leading eigenvalue by power iteration on A + I (the shift removes any
    /// periodicity of the spectrum); reducible matrices converge to the
    /// largest component eigenvalue because the start vector is positive.
    pub fn spectral_radius(&self) -> f64 {
        let n = self.n;
        let mut v = vec![1.0f64; n];
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let mut w = vec![0.0f64; n];
            for i in 0..n {
                let mut acc = v[i]; // the +I part
                for j in 0..n {
                    if self.entries[i][j] == 1 {
                        acc += v[j];
                    }
                }
                w[i] = acc;
            }
            let norm: f64 = w.iter().map(|x| x.abs()).sum();
            let next = norm / v.iter().map(|x| x.abs()).sum::<f64>();
            for x in &mut w {
                *x /= norm;
            }
            let done = (next - lambda).abs() <= 1e-13 * next.max(1.0);
            lambda = next;
            v = w;
            if done {
                break;
            }
        }
        lambda - 1.0
    }
}

fn mat_mul(a: &[Vec<u128>], b: &[Vec<u128>]) -> Vec<Vec<u128>> {
    let n = a.len();
    let mut out = vec![vec![0u128; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == 0 {
                continue;
            }
            for j in 0..n {
                out[i][j] = out[i][j].saturating_add(a[i][k].saturating_mul(b[k][j]));
            }
        }
    }
    out
}

/// A finite word over the symbol alphabet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    pub symbols: Vec<u8>,
}

impl Word {
    pub fn new(symbols: Vec<u8>) -> Self {
        Self { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn rotated_left(&self, by: usize) -> Word {
        let p = self.symbols.len();
        Word::new((0..p).map(|k| self.symbols[(k + by) % p]).collect())
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.symbols {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// A cyclically admissible word, one period of a periodic itinerary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicWord(Word);

impl PeriodicWord {
    pub fn new(word: Word, matrix: &TransitionMatrix) -> Result<Self> {
        if !matrix.is_word_cyclic(&word) {
            return Err(IfsError::Config(format!(
                "word {word} is not cyclically admissible"
            )));
        }
        Ok(Self(word))
    }

    pub fn word(&self) -> &Word {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn check_budget(count: u128, budget: u64) -> Result<()> {
    if count > budget as u128 {
        return Err(IfsError::BudgetExceeded {
            needed: count,
            budget,
        });
    }
    Ok(())
}

/// All admissible words of length p in lexicographic order.
pub fn admissible_words(matrix: &TransitionMatrix, p: u32, budget: u64) -> Result<Vec<Word>> {
    check_budget(matrix.count_admissible(p), budget)?;
    let mut out = Vec::new();
    let mut stack = vec![0u8; p as usize];
    enumerate(matrix, p as usize, 0, &mut stack, false, &mut out);
    Ok(out)
}

/// All cyclically admissible words of length p in lexicographic order
/// (fixed points of the p-th shift power).
pub fn periodic_words(matrix: &TransitionMatrix, p: u32, budget: u64) -> Result<Vec<PeriodicWord>> {
    check_budget(matrix.count_admissible(p), budget)?;
    let mut out = Vec::new();
    let mut stack = vec![0u8; p as usize];
    enumerate(matrix, p as usize, 0, &mut stack, true, &mut out);
    Ok(out
        .into_iter()
        .map(|w| PeriodicWord::new(w, matrix).expect("enumeration yields cyclic words"))
        .collect())
}

fn enumerate(
    matrix: &TransitionMatrix,
    p: usize,
    depth: usize,
    stack: &mut Vec<u8>,
    cyclic: bool,
    out: &mut Vec<Word>,
) {
    if depth == p {
        let word = Word::new(stack.clone());
        if !cyclic || matrix.is_word_cyclic(&word) {
            out.push(word);
        }
        return;
    }
    for s in 0..matrix.symbol_count() {
        if depth > 0 && !matrix.allows(stack[depth - 1] as usize, s) {
            continue;
        }
        stack[depth] = s as u8;
        enumerate(matrix, p, depth + 1, stack, cyclic, out);
    }
}

/// Leading eigenvalue of the transition matrix; cross-checks the pressure at
/// t = 0.
pub fn spectral_radius(matrix: &TransitionMatrix) -> f64 {
    matrix.spectral_radius()
}

/// Apply the branch composition g_{i_0} o ... o g_{i_{p-1}} to a point.
pub fn apply_word(system: &SemigroupSystem, word: &Word, z: Complex64) -> Result<Complex64> {
    let mut cur = z;
    for &s in word.symbols.iter().rev() {
        cur = system.family.inverse_branch(s as usize, cur)?;
    }
    Ok(cur)
}

/// Finite-depth projection of a word: the branch composition applied to a
/// base point. The distance to the true projection of any infinite extension
/// is at most l_max^|word| * diam(W).
pub fn project(system: &SemigroupSystem, word: &Word, base: Complex64) -> Result<Complex64> {
    if !system.region.contains(base, 1e-9) {
        return Err(IfsError::OutsideRegion { point: base });
    }
    apply_word(system, word, base)
}

/// Unique fixed point of the contraction g_w, located by iterating from the
/// region's seed point until the step drops below 1e-12. The residual
/// |g_w(z*) - z*| is re-checked at the limit.
pub fn periodic_point(system: &SemigroupSystem, word: &PeriodicWord) -> Result<Complex64> {
    let mut z = system.region.seed_point();
    let mut converged = false;
    for _ in 0..FIXED_POINT_MAX_SWEEPS {
        let next = apply_word(system, word.word(), z)?;
        let step = (next - z).norm();
        z = next;
        if step < FIXED_POINT_STEP_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(IfsError::NoConvergence {
            iterations: FIXED_POINT_MAX_SWEEPS,
        });
    }
    let residual = (apply_word(system, word.word(), z)? - z).norm();
    if residual > FIXED_POINT_RESIDUAL_TOL {
        return Err(IfsError::NoConvergence {
            iterations: FIXED_POINT_MAX_SWEEPS,
        });
    }
    Ok(z)
}

/// The periodic orbit of a word: points x_0, ..., x_{p-1} with
/// x_j = g_{i_j}(x_{j+1}) (indices mod p). Computed from the fixed point by
/// walking the cycle backwards through the contracting branches.
pub fn periodic_orbit(system: &SemigroupSystem, word: &PeriodicWord) -> Result<Vec<Complex64>> {
    let p = word.len();
    let x0 = periodic_point(system, word)?;
    let mut orbit = vec![x0; p];
    let symbols = &word.word().symbols;
    let mut cur = x0;
    for j in (1..p).rev() {
        cur = system.family.inverse_branch(symbols[j] as usize, cur)?;
        orbit[j] = cur;
    }
    Ok(orbit)
}

/// Sampled diameter of a cylinder set together with chain-rule product
/// bounds evaluated along the word's orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderEstimate {
    pub word: Word,
    pub sampled_diameter: f64,
    pub upper_product: f64,
    pub lower_product: f64,
}

/// Diameter of g_w(W) from sampled region boundary, plus the product bounds
/// prod l * diam(W) * C and prod s * inradius(W) / C. The l/s factors are
/// taken along the periodic orbit when the word closes up cyclically, and
/// along the projection chain from the seed point otherwise.
pub fn cylinder_diameter(
    system: &SemigroupSystem,
    word: &Word,
    boundary_samples: usize,
) -> Result<CylinderEstimate> {
    if boundary_samples < 64 {
        return Err(IfsError::Config(format!(
            "boundary_samples = {boundary_samples} below the minimum of 64"
        )));
    }
    let boundary = system.region.boundary_samples(boundary_samples);
    let images: Vec<Complex64> = boundary
        .iter()
        .map(|&w| apply_word(system, word, w))
        .collect::<Result<_>>()?;
    let mut diameter: f64 = 0.0;
    for (i, a) in images.iter().enumerate() {
        for b in &images[i + 1..] {
            diameter = diameter.max((a - b).norm());
        }
    }

    // chain evaluation points: the point each branch is applied to
    let p = word.len();
    let chain: Vec<Complex64> = if system.transition.is_word_cyclic(word) {
        let pw = PeriodicWord::new(word.clone(), &system.transition)?;
        let orbit = periodic_orbit(system, &pw)?;
        (0..p).map(|k| orbit[(k + 1) % p]).collect()
    } else {
        let mut pts = vec![system.region.seed_point(); p];
        let mut cur = system.region.seed_point();
        for k in (0..p).rev() {
            pts[k] = cur;
            cur = system.family.inverse_branch(word.symbols[k] as usize, cur)?;
        }
        pts
    };
    let mut upper = system.region.diameter() * CYLINDER_SLACK;
    let mut lower = system.region.inradius() / CYLINDER_SLACK;
    for (k, &at) in chain.iter().enumerate() {
        let sd = system
            .family
            .inverse_branch_derivative(word.symbols[k] as usize, at)?
            .singular_data()?;
        upper *= sd.l;
        lower *= sd.s;
    }
    Ok(CylinderEstimate {
        word: word.clone(),
        sampled_diameter: diameter,
        upper_product: upper,
        lower_product: lower,
    })
}

/// Sampled diameters for every admissible word of a given length, in
/// lexicographic order.
pub fn cylinder_diameters(
    system: &SemigroupSystem,
    p: u32,
    boundary_samples: usize,
) -> Result<Vec<CylinderEstimate>> {
    let words = admissible_words(&system.transition, p, system.word_budget)?;
    words
        .par_iter()
        .map(|w| cylinder_diameter(system, w, boundary_samples))
        .collect()
}
