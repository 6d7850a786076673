//! Small numeric utilities: compensated summation, log-sum-exp, a seeded
//! generator for reproducible trials and Wirtinger finite differences.

use num_complex::Complex64;

/// Neumaier-compensated accumulator. Addition order still matters for the
/// final bits, so callers feed terms in a fixed (lexicographic) order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// log(sum(exp(v))) with the max factored out and compensated accumulation.
/// Returns -inf on an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add((v - m).exp());
    }
    m + acc.value().ln()
}

/// SplitMix64. The recurrence is the standard one:
///   state += 0x9e3779b97f4a7c15
///   z = state; z ^= z >> 30; z *= 0xbf58476d1ce4e5b9;
///   z ^= z >> 27; z *= 0x94d049bb133111eb; z ^= z >> 31
/// Trial reports depend on it bit-for-bit, so it is spelled out here instead
/// of pulling in an RNG crate whose stream might change across versions.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform in 0..n. The modulo bias is below 2^-40 for the n used here.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// Central finite differences of a planar map in Wirtinger form:
/// d_z = (f_x - i f_y) / 2, d_zbar = (f_x + i f_y) / 2.
/// Used as an independent oracle for analytic derivatives.
pub fn wirtinger_finite_difference<F>(f: F, z: Complex64, h: f64) -> (Complex64, Complex64)
where
    F: Fn(Complex64) -> Complex64,
{
    let fx = (f(z + Complex64::new(h, 0.0)) - f(z - Complex64::new(h, 0.0))) / (2.0 * h);
    let fy = (f(z + Complex64::new(0.0, h)) - f(z - Complex64::new(0.0, h))) / (2.0 * h);
    let i = Complex64::new(0.0, 1.0);
    ((fx - i * fy) / 2.0, (fx + i * fy) / 2.0)
}

/// 17 significant digits in scientific notation, enough to round-trip any
/// f64; the fixed shape keeps emitted files byte-stable.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Argument normalized to [0, 2*pi).
#[inline]
pub fn arg_in_turn(z: Complex64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}
