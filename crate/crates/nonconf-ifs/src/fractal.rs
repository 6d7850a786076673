//! Limit-set and Julia-set point clouds, a box-counting dimension oracle and
//! raster/CSV emission.

use crate::error::{IfsError, Result};
use crate::maps::{GeneratorFamily, Rect, SemigroupSystem};
use crate::symdyn::admissible_words;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashSet;
use std::f64::consts::TAU;
use std::io::Write;

/// Default number of circle seeds for preimage clouds; reduced to fit the
/// point budget before the depth is touched.
const DEFAULT_CIRCLE_SEEDS: u64 = 256;
pub const DEFAULT_CLOUD_BUDGET: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    CylinderCenters { depth: u32 },
    CirclePreimages { radius: f64, depth: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Complex64>,
    pub provenance: Provenance,
}

/// One point per admissible word of the given depth, the word composition
/// applied to the region seed point. Hausdorff distance to the limit set is
/// at most l_max^depth * diam(W).
pub fn limit_set_cloud(system: &SemigroupSystem, depth: u32) -> Result<PointCloud> {
    let words = admissible_words(&system.transition, depth, system.word_budget)?;
    let base = system.region.seed_point();
    let points: Vec<Complex64> = words
        .par_iter()
        .map(|w| crate::symdyn::apply_word(system, w, base))
        .collect::<Result<_>>()?;
    Ok(PointCloud {
        points,
        provenance: Provenance::CylinderCenters { depth },
    })
}

/// Preimages of M equispaced points on the circle |z| = radius under all
/// inverse-branch compositions of the given depth. Points at the final depth
/// only; the output order is (seed, word) lexicographic.
pub fn julia_preimage_cloud(
    family: &GeneratorFamily,
    radius: f64,
    depth: u32,
    budget: u64,
) -> Result<PointCloud> {
    if depth == 0 {
        return Err(IfsError::Config("preimage depth must be at least 1".into()));
    }
    let n = family.branch_count() as u128;
    let leaves = n
        .checked_pow(depth)
        .unwrap_or(u128::MAX);
    if leaves > budget as u128 {
        return Err(IfsError::BudgetExceeded {
            needed: leaves,
            budget,
        });
    }
    let seeds = DEFAULT_CIRCLE_SEEDS.min((budget as u128 / leaves) as u64).max(1);

    let mut level: Vec<Complex64> = (0..seeds)
        .map(|j| Complex64::from_polar(radius, TAU * j as f64 / seeds as f64))
        .collect();
    for _ in 0..depth {
        let mut next = Vec::with_capacity(level.len() * n as usize);
        for branch in 0..family.branch_count() {
            let mut part: Vec<Complex64> = level
                .par_iter()
                .map(|&w| family.inverse_branch(branch, w))
                .collect::<Result<_>>()?;
            next.append(&mut part);
        }
        level = next;
    }
    Ok(PointCloud {
        points: level,
        provenance: Provenance::CirclePreimages { radius, depth },
    })
}

/// Box-count regression report: occupied boxes per dyadic scale and the
/// fitted slope of log N against log(1/eps).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCountReport {
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    pub slope: f64,
    pub r2: f64,
    /// Scale indices actually used by the fit after exclusions.
    pub k_range: (u32, u32),
}

/// Least-squares slope of log N(eps) over dyadic scales eps_k = extent/2^k,
/// the grid anchored at the cloud bounding box. The two coarsest scales and
/// any saturated finest scales (count growth below 1.2 per halving) are
/// excluded from the fit.
pub fn box_dimension(cloud: &PointCloud, k_min: u32, k_max: u32) -> Result<BoxCountReport> {
    if cloud.points.len() < 1000 {
        return Err(IfsError::DegenerateFit {
            reason: format!("{} points, need at least 1000", cloud.points.len()),
        });
    }
    if k_min >= k_max {
        return Err(IfsError::DegenerateFit {
            reason: format!("empty scale range {k_min}..{k_max}"),
        });
    }
    let xs: Vec<f64> = cloud.points.iter().map(|p| p.re).collect();
    let ys: Vec<f64> = cloud.points.iter().map(|p| p.im).collect();
    let x0 = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let y0 = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let extent = (xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x0)
        .max(ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y0);
    if extent <= 0.0 {
        return Err(IfsError::DegenerateFit {
            reason: "cloud has zero extent".into(),
        });
    }

    let ks: Vec<u32> = (k_min..=k_max).collect();
    let counts: Vec<u64> = ks
        .par_iter()
        .map(|&k| {
            let eps = extent / 2f64.powi(k as i32);
            let mut boxes: HashSet<(i64, i64)> = HashSet::new();
            for p in &cloud.points {
                let ix = ((p.re - x0) / eps).floor() as i64;
                let iy = ((p.im - y0) / eps).floor() as i64;
                boxes.insert((ix, iy));
            }
            boxes.len() as u64
        })
        .collect();
    let scales: Vec<f64> = ks.iter().map(|&k| extent / 2f64.powi(k as i32)).collect();

    // exclusions: two coarsest, then saturated tail
    let mut lo = 2usize.min(ks.len());
    let mut hi = ks.len();
    while hi - lo > 3 && (counts[hi - 1] as f64) < 1.2 * counts[hi - 2] as f64 {
        hi -= 1;
    }
    if hi - lo < 3 {
        // fall back to the full range before declaring failure
        lo = 0;
        hi = ks.len();
        if hi < 3 {
            return Err(IfsError::DegenerateFit {
                reason: "fewer than 3 usable scales".into(),
            });
        }
    }

    let lx: Vec<f64> = ks[lo..hi].iter().map(|&k| k as f64 * 2f64.ln()).collect();
    let ly: Vec<f64> = counts[lo..hi].iter().map(|&n| (n as f64).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - (my + slope * (x - mx))).powi(2))
        .sum();
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(BoxCountReport {
        scales,
        counts,
        slope,
        r2,
        k_range: (ks[lo], ks[hi - 1]),
    })
}

/// Binary hit raster: 255 where at least one point lands, 0 elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub bounds: Rect,
    pub pixels: Vec<u8>,
}

impl RasterImage {
    #[inline]
    fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn white_pixel_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    /// Binary PGM (P5, maxval 255).
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.pixels)
    }

    /// Connected components of the white set.
    pub fn white_components(&self, eight_connected: bool) -> usize {
        self.count_components(|p| p != 0, eight_connected)
    }

    /// Number of black regions not reachable from the image border by
    /// 4-connected flood fill; for a cloud tracing a single closed curve
    /// this is exactly 1.
    pub fn hole_count(&self) -> usize {
        let mut seen = vec![false; self.pixels.len()];
        // flood the outside from all border pixels
        let mut stack = Vec::new();
        for x in 0..self.width {
            for y in [0, self.height - 1] {
                let i = self.idx(x, y);
                if self.pixels[i] == 0 && !seen[i] {
                    seen[i] = true;
                    stack.push((x, y));
                }
            }
        }
        for y in 0..self.height {
            for x in [0, self.width - 1] {
                let i = self.idx(x, y);
                if self.pixels[i] == 0 && !seen[i] {
                    seen[i] = true;
                    stack.push((x, y));
                }
            }
        }
        self.flood(&mut seen, &mut stack, false);
        // remaining unvisited black components are holes
        let mut holes = 0;
        for y in 0..self.height {
            for x in 0..self.width {
                let i = self.idx(x, y);
                if self.pixels[i] == 0 && !seen[i] {
                    holes += 1;
                    seen[i] = true;
                    let mut stack = vec![(x, y)];
                    self.flood(&mut seen, &mut stack, false);
                }
            }
        }
        holes
    }

    fn count_components(&self, is_set: impl Fn(u8) -> bool, eight: bool) -> usize {
        let mut seen = vec![false; self.pixels.len()];
        let mut components = 0;
        for y in 0..self.height {
            for x in 0..self.width {
                let i = self.idx(x, y);
                if is_set(self.pixels[i]) && !seen[i] {
                    components += 1;
                    seen[i] = true;
                    let mut stack = vec![(x, y)];
                    while let Some((cx, cy)) = stack.pop() {
                        for (nx, ny) in neighbors(cx, cy, self.width, self.height, eight) {
                            let j = self.idx(nx, ny);
                            if is_set(self.pixels[j]) && !seen[j] {
                                seen[j] = true;
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
            }
        }
        components
    }

    fn flood(&self, seen: &mut [bool], stack: &mut Vec<(usize, usize)>, eight: bool) {
        while let Some((cx, cy)) = stack.pop() {
            for (nx, ny) in neighbors(cx, cy, self.width, self.height, eight) {
                let j = self.idx(nx, ny);
                if self.pixels[j] == 0 && !seen[j] {
                    seen[j] = true;
                    stack.push((nx, ny));
                }
            }
        }
    }
}

fn neighbors(
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    eight: bool,
) -> impl Iterator<Item = (usize, usize)> {
    let deltas: &[(i64, i64)] = if eight {
        &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
    } else {
        &[(1, 0), (-1, 0), (0, 1), (0, -1)]
    };
    deltas.iter().filter_map(move |&(dx, dy)| {
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        (nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64).then_some((nx as usize, ny as usize))
    })
}

/// Rasterizes a cloud into a binary image; points outside the bounds are
/// clipped. Row 0 is the top of the bounding rectangle.
pub fn rasterize(cloud: &PointCloud, width: usize, height: usize, bounds: Rect) -> RasterImage {
    let mut pixels = vec![0u8; width * height];
    let bw = bounds.width();
    let bh = bounds.height();
    for p in &cloud.points {
        let fx = (p.re - bounds.x0) / bw;
        let fy = (p.im - bounds.y0) / bh;
        if !(0.0..1.0 + 1e-12).contains(&fx) || !(0.0..1.0 + 1e-12).contains(&fy) {
            continue;
        }
        let x = ((fx * width as f64) as usize).min(width - 1);
        let y = ((fy * height as f64) as usize).min(height - 1);
        pixels[(height - 1 - y) * width + x] = 255;
    }
    RasterImage {
        width,
        height,
        bounds,
        pixels,
    }
}

/// CSV with header `x,y`, one point per line, 17 significant digits, LF
/// endings; byte-identical across runs for identical input.
pub fn write_points_csv<W: Write>(points: &[Complex64], mut out: W) -> std::io::Result<()> {
    use crate::numeric::fmt_g17;
    out.write_all(b"x,y\n")?;
    for p in points {
        writeln!(out, "{},{}", fmt_g17(p.re), fmt_g17(p.im))?;
    }
    Ok(())
}
