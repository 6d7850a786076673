use crate::error::{IfsError, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Axis-aligned rectangle, used both as region piece and bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, z: Complex64, tol: f64) -> bool {
        z.re >= self.x0 - tol && z.re <= self.x1 + tol && z.im >= self.y0 - tol && z.im <= self.y1 + tol
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

/// The common working region W of a semigroup: one invariant set with margin
/// housing all branch domains and images.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Annulus { r_min: f64, r_max: f64 },
    Disk { center: Complex64, radius: f64 },
    Rects(Vec<Rect>),
}

impl Region {
    /// Default annulus for circle-type Julia systems; invariant under the
    /// unperturbed inverse branches with margin.
    pub fn default_annulus() -> Region {
        Region::Annulus {
            r_min: 0.75,
            r_max: 4.0 / 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Region::Annulus { r_min, r_max } => {
                r_min.is_finite() && r_max.is_finite() && *r_min > 0.0 && r_max > r_min
            }
            Region::Disk { center, radius } => {
                center.re.is_finite() && center.im.is_finite() && *radius > 0.0
            }
            Region::Rects(rects) => {
                !rects.is_empty()
                    && rects
                        .iter()
                        .all(|r| r.width() > 0.0 && r.height() > 0.0 && r.diameter().is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(IfsError::Config("region is empty or degenerate".into()))
        }
    }

    pub fn contains(&self, z: Complex64, tol: f64) -> bool {
        match self {
            Region::Annulus { r_min, r_max } => {
                let r = z.norm();
                r >= r_min - tol && r <= r_max + tol
            }
            Region::Disk { center, radius } => (z - center).norm() <= radius + tol,
            Region::Rects(rects) => rects.iter().any(|r| r.contains(z, tol)),
        }
    }

    /// True when the closed region contains the origin.
    pub fn contains_origin(&self) -> bool {
        self.contains(Complex64::new(0.0, 0.0), 0.0)
    }

    pub fn bounding_box(&self) -> Rect {
        match self {
            Region::Annulus { r_max, .. } => Rect::new(-r_max, *r_max, -r_max, *r_max),
            Region::Disk { center, radius } => Rect::new(
                center.re - radius,
                center.re + radius,
                center.im - radius,
                center.im + radius,
            ),
            Region::Rects(rects) => {
                let mut bb = rects[0];
                for r in &rects[1..] {
                    bb.x0 = bb.x0.min(r.x0);
                    bb.x1 = bb.x1.max(r.x1);
                    bb.y0 = bb.y0.min(r.y0);
                    bb.y1 = bb.y1.max(r.y1);
                }
                bb
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Region::Annulus { r_max, .. } => 2.0 * r_max,
            Region::Disk { radius, .. } => 2.0 * radius,
            Region::Rects(rects) => {
                // max pairwise corner distance across pieces
                let corners: Vec<Complex64> = rects
                    .iter()
                    .flat_map(|r| {
                        [
                            Complex64::new(r.x0, r.y0),
                            Complex64::new(r.x1, r.y0),
                            Complex64::new(r.x0, r.y1),
                            Complex64::new(r.x1, r.y1),
                        ]
                    })
                    .collect();
                let mut d: f64 = 0.0;
                for (i, a) in corners.iter().enumerate() {
                    for b in &corners[i + 1..] {
                        d = d.max((a - b).norm());
                    }
                }
                d
            }
        }
    }

    /// Radius of the largest disk inscribed in the region.
    pub fn inradius(&self) -> f64 {
        match self {
            Region::Annulus { r_min, r_max } => (r_max - r_min) / 2.0,
            Region::Disk { radius, .. } => *radius,
            Region::Rects(rects) => rects
                .iter()
                .map(|r| r.width().min(r.height()) / 2.0)
                .fold(0.0, f64::max),
        }
    }

    /// Interior point used to seed fixed-point iterations and projections.
    pub fn seed_point(&self) -> Complex64 {
        match self {
            Region::Annulus { r_min, r_max } => Complex64::new((r_min + r_max) / 2.0, 0.0),
            Region::Disk { center, .. } => *center,
            Region::Rects(rects) => rects[0].center(),
        }
    }

    /// Distance from an interior point to the region boundary (0 outside).
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        match self {
            Region::Annulus { r_min, r_max } => {
                let r = z.norm();
                (r - r_min).min(r_max - r).max(0.0)
            }
            Region::Disk { center, radius } => (radius - (z - center).norm()).max(0.0),
            Region::Rects(rects) => rects
                .iter()
                .map(|r| {
                    (z.re - r.x0)
                        .min(r.x1 - z.re)
                        .min(z.im - r.y0)
                        .min(r.y1 - z.im)
                        .max(0.0)
                })
                .fold(0.0, f64::max),
        }
    }

    /// Deterministic lattice over the region: bounding-box grid with spacing
    /// diameter/density anchored at the box corner, filtered by membership.
    /// Doubling the density refines the lattice in place, so grid suprema are
    /// monotone in the density.
    pub fn grid(&self, density: u32) -> Vec<Complex64> {
        let bb = self.bounding_box();
        let h = self.diameter() / density as f64;
        let nx = (bb.width() / h).ceil() as i64;
        let ny = (bb.height() / h).ceil() as i64;
        let mut pts = Vec::new();
        for j in 0..=ny {
            let y = bb.y0 + j as f64 * h;
            for i in 0..=nx {
                let x = bb.x0 + i as f64 * h;
                let z = Complex64::new(x.min(bb.x1), y.min(bb.y1));
                if self.contains(z, 0.0) {
                    pts.push(z);
                }
            }
        }
        pts
    }

    /// Points on the region boundary. Rectangle corners are always included
    /// so that sampled diameters of affine images are exact.
    pub fn boundary_samples(&self, count: usize) -> Vec<Complex64> {
        match self {
            Region::Annulus { r_min, r_max } => {
                let half = (count / 2).max(8);
                let mut pts = Vec::with_capacity(2 * half);
                for j in 0..half {
                    let th = TAU * j as f64 / half as f64;
                    pts.push(Complex64::from_polar(*r_min, th));
                }
                for j in 0..half {
                    let th = TAU * j as f64 / half as f64;
                    pts.push(Complex64::from_polar(*r_max, th));
                }
                pts
            }
            Region::Disk { center, radius } => (0..count.max(8))
                .map(|j| center + Complex64::from_polar(*radius, TAU * j as f64 / count.max(8) as f64))
                .collect(),
            Region::Rects(rects) => {
                let per_rect = (count / rects.len()).max(8);
                let per_side = (per_rect / 4).max(2);
                let mut pts = Vec::new();
                for r in rects {
                    for i in 0..per_side {
                        let f = i as f64 / per_side as f64;
                        pts.push(Complex64::new(r.x0 + f * r.width(), r.y0));
                        pts.push(Complex64::new(r.x1, r.y0 + f * r.height()));
                        pts.push(Complex64::new(r.x1 - f * r.width(), r.y1));
                        pts.push(Complex64::new(r.x0, r.y1 - f * r.height()));
                    }
                }
                pts
            }
        }
    }
}
