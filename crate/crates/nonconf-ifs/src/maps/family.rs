use crate::error::{IfsError, Result};
use crate::maps::WirtingerDerivative;
use crate::numeric::arg_in_turn;
use num_complex::Complex64;
use std::f64::consts::TAU;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_STEP_TOL: f64 = 1e-13;
const NEWTON_RESIDUAL_TOL: f64 = 1e-12;

/// One contracting affine generator g(z) = a z + b conj(z) + t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineBranch {
    pub a: Complex64,
    pub b: Complex64,
    pub t: Complex64,
}

impl AffineBranch {
    pub fn derivative(&self) -> WirtingerDerivative {
        WirtingerDerivative::new(self.a, self.b)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.a * z + self.b * z.conj() + self.t
    }
}

/// The map families the library knows how to invert.
///
/// For `Affine` the branches *are* the contracting generators and the forward
/// (expanding) map of branch i is its inverse. For `QuadConjugate` and
/// `PowerModulus` a single expanding map f is given and the generators are
/// its n inverse branches, labelled by the angular sector
/// arg z in [2 pi k / n, 2 pi (k+1) / n) of the unperturbed model.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorFamily {
    Affine(Vec<AffineBranch>),
    /// f(z) = z^2 + b conj(z) + c
    QuadConjugate { b: Complex64, c: Complex64 },
    /// f(z) = z^n |z|^(gamma - n) + c
    PowerModulus { n: u32, gamma: f64, c: Complex64 },
}

impl GeneratorFamily {
    pub fn branch_count(&self) -> usize {
        match self {
            GeneratorFamily::Affine(branches) => branches.len(),
            GeneratorFamily::QuadConjugate { .. } => 2,
            GeneratorFamily::PowerModulus { n, .. } => *n as usize,
        }
    }

    /// True when every generator is conformal (d_zbar identically zero), in
    /// which case the dilatation is exactly 1 everywhere.
    pub fn is_conformal(&self) -> bool {
        match self {
            GeneratorFamily::Affine(branches) => branches.iter().all(|br| br.b.norm() == 0.0),
            GeneratorFamily::QuadConjugate { b, .. } => b.norm() == 0.0,
            GeneratorFamily::PowerModulus { n, gamma, .. } => *gamma == *n as f64,
        }
    }

    /// Evaluate the expanding map of the given branch. For the one-map
    /// families the branch index is irrelevant.
    pub fn forward_eval(&self, branch: usize, z: Complex64) -> Result<Complex64> {
        match self {
            GeneratorFamily::Affine(branches) => {
                let br = &branches[branch];
                // w solves a w + b conj(w) + t = z
                let inv = br.derivative().invert()?;
                Ok(inv.apply(z - br.t))
            }
            GeneratorFamily::QuadConjugate { b, c } => Ok(z * z + b * z.conj() + c),
            GeneratorFamily::PowerModulus { n, gamma, c } => {
                if z.norm() == 0.0 {
                    return Err(IfsError::OriginSingularity);
                }
                Ok(z.powi(*n as i32) * z.norm().powf(*gamma - *n as f64) + c)
            }
        }
    }

    /// Wirtinger derivative of the expanding map at z.
    pub fn forward_derivative(&self, branch: usize, z: Complex64) -> Result<WirtingerDerivative> {
        match self {
            GeneratorFamily::Affine(branches) => branches[branch].derivative().invert(),
            GeneratorFamily::QuadConjugate { b, .. } => {
                Ok(WirtingerDerivative::new(2.0 * z, *b))
            }
            GeneratorFamily::PowerModulus { n, gamma, .. } => {
                let r = z.norm();
                if r == 0.0 {
                    return Err(IfsError::OriginSingularity);
                }
                let nf = *n as f64;
                let d_z = z.powi(*n as i32 - 1) * r.powf(*gamma - nf) * (nf + *gamma) / 2.0;
                let d_zbar = z.powi(*n as i32 + 1) * r.powf(*gamma - nf - 2.0) * (*gamma - nf) / 2.0;
                Ok(WirtingerDerivative::new(d_z, d_zbar))
            }
        }
    }

    /// Inverse branch evaluation, unrestricted by any region. The sector
    /// convention is carried from the unperturbed model: the returned point
    /// is the preimage continued by Newton from the closed-form seed of
    /// branch k.
    pub fn inverse_branch(&self, branch: usize, w: Complex64) -> Result<Complex64> {
        match self {
            GeneratorFamily::Affine(branches) => Ok(branches[branch].eval(w)),
            GeneratorFamily::QuadConjugate { b, c } => {
                let u = w - c;
                let theta = arg_in_turn(u);
                let seed =
                    Complex64::from_polar(u.norm().sqrt(), (theta + TAU * branch as f64) / 2.0);
                if b.norm() == 0.0 {
                    return Ok(seed);
                }
                let mut z = seed;
                for _ in 0..NEWTON_MAX_ITER {
                    let f = z * z + b * z.conj() + c - w;
                    let jac = WirtingerDerivative::new(2.0 * z, *b);
                    let step = jac.invert()?.apply(-f);
                    z += step;
                    if step.norm() <= NEWTON_STEP_TOL * z.norm().max(1.0) {
                        break;
                    }
                }
                let residual = (z * z + b * z.conj() + c - w).norm();
                if residual > NEWTON_RESIDUAL_TOL * w.norm().max(1.0) {
                    return Err(IfsError::NewtonDivergence { branch, w });
                }
                Ok(z)
            }
            GeneratorFamily::PowerModulus { n, gamma, c } => {
                let u = w - c;
                if u.norm() == 0.0 {
                    return Err(IfsError::OriginSingularity);
                }
                let theta = arg_in_turn(u);
                Ok(Complex64::from_polar(
                    u.norm().powf(1.0 / *gamma),
                    (theta + TAU * branch as f64) / *n as f64,
                ))
            }
        }
    }

    /// Derivative of the inverse branch at w: the inverse of the forward
    /// derivative taken at the preimage point.
    pub fn inverse_branch_derivative(
        &self,
        branch: usize,
        w: Complex64,
    ) -> Result<WirtingerDerivative> {
        match self {
            GeneratorFamily::Affine(branches) => Ok(branches[branch].derivative()),
            _ => {
                let z = self.inverse_branch(branch, w)?;
                self.forward_derivative(branch, z)?.invert()
            }
        }
    }

    /// Inverse branch value continued smoothly from a known nearby preimage.
    /// The sector convention makes `inverse_branch` jump across the cut ray;
    /// Taylor remainders and image circles of small disks need the smooth
    /// local continuation instead, which is the preimage of w closest to the
    /// continuation seed `near`.
    pub fn inverse_branch_near(
        &self,
        branch: usize,
        w: Complex64,
        near: Complex64,
    ) -> Result<Complex64> {
        match self {
            GeneratorFamily::Affine(branches) => Ok(branches[branch].eval(w)),
            GeneratorFamily::QuadConjugate { b, c } => {
                if b.norm() == 0.0 {
                    let root = (w - c).sqrt();
                    return Ok(if (root - near).norm() <= (-root - near).norm() {
                        root
                    } else {
                        -root
                    });
                }
                let mut z = near;
                for _ in 0..NEWTON_MAX_ITER {
                    let f = z * z + b * z.conj() + c - w;
                    let jac = WirtingerDerivative::new(2.0 * z, *b);
                    let step = jac.invert()?.apply(-f);
                    z += step;
                    if step.norm() <= NEWTON_STEP_TOL * z.norm().max(1.0) {
                        break;
                    }
                }
                let residual = (z * z + b * z.conj() + c - w).norm();
                if residual > NEWTON_RESIDUAL_TOL * w.norm().max(1.0) {
                    return Err(IfsError::NewtonDivergence { branch, w });
                }
                Ok(z)
            }
            GeneratorFamily::PowerModulus { n, gamma, c } => {
                let u = w - c;
                if u.norm() == 0.0 {
                    return Err(IfsError::OriginSingularity);
                }
                let r = u.norm().powf(1.0 / *gamma);
                let base = arg_in_turn(u) / *n as f64;
                (0..*n)
                    .map(|k| Complex64::from_polar(r, base + TAU * k as f64 / *n as f64))
                    .min_by(|a, b| {
                        (a - near)
                            .norm()
                            .partial_cmp(&(b - near).norm())
                            .expect("finite distances")
                    })
                    .ok_or(IfsError::OriginSingularity)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{wirtinger_finite_difference, SplitMix64};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn quad(b: f64, cc: f64) -> GeneratorFamily {
        GeneratorFamily::QuadConjugate {
            b: c(b, 0.0),
            c: c(cc, 0.0),
        }
    }

    #[test]
    fn quad_forward_derivative() {
        let fam = quad(0.1, 0.3);
        let d = fam.forward_derivative(0, c(1.0, 0.0)).unwrap();
        assert_eq!(d.d_z, c(2.0, 0.0));
        assert_eq!(d.d_zbar, c(0.1, 0.0));
    }

    #[test]
    fn power_modulus_reduces_to_square() {
        let fam = GeneratorFamily::PowerModulus {
            n: 2,
            gamma: 2.0,
            c: c(0.0, 0.0),
        };
        let d = fam.forward_derivative(0, c(0.0, 1.0)).unwrap();
        assert!((d.d_z - c(0.0, 2.0)).norm() < 1e-15);
        assert!(d.d_zbar.norm() < 1e-15);
    }

    #[test]
    fn power_modulus_derivative_values() {
        let fam = GeneratorFamily::PowerModulus {
            n: 2,
            gamma: 2.2,
            c: c(0.0, 0.0),
        };
        let d = fam.forward_derivative(0, c(1.0, 0.0)).unwrap();
        assert!((d.d_z - c(2.1, 0.0)).norm() < 1e-14);
        assert!((d.d_zbar - c(0.1, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn forward_derivatives_match_finite_differences() {
        let families = [
            quad(0.1, 0.1),
            GeneratorFamily::PowerModulus {
                n: 2,
                gamma: 2.2,
                c: c(0.05, 0.0),
            },
            GeneratorFamily::PowerModulus {
                n: 3,
                gamma: 2.7,
                c: c(0.0, 0.1),
            },
        ];
        let mut rng = SplitMix64::new(41);
        for fam in &families {
            for _ in 0..100 {
                let z = Complex64::from_polar(rng.uniform(0.8, 1.25), rng.uniform(0.0, TAU));
                let d = fam.forward_derivative(0, z).unwrap();
                let (fd_z, fd_zb) =
                    wirtinger_finite_difference(|p| fam.forward_eval(0, p).unwrap(), z, 1e-6);
                let scale = d.d_z.norm().max(1.0);
                assert!((d.d_z - fd_z).norm() / scale < 1e-5, "d_z off for {fam:?} at {z}");
                assert!((d.d_zbar - fd_zb).norm() / scale < 1e-5);
            }
        }
    }

    #[test]
    fn origin_is_singular_for_power_modulus() {
        let fam = GeneratorFamily::PowerModulus {
            n: 2,
            gamma: 1.5,
            c: c(0.0, 0.0),
        };
        assert!(matches!(
            fam.forward_derivative(0, c(0.0, 0.0)),
            Err(IfsError::OriginSingularity)
        ));
    }

    #[test]
    fn principal_square_root_branch() {
        let fam = quad(0.0, 0.0);
        let z = fam.inverse_branch(0, c(4.0, 0.0)).unwrap();
        assert!((z - c(2.0, 0.0)).norm() < 1e-14);
        let z1 = fam.inverse_branch(1, c(4.0, 0.0)).unwrap();
        assert!((z1 - c(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn power_modulus_polar_inverse() {
        let fam = GeneratorFamily::PowerModulus {
            n: 2,
            gamma: 2.2,
            c: c(0.0, 0.0),
        };
        let w = Complex64::from_polar(1.3, 0.9);
        for k in 0..2 {
            let z = fam.inverse_branch(k, w).unwrap();
            let expect = Complex64::from_polar(1.3f64.powf(1.0 / 2.2), (0.9 + TAU * k as f64) / 2.0);
            assert!((z - expect).norm() < 1e-13);
            assert!((fam.forward_eval(k, z).unwrap() - w).norm() < 1e-12);
        }
    }

    #[test]
    fn newton_round_trip_with_conjugate_term() {
        let fam = quad(0.1, 0.0);
        // f(1) = 1.1; the branch containing 1 must return it
        let z = fam.inverse_branch(0, c(1.1, 0.0)).unwrap();
        assert!((z - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn inverse_branch_derivative_conformal() {
        let fam = quad(0.0, 0.0);
        let d = fam.inverse_branch_derivative(0, c(1.0, 0.0)).unwrap();
        assert!((d.d_z - c(0.5, 0.0)).norm() < 1e-13);
        assert!(d.d_zbar.norm() < 1e-13);
    }

    #[test]
    fn inverse_branch_derivative_perturbed() {
        let fam = quad(0.1, 0.0);
        let d = fam.inverse_branch_derivative(0, c(1.1, 0.0)).unwrap();
        assert!((d.d_z - c(2.0 / 3.99, 0.0)).norm() < 1e-9);
        assert!((d.d_zbar - c(-0.1 / 3.99, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn power_modulus_inverse_singular_values_on_circle() {
        let fam = GeneratorFamily::PowerModulus {
            n: 2,
            gamma: 2.2,
            c: c(0.0, 0.0),
        };
        let w = Complex64::from_polar(1.0, 0.4); // preimage also on |z| = 1
        let sd = fam
            .inverse_branch_derivative(0, w)
            .unwrap()
            .singular_data()
            .unwrap();
        assert!((sd.l - 0.5).abs() < 1e-12);
        assert!((sd.s - 1.0 / 2.2).abs() < 1e-12);
        assert!((sd.k - 1.1).abs() < 1e-12);
    }

    #[test]
    fn inverse_branch_derivative_matches_finite_differences() {
        let fam = quad(0.1, 0.1);
        let mut rng = SplitMix64::new(7);
        for _ in 0..40 {
            let w = Complex64::from_polar(rng.uniform(0.85, 1.25), rng.uniform(0.3, TAU - 0.3));
            let d = fam.inverse_branch_derivative(0, w).unwrap();
            let (fd_z, fd_zb) =
                wirtinger_finite_difference(|p| fam.inverse_branch(0, p).unwrap(), w, 1e-6);
            assert!((d.d_z - fd_z).norm() / d.d_z.norm() < 1e-6);
            assert!((d.d_zbar - fd_zb).norm() / d.d_z.norm() < 1e-6);
        }
    }

    #[test]
    fn affine_forward_inverts_the_branch() {
        let br = AffineBranch {
            a: c(5.0 / 12.0, 0.0),
            b: c(1.0 / 12.0, 0.0),
            t: c(0.5, 2.0 / 3.0),
        };
        let fam = GeneratorFamily::Affine(vec![br]);
        let z = c(0.3, 0.4);
        let w = fam.inverse_branch(0, z).unwrap();
        let back = fam.forward_eval(0, w).unwrap();
        assert!((back - z).norm() < 1e-13);
        // branch derivative is the branch's own coefficients
        let d = fam.inverse_branch_derivative(0, z).unwrap();
        assert_eq!(d.d_z, br.a);
        assert_eq!(d.d_zbar, br.b);
    }
}
