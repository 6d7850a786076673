//! Run configuration: a versioned JSON document with strict schema checking.

use crate::error::{IfsError, Result};
use crate::maps::{
    build_system, AffineBranch, GeneratorFamily, Rect, Region, SemigroupSystem, SystemSpec,
    DEFAULT_P_SCHEDULE, DEFAULT_WORD_BUDGET,
};
use crate::symdyn::TransitionMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

fn c64(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineBranchSpec {
    pub a: [f64; 2],
    #[serde(default)]
    pub b: [f64; 2],
    #[serde(default)]
    pub t: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Affine { branches: Vec<AffineBranchSpec> },
    QuadConjugate { b: [f64; 2], c: [f64; 2] },
    PowerModulus { n: u32, gamma: f64, c: [f64; 2] },
}

impl FamilySpec {
    pub fn to_family(&self) -> GeneratorFamily {
        match self {
            FamilySpec::Affine { branches } => GeneratorFamily::Affine(
                branches
                    .iter()
                    .map(|br| AffineBranch {
                        a: c64(br.a),
                        b: c64(br.b),
                        t: c64(br.t),
                    })
                    .collect(),
            ),
            FamilySpec::QuadConjugate { b, c } => GeneratorFamily::QuadConjugate {
                b: c64(*b),
                c: c64(*c),
            },
            FamilySpec::PowerModulus { n, gamma, c } => GeneratorFamily::PowerModulus {
                n: *n,
                gamma: *gamma,
                c: c64(*c),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Annulus { r_min: f64, r_max: f64 },
    Disk { center: [f64; 2], radius: f64 },
    Rects { rects: Vec<[f64; 4]> },
}

impl RegionSpec {
    pub fn to_region(&self) -> Region {
        match self {
            RegionSpec::Annulus { r_min, r_max } => Region::Annulus {
                r_min: *r_min,
                r_max: *r_max,
            },
            RegionSpec::Disk { center, radius } => Region::Disk {
                center: c64(*center),
                radius: *radius,
            },
            RegionSpec::Rects { rects } => Region::Rects(
                rects.iter().map(|r| Rect::new(r[0], r[1], r[2], r[3])).collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_bisection")]
    pub bisection: f64,
    #[serde(default = "default_convergence")]
    pub convergence: f64,
}

fn default_bisection() -> f64 {
    1e-10
}

fn default_convergence() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            bisection: default_bisection(),
            convergence: default_convergence(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RenderMode {
    LimitSet,
    Preimages,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSpec {
    pub mode: RenderMode,
    pub depth: u32,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_raster")]
    pub width: usize,
    #[serde(default = "default_raster")]
    pub height: usize,
    /// [x0, x1, y0, y1]; defaults to [-2, 2]^2.
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 4],
}

fn default_radius() -> f64 {
    4.0
}

fn default_raster() -> usize {
    512
}

fn default_bounds() -> [f64; 4] {
    [-2.0, 2.0, -2.0, 2.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// One of: b_re, b_im, c_re, c_im, gamma, alpha.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
}

impl SweepSpec {
    pub fn grid_size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Row-major point of the grid: the last axis varies fastest.
    pub fn point(&self, index: usize) -> Vec<(String, f64)> {
        let mut rem = index;
        let mut out = vec![(String::new(), 0.0); self.axes.len()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            out[i] = (axis.param.clone(), axis.values[rem % n]);
            rem /= n;
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub family: FamilySpec,
    #[serde(default)]
    pub region: Option<RegionSpec>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub transition: Option<Vec<Vec<u8>>>,
    #[serde(default = "default_schedule")]
    pub p_schedule: Vec<u32>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_budget")]
    pub word_budget: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_density")]
    pub sample_density: u32,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub holder_constant: Option<f64>,
    #[serde(default)]
    pub render: Option<RenderSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_schedule() -> Vec<u32> {
    DEFAULT_P_SCHEDULE.to_vec()
}

fn default_budget() -> u64 {
    DEFAULT_WORD_BUDGET
}

fn default_density() -> u32 {
    64
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_trials() -> usize {
    100
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| IfsError::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(IfsError::Config(format!(
                "schema version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if !(self.tolerances.bisection > 0.0 && self.tolerances.convergence > 0.0) {
            return Err(IfsError::Config("tolerances must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(IfsError::Config(format!("alpha = {} outside (0, 1]", self.alpha)));
        }
        if self.p_schedule.is_empty() {
            return Err(IfsError::Config("p_schedule must be nonempty".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.axes.iter().any(|a| a.values.is_empty()) {
                return Err(IfsError::Config("sweep axes must be nonempty".into()));
            }
            if sweep.grid_size() as u64 > self.word_budget {
                return Err(IfsError::Config("sweep grid exceeds the budget".into()));
            }
            for axis in &sweep.axes {
                self.clone().apply_param(&axis.param, axis.values[0])?;
            }
        }
        Ok(())
    }

    /// Region from the config, or the family's default.
    fn region(&self) -> Result<Region> {
        if let Some(spec) = &self.region {
            return Ok(spec.to_region());
        }
        match self.family {
            FamilySpec::Affine { .. } => Err(IfsError::Config(
                "affine families need an explicit region".into(),
            )),
            _ => Ok(Region::default_annulus()),
        }
    }

    pub fn to_system(&self) -> Result<SemigroupSystem> {
        let transition = match &self.transition {
            Some(rows) => Some(TransitionMatrix::new(rows.clone())?),
            None => None,
        };
        build_system(SystemSpec {
            family: self.family.to_family(),
            region: self.region()?,
            alpha: self.alpha,
            transition,
            holder_constant: self.holder_constant,
            word_budget: self.word_budget,
            p_schedule: self.p_schedule.clone(),
        })
    }

    /// A copy with one named family/system parameter replaced; used by the
    /// sweep driver.
    pub fn apply_param(mut self, param: &str, value: f64) -> Result<RunConfig> {
        match (&mut self.family, param) {
            (FamilySpec::QuadConjugate { b, .. }, "b_re") => b[0] = value,
            (FamilySpec::QuadConjugate { b, .. }, "b_im") => b[1] = value,
            (FamilySpec::QuadConjugate { c, .. }, "c_re") => c[0] = value,
            (FamilySpec::QuadConjugate { c, .. }, "c_im") => c[1] = value,
            (FamilySpec::PowerModulus { gamma, .. }, "gamma") => *gamma = value,
            (FamilySpec::PowerModulus { c, .. }, "c_re") => c[0] = value,
            (FamilySpec::PowerModulus { c, .. }, "c_im") => c[1] = value,
            (_, "alpha") => self.alpha = value,
            (_, other) => {
                return Err(IfsError::Config(format!(
                    "parameter {other} not sweepable for this family"
                )))
            }
        }
        Ok(self)
    }
}
