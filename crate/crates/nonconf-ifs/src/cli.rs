//! Subcommand implementations. Exit codes: 0 success, 2 config/construction
//! error, 3 non-regular system, 4 bounds did not converge, 5 distortion
//! trial failure.

use crate::config::{FamilySpec, RenderMode, RunConfig};
use crate::distortion::{angle_report, verify_containment};
use crate::error::{IfsError, Result};
use crate::fractal::{julia_preimage_cloud, limit_set_cloud, rasterize, write_points_csv, DEFAULT_CLOUD_BUDGET};
use crate::maps::{global_bounds, Rect};
use crate::numeric::fmt_g17;
use crate::thermo::{BirkhoffCache, PotentialKind};
use std::fs;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_REGULAR: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_DISTORTION: i32 = 5;

pub const BUDGET_ENV_VAR: &str = "NONCONF_IFS_BUDGET";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Regularity,
    Bounds,
    Distortion,
    Render,
    Sweep,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub resume: bool,
}

/// Runs one subcommand against a parsed config and maps errors onto the
/// documented exit codes. The summary goes to stdout and, when an output
/// directory is given, to `summary.txt` there.
pub fn run_command(cmd: Command, mut config: RunConfig, opts: &RunOptions) -> i32 {
    if let Ok(raw) = std::env::var(BUDGET_ENV_VAR) {
        match raw.parse::<u64>() {
            Ok(v) => config.word_budget = v,
            Err(_) => {
                eprintln!("error: {BUDGET_ENV_VAR}={raw} is not a valid budget");
                return EXIT_CONFIG;
            }
        }
    }
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    let body = || -> Result<(i32, String)> {
        match cmd {
            Command::Regularity => cmd_regularity(&config),
            Command::Bounds => cmd_bounds(&config, opts),
            Command::Distortion => cmd_distortion(&config, opts),
            Command::Render => cmd_render(&config, opts),
            Command::Sweep => cmd_sweep(&config, opts),
        }
    };
    let run = || match body() {
        Ok((code, summary)) => {
            print!("{summary}");
            if let Some(dir) = &opts.out_dir {
                if let Err(e) = write_file(dir, "summary.txt", summary.as_bytes()) {
                    eprintln!("error: cannot write summary: {e}");
                    return EXIT_CONFIG;
                }
            }
            code
        }
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                IfsError::NotRegular { .. } => EXIT_NOT_REGULAR,
                _ => EXIT_CONFIG,
            }
        }
    };
    match opts.jobs {
        Some(jobs) => match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: cannot build thread pool: {e}");
                EXIT_CONFIG
            }
        },
        None => run(),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

/// Compact, comma-free parameter description for CSV and summaries.
fn family_label(family: &FamilySpec) -> String {
    match family {
        FamilySpec::Affine { branches } => format!("affine[{}]", branches.len()),
        FamilySpec::QuadConjugate { b, c } => {
            format!("quad_conjugate b={}{:+}i c={}{:+}i", b[0], b[1], c[0], c[1])
        }
        FamilySpec::PowerModulus { n, gamma, c } => {
            format!("power_modulus n={n} gamma={gamma} c={}{:+}i", c[0], c[1])
        }
    }
}

fn cmd_regularity(config: &RunConfig) -> Result<(i32, String)> {
    let system = config.to_system()?;
    let gb = global_bounds(&system, config.sample_density)?;
    let mut s = String::new();
    s.push_str(&format!("family: {}\n", family_label(&config.family)));
    s.push_str(&format!("alpha: {}\n", config.alpha));
    s.push_str(&format!("l_max: {}\n", fmt_g17(gb.l_max)));
    s.push_str(&format!("s_min: {}\n", fmt_g17(gb.s_min)));
    s.push_str(&format!("K_max: {}\n", fmt_g17(gb.k_max)));
    s.push_str(&format!("beta: {}\n", fmt_g17(gb.beta)));
    s.push_str(&format!("margin: {}\n", fmt_g17(gb.margin)));
    s.push_str(&format!("holder_constant: {}\n", fmt_g17(system.holder_constant)));
    s.push_str(&format!("sample_density: {}\n", gb.sample_density));
    s.push_str(&format!("regular: {}\n", gb.regular));
    let code = if gb.regular { EXIT_OK } else { EXIT_NOT_REGULAR };
    Ok((code, s))
}

fn cmd_bounds(config: &RunConfig, opts: &RunOptions) -> Result<(i32, String)> {
    let system = config.to_system()?;
    let gb = global_bounds(&system, config.sample_density)?;
    let tol = config.tolerances.bisection;
    let label = family_label(&config.family);

    let mut rows = String::from("family,alpha,p,t_lo,t_up,delta_lo,delta_up,regular\n");
    let mut prev: Option<(f64, f64)> = None;
    let mut last = (f64::NAN, f64::NAN);
    let mut deltas = (f64::INFINITY, f64::INFINITY);
    for &p in &config.p_schedule {
        let cache = BirkhoffCache::build(&system, p)?;
        let t_lo = cache.bowen_root(PotentialKind::Lower, tol)?;
        let t_up = cache.bowen_root(PotentialKind::Upper, tol)?;
        deltas = match prev {
            Some((plo, pup)) => ((t_lo - plo).abs(), (t_up - pup).abs()),
            None => (f64::INFINITY, f64::INFINITY),
        };
        rows.push_str(&format!(
            "{label},{},{p},{},{},{},{},{}\n",
            config.alpha,
            fmt_g17(t_lo),
            fmt_g17(t_up),
            if deltas.0.is_finite() { fmt_g17(deltas.0) } else { String::new() },
            if deltas.1.is_finite() { fmt_g17(deltas.1) } else { String::new() },
            gb.regular,
        ));
        prev = Some((t_lo, t_up));
        last = (t_lo, t_up);
    }
    if let Some(dir) = &opts.out_dir {
        write_file(dir, "bounds.csv", rows.as_bytes())?;
    }

    let converged = config.p_schedule.len() < 2
        || (deltas.0 < config.tolerances.convergence && deltas.1 < config.tolerances.convergence);
    let mut s = String::new();
    s.push_str(&format!("family: {label}\n"));
    s.push_str(&format!("p_used: {}\n", config.p_schedule.last().unwrap()));
    s.push_str(&format!("t_lo: {}\n", fmt_g17(last.0)));
    s.push_str(&format!("t_up: {}\n", fmt_g17(last.1)));
    s.push_str(&format!("root_delta_lo: {}\n", fmt_g17(deltas.0)));
    s.push_str(&format!("root_delta_up: {}\n", fmt_g17(deltas.1)));
    s.push_str(&format!("regular: {}\n", gb.regular));
    s.push_str(&format!("converged: {converged}\n"));
    let code = if converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
    Ok((code, s))
}

fn cmd_distortion(config: &RunConfig, opts: &RunOptions) -> Result<(i32, String)> {
    let system = config.to_system()?;
    let report = verify_containment(&system, config.trials, config.seed, config.epsilon)?;
    let angles = angle_report(&system, config.trials, config.seed, config.epsilon)?;

    let mut csv = String::from(
        "trial,word_len,base_re,base_im,radius,ratio_min,ratio_max,max_angle_dev,c_bound,pass\n",
    );
    for (i, o) in report.trials.iter().enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{},{}\n",
            o.trial.word_len,
            fmt_g17(o.trial.base.re),
            fmt_g17(o.trial.base.im),
            fmt_g17(o.trial.radius),
            fmt_g17(o.trial.ratio_min),
            fmt_g17(o.trial.ratio_max),
            fmt_g17(o.trial.max_angle_dev),
            fmt_g17(o.c_bound),
            o.pass,
        ));
    }
    let mut angle_csv = String::from("bucket,radius,max_angle_dev\n");
    for (k, b) in angles.buckets.iter().enumerate() {
        angle_csv.push_str(&format!(
            "{k},{},{}\n",
            fmt_g17(b.radius),
            fmt_g17(b.max_angle_dev)
        ));
    }
    if let Some(dir) = &opts.out_dir {
        write_file(dir, "distortion.csv", csv.as_bytes())?;
        write_file(dir, "angles.csv", angle_csv.as_bytes())?;
    }

    let mut s = String::new();
    s.push_str(&format!("family: {}\n", family_label(&config.family)));
    s.push_str(&format!("epsilon: {}\n", config.epsilon));
    s.push_str(&format!("delta: {}\n", fmt_g17(report.constants.delta)));
    s.push_str(&format!("theta: {}\n", fmt_g17(report.constants.theta)));
    s.push_str(&format!("c_inf: {}\n", fmt_g17(report.constants.c_inf)));
    s.push_str(&format!("trials: {}\n", report.trials.len()));
    s.push_str(&format!("empirical_c: {}\n", fmt_g17(report.empirical_c)));
    s.push_str(&format!("angle_monotone: {}\n", angles.monotone));
    s.push_str(&format!("angle_shrink_ratio: {}\n", fmt_g17(angles.shrink_ratio)));
    s.push_str(&format!("pass: {}\n", report.pass));
    let code = if report.pass { EXIT_OK } else { EXIT_DISTORTION };
    Ok((code, s))
}

fn cmd_render(config: &RunConfig, opts: &RunOptions) -> Result<(i32, String)> {
    let spec = config
        .render
        .as_ref()
        .ok_or_else(|| IfsError::Config("render command needs a render section".into()))?;
    let cloud = match spec.mode {
        RenderMode::LimitSet => {
            let system = config.to_system()?;
            limit_set_cloud(&system, spec.depth)?
        }
        RenderMode::Preimages => {
            let budget = config.word_budget.min(DEFAULT_CLOUD_BUDGET);
            julia_preimage_cloud(&config.family.to_family(), spec.radius, spec.depth, budget)?
        }
    };
    let bounds = Rect::new(spec.bounds[0], spec.bounds[1], spec.bounds[2], spec.bounds[3]);
    let image = rasterize(&cloud, spec.width, spec.height, bounds);

    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
        let mut pgm = Vec::new();
        image.write_pgm(&mut pgm)?;
        write_file(dir, "render.pgm", &pgm)?;
        let mut csv = Vec::new();
        write_points_csv(&cloud.points, &mut csv)?;
        write_file(dir, "render.csv", &csv)?;
    }

    let mut s = String::new();
    s.push_str(&format!("family: {}\n", family_label(&config.family)));
    s.push_str(&format!("points: {}\n", cloud.points.len()));
    s.push_str(&format!("white_pixels: {}\n", image.white_pixel_count()));
    s.push_str(&format!("holes: {}\n", image.hole_count()));
    Ok((EXIT_OK, s))
}

/// One sweep row; completed rows are carried verbatim across resumes so the
/// resumed file is byte-identical to an uninterrupted run.
fn sweep_row(config: &RunConfig, index: usize, params: &[(String, f64)]) -> String {
    let mut cfg = config.clone();
    for (name, value) in params {
        cfg = match cfg.apply_param(name, *value) {
            Ok(c) => c,
            Err(e) => return error_row(index, params, &e),
        };
    }
    let values: String = params
        .iter()
        .map(|(_, v)| fmt_g17(*v))
        .collect::<Vec<_>>()
        .join(",");
    let result = (|| -> Result<String> {
        let system = cfg.to_system()?;
        let gb = global_bounds(&system, cfg.sample_density)?;
        let tol = cfg.tolerances.bisection;
        let p = *cfg.p_schedule.last().unwrap();
        let cache = BirkhoffCache::build(&system, p)?;
        let t_lo = cache.bowen_root(PotentialKind::Lower, tol)?;
        let t_up = cache.bowen_root(PotentialKind::Upper, tol)?;
        Ok(format!(
            "{index},{values},{},{},{},{},\n",
            gb.regular,
            fmt_g17(gb.k_max),
            fmt_g17(t_lo),
            fmt_g17(t_up),
        ))
    })();
    result.unwrap_or_else(|e| error_row(index, params, &e))
}

fn error_row(index: usize, params: &[(String, f64)], err: &IfsError) -> String {
    let values: String = params
        .iter()
        .map(|(_, v)| fmt_g17(*v))
        .collect::<Vec<_>>()
        .join(",");
    let msg = err.to_string().replace([',', '\n'], ";");
    format!("{index},{values},,,,,{msg}\n")
}

fn cmd_sweep(config: &RunConfig, opts: &RunOptions) -> Result<(i32, String)> {
    use rayon::prelude::*;

    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| IfsError::Config("sweep command needs a sweep section".into()))?;
    let grid = sweep.grid_size();
    let header = format!(
        "index,{},regular,k_max,t_lo,t_up,error\n",
        sweep
            .axes
            .iter()
            .map(|a| a.param.clone())
            .collect::<Vec<_>>()
            .join(",")
    );

    // rows completed by an earlier interrupted run, keyed by index
    let mut done: Vec<Option<String>> = vec![None; grid];
    if opts.resume {
        if let Some(dir) = &opts.out_dir {
            if let Ok(existing) = fs::read_to_string(dir.join("sweep.csv")) {
                let mut lines = existing.split_inclusive('\n');
                if lines.next() == Some(header.as_str()) {
                    for line in lines {
                        if !line.ends_with('\n') {
                            continue; // torn tail from an interrupted write
                        }
                        if let Some(idx) = line.split(',').next().and_then(|f| f.parse::<usize>().ok()) {
                            if idx < grid {
                                done[idx] = Some(line.to_string());
                            }
                        }
                    }
                }
            }
        }
    }

    let computed_flags: Vec<bool> = done.iter().map(Option::is_some).collect();
    let fresh: Vec<(usize, String)> = (0..grid)
        .into_par_iter()
        .filter(|&i| !computed_flags[i])
        .map(|i| (i, sweep_row(config, i, &sweep.point(i))))
        .collect();
    for (i, row) in fresh {
        done[i] = Some(row);
    }

    let mut out = header;
    for row in done.into_iter() {
        out.push_str(&row.expect("all rows computed"));
    }
    if let Some(dir) = &opts.out_dir {
        write_file(dir, "sweep.csv", out.as_bytes())?;
    }

    let mut s = String::new();
    s.push_str(&format!("family: {}\n", family_label(&config.family)));
    s.push_str(&format!("grid_points: {grid}\n"));
    Ok((EXIT_OK, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn quad_config(b: f64, c: f64) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{"schema": 1, "family": {{"kind": "quad_conjugate", "b": [{b}, 0.0], "c": [{c}, 0.0]}},
                "p_schedule": [4, 6]}}"#
        ))
        .unwrap()
    }

    #[test]
    fn regularity_exit_codes() {
        let (code, summary) = cmd_regularity(&quad_config(0.1, 0.1)).unwrap();
        assert_eq!(code, EXIT_OK);
        assert!(summary.contains("regular: true"));
    }

    #[test]
    fn bounds_summary_contains_roots() {
        let opts = RunOptions::default();
        let (code, summary) = cmd_bounds(&quad_config(0.0, 0.0), &opts).unwrap();
        assert_eq!(code, EXIT_OK);
        let t_lo: f64 = summary
            .lines()
            .find_map(|l| l.strip_prefix("t_lo: "))
            .unwrap()
            .parse()
            .unwrap();
        assert!((t_lo - 1.0).abs() < 1e-6, "{summary}");
    }

    #[test]
    fn render_requires_spec() {
        let opts = RunOptions::default();
        assert!(cmd_render(&quad_config(0.0, 0.0), &opts).is_err());
    }
}
