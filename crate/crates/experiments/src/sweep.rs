use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use irs_wpcn::plan::Solution;
use irs_wpcn::sca::{
    baseline_no_irs, baseline_random_phases, solve_general, solve_hybrid, solve_static, solve_user_adaptive,
    ScaOptions,
};
use irs_wpcn::scenario::{generate_scenario, Scenario};
use irs_wpcn::sdr::{gaussian_randomize, solve_relaxed, MAX_RELAXED_ELEMENTS};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};
use crate::spec::{ExperimentSpec, Scheme};

/// One scheme run on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "P_A_dbm")]
    pub p_a_dbm: f64,
    pub throughput_bps_hz: f64,
    pub tau0_s: f64,
    pub harvested_energy_total_j: f64,
    pub hap_energy_j: f64,
    pub outer_iters: usize,
    pub runtime_ms: f64,
    pub status: String,
    pub axis: String,
    pub axis_value: f64,
    pub min_device_throughput: f64,
    /// Per-device throughputs joined with `;`.
    pub device_throughputs: String,
}

/// Scheme-independent view of a result.
struct Outcome {
    j: usize,
    throughput: f64,
    tau0: f64,
    harvested: f64,
    device_throughputs: Vec<f64>,
    outer_iters: usize,
    status: String,
}

impl Outcome {
    fn from_solution(sol: &Solution, s: &Scenario, j: usize) -> Self {
        if let Err(e) = sol.verify(s, 1e-6) {
            log::warn!("solution failed re-validation: {e}");
        }
        Self {
            j,
            throughput: sol.throughput,
            tau0: sol.alloc.tau0,
            harvested: sol.harvested_energy(s).iter().sum(),
            device_throughputs: sol.device_throughputs.clone(),
            outer_iters: sol.diagnostics.outer_iters,
            status: sol.diagnostics.status.as_str().to_string(),
        }
    }
}

/// Runs `scheme`. `Ok(None)` marks combinations that are skipped by design:
/// relaxations above the element cap and hybrid with more vectors than devices.
fn run_scheme(
    s: &Scenario,
    scheme: Scheme,
    j: usize,
    spec: &ExperimentSpec,
    opts: &ScaOptions,
) -> Result<Option<Outcome>> {
    let k = s.num_devices();
    let out = match scheme {
        Scheme::UpperBound => {
            if s.num_elements() > MAX_RELAXED_ELEMENTS {
                return Ok(None);
            }
            let ub = solve_relaxed(s, spec.sdr_tol)?;
            let per: Vec<f64> = (0..k)
                .map(|i| {
                    let t = ub.alloc.time[i].iter().sum::<f64>();
                    let e = ub.alloc.energy[i].iter().sum::<f64>();
                    let gain = irs_wpcn::channel::align_phases(s.direct[i], &s.cascaded[i]).1;
                    if t > 0.0 {
                        t * (1.0 + e * gain / (t * s.config.noise_power_w())).log2()
                    } else {
                        0.0
                    }
                })
                .collect();
            Outcome {
                j: k,
                throughput: ub.bound,
                tau0: ub.lifted.tau0,
                harvested: (0..k).map(|i| ub.alloc.device_energy(i)).sum(),
                device_throughputs: per,
                outer_iters: ub.report.iterations,
                status: format!("{:?}", ub.report.status).to_lowercase(),
            }
        }
        Scheme::UserAdaptiveSdr => {
            if s.num_elements() > MAX_RELAXED_ELEMENTS {
                return Ok(None);
            }
            let ub = solve_relaxed(s, spec.sdr_tol)?;
            let sol = gaussian_randomize(&ub.lifted, s, spec.sdr_samples)?;
            Outcome::from_solution(&sol, s, k)
        }
        Scheme::UserAdaptive => Outcome::from_solution(&solve_user_adaptive(s, opts)?, s, k),
        Scheme::UlAdaptive => Outcome::from_solution(&solve_static(s, opts)?, s, 1),
        Scheme::Static => Outcome::from_solution(&solve_static(s, opts)?, s, 0),
        Scheme::General => Outcome::from_solution(&solve_general(s, j, opts)?, s, j),
        Scheme::Hybrid => {
            if j > k {
                return Ok(None);
            }
            Outcome::from_solution(&solve_hybrid(s, j, opts)?, s, j)
        }
        Scheme::Random => Outcome::from_solution(&baseline_random_phases(s, spec.random_trials)?, s, 0),
        Scheme::NoIrs => Outcome::from_solution(&baseline_no_irs(s)?, &s.without_irs(), 0),
    };
    Ok(Some(out))
}

fn run_point(spec: &ExperimentSpec, base: &irs_wpcn::scenario::SystemConfig, value: f64, seed: u64) -> Result<Vec<ResultRow>> {
    let (cfg, j) = spec.point(base, value, seed)?;
    let s = generate_scenario(&cfg)?;
    // Restarts stay serial inside a work item; the sweep itself is parallel.
    let opts = ScaOptions {
        parallel: false,
        ..spec.solver.clone()
    };
    let mut rows = Vec::with_capacity(spec.schemes.len());
    for &scheme in &spec.schemes {
        let start = Instant::now();
        let Some(out) = run_scheme(&s, scheme, j, spec, &opts)? else {
            log::info!("skipping {scheme} at {}={value}", spec.axis.as_str());
            continue;
        };
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        rows.push(ResultRow {
            scheme: scheme.as_str().to_string(),
            seed,
            n: cfg.num_elements,
            k: cfg.num_devices,
            j: out.j,
            p_a_dbm: cfg.hap_power_dbm,
            throughput_bps_hz: out.throughput,
            tau0_s: out.tau0,
            harvested_energy_total_j: out.harvested,
            hap_energy_j: cfg.hap_power_w() * out.tau0,
            outer_iters: out.outer_iters,
            runtime_ms,
            status: out.status,
            axis: spec.axis.as_str().to_string(),
            axis_value: value,
            min_device_throughput: out.device_throughputs.iter().copied().fold(f64::INFINITY, f64::min),
            device_throughputs: out
                .device_throughputs
                .iter()
                .map(|x| format!("{x:.9e}"))
                .collect::<Vec<_>>()
                .join(";"),
        });
    }
    Ok(rows)
}

/// Runs every (axis value, seed) item, in parallel, and returns the rows in
/// spec order.
pub fn collect_rows(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let base = spec.base()?;
    let items: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let chunks: Vec<Result<Vec<ResultRow>>> =
        items.into_par_iter().map(|(v, seed)| run_point(spec, &base, v, seed)).collect();
    let mut rows = Vec::new();
    for c in chunks {
        rows.extend(c?);
    }
    Ok(rows)
}

/// Mean and sample standard deviation per (scheme, axis value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub axis: String,
    pub axis_value: f64,
    pub runs: usize,
    pub throughput_mean: f64,
    pub throughput_std: f64,
    pub tau0_mean: f64,
    pub tau0_std: f64,
    pub harvested_energy_mean: f64,
    pub harvested_energy_std: f64,
    pub hap_energy_mean: f64,
    pub min_device_throughput_mean: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by scheme then axis value, both in first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.scheme.clone(), r.axis_value.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order.sort_by_key(|(scheme, _)| rows.iter().position(|r| &r.scheme == scheme));
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let col = |f: fn(&ResultRow) -> f64| g.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (tm, ts) = mean_std(&col(|r| r.throughput_bps_hz));
            let (am, as_) = mean_std(&col(|r| r.tau0_s));
            let (em, es) = mean_std(&col(|r| r.harvested_energy_total_j));
            SummaryRow {
                scheme: key.0.clone(),
                axis: g[0].axis.clone(),
                axis_value: g[0].axis_value,
                runs: g.len(),
                throughput_mean: tm,
                throughput_std: ts,
                tau0_mean: am,
                tau0_std: as_,
                harvested_energy_mean: em,
                harvested_energy_std: es,
                hap_energy_mean: mean_std(&col(|r| r.hap_energy_j)).0,
                min_device_throughput_mean: mean_std(&col(|r| r.min_device_throughput)).0,
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(ExperimentError::from)).collect()
}

/// Runs the sweep and writes the result and summary files.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<(Vec<ResultRow>, Vec<SummaryRow>)> {
    let rows = collect_rows(spec)?;
    let summary = summarize(&rows);
    write_csv(&spec.output, &rows)?;
    write_csv(&spec.summary_path(), &summary)?;
    Ok((rows, summary))
}
