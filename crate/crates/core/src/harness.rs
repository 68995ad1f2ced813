//! Experiment runner: JSON configuration, single runs with convergence
//! traces, multi-trial parameter sweeps and the built-in cross-checks.
//!
//! Trial `i` at sweep point `j` draws its channels from
//! `trial_seed(base, i, j)`, a SplitMix64 mix of the three integers. The
//! derivation is part of the output contract and must not change.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{cn_matrix, cn_vector, generate_channels, sample_perturbation, ChannelSet, Topology};
use crate::conic::SolverOptions;
use crate::cx::{CVector, Hermitian};
use crate::error::Error;
use crate::lmi::{build_energy_lmi, build_snr_lmi, EnergyLmiInputs, LmiForm, SnrLmiInputs};
use crate::maxrho::{check_solution, max_rho_solve, AlgorithmOptions, BeamformingSolution};
use crate::oracle::{incident_power_at, snr_at, worst_case_incident_power, worst_case_snr};
use crate::params::{linear_to_db, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "N")]
    Elements,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "gamma1")]
    Gamma1,
    #[serde(rename = "M")]
    Antennas,
}

impl SweepAxis {
    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &SystemParams, value: f64) -> Result<SystemParams, Error> {
        let mut p = base.clone();
        let count = |field: &'static str| {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::param(field, format!("sweep value {value} is not a positive integer")))
            }
        };
        match self {
            SweepAxis::Elements => p.elements = count("N")?,
            SweepAxis::Antennas => p.antennas = count("M")?,
            SweepAxis::Beta => p.beta = value,
            SweepAxis::Gamma1 => p.gamma1_db = value,
        }
        p.validate()?;
        Ok(p)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "N" => Ok(SweepAxis::Elements),
            "beta" => Ok(SweepAxis::Beta),
            "gamma1" => Ok(SweepAxis::Gamma1),
            "M" => Ok(SweepAxis::Antennas),
            other => Err(Error::param("sweep.axis", format!("unknown axis `{other}` (use N, beta, gamma1 or M)"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Elements => "N",
            SweepAxis::Beta => "beta",
            SweepAxis::Gamma1 => "gamma1",
            SweepAxis::Antennas => "M",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub system: SystemParams,
    pub topology: Topology,
    pub solver: SolverOptions,
    pub algorithm: AlgorithmOptions,
    pub sweep: Option<SweepSpec>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let cfg: Config = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter { field: "config", reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter { field: "config", reason: format!("{}: {e}", path.display()) })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.system.validate()?;
        self.topology.validate()?;
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return Err(Error::param("solver.tol", "must lie in (0, 1)"));
        }
        if !(self.solver.verify_tol >= self.solver.tol) {
            return Err(Error::param("solver.verify_tol", "must not be stricter than solver.tol"));
        }
        let a = &self.algorithm;
        if !(a.rho_init > 0.0 && a.rho_init < 1.0) {
            return Err(Error::param("algorithm.rho_init", "must lie in (0, 1)"));
        }
        if a.max_iters == 0 {
            return Err(Error::param("algorithm.max_iters", "must be positive"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::param("sweep.values", "must be nonempty"));
            }
            for &v in &s.values {
                s.axis.apply(&self.system, v)?;
            }
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sweep point `point`.
pub fn trial_seed(base: u64, trial: u64, point: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ trial) ^ point.rotate_left(32))
}

/// One full run on the channels drawn from `seed`.
pub fn run_single(cfg: &Config, seed: u64) -> Result<(ChannelSet, BeamformingSolution), Error> {
    let ch = generate_channels(&cfg.system, &cfg.topology, seed)?;
    let opts = AlgorithmOptions { seed, ..cfg.algorithm };
    let sol = max_rho_solve(&ch, &cfg.system, &opts, &cfg.solver)?;
    Ok((ch, sol))
}

pub const TRACE_HEADER: [&str; 4] = ["iter", "trace_W", "rho", "power_db"];
pub const SWEEP_HEADER: [&str; 6] =
    ["axis_value", "power_db_mean", "power_db_std", "rho_mean", "iters_mean", "infeasible_count"];

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter { field: "output", reason: e.to_string() }
}

pub fn write_trace_csv<W: Write>(out: W, sol: &BeamformingSolution) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in &sol.trace {
        w.write_record([
            r.iter.to_string(),
            format!("{:.10e}", r.trace_w),
            format!("{:.10}", r.rho),
            format!("{:.8}", linear_to_db(r.power)),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidParameter { field: "output", reason: e.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub power_db_mean: f64,
    pub power_db_std: f64,
    pub rho_mean: f64,
    pub iters_mean: f64,
    /// Trials without a returned solution, for any reason.
    pub infeasible_count: usize,
    /// Of those, the ones caused by solver breakdown rather than infeasibility.
    pub numerical_failures: usize,
    /// Returned solutions that fail an independent worst-case oracle check.
    pub oracle_violations: usize,
    pub trials: usize,
}

/// Summary of one successful trial.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TrialOutcome {
    power_db: f64,
    rho: f64,
    iters: f64,
    sound: bool,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Averages over `trials` channel draws at every value of `axis`. Failed
/// trials are counted, not fatal. Runs trials in parallel; the result does not
/// depend on scheduling.
pub fn run_sweep(cfg: &Config, axis: SweepAxis, values: &[f64], trials: usize) -> Result<Vec<SweepPoint>, Error> {
    if values.is_empty() {
        return Err(Error::param("sweep.values", "must be nonempty"));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be positive"));
    }
    let params: Vec<SystemParams> = values.iter().map(|&v| axis.apply(&cfg.system, v)).collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..values.len()).flat_map(|j| (0..trials).map(move |i| (j, i))).collect();
    let mut results: Vec<((usize, usize), Result<TrialOutcome, Error>)> = jobs
        .par_iter()
        .map(|&(j, i)| {
            let seed = trial_seed(cfg.system.seed, i as u64, j as u64);
            let point = Config { system: params[j].clone(), ..cfg.clone() };
            let out = run_single(&point, seed).and_then(|(ch, s)| {
                Ok(TrialOutcome {
                    power_db: s.power_db(),
                    rho: s.rho,
                    iters: s.iterations as f64,
                    sound: check_solution(&s, &ch, &point.system)?.passes(1e-6),
                })
            });
            ((j, i), out)
        })
        .collect();
    results.sort_by_key(|(k, _)| *k);

    Ok(values
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let here: Vec<&Result<TrialOutcome, Error>> =
                results.iter().filter(|((jj, _), _)| *jj == j).map(|(_, r)| r).collect();
            let ok: Vec<TrialOutcome> = here.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
            let numerical = here.iter().filter(|r| matches!(r, Err(e) if e.is_numerical())).count();
            let (pm, ps) = mean_std(&ok.iter().map(|o| o.power_db).collect::<Vec<_>>());
            SweepPoint {
                axis_value: v,
                power_db_mean: pm,
                power_db_std: ps,
                rho_mean: mean_std(&ok.iter().map(|o| o.rho).collect::<Vec<_>>()).0,
                iters_mean: mean_std(&ok.iter().map(|o| o.iters).collect::<Vec<_>>()).0,
                infeasible_count: trials - ok.len(),
                numerical_failures: numerical,
                oracle_violations: ok.iter().filter(|o| !o.sound).count(),
                trials,
            }
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(out: W, points: &[SweepPoint]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for p in points {
        w.write_record([
            format!("{}", p.axis_value),
            format!("{:.8}", p.power_db_mean),
            format!("{:.8}", p.power_db_std),
            format!("{:.8}", p.rho_mean),
            format!("{:.4}", p.iters_mean),
            p.infeasible_count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidParameter { field: "output", reason: e.to_string() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Cross-checks of the oracles and LMI blocks on small random instances
/// (`M = 2`, `N = 3`), plus one end-to-end solve at the configured size.
pub fn self_check(cfg: &Config) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.system.seed);
    let (m, n) = (2, 3);
    let instances = 20;
    let mut out = Vec::new();

    let mut snr_bad = 0;
    let mut energy_bad = 0;
    let mut sampled_bad = 0;
    let mut compared = 0;
    for _ in 0..instances {
        let g = cn_vector(&mut rng, m, 1.0);
        let hf = cn_matrix(&mut rng, m, n, 0.5);
        let h = cn_matrix(&mut rng, m, n, 1.0);
        let theta = CVector::from_fn(n, |_, _| {
            num_complex::Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
        });
        let w = cn_vector(&mut rng, m, 1.0);
        let rho: f64 = rng.random_range(0.05..0.95);
        let delta_f = 0.3 * hf.norm() * rng.random::<f64>();
        let delta_h = 0.3 * h.norm() * rng.random::<f64>();

        let Ok(snr) = worst_case_snr(&g, &hf, &theta, rho, &w, delta_f) else {
            snr_bad += 1;
            continue;
        };
        let Ok(inc) = worst_case_incident_power(&h, &w, delta_h) else {
            energy_bad += 1;
            continue;
        };
        // Thresholds placed just off the worst case, on a random side.
        let side = if rng.random::<bool>() { 1.05 } else { 0.95 };
        let gamma1 = snr.value * side;
        let eta = 0.8;
        let budget = inc.value * eta * (1.0 - rho * rho) / side;
        if gamma1 <= 0.0 || budget <= 0.0 {
            continue;
        }
        compared += 1;

        // The S-procedure multiplier bound assumes the aligned direct
        // channel, so use the exact SNR expression through the full block.
        let kappa = 0.0;
        let g_eff = &g + (&hf * &theta) * num_complex::Complex64::from(rho);
        let snr_block = build_snr_lmi(
            &SnrLmiInputs { g: &g_eff, theta: &theta, kappa_m: kappa, rho, delta_f, gamma1 },
            LmiForm::Full,
        );
        let energy_block = build_energy_lmi(&EnergyLmiInputs { h_bar: &h, rho, delta_h, eta, budget }, LmiForm::Full);
        let wm = Hermitian::outer(&w);
        let want = side > 1.0;
        let got_snr = snr_block.ok().map(|b| b.best_multiplier(&wm).1 >= 0.0);
        let got_energy = energy_block.ok().map(|b| b.best_multiplier(&wm).1 >= 0.0);
        // SNR: feasible iff γ₁ below the worst case (side < 1).
        if got_snr != Some(!want) {
            snr_bad += 1;
        }
        // Energy: feasible iff requirement below the worst case (side > 1).
        if got_energy != Some(want) {
            energy_bad += 1;
        }
        for _ in 0..200 {
            let d = sample_perturbation(delta_f, m, n, true, &mut rng);
            if snr_at(&g, &hf, &theta, rho, &w, &d) < snr.value * (1.0 - 1e-9) - 1e-12 {
                sampled_bad += 1;
            }
            let e = sample_perturbation(delta_h, m, n, true, &mut rng);
            if incident_power_at(&h, &w, &e) < inc.value * (1.0 - 1e-9) - 1e-12 {
                sampled_bad += 1;
            }
        }
    }
    out.push(CheckOutcome {
        name: "snr-lmi-vs-oracle",
        passed: snr_bad == 0,
        detail: format!("{snr_bad} disagreements over {compared} instances"),
    });
    out.push(CheckOutcome {
        name: "energy-lmi-vs-oracle",
        passed: energy_bad == 0,
        detail: format!("{energy_bad} disagreements over {compared} instances"),
    });
    out.push(CheckOutcome {
        name: "oracle-vs-sampling",
        passed: sampled_bad == 0,
        detail: format!("{sampled_bad} sampled perturbations beat the closed form"),
    });

    let e2e = run_single(cfg, cfg.system.seed).and_then(|(ch, sol)| {
        let chk = check_solution(&sol, &ch, &cfg.system)?;
        Ok((chk, sol))
    });
    out.push(match e2e {
        Ok((chk, sol)) => CheckOutcome {
            name: "end-to-end",
            passed: chk.passes(1e-6),
            detail: format!(
                "M={} N={}: {} iterations, {:.3} dB, SNR margin {:.3e}, energy margin {:.3e}",
                cfg.system.antennas,
                cfg.system.elements,
                sol.iterations,
                sol.power_db(),
                chk.snr_ratio - 1.0,
                chk.energy_ratio - 1.0
            ),
        },
        Err(e) => CheckOutcome { name: "end-to-end", passed: false, detail: e.to_string() },
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_defaults() {
        let cfg = Config::from_json("{}").unwrap();
        assert_eq!(cfg, Config::default());
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn config_errors_name_the_field() {
        let err = Config::from_json(r#"{"system": {"eta": 1.5}}"#).unwrap_err();
        assert!(err.to_string().contains("eta"), "{err}");
        let err = Config::from_json(r#"{"system": {"bogus": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = Config::from_json(r#"{"sweep": {"axis": "N", "values": [20, 2.5]}}"#).unwrap_err();
        assert!(err.to_string().contains("N"), "{err}");
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(trial_seed(2020, 0, 0), trial_seed(2020, 0, 0));
        let mut seen = std::collections::HashSet::new();
        for i in 0..20 {
            for j in 0..20 {
                assert!(seen.insert(trial_seed(7, i, j)));
            }
        }
        // Pinned so that a change in derivation is caught.
        assert_eq!(trial_seed(0, 0, 0), 0x2382_75bc_38fc_be91);
        assert_eq!(trial_seed(2020, 3, 4), 0x8125_9305_1e4a_2e9e);
    }

    #[test]
    fn axis_parsing() {
        assert_eq!("N".parse::<SweepAxis>().unwrap(), SweepAxis::Elements);
        assert_eq!("gamma1".parse::<SweepAxis>().unwrap().to_string(), "gamma1");
        assert!("rho".parse::<SweepAxis>().is_err());
        let p = SweepAxis::Gamma1.apply(&SystemParams::default(), 25.0).unwrap();
        assert_eq!(p.gamma1_db, 25.0);
    }
}
