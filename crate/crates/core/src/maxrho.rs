//! The Max-ρ iteration: SDP solves at a fixed reflection magnitude
//! alternating with closed-form updates of `ρ`, followed by rank-one
//! extraction.
//!
//! All solves run on a rescaled copy of the problem: the direct channel is
//! normalized to unit norm with a unit SNR target, and the AP-IRS channel to
//! unit Frobenius norm. Both rescalings are exact and are undone before
//! anything is reported.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{align_phases, AlignOptions, Alignment};
use crate::channel::{cn_vector, ChannelSet};
use crate::conic::{self, SolveStatus, SolverOptions};
use crate::cx::{psd_sqrt, CMatrix, CVector, Hermitian};
use crate::error::Error;
use crate::lmi::{assemble_sdp, build_energy_lmi, build_snr_lmi, ConicProblem, EnergyLmiInputs, LmiForm, SnrLmiInputs};
use crate::oracle::{feasible_rho_interval, rho_max_energy, worst_case_incident_power, worst_case_snr};
use crate::params::{linear_to_db, SystemParams};

/// How `ρ` moves between SDP solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoUpdate {
    /// Jump to the energy boundary `ρ_max` of the current beamformer. Stops at
    /// the first point where the budget binds, which need not be optimal.
    Max,
    /// Midpoint of the interval of `ρ` on which the current beamformer stays
    /// feasible. The beamformer remains feasible at the new `ρ`, so the power
    /// cannot increase, and the interval closes onto the point where both
    /// constraints bind.
    #[default]
    Bracket,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmOptions {
    pub rho_init: f64,
    pub max_iters: usize,
    /// Stop when `ρ` moves less than this.
    pub stall_tol: f64,
    pub n_randomizations: usize,
    pub rho_update: RhoUpdate,
    /// Re-run the phase alignment every iteration (it has fixed inputs, so
    /// this only costs time).
    pub recompute_alignment: bool,
    pub lmi_form: LmiForm,
    /// Seed of the randomization stream.
    pub seed: u64,
    #[serde(skip)]
    pub align: AlignOptions,
}

impl Default for AlgorithmOptions {
    fn default() -> Self {
        Self {
            rho_init: 0.1,
            max_iters: 200,
            stall_tol: 1e-9,
            n_randomizations: 1000,
            rho_update: RhoUpdate::Bracket,
            recompute_alignment: false,
            lmi_form: LmiForm::Reduced,
            seed: 0,
            align: AlignOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// `Tr(W)` of the SDP solution, noise-normalized.
    pub trace_w: f64,
    /// Reflection magnitude the SDP was solved at.
    pub rho: f64,
    /// `‖w‖²` of the extracted beamformer.
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    Stalled,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    /// SDP solution of the last iteration.
    pub w_matrix: Hermitian,
    pub w: CVector,
    /// Reflection magnitude paired with `w`: the energy boundary of `w`.
    pub rho: f64,
    pub theta: CVector,
    pub kappa_m: f64,
    /// `‖w‖²`, noise-normalized.
    pub power: f64,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
    /// `λ₂ / λ₁` of `w_matrix`.
    pub rank_ratio: f64,
    pub stop: StopReason,
}

impl BeamformingSolution {
    pub fn power_db(&self) -> f64 {
        linear_to_db(self.power)
    }
}

/// `λ₂ / λ₁`; zero for a 1 x 1 or zero matrix.
pub fn rank_ratio(w: &Hermitian) -> f64 {
    let (vals, _) = w.eigh();
    let n = vals.len();
    if n < 2 || vals[n - 1] <= 0.0 {
        return 0.0;
    }
    vals[n - 2].max(0.0) / vals[n - 1]
}

/// Everything needed to evaluate both worst-case constraints for a candidate
/// beamformer at a fixed `ρ`.
#[derive(Debug, Clone)]
pub struct ExtractionContext<'a> {
    pub g: &'a CVector,
    pub hf_bar: &'a CMatrix,
    pub theta: &'a CVector,
    pub rho: f64,
    pub delta_f: f64,
    pub gamma1: f64,
    pub h_bar: &'a CMatrix,
    pub delta_h: f64,
    /// Worst-case incident power needed, `Nμ / (η(1 − ρ²))`; zero if the
    /// budget is vacuous.
    pub requirement: f64,
}

impl ExtractionContext<'_> {
    /// Smallest `s²` such that `s v` meets both worst cases, or `None` if no
    /// scaling can.
    pub fn min_scale_sq(&self, v: &CVector) -> Option<f64> {
        let snr = worst_case_snr(self.g, self.hf_bar, self.theta, self.rho, v, self.delta_f).ok()?.value;
        if !(snr > 0.0) {
            return None;
        }
        let mut s2 = self.gamma1 / snr;
        if self.requirement > 0.0 {
            let inc = worst_case_incident_power(self.h_bar, v, self.delta_h).ok()?.value;
            if !(inc > 0.0) {
                return None;
            }
            s2 = s2.max(self.requirement / inc);
        }
        s2.is_finite().then_some(s2)
    }
}

/// Beamformer from an SDP solution: the principal eigenvector when `W` is
/// numerically rank one, otherwise the cheapest of `n_rand` Gaussian
/// candidates `W^{1/2} ξ` (and the principal one), each scaled to
/// feasibility.
pub fn extract_rank_one(
    w: &Hermitian,
    ctx: &ExtractionContext<'_>,
    n_rand: usize,
    seed: u64,
) -> Result<CVector, Error> {
    let m = w.order();
    let (vals, vecs) = w.eigh();
    let lam1 = vals[m - 1].max(0.0);
    let principal: CVector = vecs.column(m - 1) * Complex64::from(lam1.sqrt());
    let scaled = |v: &CVector| ctx.min_scale_sq(v).map(|s2| v * Complex64::from(s2.max(1.0).sqrt()));

    if rank_ratio(w) <= 1e-6 {
        if let Some(v) = scaled(&principal) {
            return Ok(v);
        }
    }

    let root = psd_sqrt(w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, CVector)> = None;
    let mut consider = |v: CVector| {
        if let Some(s2) = ctx.min_scale_sq(&v) {
            let p = s2 * v.norm_squared();
            if best.as_ref().is_none_or(|(bp, _)| p < *bp) {
                best = Some((p, v * Complex64::from(s2.sqrt())));
            }
        }
    };
    consider(principal);
    for _ in 0..n_rand {
        consider(&root * cn_vector(&mut rng, m, 1.0));
    }
    best.map(|(_, v)| v).ok_or(Error::ExtractionFailure { draws: n_rand })
}

/// Rescaled copy of the channels. `W = scale · W̃`.
struct Scaled {
    scale: f64,
    g: CVector,
    hf: CMatrix,
    delta_f: f64,
    h: CMatrix,
    delta_h: f64,
    /// Scaled `Nμ`.
    budget: f64,
    eta: f64,
}

impl Scaled {
    fn new(ch: &ChannelSet, params: &SystemParams) -> Result<Self, Error> {
        let gn = ch.g.norm();
        if gn == 0.0 {
            return Err(Error::param("g", "direct channel must be nonzero"));
        }
        let hn = ch.h_bar.norm();
        if hn == 0.0 {
            return Err(Error::param("H", "AP-IRS channel must be nonzero"));
        }
        let scale = params.gamma1() / (gn * gn);
        let inv_g = Complex64::from(1.0 / gn);
        Ok(Self {
            scale,
            g: &ch.g * inv_g,
            hf: &ch.hf_bar * inv_g,
            delta_f: ch.delta_f / gn,
            h: &ch.h_bar * Complex64::from(1.0 / hn),
            delta_h: ch.delta_h / hn,
            budget: params.budget() / (scale * hn * hn),
            eta: params.eta,
        })
    }

    fn requirement(&self, rho: f64) -> f64 {
        if self.budget == 0.0 {
            0.0
        } else {
            self.budget / (self.eta * (1.0 - rho * rho))
        }
    }

    fn context<'a>(&'a self, theta: &'a CVector, rho: f64) -> ExtractionContext<'a> {
        ExtractionContext {
            g: &self.g,
            hf_bar: &self.hf,
            theta,
            rho,
            delta_f: self.delta_f,
            gamma1: 1.0,
            h_bar: &self.h,
            delta_h: self.delta_h,
            requirement: self.requirement(rho),
        }
    }

    /// Interval of `ρ` keeping `w` feasible under exact alignment.
    fn rho_interval(&self, w: &CVector, theta: &CVector, kappa_m: f64) -> Result<Option<(f64, f64)>, Error> {
        let gw = self.g.dotc(w).norm();
        let shrink = self.delta_f * theta.norm() * w.norm();
        let rho_hi = if self.budget == 0.0 {
            1.0
        } else {
            let inc = worst_case_incident_power(&self.h, w, self.delta_h)?.value;
            rho_max_energy(inc, self.budget, self.eta)?
        };
        Ok(feasible_rho_interval(gw, kappa_m, shrink, 1.0, rho_hi))
    }
}

fn problem_at(sc: &Scaled, al: &Alignment, rho: f64, form: LmiForm) -> Result<ConicProblem, Error> {
    let snr = build_snr_lmi(
        &SnrLmiInputs { g: &sc.g, theta: &al.theta, kappa_m: al.kappa_m, rho, delta_f: sc.delta_f, gamma1: 1.0 },
        form,
    )?;
    let energy = if sc.budget > 0.0 {
        Some(build_energy_lmi(
            &EnergyLmiInputs { h_bar: &sc.h, rho, delta_h: sc.delta_h, eta: sc.eta, budget: sc.budget },
            form,
        )?)
    } else {
        None
    };
    assemble_sdp(&snr, energy.as_ref(), sc.g.len())
}

/// The SDP solved at reflection magnitude `rho`, in the internal scaling.
/// Returns the problem and the factor `c` with `W = c · W̃`.
pub fn sdp_at(
    channels: &ChannelSet,
    params: &SystemParams,
    rho: f64,
    form: LmiForm,
    align: AlignOptions,
) -> Result<(ConicProblem, f64), Error> {
    params.validate()?;
    let sc = Scaled::new(channels, params)?;
    let al = align_phases(&channels.hf_bar, &channels.g, align)?;
    Ok((problem_at(&sc, &al, rho, form)?, sc.scale))
}

fn solve_at(sc: &Scaled, al: &Alignment, rho: f64, form: LmiForm, solver: &SolverOptions) -> Result<Hermitian, Error> {
    let problem = problem_at(sc, al, rho, form)?;
    let res = conic::solve(&problem, solver);
    match res.status {
        SolveStatus::Optimal => Ok(res.w),
        SolveStatus::Infeasible => Err(Error::Infeasible(format!("SDP infeasible at rho = {rho:.6}"))),
        SolveStatus::Unbounded => Err(Error::Numerical(format!("SDP reported unbounded at rho = {rho:.6}"))),
        SolveStatus::NumericalFailure => Err(Error::Numerical(format!(
            "no verified solution at rho = {rho:.6} after {} iterations (gap {:.2e})",
            res.stats.iterations, res.stats.duality_gap
        ))),
    }
}

/// Runs the Max-ρ iteration on one channel realization.
pub fn max_rho_solve(
    channels: &ChannelSet,
    params: &SystemParams,
    opts: &AlgorithmOptions,
    solver: &SolverOptions,
) -> Result<BeamformingSolution, Error> {
    params.validate()?;
    if channels.antennas() != params.antennas || channels.elements() != params.elements {
        return Err(Error::Dimension(format!(
            "channels are {}x{} but params say M = {}, N = {}",
            channels.antennas(),
            channels.elements(),
            params.antennas,
            params.elements
        )));
    }
    if !(opts.rho_init > 0.0 && opts.rho_init < 1.0) {
        return Err(Error::param("rho_init", format!("must lie in (0, 1), got {}", opts.rho_init)));
    }
    let sc = Scaled::new(channels, params)?;
    let mut al = align_phases(&channels.hf_bar, &channels.g, opts.align)?;

    let mut rho = opts.rho_init;
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut stop = StopReason::IterationCap;
    let mut last: Option<(Hermitian, CVector)> = None;

    for k in 0..opts.max_iters {
        if opts.recompute_alignment && k > 0 {
            al = align_phases(&channels.hf_bar, &channels.g, opts.align)?;
        }
        let w_mat = solve_at(&sc, &al, rho, opts.lmi_form, solver).map_err(|e| match e {
            Error::Infeasible(msg) if k == 0 => Error::Infeasible(format!("{msg} (initial point)")),
            other => other,
        })?;
        let ctx = sc.context(&al.theta, rho);
        let w = extract_rank_one(&w_mat, &ctx, opts.n_randomizations, opts.seed.wrapping_add(k as u64))?;
        let rec = TraceRecord { iter: k, trace_w: sc.scale * w_mat.trace(), rho, power: sc.scale * w.norm_squared() };
        let converged =
            trace.last().is_some_and(|p: &TraceRecord| (rec.trace_w - p.trace_w).abs() <= params.epsilon * p.trace_w);
        trace.push(rec);
        let interval = sc.rho_interval(&w, &al.theta, al.kappa_m)?;
        last = Some((w_mat, w));
        if converged {
            stop = StopReason::Converged;
            break;
        }

        let Some((lo, hi)) = interval else {
            return Err(Error::Infeasible(format!(
                "extracted beamformer has no feasible reflection magnitude near rho = {rho:.6}"
            )));
        };
        let next = if sc.budget == 0.0 {
            // Vacuous budget: the worst-case SNR amplitude is affine in ρ.
            let slope = al.kappa_m * sc.g.dotc(&last.as_ref().unwrap().1).norm()
                - sc.delta_f * al.theta.norm() * last.as_ref().unwrap().1.norm();
            if slope >= 0.0 {
                hi
            } else {
                lo
            }
        } else {
            match opts.rho_update {
                RhoUpdate::Max => hi,
                RhoUpdate::Bracket => 0.5 * (lo + hi),
            }
        };
        if (next - rho).abs() < opts.stall_tol {
            stop = StopReason::Stalled;
            break;
        }
        rho = next;
    }

    let (w_matrix, w_scaled) = last.expect("at least one iteration runs");
    // Final step to the energy boundary of the extracted beamformer.
    let rho_final = match sc.rho_interval(&w_scaled, &al.theta, al.kappa_m)? {
        Some((_, hi)) => hi,
        None => rho,
    };
    let root = Complex64::from(sc.scale.sqrt());
    let w = &w_scaled * root;
    let power = w.norm_squared();
    Ok(BeamformingSolution {
        rank_ratio: rank_ratio(&w_matrix),
        w_matrix: Hermitian::from_parts_unchecked(w_matrix.into_matrix() * Complex64::from(sc.scale)),
        w,
        rho: rho_final,
        theta: al.theta,
        kappa_m: al.kappa_m,
        power,
        iterations: trace.len(),
        trace,
        stop,
    })
}

/// Worst-case margins of a solution, from the closed-form oracles alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionCheck {
    /// Worst-case SNR over `γ₁`.
    pub snr_ratio: f64,
    /// Worst-case harvested power over `Nμ`; infinite for a vacuous budget.
    pub energy_ratio: f64,
}

impl SolutionCheck {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.snr_ratio >= 1.0 - rel_tol && self.energy_ratio >= 1.0 - rel_tol
    }
}

pub fn check_solution(
    sol: &BeamformingSolution,
    channels: &ChannelSet,
    params: &SystemParams,
) -> Result<SolutionCheck, Error> {
    let snr = worst_case_snr(&channels.g, &channels.hf_bar, &sol.theta, sol.rho, &sol.w, channels.delta_f)?.value;
    let energy_ratio = if params.budget() == 0.0 {
        f64::INFINITY
    } else {
        let inc = worst_case_incident_power(&channels.h_bar, &sol.w, channels.delta_h)?.value;
        params.eta * (1.0 - sol.rho * sol.rho) * inc / params.budget()
    };
    Ok(SolutionCheck { snr_ratio: snr / params.gamma1(), energy_ratio })
}

/// Relative slack `|η(1 − ρ²) P_wc − Nμ| / (Nμ)` of the budget constraint;
/// `None` when the budget is vacuous.
pub fn check_energy_activity(
    sol: &BeamformingSolution,
    channels: &ChannelSet,
    params: &SystemParams,
) -> Result<Option<f64>, Error> {
    let budget = params.budget();
    if budget == 0.0 {
        return Ok(None);
    }
    let inc = worst_case_incident_power(&channels.h_bar, &sol.w, channels.delta_h)?.value;
    Ok(Some((params.eta * (1.0 - sol.rho * sol.rho) * inc - budget).abs() / budget))
}
