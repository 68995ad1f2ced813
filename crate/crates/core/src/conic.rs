//! Solving the realified SDPs.
//!
//! The problems built by [`crate::lmi`] have very few scalar variables (the
//! `M²` coordinates of `W` plus two multipliers) and comparatively large
//! matrix blocks. The native backend is therefore a primal-dual
//! interior-point method on the LMI ("dual") form
//!
//! ```text
//! minimize cᵀy   subject to   Z(y) = F₀ + Σ_j y_j F_j ⪰ 0
//! ```
//!
//! paired with its conic dual `max −⟨F₀, X⟩ s.t. ⟨F_j, X⟩ = c_j, X ⪰ 0`. Search
//! directions use the HKM scaling with a Mehrotra predictor-corrector, so each
//! iteration only factors the `m x m` Schur complement.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cx::{min_eig_real, Hermitian, RMatrix};
use crate::lmi::ConicProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverStats {
    pub iterations: usize,
    /// `⟨X, Z⟩` relative to the objective magnitudes.
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicResult {
    pub status: SolveStatus,
    /// Full variable vector (coordinates of `W`, then `t`, `τ`).
    pub y: Vec<f64>,
    pub w: Hermitian,
    pub t: f64,
    pub tau: f64,
    pub objective: f64,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Built-in HKM predictor-corrector.
    #[default]
    Ipm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Feasibility and relative-gap tolerance.
    pub tol: f64,
    /// Tolerance for the independent PSD check of returned solutions.
    pub verify_tol: f64,
    pub max_iters: usize,
    pub backend: Backend,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, verify_tol: 1e-7, max_iters: 100, backend: Backend::Ipm }
    }
}

/// Anything that can solve a [`ConicProblem`]; implementations only report
/// the raw variable vector and status, verification happens in [`solve`].
pub trait ConicBackend {
    fn solve_raw(&self, problem: &ConicProblem, opts: &SolverOptions) -> (SolveStatus, Vec<f64>, SolverStats);
}

/// Solves and independently verifies the solution: an `optimal` status is
/// downgraded to `numerical-failure` if any block fails the eigenvalue check.
pub fn solve(problem: &ConicProblem, opts: &SolverOptions) -> ConicResult {
    let backend: &dyn ConicBackend = match opts.backend {
        Backend::Ipm => &HkmIpm,
    };
    let (mut status, y, stats) = backend.solve_raw(problem, opts);
    if status == SolveStatus::Optimal && !verify(problem, &y, opts.verify_tol) {
        status = SolveStatus::NumericalFailure;
    }
    let objective = problem.objective.iter().zip(&y).map(|(c, v)| c * v).sum();
    let w = problem.beamforming_matrix(&y);
    ConicResult { status, t: y[problem.t_index()], tau: y[problem.tau_index()], y, w, objective, stats }
}

/// Checks every block and every sign constraint at `y`, relative to block
/// magnitude.
pub fn verify(problem: &ConicProblem, y: &[f64], tol: f64) -> bool {
    if y.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = 1.0 + y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if problem.nonneg.iter().any(|&j| y[j] < -tol * scale) {
        return false;
    }
    problem.lmis.iter().all(|lmi| {
        let z = lmi.evaluate(y);
        let mag = 1.0 + z.amax();
        min_eig_real(&z) >= -tol * mag
    })
}

/// One symmetric block of the stacked LMI `F₀ + Σ y_j F_j`.
struct Block {
    f0: RMatrix,
    terms: Vec<(usize, RMatrix)>,
}

fn blocks_of(problem: &ConicProblem) -> Vec<Block> {
    let mut out: Vec<Block> = problem
        .nonneg
        .iter()
        .map(|&j| Block { f0: RMatrix::zeros(1, 1), terms: vec![(j, RMatrix::identity(1, 1))] })
        .collect();
    out.extend(problem.lmis.iter().map(|l| Block { f0: l.constant.clone(), terms: l.terms.clone() }));
    out
}

fn inner(a: &RMatrix, b: &RMatrix) -> f64 {
    a.dot(b)
}

fn sym(a: RMatrix) -> RMatrix {
    let t = a.transpose();
    (a + t) * 0.5
}

fn chol_inverse(a: &RMatrix) -> Option<RMatrix> {
    Cholesky::new(a.clone()).map(|c| c.inverse())
}

/// Largest step `α ≤ 1/γ` keeping `x + α dx ⪰ 0`, given `x ≻ 0`.
fn max_step(x: &RMatrix, dx: &RMatrix) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else { return 0.0 };
    let l = ch.l();
    let Some(linv) = l.clone().try_inverse() else { return 0.0 };
    let m = &linv * dx * linv.transpose();
    let lam = SymmetricEigen::new(sym(m)).eigenvalues.min();
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

/// Native primal-dual interior-point backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct HkmIpm;

struct State {
    y: DVector<f64>,
    x: Vec<RMatrix>,
    z: Vec<RMatrix>,
}

impl HkmIpm {
    fn z_of(blocks: &[Block], y: &DVector<f64>) -> Vec<RMatrix> {
        blocks
            .iter()
            .map(|b| {
                let mut acc = b.f0.clone();
                for (j, f) in &b.terms {
                    acc += f * y[*j];
                }
                acc
            })
            .collect()
    }
}

impl ConicBackend for HkmIpm {
    fn solve_raw(&self, problem: &ConicProblem, opts: &SolverOptions) -> (SolveStatus, Vec<f64>, SolverStats) {
        let m = problem.num_vars();
        let blocks = blocks_of(problem);
        let c = DVector::from_column_slice(&problem.objective);
        let norm_c = c.norm();
        let norm_f0 = blocks.iter().map(|b| b.f0.norm_squared()).sum::<f64>().sqrt();
        let total_dim: usize = blocks.iter().map(|b| b.f0.nrows()).sum();

        // Scaled-identity start in the spirit of SDPT3's default.
        let max_fj = blocks.iter().flat_map(|b| b.terms.iter().map(|(_, f)| f.norm())).fold(0.0f64, f64::max);
        let mut st =
            State { y: DVector::zeros(m), x: Vec::with_capacity(blocks.len()), z: Vec::with_capacity(blocks.len()) };
        for b in &blocks {
            let n = b.f0.nrows();
            let sn = (n as f64).sqrt();
            let xi = 10f64.max(sn).max(n as f64 * (1.0 + c.amax()) / (1.0 + max_fj));
            let et = 10f64.max(sn).max(max_fj).max(b.f0.norm());
            st.x.push(RMatrix::identity(n, n) * xi);
            st.z.push(RMatrix::identity(n, n) * et);
        }

        let mut stats = SolverStats::default();
        for iter in 0..opts.max_iters {
            stats.iterations = iter;
            let fy = Self::z_of(&blocks, &st.y);
            // Residuals: R_d = F(y) − Z, r_p = c − A(X).
            let rd: Vec<RMatrix> = fy.iter().zip(&st.z).map(|(f, z)| f - z).collect();
            let mut rp = c.clone();
            for (b, x) in blocks.iter().zip(&st.x) {
                for (j, f) in &b.terms {
                    rp[*j] -= inner(f, x);
                }
            }
            let pobj = c.dot(&st.y);
            let dobj = -blocks.iter().zip(&st.x).map(|(b, x)| inner(&b.f0, x)).sum::<f64>();
            let xz: f64 = st.x.iter().zip(&st.z).map(|(x, z)| inner(x, z)).sum();
            let mu = xz / total_dim as f64;

            let rd_norm = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt();
            stats.duality_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            stats.primal_residual = rp.norm() / (1.0 + norm_c);
            stats.dual_residual = rd_norm / (1.0 + norm_f0);

            if stats.duality_gap <= opts.tol && stats.primal_residual <= opts.tol && stats.dual_residual <= opts.tol {
                return (SolveStatus::Optimal, st.y.iter().copied().collect(), stats);
            }
            if !pobj.is_finite() || !dobj.is_finite() {
                return (SolveStatus::NumericalFailure, st.y.iter().copied().collect(), stats);
            }

            // Farkas rays: X / ⟨−F₀, X⟩ certifies that no y makes F(y) ⪰ 0, and
            // y / (−cᵀy) is a recession direction with negative cost.
            if dobj > 0.0 && (&c - &rp).norm() <= opts.tol * dobj {
                return (SolveStatus::Infeasible, st.y.iter().copied().collect(), stats);
            }
            if pobj < 0.0 && norm_f0 + rd_norm <= opts.tol * -pobj {
                return (SolveStatus::Unbounded, st.y.iter().copied().collect(), stats);
            }

            let zinv: Vec<RMatrix> = match st.z.iter().map(chol_inverse).collect::<Option<Vec<_>>>() {
                Some(v) => v,
                None => return (SolveStatus::NumericalFailure, st.y.iter().copied().collect(), stats),
            };

            // Schur complement S_ij = ⟨F_i, Z⁻¹ F_j X⟩, block by block.
            let mut schur = DMatrix::<f64>::zeros(m, m);
            let mut g_blocks: Vec<Vec<(usize, RMatrix)>> = Vec::with_capacity(blocks.len());
            for (k, b) in blocks.iter().enumerate() {
                let gs: Vec<(usize, RMatrix)> = b.terms.iter().map(|(j, f)| (*j, &zinv[k] * f * &st.x[k])).collect();
                for (i, fi) in &b.terms {
                    for (j, gj) in &gs {
                        schur[(*i, *j)] += inner(fi, gj);
                    }
                }
                g_blocks.push(gs);
            }
            let schur = sym(schur);
            let Some(schur_chol) = Cholesky::new(schur.clone()).or_else(|| {
                let reg = 1e-14 * (1.0 + schur.diagonal().amax());
                Cholesky::new(schur + DMatrix::identity(m, m) * reg)
            }) else {
                return (SolveStatus::NumericalFailure, st.y.iter().copied().collect(), stats);
            };

            // Direction for a complementarity target `comp` per block:
            //   ΔX = sym(Z⁻¹ comp) − X − sym(Z⁻¹ ΔZ X),   ΔZ = R_d + Σ Δy_j F_j.
            let direction = |comp: &[RMatrix]| -> (DVector<f64>, Vec<RMatrix>, Vec<RMatrix>) {
                let mut rhs = -rp.clone();
                let base: Vec<RMatrix> =
                    (0..blocks.len()).map(|k| &zinv[k] * &comp[k] - &st.x[k] - &zinv[k] * &rd[k] * &st.x[k]).collect();
                for (k, b) in blocks.iter().enumerate() {
                    for (j, f) in &b.terms {
                        rhs[*j] += inner(f, &base[k]);
                    }
                }
                let dy = schur_chol.solve(&rhs);
                let mut dz = Vec::with_capacity(blocks.len());
                let mut dx = Vec::with_capacity(blocks.len());
                for (k, b) in blocks.iter().enumerate() {
                    let mut dzk = rd[k].clone();
                    let mut corr = base[k].clone();
                    for ((j, f), (_, g)) in b.terms.iter().zip(&g_blocks[k]) {
                        dzk += f * dy[*j];
                        corr -= g * dy[*j];
                    }
                    dz.push(dzk);
                    dx.push(sym(corr));
                }
                (dy, dx, dz)
            };

            let step_len = |dx: &[RMatrix], dz: &[RMatrix]| -> (f64, f64) {
                let ap = st.x.iter().zip(dx).map(|(x, d)| max_step(x, d)).fold(f64::INFINITY, f64::min);
                let ad = st.z.iter().zip(dz).map(|(z, d)| max_step(z, d)).fold(f64::INFINITY, f64::min);
                (ap, ad)
            };

            // Predictor.
            let zero_comp: Vec<RMatrix> = st.x.iter().map(|x| RMatrix::zeros(x.nrows(), x.nrows())).collect();
            let (_, dx_a, dz_a) = direction(&zero_comp);
            let (ap, ad) = step_len(&dx_a, &dz_a);
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let mu_aff: f64 =
                st.x.iter()
                    .zip(&dx_a)
                    .zip(st.z.iter().zip(&dz_a))
                    .map(|((x, dx), (z, dz))| inner(&(x + dx * ap), &(z + dz * ad)))
                    .sum::<f64>()
                    / total_dim as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // Corrector with the second-order term.
            let comp: Vec<RMatrix> = (0..blocks.len())
                .map(|k| {
                    let n = st.x[k].nrows();
                    RMatrix::identity(n, n) * (sigma * mu) - &dz_a[k] * &dx_a[k]
                })
                .collect();
            let (dy, dx, dz) = direction(&comp);
            let (ap, ad) = step_len(&dx, &dz);
            let gamma = 0.95;
            let (ap, ad) = ((gamma * ap).min(1.0), (gamma * ad).min(1.0));
            if ap < 1e-12 && ad < 1e-12 {
                return (SolveStatus::NumericalFailure, st.y.iter().copied().collect(), stats);
            }
            st.y += dy * ad;
            for k in 0..blocks.len() {
                st.x[k] = sym(&st.x[k] + &dx[k] * ap);
                st.z[k] = sym(&st.z[k] + &dz[k] * ad);
            }
        }
        stats.iterations = opts.max_iters;
        (SolveStatus::NumericalFailure, st.y.iter().copied().collect(), stats)
    }
}

/// Writes a problem in SDPA sparse format. SDPA minimizes `Σ c_i x_i` subject
/// to `Σ F_i x_i − F₀ ⪰ 0`, so the constant block is negated; the sign
/// constraints become one diagonal (LP) block listed first.
pub fn to_sdpa(problem: &ConicProblem) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let m = problem.num_vars();
    let _ = writeln!(s, "\"robust IRS beamforming SDP: {} antennas\"", problem.antennas);
    let _ = writeln!(s, "{m}");
    let _ = writeln!(s, "{}", problem.lmis.len() + 1);
    let mut sizes = vec![format!("-{}", problem.nonneg.len())];
    sizes.extend(problem.lmis.iter().map(|l| l.order().to_string()));
    let _ = writeln!(s, "{}", sizes.join(" "));
    let c: Vec<String> = problem.objective.iter().map(|v| format!("{v:.17e}")).collect();
    let _ = writeln!(s, "{}", c.join(" "));
    for (pos, &j) in problem.nonneg.iter().enumerate() {
        let _ = writeln!(s, "{} 1 {} {} {:.17e}", j + 1, pos + 1, pos + 1, 1.0);
    }
    for (b, lmi) in problem.lmis.iter().enumerate() {
        let blk = b + 2;
        let mut emit = |mat: usize, f: &RMatrix, sign: f64| {
            for jj in 0..f.ncols() {
                for ii in 0..=jj {
                    let v = f[(ii, jj)] * sign;
                    if v != 0.0 {
                        let _ = writeln!(s, "{mat} {blk} {} {} {v:.17e}", ii + 1, jj + 1);
                    }
                }
            }
        };
        emit(0, &lmi.constant, -1.0);
        for (j, f) in &lmi.terms {
            emit(j + 1, f, 1.0);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cx::CMatrix;
    use crate::lmi::{hermitian_basis, RealLmi};
    use num_complex::Complex64;

    /// minimize x s.t. [[x, 1], [1, x]] ⪰ 0, with the padding variables the
    /// problem layout expects held at zero by a trivial block.
    #[test]
    fn two_by_two_boundary() {
        let lmi = RealLmi {
            name: "toy".into(),
            constant: RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            terms: vec![(0, RMatrix::identity(2, 2))],
        };
        // One antenna: variables (W₁₁, t, τ).
        let p = ConicProblem { antennas: 1, objective: vec![1.0, 1.0, 1.0], nonneg: vec![1, 2], lmis: vec![lmi] };
        let r = solve(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.y[0] - 1.0).abs() < 1e-7, "{:?}", r.y);
        assert!(r.y[1].abs() < 1e-7 && r.y[2].abs() < 1e-7);
    }

    /// minimize Tr(W) s.t. W ⪰ I_M.
    #[test]
    fn trace_above_identity() {
        for m in 1..=3 {
            let basis = hermitian_basis(m);
            let lmi = RealLmi {
                name: "w-minus-i".into(),
                constant: -RMatrix::identity(2 * m, 2 * m),
                terms: basis.iter().enumerate().map(|(k, e)| (k, crate::cx::realify(e))).collect(),
            };
            let mut objective = vec![0.0; m * m + 2];
            objective[..m].iter_mut().for_each(|c| *c = 1.0);
            objective[m * m] = 1.0;
            objective[m * m + 1] = 1.0;
            let p = ConicProblem { antennas: m, objective, nonneg: vec![m * m, m * m + 1], lmis: vec![lmi] };
            let r = solve(&p, &SolverOptions::default());
            assert_eq!(r.status, SolveStatus::Optimal);
            assert!((r.objective - m as f64).abs() < 1e-6, "m={m}: {}", r.objective);
            let diff = r.w.matrix() - CMatrix::identity(m, m);
            assert!(diff.iter().all(|z| (*z - Complex64::new(0.0, 0.0)).norm() < 1e-6));
        }
    }

    #[test]
    fn detects_infeasible_lmi() {
        // [[-1 + 0 y]] ⪰ 0 is infeasible for every y.
        let lmi = RealLmi {
            name: "neg".into(),
            constant: RMatrix::from_element(1, 1, -1.0),
            terms: vec![(0, RMatrix::zeros(1, 1))],
        };
        let p = ConicProblem { antennas: 1, objective: vec![1.0, 0.0, 0.0], nonneg: vec![0, 1, 2], lmis: vec![lmi] };
        let r = solve(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded_objective() {
        // minimize -W₁₁ subject to W₁₁ ⪰ 0.
        let lmi =
            RealLmi { name: "w".into(), constant: RMatrix::zeros(1, 1), terms: vec![(0, RMatrix::identity(1, 1))] };
        let p = ConicProblem { antennas: 1, objective: vec![-1.0, 0.0, 0.0], nonneg: vec![1, 2], lmis: vec![lmi] };
        let r = solve(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Unbounded);
    }

    #[test]
    fn sdpa_header() {
        let lmi = RealLmi {
            name: "toy".into(),
            constant: RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            terms: vec![(0, RMatrix::identity(2, 2))],
        };
        let p = ConicProblem { antennas: 1, objective: vec![1.0, 0.0, 0.0], nonneg: vec![1, 2], lmis: vec![lmi] };
        let text = to_sdpa(&p);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "3");
        assert_eq!(lines[2], "2");
        assert_eq!(lines[3], "-2 2");
        assert!(lines.iter().any(|l| l.starts_with("0 2 1 2 -1.")));
        assert!(lines.iter().any(|l| l.starts_with("1 2 1 1 1.")));
    }
}
