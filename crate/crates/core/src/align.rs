//! Phase alignment of the reflected channel with the direct channel.
//!
//! Finds the largest gain `κ_m` for which some phase vector with
//! `|θ_n| ≤ 1` satisfies `H̄_f θ = κ g`. Feasibility shrinks monotonically
//! with `κ` (the feasible set at `κ` is a scaled copy of a convex set that
//! contains the origin), so the search is a bisection over `κ` with a
//! box-constrained least-squares feasibility test at each step.

use num_complex::Complex64;

use crate::cx::{CMatrix, CVector};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub theta: CVector,
    pub kappa_m: f64,
    /// `‖H̄_f θ − κ_m g‖₂`.
    pub residual: f64,
}

impl Alignment {
    /// Direct channel only.
    pub fn none(elements: usize) -> Self {
        Self { theta: CVector::zeros(elements), kappa_m: 0.0, residual: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    /// Residual tolerance relative to `‖g‖₂`.
    pub tol: f64,
    /// Relative bisection width on `κ`.
    pub bisection_tol: f64,
    /// Iteration cap of the inner projected-gradient solver.
    pub max_inner_iters: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self { tol: 1e-8, bisection_tol: 1e-6, max_inner_iters: 20_000 }
    }
}

/// Outcome of one feasibility subproblem.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible {
        theta: CVector,
        residual: f64,
    },
    /// Either certified by a dual bound or the iteration cap was reached.
    Infeasible {
        best_residual: f64,
    },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

fn project_box(x: &mut CVector) {
    for z in x.iter_mut() {
        let r = z.norm();
        if r > 1.0 {
            *z /= r;
        }
    }
}

/// Box-constrained least squares `min ‖A θ − κ g‖` subject to `|θ_n| ≤ 1`.
#[derive(Debug, Clone)]
pub struct FeasibilitySolver<'a> {
    a: &'a CMatrix,
    g: &'a CVector,
    /// Minimum-norm solution of `A x = g`.
    x_ls: CVector,
    lipschitz: f64,
    opts: AlignOptions,
}

impl<'a> FeasibilitySolver<'a> {
    pub fn new(a: &'a CMatrix, g: &'a CVector, opts: AlignOptions) -> Result<Self, Error> {
        if a.nrows() != g.len() {
            return Err(Error::Dimension(format!("H_f has {} rows but g has length {}", a.nrows(), g.len())));
        }
        if a.ncols() == 0 {
            return Err(Error::param("N", "need at least one reflecting element"));
        }
        let pinv = a
            .clone()
            .pseudo_inverse(1e-12 * a.norm().max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let x_ls = pinv * g;
        let gram = a * a.adjoint();
        let lipschitz = gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
        Ok(Self { a, g, x_ls, lipschitz, opts })
    }

    /// Residual of the unconstrained minimum-norm solution, relative to `‖g‖`.
    pub fn range_residual(&self) -> f64 {
        (self.a * &self.x_ls - self.g).norm() / self.g.norm()
    }

    pub fn solve(&self, kappa: f64) -> Feasibility {
        let a = self.a;
        let b = self.g * Complex64::from(kappa);
        let target = self.opts.tol * self.g.norm();
        let step = 1.0 / self.lipschitz;

        let mut x = &self.x_ls * Complex64::from(kappa);
        let peak = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak > 1.0 {
            x /= Complex64::from(peak);
        }
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut best = f64::INFINITY;

        for _ in 0..self.opts.max_inner_iters {
            let r = a * &x - &b;
            let res = r.norm();
            best = best.min(res);
            if res <= target {
                return Feasibility::Feasible { theta: x, residual: res };
            }
            // Dual bound along λ = s r: the optimum residual is at least
            // sqrt(2 g(λ*)) with g(s r) maximized in closed form.
            let q = r.dotc(&b).re + a.ad_mul(&r).iter().map(|z| z.norm()).sum::<f64>();
            if q < 0.0 && q * q / (2.0 * res * res) > 0.5 * target * target {
                return Feasibility::Infeasible { best_residual: best };
            }

            let grad = a.ad_mul(&(a * &y - &b));
            let mut x_next = &y - grad * Complex64::from(step);
            project_box(&mut x_next);

            // Gradient-based adaptive restart.
            let restart = (&y - &x_next).dotc(&(&x_next - &x)).re > 0.0;
            let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
            let mom = if restart { 0.0 } else { (t - 1.0) / t_next };
            y = &x_next + (&x_next - &x) * Complex64::from(mom);
            x = x_next;
            t = t_next;
        }
        Feasibility::Infeasible { best_residual: best }
    }
}

/// Triangle-inequality bound `κ ≤ Σ_n |gᴴ a_n| / ‖g‖²`.
pub fn kappa_upper_bound(hf_bar: &CMatrix, g: &CVector) -> f64 {
    let gg = g.norm_squared();
    hf_bar.column_iter().map(|col| g.dotc(&col).norm()).sum::<f64>() / gg
}

/// Largest alignment gain and the matching relaxed phase vector.
pub fn align_phases(hf_bar: &CMatrix, g: &CVector, opts: AlignOptions) -> Result<Alignment, Error> {
    if g.norm() == 0.0 {
        return Err(Error::param("g", "direct channel must be nonzero"));
    }
    let solver = FeasibilitySolver::new(hf_bar, g, opts)?;
    let failure = || Error::Infeasible("no positive alignment gain is reachable".into());
    if solver.range_residual() > opts.tol {
        return Err(failure());
    }

    let kappa_hi = kappa_upper_bound(hf_bar, g);
    if let Feasibility::Feasible { theta, residual } = solver.solve(kappa_hi) {
        return Ok(Alignment { theta, kappa_m: kappa_hi, residual });
    }
    let (mut lo, mut hi) = (0.0f64, kappa_hi);
    let mut best: Option<(CVector, f64)> = None;
    while hi - lo > opts.bisection_tol * lo.max(1e-6 * kappa_hi) {
        let mid = 0.5 * (lo + hi);
        match solver.solve(mid) {
            Feasibility::Feasible { theta, residual } => {
                lo = mid;
                best = Some((theta, residual));
            }
            Feasibility::Infeasible { .. } => hi = mid,
        }
    }
    let (theta, residual) = best.ok_or_else(failure)?;
    Ok(Alignment { theta, kappa_m: lo, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{cn_matrix, cn_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_column_equal_to_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = cn_vector(&mut rng, 2, 1.0);
        let hf = CMatrix::from_columns(std::slice::from_ref(&g));
        let al = align_phases(&hf, &g, AlignOptions::default()).unwrap();
        assert!((al.kappa_m - 1.0).abs() < 1e-6);
        assert!((al.theta[0] - Complex64::new(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn two_copies_of_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = cn_vector(&mut rng, 2, 1.0);
        let hf = CMatrix::from_columns(&[g.clone(), g.clone()]);
        let al = align_phases(&hf, &g, AlignOptions::default()).unwrap();
        assert!((al.kappa_m - 2.0).abs() < 2e-6);
        for z in al.theta.iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-5);
        }
    }

    #[test]
    fn scalar_link_is_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = cn_vector(&mut rng, 1, 1.0);
        let hf = cn_matrix(&mut rng, 1, 5, 1.0);
        let al = align_phases(&hf, &g, AlignOptions::default()).unwrap();
        let want = hf.iter().map(|z| z.norm()).sum::<f64>() / g[0].norm();
        assert!((al.kappa_m - want).abs() < 1e-6 * want);
    }

    #[test]
    fn invariants_on_random_instances() {
        let opts = AlignOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let g = cn_vector(&mut rng, 2, 1.0);
            let hf = cn_matrix(&mut rng, 2, 8, 0.3);
            let al = align_phases(&hf, &g, opts).unwrap();
            assert!(al.kappa_m > 0.0);
            assert!(al.theta.iter().all(|z| z.norm() <= 1.0 + 1e-9));
            assert!(al.residual <= opts.tol * g.norm());
            let res = (&hf * &al.theta - &g * Complex64::from(al.kappa_m)).norm();
            assert!((res - al.residual).abs() < 1e-12);

            let solver = FeasibilitySolver::new(&hf, &g, opts).unwrap();
            assert!(!solver.solve(al.kappa_m * (1.0 + 10.0 * opts.bisection_tol)).is_feasible());

            // κ is relative to g: scaling g by c rescales κ by 1/c only
            // through H̄_f θ = κ g, so scaling both leaves it unchanged.
            let c = Complex64::from(3.5);
            let scaled = align_phases(&(&hf * c), &(&g * c), opts).unwrap();
            assert!((scaled.kappa_m - al.kappa_m).abs() < 1e-5 * al.kappa_m);
        }
    }

    #[test]
    fn unreachable_direction_fails() {
        // N = 1 < M: a generic g is not in the range of H_f.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = cn_vector(&mut rng, 2, 1.0);
        let hf = cn_matrix(&mut rng, 2, 1, 1.0);
        assert!(align_phases(&hf, &g, AlignOptions::default()).is_err());
    }
}
