//! S-procedure reformulations of the two worst-case constraints and the
//! semidefinite program solved at a fixed reflection magnitude `ρ`.
//!
//! Both blocks are affine in the Hermitian beamforming matrix `W` and in one
//! nonnegative multiplier (`t` for the SNR block, `τ` for the energy block).
//! Coefficient matrices are obtained by evaluating the block formula on the
//! real basis of Hermitian matrices, so the builders and the direct formula
//! evaluators share one definition.
//!
//! Kronecker factors follow `vec(A B C) = (Cᵀ ⊗ A) vec(B)` with column-major
//! `vec`; the cascaded error enters the SNR through `Δ θ = (θᵀ ⊗ I) vec(Δ)`,
//! giving the `θ̄ θᵀ ⊗ W` and `(θ̄ ⊗ W) g` terms below.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cx::{kron, realify, vec, CMatrix, CVector, Hermitian, RMatrix};
use crate::error::Error;

/// Number of real degrees of freedom in an `m x m` Hermitian matrix.
pub fn hermitian_dof(m: usize) -> usize {
    m * m
}

/// Real basis of `m x m` Hermitian matrices: diagonal entries first, then
/// `(Re, Im)` pairs of the strict upper triangle in row order.
pub fn hermitian_basis(m: usize) -> Vec<Hermitian> {
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        let mut e = CMatrix::zeros(m, m);
        e[(i, i)] = Complex64::new(1.0, 0.0);
        out.push(Hermitian::from_parts_unchecked(e));
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let mut re = CMatrix::zeros(m, m);
            re[(i, j)] = Complex64::new(1.0, 0.0);
            re[(j, i)] = Complex64::new(1.0, 0.0);
            out.push(Hermitian::from_parts_unchecked(re));
            let mut im = CMatrix::zeros(m, m);
            im[(i, j)] = Complex64::new(0.0, 1.0);
            im[(j, i)] = Complex64::new(0.0, -1.0);
            out.push(Hermitian::from_parts_unchecked(im));
        }
    }
    out
}

/// Coordinates of `w` in [`hermitian_basis`].
pub fn hermitian_coords(w: &Hermitian) -> Vec<f64> {
    let m = w.order();
    let a = w.matrix();
    let mut out = Vec::with_capacity(m * m);
    out.extend((0..m).map(|i| a[(i, i)].re));
    for i in 0..m {
        for j in (i + 1)..m {
            out.push(a[(i, j)].re);
            out.push(a[(i, j)].im);
        }
    }
    out
}

pub fn hermitian_from_coords(m: usize, x: &[f64]) -> Hermitian {
    let mut a = CMatrix::zeros(m, m);
    for i in 0..m {
        a[(i, i)] = Complex64::new(x[i], 0.0);
    }
    let mut k = m;
    for i in 0..m {
        for j in (i + 1)..m {
            let z = Complex64::new(x[k], x[k + 1]);
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
            k += 2;
        }
    }
    Hermitian::from_parts_unchecked(a)
}

/// One Hermitian matrix inequality `C₀ + Σ x_k C_k + s·C_s ⪰ 0`, affine in the
/// coordinates `x` of `W` and in a scalar multiplier `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub name: &'static str,
    pub constant: Hermitian,
    /// One coefficient per entry of [`hermitian_basis`].
    pub w_coeffs: Vec<Hermitian>,
    /// Coefficient of the S-procedure multiplier; `None` for plain blocks.
    pub multiplier: Option<Hermitian>,
}

impl LmiBlock {
    pub fn order(&self) -> usize {
        self.constant.order()
    }

    pub fn antennas(&self) -> usize {
        (self.w_coeffs.len() as f64).sqrt().round() as usize
    }

    /// Block value at a numeric point.
    pub fn evaluate(&self, w: &Hermitian, multiplier: f64) -> Hermitian {
        let x = hermitian_coords(w);
        let mut acc = self.constant.matrix().clone();
        for (xk, ck) in x.iter().zip(&self.w_coeffs) {
            if *xk != 0.0 {
                acc += ck.matrix() * Complex64::from(*xk);
            }
        }
        if let Some(cs) = &self.multiplier {
            acc += cs.matrix() * Complex64::from(multiplier);
        }
        Hermitian::from_parts_unchecked(acc)
    }

    /// Largest minimum eigenvalue over multipliers `s ≥ 0` at fixed `W`,
    /// returned as `(s, λ_min)`. The block is feasible at `W` iff `λ_min ≥ 0`.
    ///
    /// `λ_min` is concave in `s`, so an expanding bracket followed by a
    /// golden-section search finds the maximum.
    pub fn best_multiplier(&self, w: &Hermitian) -> (f64, f64) {
        let f = |s: f64| crate::cx::min_eig(&self.evaluate(w, s));
        if self.multiplier.is_none() {
            return (0.0, f(0.0));
        }
        let mut hi = 1e-6 * (1.0 + self.constant.matrix().norm() + w.matrix().norm());
        let mut f_hi = f(hi);
        let f0 = f(0.0);
        if f_hi <= f0 {
            hi *= 2.0;
        } else {
            loop {
                let next = 2.0 * hi;
                let f_next = f(next);
                hi = next;
                if f_next <= f_hi || hi > 1e300 {
                    break;
                }
                f_hi = f_next;
            }
        }
        let (mut a, mut b) = (0.0f64, hi);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - r * (b - a);
        let mut x2 = a + r * (b - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..200 {
            if b - a <= 1e-14 * b.max(1e-300) {
                break;
            }
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + r * (b - a);
                f2 = f(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - r * (b - a);
                f1 = f(x1);
            }
        }
        let (s, v) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if f0 >= v {
            (0.0, f0)
        } else {
            (s, v)
        }
    }

    fn from_formula(name: &'static str, m: usize, has_mult: bool, f: impl Fn(&Hermitian, f64) -> CMatrix) -> Self {
        let zero = Hermitian::zeros(m);
        let c0 = f(&zero, 0.0);
        let w_coeffs = hermitian_basis(m).iter().map(|e| Hermitian::from_parts_unchecked(f(e, 0.0) - &c0)).collect();
        let multiplier = has_mult.then(|| Hermitian::from_parts_unchecked(f(&zero, 1.0) - &c0));
        Self { name, constant: Hermitian::from_parts_unchecked(c0), w_coeffs, multiplier }
    }
}

/// Which algebraic form of the worst-case constraints to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LmiForm {
    /// Blocks of order `MN + 1`, as derived from the S-procedure directly.
    #[default]
    Full,
    /// Exact compressions: the SNR block restricted to the range of
    /// `θ̄ ⊗ I_M` (order `M + 1`) and the energy block with `H̄` replaced by
    /// its `M x min(M, N)` left polar factor (order `M·min(M,N) + 1`).
    Reduced,
}

/// Inputs of the worst-case SNR constraint at a fixed `ρ`.
#[derive(Debug, Clone)]
pub struct SnrLmiInputs<'a> {
    pub g: &'a CVector,
    pub theta: &'a CVector,
    pub kappa_m: f64,
    pub rho: f64,
    pub delta_f: f64,
    pub gamma1: f64,
}

/// Full-order SNR block at numeric `(W, t)`:
///
/// ```text
/// [ ρ²(θ̄θᵀ ⊗ W) + t I     αρ (θ̄ ⊗ W) g            ]
/// [ αρ gᴴ(θ̄ ⊗ W)ᴴ         α² gᴴWg − γ₁ − t δ_f²  ]
/// ```
/// with `α = 1 + ρ κ_m`.
pub fn snr_matrix(inp: &SnrLmiInputs<'_>, w: &Hermitian, t: f64) -> CMatrix {
    let m = inp.g.len();
    let n = inp.theta.len();
    let alpha = 1.0 + inp.rho * inp.kappa_m;
    let theta_c = inp.theta.map(|z| z.conj());
    let wm = w.matrix();
    let top = kron(&(&theta_c * inp.theta.transpose()), wm) * Complex64::from(inp.rho * inp.rho)
        + CMatrix::identity(m * n, m * n) * Complex64::from(t);
    let off =
        kron(&CMatrix::from_column_slice(n, 1, theta_c.as_slice()), wm) * inp.g * Complex64::from(alpha * inp.rho);
    let corner = alpha * alpha * inp.g.dotc(&(wm * inp.g)).re - inp.gamma1 - t * inp.delta_f * inp.delta_f;
    assemble(&top, &off, corner)
}

/// Reduced SNR block of order `M + 1`.
pub fn snr_matrix_reduced(inp: &SnrLmiInputs<'_>, w: &Hermitian, t: f64) -> CMatrix {
    let m = inp.g.len();
    let alpha = 1.0 + inp.rho * inp.kappa_m;
    let tn = inp.theta.norm();
    let wm = w.matrix();
    let top = wm * Complex64::from(inp.rho * inp.rho * tn * tn) + CMatrix::identity(m, m) * Complex64::from(t);
    let off = wm * inp.g * Complex64::from(alpha * inp.rho * tn);
    let corner = alpha * alpha * inp.g.dotc(&(wm * inp.g)).re - inp.gamma1 - t * inp.delta_f * inp.delta_f;
    assemble(&top, &off, corner)
}

/// Nominal SNR constraint `α² gᴴWg − γ₁ ≥ 0` as a 1 x 1 block.
pub fn snr_matrix_nominal(inp: &SnrLmiInputs<'_>, w: &Hermitian) -> CMatrix {
    let alpha = 1.0 + inp.rho * inp.kappa_m;
    let v = alpha * alpha * inp.g.dotc(&(w.matrix() * inp.g)).re - inp.gamma1;
    CMatrix::from_element(1, 1, Complex64::new(v, 0.0))
}

fn assemble(top: &CMatrix, off: &CVector, corner: f64) -> CMatrix {
    let k = top.nrows();
    let mut out = CMatrix::zeros(k + 1, k + 1);
    out.view_mut((0, 0), (k, k)).copy_from(top);
    out.view_mut((0, k), (k, 1)).copy_from(off);
    out.view_mut((k, 0), (1, k)).copy_from(&off.adjoint());
    out[(k, k)] = Complex64::new(corner, 0.0);
    out
}

fn check_snr(inp: &SnrLmiInputs<'_>) -> Result<(), Error> {
    if !(0.0..=1.0).contains(&inp.rho) {
        return Err(Error::param("rho", format!("must lie in [0, 1], got {}", inp.rho)));
    }
    if !(inp.gamma1 > 0.0) {
        return Err(Error::param("gamma1", "SNR target must be positive"));
    }
    if inp.delta_f < 0.0 {
        return Err(Error::param("delta_f", "radius must be nonnegative"));
    }
    Ok(())
}

/// Worst-case SNR constraint as an LMI in `(W, t)`.
///
/// With a zero radius the S-procedure degenerates (the multiplier would have
/// to grow without bound), so the nominal constraint is emitted instead.
pub fn build_snr_lmi(inp: &SnrLmiInputs<'_>, form: LmiForm) -> Result<LmiBlock, Error> {
    check_snr(inp)?;
    let m = inp.g.len();
    if inp.delta_f == 0.0 {
        return Ok(LmiBlock::from_formula("snr", m, false, |w, _| snr_matrix_nominal(inp, w)));
    }
    Ok(match form {
        LmiForm::Full => LmiBlock::from_formula("snr", m, true, |w, t| snr_matrix(inp, w, t)),
        LmiForm::Reduced => LmiBlock::from_formula("snr", m, true, |w, t| snr_matrix_reduced(inp, w, t)),
    })
}

/// Inputs of the worst-case IRS budget constraint at a fixed `ρ`.
#[derive(Debug, Clone)]
pub struct EnergyLmiInputs<'a> {
    pub h_bar: &'a CMatrix,
    pub rho: f64,
    pub delta_h: f64,
    pub eta: f64,
    /// Total consumption `N μ`.
    pub budget: f64,
}

impl EnergyLmiInputs<'_> {
    /// `N μ / (η (1 − ρ²))`.
    pub fn requirement(&self) -> f64 {
        self.budget / (self.eta * (1.0 - self.rho * self.rho))
    }
}

/// Energy block at numeric `(W, τ)` for an arbitrary AP-IRS matrix `h`:
///
/// ```text
/// [ W_c + τ I            W_c vec(h)                  ]
/// [ vec(h)ᴴ W_c          vec(h)ᴴ W_c vec(h) − c − τ δ_h² ]
/// ```
/// with `W_c = I ⊗ W` and `c` the budget requirement.
pub fn energy_matrix_for(h: &CMatrix, requirement: f64, delta_h: f64, w: &Hermitian, tau: f64) -> CMatrix {
    let (m, n) = h.shape();
    let wc = kron(&CMatrix::identity(n, n), w.matrix());
    let hv = vec(h);
    let off = &wc * &hv;
    let top = &wc + CMatrix::identity(m * n, m * n) * Complex64::from(tau);
    let corner = hv.dotc(&off).re - requirement - tau * delta_h * delta_h;
    assemble(&top, &off, corner)
}

pub fn energy_matrix(inp: &EnergyLmiInputs<'_>, w: &Hermitian, tau: f64) -> CMatrix {
    energy_matrix_for(inp.h_bar, inp.requirement(), inp.delta_h, w, tau)
}

/// `M x min(M, N)` factor `H̃ = U S` of the thin SVD `H̄ = U S Vᴴ`. Every
/// worst-case quantity of the budget constraint depends on `H̄` only through
/// `H̄ H̄ᴴ = H̃ H̃ᴴ`.
pub fn energy_factor(h_bar: &CMatrix) -> CMatrix {
    let (m, n) = h_bar.shape();
    if n <= m {
        return h_bar.clone();
    }
    let svd = h_bar.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut out = u.columns(0, m).into_owned();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= Complex64::from(svd.singular_values[j]);
    }
    out
}

/// Worst-case IRS budget constraint as an LMI in `(W, τ)`.
pub fn build_energy_lmi(inp: &EnergyLmiInputs<'_>, form: LmiForm) -> Result<LmiBlock, Error> {
    if !(0.0..1.0).contains(&inp.rho) {
        return Err(Error::param("rho", format!("energy block needs 0 <= rho < 1, got {}", inp.rho)));
    }
    if !(inp.eta > 0.0 && inp.eta <= 1.0) {
        return Err(Error::param("eta", format!("must lie in (0, 1], got {}", inp.eta)));
    }
    if inp.budget < 0.0 {
        return Err(Error::param("mu", "consumption must be nonnegative"));
    }
    let m = inp.h_bar.nrows();
    let req = inp.requirement();
    if inp.delta_h == 0.0 {
        let h = inp.h_bar;
        return Ok(LmiBlock::from_formula("energy", m, false, move |w, _| {
            let v = (h.adjoint() * w.matrix() * h).trace().re - req;
            CMatrix::from_element(1, 1, Complex64::new(v, 0.0))
        }));
    }
    let h = match form {
        LmiForm::Full => inp.h_bar.clone(),
        LmiForm::Reduced => energy_factor(inp.h_bar),
    };
    let dh = inp.delta_h;
    Ok(LmiBlock::from_formula("energy", m, true, move |w, tau| energy_matrix_for(&h, req, dh, w, tau)))
}

/// Realified affine matrix inequality `F₀ + Σ_j y_j F_j ⪰ 0` over the
/// problem's variable vector `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLmi {
    pub name: String,
    pub constant: RMatrix,
    /// `(variable index, coefficient)` pairs; zero coefficients are omitted.
    pub terms: Vec<(usize, RMatrix)>,
}

impl RealLmi {
    pub fn order(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, y: &[f64]) -> RMatrix {
        let mut acc = self.constant.clone();
        for (j, f) in &self.terms {
            acc += f * y[*j];
        }
        acc
    }
}

/// Realified SDP: minimize `cᵀ y` subject to `y_j ≥ 0` for the listed
/// indices and every LMI.
///
/// Variables are the `M²` coordinates of `W` followed by `t` and `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub antennas: usize,
    pub objective: Vec<f64>,
    pub nonneg: Vec<usize>,
    pub lmis: Vec<RealLmi>,
}

impl ConicProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn t_index(&self) -> usize {
        hermitian_dof(self.antennas)
    }

    pub fn tau_index(&self) -> usize {
        hermitian_dof(self.antennas) + 1
    }

    /// `W` encoded by a variable vector.
    pub fn beamforming_matrix(&self, y: &[f64]) -> Hermitian {
        hermitian_from_coords(self.antennas, &y[..hermitian_dof(self.antennas)])
    }
}

fn realify_block(block: &LmiBlock, mult_index: usize) -> RealLmi {
    let mut terms = Vec::new();
    for (k, c) in block.w_coeffs.iter().enumerate() {
        if c.matrix().iter().any(|z| *z != Complex64::new(0.0, 0.0)) {
            terms.push((k, realify(c)));
        }
    }
    if let Some(cs) = &block.multiplier {
        terms.push((mult_index, realify(cs)));
    }
    RealLmi { name: block.name.to_string(), constant: realify(&block.constant), terms }
}

/// Minimize `Tr(W)` over `W ⪰ 0`, `t ≥ 0`, `τ ≥ 0` subject to both blocks.
/// Pass `None` for the energy block when the budget is vacuous.
pub fn assemble_sdp(snr: &LmiBlock, energy: Option<&LmiBlock>, antennas: usize) -> Result<ConicProblem, Error> {
    let dof = hermitian_dof(antennas);
    let check = |b: &LmiBlock| {
        if b.w_coeffs.len() != dof {
            Err(Error::Dimension(format!("{} block built for {} antennas, expected {antennas}", b.name, b.antennas())))
        } else {
            Ok(())
        }
    };
    check(snr)?;
    if let Some(e) = energy {
        check(e)?;
    }
    let mut objective = vec![0.0; dof + 2];
    objective[..antennas].iter_mut().for_each(|c| *c = 1.0);

    let psd = LmiBlock {
        name: "psd",
        constant: Hermitian::zeros(antennas),
        w_coeffs: hermitian_basis(antennas),
        multiplier: None,
    };
    let mut lmis = vec![realify_block(&psd, usize::MAX), realify_block(snr, dof)];
    if let Some(e) = energy {
        lmis.push(realify_block(e, dof + 1));
    }
    Ok(ConicProblem { antennas, objective, nonneg: vec![dof, dof + 1], lmis })
}
