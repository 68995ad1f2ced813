//! Closed-form worst cases over the Frobenius uncertainty balls.
//!
//! The SNR constraint only sees the error through `d = Δ_f θ`, and the set of
//! reachable `d` is exactly the ball of radius `δ_f ‖θ‖`. Likewise the
//! incident power only sees `Δ_hᴴ w`, which ranges over the ball of radius
//! `δ_h ‖w‖`. Both minima are therefore a norm shrinkage clipped at zero.

use num_complex::Complex64;

use crate::channel::{ChannelSet, Perturbation};
use crate::cx::{CMatrix, CVector};
use crate::error::Error;
use crate::params::SystemParams;

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseReport {
    pub value: f64,
    pub worst_delta: Perturbation,
    /// The uncertainty can null the constraint entirely.
    pub clipped: bool,
    /// `θ = 0` with `ρ > 0`: the constraint does not see the uncertainty.
    pub degenerate: bool,
}

fn unit_phase(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / r
    }
}

/// `(g + ρ (H̄_f + Δ) θ)ᴴ w`.
pub fn snr_amplitude(g: &CVector, hf: &CMatrix, theta: &CVector, rho: f64, w: &CVector) -> Complex64 {
    let eff = g + (hf * theta) * Complex64::from(rho);
    eff.dotc(w)
}

/// Received SNR for a specific cascaded-channel error.
pub fn snr_at(g: &CVector, hf_bar: &CMatrix, theta: &CVector, rho: f64, w: &CVector, delta: &Perturbation) -> f64 {
    snr_amplitude(g, &(hf_bar + &delta.delta), theta, rho, w).norm_sqr()
}

/// Incident power `‖(H̄ + Δ)ᴴ w‖²` for a specific AP-IRS error.
pub fn incident_power_at(h_bar: &CMatrix, w: &CVector, delta: &Perturbation) -> f64 {
    ((h_bar + &delta.delta).ad_mul(w)).norm_squared()
}

/// Minimum of `|(g + ρ H_f θ)ᴴ w|²` over `‖H_f − H̄_f‖_F ≤ δ_f`.
pub fn worst_case_snr(
    g: &CVector,
    hf_bar: &CMatrix,
    theta: &CVector,
    rho: f64,
    w: &CVector,
    delta_f: f64,
) -> Result<WorstCaseReport, Error> {
    let (m, n) = hf_bar.shape();
    if g.len() != m || theta.len() != n || w.len() != m {
        return Err(Error::Dimension(format!(
            "worst_case_snr: g {} / H_f {m}x{n} / θ {} / w {}",
            g.len(),
            theta.len(),
            w.len()
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param("rho", format!("must lie in [0, 1], got {rho}")));
    }
    if theta.iter().any(|t| t.norm() > 1.0 + 1e-9) {
        return Err(Error::param("theta", "entries must have modulus at most 1"));
    }
    let u = snr_amplitude(g, hf_bar, theta, rho, w);
    let th_norm = theta.norm();
    let w_norm = w.norm();
    let degenerate = rho > 0.0 && th_norm == 0.0;
    let shrink = rho * delta_f * th_norm * w_norm;
    let value = (u.norm() - shrink).max(0.0).powi(2);
    let clipped = u.norm() < shrink;

    if delta_f == 0.0 || th_norm == 0.0 || w_norm == 0.0 {
        return Ok(WorstCaseReport {
            value: u.norm_sqr(),
            worst_delta: Perturbation::zeros(m, n),
            clipped: false,
            degenerate,
        });
    }

    // d = c ŵ with c̄ ‖w‖ ρ = -(shrink amount) u/|u|; Δ = d θᴴ / ‖θ‖².
    let what = w / Complex64::from(w_norm);
    let c = if clipped { -u.conj() / (rho * w_norm) } else { -unit_phase(u).conj() * (delta_f * th_norm) };
    let d = what * c;
    let delta = (d * theta.adjoint()) / Complex64::from(th_norm * th_norm);
    Ok(WorstCaseReport { value, worst_delta: Perturbation { delta }, clipped, degenerate })
}

/// Minimum of `‖Hᴴ w‖²` over `‖H − H̄‖_F ≤ δ_h`.
pub fn worst_case_incident_power(h_bar: &CMatrix, w: &CVector, delta_h: f64) -> Result<WorstCaseReport, Error> {
    let (m, n) = h_bar.shape();
    if w.len() != m {
        return Err(Error::Dimension(format!("H is {m}x{n} but w has length {}", w.len())));
    }
    let w_norm = w.norm();
    if w_norm == 0.0 {
        return Ok(WorstCaseReport {
            value: 0.0,
            worst_delta: Perturbation::zeros(m, n),
            clipped: false,
            degenerate: false,
        });
    }
    let v = h_bar.ad_mul(w);
    let v_norm = v.norm();
    let shrink = delta_h * w_norm;
    let clipped = v_norm < shrink;
    let value = (v_norm - shrink).max(0.0).powi(2);
    if delta_h == 0.0 {
        return Ok(WorstCaseReport {
            value: v_norm * v_norm,
            worst_delta: Perturbation::zeros(m, n),
            clipped: false,
            degenerate: false,
        });
    }
    // Δᴴ w = x with Δ = w xᴴ / ‖w‖².
    let x = if clipped {
        -v.clone()
    } else if v_norm == 0.0 {
        let mut e = CVector::zeros(n);
        e[0] = Complex64::from(-shrink);
        e
    } else {
        &v * Complex64::from(-shrink / v_norm)
    };
    let delta = (w * x.adjoint()) / Complex64::from(w_norm * w_norm);
    Ok(WorstCaseReport { value, worst_delta: Perturbation { delta }, clipped, degenerate: false })
}

/// Range of admissible reflection magnitudes for a fixed beamformer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoBounds {
    /// Smallest `ρ` meeting the worst-case SNR target; `+∞` if none in [0, 1].
    pub rho_min: f64,
    /// Largest `ρ` meeting the worst-case IRS budget.
    pub rho_max: f64,
}

impl RhoBounds {
    pub fn is_consistent(&self) -> bool {
        self.rho_min <= self.rho_max
    }
}

/// Lower bound on `ρ` from the SNR target under exact alignment
/// `H̄_f θ = κ_m g`, where the worst-case amplitude is affine in `ρ`:
/// `(1 + ρ κ_m) |gᴴw| − ρ δ_f ‖θ‖ ‖w‖`.
pub fn rho_min_snr(gw_abs: f64, kappa_m: f64, shrink_per_rho: f64, gamma1: f64) -> f64 {
    let target = gamma1.sqrt();
    if gw_abs >= target {
        return 0.0;
    }
    let slope = kappa_m * gw_abs - shrink_per_rho;
    if slope <= 0.0 {
        return f64::INFINITY;
    }
    let rho = (target - gw_abs) / slope;
    if rho > 1.0 {
        f64::INFINITY
    } else {
        rho
    }
}

/// Upper bound on `ρ` from `η (1 − ρ²) P_wc ≥ N μ`.
pub fn rho_max_energy(incident_wc: f64, budget: f64, eta: f64) -> Result<f64, Error> {
    if budget == 0.0 {
        return Ok(1.0);
    }
    if incident_wc <= budget / eta {
        return Err(Error::EnergyInfeasible { incident: eta * incident_wc, required: budget });
    }
    Ok((1.0 - budget / (eta * incident_wc)).max(0.0).sqrt())
}

/// Interval of `ρ` on which a fixed beamformer meets both worst-case
/// constraints, assuming exact alignment. `None` when it is empty.
///
/// Unlike [`rho_min_snr`] this also handles a decreasing SNR amplitude
/// (uncertainty growing faster than the alignment gain), which caps `ρ`
/// from above.
pub fn feasible_rho_interval(
    gw_abs: f64,
    kappa_m: f64,
    shrink_per_rho: f64,
    gamma1: f64,
    rho_max: f64,
) -> Option<(f64, f64)> {
    let target = gamma1.sqrt();
    let slope = kappa_m * gw_abs - shrink_per_rho;
    let (mut lo, mut hi) = (0.0, rho_max);
    if slope > 0.0 {
        lo = ((target - gw_abs) / slope).max(0.0);
    } else if slope < 0.0 {
        hi = hi.min((gw_abs - target) / -slope);
    } else if gw_abs < target {
        return None;
    }
    (lo <= hi).then_some((lo, hi))
}

pub fn rho_bounds(
    theta: &CVector,
    kappa_m: f64,
    w: &CVector,
    channels: &ChannelSet,
    params: &SystemParams,
) -> Result<RhoBounds, Error> {
    if w.norm() == 0.0 {
        return Err(Error::param("w", "beamformer must be nonzero"));
    }
    let gw = channels.g.dotc(w).norm();
    let shrink = channels.delta_f * theta.norm() * w.norm();
    let rho_min = rho_min_snr(gw, kappa_m, shrink, params.gamma1());
    let incident = worst_case_incident_power(&channels.h_bar, w, channels.delta_h)?.value;
    let rho_max = rho_max_energy(incident, params.budget(), params.eta)?;
    Ok(RhoBounds { rho_min, rho_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{cn_matrix, cn_vector, sample_perturbation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_radius_gives_nominal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = cn_vector(&mut rng, 2, 1.0);
        let hf = cn_matrix(&mut rng, 2, 3, 1.0);
        let th = CVector::from_element(3, c(0.5));
        let w = cn_vector(&mut rng, 2, 1.0);
        let r = worst_case_snr(&g, &hf, &th, 0.4, &w, 0.0).unwrap();
        let u = snr_amplitude(&g, &hf, &th, 0.4, &w);
        assert_eq!(r.value, u.norm_sqr());

        let h = cn_matrix(&mut rng, 2, 3, 1.0);
        let r = worst_case_incident_power(&h, &w, 0.0).unwrap();
        assert!((r.value - h.ad_mul(&w).norm_squared()).abs() < 1e-14);
    }

    #[test]
    fn aligned_snr_example() {
        // u = 3, ρ = 0.5, δ_f = 0.25, ‖θ‖ = 2, ‖w‖ = 1.
        let g = CVector::from_vec(vec![c(3.0), c(0.0)]);
        let hf = CMatrix::zeros(2, 4);
        let th = CVector::from_element(4, c(1.0));
        let w = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let r = worst_case_snr(&g, &hf, &th, 0.5, &w, 0.25).unwrap();
        assert!((r.value - 7.5625).abs() < 1e-12);
        assert!((r.worst_delta.norm() - 0.25).abs() < 1e-12);
        let at = snr_at(&g, &hf, &th, 0.5, &w, &r.worst_delta);
        assert!((at - 7.5625).abs() < 1e-12);
    }

    #[test]
    fn incident_example() {
        // ‖H̄ᴴw‖ = 3, δ_h = 1, ‖w‖ = 1.
        let h = CMatrix::from_row_slice(1, 2, &[c(3.0), c(0.0)]);
        let w = CVector::from_element(1, c(1.0));
        let r = worst_case_incident_power(&h, &w, 1.0).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12);
        assert!((incident_power_at(&h, &w, &r.worst_delta) - 4.0).abs() < 1e-12);
        let zero = worst_case_incident_power(&h, &CVector::zeros(1), 1.0).unwrap();
        assert_eq!(zero.value, 0.0);
        assert_eq!(zero.worst_delta.norm(), 0.0);
    }

    #[test]
    fn clipped_cases_attain_zero() {
        let g = CVector::from_vec(vec![c(0.1), c(0.0)]);
        let hf = CMatrix::zeros(2, 2);
        let th = CVector::from_element(2, c(1.0));
        let w = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let r = worst_case_snr(&g, &hf, &th, 1.0, &w, 1.0).unwrap();
        assert!(r.clipped);
        assert_eq!(r.value, 0.0);
        assert!(r.worst_delta.norm() <= 1.0 + 1e-12);
        assert!(snr_at(&g, &hf, &th, 1.0, &w, &r.worst_delta) < 1e-24);

        let h = CMatrix::from_row_slice(1, 2, &[c(0.5), c(0.0)]);
        let w = CVector::from_element(1, c(1.0));
        let r = worst_case_incident_power(&h, &w, 1.0).unwrap();
        assert!(r.clipped);
        assert!(incident_power_at(&h, &w, &r.worst_delta) < 1e-24);
    }

    #[test]
    fn reachable_set_of_delta_theta_is_a_ball() {
        // Any d with ‖d‖ ≤ δ‖θ‖ is realised by Δ = d θᴴ/‖θ‖² inside the ball.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let th = cn_vector(&mut rng, 4, 0.5);
            let delta = 0.3;
            let d = sample_perturbation(delta * th.norm(), 3, 1, false, &mut rng).delta.column(0).into_owned();
            let big = (&d * th.adjoint()) / Complex64::from(th.norm_squared());
            assert!(big.norm() <= delta + 1e-12);
            assert!((&big * &th - &d).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_theta_is_flagged() {
        let g = CVector::from_element(2, c(1.0));
        let hf = CMatrix::zeros(2, 3);
        let w = CVector::from_element(2, c(1.0));
        let r = worst_case_snr(&g, &hf, &CVector::zeros(3), 0.5, &w, 0.2).unwrap();
        assert!(r.degenerate);
        assert!((r.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rho_bound_examples() {
        // γ₁ = 4, |gᴴw| = 1, κ_m = 3, δ_f‖θ‖‖w‖ = 1.
        assert!((rho_min_snr(1.0, 3.0, 1.0, 4.0) - 0.5).abs() < 1e-15);
        assert_eq!(rho_min_snr(3.0, 3.0, 1.0, 4.0), 0.0);
        assert_eq!(rho_min_snr(1.0, 0.5, 1.0, 4.0), f64::INFINITY);
        // η = 0.5, Nμ = 1, P = 8.
        assert!((rho_max_energy(8.0, 1.0, 0.5).unwrap() - 0.75f64.sqrt()).abs() < 1e-12);
        assert_eq!(rho_max_energy(8.0, 0.0, 0.5).unwrap(), 1.0);
        assert!(matches!(rho_max_energy(2.0, 1.0, 0.5), Err(Error::EnergyInfeasible { .. })));
    }

    #[test]
    fn feasible_interval_cases() {
        assert_eq!(feasible_rho_interval(1.0, 3.0, 1.0, 4.0, 0.9), Some((0.5, 0.9)));
        assert_eq!(feasible_rho_interval(1.0, 3.0, 1.0, 4.0, 0.4), None);
        // Decreasing amplitude: 3 - ρ(2) >= 2 until ρ = 0.5.
        assert_eq!(feasible_rho_interval(3.0, 0.0, 2.0, 4.0, 0.9), Some((0.0, 0.5)));
        assert_eq!(feasible_rho_interval(1.0, 0.0, 0.0, 4.0, 0.9), None);
    }
}
