//! Nominal channel generation and the norm-ball uncertainty model.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cx::{CMatrix, CVector};
use crate::error::Error;
use crate::params::{db_to_linear, SystemParams};

pub type Point = [f64; 2];

/// Positions of the AP, the IRS and the receiver, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    #[serde(rename = "ap")]
    pub ap_pos: Point,
    #[serde(rename = "irs")]
    pub irs_pos: Point,
    #[serde(rename = "rx")]
    pub rx_pos: Point,
}

impl Default for Topology {
    fn default() -> Self {
        Self { ap_pos: [0.0, 0.0], irs_pos: [5.0, 1.0], rx_pos: [8.0, 0.0] }
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Topology {
    pub fn ap_rx(&self) -> f64 {
        dist(self.ap_pos, self.rx_pos)
    }
    pub fn ap_irs(&self) -> f64 {
        dist(self.ap_pos, self.irs_pos)
    }
    pub fn irs_rx(&self) -> f64 {
        dist(self.irs_pos, self.rx_pos)
    }

    pub fn validate(&self) -> Result<(), Error> {
        for (name, d) in [("ap/rx", self.ap_rx()), ("ap/irs", self.ap_irs()), ("irs/rx", self.irs_rx())] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::param("topology", format!("{name} distance must be positive")));
            }
        }
        Ok(())
    }
}

/// Nominal channels and uncertainty radii for one link realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Direct AP-receiver channel, length `M`.
    pub g: CVector,
    /// Nominal AP-IRS channel, `M x N`.
    pub h_bar: CMatrix,
    /// Nominal IRS-receiver channel, length `N`.
    pub f_bar: CVector,
    /// Nominal cascaded channel `H diag(f)`, `M x N`.
    pub hf_bar: CMatrix,
    /// Frobenius radius of the AP-IRS error.
    pub delta_h: f64,
    /// Frobenius radius of the cascaded-channel error.
    pub delta_f: f64,
}

impl ChannelSet {
    /// Assembles a channel set from nominal channels and a common
    /// uncertainty factor.
    pub fn from_nominal(g: CVector, h_bar: CMatrix, f_bar: CVector, beta: f64) -> Result<Self, Error> {
        if g.len() != h_bar.nrows() {
            return Err(Error::Dimension(format!("g has length {} but H has {} rows", g.len(), h_bar.nrows())));
        }
        let hf_bar = cascaded_channel(&h_bar, &f_bar)?;
        let delta_h = uncertainty_radius(beta, &h_bar)?;
        let delta_f = uncertainty_radius(beta, &hf_bar)?;
        Ok(Self { g, h_bar, f_bar, hf_bar, delta_h, delta_f })
    }

    pub fn antennas(&self) -> usize {
        self.g.len()
    }

    pub fn elements(&self) -> usize {
        self.h_bar.ncols()
    }
}

/// Log-distance path loss with exponent 2 and 30 dB at the 1 m reference.
pub fn path_loss_db(distance_m: f64) -> Result<f64, Error> {
    if !(distance_m > 0.0) {
        return Err(Error::NonPositiveDistance(distance_m));
    }
    Ok(30.0 + 10.0 * 2.0 * distance_m.log10())
}

/// Unit-variance circularly-symmetric complex Gaussian sample.
pub fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cn_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| cn01(rng) * std)
}

pub fn cn_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, std: f64) -> CVector {
    CVector::from_fn(len, |_, _| cn01(rng) * std)
}

/// Rayleigh-faded channels scaled by the topology's path loss. Pure function
/// of its arguments.
pub fn generate_channels(params: &SystemParams, topo: &Topology, seed: u64) -> Result<ChannelSet, Error> {
    params.validate()?;
    topo.validate()?;
    let (m, n) = (params.antennas, params.elements);
    let amp = |d: f64| path_loss_db(d).map(|pl| db_to_linear(-pl).sqrt());
    let (a_g, a_h, a_f) = (amp(topo.ap_rx())?, amp(topo.ap_irs())?, amp(topo.irs_rx())?);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = cn_vector(&mut rng, m, a_g);
    let h_bar = cn_matrix(&mut rng, m, n, a_h);
    let f_bar = cn_vector(&mut rng, n, a_f);
    ChannelSet::from_nominal(g, h_bar, f_bar, params.beta)
}

/// `H diag(f)`: column `n` is `f_n h_n`.
pub fn cascaded_channel(h: &CMatrix, f: &CVector) -> Result<CMatrix, Error> {
    if h.ncols() != f.len() {
        return Err(Error::Dimension(format!("H has {} columns but f has length {}", h.ncols(), f.len())));
    }
    let mut out = h.clone();
    for (mut col, fk) in out.column_iter_mut().zip(f.iter()) {
        col *= *fk;
    }
    Ok(out)
}

/// Radius `δ` with `δ² = β ‖nominal‖_F²`.
pub fn uncertainty_radius(beta: f64, nominal: &CMatrix) -> Result<f64, Error> {
    if !(beta >= 0.0) {
        return Err(Error::param("beta", format!("must be nonnegative, got {beta}")));
    }
    Ok((beta * nominal.norm_squared()).sqrt())
}

/// Channel error matrix inside a Frobenius ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub delta: CMatrix,
}

impl Perturbation {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { delta: CMatrix::zeros(rows, cols) }
    }

    pub fn norm(&self) -> f64 {
        self.delta.norm()
    }
}

/// Uniform sample from the Frobenius ball of the given radius, or from its
/// boundary sphere when `on_boundary` is set.
pub fn sample_perturbation<R: Rng + ?Sized>(
    radius: f64,
    rows: usize,
    cols: usize,
    on_boundary: bool,
    rng: &mut R,
) -> Perturbation {
    if radius == 0.0 || rows * cols == 0 {
        return Perturbation::zeros(rows, cols);
    }
    let dir = cn_matrix(rng, rows, cols, 1.0);
    let nrm = dir.norm();
    if nrm == 0.0 {
        return Perturbation::zeros(rows, cols);
    }
    let r = if on_boundary {
        radius
    } else {
        // Real dimension of the ball is 2 rows cols.
        let u: f64 = rng.random();
        radius * u.powf(1.0 / (2 * rows * cols) as f64)
    };
    Perturbation { delta: dir * Complex64::from(r / nrm) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cx::diag;

    #[test]
    fn path_loss_examples() {
        assert!((path_loss_db(1.0).unwrap() - 30.0).abs() < 1e-12);
        assert!((path_loss_db(10.0).unwrap() - 50.0).abs() < 1e-12);
        assert!((path_loss_db(100.0).unwrap() - 70.0).abs() < 1e-12);
        assert!(path_loss_db(0.0).is_err());
        assert!(path_loss_db(-3.0).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_shaped() {
        let p = SystemParams { antennas: 2, elements: 20, ..Default::default() };
        let a = generate_channels(&p, &Topology::default(), 7).unwrap();
        let b = generate_channels(&p, &Topology::default(), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.g.len(), 2);
        assert_eq!(a.h_bar.shape(), (2, 20));
        assert_eq!(a.hf_bar.shape(), (2, 20));
        let c = generate_channels(&p, &Topology::default(), 8).unwrap();
        assert_ne!(a.g, c.g);
    }

    #[test]
    fn cascaded_matches_diag_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = cn_matrix(&mut rng, 3, 4, 1.0);
        let f = cn_vector(&mut rng, 4, 1.0);
        let hf = cascaded_channel(&h, &f).unwrap();
        assert!((&hf - &h * diag(&f)).norm() < 1e-12);

        let ones = CVector::from_element(4, Complex64::new(1.0, 0.0));
        assert_eq!(cascaded_channel(&h, &ones).unwrap(), h);

        let h1 = cn_matrix(&mut rng, 2, 1, 1.0);
        let f1 = CVector::from_element(1, Complex64::new(0.0, 2.0));
        let got = cascaded_channel(&h1, &f1).unwrap();
        assert!((&got - &h1 * Complex64::new(0.0, 2.0)).norm() < 1e-15);

        assert!(cascaded_channel(&h, &CVector::zeros(3)).is_err());
    }

    #[test]
    fn cascaded_reproduces_reflected_channel() {
        // H Θ f with unit magnitude must equal H_f θ.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = cn_matrix(&mut rng, 2, 5, 1.0);
        let f = cn_vector(&mut rng, 5, 1.0);
        let theta = CVector::from_fn(5, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU));
        let direct = &h * diag(&theta) * &f;
        let via = cascaded_channel(&h, &f).unwrap() * &theta;
        assert!((direct - via).norm() < 1e-12);
    }

    #[test]
    fn radius_examples() {
        let h = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert_eq!(uncertainty_radius(0.0, &h).unwrap(), 0.0);
        assert!((uncertainty_radius(0.1, &h).unwrap() - 0.4f64.sqrt()).abs() < 1e-12);
        assert!(uncertainty_radius(0.15, &h).unwrap() > uncertainty_radius(0.1, &h).unwrap());
        assert!(uncertainty_radius(-0.1, &h).is_err());
    }

    #[test]
    fn zero_beta_gives_singleton_sets() {
        let p = SystemParams { beta: 0.0, ..Default::default() };
        let ch = generate_channels(&p, &Topology::default(), 3).unwrap();
        assert_eq!((ch.delta_h, ch.delta_f), (0.0, 0.0));
    }

    #[test]
    fn perturbation_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(sample_perturbation(0.0, 2, 3, true, &mut rng).norm(), 0.0);
        for _ in 0..100 {
            let p = sample_perturbation(0.7, 2, 3, true, &mut rng);
            assert!((p.norm() - 0.7).abs() < 1e-10);
        }
        for _ in 0..1000 {
            assert!(sample_perturbation(0.7, 2, 3, false, &mut rng).norm() <= 0.7 + 1e-12);
        }
    }

    #[test]
    fn topology_rejects_coincident_nodes() {
        let t = Topology { irs_pos: [0.0, 0.0], ..Default::default() };
        assert!(t.validate().is_err());
    }
}
