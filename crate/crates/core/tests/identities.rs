mod common;

use approx::assert_relative_eq;
use common::cmatrix;
use irs_robust::cx::{kron, min_eig, min_eig_real, realify, trace_inner, unvec, vec, Hermitian};
use irs_robust::lmi::{hermitian_basis, hermitian_coords, hermitian_dof, hermitian_from_coords};
use num_complex::Complex64;
use proptest::prelude::*;

fn herm(a: &irs_robust::cx::CMatrix) -> Hermitian {
    Hermitian::new((a + a.adjoint()) * Complex64::from(0.5)).unwrap()
}

proptest! {
    #[test]
    fn vec_of_product(a in cmatrix(2, 3), b in cmatrix(3, 4), c in cmatrix(4, 2)) {
        let lhs = vec(&(&a * &b * &c));
        let rhs = kron(&c.transpose(), &a) * vec(&b);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn unvec_inverts_vec(a in cmatrix(3, 5)) {
        prop_assert_eq!(unvec(&vec(&a), 3, 5).unwrap(), a);
    }

    #[test]
    fn trace_inner_is_trace_of_adjoint_product(a in cmatrix(3, 3), b in cmatrix(3, 3)) {
        let want = (a.adjoint() * &b).trace();
        prop_assert!((trace_inner(&a, &b) - want).norm() < 1e-12);
    }

    #[test]
    fn realify_keeps_spectrum(a in cmatrix(4, 4)) {
        let h = herm(&a);
        assert_relative_eq!(min_eig(&h), min_eig_real(&realify(&h)), epsilon = 1e-10);
        let r = realify(&h);
        prop_assert!((&r - r.transpose()).norm() < 1e-14);
    }

    #[test]
    fn coords_round_trip(a in cmatrix(3, 3)) {
        let h = herm(&a);
        let x = hermitian_coords(&h);
        prop_assert_eq!(x.len(), hermitian_dof(3));
        let back = hermitian_from_coords(3, &x);
        prop_assert!((back.matrix() - h.matrix()).norm() < 1e-12);
        let sum = hermitian_basis(3)
            .iter()
            .zip(&x)
            .fold(irs_robust::cx::CMatrix::zeros(3, 3), |acc, (e, xi)| acc + e.matrix() * Complex64::from(*xi));
        prop_assert!((sum - h.matrix()).norm() < 1e-12);
    }
}

#[test]
fn hermitian_rejects_asymmetry() {
    let mut m = irs_robust::cx::CMatrix::identity(2, 2);
    m[(0, 1)] = Complex64::new(0.0, 1.0);
    assert!(Hermitian::new(m).is_err());
}
