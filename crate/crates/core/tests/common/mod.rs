#![allow(dead_code)]

use irs_robust::cx::{CMatrix, CVector};
use num_complex::Complex64;
use proptest::prelude::*;

pub fn cmatrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(-1.0..1.0f64, 2 * rows * cols).prop_map(move |v| {
        CMatrix::from_fn(rows, cols, |i, j| {
            let k = 2 * (j * rows + i);
            Complex64::new(v[k], v[k + 1])
        })
    })
}

pub fn cvector(len: usize) -> impl Strategy<Value = CVector> {
    cmatrix(len, 1).prop_map(|m| m.column(0).into_owned())
}

/// Unit-modulus vector from phases.
pub fn phases(len: usize) -> impl Strategy<Value = CVector> {
    prop::collection::vec(0.0..std::f64::consts::TAU, len)
        .prop_map(|p| CVector::from_iterator(p.len(), p.iter().map(|&a| Complex64::from_polar(1.0, a))))
}
