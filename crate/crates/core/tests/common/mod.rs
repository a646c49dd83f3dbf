#![allow(dead_code)]

use modecoupler::linalg::CMatrix;
use modecoupler::{CouplingModel, ModeParams};
use num_complex::Complex64;
use proptest::prelude::*;

/// Which loss and coupling terms random models may carry.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub alpha: bool,
    pub gamma: bool,
}

pub const GENERAL: Shape = Shape { alpha: true, gamma: true };
pub const PASSIVE_REAL: Shape = Shape { alpha: true, gamma: false };
pub const LOSSLESS_REAL: Shape = Shape { alpha: false, gamma: false };

pub fn assemble(modes: Vec<(f64, f64, f64)>, couplings: Vec<(f64, f64)>, shape: Shape) -> CouplingModel {
    let n = modes.len();
    let modes = modes
        .into_iter()
        .map(|(w, b, a)| ModeParams::new(w, b).with_alpha(if shape.alpha { a } else { 0.0 }))
        .collect();
    let mut delta = CMatrix::zeros(n);
    let mut it = couplings.into_iter();
    for j in 0..n {
        for k in j + 1..n {
            let (re, im) = it.next().expect("one coupling per pair");
            let z = Complex64::new(re, if shape.gamma { im } else { 0.0 });
            delta[(j, k)] = z;
            delta[(k, j)] = z;
        }
    }
    CouplingModel::new(modes, delta).expect("generated models are valid")
}

/// Random models with `n` modes: frequencies 1-10 GHz, dampings up to 0.5,
/// intrinsic loss up to 0.2, |Re Delta| < 0.3, -0.1 < Im Delta <= 0.
pub fn models(n: std::ops::RangeInclusive<usize>, shape: Shape) -> impl Strategy<Value = CouplingModel> {
    n.prop_flat_map(move |n| {
        (
            proptest::collection::vec((1.0..10.0f64, 0.0..0.5f64, 0.0..0.2f64), n),
            proptest::collection::vec((-0.3..0.3f64, -0.1..=0.0f64), n * n.saturating_sub(1) / 2),
        )
            .prop_map(move |(m, c)| assemble(m, c, shape))
    })
}

pub fn rel_close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}
