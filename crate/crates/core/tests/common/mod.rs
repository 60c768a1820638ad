#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use surflab::flag_geometry::{IsotropicFlag, PairedTuple};
use surflab::linalg;
use surflab::principal_rep::{PrincipalBasis, QuadraticForm};
use surflab::surface_group::{Letter, Word};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(rng))
}

/// `exp(X)` with `X = G^{-1} A`, `A` antisymmetric, scaled to spectral norm
/// `scale`: an element of the identity component of the isometry group of
/// `form`.
pub fn random_isometry(form: &QuadraticForm, rng: &mut ChaCha8Rng, scale: f64) -> DMatrix<f64> {
    let n = form.dim();
    let a = gaussian_matrix(rng, n, n);
    let a = (&a - a.transpose()) * 0.5;
    let g_inv = form.gram().clone().try_inverse().unwrap();
    let x = g_inv * a;
    let norm = x.clone().svd(false, false).singular_values.max();
    (x * (scale / norm)).exp()
}

/// The standard tuple moved by a random isometry, with each line rescaled
/// by a random nonzero factor.
pub fn random_tuple(basis: &PrincipalBasis, rng: &mut ChaCha8Rng) -> PairedTuple {
    let g = random_isometry(basis.form_e(), rng, 0.7);
    let mut scale = |v: &DVector<f64>| {
        let s: f64 = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        &g * v * s
    };
    PairedTuple {
        e: basis.e().iter().map(&mut scale).collect(),
        e_bar: basis.e_bar().iter().map(&mut scale).collect(),
    }
}

pub fn tuple_distance(a: &PairedTuple, b: &PairedTuple) -> f64 {
    a.e.iter()
        .zip(&b.e)
        .chain(a.e_bar.iter().zip(&b.e_bar))
        .map(|(u, v)| linalg::line_distance(u, v))
        .fold(0.0, f64::max)
}

pub fn flag_distance(a: &IsotropicFlag, b: &IsotropicFlag) -> f64 {
    (1..=a.dim())
        .map(|i| linalg::subspace_distance(&a.subspace(i), &b.subspace(i)))
        .fold(0.0, f64::max)
}

pub fn random_word(rng: &mut ChaCha8Rng, generators: usize, len: usize) -> Word {
    let mut w: Vec<Letter> = Vec::with_capacity(len);
    while w.len() < len {
        let l = Letter::new(rng.random_range(0..generators), rng.random_bool(0.5));
        if w.last().is_some_and(|x| x.inverse() == l) {
            continue;
        }
        w.push(l);
    }
    Word::new(w)
}
