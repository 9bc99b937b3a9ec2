#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pep_select::rng::{standard_normal, stream};
use pep_select::{centre, Dataset, Design};

/// `y = 1 + Σ_j beta[j] x_j + noise_sd · ε` with independent standard normal
/// covariates; `beta` may be shorter than `p`.
pub fn dataset(seed: u64, n: usize, p: usize, beta: &[f64], noise_sd: f64) -> Dataset {
    let mut rng = stream(seed);
    let x = DMatrix::from_fn(n, p, |_, _| standard_normal(&mut rng));
    let y = DVector::from_fn(n, |i, _| {
        let signal: f64 = beta.iter().enumerate().map(|(j, b)| b * x[(i, j)]).sum();
        1.0 + signal + noise_sd * standard_normal(&mut rng)
    });
    let names = (1..=p).map(|j| format!("X{j}")).collect();
    Dataset::new(y, x, names).unwrap()
}

pub fn design_of(ds: &Dataset) -> Design {
    Design::intercept_only(&centre(ds)).unwrap()
}

pub fn design(seed: u64, n: usize, p: usize, beta: &[f64], noise_sd: f64) -> Design {
    design_of(&dataset(seed, n, p, beta, noise_sd))
}

/// The p = 4 instance shared by the sampler tests.
pub fn sampler_design() -> Design {
    design(2024, 40, 4, &[0.6, 0.0, 0.3, 0.0], 1.0)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
