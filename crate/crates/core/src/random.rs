//! Random test objects: Ginibre densities, correlation matrices, Ω samples.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channels::{DensityMatrix, OmegaElement, SchurChannel};
use crate::matcore::ComplexMatrix;

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `d × cols` complex Gaussian matrix, row-major.
fn ginibre(d: usize, cols: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..d * cols).map(|_| gaussian(rng)).collect()
}

fn gram(g: &[Complex64], d: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, |i, j| {
        (0..cols).map(|k| g[i * cols + k] * g[j * cols + k].conj()).sum()
    })
}

pub fn random_hermitian(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(d, |_, _| gaussian(rng));
    g.hermitian_part()
}

/// Full-rank Ginibre density `G G† / tr(G G†)`.
pub fn random_density(d: usize, rng: &mut impl Rng) -> DensityMatrix {
    random_density_rank(d, d, rng)
}

pub fn random_density_rank(d: usize, rank: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = ginibre(d, rank, rng);
    let m = gram(&g, d, rank);
    let tr = m.trace().re;
    DensityMatrix::new(m.scale_real(1.0 / tr)).expect("Ginibre sample is a valid density")
}

pub fn random_pure_state(d: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..d).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// Random correlation matrix of random rank, as a Schur channel.
pub fn random_schur_channel(d: usize, rng: &mut impl Rng) -> SchurChannel {
    let rank = rng.random_range(1..=d);
    let g = ginibre(d, rank, rng);
    let m = gram(&g, d, rank);
    let s: Vec<f64> = (0..d).map(|i| 1.0 / m[(i, i)].re.sqrt()).collect();
    let tau = ComplexMatrix::from_fn(d, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            m[(i, j)] * s[i] * s[j]
        }
    });
    SchurChannel::new(tau).expect("normalised Gram matrix is a correlation matrix")
}

/// Ω element with `components` random phase vectors and random weights.
pub fn random_omega(d: usize, components: usize, rng: &mut impl Rng) -> OmegaElement {
    let raw: Vec<f64> = (0..components).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let phases = (0..components)
        .map(|_| (0..d).map(|_| rng.random::<f64>() * TAU).collect())
        .collect();
    OmegaElement::new(weights, phases).expect("normalised weights")
}

/// Probability vector drawn uniformly from the simplex.
pub fn random_probability(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}
