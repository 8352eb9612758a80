//! Reproducible sampling from the Haar measure on the unitary group.
//!
//! Generator: ChaCha8 keyed by a 64-bit seed, with the 64-bit ChaCha stream
//! word used as the substream id. Substream derivation is a pure SplitMix64
//! mix of (stream, index), so parallel Monte Carlo is schedule-independent.
//! Gaussians come from Box-Muller on uniform 64-bit draws.

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomp::qr;
use crate::error::{Error, Result};
use crate::matrix::Operator;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Immutable descriptor of a random stream. Identical (seed, stream) values
/// reproduce identical sample sequences on any thread layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Derives the substream for `index`: a pure function of
    /// (seed, stream, index).
    pub fn substream(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(index)),
        }
    }

    fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Stateful Gaussian source over one stream (Box-Muller with pair caching).
pub struct GaussianSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: &SeededRng) -> Self {
        Self { rng: seed.generator(), spare: None }
    }

    fn next_uniform(&mut self) -> f64 {
        // Strictly inside (0, 1) so the log below is finite.
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Standard real normal N(0, 1).
    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Standard complex normal with E|z|^2 = 1.
    pub fn next_complex(&mut self) -> Complex64 {
        let re = self.next_standard();
        let im = self.next_standard();
        Complex64::new(re, im).scale(std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn sample_ginibre(rows: usize, cols: usize, rng: &SeededRng) -> Operator {
    let mut src = GaussianSource::new(rng);
    let data: Vec<Complex64> = (0..rows * cols).map(|_| src.next_complex()).collect();
    Operator::new(vec![rows], vec![cols], data).expect("gaussian entries are finite")
}

/// Haar-distributed unitary: Ginibre followed by QR with the R-diagonal
/// phase correction U = Q diag(r_jj / |r_jj|). The phase fix is what makes
/// the distribution exactly Haar; plain QR is biased.
pub fn sample_haar_unitary(d: usize, rng: &SeededRng) -> Result<Operator> {
    if d == 0 {
        return Err(Error::Dimension("Haar sampling needs dimension >= 1".into()));
    }
    if d == 1 {
        let mut src = GaussianSource::new(rng);
        let g = src.next_complex();
        let phase = if g.norm() > 0.0 { g / g.norm() } else { Complex64::new(1.0, 0.0) };
        return Operator::new(vec![1], vec![1], vec![phase]);
    }
    let g = sample_ginibre(d, d, rng);
    let (q, r) = qr(&g);
    let phases: Vec<Complex64> = (0..d)
        .map(|j| {
            let rjj = r[(j, j)];
            if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) }
        })
        .collect();
    Ok(q.mul(&Operator::diagonal(&phases)))
}

/// Random Hermitian with unit Frobenius norm (GUE direction).
pub fn sample_unit_hermitian(d: usize, rng: &SeededRng) -> Operator {
    let g = sample_ginibre(d, d, rng);
    let h = g.add(&g.adjoint()).scale(Complex64::new(0.5, 0.0));
    let norm = h.frobenius_norm();
    h.scale(Complex64::new(1.0 / norm, 0.0))
}

/// Haar-random pure state as a column vector.
pub fn sample_pure_state(d: usize, rng: &SeededRng) -> Operator {
    let mut src = GaussianSource::new(rng);
    let mut data: Vec<Complex64> = (0..d).map(|_| src.next_complex()).collect();
    let norm = data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut data {
        *z /= norm;
    }
    Operator::column(data)
}

/// Random full-rank density matrix G G^dag / tr (Hilbert-Schmidt induced).
pub fn sample_density_matrix(d: usize, rng: &SeededRng) -> Operator {
    let g = sample_ginibre(d, d, rng);
    let p = g.mul(&g.adjoint());
    let tr = p.trace().re;
    p.scale(Complex64::new(1.0 / tr, 0.0))
}
