//! Random coefficient matrices (GOE in k-particle space), quench Hamiltonian
//! assembly, and reproducible per-member random substreams.
//!
//! The generator contract: member streams are ChaCha8 keyed by a SplitMix64
//! expansion of (base_seed, member_index), and Gaussian variates come from
//! `rand_distr::StandardNormal` (ziggurat). Runs are reproducible within this
//! implementation for a fixed (base_seed, member count) regardless of the
//! order in which members are generated; cross-implementation bit equality is
//! not a goal.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::analytics::SystemParams;
use crate::error::{EgoeError, Result};
use crate::fock::ManyBodyMatrix;

/// Symmetric C(N,k)-dimensional matrix of Gaussian couplings: off-diagonal
/// variance v^2, diagonal variance 2v^2, with v = 1 (lambda enters only at
/// assembly).
#[derive(Debug, Clone, PartialEq)]
pub struct KBodyCoefficients {
    mat: DMatrix<f64>,
}

impl KBodyCoefficients {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, alpha: usize, beta: usize) -> f64 {
        self.mat[(alpha, beta)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Wraps an explicit symmetric matrix (tests, reproductions).
    pub fn from_matrix(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(EgoeError::DimensionMismatch {
                expected: mat.nrows(),
                actual: mat.ncols(),
            });
        }
        Ok(Self { mat })
    }
}

/// Ensemble run description: system parameters, member count, base seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub params: SystemParams,
    pub members: u32,
    pub base_seed: u64,
}

/// SplitMix64 step: advances the state and returns the mixed output.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Statistically independent, reproducible substream for one ensemble
/// member: a 256-bit ChaCha8 key is filled from a SplitMix64 stream seeded
/// by base_seed XOR mix(member_index).
pub fn member_stream(base_seed: u64, member_index: u64) -> ChaCha8Rng {
    let mut idx_state = member_index;
    let mut state = base_seed ^ splitmix64(&mut idx_state);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Draws one member's coefficient matrix: independent N(0,1) off-diagonal
/// entries (mirrored) and N(0,2) diagonal entries, drawn in row-major
/// upper-triangle order including the diagonal.
pub fn draw_coefficients(n: u32, k: u32, rng: &mut impl Rng) -> KBodyCoefficients {
    let dim = crate::analytics::binom_u64(n, k) as usize;
    let mut mat = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let z: f64 = rng.sample(StandardNormal);
            if i == j {
                mat[(i, i)] = std::f64::consts::SQRT_2 * z;
            } else {
                mat[(i, j)] = z;
                mat[(j, i)] = z;
            }
        }
    }
    KBodyCoefficients { mat }
}

/// H = H0 + lambda * V, elementwise.
pub fn assemble_h(
    h0: &ManyBodyMatrix,
    v: &ManyBodyMatrix,
    lambda: f64,
) -> Result<ManyBodyMatrix> {
    if h0.dim() != v.dim() {
        return Err(EgoeError::DimensionMismatch {
            expected: h0.dim(),
            actual: v.dim(),
        });
    }
    let mat = h0.as_matrix() + v.as_matrix() * lambda;
    Ok(ManyBodyMatrix::from_dmatrix(mat))
}
