use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

const ORTHOGONALITY_TOLERANCE: f64 = 1e-9;

/// What one member sees of an input: an orthogonal transform `Q` followed by
/// keeping the first `observed_dims` coordinates of `Q x`.
///
/// With `observed_dims == input_dim` the view is a pure rotation. Keeping
/// fewer coordinates models a sensor that only captures part of the scene;
/// members looking from different angles then lose different information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    input_dim: usize,
    observed_dims: usize,
    /// Row-major `input_dim × input_dim`.
    rotation: Vec<f64>,
}

impl ViewSpec {
    pub fn new(rotation: Vec<f64>, input_dim: usize, observed_dims: usize) -> Result<Self> {
        if input_dim == 0 || rotation.len() != input_dim * input_dim {
            return Err(Error::Shape(format!(
                "rotation has {} entries, expected {input_dim}x{input_dim}",
                rotation.len()
            )));
        }
        if observed_dims == 0 || observed_dims > input_dim {
            return Err(Error::Shape(format!(
                "observed_dims {observed_dims} not in 1..={input_dim}"
            )));
        }
        for i in 0..input_dim {
            for j in 0..input_dim {
                let dot: f64 = (0..input_dim)
                    .map(|k| rotation[i * input_dim + k] * rotation[j * input_dim + k])
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if !((dot - expected).abs() <= ORTHOGONALITY_TOLERANCE) {
                    return Err(Error::Shape(format!(
                        "transform is not orthogonal: row {i} . row {j} = {dot}"
                    )));
                }
            }
        }
        Ok(Self {
            input_dim,
            observed_dims,
            rotation,
        })
    }

    pub fn identity(input_dim: usize) -> Self {
        let mut rotation = alloc::vec![0.0; input_dim * input_dim];
        for i in 0..input_dim {
            rotation[i * input_dim + i] = 1.0;
        }
        Self {
            input_dim,
            observed_dims: input_dim,
            rotation,
        }
    }

    /// Rotation by `angle` radians in the plane of the first two coordinates.
    pub fn planar(input_dim: usize, angle: f64, observed_dims: usize) -> Result<Self> {
        if input_dim < 2 {
            return Err(Error::Shape(
                "a planar rotation needs at least two dimensions".into(),
            ));
        }
        let mut rotation = Self::identity(input_dim).rotation;
        let (s, c) = libm::sincos(angle);
        rotation[0] = c;
        rotation[1] = -s;
        rotation[input_dim] = s;
        rotation[input_dim + 1] = c;
        Self::new(rotation, input_dim, observed_dims)
    }

    /// Orthonormalised Gaussian matrix (modified Gram-Schmidt, applied
    /// twice for stability).
    pub fn random_orthogonal(input_dim: usize, observed_dims: usize, seed: u64) -> Result<Self> {
        let d = input_dim;
        let mut rng = stream(seed, 0);
        let mut q: Vec<f64> = (0..d * d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        for _pass in 0..2 {
            for i in 0..d {
                for j in 0..i {
                    let dot: f64 = (0..d).map(|k| q[i * d + k] * q[j * d + k]).sum();
                    for k in 0..d {
                        q[i * d + k] -= dot * q[j * d + k];
                    }
                }
                let norm = libm::sqrt((0..d).map(|k| q[i * d + k] * q[i * d + k]).sum::<f64>());
                if !(norm > 1e-12) {
                    return Err(Error::Shape(
                        "random matrix was numerically singular".into(),
                    ));
                }
                for k in 0..d {
                    q[i * d + k] /= norm;
                }
            }
        }
        Self::new(q, input_dim, observed_dims)
    }

    /// `n` independent random views, view `k` seeded from `(seed, k)`.
    pub fn distinct(
        input_dim: usize,
        observed_dims: usize,
        n: usize,
        seed: u64,
    ) -> Result<Vec<Self>> {
        (0..n)
            .map(|k| Self::random_orthogonal(input_dim, observed_dims, derive_seed(seed, k as u64)))
            .collect()
    }

    /// The same random view repeated `n` times.
    pub fn shared(
        input_dim: usize,
        observed_dims: usize,
        n: usize,
        seed: u64,
    ) -> Result<Vec<Self>> {
        let view = Self::random_orthogonal(input_dim, observed_dims, derive_seed(seed, 0))?;
        Ok(alloc::vec![view; n])
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn observed_dims(&self) -> usize {
        self.observed_dims
    }

    pub fn rotation(&self) -> &[f64] {
        &self.rotation
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.input_dim;
        for (r, o) in out.iter_mut().enumerate().take(self.observed_dims) {
            *o = self.rotation[r * d..(r + 1) * d]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    /// Apply to every row of a row-major `N × input_dim` matrix.
    pub fn apply_rows(&self, inputs: &[f64]) -> Vec<f64> {
        let n = inputs.len() / self.input_dim;
        let mut out = alloc::vec![0.0; n * self.observed_dims];
        for (x, o) in inputs
            .chunks_exact(self.input_dim)
            .zip(out.chunks_exact_mut(self.observed_dims))
        {
            self.apply_into(x, o);
        }
        out
    }
}
