use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{GpError, KernelSpec};

fn cholesky_with_jitter(mut gram: DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>, GpError> {
    if let Some(c) = gram.clone().cholesky() {
        return Ok(c.l());
    }
    let mut jitter = 1e-10 * scale;
    let mut applied = 0.0;
    for _ in 0..3 {
        for i in 0..gram.nrows() {
            gram[(i, i)] += jitter - applied;
        }
        applied = jitter;
        if let Some(c) = gram.clone().cholesky() {
            return Ok(c.l());
        }
        jitter *= 10.0;
    }
    Err(GpError::Factorization { jitter: applied })
}

fn standard_normals(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)))
}

/// Draws one prior sample of `kernel` on arbitrary `grid` points.
///
/// Dense Cholesky of the full Gram matrix, so only suitable for a few thousand points.
pub fn sample_prior_function(kernel: &KernelSpec, grid: &[Vec<f64>], seed: u64) -> Result<Vec<f64>, GpError> {
    let n = grid.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let gram = DMatrix::from_fn(n, n, |i, j| kernel.eval(&grid[i], &grid[j]));
    let l = cholesky_with_jitter(gram, kernel.outputscale)?;
    let z = standard_normals(n, seed);
    Ok((l * z).iter().copied().collect())
}

/// Symmetric square root factor `A` with `A A^T = K`, negative eigenvalues clipped.
fn psd_factor(gram: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(gram);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Draws one prior sample of an RBF kernel on the tensor grid `axes[0] x axes[1] x ...`.
///
/// The RBF kernel factorizes over dimensions, so the sample is
/// `(A_1 ⊗ ... ⊗ A_d) z` with `A_k A_k^T` the per-axis Gram matrix. Values are
/// returned in row-major order (last axis fastest). Per-axis factors come from
/// an eigendecomposition because dense RBF grids are numerically singular.
pub fn sample_prior_tensor_grid(kernel: &KernelSpec, axes: &[Vec<f64>], seed: u64) -> Result<Vec<f64>, GpError> {
    if axes.len() != kernel.dim() {
        return Err(GpError::Dimension { expected: kernel.dim(), got: axes.len() });
    }
    let factors: Vec<DMatrix<f64>> = axes
        .iter()
        .zip(&kernel.lengthscales)
        .map(|(axis, &l)| {
            let one = KernelSpec::isotropic(1, l, 1.0);
            let n = axis.len();
            psd_factor(DMatrix::from_fn(n, n, |i, j| one.eval(&[axis[i]], &[axis[j]])))
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut values: Vec<f64> = standard_normals(total, seed).iter().copied().collect();

    // Apply each factor along its axis.
    let mut stride = total;
    for (k, a) in factors.iter().enumerate() {
        let n = axes[k].len();
        stride /= n;
        let outer = total / (n * stride);
        let mut buf = vec![0.0; n];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for (i, b) in buf.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += a[(i, j)] * values[base + j * stride];
                    }
                    *b = acc;
                }
                for (i, b) in buf.iter().enumerate() {
                    values[base + i * stride] = *b;
                }
            }
        }
    }
    let scale = kernel.outputscale.sqrt();
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(values)
}
