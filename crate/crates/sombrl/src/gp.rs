//! Exact Gaussian-process regression with one independent posterior per
//! output dimension.
//!
//! For output dimension `j` with targets `y^j` and kernel matrix `K_n`,
//!
//! ```text
//! μ_j(z) = k_n(z)ᵀ (K_n + σ² I)⁻¹ y^j
//! σ²_j(z) = k(z, z) − k_n(z)ᵀ (K_n + σ² I)⁻¹ k_n(z)
//! ```
//!
//! Output dimensions may carry distinct hyperparameters; dimensions whose
//! kernels coincide share one Cholesky factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// Most-recent-window eviction cap; keeps O(n³) refits at desk scale.
pub const DEFAULT_DATA_CAP: usize = 2000;

/// Jitter ladder tried on Cholesky failure, multiplying by 10 each step.
const JITTER_MIN: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Growing buffer of transitions: inputs `z = (state ⧺ action)` and targets
/// (the next-state residuals), plus the known process-noise variance.
#[derive(Debug, Clone)]
pub struct Dataset {
    input_dim: usize,
    target_dim: usize,
    inputs: Vec<DVector<f64>>,
    targets: Vec<DVector<f64>>,
    noise_variance: f64,
    cap: usize,
}

impl Dataset {
    pub fn new(input_dim: usize, target_dim: usize, noise_variance: f64) -> Self {
        Self::with_cap(input_dim, target_dim, noise_variance, DEFAULT_DATA_CAP)
    }

    pub fn with_cap(input_dim: usize, target_dim: usize, noise_variance: f64, cap: usize) -> Self {
        assert!(noise_variance > 0.0, "noise variance must be positive");
        assert!(cap >= 1, "dataset cap must be at least 1");
        Self {
            input_dim,
            target_dim,
            inputs: Vec::new(),
            targets: Vec::new(),
            noise_variance,
            cap,
        }
    }

    pub fn push(&mut self, input: DVector<f64>, target: DVector<f64>) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "dataset input",
                expected: self.input_dim,
                got: input.len(),
            });
        }
        if target.len() != self.target_dim {
            return Err(Error::DimensionMismatch {
                context: "dataset target",
                expected: self.target_dim,
                got: target.len(),
            });
        }
        if input.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "dataset transition",
            });
        }
        self.inputs.push(input);
        self.targets.push(target);
        self.evict();
        Ok(())
    }

    pub fn extend_from(&mut self, other: &Dataset) -> Result<()> {
        for (z, y) in other.inputs.iter().zip(&other.targets) {
            self.push(z.clone(), y.clone())?;
        }
        Ok(())
    }

    fn evict(&mut self) {
        if self.inputs.len() > self.cap {
            let excess = self.inputs.len() - self.cap;
            self.inputs.drain(..excess);
            self.targets.drain(..excess);
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[DVector<f64>] {
        &self.targets
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Copy holding only output dimension `dim` as a scalar target.
    pub fn select_dim(&self, dim: usize) -> Dataset {
        assert!(dim < self.target_dim, "target dimension out of range");
        Dataset {
            input_dim: self.input_dim,
            target_dim: 1,
            inputs: self.inputs.clone(),
            targets: self.targets.iter().map(|y| DVector::from_element(1, y[dim])).collect(),
            noise_variance: self.noise_variance,
            cap: self.cap,
        }
    }

    /// Copy holding at most `k` points, evenly strided over the buffer so the
    /// subsample spans old and recent data alike.
    pub fn subsample(&self, k: usize) -> Dataset {
        if self.len() <= k || k == 0 {
            return self.clone();
        }
        let mut out = Dataset::with_cap(self.input_dim, self.target_dim, self.noise_variance, self.cap);
        let stride = self.len() as f64 / k as f64;
        for i in 0..k {
            let idx = (i as f64 * stride) as usize;
            out.inputs.push(self.inputs[idx].clone());
            out.targets.push(self.targets[idx].clone());
        }
        out
    }
}

/// One Cholesky factorization shared by every output dimension whose kernel
/// spec is identical.
#[derive(Debug, Clone)]
struct Factor {
    spec: KernelSpec,
    /// Output dimensions covered, in ascending order.
    dims: Vec<usize>,
    /// Lower-triangular `L` with `L Lᵀ = K_n + σ² I (+ jitter I)`.
    chol: DMatrix<f64>,
    /// `(K_n + σ² I)⁻¹`, kept dense for batched variance queries.
    inv: DMatrix<f64>,
    /// Weight columns `(K_n + σ² I)⁻¹ y^j`, one per entry of `dims`.
    weights: DMatrix<f64>,
    /// `log det (K_n + σ² I)`.
    log_det: f64,
    jitter: f64,
}

/// Posterior over all output dimensions, immutable once fitted.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    input_dim: usize,
    output_dim: usize,
    /// Training inputs as columns, `input_dim × n`.
    inputs_mat: DMatrix<f64>,
    noise_variance: f64,
    factors: Vec<Factor>,
    /// Factor index per output dimension.
    dim_factor: Vec<usize>,
}

impl GpPosterior {
    /// Fits every output dimension with the same kernel spec.
    ///
    /// An empty dataset is valid and yields the prior.
    pub fn fit(data: &Dataset, spec: &KernelSpec) -> Result<Self> {
        Self::fit_per_dim(data, &vec![spec.clone(); data.target_dim()])
    }

    /// Fits output dimension `j` with `specs[j]`.
    pub fn fit_per_dim(data: &Dataset, specs: &[KernelSpec]) -> Result<Self> {
        if specs.len() != data.target_dim() {
            return Err(Error::DimensionMismatch {
                context: "per-dimension kernel specs",
                expected: data.target_dim(),
                got: specs.len(),
            });
        }
        for spec in specs {
            spec.validate()?;
            if spec.input_dim != data.input_dim() {
                return Err(Error::DimensionMismatch {
                    context: "kernel input dimension",
                    expected: data.input_dim(),
                    got: spec.input_dim,
                });
            }
        }

        let n = data.len();
        let d_in = data.input_dim();
        let mut inputs_mat = DMatrix::zeros(d_in, n);
        for (i, z) in data.inputs().iter().enumerate() {
            inputs_mat.column_mut(i).copy_from(z);
        }

        let mut factors: Vec<Factor> = Vec::new();
        let mut dim_factor = vec![usize::MAX; specs.len()];
        for (j, spec) in specs.iter().enumerate() {
            if let Some(fi) = factors.iter().position(|f| f.spec == *spec) {
                factors[fi].dims.push(j);
                dim_factor[j] = fi;
            } else {
                dim_factor[j] = factors.len();
                factors.push(Factor {
                    spec: spec.clone(),
                    dims: vec![j],
                    chol: DMatrix::zeros(0, 0),
                    inv: DMatrix::zeros(0, 0),
                    weights: DMatrix::zeros(0, 0),
                    log_det: 0.0,
                    jitter: 0.0,
                });
            }
        }

        for factor in &mut factors {
            if n == 0 {
                factor.weights = DMatrix::zeros(0, factor.dims.len());
                continue;
            }
            let mut a = kernel_matrix(&factor.spec, &inputs_mat);
            for i in 0..n {
                a[(i, i)] += data.noise_variance();
            }
            let (chol, jitter) = cholesky_with_jitter(&a)?;
            let log_det = 2.0 * (0..n).map(|i| chol[(i, i)].ln()).sum::<f64>();
            let mut targets = DMatrix::zeros(n, factor.dims.len());
            for (c, &j) in factor.dims.iter().enumerate() {
                for (i, y) in data.targets().iter().enumerate() {
                    targets[(i, c)] = y[j];
                }
            }
            let chol_struct = nalgebra::Cholesky::pack_dirty(chol.clone());
            factor.weights = chol_struct.solve(&targets);
            factor.inv = chol_struct.inverse();
            factor.chol = chol;
            factor.log_det = log_det;
            factor.jitter = jitter;
        }

        Ok(Self {
            input_dim: d_in,
            output_dim: specs.len(),
            inputs_mat,
            noise_variance: data.noise_variance(),
            factors,
            dim_factor,
        })
    }

    /// Prior with no data, for models before the first update.
    pub fn prior(spec: &KernelSpec, output_dim: usize, noise_variance: f64) -> Result<Self> {
        let data = Dataset::new(spec.input_dim, output_dim, noise_variance);
        Self::fit(&data, spec)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn train_len(&self) -> usize {
        self.inputs_mat.ncols()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn kernel(&self, dim: usize) -> &KernelSpec {
        &self.factors[self.dim_factor[dim]].spec
    }

    /// Lower-triangular Cholesky factor of `K_n + σ² I` for `dim`'s kernel.
    pub fn cholesky_factor(&self, dim: usize) -> &DMatrix<f64> {
        &self.factors[self.dim_factor[dim]].chol
    }

    /// Weight vector `(K_n + σ² I)⁻¹ y^dim`.
    pub fn weights(&self, dim: usize) -> DVector<f64> {
        let factor = &self.factors[self.dim_factor[dim]];
        let col = factor.dims.iter().position(|&j| j == dim).expect("dim registered");
        factor.weights.column(col).into_owned()
    }

    /// Jitter added to `dim`'s kernel matrix (0 when none was needed).
    pub fn jitter(&self, dim: usize) -> f64 {
        self.factors[self.dim_factor[dim]].jitter
    }

    /// Noise-free kernel matrix `K_n` of the training inputs under `dim`'s
    /// kernel.
    pub fn train_kernel_matrix(&self, dim: usize) -> DMatrix<f64> {
        kernel_matrix(&self.factors[self.dim_factor[dim]].spec, &self.inputs_mat)
    }

    /// Replaces the weight vector of one output dimension.
    ///
    /// Used by the bounded-norm projection mode: only the predictive mean
    /// changes, variances are untouched. If the dimension shared a factor
    /// with others, it gets a private copy.
    pub fn with_weights(&self, dim: usize, weights: DVector<f64>) -> Self {
        assert_eq!(weights.len(), self.train_len(), "weight vector length mismatch");
        let mut out = self.clone();
        let fi = out.dim_factor[dim];
        if out.factors[fi].dims.len() == 1 {
            out.factors[fi].weights.column_mut(0).copy_from(&weights);
            return out;
        }
        let mut factor = out.factors[fi].clone();
        let col = factor.dims.iter().position(|&j| j == dim).expect("dim registered");
        factor.weights = factor.weights.remove_column(col);
        factor.dims.remove(col);
        out.factors[fi] = factor;

        let mut private = out.factors[fi].clone();
        private.dims = vec![dim];
        private.weights = DMatrix::from_column_slice(weights.len(), 1, weights.as_slice());
        out.dim_factor[dim] = out.factors.len();
        out.factors.push(private);
        out
    }

    /// Predictive mean and standard deviation at one query point.
    pub fn predict(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let queries = DMatrix::from_column_slice(z.len(), 1, z.as_slice());
        let (mean, std) = self.predict_batch(&queries);
        (mean.column(0).into_owned(), std.column(0).into_owned())
    }

    /// Predictive means and standard deviations for queries given as columns
    /// of an `input_dim × p` matrix; returns a pair of `output_dim × p`
    /// matrices.
    pub fn predict_batch(&self, queries: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        assert_eq!(queries.nrows(), self.input_dim, "query dimension mismatch");
        let p = queries.ncols();
        let n = self.train_len();
        let mut means = DMatrix::zeros(self.output_dim, p);
        let mut stds = DMatrix::zeros(self.output_dim, p);

        for factor in &self.factors {
            if n == 0 {
                for q in 0..p {
                    let prior = factor.spec.prior_variance(queries.column(q).as_slice()).max(0.0);
                    let std = prior.sqrt();
                    for &j in &factor.dims {
                        stds[(j, q)] = std;
                    }
                }
                continue;
            }

            let kstar = cross_kernel_matrix(&factor.spec, &self.inputs_mat, queries);
            // Means for all dims sharing this factor in one product.
            let mean_block = factor.weights.transpose() * &kstar;
            // σ²(z) = k(z,z) − k_n(z)ᵀ (K+σ²I)⁻¹ k_n(z), batched as a single
            // GEMM; identical for every dim sharing the factor.
            let g = &factor.inv * &kstar;
            for q in 0..p {
                let prior = factor.spec.prior_variance(queries.column(q).as_slice());
                let reduction = kstar.column(q).dot(&g.column(q));
                let var = (prior - reduction).clamp(0.0, prior.max(0.0));
                let std = var.sqrt();
                for (c, &j) in factor.dims.iter().enumerate() {
                    means[(j, q)] = mean_block[(c, q)];
                    stds[(j, q)] = std;
                }
            }
        }
        (means, stds)
    }

    /// Information gain of the visited training set, `½ log det(I + σ⁻²K_n)`
    /// summed over output dimensions.
    pub fn information_gain(&self) -> f64 {
        let n = self.train_len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        self.factors
            .iter()
            .map(|f| {
                let per_dim = 0.5 * (f.log_det - n * self.noise_variance.ln());
                per_dim * f.dims.len() as f64
            })
            .sum()
    }
}

/// Symmetric kernel matrix of the columns of `inputs`.
fn kernel_matrix(spec: &KernelSpec, inputs: &DMatrix<f64>) -> DMatrix<f64> {
    let n = inputs.ncols();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let zi = inputs.column(i);
        for j in 0..=i {
            let v = spec.eval(zi.as_slice(), inputs.column(j).as_slice());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `n × p` matrix of `k(train_i, query_q)`.
fn cross_kernel_matrix(spec: &KernelSpec, train: &DMatrix<f64>, queries: &DMatrix<f64>) -> DMatrix<f64> {
    let n = train.ncols();
    let p = queries.ncols();
    let mut k = DMatrix::zeros(n, p);
    for q in 0..p {
        let zq = queries.column(q);
        let mut col = k.column_mut(q);
        for i in 0..n {
            col[i] = spec.eval(train.column(i).as_slice(), zq.as_slice());
        }
    }
    k
}

/// Cholesky of `a`, escalating diagonal jitter from 1e-10 to 1e-6 by factors
/// of 10 before giving up.
fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    if let Some(ch) = nalgebra::Cholesky::new(a.clone()) {
        return Ok((ch.unpack(), 0.0));
    }
    let mut jitter = JITTER_MIN;
    while jitter <= JITTER_MAX * (1.0 + 1e-12) {
        let mut aj = a.clone();
        for i in 0..n {
            aj[(i, i)] += jitter;
        }
        if let Some(ch) = nalgebra::Cholesky::new(aj) {
            return Ok((ch.unpack(), jitter));
        }
        jitter *= 10.0;
    }
    let diag_min = (0..n).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min);
    let diag_max = (0..n).map(|i| a[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    Err(Error::NotPositiveDefinite {
        n,
        max_jitter: JITTER_MAX,
        diag_min,
        diag_max,
    })
}

/// Log marginal likelihood of `data` under `spec`, summed over output
/// dimensions:
///
/// ```text
/// Σ_j −½ (y^j)ᵀ(K+σ²I)⁻¹y^j − ½ log det(K+σ²I) − (n/2) log 2π
/// ```
pub fn log_marginal_likelihood(data: &Dataset, spec: &KernelSpec) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Config("log marginal likelihood needs at least one data point".into()));
    }
    let post = GpPosterior::fit(data, spec)?;
    let factor = &post.factors[0];
    let n = data.len() as f64;
    let mut lml = 0.0;
    for (c, &j) in factor.dims.iter().enumerate() {
        let mut quad = 0.0;
        for (i, y) in data.targets().iter().enumerate() {
            quad += y[j] * factor.weights[(i, c)];
        }
        lml += -0.5 * quad - 0.5 * factor.log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    }
    Ok(lml)
}

/// Information gain `½ log det(I + σ⁻²K)` of a set of inputs under one
/// kernel.
pub fn information_gain(spec: &KernelSpec, inputs: &[DVector<f64>], noise_variance: f64) -> Result<f64> {
    assert!(noise_variance > 0.0, "noise variance must be positive");
    let n = inputs.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut mat = DMatrix::zeros(spec.input_dim, n);
    for (i, z) in inputs.iter().enumerate() {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "information gain inputs",
            });
        }
        mat.column_mut(i).copy_from(z);
    }
    let mut a = kernel_matrix(spec, &mat);
    a /= noise_variance;
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    let (chol, _) = cholesky_with_jitter(&a)?;
    Ok((0..n).map(|i| chol[(i, i)].ln()).sum())
}

#[cfg(test)]
mod tests {
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use super::*;
    use crate::kernel::KernelFamily;

    fn rbf(dim: usize) -> KernelSpec {
        KernelSpec::isotropic(KernelFamily::Rbf, dim, 1.0, 1.0).unwrap()
    }

    fn random_vec(rng: &mut ChaCha12Rng, dim: usize, scale: f64) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| rng.random_range(-scale..scale))
    }

    fn random_dataset(
        rng: &mut ChaCha12Rng,
        n: usize,
        d_in: usize,
        d_out: usize,
        noise_variance: f64,
    ) -> Dataset {
        let mut data = Dataset::new(d_in, d_out, noise_variance);
        for _ in 0..n {
            data.push(random_vec(rng, d_in, 2.0), random_vec(rng, d_out, 1.0)).unwrap();
        }
        data
    }

    /// Direct dense-inverse computation of the posterior, the oracle the
    /// Cholesky path must match.
    fn dense_predict(
        data: &Dataset,
        spec: &KernelSpec,
        z: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let n = data.len();
        let d_out = data.target_dim();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = spec.eval(data.inputs()[i].as_slice(), data.inputs()[j].as_slice());
            }
        }
        let mut a = k.clone();
        for i in 0..n {
            a[(i, i)] += data.noise_variance();
        }
        let a_inv = a.try_inverse().expect("oracle inverse");
        let kvec = DVector::from_fn(n, |i, _| spec.eval(data.inputs()[i].as_slice(), z.as_slice()));
        let solve = &a_inv * &kvec;
        let var = (spec.prior_variance(z.as_slice()) - kvec.dot(&solve)).max(0.0);
        let mut mean = DVector::zeros(d_out);
        for j in 0..d_out {
            let yj = DVector::from_fn(n, |i, _| data.targets()[i][j]);
            mean[j] = kvec.dot(&(&a_inv * &yj));
        }
        (mean, DVector::from_element(d_out, var.sqrt()))
    }

    #[test]
    fn empty_dataset_returns_prior() {
        let spec = rbf(3);
        let data = Dataset::new(3, 2, 0.01);
        let post = GpPosterior::fit(&data, &spec).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..20 {
            let z = random_vec(&mut rng, 3, 3.0);
            let (mean, std) = post.predict(&z);
            assert_eq!(mean, DVector::zeros(2));
            assert_eq!(std, DVector::from_element(2, 1.0));
        }
    }

    #[test]
    fn single_point_low_noise_interpolates() {
        let spec = rbf(2);
        let mut data = Dataset::new(2, 1, 1e-12);
        let z0 = DVector::from_vec(vec![0.5, -0.25]);
        data.push(z0.clone(), DVector::from_element(1, 0.8)).unwrap();
        let post = GpPosterior::fit(&data, &spec).unwrap();
        let (mean, std) = post.predict(&z0);
        assert_abs_diff_eq!(mean[0], 0.8, epsilon = 1e-6);
        assert!(std[0] < 1e-3);
    }

    #[test]
    fn predictions_match_dense_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for trial in 0..20 {
            let d_in = 1 + (trial % 4);
            let data = random_dataset(&mut rng, 5 + trial, d_in, 2, 0.05);
            let spec = rbf(d_in);
            let post = GpPosterior::fit(&data, &spec).unwrap();
            for _ in 0..20 {
                let z = random_vec(&mut rng, d_in, 3.0);
                let (mean, std) = post.predict(&z);
                let (mean_o, std_o) = dense_predict(&data, &spec, &z);
                for j in 0..2 {
                    assert_abs_diff_eq!(mean[j], mean_o[j], epsilon = 1e-8);
                    assert_abs_diff_eq!(std[j], std_o[j], epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn batch_matches_single_queries() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let data = random_dataset(&mut rng, 30, 3, 2, 0.01);
        let specs = vec![
            KernelSpec::isotropic(KernelFamily::Rbf, 3, 0.8, 1.5).unwrap(),
            KernelSpec::isotropic(KernelFamily::Matern52, 3, 1.2, 0.7).unwrap(),
        ];
        let post = GpPosterior::fit_per_dim(&data, &specs).unwrap();
        let p = 17;
        let queries = DMatrix::from_fn(3, p, |_, _| rng.random_range(-2.0..2.0));
        let (means, stds) = post.predict_batch(&queries);
        for q in 0..p {
            let (mean, std) = post.predict(&queries.column(q).into_owned());
            for j in 0..2 {
                assert_abs_diff_eq!(means[(j, q)], mean[j], epsilon = 1e-12);
                assert_abs_diff_eq!(stds[(j, q)], std[j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn far_query_recovers_prior() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let data = random_dataset(&mut rng, 10, 2, 1, 0.01);
        let spec = rbf(2);
        let post = GpPosterior::fit(&data, &spec).unwrap();
        let z = DVector::from_vec(vec![100.0, -100.0]);
        let (mean, std) = post.predict(&z);
        assert_abs_diff_eq!(mean[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(std[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn training_point_variance_shrinks() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let data = random_dataset(&mut rng, 8, 2, 1, 0.01);
        let spec = rbf(2);
        let post = GpPosterior::fit(&data, &spec).unwrap();
        let (_, std) = post.predict(&data.inputs()[0].clone());
        assert!(std[0] < 1.0);
    }

    #[test]
    fn cholesky_reconstructs_kernel_matrix() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let data = random_dataset(&mut rng, 25, 3, 1, 0.1);
        let spec = rbf(3);
        let post = GpPosterior::fit(&data, &spec).unwrap();
        let l = post.cholesky_factor(0);
        let reconstructed = l * l.transpose();
        let mut inputs = DMatrix::zeros(3, 25);
        for (i, z) in data.inputs().iter().enumerate() {
            inputs.column_mut(i).copy_from(z);
        }
        let mut expected = kernel_matrix(&spec, &inputs);
        for i in 0..25 {
            expected[(i, i)] += 0.1;
        }
        let rel = (&reconstructed - &expected).norm() / expected.norm();
        assert!(rel < 1e-8, "relative reconstruction error {rel}");
    }

    #[test]
    fn variance_monotone_under_data_append() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let spec = rbf(2);
        let mut data = random_dataset(&mut rng, 12, 2, 1, 0.05);
        let before = GpPosterior::fit(&data, &spec).unwrap();
        data.push(random_vec(&mut rng, 2, 2.0), random_vec(&mut rng, 1, 1.0)).unwrap();
        let after = GpPosterior::fit(&data, &spec).unwrap();
        for _ in 0..100 {
            let z = random_vec(&mut rng, 2, 3.0);
            let (_, std_b) = before.predict(&z);
            let (_, std_a) = after.predict(&z);
            assert!(std_a[0] * std_a[0] <= std_b[0] * std_b[0] + 1e-8);
        }
    }

    #[test]
    fn lml_scalar_formula() {
        let spec = rbf(1);
        let mut data = Dataset::new(1, 1, 1.0);
        data.push(DVector::from_element(1, 0.0), DVector::from_element(1, 0.0)).unwrap();
        let lml = log_marginal_likelihood(&data, &spec).unwrap();
        let expected = -0.5 * 2.0_f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_abs_diff_eq!(lml, expected, epsilon = 1e-12);
        // Two output dims double it.
        let mut data2 = Dataset::new(1, 2, 1.0);
        data2.push(DVector::from_element(1, 0.0), DVector::zeros(2)).unwrap();
        let lml2 = log_marginal_likelihood(&data2, &spec).unwrap();
        assert_abs_diff_eq!(lml2, 2.0 * expected, epsilon = 1e-12);
    }

    #[test]
    fn lml_decreases_when_targets_scale_up() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let spec = rbf(2);
        let data = random_dataset(&mut rng, 10, 2, 1, 0.1);
        let mut scaled = Dataset::new(2, 1, 0.1);
        for (z, y) in data.inputs().iter().zip(data.targets()) {
            scaled.push(z.clone(), y * 10.0).unwrap();
        }
        let base = log_marginal_likelihood(&data, &spec).unwrap();
        let worse = log_marginal_likelihood(&scaled, &spec).unwrap();
        assert!(worse < base);
    }

    #[test]
    fn lml_matches_dense_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let data = random_dataset(&mut rng, 4, 2, 2, 0.3);
        let spec = KernelSpec::isotropic(KernelFamily::Rbf, 2, 0.9, 1.4).unwrap();
        let n = data.len();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = spec.eval(data.inputs()[i].as_slice(), data.inputs()[j].as_slice());
            }
            a[(i, i)] += 0.3;
        }
        let a_inv = a.clone().try_inverse().unwrap();
        let log_det = a.determinant().ln();
        let mut expected = 0.0;
        for j in 0..2 {
            let yj = DVector::from_fn(n, |i, _| data.targets()[i][j]);
            expected += -0.5 * yj.dot(&(&a_inv * &yj))
                - 0.5 * log_det
                - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        }
        let lml = log_marginal_likelihood(&data, &spec).unwrap();
        assert_abs_diff_eq!(lml, expected, epsilon = 1e-8);
    }

    #[test]
    fn information_gain_empty_and_single_point() {
        let spec = rbf(2);
        assert_eq!(information_gain(&spec, &[], 0.1).unwrap(), 0.0);
        let z = DVector::from_vec(vec![0.3, 0.4]);
        let gain = information_gain(&spec, &[z], 0.1).unwrap();
        assert_relative_eq!(gain, 0.5 * 11.0_f64.ln(), max_relative = 1e-10);
        assert_relative_eq!(gain, 1.198948, max_relative = 1e-6);
    }

    #[test]
    fn information_gain_rank_one_recursion() {
        // Appending z increases the gain by exactly ½ ln(1 + σ⁻² σ²_post(z)),
        // where σ²_post is the posterior variance given the previous inputs.
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let spec = rbf(2);
        let noise = 0.1;
        let inputs: Vec<DVector<f64>> = (0..12).map(|_| random_vec(&mut rng, 2, 2.0)).collect();
        let z_new = random_vec(&mut rng, 2, 2.0);

        let mut data = Dataset::new(2, 1, noise);
        for z in &inputs {
            data.push(z.clone(), DVector::zeros(1)).unwrap();
        }
        let post = GpPosterior::fit(&data, &spec).unwrap();
        let (_, std) = post.predict(&z_new);
        let predicted_increment = 0.5 * (1.0 + std[0] * std[0] / noise).ln();

        let before = information_gain(&spec, &inputs, noise).unwrap();
        let mut extended = inputs.clone();
        extended.push(z_new);
        let after = information_gain(&spec, &extended, noise).unwrap();
        assert_abs_diff_eq!(after - before, predicted_increment, epsilon = 1e-8);
    }

    #[test]
    fn information_gain_permutation_invariant_and_monotone() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let spec = rbf(3);
        let inputs: Vec<DVector<f64>> = (0..15).map(|_| random_vec(&mut rng, 3, 2.0)).collect();
        let gain = information_gain(&spec, &inputs, 0.2).unwrap();
        let mut reversed = inputs.clone();
        reversed.reverse();
        let gain_rev = information_gain(&spec, &reversed, 0.2).unwrap();
        assert_abs_diff_eq!(gain, gain_rev, epsilon = 1e-10);

        let shorter = information_gain(&spec, &inputs[..10], 0.2).unwrap();
        assert!(gain >= shorter);
        assert!(shorter >= 0.0);
    }

    #[test]
    fn log_det_sandwich_on_batch_updates() {
        // log det V_n − log det V_{n−1} with V = Π_j (I + σ⁻² K^{(j)}) is
        // bounded below by log(1 + σ⁻² Σ_k ‖σ_{n−1}(z_k)‖²) and above by
        // Σ_k Σ_j log(1 + σ⁻² σ²_{n−1,j}(z_k)).
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let noise = 0.05;
        for _ in 0..20 {
            let d_in = 2;
            let specs = vec![
                KernelSpec::isotropic(KernelFamily::Rbf, d_in, rng.random_range(0.5..1.5), 1.0).unwrap(),
                KernelSpec::isotropic(KernelFamily::Rbf, d_in, rng.random_range(0.5..1.5), 0.8).unwrap(),
            ];
            let n_old = rng.random_range(3..10);
            let batch = rng.random_range(1..6);
            let old: Vec<DVector<f64>> = (0..n_old).map(|_| random_vec(&mut rng, d_in, 2.0)).collect();
            let new: Vec<DVector<f64>> = (0..batch).map(|_| random_vec(&mut rng, d_in, 2.0)).collect();

            let mut data = Dataset::new(d_in, 2, noise);
            for z in &old {
                data.push(z.clone(), DVector::zeros(2)).unwrap();
            }
            let post = GpPosterior::fit_per_dim(&data, &specs).unwrap();

            let log_det = |inputs: &[DVector<f64>]| -> f64 {
                specs
                    .iter()
                    .map(|s| 2.0 * information_gain(s, inputs, noise).unwrap())
                    .sum()
            };
            let mut all = old.clone();
            all.extend(new.iter().cloned());
            let increment = log_det(&all) - log_det(&old);

            let mut lower_sum = 0.0;
            let mut upper = 0.0;
            for z in &new {
                let (_, std) = post.predict(z);
                lower_sum += std.iter().map(|s| s * s).sum::<f64>();
                upper += std.iter().map(|s| (1.0 + s * s / noise).ln()).sum::<f64>();
            }
            let lower = (1.0 + lower_sum / noise).ln();
            assert!(
                increment >= lower - 1e-6,
                "increment {increment} below lower bound {lower}"
            );
            assert!(
                increment <= upper + 1e-6,
                "increment {increment} above upper bound {upper}"
            );
        }
    }

    #[test]
    fn posterior_information_gain_matches_free_function() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let data = random_dataset(&mut rng, 14, 2, 2, 0.1);
        let specs = vec![
            KernelSpec::isotropic(KernelFamily::Rbf, 2, 0.7, 1.0).unwrap(),
            KernelSpec::isotropic(KernelFamily::Rbf, 2, 1.3, 0.5).unwrap(),
        ];
        let post = GpPosterior::fit_per_dim(&data, &specs).unwrap();
        let expected: f64 = specs
            .iter()
            .map(|s| information_gain(s, data.inputs(), 0.1).unwrap())
            .sum();
        assert_abs_diff_eq!(post.information_gain(), expected, epsilon = 1e-6);
    }

    #[test]
    fn shared_spec_uses_one_factor() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let data = random_dataset(&mut rng, 10, 2, 3, 0.1);
        let post = GpPosterior::fit(&data, &rbf(2)).unwrap();
        assert_eq!(post.factors.len(), 1);
        assert_eq!(post.factors[0].dims, vec![0, 1, 2]);
    }

    #[test]
    fn with_weights_changes_mean_not_std() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let data = random_dataset(&mut rng, 10, 2, 2, 0.1);
        let post = GpPosterior::fit(&data, &rbf(2)).unwrap();
        let new_w = DVector::from_element(10, 0.05);
        let modified = post.with_weights(0, new_w.clone());
        assert_eq!(modified.weights(0), new_w);
        assert_eq!(modified.weights(1), post.weights(1));
        let z = random_vec(&mut rng, 2, 1.0);
        let (mean_a, std_a) = post.predict(&z);
        let (mean_b, std_b) = modified.predict(&z);
        assert_ne!(mean_a[0], mean_b[0]);
        assert_eq!(mean_a[1], mean_b[1]);
        assert_eq!(std_a, std_b);
    }

    #[test]
    fn dataset_cap_evicts_oldest() {
        let mut data = Dataset::with_cap(1, 1, 0.1, 3);
        for i in 0..5 {
            data.push(DVector::from_element(1, i as f64), DVector::zeros(1)).unwrap();
        }
        assert_eq!(data.len(), 3);
        assert_eq!(data.inputs()[0][0], 2.0);
        assert_eq!(data.inputs()[2][0], 4.0);
    }

    #[test]
    fn dataset_rejects_bad_transitions() {
        let mut data = Dataset::new(2, 1, 0.1);
        assert!(data.push(DVector::zeros(3), DVector::zeros(1)).is_err());
        assert!(data.push(DVector::zeros(2), DVector::zeros(2)).is_err());
        assert!(data
            .push(DVector::from_vec(vec![f64::NAN, 0.0]), DVector::zeros(1))
            .is_err());
        assert!(data.is_empty());
    }

    #[test]
    fn select_dim_and_subsample() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let data = random_dataset(&mut rng, 20, 2, 3, 0.1);
        let one = data.select_dim(1);
        assert_eq!(one.target_dim(), 1);
        assert_eq!(one.len(), 20);
        assert_eq!(one.targets()[4][0], data.targets()[4][1]);

        let sub = data.subsample(7);
        assert_eq!(sub.len(), 7);
        assert_eq!(sub.inputs()[0], data.inputs()[0]);
        let big = data.subsample(50);
        assert_eq!(big.len(), 20);
    }
}
