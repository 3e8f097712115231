use crate::error::{Error, Result};
use crate::landscape::{check_dim, check_index, finite_or, Derivative, Exactness, Landscape};
use crate::scalar::Real;
use crate::vecmath::{dot_slices, RngStream, Vector};

/// Coordinates that carry per-sample gradient noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseSubspace {
    /// The oscillation coordinate `x` only.
    Top,
    /// `x` and the bulk block `z`.
    TopAndBulk,
    /// Every coordinate, including `y`.
    All,
}

impl NoiseSubspace {
    pub fn name(self) -> &'static str {
        match self {
            NoiseSubspace::Top => "top",
            NoiseSubspace::TopAndBulk => "top_and_bulk",
            NoiseSubspace::All => "all",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "top" => Some(NoiseSubspace::Top),
            "top_and_bulk" => Some(NoiseSubspace::TopAndBulk),
            "all" => Some(NoiseSubspace::All),
            _ => None,
        }
    }
}

/// Parameters of the cubic toy landscape on `θ = (x, y, z₁, …, z_k)`:
///
/// `L = ½(h0 + c·y)x² − alpha0·y + ½lam·y² + (mu/6)y³ + ½rho‖z‖²`
///
/// with `c = coupling`. Sample `i` adds a linear term `⟨o_i, θ⟩`; the offsets
/// are centred and whitened so the per-sample gradient covariance is exactly
/// `noise_cov_scale²·I` on the chosen subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalCubicSpec {
    pub h0: f64,
    pub alpha0: f64,
    pub rho: f64,
    pub lam: f64,
    pub k_bulk: usize,
    pub noise_cov_scale: f64,
    pub coupling: f64,
    pub mu: f64,
    pub n_samples: usize,
    pub noise_subspace: NoiseSubspace,
    pub data_seed: u64,
}

impl Default for CanonicalCubicSpec {
    fn default() -> Self {
        Self {
            h0: 180.0,
            alpha0: 0.25,
            rho: 1.0,
            lam: 0.0,
            k_bulk: 8,
            noise_cov_scale: 0.0,
            coupling: 1.0,
            mu: 0.0,
            n_samples: 1024,
            noise_subspace: NoiseSubspace::TopAndBulk,
            data_seed: 0,
        }
    }
}

impl CanonicalCubicSpec {
    pub fn dim(&self) -> usize {
        2 + self.k_bulk
    }

    fn noise_coords(&self) -> Vec<usize> {
        match self.noise_subspace {
            NoiseSubspace::Top => vec![0],
            NoiseSubspace::TopAndBulk => std::iter::once(0).chain(2..self.dim()).collect(),
            NoiseSubspace::All => (0..self.dim()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.h0,
            self.alpha0,
            self.rho,
            self.lam,
            self.noise_cov_scale,
            self.coupling,
            self.mu,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("canonical landscape parameters must be finite"));
        }
        if !(self.h0 > self.rho && self.rho > 0.0) {
            return Err(Error::invalid(format!(
                "canonical landscape needs h0 > rho > 0 (h0 = {}, rho = {})",
                self.h0, self.rho
            )));
        }
        if self.lam < 0.0 {
            return Err(Error::invalid("canonical landscape needs lam >= 0"));
        }
        if self.noise_cov_scale < 0.0 {
            return Err(Error::invalid("noise_cov_scale must be non-negative"));
        }
        let m = self.noise_coords().len();
        if self.n_samples < m + 1 {
            return Err(Error::invalid(format!(
                "n_samples = {} too small for a {m}-dimensional noise subspace",
                self.n_samples
            )));
        }
        Ok(())
    }

    /// `y` at which the top curvature `h0 + c·y` equals `2/eta`.
    pub fn stable_y(&self, eta: f64) -> f64 {
        (2.0 / eta - self.h0) / self.coupling
    }

    /// `(x_amplitude, stable_y(eta), 0, …, 0)`: the point where gradient descent
    /// sits on its period-two cycle at the stability threshold.
    pub fn threshold_point<T: Real>(&self, eta: f64, x_amplitude: f64) -> Result<Vector<T>> {
        let mut v = vec![T::zero(); self.dim()];
        v[0] = T::lit(x_amplitude);
        v[1] = T::lit(self.stable_y(eta));
        Vector::from_vec(v)
    }

    pub fn build<T: Real>(&self) -> Result<CanonicalCubic<T>> {
        CanonicalCubic::new(self.clone())
    }
}

/// The cubic toy landscape described by [`CanonicalCubicSpec`].
#[derive(Clone, Debug)]
pub struct CanonicalCubic<T> {
    spec: CanonicalCubicSpec,
    h0: T,
    alpha0: T,
    rho: T,
    lam: T,
    c: T,
    mu: T,
    coords: Vec<usize>,
    /// Row-major `n × coords.len()`.
    offsets: Vec<T>,
}

/// Centred columns with orthonormal directions, scaled so `(1/n)·OᵀO = s²I`.
fn whitened_offsets(n: usize, m: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, 0x6f66_6673);
    let mut cols: Vec<Vec<f64>> = (0..m).map(|_| rng.normal_vector::<f64>(n).into_vec()).collect();
    for j in 0..m {
        for _ in 0..2 {
            let mean = cols[j].iter().sum::<f64>() / n as f64;
            cols[j].iter_mut().for_each(|v| *v -= mean);
            for p in 0..j {
                let c = dot_slices(&cols[j], &cols[p]);
                let (head, tail) = cols.split_at_mut(j);
                for (a, b) in tail[0].iter_mut().zip(&head[p]) {
                    *a -= c * b;
                }
            }
        }
        let norm = dot_slices(&cols[j], &cols[j]).sqrt();
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    let amp = scale * (n as f64).sqrt();
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            out[i * m + j] = amp * cols[j][i];
        }
    }
    out
}

impl<T: Real> CanonicalCubic<T> {
    pub fn new(spec: CanonicalCubicSpec) -> Result<Self> {
        spec.validate()?;
        let coords = spec.noise_coords();
        let offsets = if spec.noise_cov_scale > 0.0 {
            whitened_offsets(spec.n_samples, coords.len(), spec.noise_cov_scale, spec.data_seed)
                .into_iter()
                .map(T::lit)
                .collect()
        } else {
            vec![T::zero(); spec.n_samples * coords.len()]
        };
        Ok(Self {
            h0: T::lit(spec.h0),
            alpha0: T::lit(spec.alpha0),
            rho: T::lit(spec.rho),
            lam: T::lit(spec.lam),
            c: T::lit(spec.coupling),
            mu: T::lit(spec.mu),
            coords,
            offsets,
            spec,
        })
    }

    pub fn spec(&self) -> &CanonicalCubicSpec {
        &self.spec
    }

    /// Per-sample offset `o_i` as a full-dimension vector.
    pub fn offset(&self, i: usize) -> Result<Vector<T>> {
        check_index("canonical offset", i, self.spec.n_samples)?;
        let mut v = Vector::zeros(self.dim());
        self.scatter_offset(v.as_mut_slice(), i, T::one());
        Ok(v)
    }

    fn scatter_offset(&self, out: &mut [T], i: usize, weight: T) {
        let m = self.coords.len();
        for (j, &c) in self.coords.iter().enumerate() {
            out[c] += weight * self.offsets[i * m + j];
        }
    }

    fn check(&self, theta: &Vector<T>) -> Result<()> {
        check_dim("canonical landscape", self.dim(), theta)
    }
}

impl<T: Real> Landscape<T> for CanonicalCubic<T> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn n_samples(&self) -> usize {
        self.spec.n_samples
    }

    fn exactness(&self) -> Exactness {
        Exactness {
            grad: Derivative::Analytic,
            hvp: Derivative::Analytic,
            third_form: Derivative::Analytic,
        }
    }

    fn loss(&self, theta: &Vector<T>) -> Result<T> {
        self.check(theta)?;
        let half = T::lit(0.5);
        let (x, y) = (theta[0], theta[1]);
        let z_sq = dot_slices(&theta.as_slice()[2..], &theta.as_slice()[2..]);
        let l = half * (self.h0 + self.c * y) * x * x - self.alpha0 * y
            + half * self.lam * y * y
            + self.mu / T::lit(6.0) * y * y * y
            + half * self.rho * z_sq;
        finite_or(l, theta, "canonical loss")
    }

    fn grad(&self, theta: &Vector<T>) -> Result<Vector<T>> {
        self.check(theta)?;
        let half = T::lit(0.5);
        let (x, y) = (theta[0], theta[1]);
        let mut g = Vec::with_capacity(self.dim());
        g.push((self.h0 + self.c * y) * x);
        g.push(half * self.c * x * x - self.alpha0 + self.lam * y + half * self.mu * y * y);
        g.extend(theta.as_slice()[2..].iter().map(|&z| self.rho * z));
        Vector::from_vec(g)
    }

    fn sample_grad(&self, theta: &Vector<T>, i: usize) -> Result<Vector<T>> {
        check_index("canonical sample_grad", i, self.spec.n_samples)?;
        let mut g = self.grad(theta)?;
        self.scatter_offset(g.as_mut_slice(), i, T::one());
        Ok(g)
    }

    fn batch_grad_of(&self, theta: &Vector<T>, batch: &[usize]) -> Result<Vector<T>> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut g = self.grad(theta)?;
        let w = T::one() / T::from_usize_lossy(batch.len());
        for &i in batch {
            check_index("canonical batch", i, self.spec.n_samples)?;
            self.scatter_offset(g.as_mut_slice(), i, w);
        }
        Ok(g)
    }

    fn sample_deviation(&self, theta: &Vector<T>, _full_grad: &Vector<T>, i: usize) -> Result<Vector<T>> {
        self.check(theta)?;
        self.offset(i)
    }

    fn hvp(&self, theta: &Vector<T>, v: &Vector<T>) -> Result<Vector<T>> {
        self.check(theta)?;
        check_dim("canonical hvp direction", self.dim(), v)?;
        let (x, y) = (theta[0], theta[1]);
        let mut out = Vec::with_capacity(self.dim());
        out.push((self.h0 + self.c * y) * v[0] + self.c * x * v[1]);
        out.push(self.c * x * v[0] + (self.lam + self.mu * y) * v[1]);
        out.extend(v.as_slice()[2..].iter().map(|&z| self.rho * z));
        Vector::from_vec(out)
    }

    /// Every sample shares the Hessian of `L`; the offsets are linear.
    fn batch_hvp(&self, theta: &Vector<T>, batch: &[usize], v: &Vector<T>) -> Result<Vector<T>> {
        if batch.iter().any(|&i| i >= self.spec.n_samples) {
            return Err(Error::invalid("batch index out of range"));
        }
        self.hvp(theta, v)
    }

    fn third_form(&self, theta: &Vector<T>, u: &Vector<T>) -> Result<Vector<T>> {
        self.check(theta)?;
        check_dim("canonical third_form direction", self.dim(), u)?;
        let two = T::lit(2.0);
        let mut out = vec![T::zero(); self.dim()];
        out[0] = two * self.c * u[0] * u[1];
        out[1] = self.c * u[0] * u[0] + self.mu * u[1] * u[1];
        Vector::from_vec(out)
    }
}
