use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::landscape::{check_dim, check_index, finite_or, Derivative, Exactness, Landscape};
use crate::scalar::Real;
use crate::vecmath::{dot_slices, RngStream, Vector};

/// Upper bound on the parameter count of the teacher–student network.
pub const MAX_MLP_DIM: usize = 5000;

/// Difference scheme for the outer derivative in [`TeacherStudentMlp::third_form`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThirdFormScheme {
    Central,
    Forward,
}

impl ThirdFormScheme {
    pub fn name(self) -> &'static str {
        match self {
            ThirdFormScheme::Central => "central",
            ThirdFormScheme::Forward => "forward",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "central" => Some(ThirdFormScheme::Central),
            "forward" => Some(ThirdFormScheme::Forward),
            _ => None,
        }
    }
}

/// One-hidden-layer tanh network fit by mean squared error to a frozen random
/// teacher of the same shape.
///
/// Parameters are packed as `[W1 (hidden × input, row-major), b1, W2 (output ×
/// hidden, row-major), b2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub n_samples: usize,
    pub data_seed: u64,
    pub init_seed: u64,
    /// Teacher weights are `N(0, teacher_scale² / fan_in)`.
    pub teacher_scale: f64,
    /// Student initial weights are `N(0, init_scale² / fan_in)`, biases zero.
    pub init_scale: f64,
    /// Hessian-vector products use a central difference of the gradient with
    /// step `hvp_rel_step · (1 + |θ|)`.
    pub hvp_rel_step: f64,
    pub third_rel_step: f64,
    pub third_scheme: ThirdFormScheme,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            input: 8,
            hidden: 32,
            output: 1,
            n_samples: 256,
            data_seed: 0,
            init_seed: 1,
            teacher_scale: 1.0,
            init_scale: 1.0,
            hvp_rel_step: 1e-4,
            third_rel_step: 1e-3,
            third_scheme: ThirdFormScheme::Central,
        }
    }
}

impl MlpSpec {
    pub fn dim(&self) -> usize {
        self.hidden * self.input + self.hidden + self.output * self.hidden + self.output
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.output == 0 || self.n_samples == 0 {
            return Err(Error::invalid("MLP widths and sample count must be positive"));
        }
        if self.dim() > MAX_MLP_DIM {
            return Err(Error::invalid(format!(
                "MLP has {} parameters, above the limit of {MAX_MLP_DIM}",
                self.dim()
            )));
        }
        let steps = [self.hvp_rel_step, self.third_rel_step];
        if steps.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("finite-difference steps must be positive"));
        }
        if !(self.teacher_scale.is_finite() && self.init_scale.is_finite()) {
            return Err(Error::invalid("MLP scales must be finite"));
        }
        Ok(())
    }

    pub fn build<T: Real>(&self) -> Result<TeacherStudentMlp<T>> {
        TeacherStudentMlp::new(self.clone())
    }
}

#[derive(Clone, Debug)]
pub struct TeacherStudentMlp<T> {
    spec: MlpSpec,
    /// Row-major `n × input`.
    inputs: Vec<T>,
    /// Row-major `n × output`.
    targets: Vec<T>,
    teacher: Vector<T>,
    initial: Vector<T>,
}

fn random_params(spec: &MlpSpec, scale: f64, bias_scale: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut p = Vec::with_capacity(spec.dim());
    let w1 = scale / (spec.input as f64).sqrt();
    p.extend((0..spec.hidden * spec.input).map(|_| w1 * rng.normal::<f64>()));
    p.extend((0..spec.hidden).map(|_| bias_scale * rng.normal::<f64>()));
    let w2 = scale / (spec.hidden as f64).sqrt();
    p.extend((0..spec.output * spec.hidden).map(|_| w2 * rng.normal::<f64>()));
    p.extend((0..spec.output).map(|_| bias_scale * rng.normal::<f64>()));
    p
}

impl<T: Real> TeacherStudentMlp<T> {
    pub fn new(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut data_rng = RngStream::new(spec.data_seed, 0x7465_6163);
        let teacher_f64 = random_params(&spec, spec.teacher_scale, 0.1 * spec.teacher_scale, &mut data_rng);
        let teacher = Vector::from_vec(teacher_f64.into_iter().map(T::lit).collect())?;
        let inputs: Vec<T> = (0..spec.n_samples * spec.input)
            .map(|_| data_rng.normal())
            .collect();
        let mut init_rng = RngStream::new(spec.init_seed, 0x696e_6974);
        let initial_f64 = random_params(&spec, spec.init_scale, 0.0, &mut init_rng);
        let initial = Vector::from_vec(initial_f64.into_iter().map(T::lit).collect())?;

        let mut net = Self {
            targets: Vec::new(),
            inputs,
            teacher,
            initial,
            spec,
        };
        let mut targets = Vec::with_capacity(net.spec.n_samples * net.spec.output);
        let mut hidden = vec![T::zero(); net.spec.hidden];
        let mut out = vec![T::zero(); net.spec.output];
        for i in 0..net.spec.n_samples {
            net.forward(net.teacher.as_slice(), i, &mut hidden, &mut out);
            targets.extend_from_slice(&out);
        }
        net.targets = targets;
        Ok(net)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn teacher_params(&self) -> &Vector<T> {
        &self.teacher
    }

    pub fn initial_params(&self) -> &Vector<T> {
        &self.initial
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let s = &self.spec;
        let b1 = s.hidden * s.input;
        let w2 = b1 + s.hidden;
        let b2 = w2 + s.output * s.hidden;
        (0, b1, w2, b2)
    }

    fn forward(&self, p: &[T], i: usize, hidden: &mut [T], out: &mut [T]) {
        let s = &self.spec;
        let (w1, b1, w2, b2) = self.offsets();
        let x = &self.inputs[i * s.input..(i + 1) * s.input];
        for j in 0..s.hidden {
            let row = &p[w1 + j * s.input..w1 + (j + 1) * s.input];
            hidden[j] = (dot_slices(row, x) + p[b1 + j]).tanh();
        }
        for k in 0..s.output {
            let row = &p[w2 + k * s.hidden..w2 + (k + 1) * s.hidden];
            out[k] = dot_slices(row, hidden) + p[b2 + k];
        }
    }

    /// Adds `weight · ∇ℓ_i(p)` to `acc` and returns `ℓ_i(p)`.
    fn backprop(&self, p: &[T], i: usize, weight: T, acc: &mut [T], scratch: &mut Scratch<T>) -> T {
        let s = &self.spec;
        let (w1, b1, w2, b2) = self.offsets();
        self.forward(p, i, &mut scratch.hidden, &mut scratch.out);
        let y = &self.targets[i * s.output..(i + 1) * s.output];
        let mut loss = T::zero();
        for k in 0..s.output {
            scratch.out[k] -= y[k];
            loss += scratch.out[k] * scratch.out[k];
        }
        let r = &scratch.out;
        scratch.dh.iter_mut().for_each(|v| *v = T::zero());
        for k in 0..s.output {
            let rk = weight * r[k];
            acc[b2 + k] += rk;
            for j in 0..s.hidden {
                acc[w2 + k * s.hidden + j] += rk * scratch.hidden[j];
                scratch.dh[j] += p[w2 + k * s.hidden + j] * r[k];
            }
        }
        let x = &self.inputs[i * s.input..(i + 1) * s.input];
        for j in 0..s.hidden {
            let hj = scratch.hidden[j];
            let da = weight * scratch.dh[j] * (T::one() - hj * hj);
            acc[b1 + j] += da;
            let row = &mut acc[w1 + j * s.input..w1 + (j + 1) * s.input];
            for (a, &xv) in row.iter_mut().zip(x) {
                *a += da * xv;
            }
        }
        T::lit(0.5) * loss
    }

    fn scratch(&self) -> Scratch<T> {
        Scratch {
            hidden: vec![T::zero(); self.spec.hidden],
            out: vec![T::zero(); self.spec.output],
            dh: vec![T::zero(); self.spec.hidden],
        }
    }

    fn grad_raw(&self, p: &[T], batch: Option<&[usize]>) -> Vec<T> {
        let mut acc = vec![T::zero(); self.spec.dim()];
        let mut scratch = self.scratch();
        match batch {
            None => {
                let w = T::one() / T::from_usize_lossy(self.spec.n_samples);
                for i in 0..self.spec.n_samples {
                    self.backprop(p, i, w, &mut acc, &mut scratch);
                }
            }
            Some(b) => {
                let w = T::one() / T::from_usize_lossy(b.len());
                for &i in b {
                    self.backprop(p, i, w, &mut acc, &mut scratch);
                }
            }
        }
        acc
    }

    fn step_for(&self, theta: &Vector<T>, rel: f64) -> Result<T> {
        let norm = theta.norm();
        let step = T::lit(rel) * (T::one() + norm);
        if step <= T::lit(64.0) * T::epsilon() * (T::one() + norm) {
            return Err(Error::FdStepUnderflow {
                step: step.as_f64(),
                theta_norm: norm.as_f64(),
            });
        }
        Ok(step)
    }

    fn hvp_with_step(&self, theta: &Vector<T>, batch: Option<&[usize]>, v: &Vector<T>, step: T) -> Result<Vector<T>> {
        let vn = v.norm();
        if vn == T::zero() {
            return Err(Error::invalid("hvp direction must be non-zero"));
        }
        let dir = v.scale(T::one() / vn)?;
        let plus = theta.axpy(step, &dir)?;
        let minus = theta.axpy(-step, &dir)?;
        let gp = self.grad_raw(plus.as_slice(), batch);
        let gm = self.grad_raw(minus.as_slice(), batch);
        let c = vn / (T::lit(2.0) * step);
        Vector::from_vec(gp.iter().zip(&gm).map(|(&a, &b)| c * (a - b)).collect())
    }

    fn check_batch(&self, batch: &[usize]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        for &i in batch {
            check_index("mlp batch", i, self.spec.n_samples)?;
        }
        Ok(())
    }

    /// `uᵀ∇²L(θ)u` with a fixed inner difference step.
    fn curvature(&self, theta: &Vector<T>, u: &Vector<T>, inner: T) -> Result<T> {
        self.hvp_with_step(theta, None, u, inner)?.dot(u)
    }
}

struct Scratch<T> {
    hidden: Vec<T>,
    out: Vec<T>,
    dh: Vec<T>,
}

impl<T: Real> Landscape<T> for TeacherStudentMlp<T> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn n_samples(&self) -> usize {
        self.spec.n_samples
    }

    fn exactness(&self) -> Exactness {
        Exactness {
            grad: Derivative::Analytic,
            hvp: Derivative::FiniteDifference,
            third_form: Derivative::FiniteDifference,
        }
    }

    fn loss(&self, theta: &Vector<T>) -> Result<T> {
        check_dim("mlp loss", self.dim(), theta)?;
        let mut hidden = vec![T::zero(); self.spec.hidden];
        let mut out = vec![T::zero(); self.spec.output];
        let mut total = T::zero();
        let o = self.spec.output;
        for i in 0..self.spec.n_samples {
            self.forward(theta.as_slice(), i, &mut hidden, &mut out);
            for k in 0..o {
                let r = out[k] - self.targets[i * o + k];
                total += r * r;
            }
        }
        let l = T::lit(0.5) * total / T::from_usize_lossy(self.spec.n_samples);
        finite_or(l, theta, "mlp loss")
    }

    fn grad(&self, theta: &Vector<T>) -> Result<Vector<T>> {
        check_dim("mlp grad", self.dim(), theta)?;
        Vector::from_vec(self.grad_raw(theta.as_slice(), None))
    }

    fn sample_grad(&self, theta: &Vector<T>, i: usize) -> Result<Vector<T>> {
        check_dim("mlp sample_grad", self.dim(), theta)?;
        check_index("mlp sample_grad", i, self.spec.n_samples)?;
        Vector::from_vec(self.grad_raw(theta.as_slice(), Some(&[i])))
    }

    fn batch_grad_of(&self, theta: &Vector<T>, batch: &[usize]) -> Result<Vector<T>> {
        check_dim("mlp batch_grad", self.dim(), theta)?;
        self.check_batch(batch)?;
        Vector::from_vec(self.grad_raw(theta.as_slice(), Some(batch)))
    }

    fn hvp(&self, theta: &Vector<T>, v: &Vector<T>) -> Result<Vector<T>> {
        check_dim("mlp hvp", self.dim(), theta)?;
        check_dim("mlp hvp direction", self.dim(), v)?;
        let step = self.step_for(theta, self.spec.hvp_rel_step)?;
        self.hvp_with_step(theta, None, v, step)
    }

    fn batch_hvp(&self, theta: &Vector<T>, batch: &[usize], v: &Vector<T>) -> Result<Vector<T>> {
        check_dim("mlp batch_hvp", self.dim(), theta)?;
        check_dim("mlp batch_hvp direction", self.dim(), v)?;
        self.check_batch(batch)?;
        let step = self.step_for(theta, self.spec.hvp_rel_step)?;
        self.hvp_with_step(theta, Some(batch), v, step)
    }

    /// Difference quotient of `c(θ) = uᵀ∇²L(θ)u` along each coordinate, with
    /// `u` held fixed and the inner Hessian step frozen at its value at `θ`.
    fn third_form(&self, theta: &Vector<T>, u: &Vector<T>) -> Result<Vector<T>> {
        check_dim("mlp third_form", self.dim(), theta)?;
        check_dim("mlp third_form direction", self.dim(), u)?;
        let inner = self.step_for(theta, self.spec.hvp_rel_step)?;
        let outer = self.step_for(theta, self.spec.third_rel_step)?;
        let scheme = self.spec.third_scheme;
        let base = match scheme {
            ThirdFormScheme::Forward => Some(self.curvature(theta, u, inner)?),
            ThirdFormScheme::Central => None,
        };
        let entries: Result<Vec<T>> = (0..self.dim())
            .into_par_iter()
            .map(|i| {
                let e = Vector::basis(self.dim(), i);
                let cp = self.curvature(&theta.axpy(outer, &e)?, u, inner)?;
                match base {
                    Some(c0) => Ok((cp - c0) / outer),
                    None => {
                        let cm = self.curvature(&theta.axpy(-outer, &e)?, u, inner)?;
                        Ok((cp - cm) / (T::lit(2.0) * outer))
                    }
                }
            })
            .collect();
        Vector::from_vec(entries?)
    }
}
