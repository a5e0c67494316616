use rand::Rng;
use rand_distr::StandardNormal;

use super::{axpy, dot, NnError, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    #[inline]
    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Identity => T::one(),
        }
    }
}

/// Fully connected network. Parameters live in one flat vector, layer by
/// layer: weights `[out][in]` row-major, then biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    params: Vec<T>,
    offsets: Vec<usize>,
}

/// Post-activation outputs of every layer for one batch, input first.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    pub batch: usize,
    pub activations: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("cache holds at least the input")
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut n = 0;
        for w in sizes.windows(2) {
            offsets.push(n);
            n += w[0] * w[1] + w[1];
        }
        Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            params: vec![T::zero(); n],
            offsets,
        }
    }

    /// Orthogonal weights scaled by `gains[layer]`, zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        gains: &[f64],
        rng: &mut R,
    ) -> Self {
        assert_eq!(gains.len(), sizes.len() - 1);
        let mut net = Self::zeros(sizes, hidden, output);
        for (l, &gain) in gains.iter().enumerate() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let w = orthogonal_matrix(n_out, n_in, rng);
            let off = net.offsets[l];
            for (dst, src) in net.params[off..off + n_in * n_out].iter_mut().zip(w) {
                *dst = T::lit(gain * src);
            }
        }
        net
    }

    /// Gaussian weights with std `scale`; handy for tests.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes, hidden, output);
        for p in net.params.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *p = T::lit(scale * z);
        }
        net
    }

    pub fn from_params(sizes: &[usize], hidden: Activation, output: Activation, params: Vec<T>) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes, hidden, output);
        if params.len() != net.params.len() {
            return Err(NnError::ShapeMismatch { expected: net.params.len(), got: params.len() });
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.offsets.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[T], &[T]) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.offsets[l];
        let (w, rest) = self.params[off..].split_at(n_in * n_out);
        (w, &rest[..n_out])
    }

    fn activation_of(&self, l: usize) -> Activation {
        if l + 1 == self.num_layers() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Forward pass over `batch` row-major inputs, keeping every layer's
    /// output for [`Mlp::backward`].
    pub fn forward_batch(&self, inputs: &[T], batch: usize) -> Result<ForwardCache<T>, NnError> {
        let n0 = self.input_dim();
        if inputs.len() != n0 * batch {
            return Err(NnError::ShapeMismatch { expected: n0 * batch, got: inputs.len() });
        }
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(inputs.to_vec());
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.layer(l);
            let act = self.activation_of(l);
            let x = activations.last().unwrap();
            let mut y = vec![T::zero(); batch * n_out];
            for (xr, yr) in x.chunks_exact(n_in).zip(y.chunks_exact_mut(n_out)) {
                for ((yo, wo), &bo) in yr.iter_mut().zip(w.chunks_exact(n_in)).zip(b) {
                    *yo = act.apply(bo + dot(xr, wo));
                }
            }
            activations.push(y);
        }
        Ok(ForwardCache { batch, activations })
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, NnError> {
        let mut cache = self.forward_batch(input, 1)?;
        Ok(cache.activations.pop().unwrap())
    }

    /// Reverse-mode gradients of a scalar loss. `out_grad` is `∂L/∂output`
    /// for each row of the cached batch; parameter gradients are *added*
    /// into `grads`.
    pub fn backward(&self, cache: &ForwardCache<T>, out_grad: &[T], grads: &mut [T]) -> Result<(), NnError> {
        if grads.len() != self.params.len() {
            return Err(NnError::ShapeMismatch { expected: self.params.len(), got: grads.len() });
        }
        if cache.activations.len() != self.sizes.len() {
            return Err(NnError::BadCache(format!(
                "{} cached layers for a {}-layer network",
                cache.activations.len(),
                self.sizes.len()
            )));
        }
        for (a, &n) in cache.activations.iter().zip(&self.sizes) {
            if a.len() != n * cache.batch {
                return Err(NnError::BadCache(format!("activation of length {} for width {n}", a.len())));
            }
        }
        let batch = cache.batch;
        let n_last = self.output_dim();
        if out_grad.len() != n_last * batch {
            return Err(NnError::ShapeMismatch { expected: n_last * batch, got: out_grad.len() });
        }

        let mut upstream = out_grad.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activation_of(l);
            let x = &cache.activations[l];
            let y = &cache.activations[l + 1];

            // Pre-activation gradient, in place.
            for (g, &yv) in upstream.iter_mut().zip(y) {
                *g = *g * act.derivative_from_output(yv);
            }

            let off = self.offsets[l];
            let (gw, rest) = grads[off..].split_at_mut(n_in * n_out);
            let gb = &mut rest[..n_out];
            for (xr, dr) in x.chunks_exact(n_in).zip(upstream.chunks_exact(n_out)) {
                for ((gwo, gbo), &d) in gw.chunks_exact_mut(n_in).zip(gb.iter_mut()).zip(dr) {
                    if d != T::zero() {
                        axpy(d, xr, gwo);
                        *gbo = *gbo + d;
                    }
                }
            }

            if l > 0 {
                let (w, _) = self.layer(l);
                let mut down = vec![T::zero(); batch * n_in];
                for (dr, gr) in upstream.chunks_exact(n_out).zip(down.chunks_exact_mut(n_in)) {
                    for (&d, wo) in dr.iter().zip(w.chunks_exact(n_in)) {
                        if d != T::zero() {
                            axpy(d, wo, gr);
                        }
                    }
                }
                upstream = down;
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            sizes: self.sizes.clone(),
            hidden: self.hidden,
            output: self.output,
            params: self.params.iter().map(|p| U::lit(p.to_f64().unwrap())).collect(),
            offsets: self.offsets.clone(),
        }
    }
}

/// `rows × cols` matrix (row-major) with orthonormal rows or columns,
/// whichever is the shorter side.
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let (n, k) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // k Gaussian vectors of length n, orthonormalized (modified Gram-Schmidt).
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut m = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            m[r * cols + c] = if rows >= cols { basis[c][r] } else { basis[r][c] };
        }
    }
    m
}
