use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};

/// Dense `h x w x c` tensor, row-major with the spectral axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        let (h, w, c) = dims;
        if data.len() != h * w * c {
            return Err(Error::Shape(format!(
                "{} values for a {h}x{w}x{c} tensor",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("tensor values must be finite".into()));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Tensor3 {
            dims,
            data: vec![0.0; dims.0 * dims.1 * dims.2],
        }
    }

    /// A `1 x 1 x c` tensor.
    pub fn spectrum(values: Vec<f64>) -> Result<Self> {
        Self::new((1, 1, values.len()), values)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let (_, w, c) = self.dims;
        self.data[(i * w + j) * c + k]
    }

    /// The spectrum at spatial position `(i, j)`.
    pub fn column(&self, i: usize, j: usize) -> &[f64] {
        let (_, w, c) = self.dims;
        let start = (i * w + j) * c;
        &self.data[start..start + c]
    }

    fn same_dims(&self, other: &Tensor3, op: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "{op}: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

/// 3-D convolution kernel of spatial size `h x w` and odd spectral depth `d`,
/// with one scalar bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    dims: (usize, usize, usize),
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ConvKernel {
    pub fn new(dims: (usize, usize, usize), weights: Vec<f64>, bias: f64) -> Result<Self> {
        let (h, w, d) = dims;
        if d % 2 == 0 {
            return Err(Error::Config(format!("kernel depth must be odd, got {d}")));
        }
        if h == 0 || w == 0 {
            return Err(Error::Config("kernel spatial size must be positive".into()));
        }
        if weights.len() != h * w * d {
            return Err(Error::Shape(format!(
                "{} weights for a {h}x{w}x{d} kernel",
                weights.len()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) || !bias.is_finite() {
            return Err(Error::InvalidData(
                "kernel parameters must be finite".into(),
            ));
        }
        Ok(ConvKernel {
            dims,
            weights,
            bias,
        })
    }

    /// Weights and bias uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, `fan_in = h*w*d`.
    pub fn init_uniform(dims: (usize, usize, usize), rng: &mut impl Rng) -> Result<Self> {
        let fan_in = (dims.0 * dims.1 * dims.2) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let weights = (0..dims.0 * dims.1 * dims.2)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        let bias = rng.random_range(-bound..=bound);
        Self::new(dims, weights, bias)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn depth(&self) -> usize {
        self.dims.2
    }

    fn half_depth(&self) -> usize {
        (self.dims.2 - 1) / 2
    }

    /// Weight at spatial `(i, j)`, spectral tap `t`.
    pub fn weight(&self, i: usize, j: usize, t: usize) -> f64 {
        let (_, w, d) = self.dims;
        self.weights[(i * w + j) * d + t]
    }

    fn taps(&self, i: usize, j: usize) -> &[f64] {
        let (_, w, d) = self.dims;
        &self.weights[(i * w + j) * d..(i * w + j + 1) * d]
    }
}

/// Gradient of a scalar objective with respect to one kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrad {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl KernelGrad {
    pub fn zeros_like(k: &ConvKernel) -> Self {
        KernelGrad {
            weights: vec![0.0; k.weights.len()],
            bias: 0.0,
        }
    }

    pub fn add_assign(&mut self, other: &KernelGrad) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.bias += other.bias;
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|v| *v *= s);
        self.bias *= s;
    }
}

/// Paired index ranges `(k, k + offset)` with both ends inside `[0, len)`,
/// or `None` when the shift leaves no overlap.
fn shifted(offset: isize, len: usize) -> Option<(Range<usize>, Range<usize>)> {
    let n = len as isize;
    let lo = (-offset).max(0);
    let hi = (n - offset).min(n);
    (lo < hi).then(|| {
        (
            lo as usize..hi as usize,
            (lo + offset) as usize..(hi + offset) as usize,
        )
    })
}

/// Collapses an `h x w x c` patch to `1 x 1 x c`.
///
/// Valid correlation over the full spatial extent, zero-padded "same"
/// correlation along the spectral axis:
/// `out[k] = bias + sum_{i,j,t} W[i,j,t] * x[i, j, k + t - r]`, `r = (d-1)/2`.
pub fn conv3d_collapse(x: &Tensor3, k: &ConvKernel) -> Result<Tensor3> {
    let (h, w, c) = x.dims();
    let (kh, kw, _) = k.dims();
    if (kh, kw) != (h, w) {
        return Err(Error::Shape(format!(
            "kernel spatial size {kh}x{kw} does not match patch {h}x{w}"
        )));
    }
    let r = k.half_depth() as isize;
    let mut out = vec![k.bias; c];
    for i in 0..h {
        for j in 0..w {
            let col = x.column(i, j);
            for (t, &wt) in k.taps(i, j).iter().enumerate() {
                let Some((dst, src)) = shifted(t as isize - r, c) else {
                    continue;
                };
                for (o, s) in out[dst].iter_mut().zip(&col[src]) {
                    *o += wt * s;
                }
            }
        }
    }
    Ok(Tensor3 {
        dims: (1, 1, c),
        data: out,
    })
}

/// Vector-Jacobian product of [`conv3d_collapse`] with respect to the kernel.
pub fn conv3d_collapse_backward(x: &Tensor3, k: &ConvKernel, grad_out: &[f64]) -> KernelGrad {
    let (h, w, c) = x.dims();
    let d = k.depth();
    let r = k.half_depth() as isize;
    let mut g = KernelGrad::zeros_like(k);
    for i in 0..h {
        for j in 0..w {
            let col = x.column(i, j);
            for t in 0..d {
                if let Some((dst, src)) = shifted(t as isize - r, c) {
                    g.weights[(i * w + j) * d + t] = grad_out[dst]
                        .iter()
                        .zip(&col[src])
                        .map(|(a, b)| a * b)
                        .sum();
                }
            }
        }
    }
    g.bias = grad_out.iter().sum();
    g
}

/// Expands a `1 x 1 x c` spectrum to `h x w x c`, the transpose of
/// [`conv3d_collapse`] cropped back to `c` bins:
/// `out[i,j,k] = bias + sum_t W[i,j,t] * m[k + r - t]`.
pub fn tconv3d_expand(m: &Tensor3, k: &ConvKernel) -> Result<Tensor3> {
    let (mh, mw, c) = m.dims();
    if (mh, mw) != (1, 1) {
        return Err(Error::Shape(format!(
            "transposed convolution expects a 1x1xc input, got {mh}x{mw}x{c}"
        )));
    }
    let (h, w, _) = k.dims();
    let r = k.half_depth() as isize;
    let src = m.data();
    let mut out = vec![k.bias; h * w * c];
    for i in 0..h {
        for j in 0..w {
            let dst = &mut out[(i * w + j) * c..(i * w + j + 1) * c];
            for (t, &wt) in k.taps(i, j).iter().enumerate() {
                let Some((to, from)) = shifted(r - t as isize, c) else {
                    continue;
                };
                for (o, v) in dst[to].iter_mut().zip(&src[from]) {
                    *o += wt * v;
                }
            }
        }
    }
    Ok(Tensor3 {
        dims: (h, w, c),
        data: out,
    })
}

/// Vector-Jacobian products of [`tconv3d_expand`]: kernel gradient and input gradient.
pub fn tconv3d_expand_backward(
    m: &Tensor3,
    k: &ConvKernel,
    grad_out: &Tensor3,
) -> (KernelGrad, Vec<f64>) {
    let (h, w, c) = grad_out.dims();
    let d = k.depth();
    let r = k.half_depth() as isize;
    let src = m.data();
    let mut g = KernelGrad::zeros_like(k);
    let mut grad_in = vec![0.0; c];
    for i in 0..h {
        for j in 0..w {
            let go = grad_out.column(i, j);
            for (t, &wt) in k.taps(i, j).iter().enumerate() {
                let Some((to, from)) = shifted(r - t as isize, c) else {
                    continue;
                };
                let mut acc = 0.0;
                for (o, (s, gi)) in go[to]
                    .iter()
                    .zip(src[from.clone()].iter().zip(&mut grad_in[from]))
                {
                    acc += o * s;
                    *gi += o * wt;
                }
                g.weights[(i * w + j) * d + t] = acc;
            }
        }
    }
    g.bias = grad_out.data().iter().sum();
    (g, grad_in)
}

#[inline]
pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(t: &Tensor3) -> Tensor3 {
    Tensor3 {
        dims: t.dims,
        data: t.data.iter().map(|&v| sigmoid_scalar(v)).collect(),
    }
}

pub fn hadamard(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    a.same_dims(b, "hadamard")?;
    Ok(Tensor3 {
        dims: a.dims,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    })
}

/// Mean of squared element differences.
pub fn mse(a: &Tensor3, b: &Tensor3) -> Result<f64> {
    a.same_dims(b, "mse")?;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data.len() as f64)
}
