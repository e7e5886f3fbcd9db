//! Primitive layers with explicit forward/backward passes.
//!
//! Every layer owns its parameters, its gradient accumulators and the cache
//! from the last recorded forward. `backward` consumes the cache, adds into
//! the gradient accumulators and returns the gradient w.r.t. the layer input.
//! Convolution is cross-correlation (no kernel flip), the usual deep-learning
//! convention.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{S2iError, S2iResult};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    /// Negative-side slope.
    LeakyRelu(f64),
    /// Exponential saturation scale.
    Elu(f64),
    Tanh,
    /// Log-softmax over the last axis of a [batch, classes] tensor.
    SoftmaxLog,
}

/// Visitor over (name, parameter, gradient) triples, in a stable order.
pub type ParamFn<'a, F> = dyn FnMut(String, &mut Tensor<F>, &mut Tensor<F>) + 'a;
/// Visitor over non-optimized persistent state (batch-norm running stats).
pub type StateFn<'a, F> = dyn FnMut(String, &mut Tensor<F>) + 'a;

pub enum Layer<F> {
    Conv2d(Conv2d<F>),
    Upsample(Upsample<F>),
    FullyConnected(FullyConnected<F>),
    BatchNorm(BatchNorm<F>),
    Act(ActLayer<F>),
    Dropout(DropoutLayer<F>),
    Reshape(Reshape),
}

impl<F: Scalar> Layer<F> {
    pub fn forward(
        &mut self,
        x: &Tensor<F>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
        record: bool,
    ) -> S2iResult<Tensor<F>> {
        match self {
            Layer::Conv2d(l) => l.forward(x, record),
            Layer::Upsample(l) => l.forward(x, record),
            Layer::FullyConnected(l) => l.forward(x, record),
            Layer::BatchNorm(l) => l.forward(x, mode, record),
            Layer::Act(l) => l.forward(x, record),
            Layer::Dropout(l) => l.forward(x, mode, rng, record),
            Layer::Reshape(l) => l.forward(x, record),
        }
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
        match self {
            Layer::Conv2d(l) => l.backward(dy),
            Layer::Upsample(l) => l.backward(dy),
            Layer::FullyConnected(l) => l.backward(dy),
            Layer::BatchNorm(l) => l.backward(dy),
            Layer::Act(l) => l.backward(dy),
            Layer::Dropout(l) => l.backward(dy),
            Layer::Reshape(l) => l.backward(dy),
        }
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut ParamFn<'_, F>) {
        match self {
            Layer::Conv2d(l) => {
                f(format!("{prefix}/weight"), &mut l.w, &mut l.gw);
                f(format!("{prefix}/bias"), &mut l.b, &mut l.gb);
            }
            Layer::FullyConnected(l) => {
                f(format!("{prefix}/weight"), &mut l.w, &mut l.gw);
                f(format!("{prefix}/bias"), &mut l.b, &mut l.gb);
            }
            Layer::BatchNorm(l) => {
                f(format!("{prefix}/gamma"), &mut l.gamma, &mut l.ggamma);
                f(format!("{prefix}/beta"), &mut l.beta, &mut l.gbeta);
            }
            _ => {}
        }
    }

    pub fn visit_state(&mut self, prefix: &str, f: &mut StateFn<'_, F>) {
        if let Layer::BatchNorm(l) = self {
            f(format!("{prefix}/running_mean"), &mut l.running_mean);
            f(format!("{prefix}/running_var"), &mut l.running_var);
        }
    }

    pub fn zero_grads(&mut self) {
        match self {
            Layer::Conv2d(l) => {
                l.gw.fill(F::zero());
                l.gb.fill(F::zero());
            }
            Layer::FullyConnected(l) => {
                l.gw.fill(F::zero());
                l.gb.fill(F::zero());
            }
            Layer::BatchNorm(l) => {
                l.ggamma.fill(F::zero());
                l.gbeta.fill(F::zero());
            }
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// conv2d

pub struct Conv2d<F> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    /// [out_ch, in_ch, kh, kw]
    pub w: Tensor<F>,
    /// [out_ch]
    pub b: Tensor<F>,
    pub gw: Tensor<F>,
    pub gb: Tensor<F>,
    cache: Option<Tensor<F>>,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Self {
        let w = Tensor::zeros(&[out_ch, in_ch, kernel.0, kernel.1]);
        let b = Tensor::zeros(&[out_ch]);
        Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            gw: w.clone(),
            gb: b.clone(),
            w,
            b,
            cache: None,
        }
    }

    pub fn out_spatial(&self, h: usize, w: usize) -> S2iResult<(usize, usize)> {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        if h + 2 * ph < kh || w + 2 * pw < kw {
            return Err(S2iError::shape(
                "conv2d",
                format!("input at least {}x{} after padding", kh, kw),
                format!("{}x{} with padding ({},{})", h, w, ph, pw),
            ));
        }
        Ok(((h + 2 * ph - kh) / sh + 1, (w + 2 * pw - kw) / sw + 1))
    }

    fn check_input(&self, x: &Tensor<F>) -> S2iResult<()> {
        let d = x.dims();
        if d.len() != 4 || d[1] != self.in_ch {
            return Err(S2iError::shape(
                "conv2d input",
                format!("[b, {}, h, w]", self.in_ch),
                format!("{:?}", d),
            ));
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor<F>, record: bool) -> S2iResult<Tensor<F>> {
        self.check_input(x)?;
        let (bsz, _, ih, iw) = (x.dims()[0], x.dims()[1], x.dims()[2], x.dims()[3]);
        let (oh, ow) = self.out_spatial(ih, iw)?;
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        let mut out = Tensor::zeros(&[bsz, self.out_ch, oh, ow]);

        let xd = x.data();
        let wd = self.w.data();
        let bd = self.b.data();
        let od = out.data_mut();

        for b in 0..bsz {
            for oc in 0..self.out_ch {
                let obase = ((b * self.out_ch + oc) * oh) * ow;
                od[obase..obase + oh * ow].iter_mut().for_each(|v| *v = bd[oc]);
                for ic in 0..self.in_ch {
                    let ibase = ((b * self.in_ch + ic) * ih) * iw;
                    let wbase = ((oc * self.in_ch + ic) * kh) * kw;
                    for ki in 0..kh {
                        for kj in 0..kw {
                            let wv = wd[wbase + ki * kw + kj];
                            // valid output rows: 0 <= oy*sh + ki - ph < ih
                            let oy_lo = ph.saturating_sub(ki).div_ceil(sh);
                            let oy_hi = ((ih + ph - ki - 1) / sh + 1).min(oh);
                            let ox_lo = pw.saturating_sub(kj).div_ceil(sw);
                            let ox_hi = ((iw + pw - kj - 1) / sw + 1).min(ow);
                            for oy in oy_lo..oy_hi {
                                let iy = oy * sh + ki - ph;
                                let irow = ibase + iy * iw;
                                let orow = obase + oy * ow;
                                if sw == 1 {
                                    let ishift = irow + ox_lo + kj - pw;
                                    let n = ox_hi - ox_lo;
                                    let (src, dst) =
                                        (&xd[ishift..ishift + n], &mut od[orow + ox_lo..orow + ox_lo + n]);
                                    for (d, s) in dst.iter_mut().zip(src.iter()) {
                                        *d = *d + wv * *s;
                                    }
                                } else {
                                    for ox in ox_lo..ox_hi {
                                        let ix = ox * sw + kj - pw;
                                        od[orow + ox] = od[orow + ox] + wv * xd[irow + ix];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if record {
            self.cache = Some(x.clone());
        }
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
        let x = self
            .cache
            .take()
            .ok_or_else(|| S2iError::Training("conv2d backward without recorded forward".into()))?;
        let (bsz, _, ih, iw) = (x.dims()[0], x.dims()[1], x.dims()[2], x.dims()[3]);
        let (oh, ow) = (dy.dims()[2], dy.dims()[3]);
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;

        let mut dx = Tensor::zeros(x.dims());
        let xd = x.data();
        let dyd = dy.data();
        let wd = self.w.data();
        let gwd = self.gw.data_mut();
        let gbd = self.gb.data_mut();
        let dxd = dx.data_mut();

        for b in 0..bsz {
            for oc in 0..self.out_ch {
                let obase = ((b * self.out_ch + oc) * oh) * ow;
                let mut gb_acc = F::zero();
                for v in &dyd[obase..obase + oh * ow] {
                    gb_acc = gb_acc + *v;
                }
                gbd[oc] = gbd[oc] + gb_acc;
                for ic in 0..self.in_ch {
                    let ibase = ((b * self.in_ch + ic) * ih) * iw;
                    let wbase = ((oc * self.in_ch + ic) * kh) * kw;
                    for ki in 0..kh {
                        for kj in 0..kw {
                            let oy_lo = ph.saturating_sub(ki).div_ceil(sh);
                            let oy_hi = ((ih + ph - ki - 1) / sh + 1).min(oh);
                            let ox_lo = pw.saturating_sub(kj).div_ceil(sw);
                            let ox_hi = ((iw + pw - kj - 1) / sw + 1).min(ow);
                            let wv = wd[wbase + ki * kw + kj];
                            let mut gw_acc = F::zero();
                            for oy in oy_lo..oy_hi {
                                let iy = oy * sh + ki - ph;
                                let irow = ibase + iy * iw;
                                let orow = obase + oy * ow;
                                if sw == 1 {
                                    let ishift = irow + ox_lo + kj - pw;
                                    let n = ox_hi - ox_lo;
                                    let dyr = &dyd[orow + ox_lo..orow + ox_lo + n];
                                    let xr = &xd[ishift..ishift + n];
                                    for (g, xv) in dyr.iter().zip(xr.iter()) {
                                        gw_acc = gw_acc + *g * *xv;
                                    }
                                    let dxr = &mut dxd[ishift..ishift + n];
                                    for (d, g) in dxr.iter_mut().zip(dyr.iter()) {
                                        *d = *d + wv * *g;
                                    }
                                } else {
                                    for ox in ox_lo..ox_hi {
                                        let ix = ox * sw + kj - pw;
                                        let g = dyd[orow + ox];
                                        gw_acc = gw_acc + g * xd[irow + ix];
                                        dxd[irow + ix] = dxd[irow + ix] + wv * g;
                                    }
                                }
                            }
                            gwd[wbase + ki * kw + kj] = gwd[wbase + ki * kw + kj] + gw_acc;
                        }
                    }
                }
            }
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------
// nearest-neighbor upsample

/// Nearest-neighbor resize to an explicit target. Target 2x the input matches
/// plain pixel duplication; upsampling from 1x1 broadcasts.
pub struct Upsample<F> {
    pub out_h: usize,
    pub out_w: usize,
    cache_dims: Option<Vec<usize>>,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar> Upsample<F> {
    pub fn new(out_h: usize, out_w: usize) -> Self {
        Upsample {
            out_h,
            out_w,
            cache_dims: None,
            _marker: std::marker::PhantomData,
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>, record: bool) -> S2iResult<Tensor<F>> {
        let d = x.dims();
        if d.len() != 4 {
            return Err(S2iError::shape("upsample input", "[b, c, h, w]", format!("{:?}", d)));
        }
        let (bsz, c, ih, iw) = (d[0], d[1], d[2], d[3]);
        if self.out_h < ih || self.out_w < iw {
            return Err(S2iError::shape(
                "upsample",
                format!("target >= input, input {}x{}", ih, iw),
                format!("target {}x{}", self.out_h, self.out_w),
            ));
        }
        let mut out = Tensor::zeros(&[bsz, c, self.out_h, self.out_w]);
        let xd = x.data();
        let od = out.data_mut();
        for bc in 0..bsz * c {
            let ibase = bc * ih * iw;
            let obase = bc * self.out_h * self.out_w;
            for oy in 0..self.out_h {
                let iy = oy * ih / self.out_h;
                let irow = ibase + iy * iw;
                let orow = obase + oy * self.out_w;
                for ox in 0..self.out_w {
                    od[orow + ox] = xd[irow + ox * iw / self.out_w];
                }
            }
        }
        if record {
            self.cache_dims = Some(d.to_vec());
        }
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
        let dims = self
            .cache_dims
            .take()
            .ok_or_else(|| S2iError::Training("upsample backward without recorded forward".into()))?;
        let (bsz, c, ih, iw) = (dims[0], dims[1], dims[2], dims[3]);
        let mut dx = Tensor::zeros(&dims);
        let dyd = dy.data();
        let dxd = dx.data_mut();
        for bc in 0..bsz * c {
            let ibase = bc * ih * iw;
            let obase = bc * self.out_h * self.out_w;
            for oy in 0..self.out_h {
                let iy = oy * ih / self.out_h;
                let irow = ibase + iy * iw;
                let orow = obase + oy * self.out_w;
                for ox in 0..self.out_w {
                    let ix = ox * iw / self.out_w;
                    dxd[irow + ix] = dxd[irow + ix] + dyd[orow + ox];
                }
            }
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------
// fully connected

pub struct FullyConnected<F> {
    pub in_units: usize,
    pub out_units: usize,
    /// [out, in]
    pub w: Tensor<F>,
    pub b: Tensor<F>,
    pub gw: Tensor<F>,
    pub gb: Tensor<F>,
    cache: Option<Tensor<F>>,
}

impl<F: Scalar> FullyConnected<F> {
    pub fn new(in_units: usize, out_units: usize) -> Self {
        let w = Tensor::zeros(&[out_units, in_units]);
        let b = Tensor::zeros(&[out_units]);
        FullyConnected {
            in_units,
            out_units,
            gw: w.clone(),
            gb: b.clone(),
            w,
            b,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>, record: bool) -> S2iResult<Tensor<F>> {
        let d = x.dims();
        if d.len() != 2 || d[1] != self.in_units {
            return Err(S2iError::shape(
                "fully_connected input",
                format!("[b, {}]", self.in_units),
                format!("{:?}", d),
            ));
        }
        let bsz = d[0];
        let mut out = Tensor::zeros(&[bsz, self.out_units]);
        let xd = x.data();
        let wd = self.w.data();
        let bd = self.b.data();
        let od = out.data_mut();
        for b in 0..bsz {
            let xrow = &xd[b * self.in_units..(b + 1) * self.in_units];
            let orow = &mut od[b * self.out_units..(b + 1) * self.out_units];
            for (o, ov) in orow.iter_mut().enumerate() {
                let wrow = &wd[o * self.in_units..(o + 1) * self.in_units];
                let mut acc = bd[o];
                for (wv, xv) in wrow.iter().zip(xrow.iter()) {
                    acc = acc + *wv * *xv;
                }
                *ov = acc;
            }
        }
        if record {
            self.cache = Some(x.clone());
        }
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
        let x = self.cache.take().ok_or_else(|| {
            S2iError::Training("fully_connected backward without recorded forward".into())
        })?;
        let bsz = x.dims()[0];
        let mut dx = Tensor::zeros(x.dims());
        let xd = x.data();
        let dyd = dy.data();
        let wd = self.w.data();
        let gwd = self.gw.data_mut();
        let gbd = self.gb.data_mut();
        let dxd = dx.data_mut();
        for b in 0..bsz {
            let xrow = &xd[b * self.in_units..(b + 1) * self.in_units];
            let dyrow = &dyd[b * self.out_units..(b + 1) * self.out_units];
            for (o, g) in dyrow.iter().enumerate() {
                gbd[o] = gbd[o] + *g;
                let gwrow = &mut gwd[o * self.in_units..(o + 1) * self.in_units];
                for (gw, xv) in gwrow.iter_mut().zip(xrow.iter()) {
                    *gw = *gw + *g * *xv;
                }
                let wrow = &wd[o * self.in_units..(o + 1) * self.in_units];
                let dxrow = &mut dxd[b * self.in_units..(b + 1) * self.in_units];
                for (dxv, wv) in dxrow.iter_mut().zip(wrow.iter()) {
                    *dxv = *dxv + *g * *wv;
                }
            }
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------
// batch norm

/// Per-channel batch normalization. Accepts [b, c, h, w] or [b, units]
/// (units act as channels with 1x1 spatial extent). Running statistics are
/// updated in train mode with keep-old momentum and used verbatim in eval.
pub struct BatchNorm<F> {
    pub channels: usize,
    pub momentum: F,
    pub eps: F,
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
    pub ggamma: Tensor<F>,
    pub gbeta: Tensor<F>,
    pub running_mean: Tensor<F>,
    pub running_var: Tensor<F>,
    cache: Option<BnCache<F>>,
}

struct BnCache<F> {
    xhat: Tensor<F>,
    invstd: Vec<F>,
    n_per_channel: usize,
    mode: Mode,
}

impl<F: Scalar> BatchNorm<F> {
    pub fn new(channels: usize, momentum: f64) -> Self {
        BatchNorm {
            channels,
            momentum: F::from_f64(momentum),
            eps: F::from_f64(1e-5),
            gamma: Tensor::filled(&[channels], F::one()),
            beta: Tensor::zeros(&[channels]),
            ggamma: Tensor::zeros(&[channels]),
            gbeta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], F::one()),
            cache: None,
        }
    }

    fn layout(&self, x: &Tensor<F>) -> S2iResult<(usize, usize)> {
        let d = x.dims();
        match d.len() {
            4 if d[1] == self.channels => Ok((d[0], d[2] * d[3])),
            2 if d[1] == self.channels => Ok((d[0], 1)),
            _ => Err(S2iError::shape(
                "batch_norm input",
                format!("[b, {}, h, w] or [b, {}]", self.channels, self.channels),
                format!("{:?}", d),
            )),
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode, record: bool) -> S2iResult<Tensor<F>> {
        let (bsz, spatial) = self.layout(x)?;
        let n = bsz * spatial;
        let c = self.channels;
        let xd = x.data();
        let mut out = Tensor::zeros(x.dims());
        let mut xhat = Tensor::zeros(x.dims());
        let mut invstd = vec![F::zero(); c];

        for ch in 0..c {
            let (mean, var) = match mode {
                Mode::Train => {
                    let mut sum = F::zero();
                    for b in 0..bsz {
                        let base = (b * c + ch) * spatial;
                        for v in &xd[base..base + spatial] {
                            sum = sum + *v;
                        }
                    }
                    let mean = sum / F::from_usize(n);
                    let mut varsum = F::zero();
                    for b in 0..bsz {
                        let base = (b * c + ch) * spatial;
                        for v in &xd[base..base + spatial] {
                            let d = *v - mean;
                            varsum = varsum + d * d;
                        }
                    }
                    let var = varsum / F::from_usize(n);
                    let m = self.momentum;
                    self.running_mean.data_mut()[ch] =
                        m * self.running_mean.data()[ch] + (F::one() - m) * mean;
                    self.running_var.data_mut()[ch] =
                        m * self.running_var.data()[ch] + (F::one() - m) * var;
                    (mean, var)
                }
                Mode::Eval => (self.running_mean.data()[ch], self.running_var.data()[ch]),
            };
            let istd = F::one() / (var + self.eps).sqrt();
            invstd[ch] = istd;
            let g = self.gamma.data()[ch];
            let be = self.beta.data()[ch];
            for b in 0..bsz {
                let base = (b * c + ch) * spatial;
                for i in base..base + spatial {
                    let xh = (xd[i] - mean) * istd;
                    xhat.data_mut()[i] = xh;
                    out.data_mut()[i] = g * xh + be;
                }
            }
        }

        if record {
            self.cache = Some(BnCache {
                xhat,
                invstd,
                n_per_channel: n,
                mode,
            });
        }
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| S2iError::Training("batch_norm backward without recorded forward".into()))?;
        let (bsz, spatial) = self.layout(dy)?;
        let c = self.channels;
        let n = F::from_usize(cache.n_per_channel);
        let dyd = dy.data();
        let xhat = cache.xhat.data();
        let mut dx = Tensor::zeros(dy.dims());

        for ch in 0..c {
            let g = self.gamma.data()[ch];
            let istd = cache.invstd[ch];
            let mut dbeta = F::zero();
            let mut dgamma = F::zero();
            for b in 0..bsz {
                let base = (b * c + ch) * spatial;
                for i in base..base + spatial {
                    dbeta = dbeta + dyd[i];
                    dgamma = dgamma + dyd[i] * xhat[i];
                }
            }
            self.gbeta.data_mut()[ch] = self.gbeta.data_mut()[ch] + dbeta;
            self.ggamma.data_mut()[ch] = self.ggamma.data_mut()[ch] + dgamma;

            match cache.mode {
                Mode::Train => {
                    // Standard train-mode backward through the batch statistics:
                    // dx = (gamma*istd/n) * (n*dy - sum(dy) - xhat * sum(dy*xhat))
                    let scale = g * istd / n;
                    for b in 0..bsz {
                        let base = (b * c + ch) * spatial;
                        for i in base..base + spatial {
                            dx.data_mut()[i] =
                                scale * (n * dyd[i] - dbeta - xhat[i] * dgamma);
                        }
                    }
                }
                Mode::Eval => {
                    // Running stats are constants: dx = dy * gamma * istd.
                    let scale = g * istd;
                    for b in 0..bsz {
                        let base = (b * c + ch) * spatial;
                        for i in base..base + spatial {
                            dx.data_mut()[i] = scale * dyd[i];
                        }
                    }
                }
            }
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------
// activations

pub struct ActLayer<F> {
    pub act: Activation,
    cache: Option<ActCache<F>>,
}

enum ActCache<F> {
    Input(Tensor<F>),
    Output(Tensor<F>),
    /// log-probs together with plain probs per row
    Softmax { probs: Tensor<F> },
}

impl<F: Scalar> ActLayer<F> {
    pub fn new(act: Activation) -> Self {
        ActLayer { act, cache: None }
    }

    pub fn forward(&mut self, x: &Tensor<F>, record: bool) -> S2iResult<Tensor<F>> {
        let out = match self.act {
            Activation::Relu => x.map(|v| if v > F::zero() { v } else { F::zero() }),
            Activation::LeakyRelu(slope) => {
                let s = F::from_f64(slope);
                x.map(|v| if v > F::zero() { v } else { s * v })
            }
            Activation::Elu(alpha) => {
                let a = F::from_f64(alpha);
                x.map(|v| if v > F::zero() { v } else { a * (v.exp() - F::one()) })
            }
            Activation::Tanh => x.map(|v| v.tanh()),
            Activation::SoftmaxLog => {
                let d = x.dims();
                if d.len() != 2 {
                    return Err(S2iError::shape(
                        "softmax_log input",
                        "[b, classes]",
                        format!("{:?}", d),
                    ));
                }
                let (bsz, k) = (d[0], d[1]);
                let mut out = Tensor::zeros(d);
                let xd = x.data();
                let od = out.data_mut();
                for b in 0..bsz {
                    let row = &xd[b * k..(b + 1) * k];
                    let mx = row.iter().fold(F::neg_infinity(), |m, &v| if v > m { v } else { m });
                    let mut lse = F::zero();
                    for &v in row {
                        lse = lse + (v - mx).exp();
                    }
                    let lse = lse.ln() + mx;
                    for (o, &v) in od[b * k..(b + 1) * k].iter_mut().zip(row.iter()) {
                        *o = v - lse;
                    }
                }
                out
            }
        };

        if record {
            self.cache = Some(match self.act {
                Activation::Relu | Activation::LeakyRelu(_) => ActCache::Input(x.clone()),
                Activation::Elu(_) | Activation::Tanh => ActCache::Output(out.clone()),
                Activation::SoftmaxLog => ActCache::Softmax {
                    probs: out.map(|v| v.exp()),
                },
            });
        }
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| S2iError::Training("activation backward without recorded forward".into()))?;
        let out = match (&self.act, &cache) {
            (Activation::Relu, ActCache::Input(x)) => {
                let mut dx = dy.clone();
                for (d, &xv) in dx.data_mut().iter_mut().zip(x.data().iter()) {
                    if xv <= F::zero() {
                        *d = F::zero();
                    }
                }
                dx
            }
            (Activation::LeakyRelu(slope), ActCache::Input(x)) => {
                let s = F::from_f64(*slope);
                let mut dx = dy.clone();
                for (d, &xv) in dx.data_mut().iter_mut().zip(x.data().iter()) {
                    if xv <= F::zero() {
                        *d = *d * s;
                    }
                }
                dx
            }
            (Activation::Elu(alpha), ActCache::Output(y)) => {
                let a = F::from_f64(*alpha);
                let mut dx = dy.clone();
                for (d, &yv) in dx.data_mut().iter_mut().zip(y.data().iter()) {
                    if yv <= F::zero() {
                        *d = *d * (yv + a);
                    }
                }
                dx
            }
            (Activation::Tanh, ActCache::Output(y)) => {
                let mut dx = dy.clone();
                for (d, &yv) in dx.data_mut().iter_mut().zip(y.data().iter()) {
                    *d = *d * (F::one() - yv * yv);
                }
                dx
            }
            (Activation::SoftmaxLog, ActCache::Softmax { probs }) => {
                let d = dy.dims();
                let (bsz, k) = (d[0], d[1]);
                let mut dx = Tensor::zeros(d);
                let dyd = dy.data();
                let pd = probs.data();
                for b in 0..bsz {
                    let mut s = F::zero();
                    for &g in &dyd[b * k..(b + 1) * k] {
                        s = s + g;
                    }
                    for i in 0..k {
                        dx.data_mut()[b * k + i] = dyd[b * k + i] - pd[b * k + i] * s;
                    }
                }
                dx
            }
            _ => {
                return Err(S2iError::Training(
                    "activation backward cache does not match activation kind".into(),
                ))
            }
        };
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// dropout

/// Inverted dropout: kept units are scaled by 1/(1-p) so the expected
/// activation is unchanged. Active in train mode always; active in eval mode
/// only when `eval_active` (translation-time stochasticity).
pub struct DropoutLayer<F> {
    pub p: f64,
    pub eval_active: bool,
    cache: Option<Option<Tensor<F>>>, // None mask means pass-through
}

impl<F: Scalar> DropoutLayer<F> {
    pub fn new(p: f64, eval_active: bool) -> Self {
        assert!((0.0..1.0).contains(&p), "dropout p must be in [0, 1)");
        DropoutLayer {
            p,
            eval_active,
            cache: None,
        }
    }

    fn active(&self, mode: Mode) -> bool {
        self.p > 0.0 && (mode == Mode::Train || self.eval_active)
    }

    pub fn forward(
        &mut self,
        x: &Tensor<F>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
        record: bool,
    ) -> S2iResult<Tensor<F>> {
        if !self.active(mode) {
            if record {
                self.cache = Some(None);
            }
            return Ok(x.clone());
        }
        let scale = F::from_f64(1.0 / (1.0 - self.p));
        let mut mask = Tensor::zeros(x.dims());
        let mut out = x.clone();
        for (m, o) in mask.data_mut().iter_mut().zip(out.data_mut().iter_mut()) {
            // Mask decisions are drawn as f64 so f32 and f64 instantiations
            // consume the stream identically.
            let keep = rng.random::<f64>() >= self.p;
            *m = if keep { scale } else { F::zero() };
            *o = *o * *m;
        }
        if record {
            self.cache = Some(Some(mask));
        }
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| S2iError::Training("dropout backward without recorded forward".into()))?;
        Ok(match cache {
            None => dy.clone(),
            Some(mask) => {
                let mut dx = dy.clone();
                for (d, &m) in dx.data_mut().iter_mut().zip(mask.data().iter()) {
                    *d = *d * m;
                }
                dx
            }
        })
    }
}

// ---------------------------------------------------------------------------
// reshape

/// Reinterprets each sample's trailing dims; batch dim is preserved.
pub struct Reshape {
    pub per_sample: Vec<usize>,
    cache_dims: Option<Vec<usize>>,
}

impl Reshape {
    pub fn new(per_sample: &[usize]) -> Self {
        Reshape {
            per_sample: per_sample.to_vec(),
            cache_dims: None,
        }
    }

    pub fn forward<F: Scalar>(&mut self, x: &Tensor<F>, record: bool) -> S2iResult<Tensor<F>> {
        let d = x.dims();
        let want: usize = self.per_sample.iter().product();
        let have: usize = d[1..].iter().product();
        if want != have {
            return Err(S2iError::shape(
                "reshape",
                format!("{} elements per sample", want),
                format!("{} in {:?}", have, d),
            ));
        }
        let mut dims = vec![d[0]];
        dims.extend_from_slice(&self.per_sample);
        if record {
            self.cache_dims = Some(d.to_vec());
        }
        x.reshape(&dims)
    }

    pub fn backward<F: Scalar>(&mut self, dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
        let dims = self
            .cache_dims
            .take()
            .ok_or_else(|| S2iError::Training("reshape backward without recorded forward".into()))?;
        dy.reshape(&dims)
    }
}

// ---------------------------------------------------------------------------
// dense block

/// DenseNet-style block: every internal layer sees the channel-concatenation
/// of the block input and all earlier layer outputs. Growth units are
/// conv -> BN -> ReLU emitting `growth` channels; the block output is the
/// final concatenation, or the head's output when a head is present (the head
/// conv consumes the full concatenation and is not re-concatenated).
pub struct DenseBlock<F> {
    pub units: Vec<Vec<Layer<F>>>,
    pub head: Option<Vec<Layer<F>>>,
    feat_channels: Vec<usize>,
}

pub(crate) fn concat_channels<F: Scalar>(feats: &[Tensor<F>]) -> Tensor<F> {
    let d0 = feats[0].dims();
    let (bsz, h, w) = (d0[0], d0[2], d0[3]);
    let total_c: usize = feats.iter().map(|t| t.dims()[1]).sum();
    let mut out = Tensor::zeros(&[bsz, total_c, h, w]);
    let hw = h * w;
    let od = out.data_mut();
    for b in 0..bsz {
        let mut coff = 0usize;
        for t in feats {
            let c = t.dims()[1];
            let src = &t.data()[b * c * hw..(b + 1) * c * hw];
            let dst = &mut od[(b * total_c + coff) * hw..(b * total_c + coff + c) * hw];
            dst.copy_from_slice(src);
            coff += c;
        }
    }
    out
}

pub(crate) fn split_channels<F: Scalar>(grad: &Tensor<F>, channels: &[usize]) -> Vec<Tensor<F>> {
    let d = grad.dims();
    let (bsz, h, w) = (d[0], d[2], d[3]);
    let total_c = d[1];
    debug_assert_eq!(total_c, channels.iter().sum::<usize>());
    let hw = h * w;
    let gd = grad.data();
    let mut parts: Vec<Tensor<F>> = channels.iter().map(|&c| Tensor::zeros(&[bsz, c, h, w])).collect();
    for b in 0..bsz {
        let mut coff = 0usize;
        for (part, &c) in parts.iter_mut().zip(channels.iter()) {
            let dst = &mut part.data_mut()[b * c * hw..(b + 1) * c * hw];
            let src = &gd[(b * total_c + coff) * hw..(b * total_c + coff + c) * hw];
            dst.copy_from_slice(src);
            coff += c;
        }
    }
    parts
}

fn chain_forward<F: Scalar>(
    chain: &mut [Layer<F>],
    x: &Tensor<F>,
    mode: Mode,
    rng: &mut ChaCha8Rng,
    record: bool,
) -> S2iResult<Tensor<F>> {
    let mut cur = x.clone();
    for layer in chain.iter_mut() {
        cur = layer.forward(&cur, mode, rng, record)?;
    }
    Ok(cur)
}

fn chain_backward<F: Scalar>(chain: &mut [Layer<F>], dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
    let mut cur = dy.clone();
    for layer in chain.iter_mut().rev() {
        cur = layer.backward(&cur)?;
    }
    Ok(cur)
}

impl<F: Scalar> DenseBlock<F> {
    pub fn new(units: Vec<Vec<Layer<F>>>, head: Option<Vec<Layer<F>>>) -> Self {
        DenseBlock {
            units,
            head,
            feat_channels: Vec::new(),
        }
    }

    pub fn forward(
        &mut self,
        x: &Tensor<F>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
        record: bool,
    ) -> S2iResult<Tensor<F>> {
        let mut feats: Vec<Tensor<F>> = vec![x.clone()];
        for unit in self.units.iter_mut() {
            let inp = concat_channels(&feats);
            let y = chain_forward(unit, &inp, mode, rng, record)?;
            feats.push(y);
        }
        let out = match self.head.as_mut() {
            Some(head) => {
                let inp = concat_channels(&feats);
                chain_forward(head, &inp, mode, rng, record)?
            }
            None => concat_channels(&feats),
        };
        if record {
            self.feat_channels = feats.iter().map(|t| t.dims()[1]).collect();
        }
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
        if self.feat_channels.is_empty() {
            return Err(S2iError::Training(
                "dense block backward without recorded forward".into(),
            ));
        }
        let channels = std::mem::take(&mut self.feat_channels);
        let dims_hint: Vec<usize> = dy.dims().to_vec();
        let (bsz, h, w) = (dims_hint[0], dims_hint[2], dims_hint[3]);
        let mut feat_grads: Vec<Tensor<F>> = channels
            .iter()
            .map(|&c| Tensor::zeros(&[bsz, c, h, w]))
            .collect();

        // Seed gradients: either through the head or from the output concat.
        match self.head.as_mut() {
            Some(head) => {
                let dinp = chain_backward(head, dy)?;
                for (acc, part) in feat_grads.iter_mut().zip(split_channels(&dinp, &channels)) {
                    acc.add_assign(&part);
                }
            }
            None => {
                for (acc, part) in feat_grads.iter_mut().zip(split_channels(dy, &channels)) {
                    acc.add_assign(&part);
                }
            }
        }

        // Walk growth units in reverse; unit i consumed concat(feats[0..=i])
        // and produced feats[i+1].
        for i in (0..self.units.len()).rev() {
            let dout = feat_grads[i + 1].clone();
            let dinp = chain_backward(&mut self.units[i], &dout)?;
            for (acc, part) in feat_grads[..=i]
                .iter_mut()
                .zip(split_channels(&dinp, &channels[..=i]))
            {
                acc.add_assign(&part);
            }
        }
        Ok(feat_grads[0].clone())
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut ParamFn<'_, F>) {
        for (i, unit) in self.units.iter_mut().enumerate() {
            for (j, layer) in unit.iter_mut().enumerate() {
                layer.visit_params(&format!("{prefix}/u{i}/l{j}"), f);
            }
        }
        if let Some(head) = self.head.as_mut() {
            for (j, layer) in head.iter_mut().enumerate() {
                layer.visit_params(&format!("{prefix}/head/l{j}"), f);
            }
        }
    }

    pub fn visit_state(&mut self, prefix: &str, f: &mut StateFn<'_, F>) {
        for (i, unit) in self.units.iter_mut().enumerate() {
            for (j, layer) in unit.iter_mut().enumerate() {
                layer.visit_state(&format!("{prefix}/u{i}/l{j}"), f);
            }
        }
        if let Some(head) = self.head.as_mut() {
            for (j, layer) in head.iter_mut().enumerate() {
                layer.visit_state(&format!("{prefix}/head/l{j}"), f);
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for unit in self.units.iter_mut() {
            for layer in unit.iter_mut() {
                layer.zero_grads();
            }
        }
        if let Some(head) = self.head.as_mut() {
            for layer in head.iter_mut() {
                layer.zero_grads();
            }
        }
    }

    /// Channels of the block output given its input channel count.
    pub fn out_channels(units: usize, growth: usize, in_ch: usize, head_out: Option<usize>) -> usize {
        match head_out {
            Some(h) => h,
            None => in_ch + units * growth,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn conv2d_matches_brute_force_reference() {
        // Reference: quadruple loop over a padded input copy.
        let mut conv = Conv2d::<f64>::new(2, 3, (3, 3), (2, 2), (1, 1));
        let mut r = rng();
        for v in conv.w.data_mut().iter_mut() {
            *v = r.random::<f64>() - 0.5;
        }
        for v in conv.b.data_mut().iter_mut() {
            *v = r.random::<f64>() - 0.5;
        }
        let x = Tensor::from_vec(
            &[1, 2, 5, 6],
            (0..60).map(|_| r.random::<f64>() - 0.5).collect(),
        )
        .unwrap();

        let y = conv.forward(&x, false).unwrap();
        assert_eq!(y.dims(), &[1, 3, 3, 3]);

        let (ph, pw) = (1usize, 1usize);
        let (ih, iw) = (5usize, 6usize);
        for oc in 0..3 {
            for oy in 0..3 {
                for ox in 0..3 {
                    let mut acc = conv.b.data()[oc];
                    for ic in 0..2 {
                        for ki in 0..3 {
                            for kj in 0..3 {
                                let iy = (oy * 2 + ki) as isize - ph as isize;
                                let ix = (ox * 2 + kj) as isize - pw as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < ih && (ix as usize) < iw {
                                    acc += conv.w.at4(oc, ic, ki, kj)
                                        * x.at4(0, ic, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                    let got = y.at4(0, oc, oy, ox);
                    assert!(
                        (got - acc).abs() < 1e-12,
                        "conv mismatch at ({oc},{oy},{ox}): {got} vs {acc}"
                    );
                }
            }
        }
    }

    #[test]
    fn conv2d_shape_errors() {
        let mut conv = Conv2d::<f32>::new(1, 1, (3, 3), (1, 1), (0, 0));
        let bad = Tensor::zeros(&[1, 2, 5, 5]);
        assert!(conv.forward(&bad, false).is_err());
        let tiny = Tensor::zeros(&[1, 1, 2, 2]);
        assert!(conv.forward(&tiny, false).is_err());
    }

    #[test]
    fn upsample_doubles_and_broadcasts() {
        let mut up = Upsample::<f32>::new(4, 4);
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = up.forward(&x, false).unwrap();
        assert_eq!(y.data(), &[1., 1., 2., 2., 1., 1., 2., 2., 3., 3., 4., 4., 3., 3., 4., 4.]);

        let mut up3 = Upsample::<f32>::new(3, 3);
        let one = Tensor::from_vec(&[1, 1, 1, 1], vec![5.0]).unwrap();
        let b = up3.forward(&one, false).unwrap();
        assert!(b.data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn upsample_rejects_downsampling() {
        let mut up = Upsample::<f32>::new(2, 2);
        let x = Tensor::zeros(&[1, 1, 3, 3]);
        assert!(up.forward(&x, false).is_err());
    }

    #[test]
    fn upsample_backward_sums_contributions() {
        let mut up = Upsample::<f64>::new(4, 4);
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let _ = up.forward(&x, true).unwrap();
        let dy = Tensor::filled(&[1, 1, 4, 4], 1.0);
        let dx = up.backward(&dy).unwrap();
        // each source pixel fed 4 outputs
        assert!(dx.data().iter().all(|&v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn softmax_log_rows_normalize() {
        let mut act = ActLayer::<f64>::new(Activation::SoftmaxLog);
        let x = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, -5.0, 0.0, 5.0]).unwrap();
        let y = act.forward(&x, false).unwrap();
        for b in 0..2 {
            let s: f64 = y.data()[b * 3..(b + 1) * 3].iter().map(|v| v.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12, "row {b} sums to {s}");
        }
    }

    #[test]
    fn batch_norm_standardizes_in_train_mode() {
        let mut bn = BatchNorm::<f64>::new(2, 0.9);
        let mut r = rng();
        let x = Tensor::from_vec(
            &[4, 2, 3, 3],
            (0..72).map(|_| r.random::<f64>() * 3.0 + 1.0).collect(),
        )
        .unwrap();
        let y = bn.forward(&x, Mode::Train, false).unwrap();
        // gamma=1, beta=0: per-channel output mean ~0, var ~1
        for ch in 0..2 {
            let mut vals = Vec::new();
            for b in 0..4 {
                for i in 0..9 {
                    vals.push(y.data()[(b * 2 + ch) * 9 + i]);
                }
            }
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-5, "channel {ch} mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "channel {ch} var {var}");
        }
    }

    #[test]
    fn batch_norm_eval_uses_running_stats() {
        let mut bn = BatchNorm::<f64>::new(1, 0.5);
        let x = Tensor::from_vec(&[2, 1, 1, 2], vec![2.0, 2.0, 6.0, 6.0]).unwrap();
        let _ = bn.forward(&x, Mode::Train, false).unwrap();
        // batch mean 4, var 4; running: mean 0.5*0+0.5*4=2, var 0.5*1+0.5*4=2.5
        assert!((bn.running_mean.data()[0] - 2.0).abs() < 1e-12);
        assert!((bn.running_var.data()[0] - 2.5).abs() < 1e-12);
        let probe = Tensor::from_vec(&[1, 1, 1, 2], vec![2.0, 2.0]).unwrap();
        let y = bn.forward(&probe, Mode::Eval, false).unwrap();
        let expect = (2.0 - 2.0) / (2.5f64 + 1e-5).sqrt();
        assert!((y.data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn dropout_scales_kept_units_and_masks_gradient() {
        let mut drop = DropoutLayer::<f64>::new(0.5, false);
        let x = Tensor::filled(&[1, 1, 8, 8], 1.0);
        let mut r = rng();
        let y = drop.forward(&x, Mode::Train, &mut r, true).unwrap();
        let kept: Vec<bool> = y.data().iter().map(|&v| v != 0.0).collect();
        assert!(y.data().iter().all(|&v| v == 0.0 || (v - 2.0).abs() < 1e-12));
        assert!(kept.iter().any(|&k| k) && kept.iter().any(|&k| !k));

        let dy = Tensor::filled(&[1, 1, 8, 8], 1.0);
        let dx = drop.backward(&dy).unwrap();
        for (g, &k) in dx.data().iter().zip(kept.iter()) {
            let want = if k { 2.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_eval_identity_unless_opted_in() {
        let x = Tensor::filled(&[1, 1, 4, 4], 3.0);
        let mut r = rng();
        let mut plain = DropoutLayer::<f64>::new(0.5, false);
        let y = plain.forward(&x, Mode::Eval, &mut r, false).unwrap();
        assert_eq!(y.data(), x.data());

        let mut active = DropoutLayer::<f64>::new(0.5, true);
        let y2 = active.forward(&x, Mode::Eval, &mut r, false).unwrap();
        assert!(y2.data().iter().any(|&v| v == 0.0), "eval-active dropout must drop");
    }

    #[test]
    fn dropout_mean_preserving() {
        // Inverted scaling keeps the expectation: average of many masks ~= 1.
        let mut drop = DropoutLayer::<f64>::new(0.5, false);
        let x = Tensor::filled(&[1, 1, 10, 10], 1.0);
        let mut r = rng();
        let rounds = 1000;
        let mut acc = 0.0;
        for _ in 0..rounds {
            let y = drop.forward(&x, Mode::Train, &mut r, false).unwrap();
            acc += y.data().iter().sum::<f64>() / y.len() as f64;
        }
        let mean = acc / rounds as f64;
        assert!((mean - 1.0).abs() < 0.01, "dropout mean drifted: {mean}");
    }

    #[test]
    fn dense_block_concat_channel_arithmetic() {
        // 2 growth units of 3 channels on a 2-channel input: output 2+2*3=8.
        let mk_unit = |in_ch: usize| {
            vec![
                Layer::Conv2d(Conv2d::<f64>::new(in_ch, 3, (3, 3), (1, 1), (1, 1))),
                Layer::Act(ActLayer::new(Activation::Relu)),
            ]
        };
        let mut block = DenseBlock::new(vec![mk_unit(2), mk_unit(5)], None);
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        let mut r = rng();
        let y = block.forward(&x, Mode::Train, &mut r, false).unwrap();
        assert_eq!(y.dims(), &[1, 8, 4, 4]);
        assert_eq!(DenseBlock::<f64>::out_channels(2, 3, 2, None), 8);
    }

    #[test]
    fn concat_split_round_trip() {
        let mut r = rng();
        let a = Tensor::from_vec(&[2, 1, 2, 2], (0..8).map(|_| r.random::<f64>()).collect()).unwrap();
        let b = Tensor::from_vec(&[2, 3, 2, 2], (0..24).map(|_| r.random::<f64>()).collect()).unwrap();
        let cat = concat_channels(&[a.clone(), b.clone()]);
        assert_eq!(cat.dims(), &[2, 4, 2, 2]);
        let parts = split_channels(&cat, &[1, 3]);
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }
}
