use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{INPUT_LEN, OUTPUT_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation.
    fn grad(self, pre: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let y = pre.tanh();
                1.0 - y * y
            }
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            _ => Err(Error::config(format!("unknown activation `{s}`"))),
        }
    }
}

/// Network architecture: stacked GRU layers over the input window, then
/// fully connected layers ending in a linear layer of width 7.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelShape {
    pub gru_layers: usize,
    pub hidden: usize,
    /// Widths of the hidden fully connected layers (the output layer is implied).
    pub fc_widths: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            gru_layers: 6,
            hidden: 32,
            fc_widths: vec![32, 32],
            activation: Activation::Tanh,
        }
    }
}

impl ModelShape {
    pub fn validate(&self) -> Result<()> {
        if self.gru_layers > 0 && self.hidden == 0 {
            return Err(Error::config("GRU hidden size must be > 0"));
        }
        if self.fc_widths.contains(&0) {
            return Err(Error::config("fully connected widths must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GruLayout {
    in_dim: usize,
    wz: usize,
    uz: usize,
    bz: usize,
    wr: usize,
    ur: usize,
    br: usize,
    wn: usize,
    un: usize,
    bn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DenseLayout {
    in_dim: usize,
    out_dim: usize,
    w: usize,
    b: usize,
}

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    gru: Vec<GruLayout>,
    dense: Vec<DenseLayout>,
    tensors: Vec<Tensor>,
    n_params: usize,
}

impl Layout {
    fn new(shape: &ModelShape) -> Self {
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut alloc = |name: String, rows: usize, cols: usize| {
            let at = offset;
            tensors.push(Tensor { name, offset: at, rows, cols });
            offset += rows * cols;
            at
        };
        let h = shape.hidden;
        let mut gru = Vec::new();
        for l in 0..shape.gru_layers {
            let in_dim = if l == 0 { 1 } else { h };
            gru.push(GruLayout {
                in_dim,
                wz: alloc(format!("gru{l}.w_z"), h, in_dim),
                uz: alloc(format!("gru{l}.u_z"), h, h),
                bz: alloc(format!("gru{l}.b_z"), h, 1),
                wr: alloc(format!("gru{l}.w_r"), h, in_dim),
                ur: alloc(format!("gru{l}.u_r"), h, h),
                br: alloc(format!("gru{l}.b_r"), h, 1),
                wn: alloc(format!("gru{l}.w_n"), h, in_dim),
                un: alloc(format!("gru{l}.u_n"), h, h),
                bn: alloc(format!("gru{l}.b_n"), h, 1),
            });
        }
        let mut dense = Vec::new();
        let mut in_dim = if shape.gru_layers > 0 { h } else { INPUT_LEN };
        let widths = shape.fc_widths.iter().copied().chain(std::iter::once(OUTPUT_LEN));
        for (k, out_dim) in widths.enumerate() {
            dense.push(DenseLayout {
                in_dim,
                out_dim,
                w: alloc(format!("fc{k}.w"), out_dim, in_dim),
                b: alloc(format!("fc{k}.b"), out_dim, 1),
            });
            in_dim = out_dim;
        }
        Layout {
            gru,
            dense,
            tensors,
            n_params: offset,
        }
    }
}

/// Affine standardization fitted on the training series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    /// A zero-variance series keeps unit scale.
    pub fn fit(series: &[f64]) -> Self {
        let n = series.len().max(1) as f64;
        let mean = series.iter().sum::<f64>() / n;
        let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Normalizer {
            mean,
            std: if std > 1e-12 { std } else { 1.0 },
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        y * self.std + self.mean
    }
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer { mean: 0.0, std: 1.0 }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// y += W x for row-major `W` (rows x cols).
fn matvec_acc(w: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (yi, row) in y.iter_mut().zip(w.chunks_exact(cols)) {
        *yi += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// dx += W^T dy.
fn matvec_t_acc(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let cols = dx.len();
    for (g, row) in dy.iter().zip(w.chunks_exact(cols)) {
        if *g != 0.0 {
            for (d, a) in dx.iter_mut().zip(row) {
                *d += g * a;
            }
        }
    }
}

/// dW += dy x^T.
fn outer_acc(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (g, row) in dy.iter().zip(dw.chunks_exact_mut(cols)) {
        if *g != 0.0 {
            for (d, xi) in row.iter_mut().zip(x) {
                *d += g * xi;
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
struct GruStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub(crate) struct Cache {
    steps: Vec<Vec<GruStep>>,
    /// Inverted-dropout masks applied to each GRU layer's output sequence.
    gru_masks: Vec<Option<Vec<Vec<f64>>>>,
    dense_in: Vec<Vec<f64>>,
    dense_pre: Vec<Vec<f64>>,
    dense_masks: Vec<Option<Vec<f64>>>,
}

fn dropout_mask(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let keep = 1.0 - p;
    (0..len)
        .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
        .collect()
}

/// GRU encoder plus fully connected head mapping 12 past samples to 7
/// future samples. Parameters live in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    shape: ModelShape,
    layout: Layout,
    params: Vec<f64>,
    pub norm: Normalizer,
}

impl ForecastModel {
    /// All-zero parameters.
    pub fn zeros(shape: ModelShape) -> Result<Self> {
        shape.validate()?;
        let layout = Layout::new(&shape);
        Ok(ForecastModel {
            params: vec![0.0; layout.n_params],
            shape,
            layout,
            norm: Normalizer::default(),
        })
    }

    /// Uniform fan-in initialization for recurrent weights, Glorot for dense
    /// weights, zero biases.
    pub fn init(shape: ModelShape, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = m.shape.hidden.max(1) as f64;
        for t in m.layout.tensors.clone() {
            if t.name.rsplit('.').next().is_some_and(|s| s.starts_with('b')) {
                continue;
            }
            let bound = if t.name.starts_with("gru") {
                1.0 / h.sqrt()
            } else {
                (6.0 / (t.rows + t.cols) as f64).sqrt()
            };
            for p in &mut m.params[t.offset..t.offset + t.len()] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(m)
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.layout.tensors
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params
    }

    fn check_window(window: &[f64]) -> Result<()> {
        if window.len() != INPUT_LEN {
            return Err(Error::Usage(format!(
                "forecast window must have {INPUT_LEN} samples, got {}",
                window.len()
            )));
        }
        Ok(())
    }

    /// Network output for a normalized window (inference: no dropout).
    pub fn forward_normalized(&self, window: &[f64]) -> Result<Vec<f64>> {
        Self::check_window(window)?;
        Ok(self.forward_cached(window, 0.0, None).0)
    }

    /// Forecast of the next 7 samples, in the window's physical units.
    pub fn predict(&self, window_kw: &[f64]) -> Result<Vec<f64>> {
        Self::check_window(window_kw)?;
        let x: Vec<f64> = window_kw.iter().map(|v| self.norm.normalize(*v)).collect();
        let y = self.forward_cached(&x, 0.0, None).0;
        Ok(y.into_iter().map(|v| self.norm.denormalize(v)).collect())
    }

    pub(crate) fn forward_cached(&self, window: &[f64], dropout: f64, mut rng: Option<&mut ChaCha8Rng>) -> (Vec<f64>, Cache) {
        let p = &self.params;
        let h = self.shape.hidden;
        let train = dropout > 0.0 && rng.is_some();
        let mut cache = Cache::default();
        let mut seq: Vec<Vec<f64>> = window.iter().map(|v| vec![*v]).collect();

        for g in &self.layout.gru {
            let mut steps = Vec::with_capacity(seq.len());
            let mut out = Vec::with_capacity(seq.len());
            let mut h_prev = vec![0.0; h];
            for x in &seq {
                let mut az = p[g.bz..g.bz + h].to_vec();
                matvec_acc(&p[g.wz..g.wz + h * g.in_dim], x, &mut az);
                matvec_acc(&p[g.uz..g.uz + h * h], &h_prev, &mut az);
                let z: Vec<f64> = az.iter().map(|a| sigmoid(*a)).collect();

                let mut ar = p[g.br..g.br + h].to_vec();
                matvec_acc(&p[g.wr..g.wr + h * g.in_dim], x, &mut ar);
                matvec_acc(&p[g.ur..g.ur + h * h], &h_prev, &mut ar);
                let r: Vec<f64> = ar.iter().map(|a| sigmoid(*a)).collect();

                let rh: Vec<f64> = r.iter().zip(&h_prev).map(|(a, b)| a * b).collect();
                let mut an = p[g.bn..g.bn + h].to_vec();
                matvec_acc(&p[g.wn..g.wn + h * g.in_dim], x, &mut an);
                matvec_acc(&p[g.un..g.un + h * h], &rh, &mut an);
                let n: Vec<f64> = an.iter().map(|a| a.tanh()).collect();

                let h_new: Vec<f64> = (0..h).map(|i| (1.0 - z[i]) * n[i] + z[i] * h_prev[i]).collect();
                steps.push(GruStep {
                    x: x.clone(),
                    h_prev: std::mem::replace(&mut h_prev, h_new.clone()),
                    z,
                    r,
                    n,
                    rh,
                });
                out.push(h_new);
            }
            let mask = match (&mut rng, train) {
                (Some(rng), true) => {
                    let masks: Vec<Vec<f64>> = out.iter().map(|_| dropout_mask(h, dropout, rng)).collect();
                    for (o, m) in out.iter_mut().zip(&masks) {
                        o.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
                    }
                    Some(masks)
                }
                _ => None,
            };
            cache.gru_masks.push(mask);
            cache.steps.push(steps);
            seq = out;
        }

        let mut act: Vec<f64> = if self.layout.gru.is_empty() {
            window.to_vec()
        } else {
            seq.pop().expect("non-empty window")
        };
        let last = self.layout.dense.len() - 1;
        for (k, d) in self.layout.dense.iter().enumerate() {
            let mut pre = p[d.b..d.b + d.out_dim].to_vec();
            matvec_acc(&p[d.w..d.w + d.out_dim * d.in_dim], &act, &mut pre);
            cache.dense_in.push(std::mem::take(&mut act));
            act = if k == last {
                pre.clone()
            } else {
                pre.iter().map(|v| self.shape.activation.apply(*v)).collect()
            };
            let mask = match (&mut rng, train && k != last) {
                (Some(rng), true) => {
                    let m = dropout_mask(d.out_dim, dropout, rng);
                    act.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                    Some(m)
                }
                _ => None,
            };
            cache.dense_masks.push(mask);
            cache.dense_pre.push(pre);
        }
        (act, cache)
    }

    /// Accumulates dLoss/dparams into `grad` given dLoss/doutput.
    pub(crate) fn backward(&self, cache: &Cache, d_out: &[f64], grad: &mut [f64]) {
        let p = &self.params;
        let last = self.layout.dense.len() - 1;
        let mut delta = d_out.to_vec();
        for (k, d) in self.layout.dense.iter().enumerate().rev() {
            if k != last {
                if let Some(m) = &cache.dense_masks[k] {
                    delta.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
                }
                for (v, pre) in delta.iter_mut().zip(&cache.dense_pre[k]) {
                    *v *= self.shape.activation.grad(*pre);
                }
            }
            let x = &cache.dense_in[k];
            outer_acc(&mut grad[d.w..d.w + d.out_dim * d.in_dim], &delta, x);
            grad[d.b..d.b + d.out_dim].iter_mut().zip(&delta).for_each(|(g, v)| *g += v);
            let mut dx = vec![0.0; d.in_dim];
            matvec_t_acc(&p[d.w..d.w + d.out_dim * d.in_dim], &delta, &mut dx);
            delta = dx;
        }
        if self.layout.gru.is_empty() {
            return;
        }

        let h = self.shape.hidden;
        let steps_len = cache.steps[0].len();
        // Gradient on each top-layer output; only the last step feeds the head.
        let mut d_seq: Vec<Vec<f64>> = vec![vec![0.0; h]; steps_len];
        d_seq[steps_len - 1] = delta;

        for (l, g) in self.layout.gru.iter().enumerate().rev() {
            if let Some(masks) = &cache.gru_masks[l] {
                for (ds, m) in d_seq.iter_mut().zip(masks) {
                    ds.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
                }
            }
            let mut d_in: Vec<Vec<f64>> = vec![vec![0.0; g.in_dim]; steps_len];
            let mut dh_next = vec![0.0; h];
            let mut da_z = vec![0.0; h];
            let mut da_r = vec![0.0; h];
            let mut da_n = vec![0.0; h];
            for t in (0..steps_len).rev() {
                let s = &cache.steps[l][t];
                let dh: Vec<f64> = d_seq[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                let mut dh_prev = vec![0.0; h];
                for i in 0..h {
                    let dn = dh[i] * (1.0 - s.z[i]);
                    let dz = dh[i] * (s.h_prev[i] - s.n[i]);
                    dh_prev[i] = dh[i] * s.z[i];
                    da_n[i] = dn * (1.0 - s.n[i] * s.n[i]);
                    da_z[i] = dz * s.z[i] * (1.0 - s.z[i]);
                }
                // Candidate path through r * h_prev.
                let mut d_rh = vec![0.0; h];
                matvec_t_acc(&p[g.un..g.un + h * h], &da_n, &mut d_rh);
                for i in 0..h {
                    dh_prev[i] += d_rh[i] * s.r[i];
                    da_r[i] = d_rh[i] * s.h_prev[i] * s.r[i] * (1.0 - s.r[i]);
                }
                let dx = &mut d_in[t];
                for (w, u, b, da, hin) in [
                    (g.wz, g.uz, g.bz, &da_z, &s.h_prev),
                    (g.wr, g.ur, g.br, &da_r, &s.h_prev),
                    (g.wn, g.un, g.bn, &da_n, &s.rh),
                ] {
                    outer_acc(&mut grad[w..w + h * g.in_dim], da, &s.x);
                    outer_acc(&mut grad[u..u + h * h], da, hin);
                    grad[b..b + h].iter_mut().zip(da.iter()).for_each(|(gr, v)| *gr += v);
                    matvec_t_acc(&p[w..w + h * g.in_dim], da, dx);
                }
                matvec_t_acc(&p[g.uz..g.uz + h * h], &da_z, &mut dh_prev);
                matvec_t_acc(&p[g.ur..g.ur + h * h], &da_r, &mut dh_prev);
                dh_next = dh_prev;
            }
            d_seq = d_in;
        }
    }

    /// Mean squared error over the outputs and its gradient, accumulated into `grad`.
    pub(crate) fn loss_and_grad(
        &self,
        window: &[f64],
        target: &[f64],
        dropout: f64,
        rng: Option<&mut ChaCha8Rng>,
        grad: &mut [f64],
    ) -> f64 {
        let (y, cache) = self.forward_cached(window, dropout, rng);
        let n = y.len() as f64;
        let d_out: Vec<f64> = y.iter().zip(target).map(|(a, b)| 2.0 * (a - b) / n).collect();
        self.backward(&cache, &d_out, grad);
        y.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n
    }

    pub(crate) fn loss(&self, window: &[f64], target: &[f64]) -> f64 {
        let (y, _) = self.forward_cached(window, 0.0, None);
        y.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
    }

    /// Sets one named tensor, used by checkpoint loading.
    pub(crate) fn tensor_mut(&mut self, name: &str) -> Option<(&Tensor, &mut [f64])> {
        let t = self.layout.tensors.iter().find(|t| t.name == name)?;
        Some((t, &mut self.params[t.offset..t.offset + t.len()]))
    }

    /// Gate activations of the first layer's first step, for invariant checks.
    pub fn first_gates(&self, window: &[f64]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (_, cache) = self.forward_cached(window, 0.0, None);
        cache.steps.first().and_then(|s| s.last()).map(|s| (s.z.clone(), s.r.clone(), s.n.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_network_outputs_zero() {
        let m = ForecastModel::zeros(ModelShape::default()).unwrap();
        let y = m.forward_normalized(&[0.0; 12]).unwrap();
        assert_eq!(y, vec![0.0; 7]);
    }

    #[test]
    fn zero_weights_output_final_bias() {
        let mut m = ForecastModel::zeros(ModelShape::default()).unwrap();
        let bias: Vec<f64> = (0..7).map(|i| i as f64 * 0.5 - 1.0).collect();
        let (_, b) = m.tensor_mut("fc2.b").unwrap();
        b.copy_from_slice(&bias);
        assert_eq!(m.forward_normalized(&[0.0; 12]).unwrap(), bias);
    }

    #[test]
    fn window_length_is_checked() {
        let m = ForecastModel::init(ModelShape::default(), 1).unwrap();
        assert!(matches!(m.forward_normalized(&[0.0; 11]), Err(Error::Usage(_))));
        assert!(matches!(m.predict(&[0.0; 13]), Err(Error::Usage(_))));
    }

    #[test]
    fn forward_is_deterministic_and_seven_wide() {
        let m = ForecastModel::init(ModelShape::default(), 3).unwrap();
        let w: Vec<f64> = (0..12).map(|i| (i as f64 * 0.4).sin()).collect();
        let a = m.forward_normalized(&w).unwrap();
        assert_eq!(a.len(), 7);
        assert_eq!(a, m.forward_normalized(&w).unwrap());
        assert_eq!(ForecastModel::init(ModelShape::default(), 3).unwrap(), m);
    }

    #[test]
    fn parameter_count() {
        let m = ForecastModel::zeros(ModelShape::default()).unwrap();
        let h = 32;
        let first = 3 * (h + h * h + h);
        let rest = 5 * 3 * (h * h + h * h + h);
        let fc = (32 * 32 + 32) * 2 + 7 * 32 + 7;
        assert_eq!(m.n_params(), first + rest + fc);
    }

    proptest! {
        #[test]
        fn gates_stay_in_range(seed in 0u64..50, scale in 0.1f64..2.0, big in 2.0f64..1e6) {
            let m = ForecastModel::init(ModelShape { gru_layers: 2, hidden: 6, ..ModelShape::default() }, seed).unwrap();
            let w: Vec<f64> = (0..12).map(|i| scale * ((i as f64) - 6.0)).collect();
            let (z, r, n) = m.first_gates(&w).unwrap();
            prop_assert!(z.iter().chain(&r).all(|g| *g > 0.0 && *g < 1.0));
            prop_assert!(n.iter().all(|g| *g > -1.0 && *g < 1.0));
            // Far out the activations round to the bounds in f64 but never cross them.
            let w: Vec<f64> = (0..12).map(|i| big * ((i as f64) - 6.0)).collect();
            let (z, r, n) = m.first_gates(&w).unwrap();
            prop_assert!(z.iter().chain(&r).all(|g| (0.0..=1.0).contains(g)));
            prop_assert!(n.iter().all(|g| (-1.0..=1.0).contains(g)));
        }

        #[test]
        fn normalization_round_trip(xs in proptest::collection::vec(-500.0f64..500.0, 2..50)) {
            let norm = Normalizer::fit(&xs);
            for x in xs {
                prop_assert!((norm.denormalize(norm.normalize(x)) - x).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
