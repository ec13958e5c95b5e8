//! The decomposition network and the mixture it parametrises.
//!
//! For every index `k` the network emits, per partition, one weight logit and
//! the real and imaginary parts of every block amplitude, all squashed by a
//! sigmoid. Logits of all `(k, partition)` pairs share one softmax. Each
//! amplitude output `s` is mapped to `2s - 1` so phases cover the full circle,
//! then every block vector is normalised.

use num_complex::Complex64;
use rand::Rng;

use super::structure::{Partition, SeparabilityStructure};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix};
use crate::states::rng_from_seed;

pub const DEFAULT_WIDTH: usize = 100;

/// Block vectors shorter than this cannot be renormalised.
pub const NORM_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
struct PartLayout {
    partition: Partition,
    /// Position of the weight logit within one index's output row.
    out_offset: usize,
    /// First complex amplitude of this partition within one index's amplitudes.
    amp_offset: usize,
    /// First block norm of this partition within one index's norms.
    norm_offset: usize,
    block_dims: Vec<usize>,
    /// Amplitude offsets of each block relative to `amp_offset`.
    block_offsets: Vec<usize>,
    /// Block sub-index of every canonical basis index, `n * blocks` entries.
    sub: Vec<usize>,
}

/// Index bookkeeping shared by the forward and backward passes.
#[derive(Clone, Debug)]
pub struct MixtureLayout {
    n: usize,
    parts: Vec<PartLayout>,
    outputs_per_index: usize,
    amps_per_index: usize,
    norms_per_index: usize,
}

impl MixtureLayout {
    pub fn new(structure: &SeparabilityStructure) -> Self {
        let dims = structure.dims().to_vec();
        let mut parts = Vec::new();
        let (mut out, mut amp, mut nrm) = (0, 0, 0);
        for p in structure.partitions() {
            let block_dims = p.block_dims(&dims);
            let mut block_offsets = Vec::with_capacity(block_dims.len());
            let mut acc = 0;
            for d in &block_dims {
                block_offsets.push(acc);
                acc += d;
            }
            parts.push(PartLayout {
                partition: p.clone(),
                out_offset: out,
                amp_offset: amp,
                norm_offset: nrm,
                sub: p.canonical_sub_indices(&dims),
                block_dims,
                block_offsets,
            });
            out += 1 + 2 * acc;
            amp += acc;
            nrm += p.blocks().len();
        }
        Self {
            n: dims.iter().product(),
            parts,
            outputs_per_index: out,
            amps_per_index: amp,
            norms_per_index: nrm,
        }
    }

    pub fn partitions(&self) -> usize {
        self.parts.len()
    }

    pub fn amps_per_index(&self) -> usize {
        self.amps_per_index
    }

    pub fn outputs_per_index(&self) -> usize {
        self.outputs_per_index
    }

    pub fn total_dim(&self) -> usize {
        self.n
    }
}

/// Intermediate values of the mixture forward pass, reused by the backward pass.
#[derive(Clone, Debug, Default)]
pub struct MixtureCache {
    k: usize,
    weights: Vec<f64>,
    psi: Vec<Complex64>,
    norms: Vec<f64>,
    vectors: Vec<Complex64>,
}

impl MixtureCache {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Builds `sum_a p_a |v_a><v_a|` from raw weight logits (`K * P`, index-major)
/// and raw block amplitudes (`K * amps_per_index`). Writes into `rho`.
pub fn mixture_forward(
    layout: &MixtureLayout,
    logits: &[f64],
    raw: &[Complex64],
    cache: &mut MixtureCache,
    rho: &mut ComplexMatrix,
) -> Result<()> {
    let np = layout.parts.len();
    let k = logits.len() / np;
    if k == 0 || logits.len() != k * np || raw.len() != k * layout.amps_per_index {
        return Err(Error::DimensionMismatch("mixture inputs do not match layout".into()));
    }
    let n = layout.n;
    if rho.rows() != n || rho.cols() != n {
        *rho = ComplexMatrix::zeros(n, n);
    }
    cache.k = k;

    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    cache.weights.clear();
    cache.weights.extend(logits.iter().map(|z| (z - max).exp()));
    let total: f64 = cache.weights.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::NonFinite);
    }
    for w in &mut cache.weights {
        *w /= total;
    }

    cache.psi.clear();
    cache.psi.extend_from_slice(raw);
    cache.norms.resize(k * layout.norms_per_index, 0.0);
    cache.vectors.resize(k * np * n, Complex64::new(0.0, 0.0));
    for z in rho.as_mut_slice() {
        *z = Complex64::new(0.0, 0.0);
    }

    for idx in 0..k {
        for (pi, part) in layout.parts.iter().enumerate() {
            let base = idx * layout.amps_per_index + part.amp_offset;
            for (b, (&d, &off)) in part.block_dims.iter().zip(&part.block_offsets).enumerate() {
                let block = &mut cache.psi[base + off..base + off + d];
                let norm = block.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if !norm.is_finite() {
                    return Err(Error::NonFinite);
                }
                if norm < NORM_FLOOR {
                    return Err(Error::Renormalization(norm));
                }
                for z in block.iter_mut() {
                    *z /= norm;
                }
                cache.norms[idx * layout.norms_per_index + part.norm_offset + b] = norm;
            }
            let nb = part.block_dims.len();
            let vbase = (idx * np + pi) * n;
            for i in 0..n {
                let mut prod = Complex64::new(1.0, 0.0);
                for b in 0..nb {
                    prod *= cache.psi[base + part.block_offsets[b] + part.sub[i * nb + b]];
                }
                cache.vectors[vbase + i] = prod;
            }
            let w = cache.weights[idx * np + pi];
            let v = &cache.vectors[vbase..vbase + n];
            let out = rho.as_mut_slice();
            for i in 0..n {
                let wi = v[i] * w;
                for j in i..n {
                    out[i * n + j] += wi * v[j].conj();
                }
            }
        }
    }
    let out = rho.as_mut_slice();
    for i in 0..n {
        out[i * n + i].im = 0.0;
        for j in i + 1..n {
            out[j * n + i] = out[i * n + j].conj();
        }
    }
    Ok(())
}

/// Gradients of `L` with respect to the logits and raw amplitudes, given the
/// Hermitian gradient `g` with `dL = Re Tr(g dRho)`. Complex amplitude
/// gradients hold `(dL/dRe, dL/dIm)` as real and imaginary parts.
pub fn mixture_backward(
    layout: &MixtureLayout,
    cache: &MixtureCache,
    g: &ComplexMatrix,
    d_logits: &mut Vec<f64>,
    d_raw: &mut Vec<Complex64>,
) -> Result<()> {
    let n = layout.n;
    if g.rows() != n || g.cols() != n {
        return Err(Error::DimensionMismatch(format!("gradient must be {n}x{n}")));
    }
    let np = layout.parts.len();
    let k = cache.k;
    let gs = g.as_slice();
    d_logits.clear();
    d_logits.resize(k * np, 0.0);
    d_raw.clear();
    d_raw.resize(k * layout.amps_per_index, Complex64::new(0.0, 0.0));

    let mut gv = vec![Complex64::new(0.0, 0.0); n];
    let mut scores = vec![0.0; k * np];
    for idx in 0..k {
        for (pi, part) in layout.parts.iter().enumerate() {
            let a = idx * np + pi;
            let v = &cache.vectors[a * n..(a + 1) * n];
            let mut s = 0.0;
            for i in 0..n {
                let row = &gs[i * n..(i + 1) * n];
                let gi: Complex64 = row.iter().zip(v).map(|(x, y)| x * y).sum();
                s += (v[i].conj() * gi).re;
                gv[i] = gi * (2.0 * cache.weights[a]);
            }
            scores[a] = s;

            let base = idx * layout.amps_per_index + part.amp_offset;
            let nb = part.block_dims.len();
            for b in 0..nb {
                let off = base + part.block_offsets[b];
                let d = part.block_dims[b];
                let grad = &mut d_raw[off..off + d];
                for i in 0..n {
                    let mut others = Complex64::new(1.0, 0.0);
                    for c in (0..nb).filter(|&c| c != b) {
                        others *= cache.psi[base + part.block_offsets[c] + part.sub[i * nb + c]];
                    }
                    grad[part.sub[i * nb + b]] += gv[i] * others.conj();
                }
                // Project out the radial direction of the normalisation.
                let psi = &cache.psi[off..off + d];
                let radial: f64 = psi.iter().zip(grad.iter()).map(|(p, q)| p.re * q.re + p.im * q.im).sum();
                let norm = cache.norms[idx * layout.norms_per_index + part.norm_offset + b];
                for (q, p) in grad.iter_mut().zip(psi) {
                    *q = (*q - p * radial) / norm;
                }
            }
        }
    }
    let mean: f64 = scores.iter().zip(&cache.weights).map(|(s, w)| s * w).sum();
    for ((dz, s), w) in d_logits.iter_mut().zip(&scores).zip(&cache.weights) {
        *dz = w * (s - mean);
    }
    Ok(())
}

/// One term of an assembled decomposition.
#[derive(Clone, Debug)]
pub struct DecompositionTerm {
    pub index: usize,
    pub weight: f64,
    pub partition: Partition,
    /// Normalised pure state of each block, blocks in partition order.
    pub blocks: Vec<Vec<Complex64>>,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub state: DensityMatrix,
    pub terms: Vec<DecompositionTerm>,
}

/// Reusable buffers for repeated evaluation of a model during training.
#[derive(Clone, Debug)]
pub struct Workspace {
    layout: MixtureLayout,
    hidden: Vec<f64>,
    outputs: Vec<f64>,
    logits: Vec<f64>,
    raw: Vec<Complex64>,
    cache: MixtureCache,
    d_logits: Vec<f64>,
    d_raw: Vec<Complex64>,
    d_out: Vec<f64>,
    d_hidden: Vec<f64>,
    pub rho: ComplexMatrix,
}

impl Workspace {
    pub fn new(model: &DecompositionModel) -> Self {
        let n = model.structure.total_dim();
        Self {
            layout: MixtureLayout::new(&model.structure),
            hidden: Vec::new(),
            outputs: Vec::new(),
            logits: Vec::new(),
            raw: Vec::new(),
            cache: MixtureCache::default(),
            d_logits: Vec::new(),
            d_raw: Vec::new(),
            d_out: Vec::new(),
            d_hidden: Vec::new(),
            rho: ComplexMatrix::zeros(n, n),
        }
    }

    pub fn layout(&self) -> &MixtureLayout {
        &self.layout
    }

    pub fn cache(&self) -> &MixtureCache {
        &self.cache
    }

    /// Runs the network for every index and assembles the state into `self.rho`.
    pub fn evaluate(&mut self, model: &DecompositionModel, params: &[f64]) -> Result<()> {
        let (k, width, out) = (model.k, model.width, self.layout.outputs_per_index);
        let l = model.offsets();
        self.hidden.resize(k * width, 0.0);
        self.outputs.resize(k * out, 0.0);
        for idx in 0..k {
            let h = &mut self.hidden[idx * width..(idx + 1) * width];
            for (u, hu) in h.iter_mut().enumerate() {
                let pre = params[l.w1 + u * k + idx] + params[l.b1 + u];
                *hu = pre.max(0.0);
            }
            let o = &mut self.outputs[idx * out..(idx + 1) * out];
            for (r, or) in o.iter_mut().enumerate() {
                let w = &params[l.w2 + r * width..l.w2 + (r + 1) * width];
                let pre: f64 = params[l.b2 + r] + w.iter().zip(h.iter()).map(|(a, b)| a * b).sum::<f64>();
                *or = sigmoid(pre);
            }
        }

        let np = self.layout.parts.len();
        self.logits.resize(k * np, 0.0);
        self.raw.resize(k * self.layout.amps_per_index, Complex64::new(0.0, 0.0));
        for idx in 0..k {
            let o = &self.outputs[idx * out..(idx + 1) * out];
            for (pi, part) in self.layout.parts.iter().enumerate() {
                self.logits[idx * np + pi] = o[part.out_offset];
                let m: usize = part.block_dims.iter().sum();
                let dst = idx * self.layout.amps_per_index + part.amp_offset;
                for j in 0..m {
                    let re = o[part.out_offset + 1 + 2 * j];
                    let im = o[part.out_offset + 2 + 2 * j];
                    self.raw[dst + j] = Complex64::new(2.0 * re - 1.0, 2.0 * im - 1.0);
                }
            }
        }
        mixture_forward(&self.layout, &self.logits, &self.raw, &mut self.cache, &mut self.rho)
    }

    /// Backpropagates `g` (with `dL = Re Tr(g dRho)`) through the last
    /// [`Workspace::evaluate`] call, overwriting `grad`.
    pub fn backward(
        &mut self,
        model: &DecompositionModel,
        params: &[f64],
        g: &ComplexMatrix,
        grad: &mut [f64],
    ) -> Result<()> {
        mixture_backward(&self.layout, &self.cache, g, &mut self.d_logits, &mut self.d_raw)?;
        let (k, width, out) = (model.k, model.width, self.layout.outputs_per_index);
        let np = self.layout.parts.len();
        let l = model.offsets();
        grad.iter_mut().for_each(|x| *x = 0.0);
        self.d_out.resize(out, 0.0);
        self.d_hidden.resize(width, 0.0);
        for idx in 0..k {
            for (pi, part) in self.layout.parts.iter().enumerate() {
                self.d_out[part.out_offset] = self.d_logits[idx * np + pi];
                let m: usize = part.block_dims.iter().sum();
                let src = idx * self.layout.amps_per_index + part.amp_offset;
                for j in 0..m {
                    let d = self.d_raw[src + j];
                    self.d_out[part.out_offset + 1 + 2 * j] = 2.0 * d.re;
                    self.d_out[part.out_offset + 2 + 2 * j] = 2.0 * d.im;
                }
            }
            let o = &self.outputs[idx * out..(idx + 1) * out];
            let h = &self.hidden[idx * width..(idx + 1) * width];
            self.d_hidden.iter_mut().for_each(|x| *x = 0.0);
            for r in 0..out {
                let delta = self.d_out[r] * o[r] * (1.0 - o[r]);
                if delta == 0.0 {
                    continue;
                }
                grad[l.b2 + r] += delta;
                let row = l.w2 + r * width;
                for u in 0..width {
                    grad[row + u] += delta * h[u];
                    self.d_hidden[u] += delta * params[row + u];
                }
            }
            for u in 0..width {
                if h[u] > 0.0 {
                    grad[l.w1 + u * k + idx] += self.d_hidden[u];
                    grad[l.b1 + u] += self.d_hidden[u];
                }
            }
        }
        Ok(())
    }

    /// Snapshot of the terms behind the last evaluation.
    pub fn terms(&self) -> Vec<DecompositionTerm> {
        let np = self.layout.parts.len();
        let mut terms = Vec::with_capacity(self.cache.k * np);
        for idx in 0..self.cache.k {
            for (pi, part) in self.layout.parts.iter().enumerate() {
                let base = idx * self.layout.amps_per_index + part.amp_offset;
                let blocks = part
                    .block_dims
                    .iter()
                    .zip(&part.block_offsets)
                    .map(|(&d, &off)| self.cache.psi[base + off..base + off + d].to_vec())
                    .collect();
                terms.push(DecompositionTerm {
                    index: idx,
                    weight: self.cache.weights[idx * np + pi],
                    partition: part.partition.clone(),
                    blocks,
                });
            }
        }
        terms
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Offsets {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub total: usize,
}

/// The parametrised decomposition: a one-hidden-layer perceptron from a
/// one-hot index to mixture logits and block amplitudes.
///
/// Parameters are one flat vector: `W1` (`width x K`), `b1`, `W2`
/// (`outputs x width`), `b2`, all row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionModel {
    structure: SeparabilityStructure,
    k: usize,
    width: usize,
    seed: u64,
    params: Vec<f64>,
}

impl DecompositionModel {
    /// Random initialisation: every weight and bias uniform in
    /// `(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(structure: SeparabilityStructure, k: usize, seed: u64) -> Result<Self> {
        Self::with_width(structure, k, DEFAULT_WIDTH, seed)
    }

    pub fn with_width(structure: SeparabilityStructure, k: usize, width: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if width == 0 {
            return Err(Error::InvalidParameter("hidden width must be at least 1".into()));
        }
        let mut model = Self {
            structure,
            k,
            width,
            seed,
            params: Vec::new(),
        };
        let l = model.offsets();
        let mut rng = rng_from_seed(seed);
        let mut params = vec![0.0; l.total];
        let s1 = 1.0 / (k as f64).sqrt();
        let s2 = 1.0 / (width as f64).sqrt();
        for (i, x) in params.iter_mut().enumerate() {
            let s = if i < l.w2 { s1 } else { s2 };
            *x = rng.gen_range(-s..s);
        }
        model.params = params;
        Ok(model)
    }

    /// Rebuilds a model from stored parameters.
    pub fn from_parts(
        structure: SeparabilityStructure,
        k: usize,
        width: usize,
        seed: u64,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut model = Self::with_width(structure, k, width, seed)?;
        if params.len() != model.params.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                model.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        model.params = params;
        Ok(model)
    }

    pub(crate) fn offsets(&self) -> Offsets {
        let out = self.structure.outputs_per_index();
        let w1 = 0;
        let b1 = w1 + self.width * self.k;
        let w2 = b1 + self.width;
        let b2 = w2 + out * self.width;
        Offsets {
            w1,
            b1,
            w2,
            b2,
            total: b2 + out,
        }
    }

    pub fn structure(&self) -> &SeparabilityStructure {
        &self.structure
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        self.params.copy_from_slice(params);
    }

    /// Raw sigmoid outputs for the 0-based index `k`.
    pub fn forward(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.k {
            return Err(Error::InvalidParameter(format!("index {k} out of range for K = {}", self.k)));
        }
        let l = self.offsets();
        let p = &self.params;
        let h: Vec<f64> = (0..self.width)
            .map(|u| (p[l.w1 + u * self.k + k] + p[l.b1 + u]).max(0.0))
            .collect();
        let out = self.structure.outputs_per_index();
        Ok((0..out)
            .map(|r| {
                let w = &p[l.w2 + r * self.width..l.w2 + (r + 1) * self.width];
                sigmoid(p[l.b2 + r] + w.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect())
    }

    /// The separable state and its terms.
    pub fn assemble(&self) -> Result<Decomposition> {
        let mut ws = Workspace::new(self);
        ws.evaluate(self, &self.params)?;
        let terms = ws.terms();
        Ok(Decomposition {
            state: DensityMatrix::new_unchecked(ws.rho, self.structure.dims().to_vec()),
            terms,
        })
    }

    /// Gradient of a loss with respect to the parameters, given the state
    /// gradient `g` with `dL = Re Tr(g dRho)`.
    pub fn gradient(&self, g: &ComplexMatrix) -> Result<Vec<f64>> {
        let mut ws = Workspace::new(self);
        ws.evaluate(self, &self.params)?;
        let mut grad = vec![0.0; self.params.len()];
        ws.backward(self, &self.params, g, &mut grad)?;
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, min_eigenvalue};
    use crate::model::structure::StructureKind;

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = rng_from_seed(seed);
        ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .hermitian_part()
    }

    fn structures() -> Vec<SeparabilityStructure> {
        vec![
            SeparabilityStructure::full_sep(vec![2, 2]).unwrap(),
            SeparabilityStructure::full_sep(vec![3, 3]).unwrap(),
            SeparabilityStructure::full_sep(vec![2, 2, 2]).unwrap(),
            SeparabilityStructure::biseparable(vec![2, 2, 2]).unwrap(),
            SeparabilityStructure::new(StructureKind::SizeConstrainedBisep(2), vec![2; 4]).unwrap(),
            SeparabilityStructure::new(StructureKind::Triseparable(vec![]), vec![2; 4]).unwrap(),
        ]
    }

    #[test]
    fn assembled_states_are_valid() {
        for (i, s) in structures().into_iter().enumerate() {
            for seed in 0..20u64 {
                let m = DecompositionModel::with_width(s.clone(), 1 + (seed as usize % 5), 16, seed + 100 * i as u64)
                    .unwrap();
                let dec = m.assemble().unwrap();
                let rho = dec.state.matrix();
                assert!((rho.trace().re - 1.0).abs() < 1e-12);
                assert!(rho.hermiticity_error() < 1e-12);
                assert!(min_eigenvalue(rho).unwrap() > -1e-12);
                let wsum: f64 = dec.terms.iter().map(|t| t.weight).sum();
                assert!((wsum - 1.0).abs() < 1e-12);
                for t in &dec.terms {
                    for b in &t.blocks {
                        let n: f64 = b.iter().map(|z| z.norm_sqr()).sum();
                        assert!((n - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn forward_outputs_in_unit_interval() {
        let s = SeparabilityStructure::full_sep(vec![2, 2]).unwrap();
        let m = DecompositionModel::new(s, 4, 9).unwrap();
        let o = m.forward(3).unwrap();
        assert_eq!(o.len(), 9);
        assert!(o.iter().all(|&x| x > 0.0 && x < 1.0));
        assert!(m.forward(4).is_err());
        assert!(DecompositionModel::new(SeparabilityStructure::full_sep(vec![2, 2]).unwrap(), 0, 1).is_err());
    }

    #[test]
    fn terms_rebuild_state() {
        let s = SeparabilityStructure::biseparable(vec![2, 2, 2]).unwrap();
        let m = DecompositionModel::with_width(s, 3, 8, 5).unwrap();
        let dec = m.assemble().unwrap();
        let mut sum = ComplexMatrix::zeros(8, 8);
        for t in &dec.terms {
            let v = t.partition.product_vector(&[2, 2, 2], &t.blocks).unwrap();
            sum.add_scaled(t.weight, &ComplexMatrix::outer(&v));
        }
        assert!(sum.max_abs_diff(dec.state.matrix()) < 1e-13);
    }

    fn linear_loss(m: &DecompositionModel, target: &ComplexMatrix) -> f64 {
        // L = Re Tr(target rho); dL/drho = target.
        let rho = m.assemble().unwrap().state.into_matrix();
        rho.trace_product_re(target)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (i, s) in structures().into_iter().enumerate() {
            let n = s.total_dim();
            let g = random_hermitian(n, 40 + i as u64);
            let mut m = DecompositionModel::with_width(s, 3, 6, 17 + i as u64).unwrap();
            let grad = m.gradient(&g).unwrap();
            let base = m.params().to_vec();
            let h = 1e-6;
            let step = (base.len() / 40).max(1);
            for p in (0..base.len()).step_by(step) {
                let mut plus = base.clone();
                plus[p] += h;
                m.set_params(&plus);
                let lp = linear_loss(&m, &g);
                let mut minus = base.clone();
                minus[p] -= h;
                m.set_params(&minus);
                let lm = linear_loss(&m, &g);
                let fd = (lp - lm) / (2.0 * h);
                assert!(
                    (fd - grad[p]).abs() < 1e-6 * (1.0 + fd.abs()),
                    "structure {i} param {p}: fd {fd} vs {}",
                    grad[p]
                );
            }
            m.set_params(&base);
        }
    }

    #[test]
    fn block_phase_leaves_state_and_logit_gradients_unchanged() {
        let s = SeparabilityStructure::full_sep(vec![2, 3]).unwrap();
        let layout = MixtureLayout::new(&s);
        let mut rng = rng_from_seed(3);
        let k = 4;
        let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let raw: Vec<Complex64> = (0..k * layout.amps_per_index())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let g = random_hermitian(6, 8);
        let eval = |raw: &[Complex64]| {
            let mut cache = MixtureCache::default();
            let mut rho = ComplexMatrix::zeros(6, 6);
            mixture_forward(&layout, &logits, raw, &mut cache, &mut rho).unwrap();
            let (mut dl, mut dr) = (Vec::new(), Vec::new());
            mixture_backward(&layout, &cache, &g, &mut dl, &mut dr).unwrap();
            (rho, dl)
        };
        let (rho, dl) = eval(&raw);
        let mut rotated = raw.clone();
        let phase = Complex64::from_polar(1.0, 1.234);
        // Second block (dimension 3) of index 2.
        let start = 2 * layout.amps_per_index() + 2;
        for z in &mut rotated[start..start + 3] {
            *z *= phase;
        }
        let (rho2, dl2) = eval(&rotated);
        assert!(rho.max_abs_diff(&rho2) < 1e-10);
        for (a, b) in dl.iter().zip(&dl2) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((rho.trace_product_re(&g) - rho2.trace_product_re(&g)).abs() < 1e-10);
    }

    #[test]
    fn zero_block_is_reported() {
        let s = SeparabilityStructure::full_sep(vec![2, 2]).unwrap();
        let layout = MixtureLayout::new(&s);
        let raw = vec![Complex64::new(0.0, 0.0); layout.amps_per_index()];
        let mut cache = MixtureCache::default();
        let mut rho = ComplexMatrix::zeros(4, 4);
        let err = mixture_forward(&layout, &[0.0], &raw, &mut cache, &mut rho).unwrap_err();
        assert!(matches!(err, Error::Renormalization(_)));
    }

    #[test]
    fn mixture_is_smooth_in_parameters() {
        let s = SeparabilityStructure::full_sep(vec![2, 2]).unwrap();
        let mut m = DecompositionModel::with_width(s, 2, 8, 1).unwrap();
        let rho0 = m.assemble().unwrap().state.into_matrix();
        let base = m.params().to_vec();
        let perturbed: Vec<f64> = base.iter().map(|x| x + 1e-7).collect();
        m.set_params(&perturbed);
        let rho1 = m.assemble().unwrap().state.into_matrix();
        assert!(rho0.max_abs_diff(&rho1) < 1e-4);
        let e = hermitian_eig(&rho1).unwrap();
        assert!(e.eigenvalues[0] > -1e-12);
    }
}
