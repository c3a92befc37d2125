//! Layer conductance on small fully connected networks.
//!
//! A [`ToyNetwork`] is an ordered stack of affine blocks, optionally followed
//! by `tanh`. The scalar objective is the Euclidean norm of the final block's
//! output. Conductance of block `i` is approximated by the Riemann sum
//!
//! ```text
//! Cond_j = sum_{k=1..n} dF(x_k)/dy_j(x_k) * (y_j(x_k) - y_j(x_{k-1})),
//! x_k    = x' + (k/n) (x - x')
//! ```
//!
//! with gradients obtained by hand-written backpropagation. The block score
//! is the mean absolute per-neuron conductance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Affine,
    AffineTanh,
}

/// One block: `y = act(W a + b)`. `weight` is stored row-major as
/// `out_dim` rows of length `in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Block {
    pub fn new(kind: BlockKind, weight: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let block = Self { kind, weight, bias };
        block.check()?;
        Ok(block)
    }

    fn check(&self) -> Result<()> {
        let rows = self.weight.len();
        if rows == 0 {
            return Err(Error::Shape("block weight has no rows".into()));
        }
        let cols = self.weight[0].len();
        if cols == 0 {
            return Err(Error::Shape("block weight has no columns".into()));
        }
        if let Some(r) = self.weight.iter().position(|row| row.len() != cols) {
            return Err(Error::Shape(format!(
                "weight row {r} has length {}, expected {cols}",
                self.weight[r].len()
            )));
        }
        if self.bias.len() != rows {
            return Err(Error::Shape(format!(
                "bias has length {}, expected {rows}",
                self.bias.len()
            )));
        }
        let finite = self.weight.iter().flatten().chain(&self.bias).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("block parameters".into()));
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.weight[0].len()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.len()
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        self.weight
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                let z = row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>() + b;
                match self.kind {
                    BlockKind::Affine => z,
                    BlockKind::AffineTanh => z.tanh(),
                }
            })
            .collect()
    }

    /// Gradient with respect to this block's input, given the gradient with
    /// respect to its output and the output itself.
    fn pullback(&self, output: &[f64], grad_out: &[f64]) -> Vec<f64> {
        let grad_pre: Vec<f64> = match self.kind {
            BlockKind::Affine => grad_out.to_vec(),
            BlockKind::AffineTanh => grad_out
                .iter()
                .zip(output)
                .map(|(g, y)| g * (1.0 - y * y))
                .collect(),
        };
        let mut grad_in = vec![0.0; self.in_dim()];
        for (row, g) in self.weight.iter().zip(&grad_pre) {
            for (acc, w) in grad_in.iter_mut().zip(row) {
                *acc += w * g;
            }
        }
        grad_in
    }
}

#[derive(Deserialize)]
struct RawNetwork {
    input_dim: usize,
    blocks: Vec<Block>,
}

/// Stack of blocks whose widths compose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct ToyNetwork {
    input_dim: usize,
    blocks: Vec<Block>,
}

impl TryFrom<RawNetwork> for ToyNetwork {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        ToyNetwork::new(raw.input_dim, raw.blocks)
    }
}

/// Activations after each block for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub activations: Vec<Vec<f64>>,
}

impl Forward {
    pub fn embedding(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl ToyNetwork {
    pub fn new(input_dim: usize, blocks: Vec<Block>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Shape("input_dim must be positive".into()));
        }
        if blocks.is_empty() {
            return Err(Error::Shape("network needs at least one block".into()));
        }
        let mut width = input_dim;
        for (i, block) in blocks.iter().enumerate() {
            block.check()?;
            if block.in_dim() != width {
                return Err(Error::Shape(format!(
                    "block {i} expects input width {}, previous width is {width}",
                    block.in_dim()
                )));
            }
            width = block.out_dim();
        }
        Ok(Self { input_dim, blocks })
    }

    /// Random network with the given layer widths (`widths[0]` is the input
    /// dimension). Weights are `N(0, 1/fan_in)`, biases `N(0, 0.1^2)`.
    pub fn seeded(seed: u64, widths: &[usize], kind: BlockKind) -> Result<Self> {
        Self::seeded_with_bias(seed, widths, kind, 0.1)
    }

    pub fn seeded_with_bias(
        seed: u64,
        widths: &[usize],
        kind: BlockKind,
        bias_scale: f64,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Shape("need an input width and at least one block width".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weight = (0..fan_out)
                .map(|_| {
                    (0..fan_in)
                        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            let bias = (0..fan_out)
                .map(|_| bias_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            blocks.push(Block::new(kind, weight, bias)?);
        }
        Self::new(widths[0], blocks)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.blocks.last().map_or(0, Block::out_dim)
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        if x.len() != self.input_dim {
            return Err(Error::InputShape {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let input = activations.last().map_or(x, Vec::as_slice);
            let out = block.apply(input);
            activations.push(out);
        }
        Ok(Forward { activations })
    }

    /// `dF/dy` for every block output `y`, where `F = ||embedding||`.
    /// Returns the gradients and whether the norm was zero at this point.
    fn objective_gradients(&self, fwd: &Forward) -> (Vec<Vec<f64>>, bool) {
        let embedding = fwd.embedding();
        let norm = objective(embedding);
        let degenerate = norm == 0.0;
        let mut grads = vec![Vec::new(); self.blocks.len()];
        let last = self.blocks.len() - 1;
        grads[last] = if degenerate {
            vec![0.0; embedding.len()]
        } else {
            embedding.iter().map(|v| v / norm).collect()
        };
        for l in (1..=last).rev() {
            let g = self.blocks[l].pullback(&fwd.activations[l], &grads[l]);
            grads[l - 1] = g;
        }
        (grads, degenerate)
    }
}

/// Euclidean norm of the embedding.
pub fn objective(embedding: &[f64]) -> f64 {
    embedding.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "vector")]
pub enum Baseline {
    Zero,
    Explicit(Vec<f64>),
}

impl Baseline {
    pub fn tag(&self) -> &'static str {
        match self {
            Baseline::Zero => "zero",
            Baseline::Explicit(_) => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionConfig {
    pub steps: usize,
    pub baseline: Baseline,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            baseline: Baseline::Zero,
        }
    }
}

impl AttributionConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockConductance {
    /// Zero-based block index.
    pub block_index: usize,
    pub per_neuron: Vec<f64>,
    /// Mean absolute per-neuron conductance.
    pub score: f64,
}

impl BlockConductance {
    fn from_neurons(block_index: usize, per_neuron: Vec<f64>) -> Self {
        let score = per_neuron.iter().map(|v| v.abs()).sum::<f64>() / per_neuron.len() as f64;
        Self {
            block_index,
            per_neuron,
            score,
        }
    }
}

/// Conductance of every block in one pass over the integration path.
pub fn all_block_conductances(
    net: &ToyNetwork,
    x: &[f64],
    cfg: &AttributionConfig,
) -> Result<Vec<BlockConductance>> {
    if cfg.steps == 0 {
        return Err(Error::Parameter("steps must be at least 1".into()));
    }
    if x.len() != net.input_dim() {
        return Err(Error::InputShape {
            expected: net.input_dim(),
            found: x.len(),
        });
    }
    let baseline = match &cfg.baseline {
        Baseline::Zero => vec![0.0; x.len()],
        Baseline::Explicit(b) => {
            if b.len() != x.len() {
                return Err(Error::InputShape {
                    expected: x.len(),
                    found: b.len(),
                });
            }
            b.clone()
        }
    };

    let n = cfg.steps;
    let mut previous = net.forward(&baseline)?.activations;
    let mut totals: Vec<Vec<f64>> = previous.iter().map(|a| vec![0.0; a.len()]).collect();
    let mut degenerate_steps = 0usize;
    let mut point = vec![0.0; x.len()];

    for k in 1..=n {
        let frac = k as f64 / n as f64;
        for ((p, xi), bi) in point.iter_mut().zip(x).zip(&baseline) {
            *p = bi + frac * (xi - bi);
        }
        let fwd = net.forward(&point)?;
        let (grads, degenerate) = net.objective_gradients(&fwd);
        degenerate_steps += usize::from(degenerate);
        for (i, total) in totals.iter_mut().enumerate() {
            let (g, cur, prev) = (&grads[i], &fwd.activations[i], &previous[i]);
            for j in 0..total.len() {
                total[j] += g[j] * (cur[j] - prev[j]);
            }
        }
        previous = fwd.activations;
    }

    if degenerate_steps > 0 {
        log::warn!(
            "embedding norm was zero at {degenerate_steps} of {n} path points; gradient taken as zero there"
        );
    }
    if let Some(i) = totals.iter().position(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(Error::NumericOverflow(format!(
            "non-finite conductance in block {i}"
        )));
    }

    Ok(totals
        .into_iter()
        .enumerate()
        .map(|(i, neurons)| BlockConductance::from_neurons(i, neurons))
        .collect())
}

/// Conductance of the neurons of one block (zero-based `block`).
pub fn layer_conductance(
    net: &ToyNetwork,
    block: usize,
    x: &[f64],
    cfg: &AttributionConfig,
) -> Result<BlockConductance> {
    if block >= net.block_count() {
        return Err(Error::Parameter(format!(
            "block index {block} out of range for {} blocks",
            net.block_count()
        )));
    }
    let mut all = all_block_conductances(net, x, cfg)?;
    Ok(all.swap_remove(block))
}

/// Block scores `[g_1(x), ..., g_d(x)]`.
pub fn conductance_vector(net: &ToyNetwork, x: &[f64], cfg: &AttributionConfig) -> Result<Vec<f64>> {
    Ok(all_block_conductances(net, x, cfg)?
        .into_iter()
        .map(|b| b.score)
        .collect())
}
