//! The adaptive graph-convolutional classifier.
//!
//! A stack of blocks, each an adaptive graph convolution (fixed subset
//! matrices plus a learned per-subset mask plus a data-driven similarity
//! term), ReLU, and optional keypoint attention; then a mean-pool over nodes,
//! a linear map, and a clamped sigmoid producing one probability per class.
//!
//! Every forward runs on a [`Tape`], so the same code path serves inference
//! (parameters as constants) and training (parameters as gradient leaves).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HokemError, Result};
use crate::hograph::{AdjacencyStack, K_SUBSETS};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Default depth-six channel plan.
pub const DEFAULT_CHANNELS: [usize; 6] = [64, 64, 64, 128, 128, 256];

/// Logits are clamped to this magnitude before the sigmoid, bounding
/// probabilities away from exact 0 and 1.
pub const LOGIT_CLAMP: f64 = 30.0;

/// Bottleneck width of the similarity embeddings for a block with `c_out`
/// output channels.
pub fn embedding_width(c_out: usize) -> usize {
    (c_out / 4).max(4)
}

/// Hidden width of the attention bottleneck.
pub fn attention_hidden_width(c: usize) -> usize {
    (c / 4).max(1)
}

/// Where keypoint attention sits in the stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkaPlacement {
    /// After every block.
    PerBlock,
    /// A single attention layer after the last block.
    AfterLast,
    /// No attention (the ablation variant).
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Output channels per block; input width of the first block is the
    /// feature dimension of the data.
    pub channels: Vec<usize>,
    pub num_classes: usize,
    pub ska: SkaPlacement,
    /// Attend over the node axis instead of channels. The written form of
    /// the attention acts on channels; this variant is exploratory.
    pub ska_node_axis: bool,
    /// Enables the learned mask and the data-driven similarity term. Off,
    /// blocks reduce to plain graph convolution over the fixed subsets.
    pub adaptive: bool,
    /// Residual connections on blocks whose input and output widths match.
    pub residual: bool,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: DEFAULT_CHANNELS.to_vec(),
            num_classes: 24,
            ska: SkaPlacement::PerBlock,
            ska_node_axis: false,
            adaptive: true,
            residual: true,
            init_seed: 7,
        }
    }
}

/// Name and shape of one parameter tensor; the layout order is the
/// serialization order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

enum Init {
    /// Uniform in ±1/sqrt(fan_in).
    FanIn(usize),
    Zero,
}

pub struct Model {
    config: ModelConfig,
    stack: AdjacencyStack,
    feature_dim: usize,
    params: Vec<Tensor>,
    layout: Vec<ParamSpec>,
}

impl Model {
    /// Builds and initializes a model over a fixed adjacency stack. Weights
    /// draw from a seeded generator in layout order; masks and biases start
    /// at zero.
    pub fn new(config: ModelConfig, stack: AdjacencyStack, feature_dim: usize) -> Result<Self> {
        if config.channels.is_empty() {
            return Err(HokemError::Config("channel plan must not be empty".into()));
        }
        if config.num_classes == 0 {
            return Err(HokemError::Config("need at least one class".into()));
        }
        let n = stack.a(0).rows();
        let mut layout = Vec::new();
        let mut inits = Vec::new();
        let mut push = |name: String, rows: usize, cols: usize, init: Init| {
            layout.push(ParamSpec { name, rows, cols });
            inits.push(init);
        };
        let attention = |push: &mut dyn FnMut(String, usize, usize, Init),
                         label: String,
                         c: usize|
         -> Result<()> {
            let (rows, hidden) = if config.ska_node_axis {
                (n, attention_hidden_width(n))
            } else {
                if c % 4 != 0 {
                    return Err(HokemError::Config(format!(
                        "attention requires channels divisible by 4, got {c}"
                    )));
                }
                (c, attention_hidden_width(c))
            };
            push(format!("{label}.wa"), rows, hidden, Init::FanIn(rows));
            push(format!("{label}.wb"), hidden, rows, Init::FanIn(hidden));
            Ok(())
        };

        let mut c_in = feature_dim;
        for (l, &c_out) in config.channels.iter().enumerate() {
            for k in 0..K_SUBSETS {
                push(format!("block{l}.w{k}"), c_in, c_out, Init::FanIn(c_in));
            }
            if config.adaptive {
                for k in 0..K_SUBSETS {
                    push(format!("block{l}.mask{k}"), n, n, Init::Zero);
                }
                let c_e = embedding_width(c_out);
                for k in 0..K_SUBSETS {
                    push(format!("block{l}.zeta{k}"), c_in, c_e, Init::FanIn(c_in));
                }
                for k in 0..K_SUBSETS {
                    push(format!("block{l}.eta{k}"), c_in, c_e, Init::FanIn(c_in));
                }
            }
            if config.ska == SkaPlacement::PerBlock {
                attention(&mut push, format!("block{l}.ska"), c_out)?;
            }
            c_in = c_out;
        }
        if config.ska == SkaPlacement::AfterLast {
            attention(&mut push, "ska".to_string(), c_in)?;
        }
        push(
            "head.weight".to_string(),
            c_in,
            config.num_classes,
            Init::FanIn(c_in),
        );
        push("head.bias".to_string(), 1, config.num_classes, Init::Zero);

        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let params = layout
            .iter()
            .zip(&inits)
            .map(|(spec, init)| match *init {
                Init::Zero => Tensor::zeros(spec.rows, spec.cols),
                Init::FanIn(fan_in) => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    let data = (0..spec.rows * spec.cols)
                        .map(|_| rng.gen_range(-bound..=bound))
                        .collect();
                    Tensor::new(spec.rows, spec.cols, data)
                }
            })
            .collect();
        Ok(Model {
            config,
            stack,
            feature_dim,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn stack(&self) -> &AdjacencyStack {
        &self.stack
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn node_count(&self) -> usize {
        self.stack.a(0).rows()
    }

    pub fn param_layout(&self) -> &[ParamSpec] {
        &self.layout
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.layout.iter().position(|s| s.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Replaces all parameters; shapes must match the layout.
    pub fn set_params(&mut self, params: Vec<Tensor>) -> Result<()> {
        if params.len() != self.layout.len() {
            return Err(HokemError::Contract(format!(
                "expected {} parameter tensors, got {}",
                self.layout.len(),
                params.len()
            )));
        }
        for (spec, p) in self.layout.iter().zip(&params) {
            if p.shape() != (spec.rows, spec.cols) {
                return Err(HokemError::Contract(format!(
                    "parameter {} expects {}x{}, got {:?}",
                    spec.name,
                    spec.rows,
                    spec.cols,
                    p.shape()
                )));
            }
        }
        self.params = params;
        Ok(())
    }

    /// Registers every parameter as a gradient leaf on the tape.
    pub fn leaf_params(&self, tape: &mut Tape) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.clone(), true))
            .collect()
    }

    /// Runs the full network over `param_vars` (one per layout entry),
    /// returning the `1 x num_classes` probability vector.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        param_vars: &[Var],
        features: &Tensor,
    ) -> Result<Var> {
        let n = self.node_count();
        if features.shape() != (n, self.feature_dim) {
            return Err(HokemError::ShapeMismatch {
                op: "model_forward",
                lhs: features.shape(),
                rhs: (n, self.feature_dim),
            });
        }
        if param_vars.len() != self.layout.len() {
            return Err(HokemError::Contract(format!(
                "expected {} parameter vars, got {}",
                self.layout.len(),
                param_vars.len()
            )));
        }
        let mut cursor = param_vars.iter().copied();
        let mut next = move || cursor.next().expect("layout and cursor agree");

        let mut x = tape.constant(features.clone());
        let mut c_in = self.feature_dim;
        let subsets: Vec<Tensor> = (0..K_SUBSETS).map(|k| self.stack.a(k).clone()).collect();
        for &c_out in &self.config.channels {
            let w: Vec<Var> = (0..K_SUBSETS).map(|_| next()).collect();
            let (mask, embed) = if self.config.adaptive {
                let mask: Vec<Var> = (0..K_SUBSETS).map(|_| next()).collect();
                let zeta: Vec<Var> = (0..K_SUBSETS).map(|_| next()).collect();
                let eta: Vec<Var> = (0..K_SUBSETS).map(|_| next()).collect();
                (Some(mask), Some((zeta, eta)))
            } else {
                (None, None)
            };
            let residual = self.config.residual && c_in == c_out;
            let conv = agc_forward(
                tape,
                x,
                &subsets,
                &w,
                mask.as_deref(),
                embed.as_ref().map(|(z, e)| (z.as_slice(), e.as_slice())),
                residual,
            )?;
            x = tape.relu(conv);
            if self.config.ska == SkaPlacement::PerBlock {
                let (wa, wb) = (next(), next());
                x = ska_forward(tape, x, wa, wb, self.config.ska_node_axis)?;
            }
            c_in = c_out;
        }
        if self.config.ska == SkaPlacement::AfterLast {
            let (wa, wb) = (next(), next());
            x = ska_forward(tape, x, wa, wb, self.config.ska_node_axis)?;
        }
        let pooled = tape.mean_rows(x);
        let (w_head, b_head) = (next(), next());
        let logits = tape.matmul(pooled, w_head)?;
        let logits = tape.add(logits, b_head)?;
        let clamped = tape.clamp(logits, -LOGIT_CLAMP, LOGIT_CLAMP);
        Ok(tape.sigmoid(clamped))
    }

    /// Inference: class probabilities for one sample.
    pub fn forward(&self, features: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self
            .params
            .iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let out = self.forward_on_tape(&mut tape, &vars, features)?;
        Ok(tape.value(out).row(0).to_vec())
    }

    /// Loss and parameter gradients for a single sample.
    pub fn sample_loss_grads(
        &self,
        features: &Tensor,
        target: &Tensor,
    ) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let vars = self.leaf_params(&mut tape);
        let probs = self.forward_on_tape(&mut tape, &vars, features)?;
        let loss = bce_on_tape(&mut tape, probs, target)?;
        let grads = tape.backward(loss)?;
        let out = vars
            .iter()
            .map(|&v| {
                grads
                    .wrt(v)
                    .expect("gradient leaves always get adjoints")
                    .clone()
            })
            .collect();
        Ok((tape.value(loss).at(0, 0), out))
    }
}

/// One adaptive graph convolution: `F_out = Σ_k (A_k + B_k + C_k) F_in W_k`
/// where `A_k` are the fixed subset matrices, `B_k` optional learned masks,
/// and `C_k = softmax_rows((F ζ_k)(F η_k)^T)` an optional similarity term.
/// Adds `F_in` back when `residual` is set.
pub fn agc_forward(
    tape: &mut Tape,
    f_in: Var,
    subsets: &[Tensor],
    w: &[Var],
    mask: Option<&[Var]>,
    embed: Option<(&[Var], &[Var])>,
    residual: bool,
) -> Result<Var> {
    let k_count = subsets.len();
    let arity_ok = w.len() == k_count
        && mask.is_none_or(|m| m.len() == k_count)
        && embed.is_none_or(|(z, e)| z.len() == k_count && e.len() == k_count);
    if !arity_ok {
        return Err(HokemError::Contract(format!(
            "adaptive graph convolution needs one weight set per subset ({k_count})"
        )));
    }
    let mut acc: Option<Var> = None;
    for k in 0..k_count {
        let mut m = tape.constant(subsets[k].clone());
        if let Some(mask) = mask {
            m = tape.add(m, mask[k])?;
        }
        if let Some((zeta, eta)) = embed {
            let e1 = tape.matmul(f_in, zeta[k])?;
            let e2 = tape.matmul(f_in, eta[k])?;
            let e2t = tape.transpose(e2);
            let logits = tape.matmul(e1, e2t)?;
            let c = tape.softmax_rows(logits);
            m = tape.add(m, c)?;
        }
        let agg = tape.matmul(m, f_in)?;
        let term = tape.matmul(agg, w[k])?;
        acc = Some(match acc {
            None => term,
            Some(prev) => tape.add(prev, term)?,
        });
    }
    let mut out = acc.expect("at least one subset");
    if residual {
        out = tape.add(out, f_in)?;
    }
    Ok(out)
}

/// Keypoint attention: pool over nodes, squeeze through `W_a`, hardswish,
/// expand through `W_b`, sigmoid, and scale every node's features by the
/// resulting per-channel gate. With `node_axis`, the same machinery runs on
/// the transposed matrix, gating nodes instead of channels.
pub fn ska_forward(tape: &mut Tape, g_in: Var, w_a: Var, w_b: Var, node_axis: bool) -> Result<Var> {
    let (_, c) = tape.value(g_in).shape();
    if !node_axis && c % 4 != 0 {
        return Err(HokemError::Config(format!(
            "attention requires channels divisible by 4, got {c}"
        )));
    }
    let base = if node_axis {
        tape.transpose(g_in)
    } else {
        g_in
    };
    let pooled = tape.mean_rows(base);
    let squeezed = tape.matmul(pooled, w_a)?;
    let activated = tape.hardswish(squeezed);
    let expanded = tape.matmul(activated, w_b)?;
    let gate = tape.sigmoid(expanded);
    let gated = tape.mul_row_broadcast(base, gate)?;
    Ok(if node_axis {
        tape.transpose(gated)
    } else {
        gated
    })
}

/// Binary cross-entropy on the tape: mean over classes of
/// `-[t ln p + (1 - t) ln(1 - p)]`. `probs` must lie strictly inside (0, 1),
/// which the clamped sigmoid guarantees.
pub fn bce_on_tape(tape: &mut Tape, probs: Var, target: &Tensor) -> Result<Var> {
    let shape = tape.value(probs).shape();
    if target.shape() != shape {
        return Err(HokemError::ShapeMismatch {
            op: "bce_loss",
            lhs: shape,
            rhs: target.shape(),
        });
    }
    let n = shape.0 * shape.1;
    let t = tape.constant(target.clone());
    let ln_p = tape.ln(probs);
    let pos = tape.mul(t, ln_p)?;
    let q = tape.affine(probs, -1.0, 1.0);
    let ln_q = tape.ln(q);
    let t_inv = tape.affine(t, -1.0, 1.0);
    let neg = tape.mul(t_inv, ln_q)?;
    let sum_terms = tape.add(pos, neg)?;
    let total = tape.sum_all(sum_terms);
    Ok(tape.scale(total, -1.0 / n as f64))
}

/// Plain-number binary cross-entropy, for evaluation paths without a tape.
pub fn bce_loss(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| -(t * p.ln() + (1.0 - t) * (1.0 - p).ln()))
        .sum();
    sum / pred.len() as f64
}
