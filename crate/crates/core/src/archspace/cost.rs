//! Analytic cost models.
//!
//! Counting conventions, applied uniformly across spaces:
//!
//! - **FLOPs** count multiply-accumulate pairs at 2 FLOPs per MAC, summed
//!   over convolution, linear, and attention matrix multiplies. Pooling,
//!   normalisation, activations, and softmax are excluded.
//! - **Params** count learnable weights, plus biases where a layer
//!   conventionally has one (linear layers); convolution batch-norm scale
//!   and shift terms are excluded.
//! - Both figures are reported in millions (1e6).
//!
//! Each estimator assumes a fixed, documented backbone around the searched
//! dimensions; the estimates are meant for constraint checking and relative
//! comparison, not to reproduce any particular profiler's output.

use super::macrospace::{MacroArch, MOBILENET_BLOCKS_PER_STAGE};
use super::nb201::{Nb201Arch, OpKind};
use serde::{Deserialize, Serialize};

/// Analytic cost of an architecture, in mega-FLOPs and mega-params.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub flops_m: f64,
    pub params_m: f64,
}

const FLOPS_PER_MAC: f64 = 2.0;
const MEGA: f64 = 1e6;

struct Tally {
    macs: f64,
    params: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            macs: 0.0,
            params: 0.0,
        }
    }

    fn conv(&mut self, spatial: f64, c_in: f64, c_out: f64, k: f64) {
        self.macs += spatial * spatial * c_in * c_out * k * k;
        self.params += c_in * c_out * k * k;
    }

    fn depthwise(&mut self, spatial: f64, channels: f64, k: f64) {
        self.macs += spatial * spatial * channels * k * k;
        self.params += channels * k * k;
    }

    fn linear(&mut self, batch: f64, d_in: f64, d_out: f64) {
        self.macs += batch * d_in * d_out;
        self.params += d_in * d_out + d_out;
    }

    /// A matrix product with no learnable weights (attention score and
    /// mixing products).
    fn matmul(&mut self, m: f64, k: f64, n: f64) {
        self.macs += m * k * n;
    }

    fn finish(self) -> CostEstimate {
        CostEstimate {
            flops_m: self.macs * FLOPS_PER_MAC / MEGA,
            params_m: self.params / MEGA,
        }
    }
}

/// Cost of a cell architecture, realised in the standard tabular-benchmark
/// backbone: a 3x3 stem to 16 channels on 32x32 input, three stacks of five
/// cells at widths 16/32/64, a two-convolution residual reduction block
/// between stacks, and a 10-way linear head.
pub fn nb201_cost(arch: &Nb201Arch) -> CostEstimate {
    let mut t = Tally::new();
    t.conv(32.0, 3.0, 16.0, 3.0); // stem
    let stages: [(f64, f64); 3] = [(16.0, 32.0), (32.0, 16.0), (64.0, 8.0)];
    for (stage, &(c, s)) in stages.iter().enumerate() {
        for _cell in 0..5 {
            for op in arch.ops {
                match op {
                    OpKind::NorConv1x1 => t.conv(s, c, c, 1.0),
                    OpKind::NorConv3x3 => t.conv(s, c, c, 3.0),
                    // zero-weight, zero-MAC ops under the counting convention
                    OpKind::None | OpKind::SkipConnect | OpKind::AvgPool3x3 => {}
                }
            }
        }
        if stage + 1 < stages.len() {
            let (c_next, s_next) = stages[stage + 1];
            t.conv(s_next, c, c_next, 3.0);
            t.conv(s_next, c_next, c_next, 3.0);
            t.conv(s_next, c, c_next, 1.0); // shortcut
        }
    }
    t.linear(1.0, 64.0, 10.0);
    t.finish()
}

/// Cost of a macro-space architecture.
pub fn macro_cost(arch: &MacroArch) -> CostEstimate {
    match arch {
        MacroArch::MobileNet(a) => mobilenet_cost(a),
        MacroArch::ShuffleNet(a) => shufflenet_cost(a),
        MacroArch::AutoFormer(a) => autoformer_cost(a),
    }
}

/// MobileNet backbone: 3x3 stem to 16 channels at stride 2, a fixed
/// depthwise bottleneck at 16 channels, five searched stages at widths
/// 24/40/80/112/160 with strides 2/2/2/1/2, squeeze-excitation (reduction 4)
/// on every searched block, then a 960-wide 1x1 head, a 1280-wide feature
/// mix, and a 1000-way classifier.
///
/// The spatial schedule belongs to the backbone: each stage's output
/// resolution is fixed by its stride whether or not the stage has blocks,
/// so a degenerate zero-depth stage removes its blocks' MACs and parameters
/// without inflating later stages.
fn mobilenet_cost(a: &super::macrospace::MobileNetArch) -> CostEstimate {
    let mut t = Tally::new();
    let mut s = a.resolution as f64 / 2.0;
    t.conv(s, 3.0, 16.0, 3.0); // stem
    t.depthwise(s, 16.0, 3.0); // fixed bottleneck
    t.conv(s, 16.0, 16.0, 1.0);
    let widths = [24.0, 40.0, 80.0, 112.0, 160.0];
    let strides = [2.0, 2.0, 2.0, 1.0, 2.0];
    let mut c_in = 16.0_f64;
    for stage in 0..widths.len() {
        let c_out = widths[stage];
        let s_out = s / strides[stage];
        for b in 0..(a.depths[stage] as usize) {
            let slot = stage * MOBILENET_BLOCKS_PER_STAGE + b;
            let k = a.kernels[slot] as f64;
            let e = a.expands[slot] as f64;
            let s_in = if b == 0 { s } else { s_out };
            let mid = c_in * e;
            t.conv(s_in, c_in, mid, 1.0); // expand
            t.depthwise(s_out, mid, k);
            t.linear(1.0, mid, mid / 4.0); // squeeze
            t.linear(1.0, mid / 4.0, mid); // excite
            t.conv(s_out, mid, c_out, 1.0); // project
            c_in = c_out;
        }
        s = s_out;
    }
    t.conv(s, c_in, 960.0, 1.0);
    t.linear(1.0, 960.0, 1280.0);
    t.linear(1.0, 1280.0, 1000.0);
    t.finish()
}

/// ShuffleNet backbone on 224x224 input: 3x3 stem to 16 channels at stride
/// 2, four stages of 4/4/8/4 choice blocks at widths 64/160/320/640 (first
/// block of each stage at stride 2), then a 1024-wide 1x1 head and a
/// 1000-way classifier.
///
/// Choices 0..=2 are channel-split shuffle units with 3x3/5x5/7x7 depthwise
/// kernels; choice 3 is a three-repeat separable (Xception-style) module.
fn shufflenet_cost(a: &super::macrospace::ShuffleNetArch) -> CostEstimate {
    let mut t = Tally::new();
    let mut s = 112.0_f64;
    t.conv(s, 3.0, 16.0, 3.0);
    let widths = [64.0, 160.0, 320.0, 640.0];
    let counts = [4usize, 4, 8, 4];
    let mut c_in = 16.0_f64;
    let mut slot = 0usize;
    for stage in 0..widths.len() {
        let w = widths[stage];
        for b in 0..counts[stage] {
            let choice = a.blocks[slot];
            slot += 1;
            let half = w / 2.0;
            let k = match choice {
                0 => 3.0,
                1 => 5.0,
                2 => 7.0,
                _ => 3.0, // Xception uses 3x3 separables
            };
            let repeats = if choice == 3 { 3 } else { 1 };
            if b == 0 {
                // stride-2 block: both branches read the full input
                let s_out = s / 2.0;
                t.depthwise(s_out, c_in, k); // left branch
                t.conv(s_out, c_in, half, 1.0);
                t.conv(s_out, c_in, half, 1.0); // right branch entry
                t.depthwise(s_out, half, k);
                t.conv(s_out, half, half, 1.0);
                for _ in 1..repeats {
                    t.depthwise(s_out, half, k);
                    t.conv(s_out, half, half, 1.0);
                }
                s = s_out;
            } else {
                // stride-1 block: channel split, only one half is transformed
                t.conv(s, half, half, 1.0);
                t.depthwise(s, half, k);
                t.conv(s, half, half, 1.0);
                for _ in 1..repeats {
                    t.depthwise(s, half, k);
                    t.conv(s, half, half, 1.0);
                }
            }
            c_in = w;
        }
    }
    t.conv(s, c_in, 1024.0, 1.0);
    t.linear(1.0, 1024.0, 1000.0);
    t.finish()
}

/// Transformer backbone on 224x224 input with 16x16 patches: 196 patch
/// tokens plus a class token (197 in total), learned position embeddings,
/// `depth` encoder layers, and a 1000-way classifier on the class token.
///
/// The attention projections keep the query/key/value width equal to the
/// embedding dimension, so the head count partitions the width without
/// changing either MACs or parameters. Only the active `depth`-long prefix
/// of the per-layer slots is counted.
fn autoformer_cost(a: &super::macrospace::AutoFormerArch) -> CostEstimate {
    let mut t = Tally::new();
    let e = a.embed_dim as f64;
    let n = 197.0_f64;
    let patch_dim = 3.0 * 16.0 * 16.0;
    t.linear(196.0, patch_dim, e); // patch embedding
    t.params += n * e + e; // position embeddings + class token
    let depth = (a.depth as usize)
        .min(a.heads.len())
        .min(a.mlp_ratios.len());
    for layer in 0..depth {
        let r = a.mlp_ratios[layer];
        t.linear(n, e, 3.0 * e); // qkv
        t.matmul(n, e, n); // attention scores
        t.matmul(n, n, e); // attention mixing
        t.linear(n, e, e); // output projection
        t.linear(n, e, r * e); // mlp in
        t.linear(n, r * e, e); // mlp out
        t.params += 4.0 * e; // two layer norms
    }
    t.params += 2.0 * e; // final layer norm
    t.linear(1.0, e, 1000.0); // classifier
    t.finish()
}
