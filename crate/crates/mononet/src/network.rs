//! Composing constrained layers into the two monotone architectures.
//!
//! Type 1 is a plain stack: the first layer carries the per-feature
//! indicator, every deeper layer constrains all weights nonnegative, and the
//! final layer emits a linear pre-activation consumed by a task head
//! (linear, sigmoid, or softmax).
//!
//! Type 2 routes each declared monotone feature through its own single-input
//! constrained unit (with its own sign and selector) and all free features
//! through an unconstrained dense stack; the concatenated outputs feed a
//! nonnegative-weight trunk.
//!
//! A network whose indicator is all zeros degrades to an ordinary dense
//! network: no downstream layer is constrained either, so the builder can
//! also produce the unconstrained baselines used in the demos.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::{combined, ActivationKind, ActivationSelector};
use crate::error::{Error, Result};
use crate::layer::{MonotoneDenseLayer, MonotonicityIndicator};
use crate::numeric::Matrix;

/// Model format version written and accepted by this build.
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Type1,
    Type2,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Architecture::Type1 => "type1",
            Architecture::Type2 => "type2",
        })
    }
}

/// Task head applied to the final layer's linear output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalActivation {
    Linear,
    Sigmoid,
    Softmax,
}

impl FinalActivation {
    pub fn apply(self, h: &[f64]) -> Vec<f64> {
        match self {
            FinalActivation::Linear => h.to_vec(),
            FinalActivation::Sigmoid => h.iter().map(|&z| sigmoid(z)).collect(),
            FinalActivation::Softmax => softmax(h),
        }
    }
}

impl std::fmt::Display for FinalActivation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FinalActivation::Linear => "linear",
            FinalActivation::Sigmoid => "sigmoid",
            FinalActivation::Softmax => "softmax",
        })
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax; output sums to 1.
pub fn softmax(h: &[f64]) -> Vec<f64> {
    let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = h.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Width plus optional per-layer overrides for one hidden trunk layer.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub width: usize,
    /// Defaults to [`ActivationSelector::split_default`].
    pub selector: Option<ActivationSelector>,
    /// Defaults to the spec-level kind.
    pub kind: Option<ActivationKind>,
}

impl LayerSpec {
    pub fn width(width: usize) -> Self {
        Self {
            width,
            selector: None,
            kind: None,
        }
    }
}

/// Configuration of one per-monotone-feature unit (Type 2 front end).
#[derive(Debug, Clone)]
pub struct PerFeatureUnit {
    pub width: usize,
    /// Defaults to [`ActivationSelector::split_default`].
    pub selector: Option<ActivationSelector>,
    /// Defaults to the spec-level kind.
    pub kind: Option<ActivationKind>,
}

impl PerFeatureUnit {
    pub fn width(width: usize) -> Self {
        Self {
            width,
            selector: None,
            kind: None,
        }
    }
}

/// Everything needed to build a network.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub architecture: Architecture,
    /// Per input feature; length fixes the input dimension.
    pub indicator: MonotonicityIndicator,
    /// Hidden trunk layers (for Type 1, the entire hidden stack).
    pub hidden: Vec<LayerSpec>,
    pub kind: ActivationKind,
    pub final_activation: FinalActivation,
    pub output_dim: usize,
    /// Type 2 only: one entry per declared monotone feature, in feature order.
    pub per_feature_units: Vec<PerFeatureUnit>,
    /// Type 2 only: widths of the unconstrained stack for free features.
    pub free_extractor: Vec<usize>,
}

impl NetworkSpec {
    /// Type 1 spec with default selectors.
    pub fn type1(
        indicator: MonotonicityIndicator,
        hidden_widths: &[usize],
        kind: ActivationKind,
        final_activation: FinalActivation,
        output_dim: usize,
    ) -> Self {
        Self {
            architecture: Architecture::Type1,
            indicator,
            hidden: hidden_widths.iter().map(|&w| LayerSpec::width(w)).collect(),
            kind,
            final_activation,
            output_dim,
            per_feature_units: Vec::new(),
            free_extractor: Vec::new(),
        }
    }

    /// Type 2 spec where every monotone feature gets a unit of `unit_width`
    /// (default selector) and free features, if any, get a single
    /// unconstrained layer of the same width.
    pub fn type2_uniform(
        indicator: MonotonicityIndicator,
        unit_width: usize,
        trunk_widths: &[usize],
        kind: ActivationKind,
        final_activation: FinalActivation,
        output_dim: usize,
    ) -> Self {
        let monotone_count = indicator.monotone_features().len();
        let has_free = indicator.entries().contains(&0);
        Self {
            architecture: Architecture::Type2,
            indicator,
            hidden: trunk_widths.iter().map(|&w| LayerSpec::width(w)).collect(),
            kind,
            final_activation,
            output_dim,
            per_feature_units: vec![PerFeatureUnit::width(unit_width); monotone_count],
            free_extractor: if has_free {
                vec![unit_width]
            } else {
                Vec::new()
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.indicator.is_empty() {
            return Err(Error::InvalidConfig(
                "network needs at least one input".into(),
            ));
        }
        if self.output_dim == 0 {
            return Err(Error::InvalidConfig("output dimension must be >= 1".into()));
        }
        if self.hidden.iter().any(|l| l.width == 0) {
            return Err(Error::InvalidConfig(
                "hidden layer widths must be >= 1".into(),
            ));
        }
        if let Some(spec) = self
            .hidden
            .iter()
            .find(|l| l.selector.is_some_and(|s| s.width() != l.width))
        {
            return Err(Error::InvalidConfig(format!(
                "selector sums to {}, layer width is {}",
                spec.selector.unwrap().width(),
                spec.width
            )));
        }
        Ok(())
    }
}

/// A parallel front-end group: a sub-stack reading a subset of the input
/// coordinates (Type 2 per-feature units and the free-feature extractor).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    inputs: Vec<usize>,
    layers: Vec<MonotoneDenseLayer>,
}

impl FeatureBlock {
    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn layers(&self) -> &[MonotoneDenseLayer] {
        &self.layers
    }

    fn output_dim(&self) -> usize {
        self.layers
            .last()
            .map_or(self.inputs.len(), |l| l.output_dim())
    }
}

/// A built network: optional parallel blocks, a trunk ending in a linear
/// layer, and a task head.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    architecture: Architecture,
    input_dim: usize,
    output_dim: usize,
    indicator: MonotonicityIndicator,
    blocks: Vec<FeatureBlock>,
    trunk: Vec<MonotoneDenseLayer>,
    final_activation: FinalActivation,
}

/// Per-layer values recorded by a cached forward pass.
#[derive(Debug, Clone)]
struct LayerCache {
    input: Vec<f64>,
    pre: Vec<f64>,
}

/// Cache for one full forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    blocks: Vec<Vec<LayerCache>>,
    trunk: Vec<LayerCache>,
}

/// Builds either architecture from a spec, seeding all weight init.
pub fn build(spec: &NetworkSpec, seed: u64) -> Result<Network> {
    match spec.architecture {
        Architecture::Type1 => build_type1(spec, seed),
        Architecture::Type2 => build_type2(spec, seed),
    }
}

/// Builds the stacked architecture: indicator on the first layer, t=1 on
/// every deeper layer (t=0 throughout when no feature is monotone).
pub fn build_type1(spec: &NetworkSpec, seed: u64) -> Result<Network> {
    if spec.architecture != Architecture::Type1 {
        return Err(Error::InvalidConfig("spec is not a type1 spec".into()));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.indicator.len();
    let downstream = downstream_indicator(&spec.indicator);

    let mut trunk = Vec::with_capacity(spec.hidden.len() + 1);
    let mut prev = n;
    for (k, layer_spec) in spec.hidden.iter().enumerate() {
        let indicator = if k == 0 {
            spec.indicator.clone()
        } else {
            downstream(prev)
        };
        trunk.push(MonotoneDenseLayer::init(
            prev,
            layer_spec.width,
            indicator,
            layer_spec
                .selector
                .unwrap_or_else(|| ActivationSelector::split_default(layer_spec.width)),
            layer_spec.kind.unwrap_or(spec.kind),
            false,
            &mut rng,
        )?);
        prev = layer_spec.width;
    }
    let final_indicator = if spec.hidden.is_empty() {
        spec.indicator.clone()
    } else {
        downstream(prev)
    };
    trunk.push(MonotoneDenseLayer::init(
        prev,
        spec.output_dim,
        final_indicator,
        ActivationSelector::all_convex(spec.output_dim),
        spec.kind,
        true,
        &mut rng,
    )?);

    Ok(Network {
        architecture: Architecture::Type1,
        input_dim: n,
        output_dim: spec.output_dim,
        indicator: spec.indicator.clone(),
        blocks: Vec::new(),
        trunk,
        final_activation: spec.final_activation,
    })
}

/// Builds the parallel architecture: one constrained unit per monotone
/// feature, an unconstrained stack for free features, then a constrained
/// trunk over the concatenation.
pub fn build_type2(spec: &NetworkSpec, seed: u64) -> Result<Network> {
    if spec.architecture != Architecture::Type2 {
        return Err(Error::InvalidConfig("spec is not a type2 spec".into()));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let monotone = spec.indicator.monotone_features();
    let free: Vec<usize> = spec
        .indicator
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t == 0)
        .map(|(i, _)| i)
        .collect();

    if spec.per_feature_units.len() != monotone.len() {
        return Err(Error::InvalidConfig(format!(
            "type2 spec has {} per-feature units for {} monotone features",
            spec.per_feature_units.len(),
            monotone.len()
        )));
    }
    if spec.per_feature_units.iter().any(|u| u.width == 0) || spec.free_extractor.contains(&0) {
        return Err(Error::InvalidConfig("unit widths must be >= 1".into()));
    }
    if !free.is_empty() && spec.free_extractor.is_empty() {
        return Err(Error::InvalidConfig(
            "type2 spec has free features but no free_extractor widths".into(),
        ));
    }

    let mut blocks = Vec::new();
    for ((feature, sign), unit) in monotone.iter().zip(&spec.per_feature_units) {
        let layer = MonotoneDenseLayer::init(
            1,
            unit.width,
            MonotonicityIndicator::new(vec![*sign])?,
            unit.selector
                .unwrap_or_else(|| ActivationSelector::split_default(unit.width)),
            unit.kind.unwrap_or(spec.kind),
            false,
            &mut rng,
        )?;
        blocks.push(FeatureBlock {
            inputs: vec![*feature],
            layers: vec![layer],
        });
    }
    if !free.is_empty() {
        let mut layers = Vec::new();
        let mut prev = free.len();
        for &width in &spec.free_extractor {
            layers.push(MonotoneDenseLayer::init(
                prev,
                width,
                MonotonicityIndicator::zeros(prev),
                ActivationSelector::all_convex(width),
                spec.kind,
                false,
                &mut rng,
            )?);
            prev = width;
        }
        blocks.push(FeatureBlock {
            inputs: free,
            layers,
        });
    }

    let downstream = downstream_indicator(&spec.indicator);
    let mut prev: usize = blocks.iter().map(FeatureBlock::output_dim).sum();
    let mut trunk = Vec::with_capacity(spec.hidden.len() + 1);
    for layer_spec in &spec.hidden {
        trunk.push(MonotoneDenseLayer::init(
            prev,
            layer_spec.width,
            downstream(prev),
            layer_spec
                .selector
                .unwrap_or_else(|| ActivationSelector::split_default(layer_spec.width)),
            layer_spec.kind.unwrap_or(spec.kind),
            false,
            &mut rng,
        )?);
        prev = layer_spec.width;
    }
    trunk.push(MonotoneDenseLayer::init(
        prev,
        spec.output_dim,
        downstream(prev),
        ActivationSelector::all_convex(spec.output_dim),
        spec.kind,
        true,
        &mut rng,
    )?);

    Ok(Network {
        architecture: Architecture::Type2,
        input_dim: spec.indicator.len(),
        output_dim: spec.output_dim,
        indicator: spec.indicator.clone(),
        blocks,
        trunk,
        final_activation: spec.final_activation,
    })
}

/// Downstream layers constrain everything (t=1) as soon as any feature is
/// monotone; otherwise the network stays a plain MLP.
fn downstream_indicator(
    indicator: &MonotonicityIndicator,
) -> impl Fn(usize) -> MonotonicityIndicator {
    let any = indicator.any_monotone();
    move |n| {
        if any {
            MonotonicityIndicator::ones(n)
        } else {
            MonotonicityIndicator::zeros(n)
        }
    }
}

impl Network {
    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// The per-feature monotonicity declaration this network was built with.
    pub fn input_indicator(&self) -> &MonotonicityIndicator {
        &self.indicator
    }

    pub fn final_activation(&self) -> FinalActivation {
        self.final_activation
    }

    pub fn blocks(&self) -> &[FeatureBlock] {
        &self.blocks
    }

    pub fn trunk(&self) -> &[MonotoneDenseLayer] {
        &self.trunk
    }

    /// Every layer, block layers first (in block order), then the trunk.
    pub fn all_layers(&self) -> Vec<&MonotoneDenseLayer> {
        self.blocks
            .iter()
            .flat_map(|b| b.layers.iter())
            .chain(self.trunk.iter())
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.all_layers().iter().map(|l| l.param_count()).sum()
    }

    /// Flattens all parameters (per layer: weights row-major, then bias) in
    /// the [`Network::all_layers`] order.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in self.all_layers() {
            out.extend_from_slice(layer.weights().data());
            out.extend_from_slice(layer.bias());
        }
        out
    }

    /// Writes back a parameter vector produced by [`Network::params`].
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                context: "set_params",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        let mut layers: Vec<&mut MonotoneDenseLayer> = Vec::new();
        for block in &mut self.blocks {
            layers.extend(block.layers.iter_mut());
        }
        layers.extend(self.trunk.iter_mut());
        for layer in layers {
            let w_len = layer.weights().data().len();
            layer
                .weights_mut()
                .data_mut()
                .copy_from_slice(&params[offset..offset + w_len]);
            offset += w_len;
            let b_len = layer.bias().len();
            layer
                .bias_mut()
                .copy_from_slice(&params[offset..offset + b_len]);
            offset += b_len;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Output of the final linear layer, before the task head.
    pub fn forward_pre_head(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    /// Full forward pass including the task head.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.final_activation.apply(&self.forward_pre_head(x)?))
    }

    /// Forward pass that records per-layer caches for [`Network::backward`].
    /// Returns the pre-head output.
    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(x)?;
        let mut cache = ForwardCache {
            blocks: Vec::with_capacity(self.blocks.len()),
            trunk: Vec::with_capacity(self.trunk.len()),
        };
        let trunk_input = if self.blocks.is_empty() {
            x.to_vec()
        } else {
            let mut concat = Vec::new();
            for block in &self.blocks {
                let mut value: Vec<f64> = block.inputs.iter().map(|&i| x[i]).collect();
                let mut layer_caches = Vec::with_capacity(block.layers.len());
                for layer in &block.layers {
                    let (y, pre) = layer.forward(&value)?;
                    layer_caches.push(LayerCache { input: value, pre });
                    value = y;
                }
                cache.blocks.push(layer_caches);
                concat.extend_from_slice(&value);
            }
            concat
        };

        let mut value = trunk_input;
        for layer in &self.trunk {
            let (y, pre) = layer.forward(&value)?;
            cache.trunk.push(LayerCache { input: value, pre });
            value = y;
        }
        Ok((value, cache))
    }

    /// Reverse-mode pass from a gradient w.r.t. the pre-head output down to
    /// every parameter. Returns the flat gradient in [`Network::params`]
    /// order.
    pub fn backward(&self, cache: &ForwardCache, grad_pre_head: &[f64]) -> Result<Vec<f64>> {
        if grad_pre_head.len() != self.output_dim {
            return Err(Error::DimensionMismatch {
                context: "network backward gradient",
                expected: self.output_dim,
                got: grad_pre_head.len(),
            });
        }

        // Trunk, last layer to first.
        let mut trunk_grads: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(self.trunk.len());
        let mut grad = grad_pre_head.to_vec();
        for (layer, lc) in self.trunk.iter().zip(&cache.trunk).rev() {
            let (gw, gb, gx) = layer.backward(&lc.input, &lc.pre, &grad)?;
            trunk_grads.push((gw, gb));
            grad = gx;
        }
        trunk_grads.reverse();

        // Split the trunk-input gradient across blocks.
        let mut block_grads: Vec<Vec<(Matrix, Vec<f64>)>> = Vec::with_capacity(self.blocks.len());
        let mut offset = 0;
        for (block, layer_caches) in self.blocks.iter().zip(&cache.blocks) {
            let width = block.output_dim();
            let mut grad_out = grad[offset..offset + width].to_vec();
            offset += width;
            let mut grads: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(block.layers.len());
            for (layer, lc) in block.layers.iter().zip(layer_caches).rev() {
                let (gw, gb, gx) = layer.backward(&lc.input, &lc.pre, &grad_out)?;
                grads.push((gw, gb));
                grad_out = gx;
            }
            grads.reverse();
            block_grads.push(grads);
        }

        let mut flat = Vec::with_capacity(self.num_params());
        for grads in block_grads {
            for (gw, gb) in grads {
                flat.extend_from_slice(gw.data());
                flat.extend_from_slice(&gb);
            }
        }
        for (gw, gb) in trunk_grads {
            flat.extend_from_slice(gw.data());
            flat.extend_from_slice(&gb);
        }
        Ok(flat)
    }

    /// Reference evaluation with every hidden activation replaced by
    /// `alpha * activation + beta`; the comparison target for
    /// [`rescale_equivalent`]. Returns the pre-head output.
    pub fn forward_with_affine_activation(
        &self,
        x: &[f64],
        alpha: f64,
        beta: f64,
    ) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let run_stack = |layers: &[MonotoneDenseLayer], input: Vec<f64>| -> Result<Vec<f64>> {
            let mut value = input;
            for layer in layers {
                let (y, pre) = layer.forward(&value)?;
                value = if layer.output_is_linear() {
                    y
                } else {
                    combined(layer.selector(), layer.kind(), &pre)?
                        .iter()
                        .map(|&v| alpha * v + beta)
                        .collect()
                };
            }
            Ok(value)
        };

        let trunk_input = if self.blocks.is_empty() {
            x.to_vec()
        } else {
            let mut concat = Vec::new();
            for block in &self.blocks {
                let sliced: Vec<f64> = block.inputs.iter().map(|&i| x[i]).collect();
                concat.extend(run_stack(&block.layers, sliced)?);
            }
            concat
        };
        run_stack(&self.trunk, trunk_input)
    }
}

/// Rewrites a saturated-selector network so that plain saturated activations
/// reproduce the behavior of `alpha * activation + beta`: every layer that
/// consumes activation outputs gets `W' = alpha * W` and
/// `b' = beta * |W|_t 1 + b`; layers reading raw data are unchanged.
pub fn rescale_equivalent(net: &Network, alpha: f64, beta: f64) -> Result<Network> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "rescale needs alpha > 0, got {alpha}"
        )));
    }
    for layer in net.all_layers() {
        if layer.output_is_linear() {
            continue;
        }
        let s = layer.selector();
        if s.convex != 0 || s.concave != 0 {
            return Err(Error::InvalidConfig(
                "rescale equivalence requires saturated-only selectors in hidden layers".into(),
            ));
        }
    }

    let transform = |layer: &MonotoneDenseLayer| -> Result<MonotoneDenseLayer> {
        let effective = layer.effective_weights();
        let mut weights = layer.weights().clone();
        for v in weights.data_mut() {
            *v *= alpha;
        }
        let bias: Vec<f64> = layer
            .bias()
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                let row_sum: f64 = (0..effective.cols()).map(|i| effective.get(j, i)).sum();
                beta * row_sum + b
            })
            .collect();
        MonotoneDenseLayer::new(
            weights,
            bias,
            layer.indicator().clone(),
            layer.selector(),
            layer.kind(),
            layer.output_is_linear(),
        )
    };

    let mut out = net.clone();
    // Block sub-stacks: the first layer reads raw features, deeper ones read
    // activations.
    for block in &mut out.blocks {
        for (k, layer) in block.layers.iter_mut().enumerate() {
            if k > 0 {
                *layer = transform(layer)?;
            }
        }
    }
    // Trunk: for Type 1 the first layer reads raw features; for Type 2 it
    // reads block activations and is transformed too.
    let trunk_start = if out.blocks.is_empty() { 1 } else { 0 };
    for layer in out.trunk.iter_mut().skip(trunk_start) {
        *layer = transform(layer)?;
    }
    Ok(out)
}

// --- model file round trip ---------------------------------------------

#[derive(Serialize, Deserialize)]
struct WireLayer {
    n: usize,
    m: usize,
    kind: ActivationKind,
    t: MonotonicityIndicator,
    s: ActivationSelector,
    #[serde(rename = "W")]
    w: Vec<f64>,
    b: Vec<f64>,
    output_is_linear: bool,
}

#[derive(Serialize, Deserialize)]
struct WireBlock {
    inputs: Vec<usize>,
    layers: Vec<WireLayer>,
}

#[derive(Serialize, Deserialize)]
struct WireModel {
    format_version: u64,
    architecture: Architecture,
    final_activation: FinalActivation,
    input_dim: usize,
    output_dim: usize,
    indicator: MonotonicityIndicator,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    blocks: Vec<WireBlock>,
    layers: Vec<WireLayer>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u64>,
}

fn layer_to_wire(layer: &MonotoneDenseLayer) -> WireLayer {
    WireLayer {
        n: layer.input_dim(),
        m: layer.output_dim(),
        kind: layer.kind(),
        t: layer.indicator().clone(),
        s: layer.selector(),
        w: layer.weights().data().to_vec(),
        b: layer.bias().to_vec(),
        output_is_linear: layer.output_is_linear(),
    }
}

fn layer_from_wire(wire: WireLayer) -> Result<MonotoneDenseLayer> {
    if wire.w.len() != wire.n * wire.m {
        return Err(Error::MalformedModel(format!(
            "layer weight array has {} entries for an {}x{} layer",
            wire.w.len(),
            wire.n,
            wire.m
        )));
    }
    if wire.w.iter().chain(&wire.b).any(|v| !v.is_finite()) {
        return Err(Error::MalformedModel("non-finite layer parameter".into()));
    }
    MonotoneDenseLayer::new(
        Matrix::from_vec(wire.n, wire.m, wire.w)?,
        wire.b,
        wire.t,
        wire.s,
        wire.kind,
        wire.output_is_linear,
    )
}

impl Network {
    pub fn to_json_string(&self) -> String {
        let wire = WireModel {
            format_version: FORMAT_VERSION,
            architecture: self.architecture,
            final_activation: self.final_activation,
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            indicator: self.indicator.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| WireBlock {
                    inputs: b.inputs.clone(),
                    layers: b.layers.iter().map(layer_to_wire).collect(),
                })
                .collect(),
            layers: self.trunk.iter().map(layer_to_wire).collect(),
        };
        let mut json =
            serde_json::to_string_pretty(&wire).expect("model serialization is infallible");
        json.push('\n');
        json
    }

    pub fn from_json_str(json: &str) -> Result<Network> {
        let probe: VersionProbe =
            serde_json::from_str(json).map_err(|e| Error::MalformedModel(e.to_string()))?;
        match probe.format_version {
            None => return Err(Error::MalformedModel("missing format_version field".into())),
            Some(FORMAT_VERSION) => {}
            Some(other) => return Err(Error::UnsupportedVersion(other)),
        }
        let wire: WireModel =
            serde_json::from_str(json).map_err(|e| Error::MalformedModel(e.to_string()))?;

        let blocks: Vec<FeatureBlock> = wire
            .blocks
            .into_iter()
            .map(|b| -> Result<FeatureBlock> {
                Ok(FeatureBlock {
                    inputs: b.inputs,
                    layers: b
                        .layers
                        .into_iter()
                        .map(layer_from_wire)
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        let trunk: Vec<MonotoneDenseLayer> = wire
            .layers
            .into_iter()
            .map(layer_from_wire)
            .collect::<Result<_>>()?;

        let net = Network {
            architecture: wire.architecture,
            input_dim: wire.input_dim,
            output_dim: wire.output_dim,
            indicator: wire.indicator,
            blocks,
            trunk,
            final_activation: wire.final_activation,
        };
        net.validate_wiring()?;
        Ok(net)
    }

    fn validate_wiring(&self) -> Result<()> {
        if self.indicator.len() != self.input_dim {
            return Err(Error::MalformedModel(format!(
                "indicator length {} does not match input_dim {}",
                self.indicator.len(),
                self.input_dim
            )));
        }
        let trunk_first = self
            .trunk
            .first()
            .ok_or_else(|| Error::MalformedModel("model has no trunk layers".into()))?;
        let expected_trunk_input = if self.blocks.is_empty() {
            self.input_dim
        } else {
            for block in &self.blocks {
                if let Some(&bad) = block.inputs.iter().find(|&&i| i >= self.input_dim) {
                    return Err(Error::MalformedModel(format!(
                        "block reads input {bad}, input_dim is {}",
                        self.input_dim
                    )));
                }
                let mut prev = block.inputs.len();
                for layer in &block.layers {
                    if layer.input_dim() != prev {
                        return Err(Error::MalformedModel(
                            "block layer dimensions do not chain".into(),
                        ));
                    }
                    prev = layer.output_dim();
                }
            }
            self.blocks.iter().map(FeatureBlock::output_dim).sum()
        };
        if trunk_first.input_dim() != expected_trunk_input {
            return Err(Error::MalformedModel(format!(
                "trunk expects {} inputs, front end provides {expected_trunk_input}",
                trunk_first.input_dim()
            )));
        }
        let mut prev = trunk_first.output_dim();
        for layer in &self.trunk[1..] {
            if layer.input_dim() != prev {
                return Err(Error::MalformedModel(
                    "trunk layer dimensions do not chain".into(),
                ));
            }
            prev = layer.output_dim();
        }
        if prev != self.output_dim {
            return Err(Error::MalformedModel(format!(
                "final layer emits {prev} outputs, output_dim is {}",
                self.output_dim
            )));
        }
        Ok(())
    }
}

/// Writes the model as versioned JSON.
pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, net.to_json_string())?;
    Ok(())
}

/// Reads a model written by [`save_model`]; floats round-trip exactly.
pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    let json = fs::read_to_string(path.as_ref())?;
    Network::from_json_str(&json)
}
