use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{GradientSet, ParameterSet};
use crate::error::{Error, Result};
use crate::tensor::{
    concat_channels, gaussian_noise, relu, relu_backward, split_channels, ConvBranch, ConvSpec,
    Mode, MultiConv, OpKind, Scalar, Tape, Tensor,
};

/// Kernel sizes and channel counts of every hidden multi-kernel stage.
pub const STAGE_BRANCHES: [(usize, usize); 3] = [(3, 50), (4, 10), (5, 5)];
/// Channels produced by one hidden stage (50 + 10 + 5).
pub const STAGE_CHANNELS: usize = 65;
/// Kernel size of the `output_C` / `output_S` convolutions.
pub const OUTPUT_KERNEL: usize = 3;
pub const HIDING_STAGES: usize = 5;
pub const REVEAL_STAGES: usize = 5;
pub const DEFAULT_NOISE_STDDEV: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub name: String,
    pub op: OpKind,
    pub inputs: Vec<usize>,
}

/// Forward-ordered description of an encoder or decoder network.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGraph {
    name: String,
    nodes: Vec<GraphNode>,
    /// `(name, node, channels)`
    inputs: Vec<(String, usize, usize)>,
    outputs: Vec<(String, usize)>,
}

impl LayerGraph {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            nodes: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, op: OpKind, inputs: Vec<usize>) -> usize {
        debug_assert!(inputs.iter().all(|&i| i < self.nodes.len()));
        self.nodes.push(GraphNode {
            name: name.into(),
            op,
            inputs,
        });
        self.nodes.len() - 1
    }

    fn input(&mut self, name: &str, channels: usize) -> usize {
        let id = self.push(name, OpKind::Input(name.to_string()), vec![]);
        self.inputs.push((name.to_string(), id, channels));
        id
    }

    /// A hidden stage: parallel 3×3/4×4/5×5 convolutions, concatenated, ReLU.
    fn stage<T: Scalar>(
        &mut self,
        params: &mut ParameterSet<T>,
        stage: &str,
        input: usize,
        cin: usize,
    ) -> Result<usize> {
        let specs = STAGE_BRANCHES
            .iter()
            .map(|&(k, c)| self.conv_spec(params, &format!("{stage}_{k}x{k}"), k, cin, c))
            .collect::<Result<Vec<_>>>()?;
        let conv = self.push(stage, OpKind::Conv(specs), vec![input]);
        Ok(self.push(format!("{stage}_relu"), OpKind::Relu, vec![conv]))
    }

    fn conv_spec<T: Scalar>(
        &self,
        params: &mut ParameterSet<T>,
        layer: &str,
        k: usize,
        cin: usize,
        cout: usize,
    ) -> Result<ConvSpec> {
        let weight = format!("{}.{layer}.weight", self.name);
        let bias = format!("{}.{layer}.bias", self.name);
        params.insert(weight.clone(), Tensor::zeros([k, k, cin, cout]))?;
        params.insert(bias.clone(), Tensor::zeros([cout]))?;
        Ok(ConvSpec {
            kernel: (k, k),
            out_channels: cout,
            weight,
            bias,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn input_names(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(|(n, _, _)| n.as_str())
    }

    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|(n, _)| n.as_str())
    }

    pub fn output_node(&self, name: &str) -> Option<usize> {
        self.outputs.iter().find(|(n, _)| n == name).map(|&(_, id)| id)
    }

    /// Output channel count of every node, derived from the graph alone.
    pub fn node_channels(&self) -> Vec<usize> {
        let mut ch: Vec<usize> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let c = match &node.op {
                OpKind::Input(_) => self
                    .inputs
                    .iter()
                    .find(|(_, n, _)| *n == id)
                    .map_or(0, |&(_, _, c)| c),
                OpKind::Conv(specs) => specs.iter().map(|s| s.out_channels).sum(),
                OpKind::Concat => node.inputs.iter().map(|&i| ch[i]).sum(),
                OpKind::Relu | OpKind::GaussianNoise { .. } => ch[node.inputs[0]],
            };
            ch.push(c);
        }
        ch
    }

    /// Runs the graph, recording every node on a tape.
    pub fn forward<T: Scalar, R: Rng + ?Sized>(
        &self,
        params: &ParameterSet<T>,
        inputs: &[(&str, &Tensor<T>)],
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tape<T>> {
        let mut spatial = None;
        for (name, _, channels) in &self.inputs {
            let t = inputs
                .iter()
                .find(|(n, _)| n == name)
                .map(|&(_, t)| t)
                .ok_or_else(|| Error::invalid("inputs", format!("missing graph input `{name}`")))?;
            let (h, w, c) = t.hwc()?;
            if c != *channels {
                return Err(Error::shape(
                    "forward",
                    format!("`{name}` has {c} channels, graph expects {channels}"),
                ));
            }
            match spatial {
                None => spatial = Some((h, w)),
                Some(s) if s != (h, w) => {
                    return Err(Error::shape(
                        "forward",
                        format!("`{name}` is {h}x{w}, other inputs are {}x{}", s.0, s.1),
                    ))
                }
                _ => {}
            }
        }

        let mut tape = Tape::new();
        for node in &self.nodes {
            let value = match &node.op {
                OpKind::Input(name) => inputs
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|&(_, t)| t.clone())
                    .ok_or_else(|| Error::invalid("inputs", format!("missing `{name}`")))?,
                OpKind::Conv(specs) => {
                    let branches = specs
                        .iter()
                        .map(|s| {
                            Ok(ConvBranch {
                                weights: params.require(&s.weight)?.1,
                                bias: params.require(&s.bias)?.1,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    MultiConv::new(&branches)?.forward(tape.value(node.inputs[0])?)?
                }
                OpKind::Relu => relu(tape.value(node.inputs[0])?),
                OpKind::Concat => {
                    let parts = node
                        .inputs
                        .iter()
                        .map(|&i| tape.value(i))
                        .collect::<Result<Vec<_>>>()?;
                    concat_channels(&parts)?
                }
                OpKind::GaussianNoise { stddev } => {
                    gaussian_noise(tape.value(node.inputs[0])?, *stddev, mode, rng)?
                }
            };
            tape.push(node.op.clone(), node.inputs.clone(), value)?;
        }
        Ok(tape)
    }

    /// Output tensor `name` of a finished forward pass.
    pub fn output<'t, T: Scalar>(&self, tape: &'t Tape<T>, name: &str) -> Result<&'t Tensor<T>> {
        let id = self
            .output_node(name)
            .ok_or_else(|| Error::invalid("output", format!("graph has no output `{name}`")))?;
        tape.value(id)
    }

    /// Reverse pass. Parameter gradients accumulate into `grads`; the
    /// gradients of the graph inputs named in `want_inputs` are returned in
    /// the same order.
    pub fn backward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        tape: &Tape<T>,
        output_grads: &[(&str, Tensor<T>)],
        grads: &mut GradientSet<T>,
        want_inputs: &[&str],
    ) -> Result<Vec<Tensor<T>>> {
        if tape.len() != self.nodes.len() {
            return Err(Error::Internal(format!(
                "tape has {} nodes, graph {}",
                tape.len(),
                self.nodes.len()
            )));
        }
        let mut node_grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        for (name, g) in output_grads {
            let id = self
                .output_node(name)
                .ok_or_else(|| Error::invalid("output", format!("graph has no output `{name}`")))?;
            let value = tape.value(id)?;
            value.check_same_shape("backward", g)?;
            accumulate(&mut node_grads[id], g.clone())?;
        }
        let needs_grad = |id: usize| match &self.nodes[id].op {
            OpKind::Input(name) => want_inputs.contains(&name.as_str()),
            _ => true,
        };

        let mut input_grads: Vec<Option<Tensor<T>>> = vec![None; want_inputs.len()];
        for id in (0..self.nodes.len()).rev() {
            let Some(g) = node_grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            match &node.op {
                OpKind::Input(name) => {
                    if let Some(pos) = want_inputs.iter().position(|w| w == name) {
                        input_grads[pos] = Some(g);
                    }
                }
                OpKind::Conv(specs) => {
                    let mut pairs = Vec::with_capacity(specs.len());
                    let mut slots = Vec::with_capacity(specs.len());
                    for s in specs {
                        let (wi, w) = params.require(&s.weight)?;
                        let (bi, b) = params.require(&s.bias)?;
                        pairs.push((w, b));
                        slots.push((wi, bi));
                    }
                    let src = node.inputs[0];
                    let cg = tape.conv2d_backward(id, &pairs, &g, needs_grad(src))?;
                    for ((wi, bi), (wg, bg)) in slots.into_iter().zip(&cg.branches) {
                        grads.accumulate(wi, wg.data())?;
                        grads.accumulate(bi, bg.data())?;
                    }
                    if let Some(ig) = cg.input {
                        accumulate(&mut node_grads[src], ig)?;
                    }
                }
                OpKind::Relu => {
                    let ig = relu_backward(tape.value(id)?, &g)?;
                    accumulate(&mut node_grads[node.inputs[0]], ig)?;
                }
                OpKind::Concat => {
                    let widths = node
                        .inputs
                        .iter()
                        .map(|&i| Ok(tape.value(i)?.hwc()?.2))
                        .collect::<Result<Vec<_>>>()?;
                    for (&src, part) in node.inputs.iter().zip(split_channels(&g, &widths)?) {
                        if needs_grad(src) {
                            accumulate(&mut node_grads[src], part)?;
                        }
                    }
                }
                OpKind::GaussianNoise { .. } => {
                    accumulate(&mut node_grads[node.inputs[0]], g)?;
                }
            }
        }
        input_grads
            .into_iter()
            .zip(want_inputs)
            .map(|(g, name)| match g {
                Some(g) => Ok(g),
                None => {
                    let (_, id, _) = self
                        .inputs
                        .iter()
                        .find(|(n, _, _)| n == name)
                        .ok_or_else(|| Error::invalid("input", format!("no graph input `{name}`")))?;
                    Ok(Tensor::zeros(tape.value(*id)?.shape().to_vec()))
                }
            })
            .collect()
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) -> Result<()> {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Prep network (two stages over the secret) followed by the hiding network
/// (cover joined with the prepared secret, five stages, 3×3 output conv).
/// Parameters are zero; call [`ParameterSet::init_glorot`] to randomise.
pub fn build_encoder<T: Scalar>(channels: usize) -> Result<(LayerGraph, ParameterSet<T>)> {
    if channels == 0 {
        return Err(Error::invalid("channels", "must be >= 1"));
    }
    let mut g = LayerGraph::new("encoder");
    let mut params = ParameterSet::new();
    let secret = g.input("secret_in", channels);
    let cover = g.input("cover_in", channels);
    let mut x = g.stage(&mut params, "conv_prep0", secret, channels)?;
    x = g.stage(&mut params, "conv_prep1", x, STAGE_CHANNELS)?;
    x = g.push("cover_join", OpKind::Concat, vec![cover, x]);
    let mut cin = channels + STAGE_CHANNELS;
    for i in 0..HIDING_STAGES {
        x = g.stage(&mut params, &format!("conv_hid{i}"), x, cin)?;
        cin = STAGE_CHANNELS;
    }
    let spec = g.conv_spec(&mut params, "output_C", OUTPUT_KERNEL, STAGE_CHANNELS, channels)?;
    let out = g.push("output_C", OpKind::Conv(vec![spec]), vec![x]);
    g.outputs.push(("output_C".into(), out));
    Ok((g, params))
}

/// Noise layer, five reveal stages, 3×3 output conv.
pub fn build_decoder<T: Scalar>(
    channels: usize,
    noise_stddev: f64,
) -> Result<(LayerGraph, ParameterSet<T>)> {
    if channels == 0 {
        return Err(Error::invalid("channels", "must be >= 1"));
    }
    if noise_stddev.is_nan() || noise_stddev < 0.0 {
        return Err(Error::invalid("noise_stddev", format!("{noise_stddev} must be >= 0")));
    }
    let mut g = LayerGraph::new("decoder");
    let mut params = ParameterSet::new();
    let container = g.input("container_in", channels);
    let mut x = g.push(
        "output_C_noise",
        OpKind::GaussianNoise {
            stddev: noise_stddev,
        },
        vec![container],
    );
    let mut cin = channels;
    for i in 0..REVEAL_STAGES {
        x = g.stage(&mut params, &format!("conv_rev{i}"), x, cin)?;
        cin = STAGE_CHANNELS;
    }
    let spec = g.conv_spec(&mut params, "output_S", OUTPUT_KERNEL, STAGE_CHANNELS, channels)?;
    let out = g.push("output_S", OpKind::Conv(vec![spec]), vec![x]);
    g.outputs.push(("output_S".into(), out));
    Ok((g, params))
}

/// Sender-side network evaluation: secret (already encrypted) and cover in,
/// container out. Deterministic; the encoder has no stochastic layers.
pub fn forward_encoder<T: Scalar>(
    graph: &LayerGraph,
    params: &ParameterSet<T>,
    secret: &Tensor<T>,
    cover: &Tensor<T>,
) -> Result<Tensor<T>> {
    secret.check_same_shape("forward_encoder", cover)?;
    let mut tape = graph.forward(
        params,
        &[("secret_in", secret), ("cover_in", cover)],
        Mode::Eval,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let id = graph
        .output_node("output_C")
        .ok_or_else(|| Error::invalid("graph", "not an encoder"))?;
    tape.take_value(id)
}

/// Receiver-side network evaluation.
pub fn forward_decoder<T: Scalar, R: Rng + ?Sized>(
    graph: &LayerGraph,
    params: &ParameterSet<T>,
    container: &Tensor<T>,
    mode: Mode,
    rng: &mut R,
) -> Result<Tensor<T>> {
    let mut tape = graph.forward(params, &[("container_in", container)], mode, rng)?;
    let id = graph
        .output_node("output_S")
        .ok_or_else(|| Error::invalid("graph", "not a decoder"))?;
    tape.take_value(id)
}
