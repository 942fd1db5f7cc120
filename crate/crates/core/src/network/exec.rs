use std::mem;
use std::ops::Range;

use super::graph::{LayerKind, NetworkGraph, NormVariant};
use super::weights::WeightStore;
use crate::error::{shape_err, Error, Result};
use crate::normstats::{
    adain_in_place, channel_stats_view, normalize_in_place, whiten_into, whitening_stats_view, AffineParams,
    BankEntry, BankMode, StatsBank, EPS,
};
use crate::tensor::{
    conv2d_into, maxpool2_into, pad_into, relu_in_place, resize_nearest_into, ConvWeights, Dims, PadMode, PadSpec,
    Tensor, TensorRef,
};

/// How norm layers obtain their statistics during a forward pass.
pub enum StatsMode<'a> {
    /// Compute from the layer input and record into the bank.
    Capture(&'a mut StatsBank),
    /// Read from a frozen bank.
    Apply(&'a StatsBank),
    /// Style-encoding pass: record the input statistics of every AdaIN layer
    /// as style targets and stop after the last one.
    Style(&'a mut StatsBank),
}

impl StatsMode<'_> {
    fn label(&self) -> &'static str {
        match self {
            StatsMode::Capture(_) => "capture",
            StatsMode::Apply(_) => "apply",
            StatsMode::Style(_) => "style",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExecOptions {
    /// Content/style trade-off applied at AdaIN layers.
    pub alpha: f32,
    pub eps: f32,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions { alpha: 1.0, eps: EPS }
    }
}

/// Two ping-pong activation buffers reserved up front.
///
/// A forward pass never allocates activation storage as long as every
/// intermediate fits the reserved capacity.
#[derive(Debug)]
pub struct Workspace {
    bufs: [Tensor; 2],
}

impl Workspace {
    pub fn with_capacity(elems: usize) -> Self {
        Workspace { bufs: [Tensor::with_capacity(elems), Tensor::with_capacity(elems)] }
    }

    pub fn capacity(&self) -> usize {
        self.bufs[0].capacity().min(self.bufs[1].capacity())
    }

    pub fn size_bytes(&self) -> usize {
        4 * (self.bufs[0].capacity() + self.bufs[1].capacity())
    }
}

enum Op {
    Conv { weights: ConvWeights, stride: usize, pad: PadSpec },
    Relu,
    Pool,
    Upsample(usize),
    Pad(PadSpec),
    Norm { variant: NormVariant, affine: Option<AffineParams> },
}

/// A validated graph bound to its weights.
pub struct Network {
    graph: NetworkGraph,
    ops: Vec<Op>,
}

impl Network {
    pub fn new(graph: NetworkGraph, weights: &WeightStore) -> Result<Self> {
        graph.validate()?;
        let mut ops = Vec::with_capacity(graph.layers.len());
        for (i, layer) in graph.layers.iter().enumerate() {
            let op = match &layer.kind {
                LayerKind::Conv { in_channels, out_channels, kernel, stride, pad, pad_mode } => {
                    let prefix = layer.weight.as_deref().expect("validated");
                    let k = weights.require(&format!("{prefix}.weight"))?;
                    let b = weights.require(&format!("{prefix}.bias"))?;
                    let expect = [*out_channels, *in_channels, *kernel, *kernel];
                    if k.dims() != expect || b.dims() != [*out_channels] {
                        return Err(shape_err!(
                            "layer {i} ({prefix}): weight dims {:?} / bias {:?}, expected {:?} / [{}]",
                            k.dims(),
                            b.dims(),
                            expect,
                            out_channels
                        ));
                    }
                    let weights = ConvWeights::new(
                        *out_channels,
                        *in_channels,
                        *kernel,
                        *kernel,
                        k.data().to_vec(),
                        b.data().to_vec(),
                    )?;
                    Op::Conv { weights, stride: *stride, pad: PadSpec::uniform(*pad_mode, *pad) }
                }
                LayerKind::Relu => Op::Relu,
                LayerKind::Maxpool2 => Op::Pool,
                LayerKind::UpsampleNearest { factor } => Op::Upsample(*factor),
                LayerKind::PadReflect { amount } => Op::Pad(PadSpec::uniform(PadMode::Reflect, *amount)),
                LayerKind::PadZero { amount } => Op::Pad(PadSpec::uniform(PadMode::Zero, *amount)),
                LayerKind::Norm { variant, channels, affine } => {
                    let affine = if *affine && !variant.is_whitening() {
                        let prefix = layer.weight.as_deref().expect("validated");
                        let g = weights.require(&format!("{prefix}.gamma"))?;
                        let b = weights.require(&format!("{prefix}.beta"))?;
                        if g.data().len() != *channels || b.data().len() != *channels {
                            return Err(shape_err!("layer {i} ({prefix}): affine params are not {channels} long"));
                        }
                        Some(AffineParams::new(g.data().to_vec(), b.data().to_vec())?)
                    } else {
                        None
                    };
                    Op::Norm { variant: *variant, affine }
                }
            };
            ops.push(op);
        }
        Ok(Network { graph, ops })
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Largest activation (in values) seen when running `range` on `input`.
    pub fn peak_activation(&self, input: Dims, range: Range<usize>) -> Result<usize> {
        let dims = self.graph.activation_dims(input)?;
        Ok(dims[range.start.min(dims.len())..range.end.min(dims.len())]
            .iter()
            .map(Dims::len)
            .fold(input.len(), usize::max))
    }

    /// Runs the whole graph, allocating a workspace for this call. The bank's
    /// mode selects capture or apply behaviour.
    pub fn forward(&self, x: &Tensor, bank: &mut StatsBank) -> Result<Tensor> {
        let mode = match bank.mode() {
            BankMode::Capture => StatsMode::Capture(bank),
            BankMode::Apply => StatsMode::Apply(bank),
        };
        self.forward_with(x, mode, ExecOptions::default())
    }

    /// Apply-mode forward against a frozen, shared bank.
    pub fn forward_frozen(&self, x: &Tensor, bank: &StatsBank) -> Result<Tensor> {
        self.forward_with(x, StatsMode::Apply(bank), ExecOptions::default())
    }

    pub fn forward_with(&self, x: &Tensor, mode: StatsMode<'_>, opts: ExecOptions) -> Result<Tensor> {
        let mut ws = Workspace::with_capacity(self.peak_activation(x.dims(), 0..self.len())?);
        let out = self.run(x.view(), mode, opts, &mut ws, 0..self.len(), &mut |_, _| {})?;
        Ok(out.to_tensor())
    }

    /// Encodes a style image and records the style-side statistics of every
    /// AdaIN layer.
    pub fn capture_style(&self, style: &Tensor, bank: &mut StatsBank) -> Result<()> {
        let Some(last) = self.graph.norm_layers().filter(|(_, v)| *v == NormVariant::Adain).map(|(i, _)| i).last()
        else {
            return Ok(());
        };
        let mut ws = Workspace::with_capacity(self.peak_activation(style.dims(), 0..last + 1)?);
        self.run(style.view(), StatsMode::Style(bank), ExecOptions::default(), &mut ws, 0..last + 1, &mut |_, _| {})?;
        Ok(())
    }

    /// Core executor. Runs layers `range` on `x` inside `ws`, calling
    /// `probe(layer_index, activation)` after every layer, and returns a view
    /// of the final activation that lives in the workspace.
    pub fn run<'w>(
        &self,
        x: TensorRef<'_>,
        mut mode: StatsMode<'_>,
        opts: ExecOptions,
        ws: &'w mut Workspace,
        range: Range<usize>,
        probe: &mut dyn FnMut(usize, TensorRef<'_>),
    ) -> Result<TensorRef<'w>> {
        if x.dims().c != self.graph.input_channels && range.start == 0 {
            return Err(Error::Config(format!(
                "network expects {} input channels, got {}",
                self.graph.input_channels,
                x.dims().c
            )));
        }
        let [cur, next] = &mut ws.bufs;
        cur.reset(x.dims());
        cur.data_mut().copy_from_slice(x.data());
        for i in range.clone() {
            let op = &self.ops[i];
            let mut swapped = true;
            match op {
                Op::Conv { weights, stride, pad } => conv2d_into(cur.view(), weights, *stride, *pad, next)?,
                Op::Relu => {
                    relu_in_place(cur.data_mut());
                    swapped = false;
                }
                Op::Pool => maxpool2_into(cur.view(), next),
                Op::Upsample(f) => resize_nearest_into(cur.view(), *f, next)?,
                Op::Pad(spec) => pad_into(cur.view(), *spec, next)?,
                Op::Norm { variant, affine } => {
                    swapped = self.apply_norm(i, *variant, affine.as_ref(), &mut mode, opts, cur, next)?;
                }
            }
            if swapped {
                mem::swap(cur, next);
            }
            probe(i, cur.view());
        }
        Ok(ws.bufs[0].view())
    }

    /// Returns whether the result was written to `next`.
    #[allow(clippy::too_many_arguments)]
    fn apply_norm(
        &self,
        layer: usize,
        variant: NormVariant,
        affine: Option<&AffineParams>,
        mode: &mut StatsMode<'_>,
        opts: ExecOptions,
        cur: &mut Tensor,
        next: &mut Tensor,
    ) -> Result<bool> {
        let eps = opts.eps;
        let result = match variant {
            NormVariant::In => {
                let s = channel_stats_view(cur.view(), eps)?;
                normalize_in_place(cur, &s, affine)?;
                Ok(false)
            }
            NormVariant::Iw => {
                let s = whitening_stats_view(cur.view(), eps)?;
                whiten_into(cur.view(), &s, next)?;
                Ok(true)
            }
            NormVariant::Tin => {
                match mode {
                    StatsMode::Capture(bank) => {
                        let s = channel_stats_view(cur.view(), eps)?;
                        normalize_in_place(cur, &s, affine)?;
                        bank.insert(layer, BankEntry::Channel(s))?;
                    }
                    StatsMode::Apply(bank) => normalize_in_place(cur, bank.channel(layer)?, affine)?,
                    StatsMode::Style(_) => {
                        let s = channel_stats_view(cur.view(), eps)?;
                        normalize_in_place(cur, &s, affine)?;
                    }
                }
                Ok(false)
            }
            NormVariant::Tiw => {
                match mode {
                    StatsMode::Capture(bank) => {
                        let s = whitening_stats_view(cur.view(), eps)?;
                        whiten_into(cur.view(), &s, next)?;
                        bank.insert(layer, BankEntry::Whitening(s))?;
                    }
                    StatsMode::Apply(bank) => whiten_into(cur.view(), bank.whitening(layer)?, next)?,
                    StatsMode::Style(_) => {
                        let s = whitening_stats_view(cur.view(), eps)?;
                        whiten_into(cur.view(), &s, next)?;
                    }
                }
                Ok(true)
            }
            NormVariant::Adain => {
                match mode {
                    StatsMode::Capture(bank) => {
                        let content = channel_stats_view(cur.view(), eps)?;
                        let style = bank.style(layer)?.clone();
                        adain_in_place(cur, &content, &style, opts.alpha)?;
                        bank.insert(layer, BankEntry::Channel(content))?;
                    }
                    StatsMode::Apply(bank) => {
                        adain_in_place(cur, bank.channel(layer)?, bank.style(layer)?, opts.alpha)?;
                    }
                    StatsMode::Style(bank) => {
                        bank.set_style(layer, channel_stats_view(cur.view(), eps)?)?;
                    }
                }
                Ok(false)
            }
        };
        result.map_err(|e| match e {
            Error::State(msg) => Error::State(format!("{msg} ({} pass)", mode.label())),
            other => other,
        })
    }
}
