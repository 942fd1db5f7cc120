use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::tensor::{Dims, PadMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormVariant {
    /// Instance normalization with the input's own statistics.
    In,
    /// Instance normalization with captured thumbnail statistics.
    Tin,
    /// Instance whitening with the input's own covariance.
    Iw,
    /// Instance whitening with captured thumbnail covariance.
    Tiw,
    /// Thumbnail-conditioned AdaIN: content statistics from the thumbnail,
    /// target statistics from the style image.
    Adain,
}

impl NormVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            NormVariant::In => "in",
            NormVariant::Tin => "tin",
            NormVariant::Iw => "iw",
            NormVariant::Tiw => "tiw",
            NormVariant::Adain => "adain",
        }
    }

    /// Whether the layer normalizes with statistics of whatever it is fed,
    /// which breaks consistency between patches.
    pub fn is_self_normalizing(self) -> bool {
        matches!(self, NormVariant::In | NormVariant::Iw)
    }

    pub fn is_whitening(self) -> bool {
        matches!(self, NormVariant::Iw | NormVariant::Tiw)
    }
}

fn one() -> usize {
    1
}

fn three() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        pad: usize,
        #[serde(default)]
        pad_mode: PadMode,
    },
    Relu,
    Maxpool2,
    UpsampleNearest {
        #[serde(default = "one")]
        factor: usize,
    },
    PadReflect {
        amount: usize,
    },
    PadZero {
        amount: usize,
    },
    Norm {
        variant: NormVariant,
        channels: usize,
        #[serde(default)]
        affine: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(flatten)]
    pub kind: LayerKind,
    /// Display / probe name such as `relu4_1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Prefix of the layer's tensors in the weight store (`<prefix>.weight`,
    /// `<prefix>.bias`, `<prefix>.gamma`, `<prefix>.beta`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
}

impl LayerSpec {
    pub fn new(kind: LayerKind) -> Self {
        LayerSpec { kind, name: None, weight: None }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn weight(mut self, prefix: impl Into<String>) -> Self {
        self.weight = Some(prefix.into());
        self
    }

    pub fn conv(in_channels: usize, out_channels: usize, kernel: usize, pad_mode: PadMode) -> Self {
        LayerSpec::new(LayerKind::Conv {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            pad: kernel / 2,
            pad_mode,
        })
    }

    pub fn relu() -> Self {
        LayerSpec::new(LayerKind::Relu)
    }

    pub fn norm(variant: NormVariant, channels: usize, affine: bool) -> Self {
        LayerSpec::new(LayerKind::Norm { variant, channels, affine })
    }
}

/// Ordered layer list describing a fully convolutional network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    #[serde(default = "three")]
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkGraph {
    pub fn new(input_channels: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let g = NetworkGraph { input_channels, layers };
        g.validate()?;
        Ok(g)
    }

    /// A graph with no layers: its forward pass is the identity.
    pub fn identity(channels: usize) -> Self {
        NetworkGraph { input_channels: channels, layers: Vec::new() }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let g: NetworkGraph = serde_json::from_str(json)?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Checks the channel chain and per-layer parameters.
    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 {
            return Err(config_err!("graph input must have at least one channel"));
        }
        let mut c = self.input_channels;
        for (i, layer) in self.layers.iter().enumerate() {
            match &layer.kind {
                LayerKind::Conv { in_channels, out_channels, kernel, stride, .. } => {
                    if *in_channels != c {
                        return Err(config_err!(
                            "layer {i}: conv expects {in_channels} channels but receives {c}"
                        ));
                    }
                    if *out_channels == 0 || *kernel == 0 || *stride == 0 {
                        return Err(config_err!("layer {i}: conv needs positive channels, kernel, stride"));
                    }
                    if layer.weight.is_none() {
                        return Err(config_err!("layer {i}: conv layer has no weight name"));
                    }
                    c = *out_channels;
                }
                LayerKind::Norm { channels, affine, .. } => {
                    if *channels != c {
                        return Err(config_err!("layer {i}: norm declared for {channels} channels, receives {c}"));
                    }
                    if *affine && layer.weight.is_none() {
                        return Err(config_err!("layer {i}: affine norm layer has no weight name"));
                    }
                }
                LayerKind::UpsampleNearest { factor } if *factor == 0 => {
                    return Err(config_err!("layer {i}: upsample factor must be positive"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn output_channels(&self) -> usize {
        self.layers.iter().fold(self.input_channels, |c, l| match l.kind {
            LayerKind::Conv { out_channels, .. } => out_channels,
            _ => c,
        })
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name.as_deref() == Some(name))
    }

    pub fn norm_layers(&self) -> impl Iterator<Item = (usize, NormVariant)> + '_ {
        self.layers.iter().enumerate().filter_map(|(i, l)| match l.kind {
            LayerKind::Norm { variant, .. } => Some((i, variant)),
            _ => None,
        })
    }

    /// Norm layers that would normalize each patch by its own statistics.
    pub fn self_normalizing_layers(&self) -> Vec<(usize, NormVariant)> {
        self.norm_layers().filter(|(_, v)| v.is_self_normalizing()).collect()
    }

    /// Rejects graphs that cannot be run patch-wise without visible style
    /// inconsistency between patches.
    pub fn check_patch_safe(&self) -> Result<()> {
        match self.self_normalizing_layers().first() {
            Some(&(layer, variant)) => Err(Error::InconsistentNorm { layer, variant: variant.as_str() }),
            None => Ok(()),
        }
    }

    /// Same topology with every plain IN/IW layer replaced by its thumbnail
    /// counterpart, or the reverse.
    pub fn with_norm_variant(&self, from: NormVariant, to: NormVariant) -> NetworkGraph {
        let mut g = self.clone();
        for l in &mut g.layers {
            if let LayerKind::Norm { variant, .. } = &mut l.kind {
                if *variant == from {
                    *variant = to;
                }
            }
        }
        g
    }

    /// Truncates the graph after layer `last` (inclusive).
    pub fn prefix(&self, last: usize) -> NetworkGraph {
        NetworkGraph {
            input_channels: self.input_channels,
            layers: self.layers[..=last.min(self.layers.len().saturating_sub(1))].to_vec(),
        }
    }

    /// Activation extents after every layer for a given input.
    pub fn activation_dims(&self, input: Dims) -> Result<Vec<Dims>> {
        if input.c != self.input_channels {
            return Err(config_err!(
                "graph expects {} input channels, got {}",
                self.input_channels,
                input.c
            ));
        }
        let mut d = input;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            d = match &layer.kind {
                LayerKind::Conv { out_channels, kernel, stride, pad, .. } => {
                    let (ph, pw) = (d.h + 2 * pad, d.w + 2 * pad);
                    if ph < *kernel || pw < *kernel {
                        return Err(shape_err!("layer {i}: {}x{} input too small for a {kernel}x{kernel} conv", d.h, d.w));
                    }
                    Dims::new(d.n, *out_channels, (ph - kernel) / stride + 1, (pw - kernel) / stride + 1)
                }
                LayerKind::Relu | LayerKind::Norm { .. } => d,
                LayerKind::Maxpool2 => d.with_spatial(d.h.div_ceil(2), d.w.div_ceil(2)),
                LayerKind::UpsampleNearest { factor } => d.with_spatial(d.h * factor, d.w * factor),
                LayerKind::PadReflect { amount } | LayerKind::PadZero { amount } => {
                    d.with_spatial(d.h + 2 * amount, d.w + 2 * amount)
                }
            };
            out.push(d);
        }
        Ok(out)
    }

    /// Number of trainable scalars the graph references.
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::Conv { in_channels, out_channels, kernel, .. } => {
                    out_channels * in_channels * kernel * kernel + out_channels
                }
                LayerKind::Norm { channels, affine: true, .. } => 2 * channels,
                _ => 0,
            })
            .sum()
    }

    /// Radius `r` such that output pixel `p` depends only on input pixels
    /// within Chebyshev distance `r` of `p` (output coordinates mapped back to
    /// input coordinates by the accumulated stride).
    ///
    /// Exact for interior pixels: the dependency interval of every output
    /// position in one period of the graph's resampling pattern is traced
    /// back to the input, one axis at a time (both axes behave alike).
    pub fn receptive_field(&self) -> usize {
        // output pixel u maps to input coordinate u * down / up
        let (mut down, mut up) = (1i64, 1i64);
        for layer in &self.layers {
            match layer.kind {
                LayerKind::Conv { stride, .. } => down *= stride as i64,
                LayerKind::Maxpool2 => down *= 2,
                LayerKind::UpsampleNearest { factor } => up *= factor as i64,
                _ => {}
            }
        }
        let period = down * up;
        let mut radius = 0f64;
        for u in 0..period {
            let (mut a, mut b) = (u, u);
            for layer in self.layers.iter().rev() {
                (a, b) = match layer.kind {
                    LayerKind::Conv { kernel, stride, pad, .. } => {
                        let (s, p) = (stride as i64, pad as i64);
                        (s * a - p, s * b - p + kernel as i64 - 1)
                    }
                    LayerKind::Maxpool2 => (2 * a, 2 * b + 1),
                    LayerKind::UpsampleNearest { factor } => {
                        (a.div_euclid(factor as i64), b.div_euclid(factor as i64))
                    }
                    LayerKind::PadReflect { amount } | LayerKind::PadZero { amount } => {
                        (a - amount as i64, b - amount as i64)
                    }
                    LayerKind::Relu | LayerKind::Norm { .. } => (a, b),
                };
            }
            let centre = (u * down) as f64 / up as f64;
            radius = radius.max(centre - a as f64).max(b as f64 - centre);
        }
        radius.max(0.0).ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv3(c_in: usize, c_out: usize) -> LayerSpec {
        LayerSpec::conv(c_in, c_out, 3, PadMode::Zero).weight("c")
    }

    #[test]
    fn receptive_field_simple_stacks() {
        let g = NetworkGraph::new(1, vec![conv3(1, 1)]).unwrap();
        assert_eq!(g.receptive_field(), 1);
        let g = NetworkGraph::new(1, vec![conv3(1, 1), conv3(1, 1)]).unwrap();
        assert_eq!(g.receptive_field(), 2);
        assert_eq!(NetworkGraph::identity(3).receptive_field(), 0);
    }

    #[test]
    fn receptive_field_with_pool_and_upsample() {
        let g = NetworkGraph::new(
            1,
            vec![
                conv3(1, 1),
                LayerSpec::new(LayerKind::Maxpool2),
                conv3(1, 1),
                LayerSpec::new(LayerKind::UpsampleNearest { factor: 2 }),
            ],
        )
        .unwrap();
        assert_eq!(g.receptive_field(), 4);
    }

    #[test]
    fn explicit_pad_then_valid_conv_matches_padded_conv() {
        let padded = NetworkGraph::new(
            1,
            vec![
                LayerSpec::new(LayerKind::PadReflect { amount: 1 }),
                LayerSpec::new(LayerKind::Conv {
                    in_channels: 1,
                    out_channels: 1,
                    kernel: 3,
                    stride: 1,
                    pad: 0,
                    pad_mode: PadMode::Zero,
                })
                .weight("c"),
            ],
        )
        .unwrap();
        assert_eq!(padded.receptive_field(), 1);
        assert_eq!(padded.activation_dims(Dims::new(1, 1, 5, 6)).unwrap()[1], Dims::new(1, 1, 5, 6));
    }

    #[test]
    fn channel_chain_mismatch_rejected() {
        let err = NetworkGraph::new(3, vec![conv3(4, 8)]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = NetworkGraph::new(3, vec![conv3(3, 8), LayerSpec::norm(NormVariant::Tin, 4, false)]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn json_round_trip() {
        let g = NetworkGraph::new(
            3,
            vec![
                conv3(3, 4).named("conv1"),
                LayerSpec::relu().named("relu1_1"),
                LayerSpec::norm(NormVariant::Tin, 4, true).weight("n"),
                LayerSpec::new(LayerKind::UpsampleNearest { factor: 2 }),
            ],
        )
        .unwrap();
        let json = g.to_json();
        assert!(json.contains("\"kind\": \"conv\""));
        assert!(json.contains("\"variant\": \"tin\""));
        assert_eq!(NetworkGraph::from_json(&json).unwrap(), g);
    }

    #[test]
    fn minimal_json_defaults() {
        let g = NetworkGraph::from_json(r#"{"layers":[{"kind":"relu"},{"kind":"norm","variant":"in","channels":3}]}"#)
            .unwrap();
        assert_eq!(g.input_channels, 3);
        assert!(matches!(g.check_patch_safe(), Err(Error::InconsistentNorm { layer: 1, variant: "in" })));
        assert!(g.with_norm_variant(NormVariant::In, NormVariant::Tin).check_patch_safe().is_ok());
    }
}
