use std::fmt;

use serde::{Deserialize, Serialize};

/// One entry of an architecture descriptor.
///
/// The first six kinds map one-to-one onto executable layers. The rest
/// (grouped convolution, padded/ceil pooling, adaptive pooling and the
/// composite residual, fire and shuffle blocks) exist so the catalog CNNs
/// can be described and counted exactly; they cannot be built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        in_features: usize,
        out_features: usize,
        bias: bool,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
        groups: usize,
        bias: bool,
    },
    MaxPool2d {
        kernel: usize,
        stride: usize,
        padding: usize,
        ceil_mode: bool,
    },
    Relu,
    Flatten,
    BatchNorm2d {
        channels: usize,
    },
    AdaptiveAvgPool2d {
        out: (usize, usize),
    },
    /// squeeze 1×1 → relu → (expand 1×1 ‖ expand 3×3) → relu, concatenated.
    Fire {
        in_channels: usize,
        squeeze: usize,
        expand1x1: usize,
        expand3x3: usize,
    },
    /// Two 3×3 conv+bn with identity (or 1×1 conv+bn projection) shortcut.
    BasicBlock {
        in_channels: usize,
        out_channels: usize,
        stride: usize,
    },
    /// Channel-split / depthwise unit with channel shuffle.
    ShuffleUnit {
        in_channels: usize,
        out_channels: usize,
        stride: usize,
    },
}

/// Parameter counts of a layer or descriptor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    /// Values that receive gradients.
    pub trainable: usize,
    /// Everything exchanged on the wire: trainable values plus batchnorm
    /// running statistics.
    pub transmitted: usize,
}

impl std::ops::Add for ParamCount {
    type Output = ParamCount;

    fn add(self, rhs: Self) -> Self {
        ParamCount {
            trainable: self.trainable + rhs.trainable,
            transmitted: self.transmitted + rhs.transmitted,
        }
    }
}

impl std::iter::Sum for ParamCount {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ParamCount::default(), |a, b| a + b)
    }
}

fn conv_count(cin: usize, cout: usize, k: (usize, usize), groups: usize, bias: bool) -> ParamCount {
    let n = cout * (cin / groups) * k.0 * k.1 + if bias { cout } else { 0 };
    ParamCount {
        trainable: n,
        transmitted: n,
    }
}

fn bn_count(c: usize) -> ParamCount {
    ParamCount {
        trainable: 2 * c,
        transmitted: 4 * c,
    }
}

fn conv_out(extent: usize, k: usize, stride: usize, padding: usize) -> Option<usize> {
    (extent + 2 * padding).checked_sub(k).map(|span| span / stride + 1)
}

fn pool_out(extent: usize, k: usize, stride: usize, padding: usize, ceil_mode: bool) -> Option<usize> {
    let span = (extent + 2 * padding).checked_sub(k)?;
    let mut out = if ceil_mode {
        span.div_ceil(stride) + 1
    } else {
        span / stride + 1
    };
    // the last window must start inside the input or left padding
    if ceil_mode && (out - 1) * stride >= extent + padding {
        out -= 1;
    }
    Some(out)
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::BatchNorm2d { .. } => "batchnorm2d",
            LayerSpec::AdaptiveAvgPool2d { .. } => "adaptive_avgpool2d",
            LayerSpec::Fire { .. } => "fire",
            LayerSpec::BasicBlock { .. } => "basic_block",
            LayerSpec::ShuffleUnit { .. } => "shuffle_unit",
        }
    }

    /// Closed-form parameter count; independent of the input extent.
    pub fn param_count(&self) -> ParamCount {
        match *self {
            LayerSpec::Dense {
                in_features,
                out_features,
                bias,
            } => {
                let n = in_features * out_features + if bias { out_features } else { 0 };
                ParamCount {
                    trainable: n,
                    transmitted: n,
                }
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                groups,
                bias,
                ..
            } => conv_count(in_channels, out_channels, kernel, groups, bias),
            LayerSpec::BatchNorm2d { channels } => bn_count(channels),
            LayerSpec::Fire {
                in_channels,
                squeeze,
                expand1x1,
                expand3x3,
            } => {
                conv_count(in_channels, squeeze, (1, 1), 1, true)
                    + conv_count(squeeze, expand1x1, (1, 1), 1, true)
                    + conv_count(squeeze, expand3x3, (3, 3), 1, true)
            }
            LayerSpec::BasicBlock {
                in_channels,
                out_channels,
                stride,
            } => {
                let main = conv_count(in_channels, out_channels, (3, 3), 1, false)
                    + bn_count(out_channels)
                    + conv_count(out_channels, out_channels, (3, 3), 1, false)
                    + bn_count(out_channels);
                if stride != 1 || in_channels != out_channels {
                    main + conv_count(in_channels, out_channels, (1, 1), 1, false) + bn_count(out_channels)
                } else {
                    main
                }
            }
            LayerSpec::ShuffleUnit {
                in_channels,
                out_channels,
                stride,
            } => {
                let branch = out_channels / 2;
                let (b2_in, b1) = if stride > 1 {
                    let b1 = conv_count(in_channels, in_channels, (3, 3), in_channels, false)
                        + bn_count(in_channels)
                        + conv_count(in_channels, branch, (1, 1), 1, false)
                        + bn_count(branch);
                    (in_channels, b1)
                } else {
                    (branch, ParamCount::default())
                };
                b1 + conv_count(b2_in, branch, (1, 1), 1, false)
                    + bn_count(branch)
                    + conv_count(branch, branch, (3, 3), branch, false)
                    + bn_count(branch)
                    + conv_count(branch, branch, (1, 1), 1, false)
                    + bn_count(branch)
            }
            LayerSpec::MaxPool2d { .. }
            | LayerSpec::Relu
            | LayerSpec::Flatten
            | LayerSpec::AdaptiveAvgPool2d { .. } => ParamCount::default(),
        }
    }

    /// Per-sample output shape, or a description of why the input is not
    /// acceptable.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        let image = || -> Result<(usize, usize, usize), String> {
            match *input {
                [c, h, w] => Ok((c, h, w)),
                _ => Err(format!("{} expects a [c, h, w] input, got {input:?}", self.kind_name())),
            }
        };
        let channels = |expected: usize, got: usize| -> Result<(), String> {
            if expected == got {
                Ok(())
            } else {
                Err(format!(
                    "{} expects {expected} input channels, got {got}",
                    self.kind_name()
                ))
            }
        };
        let too_small = || format!("{} window does not fit input {input:?}", self.kind_name());
        match *self {
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => {
                if input != [in_features] {
                    return Err(format!("dense expects [{in_features}] input, got {input:?}"));
                }
                Ok(vec![out_features])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                groups,
                ..
            } => {
                let (c, h, w) = image()?;
                channels(in_channels, c)?;
                if groups == 0 || in_channels % groups != 0 || out_channels % groups != 0 {
                    return Err(format!(
                        "conv2d groups={groups} must divide in={in_channels} and out={out_channels}"
                    ));
                }
                if stride == 0 {
                    return Err("conv2d stride must be positive".into());
                }
                let oh = conv_out(h, kernel.0, stride, padding).ok_or_else(too_small)?;
                let ow = conv_out(w, kernel.1, stride, padding).ok_or_else(too_small)?;
                Ok(vec![out_channels, oh, ow])
            }
            LayerSpec::MaxPool2d {
                kernel,
                stride,
                padding,
                ceil_mode,
            } => {
                let (c, h, w) = image()?;
                if stride == 0 || kernel == 0 {
                    return Err("maxpool2d kernel and stride must be positive".into());
                }
                let oh = pool_out(h, kernel, stride, padding, ceil_mode).ok_or_else(too_small)?;
                let ow = pool_out(w, kernel, stride, padding, ceil_mode).ok_or_else(too_small)?;
                Ok(vec![c, oh, ow])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::BatchNorm2d { channels: n } => {
                let (c, _, _) = image()?;
                channels(n, c)?;
                Ok(input.to_vec())
            }
            LayerSpec::AdaptiveAvgPool2d { out } => {
                let (c, _, _) = image()?;
                Ok(vec![c, out.0, out.1])
            }
            LayerSpec::Fire {
                in_channels,
                expand1x1,
                expand3x3,
                ..
            } => {
                let (c, h, w) = image()?;
                channels(in_channels, c)?;
                Ok(vec![expand1x1 + expand3x3, h, w])
            }
            LayerSpec::BasicBlock {
                in_channels,
                out_channels,
                stride,
            } => {
                let (c, h, w) = image()?;
                channels(in_channels, c)?;
                if stride == 0 {
                    return Err("basic_block stride must be positive".into());
                }
                let oh = conv_out(h, 3, stride, 1).ok_or_else(too_small)?;
                let ow = conv_out(w, 3, stride, 1).ok_or_else(too_small)?;
                Ok(vec![out_channels, oh, ow])
            }
            LayerSpec::ShuffleUnit {
                in_channels,
                out_channels,
                stride,
            } => {
                let (c, h, w) = image()?;
                channels(in_channels, c)?;
                if out_channels % 2 != 0 {
                    return Err(format!("shuffle_unit out={out_channels} must be even"));
                }
                if !(1..=3).contains(&stride) {
                    return Err(format!("shuffle_unit stride must be 1..=3, got {stride}"));
                }
                if stride == 1 && in_channels != out_channels {
                    return Err(format!(
                        "shuffle_unit with stride 1 needs in == out, got {in_channels} -> {out_channels}"
                    ));
                }
                let oh = conv_out(h, 3, stride, 1).ok_or_else(too_small)?;
                let ow = conv_out(w, 3, stride, 1).ok_or_else(too_small)?;
                Ok(vec![out_channels, oh, ow])
            }
        }
    }

    /// Whether the training engine can execute this layer.
    pub fn buildable(&self) -> bool {
        match *self {
            LayerSpec::Dense { .. } | LayerSpec::Relu | LayerSpec::Flatten | LayerSpec::BatchNorm2d { .. } => true,
            LayerSpec::Conv2d { stride, groups, .. } => groups == 1 && stride > 0,
            LayerSpec::MaxPool2d { padding, ceil_mode, .. } => padding == 0 && !ceil_mode,
            _ => false,
        }
    }
}

fn dims(v: (usize, usize)) -> String {
    if v.0 == v.1 {
        v.0.to_string()
    } else {
        format!("{}x{}", v.0, v.1)
    }
}

/// Renders the layer in the one-line `kind key=value ...` file syntax.
impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Dense {
                in_features,
                out_features,
                bias,
            } => write!(f, "dense in={in_features} out={out_features} bias={bias}"),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                groups,
                bias,
            } => write!(
                f,
                "conv2d in={in_channels} out={out_channels} kernel={} stride={stride} padding={padding} groups={groups} bias={bias}",
                dims(*kernel)
            ),
            LayerSpec::MaxPool2d {
                kernel,
                stride,
                padding,
                ceil_mode,
            } => write!(
                f,
                "maxpool2d kernel={kernel} stride={stride} padding={padding} ceil={ceil_mode}"
            ),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::BatchNorm2d { channels } => write!(f, "batchnorm2d channels={channels}"),
            LayerSpec::AdaptiveAvgPool2d { out } => write!(f, "adaptive_avgpool2d out={}", dims(*out)),
            LayerSpec::Fire {
                in_channels,
                squeeze,
                expand1x1,
                expand3x3,
            } => write!(
                f,
                "fire in={in_channels} squeeze={squeeze} expand1x1={expand1x1} expand3x3={expand3x3}"
            ),
            LayerSpec::BasicBlock {
                in_channels,
                out_channels,
                stride,
            } => write!(f, "basic_block in={in_channels} out={out_channels} stride={stride}"),
            LayerSpec::ShuffleUnit {
                in_channels,
                out_channels,
                stride,
            } => write!(f, "shuffle_unit in={in_channels} out={out_channels} stride={stride}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_counts() {
        let dense = LayerSpec::Dense {
            in_features: 3,
            out_features: 2,
            bias: true,
        };
        assert_eq!(dense.param_count().trainable, 8);
        let conv = LayerSpec::Conv2d {
            in_channels: 3,
            out_channels: 2,
            kernel: (3, 3),
            stride: 1,
            padding: 0,
            groups: 1,
            bias: true,
        };
        assert_eq!(conv.param_count().trainable, 56);
        let bn = LayerSpec::BatchNorm2d { channels: 5 };
        assert_eq!(
            bn.param_count(),
            ParamCount {
                trainable: 10,
                transmitted: 20
            }
        );
    }

    #[test]
    fn ceil_mode_pooling_matches_reference_extents() {
        // 109 -> 54 -> 27 -> 13 is the SqueezeNet 1.0 feature pyramid
        let pool = LayerSpec::MaxPool2d {
            kernel: 3,
            stride: 2,
            padding: 0,
            ceil_mode: true,
        };
        assert_eq!(pool.output_shape(&[96, 109, 109]).unwrap(), vec![96, 54, 54]);
        assert_eq!(pool.output_shape(&[256, 54, 54]).unwrap(), vec![256, 27, 27]);
        assert_eq!(pool.output_shape(&[512, 27, 27]).unwrap(), vec![512, 13, 13]);
    }

    #[test]
    fn shape_errors() {
        let conv = LayerSpec::Conv2d {
            in_channels: 3,
            out_channels: 8,
            kernel: (3, 3),
            stride: 1,
            padding: 0,
            groups: 1,
            bias: true,
        };
        assert!(conv.output_shape(&[1, 8, 8]).is_err());
        assert!(conv.output_shape(&[3, 2, 2]).is_err());
        assert!(conv.output_shape(&[12]).is_err());
        let unit = LayerSpec::ShuffleUnit {
            in_channels: 24,
            out_channels: 116,
            stride: 1,
        };
        assert!(unit.output_shape(&[24, 56, 56]).is_err());
    }
}
