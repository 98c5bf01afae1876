//! Built-in descriptors.
//!
//! The five ImageNet CNNs are count-only. Their variants were pinned by
//! matching published 4-class parameter totals: VGG-11 is the batchnorm
//! variant (plain VGG-11 is 5,504 short, exactly its batchnorm γ/β),
//! ShuffleNet is v2 at width ×1.0, SqueezeNet is v1.0 with a 512→4 1×1
//! conv classifier. Every head is the 1000-class baseline with its final
//! classifier swapped for a `num_classes` one.

use super::{ArchDescriptor, ArchError, LayerSpec};

pub const IMAGENET_INPUT: [usize; 3] = [3, 224, 224];

/// Names of the count-only catalog CNNs.
pub const REFERENCE_CNNS: [&str; 5] = [
    "alexnet",
    "squeezenet_v1_0",
    "resnet18",
    "vgg11_batchnorm",
    "shufflenet_v2_x1_0",
];

/// Names of the descriptors the engine can train.
pub const DESK_MODELS: [&str; 3] = ["tiny_mlp", "tiny_cnn", "tiny_cnn_bn"];

fn conv(cin: usize, cout: usize, k: usize, stride: usize, padding: usize, bias: bool) -> LayerSpec {
    LayerSpec::Conv2d {
        in_channels: cin,
        out_channels: cout,
        kernel: (k, k),
        stride,
        padding,
        groups: 1,
        bias,
    }
}

fn dense(i: usize, o: usize) -> LayerSpec {
    LayerSpec::Dense {
        in_features: i,
        out_features: o,
        bias: true,
    }
}

fn pool(kernel: usize, stride: usize, padding: usize, ceil_mode: bool) -> LayerSpec {
    LayerSpec::MaxPool2d {
        kernel,
        stride,
        padding,
        ceil_mode,
    }
}

pub fn alexnet(num_classes: usize) -> Result<ArchDescriptor, ArchError> {
    use LayerSpec::{Flatten, Relu};
    let layers = vec![
        conv(3, 64, 11, 4, 2, true),
        Relu,
        pool(3, 2, 0, false),
        conv(64, 192, 5, 1, 2, true),
        Relu,
        pool(3, 2, 0, false),
        conv(192, 384, 3, 1, 1, true),
        Relu,
        conv(384, 256, 3, 1, 1, true),
        Relu,
        conv(256, 256, 3, 1, 1, true),
        Relu,
        pool(3, 2, 0, false),
        LayerSpec::AdaptiveAvgPool2d { out: (6, 6) },
        Flatten,
        dense(256 * 6 * 6, 4096),
        Relu,
        dense(4096, 4096),
        Relu,
        dense(4096, num_classes),
    ];
    ArchDescriptor::new("alexnet", IMAGENET_INPUT.to_vec(), layers, num_classes, false)
}

pub fn squeezenet_v1_0(num_classes: usize) -> Result<ArchDescriptor, ArchError> {
    use LayerSpec::{Flatten, Relu};
    let fire = |in_channels, squeeze, expand| LayerSpec::Fire {
        in_channels,
        squeeze,
        expand1x1: expand,
        expand3x3: expand,
    };
    let layers = vec![
        conv(3, 96, 7, 2, 0, true),
        Relu,
        pool(3, 2, 0, true),
        fire(96, 16, 64),
        fire(128, 16, 64),
        fire(128, 32, 128),
        pool(3, 2, 0, true),
        fire(256, 32, 128),
        fire(256, 48, 192),
        fire(384, 48, 192),
        fire(384, 64, 256),
        pool(3, 2, 0, true),
        fire(512, 64, 256),
        conv(512, num_classes, 1, 1, 0, true),
        Relu,
        LayerSpec::AdaptiveAvgPool2d { out: (1, 1) },
        Flatten,
    ];
    ArchDescriptor::new("squeezenet_v1_0", IMAGENET_INPUT.to_vec(), layers, num_classes, false)
}

pub fn resnet18(num_classes: usize) -> Result<ArchDescriptor, ArchError> {
    use LayerSpec::{Flatten, Relu};
    let block = |in_channels, out_channels, stride| LayerSpec::BasicBlock {
        in_channels,
        out_channels,
        stride,
    };
    let layers = vec![
        conv(3, 64, 7, 2, 3, false),
        LayerSpec::BatchNorm2d { channels: 64 },
        Relu,
        pool(3, 2, 1, false),
        block(64, 64, 1),
        block(64, 64, 1),
        block(64, 128, 2),
        block(128, 128, 1),
        block(128, 256, 2),
        block(256, 256, 1),
        block(256, 512, 2),
        block(512, 512, 1),
        LayerSpec::AdaptiveAvgPool2d { out: (1, 1) },
        Flatten,
        dense(512, num_classes),
    ];
    ArchDescriptor::new("resnet18", IMAGENET_INPUT.to_vec(), layers, num_classes, false)
}

pub fn vgg11_batchnorm(num_classes: usize) -> Result<ArchDescriptor, ArchError> {
    use LayerSpec::{Flatten, Relu};
    // configuration "A": channel counts, 0 marks a 2×2 max pool
    const CFG: [usize; 13] = [64, 0, 128, 0, 256, 256, 0, 512, 512, 0, 512, 512, 0];
    let mut layers = Vec::new();
    let mut channels = 3;
    for &c in &CFG {
        if c == 0 {
            layers.push(pool(2, 2, 0, false));
        } else {
            layers.push(conv(channels, c, 3, 1, 1, true));
            layers.push(LayerSpec::BatchNorm2d { channels: c });
            layers.push(Relu);
            channels = c;
        }
    }
    layers.extend([
        LayerSpec::AdaptiveAvgPool2d { out: (7, 7) },
        Flatten,
        dense(512 * 7 * 7, 4096),
        Relu,
        dense(4096, 4096),
        Relu,
        dense(4096, num_classes),
    ]);
    ArchDescriptor::new("vgg11_batchnorm", IMAGENET_INPUT.to_vec(), layers, num_classes, false)
}

pub fn shufflenet_v2_x1_0(num_classes: usize) -> Result<ArchDescriptor, ArchError> {
    use LayerSpec::{Flatten, Relu};
    let mut layers = vec![
        conv(3, 24, 3, 2, 1, false),
        LayerSpec::BatchNorm2d { channels: 24 },
        Relu,
        pool(3, 2, 1, false),
    ];
    let mut channels = 24;
    for (repeats, out) in [(4, 116), (8, 232), (4, 464)] {
        for i in 0..repeats {
            layers.push(LayerSpec::ShuffleUnit {
                in_channels: if i == 0 { channels } else { out },
                out_channels: out,
                stride: if i == 0 { 2 } else { 1 },
            });
        }
        channels = out;
    }
    layers.extend([
        conv(464, 1024, 1, 1, 0, false),
        LayerSpec::BatchNorm2d { channels: 1024 },
        Relu,
        LayerSpec::AdaptiveAvgPool2d { out: (1, 1) },
        Flatten,
        dense(1024, num_classes),
    ]);
    ArchDescriptor::new(
        "shufflenet_v2_x1_0",
        IMAGENET_INPUT.to_vec(),
        layers,
        num_classes,
        false,
    )
}

/// `in → hidden → relu → classes`.
pub fn tiny_mlp(input: usize, hidden: usize, num_classes: usize) -> Result<ArchDescriptor, ArchError> {
    ArchDescriptor::new(
        "tiny_mlp",
        vec![input],
        vec![dense(input, hidden), LayerSpec::Relu, dense(hidden, num_classes)],
        num_classes,
        true,
    )
}

/// `conv 8@3×3 (same padding) → relu → maxpool 2 → flatten → dense`.
pub fn tiny_cnn(input: [usize; 3], num_classes: usize) -> Result<ArchDescriptor, ArchError> {
    let [c, h, w] = input;
    ArchDescriptor::new(
        "tiny_cnn",
        input.to_vec(),
        vec![
            conv(c, 8, 3, 1, 1, true),
            LayerSpec::Relu,
            pool(2, 2, 0, false),
            LayerSpec::Flatten,
            dense(8 * (h / 2) * (w / 2), num_classes),
        ],
        num_classes,
        true,
    )
}

/// [`tiny_cnn`] with a batchnorm after the convolution.
pub fn tiny_cnn_bn(input: [usize; 3], num_classes: usize) -> Result<ArchDescriptor, ArchError> {
    let [c, h, w] = input;
    ArchDescriptor::new(
        "tiny_cnn_bn",
        input.to_vec(),
        vec![
            conv(c, 8, 3, 1, 1, false),
            LayerSpec::BatchNorm2d { channels: 8 },
            LayerSpec::Relu,
            pool(2, 2, 0, false),
            LayerSpec::Flatten,
            dense(8 * (h / 2) * (w / 2), num_classes),
        ],
        num_classes,
        true,
    )
}

/// Resolves a built-in name. Desk models adapt to `input`, which defaults
/// to 16 features (MLP) or 1×16×16 (CNNs); catalog CNNs ignore it.
pub fn lookup(name: &str, input: Option<&[usize]>, num_classes: usize) -> Result<ArchDescriptor, ArchError> {
    let image = |input: Option<&[usize]>| -> Result<[usize; 3], ArchError> {
        match input {
            None => Ok([1, 16, 16]),
            Some(&[c, h, w]) => Ok([c, h, w]),
            Some(&[d]) => {
                let side = (d as f64).sqrt().round() as usize;
                if side * side == d {
                    Ok([1, side, side])
                } else {
                    Err(ArchError::Inconsistent {
                        layer: 0,
                        reason: format!("{name} needs image input; {d} features is not a square"),
                    })
                }
            }
            Some(other) => Err(ArchError::Inconsistent {
                layer: 0,
                reason: format!("{name} needs [c, h, w] input, got {other:?}"),
            }),
        }
    };
    match name {
        "alexnet" => alexnet(num_classes),
        "squeezenet_v1_0" | "squeezenet" => squeezenet_v1_0(num_classes),
        "resnet18" => resnet18(num_classes),
        "vgg11_batchnorm" | "vgg11_bn" => vgg11_batchnorm(num_classes),
        "shufflenet_v2_x1_0" | "shufflenet" => shufflenet_v2_x1_0(num_classes),
        "tiny_mlp" => {
            let features = input.map_or(16, |s| s.iter().product());
            tiny_mlp(features, 32, num_classes)
        }
        "tiny_cnn" => tiny_cnn(image(input)?, num_classes),
        "tiny_cnn_bn" => tiny_cnn_bn(image(input)?, num_classes),
        other => Err(ArchError::UnknownArch(other.to_string())),
    }
}
