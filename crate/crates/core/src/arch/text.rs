//! Plain-text descriptor files.
//!
//! ```text
//! # comments and blank lines are ignored
//! arch name=tiny_mlp classes=4 trainable=true
//! input shape=16
//! dense in=16 out=32 bias=true
//! relu
//! dense in=32 out=4
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::{ArchDescriptor, ArchError, LayerSpec};

struct Line<'a> {
    number: usize,
    kind: &'a str,
    keys: BTreeMap<&'a str, &'a str>,
}

impl<'a> Line<'a> {
    fn err(&self, msg: impl Into<String>) -> ArchError {
        ArchError::Parse {
            line: self.number,
            message: msg.into(),
        }
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.keys.remove(key)
    }

    fn usize(&mut self, key: &str) -> Result<usize, ArchError> {
        let raw = self.take(key).ok_or_else(|| self.err(format!("missing `{key}`")))?;
        raw.parse()
            .map_err(|_| self.err(format!("`{key}={raw}` is not a non-negative integer")))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, ArchError> {
        if self.keys.contains_key(key) {
            self.usize(key)
        } else {
            Ok(default)
        }
    }

    fn pair(&mut self, key: &str) -> Result<(usize, usize), ArchError> {
        let raw = self.take(key).ok_or_else(|| self.err(format!("missing `{key}`")))?;
        parse_dims(raw)
            .and_then(|d| match d.as_slice() {
                [a] => Some((*a, *a)),
                [a, b] => Some((*a, *b)),
                _ => None,
            })
            .ok_or_else(|| self.err(format!("`{key}={raw}` is not N or NxM")))
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool, ArchError> {
        match self.take(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(raw) => Err(self.err(format!("`{key}={raw}` is not true/false"))),
        }
    }

    fn finish(&self) -> Result<(), ArchError> {
        match self.keys.keys().next() {
            Some(extra) => Err(self.err(format!("unknown key `{extra}` for `{}`", self.kind))),
            None => Ok(()),
        }
    }
}

fn parse_dims(raw: &str) -> Option<Vec<usize>> {
    raw.split('x').map(|p| p.parse().ok()).collect()
}

fn tokenize(number: usize, raw: &str) -> Result<Option<Line<'_>>, ArchError> {
    let content = raw.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let mut parts = content.split_whitespace();
    let kind = parts.next().unwrap_or_default();
    let mut keys = BTreeMap::new();
    for part in parts {
        let (k, v) = part.split_once('=').ok_or(ArchError::Parse {
            line: number,
            message: format!("expected key=value, got `{part}`"),
        })?;
        if keys.insert(k, v).is_some() {
            return Err(ArchError::Parse {
                line: number,
                message: format!("duplicate key `{k}`"),
            });
        }
    }
    Ok(Some(Line { number, kind, keys }))
}

fn layer(line: &mut Line<'_>) -> Result<LayerSpec, ArchError> {
    let spec = match line.kind {
        "dense" => LayerSpec::Dense {
            in_features: line.usize("in")?,
            out_features: line.usize("out")?,
            bias: line.flag("bias", true)?,
        },
        "conv2d" => LayerSpec::Conv2d {
            in_channels: line.usize("in")?,
            out_channels: line.usize("out")?,
            kernel: line.pair("kernel")?,
            stride: line.usize_or("stride", 1)?,
            padding: line.usize_or("padding", 0)?,
            groups: line.usize_or("groups", 1)?,
            bias: line.flag("bias", true)?,
        },
        "maxpool2d" => {
            let kernel = line.usize("kernel")?;
            LayerSpec::MaxPool2d {
                kernel,
                stride: line.usize_or("stride", kernel)?,
                padding: line.usize_or("padding", 0)?,
                ceil_mode: line.flag("ceil", false)?,
            }
        }
        "relu" => LayerSpec::Relu,
        "flatten" => LayerSpec::Flatten,
        "batchnorm2d" => LayerSpec::BatchNorm2d {
            channels: line.usize("channels")?,
        },
        "adaptive_avgpool2d" => LayerSpec::AdaptiveAvgPool2d { out: line.pair("out")? },
        "fire" => LayerSpec::Fire {
            in_channels: line.usize("in")?,
            squeeze: line.usize("squeeze")?,
            expand1x1: line.usize("expand1x1")?,
            expand3x3: line.usize("expand3x3")?,
        },
        "basic_block" => LayerSpec::BasicBlock {
            in_channels: line.usize("in")?,
            out_channels: line.usize("out")?,
            stride: line.usize_or("stride", 1)?,
        },
        "shuffle_unit" => LayerSpec::ShuffleUnit {
            in_channels: line.usize("in")?,
            out_channels: line.usize("out")?,
            stride: line.usize_or("stride", 1)?,
        },
        other => return Err(line.err(format!("unknown layer kind `{other}`"))),
    };
    line.finish()?;
    Ok(spec)
}

pub fn parse_descriptor(text: &str) -> Result<ArchDescriptor, ArchError> {
    let mut header: Option<(String, usize, bool)> = None;
    let mut input: Option<Vec<usize>> = None;
    let mut layers = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let Some(mut line) = tokenize(i + 1, raw)? else {
            continue;
        };
        match line.kind {
            "arch" => {
                let name = line.take("name").ok_or_else(|| line.err("missing `name`"))?.to_string();
                let classes = line.usize("classes")?;
                let trainable = line.flag("trainable", false)?;
                line.finish()?;
                header = Some((name, classes, trainable));
            }
            "input" => {
                let raw = line.take("shape").ok_or_else(|| line.err("missing `shape`"))?;
                let shape = parse_dims(raw).ok_or_else(|| line.err(format!("bad shape `{raw}`")))?;
                line.finish()?;
                input = Some(shape);
            }
            _ => layers.push(layer(&mut line)?),
        }
    }
    let (name, classes, trainable) = header.ok_or(ArchError::Parse {
        line: 0,
        message: "missing `arch` header line".into(),
    })?;
    let input = input.ok_or(ArchError::Parse {
        line: 0,
        message: "missing `input` line".into(),
    })?;
    ArchDescriptor::new(name, input, layers, classes, trainable)
}

pub fn render_descriptor(desc: &ArchDescriptor) -> String {
    let shape: Vec<String> = desc.input_shape().iter().map(|d| d.to_string()).collect();
    let mut out = format!(
        "arch name={} classes={} trainable={}\ninput shape={}\n",
        desc.name(),
        desc.num_classes(),
        desc.trainable(),
        shape.join("x")
    );
    for l in desc.layers() {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    out
}

pub fn load_descriptor(path: &Path) -> Result<ArchDescriptor, ArchError> {
    let text = std::fs::read_to_string(path).map_err(|e| ArchError::Io(format!("{}: {e}", path.display())))?;
    parse_descriptor(&text)
}
