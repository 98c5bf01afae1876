use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ArchError, LayerSpec, ParamCount};
use crate::nn::{BatchNorm2d, Conv2d, Dense, Element, Flatten, Layer, MaxPool2d, Model, Relu};

/// Declarative, shape-checked layer list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    num_classes: usize,
    trainable: bool,
}

/// One row of a per-layer parameter breakdown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerReport {
    pub index: usize,
    pub spec: String,
    pub output_shape: Vec<usize>,
    pub count: ParamCount,
}

impl ArchDescriptor {
    pub fn new(
        name: impl Into<String>,
        input_shape: Vec<usize>,
        layers: Vec<LayerSpec>,
        num_classes: usize,
        trainable: bool,
    ) -> Result<Self, ArchError> {
        let desc = ArchDescriptor {
            name: name.into(),
            input_shape,
            layers,
            num_classes,
            trainable,
        };
        desc.validate()?;
        Ok(desc)
    }

    fn validate(&self) -> Result<(), ArchError> {
        if self.num_classes == 0 {
            return Err(ArchError::Inconsistent {
                layer: 0,
                reason: "num_classes must be positive".into(),
            });
        }
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(ArchError::Inconsistent {
                layer: 0,
                reason: format!("invalid input shape {:?}", self.input_shape),
            });
        }
        let shapes = self.shape_trace()?;
        let last = shapes.last().cloned().unwrap_or_else(|| self.input_shape.clone());
        if last != [self.num_classes] {
            return Err(ArchError::Inconsistent {
                layer: self.layers.len(),
                reason: format!("final output {last:?} does not match {} classes", self.num_classes),
            });
        }
        if self.trainable {
            if let Some((i, spec)) = self.layers.iter().enumerate().find(|(_, l)| !l.buildable()) {
                return Err(ArchError::Inconsistent {
                    layer: i + 1,
                    reason: format!("`{spec}` cannot be executed, so the descriptor cannot be trainable"),
                });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    /// Per-sample output shape after each layer; errors name the 1-based layer.
    pub fn shape_trace(&self) -> Result<Vec<Vec<usize>>, ArchError> {
        let mut shape = self.input_shape.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer
                .output_shape(&shape)
                .map_err(|reason| ArchError::Inconsistent { layer: i + 1, reason })?;
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn param_count(&self) -> ParamCount {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    pub fn trainable_count(&self) -> usize {
        self.param_count().trainable
    }

    pub fn transmitted_count(&self) -> usize {
        self.param_count().transmitted
    }

    pub fn breakdown(&self) -> Vec<LayerReport> {
        // validated at construction
        let shapes = self.shape_trace().unwrap_or_default();
        self.layers
            .iter()
            .zip(shapes)
            .enumerate()
            .map(|(i, (spec, output_shape))| LayerReport {
                index: i + 1,
                spec: spec.to_string(),
                output_shape,
                count: spec.param_count(),
            })
            .collect()
    }

    /// Appends another descriptor's layers; the result must still be
    /// shape-consistent, with `other`'s class count.
    pub fn concat(&self, other: &ArchDescriptor, name: impl Into<String>) -> Result<Self, ArchError> {
        let mut layers = self.layers.clone();
        layers.extend(other.layers.iter().cloned());
        ArchDescriptor::new(
            name,
            self.input_shape.clone(),
            layers,
            other.num_classes,
            self.trainable && other.trainable,
        )
    }

    /// Instantiates the layers with weights drawn from `seed`.
    pub fn build<E: Element>(&self, seed: u64) -> Result<Model<E>, ArchError> {
        if !self.trainable {
            return Err(ArchError::NotTrainable(self.name.clone()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = self
            .layers
            .iter()
            .map(|spec| match *spec {
                LayerSpec::Dense {
                    in_features,
                    out_features,
                    bias,
                } => Ok(Layer::Dense(Dense::new(in_features, out_features, bias, &mut rng))),
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    groups: 1,
                    bias,
                } => Ok(Layer::Conv2d(Conv2d::new(
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    bias,
                    &mut rng,
                ))),
                LayerSpec::MaxPool2d {
                    kernel,
                    stride,
                    padding: 0,
                    ceil_mode: false,
                } => Ok(Layer::MaxPool2d(MaxPool2d::new(kernel, stride))),
                LayerSpec::Relu => Ok(Layer::Relu(Relu::default())),
                LayerSpec::Flatten => Ok(Layer::Flatten(Flatten::default())),
                LayerSpec::BatchNorm2d { channels } => Ok(Layer::BatchNorm2d(BatchNorm2d::new(channels))),
                _ => Err(ArchError::NotTrainable(format!("{} ({spec})", self.name))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Model::new(self.input_shape.clone(), layers)?)
    }
}
