//! `params`: exact parameter counts of a catalog or descriptor-file model.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use fedleaf::arch::{load_descriptor, lookup, ArchDescriptor, LayerReport};
use serde::Serialize;

#[derive(Debug, Clone, Args)]
pub struct ParamsArgs {
    /// Catalog name, e.g. `alexnet` or `tiny_mlp`.
    pub arch: Option<String>,
    /// Descriptor file instead of a catalog name.
    #[arg(long, conflicts_with = "arch")]
    pub arch_file: Option<PathBuf>,
    /// Output classes of the final layer.
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    /// Input shape for the small models, e.g. `16` or `1x4x4`.
    #[arg(long)]
    pub input_shape: Option<String>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsReport {
    pub arch: String,
    pub input_shape: Vec<usize>,
    pub classes: usize,
    pub trainable: usize,
    pub transmitted: usize,
    pub layers: Vec<LayerReport>,
}

/// `57020228` → `57,020,228`.
pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn resolve(args: &ParamsArgs) -> Result<ArchDescriptor> {
    if let Some(path) = &args.arch_file {
        return Ok(load_descriptor(path)?);
    }
    let Some(name) = &args.arch else {
        bail!("give an architecture name or --arch-file");
    };
    let shape = args
        .input_shape
        .as_deref()
        .map(|s| {
            s.split('x')
                .map(|d| d.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    Ok(lookup(name, shape.as_deref(), args.classes)?)
}

pub fn report(arch: &ArchDescriptor) -> ParamsReport {
    let count = arch.param_count();
    ParamsReport {
        arch: arch.name().to_string(),
        input_shape: arch.input_shape().to_vec(),
        classes: arch.num_classes(),
        trainable: count.trainable,
        transmitted: count.transmitted,
        layers: arch.breakdown(),
    }
}

pub fn render(r: &ParamsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} (input {:?}, {} classes)", r.arch, r.input_shape, r.classes);
    let _ = writeln!(out, "trainable parameters:   {}", thousands(r.trainable));
    let _ = writeln!(out, "transmitted parameters: {}", thousands(r.transmitted));
    let width = r.layers.iter().map(|l| l.spec.len()).max().unwrap_or(0).max(5);
    let _ = writeln!(
        out,
        "\n{:>4}  {:<width$}  {:<18}  {:>12}  {:>12}",
        "#", "layer", "output", "trainable", "transmitted"
    );
    for l in &r.layers {
        let _ = writeln!(
            out,
            "{:>4}  {:<width$}  {:<18}  {:>12}  {:>12}",
            l.index,
            l.spec,
            format!("{:?}", l.output_shape),
            thousands(l.count.trainable),
            thousands(l.count.transmitted)
        );
    }
    out
}

pub fn run(args: &ParamsArgs) -> Result<ParamsReport> {
    let r = report(&resolve(args)?);
    if args.json {
        crate::emit(&(serde_json::to_string_pretty(&r)? + "\n"))?;
    } else {
        crate::emit(&render(&r))?;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_digits() {
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(676), "676");
        assert_eq!(thousands(1000), "1,000");
        assert_eq!(thousands(57_020_228), "57,020,228");
    }
}
