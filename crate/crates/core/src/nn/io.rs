//! Model files: a short text header followed by the raw parameters.
//!
//! ```text
//! cdas-mlp 1
//! layer_dims 176 256 256 128
//! activations silu silu identity
//! parameters 144768
//! end
//! <parameters as little-endian f64, layer by layer: weights row-major
//!  (input x output), then biases>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::network::{Activation, Dense, Network};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "cdas-mlp";
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn write_model<W: Write>(net: &Network, mut out: W) -> Result<()> {
    let dims: Vec<String> = net.layer_dims().iter().map(|d| d.to_string()).collect();
    let acts: Vec<&str> = net.layers.iter().map(|l| l.activation.name()).collect();
    writeln!(out, "{MODEL_MAGIC} {MODEL_FORMAT_VERSION}")?;
    writeln!(out, "layer_dims {}", dims.join(" "))?;
    writeln!(out, "activations {}", acts.join(" "))?;
    writeln!(out, "parameters {}", net.parameter_count())?;
    writeln!(out, "end")?;
    for v in net.flat_parameters() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn header_line<R: BufRead>(input: &mut R, key: &str) -> Result<Vec<String>> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    match parts.next() {
        Some(k) if k == key => Ok(parts.map(str::to_owned).collect()),
        other => Err(Error::format(
            "model header",
            format!("expected `{key}`, found {other:?}"),
        )),
    }
}

pub fn read_model<R: BufRead>(mut input: R) -> Result<Network> {
    let version = header_line(&mut input, MODEL_MAGIC)?;
    if version != [MODEL_FORMAT_VERSION.to_string()] {
        return Err(Error::format(
            "model header",
            format!("unsupported version {version:?}"),
        ));
    }
    let dims: Vec<usize> = header_line(&mut input, "layer_dims")?
        .iter()
        .map(|d| d.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format("model header", format!("layer_dims: {e}")))?;
    let acts: Vec<Activation> = header_line(&mut input, "activations")?
        .iter()
        .map(|a| {
            Activation::parse(a)
                .ok_or_else(|| Error::format("model header", format!("activation `{a}`")))
        })
        .collect::<Result<_>>()?;
    let count: usize = header_line(&mut input, "parameters")?
        .first()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| Error::format("model header", "parameter count"))?;
    header_line(&mut input, "end")?;
    if dims.len() < 2 || acts.len() + 1 != dims.len() || dims.contains(&0) {
        return Err(Error::format("model header", "inconsistent layer spec"));
    }
    let expected: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if expected != count {
        return Err(Error::format(
            "model header",
            format!("parameter count {count} does not match layer dims ({expected})"),
        ));
    }
    let mut bytes = vec![0u8; count * 8];
    input
        .read_exact(&mut bytes)
        .map_err(|e| Error::format("model parameters", e.to_string()))?;
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::format("model parameters", "trailing bytes"));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let layers = dims
        .windows(2)
        .zip(acts)
        .map(|(w, activation)| {
            let weight = Array2::from_shape_fn((w[0], w[1]), |_| values.next().unwrap());
            let bias = Array1::from_shape_fn(w[1], |_| values.next().unwrap());
            Dense {
                weight,
                bias,
                activation,
            }
        })
        .collect();
    Ok(Network { layers })
}

pub fn save_model(net: &Network, path: &Path) -> Result<()> {
    write_model(net, BufWriter::new(File::create(path)?))
}

pub fn load_model(path: &Path) -> Result<Network> {
    read_model(BufReader::new(File::open(path)?))
}
