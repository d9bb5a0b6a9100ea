//! Flat-text parameter checkpoints.
//!
//! Values are written with Rust's shortest-round-trip float formatting and
//! parsed back with `str::parse`, so a save/load cycle reproduces every
//! parameter bit for bit. The format is line oriented and diffable:
//!
//! ```text
//! jamlab-params v1
//! sizes 4 256 256 256 256 256 12
//! layer 0
//! <one line per weight row>
//! <one line of biases>
//! layer 1
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;
use crate::nn::matrix::Matrix;
use crate::nn::mlp::{Layer, Mlp};

const HEADER: &str = "jamlab-params v1";

pub fn save_params(net: &Mlp, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str("sizes");
    for s in net.layer_sizes() {
        let _ = write!(out, " {s}");
    }
    out.push('\n');
    for (k, layer) in net.layers().iter().enumerate() {
        let _ = writeln!(out, "layer {k}");
        for r in 0..layer.out_dim() {
            push_values(&mut out, layer.weight().row(r));
        }
        push_values(&mut out, layer.bias());
    }
    fsio::atomic_write(path, &out)
}

pub fn load_params(path: &Path) -> Result<Mlp> {
    let text = fsio::read_text(path)?;
    let loc = path.display().to_string();
    let mut lines = text.lines();

    let header = lines.next().unwrap_or("");
    if header != HEADER {
        return Err(Error::parse(&loc, format!("bad header {header:?}")));
    }
    let sizes = parse_sizes(lines.next().unwrap_or(""), &loc)?;

    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for k in 0..sizes.len() - 1 {
        let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
        let marker = lines.next().unwrap_or("");
        if marker != format!("layer {k}") {
            return Err(Error::parse(&loc, format!("expected 'layer {k}', got {marker:?}")));
        }
        let mut weight = Matrix::zeros(fan_out, fan_in);
        for r in 0..fan_out {
            let row = parse_values(lines.next().unwrap_or(""), fan_in, &loc)?;
            weight.row_mut(r).copy_from_slice(&row);
        }
        let bias = parse_values(lines.next().unwrap_or(""), fan_out, &loc)?;
        layers.push(Layer::new(weight, bias)?);
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::parse(&loc, "trailing content after last layer"));
    }
    Mlp::from_layers(layers)
}

fn push_values(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
        first = false;
    }
    out.push('\n');
}

fn parse_sizes(line: &str, loc: &str) -> Result<Vec<usize>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("sizes") {
        return Err(Error::parse(loc, format!("expected sizes line, got {line:?}")));
    }
    let sizes: Vec<usize> = parts
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| Error::parse(loc, format!("bad size {p:?}")))
        })
        .collect::<Result<_>>()?;
    if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
        return Err(Error::parse(loc, "sizes line needs at least two positive widths"));
    }
    Ok(sizes)
}

fn parse_values(line: &str, expected: usize, loc: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| Error::parse(loc, format!("bad float {p:?}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::parse(
            loc,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(loc, "non-finite parameter value"));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::params_bits_equal;

    #[test]
    fn save_load_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.txt");
        let mut net = Mlp::new(&[4, 9, 3], 123).unwrap();
        // Exercise awkward values explicitly.
        net.layers_mut()[0].weight_mut().set(0, 0, -0.0);
        net.layers_mut()[0].weight_mut().set(0, 1, 1.0 / 3.0);
        net.layers_mut()[1].bias_mut()[2] = f64::MIN_POSITIVE;
        save_params(&net, &path).unwrap();
        let loaded = load_params(&path).unwrap();
        assert!(params_bits_equal(&net, &loaded));
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.txt");
        let net = Mlp::new(&[2, 3], 1).unwrap();
        save_params(&net, &path).unwrap();

        let good = fsio::read_text(&path).unwrap();
        for bad in [
            good.replace("jamlab-params v1", "jamlab-params v9"),
            good.replace("sizes 2 3", "sizes 2"),
            good.replacen("layer 0", "layer 7", 1),
            format!("{good}tail\n"),
            good.lines().take(3).collect::<Vec<_>>().join("\n"),
        ] {
            fsio::atomic_write(&path, &bad).unwrap();
            assert!(load_params(&path).is_err(), "accepted corrupt file:\n{bad}");
        }
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(load_params(Path::new("/nonexistent/params.txt")).is_err());
    }
}
