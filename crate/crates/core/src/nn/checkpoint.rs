//! Flat text checkpoints for MLP parameters.
//!
//! Format (line oriented, space separated):
//!
//! ```text
//! mlp v1
//! layers <n0> <n1> ... <nL>
//! tensor W0 <rows> <cols>
//! <rows lines of cols floats, row-major>
//! tensor b0 <len>
//! <one line of len floats>
//! ... (W1/b1, W2/b2, ...)
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! save/load cycle reproduces parameters bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{CoreError, Result};
use crate::nn::Mlp;

/// Write `net` to `w` in the flat text format.
pub fn save_mlp<W: Write>(w: &mut W, net: &Mlp) -> Result<()> {
    writeln!(w, "mlp v1")?;
    let sizes: Vec<String> = net.layer_sizes().iter().map(|s| s.to_string()).collect();
    writeln!(w, "layers {}", sizes.join(" "))?;
    for l in 0..net.n_layers() {
        let weight = &net.weights()[l];
        writeln!(w, "tensor W{l} {} {}", weight.nrows(), weight.ncols())?;
        for row in weight.outer_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        let bias = &net.biases()[l];
        writeln!(w, "tensor b{l} {}", bias.len())?;
        let cells: Vec<String> = bias.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(" "))?;
    }
    Ok(())
}

/// Parse a checkpoint produced by [`save_mlp`].
pub fn load_mlp<R: BufRead>(r: R) -> Result<Mlp> {
    let mut lines = r.lines();
    let mut next_line = move || -> Result<String> {
        loop {
            match lines.next() {
                None => {
                    return Err(CoreError::CheckpointFormat(
                        "unexpected end of file".into(),
                    ))
                }
                Some(line) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        return Ok(line);
                    }
                }
            }
        }
    };

    let header = next_line()?;
    if header.trim() != "mlp v1" {
        return Err(CoreError::CheckpointFormat(format!(
            "bad header `{header}`, expected `mlp v1`"
        )));
    }
    let layers_line = next_line()?;
    let mut parts = layers_line.split_whitespace();
    if parts.next() != Some("layers") {
        return Err(CoreError::CheckpointFormat(
            "expected `layers` line".into(),
        ));
    }
    let layer_sizes: Vec<usize> = parts
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| CoreError::CheckpointFormat(format!("bad layer size `{t}`: {e}")))
        })
        .collect::<Result<_>>()?;
    if layer_sizes.len() < 2 {
        return Err(CoreError::CheckpointFormat(
            "need at least two layer sizes".into(),
        ));
    }

    let parse_floats = |line: &str, expect: usize, what: &str| -> Result<Vec<f64>> {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| CoreError::CheckpointFormat(format!("bad float `{t}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != expect {
            return Err(CoreError::CheckpointFormat(format!(
                "{what}: expected {expect} values, got {}",
                vals.len()
            )));
        }
        Ok(vals)
    };

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..layer_sizes.len() - 1 {
        let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);

        let head = next_line()?;
        let expect_head = format!("tensor W{l} {fan_out} {fan_in}");
        if head.trim() != expect_head {
            return Err(CoreError::CheckpointFormat(format!(
                "expected `{expect_head}`, got `{head}`"
            )));
        }
        let mut w = Array2::zeros((fan_out, fan_in));
        for i in 0..fan_out {
            let row = parse_floats(&next_line()?, fan_in, &format!("W{l} row {i}"))?;
            for (j, v) in row.into_iter().enumerate() {
                w[[i, j]] = v;
            }
        }
        weights.push(w);

        let head = next_line()?;
        let expect_head = format!("tensor b{l} {fan_out}");
        if head.trim() != expect_head {
            return Err(CoreError::CheckpointFormat(format!(
                "expected `{expect_head}`, got `{head}`"
            )));
        }
        let b = parse_floats(&next_line()?, fan_out, &format!("b{l}"))?;
        biases.push(Array1::from_vec(b));
    }
    Mlp::from_raw(layer_sizes, weights, biases)
}

/// Save to a file path, creating parent directories.
pub fn save_mlp_to_path<P: AsRef<Path>>(path: P, net: &Mlp) -> Result<()> {
    if let Some(parent) = path.as_ref().parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    save_mlp(&mut w, net)?;
    w.flush()?;
    Ok(())
}

/// Load from a file path.
pub fn load_mlp_from_path<P: AsRef<Path>>(path: P) -> Result<Mlp> {
    load_mlp(BufReader::new(File::open(path)?))
}
