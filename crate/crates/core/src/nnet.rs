//! NNet text format: parsing and serialization.
//!
//! The format is the plain-text network description used for the ACAS Xu
//! models: comment lines starting with `//`, a four-value header
//! (`numLayers, inputSize, outputSize, maxLayerSize`), the layer sizes, an
//! unused flag line, per-input minimums, maximums, means and ranges (means
//! and ranges may carry one trailing entry for the output), then per layer
//! the row-major weight matrix followed by one bias value per line. Every
//! dense layer except the last is followed by a ReLU.

use crate::error::{Error, Result};
use crate::interval::Matrix;
use crate::network::{Layer, Network, Normalization};

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            iter: text.lines().enumerate(),
            last_line: 0,
        }
    }

    /// Next non-comment, non-blank line with its 1-based number.
    fn next_data(&mut self) -> Option<(usize, &'a str)> {
        for (idx, line) in self.iter.by_ref() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with("//") {
                continue;
            }
            self.last_line = idx + 1;
            return Some((idx + 1, trimmed));
        }
        None
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::NnetParse {
        line,
        message: message.into(),
    }
}

fn numbers(line: usize, text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tok in text.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(line, format!("non-numeric token {tok:?}")))?;
        out.push(v);
    }
    Ok(out)
}

fn integers(line: usize, text: &str, what: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for tok in text.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let v: usize = tok
            .parse()
            .map_err(|_| parse_err(line, format!("{what}: non-integer token {tok:?}")))?;
        out.push(v);
    }
    Ok(out)
}

fn expect_line<'a>(lines: &mut Lines<'a>, what: &str) -> Result<(usize, &'a str)> {
    lines
        .next_data()
        .ok_or_else(|| parse_err(lines.last_line + 1, format!("unexpected end of file, expected {what}")))
}

/// Parse NNet text into a [`Network`].
///
/// Errors carry the 1-based line number of the offending line.
pub fn parse_nnet(text: &str) -> Result<Network> {
    let mut lines = Lines::new(text);

    let (hline, header) = expect_line(&mut lines, "header")?;
    let header = integers(hline, header, "header")?;
    if header.len() < 4 {
        return Err(parse_err(
            hline,
            format!("header needs numLayers, inputSize, outputSize, maxLayerSize; got {} values", header.len()),
        ));
    }
    let (num_layers, input_size, output_size, _max_layer) =
        (header[0], header[1], header[2], header[3]);
    if num_layers == 0 || input_size == 0 || output_size == 0 {
        return Err(parse_err(hline, "header values must be positive"));
    }

    let (sline, sizes_text) = expect_line(&mut lines, "layer sizes")?;
    let sizes = integers(sline, sizes_text, "layer sizes")?;
    if sizes.len() != num_layers + 1 {
        return Err(parse_err(
            sline,
            format!("expected {} layer sizes, got {}", num_layers + 1, sizes.len()),
        ));
    }
    if sizes[0] != input_size {
        return Err(parse_err(
            sline,
            format!("first layer size {} disagrees with declared inputSize {}", sizes[0], input_size),
        ));
    }
    if sizes[num_layers] != output_size {
        return Err(parse_err(
            sline,
            format!(
                "last layer size {} disagrees with declared outputSize {}",
                sizes[num_layers], output_size
            ),
        ));
    }

    // Unused flag line kept for format compatibility.
    let (_fline, _flag) = expect_line(&mut lines, "flag line")?;

    let mut fixed_count = |what: &str, expected_min: usize, expected_max: usize| -> Result<(usize, Vec<f64>)> {
        let (line, text) = expect_line(&mut lines, what)?;
        let vals = numbers(line, text)?;
        if vals.len() < expected_min || vals.len() > expected_max {
            return Err(parse_err(
                line,
                format!("expected {expected_min} {what} values, got {}", vals.len()),
            ));
        }
        Ok((line, vals))
    };

    let (_, input_mins) = fixed_count("input minimum", input_size, input_size)?;
    let (_, input_maxes) = fixed_count("input maximum", input_size, input_size)?;
    // Means and ranges may carry one extra entry for the output.
    let (_, mut means) = fixed_count("mean", input_size, input_size + 1)?;
    let (rline, mut ranges) = fixed_count("range", input_size, input_size + 1)?;

    let output_mean = if means.len() == input_size + 1 { means.pop().unwrap() } else { 0.0 };
    let output_range = if ranges.len() == input_size + 1 { ranges.pop().unwrap() } else { 1.0 };
    if ranges.iter().any(|&r| r <= 0.0) || output_range <= 0.0 {
        return Err(parse_err(rline, "ranges must be positive"));
    }

    let mut layers = Vec::new();
    for k in 0..num_layers {
        let rows = sizes[k + 1];
        let cols = sizes[k];
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let (line, text) = expect_line(&mut lines, "weight row")?;
            let vals = numbers(line, text)?;
            if vals.len() != cols {
                return Err(parse_err(
                    line,
                    format!("layer {k} weight row {r}: expected {cols} values, got {}", vals.len()),
                ));
            }
            data.extend_from_slice(&vals);
        }
        let weights = Matrix::new(rows, cols, data)
            .map_err(|e| parse_err(lines.last_line, format!("layer {k}: {e}")))?;
        let mut bias = Vec::with_capacity(rows);
        for r in 0..rows {
            let (line, text) = expect_line(&mut lines, "bias value")?;
            let vals = numbers(line, text)?;
            if vals.len() != 1 {
                return Err(parse_err(
                    line,
                    format!("layer {k} bias {r}: expected a single value, got {}", vals.len()),
                ));
            }
            bias.push(vals[0]);
        }
        layers.push(Layer::Dense { weights, bias });
        if k + 1 < num_layers {
            layers.push(Layer::Relu);
        }
    }

    if let Some((line, _)) = lines.next_data() {
        return Err(parse_err(line, "trailing data after final layer"));
    }

    let normalization = Normalization {
        input_mins,
        input_maxes,
        means,
        ranges,
        output_mean,
        output_range,
    };
    Network::new(input_size, None, layers, Some(normalization))
}

/// Serialize a dense-ReLU network back to NNet text.
///
/// Floating point values render in shortest round-trip form, so
/// parse/serialize/parse reproduces weights bit for bit.
pub fn serialize_nnet(net: &Network) -> Result<String> {
    let mut dense = Vec::new();
    let mut expect_dense = true;
    for (li, layer) in net.layers.iter().enumerate() {
        match (layer, expect_dense) {
            (Layer::Dense { weights, bias }, true) => {
                dense.push((weights, bias));
                expect_dense = false;
            }
            (Layer::Relu, false) => expect_dense = true,
            _ => {
                return Err(Error::InvalidNetwork(format!(
                    "layer {li}: NNet serialization requires an alternating dense/ReLU chain"
                )));
            }
        }
    }
    if expect_dense {
        return Err(Error::InvalidNetwork(
            "NNet serialization requires a final dense layer".into(),
        ));
    }

    let num_layers = dense.len();
    let input_size = net.input_dim;
    let output_size = net.output_dim();
    let max_layer = dense
        .iter()
        .map(|(w, _)| w.rows())
        .chain(std::iter::once(input_size))
        .max()
        .unwrap_or(input_size);

    let norm = net.normalization.clone().unwrap_or_else(|| Normalization {
        input_mins: vec![-1e9; input_size],
        input_maxes: vec![1e9; input_size],
        means: vec![0.0; input_size],
        ranges: vec![1.0; input_size],
        output_mean: 0.0,
        output_range: 1.0,
    });

    let join = |vals: &[f64]| {
        vals.iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",")
    };

    let mut out = String::new();
    out.push_str("// network serialized in NNet text format\n");
    out.push_str(&format!("{num_layers},{input_size},{output_size},{max_layer},\n"));
    let mut sizes = vec![input_size];
    sizes.extend(dense.iter().map(|(w, _)| w.rows()));
    out.push_str(&format!(
        "{},\n",
        sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    ));
    out.push_str("0,\n");
    out.push_str(&format!("{},\n", join(&norm.input_mins)));
    out.push_str(&format!("{},\n", join(&norm.input_maxes)));
    let mut means = norm.means.clone();
    means.push(norm.output_mean);
    let mut ranges = norm.ranges.clone();
    ranges.push(norm.output_range);
    out.push_str(&format!("{},\n", join(&means)));
    out.push_str(&format!("{},\n", join(&ranges)));
    for (weights, bias) in dense {
        for r in 0..weights.rows() {
            out.push_str(&format!("{},\n", join(weights.row(r))));
        }
        for b in bias.iter() {
            out.push_str(&format!("{b},\n"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
// tiny fixture
2,2,1,2,
2,2,1,
0,
-1.0,-1.0,
1.0,1.0,
0.0,0.0,0.0,
1.0,1.0,1.0,
2.0,-3.0,
1.0,1.0,
0.0,
0.0,
-1.0,1.0,
4.0,
";

    #[test]
    fn parses_minimal_network() {
        let net = parse_nnet(MINIMAL).unwrap();
        assert_eq!(net.input_dim, 2);
        assert_eq!(net.output_dim(), 1);
        assert_eq!(net.layers.len(), 3); // Dense, Relu, Dense
        assert!(matches!(net.layers[1], Layer::Relu));
        assert_eq!(net.relu_count(), 2);
        // f(x, y) = -relu(2x - 3y) + relu(x + y) + 4
        let y = net.forward(&[0.5, 0.0]).unwrap();
        assert!((y[0] - (-1.0 + 0.5 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn reports_offending_line_for_short_mins() {
        // declares 5 inputs but provides 4 minimums
        let text = "\
1,5,1,5,
5,1,
0,
-1,-1,-1,-1,
1,1,1,1,1,
0,0,0,0,0,0,
1,1,1,1,1,1,
1,1,1,1,1,
0.0,
";
        match parse_nnet(text) {
            Err(Error::NnetParse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("input minimum"), "message: {message}");
            }
            other => panic!("expected line-numbered parse error, got {other:?}"),
        }
    }

    #[test]
    fn reports_non_numeric_token() {
        let text = MINIMAL.replace("2.0,-3.0,", "2.0,oops,");
        match parse_nnet(&text) {
            Err(Error::NnetParse { line, message }) => {
                assert_eq!(line, 9);
                assert!(message.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = parse_nnet(MINIMAL).unwrap();
        let text = serialize_nnet(&net).unwrap();
        let again = parse_nnet(&text).unwrap();
        assert_eq!(net.layers, again.layers);
        assert_eq!(net.normalization, again.normalization);
        // serialize once more: the text itself is a fixed point
        assert_eq!(text, serialize_nnet(&again).unwrap());
    }
}
