//! Shared fixture generators and independent oracles for integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relucheck_core::{
    exact_output_range_with_limit, ConcreteInterval, InputBox, Layer, Matrix, Network,
    OutputProperty, SafeRow,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random dense-ReLU chain with weights and biases drawn from U[-1, 1].
/// `dims` lists layer widths from input to output.
pub fn random_dense_net(rng: &mut ChaCha8Rng, dims: &[usize]) -> Network {
    let chain: Vec<(Matrix, Vec<f64>)> = dims
        .windows(2)
        .map(|w| {
            let (input, output) = (w[0], w[1]);
            let data: Vec<f64> = (0..input * output).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let bias: Vec<f64> = (0..output).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            (Matrix::new(output, input, data).unwrap(), bias)
        })
        .collect();
    let mut layers = Vec::new();
    let count = chain.len();
    for (i, (w, b)) in chain.into_iter().enumerate() {
        layers.push(Layer::Dense { weights: w, bias: b });
        if i + 1 < count {
            layers.push(Layer::Relu);
        }
    }
    Network::new(dims[0], None, layers, None).unwrap()
}

/// Architecture with 2 to 4 dense layers and at most 16 ReLU nodes.
pub fn random_architecture(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let d = rng.gen_range(2..=4usize);
    let outputs = rng.gen_range(1..=3usize);
    let dense_layers = rng.gen_range(2..=4usize);
    let hidden_count = dense_layers - 1;
    let mut dims = vec![d];
    let mut relu_budget = 16usize;
    for i in 0..hidden_count {
        let remaining = hidden_count - i;
        let max_here = (relu_budget - (remaining - 1) * 2).clamp(2, 8);
        let width = rng.gen_range(2..=max_here);
        relu_budget -= width;
        dims.push(width);
    }
    dims.push(outputs);
    dims
}

/// A random box centered in [-1, 1]^d with per-axis radius eps.
pub fn random_box(rng: &mut ChaCha8Rng, d: usize, eps_lo: f64, eps_hi: f64) -> InputBox {
    let eps = rng.gen_range(eps_lo..=eps_hi);
    let center: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    InputBox::new(
        center.iter().map(|c| c - eps).collect(),
        center.iter().map(|c| c + eps).collect(),
    )
    .unwrap()
}

pub fn sample_box(rng: &mut ChaCha8Rng, box_: &InputBox) -> Vec<f64> {
    box_.lo
        .iter()
        .zip(box_.hi.iter())
        .map(|(&l, &h)| if h > l { rng.gen_range(l..=h) } else { l })
        .collect()
}

/// Exact range of `coeffs . F(x)` over the box by appending a difference row
/// and running the activation-pattern oracle.
pub fn exact_functional_range(
    net: &Network,
    box_: &InputBox,
    coeffs: &[f64],
) -> ConcreteInterval {
    let out = net.output_dim();
    assert_eq!(coeffs.len(), out);
    // Append the functional as an extra dense row on the raw outputs.
    let mut layers = net.layers.clone();
    layers.push(Layer::Dense {
        weights: Matrix::new(1, out, coeffs.to_vec()).unwrap(),
        bias: vec![0.0],
    });
    let extended = Network::new(net.input_dim, net.input_shape, layers, None).unwrap();
    exact_output_range_with_limit(&extended, box_, 16).unwrap()[0]
}

/// Ground-truth safety of a property over a box via the exact oracle.
/// Returns `(is_safe, margin)` where `margin` is the distance from the
/// decision boundary (positive, in output units).
pub fn ground_truth(net: &Network, box_: &InputBox, prop: &OutputProperty) -> (bool, f64) {
    match prop {
        OutputProperty::Classification { true_label } => {
            let t = *true_label;
            let n = net.output_dim();
            let mut worst = f64::INFINITY;
            for o in 0..n {
                if o == t {
                    continue;
                }
                let mut coeffs = vec![0.0; n];
                coeffs[t] = 1.0;
                coeffs[o] = -1.0;
                let range = exact_functional_range(net, box_, &coeffs);
                worst = worst.min(range.lo);
            }
            // safe iff F_t - F_o stays strictly positive for every o
            (worst > 0.0, worst.abs())
        }
        OutputProperty::LinearSafe { rows } => {
            let mut safe = true;
            let mut margin = f64::INFINITY;
            for row in rows {
                let range = exact_functional_range(net, box_, &row.coeffs);
                let (row_safe, row_margin) = match row.relation {
                    relucheck_core::lp::Relation::Le => (range.hi <= row.rhs, (row.rhs - range.hi).abs()),
                    relucheck_core::lp::Relation::Ge => (range.lo >= row.rhs, (range.lo - row.rhs).abs()),
                    relucheck_core::lp::Relation::Eq => {
                        let ok = range.lo >= row.rhs && range.hi <= row.rhs;
                        (ok, (range.lo - row.rhs).abs().min((range.hi - row.rhs).abs()))
                    }
                };
                safe &= row_safe;
                margin = margin.min(row_margin);
            }
            (safe, margin)
        }
        OutputProperty::RegressionBand {
            center_output,
            max_dev,
        } => {
            let range = exact_functional_range(net, box_, &[1.0]);
            let above = range.hi - (center_output + max_dev);
            let below = (center_output - max_dev) - range.lo;
            let safe = above < 0.0 && below < 0.0;
            (safe, above.abs().min(below.abs()))
        }
    }
}

/// A safe threshold property with a known margin below the exact minimum of
/// output 0 (safe) or above it (violated).
pub fn threshold_property(net: &Network, box_: &InputBox, gap: f64, safe: bool) -> OutputProperty {
    let mut coeffs = vec![0.0; net.output_dim()];
    coeffs[0] = 1.0;
    let range = exact_functional_range(net, box_, &coeffs);
    let rhs = if safe { range.lo - gap } else { range.lo + gap };
    OutputProperty::LinearSafe {
        rows: vec![SafeRow {
            coeffs,
            relation: relucheck_core::lp::Relation::Ge,
            rhs,
        }],
    }
}

/// Network computing `delta -> F(center + delta * 1)`: the brightness line
/// as a 1-input network, built by prepending an offset layer. Ground truth
/// for brightness regions runs the exact oracle on this network.
pub fn brightness_line_net(net: &Network, center: &[f64]) -> Network {
    let d = net.input_dim;
    assert_eq!(center.len(), d);
    let mut layers = vec![Layer::Dense {
        weights: Matrix::new(d, 1, vec![1.0; d]).unwrap(),
        bias: center.to_vec(),
    }];
    layers.extend(net.layers.iter().cloned());
    Network::new(1, None, layers, None).unwrap()
}

/// Dense grid minimum/maximum of each output (independent sampling oracle).
pub fn grid_output_range(net: &Network, box_: &InputBox, per_axis: usize) -> Vec<ConcreteInterval> {
    let d = box_.dim();
    let mut mins = vec![f64::INFINITY; net.output_dim()];
    let mut maxs = vec![f64::NEG_INFINITY; net.output_dim()];
    let total = per_axis.pow(d as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = Vec::with_capacity(d);
        for i in 0..d {
            let step = rem % per_axis;
            rem /= per_axis;
            let t = if per_axis > 1 {
                step as f64 / (per_axis - 1) as f64
            } else {
                0.5
            };
            x.push(box_.lo[i] + t * (box_.hi[i] - box_.lo[i]));
        }
        let y = net.forward(&x).unwrap();
        for (j, v) in y.iter().enumerate() {
            mins[j] = mins[j].min(*v);
            maxs[j] = maxs[j].max(*v);
        }
    }
    mins.into_iter()
        .zip(maxs)
        .map(|(lo, hi)| ConcreteInterval { lo, hi })
        .collect()
}
