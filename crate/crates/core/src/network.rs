//! Network representation and concrete forward execution.
//!
//! A [`Network`] is an ordered list of dense, convolutional, and ReLU layers
//! ending in a dense layer that produces raw output scores. Convolutional
//! layers are lowered to equivalent dense maps once and reused by every
//! pass, so propagation, gradients, and the exact oracle all share one
//! affine code path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Matrix;

/// Identifier of one ReLU node: the index of its ReLU layer in
/// `Network::layers` plus the node index within that layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: usize,
    pub index: usize,
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.layer, self.index)
    }
}

/// Convolutional layer: valid (unpadded) cross-correlation with a fixed
/// stride. Kernels are stored `[out_channel][in_channel][ky][kx]`,
/// channel-major flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub weights: Vec<f64>,
    /// One bias per output channel.
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let expected = out_channels * in_channels * kernel_h * kernel_w;
        if weights.len() != expected {
            return Err(Error::ShapeMismatch {
                context: "conv kernels",
                detail: format!("expected {expected} weights, got {}", weights.len()),
            });
        }
        if bias.len() != out_channels {
            return Err(Error::ShapeMismatch {
                context: "conv bias",
                detail: format!("expected {out_channels} biases, got {}", bias.len()),
            });
        }
        if stride == 0 {
            return Err(Error::InvalidNetwork("conv stride must be positive".into()));
        }
        Ok(Self {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            stride,
            weights,
            bias,
        })
    }

    #[inline]
    fn kernel(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f64 {
        let idx = ((oc * self.in_channels + ic) * self.kernel_h + ky) * self.kernel_w + kx;
        self.weights[idx]
    }

    /// Output spatial shape for a `(channels, height, width)` input.
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let (c, h, w) = input;
        if c != self.in_channels {
            return Err(Error::ShapeMismatch {
                context: "conv input",
                detail: format!("expected {} channels, got {c}", self.in_channels),
            });
        }
        if h < self.kernel_h || w < self.kernel_w {
            return Err(Error::ShapeMismatch {
                context: "conv input",
                detail: format!(
                    "{h}x{w} input smaller than {}x{} kernel",
                    self.kernel_h, self.kernel_w
                ),
            });
        }
        let oh = (h - self.kernel_h) / self.stride + 1;
        let ow = (w - self.kernel_w) / self.stride + 1;
        Ok((self.out_channels, oh, ow))
    }

    /// Lower to the equivalent dense map over channel-major flattened
    /// vectors. Each output element multiplies its receptive field by the
    /// concrete kernel.
    pub fn to_dense(&self, input: (usize, usize, usize)) -> Result<(Matrix, Vec<f64>)> {
        let (_, h, w) = input;
        let (oc_n, oh, ow) = self.output_shape(input)?;
        let in_len = input.0 * h * w;
        let out_len = oc_n * oh * ow;
        let mut mat = Matrix::zeros(out_len, in_len);
        let mut bias = vec![0.0; out_len];
        for oc in 0..oc_n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = (oc * oh + oy) * ow + ox;
                    bias[row] = self.bias[oc];
                    for ic in 0..self.in_channels {
                        for ky in 0..self.kernel_h {
                            for kx in 0..self.kernel_w {
                                let iy = oy * self.stride + ky;
                                let ix = ox * self.stride + kx;
                                let col = (ic * h + iy) * w + ix;
                                mat.set(row, col, self.kernel(oc, ic, ky, kx));
                            }
                        }
                    }
                }
            }
        }
        Ok((mat, bias))
    }
}

/// One layer of the network.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense { weights: Matrix, bias: Vec<f64> },
    Conv(ConvLayer),
    Relu,
}

/// Per-input normalization metadata carried by NNet files. The verifier
/// itself operates in normalized input space; these values let the CLI map
/// raw property bounds into that space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_mins: Vec<f64>,
    pub input_maxes: Vec<f64>,
    pub means: Vec<f64>,
    pub ranges: Vec<f64>,
    pub output_mean: f64,
    pub output_range: f64,
}

impl Normalization {
    pub fn normalize_value(&self, i: usize, raw: f64) -> f64 {
        (raw - self.means[i]) / self.ranges[i]
    }
}

/// A feed-forward network of dense, convolutional, and ReLU layers.
///
/// Invariants enforced at construction: shapes chain consistently, every
/// ReLU is preceded by a dense or convolutional layer, and the final layer
/// is dense.
#[derive(Debug, Clone)]
pub struct Network {
    pub input_dim: usize,
    /// `(channels, height, width)` when the first layer is convolutional.
    pub input_shape: Option<(usize, usize, usize)>,
    pub layers: Vec<Layer>,
    pub normalization: Option<Normalization>,
    lowered: Vec<LoweredLayer>,
    relu_layer_sizes: Vec<(usize, usize)>,
    output_dim: usize,
}

/// A layer lowered to flat-vector form: either an affine map or a ReLU.
#[derive(Debug, Clone)]
pub enum LoweredLayer {
    Affine { weights: Matrix, bias: Vec<f64> },
    Relu { layer: usize },
}

impl Network {
    pub fn new(
        input_dim: usize,
        input_shape: Option<(usize, usize, usize)>,
        layers: Vec<Layer>,
        normalization: Option<Normalization>,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidNetwork("input dimension must be positive".into()));
        }
        if let Some((c, h, w)) = input_shape {
            if c * h * w != input_dim {
                return Err(Error::InvalidNetwork(format!(
                    "input shape {c}x{h}x{w} does not flatten to input dimension {input_dim}"
                )));
            }
        }
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        }
        if let Some(norm) = &normalization {
            if norm.means.len() != input_dim || norm.ranges.len() != input_dim {
                return Err(Error::InvalidNetwork(
                    "normalization metadata does not match input dimension".into(),
                ));
            }
            if norm.ranges.iter().any(|&r| r <= 0.0) || norm.output_range <= 0.0 {
                return Err(Error::InvalidNetwork("normalization range must be positive".into()));
            }
        }

        // Walk shapes, lowering conv layers to dense maps as we go.
        let mut lowered = Vec::with_capacity(layers.len());
        let mut relu_layer_sizes = Vec::new();
        let mut grid = input_shape;
        let mut flat = input_dim;
        let mut prev_affine = false;
        for (li, layer) in layers.iter().enumerate() {
            match layer {
                Layer::Dense { weights, bias } => {
                    if weights.cols() != flat {
                        return Err(Error::InvalidNetwork(format!(
                            "layer {li}: dense expects {} inputs, previous layer produces {flat}",
                            weights.cols()
                        )));
                    }
                    if bias.len() != weights.rows() {
                        return Err(Error::InvalidNetwork(format!(
                            "layer {li}: bias length {} vs {} rows",
                            bias.len(),
                            weights.rows()
                        )));
                    }
                    flat = weights.rows();
                    grid = None;
                    prev_affine = true;
                    lowered.push(LoweredLayer::Affine {
                        weights: weights.clone(),
                        bias: bias.clone(),
                    });
                }
                Layer::Conv(conv) => {
                    let shape = grid.ok_or_else(|| {
                        Error::InvalidNetwork(format!(
                            "layer {li}: convolution needs a (c, h, w) input shape"
                        ))
                    })?;
                    let out_shape = conv.output_shape(shape)?;
                    let (weights, bias) = conv.to_dense(shape)?;
                    flat = out_shape.0 * out_shape.1 * out_shape.2;
                    grid = Some(out_shape);
                    prev_affine = true;
                    lowered.push(LoweredLayer::Affine { weights, bias });
                }
                Layer::Relu => {
                    if !prev_affine {
                        return Err(Error::InvalidNetwork(format!(
                            "layer {li}: ReLU must follow a dense or convolutional layer"
                        )));
                    }
                    prev_affine = false;
                    relu_layer_sizes.push((li, flat));
                    lowered.push(LoweredLayer::Relu { layer: li });
                }
            }
        }
        if !matches!(layers.last(), Some(Layer::Dense { .. })) {
            return Err(Error::InvalidNetwork("final layer must be dense".into()));
        }

        Ok(Self {
            input_dim,
            input_shape,
            layers,
            normalization,
            lowered,
            relu_layer_sizes,
            output_dim: flat,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// `(layer index, node count)` for each ReLU layer in order.
    pub fn relu_layers(&self) -> &[(usize, usize)] {
        &self.relu_layer_sizes
    }

    pub fn relu_count(&self) -> usize {
        self.relu_layer_sizes.iter().map(|&(_, n)| n).sum()
    }

    /// All ReLU node ids in `(layer, index)` order.
    pub fn relu_node_ids(&self) -> Vec<NodeId> {
        self.relu_layer_sizes
            .iter()
            .flat_map(|&(layer, n)| (0..n).map(move |index| NodeId { layer, index }))
            .collect()
    }

    /// Layers with convolutions lowered to dense maps.
    pub fn lowered_layers(&self) -> &[LoweredLayer] {
        &self.lowered
    }

    /// Concrete execution. `x` is in normalized input space when the network
    /// carries normalization metadata.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "forward input",
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let mut cur = x.to_vec();
        for layer in &self.lowered {
            match layer {
                LoweredLayer::Affine { weights, bias } => {
                    let mut next = weights.matvec(&cur)?;
                    for (v, b) in next.iter_mut().zip(bias) {
                        *v += b;
                    }
                    cur = next;
                }
                LoweredLayer::Relu { .. } => {
                    for v in cur.iter_mut() {
                        *v = v.max(0.0);
                    }
                }
            }
        }
        Ok(cur)
    }

    /// Forward pass that adds `delta` to one ReLU node's pre-activation
    /// before clamping. Diagnostic helper for gradient checks.
    pub fn forward_with_preactivation_offset(
        &self,
        x: &[f64],
        node: NodeId,
        delta: f64,
    ) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "forward input",
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let mut cur = x.to_vec();
        for layer in &self.lowered {
            match layer {
                LoweredLayer::Affine { weights, bias } => {
                    let mut next = weights.matvec(&cur)?;
                    for (v, b) in next.iter_mut().zip(bias) {
                        *v += b;
                    }
                    cur = next;
                }
                LoweredLayer::Relu { layer } => {
                    if *layer == node.layer {
                        if node.index >= cur.len() {
                            return Err(Error::DimensionMismatch {
                                context: "preactivation offset node",
                                expected: cur.len(),
                                actual: node.index,
                            });
                        }
                        cur[node.index] += delta;
                    }
                    for v in cur.iter_mut() {
                        *v = v.max(0.0);
                    }
                }
            }
        }
        Ok(cur)
    }
}

// --- JSON fixture format -------------------------------------------------

/// Serialized form of a layer. Dense weights are nested row arrays; conv
/// kernels are nested `[out][in][ky][kx]` arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    Conv {
        kernels: Vec<Vec<Vec<Vec<f64>>>>,
        stride: usize,
        bias: Vec<f64>,
    },
    Relu,
}

/// JSON mirror of [`Network`] for hand-written fixtures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_shape: Option<(usize, usize, usize)>,
    pub layers: Vec<LayerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl Network {
    pub fn from_json(text: &str) -> Result<Network> {
        let spec: NetworkSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidNetwork(format!("network JSON: {e}")))?;
        spec.try_into()
    }

    pub fn to_json(&self) -> String {
        let spec = NetworkSpec::from(self);
        serde_json::to_string_pretty(&spec).expect("network serializes")
    }
}

impl TryFrom<NetworkSpec> for Network {
    type Error = Error;

    fn try_from(spec: NetworkSpec) -> Result<Network> {
        let mut layers = Vec::with_capacity(spec.layers.len());
        for layer in spec.layers {
            layers.push(match layer {
                LayerSpec::Dense { weights, bias } => Layer::Dense {
                    weights: Matrix::from_rows(&weights)?,
                    bias,
                },
                LayerSpec::Conv {
                    kernels,
                    stride,
                    bias,
                } => {
                    let oc = kernels.len();
                    let ic = kernels.first().map_or(0, |k| k.len());
                    let kh = kernels.first().and_then(|k| k.first()).map_or(0, |k| k.len());
                    let kw = kernels
                        .first()
                        .and_then(|k| k.first())
                        .and_then(|k| k.first())
                        .map_or(0, |k| k.len());
                    let mut flat = Vec::with_capacity(oc * ic * kh * kw);
                    for per_oc in &kernels {
                        if per_oc.len() != ic {
                            return Err(Error::InvalidNetwork("ragged conv kernels".into()));
                        }
                        for per_ic in per_oc {
                            if per_ic.len() != kh {
                                return Err(Error::InvalidNetwork("ragged conv kernels".into()));
                            }
                            for row in per_ic {
                                if row.len() != kw {
                                    return Err(Error::InvalidNetwork("ragged conv kernels".into()));
                                }
                                flat.extend_from_slice(row);
                            }
                        }
                    }
                    Layer::Conv(ConvLayer::new(oc, ic, kh, kw, stride, flat, bias)?)
                }
                LayerSpec::Relu => Layer::Relu,
            });
        }
        Network::new(spec.input_dim, spec.input_shape, layers, spec.normalization)
    }
}

impl From<&Network> for NetworkSpec {
    fn from(net: &Network) -> NetworkSpec {
        let layers = net
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Dense { weights, bias } => LayerSpec::Dense {
                    weights: (0..weights.rows()).map(|r| weights.row(r).to_vec()).collect(),
                    bias: bias.clone(),
                },
                Layer::Conv(conv) => {
                    let mut kernels = Vec::with_capacity(conv.out_channels);
                    for oc in 0..conv.out_channels {
                        let mut per_oc = Vec::with_capacity(conv.in_channels);
                        for ic in 0..conv.in_channels {
                            let mut per_ic = Vec::with_capacity(conv.kernel_h);
                            for ky in 0..conv.kernel_h {
                                let row = (0..conv.kernel_w)
                                    .map(|kx| conv.kernel(oc, ic, ky, kx))
                                    .collect();
                                per_ic.push(row);
                            }
                            per_oc.push(per_ic);
                        }
                        kernels.push(per_oc);
                    }
                    LayerSpec::Conv {
                        kernels,
                        stride: conv.stride,
                        bias: conv.bias.clone(),
                    }
                }
                Layer::Relu => LayerSpec::Relu,
            })
            .collect();
        NetworkSpec {
            input_dim: net.input_dim,
            input_shape: net.input_shape,
            layers,
            normalization: net.normalization.clone(),
        }
    }
}

/// Convenience constructor for dense-ReLU chains: `dims` lists the layer
/// widths, weight matrices are provided per dense layer, and ReLU follows
/// every dense layer except the last.
pub fn dense_relu_chain(weights: Vec<(Matrix, Vec<f64>)>) -> Result<Network> {
    if weights.is_empty() {
        return Err(Error::InvalidNetwork("empty chain".into()));
    }
    let input_dim = weights[0].0.cols();
    let count = weights.len();
    let mut layers = Vec::new();
    for (i, (w, b)) in weights.into_iter().enumerate() {
        layers.push(Layer::Dense { weights: w, bias: b });
        if i + 1 < count {
            layers.push(Layer::Relu);
        }
    }
    Network::new(input_dim, None, layers, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_identity_network() {
        let net = dense_relu_chain(vec![(Matrix::identity(2), vec![0.0, 0.0])]).unwrap();
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn forward_clamps_negative_preactivations() {
        // Dense [[2, -3]] then ReLU then identity output.
        let net = dense_relu_chain(vec![
            (Matrix::new(1, 2, vec![2.0, -3.0]).unwrap(), vec![0.0]),
            (Matrix::identity(1), vec![0.0]),
        ])
        .unwrap();
        assert_eq!(net.forward(&[0.0, 1.0]).unwrap(), vec![0.0]);
        assert_eq!(net.forward(&[0.5, 0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn alternation_and_final_layer_validated() {
        let relu_first = Network::new(1, None, vec![Layer::Relu], None);
        assert!(relu_first.is_err());

        let relu_last = Network::new(
            1,
            None,
            vec![
                Layer::Dense {
                    weights: Matrix::identity(1),
                    bias: vec![0.0],
                },
                Layer::Relu,
            ],
            None,
        );
        assert!(relu_last.is_err());

        let double_relu = Network::new(
            1,
            None,
            vec![
                Layer::Dense {
                    weights: Matrix::identity(1),
                    bias: vec![0.0],
                },
                Layer::Relu,
                Layer::Relu,
                Layer::Dense {
                    weights: Matrix::identity(1),
                    bias: vec![0.0],
                },
            ],
            None,
        );
        assert!(double_relu.is_err());
    }

    #[test]
    fn conv_lowering_matches_hand_convolution() {
        // 1 input channel 3x3, one 2x2 kernel, stride 1 -> 2x2 output.
        let conv = ConvLayer::new(1, 1, 2, 2, 1, vec![1.0, 2.0, 3.0, 4.0], vec![0.5]).unwrap();
        let (mat, bias) = conv.to_dense((1, 3, 3)).unwrap();
        assert_eq!(mat.rows(), 4);
        assert_eq!(mat.cols(), 9);
        let x: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let mut y = mat.matvec(&x).unwrap();
        for (v, b) in y.iter_mut().zip(&bias) {
            *v += b;
        }
        // top-left window [1,2;4,5] . [1,2;3,4] + 0.5
        assert_eq!(y[0], 1.0 + 4.0 + 12.0 + 20.0 + 0.5);
        // bottom-right window [5,6;8,9]
        assert_eq!(y[3], 5.0 + 12.0 + 24.0 + 36.0 + 0.5);
    }

    #[test]
    fn json_round_trip() {
        let net = dense_relu_chain(vec![
            (Matrix::new(2, 2, vec![2.0, -3.0, 1.0, 1.0]).unwrap(), vec![0.0, 0.0]),
            (Matrix::new(1, 2, vec![-1.0, 1.0]).unwrap(), vec![4.0]),
        ])
        .unwrap();
        let text = net.to_json();
        let back = Network::from_json(&text).unwrap();
        assert_eq!(back.layers, net.layers);
        assert_eq!(back.input_dim, 2);
        assert_eq!(back.relu_count(), 2);
    }

    #[test]
    fn relu_node_ids_are_ordered() {
        let net = dense_relu_chain(vec![
            (Matrix::identity(2), vec![0.0, 0.0]),
            (Matrix::identity(2), vec![0.0, 0.0]),
            (Matrix::new(1, 2, vec![1.0, 1.0]).unwrap(), vec![0.0]),
        ])
        .unwrap();
        let ids = net.relu_node_ids();
        assert_eq!(ids.len(), 4);
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }
}
