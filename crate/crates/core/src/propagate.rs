//! Bound propagation through ReLU networks.
//!
//! Three passes of increasing tightness share the affine machinery from
//! [`crate::interval`]:
//!
//! - [`nia_forward`]: plain interval arithmetic, no symbolic tracking;
//! - [`sia_forward`]: symbolic intervals that concretize any node whose
//!   pre-activation straddles zero;
//! - [`slr_forward`]: symbolic intervals that replace a straddling node by
//!   the tightest linear lower and upper bounds of the ReLU over its
//!   concrete pre-activation range.
//!
//! [`slr_forward`] additionally honors forced sign decisions from the
//! refinement search and records every node's status so the search can pick
//! split candidates. [`interval_gradient`] runs the matching backward pass
//! used to prioritize those candidates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::interval::{
    linear_map, step_down, step_up, BoundPair, ConcreteInterval, InputBox, LinearExpression,
};
use crate::network::{ConvLayer, LoweredLayer, Network, NodeId};

/// Width below which a straddling pre-activation range is treated as a
/// single linear piece instead of being divided.
pub const DEGENERATE_RANGE: f64 = 1e-12;

/// Sign classification of one ReLU node for the active input region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    /// Pre-activation provably non-negative; the node is the identity.
    Active,
    /// Pre-activation provably non-positive; the node outputs zero.
    Inactive,
    /// Pre-activation straddles zero; the output was relaxed.
    Overestimated,
    /// Pinned to the identity piece by a refinement split.
    ForcedActive,
    /// Pinned to the zero piece by a refinement split.
    ForcedInactive,
}

/// Map from ReLU node to the sign it was pinned to (`true` = active).
/// Ordered so iteration and hashing are deterministic.
pub type ForcedMap = BTreeMap<NodeId, bool>;

/// Everything recorded about one ReLU node during a symbolic pass.
#[derive(Debug, Clone)]
pub struct ReluNodeTrace {
    pub id: NodeId,
    pub status: NodeStatus,
    /// Symbolic bounds on the pre-activation value.
    pub pre: BoundPair,
    /// Symbolic bounds on the post-activation value.
    pub post: BoundPair,
}

/// Result of a symbolic forward pass.
#[derive(Debug, Clone)]
pub struct PropagationTrace {
    pub nodes: Vec<ReluNodeTrace>,
    pub output: Vec<BoundPair>,
    /// Ids of nodes with status `Overestimated`, in `(layer, index)` order.
    pub overestimated: Vec<NodeId>,
    /// Reported output enclosure: the symbolic hull intersected with the
    /// naive interval bound, which is sound and never looser than either.
    output_range: Vec<ConcreteInterval>,
}

impl PropagationTrace {
    pub fn node(&self, id: NodeId) -> Option<&ReluNodeTrace> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// The pass's reported concrete output enclosure.
    pub fn output_bounds(&self) -> Vec<ConcreteInterval> {
        self.output_range.clone()
    }

    /// Raw symbolic hull per output, `[min eq_low, max eq_up]`, without the
    /// naive-interval intersection.
    pub fn raw_output_hull(&self) -> Vec<ConcreteInterval> {
        self.output.iter().map(|p| p.hull()).collect()
    }
}

/// Apply the ReLU relaxation to one node's symbolic interval.
///
/// The node stays exact when its pre-activation range has a definite sign.
/// Otherwise each side relaxes independently: the lower bound keeps `Eq_low`
/// when its range is non-negative, becomes zero when it is non-positive, and
/// relaxes to the line `(u/(u-l)) * Eq_low` when it straddles; the upper
/// bound keeps `Eq_up` when its range is non-negative and otherwise relaxes
/// to the chord `(u/(u-l)) * (Eq_up - l)`. A straddling range thinner than
/// [`DEGENERATE_RANGE`] collapses to a single linear piece instead of being
/// divided. Any node reaching the per-side dispatch is reported
/// `Overestimated`; its hull necessarily satisfies `l < 0 < u`.
pub fn relax_relu(pair: &BoundPair) -> (BoundPair, NodeStatus) {
    let dim = pair.dim();
    let low = pair.conc_low;
    let up = pair.conc_up;
    if low.lo >= 0.0 && up.lo >= 0.0 {
        return (pair.clone(), NodeStatus::Active);
    }
    if up.hi <= 0.0 {
        return (BoundPair::zero(dim), NodeStatus::Inactive);
    }

    let low_degenerate = low.lo < 0.0 && low.hi > 0.0 && low.width() < DEGENERATE_RANGE;
    let up_degenerate = up.lo < 0.0 && up.width() < DEGENERATE_RANGE;

    // ReLU(t) >= t everywhere, so keeping the lower expression is sound even
    // on a straddling range; it is only loose. The zero expression is the
    // tighter choice when the range is non-positive.
    let (eq_low, conc_low, low_frac) = if low.lo >= 0.0 || low_degenerate {
        (pair.eq_low.clone(), low, false)
    } else if low.hi <= 0.0 {
        (LinearExpression::zeros(dim), ConcreteInterval::point(0.0), false)
    } else {
        let k = low.hi / (low.hi - low.lo);
        (pair.eq_low.scaled(k), low.scale_nonneg(k), true)
    };

    let (eq_up, conc_up, up_frac) = if up.lo >= 0.0 {
        (pair.eq_up.clone(), up, false)
    } else if up_degenerate {
        // Hair-thin straddle: the constant u is a sound single-piece bound.
        (
            LinearExpression::constant(dim, up.hi),
            ConcreteInterval::point(up.hi),
            false,
        )
    } else {
        let k = up.hi / (up.hi - up.lo);
        let mut e = pair.eq_up.scaled(k);
        e.add_constant(-k * up.lo);
        let chord = up.shift(-up.lo).scale_nonneg(k);
        (e, chord, true)
    };

    let status = if (low_degenerate || up_degenerate) && !low_frac && !up_frac {
        // Degenerate straddle resolved to one linear piece; u > 0 here.
        NodeStatus::Active
    } else {
        NodeStatus::Overestimated
    };
    (BoundPair::from_parts(eq_low, eq_up, conc_low, conc_up), status)
}

/// Largest possible gap between the relaxed bounds and the exact ReLU for a
/// pre-activation range `[l, u]` with `l < 0 < u`.
pub fn max_relaxation_gap(l: f64, u: f64) -> f64 {
    if u - l < DEGENERATE_RANGE {
        0.0
    } else {
        -u * l / (u - l)
    }
}

enum ReluRule<'a> {
    Slr { forced: &'a ForcedMap },
    Sia,
}

fn symbolic_forward(net: &Network, box_: &InputBox, rule: ReluRule<'_>) -> Result<PropagationTrace> {
    if box_.dim() != net.input_dim {
        return Err(Error::DimensionMismatch {
            context: "propagation box",
            expected: net.input_dim,
            actual: box_.dim(),
        });
    }
    if let ReluRule::Slr { forced } = &rule {
        let valid: std::collections::BTreeSet<_> = net.relu_node_ids().into_iter().collect();
        for id in forced.keys() {
            if !valid.contains(id) {
                return Err(Error::ShapeMismatch {
                    context: "forced nodes",
                    detail: format!("node {id} does not exist"),
                });
            }
        }
    }

    let mut pairs = BoundPair::identity(box_);
    let mut nodes = Vec::new();
    let mut overestimated = Vec::new();

    for layer in net.lowered_layers() {
        match layer {
            LoweredLayer::Affine { weights, bias } => {
                pairs = linear_map(&pairs, weights, bias, box_)?;
            }
            LoweredLayer::Relu { layer } => {
                let mut next = Vec::with_capacity(pairs.len());
                for (index, pre) in pairs.iter().enumerate() {
                    let id = NodeId { layer: *layer, index };
                    let (post, status) = match &rule {
                        ReluRule::Slr { forced } => match forced.get(&id) {
                            Some(true) => (pre.clone(), NodeStatus::ForcedActive),
                            Some(false) => {
                                (BoundPair::zero(pre.dim()), NodeStatus::ForcedInactive)
                            }
                            None => relax_relu(pre),
                        },
                        ReluRule::Sia => sia_relu(pre),
                    };
                    if status == NodeStatus::Overestimated {
                        overestimated.push(id);
                    }
                    nodes.push(ReluNodeTrace {
                        id,
                        status,
                        pre: pre.clone(),
                        post: post.clone(),
                    });
                    next.push(post);
                }
                pairs = next;
            }
        }
    }

    for p in &pairs {
        if !p.conc_low.lo.is_finite() || !p.conc_up.hi.is_finite() {
            return Err(Error::NonFinite {
                context: "output bound",
            });
        }
    }

    // Both the symbolic hull and the naive interval pass enclose the true
    // output set, so their intersection does too.
    let naive = nia_forward(net, box_)?;
    let output_range = pairs
        .iter()
        .zip(naive.iter())
        .map(|(p, n)| {
            let hull = p.hull();
            let mut lo = hull.lo.max(n.lo);
            let mut hi = hull.hi.min(n.hi);
            if lo > hi {
                let mid = lo + (hi - lo) / 2.0;
                lo = mid;
                hi = mid;
            }
            ConcreteInterval { lo, hi }
        })
        .collect();

    Ok(PropagationTrace {
        nodes,
        output: pairs,
        overestimated,
        output_range,
    })
}

fn sia_relu(pre: &BoundPair) -> (BoundPair, NodeStatus) {
    let low = pre.conc_low;
    let up = pre.conc_up;
    if low.lo >= 0.0 && up.lo >= 0.0 {
        return (pre.clone(), NodeStatus::Active);
    }
    if up.hi <= 0.0 {
        return (BoundPair::zero(pre.dim()), NodeStatus::Inactive);
    }
    // Concretize to the constant pair [l, u]: every input dependency is
    // lost. The relaxed pair of relax_relu stays pointwise inside these
    // constants over the box.
    let dim = pre.dim();
    let l = low.lo;
    let u = up.hi;
    (
        BoundPair::from_parts(
            LinearExpression::constant(dim, l),
            LinearExpression::constant(dim, u),
            ConcreteInterval::point(l),
            ConcreteInterval::point(u),
        ),
        NodeStatus::Overestimated,
    )
}

/// Symbolic linear relaxation pass.
///
/// Inputs enter as identity expressions over the box; affine layers use
/// [`linear_map`]; ReLU nodes relax per [`relax_relu`] unless pinned by
/// `forced`, in which case they pass through as the identity or zero and are
/// never reported overestimated.
pub fn slr_forward(net: &Network, box_: &InputBox, forced: &ForcedMap) -> Result<PropagationTrace> {
    symbolic_forward(net, box_, ReluRule::Slr { forced })
}

/// Symbolic interval pass: straddling nodes concretize to constants instead
/// of relaxing.
pub fn sia_forward(net: &Network, box_: &InputBox) -> Result<PropagationTrace> {
    symbolic_forward(net, box_, ReluRule::Sia)
}

/// Naive interval arithmetic: concrete intervals per node, dependencies
/// discarded, ReLU clamps at zero.
pub fn nia_forward(net: &Network, box_: &InputBox) -> Result<Vec<ConcreteInterval>> {
    if box_.dim() != net.input_dim {
        return Err(Error::DimensionMismatch {
            context: "propagation box",
            expected: net.input_dim,
            actual: box_.dim(),
        });
    }
    let mut cur: Vec<ConcreteInterval> = box_
        .lo
        .iter()
        .zip(box_.hi.iter())
        .map(|(&l, &h)| ConcreteInterval { lo: l, hi: h })
        .collect();
    for layer in net.lowered_layers() {
        match layer {
            LoweredLayer::Affine { weights, bias } => {
                let mut next = Vec::with_capacity(weights.rows());
                for j in 0..weights.rows() {
                    let mut lo = bias[j];
                    let mut hi = bias[j];
                    for (i, iv) in cur.iter().enumerate() {
                        let w = weights.get(j, i);
                        if w == 0.0 {
                            continue;
                        }
                        let a = w * iv.lo;
                        let b = w * iv.hi;
                        lo = step_down(lo + step_down(a.min(b)));
                        hi = step_up(hi + step_up(a.max(b)));
                    }
                    next.push(ConcreteInterval { lo, hi });
                }
                cur = next;
            }
            LoweredLayer::Relu { .. } => {
                for iv in cur.iter_mut() {
                    iv.lo = iv.lo.max(0.0);
                    iv.hi = iv.hi.max(0.0);
                }
            }
        }
    }
    Ok(cur)
}

/// Push a grid of symbolic intervals through one convolutional layer.
///
/// The layer is lowered to its dense-map form, so each output element is the
/// sign-split linear map of its receptive field with the concrete kernel.
pub fn conv_map(
    pairs: &[BoundPair],
    input_shape: (usize, usize, usize),
    layer: &ConvLayer,
    box_: &InputBox,
) -> Result<Vec<BoundPair>> {
    let (c, h, w) = input_shape;
    if pairs.len() != c * h * w {
        return Err(Error::ShapeMismatch {
            context: "conv map",
            detail: format!("grid of {} pairs vs shape {c}x{h}x{w}", pairs.len()),
        });
    }
    let (weights, bias) = layer.to_dense(input_shape)?;
    linear_map(pairs, &weights, &bias, box_)
}

/// Interval on the partial derivative of an objective row with respect to a
/// node's pre-activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientInterval {
    pub lo: f64,
    pub hi: f64,
}

impl GradientInterval {
    pub fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }
}

/// Multiply a gradient interval by a ReLU derivative interval. The
/// multipliers are always `[0,0]`, `[1,1]`, or `[0,1]`, so the products are
/// exact and need no rounding.
fn grad_mul(g: (f64, f64), m: (f64, f64)) -> (f64, f64) {
    match m {
        (0.0, 0.0) => (0.0, 0.0),
        (1.0, 1.0) => g,
        _ => (g.0.min(0.0), g.1.max(0.0)),
    }
}

/// Backward pass computing, for every ReLU node, an interval containing the
/// derivative of `objective . outputs` with respect to that node's
/// pre-activation. Affine layers transpose-multiply; ReLU layers multiply by
/// `[1,1]`, `[0,0]`, or `[0,1]` depending on the node's sign information in
/// `trace`.
pub fn interval_gradient(
    net: &Network,
    trace: &PropagationTrace,
    objective: &[f64],
) -> Result<Vec<(NodeId, GradientInterval)>> {
    if objective.len() != net.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "gradient objective",
            expected: net.output_dim(),
            actual: objective.len(),
        });
    }
    let mut g: Vec<(f64, f64)> = objective.iter().map(|&c| (c, c)).collect();
    let mut per_node: BTreeMap<NodeId, GradientInterval> = BTreeMap::new();

    for layer in net.lowered_layers().iter().rev() {
        match layer {
            LoweredLayer::Affine { weights, .. } => {
                if g.len() != weights.rows() {
                    return Err(Error::ShapeMismatch {
                        context: "gradient pass",
                        detail: "trace does not match network".to_string(),
                    });
                }
                let mut prev = vec![(0.0, 0.0); weights.cols()];
                for (j, gj) in g.iter().enumerate() {
                    if gj.0 == 0.0 && gj.1 == 0.0 {
                        continue;
                    }
                    for (i, p) in prev.iter_mut().enumerate() {
                        let w = weights.get(j, i);
                        if w == 0.0 {
                            continue;
                        }
                        let (a, b) = if w >= 0.0 {
                            (w * gj.0, w * gj.1)
                        } else {
                            (w * gj.1, w * gj.0)
                        };
                        if a != 0.0 {
                            p.0 = step_down(p.0 + a);
                        }
                        if b != 0.0 {
                            p.1 = step_up(p.1 + b);
                        }
                    }
                }
                g = prev;
            }
            LoweredLayer::Relu { layer } => {
                for (index, gj) in g.iter_mut().enumerate() {
                    let id = NodeId { layer: *layer, index };
                    let node = trace.node(id).ok_or(Error::ShapeMismatch {
                        context: "gradient pass",
                        detail: format!("trace is missing node {id}"),
                    })?;
                    let mult = relu_derivative_interval(node);
                    *gj = grad_mul(*gj, mult);
                    per_node.insert(
                        id,
                        GradientInterval {
                            lo: gj.0,
                            hi: gj.1,
                        },
                    );
                }
            }
        }
    }
    Ok(per_node.into_iter().collect())
}

fn relu_derivative_interval(node: &ReluNodeTrace) -> (f64, f64) {
    match node.status {
        NodeStatus::ForcedActive => (1.0, 1.0),
        NodeStatus::ForcedInactive => (0.0, 0.0),
        _ => {
            // Sign information comes from the concrete pre-activation hull so
            // exact-but-unstable nodes still get the sound [0, 1] multiplier.
            let hull = node.pre.hull();
            if node.pre.conc_low.lo >= 0.0 && node.pre.conc_up.lo >= 0.0 {
                (1.0, 1.0)
            } else if hull.hi <= 0.0 {
                (0.0, 0.0)
            } else {
                (0.0, 1.0)
            }
        }
    }
}

/// Split one input interval at its midpoint. The union of the two boxes is
/// the original box.
pub fn bisect_region(box_: &InputBox, axis: usize) -> Result<(InputBox, InputBox)> {
    box_.bisect(axis)
}
