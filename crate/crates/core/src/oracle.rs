//! Exact output ranges by activation-pattern enumeration.
//!
//! With every ReLU pinned to one of its linear pieces the network is affine,
//! so the exact reachable output range over a box is the union, over all
//! feasible sign patterns, of per-pattern LP optima. Cost is exponential in
//! the ReLU count; this is the ground-truth generator for desk-scale
//! fixtures, guarded by an explicit node limit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interval::{ConcreteInterval, InputBox, LinearExpression, Matrix};
use crate::lp::{solve, Constraint, LinearProgram, LpOutcome, Relation, Sense};
use crate::network::{LoweredLayer, Network};

/// Default cap on ReLU nodes for exhaustive enumeration (2^16 patterns).
pub const DEFAULT_ORACLE_LIMIT: usize = 16;

/// One sign decision per ReLU node, `true` meaning active, ordered by
/// `(layer, index)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern(pub Vec<bool>);

impl ActivationPattern {
    fn from_mask(mask: u64, n: usize) -> Self {
        ActivationPattern((0..n).map(|i| mask >> i & 1 == 1).collect())
    }
}

/// Exact reachable range of every output over `box_`, with the default node
/// limit.
pub fn exact_output_range(net: &Network, box_: &InputBox) -> Result<Vec<ConcreteInterval>> {
    exact_output_range_with_limit(net, box_, DEFAULT_ORACLE_LIMIT)
}

/// Exact reachable range with an explicit ReLU-count limit.
///
/// For each of the `2^n` activation patterns the network collapses to an
/// affine map; the pattern's feasibility constraints (pre-activation >= 0
/// for active nodes, <= 0 for inactive ones) join the box bounds, and each
/// output is minimized and maximized by LP. Infeasible patterns are skipped.
/// The union over feasible patterns is exact up to LP tolerance.
pub fn exact_output_range_with_limit(
    net: &Network,
    box_: &InputBox,
    limit: usize,
) -> Result<Vec<ConcreteInterval>> {
    let n = net.relu_count();
    if n > limit {
        return Err(Error::OracleLimit {
            relu_count: n,
            limit,
        });
    }
    if box_.dim() != net.input_dim {
        return Err(Error::DimensionMismatch {
            context: "oracle box",
            expected: net.input_dim,
            actual: box_.dim(),
        });
    }

    let patterns: u64 = 1 << n;
    let hulls: Vec<Option<Vec<ConcreteInterval>>> = (0..patterns)
        .into_par_iter()
        .map(|mask| pattern_range(net, box_, &ActivationPattern::from_mask(mask, n)))
        .collect::<Result<_>>()?;

    let mut acc: Option<Vec<ConcreteInterval>> = None;
    for hull in hulls.into_iter().flatten() {
        acc = Some(match acc {
            None => hull,
            Some(prev) => prev
                .iter()
                .zip(hull.iter())
                .map(|(a, b)| a.hull(b))
                .collect(),
        });
    }
    acc.ok_or_else(|| Error::InvalidNetwork("no feasible activation pattern".into()))
}

/// Output range of the affine piece selected by `pattern`, or `None` when
/// the pattern's cell is empty.
pub fn pattern_range(
    net: &Network,
    box_: &InputBox,
    pattern: &ActivationPattern,
) -> Result<Option<Vec<ConcreteInterval>>> {
    let (rows, outputs) = pattern_system(net, pattern)?;
    let bounds: Vec<(f64, f64)> = box_.lo.iter().zip(box_.hi.iter()).map(|(&l, &h)| (l, h)).collect();

    let mut result = Vec::with_capacity(outputs.len());
    for out in &outputs {
        let min_lp = LinearProgram {
            sense: Sense::Minimize,
            objective: out.clone(),
            constraints: rows.clone(),
            bounds: bounds.clone(),
        };
        let lo = match solve(&min_lp).map_err(Error::Lp)? {
            LpOutcome::Optimal { value, .. } => value,
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Unbounded => {
                return Err(Error::InvalidNetwork("unbounded oracle range".into()))
            }
        };
        let max_lp = LinearProgram {
            sense: Sense::Maximize,
            objective: out.clone(),
            constraints: rows.clone(),
            bounds: bounds.clone(),
        };
        let hi = match solve(&max_lp).map_err(Error::Lp)? {
            LpOutcome::Optimal { value, .. } => value,
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Unbounded => {
                return Err(Error::InvalidNetwork("unbounded oracle range".into()))
            }
        };
        result.push(ConcreteInterval {
            lo: lo.min(hi),
            hi: hi.max(lo),
        });
    }
    Ok(Some(result))
}

/// Sign constraints and exact output expressions for one pattern.
///
/// Walking the lowered layers with `(M, v)` tracking `layer_value = M x + v`,
/// each ReLU node contributes its pre-activation row as a `>= 0` (active) or
/// `<= 0` (inactive) constraint; inactive nodes zero their row afterwards.
fn pattern_system(
    net: &Network,
    pattern: &ActivationPattern,
) -> Result<(Vec<Constraint>, Vec<LinearExpression>)> {
    let n = net.relu_count();
    if pattern.0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "activation pattern",
            expected: n,
            actual: pattern.0.len(),
        });
    }
    let d = net.input_dim;
    let mut m = Matrix::identity(d);
    let mut v = vec![0.0; d];
    let mut rows = Vec::with_capacity(n);
    let mut next_node = 0usize;

    for layer in net.lowered_layers() {
        match layer {
            LoweredLayer::Affine { weights, bias } => {
                m = weights.matmul(&m)?;
                let mut nv = weights.matvec(&v)?;
                for (x, b) in nv.iter_mut().zip(bias) {
                    *x += b;
                }
                v = nv;
            }
            LoweredLayer::Relu { .. } => {
                for j in 0..v.len() {
                    let expr = LinearExpression::new(m.row(j).to_vec(), v[j])?;
                    let active = pattern.0[next_node];
                    next_node += 1;
                    rows.push(Constraint {
                        expr,
                        relation: if active { Relation::Ge } else { Relation::Le },
                        rhs: 0.0,
                    });
                    if !active {
                        for c in 0..m.cols() {
                            m.set(j, c, 0.0);
                        }
                        v[j] = 0.0;
                    }
                }
            }
        }
    }

    let outputs = (0..v.len())
        .map(|j| LinearExpression::new(m.row(j).to_vec(), v[j]))
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, outputs))
}
