//! Safety-property data model: input regions, output constraints, and their
//! encoding into propagation boxes and LP rows.
//!
//! Strict inequalities in violation conditions are closed before they reach
//! the solver (`< 0` becomes `<= 0`), which over-approximates the violation
//! set; boundary witnesses are filtered by concrete counterexample
//! validation, so "all systems infeasible implies safe" stays sound.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::interval::{InputBox, LinearExpression};
use crate::lp::{Relation, Sense};
use crate::propagate::PropagationTrace;

/// Input region of a safety property.
#[derive(Debug, Clone, PartialEq)]
pub enum InputRegion {
    /// `|x - center|_inf <= eps`.
    LInf { center: Vec<f64>, eps: f64 },
    /// `|x - center|_1 <= eps`, encoded with auxiliary absolute-value splits.
    L1 { center: Vec<f64>, eps: f64 },
    /// `x = center + delta * 1` for a single shared offset `delta` in
    /// `[-eps, eps]`.
    Brightness { center: Vec<f64>, eps: f64 },
    /// `x = s * center` for a single scale `s` in `[lo_scale, hi_scale]`.
    Contrast {
        center: Vec<f64>,
        lo_scale: f64,
        hi_scale: f64,
    },
    /// An explicit axis-aligned box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl InputRegion {
    pub fn dim(&self) -> usize {
        match self {
            InputRegion::LInf { center, .. }
            | InputRegion::L1 { center, .. }
            | InputRegion::Brightness { center, .. }
            | InputRegion::Contrast { center, .. } => center.len(),
            InputRegion::Box { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputRegion::LInf { eps, .. }
            | InputRegion::L1 { eps, .. }
            | InputRegion::Brightness { eps, .. } => {
                if !eps.is_finite() || *eps < 0.0 {
                    return Err(Error::InvalidRegion(format!("eps must be non-negative, got {eps}")));
                }
            }
            InputRegion::Contrast {
                lo_scale, hi_scale, ..
            } => {
                if !lo_scale.is_finite() || !hi_scale.is_finite() {
                    return Err(Error::InvalidRegion("non-finite contrast scale".into()));
                }
                if *lo_scale <= 0.0 {
                    return Err(Error::InvalidRegion(format!(
                        "contrast lo_scale must be positive, got {lo_scale}"
                    )));
                }
                if lo_scale > hi_scale {
                    return Err(Error::InvalidRegion(format!(
                        "contrast scales inverted: [{lo_scale}, {hi_scale}]"
                    )));
                }
            }
            InputRegion::Box { lo, hi } => {
                InputBox::new(lo.clone(), hi.clone())?;
            }
        }
        Ok(())
    }

    /// Membership in the original (pre-closure) region definition.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            InputRegion::LInf { center, eps } => x
                .iter()
                .zip(center)
                .all(|(&v, &c)| (v - c).abs() <= eps + tol),
            InputRegion::L1 { center, eps } => {
                let total: f64 = x.iter().zip(center).map(|(&v, &c)| (v - c).abs()).sum();
                total <= eps + tol
            }
            InputRegion::Brightness { center, eps } => {
                let offsets: Vec<f64> = x.iter().zip(center).map(|(&v, &c)| v - c).collect();
                let delta = offsets.iter().sum::<f64>() / offsets.len().max(1) as f64;
                offsets.iter().all(|o| (o - delta).abs() <= tol) && delta.abs() <= eps + tol
            }
            InputRegion::Contrast {
                center,
                lo_scale,
                hi_scale,
            } => {
                let cc: f64 = center.iter().map(|c| c * c).sum();
                let s = if cc == 0.0 {
                    1.0
                } else {
                    x.iter().zip(center).map(|(&v, &c)| v * c).sum::<f64>() / cc
                };
                let scale_norm = center.iter().fold(1.0f64, |m, c| m.max(c.abs()));
                x.iter()
                    .zip(center)
                    .all(|(&v, &c)| (v - s * c).abs() <= tol * scale_norm.max(1.0))
                    && s >= lo_scale - tol
                    && s <= hi_scale + tol
            }
            InputRegion::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol),
        }
    }
}

/// Output requirement of a safety property.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputProperty {
    /// Safe iff the argmax stays `true_label` on every reachable output; a
    /// tie with another class counts as a violation.
    Classification { true_label: usize },
    /// Safe iff every row holds for every reachable output.
    LinearSafe { rows: Vec<SafeRow> },
    /// Safe iff the single output stays strictly inside
    /// `(center_output - max_dev, center_output + max_dev)`.
    RegressionBand { center_output: f64, max_dev: f64 },
}

/// One linear row over the raw outputs: `coeffs . F  relation  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeRow {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl OutputProperty {
    pub fn validate(&self, output_dim: usize) -> Result<()> {
        match self {
            OutputProperty::Classification { true_label } => {
                if *true_label >= output_dim {
                    return Err(Error::InvalidProperty(format!(
                        "true_label {true_label} out of range for {output_dim} outputs"
                    )));
                }
                if output_dim < 2 {
                    return Err(Error::InvalidProperty(
                        "classification needs at least two outputs".into(),
                    ));
                }
            }
            OutputProperty::LinearSafe { rows } => {
                if rows.is_empty() {
                    return Err(Error::InvalidProperty("no rows in linear_safe".into()));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.coeffs.len() != output_dim {
                        return Err(Error::InvalidProperty(format!(
                            "row {i} has {} coefficients for {output_dim} outputs",
                            row.coeffs.len()
                        )));
                    }
                }
            }
            OutputProperty::RegressionBand { max_dev, .. } => {
                if output_dim != 1 {
                    return Err(Error::InvalidProperty(format!(
                        "regression band needs a single output, network has {output_dim}"
                    )));
                }
                if !max_dev.is_finite() || *max_dev <= 0.0 {
                    return Err(Error::InvalidProperty(format!(
                        "max_dev must be positive, got {max_dev}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact violation check on concrete outputs.
    pub fn violated_by(&self, outputs: &[f64]) -> bool {
        match self {
            OutputProperty::Classification { true_label } => outputs
                .iter()
                .enumerate()
                .any(|(o, &v)| o != *true_label && v >= outputs[*true_label]),
            OutputProperty::LinearSafe { rows } => rows.iter().any(|row| {
                let value: f64 = row.coeffs.iter().zip(outputs).map(|(c, v)| c * v).sum();
                match row.relation {
                    Relation::Le => value > row.rhs,
                    Relation::Ge => value < row.rhs,
                    Relation::Eq => value != row.rhs,
                }
            }),
            OutputProperty::RegressionBand {
                center_output,
                max_dev,
            } => (outputs[0] - center_output).abs() >= *max_dev,
        }
    }
}

/// One LP constraint row over the verification variables (the `d` inputs
/// followed by any auxiliary variables).
#[derive(Debug, Clone)]
pub struct LpRow {
    pub expr: LinearExpression,
    pub relation: Relation,
    pub rhs: f64,
}

/// The propagation box and LP encoding of an input region. Auxiliary
/// variables (absolute-value splits, the shared brightness offset, the
/// contrast scale) follow the inputs in the variable order.
#[derive(Debug, Clone)]
pub struct RegionEncoding {
    pub box_: InputBox,
    pub rows: Vec<LpRow>,
    pub aux_bounds: Vec<(f64, f64)>,
}

impl RegionEncoding {
    pub fn num_vars(&self) -> usize {
        self.box_.dim() + self.aux_bounds.len()
    }
}

/// Encode a region as a propagation box plus LP rows over input and
/// auxiliary variables.
pub fn region_to_box(region: &InputRegion) -> Result<RegionEncoding> {
    region.validate()?;
    let d = region.dim();
    match region {
        InputRegion::LInf { center, eps } => {
            let lo = center.iter().map(|c| c - eps).collect();
            let hi = center.iter().map(|c| c + eps).collect();
            Ok(RegionEncoding {
                box_: InputBox::new(lo, hi)?,
                rows: Vec::new(),
                aux_bounds: Vec::new(),
            })
        }
        InputRegion::L1 { center, eps } => {
            // t_i >= x_i - c_i, t_i >= c_i - x_i, sum t_i <= eps,
            // with t_i in [0, eps].
            let n = 2 * d;
            let lo = center.iter().map(|c| c - eps).collect();
            let hi = center.iter().map(|c| c + eps).collect();
            let mut rows = Vec::with_capacity(2 * d + 1);
            for i in 0..d {
                let mut above = LinearExpression::zeros(n);
                above.coeffs[i] = 1.0;
                above.coeffs[d + i] = -1.0;
                rows.push(LpRow {
                    expr: above,
                    relation: Relation::Le,
                    rhs: center[i],
                });
                let mut below = LinearExpression::zeros(n);
                below.coeffs[i] = -1.0;
                below.coeffs[d + i] = -1.0;
                rows.push(LpRow {
                    expr: below,
                    relation: Relation::Le,
                    rhs: -center[i],
                });
            }
            let mut sum = LinearExpression::zeros(n);
            for i in 0..d {
                sum.coeffs[d + i] = 1.0;
            }
            rows.push(LpRow {
                expr: sum,
                relation: Relation::Le,
                rhs: *eps,
            });
            Ok(RegionEncoding {
                box_: InputBox::new(lo, hi)?,
                rows,
                aux_bounds: vec![(0.0, *eps); d],
            })
        }
        InputRegion::Brightness { center, eps } => {
            // x_i - delta = c_i with one shared offset variable.
            let n = d + 1;
            let lo = center.iter().map(|c| c - eps).collect();
            let hi = center.iter().map(|c| c + eps).collect();
            let mut rows = Vec::with_capacity(d);
            for i in 0..d {
                let mut tie = LinearExpression::zeros(n);
                tie.coeffs[i] = 1.0;
                tie.coeffs[d] = -1.0;
                rows.push(LpRow {
                    expr: tie,
                    relation: Relation::Eq,
                    rhs: center[i],
                });
            }
            Ok(RegionEncoding {
                box_: InputBox::new(lo, hi)?,
                rows,
                aux_bounds: vec![(-eps, *eps)],
            })
        }
        InputRegion::Contrast {
            center,
            lo_scale,
            hi_scale,
        } => {
            // x_i - c_i * s = 0 with one shared scale variable; the
            // propagation box is the elementwise envelope of s * center.
            let n = d + 1;
            let lo = center
                .iter()
                .map(|c| (lo_scale * c).min(hi_scale * c))
                .collect();
            let hi = center
                .iter()
                .map(|c| (lo_scale * c).max(hi_scale * c))
                .collect();
            let mut rows = Vec::with_capacity(d);
            for i in 0..d {
                let mut tie = LinearExpression::zeros(n);
                tie.coeffs[i] = 1.0;
                tie.coeffs[d] = -center[i];
                rows.push(LpRow {
                    expr: tie,
                    relation: Relation::Eq,
                    rhs: 0.0,
                });
            }
            Ok(RegionEncoding {
                box_: InputBox::new(lo, hi)?,
                rows,
                aux_bounds: vec![(*lo_scale, *hi_scale)],
            })
        }
        InputRegion::Box { lo, hi } => Ok(RegionEncoding {
            box_: InputBox::new(lo.clone(), hi.clone())?,
            rows: Vec::new(),
            aux_bounds: Vec::new(),
        }),
    }
}

/// One disjunct of the negated safety property: an LP check row whose
/// satisfiability (joint with the region, split, and branch rows) indicates
/// a potential violation, plus the direction over the raw outputs used as
/// the gradient objective when this system drives a refinement step.
#[derive(Debug, Clone)]
pub struct ViolationSystem {
    pub label: String,
    /// The closed violation condition over inputs and auxiliaries.
    pub check: LpRow,
    /// Objective sense that realizes the check as an optimization: minimize
    /// for `<=` checks, maximize for `>=` checks. The optimizer doubles as
    /// the deepest-violation witness.
    pub sense: Sense,
    /// Coefficients over the raw outputs giving the violated direction.
    pub gradient_row: Vec<f64>,
}

impl ViolationSystem {
    /// Whether an optimal `value` of the check expression means the system
    /// is satisfiable.
    pub fn satisfied_by(&self, value: f64, tol: f64) -> bool {
        match self.check.relation {
            Relation::Le => value <= self.check.rhs + tol,
            Relation::Ge => value >= self.check.rhs - tol,
            Relation::Eq => (value - self.check.rhs).abs() <= tol,
        }
    }
}

/// Lower-bounding expression of `coeffs . outputs` from a trace: positive
/// coefficients pull in `eq_low`, negative ones `eq_up`.
fn output_combination_low(trace: &PropagationTrace, coeffs: &[f64]) -> LinearExpression {
    let dim = trace.output.first().map_or(0, |p| p.dim());
    let mut expr = LinearExpression::zeros(dim);
    for (c, pair) in coeffs.iter().zip(trace.output.iter()) {
        if *c >= 0.0 {
            expr.add_scaled(&pair.eq_low, *c);
        } else {
            expr.add_scaled(&pair.eq_up, *c);
        }
    }
    expr
}

fn output_combination_up(trace: &PropagationTrace, coeffs: &[f64]) -> LinearExpression {
    let dim = trace.output.first().map_or(0, |p| p.dim());
    let mut expr = LinearExpression::zeros(dim);
    for (c, pair) in coeffs.iter().zip(trace.output.iter()) {
        if *c >= 0.0 {
            expr.add_scaled(&pair.eq_up, *c);
        } else {
            expr.add_scaled(&pair.eq_low, *c);
        }
    }
    expr
}

/// Build one violation system per disjunct of the negated property.
///
/// Classification with true label `t` yields one system per other class `o`
/// with check `Eq_low(t) - Eq_up(o) <= 0`; each `linear_safe` row is negated
/// and closed; a regression band yields one system above the band (via the
/// upper output bound) and one below (via the lower bound). Expressions are
/// padded to `num_vars` so region auxiliaries line up.
pub fn build_violation_systems(
    prop: &OutputProperty,
    trace: &PropagationTrace,
    num_vars: usize,
) -> Result<Vec<ViolationSystem>> {
    let n_out = trace.output.len();
    prop.validate(n_out)?;
    let mut systems = Vec::new();
    match prop {
        OutputProperty::Classification { true_label } => {
            let t = *true_label;
            for o in 0..n_out {
                if o == t {
                    continue;
                }
                let mut coeffs = vec![0.0; n_out];
                coeffs[t] = 1.0;
                coeffs[o] = -1.0;
                // Eq_low(t) - Eq_up(o) <= 0, the closed form of "< 0".
                let expr = output_combination_low(trace, &coeffs).padded(num_vars);
                systems.push(ViolationSystem {
                    label: format!("class {o} can reach class {t}"),
                    check: LpRow {
                        expr,
                        relation: Relation::Le,
                        rhs: 0.0,
                    },
                    sense: Sense::Minimize,
                    gradient_row: coeffs,
                });
            }
        }
        OutputProperty::LinearSafe { rows } => {
            for (i, row) in rows.iter().enumerate() {
                match row.relation {
                    Relation::Le => {
                        // violation: coeffs . F >= rhs
                        let expr = output_combination_up(trace, &row.coeffs).padded(num_vars);
                        systems.push(ViolationSystem {
                            label: format!("row {i} can exceed {}", row.rhs),
                            check: LpRow {
                                expr,
                                relation: Relation::Ge,
                                rhs: row.rhs,
                            },
                            sense: Sense::Maximize,
                            gradient_row: row.coeffs.clone(),
                        });
                    }
                    Relation::Ge => {
                        let expr = output_combination_low(trace, &row.coeffs).padded(num_vars);
                        systems.push(ViolationSystem {
                            label: format!("row {i} can fall below {}", row.rhs),
                            check: LpRow {
                                expr,
                                relation: Relation::Le,
                                rhs: row.rhs,
                            },
                            sense: Sense::Minimize,
                            gradient_row: row.coeffs.clone(),
                        });
                    }
                    Relation::Eq => {
                        let above = output_combination_up(trace, &row.coeffs).padded(num_vars);
                        systems.push(ViolationSystem {
                            label: format!("row {i} can exceed {}", row.rhs),
                            check: LpRow {
                                expr: above,
                                relation: Relation::Ge,
                                rhs: row.rhs,
                            },
                            sense: Sense::Maximize,
                            gradient_row: row.coeffs.clone(),
                        });
                        let below = output_combination_low(trace, &row.coeffs).padded(num_vars);
                        systems.push(ViolationSystem {
                            label: format!("row {i} can fall below {}", row.rhs),
                            check: LpRow {
                                expr: below,
                                relation: Relation::Le,
                                rhs: row.rhs,
                            },
                            sense: Sense::Minimize,
                            gradient_row: row.coeffs.clone(),
                        });
                    }
                }
            }
        }
        OutputProperty::RegressionBand {
            center_output,
            max_dev,
        } => {
            let above = output_combination_up(trace, &[1.0]).padded(num_vars);
            systems.push(ViolationSystem {
                label: "output can exceed the band".to_string(),
                check: LpRow {
                    expr: above,
                    relation: Relation::Ge,
                    rhs: center_output + max_dev,
                },
                sense: Sense::Maximize,
                gradient_row: vec![1.0],
            });
            let below = output_combination_low(trace, &[1.0]).padded(num_vars);
            systems.push(ViolationSystem {
                label: "output can fall below the band".to_string(),
                check: LpRow {
                    expr: below,
                    relation: Relation::Le,
                    rhs: center_output - max_dev,
                },
                sense: Sense::Minimize,
                gradient_row: vec![-1.0],
            });
        }
    }
    Ok(systems)
}

// --- property JSON schema -------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropertyFile {
    region: RegionSpec,
    property: PropSpec,
    #[serde(default)]
    normalized: bool,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RegionSpec {
    Linf { center: Vec<f64>, eps: f64 },
    L1 { center: Vec<f64>, eps: f64 },
    Brightness { center: Vec<f64>, eps: f64 },
    Contrast { center: Vec<f64>, lo_scale: f64, hi_scale: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum PropSpec {
    Classification { true_label: usize },
    LinearSafe { rows: Vec<RowSpec> },
    RegressionBand { center_output: f64, max_dev: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowSpec {
    coeffs: Vec<f64>,
    relation: String,
    rhs: f64,
}

/// Parse a property document. Numbers are raw (pre-normalization) unless the
/// document sets `"normalized": true`. Schema violations carry a JSON-path
/// style diagnostic.
pub fn parse_property(text: &str) -> Result<(InputRegion, OutputProperty, bool)> {
    let file: PropertyFile = serde_json::from_str(text).map_err(|e| Error::PropertySchema {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let region = match file.region {
        RegionSpec::Linf { center, eps } => InputRegion::LInf { center, eps },
        RegionSpec::L1 { center, eps } => InputRegion::L1 { center, eps },
        RegionSpec::Brightness { center, eps } => InputRegion::Brightness { center, eps },
        RegionSpec::Contrast {
            center,
            lo_scale,
            hi_scale,
        } => InputRegion::Contrast {
            center,
            lo_scale,
            hi_scale,
        },
        RegionSpec::Box { lo, hi } => InputRegion::Box { lo, hi },
    };
    region.validate()?;
    let property = match file.property {
        PropSpec::Classification { true_label } => OutputProperty::Classification { true_label },
        PropSpec::LinearSafe { rows } => {
            let rows = rows
                .into_iter()
                .enumerate()
                .map(|(i, r)| {
                    let relation = match r.relation.as_str() {
                        "<=" | "le" => Relation::Le,
                        ">=" | "ge" => Relation::Ge,
                        "=" | "==" | "eq" => Relation::Eq,
                        other => {
                            return Err(Error::PropertySchema {
                                path: format!("property.linear_safe.rows[{i}].relation"),
                                message: format!("unknown relation {other:?}, expected <=, >= or ="),
                            })
                        }
                    };
                    Ok(SafeRow {
                        coeffs: r.coeffs,
                        relation,
                        rhs: r.rhs,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            OutputProperty::LinearSafe { rows }
        }
        PropSpec::RegressionBand {
            center_output,
            max_dev,
        } => OutputProperty::RegressionBand {
            center_output,
            max_dev,
        },
    };
    Ok((region, property, file.normalized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Matrix;
    use crate::network::dense_relu_chain;
    use crate::propagate::{slr_forward, ForcedMap};

    #[test]
    fn linf_region_is_a_plain_box() {
        let enc = region_to_box(&InputRegion::LInf {
            center: vec![0.0, 0.0],
            eps: 1.0,
        })
        .unwrap();
        assert_eq!(enc.box_.lo, vec![-1.0, -1.0]);
        assert_eq!(enc.box_.hi, vec![1.0, 1.0]);
        assert!(enc.rows.is_empty());
        assert!(enc.aux_bounds.is_empty());
    }

    #[test]
    fn l1_region_row_count() {
        let enc = region_to_box(&InputRegion::L1 {
            center: vec![0.0, 0.0],
            eps: 1.0,
        })
        .unwrap();
        assert_eq!(enc.rows.len(), 5);
        assert_eq!(enc.aux_bounds, vec![(0.0, 1.0), (0.0, 1.0)]);
        assert_eq!(enc.box_.lo, vec![-1.0, -1.0]);
    }

    #[test]
    fn brightness_ties_inputs_to_one_offset() {
        let enc = region_to_box(&InputRegion::Brightness {
            center: vec![0.5, -0.5],
            eps: 0.25,
        })
        .unwrap();
        assert_eq!(enc.rows.len(), 2);
        assert_eq!(enc.aux_bounds, vec![(-0.25, 0.25)]);
        assert!(enc.rows.iter().all(|r| r.relation == Relation::Eq));
    }

    #[test]
    fn negative_eps_rejected() {
        assert!(region_to_box(&InputRegion::LInf {
            center: vec![0.0],
            eps: -0.1,
        })
        .is_err());
        assert!(region_to_box(&InputRegion::Contrast {
            center: vec![1.0],
            lo_scale: -0.5,
            hi_scale: 1.0,
        })
        .is_err());
    }

    #[test]
    fn region_membership_pre_closure() {
        let linf = InputRegion::LInf {
            center: vec![0.0, 0.0],
            eps: 0.5,
        };
        assert!(linf.contains(&[0.5, -0.5], 1e-7));
        assert!(!linf.contains(&[0.6, 0.0], 1e-7));

        let bright = InputRegion::Brightness {
            center: vec![0.1, 0.2],
            eps: 0.5,
        };
        assert!(bright.contains(&[0.4, 0.5], 1e-7));
        assert!(!bright.contains(&[0.4, 0.2], 1e-7)); // offsets differ

        let contrast = InputRegion::Contrast {
            center: vec![1.0, 2.0],
            lo_scale: 0.5,
            hi_scale: 1.5,
        };
        assert!(contrast.contains(&[0.75, 1.5], 1e-7));
        assert!(!contrast.contains(&[0.75, 2.0], 1e-7));
    }

    #[test]
    fn classification_yields_one_system_per_wrong_class() {
        // 10 outputs, true label 7 -> 9 systems.
        let w = Matrix::new(10, 2, vec![0.1; 20]).unwrap();
        let net = dense_relu_chain(vec![(w, vec![0.0; 10])]).unwrap();
        let box_ = InputBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let trace = slr_forward(&net, &box_, &ForcedMap::new()).unwrap();
        let systems = build_violation_systems(
            &OutputProperty::Classification { true_label: 7 },
            &trace,
            2,
        )
        .unwrap();
        assert_eq!(systems.len(), 9);
    }

    #[test]
    fn violation_of_lower_threshold_uses_low_bound() {
        // safe: f >= 3.3; violation system: Eq_low <= 3.3.
        let w = Matrix::new(1, 2, vec![1.0, 1.0]).unwrap();
        let net = dense_relu_chain(vec![(w, vec![4.0])]).unwrap();
        let box_ = InputBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let trace = slr_forward(&net, &box_, &ForcedMap::new()).unwrap();
        let prop = OutputProperty::LinearSafe {
            rows: vec![SafeRow {
                coeffs: vec![1.0],
                relation: Relation::Ge,
                rhs: 3.3,
            }],
        };
        let systems = build_violation_systems(&prop, &trace, 2).unwrap();
        assert_eq!(systems.len(), 1);
        assert_eq!(systems[0].check.relation, Relation::Le);
        assert_eq!(systems[0].check.rhs, 3.3);
        assert_eq!(systems[0].sense, Sense::Minimize);
    }

    #[test]
    fn parse_documented_example() {
        let text = r#"{"region":{"linf":{"center":[0,0],"eps":0.1}},
                       "property":{"classification":{"true_label":1}}}"#;
        let (region, prop, normalized) = parse_property(text).unwrap();
        assert_eq!(
            region,
            InputRegion::LInf {
                center: vec![0.0, 0.0],
                eps: 0.1
            }
        );
        assert_eq!(prop, OutputProperty::Classification { true_label: 1 });
        assert!(!normalized);
    }

    #[test]
    fn unknown_norm_is_a_schema_error() {
        let text = r#"{"region":{"l3":{"center":[0,0],"eps":0.1}},
                       "property":{"classification":{"true_label":1}}}"#;
        match parse_property(text) {
            Err(Error::PropertySchema { message, .. }) => {
                assert!(message.contains("l3"), "message: {message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn violated_by_counts_ties_as_violations() {
        let prop = OutputProperty::Classification { true_label: 0 };
        assert!(prop.violated_by(&[1.0, 1.0]));
        assert!(!prop.violated_by(&[1.0, 0.5]));

        let band = OutputProperty::RegressionBand {
            center_output: 0.0,
            max_dev: 0.5,
        };
        assert!(band.violated_by(&[0.5]));
        assert!(!band.violated_by(&[0.49]));
    }
}
