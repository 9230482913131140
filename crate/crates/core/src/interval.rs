//! Affine expressions over the network inputs, concrete intervals with
//! outward rounding, and the dense matrix primitive used by every
//! propagation pass.
//!
//! All symbolic bookkeeping in this crate works with affine functions of the
//! `d` network inputs. A [`BoundPair`] holds one expression bounding a node
//! value from below and one from above, together with cached concrete
//! envelopes of each expression over the active [`InputBox`]. Intervals are
//! widened one representable step outward after every interval-producing
//! floating point operation so accumulated rounding can never flip a sound
//! bound into an unsound one.

use crate::error::{Error, Result};

/// One representable step toward negative infinity. Exact zero is left in
/// place: a sum of representable doubles that rounds to zero is exactly
/// zero, so widening it would only manufacture spurious sign straddles.
#[inline]
pub fn step_down(x: f64) -> f64 {
    if x.is_nan() || x == 0.0 {
        x
    } else {
        x.next_down()
    }
}

/// One representable step toward positive infinity, preserving exact zero.
#[inline]
pub fn step_up(x: f64) -> f64 {
    if x.is_nan() || x == 0.0 {
        x
    } else {
        x.next_up()
    }
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

/// A closed interval of reals with finite endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcreteInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ConcreteInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NonFinite {
                context: "interval endpoint",
            });
        }
        if lo > hi {
            return Err(Error::EmptyInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// The degenerate interval `[v, v]`.
    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    /// Smallest interval containing both operands.
    pub fn hull(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Scale by a non-negative factor, rounding outward.
    pub fn scale_nonneg(&self, k: f64) -> Self {
        debug_assert!(k >= 0.0);
        Self {
            lo: step_down(k * self.lo),
            hi: step_up(k * self.hi),
        }
    }

    /// Shift by a constant, rounding outward.
    pub fn shift(&self, c: f64) -> Self {
        Self {
            lo: step_down(self.lo + c),
            hi: step_up(self.hi + c),
        }
    }
}

/// Widen an interval one representable step outward on each endpoint.
///
/// Never shrinks: the result always contains the input.
pub fn outward_round(iv: ConcreteInterval) -> ConcreteInterval {
    ConcreteInterval {
        lo: step_down(iv.lo),
        hi: step_up(iv.hi),
    }
}

/// An axis-aligned box of input values, `lo_i <= x_i <= hi_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl InputBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                context: "input box",
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if !all_finite(&lo) || !all_finite(&hi) {
            return Err(Error::NonFinite {
                context: "input box bound",
            });
        }
        for (i, (&l, &h)) in lo.iter().zip(hi.iter()).enumerate() {
            if l > h {
                return Err(Error::ShapeMismatch {
                    context: "input box",
                    detail: format!("lo[{i}] = {l} exceeds hi[{i}] = {h}"),
                });
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .map(|(&l, &h)| l + (h - l) / 2.0)
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol)
    }

    /// Split at the midpoint of `axis` into two boxes whose union is `self`.
    pub fn bisect(&self, axis: usize) -> Result<(InputBox, InputBox)> {
        if axis >= self.dim() {
            return Err(Error::DimensionMismatch {
                context: "bisect axis",
                expected: self.dim(),
                actual: axis,
            });
        }
        if self.hi[axis] <= self.lo[axis] {
            return Err(Error::ZeroWidthAxis { axis });
        }
        let mid = self.lo[axis] + (self.hi[axis] - self.lo[axis]) / 2.0;
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[axis] = mid;
        right.lo[axis] = mid;
        Ok((left, right))
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "matrix",
                detail: format!("{rows}x{cols} needs {} entries, got {}", rows * cols, data.len()),
            });
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite { context: "matrix entry" });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::ShapeMismatch {
                    context: "matrix rows",
                    detail: "ragged rows".to_string(),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::new(r, c, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "matvec",
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self * other`, both dense.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                context: "matmul",
                detail: format!("{}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }
}

/// An affine function of the `d` network inputs: `constant + coeffs . x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearExpression {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl LinearExpression {
    pub fn new(coeffs: Vec<f64>, constant: f64) -> Result<Self> {
        if !all_finite(&coeffs) || !constant.is_finite() {
            return Err(Error::NonFinite {
                context: "linear expression",
            });
        }
        Ok(Self { coeffs, constant })
    }

    /// The zero expression over `dim` inputs.
    pub fn zeros(dim: usize) -> Self {
        Self {
            coeffs: vec![0.0; dim],
            constant: 0.0,
        }
    }

    /// The constant expression `c` over `dim` inputs.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            coeffs: vec![0.0; dim],
            constant: c,
        }
    }

    /// The coordinate expression `x_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[i] = 1.0;
        Self {
            coeffs,
            constant: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Evaluate at a concrete point.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "expression evaluation",
                expected: self.dim(),
                actual: point.len(),
            });
        }
        let mut acc = self.constant;
        for (c, x) in self.coeffs.iter().zip(point) {
            acc += c * x;
        }
        Ok(acc)
    }

    /// `self += w * other`.
    pub fn add_scaled(&mut self, other: &LinearExpression, w: f64) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a += w * b;
        }
        self.constant += w * other.constant;
    }

    /// `k * self`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| k * c).collect(),
            constant: k * self.constant,
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    /// Reinterpret over a wider variable space by appending zero coefficients.
    pub fn padded(&self, new_dim: usize) -> Self {
        debug_assert!(new_dim >= self.dim());
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(new_dim, 0.0);
        Self {
            coeffs,
            constant: self.constant,
        }
    }

    /// Concrete envelope of the expression over a box, rounded outward after
    /// every accumulation step. For all `x` in the box,
    /// `lo <= eval(x) <= hi`.
    pub fn bounds_over(&self, box_: &InputBox) -> Result<ConcreteInterval> {
        if box_.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "expression bounds",
                expected: self.dim(),
                actual: box_.dim(),
            });
        }
        let mut lo = self.constant;
        let mut hi = self.constant;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let a = c * box_.lo[i];
            let b = c * box_.hi[i];
            lo = step_down(lo + step_down(a.min(b)));
            hi = step_up(hi + step_up(a.max(b)));
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NonFinite {
                context: "expression bounds",
            });
        }
        Ok(ConcreteInterval { lo, hi })
    }
}

/// Symbolic interval for one node: a lower and an upper affine bound plus
/// cached concrete envelopes of each expression over the active box.
#[derive(Debug, Clone)]
pub struct BoundPair {
    pub eq_low: LinearExpression,
    pub eq_up: LinearExpression,
    /// Concrete range of `eq_low` over the box.
    pub conc_low: ConcreteInterval,
    /// Concrete range of `eq_up` over the box.
    pub conc_up: ConcreteInterval,
}

impl BoundPair {
    /// Build a pair and compute its concrete envelopes over `box_`.
    pub fn new(eq_low: LinearExpression, eq_up: LinearExpression, box_: &InputBox) -> Result<Self> {
        let conc_low = eq_low.bounds_over(box_)?;
        let conc_up = eq_up.bounds_over(box_)?;
        Ok(Self {
            eq_low,
            eq_up,
            conc_low,
            conc_up,
        })
    }

    /// Assemble from explicit parts. Callers are responsible for the
    /// envelope invariants.
    pub fn from_parts(
        eq_low: LinearExpression,
        eq_up: LinearExpression,
        conc_low: ConcreteInterval,
        conc_up: ConcreteInterval,
    ) -> Self {
        Self {
            eq_low,
            eq_up,
            conc_low,
            conc_up,
        }
    }

    /// The all-zero pair.
    pub fn zero(dim: usize) -> Self {
        Self {
            eq_low: LinearExpression::zeros(dim),
            eq_up: LinearExpression::zeros(dim),
            conc_low: ConcreteInterval::point(0.0),
            conc_up: ConcreteInterval::point(0.0),
        }
    }

    /// Identity pairs `x_i` over a box, one per input.
    pub fn identity(box_: &InputBox) -> Vec<BoundPair> {
        (0..box_.dim())
            .map(|i| {
                let expr = LinearExpression::coordinate(box_.dim(), i);
                let conc = ConcreteInterval {
                    lo: box_.lo[i],
                    hi: box_.hi[i],
                };
                BoundPair::from_parts(expr.clone(), expr, conc, conc)
            })
            .collect()
    }

    /// Concrete hull of the node value: `[conc_low.lo, conc_up.hi]`.
    pub fn hull(&self) -> ConcreteInterval {
        ConcreteInterval {
            lo: self.conc_low.lo,
            hi: self.conc_up.hi,
        }
    }

    pub fn dim(&self) -> usize {
        self.eq_low.dim()
    }
}

/// Push a vector of symbolic intervals through an affine layer.
///
/// Each output lower bound draws on input lower bounds where the weight is
/// non-negative and on input upper bounds where it is negative, and
/// symmetrically for the output upper bound. Concrete envelopes are
/// recomputed over `box_` with outward rounding.
pub fn linear_map(
    pairs: &[BoundPair],
    weights: &Matrix,
    bias: &[f64],
    box_: &InputBox,
) -> Result<Vec<BoundPair>> {
    if weights.cols() != pairs.len() {
        return Err(Error::ShapeMismatch {
            context: "linear map",
            detail: format!("weights expect {} inputs, got {}", weights.cols(), pairs.len()),
        });
    }
    if bias.len() != weights.rows() {
        return Err(Error::ShapeMismatch {
            context: "linear map",
            detail: format!("bias length {} vs {} rows", bias.len(), weights.rows()),
        });
    }
    let dim = box_.dim();
    let mut out = Vec::with_capacity(weights.rows());
    for j in 0..weights.rows() {
        let mut low = LinearExpression::constant(dim, bias[j]);
        let mut up = LinearExpression::constant(dim, bias[j]);
        for (i, pair) in pairs.iter().enumerate() {
            let w = weights.get(j, i);
            if w == 0.0 {
                continue;
            }
            if w >= 0.0 {
                low.add_scaled(&pair.eq_low, w);
                up.add_scaled(&pair.eq_up, w);
            } else {
                low.add_scaled(&pair.eq_up, w);
                up.add_scaled(&pair.eq_low, w);
            }
        }
        out.push(BoundPair::new(low, up, box_)?);
    }
    Ok(out)
}
