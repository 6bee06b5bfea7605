//! Univariate and tensor-product B-spline bases on `(0,1)`.
//!
//! Every univariate family uses `K` equal subintervals and clamped (repeated)
//! boundary knots, so an order-`q` family has `J = K + q − 1` members. Order 1
//! gives interval indicators on right-closed cells `((j−1)/K, j/K]`.
//!
//! Indices in the public API are 1-based, matching the usual notation
//! `B_1, …, B_J`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{arg, contract, Result};

/// One univariate B-spline family of a given order on equally spaced knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplineSpec {
    order: usize,
    intervals: usize,
}

impl SplineSpec {
    pub fn new(order: usize, intervals: usize) -> Result<Self> {
        if order == 0 {
            return arg("spline order must be at least 1");
        }
        if intervals == 0 {
            return arg("number of intervals must be at least 1");
        }
        Ok(Self { order, intervals })
    }

    /// The family with `dimension` members, i.e. `K = J − q + 1` intervals.
    pub fn with_dimension(order: usize, dimension: usize) -> Result<Self> {
        if order == 0 || dimension < order {
            return arg(format!(
                "dimension {dimension} is too small for order {order} (need J >= q)"
            ));
        }
        Self::new(order, dimension + 1 - order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// `J = K + q − 1`.
    pub fn dimension(&self) -> usize {
        self.intervals + self.order - 1
    }

    /// The clamped knot vector `t_0, …, t_{J+q−1}` (0-based).
    pub fn knots(&self) -> Vec<f64> {
        let q = self.order;
        let k = self.intervals;
        let mut t = Vec::with_capacity(self.dimension() + q);
        t.extend(std::iter::repeat_n(0.0, q));
        t.extend((1..k).map(|i| self.knot(i)));
        t.extend(std::iter::repeat_n(1.0, q));
        t
    }

    #[inline]
    fn knot(&self, i: usize) -> f64 {
        i as f64 / self.intervals as f64
    }

    /// Knot `t_i` of the clamped vector, computed without allocating.
    #[inline]
    fn clamped_knot(&self, i: usize) -> f64 {
        let q = self.order;
        if i < q {
            0.0
        } else if i >= q + self.intervals - 1 {
            1.0
        } else {
            self.knot(i + 1 - q)
        }
    }

    /// Index `c ∈ 1..=K` of the right-closed cell `((c−1)/K, c/K]` containing `x`.
    #[inline]
    pub(crate) fn cell_of(&self, x: f64) -> usize {
        haar_cell(x, self.intervals)
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.dimension() {
            return arg(format!(
                "basis index {j} outside 1..={}",
                self.dimension()
            ));
        }
        Ok(())
    }
}

/// Right-closed cell `c ∈ 1..=k` with `(c−1)/k < x ≤ c/k`.
#[inline]
pub(crate) fn haar_cell(x: f64, k: usize) -> usize {
    ((x * k as f64).ceil() as usize).clamp(1, k)
}

pub(crate) fn check_open_unit(x: f64, what: &str) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return arg(format!("{what} = {x} is outside the open interval (0,1)"));
    }
    Ok(())
}

/// All B-splines that are positive at `x`, as `(index, value)` pairs.
///
/// Uses the triangular Cox–de Boor scheme on the knot span containing `x`;
/// at most `q` entries are returned and they sum to one.
pub fn eval_all(spec: &SplineSpec, x: f64) -> Result<Vec<(usize, f64)>> {
    check_open_unit(x, "x")?;
    Ok(eval_all_unchecked(spec, x))
}

pub(crate) fn eval_all_unchecked(spec: &SplineSpec, x: f64) -> Vec<(usize, f64)> {
    let q = spec.order;
    let c = spec.cell_of(x);
    if q == 1 {
        return vec![(c, 1.0)];
    }
    let span = c + q - 2;
    let mut values = vec![0.0; q];
    let mut left = vec![0.0; q];
    let mut right = vec![0.0; q];
    values[0] = 1.0;
    for d in 1..q {
        left[d] = x - spec.clamped_knot(span + 1 - d);
        right[d] = spec.clamped_knot(span + d) - x;
        let mut saved = 0.0;
        for r in 0..d {
            let temp = values[r] / (right[r + 1] + left[d - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[d - r] * temp;
        }
        values[d] = saved;
    }
    values
        .into_iter()
        .enumerate()
        .filter(|&(_, v)| v > 0.0)
        .map(|(i, v)| (c + i, v))
        .collect()
}

/// `B_j(x)` for `j ∈ 1..=J` and `x ∈ (0,1)`.
pub fn eval_bspline(spec: &SplineSpec, j: usize, x: f64) -> Result<f64> {
    spec.check_index(j)?;
    let all = eval_all(spec, x)?;
    Ok(all
        .into_iter()
        .find(|&(i, _)| i == j)
        .map_or(0.0, |(_, v)| v))
}

/// `∫₀¹ B_j(x) dx = (t_{j+q} − t_j) / q`.
pub fn bspline_integral(spec: &SplineSpec, j: usize) -> Result<f64> {
    spec.check_index(j)?;
    let i = j - 1;
    Ok((spec.clamped_knot(i + spec.order) - spec.clamped_knot(i)) / spec.order as f64)
}

/// The normalized B-spline `B̄_j = B_j / ∫B_j`, a probability density on `(0,1)`.
pub fn eval_normalized(spec: &SplineSpec, j: usize, y: f64) -> Result<f64> {
    Ok(eval_bspline(spec, j, y)? / bspline_integral(spec, j)?)
}

/// Cell of `x` for an order-1 (histogram) family: `j` with `(j−1)/K < x ≤ j/K`.
pub fn cell_index(spec: &SplineSpec, x: f64) -> Result<usize> {
    if spec.order != 1 {
        return contract(format!(
            "cell_index requires a histogram basis (order 1), got order {}",
            spec.order
        ));
    }
    check_open_unit(x, "x")?;
    Ok(spec.cell_of(x))
}

/// Tensor product of univariate families; axis 0 is the response `y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    axes: Vec<SplineSpec>,
}

impl TensorSpec {
    pub fn new(axes: Vec<SplineSpec>) -> Result<Self> {
        if axes.is_empty() {
            return arg("a tensor basis needs at least one axis");
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[SplineSpec] {
        &self.axes
    }

    pub fn dimension(&self) -> usize {
        self.axes.iter().map(SplineSpec::dimension).product()
    }

    fn check_shape(&self, jtuple: &[usize], point: &[f64]) -> Result<()> {
        if jtuple.len() != self.axes.len() || point.len() != self.axes.len() {
            return arg(format!(
                "expected {} axes, got index of length {} and point of length {}",
                self.axes.len(),
                jtuple.len(),
                point.len()
            ));
        }
        Ok(())
    }
}

/// `B̄_{j_0}(y) ∏_k B_{j_k}(x_k)` with `point = (y, x_1, …)`.
pub fn tensor_eval(tspec: &TensorSpec, jtuple: &[usize], point: &[f64]) -> Result<f64> {
    tspec.check_shape(jtuple, point)?;
    let mut value = eval_normalized(&tspec.axes[0], jtuple[0], point[0])?;
    for ((spec, &j), &x) in tspec.axes.iter().zip(jtuple).zip(point).skip(1) {
        value *= eval_bspline(spec, j, x)?;
    }
    Ok(value)
}

/// Tensor product with every axis un-normalized.
pub fn tensor_eval_raw(tspec: &TensorSpec, jtuple: &[usize], point: &[f64]) -> Result<f64> {
    tspec.check_shape(jtuple, point)?;
    let mut value = 1.0;
    for ((spec, &j), &x) in tspec.axes.iter().zip(jtuple).zip(point) {
        value *= eval_bspline(spec, j, x)?;
    }
    Ok(value)
}

/// Least-squares fit of a function in the un-normalized tensor basis.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Coefficients in row-major order over the multi-index (last axis fastest).
    pub coefficients: Vec<f64>,
    /// Largest absolute residual over the fitting grid.
    pub sup_residual: f64,
}

/// Projects `f` onto the tensor basis by least squares on the regular grid of
/// cell midpoints `(k + 1/2) / grid_per_axis` in every coordinate.
pub fn project<F>(f: F, tspec: &TensorSpec, grid_per_axis: usize) -> Result<Projection>
where
    F: Fn(&[f64]) -> f64,
{
    let max_dim = tspec.axes.iter().map(SplineSpec::dimension).max().unwrap_or(1);
    if grid_per_axis < 4 * max_dim {
        return contract(format!(
            "grid of {grid_per_axis} points per axis is too coarse for dimension {max_dim} \
             (need at least {})",
            4 * max_dim
        ));
    }
    let m = tspec.axes.len();
    let n_points = grid_per_axis
        .checked_pow(m as u32)
        .ok_or_else(|| crate::Error::Argument("projection grid too large".into()))?;
    let n_coef = tspec.dimension();
    let grid: Vec<f64> = (0..grid_per_axis)
        .map(|k| (k as f64 + 0.5) / grid_per_axis as f64)
        .collect();
    // Per-axis sparse evaluations at every grid coordinate.
    let per_axis: Vec<Vec<Vec<(usize, f64)>>> = tspec
        .axes
        .iter()
        .map(|spec| grid.iter().map(|&x| eval_all_unchecked(spec, x)).collect())
        .collect();
    let strides: Vec<usize> = {
        let mut s = vec![1; m];
        for a in (0..m.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * tspec.axes[a + 1].dimension();
        }
        s
    };

    let mut design = DMatrix::<f64>::zeros(n_points, n_coef);
    let mut rhs = DVector::<f64>::zeros(n_points);
    let mut point = vec![0.0; m];
    let mut idx = vec![0usize; m];
    for row in 0..n_points {
        let mut rem = row;
        for a in (0..m).rev() {
            idx[a] = rem % grid_per_axis;
            rem /= grid_per_axis;
            point[a] = grid[idx[a]];
        }
        rhs[row] = f(&point);
        fill_row(&per_axis, &idx, &strides, 0, 0, 1.0, &mut |col, v| {
            design[(row, col)] += v
        });
    }

    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(&rhs, 1e-13)
        .map_err(|e| crate::Error::Runtime(format!("least-squares solve failed: {e}")))?;
    let fitted = &design * &coef;
    let sup_residual = fitted
        .iter()
        .zip(rhs.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Projection {
        coefficients: coef.iter().copied().collect(),
        sup_residual,
    })
}

fn fill_row(
    per_axis: &[Vec<Vec<(usize, f64)>>],
    idx: &[usize],
    strides: &[usize],
    axis: usize,
    offset: usize,
    acc: f64,
    sink: &mut impl FnMut(usize, f64),
) {
    if axis == per_axis.len() {
        sink(offset, acc);
        return;
    }
    for &(j, v) in &per_axis[axis][idx[axis]] {
        fill_row(
            per_axis,
            idx,
            strides,
            axis + 1,
            offset + (j - 1) * strides[axis],
            acc * v,
            sink,
        );
    }
}
