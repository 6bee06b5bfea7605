//! Selected models and the conditional density series
//! `h(y, x) = Σ θ_{j0, j_m1, …, j_mr} B̄_{j0}(y) ∏_k B_{j_mk}(x_mk)`.

use serde::{Deserialize, Serialize};

use crate::basis::{bspline_integral, eval_all_unchecked, SplineSpec};
use crate::error::{arg, Error, Result};

/// Tolerance used when checking that a coefficient vector lies on the simplex.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A selected predictor subset `{m_1 < … < m_r}` (1-based column indices).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ModelIndex {
    predictors: Vec<usize>,
}

impl ModelIndex {
    /// Validates ordering and, when `p` is given, the column range.
    pub fn new(predictors: Vec<usize>, p: Option<usize>) -> Result<Self> {
        if predictors.first() == Some(&0) {
            return arg("predictor indices are 1-based");
        }
        if predictors.windows(2).any(|w| w[0] >= w[1]) {
            return arg(format!(
                "predictor indices must be strictly increasing, got {predictors:?}"
            ));
        }
        if let (Some(p), Some(&last)) = (p, predictors.last()) {
            if last > p {
                return arg(format!("predictor {last} exceeds the number of columns {p}"));
            }
        }
        Ok(Self { predictors })
    }

    pub fn empty() -> Self {
        Self {
            predictors: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.predictors.len()
    }

    pub fn predictors(&self) -> &[usize] {
        &self.predictors
    }
}

impl TryFrom<Vec<usize>> for ModelIndex {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v, None)
    }
}

impl From<ModelIndex> for Vec<usize> {
    fn from(m: ModelIndex) -> Self {
        m.predictors
    }
}

/// Basis sizes `(J_0, J_m1, …, J_mr)` for one model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisAllocation {
    pub y_dim: usize,
    pub x_dims: Vec<usize>,
}

impl BasisAllocation {
    pub fn new(y_dim: usize, x_dims: Vec<usize>) -> Result<Self> {
        if y_dim == 0 || x_dims.contains(&0) {
            return arg("basis sizes must be at least 1");
        }
        Ok(Self { y_dim, x_dims })
    }

    /// Number of covariate cell tuples `∏_k J_mk`.
    pub fn group_count(&self) -> usize {
        self.x_dims.iter().product()
    }

    /// Row-major position of a 1-based cell tuple (last coordinate fastest).
    pub fn group_index(&self, cells: &[usize]) -> usize {
        cells
            .iter()
            .zip(&self.x_dims)
            .fold(0, |acc, (&c, &d)| acc * d + (c - 1))
    }

    /// Inverse of [`group_index`](Self::group_index).
    pub fn group_cells(&self, mut index: usize) -> Vec<usize> {
        let mut cells = vec![0; self.x_dims.len()];
        for (k, &d) in self.x_dims.iter().enumerate().rev() {
            cells[k] = index % d + 1;
            index /= d;
        }
        cells
    }
}

/// One probability vector of length `J_0` per covariate cell tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBlock {
    y_dim: usize,
    groups: Vec<Vec<f64>>,
}

impl CoefficientBlock {
    /// Checks shape and that every group vector is a point of the simplex.
    pub fn new(alloc: &BasisAllocation, groups: Vec<Vec<f64>>) -> Result<Self> {
        let block = Self::from_raw_unchecked(alloc, groups)?;
        for (g, v) in block.groups.iter().enumerate() {
            check_simplex(v).map_err(|msg| {
                Error::Argument(format!(
                    "group {:?}: {msg}",
                    alloc.group_cells(g)
                ))
            })?;
        }
        Ok(block)
    }

    /// Shape-checked construction that skips the simplex check. Only meant for
    /// diagnostics such as verifying that normalization checks catch bad input.
    pub fn from_raw_unchecked(alloc: &BasisAllocation, groups: Vec<Vec<f64>>) -> Result<Self> {
        if groups.len() != alloc.group_count() {
            return arg(format!(
                "expected {} coefficient groups, got {}",
                alloc.group_count(),
                groups.len()
            ));
        }
        if let Some(bad) = groups.iter().find(|v| v.len() != alloc.y_dim) {
            return arg(format!(
                "coefficient vectors must have length {}, got {}",
                alloc.y_dim,
                bad.len()
            ));
        }
        Ok(Self {
            y_dim: alloc.y_dim,
            groups,
        })
    }

    /// Every group equal to `(1/J_0, …, 1/J_0)`.
    pub fn uniform(alloc: &BasisAllocation) -> Self {
        let v = vec![1.0 / alloc.y_dim as f64; alloc.y_dim];
        Self {
            y_dim: alloc.y_dim,
            groups: vec![v; alloc.group_count()],
        }
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }
}

fn check_simplex(v: &[f64]) -> std::result::Result<(), String> {
    if v.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
        return Err(format!("negative or non-finite entry in {v:?}"));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(format!("entries sum to {s}, not 1"));
    }
    Ok(())
}

/// A fully specified conditional density `f(y | x)` from the series prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensityModel", into = "RawDensityModel")]
pub struct ConditionalDensityModel {
    model: ModelIndex,
    alloc: BasisAllocation,
    coeffs: CoefficientBlock,
    order: usize,
    y_spec: SplineSpec,
    x_specs: Vec<SplineSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDensityModel {
    model: ModelIndex,
    alloc: BasisAllocation,
    coeffs: Vec<Vec<f64>>,
    order: usize,
}

impl TryFrom<RawDensityModel> for ConditionalDensityModel {
    type Error = Error;
    fn try_from(raw: RawDensityModel) -> Result<Self> {
        let coeffs = CoefficientBlock::new(&raw.alloc, raw.coeffs)?;
        Self::new(raw.model, raw.alloc, coeffs, raw.order)
    }
}

impl From<ConditionalDensityModel> for RawDensityModel {
    fn from(m: ConditionalDensityModel) -> Self {
        RawDensityModel {
            model: m.model,
            alloc: m.alloc,
            coeffs: m.coeffs.groups,
            order: m.order,
        }
    }
}

impl ConditionalDensityModel {
    pub fn new(
        model: ModelIndex,
        alloc: BasisAllocation,
        coeffs: CoefficientBlock,
        order: usize,
    ) -> Result<Self> {
        if alloc.x_dims.len() != model.size() {
            return arg(format!(
                "allocation has {} predictor dimensions but the model selects {}",
                alloc.x_dims.len(),
                model.size()
            ));
        }
        if coeffs.y_dim != alloc.y_dim || coeffs.groups.len() != alloc.group_count() {
            return arg("coefficient block does not match the allocation");
        }
        let y_spec = SplineSpec::with_dimension(order, alloc.y_dim)?;
        let x_specs = alloc
            .x_dims
            .iter()
            .map(|&d| SplineSpec::with_dimension(order, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            alloc,
            coeffs,
            order,
            y_spec,
            x_specs,
        })
    }

    pub fn model(&self) -> &ModelIndex {
        &self.model
    }

    pub fn alloc(&self) -> &BasisAllocation {
        &self.alloc
    }

    pub fn coeffs(&self) -> &CoefficientBlock {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if let Some(&last) = self.model.predictors().last() {
            if x.len() < last {
                return arg(format!(
                    "covariate vector has length {} but predictor {last} is selected",
                    x.len()
                ));
            }
        }
        if let Some((k, v)) = x.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
            return arg(format!("x{} = {v} is outside (0,1)", k + 1));
        }
        Ok(())
    }

    /// Weighted covariate cells active at `x`: `(group index, ∏_k B_{j_mk}(x_mk))`.
    fn active_groups(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut out = vec![(0usize, 1.0f64)];
        for (spec, &m) in self.x_specs.iter().zip(self.model.predictors()) {
            let vals = eval_all_unchecked(spec, x[m - 1]);
            let d = spec.dimension();
            out = out
                .iter()
                .flat_map(|&(g, w)| vals.iter().map(move |&(j, v)| (g * d + (j - 1), w * v)))
                .collect();
        }
        out
    }

    /// `f(y | x)`; only the selected coordinates of `x` are read.
    pub fn eval_density(&self, x: &[f64], y: f64) -> Result<f64> {
        self.check_x(x)?;
        if !(y > 0.0 && y < 1.0) {
            return arg(format!("y = {y} is outside (0,1)"));
        }
        let y_vals: Vec<(usize, f64)> = eval_all_unchecked(&self.y_spec, y)
            .into_iter()
            .map(|(j, v)| (j, v / bspline_integral(&self.y_spec, j).expect("valid index")))
            .collect();
        let mut total = 0.0;
        for (g, w) in self.active_groups(x) {
            let theta = &self.coeffs.groups[g];
            let inner: f64 = y_vals.iter().map(|&(j, v)| theta[j - 1] * v).sum();
            total += w * inner;
        }
        Ok(total)
    }

    /// `∫₀¹ f(y | x) dy`, in closed form since every `B̄_{j0}` integrates to one.
    pub fn integrate_density_in_y(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        Ok(self
            .active_groups(x)
            .into_iter()
            .map(|(g, w)| w * self.coeffs.groups[g].iter().sum::<f64>())
            .sum())
    }
}
