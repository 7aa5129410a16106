//! Finite spectral-triple models with exact ground truth, and the brute-force
//! Fredholm index of PvP + (1 − P).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{operator_norm_raw, CMatrix, GeneralMatrix, HermitianMatrix};

/// Singular values below this count as zero in the oracle.
pub const ORACLE_ZERO: f64 = 1e-8;
/// Required distance of the next singular value above `ORACLE_ZERO`.
pub const ORACLE_GAP: f64 = 1e-4;
/// Extra Fourier modes the oracle asks for on top of 2|k|.
pub const ORACLE_GUARD: usize = 8;

/// The unitary of a model, in the eigenbasis of D.
#[derive(Clone, Debug)]
pub enum Unitary {
    /// v e_n = e_{n+k}, truncated to the modes [−N, N].
    Shift(i64),
    Dense(GeneralMatrix),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Circle { n_max: usize, winding: i64 },
    DirectSum { components: Vec<ModelKind> },
    Custom,
}

/// A truncated odd spectral triple: D diagonal, v unitary on the interior modes.
#[derive(Clone, Debug)]
pub struct SpectralTripleModel {
    dirac: Vec<f64>,
    unitary: Unitary,
    comm_norm: f64,
    interior: Vec<bool>,
    certified: bool,
    kind: ModelKind,
}

/// Fourier modes n ∈ [−N, N] of D = −i d/dθ on the circle with v = e^{ikθ}.
pub fn circle_model(n_max: usize, winding: i64) -> Result<SpectralTripleModel> {
    let required = winding.unsigned_abs() as usize + 1;
    if n_max < required {
        return Err(Error::TruncationTooSmall {
            n_max,
            winding,
            required,
        });
    }
    let n = n_max as i64;
    let edge = n - winding.abs();
    Ok(SpectralTripleModel {
        dirac: (-n..=n).map(|m| m as f64).collect(),
        unitary: Unitary::Shift(winding),
        comm_norm: winding.unsigned_abs() as f64,
        interior: (-n..=n).map(|m| m.abs() <= edge).collect(),
        certified: true,
        kind: ModelKind::Circle {
            n_max,
            winding,
        },
    })
}

/// Direct sum of models: D = ⊕ D_j, v = ⊕ v_j.
pub fn direct_sum(models: &[SpectralTripleModel]) -> Result<SpectralTripleModel> {
    if models.is_empty() {
        return Err(Error::InvalidParameter("empty direct sum".into()));
    }
    let dim: usize = models.iter().map(|m| m.dim()).sum();
    let mut v = CMatrix::zeros(dim, dim);
    let mut dirac = Vec::with_capacity(dim);
    let mut interior = Vec::with_capacity(dim);
    let mut off = 0;
    for m in models {
        let d = m.dim();
        v.view_mut((off, off), (d, d)).copy_from(m.unitary_matrix().matrix());
        dirac.extend_from_slice(&m.dirac);
        interior.extend_from_slice(&m.interior);
        off += d;
    }
    Ok(SpectralTripleModel {
        dirac,
        unitary: Unitary::Dense(GeneralMatrix::new(v)),
        comm_norm: models.iter().fold(0.0, |a, m| a.max(m.comm_norm)),
        interior,
        certified: models.iter().all(|m| m.certified),
        kind: ModelKind::DirectSum {
            components: models.iter().map(|m| m.kind.clone()).collect(),
        },
    })
}

/// An arbitrary (D, v) pair. It carries no oracle guarantee and is flagged
/// uncertified; every mode is treated as interior.
pub fn custom_model(dirac: Vec<f64>, v: GeneralMatrix) -> Result<SpectralTripleModel> {
    let n = dirac.len();
    if v.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.shape().0,
        });
    }
    let comm = commutator_with_diagonal(&dirac, v.matrix());
    Ok(SpectralTripleModel {
        comm_norm: operator_norm_raw(&comm),
        interior: vec![true; n],
        dirac,
        unitary: Unitary::Dense(v),
        certified: false,
        kind: ModelKind::Custom,
    })
}

fn commutator_with_diagonal(d: &[f64], v: &CMatrix) -> CMatrix {
    CMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * (d[i] - d[j]))
}

impl SpectralTripleModel {
    pub fn dim(&self) -> usize {
        self.dirac.len()
    }

    pub fn dirac(&self) -> &[f64] {
        &self.dirac
    }

    pub fn dirac_matrix(&self) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&self.dirac)
    }

    pub fn unitary(&self) -> &Unitary {
        &self.unitary
    }

    /// ‖[D, v]‖ of the untruncated operator (|k| for the circle model).
    pub fn comm_norm(&self) -> f64 {
        self.comm_norm
    }

    /// Modes on which the truncated v acts exactly like the untruncated one.
    pub fn interior(&self) -> &[bool] {
        &self.interior
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.interior[i]).collect()
    }

    pub fn certified(&self) -> bool {
        self.certified
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Winding of a circle model.
    pub fn shift(&self) -> Option<i64> {
        match self.unitary {
            Unitary::Shift(k) => Some(k),
            Unitary::Dense(_) => None,
        }
    }

    /// Truncation radius of a circle model.
    pub fn n_max(&self) -> Option<usize> {
        match self.kind {
            ModelKind::Circle { n_max, .. } => Some(n_max),
            _ => None,
        }
    }

    pub fn unitary_matrix(&self) -> GeneralMatrix {
        match &self.unitary {
            Unitary::Dense(v) => v.clone(),
            Unitary::Shift(k) => {
                let n = self.dim();
                let mut m = DMatrix::<f64>::zeros(n, n);
                for i in 0..n {
                    let j = i as i64 + k;
                    if (0..n as i64).contains(&j) {
                        m[(j as usize, i)] = 1.0;
                    }
                }
                GeneralMatrix::from_real(&m)
            }
        }
    }

    /// ‖[D, v]‖ restricted to the interior columns of the truncation.
    pub fn interior_comm_norm(&self) -> f64 {
        let v = self.unitary_matrix();
        let comm = commutator_with_diagonal(&self.dirac, v.matrix());
        let cols = self.interior_indices();
        operator_norm_raw(&comm.select_columns(cols.iter()))
    }

    /// ‖v*v − 1‖ and ‖vv* − 1‖ restricted to the interior modes.
    pub fn interior_unitarity_defect(&self) -> f64 {
        let v = self.unitary_matrix();
        let m = v.matrix();
        let idx = self.interior_indices();
        let vv = (m.adjoint() * m).select_rows(idx.iter()).select_columns(idx.iter());
        let ww = (m * m.adjoint()).select_rows(idx.iter()).select_columns(idx.iter());
        let id = CMatrix::identity(idx.len(), idx.len());
        operator_norm_raw(&(vv - &id)).max(operator_norm_raw(&(ww - id)))
    }
}

/// N ≥ λ + |k| + 1: every compression onto the band |n| ≤ λ agrees with the
/// untruncated operator.
pub fn edge_guard(n_max: usize, lambda: f64, winding: i64) -> bool {
    n_max as f64 >= lambda + winding.abs() as f64 + 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FredholmWitness {
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    /// Largest singular value counted as zero (0 if none).
    pub zero_singular_max: f64,
    /// Smallest singular value counted as nonzero.
    pub nonzero_singular_min: f64,
    /// Index with the zero mode assigned to P instead.
    pub alternate_index: i64,
    pub certified: bool,
}

fn nullity(a: &CMatrix, lo: &mut f64, hi: &mut f64) -> usize {
    if a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let mut count = 0;
    for &s in sv.iter() {
        if s < ORACLE_ZERO {
            count += 1;
            *lo = lo.max(s);
        } else {
            *hi = hi.min(s);
        }
    }
    count
}

fn oracle_index(model: &SpectralTripleModel, positive: impl Fn(f64) -> bool) -> Result<(usize, usize, f64, f64)> {
    // PvP + (1 − P) is block diagonal with an identity block, so only PvP on
    // ran P can carry kernel or cokernel.
    let v = model.unitary_matrix();
    let pos: Vec<usize> = (0..model.dim()).filter(|&i| positive(model.dirac[i])).collect();
    let interior: Vec<usize> = model
        .interior_indices()
        .into_iter()
        .filter(|&i| positive(model.dirac[i]))
        .collect();
    let block = |rows: &[usize], cols: &[usize]| {
        CMatrix::from_fn(rows.len(), cols.len(), |i, j| v.matrix()[(rows[i], cols[j])])
    };
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let ker = nullity(&block(&pos, &interior), &mut lo, &mut hi);
    let coker = nullity(&block(&interior, &pos).adjoint(), &mut lo, &mut hi);
    if ker + coker > 0 && hi < ORACLE_GAP {
        return Err(Error::RankDecisionAmbiguous {
            below: lo,
            above: hi,
        });
    }
    Ok((ker, coker, lo, hi))
}

fn oracle_guard(model: &SpectralTripleModel) -> Result<()> {
    fn check(kind: &ModelKind) -> Result<()> {
        match kind {
            ModelKind::Circle { n_max, winding } => {
                let required = 2 * winding.unsigned_abs() as usize + ORACLE_GUARD;
                if *n_max < required {
                    return Err(Error::TruncationTooSmall {
                        n_max: *n_max,
                        winding: *winding,
                        required,
                    });
                }
                Ok(())
            }
            ModelKind::DirectSum { components } => components.iter().try_for_each(check),
            ModelKind::Custom => Ok(()),
        }
    }
    check(&model.kind)
}

/// Index of PvP + (1 − P), P = χ_{(0,∞)}(D), by counting kernel and cokernel
/// on the truncation.
///
/// The kernel is read off the interior columns and the cokernel off the
/// interior rows, where the truncated operator coincides with the untruncated
/// one. Both conventions for the zero mode are run and must agree.
pub fn fredholm_index_oracle(model: &SpectralTripleModel) -> Result<FredholmWitness> {
    oracle_guard(model)?;
    let (ker, coker, lo, hi) = oracle_index(model, |d| d > 0.0)?;
    let (ker2, coker2, _, _) = oracle_index(model, |d| d >= 0.0)?;
    let index = ker as i64 - coker as i64;
    let alternate_index = ker2 as i64 - coker2 as i64;
    if index != alternate_index {
        return Err(Error::HypothesisViolated(format!(
            "oracle index depends on the zero-mode convention ({index} vs {alternate_index})"
        )));
    }
    Ok(FredholmWitness {
        dim_ker: ker,
        dim_coker: coker,
        index,
        zero_singular_max: lo,
        nonzero_singular_min: hi,
        alternate_index,
        certified: model.certified,
    })
}

#[derive(Clone, Debug)]
pub struct BlockComponent {
    pub weight: f64,
    pub winding: i64,
    pub model: SpectralTripleModel,
}

/// Circle models tagged with positive weights, one per summand of B = ℂᵐ.
#[derive(Clone, Debug)]
pub struct BlockModel {
    pub components: Vec<BlockComponent>,
}

pub fn block_model(weights: &[f64], windings: &[i64], n_max: usize) -> Result<BlockModel> {
    if weights.len() != windings.len() {
        return Err(Error::InvalidWeights(format!(
            "{} weights for {} windings",
            weights.len(),
            windings.len()
        )));
    }
    if weights.is_empty() {
        return Err(Error::InvalidWeights("no components".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidWeights(format!(
            "weight {w} is not strictly positive and finite"
        )));
    }
    let components = weights
        .iter()
        .zip(windings)
        .map(|(&weight, &winding)| {
            Ok(BlockComponent {
                weight,
                winding,
                model: circle_model(n_max, winding)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BlockModel { components })
}

impl BlockModel {
    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Σ w_j · index(k_j) from the component oracles.
    pub fn tau_index_oracle(&self) -> Result<f64> {
        self.components.iter().try_fold(0.0, |acc, c| {
            Ok(acc + c.weight * fredholm_index_oracle(&c.model)?.index as f64)
        })
    }
}
