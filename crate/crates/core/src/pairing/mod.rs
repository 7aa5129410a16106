//! The quasi-projection picture of the odd index pairing: the frame
//! c_t = c(t⁻¹D), s_t = s(t⁻¹D), the representatives e_t, ě_t, f_t, Θ_t, and
//! the commutator estimates that control them.

mod bounds;
mod lattice;

pub use bounds::{
    asymptotic_equivalence_report, c_s_constant, commutator_bound_cs,
    commutator_bound_resolvent, shift_commutator_sup, weighted_f_commutator_bound,
    AsymptoticReport, AsymptoticRow, CommutatorCheck, CsCommutatorCheck,
};
pub use lattice::{
    distance_law, lattice_defect, lattice_distance, lattice_radius, defect_law, LawCheck, NORM_REL_TOL,
    ShiftLattice,
};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ktheory::{QuasiIdempotent, QuasiProjection};
use crate::models::SpectralTripleModel;
use crate::operators::{ensure_dense, operator_norm_raw, CMatrix, GeneralMatrix, HermitianMatrix, C64};

/// The commutator constant R for the default functions.
pub const DEFAULT_R: f64 = 2.0;
/// Interior unitarity defect tolerated by `build_pair`.
pub const UNITARY_TOL: f64 = 1e-10;

/// c(x) = √(½ − ½x(1+x²)^{−1/2}), evaluated without cancellation for x > 0.
pub fn default_c(x: f64) -> f64 {
    if x > 0.0 {
        let r = x.hypot(1.0);
        (0.5 / (r * (r + x))).sqrt()
    } else {
        let r = x.hypot(1.0);
        (0.5 - 0.5 * x / r).sqrt()
    }
}

/// s(x) = c(−x).
pub fn default_s(x: f64) -> f64 {
    default_c(-x)
}

/// c(x)·s(x) = ½(1+x²)^{−1/2} for the default pair.
pub fn default_cs(x: f64) -> f64 {
    0.5 / x.hypot(1.0)
}

/// How c·s is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductIdentity {
    /// c·s = ½(1+x²)^{−1/2}
    HalfInverseSqrt,
    /// c·s computed as a product
    Pointwise,
}

/// A pair c, s with c² + s² = 1, s rising from 0 to 1 and c falling from 1 to 0.
#[derive(Clone, Copy, Debug)]
pub struct LocaliserFunctions {
    pub c: fn(f64) -> f64,
    pub s: fn(f64) -> f64,
    pub product: ProductIdentity,
}

pub fn default_functions() -> LocaliserFunctions {
    LocaliserFunctions {
        c: default_c,
        s: default_s,
        product: ProductIdentity::HalfInverseSqrt,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionCheck {
    pub pythagoras_max: f64,
    pub monotone: bool,
    pub limits: [f64; 4],
    pub pass: bool,
}

impl LocaliserFunctions {
    pub fn cs(&self, x: f64) -> f64 {
        match self.product {
            ProductIdentity::HalfInverseSqrt => default_cs(x),
            ProductIdentity::Pointwise => (self.c)(x) * (self.s)(x),
        }
    }

    /// c² + s² = 1 and monotonicity on a 10⁴-point grid over [−10⁴, 10⁴],
    /// limits at ±10⁸.
    pub fn check(&self) -> FunctionCheck {
        let n = 10_000;
        let mut pythagoras_max = 0.0_f64;
        let mut monotone = true;
        let (mut pc, mut ps) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let x = -1e4 + 2e4 * i as f64 / (n - 1) as f64;
            let (c, s) = ((self.c)(x), (self.s)(x));
            pythagoras_max = pythagoras_max.max((c * c + s * s - 1.0).abs());
            monotone &= c <= pc && s >= ps;
            pc = c;
            ps = s;
        }
        let limits = [(self.c)(-1e8), (self.s)(-1e8), (self.c)(1e8), (self.s)(1e8)];
        let limits_ok = (limits[0] - 1.0).abs() < 1e-7
            && limits[1].abs() < 1e-7
            && limits[2].abs() < 1e-7
            && (limits[3] - 1.0).abs() < 1e-7;
        FunctionCheck {
            pythagoras_max,
            monotone,
            limits,
            pass: pythagoras_max <= 1e-14 && monotone && limits_ok,
        }
    }
}

/// ε-window for the quasi-projection stage: (8/237)(√1393 − 34) ≈ 0.1122.
pub fn epsilon_window() -> f64 {
    8.0 / 237.0 * (1393.0_f64.sqrt() - 34.0)
}

/// The functional calculus of t⁻¹D entering e_t.
#[derive(Clone, Debug)]
pub struct AsymptoticFrame {
    t: f64,
    model: SpectralTripleModel,
    funcs: LocaliserFunctions,
    c: Vec<f64>,
    s: Vec<f64>,
    sqrt_cs: Vec<f64>,
}

pub fn build_frame(
    model: &SpectralTripleModel,
    t: f64,
    funcs: LocaliserFunctions,
) -> Result<AsymptoticFrame> {
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t = {t} must be >= 1")));
    }
    let x: Vec<f64> = model.dirac().iter().map(|d| d / t).collect();
    Ok(AsymptoticFrame {
        t,
        model: model.clone(),
        funcs,
        c: x.iter().map(|&x| (funcs.c)(x)).collect(),
        s: x.iter().map(|&x| (funcs.s)(x)).collect(),
        sqrt_cs: x.iter().map(|&x| funcs.cs(x).sqrt()).collect(),
    })
}

impl AsymptoticFrame {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn model(&self) -> &SpectralTripleModel {
        &self.model
    }

    pub fn functions(&self) -> LocaliserFunctions {
        self.funcs
    }

    pub fn c_t(&self) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&self.c)
    }

    pub fn s_t(&self) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&self.s)
    }

    pub fn sqrt_cs_t(&self) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&self.sqrt_cs)
    }

    pub fn c_diag(&self) -> &[f64] {
        &self.c
    }

    pub fn s_diag(&self) -> &[f64] {
        &self.s
    }

    pub fn sqrt_cs_diag(&self) -> &[f64] {
        &self.sqrt_cs
    }
}

/// e_t, ě_t, f_t and Θ_t on the truncated doubled space, in block order
/// (first copy, then second copy).
#[derive(Clone, Debug)]
pub struct PairRepresentative {
    pub t: f64,
    pub e: QuasiProjection,
    pub e_check: QuasiIdempotent,
    pub f: HermitianMatrix,
    pub theta: GeneralMatrix,
}

/// Assembles the representatives from the frame's model unitary.
pub fn build_model_pair(frame: &AsymptoticFrame) -> Result<PairRepresentative> {
    build_pair(frame, &frame.model.unitary_matrix())
}

pub fn build_pair(frame: &AsymptoticFrame, v: &GeneralMatrix) -> Result<PairRepresentative> {
    let n = frame.model.dim();
    if v.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.shape().0,
        });
    }
    ensure_dense(2 * n)?;
    let defect = interior_unitarity_defect(v.matrix(), frame.model.interior());
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary {
            defect,
            tol: UNITARY_TOL,
        });
    }
    let vm = v.matrix();
    let (c, s, r) = (&frame.c, &frame.s, &frame.sqrt_cs);
    let mut e = CMatrix::zeros(2 * n, 2 * n);
    let mut ec = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        e[(i, i)] = C64::new(s[i] * s[i], 0.0);
        e[(n + i, n + i)] = C64::new(c[i] * c[i], 0.0);
        ec[(i, i)] = e[(i, i)];
        ec[(n + i, n + i)] = e[(n + i, n + i)];
        for j in 0..n {
            let x = vm[(i, j)];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            let a = x * (r[i] * r[j]);
            e[(i, n + j)] = a;
            e[(n + j, i)] = a.conj();
            ec[(i, n + j)] = x * (r[i] * r[i]);
            // (cs v*)_{ji} = cs_j · conj(v_ij)
            ec[(n + j, i)] = x.conj() * (r[j] * r[j]);
        }
    }
    let mut f = vec![0.0; 2 * n];
    f[n..].iter_mut().for_each(|x| *x = 1.0);
    let mut th = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        th[(i, i)] = c[i];
        th[(i, n + i)] = s[i];
        th[(n + i, i)] = -s[i];
        th[(n + i, n + i)] = c[i];
    }
    Ok(PairRepresentative {
        t: frame.t,
        e: QuasiProjection::new(HermitianMatrix::new(e)?)?,
        e_check: QuasiIdempotent::new(GeneralMatrix::new(ec))?,
        f: HermitianMatrix::from_real_diagonal(&f),
        theta: GeneralMatrix::from_real(&th),
    })
}

fn interior_unitarity_defect(v: &CMatrix, interior: &[bool]) -> f64 {
    let idx: Vec<usize> = (0..interior.len()).filter(|&i| interior[i]).collect();
    if idx.is_empty() {
        return 0.0;
    }
    let vv = (v.adjoint() * v).select_rows(idx.iter()).select_columns(idx.iter());
    let ww = (v * v.adjoint()).select_rows(idx.iter()).select_columns(idx.iter());
    let id = CMatrix::identity(idx.len(), idx.len());
    operator_norm_raw(&(vv - &id)).max(operator_norm_raw(&(ww - id)))
}
