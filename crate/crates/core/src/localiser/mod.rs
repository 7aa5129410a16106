//! Spectral truncation onto the low band |D ⊕ D| ≤ λ, the spectral localiser
//! L_{κ,λ} = [[κD, v], [v*, −κD]] on that band, and its signature.
//!
//! The doubled space is indexed in block order (first copy, then second
//! copy). Index sets of a [`SpectralDecomposition`] list each retained mode as
//! the pair (first copy, second copy), in mode order, so compressions come out
//! interleaved; for a shift by k this keeps the localiser inside a band of
//! half-width 2|k| + 1.

mod certificates;

pub use certificates::{
    block_decompose, congruence_check, diagonal_reduction_check, diagonal_reduction_lattice,
    offdiagonal_certificate, offdiagonal_certificate_lattice, BlockDecomposition, CongruenceReport,
    DiagonalReduction, OffDiagonalCertificate,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{ModelKind, SpectralTripleModel};
use crate::operators::{
    compress_hermitian, eig, BandedSymmetric, CMatrix, HermitianMatrix, Layout, C64, DENSE_LIMIT,
    GAP_TOL,
};
use crate::pairing::{default_functions, ShiftLattice, DEFAULT_R};

/// Relative zero window of the signature: |eigenvalue| ≤ ZERO_TOL_REL·‖H‖ is
/// treated as a zero eigenvalue.
pub const ZERO_TOL_REL: f64 = 1e-8;
/// ε + δ must stay below this for certification.
pub const WINDOW: f64 = 1.0 / 400.0;
/// Automatic t and λ sit this factor above their thresholds.
pub const AUTO_MARGIN: f64 = 1.01;

#[derive(Clone, Debug, Serialize)]
pub struct SpectralDecomposition {
    pub lambda: f64,
    /// Dimension of the doubled space.
    pub dim: usize,
    pub low: Vec<usize>,
    pub high: Vec<usize>,
}

impl SpectralDecomposition {
    pub fn low_dim(&self) -> usize {
        self.low.len()
    }
}

/// Splits the doubled space at |eigenvalue of D ⊕ D| = λ.
pub fn spectral_decompose(model: &SpectralTripleModel, lambda: f64) -> Result<SpectralDecomposition> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
    }
    let d = model.dirac();
    let n = d.len();
    let mut low = Vec::new();
    let mut high = Vec::new();
    for (i, &x) in d.iter().enumerate() {
        let dist = (x.abs() - lambda).abs();
        if dist < GAP_TOL {
            return Err(Error::BoundaryEigenvalue {
                eigenvalue: x.abs(),
                boundary: lambda,
                distance: dist,
            });
        }
        let side = if x.abs() < lambda { &mut low } else { &mut high };
        side.push(i);
        side.push(n + i);
    }
    Ok(SpectralDecomposition {
        lambda,
        dim: 2 * n,
        low,
        high,
    })
}

/// λ moved to the nearest half-integer at or below, for integer spectra.
pub fn snap_half_integer(lambda: f64) -> f64 {
    lambda.floor() + 0.5
}

fn integer_spectrum(model: &SpectralTripleModel) -> bool {
    model.dirac().iter().all(|x| x.fract() == 0.0)
}

/// The band of a localiser, stored dense or as a real symmetric band.
#[derive(Clone, Debug)]
pub enum LocaliserMatrix {
    Dense(HermitianMatrix),
    Banded(BandedSymmetric),
}

#[derive(Clone, Debug)]
pub struct Localiser {
    pub kappa: f64,
    pub lambda: f64,
    pub matrix: LocaliserMatrix,
    /// Smallest |eigenvalue| certified by the last signature run.
    pub gap: Option<f64>,
}

impl Localiser {
    pub fn dim(&self) -> usize {
        match &self.matrix {
            LocaliserMatrix::Dense(h) => h.dim(),
            LocaliserMatrix::Banded(b) => b.dim(),
        }
    }

    pub fn layout(&self) -> Layout {
        match &self.matrix {
            LocaliserMatrix::Dense(h) => h.layout(),
            LocaliserMatrix::Banded(b) => Layout::Banded {
                bandwidth: b.bandwidth(),
            },
        }
    }

    pub fn to_hermitian(&self) -> Result<HermitianMatrix> {
        match &self.matrix {
            LocaliserMatrix::Dense(h) => Ok(h.clone()),
            LocaliserMatrix::Banded(b) => b.to_hermitian(),
        }
    }
}

/// Builds the compression of [[κD, v], [v*, −κD]] onto the low band. Circle
/// models produce a band matrix, anything else a dense one.
pub fn build_localiser(model: &SpectralTripleModel, kappa: f64, lambda: f64) -> Result<Localiser> {
    let sd = spectral_decompose(model, lambda)?;
    if let (Some(k), ModelKind::Circle { n_max, .. }) = (model.shift(), model.kind()) {
        let r = (lambda.floor() as i64).min(*n_max as i64);
        let lat = ShiftLattice::new(k, 1.0, -r, r, default_functions());
        return Ok(Localiser {
            kappa,
            lambda,
            matrix: LocaliserMatrix::Banded(lat.localiser(kappa)),
            gap: None,
        });
    }
    let n = model.dim();
    crate::operators::ensure_dense(sd.low_dim())?;
    let v = model.unitary_matrix();
    let vm = v.matrix();
    let d = model.dirac();
    let full = CMatrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) if i == j => C64::new(kappa * d[i], 0.0),
        (false, false) if i == j => C64::new(-kappa * d[i - n], 0.0),
        (true, false) => vm[(i, j - n)],
        (false, true) => vm[(j, i - n)].conj(),
        _ => C64::new(0.0, 0.0),
    });
    let full = HermitianMatrix::new(full)?;
    Ok(Localiser {
        kappa,
        lambda,
        matrix: LocaliserMatrix::Dense(compress_hermitian(&full, &sd.low)?),
        gap: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignaturePath {
    Dense,
    Banded,
}

#[derive(Clone, Debug, Serialize)]
pub struct SignatureResult {
    pub sig: i64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Dense: smallest |eigenvalue|. Banded: largest ρ with no eigenvalue in
    /// [−ρ, ρ) certified by inertia counts (a lower bound for the gap).
    pub gap: f64,
    pub zero_tol: f64,
    pub path: SignaturePath,
}

/// Signature by dense eigen-count; eigenvalues within `zero_tol` of zero
/// (default 1e−8·‖H‖) are an error.
pub fn signature(h: &HermitianMatrix, zero_tol: Option<f64>) -> Result<SignatureResult> {
    let vals = if h.is_diagonal() {
        let mut d = h.diagonal();
        d.sort_by(f64::total_cmp);
        d
    } else {
        eig(h)?.eigenvalues
    };
    let norm = vals.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let zero_tol = zero_tol.unwrap_or(ZERO_TOL_REL * norm);
    let gap = vals.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
    if gap <= zero_tol {
        return Err(Error::SingularMatrix { gap, zero_tol });
    }
    let n_pos = vals.iter().filter(|&&x| x > 0.0).count();
    let n_neg = vals.len() - n_pos;
    Ok(SignatureResult {
        sig: n_pos as i64 - n_neg as i64,
        n_pos,
        n_neg,
        gap,
        zero_tol,
        path: SignaturePath::Dense,
    })
}

/// (#eigenvalues > ρ, #eigenvalues < −ρ), or `None` when an eigenvalue lies
/// in [−ρ, ρ). ρ is nudged when a leading block happens to be singular.
fn counts_at(b: &BandedSymmetric, rho: f64) -> Result<Option<(usize, usize)>> {
    let mut last = None;
    for attempt in 0..6 {
        let r = rho * (1.0 + 1e-3 * attempt as f64);
        match (b.inertia_shifted(r), b.inertia_shifted(-r)) {
            (Ok(up), Ok(down)) => {
                let clear = up.negative == down.negative && up.zero == 0 && down.zero == 0;
                return Ok(clear.then_some((up.positive, down.negative)));
            }
            (Err(e), _) | (_, Err(e)) => last = Some(e),
        }
    }
    Err(last.unwrap_or(Error::PivotBreakdown { row: 0, pivot: 0.0 }))
}

/// Signature of a real symmetric band matrix from two LDLᵀ inertia runs at
/// ±ρ, ρ = zero_tol (default 1e−8·Gershgorin bound). The runs agree exactly
/// when no eigenvalue lies in [−ρ, ρ); ρ is then doubled while they keep
/// agreeing, which certifies the reported gap.
pub fn signature_banded(b: &BandedSymmetric, zero_tol: Option<f64>) -> Result<SignatureResult> {
    let scale = b.gershgorin_radius();
    let zero_tol = zero_tol.unwrap_or(ZERO_TOL_REL * scale).max(f64::MIN_POSITIVE);
    let n = b.dim();
    let (n_pos, n_neg) = match counts_at(b, zero_tol)? {
        Some((p, m)) if p + m == n => (p, m),
        _ => {
            return Err(Error::SingularMatrix {
                gap: zero_tol,
                zero_tol,
            })
        }
    };
    let mut gap = zero_tol;
    while 2.0 * gap <= scale {
        match counts_at(b, 2.0 * gap) {
            Ok(Some((p, m))) if p == n_pos && m == n_neg => gap *= 2.0,
            _ => break,
        }
    }
    Ok(SignatureResult {
        sig: n_pos as i64 - n_neg as i64,
        n_pos,
        n_neg,
        gap,
        zero_tol,
        path: SignaturePath::Banded,
    })
}

/// Signature of a localiser along its storage path; records the gap.
pub fn localiser_signature(loc: &mut Localiser, zero_tol: Option<f64>) -> Result<SignatureResult> {
    let r = match &loc.matrix {
        LocaliserMatrix::Dense(h) => signature(h, zero_tol)?,
        LocaliserMatrix::Banded(b) => signature_banded(b, zero_tol)?,
    };
    loc.gap = Some(r.gap);
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    pub eps: f64,
    pub delta: f64,
    pub comm_norm: f64,
    pub r: f64,
    /// 2·ε⁻¹·R·‖[D, v]‖
    pub t_min: f64,
    /// t_min·δ⁻¹
    pub lambda_min: f64,
    pub window_ok: bool,
}

pub fn thresholds(eps: f64, delta: f64, comm_norm: f64, r: f64) -> Result<ThresholdReport> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter("eps and delta must be positive".into()));
    }
    let t_min = 2.0 * r * comm_norm / eps;
    Ok(ThresholdReport {
        eps,
        delta,
        comm_norm,
        r,
        t_min,
        lambda_min: t_min / delta,
        window_ok: eps + delta < WINDOW,
    })
}

#[derive(Clone, Debug, Default)]
pub struct HalfSignatureOptions {
    pub t: Option<f64>,
    pub lambda: Option<f64>,
    /// Refuse to run when ε + δ ≥ 1/400.
    pub certify: bool,
    /// Skip the certificates (they need a circle model or a dense pair).
    pub skip_certificates: bool,
    pub zero_tol: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificates {
    pub offdiagonal: Option<OffDiagonalCertificate>,
    pub diagonal_reduction: Option<DiagonalReduction>,
    /// Why the reduction check did not run (its window hypothesis failed).
    pub diagonal_reduction_skipped: Option<String>,
    pub t_above_threshold: bool,
    pub lambda_above_threshold: bool,
    pub window_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HalfSignatureReport {
    pub t: f64,
    pub kappa: f64,
    pub lambda: f64,
    /// λ before snapping to a half-integer, when it was moved.
    pub lambda_requested: Option<f64>,
    pub dim: usize,
    pub layout: Layout,
    pub signature: SignatureResult,
    pub index: i64,
    pub thresholds: ThresholdReport,
    pub certificates: Certificates,
}

/// ½·sig(L_{1/t, λ}). Missing t and λ are set to 1.01× their thresholds; λ
/// is snapped to a half-integer for integer spectra.
pub fn half_signature_index(
    model: &SpectralTripleModel,
    eps: f64,
    delta: f64,
    opts: &HalfSignatureOptions,
) -> Result<HalfSignatureReport> {
    let th = thresholds(eps, delta, model.comm_norm(), DEFAULT_R)?;
    if opts.certify && !th.window_ok {
        return Err(Error::WindowViolated { sum: eps + delta });
    }
    let t = opts.t.unwrap_or(AUTO_MARGIN * th.t_min).max(1.0);
    let requested = opts.lambda.unwrap_or(AUTO_MARGIN * t / delta);
    let lambda = if integer_spectrum(model) && requested.fract() != 0.5 {
        snap_half_integer(requested)
    } else {
        requested
    };
    let kappa = 1.0 / t;
    let mut loc = build_localiser(model, kappa, lambda)?;
    let sig = localiser_signature(&mut loc, opts.zero_tol)?;
    if sig.sig % 2 != 0 {
        return Err(Error::OddSignature { signature: sig.sig });
    }
    let mut certificates = Certificates {
        offdiagonal: None,
        diagonal_reduction: None,
        diagonal_reduction_skipped: None,
        t_above_threshold: t > th.t_min,
        lambda_above_threshold: lambda > t / delta,
        window_ok: th.window_ok,
    };
    if !opts.skip_certificates {
        if let Some(k) = model.shift() {
            let funcs = default_functions();
            certificates.offdiagonal =
                Some(offdiagonal_certificate_lattice(k, t, lambda, funcs, Some(delta))?);
            match diagonal_reduction_lattice(k, t, lambda, funcs) {
                Ok(r) => certificates.diagonal_reduction = Some(r),
                Err(Error::HypothesisViolated(msg)) => certificates.diagonal_reduction_skipped = Some(msg),
                Err(e) => return Err(e),
            }
        } else if 2 * model.dim() <= DENSE_LIMIT {
            let frame = crate::pairing::build_frame(model, t, default_functions())?;
            let pair = crate::pairing::build_model_pair(&frame)?;
            let sd = spectral_decompose(model, lambda)?;
            let mut off = offdiagonal_certificate(&pair, &sd)?;
            off.within_delta = Some(off.lhs <= delta);
            certificates.offdiagonal = Some(off);
            let eps_e = pair.e.defect();
            let q = certificates::q_defect(&pair.e, &sd)?;
            match diagonal_reduction_check(
                &pair.e,
                &sd,
                eps_e * (1.0 + 1e-9) + f64::MIN_POSITIVE,
                q * (1.0 + 1e-9) + f64::MIN_POSITIVE,
            ) {
                Ok(r) => certificates.diagonal_reduction = Some(r),
                Err(Error::HypothesisViolated(msg)) => certificates.diagonal_reduction_skipped = Some(msg),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(HalfSignatureReport {
        t,
        kappa,
        lambda,
        lambda_requested: (lambda != requested).then_some(requested),
        dim: loc.dim(),
        layout: loc.layout(),
        index: sig.sig / 2,
        signature: sig,
        thresholds: th,
        certificates,
    })
}
