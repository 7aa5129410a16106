//! The representatives of a shift model on a window of the untruncated
//! lattice ℤ, stored as real symmetric band matrices.
//!
//! The doubled space is interleaved: mode n of the first copy sits at index
//! 2(n − lo), mode n of the second copy right after it. A shift by k then
//! couples indices at most 2|k| + 1 apart. Every entry on the window is the
//! corresponding entry of the untruncated operator; products are formed
//! before compressing, so e.g. the compression of e² − e is exact.

use serde::Serialize;

use super::{LocaliserFunctions, DEFAULT_R};
use crate::error::Result;
use crate::operators::BandedSymmetric;

/// Relative accuracy of band-matrix norms.
pub const NORM_REL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct ShiftLattice {
    k: i64,
    t: f64,
    lo: i64,
    hi: i64,
    funcs: LocaliserFunctions,
}

impl ShiftLattice {
    /// Modes n ∈ [lo, hi].
    pub fn new(k: i64, t: f64, lo: i64, hi: i64, funcs: LocaliserFunctions) -> Self {
        assert!(lo <= hi, "empty lattice window");
        Self { k, t, lo, hi, funcs }
    }

    pub fn winding(&self) -> i64 {
        self.k
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn range(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn dim(&self) -> usize {
        2 * (self.hi - self.lo + 1) as usize
    }

    pub fn bandwidth(&self) -> usize {
        2 * self.k.unsigned_abs() as usize + 1
    }

    pub fn index(&self, n: i64, first_copy: bool) -> usize {
        2 * (n - self.lo) as usize + usize::from(!first_copy)
    }

    /// (mode, belongs to the first copy)
    pub fn mode(&self, i: usize) -> (i64, bool) {
        (self.lo + (i / 2) as i64, i.is_multiple_of(2))
    }

    fn x(&self, n: i64) -> f64 {
        n as f64 / self.t
    }

    /// Lower-band entry builder for operators of the form
    /// [[a(n), b(m, n)], [b*, d(n)]], b supported on m = n + shift.
    fn doubled(
        &self,
        shift: i64,
        diag: impl Fn(i64, bool) -> f64,
        link: impl Fn(i64, i64) -> f64,
    ) -> BandedSymmetric {
        BandedSymmetric::from_fn(self.dim(), self.bandwidth(), |i, j| {
            let (ni, ui) = self.mode(i);
            if i == j {
                return diag(ni, ui);
            }
            let (nj, uj) = self.mode(j);
            match (ui, uj) {
                (true, false) if ni == nj + shift => link(ni, nj),
                (false, true) if nj == ni + shift => link(nj, ni),
                _ => 0.0,
            }
        })
    }

    /// e_t = [[s², √cs·v·√cs], [√cs·v*·√cs, c²]].
    pub fn e(&self) -> BandedSymmetric {
        let f = self.funcs;
        self.doubled(
            self.k,
            |n, up| {
                let x = self.x(n);
                if up {
                    (f.s)(x).powi(2)
                } else {
                    (f.c)(x).powi(2)
                }
            },
            |m, n| (f.cs(self.x(m)) * f.cs(self.x(n))).sqrt(),
        )
    }

    /// Θ_t f Θ_t* = [[s², cs], [cs, c²]].
    pub fn theta_f_theta(&self) -> BandedSymmetric {
        let f = self.funcs;
        self.doubled(
            0,
            |n, up| {
                let x = self.x(n);
                if up {
                    (f.s)(x).powi(2)
                } else {
                    (f.c)(x).powi(2)
                }
            },
            |n, _| f.cs(self.x(n)),
        )
    }

    /// [[κD, v], [v*, −κD]].
    pub fn localiser(&self, kappa: f64) -> BandedSymmetric {
        self.doubled(
            self.k,
            |n, up| if up { kappa * n as f64 } else { -kappa * n as f64 },
            |_, _| 1.0,
        )
    }

    /// Diagonal of (1 + t⁻²D²)^{−1/4} on the doubled space.
    pub fn congruence_scaling(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let x = self.x(self.mode(i).0);
                (1.0 + x * x).powf(-0.25)
            })
            .collect()
    }
}

/// Radius of the window on which the untruncated defect is measured.
pub fn lattice_radius(t: f64, k: i64) -> i64 {
    (32.0 * t).ceil() as i64 + 4 * k.abs() + 16
}

/// ‖e_t² − e_t‖ of the untruncated shift model, compressed to |n| ≤ radius.
pub fn lattice_defect(k: i64, t: f64, funcs: LocaliserFunctions, radius: i64) -> Result<f64> {
    let pad = k.abs();
    let lat = ShiftLattice::new(k, t, -radius - pad, radius + pad, funcs);
    let e = lat.e();
    let d = e.square().sub(&e)?;
    let d = d.masked(|i| lat.mode(i).0.abs() <= radius);
    d.norm_upper(NORM_REL_TOL)
}

/// ‖e_t − ě_t‖ of the untruncated shift model.
///
/// The difference has off-diagonal blocks with single diagonals
/// √(cs(n+k)cs(n)) − cs(n+k) and √(cs(n)cs(n+k)) − cs(n); its norm is the
/// larger supremum.
pub fn lattice_distance(k: i64, t: f64, funcs: LocaliserFunctions, radius: i64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut sup = 0.0_f64;
    for n in -radius..=radius {
        let a = funcs.cs((n + k) as f64 / t);
        let b = funcs.cs(n as f64 / t);
        let g = (a * b).sqrt();
        sup = sup.max((g - a).abs()).max((g - b).abs());
    }
    sup
}

#[derive(Clone, Debug, Serialize)]
pub struct LawCheck {
    pub t: f64,
    pub winding: i64,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// defect(e_t) ≤ 2R·t⁻¹|k| on the untruncated shift model.
pub fn defect_law(k: i64, t: f64, funcs: LocaliserFunctions) -> Result<LawCheck> {
    let value = lattice_defect(k, t, funcs, lattice_radius(t, k))?;
    let bound = 2.0 * DEFAULT_R * k.abs() as f64 / t;
    Ok(LawCheck {
        t,
        winding: k,
        value,
        bound,
        pass: value <= bound + 1e-10,
    })
}

/// ‖e_t − ě_t‖ ≤ (√2/2)·R·t⁻¹|k| on the untruncated shift model.
pub fn distance_law(k: i64, t: f64, funcs: LocaliserFunctions) -> LawCheck {
    let value = lattice_distance(k, t, funcs, lattice_radius(t, k));
    let bound = std::f64::consts::FRAC_1_SQRT_2 * DEFAULT_R * k.abs() as f64 / t;
    LawCheck {
        t,
        winding: k,
        value,
        bound,
        pass: value <= bound + 1e-10,
    }
}
