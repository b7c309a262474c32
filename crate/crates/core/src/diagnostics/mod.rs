//! Verification suites: exact identities, fitted-constant trend checks and the
//! vacuum-energy report.

mod bounds;
mod identities;
mod vacuum;

pub use bounds::*;
pub use identities::*;
pub use vacuum::*;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigh, eigvalsh, Dense};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ExactPass,
    TrendPass,
    Fail,
    Skipped,
}

impl Status {
    pub fn passed(self) -> bool {
        !matches!(self, Status::Fail)
    }
}

/// One measured quantity in a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub status: Status,
    /// Residual for exact checks; worst validation margin for trend checks.
    pub measured: f64,
    pub tolerance: f64,
    pub fitted_constant: Option<f64>,
    pub sweep: Vec<SweepPoint>,
    pub note: String,
}

impl CheckResult {
    pub fn exact(id: &str, residual: f64, tol: f64, note: &str) -> Self {
        let status = if residual <= tol { Status::ExactPass } else { Status::Fail };
        Self {
            id: id.into(),
            status,
            measured: residual,
            tolerance: tol,
            fitted_constant: None,
            sweep: Vec::new(),
            note: note.into(),
        }
    }

    pub fn skipped(id: &str, note: &str) -> Self {
        Self {
            id: id.into(),
            status: Status::Skipped,
            measured: 0.0,
            tolerance: 0.0,
            fitted_constant: None,
            sweep: Vec::new(),
            note: note.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status.passed()
    }
}

/// Slack applied to constants fitted on the smallest instance.
pub const TREND_SLACK: f64 = 1.5;
/// Allowed negativity of a majorant-minus-operand spectrum.
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Identity residual tolerance, max-entry norm.
pub const IDENTITY_TOL: f64 = 1e-10;

/// `W^{-1/2}` for a symmetric positive definite `W`.
pub fn inverse_sqrt(w: &Dense<f64>) -> Result<Dense<f64>> {
    let n = w.nrows();
    if (0..n).all(|i| (0..n).all(|j| i == j || w[(i, j)] == 0.0)) {
        let d: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
        if let Some(bad) = d.iter().find(|&&x| x <= 0.0) {
            return Err(Error::InvalidParameter(format!("majorant not positive definite ({bad})")));
        }
        return Ok(Dense::from_diag(&d.iter().map(|x| 1.0 / x.sqrt()).collect::<Vec<_>>()));
    }
    let ev = eigh(w)?;
    if ev.values[0] <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "majorant not positive definite (λ_min = {})",
            ev.values[0]
        )));
    }
    let d: Vec<f64> = ev.values.iter().map(|&l| 1.0 / l.sqrt()).collect();
    Ok(ev.vectors.matmul(&Dense::from_diag(&d)).matmul(&ev.vectors.transpose()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(a: &Dense<f64>) -> Result<f64> {
    Ok(eigvalsh(&a.symmetrized())?[0])
}

/// Largest eigenvalue of `W^{-1/2} X W^{-1/2}`.
pub fn relative_max(x: &Dense<f64>, w_isqrt: &Dense<f64>) -> Result<f64> {
    let m = x.congruence(w_isqrt).symmetrized();
    Ok(*eigvalsh(&m)?.last().expect("nonempty"))
}

/// Operand shapes of an operator inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundShape {
    /// `X ≤ C W`.
    Upper,
    /// `±X ≤ C W`.
    TwoSided,
    /// `±iK ≤ C W` for real antisymmetric `K`.
    Imaginary,
}

/// One sweep point of an operator inequality.
pub struct BoundInstance {
    pub n: usize,
    pub operand: Dense<f64>,
    pub majorant: Dense<f64>,
}

/// Best constant for one instance.
pub fn local_constant(shape: BoundShape, b: &BoundInstance) -> Result<f64> {
    let wi = inverse_sqrt(&b.majorant)?;
    match shape {
        BoundShape::Upper => relative_max(&b.operand, &wi),
        BoundShape::TwoSided => {
            Ok(relative_max(&b.operand, &wi)?.max(relative_max(&b.operand.scaled(-1.0), &wi)?))
        }
        BoundShape::Imaginary => {
            let m = b.operand.congruence(&wi);
            let g = m.transpose().matmul(&m).symmetrized();
            Ok(eigvalsh(&g)?.last().expect("nonempty").max(0.0).sqrt())
        }
    }
}

/// Smallest eigenvalue of `C W ∓ X` (both signs for two-sided shapes). For the
/// imaginary shape `C W − iK` is Hermitian; its spectrum is read off the real
/// embedding `[[CW, K], [−K, CW]]`, which doubles every eigenvalue.
pub fn margin(shape: BoundShape, c: f64, b: &BoundInstance) -> Result<f64> {
    let cw = b.majorant.scaled(c);
    match shape {
        BoundShape::Upper => min_eig(&cw.sub(&b.operand)),
        BoundShape::TwoSided => Ok(min_eig(&cw.sub(&b.operand))?.min(min_eig(&cw.add(&b.operand))?)),
        BoundShape::Imaginary => {
            let n = cw.nrows();
            let emb = Dense::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
                (true, true) => cw[(i, j)],
                (false, false) => cw[(i - n, j - n)],
                (true, false) => b.operand[(i, j - n)],
                (false, true) => -b.operand[(i - n, j)],
            });
            min_eig(&emb)
        }
    }
}

/// Fit on the first instance, then require `λ_min(1.5·C·W ∓ X) ≥ −1e-8` on all.
pub fn trend_check(id: &str, note: &str, shape: BoundShape, points: &[BoundInstance]) -> Result<CheckResult> {
    let Some(first) = points.first() else {
        return Ok(CheckResult::skipped(id, "empty sweep"));
    };
    let scale = points.iter().map(|p| p.operand.max_abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(CheckResult::skipped(id, &format!("{note}; operand identically zero")));
    }
    let fitted = local_constant(shape, first)?.max(0.0);
    let mut sweep = Vec::with_capacity(points.len());
    let mut worst = f64::INFINITY;
    for p in points {
        sweep.push(SweepPoint {
            n: p.n,
            value: local_constant(shape, p)?,
        });
        worst = worst.min(margin(shape, TREND_SLACK * fitted, p)?);
    }
    let status = if worst >= -POSITIVITY_TOL { Status::TrendPass } else { Status::Fail };
    Ok(CheckResult {
        id: id.into(),
        status,
        measured: worst,
        tolerance: POSITIVITY_TOL,
        fitted_constant: Some(fitted),
        sweep,
        note: note.into(),
    })
}

/// Ratio-type trend: fit `C = max ratio` on the first sweep point, require all ratios ≤ 1.5·C.
pub fn ratio_trend(id: &str, note: &str, ratios: &[(usize, Vec<f64>)]) -> CheckResult {
    let worst_at = |r: &[f64]| r.iter().cloned().fold(0.0, f64::max);
    let Some((_, first)) = ratios.first() else {
        return CheckResult::skipped(id, "empty sweep");
    };
    let fitted = worst_at(first);
    let sweep: Vec<SweepPoint> = ratios
        .iter()
        .map(|(n, r)| SweepPoint { n: *n, value: worst_at(r) })
        .collect();
    if sweep.iter().all(|p| p.value == 0.0) {
        return CheckResult::skipped(id, &format!("{note}; operand identically zero"));
    }
    let bad = sweep.iter().any(|p| !(p.value <= TREND_SLACK * fitted));
    let measured = sweep.iter().map(|p| p.value / fitted).fold(0.0, f64::max);
    CheckResult {
        id: id.into(),
        status: if bad { Status::Fail } else { Status::TrendPass },
        measured,
        tolerance: TREND_SLACK,
        fitted_constant: Some(fitted),
        sweep,
        note: note.into(),
    }
}
