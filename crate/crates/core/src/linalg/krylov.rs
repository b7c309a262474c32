//! Exponential action `e^{sA} x` by restarted Arnoldi with adaptive substeps.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{axpy, dot, expm, norm2, Dense, LinearOperator};

#[derive(Clone, Copy, Debug)]
pub struct ExpmvOptions<T> {
    /// Absolute tolerance relative to `‖x‖`.
    pub tol: T,
    pub krylov_dim: usize,
    pub max_steps: usize,
}

impl<T: Real> Default for ExpmvOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::c(1e-10),
            krylov_dim: 30,
            max_steps: 100_000,
        }
    }
}

impl<T: Real> ExpmvOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExpmvReport {
    pub steps: usize,
    pub matvecs: usize,
    /// Sum of local error estimates, relative to `‖x‖`.
    pub error_estimate: f64,
}

struct Arnoldi<T> {
    basis: Vec<Vec<T>>,
    h: Dense<T>,
    /// Subdiagonal entry past the last column; zero on breakdown.
    tail: T,
    m: usize,
}

fn arnoldi<T: Real, A: LinearOperator<T>>(a: &A, v0: &[T], beta: T, m_max: usize) -> Arnoldi<T> {
    let n = v0.len();
    let m_max = m_max.min(n).max(1);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(m_max + 1);
    basis.push(v0.iter().map(|&x| x / beta).collect());
    let mut h = Dense::<T>::zeros(m_max, m_max);
    let mut w = vec![T::zero(); n];
    let mut scale = T::zero();
    for j in 0..m_max {
        a.apply_into(&basis[j], &mut w);
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                h[(i, j)] += c;
                axpy(-c, v, &mut w);
            }
        }
        let hn = norm2(&w);
        for i in 0..=j {
            scale = scale.max(h[(i, j)].abs());
        }
        let breakdown = hn <= T::epsilon() * T::c(16.0) * scale.max(T::min_positive_value());
        if breakdown || j + 1 == m_max {
            let m = j + 1;
            let tail = if breakdown { T::zero() } else { hn };
            if !breakdown {
                basis.push(w.iter().map(|&x| x / hn).collect());
            }
            return Arnoldi {
                basis,
                h: Dense::from_fn(m, m, |r, c| h[(r, c)]),
                tail,
                m,
            };
        }
        h[(j + 1, j)] = hn;
        basis.push(w.iter().map(|&x| x / hn).collect());
    }
    unreachable!("loop returns at the last column")
}

/// `exp(τH) e₁` and the local error estimate `tail·|τ φ₁(τH) e₁|_m`.
fn small_step<T: Real>(kr: &Arnoldi<T>, tau: T) -> (Vec<T>, T) {
    let m = kr.m;
    let aug = Dense::from_fn(m + 1, m + 1, |r, c| {
        if r < m && c < m {
            tau * kr.h[(r, c)]
        } else if c == m && r == 0 {
            tau
        } else {
            T::zero()
        }
    });
    let e = expm(&aug);
    let y: Vec<T> = (0..m).map(|r| e[(r, 0)]).collect();
    let err = kr.tail * e[(m - 1, m)].abs();
    (y, err)
}

/// `e^{sA} x`. The error target is `tol·‖x‖` over the whole interval.
pub fn expmv<T: Real, A: LinearOperator<T>>(
    a: &A,
    s: T,
    x: &[T],
    opts: &ExpmvOptions<T>,
) -> Result<(Vec<T>, ExpmvReport)> {
    let mut report = ExpmvReport::default();
    let beta0 = norm2(x);
    if s == T::zero() || beta0 == T::zero() {
        return Ok((x.to_vec(), report));
    }
    let sign = s.signum();
    let t_end = s.abs();
    let mut t = T::zero();
    let mut w = x.to_vec();
    let mut tau = t_end;
    let signed = Signed {
        a,
        negate: sign < T::zero(),
    };
    while t < t_end {
        if report.steps >= opts.max_steps {
            return Err(Error::NonConvergence(format!(
                "expmv: {} substeps reached t = {} of {}",
                report.steps, t, t_end
            )));
        }
        let beta = norm2(&w);
        let kr = arnoldi(&signed, &w, beta, opts.krylov_dim);
        report.matvecs += kr.m;
        tau = tau.min(t_end - t);
        let (y, err) = loop {
            let (y, err) = small_step(&kr, tau);
            let budget = opts.tol * beta0 * tau / t_end;
            if kr.tail == T::zero() || beta * err <= budget {
                break (y, beta * err);
            }
            let ratio = (budget / (beta * err)).powf(T::one() / T::n(kr.m));
            tau *= T::c(0.9) * ratio.min(T::c(0.5)).max(T::c(0.1));
            if tau <= t_end * T::epsilon() {
                return Err(Error::NonConvergence("expmv: step size underflow".into()));
            }
        };
        let mut next = vec![T::zero(); w.len()];
        for (c, v) in y.iter().zip(&kr.basis) {
            axpy(beta * *c, v, &mut next);
        }
        w = next;
        t += tau;
        report.steps += 1;
        report.error_estimate += (err / beta0).to64();
        if kr.tail == T::zero() {
            // Invariant subspace: the step was exact for any length.
            tau = t_end;
        } else {
            tau = (tau * T::c(2.0)).min(t_end);
        }
    }
    Ok((w, report))
}

struct Signed<'a, A> {
    a: &'a A,
    negate: bool,
}

impl<T: Real, A: LinearOperator<T>> LinearOperator<T> for Signed<'_, A> {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn apply_into(&self, x: &[T], y: &mut [T]) {
        self.a.apply_into(x, y);
        if self.negate {
            y.iter_mut().for_each(|v| *v = -*v);
        }
    }
    fn norm_bound(&self) -> T {
        self.a.norm_bound()
    }
}
