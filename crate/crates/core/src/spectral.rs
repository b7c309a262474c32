//! Ground states by dense diagonalization or Lanczos, and measurements on states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::OccupationBasis;
use crate::linalg::{self, axpy, dot, eigh, norm2, Csr, Dense, LinearOperator, SymEigen};
use crate::operators::{excitation_map, symmetry_tolerance};
use crate::scalar::Real;

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions<T> {
    /// Residual target relative to `max(1, |E₀|)`.
    pub tol: T,
    pub max_krylov: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl<T: Real> Default for LanczosOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::c(1e-10),
            max_krylov: 300,
            max_restarts: 50,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundState<T> {
    pub energy: T,
    pub vector: Vec<T>,
    pub method: Method,
    pub iterations: usize,
    /// `‖Hψ − Eψ‖`.
    pub residual: T,
}

/// Fix the sign so the largest-magnitude entry (first on ties) is positive.
fn normalize_sign<T: Real>(v: &mut [T]) {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < T::zero()) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn residual<T: Real, A: LinearOperator<T>>(a: &A, e: T, v: &[T]) -> T {
    let mut r = a.apply(v);
    axpy(-e, v, &mut r);
    norm2(&r)
}

pub fn ground_state_dense<T: Real>(a: &Dense<T>) -> Result<GroundState<T>> {
    let asym = a.max_abs_diff(&a.transpose());
    if asym > T::c(1e-10) * T::one().max(a.max_abs()) {
        return Err(Error::NotHermitian(asym.to64()));
    }
    let SymEigen { values, vectors } = eigh(a)?;
    let mut v = vectors.column(0);
    normalize_sign(&mut v);
    let residual = residual(a, values[0], &v);
    Ok(GroundState {
        energy: values[0],
        vector: v,
        method: Method::Dense,
        iterations: 1,
        residual,
    })
}

fn random_start<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<T> = (0..n).map(|_| T::c(rng.gen_range(-1.0..1.0))).collect();
    let nrm = norm2(&v);
    linalg::scale(T::one() / nrm, &mut v);
    v
}

/// Lowest eigenpair by Lanczos with full reorthogonalization, restarted from the Ritz vector.
pub fn ground_state_lanczos<T: Real, A: LinearOperator<T>>(a: &A, opts: &LanczosOptions<T>) -> Result<GroundState<T>> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("empty operator".into()));
    }
    let m_max = opts.max_krylov.min(n).max(1);
    let mut start = random_start::<T>(n, opts.seed);
    let mut iterations = 0;
    for _ in 0..=opts.max_restarts {
        let mut basis: Vec<Vec<T>> = vec![start.clone()];
        let mut alpha: Vec<T> = Vec::new();
        let mut beta: Vec<T> = Vec::new();
        let mut w = vec![T::zero(); n];
        let mut ritz: Option<(T, Vec<T>)> = None;
        for j in 0..m_max {
            a.apply_into(&basis[j], &mut w);
            iterations += 1;
            let aj = dot(&basis[j], &w);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                }
            }
            alpha.push(aj);
            let bj = norm2(&w);
            let last = j + 1 == m_max;
            let lucky = bj <= T::epsilon() * T::c(64.0) * aj.abs().max(T::one());
            if j % 5 == 4 || last || lucky {
                let k = j + 1;
                let t = Dense::from_fn(k, k, |r, c| {
                    if r == c {
                        alpha[r]
                    } else if r + 1 == c {
                        beta[r]
                    } else if c + 1 == r {
                        beta[c]
                    } else {
                        T::zero()
                    }
                });
                let ev = eigh(&t)?;
                let theta = ev.values[0];
                let est = bj * ev.vectors[(k - 1, 0)].abs();
                let target = opts.tol * theta.abs().max(T::one());
                if est <= target || last || lucky {
                    let mut y = vec![T::zero(); n];
                    for (i, v) in basis.iter().enumerate() {
                        axpy(ev.vectors[(i, 0)], v, &mut y);
                    }
                    let nrm = norm2(&y);
                    linalg::scale(T::one() / nrm, &mut y);
                    ritz = Some((theta, y));
                    if est <= target || lucky {
                        break;
                    }
                }
            }
            if last {
                break;
            }
            beta.push(bj);
            basis.push(w.iter().map(|&x| x / bj).collect());
        }
        let (theta, mut y) = ritz.expect("Ritz pair computed on exit");
        let res = residual(a, theta, &y);
        if res <= opts.tol * T::c(10.0) * theta.abs().max(T::one()) {
            normalize_sign(&mut y);
            return Ok(GroundState {
                energy: theta,
                vector: y,
                method: Method::Lanczos,
                iterations,
                residual: res,
            });
        }
        start = y;
    }
    Err(Error::NonConvergence(format!(
        "Lanczos did not reach tolerance after {iterations} matvecs"
    )))
}

/// Ground state of a sparse symmetric matrix, dense below `dense_cap`.
pub fn ground_state<T: Real>(a: &Csr<T>, dense_cap: usize, opts: &LanczosOptions<T>) -> Result<GroundState<T>> {
    let r = a.symmetry_residual();
    if r > symmetry_tolerance(a) {
        return Err(Error::NotHermitian(r.to64()));
    }
    if a.nrows() <= dense_cap {
        ground_state_dense(&a.to_dense())
    } else {
        ground_state_lanczos(a, opts)
    }
}

/// `⟨ξ, Aᵏ ξ⟩` for `k = 1..=kmax`, by repeated application.
pub fn moments<T: Real, A: LinearOperator<T>>(xi: &[T], a: &A, kmax: usize) -> Vec<T> {
    // Pair up powers: ⟨ξ, A^{2j} ξ⟩ = ‖A^j ξ‖², ⟨ξ, A^{2j+1} ξ⟩ = ⟨A^j ξ, A A^j ξ⟩.
    let mut out = Vec::with_capacity(kmax);
    let mut v = xi.to_vec();
    for k in 1..=kmax {
        if k % 2 == 1 {
            out.push(dot(&v, &a.apply(&v)));
        } else {
            v = a.apply(&v);
            out.push(dot(&v, &v));
        }
    }
    out
}

/// `ζ² = ‖(H − E) ψ‖²`.
pub fn energy_variance<T: Real, A: LinearOperator<T>>(psi: &[T], h: &A, e: T) -> T {
    let r = residual(h, e, psi);
    r * r
}

/// Condensate fraction of an `N`-particle state, by the zero-mode occupation and by
/// the excitation number after `U_N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CondensateFraction {
    pub direct: f64,
    pub via_excitations: f64,
}

pub fn condensate_fraction<T: Real>(
    psi: &[T],
    full: &OccupationBasis,
    excitation: &OccupationBasis,
) -> Result<CondensateFraction> {
    let lat = full
        .lattice()
        .ok_or_else(|| Error::BasisMismatch("basis has no lattice".into()))?;
    let zero = lat
        .zero_index()
        .ok_or_else(|| Error::BasisMismatch("basis lacks the zero mode".into()))?;
    let n = T::n(full.n_particles());
    let norm = dot(psi, psi);
    let direct = (0..full.dim())
        .map(|i| psi[i] * psi[i] * T::n(full.occ(i, zero) as usize))
        .sum::<T>()
        / (n * norm);
    let u: Csr<T> = excitation_map(full, excitation)?;
    let xi = u.matvec(psi);
    let depletion = (0..excitation.dim())
        .map(|i| xi[i] * xi[i] * T::n(excitation.total(i)))
        .sum::<T>()
        / (n * norm);
    Ok(CondensateFraction {
        direct: direct.to64(),
        via_excitations: (T::one() - depletion).to64(),
    })
}

/// `⟨ψ, N₊ ψ⟩ / N` for an excitation-space state.
pub fn depletion<T: Real>(psi: &[T], basis: &OccupationBasis) -> T {
    let n = T::n(basis.n_particles());
    (0..basis.dim())
        .map(|i| psi[i] * psi[i] * T::n(basis.total(i)))
        .sum::<T>()
        / (n * dot(psi, psi))
}

/// Eigenvectors with eigenvalue `≤ threshold`, as columns, with their eigenvalues.
pub fn spectral_subspace<T: Real>(h: &Dense<T>, threshold: T) -> Result<(Vec<T>, Dense<T>)> {
    let SymEigen { values, vectors } = eigh(h)?;
    let k = values.iter().take_while(|&&e| e <= threshold).count();
    let cols: Vec<Vec<T>> = (0..k).map(|j| vectors.column(j)).collect();
    let q = if k == 0 {
        Dense::zeros(h.nrows(), 0)
    } else {
        Dense::from_columns(&cols)
    };
    Ok((values[..k].to_vec(), q))
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub energy: f64,
    pub method: Method,
    pub iterations: usize,
    pub residual: f64,
    /// `⟨N₊ᵏ⟩`, k = 1..4.
    pub moments: Vec<f64>,
    pub variance: f64,
    pub depletion: f64,
}

pub fn spectral_report<T: Real>(h: &Csr<T>, basis: &OccupationBasis, gs: &GroundState<T>) -> SpectralReport {
    let totals: Vec<T> = (0..basis.dim()).map(|i| T::n(basis.total(i))).collect();
    let nplus = Csr::diagonal(&totals);
    SpectralReport {
        energy: gs.energy.to64(),
        method: gs.method,
        iterations: gs.iterations,
        residual: gs.residual.to64(),
        moments: moments(&gs.vector, &nplus, 4).iter().map(|v| v.to64()).collect(),
        variance: energy_variance(&gs.vector, h, gs.energy).to64(),
        depletion: depletion(&gs.vector, basis).to64(),
    }
}
