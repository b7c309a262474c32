//! Zero-energy scattering, the Neumann ground state on a ball, and the
//! correlation coefficients η_p built from it.
//!
//! Radial problems are written in the reduced variable `u(r) = r f(r)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{norm2_int, MomentumLattice, Momentum, TWO_PI};
use crate::scalar::Real;

/// Spherically symmetric, pointwise non-negative interaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `v0 · 1(|x| ≤ R)`.
    SoftSphere { v0: f64, r: f64 },
    /// `v0 · exp(-|x|²/R²)`; not compactly supported.
    Gaussian { v0: f64, r: f64 },
}

impl PotentialSpec {
    pub fn soft_sphere(v0: f64, r: f64) -> Self {
        Self::SoftSphere { v0, r }
    }

    pub fn v0(&self) -> f64 {
        match *self {
            Self::SoftSphere { v0, .. } | Self::Gaussian { v0, .. } => v0,
        }
    }

    /// Length scale R.
    pub fn range(&self) -> f64 {
        match *self {
            Self::SoftSphere { r, .. } | Self::Gaussian { r, .. } => r,
        }
    }

    /// Radius beyond which V vanishes (or is below 1e-15·v0 for the Gaussian).
    pub fn support_radius(&self) -> f64 {
        match *self {
            Self::SoftSphere { r, .. } => r,
            Self::Gaussian { r, .. } => r * (15.0 * 10f64.ln()).sqrt(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.v0() == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let (v0, r) = (self.v0(), self.range());
        if !(v0 >= 0.0 && v0.is_finite()) {
            return Err(Error::InvalidParameter(format!("v0 = {v0} must be ≥ 0")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("R = {r} must be > 0")));
        }
        Ok(())
    }

    pub fn value<T: Real>(&self, x: T) -> T {
        let x = x.abs();
        match *self {
            Self::SoftSphere { v0, r } => {
                if x <= T::c(r) {
                    T::c(v0)
                } else {
                    T::zero()
                }
            }
            Self::Gaussian { v0, r } => T::c(v0) * (-(x / T::c(r)).powi(2)).exp(),
        }
    }

    /// V̂(k) = ∫ V(x) e^{-ikx} dx, as a function of |k|.
    pub fn fourier<T: Real>(&self, k: T) -> T {
        let k = k.abs();
        let four_pi = T::c(4.0 * PI);
        match *self {
            Self::SoftSphere { v0, r } => {
                let (v0, r) = (T::c(v0), T::c(r));
                let x = k * r;
                if x < T::c(1e-3) {
                    let x2 = x * x;
                    four_pi * v0 * r.powi(3)
                        * (T::c(1.0 / 3.0) - x2 / T::c(30.0) + x2 * x2 / T::c(840.0))
                } else {
                    four_pi * v0 * (x.sin() - x * x.cos()) / k.powi(3)
                }
            }
            Self::Gaussian { v0, r } => {
                let (v0, r) = (T::c(v0), T::c(r));
                v0 * T::c(PI.powf(1.5)) * r.powi(3) * (-(k * r).powi(2) / T::c(4.0)).exp()
            }
        }
    }

}

/// Fourier transform of the indicator of the ball of radius `ell`.
pub fn ball_fourier<T: Real>(k: T, ell: T) -> T {
    let k = k.abs();
    let x = k * ell;
    let four_pi = T::c(4.0 * PI);
    if x < T::c(1e-3) {
        let x2 = x * x;
        four_pi * ell.powi(3) * (T::c(1.0 / 3.0) - x2 / T::c(30.0) + x2 * x2 / T::c(840.0))
    } else {
        four_pi * (x.sin() - x * x.cos()) / k.powi(3)
    }
}

/// Radial grid: uniform with `steps_per_range` steps per R inside the support of V,
/// geometrically graded with ratio `growth` outside it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub steps_per_range: usize,
    pub growth: f64,
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self {
            steps_per_range: 200,
            growth: 1.01,
        }
    }
}

/// Nodes `0 = r_0 < … < r_n = radius`, with the potential breakpoint on a node.
fn radial_nodes(v: &PotentialSpec, radius: f64, grid: RadialGrid) -> Vec<f64> {
    let h = v.range() / grid.steps_per_range.max(1) as f64;
    let inner = v.support_radius().min(radius);
    let mut nodes = vec![0.0];
    let steps = (inner / h).round().max(1.0) as usize;
    for i in 1..=steps {
        nodes.push(inner * i as f64 / steps as f64);
    }
    let growth = grid.growth.max(1.0);
    let mut step = inner / steps as f64;
    let mut x = inner;
    while x < radius {
        step *= growth;
        if x + 1.5 * step >= radius {
            // Split what is left into at most two near-equal steps.
            let rest = radius - x;
            if rest > step {
                nodes.push(x + 0.5 * rest);
            }
            nodes.push(radius);
            break;
        }
        x += step;
        nodes.push(x);
    }
    nodes
}

/// Result of the zero-energy scattering problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroEnergy<T> {
    pub a0: T,
    /// Asymptotic slope A of `u(r) ≈ A (r - a0)` before normalization.
    pub slope: T,
}

/// Integrate `u'' = (V/2) u`, `u(0)=0`, `u'(0)=1` by RK4 and read off `u ∝ r - a0`
/// from a least-squares line through the outer 20% of the ball.
pub fn solve_zero_energy<T: Real>(
    v: &PotentialSpec,
    ball_radius: T,
    grid: RadialGrid,
) -> Result<ZeroEnergy<T>> {
    v.validate()?;
    let radius = ball_radius.to64();
    if radius <= v.support_radius() {
        return Err(Error::InvalidParameter(format!(
            "ball radius {radius} does not exceed the potential support"
        )));
    }
    let nodes = radial_nodes(v, radius, grid);
    let half = T::c(0.5);
    let rhs = |r: T, y: [T; 2]| [y[1], half * v.value(r) * y[0]];
    let mut y = [T::zero(), T::one()];
    let mut us = Vec::with_capacity(nodes.len());
    us.push(y[0]);
    let eps = T::c(1e-12);
    for w in nodes.windows(2) {
        let (a, b) = (T::c(w[0]), T::c(w[1]));
        let h = b - a;
        // Evaluate V just inside each cell so a jump at a node is resolved one-sidedly.
        let lo = a + eps * h;
        let hi = b - eps * h;
        let mid = a + half * h;
        let k1 = rhs(lo, y);
        let k2 = rhs(mid, [y[0] + half * h * k1[0], y[1] + half * h * k1[1]]);
        let k3 = rhs(mid, [y[0] + half * h * k2[0], y[1] + half * h * k2[1]]);
        let k4 = rhs(hi, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        let six = T::c(6.0);
        y = [
            y[0] + h / six * (k1[0] + T::c(2.0) * k2[0] + T::c(2.0) * k3[0] + k4[0]),
            y[1] + h / six * (k1[1] + T::c(2.0) * k2[1] + T::c(2.0) * k3[1] + k4[1]),
        ];
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::NonConvergence("zero-energy radial ODE overflow".into()));
        }
        us.push(y[0]);
    }
    let start = T::c(0.8) * ball_radius;
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) =
        (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for (&r, &u) in nodes.iter().zip(&us) {
        let r = T::c(r);
        if r >= start {
            sx += r;
            sy += u;
            sxx += r * r;
            sxy += r * u;
            cnt += T::one();
        }
    }
    let denom = cnt * sxx - sx * sx;
    if cnt < T::c(2.0) || denom == T::zero() {
        return Err(Error::NonConvergence("too few points in the fit window".into()));
    }
    let slope = (cnt * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / cnt;
    if !(slope > T::zero()) {
        return Err(Error::NonConvergence("non-positive asymptotic slope".into()));
    }
    let mut a0 = -intercept / slope;
    let floor = T::c(1e-9) * ball_radius;
    if a0 < -floor {
        return Err(Error::NegativeScatteringLength(a0.to64()));
    }
    if a0 < T::zero() {
        a0 = T::zero();
    }
    Ok(ZeroEnergy { a0, slope })
}

/// Lowest Neumann eigenpair of `-Δ + V/2` on the ball of radius `N^{1-κ} ℓ`.
#[derive(Clone, Debug)]
pub struct NeumannSolution<T> {
    pub n: usize,
    pub kappa: T,
    pub ell: T,
    /// Ball radius `N^{1-κ} ℓ`.
    pub radius: T,
    pub r: Vec<T>,
    /// Profile f_ℓ on the nodes, normalized to f(radius) = 1.
    pub f: Vec<T>,
    pub lambda: T,
    pub iterations: usize,
}

/// Finite-volume three-point discretization of the reduced equation.
struct RadialOperator<T> {
    diag: Vec<T>,
    off: Vec<T>,
    mass: Vec<T>,
}

fn cell_potential<T: Real>(v: &PotentialSpec, a: T, b: T) -> T {
    v.value(T::c(0.5) * (a + b))
}

impl<T: Real> RadialOperator<T> {
    /// Unknowns u_1..u_n; u_0 = 0, and `u'(L) = u(L)/L` at the outer node.
    fn build(v: &PotentialSpec, r: &[T], radius: T) -> Self {
        let n = r.len() - 1;
        let half = T::c(0.5);
        let quarter = T::c(0.25);
        let mut diag = vec![T::zero(); n];
        let mut off = vec![T::zero(); n.saturating_sub(1)];
        let mut mass = vec![T::zero(); n];
        for i in 1..=n {
            let hl = r[i] - r[i - 1];
            let vl = cell_potential(v, r[i - 1], r[i]);
            let mut d = T::one() / hl + quarter * hl * vl;
            let mut w = half * hl;
            if i < n {
                let hr = r[i + 1] - r[i];
                let vr = cell_potential(v, r[i], r[i + 1]);
                d += T::one() / hr + quarter * hr * vr;
                w += half * hr;
                off[i - 1] = -T::one() / hr;
            } else {
                d -= T::one() / radius;
            }
            diag[i - 1] = d;
            mass[i - 1] = w;
        }
        Self { diag, off, mass }
    }

    /// Solve `(A - σ M) x = b` by the Thomas algorithm.
    fn solve_shifted(&self, sigma: T, b: &[T]) -> Vec<T> {
        let n = self.diag.len();
        let mut c = vec![T::zero(); n];
        let mut d = vec![T::zero(); n];
        let a0 = self.diag[0] - sigma * self.mass[0];
        c[0] = if n > 1 { self.off[0] / a0 } else { T::zero() };
        d[0] = b[0] / a0;
        for i in 1..n {
            let m = self.diag[i] - sigma * self.mass[i] - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / m;
            }
            d[i] = (b[i] - self.off[i - 1] * d[i - 1]) / m;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= c[i] * next;
        }
        x
    }
}

/// Inverse iteration with a small negative shift for the Neumann ground state.
pub fn solve_neumann<T: Real>(
    v: &PotentialSpec,
    ell: T,
    n: usize,
    kappa: T,
    grid: RadialGrid,
) -> Result<NeumannSolution<T>> {
    v.validate()?;
    if !(ell > T::zero() && ell < T::c(0.5)) {
        return Err(Error::InvalidParameter(format!("ℓ = {ell} outside (0, 1/2)")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    let scale = T::n(n).powf(T::one() - kappa);
    let radius = scale * ell;
    if T::c(v.support_radius()) > radius {
        return Err(Error::InvalidParameter(
            "support of V(N^{1-κ}·) exceeds ℓ".into(),
        ));
    }
    let r: Vec<T> = radial_nodes(v, radius.to64(), grid)
        .into_iter()
        .map(T::c)
        .collect();
    let last = r.len() - 1;
    if v.is_zero() {
        return Ok(NeumannSolution {
            n,
            kappa,
            ell,
            radius,
            f: vec![T::one(); r.len()],
            r,
            lambda: T::zero(),
            iterations: 0,
        });
    }
    let op = RadialOperator::build(v, &r, radius);
    // Shift well below the spectrum gap ~ 1/L² to keep the system definite.
    let sigma = -T::c(1e-2) / (radius * radius);
    let mut u: Vec<T> = r[1..].to_vec();
    let mut iterations = 0;
    let tol = T::epsilon() * T::c(64.0);
    loop {
        iterations += 1;
        let rhs: Vec<T> = u.iter().zip(&op.mass).map(|(&a, &m)| a * m).collect();
        let mut next = op.solve_shifted(sigma, &rhs);
        let end = next[last - 1];
        let peak = next.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        if !(end.abs() > T::c(1e-8) * peak) {
            return Err(Error::NonConvergence(
                "Neumann profile vanishes at the boundary".into(),
            ));
        }
        let norm = radius / end;
        for x in next.iter_mut() {
            *x *= norm;
        }
        let change = next
            .iter()
            .zip(&u)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
            / radius;
        u = next;
        if change <= tol {
            break;
        }
        if iterations >= 200 {
            return Err(Error::NonConvergence(format!(
                "inverse iteration stalled at relative change {change:e}"
            )));
        }
    }
    let mut f = Vec::with_capacity(r.len());
    f.push(u[0] / r[1]);
    for (i, &ui) in u.iter().enumerate() {
        f.push(ui / r[i + 1]);
    }
    let mut sol = NeumannSolution {
        n,
        kappa,
        ell,
        radius,
        r,
        f,
        lambda: T::zero(),
        iterations,
    };
    // Integrating the equation over the ball: λ ∫ f = ½ ∫ V f (zero boundary flux).
    sol.lambda = T::c(0.5) * sol.integral_vf(v) / sol.integral_f();
    Ok(sol)
}

impl<T: Real> NeumannSolution<T> {
    fn u(&self, i: usize) -> T {
        self.r[i] * self.f[i]
    }

    /// ∫_ball V f dx by the midpoint-potential trapezoid rule.
    pub fn integral_vf(&self, v: &PotentialSpec) -> T {
        let four_pi = T::c(4.0 * PI);
        let mut s = T::zero();
        for i in 0..self.r.len() - 1 {
            let h = self.r[i + 1] - self.r[i];
            let vm = cell_potential(v, self.r[i], self.r[i + 1]);
            if vm != T::zero() {
                s += vm * T::c(0.5) * h * (self.u(i) * self.r[i] + self.u(i + 1) * self.r[i + 1]);
            }
        }
        four_pi * s
    }

    /// ∫_ball f dx.
    pub fn integral_f(&self) -> T {
        let four_pi = T::c(4.0 * PI);
        let mut s = T::zero();
        for i in 0..self.r.len() - 1 {
            let h = self.r[i + 1] - self.r[i];
            s += T::c(0.5) * h * (self.u(i) * self.r[i] + self.u(i + 1) * self.r[i + 1]);
        }
        four_pi * s
    }

    /// Rayleigh quotient ∫(|∇f|² + V f²/2) / ∫ f², written with first differences only.
    pub fn rayleigh_quotient(&self, v: &PotentialSpec) -> T {
        let (mut num, mut den) = (T::zero(), T::zero());
        let half = T::c(0.5);
        for i in 0..self.r.len() - 1 {
            let h = self.r[i + 1] - self.r[i];
            let rm = half * (self.r[i] + self.r[i + 1]);
            let df = (self.f[i + 1] - self.f[i]) / h;
            let vm = cell_potential(v, self.r[i], self.r[i + 1]);
            let f2 = half * (self.f[i] * self.f[i] * self.r[i] * self.r[i]
                + self.f[i + 1] * self.f[i + 1] * self.r[i + 1] * self.r[i + 1]);
            num += h * (df * df * rm * rm + half * vm * f2);
            den += h * f2;
        }
        num / den
    }

    /// w_ℓ = 1 - f_ℓ at the nodes.
    pub fn w(&self) -> Vec<T> {
        self.f.iter().map(|&f| T::one() - f).collect()
    }

    /// Linear interpolation of w_ℓ at radius `x` (zero beyond the ball).
    pub fn w_at(&self, x: T) -> T {
        let x = x.abs();
        if x >= self.radius {
            return T::zero();
        }
        let k = match self
            .r
            .binary_search_by(|p| p.partial_cmp(&x).expect("finite grid"))
        {
            Ok(i) => return T::one() - self.f[i],
            Err(i) => i,
        };
        let (a, b) = (self.r[k - 1], self.r[k]);
        let t = (x - a) / (b - a);
        T::one() - (self.f[k - 1] * (T::one() - t) + self.f[k] * t)
    }

    /// Max relative residual of the profile in the rescaled equation
    /// `[-Δ + ½N^{2-2κ}V(N^{1-κ}·)] g = N^{2-2κ}λ g`, `g = f(N^{1-κ}·)`, at interior nodes.
    pub fn rescaled_residual(&self, v: &PotentialSpec) -> T {
        let s = T::n(self.n).powf(T::one() - self.kappa);
        let s2 = s * s;
        let half = T::c(0.5);
        let mut worst = T::zero();
        let mut scale = self.lambda * s2;
        for i in 1..self.r.len() - 1 {
            let (y0, y1, y2) = (self.r[i - 1] / s, self.r[i] / s, self.r[i + 1] / s);
            let (hl, hr) = (y1 - y0, y2 - y1);
            let (g0, g1, g2) = (y0 * self.f[i - 1], y1 * self.f[i], y2 * self.f[i + 1]);
            // Reduced form: -(yg)'' + ½ s² V(s y) (yg) - s² λ (yg).
            let lap = ((g2 - g1) / hr - (g1 - g0) / hl) / (half * (hl + hr));
            let vl = cell_potential(v, self.r[i - 1], self.r[i]);
            let vr = cell_potential(v, self.r[i], self.r[i + 1]);
            let vnode = (vl * hl + vr * hr) / (hl + hr);
            let pot = half * s2 * vnode * g1;
            let res = -lap + pot - s2 * self.lambda * g1;
            scale = scale.max(pot.abs() / y1);
            worst = worst.max(res.abs() / y1);
        }
        if scale == T::zero() {
            worst
        } else {
            worst / scale
        }
    }

    /// ŵ_ℓ(k) = (4π/k) ∫ w_ℓ(r) sin(kr) r dr, by cellwise adaptive Simpson on the
    /// piecewise-linear interpolant of `r w_ℓ(r)`.
    pub fn w_hat(&self, k: T, rel_tol: T) -> Result<T> {
        let k = k.abs();
        let four_pi = T::c(4.0 * PI);
        let g: Vec<T> = self.r.iter().zip(&self.f).map(|(&r, &f)| r * (T::one() - f)).collect();
        let mut mass = T::zero();
        for i in 0..self.r.len() - 1 {
            let h = self.r[i + 1] - self.r[i];
            mass += T::c(0.5) * h * (g[i].abs() * self.r[i] + g[i + 1].abs() * self.r[i + 1]);
        }
        if mass == T::zero() {
            return Ok(T::zero());
        }
        let small_k = k * self.radius < T::c(1e-8);
        let mut total = T::zero();
        for i in 0..self.r.len() - 1 {
            let (a, b) = (self.r[i], self.r[i + 1]);
            let (ga, gb) = (g[i], g[i + 1]);
            let h = b - a;
            let lin = move |x: T| ga + (gb - ga) * (x - a) / h;
            let tol = rel_tol * mass * h / self.radius;
            if small_k {
                // (4π/k) sin(kr) r w → 4π r² w.
                total += adaptive_simpson(&|x: T| lin(x) * x, a, b, tol, 40)?;
                continue;
            }
            // Seed panels of at most one radian of phase so sampling cannot alias.
            let pieces = (k * h).ceil().to_usize().unwrap_or(1).max(1);
            let step = h / T::n(pieces);
            let sub_tol = tol / T::n(pieces);
            for j in 0..pieces {
                let lo = a + step * T::n(j);
                let hi = if j + 1 == pieces { b } else { lo + step };
                total += adaptive_simpson(&|x: T| lin(x) * (k * x).sin() / k, lo, hi, sub_tol, 40)?;
            }
        }
        Ok(four_pi * total)
    }
}

fn simpson<T: Real>(fa: T, fm: T, fb: T, h: T) -> T {
    h / T::c(6.0) * (fa + T::c(4.0) * fm + fb)
}

/// Adaptive Simpson with Richardson correction; errors when `depth` is exhausted.
pub fn adaptive_simpson<T: Real>(
    f: &dyn Fn(T) -> T,
    a: T,
    b: T,
    tol: T,
    depth: u32,
) -> Result<T> {
    let m = T::c(0.5) * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real>(
    f: &dyn Fn(T) -> T,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> Result<T> {
    let m = T::c(0.5) * (a + b);
    let (lm, rm) = (T::c(0.5) * (a + m), T::c(0.5) * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= T::c(15.0) * tol {
        return Ok(left + right + delta / T::c(15.0));
    }
    if depth == 0 {
        return Err(Error::Tolerance(format!(
            "adaptive Simpson exhausted depth on [{a}, {b}]"
        )));
    }
    let half = T::c(0.5) * tol;
    Ok(simpson_step(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}

/// Scattering data for one model point (V, N, κ, ℓ).
#[derive(Clone, Debug)]
pub struct ScatteringSolution<T> {
    pub potential: PotentialSpec,
    pub a0: T,
    pub neumann: NeumannSolution<T>,
}

impl<T: Real> ScatteringSolution<T> {
    pub fn solve(v: &PotentialSpec, ell: T, n: usize, kappa: T, grid: RadialGrid) -> Result<Self> {
        let neumann = solve_neumann(v, ell, n, kappa, grid)?;
        let a0 = if v.is_zero() {
            T::zero()
        } else {
            let ball = T::c(v.support_radius() * 20.0).max(neumann.radius);
            solve_zero_energy(v, ball, grid)?.a0
        };
        Ok(Self {
            potential: *v,
            a0,
            neumann,
        })
    }

    pub fn n(&self) -> usize {
        self.neumann.n
    }
    pub fn kappa(&self) -> T {
        self.neumann.kappa
    }
    pub fn ell(&self) -> T {
        self.neumann.ell
    }
    pub fn lambda(&self) -> T {
        self.neumann.lambda
    }
    /// N^{1-κ}.
    pub fn length_scale(&self) -> T {
        T::n(self.n()).powf(T::one() - self.kappa())
    }
    /// N^κ V̂(|p|/N^{1-κ}).
    pub fn scaled_vhat(&self, p: T) -> T {
        T::n(self.n()).powf(self.kappa()) * self.potential.fourier(p / self.length_scale())
    }
    /// 3a₀ / (N^{3-3κ} ℓ³).
    pub fn lambda_leading(&self) -> T {
        T::c(3.0) * self.a0 / self.neumann.radius.powi(3)
    }

    /// η at momentum magnitude |p|: −N^{3κ−2} ŵ_ℓ(|p|/N^{1−κ}).
    pub fn eta_at(&self, p: T, rel_tol: T) -> Result<T> {
        let nf = T::n(self.n());
        let pref = nf.powf(T::c(3.0) * self.kappa() - T::c(2.0));
        Ok(-pref * self.neumann.w_hat(p / self.length_scale(), rel_tol)?)
    }

    /// η̌(x) = −N w_ℓ(N^{1−κ}|x|).
    pub fn eta_check(&self, x: T) -> T {
        -T::n(self.n()) * self.neumann.w_at(self.length_scale() * x)
    }
}

/// Lattice table of η_p with the high-momentum restriction η_H.
#[derive(Clone, Debug)]
pub struct EtaTable<T> {
    pub momenta: Vec<Momentum>,
    pub eta: Vec<T>,
    pub in_ph: Vec<bool>,
    /// η at p = 0 (the lattice itself may omit the zero mode).
    pub eta0: T,
}

pub const QUADRATURE_TOL: f64 = 1e-10;

/// ŵ_ℓ is radial: evaluate once per distinct |n|², in parallel.
pub fn eta_coefficients<T: Real>(
    sol: &ScatteringSolution<T>,
    lattice: &MomentumLattice,
) -> Result<EtaTable<T>> {
    let tol = T::c(QUADRATURE_TOL);
    let mut shells: Vec<i64> = lattice.momenta().iter().map(|&n| norm2_int(n)).collect();
    shells.push(0);
    shells.sort_unstable();
    shells.dedup();
    let values: Vec<T> = shells
        .par_iter()
        .map(|&s| sol.eta_at(T::c(TWO_PI * (s as f64).sqrt()), tol))
        .collect::<Result<_>>()?;
    let lookup = |s: i64| values[shells.binary_search(&s).expect("shell present")];
    Ok(EtaTable {
        momenta: lattice.momenta().to_vec(),
        eta: lattice.momenta().iter().map(|&n| lookup(norm2_int(n))).collect(),
        in_ph: (0..lattice.len()).map(|i| lattice.in_ph(i)).collect(),
        eta0: lookup(0),
    })
}

impl<T: Real> EtaTable<T> {
    pub fn zeros(lattice: &MomentumLattice) -> Self {
        Self {
            momenta: lattice.momenta().to_vec(),
            eta: vec![T::zero(); lattice.len()],
            in_ph: (0..lattice.len()).map(|i| lattice.in_ph(i)).collect(),
            eta0: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }
    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }
    pub fn p2(&self, i: usize) -> T {
        T::c(TWO_PI * TWO_PI * norm2_int(self.momenta[i]) as f64)
    }
    pub fn eta_h(&self, i: usize) -> T {
        if self.in_ph[i] {
            self.eta[i]
        } else {
            T::zero()
        }
    }
    pub fn gamma(&self, i: usize) -> T {
        self.eta_h(i).cosh()
    }
    pub fn sigma(&self, i: usize) -> T {
        self.eta_h(i).sinh()
    }
    /// ‖η_H‖_{ℓ²}.
    pub fn norm_h(&self) -> T {
        (0..self.len()).map(|i| self.eta_h(i).powi(2)).sum::<T>().sqrt()
    }
    /// max |η_p| p² over nonzero tabulated momenta.
    pub fn max_p2_eta(&self) -> T {
        (0..self.len())
            .filter(|&i| self.momenta[i] != [0, 0, 0])
            .fold(T::zero(), |m, i| m.max(self.eta[i].abs() * self.p2(i)))
    }
    /// Σ p² η_p² over nonzero tabulated momenta.
    pub fn h1_sum(&self) -> T {
        (0..self.len()).map(|i| self.p2(i) * self.eta[i].powi(2)).sum()
    }
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for e in &mut out.eta {
            *e *= factor;
        }
        out.eta0 *= factor;
        out
    }
    /// Value of η for an arbitrary momentum on the table (zero mode gives η₀).
    pub fn value(&self, n: Momentum) -> Option<T> {
        if n == [0, 0, 0] {
            return Some(self.eta0);
        }
        self.momenta.iter().position(|&m| m == n).map(|i| self.eta[i])
    }
}

/// Σ_{p ∈ 2πZ³∖0} F(|p|) for a radial function varying slowly on the lattice scale:
/// exact over shells |n| ≤ `n_exact`, continuum integral beyond a volume-matched radius.
pub fn radial_lattice_sum<T: Real>(
    f: &(dyn Fn(T) -> Result<T> + Sync),
    n_exact: i32,
    p_max: T,
    panels: usize,
) -> Result<T> {
    let mut counts: Vec<(i64, usize)> = Vec::new();
    let mut points = 0usize;
    let lim = n_exact as i64 * n_exact as i64;
    let mut tally = std::collections::BTreeMap::<i64, usize>::new();
    for x in -n_exact..=n_exact {
        for y in -n_exact..=n_exact {
            for z in -n_exact..=n_exact {
                let s = norm2_int([x, y, z]);
                if s <= lim {
                    points += 1;
                    if s > 0 {
                        *tally.entry(s).or_default() += 1;
                    }
                }
            }
        }
    }
    counts.extend(tally);
    let exact: Vec<T> = counts
        .par_iter()
        .map(|&(s, c)| Ok(T::n(c) * f(T::c(TWO_PI * (s as f64).sqrt()))?))
        .collect::<Result<_>>()?;
    let mut total: T = exact.into_iter().sum();
    let n_c = (3.0 * points as f64 / (4.0 * PI)).cbrt();
    let p_lo = T::c(TWO_PI * n_c);
    if p_max > p_lo {
        // ∫ d³n = (2π)^{-3} ∫ 4π p² dp, geometric panels in p with Simpson.
        let ratio = (p_max / p_lo).ln();
        let nodes: Vec<T> = (0..=2 * panels)
            .map(|i| p_lo * (ratio * T::n(i) / T::n(2 * panels)).exp())
            .collect();
        let vals: Vec<T> = nodes
            .par_iter()
            .map(|&p| Ok(f(p)? * p * p * p))
            .collect::<Result<_>>()?;
        let dt = ratio / T::n(2 * panels);
        let mut s = T::zero();
        for i in 0..panels {
            s += simpson(vals[2 * i], vals[2 * i + 1], vals[2 * i + 2], T::c(2.0) * dt);
        }
        total += T::c(4.0 * PI / (TWO_PI * TWO_PI * TWO_PI)) * s;
    }
    Ok(total)
}

/// Per-momentum residuals of the lattice-truncated scattering identity for η.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport<T> {
    pub max_relative: T,
    pub rms_relative: T,
    pub max_absolute: T,
}

/// Residual of
/// p²η_p + ½N^κV̂(p/N^{1−κ}) + (2N)⁻¹Σ_q N^κV̂((p−q)/N^{1−κ})η_q
///   − N^{3−2κ}λχ̂_ℓ(p) − N^{2−2κ}λΣ_q χ̂_ℓ(p−q)η_q,
/// with q over the lattice (plus the origin), relative to p²|η_p|.
pub fn check_scattering_residual<T: Real>(
    sol: &ScatteringSolution<T>,
    table: &EtaTable<T>,
) -> ResidualReport<T> {
    let nf = T::n(sol.n());
    let kappa = sol.kappa();
    let nk = nf.powf(kappa);
    let lambda = sol.lambda();
    let ell = sol.ell();
    let c3 = nf.powf(T::c(3.0) - T::c(2.0) * kappa) * lambda;
    let c2 = nf.powf(T::c(2.0) - T::c(2.0) * kappa) * lambda;
    let mut qs: Vec<(Momentum, T)> = table
        .momenta
        .iter()
        .zip(&table.eta)
        .map(|(&m, &e)| (m, e))
        .filter(|&(m, _)| m != [0, 0, 0])
        .collect();
    qs.push(([0, 0, 0], table.eta0));
    let len = |m: Momentum| T::c(TWO_PI * (norm2_int(m) as f64).sqrt());
    let rows: Vec<(T, T)> = qs
        .par_iter()
        .filter(|(m, _)| *m != [0, 0, 0])
        .map(|&(p, ep)| {
            let pn = len(p);
            let mut conv_v = T::zero();
            let mut conv_chi = T::zero();
            for &(q, eq) in &qs {
                let d = len(crate::hilbert::sub(p, q));
                conv_v += sol.scaled_vhat(d) * eq;
                conv_chi += ball_fourier(d, ell) * eq;
            }
            let lhs = pn * pn * ep + T::c(0.5) * nk * sol.potential.fourier(pn / sol.length_scale())
                + conv_v / (T::c(2.0) * nf);
            let rhs = c3 * ball_fourier(pn, ell) + c2 * conv_chi;
            ((lhs - rhs).abs(), pn * pn * ep.abs())
        })
        .collect();
    let mut max_rel = T::zero();
    let mut max_abs = T::zero();
    let mut sq = T::zero();
    for &(res, scale) in &rows {
        let rel = if scale > T::zero() {
            res / scale
        } else if res == T::zero() {
            T::zero()
        } else {
            T::infinity()
        };
        max_rel = max_rel.max(rel);
        max_abs = max_abs.max(res);
        sq += rel * rel;
    }
    let rms = if rows.is_empty() {
        T::zero()
    } else {
        (sq / T::n(rows.len())).sqrt()
    };
    ResidualReport {
        max_relative: max_rel,
        rms_relative: rms,
        max_absolute: max_abs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form_a0(v0: f64, r: f64) -> f64 {
        let k = (v0 / 2.0).sqrt();
        r - (k * r).tanh() / k
    }

    #[test]
    fn soft_sphere_fourier_limits() {
        let v = PotentialSpec::soft_sphere(2.0, 0.3);
        let at0: f64 = v.fourier(0.0);
        assert!((at0 - 4.0 * PI * 2.0 * 0.027 / 3.0).abs() < 1e-14);
        let near: f64 = v.fourier(1.0001e-3 / 0.3);
        let far: f64 = v.fourier(0.999e-3 / 0.3);
        assert!((near - far).abs() / at0 < 1e-8);
    }

    #[test]
    fn zero_potential_has_zero_length() {
        let v = PotentialSpec::soft_sphere(0.0, 1.0);
        let z = solve_zero_energy::<f64>(&v, 20.0, RadialGrid::default()).unwrap();
        assert!(z.a0.abs() < 1e-12);
    }

    #[test]
    fn soft_sphere_length_matches_closed_form() {
        let v = PotentialSpec::soft_sphere(2.0, 1.0);
        let z = solve_zero_energy::<f64>(&v, 20.0, RadialGrid::default()).unwrap();
        let exact = closed_form_a0(2.0, 1.0);
        assert!((z.a0 / exact - 1.0).abs() < 1e-8, "{} vs {}", z.a0, exact);
    }

    #[test]
    fn length_increases_with_coupling() {
        let a: Vec<f64> = [0.5, 2.0, 8.0]
            .iter()
            .map(|&v0| {
                solve_zero_energy::<f64>(&PotentialSpec::soft_sphere(v0, 1.0), 20.0, RadialGrid::default())
                    .unwrap()
                    .a0
            })
            .collect();
        assert!(a[0] <= a[1] && a[1] <= a[2]);
    }

    #[test]
    fn gaussian_is_accepted() {
        let v = PotentialSpec::Gaussian { v0: 1.0, r: 0.5 };
        let z = solve_zero_energy::<f64>(&v, 30.0, RadialGrid::default()).unwrap();
        let born = v.fourier(0.0f64) / (8.0 * PI);
        assert!(z.a0 > 0.0 && z.a0 < born);
    }

    #[test]
    fn ball_too_small_is_rejected() {
        let v = PotentialSpec::soft_sphere(2.0, 1.0);
        assert!(solve_zero_energy::<f64>(&v, 0.5, RadialGrid::default()).is_err());
        assert!(solve_neumann::<f64>(&v, 0.6, 10, 0.1, RadialGrid::default()).is_err());
    }

    #[test]
    fn zero_potential_neumann_is_flat() {
        let v = PotentialSpec::soft_sphere(0.0, 0.3);
        let s = ScatteringSolution::<f64>::solve(&v, 0.45, 4, 0.1, RadialGrid::default()).unwrap();
        assert_eq!(s.lambda(), 0.0);
        assert!(s.neumann.f.iter().all(|&f| f == 1.0));
        let lat = MomentumLattice::new(1, false);
        let t = eta_coefficients(&s, &lat).unwrap();
        assert!(t.eta.iter().all(|&e| e == 0.0));
        assert!((0..t.len()).all(|i| t.gamma(i) == 1.0 && t.sigma(i) == 0.0));
        let r = check_scattering_residual(&s, &t);
        assert_eq!(r.max_absolute, 0.0);
    }

    #[test]
    fn neumann_profile_invariants() {
        let v = PotentialSpec::soft_sphere(2.0, 1.0);
        let s = solve_neumann::<f64>(&v, 0.45, 1000, 0.05, RadialGrid::default()).unwrap();
        let last = s.f.len() - 1;
        assert!((s.f[last] - 1.0).abs() < 1e-14);
        // One-sided derivative of f at the boundary is O(h) small.
        let h = s.r[last] - s.r[last - 1];
        let df = (s.f[last] - s.f[last - 1]) / h;
        assert!(df.abs() < 1e-6, "{df}");
        assert!(s.f.iter().all(|&f| (0.0..=1.0).contains(&f)));
        assert!(s.lambda > 0.0);
        let rq = s.rayleigh_quotient(&v);
        assert!((rq / s.lambda - 1.0).abs() < 1e-4, "{rq} vs {}", s.lambda);
        assert!(s.rescaled_residual(&v) < 1e-8);
    }

    #[test]
    fn w_hat_at_zero_is_volume_integral() {
        let v = PotentialSpec::soft_sphere(2.0, 0.3);
        let s = solve_neumann::<f64>(&v, 0.45, 8, 0.1, RadialGrid::default()).unwrap();
        let at0 = s.w_hat(0.0, 1e-10).unwrap();
        let tiny = s.w_hat(1e-6, 1e-10).unwrap();
        assert!((at0 - tiny).abs() / at0 < 1e-9);
    }

    #[test]
    fn eta_is_nonpositive_and_restricted() {
        let v = PotentialSpec::soft_sphere(2.0, 0.3);
        let s = ScatteringSolution::<f64>::solve(&v, 0.45, 4, 0.1, RadialGrid::default()).unwrap();
        let lat = MomentumLattice::new(2, false).with_shells(TWO_PI * 1.2, TWO_PI);
        let t = eta_coefficients(&s, &lat).unwrap();
        assert!(t.eta.iter().all(|&e| e < 0.0));
        assert!(t.eta0 < 0.0);
        for i in 0..t.len() {
            assert_eq!(t.eta_h(i) != 0.0, lat.in_ph(i));
        }
    }
}
