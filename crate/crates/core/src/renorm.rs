//! Generators of the quadratic, cubic and quartic renormalizations, unitary
//! conjugation, and the effective Hamiltonians they produce.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{self, Momentum, MomentumLattice};
use crate::instance::Instance;
use crate::linalg::{self, expm, expmv, Csr, Dense, ExpmvOptions, LinearOperator};
use crate::operators::{self, Family, Model, SecondQuantizedOperator, Symmetry, TermOperator};
use crate::scalar::Real;
use crate::scattering::EtaTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    QuadraticB,
    CubicA,
    QuarticD,
}

fn eta_on<'a, T: Real>(eta: &'a EtaTable<T>, lat: &MomentumLattice) -> Result<&'a [T]> {
    if eta.momenta.as_slice() != lat.momenta() {
        return Err(Error::BasisMismatch("η table does not match the lattice".into()));
    }
    Ok(&eta.eta)
}

/// `B = ½ Σ_{p∈P_H} η_p (b*_p b*_{-p} − b_{-p} b_p)`.
pub fn generator_b<T: Real>(model: &Model<T>, lat: &MomentumLattice, eta: &EtaTable<T>) -> Result<TermOperator<T>> {
    let eta = eta_on(eta, lat)?;
    let mut f = Family::new(2, 0, Some(model.bdag_pair_weight()));
    for p in lat.ph() {
        f.push(T::c(0.5) * eta[p], &[p, lat.neg_index(p)], &[]);
    }
    Ok(TermOperator::from_family(f).minus_adjoint())
}

/// `A = A₁ − A₁*`, `A₁ = N^{-1/2} Σ_{r∈P_H, p∈P_L} η_r b*_{r+p} a*_{-r} a_p`.
pub fn generator_a<T: Real>(model: &Model<T>, lat: &MomentumLattice, eta: &EtaTable<T>) -> Result<TermOperator<T>> {
    let eta = eta_on(eta, lat)?;
    let pre = T::one() / model.nf().sqrt();
    let mut f = Family::new(2, 1, Some(model.bdag_weight()));
    for r in lat.ph() {
        let mr = lat.neg_index(r);
        for p in lat.pl() {
            if p == mr {
                continue;
            }
            if let Some(rp) = lat.add_index(r, p) {
                f.push(pre * eta[r], &[rp, mr], &[p]);
            }
        }
    }
    Ok(TermOperator::from_family(f).minus_adjoint())
}

/// `D = D₁ − D₁*`, `D₁ = (2N)^{-1} Σ_{r∈P_H, p,q∈P_L} η_r a*_{p+r} a*_{q−r} a_p a_q`.
pub fn generator_d<T: Real>(model: &Model<T>, lat: &MomentumLattice, eta: &EtaTable<T>) -> Result<TermOperator<T>> {
    let eta = eta_on(eta, lat)?;
    let pre = T::one() / (T::c(2.0) * model.nf());
    let mut f = Family::new(2, 2, None);
    for r in lat.ph() {
        let rm = lat.momentum(r);
        for p in lat.pl() {
            let Some(pr) = lat.index_of(hilbert::add(lat.momentum(p), rm)) else { continue };
            if lat.is_zero(pr) {
                continue;
            }
            for q in lat.pl() {
                let Some(qr) = lat.index_of(hilbert::sub(lat.momentum(q), rm)) else { continue };
                if lat.is_zero(qr) {
                    continue;
                }
                f.push(pre * eta[r], &[pr, qr], &[p, q]);
            }
        }
    }
    Ok(TermOperator::from_family(f).minus_adjoint())
}

#[derive(Clone, Debug)]
pub struct Generator<T> {
    pub kind: GeneratorKind,
    pub op: SecondQuantizedOperator<T>,
}

impl<T: Real> Generator<T> {
    pub fn matrix(&self) -> &Csr<T> {
        self.op.matrix()
    }
    pub fn is_zero(&self) -> bool {
        self.op.matrix().nnz() == 0
    }
}

pub fn generator_terms<T: Real>(kind: GeneratorKind, inst: &Instance<T>) -> Result<TermOperator<T>> {
    let (m, lat, eta) = (&inst.model, &*inst.lattice, &inst.eta);
    match kind {
        GeneratorKind::QuadraticB => generator_b(m, lat, eta),
        GeneratorKind::CubicA => generator_a(m, lat, eta),
        GeneratorKind::QuarticD => generator_d(m, lat, eta),
    }
}

pub fn build_generator<T: Real>(kind: GeneratorKind, inst: &Instance<T>) -> Result<Generator<T>> {
    let terms = generator_terms(kind, inst)?;
    let op = SecondQuantizedOperator::assemble(&terms, inst.basis.clone(), Symmetry::AntiHermitian)?;
    Ok(Generator { kind, op })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugationMethod {
    DenseExpm,
    KrylovAction,
}

/// `e^{-G} O e^{G}` in dense form.
#[derive(Clone, Debug)]
pub struct ConjugationResult<T> {
    pub method: ConjugationMethod,
    pub matrix: Dense<T>,
    pub unitary: Dense<T>,
    /// `max |UᵀU − 1|`.
    pub unitarity_defect: f64,
}

/// Dense conjugation via the scaling-and-squaring exponential.
pub fn conjugate_dense<T: Real>(op: &Dense<T>, generator: &Csr<T>) -> ConjugationResult<T> {
    let u = expm(&generator.to_dense());
    let defect = u.transpose().matmul(&u).max_abs_diff(&Dense::identity(u.nrows())).to64();
    let matrix = op.congruence(&u).symmetrized();
    ConjugationResult {
        method: ConjugationMethod::DenseExpm,
        matrix,
        unitary: u,
        unitarity_defect: defect,
    }
}

/// Matrix-free `x ↦ e^{-G} O e^{G} x`.
pub struct ConjugatedAction<'a, T, O> {
    pub op: &'a O,
    pub generator: &'a Csr<T>,
    pub opts: ExpmvOptions<T>,
}

impl<T: Real, O: LinearOperator<T>> ConjugatedAction<'_, T, O> {
    pub fn try_apply(&self, x: &[T]) -> Result<Vec<T>> {
        let (y, _) = expmv(self.generator, T::one(), x, &self.opts)?;
        let z = self.op.apply(&y);
        let (out, _) = expmv(self.generator, -T::one(), &z, &self.opts)?;
        Ok(out)
    }
}

impl<T: Real, O: LinearOperator<T>> LinearOperator<T> for ConjugatedAction<'_, T, O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    /// Panics if the exponential action fails to converge.
    fn apply_into(&self, x: &[T], y: &mut [T]) {
        let out = self.try_apply(x).expect("exponential action failed");
        y.copy_from_slice(&out);
    }
    fn norm_bound(&self) -> T {
        self.op.norm_bound()
    }
}

/// Cubic term `s Σ_{p∈keep_p, q∈keep_q, p+q≠0} F(p) [b*_{p+q} a*_{-p} a_q + h.c.]`.
fn cubic<T: Real>(
    model: &Model<T>,
    lat: &MomentumLattice,
    s: T,
    keep_p: impl Fn(usize) -> bool,
    keep_q: impl Fn(usize) -> bool,
    f_of_p: impl Fn(usize) -> T,
) -> TermOperator<T> {
    let mut f = Family::new(2, 1, Some(model.bdag_weight()));
    for p in lat.nonzero().filter(|&p| keep_p(p)) {
        let mp = lat.neg_index(p);
        for q in lat.nonzero().filter(|&q| keep_q(q)) {
            if q == mp {
                continue;
            }
            if let Some(pq) = lat.add_index(p, q) {
                f.push(s * f_of_p(p), &[pq, mp], &[q]);
            }
        }
    }
    TermOperator::from_family(f).plus_adjoint()
}

fn four_pi_a0<T: Real>(inst: &Instance<T>) -> T {
    T::c(4.0 * PI) * inst.a0() * inst.model.nk()
}

/// `G_N^eff`.
pub fn g_eff_terms<T: Real>(inst: &Instance<T>) -> TermOperator<T> {
    let (m, lat) = (&inst.model, &*inst.lattice);
    let n = m.nf();
    let c = four_pi_a0(inst);
    let v0 = m.vhat([0, 0, 0]);
    let constant = TermOperator::number_function(Arc::new(move |k: usize| {
        let k = T::n(k);
        c * (n - k) + (v0 - c) * k * (n - k) / n
    }));
    let mut diag = Family::new(1, 1, Some(Arc::new(move |k: usize| T::one() - T::n(k) / n)));
    let mut pair = Family::new(2, 0, Some(m.bdag_pair_weight()));
    for p in lat.ph_complement() {
        diag.push(v0, &[p], &[p]);
        pair.push(c, &[p, lat.neg_index(p)], &[]);
    }
    let cub = cubic(m, lat, T::one() / n.sqrt(), |_| true, |q| lat.in_pl(q), |p| m.vhat(lat.momentum(p)));
    let mut out = constant;
    out.push_family(diag);
    out.plus(TermOperator::from_family(pair).plus_adjoint())
        .plus(cub)
        .plus(operators::excitation_h(m, lat))
}

/// `J_N^eff`.
pub fn j_eff_terms<T: Real>(inst: &Instance<T>) -> TermOperator<T> {
    let (m, lat) = (&inst.model, &*inst.lattice);
    let n = m.nf();
    let c = four_pi_a0(inst);
    let constant = TermOperator::number_function(Arc::new(move |k: usize| {
        let k = T::n(k);
        c * n - c * k * k / n
    }));
    let two_c = T::c(2.0) * c;
    let mut bb = Family::new(1, 1, Some(m.bdag_b_weight()));
    let mut pair = Family::new(2, 0, Some(m.bdag_pair_weight()));
    for p in lat.ph_complement() {
        bb.push(two_c, &[p], &[p]);
        pair.push(c, &[p, lat.neg_index(p)], &[]);
    }
    let cub = cubic(
        m,
        lat,
        two_c / n.sqrt(),
        |p| lat.in_ph_complement(p),
        |q| lat.in_pl(q),
        |_| T::one(),
    );
    let mut out = constant;
    out.push_family(bb);
    out.plus(TermOperator::from_family(pair).plus_adjoint())
        .plus(cub)
        .plus(operators::excitation_h(m, lat))
}

/// Operators of the square completion in `g_r = b_r + c_r + e_r` over `r ∈ P_H^c`.
#[derive(Clone, Debug)]
pub struct MPieces<T> {
    /// `8πa₀N^κ Σ g*_r g_r`.
    pub g_form: Csr<T>,
    /// `Σ [g*_r g_r + ½ g*_r g*_{-r} + ½ g_{-r} g_r]`.
    pub quadratic: Csr<T>,
    /// `½ Σ (g*_r + g_{-r})(g_r + g*_{-r}) − ½ Σ [g_r, g*_r]`.
    pub completed: Csr<T>,
    /// `Σ [g_r, g*_r]` from matrix products.
    pub commutator: Csr<T>,
    /// The same sum from its closed six-term form.
    pub commutator_formula: Csr<T>,
}

/// Closed form of `[g_r, g*_r]`.
pub fn g_commutator_terms<T: Real>(model: &Model<T>, lat: &MomentumLattice, r: usize) -> TermOperator<T> {
    let n = model.nf();
    let mut out = TermOperator::number_function(Arc::new(move |k: usize| (n - T::n(k)) / n));
    let inv = T::one() / n;
    let quarter = T::c(0.25) * inv;
    let mut f = Family::new(1, 1, None);
    f.push(-inv, &[r], &[r]);
    for v in lat.pl() {
        let Some(vr) = lat.add_index(v, r) else { continue };
        if lat.is_zero(vr) {
            continue;
        }
        let s = if lat.in_pl(vr) { quarter } else { inv };
        f.push(s, &[v], &[v]);
        f.push(-s, &[vr], &[vr]);
    }
    out.push_family(f);
    out
}

pub fn m_pieces<T: Real>(inst: &Instance<T>) -> Result<MPieces<T>> {
    let (m, lat, basis) = (&inst.model, &*inst.lattice, &*inst.basis);
    let dim = basis.dim();
    let mut quadratic = Csr::zeros(dim, dim);
    let mut completed_sq = Csr::zeros(dim, dim);
    let mut commutator = Csr::zeros(dim, dim);
    let mut formula = TermOperator::zero();
    let half = T::c(0.5);
    let rs: Vec<usize> = lat.ph_complement().collect();
    let gd: Vec<Csr<T>> = rs
        .iter()
        .map(|&r| Ok(operators::g_dag(m, lat, lat.momentum(r))?.assemble(basis)))
        .collect::<Result<_>>()?;
    let pos = |i: usize| rs.iter().position(|&r| r == i).expect("P_H^c closed under negation");
    for (k, &r) in rs.iter().enumerate() {
        let g_star = &gd[k];
        let g = g_star.transpose();
        let mk = pos(lat.neg_index(r));
        let g_star_m = &gd[mk];
        let g_m = g_star_m.transpose();
        let term = g_star
            .matmul(&g)
            .lin_comb(T::one(), &g_star.matmul(g_star_m), half)
            .lin_comb(T::one(), &g_m.matmul(&g), half);
        quadratic = quadratic.add(&term);
        let left = g_star.add(&g_m);
        let right = g.add(g_star_m);
        completed_sq = completed_sq.add(&left.matmul(&right));
        commutator = commutator.add(&g.commutator(g_star));
        formula = formula.plus(g_commutator_terms(m, lat, r));
    }
    let completed = completed_sq.lin_comb(half, &commutator, -half);
    let g_form = gd
        .iter()
        .fold(Csr::zeros(dim, dim), |acc, gs| acc.add(&gs.matmul(&gs.transpose())))
        .scaled(T::c(2.0) * four_pi_a0(inst));
    Ok(MPieces {
        g_form,
        quadratic,
        completed,
        commutator,
        commutator_formula: formula.assemble(basis),
    })
}

/// One probe of the remainder `d_q ξ = e^{-B} b_q e^{B} ξ − γ_q b_q ξ − σ_q b*_{-q} ξ`.
#[derive(Clone, Debug, Serialize)]
pub struct RemainderSample {
    pub probe: String,
    pub norm_d: f64,
    /// `N^{-1}[|η_H(q)| ‖(N₊+1)^{3/2}ξ‖ + ‖η_H‖ ‖b_q (N₊+1) ξ‖]`.
    pub envelope: f64,
    /// Coefficients of `d_q ξ`.
    #[serde(skip)]
    pub d: Vec<f64>,
}

pub fn remainder_d<T: Real>(
    inst: &Instance<T>,
    b_gen: &Csr<T>,
    q: Momentum,
    probes: &[(String, Vec<T>)],
    opts: &ExpmvOptions<T>,
) -> Result<Vec<RemainderSample>> {
    let (m, lat, basis) = (&inst.model, &*inst.lattice, &*inst.basis);
    let qi = lat.index_of(q).ok_or(Error::MomentumNotInLattice(q))?;
    let bq = operators::b_op(m, lat, q)?.assemble(basis);
    let bmq_dag = operators::b_dag(m, lat, hilbert::neg(q))?.assemble(basis);
    let gamma = inst.eta.gamma(qi);
    let sigma = inst.eta.sigma(qi);
    let eta_q = inst.eta.eta_h(qi).abs();
    let eta_norm = inst.eta.norm_h();
    let nf = m.nf();
    let totals: Vec<T> = (0..basis.dim()).map(|i| T::n(basis.total(i)) + T::one()).collect();
    probes
        .iter()
        .map(|(label, xi)| {
            let (u, _) = expmv(b_gen, T::one(), xi, opts)?;
            let (conj, _) = expmv(b_gen, -T::one(), &bq.matvec(&u), opts)?;
            let lin1 = bq.matvec(xi);
            let lin2 = bmq_dag.matvec(xi);
            let d: Vec<T> = (0..xi.len())
                .map(|i| conj[i] - gamma * lin1[i] - sigma * lin2[i])
                .collect();
            let n32: Vec<T> = xi.iter().zip(&totals).map(|(&x, &t)| x * t * t.sqrt()).collect();
            let n1: Vec<T> = xi.iter().zip(&totals).map(|(&x, &t)| x * t).collect();
            let env = (eta_q * linalg::norm2(&n32) + eta_norm * linalg::norm2(&bq.matvec(&n1))) / nf;
            Ok(RemainderSample {
                probe: label.clone(),
                norm_d: linalg::norm2(&d).to64(),
                envelope: env.to64(),
                d: d.iter().map(|v| v.to64()).collect(),
            })
        })
        .collect()
}
