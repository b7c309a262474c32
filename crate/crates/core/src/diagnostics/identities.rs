//! Exact operator identities on a small excitation space.

use rayon::prelude::*;

use super::{CheckResult, IDENTITY_TOL};
use crate::error::Result;
use crate::hilbert::{self, Momentum, OccupationBasis};
use crate::instance::Instance;
use crate::linalg::Csr;
use crate::operators::{self, Family, TermOperator};
use crate::renorm::{self, GeneratorKind};

/// Max-entry residual of `X = Y` together with that of `X† = Y†`.
fn residual_pair(x: &Csr<f64>, y: &Csr<f64>) -> (f64, f64) {
    (x.max_abs_diff(y), x.transpose().max_abs_diff(&y.transpose()))
}

struct Suite {
    out: Vec<CheckResult>,
}

impl Suite {
    fn push(&mut self, id: &str, note: &str, (direct, adjoint): (f64, f64)) {
        self.out.push(CheckResult::exact(id, direct, IDENTITY_TOL, note));
        self.out.push(CheckResult::exact(
            &format!("{id}.adjoint"),
            adjoint,
            IDENTITY_TOL,
            &format!("{note}; hermitian conjugate"),
        ));
    }
}

fn worst(pairs: impl IntoIterator<Item = (f64, f64)>) -> (f64, f64) {
    pairs
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (f64::max(a, x), f64::max(b, y)))
}

/// Columns with total occupation below `n`.
fn interior_projector(basis: &OccupationBasis, n: usize) -> Csr<f64> {
    let d: Vec<f64> = (0..basis.dim())
        .map(|i| if basis.total(i) < n { 1.0 } else { 0.0 })
        .collect();
    Csr::diagonal(&d)
}

/// Left side of the cubic identity:
/// `(8πa₀N^κ/√N) Σ_{p∈P_H^c, q∈P_L, p+q≠0} [b*_{p+q} a*_{-p} a_q + h.c.]`.
fn cubic_lhs(inst: &Instance<f64>, c: f64) -> TermOperator<f64> {
    let (m, lat) = (&inst.model, &*inst.lattice);
    let mut f = Family::new(2, 1, Some(m.bdag_weight()));
    let pre = c / m.nf().sqrt();
    for p in lat.ph_complement() {
        for q in lat.pl() {
            let Some(pq) = lat.add_index(p, q) else { continue };
            if lat.is_zero(pq) {
                continue;
            }
            f.push(pre, &[pq, lat.neg_index(p)], &[q]);
        }
    }
    TermOperator::from_family(f).plus_adjoint()
}

/// Right side of the cubic identity built from matrix products of `b`, `c`, `e`.
fn cubic_rhs(inst: &Instance<f64>, c: f64) -> Result<Csr<f64>> {
    let (m, lat, basis) = (&inst.model, &*inst.lattice, &*inst.basis);
    let dim = basis.dim();
    let mut acc = Csr::zeros(dim, dim);
    for p in lat.ph_complement() {
        let pm = lat.momentum(p);
        let mp = hilbert::neg(pm);
        let bd_mp = operators::b_dag(m, lat, mp)?.assemble(basis);
        let b_mp = bd_mp.transpose();
        let ed_mp = operators::e_dag(m, lat, mp).assemble(basis);
        let ed_p = operators::e_dag(m, lat, pm).assemble(basis);
        let cd_p = operators::c_dag(m, lat, pm).assemble(basis);
        let terms = [
            bd_mp.matmul(&ed_mp.transpose()),
            ed_mp.matmul(&b_mp),
            bd_mp.matmul(&ed_p),
            ed_p.transpose().matmul(&b_mp),
            bd_mp.matmul(&cd_p),
            cd_p.transpose().matmul(&b_mp),
        ];
        for t in &terms {
            acc = acc.add(t);
        }
    }
    Ok(acc.scaled(c))
}

/// Runs every exact identity on `inst`, which should be small (M = 1, N ≤ 3) and
/// carry no sector filter so that the excitation map is a bijection.
pub fn check_identities(inst: &Instance<f64>) -> Result<Vec<CheckResult>> {
    let (m, lat, basis) = (&inst.model, &*inst.lattice, &*inst.basis);
    let n = inst.n();
    let nf = n as f64;
    let dim = basis.dim();
    let id = Csr::identity(dim);
    let mut s = Suite { out: Vec::new() };
    let modes: Vec<Momentum> = lat.momenta().to_vec();

    let a: Vec<Csr<f64>> = modes
        .par_iter()
        .map(|&p| Ok(operators::annihilation(lat, p)?.assemble(basis)))
        .collect::<Result<_>>()?;
    let ad: Vec<Csr<f64>> = modes
        .par_iter()
        .map(|&p| Ok(operators::creation(lat, p)?.assemble(basis)))
        .collect::<Result<_>>()?;
    let b: Vec<Csr<f64>> = modes
        .par_iter()
        .map(|&p| Ok(operators::b_op(m, lat, p)?.assemble(basis)))
        .collect::<Result<_>>()?;
    let bd: Vec<Csr<f64>> = b.iter().map(Csr::transpose).collect();
    let hop = |p: usize, q: usize| -> Result<Csr<f64>> {
        Ok(operators::hopping(lat, modes[p], modes[q])?.assemble(basis))
    };
    let nplus = operators::number(lat).assemble(basis);
    let k = modes.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|p| (0..k).map(move |q| (p, q))).collect();

    // [a_p, a*_q] = δ_pq below the truncation.
    let interior = interior_projector(basis, n);
    let ccr = pairs.par_iter().map(|&(p, q)| {
        let lhs = a[p].commutator(&ad[q]).matmul(&interior);
        let rhs = if p == q { interior.clone() } else { Csr::zeros(dim, dim) };
        residual_pair(&lhs, &rhs)
    });
    s.push("ccr_interior", "[a_p, a*_q] = δ_pq on states with N₊ < N", worst(ccr.collect::<Vec<_>>()));

    // [b_p, b*_q] = (1 − N₊/N)δ_pq − a*_q a_p/N and [b_p, b_q] = 0.
    let hops: Vec<Csr<f64>> = pairs.par_iter().map(|&(p, q)| hop(p, q)).collect::<Result<_>>()?;
    let hop_at = |p: usize, q: usize| &hops[p * k + q];
    let one_minus = id.lin_comb(1.0, &nplus, -1.0 / nf);
    let comm_bp: Vec<_> = pairs
        .par_iter()
        .map(|&(p, q)| {
            let delta = if p == q { 1.0 } else { 0.0 };
            let rhs = one_minus.lin_comb(delta, hop_at(q, p), -1.0 / nf);
            residual_pair(&b[p].commutator(&bd[q]), &rhs)
        })
        .collect();
    s.push("comm_bp", "[b_p, b*_q] = (1 − N₊/N)δ_pq − a*_q a_p/N", worst(comm_bp));
    let comm_bb: Vec<_> = pairs
        .par_iter()
        .map(|&(p, q)| residual_pair(&b[p].commutator(&b[q]), &Csr::zeros(dim, dim)))
        .collect();
    s.push("comm_bb", "[b_p, b_q] = 0", worst(comm_bb));

    // [b_p, a*_q a_r] = δ_pq b_r; the adjoint form is [a*_r a_q, b*_p] = δ_pq b*_r.
    let comm2: Vec<_> = (0..k)
        .into_par_iter()
        .flat_map_iter(|p| {
            let (b, hops) = (&b, &hops);
            (0..k).flat_map(move |q| {
                (0..k).map(move |r| {
                    let rhs = if p == q { b[r].clone() } else { Csr::zeros(dim, dim) };
                    residual_pair(&b[p].commutator(&hops[q * k + r]), &rhs)
                })
            })
        })
        .collect();
    s.push("comm2", "[b_p, a*_q a_r] = δ_pq b_r", worst(comm2));

    let bn: Vec<_> = b.iter().map(|bp| residual_pair(&bp.commutator(&nplus), bp)).collect();
    s.push("comm_b_number", "[b_p, N₊] = b_p", worst(bn));

    // Excitation map.
    let full = inst.full_basis()?;
    let flat = operators::lattice_of(&full)?.clone();
    let u: Csr<f64> = operators::excitation_map(&full, basis)?;
    s.push(
        "unitarity",
        "U_N U_N† = 1 on F₊^{≤N}",
        residual_pair(&u.matmul(&u.transpose()), &id),
    );
    s.push(
        "unitarity_full",
        "U_N† U_N = 1 on the N-particle space",
        residual_pair(&u.transpose().matmul(&u), &Csr::identity(full.dim())),
    );
    let z = [0, 0, 0];
    let conj = |cre: Momentum, ann: Momentum| -> Result<Csr<f64>> {
        Ok(operators::to_excitation(&u, &operators::hopping(&flat, cre, ann)?.assemble(&full)))
    };
    s.push(
        "u_rule_condensate",
        "U a*₀a₀ U† = N − N₊",
        residual_pair(&conj(z, z)?, &id.lin_comb(nf, &nplus, -1.0)),
    );
    let root = nf.sqrt();
    let mut cre = Vec::new();
    let mut ann = Vec::new();
    for p in 0..k {
        cre.push(residual_pair(&conj(modes[p], z)?, &bd[p].scaled(root)));
        ann.push(residual_pair(&conj(z, modes[p])?, &b[p].scaled(root)));
    }
    s.push("u_rule_creation", "U a*_p a₀ U† = √N b*_p", worst(cre));
    s.push("u_rule_annihilation", "U a*₀ a_p U† = √N b_p", worst(ann));
    let hop_rule: Vec<_> = pairs
        .iter()
        .map(|&(p, q)| Ok(residual_pair(&conj(modes[p], modes[q])?, hop_at(p, q))))
        .collect::<Result<_>>()?;
    s.push("u_rule_hopping", "U a*_p a_q U† = a*_p a_q", worst(hop_rule));

    // U H U† = L0 + L2 + L3 + L4.
    let h = operators::hamiltonian_n(m, &flat)?.assemble(&full);
    let l = operators::excitation_hamiltonian(m, lat).assemble(basis);
    s.push(
        "decomposition",
        "U_N H_N U_N† = L⁽⁰⁾ + L⁽²⁾ + L⁽³⁾ + L⁽⁴⁾",
        residual_pair(&operators::to_excitation(&u, &h), &l),
    );

    // Cubic identity and e*_r = e_{-r}.
    let c8 = 8.0 * std::f64::consts::PI * inst.a0() * m.nk();
    s.push(
        "cubic_bce",
        "cubic term rewritten through b, c, e",
        residual_pair(&cubic_lhs(inst, c8).assemble(basis), &cubic_rhs(inst, c8)?),
    );
    let e_sym: Vec<_> = modes
        .iter()
        .map(|&r| {
            let ed = operators::e_dag(m, lat, r).assemble(basis);
            let e_neg = operators::e_dag(m, lat, hilbert::neg(r)).assemble(basis).transpose();
            residual_pair(&ed, &e_neg)
        })
        .collect();
    s.push("e_reflection", "e*_r = e_{-r}", worst(e_sym));

    // Square completion in g_r.
    let mp = renorm::m_pieces(inst)?;
    s.push(
        "square_completion",
        "Σ(g*g + ½g*g* + ½gg) = ½Σ(g*+g)(g+g*) − ½Σ[g,g*]",
        residual_pair(&mp.quadratic, &mp.completed),
    );
    s.push(
        "g_commutator",
        "Σ[g_r, g*_r] matches its six-term closed form",
        residual_pair(&mp.commutator, &mp.commutator_formula),
    );

    // [D, N₊] = 0.
    let d = renorm::build_generator(GeneratorKind::QuarticD, inst)?;
    s.push(
        "quartic_number",
        "[D, N₊] = 0",
        residual_pair(&d.matrix().commutator(&nplus), &Csr::zeros(dim, dim)),
    );
    Ok(s.out)
}
