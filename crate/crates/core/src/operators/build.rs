//! Builders for the operators of the model, as [`TermOperator`]s on a lattice.
//!
//! Mode `i` of a basis is lattice index `i`. Excitation operators expect a
//! lattice without the zero mode; [`hamiltonian_n`] expects one with it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hilbert::{self, Momentum, MomentumLattice, OccupationBasis, ParticleRule, TWO_PI};
use crate::linalg::Csr;
use crate::scalar::Real;
use crate::scattering::PotentialSpec;

use super::terms::{Family, NumberWeight, TermOperator};

/// Particle number, scaling exponent and potential.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub n: usize,
    pub kappa: T,
    pub potential: PotentialSpec,
}

impl<T: Real> Model<T> {
    pub fn new(n: usize, kappa: T, potential: PotentialSpec) -> Result<Self> {
        let m = Self { n, kappa, potential };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be positive".into()));
        }
        let k = self.kappa.to64();
        if !(0.0..1.0).contains(&k) {
            return Err(Error::InvalidParameter(format!("kappa = {k} outside [0, 1)")));
        }
        let ratio = self.potential.range() / self.length_scale().to64();
        if ratio > 0.5 {
            return Err(Error::InvalidParameter(format!(
                "R / N^(1-kappa) = {ratio} exceeds 1/2"
            )));
        }
        Ok(())
    }

    /// `N^κ`.
    pub fn nk(&self) -> T {
        T::n(self.n).powf(self.kappa)
    }

    /// `N^{1-κ}`.
    pub fn length_scale(&self) -> T {
        T::n(self.n).powf(T::one() - self.kappa)
    }

    pub fn nf(&self) -> T {
        T::n(self.n)
    }

    /// `N^κ V̂(p / N^{1-κ})` at lattice momentum `p = 2πn`.
    pub fn vhat(&self, n: Momentum) -> T {
        let k = T::c(TWO_PI * (hilbert::norm2_int(n) as f64).sqrt());
        self.nk() * self.potential.fourier(k / self.length_scale())
    }

    /// `√((N - m)/N)`, zero once `m ≥ N`.
    fn root(&self, m: isize) -> T {
        let n = self.n as isize;
        if m >= n {
            T::zero()
        } else {
            (T::n((n - m) as usize) / self.nf()).sqrt()
        }
    }

    /// Weight of `b_p` in terms of the input excitation number.
    pub fn b_weight(&self) -> NumberWeight<T> {
        let m = self.clone();
        Arc::new(move |k: usize| m.root(k as isize - 1))
    }

    /// Weight of `b*_p`.
    pub fn bdag_weight(&self) -> NumberWeight<T> {
        let m = self.clone();
        Arc::new(move |k: usize| m.root(k as isize))
    }

    /// Weight of `b*_p b*_q`.
    pub fn bdag_pair_weight(&self) -> NumberWeight<T> {
        let m = self.clone();
        Arc::new(move |k: usize| m.root(k as isize) * m.root(k as isize + 1))
    }

    /// Weight of `b_p b_q`.
    pub fn b_pair_weight(&self) -> NumberWeight<T> {
        let m = self.clone();
        Arc::new(move |k: usize| m.root(k as isize - 1) * m.root(k as isize - 2))
    }

    /// Weight of `b*_p b_q`.
    pub fn bdag_b_weight(&self) -> NumberWeight<T> {
        let m = self.clone();
        Arc::new(move |k: usize| {
            let r = m.root(k as isize - 1);
            r * r
        })
    }
}

pub fn lattice_of(basis: &OccupationBasis) -> Result<&Arc<MomentumLattice>> {
    basis
        .lattice()
        .ok_or_else(|| Error::BasisMismatch("basis has no momentum lattice".into()))
}

fn check_nonzero(lat: &MomentumLattice, i: usize) -> Result<()> {
    if lat.is_zero(i) {
        Err(Error::ZeroMomentum)
    } else {
        Ok(())
    }
}

fn mode(lat: &MomentumLattice, p: Momentum) -> Result<usize> {
    lat.index_of(p).ok_or(Error::MomentumNotInLattice(p))
}

/// `Σ_i w_i a*_i a_i` over the given modes.
pub fn diagonal_one_body<T: Real>(modes: impl IntoIterator<Item = (usize, T)>) -> TermOperator<T> {
    let mut f = Family::new(1, 1, None);
    for (i, w) in modes {
        f.push(w, &[i], &[i]);
    }
    TermOperator::from_family(f)
}

pub fn annihilation<T: Real>(lat: &MomentumLattice, p: Momentum) -> Result<TermOperator<T>> {
    let i = mode(lat, p)?;
    let mut f = Family::new(0, 1, None);
    f.push(T::one(), &[], &[i]);
    Ok(TermOperator::from_family(f))
}

pub fn creation<T: Real>(lat: &MomentumLattice, p: Momentum) -> Result<TermOperator<T>> {
    Ok(annihilation(lat, p)?.adjoint())
}

/// `a*_p a_q` as a single word, exact on fixed-number spaces.
pub fn hopping<T: Real>(lat: &MomentumLattice, p: Momentum, q: Momentum) -> Result<TermOperator<T>> {
    let (i, j) = (mode(lat, p)?, mode(lat, q)?);
    let mut f = Family::new(1, 1, None);
    f.push(T::one(), &[i], &[j]);
    Ok(TermOperator::from_family(f))
}

/// `b_p = √((N − N₊)/N) a_p`.
pub fn b_op<T: Real>(model: &Model<T>, lat: &MomentumLattice, p: Momentum) -> Result<TermOperator<T>> {
    let i = mode(lat, p)?;
    check_nonzero(lat, i)?;
    let mut f = Family::new(0, 1, Some(model.b_weight()));
    f.push(T::one(), &[], &[i]);
    Ok(TermOperator::from_family(f))
}

/// `b*_p = a*_p √((N − N₊)/N)`.
pub fn b_dag<T: Real>(model: &Model<T>, lat: &MomentumLattice, p: Momentum) -> Result<TermOperator<T>> {
    Ok(b_op(model, lat, p)?.adjoint())
}

/// `N₊`, counted over nonzero modes.
pub fn number<T: Real>(lat: &MomentumLattice) -> TermOperator<T> {
    diagonal_one_body(lat.nonzero().map(|i| (i, T::one())))
}

/// `Σ_{|p| ≥ θ} a*_p a_p` over nonzero modes.
pub fn number_geq<T: Real>(lat: &MomentumLattice, theta: f64) -> TermOperator<T> {
    let slack = 1e-12 * theta.abs().max(1.0);
    diagonal_one_body(
        lat.nonzero()
            .filter(|&i| lat.norm(i) >= theta - slack)
            .map(|i| (i, T::one())),
    )
}

/// `Σ_{0 < |p| < θ} a*_p a_p`.
pub fn number_lt<T: Real>(lat: &MomentumLattice, theta: f64) -> TermOperator<T> {
    let slack = 1e-12 * theta.abs().max(1.0);
    diagonal_one_body(
        lat.nonzero()
            .filter(|&i| lat.norm(i) < theta - slack)
            .map(|i| (i, T::one())),
    )
}

/// Kinetic energy `Σ p² a*_p a_p`.
pub fn kinetic<T: Real>(lat: &MomentumLattice) -> TermOperator<T> {
    diagonal_one_body(lat.nonzero().map(|i| (i, T::c(lat.p2(i)))))
}

/// Kinetic energy restricted to `P_L`.
pub fn kinetic_low<T: Real>(lat: &MomentumLattice) -> TermOperator<T> {
    diagonal_one_body(lat.pl().map(|i| (i, T::c(lat.p2(i)))))
}

/// Kinetic energy restricted to `|p| ≤ θ`.
pub fn kinetic_leq<T: Real>(lat: &MomentumLattice, theta: f64) -> TermOperator<T> {
    let slack = 1e-12 * theta.abs().max(1.0);
    diagonal_one_body(
        lat.nonzero()
            .filter(|&i| lat.norm(i) <= theta + slack)
            .map(|i| (i, T::c(lat.p2(i)))),
    )
}

/// Quartic interaction `(1/2N) Σ F(r) a*_{p+r} a*_q a_p a_{q+r}` over modes selected by `keep`,
/// excluding zero-momentum operators unless `keep` admits them.
fn quartic<T: Real>(
    lat: &MomentumLattice,
    prefactor: T,
    keep: impl Fn(usize) -> bool,
    f_of_r: impl Fn(Momentum) -> T,
) -> TermOperator<T> {
    let modes: Vec<usize> = (0..lat.len()).filter(|&i| keep(i)).collect();
    let mut fam = Family::new(2, 2, None);
    for &p in &modes {
        for &q in &modes {
            for &pr in &modes {
                let r = hilbert::sub(lat.momentum(pr), lat.momentum(p));
                let Some(qr) = lat.index_of(hilbert::add(lat.momentum(q), r)) else {
                    continue;
                };
                if !keep(qr) {
                    continue;
                }
                fam.push(prefactor * f_of_r(r), &[pr, q], &[p, qr]);
            }
        }
    }
    TermOperator::from_family(fam)
}

/// Excitation interaction `V_N`; also the quartic part `L4` of the excitation Hamiltonian.
pub fn interaction_vn<T: Real>(model: &Model<T>, lat: &MomentumLattice) -> TermOperator<T> {
    let pre = T::one() / (T::c(2.0) * model.nf());
    quartic(lat, pre, |i| !lat.is_zero(i), |r| model.vhat(r))
}

/// `Z(F)`: quartic term with all four momenta in `P_L` and kernel `F(u)`.
pub fn z_operator<T: Real>(model: &Model<T>, lat: &MomentumLattice, f: impl Fn(Momentum) -> T) -> TermOperator<T> {
    let pre = T::one() / (T::c(2.0) * model.nf());
    quartic(lat, pre, |i| lat.in_pl(i), f)
}

/// Low-momentum interaction `V_{N,L}`.
pub fn interaction_low<T: Real>(model: &Model<T>, lat: &MomentumLattice) -> TermOperator<T> {
    z_operator(model, lat, |u| model.vhat(u))
}

/// `K + V_N` on the excitation space.
pub fn excitation_h<T: Real>(model: &Model<T>, lat: &MomentumLattice) -> TermOperator<T> {
    kinetic(lat).plus(interaction_vn(model, lat))
}

/// Full Hamiltonian `H_N` on a lattice that contains the zero mode.
pub fn hamiltonian_n<T: Real>(model: &Model<T>, lat: &MomentumLattice) -> Result<TermOperator<T>> {
    if lat.zero_index().is_none() {
        return Err(Error::BasisMismatch("H_N needs the zero mode".into()));
    }
    let pre = T::one() / (T::c(2.0) * model.nf());
    Ok(kinetic(lat).plus(quartic(lat, pre, |_| true, |r| model.vhat(r))))
}

/// Constant-in-momentum part `L0`, a function of `N₊`.
pub fn l0<T: Real>(model: &Model<T>) -> TermOperator<T> {
    let n = model.nf();
    let v0 = model.vhat([0, 0, 0]);
    let two = T::c(2.0);
    TermOperator::number_function(Arc::new(move |k: usize| {
        let k = T::n(k);
        (n - T::one()) / (two * n) * v0 * (n - k) + v0 / (two * n) * k * (n - k)
    }))
}

/// Quadratic part `L2`.
pub fn l2<T: Real>(model: &Model<T>, lat: &MomentumLattice) -> TermOperator<T> {
    let n = model.nf();
    let mut bb = Family::new(1, 1, Some(model.bdag_b_weight()));
    let mut aa = Family::new(1, 1, None);
    let mut pair = Family::new(2, 0, Some(model.bdag_pair_weight()));
    for p in lat.nonzero() {
        let v = model.vhat(lat.momentum(p));
        bb.push(v, &[p], &[p]);
        aa.push(-v / n, &[p], &[p]);
        pair.push(v / T::c(2.0), &[p, lat.neg_index(p)], &[]);
    }
    let mut out = kinetic(lat);
    out.push_family(bb);
    out.push_family(aa);
    out.plus(TermOperator::from_family(pair).plus_adjoint())
}

/// Cubic part `L3`.
pub fn l3<T: Real>(model: &Model<T>, lat: &MomentumLattice) -> TermOperator<T> {
    let pre = T::one() / model.nf().sqrt();
    let mut f = Family::new(2, 1, Some(model.bdag_weight()));
    for p in lat.nonzero() {
        let mp = lat.neg_index(p);
        let v = model.vhat(lat.momentum(p));
        for q in lat.nonzero() {
            if q == mp {
                continue;
            }
            if let Some(pq) = lat.add_index(p, q) {
                f.push(pre * v, &[pq, mp], &[q]);
            }
        }
    }
    TermOperator::from_family(f).plus_adjoint()
}

/// Quartic part `L4`.
pub fn l4<T: Real>(model: &Model<T>, lat: &MomentumLattice) -> TermOperator<T> {
    interaction_vn(model, lat)
}

/// `L0 + L2 + L3 + L4`.
pub fn excitation_hamiltonian<T: Real>(model: &Model<T>, lat: &MomentumLattice) -> TermOperator<T> {
    l0(model)
        .plus(l2(model, lat))
        .plus(l3(model, lat))
        .plus(l4(model, lat))
}

/// Shifted one-body term `Σ_{v∈P_L, v+r selected} s · a*_{v+r} a_v`.
fn shifted_low<T: Real>(
    lat: &MomentumLattice,
    r: Momentum,
    s: T,
    target: impl Fn(usize) -> bool,
) -> TermOperator<T> {
    let mut f = Family::new(1, 1, None);
    for v in lat.pl() {
        let vr = hilbert::add(lat.momentum(v), r);
        if vr == [0, 0, 0] {
            continue;
        }
        if let Some(j) = lat.index_of(vr) {
            if target(j) {
                f.push(s, &[j], &[v]);
            }
        }
    }
    TermOperator::from_family(f)
}

/// `c*_r = N^{-1/2} Σ_{v∈P_L, v+r∉P_L} a*_{v+r} a_v`.
pub fn c_dag<T: Real>(model: &Model<T>, lat: &MomentumLattice, r: Momentum) -> TermOperator<T> {
    shifted_low(lat, r, T::one() / model.nf().sqrt(), |j| !lat.in_pl(j))
}

/// `e*_r = (2√N)^{-1} Σ_{v, v+r∈P_L} a*_{v+r} a_v`.
pub fn e_dag<T: Real>(model: &Model<T>, lat: &MomentumLattice, r: Momentum) -> TermOperator<T> {
    shifted_low(lat, r, T::one() / (T::c(2.0) * model.nf().sqrt()), |j| lat.in_pl(j))
}

/// `g*_r = b*_r + c*_r + e*_r`.
pub fn g_dag<T: Real>(model: &Model<T>, lat: &MomentumLattice, r: Momentum) -> Result<TermOperator<T>> {
    Ok(b_dag(model, lat, r)?
        .plus(c_dag(model, lat, r))
        .plus(e_dag(model, lat, r)))
}

/// Matrix of the excitation map `U_N` from the `N`-particle space on a lattice with
/// the zero mode onto the truncated excitation space on the lattice without it.
pub fn excitation_map<T: Real>(full: &OccupationBasis, excitation: &OccupationBasis) -> Result<Csr<T>> {
    let full_lat = lattice_of(full)?;
    let exc_lat = lattice_of(excitation)?;
    let zero = full_lat
        .zero_index()
        .ok_or_else(|| Error::BasisMismatch("full lattice lacks the zero mode".into()))?;
    let n = match full.rule() {
        ParticleRule::Exactly(n) => n,
        ParticleRule::AtMost(_) => {
            return Err(Error::BasisMismatch("full space must have a fixed particle number".into()))
        }
    };
    if excitation.rule() != ParticleRule::AtMost(n) || exc_lat.zero_index().is_some() {
        return Err(Error::BasisMismatch("excitation space must be F_+^{<=N} without zero mode".into()));
    }
    let to_exc: Vec<Option<usize>> = (0..full_lat.len())
        .map(|i| if i == zero { None } else { exc_lat.index_of(full_lat.momentum(i)) })
        .collect();
    if to_exc.iter().filter(|m| m.is_some()).count() != exc_lat.len() {
        return Err(Error::BasisMismatch("lattices differ away from the zero mode".into()));
    }
    let mut occ = vec![0u8; exc_lat.len()];
    let mut trips = Vec::with_capacity(full.dim());
    for j in 0..full.dim() {
        occ.iter_mut().for_each(|o| *o = 0);
        for (i, &k) in full.occupation(j).iter().enumerate() {
            if let Some(e) = to_exc[i] {
                occ[e] = k;
            }
        }
        match excitation.find(&occ) {
            Some(row) => trips.push((row as u32, j as u32, T::one())),
            None if excitation.sectors().is_some() => {}
            None => return Err(Error::BasisMismatch("excitation image outside target basis".into())),
        }
    }
    Ok(Csr::from_triplets(excitation.dim(), full.dim(), &trips))
}

/// `U A U†` for an operator `A` on the full space.
pub fn to_excitation<T: Real>(u: &Csr<T>, a: &Csr<T>) -> Csr<T> {
    u.matmul(a).matmul(&u.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::BasisOptions;

    fn model(n: usize) -> Model<f64> {
        Model::new(n, 0.1, PotentialSpec::soft_sphere(2.0, 0.3)).unwrap()
    }

    fn spaces(n: usize) -> (Arc<OccupationBasis>, Arc<OccupationBasis>) {
        let full = Arc::new(MomentumLattice::new(1, true).with_shells(TWO_PI * 1.2, TWO_PI));
        let exc = Arc::new(full.with_zero_mode(false));
        let opts = BasisOptions::default();
        (
            Arc::new(OccupationBasis::new(full, ParticleRule::Exactly(n), &opts).unwrap()),
            Arc::new(OccupationBasis::new(exc, ParticleRule::AtMost(n), &opts).unwrap()),
        )
    }

    #[test]
    fn excitation_map_is_unitary() {
        let (full, exc) = spaces(3);
        let u: Csr<f64> = excitation_map(&full, &exc).unwrap();
        let uu = u.matmul(&u.transpose());
        assert!(uu.max_abs_diff(&Csr::identity(exc.dim())) == 0.0);
    }

    #[test]
    fn conjugated_hamiltonian_splits_into_l_terms() {
        for n in 1..=3 {
            let (full, exc) = spaces(n);
            let m = model(n);
            let h = hamiltonian_n(&m, lattice_of(&full).unwrap()).unwrap().assemble(&full);
            let u = excitation_map(&full, &exc).unwrap();
            let lhs = to_excitation(&u, &h);
            let rhs = excitation_hamiltonian(&m, lattice_of(&exc).unwrap()).assemble(&exc);
            let err = lhs.max_abs_diff(&rhs);
            assert!(err < 1e-12 * lhs.max_abs(), "N = {n}: {err}");
        }
    }

    #[test]
    fn quartic_equals_z_on_low_modes() {
        let (_, exc) = spaces(3);
        let lat = lattice_of(&exc).unwrap();
        let m = model(3);
        let a = interaction_low(&m, lat).assemble(&exc);
        let b = z_operator(&m, lat, |u| m.vhat(u)).assemble(&exc);
        assert_eq!(a.max_abs_diff(&b), 0.0);
        assert!(a.nnz() > 0);
    }

    #[test]
    fn zero_mode_rejected_for_b() {
        let lat = MomentumLattice::new(1, true);
        assert!(matches!(b_op(&model(2), &lat, [0, 0, 0]), Err(Error::ZeroMomentum)));
        assert!(matches!(annihilation::<f64>(&lat, [3, 0, 0]), Err(Error::MomentumNotInLattice(_))));
    }

    #[test]
    fn range_check() {
        assert!(Model::new(4, 0.0, PotentialSpec::soft_sphere(1.0, 3.0)).is_err());
    }
}
