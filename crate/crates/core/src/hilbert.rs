//! Momentum lattice, shell classification and bosonic occupation bases.
//!
//! Momenta are stored as integer triples `n`, with physical momentum `p = 2πn`
//! on the unit torus.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Momentum = [i32; 3];

pub const TWO_PI: f64 = 2.0 * PI;

/// Relative slack used when comparing lattice norms against shell radii.
const RADIUS_SLACK: f64 = 1e-12;

pub fn norm2_int(n: Momentum) -> i64 {
    n.iter().map(|&x| (x as i64) * (x as i64)).sum()
}

pub fn neg(n: Momentum) -> Momentum {
    [-n[0], -n[1], -n[2]]
}

pub fn add(a: Momentum, b: Momentum) -> Momentum {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Momentum, b: Momentum) -> Momentum {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[derive(Clone, Debug)]
pub struct MomentumLattice {
    cutoff: u32,
    include_zero: bool,
    momenta: Vec<Momentum>,
    index: HashMap<Momentum, usize>,
    negation: Vec<usize>,
    ph_radius: f64,
    pl_radius: f64,
    in_ph: Vec<bool>,
    in_pl: Vec<bool>,
}

/// Outcome of [`MomentumLattice::classify`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassifyReport {
    pub n_ph: usize,
    pub n_pl: usize,
    /// Set when some low momentum is also high, i.e. the shells overlap.
    pub overlap: bool,
}

impl MomentumLattice {
    /// All `n ∈ {-M..M}³`, optionally without the origin, sorted by (|n|², lexicographic).
    /// Both shells start empty-radius: `P_H` is everything nonzero, `P_L` is empty.
    pub fn new(cutoff: u32, include_zero: bool) -> Self {
        let m = cutoff as i32;
        let mut momenta = Vec::with_capacity(((2 * m + 1) as usize).pow(3));
        for x in -m..=m {
            for y in -m..=m {
                for z in -m..=m {
                    let n = [x, y, z];
                    if include_zero || n != [0, 0, 0] {
                        momenta.push(n);
                    }
                }
            }
        }
        momenta.sort_by_key(|&n| (norm2_int(n), n));
        let index: HashMap<Momentum, usize> =
            momenta.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let negation = momenta.iter().map(|&n| index[&neg(n)]).collect();
        let mut lat = Self {
            cutoff,
            include_zero,
            in_ph: vec![false; momenta.len()],
            in_pl: vec![false; momenta.len()],
            momenta,
            index,
            negation,
            ph_radius: 0.0,
            pl_radius: 0.0,
        };
        lat.classify(0.0, 0.0);
        lat
    }

    /// Set `P_H = {p ≠ 0 : |p| ≥ ph_radius}` and `P_L = {p ≠ 0 : |p| ≤ pl_radius}` (absolute units).
    pub fn classify(&mut self, ph_radius: f64, pl_radius: f64) -> ClassifyReport {
        self.ph_radius = ph_radius.max(0.0);
        self.pl_radius = pl_radius.max(0.0);
        let rh = (self.ph_radius / TWO_PI).powi(2);
        let rl = (self.pl_radius / TWO_PI).powi(2);
        for (i, &n) in self.momenta.iter().enumerate() {
            let q = norm2_int(n) as f64;
            let nonzero = n != [0, 0, 0];
            self.in_ph[i] = nonzero && q >= rh * (1.0 - RADIUS_SLACK);
            self.in_pl[i] = nonzero && pl_radius > 0.0 && q <= rl * (1.0 + RADIUS_SLACK);
        }
        self.report()
    }

    pub fn with_shells(mut self, ph_radius: f64, pl_radius: f64) -> Self {
        self.classify(ph_radius, pl_radius);
        self
    }

    pub fn report(&self) -> ClassifyReport {
        let n_ph = self.in_ph.iter().filter(|&&b| b).count();
        let n_pl = self.in_pl.iter().filter(|&&b| b).count();
        let overlap = self.in_ph.iter().zip(&self.in_pl).any(|(&h, &l)| h && l);
        ClassifyReport {
            n_ph,
            n_pl,
            overlap,
        }
    }

    /// Same momenta with the origin removed (or added), shells preserved.
    pub fn with_zero_mode(&self, include_zero: bool) -> Self {
        Self::new(self.cutoff, include_zero).with_shells(self.ph_radius, self.pl_radius)
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }
    pub fn include_zero(&self) -> bool {
        self.include_zero
    }
    pub fn len(&self) -> usize {
        self.momenta.len()
    }
    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }
    pub fn momenta(&self) -> &[Momentum] {
        &self.momenta
    }
    pub fn momentum(&self, i: usize) -> Momentum {
        self.momenta[i]
    }
    pub fn index_of(&self, n: Momentum) -> Option<usize> {
        self.index.get(&n).copied()
    }
    pub fn neg_index(&self, i: usize) -> usize {
        self.negation[i]
    }
    /// Index of `momenta[i] + momenta[j]` if representable.
    pub fn add_index(&self, i: usize, j: usize) -> Option<usize> {
        self.index_of(add(self.momenta[i], self.momenta[j]))
    }
    pub fn zero_index(&self) -> Option<usize> {
        self.index_of([0, 0, 0])
    }
    pub fn is_zero(&self, i: usize) -> bool {
        self.momenta[i] == [0, 0, 0]
    }
    /// |p|² = (2π)²|n|².
    pub fn p2(&self, i: usize) -> f64 {
        TWO_PI * TWO_PI * norm2_int(self.momenta[i]) as f64
    }
    pub fn norm(&self, i: usize) -> f64 {
        self.p2(i).sqrt()
    }
    pub fn ph_radius(&self) -> f64 {
        self.ph_radius
    }
    pub fn pl_radius(&self) -> f64 {
        self.pl_radius
    }
    pub fn in_ph(&self, i: usize) -> bool {
        self.in_ph[i]
    }
    pub fn in_pl(&self, i: usize) -> bool {
        self.in_pl[i]
    }
    /// Nonzero and not high.
    pub fn in_ph_complement(&self, i: usize) -> bool {
        !self.is_zero(i) && !self.in_ph[i]
    }
    pub fn nonzero(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| !self.is_zero(i))
    }
    pub fn ph(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.in_ph[i])
    }
    pub fn pl(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.in_pl[i])
    }
    pub fn ph_complement(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.in_ph_complement(i))
    }
}

/// `(N^α, N^β)`: the asymptotic shell radii, for documentation next to the configured ones.
pub fn threshold_radii(n: usize, alpha: f64, beta: f64) -> (f64, f64) {
    let nf = n as f64;
    (nf.powf(alpha), nf.powf(beta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParticleRule {
    /// Excitation space: total occupation ≤ N.
    AtMost(usize),
    /// Full space: total occupation = N.
    Exactly(usize),
}

impl ParticleRule {
    pub fn n(self) -> usize {
        match self {
            Self::AtMost(n) | Self::Exactly(n) => n,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BasisOptions {
    /// Refuse to enumerate more states than this.
    pub max_dim: usize,
    /// Keep only states whose total momentum lies in this list.
    pub sectors: Option<Vec<Momentum>>,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self {
            max_dim: 20_000_000,
            sectors: None,
        }
    }
}

impl BasisOptions {
    pub fn sectors(sectors: Vec<Momentum>) -> Self {
        Self {
            sectors: Some(sectors),
            ..Self::default()
        }
    }
    pub fn zero_sector() -> Self {
        Self::sectors(vec![[0, 0, 0]])
    }
}

pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Enumerated occupation configurations with a perfect-hash index.
#[derive(Debug)]
pub struct OccupationBasis {
    lattice: Option<Arc<MomentumLattice>>,
    n_modes: usize,
    rule: ParticleRule,
    sectors: Option<Vec<Momentum>>,
    states: Vec<u8>,
    totals: Vec<u8>,
    index: HashMap<Box<[u8]>, u32>,
}

impl OccupationBasis {
    /// Basis over the lattice modes, in ascending lexicographic order of occupation vectors.
    pub fn new(
        lattice: Arc<MomentumLattice>,
        rule: ParticleRule,
        opts: &BasisOptions,
    ) -> Result<Self> {
        let m = lattice.len();
        Self::build(Some(lattice), m, rule, opts)
    }

    /// Basis over abstract modes with no momentum labels.
    pub fn abstract_modes(n_modes: usize, rule: ParticleRule, max_dim: usize) -> Result<Self> {
        Self::build(
            None,
            n_modes,
            rule,
            &BasisOptions {
                max_dim,
                sectors: None,
            },
        )
    }

    fn build(
        lattice: Option<Arc<MomentumLattice>>,
        n_modes: usize,
        rule: ParticleRule,
        opts: &BasisOptions,
    ) -> Result<Self> {
        let n = rule.n();
        if n > u8::MAX as usize {
            return Err(Error::InvalidParameter(format!("N = {n} exceeds 255")));
        }
        if n_modes > u16::MAX as usize {
            return Err(Error::InvalidParameter("too many modes".into()));
        }
        if opts.sectors.is_some() && lattice.is_none() {
            return Err(Error::InvalidParameter(
                "momentum sectors need a lattice".into(),
            ));
        }
        let formula = Self::dimension_formula(n_modes, rule);
        if opts.sectors.is_none() && formula > opts.max_dim as u128 {
            return Err(Error::DimensionBudget {
                dim: formula,
                budget: opts.max_dim,
            });
        }
        if rule == ParticleRule::Exactly(n) && n_modes == 0 && n > 0 {
            return Ok(Self::from_states(lattice, 0, rule, opts.sectors.clone(), Vec::new()));
        }
        let moms: Vec<Momentum> = match &lattice {
            Some(l) => l.momenta().to_vec(),
            None => vec![[0, 0, 0]; n_modes],
        };
        let mut en = Enumerator {
            n_modes,
            exact: matches!(rule, ParticleRule::Exactly(_)),
            moms: &moms,
            sectors: opts.sectors.as_deref(),
            occ: vec![0u8; n_modes],
            out: Vec::new(),
            count: 0,
            budget: opts.max_dim,
            overflow: false,
        };
        en.recurse(0, n, [0, 0, 0]);
        if en.overflow {
            return Err(Error::DimensionBudget {
                dim: en.count as u128,
                budget: opts.max_dim,
            });
        }
        let states = en.out;
        Ok(Self::from_states(lattice, n_modes, rule, opts.sectors.clone(), states))
    }

    fn from_states(
        lattice: Option<Arc<MomentumLattice>>,
        n_modes: usize,
        rule: ParticleRule,
        sectors: Option<Vec<Momentum>>,
        states: Vec<u8>,
    ) -> Self {
        let dim = if n_modes == 0 {
            usize::from(rule.n() == 0 || matches!(rule, ParticleRule::AtMost(_)))
        } else {
            states.len() / n_modes
        };
        let mut index = HashMap::with_capacity(dim);
        let mut totals = Vec::with_capacity(dim);
        for i in 0..dim {
            let s = &states[i * n_modes..(i + 1) * n_modes];
            index.insert(s.to_vec().into_boxed_slice(), i as u32);
            totals.push(s.iter().map(|&x| x as u32).sum::<u32>() as u8);
        }
        Self {
            lattice,
            n_modes,
            rule,
            sectors,
            states,
            totals,
            index,
        }
    }

    /// C(N+m, m) for "≤ N", C(N+m−1, N) for "= N".
    pub fn dimension_formula(n_modes: usize, rule: ParticleRule) -> u128 {
        let m = n_modes as u64;
        match rule {
            ParticleRule::AtMost(n) => binomial(n as u64 + m, m),
            ParticleRule::Exactly(n) => {
                if m == 0 {
                    u128::from(n == 0)
                } else {
                    binomial(n as u64 + m - 1, n as u64)
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.totals.len()
    }
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }
    pub fn rule(&self) -> ParticleRule {
        self.rule
    }
    pub fn n_particles(&self) -> usize {
        self.rule.n()
    }
    pub fn lattice(&self) -> Option<&Arc<MomentumLattice>> {
        self.lattice.as_ref()
    }
    pub fn sectors(&self) -> Option<&[Momentum]> {
        self.sectors.as_deref()
    }
    pub fn occupation(&self, i: usize) -> &[u8] {
        &self.states[i * self.n_modes..(i + 1) * self.n_modes]
    }
    pub fn total(&self, i: usize) -> usize {
        self.totals[i] as usize
    }
    pub fn find(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).map(|&i| i as usize)
    }
    /// Index of the all-empty configuration (excitation vacuum Ω).
    pub fn vacuum(&self) -> Option<usize> {
        self.find(&vec![0u8; self.n_modes])
    }
    /// Occupation of the mode with the given lattice index in state `i`.
    pub fn occ(&self, i: usize, mode: usize) -> u8 {
        self.states[i * self.n_modes + mode]
    }
    pub fn total_momentum(&self, i: usize) -> Option<Momentum> {
        let lat = self.lattice.as_ref()?;
        let mut p = [0, 0, 0];
        for (k, &o) in self.occupation(i).iter().enumerate() {
            let n = lat.momentum(k);
            for c in 0..3 {
                p[c] += o as i32 * n[c];
            }
        }
        Some(p)
    }
    pub fn same_space(&self, other: &Self) -> bool {
        std::ptr::eq(self, other)
            || (self.n_modes == other.n_modes
                && self.rule == other.rule
                && self.states == other.states)
    }
}

struct Enumerator<'a> {
    n_modes: usize,
    exact: bool,
    moms: &'a [Momentum],
    sectors: Option<&'a [Momentum]>,
    occ: Vec<u8>,
    out: Vec<u8>,
    count: usize,
    budget: usize,
    overflow: bool,
}

impl Enumerator<'_> {
    fn recurse(&mut self, mode: usize, remaining: usize, p: Momentum) {
        if self.overflow {
            return;
        }
        if mode + 1 == self.n_modes && self.exact {
            self.occ[mode] = remaining as u8;
            let n = self.moms[mode];
            let q = [
                p[0] + remaining as i32 * n[0],
                p[1] + remaining as i32 * n[1],
                p[2] + remaining as i32 * n[2],
            ];
            self.leaf(q);
            self.occ[mode] = 0;
            return;
        }
        if mode == self.n_modes {
            self.leaf(p);
            return;
        }
        let n = self.moms[mode];
        for k in 0..=remaining {
            self.occ[mode] = k as u8;
            let ki = k as i32;
            self.recurse(
                mode + 1,
                remaining - k,
                [p[0] + ki * n[0], p[1] + ki * n[1], p[2] + ki * n[2]],
            );
        }
        self.occ[mode] = 0;
    }

    fn leaf(&mut self, p: Momentum) {
        if let Some(s) = self.sectors {
            if !s.contains(&p) {
                return;
            }
        }
        self.count += 1;
        if self.count > self.budget {
            self.overflow = true;
            return;
        }
        self.out.extend_from_slice(&self.occ);
    }
}

/// Real coefficient vector over a basis.
#[derive(Clone, Debug)]
pub struct StateVector<T> {
    basis: Arc<OccupationBasis>,
    coeffs: Vec<T>,
}

impl<T: Real> StateVector<T> {
    pub fn zeros(basis: Arc<OccupationBasis>) -> Self {
        let coeffs = vec![T::zero(); basis.dim()];
        Self { basis, coeffs }
    }

    pub fn from_coeffs(basis: Arc<OccupationBasis>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{} coefficients for dimension {}",
                coeffs.len(),
                basis.dim()
            )));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn basis_state(basis: Arc<OccupationBasis>, i: usize) -> Self {
        let mut s = Self::zeros(basis);
        s.coeffs[i] = T::one();
        s
    }

    /// Normalized state with occupation `occ`, if present in the basis.
    pub fn from_occupation(basis: Arc<OccupationBasis>, occ: &[u8]) -> Option<Self> {
        let i = basis.find(occ)?;
        Some(Self::basis_state(basis, i))
    }

    /// Uniformly random unit vector, reproducible from the seed.
    pub fn random(basis: Arc<OccupationBasis>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs: Vec<T> = (0..basis.dim())
            .map(|_| T::c(rand::Rng::gen_range(&mut rng, -1.0..1.0)))
            .collect();
        let nrm = crate::linalg::norm2(&coeffs);
        if nrm > T::zero() {
            crate::linalg::scale(T::one() / nrm, &mut coeffs);
        }
        Self { basis, coeffs }
    }

    pub fn basis(&self) -> &Arc<OccupationBasis> {
        &self.basis
    }
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }
    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }
    pub fn norm(&self) -> T {
        crate::linalg::norm2(&self.coeffs)
    }
    pub fn dot(&self, other: &Self) -> T {
        crate::linalg::dot(&self.coeffs, &other.coeffs)
    }
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            crate::linalg::scale(T::one() / n, &mut self.coeffs);
        }
        self
    }
    pub fn with_coeffs(&self, coeffs: Vec<T>) -> Self {
        assert_eq!(coeffs.len(), self.dim());
        Self {
            basis: self.basis.clone(),
            coeffs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lat(m: u32) -> Arc<MomentumLattice> {
        Arc::new(MomentumLattice::new(m, false))
    }

    #[test]
    fn lattice_sizes() {
        assert_eq!(MomentumLattice::new(1, false).len(), 26);
        assert_eq!(MomentumLattice::new(1, true).len(), 27);
        assert_eq!(MomentumLattice::new(0, false).len(), 0);
        assert_eq!(MomentumLattice::new(2, false).len(), 124);
    }

    #[test]
    fn lattice_order_and_negation() {
        let l = MomentumLattice::new(2, true);
        assert_eq!(l.momentum(0), [0, 0, 0]);
        for w in l.momenta().windows(2) {
            assert!((norm2_int(w[0]), w[0]) < (norm2_int(w[1]), w[1]));
        }
        for i in 0..l.len() {
            assert_eq!(l.momentum(l.neg_index(i)), neg(l.momentum(i)));
        }
    }

    #[test]
    fn shell_counts() {
        let mut l = MomentumLattice::new(1, false);
        let r = l.classify(TWO_PI * 1.5, TWO_PI * 1.0);
        assert_eq!((r.n_ph, r.n_pl, r.overlap), (8, 6, false));
        let r = l.classify(TWO_PI * 1.2, TWO_PI * 1.0);
        assert_eq!((r.n_ph, r.n_pl), (20, 6));
        let r = l.classify(0.0, 0.0);
        assert_eq!((r.n_ph, r.n_pl), (26, 0));
        let r = l.classify(TWO_PI, TWO_PI);
        assert!(r.overlap);
    }

    #[test]
    fn basis_dimensions() {
        let b = OccupationBasis::new(lat(1), ParticleRule::AtMost(2), &BasisOptions::default())
            .unwrap();
        assert_eq!(b.dim(), 378);
        let b = OccupationBasis::new(lat(1), ParticleRule::AtMost(0), &BasisOptions::default())
            .unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.vacuum(), Some(0));
        let b = OccupationBasis::new(lat(1), ParticleRule::AtMost(3), &BasisOptions::default())
            .unwrap();
        assert_eq!(b.dim(), 3654);
        let full = Arc::new(MomentumLattice::new(1, true));
        let b = OccupationBasis::new(full, ParticleRule::Exactly(3), &BasisOptions::default())
            .unwrap();
        assert_eq!(b.dim(), 3654);
    }

    #[test]
    fn sector_dimensions() {
        let b = OccupationBasis::new(lat(1), ParticleRule::AtMost(3), &BasisOptions::zero_sector())
            .unwrap();
        assert_eq!(b.dim(), 58);
        for i in 0..b.dim() {
            assert_eq!(b.total_momentum(i), Some([0, 0, 0]));
        }
    }

    #[test]
    fn budget_is_enforced() {
        let opts = BasisOptions {
            max_dim: 100,
            sectors: None,
        };
        let err = OccupationBasis::new(lat(1), ParticleRule::AtMost(3), &opts).unwrap_err();
        assert!(matches!(err, Error::DimensionBudget { .. }));
        let opts = BasisOptions {
            max_dim: 10,
            sectors: Some(vec![[0, 0, 0]]),
        };
        assert!(OccupationBasis::new(lat(1), ParticleRule::AtMost(3), &opts).is_err());
    }

    #[test]
    fn lexicographic_order() {
        let b = OccupationBasis::abstract_modes(3, ParticleRule::AtMost(2), 100).unwrap();
        for i in 1..b.dim() {
            assert!(b.occupation(i - 1) < b.occupation(i));
        }
    }

    proptest! {
        #[test]
        fn index_roundtrip(m in 1usize..6, n in 0usize..5, exact in any::<bool>()) {
            let rule = if exact { ParticleRule::Exactly(n) } else { ParticleRule::AtMost(n) };
            let b = OccupationBasis::abstract_modes(m, rule, 1_000_000).unwrap();
            prop_assert_eq!(b.dim() as u128, OccupationBasis::dimension_formula(m, rule));
            for i in 0..b.dim() {
                prop_assert_eq!(b.find(b.occupation(i)), Some(i));
                match rule {
                    ParticleRule::AtMost(n) => prop_assert!(b.total(i) <= n),
                    ParticleRule::Exactly(n) => prop_assert_eq!(b.total(i), n),
                }
            }
        }

        #[test]
        fn random_states_are_unit(seed in any::<u64>()) {
            let b = Arc::new(OccupationBasis::abstract_modes(4, ParticleRule::AtMost(3), 1000).unwrap());
            let s = StateVector::<f64>::random(b, seed);
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }
}
