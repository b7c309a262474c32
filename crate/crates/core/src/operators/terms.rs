//! Normal-ordered words in creation/annihilation operators and their action on
//! occupation bases.
//!
//! A word is `coef · a*_{c1} a*_{c2} · w(n) · a_{a1} a_{a2}` with at most two
//! creators and two annihilators, where `w` depends only on the total
//! occupation `n` of the *input* state. This form covers every operator of the
//! model once the number factors of the modified fields are absorbed into `w`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::hilbert::{OccupationBasis, ParticleRule};
use crate::linalg::{Csr, LinearOperator};
use crate::scalar::Real;

const NONE: u16 = u16::MAX;

pub type NumberWeight<T> = Arc<dyn Fn(usize) -> T + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Word<T> {
    pub coef: T,
    cre: [u16; 2],
    ann: [u16; 2],
}

fn pack(modes: &[usize]) -> [u16; 2] {
    assert!(modes.len() <= 2, "words carry at most two operators per side");
    let mut out = [NONE; 2];
    for (slot, &m) in out.iter_mut().zip(modes) {
        *slot = m as u16;
    }
    if out[0] > out[1] {
        out.swap(0, 1);
    }
    out
}

impl<T: Real> Word<T> {
    pub fn new(coef: T, cre: &[usize], ann: &[usize]) -> Self {
        Self {
            coef,
            cre: pack(cre),
            ann: pack(ann),
        }
    }
    fn adjoint(&self) -> Self {
        Self {
            coef: self.coef,
            cre: self.ann,
            ann: self.cre,
        }
    }
}

/// Words of one shape (same numbers of creators and annihilators) sharing a weight.
#[derive(Clone)]
pub struct Family<T> {
    words: Vec<Word<T>>,
    weight: Option<NumberWeight<T>>,
    ncre: usize,
    nann: usize,
}

impl<T: Real> Family<T> {
    pub fn new(ncre: usize, nann: usize, weight: Option<NumberWeight<T>>) -> Self {
        Self {
            words: Vec::new(),
            weight,
            ncre,
            nann,
        }
    }

    pub fn push(&mut self, coef: T, cre: &[usize], ann: &[usize]) {
        assert_eq!((cre.len(), ann.len()), (self.ncre, self.nann), "word shape");
        if coef != T::zero() {
            self.words.push(Word::new(coef, cre, ann));
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Sort words by (annihilators, creators) and merge equal ones in insertion order.
    fn canonicalize(&mut self) {
        self.words.sort_by_key(|w| (w.ann, w.cre));
        let mut out: Vec<Word<T>> = Vec::with_capacity(self.words.len());
        for w in self.words.drain(..) {
            match out.last_mut() {
                Some(last) if last.ann == w.ann && last.cre == w.cre => last.coef += w.coef,
                _ => out.push(w),
            }
        }
        out.retain(|w| w.coef != T::zero());
        self.words = out;
    }

    fn weight_at(&self, n: usize) -> T {
        self.weight.as_ref().map_or(T::one(), |f| f(n))
    }

    fn adjoint(&self) -> Self {
        let (ncre, nann) = (self.ncre, self.nann);
        // The adjoint acts on the original output, whose total is n + nann - ncre.
        let weight = self.weight.clone().map(|f| {
            let g: NumberWeight<T> = Arc::new(move |n: usize| {
                let m = n as isize - ncre as isize + nann as isize;
                if m < 0 {
                    T::zero()
                } else {
                    f(m as usize)
                }
            });
            g
        });
        let mut out = Self {
            words: self.words.iter().map(Word::adjoint).collect(),
            weight,
            ncre: nann,
            nann: ncre,
        };
        out.canonicalize();
        out
    }

    fn scale(&mut self, s: T) {
        for w in &mut self.words {
            w.coef *= s;
        }
        self.words.retain(|w| w.coef != T::zero());
    }
}

/// Sum of word families; the symbolic form of an operator before assembly.
#[derive(Clone, Default)]
pub struct TermOperator<T> {
    families: Vec<Family<T>>,
}

/// Words of a family grouped by annihilator key for lookup per input state.
struct IndexedFamily<'a, T> {
    family: &'a Family<T>,
    /// (annihilator key, start, end) sorted by key.
    groups: Vec<([u16; 2], usize, usize)>,
}

impl<'a, T: Real> IndexedFamily<'a, T> {
    fn new(family: &'a Family<T>) -> Self {
        let mut groups = Vec::new();
        let mut s = 0;
        while s < family.words.len() {
            let key = family.words[s].ann;
            let mut e = s;
            while e < family.words.len() && family.words[e].ann == key {
                e += 1;
            }
            groups.push((key, s, e));
            s = e;
        }
        Self { family, groups }
    }

    fn group(&self, key: [u16; 2]) -> Option<&[Word<T>]> {
        self.groups
            .binary_search_by(|g| g.0.cmp(&key))
            .ok()
            .map(|k| &self.family.words[self.groups[k].1..self.groups[k].2])
    }
}

struct Workspace {
    occ: Vec<u8>,
    occupied: Vec<u16>,
}

impl<T: Real> TermOperator<T> {
    pub fn zero() -> Self {
        Self {
            families: Vec::new(),
        }
    }

    pub fn from_family(mut f: Family<T>) -> Self {
        f.canonicalize();
        Self { families: vec![f] }
    }

    /// Diagonal operator `w(n)` (a word with no field operators).
    pub fn number_function(weight: NumberWeight<T>) -> Self {
        let mut f = Family::new(0, 0, Some(weight));
        f.push(T::one(), &[], &[]);
        Self::from_family(f)
    }

    pub fn identity() -> Self {
        let mut f = Family::new(0, 0, None);
        f.push(T::one(), &[], &[]);
        Self::from_family(f)
    }

    pub fn push_family(&mut self, mut f: Family<T>) {
        f.canonicalize();
        if !f.is_empty() {
            self.families.push(f);
        }
    }

    pub fn plus(mut self, other: Self) -> Self {
        self.families.extend(other.families);
        self
    }

    pub fn scaled(mut self, s: T) -> Self {
        for f in &mut self.families {
            f.scale(s);
        }
        self.families.retain(|f| !f.is_empty());
        self
    }

    pub fn adjoint(&self) -> Self {
        Self {
            families: self.families.iter().map(Family::adjoint).collect(),
        }
    }

    /// `self + self†`.
    pub fn plus_adjoint(self) -> Self {
        let adj = self.adjoint();
        self.plus(adj)
    }

    /// `self - self†`.
    pub fn minus_adjoint(self) -> Self {
        let adj = self.adjoint().scaled(-T::one());
        self.plus(adj)
    }

    pub fn n_words(&self) -> usize {
        self.families.iter().map(Family::len).sum()
    }

    /// Image of basis state `col`: (row, value) pairs, in deterministic order.
    fn act(
        fams: &[IndexedFamily<'_, T>],
        basis: &OccupationBasis,
        sqrt: &[T],
        col: usize,
        ws: &mut Workspace,
        out: &mut Vec<(u32, T)>,
    ) {
        let occ0 = basis.occupation(col);
        let n_in = basis.total(col);
        let cap = match basis.rule() {
            ParticleRule::AtMost(n) | ParticleRule::Exactly(n) => n,
        };
        ws.occupied.clear();
        ws.occupied
            .extend((0..occ0.len()).filter(|&m| occ0[m] > 0).map(|m| m as u16));
        let mut keys: Vec<[u16; 2]> = Vec::new();
        for fam in fams {
            let f = fam.family;
            if n_in < f.nann || n_in - f.nann + f.ncre > cap {
                continue;
            }
            let wgt = f.weight_at(n_in);
            if wgt == T::zero() {
                continue;
            }
            keys.clear();
            match f.nann {
                0 => keys.push([NONE, NONE]),
                1 => keys.extend(ws.occupied.iter().map(|&m| [m, NONE])),
                _ => {
                    for (i, &m1) in ws.occupied.iter().enumerate() {
                        if occ0[m1 as usize] >= 2 {
                            keys.push([m1, m1]);
                        }
                        for &m2 in &ws.occupied[i + 1..] {
                            keys.push([m1, m2]);
                        }
                    }
                }
            }
            for &key in &keys {
                let Some(words) = fam.group(key) else { continue };
                ws.occ.clear();
                ws.occ.extend_from_slice(occ0);
                let mut amp_ann = T::one();
                for &a in key.iter().filter(|&&a| a != NONE) {
                    let a = a as usize;
                    amp_ann *= sqrt[ws.occ[a] as usize];
                    ws.occ[a] -= 1;
                }
                for w in words {
                    let mut amp = amp_ann;
                    let mut touched = [NONE; 2];
                    for (t, &c) in w.cre.iter().enumerate() {
                        if c == NONE {
                            continue;
                        }
                        let c = c as usize;
                        ws.occ[c] += 1;
                        amp *= sqrt[ws.occ[c] as usize];
                        touched[t] = c as u16;
                    }
                    if let Some(row) = basis.find(&ws.occ) {
                        out.push((row as u32, w.coef * wgt * amp));
                    }
                    for &c in touched.iter().filter(|&&c| c != NONE) {
                        ws.occ[c as usize] -= 1;
                    }
                }
            }
        }
    }

    fn sqrt_table(basis: &OccupationBasis) -> Vec<T> {
        (0..=basis.n_particles() + 2).map(|k| T::n(k).sqrt()).collect()
    }

    /// Sparse matrix of the operator on `basis`, assembled row by row from the adjoint.
    pub fn assemble(&self, basis: &OccupationBasis) -> Csr<T> {
        let adj = self.adjoint();
        let fams: Vec<IndexedFamily<'_, T>> = adj.families.iter().map(IndexedFamily::new).collect();
        let sqrt = Self::sqrt_table(basis);
        let rows: Vec<Vec<(u32, T)>> = (0..basis.dim())
            .into_par_iter()
            .map_init(
                || Workspace {
                    occ: Vec::with_capacity(basis.n_modes()),
                    occupied: Vec::new(),
                },
                |ws, i| {
                    let mut out = Vec::new();
                    Self::act(&fams, basis, &sqrt, i, ws, &mut out);
                    out
                },
            )
            .collect();
        Csr::from_rows(basis.dim(), rows)
    }

    /// Matrix-free action bound to a basis.
    pub fn on<'a>(&'a self, basis: &'a OccupationBasis) -> BoundTerms<'a, T> {
        BoundTerms {
            adjoint: self.adjoint(),
            basis,
            sqrt: Self::sqrt_table(basis),
            bound: self.coefficient_bound(basis.n_particles()),
        }
    }

    /// Crude bound Σ|coef|·max|w|·(N+2)² on the operator norm.
    fn coefficient_bound(&self, n: usize) -> T {
        let np = T::n(n + 2);
        self.families
            .iter()
            .map(|f| {
                let wmax = (0..=n).fold(T::zero(), |m, k| m.max(f.weight_at(k).abs()));
                f.words.iter().map(|w| w.coef.abs()).sum::<T>() * wmax * np * np
            })
            .sum()
    }
}

/// A [`TermOperator`] applied without storing its matrix.
pub struct BoundTerms<'a, T> {
    adjoint: TermOperator<T>,
    basis: &'a OccupationBasis,
    sqrt: Vec<T>,
    bound: T,
}

impl<T: Real> LinearOperator<T> for BoundTerms<'_, T> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply_into(&self, x: &[T], y: &mut [T]) {
        let fams: Vec<IndexedFamily<'_, T>> =
            self.adjoint.families.iter().map(IndexedFamily::new).collect();
        let basis = self.basis;
        y.par_iter_mut().enumerate().for_each_init(
            || {
                (
                    Workspace {
                        occ: Vec::with_capacity(basis.n_modes()),
                        occupied: Vec::new(),
                    },
                    Vec::new(),
                )
            },
            |(ws, buf), (i, yi)| {
                buf.clear();
                TermOperator::act(&fams, basis, &self.sqrt, i, ws, buf);
                let mut s = T::zero();
                for &(j, v) in buf.iter() {
                    s += v * x[j as usize];
                }
                *yi = s;
            },
        );
    }

    fn norm_bound(&self) -> T {
        self.bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(modes: usize, n: usize) -> OccupationBasis {
        OccupationBasis::abstract_modes(modes, ParticleRule::AtMost(n), 100_000).unwrap()
    }

    fn single(cre: &[usize], ann: &[usize]) -> TermOperator<f64> {
        let mut f = Family::new(cre.len(), ann.len(), None);
        f.push(1.0, cre, ann);
        TermOperator::from_family(f)
    }

    #[test]
    fn creation_matrix_elements() {
        let b = basis(2, 3);
        let a_dag = single(&[0], &[]).assemble(&b);
        let from = b.find(&[1, 0]).unwrap();
        let to = b.find(&[2, 0]).unwrap();
        assert!((a_dag.get(to, from) - 2f64.sqrt()).abs() < 1e-15);
        // Total-N states are annihilated by a*.
        let full = b.find(&[3, 0]).unwrap();
        assert!((0..b.dim()).all(|r| a_dag.get(r, full) == 0.0));
    }

    #[test]
    fn pair_annihilation_same_mode() {
        let b = basis(2, 3);
        let aa = single(&[], &[0, 0]).assemble(&b);
        let from = b.find(&[3, 0]).unwrap();
        let to = b.find(&[1, 0]).unwrap();
        assert!((aa.get(to, from) - 6f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn adjoint_assembles_to_transpose() {
        let b = basis(3, 3);
        let mut f = Family::new(2, 1, Some(Arc::new(|n: usize| 1.0 + n as f64)));
        f.push(0.7, &[0, 2], &[1]);
        f.push(-0.3, &[1, 1], &[0]);
        let op = TermOperator::from_family(f);
        let m = op.assemble(&b);
        let madj = op.adjoint().assemble(&b);
        assert!(m.transpose().max_abs_diff(&madj) < 1e-15);
        assert!(m.nnz() > 0);
    }

    #[test]
    fn matrix_free_matches_assembly() {
        let b = basis(3, 4);
        let mut f = Family::new(2, 2, Some(Arc::new(|n: usize| 0.5 * n as f64)));
        f.push(1.0, &[0, 1], &[2, 2]);
        f.push(0.25, &[0, 0], &[0, 1]);
        let op = TermOperator::from_family(f).plus_adjoint();
        let m = op.assemble(&b);
        let x: Vec<f64> = (0..b.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let y1 = m.matvec(&x);
        let y2 = op.on(&b).apply(&x);
        assert!(crate::linalg::max_abs_diff(&y1, &y2) < 1e-13);
    }

    #[test]
    fn duplicate_words_merge() {
        let mut f = Family::<f64>::new(1, 1, None);
        f.push(1.0, &[0], &[1]);
        f.push(2.0, &[0], &[1]);
        f.push(-3.0, &[0], &[1]);
        let op = TermOperator::from_family(f);
        assert_eq!(op.n_words(), 0);
    }
}
