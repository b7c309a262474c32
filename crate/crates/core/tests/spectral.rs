use boselab::hilbert::{OccupationBasis, ParticleRule, StateVector};
use boselab::instance::{Instance, InstanceParams};
use boselab::linalg::{self, Csr};
use boselab::operators::{self, Family, TermOperator};
use boselab::renorm::{build_generator, conjugate_dense, GeneratorKind};
use boselab::scattering::PotentialSpec;
use boselab::spectral::*;

/// `Σ_pairs A(a*a + b*b) + B(a*b* + ab)` on `2·pairs` abstract modes.
fn pair_hamiltonian(pairs: &[(f64, f64)]) -> TermOperator<f64> {
    let mut one = Family::new(1, 1, None);
    let mut two = Family::new(2, 0, None);
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let (m1, m2) = (2 * k, 2 * k + 1);
        one.push(a, &[m1], &[m1]);
        one.push(a, &[m2], &[m2]);
        two.push(b, &[m1, m2], &[]);
    }
    TermOperator::from_family(one).plus(TermOperator::from_family(two).plus_adjoint())
}

#[test]
fn quadratic_hamiltonian_matches_bogoliubov_closed_form() {
    let pairs: [(f64, f64); 2] = [(1.0, 0.5), (2.5, 2.0)];
    // Each (p, −p) pair contributes ½(√(A²−B²) − A) twice.
    let oracle: f64 = pairs.iter().map(|&(a, b)| (a * a - b * b).sqrt() - a).sum();
    let mut last = f64::NAN;
    for depth in [24, 28] {
        let basis = OccupationBasis::abstract_modes(4, ParticleRule::AtMost(depth), 1_000_000).unwrap();
        let h = pair_hamiltonian(&pairs).assemble(&basis);
        let gs = ground_state(&h, 0, &LanczosOptions::default()).unwrap();
        assert!((gs.energy - oracle).abs() < 1e-6, "depth {depth}: {} vs {oracle}", gs.energy);
        if depth == 28 {
            assert!((gs.energy - last).abs() < 1e-6);
        }
        last = gs.energy;
    }
}

#[test]
fn free_gas_ground_state_is_condensate() {
    let mut p = InstanceParams::desk(3);
    p.potential = PotentialSpec::soft_sphere(0.0, 0.3);
    let inst = Instance::<f64>::new(p).unwrap();
    let full = inst.full_basis().unwrap();
    let h = operators::hamiltonian_n(&inst.model, full.lattice().unwrap()).unwrap().assemble(&full);
    let gs = ground_state(&h, 4000, &LanczosOptions::default()).unwrap();
    assert!(gs.energy.abs() < 1e-12);
    let cf = condensate_fraction(&gs.vector, &full, &inst.basis).unwrap();
    assert!((cf.direct - 1.0).abs() < 1e-12);
}

#[test]
fn moments_on_simple_states() {
    let inst = Instance::<f64>::new(InstanceParams::desk(3)).unwrap();
    let n = operators::number(&inst.lattice).assemble(&inst.basis);
    let vac = StateVector::<f64>::basis_state(inst.basis.clone(), 0);
    assert!(moments(vac.coeffs(), &n, 4).iter().all(|&m| m == 0.0));
    let mut occ = vec![0u8; inst.basis.n_modes()];
    occ[3] = 1;
    let one = StateVector::<f64>::from_occupation(inst.basis.clone(), &occ).unwrap();
    assert!(moments(one.coeffs(), &n, 4).iter().all(|&m| (m - 1.0).abs() < 1e-14));
    for seed in 0..50 {
        let xi = StateVector::<f64>::random(inst.basis.clone(), seed);
        let m = moments(xi.coeffs(), &n, 2);
        assert!(m[1] >= m[0] * m[0] - 1e-12);
    }
}

#[test]
fn depletion_routes_agree_and_variance_vanishes() {
    let inst = Instance::<f64>::new(InstanceParams::desk(3)).unwrap();
    let full = inst.full_basis().unwrap();
    let h = operators::hamiltonian_n(&inst.model, full.lattice().unwrap()).unwrap().assemble(&full);
    let gs = ground_state(&h, 0, &LanczosOptions::default()).unwrap();
    let cf = condensate_fraction(&gs.vector, &full, &inst.basis).unwrap();
    assert!((cf.direct - cf.via_excitations).abs() < 1e-12);
    let u: Csr<f64> = operators::excitation_map(&full, &inst.basis).unwrap();
    let xi = u.matvec(&gs.vector);
    assert!((depletion(&xi, &inst.basis) - (1.0 - cf.direct)).abs() < 1e-12);
    assert!(energy_variance(&gs.vector, &h, gs.energy) < 1e-10);
    for seed in 0..10 {
        let psi = StateVector::<f64>::random(full.clone(), seed);
        let cf = condensate_fraction(psi.coeffs(), &full, &inst.basis).unwrap();
        assert!((cf.direct - cf.via_excitations).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&cf.direct));
    }
}

#[test]
fn ground_energy_is_invariant_along_the_unitary_chain() {
    let inst = Instance::<f64>::new(InstanceParams::desk(2)).unwrap();
    let full = inst.full_basis().unwrap();
    let h = operators::hamiltonian_n(&inst.model, full.lattice().unwrap()).unwrap().assemble(&full);
    let l = operators::excitation_hamiltonian(&inst.model, &inst.lattice).assemble(&inst.basis);
    let b = build_generator(GeneratorKind::QuadraticB, &inst).unwrap();
    let g = conjugate_dense(&l.to_dense(), b.matrix());
    let e_h = ground_state(&h, 0, &LanczosOptions::default()).unwrap().energy;
    let e_l = ground_state(&l, 0, &LanczosOptions::default()).unwrap().energy;
    let e_g = ground_state_dense(&g.matrix).unwrap().energy;
    assert!((e_h - e_l).abs() < 1e-8 && (e_l - e_g).abs() < 1e-8, "{e_h} {e_l} {e_g}");
}

#[test]
fn subspace_dimension_matches_eigenvalue_count() {
    let inst = Instance::<f64>::new(InstanceParams::desk(2)).unwrap();
    let l = operators::excitation_hamiltonian(&inst.model, &inst.lattice).assemble(&inst.basis).to_dense();
    let ev = linalg::eigvalsh(&l).unwrap();
    let thr = ev[0] + 200.0;
    let (vals, q) = spectral_subspace(&l, thr).unwrap();
    assert_eq!(vals.len(), ev.iter().filter(|&&e| e <= thr).count());
    let gram = q.transpose().matmul(&q);
    assert!(gram.max_abs_diff(&linalg::Dense::identity(vals.len())) < 1e-10);
}
