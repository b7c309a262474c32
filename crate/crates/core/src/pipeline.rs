//! The dense renormalization chain `L_N → G_N → J_N → M_N` with one report row per stage.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::linalg::{Csr, Dense};
use crate::operators;
use crate::renorm::{self, build_generator, conjugate_dense, GeneratorKind};
use crate::spectral::{depletion, ground_state_dense};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    L,
    G,
    J,
    M,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::L => "L",
            Stage::G => "G",
            Stage::J => "J",
            Stage::M => "M",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageRow {
    pub stage: Stage,
    pub vacuum_energy: f64,
    pub ground_energy: f64,
    /// `⟨N₊⟩/N` on the stage ground state.
    pub depletion: f64,
    /// Frobenius distance to the effective operator of the stage.
    pub residual_to_effective_frobenius: f64,
    /// `max |UᵀU − 1|` for the unitary applied at this stage.
    pub unitarity_defect: f64,
}

fn row(stage: Stage, op: &Dense<f64>, inst: &Instance<f64>, residual: f64, defect: f64) -> Result<StageRow> {
    let vac = inst
        .basis
        .vacuum()
        .ok_or_else(|| Error::BasisMismatch("excitation basis has no vacuum".into()))?;
    let gs = ground_state_dense(op)?;
    Ok(StageRow {
        stage,
        vacuum_energy: op.row(vac)[vac],
        ground_energy: gs.energy,
        depletion: depletion(&gs.vector, &inst.basis),
        residual_to_effective_frobenius: residual,
        unitarity_defect: defect,
    })
}

/// Runs the four stages densely. The `L` stage is the image of `H_N` under the
/// excitation map, compared against the four-part decomposition; each later stage
/// conjugates only the effective part of the previous one.
pub fn run_pipeline(inst: &Instance<f64>, dense_dim_cap: usize) -> Result<Vec<StageRow>> {
    let basis = &inst.basis;
    let full = inst.full_basis()?;
    let cap = dense_dim_cap.max(1);
    if basis.dim() > cap || full.dim() > cap {
        return Err(Error::DimensionBudget {
            dim: basis.dim().max(full.dim()) as u128,
            budget: cap,
        });
    }
    let lat = operators::lattice_of(&full)?;
    let u: Csr<f64> = operators::excitation_map(&full, basis)?;
    let h = operators::hamiltonian_n(&inst.model, lat)?.assemble(&full);
    let l = operators::to_excitation(&u, &h).to_dense();
    let parts = operators::excitation_hamiltonian(&inst.model, &inst.lattice)
        .assemble(basis)
        .to_dense();
    let u_defect = u.matmul(&u.transpose()).max_abs_diff(&Csr::identity(basis.dim()));
    let mut rows = vec![row(Stage::L, &l, inst, l.sub(&parts).frobenius(), u_defect)?];

    let b = build_generator(GeneratorKind::QuadraticB, inst)?;
    let g = conjugate_dense(&l, b.matrix());
    let geff = renorm::g_eff_terms(inst).assemble(basis).to_dense();
    rows.push(row(Stage::G, &g.matrix, inst, g.matrix.sub(&geff).frobenius(), g.unitarity_defect)?);

    let a = build_generator(GeneratorKind::CubicA, inst)?;
    let j = conjugate_dense(&geff, a.matrix());
    let jeff = renorm::j_eff_terms(inst).assemble(basis).to_dense();
    rows.push(row(Stage::J, &j.matrix, inst, j.matrix.sub(&jeff).frobenius(), j.unitarity_defect)?);

    let d = build_generator(GeneratorKind::QuarticD, inst)?;
    let m = conjugate_dense(&jeff, d.matrix());
    rows.push(row(Stage::M, &m.matrix, inst, m.matrix.sub(&jeff).frobenius(), m.unitarity_defect)?);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceParams;
    use crate::scattering::PotentialSpec;

    #[test]
    fn free_gas_stages_are_all_zero() {
        let mut p = InstanceParams::desk(2);
        p.potential = PotentialSpec::soft_sphere(0.0, 0.3);
        let inst = Instance::<f64>::new(p).unwrap();
        for r in run_pipeline(&inst, 4000).unwrap() {
            assert_eq!(r.vacuum_energy, 0.0, "{:?}", r.stage);
            assert!(r.ground_energy.abs() < 1e-12, "{:?}", r.stage);
            assert!(r.residual_to_effective_frobenius < 1e-12, "{:?}", r.stage);
        }
    }

    #[test]
    fn l_stage_is_exact_and_g_stage_is_isospectral() {
        let inst = Instance::<f64>::new(InstanceParams::desk(2)).unwrap();
        let rows = run_pipeline(&inst, 4000).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].residual_to_effective_frobenius < 1e-10);
        assert!(rows[0].unitarity_defect == 0.0);
        assert!((rows[0].ground_energy - rows[1].ground_energy).abs() < 1e-8);
        assert!(rows[1].vacuum_energy < rows[0].vacuum_energy);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let inst = Instance::<f64>::new(InstanceParams::desk(2)).unwrap();
        assert!(matches!(run_pipeline(&inst, 10), Err(Error::DimensionBudget { .. })));
    }
}
