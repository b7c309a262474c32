//! The five subcommands. Each takes a validated config and an output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use boselab::diagnostics::{self, CheckResult};
use boselab::hilbert::TWO_PI;
use boselab::instance::Instance;
use boselab::linalg::{Csr, ExpmvOptions};
use boselab::operators::{self, Symmetry};
use boselab::pipeline::run_pipeline;
use boselab::renorm::{self, GeneratorKind};
use boselab::scattering::check_scattering_residual;
use boselab::spectral::{self, LanczosOptions};
use serde::Serialize;

use crate::config::{PotentialSection, RunConfig};
use crate::output::{fmt17, write_json, write_text, Csv};

/// Raised by `verify` when at least one check fails; maps to exit code 2.
#[derive(Debug)]
pub struct ChecksFailed(pub Vec<String>);

impl std::fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} check(s) failed: {}", self.0.len(), self.0.join(", "))
    }
}

impl std::error::Error for ChecksFailed {}

fn instance(cfg: &RunConfig) -> anyhow::Result<Instance<f64>> {
    Ok(Instance::new(cfg.params(cfg.model.n)?)?)
}

fn expmv_opts(cfg: &RunConfig) -> ExpmvOptions<f64> {
    ExpmvOptions { tol: cfg.solver.expmv_tol, ..ExpmvOptions::default() }
}

fn lanczos_opts(cfg: &RunConfig) -> LanczosOptions<f64> {
    LanczosOptions { tol: cfg.solver.lanczos_tol, seed: cfg.solver.seed, ..LanczosOptions::default() }
}

#[derive(Serialize)]
struct ScatteringJson {
    a0: f64,
    lambda_ell: f64,
    ell: f64,
    #[serde(rename = "N")]
    n: usize,
    kappa: f64,
    residual_max: f64,
    residual_rms: f64,
}

pub fn scatter(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let inst = instance(cfg)?;
    let eta = &inst.eta;
    let mut csv = Csv::new(&["px", "py", "pz", "eta", "gamma", "sigma", "in_PH"]);
    for (i, n) in eta.momenta.iter().enumerate() {
        let mut cells: Vec<String> = n.iter().map(|&k| fmt17(TWO_PI * k as f64)).collect();
        cells.push(fmt17(eta.eta[i]));
        cells.push(fmt17(eta.gamma(i)));
        cells.push(fmt17(eta.sigma(i)));
        cells.push(eta.in_ph[i].to_string());
        csv.row(&cells);
    }
    write_text(&out.join("eta_table.csv"), &csv.into_string())?;
    let r = check_scattering_residual(&inst.scattering, eta);
    write_json(
        &out.join("scattering.json"),
        &ScatteringJson {
            a0: inst.a0(),
            lambda_ell: inst.scattering.lambda(),
            ell: inst.params.ell,
            n: inst.n(),
            kappa: inst.params.kappa,
            residual_max: r.max_relative,
            residual_rms: r.rms_relative,
        },
    )
}

#[derive(Serialize)]
struct OperatorStats {
    name: &'static str,
    space: &'static str,
    dim: usize,
    nnz: usize,
    /// `max |O − Oᵀ|` for hermitian operators, `max |O + Oᵀ|` for generators.
    hermiticity_residual: f64,
}

pub fn build(cfg: &RunConfig, out: &Path, dump: bool) -> anyhow::Result<()> {
    let inst = instance(cfg)?;
    let (model, lat, basis) = (&inst.model, &*inst.lattice, &*inst.basis);
    let full = inst.full_basis()?;
    let flat = operators::lattice_of(&full)?;
    let mut ops: Vec<(&'static str, &'static str, Csr<f64>, Symmetry)> = vec![
        ("H_N", "full", operators::hamiltonian_n(model, flat)?.assemble(&full), Symmetry::Hermitian),
        ("L_N", "excitation", operators::excitation_hamiltonian(model, lat).assemble(basis), Symmetry::Hermitian),
        ("N_plus", "excitation", operators::number(lat).assemble(basis), Symmetry::Hermitian),
        ("K", "excitation", operators::kinetic(lat).assemble(basis), Symmetry::Hermitian),
        ("V_N", "excitation", operators::interaction_vn(model, lat).assemble(basis), Symmetry::Hermitian),
        ("G_eff", "excitation", renorm::g_eff_terms(&inst).assemble(basis), Symmetry::Hermitian),
        ("J_eff", "excitation", renorm::j_eff_terms(&inst).assemble(basis), Symmetry::Hermitian),
    ];
    for (name, kind) in [("B", GeneratorKind::QuadraticB), ("A", GeneratorKind::CubicA), ("D", GeneratorKind::QuarticD)] {
        let g = renorm::build_generator(kind, &inst)?;
        ops.push((name, "excitation", g.matrix().clone(), Symmetry::AntiHermitian));
    }
    let mut stats = Vec::new();
    for (name, space, m, sym) in &ops {
        let residual = match sym {
            Symmetry::AntiHermitian => m.antisymmetry_residual(),
            _ => m.symmetry_residual(),
        };
        stats.push(OperatorStats { name, space, dim: m.nrows(), nnz: m.nnz(), hermiticity_residual: residual });
        if dump {
            let path = out.join(format!("{name}.bin"));
            let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
            m.write_triplets(&mut w)?;
            w.flush()?;
        }
    }
    write_json(&out.join("operators.json"), &stats)
}

pub fn ground(cfg: &RunConfig, out: &Path, dump: bool) -> anyhow::Result<()> {
    let inst = instance(cfg)?;
    let full = inst.full_basis()?;
    let h = operators::hamiltonian_n(&inst.model, operators::lattice_of(&full)?)?.assemble(&full);
    let gs = spectral::ground_state(&h, cfg.solver.dense_dim_cap, &lanczos_opts(cfg))?;
    let cf = spectral::condensate_fraction(&gs.vector, &full, &inst.basis)?;
    let zeta2 = spectral::energy_variance(&gs.vector, &h, gs.energy);
    let lead = inst.leading_energy();
    let mut csv = Csv::new(&["N", "kappa", "M", "E0", "E0_over_4pi_a0_N1k", "depletion", "zeta2"]);
    csv.row(&[
        inst.n().to_string(),
        fmt17(inst.params.kappa),
        inst.params.cutoff.to_string(),
        fmt17(gs.energy),
        fmt17(if lead != 0.0 { gs.energy / lead } else { f64::NAN }),
        fmt17(1.0 - cf.via_excitations),
        fmt17(zeta2),
    ]);
    write_text(&out.join("spectrum.csv"), &csv.into_string())?;
    if dump {
        // u64 dim, then dim little-endian f64 coefficients in basis order.
        let path = out.join("ground_state.bin");
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        w.write_all(&(gs.vector.len() as u64).to_le_bytes())?;
        for x in &gs.vector {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn pipeline(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let inst = instance(cfg)?;
    let rows = run_pipeline(&inst, cfg.solver.dense_dim_cap)?;
    let mut csv = Csv::new(&[
        "stage",
        "vacuum_energy",
        "ground_energy",
        "depletion",
        "residual_to_effective_frobenius",
        "unitarity_defect",
    ]);
    for r in rows {
        csv.row(&[
            r.stage.label().to_string(),
            fmt17(r.vacuum_energy),
            fmt17(r.ground_energy),
            fmt17(r.depletion),
            fmt17(r.residual_to_effective_frobenius),
            fmt17(r.unitarity_defect),
        ]);
    }
    write_text(&out.join("pipeline.csv"), &csv.into_string())
}

/// Runs every suite and writes `checks.json`; fails with [`ChecksFailed`] if any check does.
pub fn verify(cfg: &RunConfig, out: &Path) -> anyhow::Result<Vec<CheckResult>> {
    let v = &cfg.verify;
    let mut checks = Vec::new();
    let mut timings: Vec<(&str, f64)> = Vec::new();
    let mut mark = Instant::now();
    let mut lap = |label: &'static str| {
        timings.push((label, mark.elapsed().as_secs_f64()));
        mark = Instant::now();
    };

    let base = cfg.params(cfg.model.n)?;
    let mut p = cfg.params(v.identities_n)?;
    p.cutoff = 1;
    checks.extend(diagnostics::check_identities(&Instance::new(p)?)?);
    lap("identities");

    let mut gp = base.clone();
    gp.ph_radius = TWO_PI * v.growth_ph_radius_over_2pi;
    let growth = diagnostics::zero_sector_sweep(&gp, &v.growth_sweep)?;
    checks.extend(diagnostics::growth_checks(&growth)?);
    drop(growth);
    lap("growth");

    let ham = diagnostics::zero_sector_sweep(&base, &v.hamiltonian_sweep)?;
    checks.extend(diagnostics::hamiltonian_checks(&ham)?);
    drop(ham);
    lap("hamiltonian");

    let scan = diagnostics::remainder_scan(&base, &v.remainder_sweep, v.remainder_q, cfg.solver.seed, &expmv_opts(cfg))?;
    checks.push(scan.check);
    lap("remainder");

    let mut p = cfg.params(v.vacuum_n)?;
    p.cutoff = v.vacuum_m;
    p.potential = PotentialSection { v0: v.vacuum_v0, ..cfg.potential.clone() }.spec();
    p.sectors = Some(vec![[0, 0, 0]]);
    let row = diagnostics::vacuum_row(&Instance::new(p)?, &expmv_opts(cfg))?;
    checks.push(diagnostics::vacuum_check(&row));
    lap("vacuum");

    let inst = Instance::<f64>::new(base)?;
    checks.push(diagnostics::eta_scattering_check(&inst.scattering, &inst.eta));

    write_json(&out.join("checks.json"), &checks)?;
    if !cfg.run.deterministic {
        let t: serde_json::Map<String, serde_json::Value> =
            timings.into_iter().map(|(k, s)| (k.to_string(), s.into())).collect();
        write_json(&out.join("timings.json"), &t)?;
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed()).map(|c| c.id.clone()).collect();
    if !failed.is_empty() {
        return Err(ChecksFailed(failed).into());
    }
    Ok(checks)
}
