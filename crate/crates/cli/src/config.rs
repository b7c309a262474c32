//! Run configuration, read from a TOML file with dotted sections.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use boselab::hilbert::{Momentum, TWO_PI};
use boselab::instance::InstanceParams;
use boselab::scattering::{PotentialSpec, RadialGrid};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub potential: PotentialSection,
    pub lattice: LatticeSection,
    pub solver: SolverSection,
    pub run: RunSection,
    pub verify: VerifySection,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "N")]
    pub n: usize,
    pub kappa: f64,
    pub ell: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { n: 3, kappa: 0.1, ell: 0.45 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SoftSphere,
    Gaussian,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub family: Family,
    pub v0: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self { family: Family::SoftSphere, v0: 2.0, r: 0.3 }
    }
}

impl PotentialSection {
    pub fn spec(&self) -> PotentialSpec {
        match self.family {
            Family::SoftSphere => PotentialSpec::SoftSphere { v0: self.v0, r: self.r },
            Family::Gaussian => PotentialSpec::Gaussian { v0: self.v0, r: self.r },
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "pH_radius_over_2pi")]
    pub ph_radius_over_2pi: f64,
    #[serde(rename = "pL_radius_over_2pi")]
    pub pl_radius_over_2pi: f64,
    /// Total-momentum sectors to keep (integer vectors); empty keeps all.
    pub sectors: Vec<Momentum>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self { m: 1, ph_radius_over_2pi: 1.2, pl_radius_over_2pi: 1.0, sectors: Vec::new() }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub dense_dim_cap: usize,
    pub lanczos_tol: f64,
    pub expmv_tol: f64,
    pub seed: u64,
    pub max_dim: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            dense_dim_cap: 4000,
            lanczos_tol: 1e-10,
            expmv_tol: 1e-10,
            seed: 0x5EED,
            max_dim: boselab::hilbert::BasisOptions::default().max_dim,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub deterministic: bool,
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { deterministic: false, output_dir: PathBuf::from("out") }
    }
}

/// What `verify` runs. Model and potential come from the main sections. The growth
/// sweep has its own `P_H` radius: the kinetic-growth argument needs |p+r| above the
/// restriction threshold for p ∈ P_L, r ∈ P_H, which on the M = 1 lattice holds only
/// when `P_H` is the outer shell. The vacuum check has its own strength and lattice.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub identities_n: usize,
    pub growth_sweep: Vec<usize>,
    #[serde(rename = "growth_pH_radius_over_2pi")]
    pub growth_ph_radius_over_2pi: f64,
    pub hamiltonian_sweep: Vec<usize>,
    pub remainder_sweep: Vec<usize>,
    pub remainder_q: Momentum,
    pub vacuum_n: usize,
    #[serde(rename = "vacuum_M")]
    pub vacuum_m: u32,
    pub vacuum_v0: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            identities_n: 3,
            growth_sweep: vec![2, 3, 4],
            growth_ph_radius_over_2pi: 3f64.sqrt(),
            hamiltonian_sweep: vec![2, 3, 4],
            remainder_sweep: vec![2, 3, 4, 5, 6],
            remainder_q: [1, 0, 0],
            vacuum_n: 4,
            vacuum_m: 2,
            vacuum_v0: 50.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Surface the model constraints before any work starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        let m = &self.model;
        if m.n == 0 {
            bail!("model.N must be positive");
        }
        if !(m.ell > 0.0 && m.ell < 0.5) {
            bail!("model.ell = {} must lie in (0, 1/2)", m.ell);
        }
        if !(0.0..1.0).contains(&m.kappa) {
            bail!("model.kappa = {} must lie in [0, 1)", m.kappa);
        }
        let reach = self.potential.r / (m.n as f64).powf(1.0 - m.kappa);
        if reach > 0.5 {
            bail!("R/N^(1-kappa) = {reach} exceeds 1/2");
        }
        let l = &self.lattice;
        if l.ph_radius_over_2pi < l.pl_radius_over_2pi {
            bail!("lattice.pH_radius_over_2pi must be at least pL_radius_over_2pi");
        }
        if l.m == 0 {
            bail!("lattice.M must be positive");
        }
        if self.verify.growth_ph_radius_over_2pi < l.pl_radius_over_2pi {
            bail!("verify.growth_pH_radius_over_2pi must be at least pL_radius_over_2pi");
        }
        if self.verify.identities_n == 0 || self.verify.vacuum_n == 0 || self.verify.vacuum_m == 0 {
            bail!("verify sizes must be positive");
        }
        self.params(m.n)?.validate()?;
        Ok(())
    }

    /// Instance parameters at particle number `n`, everything else from the file.
    pub fn params(&self, n: usize) -> anyhow::Result<InstanceParams> {
        let mut p = InstanceParams::desk(n);
        p.kappa = self.model.kappa;
        p.ell = self.model.ell;
        p.potential = self.potential.spec();
        p.cutoff = self.lattice.m;
        p.ph_radius = TWO_PI * self.lattice.ph_radius_over_2pi;
        p.pl_radius = TWO_PI * self.lattice.pl_radius_over_2pi;
        p.sectors = (!self.lattice.sectors.is_empty()).then(|| self.lattice.sectors.clone());
        p.grid = RadialGrid::default();
        p.max_dim = self.solver.max_dim;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn dotted_sections_parse() {
        let cfg: RunConfig = toml::from_str(
            "[model]\nN = 4\nkappa = 0.05\nell = 0.4\n[potential]\nfamily = \"gaussian\"\nv0 = 1.0\nR = 0.2\n\
             [lattice]\nM = 2\npH_radius_over_2pi = 1.5\npL_radius_over_2pi = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.model.n, 4);
        assert_eq!(cfg.lattice.m, 2);
        assert_eq!(cfg.potential.spec(), PotentialSpec::Gaussian { v0: 1.0, r: 0.2 });
        assert_eq!(cfg.solver.seed, 0x5EED);
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = RunConfig::default();
        cfg.model.ell = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.lattice.pl_radius_over_2pi = 2.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.potential.r = 5.0;
        assert!(cfg.validate().is_err());
        assert!(toml::from_str::<RunConfig>("[model]\nn = 3\n").is_err());
    }
}
