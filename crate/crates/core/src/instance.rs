//! A fully specified model point: parameters, lattice, basis and scattering data.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hilbert::{BasisOptions, Momentum, MomentumLattice, OccupationBasis, ParticleRule, TWO_PI};
use crate::operators::Model;
use crate::scalar::Real;
use crate::scattering::{eta_coefficients, EtaTable, PotentialSpec, RadialGrid, ScatteringSolution};

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceParams {
    pub n: usize,
    pub kappa: f64,
    pub ell: f64,
    pub potential: PotentialSpec,
    pub cutoff: u32,
    /// Absolute radius of `P_H` (inclusive).
    pub ph_radius: f64,
    /// Absolute radius of `P_L` (inclusive); zero leaves `P_L` empty.
    pub pl_radius: f64,
    pub sectors: Option<Vec<Momentum>>,
    pub grid: RadialGrid,
    pub max_dim: usize,
}

impl InstanceParams {
    /// Soft sphere v₀ = 2, R = 0.3, κ = 0.1, ℓ = 0.45 at M = 1 with `P_H` the second shell
    /// and outwards and `P_L` the first shell.
    pub fn desk(n: usize) -> Self {
        Self {
            n,
            kappa: 0.1,
            ell: 0.45,
            potential: PotentialSpec::soft_sphere(2.0, 0.3),
            cutoff: 1,
            ph_radius: TWO_PI * 1.2,
            pl_radius: TWO_PI,
            sectors: None,
            grid: RadialGrid::default(),
            max_dim: BasisOptions::default().max_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0 && self.ell < 0.5) {
            return Err(Error::InvalidParameter(format!("ell = {} outside (0, 1/2)", self.ell)));
        }
        if self.ph_radius < self.pl_radius {
            return Err(Error::InvalidParameter(format!(
                "pH radius {} below pL radius {}",
                self.ph_radius, self.pl_radius
            )));
        }
        if self.cutoff == 0 {
            return Err(Error::InvalidParameter("lattice cutoff M must be positive".into()));
        }
        Model::<f64>::new(self.n, self.kappa, self.potential).map(|_| ())
    }
}

#[derive(Clone, Debug)]
pub struct Instance<T> {
    pub params: InstanceParams,
    pub model: Model<T>,
    pub lattice: Arc<MomentumLattice>,
    pub basis: Arc<OccupationBasis>,
    pub scattering: ScatteringSolution<T>,
    pub eta: EtaTable<T>,
}

impl<T: Real> Instance<T> {
    pub fn new(params: InstanceParams) -> Result<Self> {
        params.validate()?;
        let model = Model::new(params.n, T::c(params.kappa), params.potential)?;
        let lattice = Arc::new(
            MomentumLattice::new(params.cutoff, false).with_shells(params.ph_radius, params.pl_radius),
        );
        let basis = Arc::new(OccupationBasis::new(
            lattice.clone(),
            ParticleRule::AtMost(params.n),
            &Self::options(&params),
        )?);
        let scattering = ScatteringSolution::solve(
            &params.potential,
            T::c(params.ell),
            params.n,
            T::c(params.kappa),
            params.grid,
        )?;
        let eta = eta_coefficients(&scattering, &lattice)?;
        Ok(Self {
            params,
            model,
            lattice,
            basis,
            scattering,
            eta,
        })
    }

    fn options(params: &InstanceParams) -> BasisOptions {
        BasisOptions {
            max_dim: params.max_dim,
            sectors: params.sectors.clone(),
        }
    }

    /// Same instance with η replaced, e.g. zeroed or rescaled for negative controls.
    pub fn with_eta(&self, eta: EtaTable<T>) -> Self {
        Self { eta, ..self.clone() }
    }

    pub fn a0(&self) -> T {
        self.scattering.a0
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// `N`-particle basis on the lattice with the zero mode, matching the sector filter.
    pub fn full_basis(&self) -> Result<Arc<OccupationBasis>> {
        let lat = Arc::new(self.lattice.with_zero_mode(true));
        Ok(Arc::new(OccupationBasis::new(
            lat,
            ParticleRule::Exactly(self.params.n),
            &Self::options(&self.params),
        )?))
    }

    /// `4π a₀ N^{1+κ}`.
    pub fn leading_energy(&self) -> T {
        T::c(4.0 * std::f64::consts::PI) * self.a0() * T::n(self.n()) * self.model.nk()
    }
}
