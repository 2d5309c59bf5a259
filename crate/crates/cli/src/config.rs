//! Run configuration: one JSON document shared by every subcommand, with
//! command-line overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qse_core::io::{read_hamiltonian, read_pom, read_prior, read_state};
use qse_core::numerics::CMatrix;
use qse_core::thermometry::{thermal_state_family, HamiltonianSpec};
use qse_core::{
    flat_in_log_prior, flat_prior, jeffreys_prior, log_normal_prior, make_log_grid, Error, Grid,
    HermitianOperator, ParameterizedState, Pom, PriorDensity, Result, Thresholds, Tolerances,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub theta_min: f64,
    pub theta_max: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            theta_min: 0.1,
            theta_max: 10.0,
            n: 200,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        make_log_grid(self.theta_min, self.theta_max, self.n)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Jeffreys,
    FlatInLog,
    Flat,
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    /// CSV `theta,weight,density`; the file's nodes replace the grid spec.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HamiltonianSource {
    pub energies: Option<Vec<f64>>,
    /// CSV with header `energy`.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Gibbs states of the configured Hamiltonian.
    Thermal,
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PomSpec {
    /// Eigenprojectors of the Lyapunov solution.
    Optimal,
    Energy,
    Computational,
    Trivial,
    /// Qubit measurement in the σ_x eigenbasis.
    SigmaX,
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParameterSpec {
    pub grid: GridSpec,
    pub hamiltonian: HamiltonianSource,
    pub theta_u: f64,
}

impl Default for ParameterSpec {
    fn default() -> Self {
        ParameterSpec {
            grid: GridSpec::default(),
            hamiltonian: HamiltonianSource::default(),
            theta_u: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub grid: GridSpec,
    pub prior: PriorSpec,
    pub state: StateSpec,
    pub hamiltonian: HamiltonianSource,
    pub kb: f64,
    pub pom: PomSpec,
    /// Reference scale; the prior geometric mean when absent.
    pub theta_u: Option<f64>,
    /// Fixed true parameter for `simulate`; drawn from the prior when absent.
    pub true_theta: Option<f64>,
    pub shots: usize,
    pub trajectories: usize,
    pub seed: u64,
    pub thresholds: Thresholds,
    pub tolerances: Tolerances,
    /// Factors of a tensor-product encoding, for `multiparam`.
    pub parameters: Vec<ParameterSpec>,
    /// Not echoed into reports, so outputs do not depend on where they are written.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            grid: GridSpec::default(),
            prior: PriorSpec::FlatInLog,
            state: StateSpec::Thermal,
            hamiltonian: HamiltonianSource::default(),
            kb: 1.0,
            pom: PomSpec::Optimal,
            theta_u: None,
            true_theta: None,
            shots: 10,
            trajectories: 1,
            seed: 0,
            thresholds: Thresholds::default(),
            tolerances: Tolerances::default(),
            parameters: Vec::new(),
            out: None,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let PriorSpec::File { path } = &mut self.prior {
            resolve(base, path);
        }
        if let StateSpec::File { path } = &mut self.state {
            resolve(base, path);
        }
        if let PomSpec::File { path } = &mut self.pom {
            resolve(base, path);
        }
        if let Some(p) = &mut self.hamiltonian.file {
            resolve(base, p);
        }
        for par in &mut self.parameters {
            if let Some(p) = &mut par.hamiltonian.file {
                resolve(base, p);
            }
        }
        if let Some(p) = &mut self.out {
            resolve(base, p);
        }
    }

    /// Range checks that do not need any file.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.to_string()));
        if !(self.kb.is_finite() && self.kb > 0.0) {
            return bad("kb must be positive");
        }
        if let Some(t) = self.theta_u {
            if !(t.is_finite() && t > 0.0) {
                return bad("theta_u must be positive");
            }
        }
        if let Some(t) = self.true_theta {
            if !(t.is_finite() && t > 0.0) {
                return bad("true_theta must be positive");
            }
        }
        if self.shots == 0 {
            return bad("shots must be at least 1");
        }
        if self.trajectories == 0 {
            return bad("trajectories must be at least 1");
        }
        Ok(())
    }

    pub fn build_prior(&self) -> Result<PriorDensity> {
        match &self.prior {
            PriorSpec::File { path } => read_prior(path),
            spec => {
                let g = self.grid.build()?;
                match spec {
                    PriorSpec::Jeffreys => Ok(jeffreys_prior(&g)),
                    PriorSpec::FlatInLog => Ok(flat_in_log_prior(&g)),
                    PriorSpec::Flat => Ok(flat_prior(&g)),
                    PriorSpec::LogNormal { mu, sigma } => log_normal_prior(&g, *mu, *sigma),
                    PriorSpec::File { .. } => unreachable!(),
                }
            }
        }
    }

    pub fn build_hamiltonian(&self) -> Result<HamiltonianSpec> {
        hamiltonian_from(&self.hamiltonian, self.kb)
    }

    pub fn build_state(&self, grid: &Grid) -> Result<ParameterizedState> {
        match &self.state {
            StateSpec::Thermal => thermal_state_family(&self.build_hamiltonian()?, grid),
            StateSpec::File { path } => read_state(path, grid),
        }
    }

    /// `None` for the optimal measurement, which depends on the moments.
    pub fn build_pom(&self, dim: usize) -> Result<Option<Pom>> {
        Ok(Some(match &self.pom {
            PomSpec::Optimal => return Ok(None),
            PomSpec::Energy => {
                let h = self.build_hamiltonian()?;
                if h.dim() != dim {
                    return Err(Error::Validation(
                        "energy POM dimension differs from the state".into(),
                    ));
                }
                h.energy_pom()
            }
            PomSpec::Computational => Pom::computational_basis(dim),
            PomSpec::Trivial => Pom::trivial(dim),
            PomSpec::SigmaX => {
                if dim != 2 {
                    return Err(Error::Validation("sigma_x POM needs a qubit state".into()));
                }
                sigma_x_pom()
            }
            PomSpec::File { path } => read_pom(path)?,
        }))
    }
}

pub fn hamiltonian_from(src: &HamiltonianSource, kb: f64) -> Result<HamiltonianSpec> {
    match (&src.energies, &src.file) {
        (Some(_), Some(_)) => Err(Error::Validation(
            "give either hamiltonian energies or a file, not both".into(),
        )),
        (Some(e), None) => HamiltonianSpec::new(e.clone(), kb),
        (None, Some(f)) => read_hamiltonian(f, kb),
        (None, None) => HamiltonianSpec::new(vec![0.0, 1.0], kb),
    }
}

fn sigma_x_pom() -> Pom {
    let plus = HermitianOperator::from_real(2, &[0.5, 0.5, 0.5, 0.5]).expect("real symmetric");
    let minus = HermitianOperator::new(CMatrix::identity(2, 2) - plus.matrix()).expect("Hermitian");
    Pom::new(vec!["+".into(), "-".into()], vec![plus, minus]).expect("σ_x projectors form a POM")
}
