//! File formats: matrices, states and POMs as JSON; priors, Hamiltonians and
//! tables as CSV. Floats are written in shortest round-trip form.

use std::fs;
use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ParameterizedState, Pom, PriorDensity, PriorKind};
use crate::numerics::{CMatrix, Grid, HermitianOperator};
use crate::thermometry::HamiltonianSpec;

/// `{"dim": d, "data": [[re, im], ...]}`, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dim: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixFile {
    pub fn from_operator(op: &HermitianOperator) -> Self {
        let m = op.matrix();
        let d = op.dim();
        let mut data = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                let z = m[(r, c)];
                data.push([z.re, z.im]);
            }
        }
        MatrixFile { dim: d, data }
    }

    pub fn to_operator(&self) -> Result<HermitianOperator> {
        let d = self.dim;
        if d == 0 || self.data.len() != d * d {
            return Err(Error::validation(format!(
                "matrix of dim {d} needs {} entries, found {}",
                d * d,
                self.data.len()
            )));
        }
        if self.data.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::validation("matrix entries must be finite"));
        }
        let m = CMatrix::from_fn(d, d, |r, c| {
            let [re, im] = self.data[r * d + c];
            Complex64::new(re, im)
        });
        HermitianOperator::new(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub grid: Vec<f64>,
    pub states: Vec<MatrixFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PomFile {
    pub labels: Vec<String>,
    pub effects: Vec<MatrixFile>,
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(s)
}

pub fn read_matrix(path: &Path) -> Result<HermitianOperator> {
    let f: MatrixFile = serde_json::from_str(&read_to_string(path)?)?;
    f.to_operator()
}

pub fn pom_to_json(pom: &Pom) -> Result<String> {
    let f = PomFile {
        labels: pom.labels().to_vec(),
        effects: pom
            .effects()
            .iter()
            .map(MatrixFile::from_operator)
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&f)?)
}

pub fn pom_from_json(text: &str) -> Result<Pom> {
    let f: PomFile = serde_json::from_str(text)?;
    if f.labels.len() != f.effects.len() {
        return Err(Error::validation(
            "POM file has different numbers of labels and effects",
        ));
    }
    let effects = f
        .effects
        .iter()
        .map(MatrixFile::to_operator)
        .collect::<Result<Vec<_>>>()?;
    Pom::new(f.labels, effects)
}

pub fn read_pom(path: &Path) -> Result<Pom> {
    pom_from_json(&read_to_string(path)?)
}

pub fn state_to_json(state: &ParameterizedState) -> Result<String> {
    let f = StateFile {
        grid: state.grid().nodes().to_vec(),
        states: state
            .states()
            .iter()
            .map(MatrixFile::from_operator)
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&f)?)
}

/// Parses a state file whose node list must coincide with `grid`.
pub fn state_from_json(text: &str, grid: &Grid) -> Result<ParameterizedState> {
    let f: StateFile = serde_json::from_str(text)?;
    if f.grid.len() != grid.len() {
        return Err(Error::validation(format!(
            "state file has {} nodes, the prior grid has {}",
            f.grid.len(),
            grid.len()
        )));
    }
    for (a, b) in f.grid.iter().zip(grid.nodes()) {
        if (a - b).abs() > 1e-12 * b.abs() {
            return Err(Error::validation(format!(
                "state node {a} does not match prior node {b}"
            )));
        }
    }
    let states = f
        .states
        .iter()
        .map(MatrixFile::to_operator)
        .collect::<Result<Vec<_>>>()?;
    ParameterizedState::new(grid.clone(), states)
}

pub fn read_state(path: &Path, grid: &Grid) -> Result<ParameterizedState> {
    state_from_json(&read_to_string(path)?, grid)
}

#[derive(Debug, Serialize, Deserialize)]
struct PriorRow {
    theta: f64,
    weight: f64,
    density: f64,
}

/// CSV with header `theta,weight,density`.
pub fn prior_to_csv(prior: &PriorDensity) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for ((&theta, &weight), &density) in prior
        .grid()
        .nodes()
        .iter()
        .zip(prior.grid().weights())
        .zip(prior.values())
    {
        w.serialize(PriorRow {
            theta,
            weight,
            density,
        })?;
    }
    String::from_utf8(
        w.into_inner()
            .map_err(|e| Error::validation(e.to_string()))?,
    )
    .map_err(|e| Error::validation(e.to_string()))
}

/// The grid is taken from the file; the density is renormalized against it.
pub fn prior_from_csv(text: &str) -> Result<PriorDensity> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows = r
        .deserialize::<PriorRow>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if rows.is_empty() {
        return Err(Error::validation("prior file has no rows"));
    }
    let grid = Grid::new(
        rows.iter().map(|r| r.theta).collect(),
        rows.iter().map(|r| r.weight).collect(),
    )?;
    PriorDensity::new(
        grid,
        rows.iter().map(|r| r.density).collect(),
        PriorKind::Custom,
    )
}

pub fn read_prior(path: &Path) -> Result<PriorDensity> {
    prior_from_csv(&read_to_string(path)?)
}

#[derive(Debug, Deserialize)]
struct EnergyRow {
    energy: f64,
}

/// CSV with header `energy`, one level per row.
pub fn hamiltonian_from_csv(text: &str, kb: f64) -> Result<HamiltonianSpec> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows = r
        .deserialize::<EnergyRow>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    HamiltonianSpec::new(rows.into_iter().map(|r| r.energy).collect(), kb)
}

pub fn read_hamiltonian(path: &Path, kb: f64) -> Result<HamiltonianSpec> {
    hamiltonian_from_csv(&read_to_string(path)?, kb)
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::jeffreys_prior;
    use crate::numerics::make_log_grid;
    use crate::random::{random_density_matrix, random_pom, rng};
    use crate::thermometry::thermal_state_family;

    #[test]
    fn matrix_round_trip_is_exact() {
        let mut r = rng(3);
        let rho = random_density_matrix(3, 3, &mut r);
        let json = serde_json::to_string(&MatrixFile::from_operator(&rho)).unwrap();
        let back: MatrixFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_operator().unwrap(), rho);
    }

    #[test]
    fn rejects_malformed_matrices() {
        let bad = MatrixFile {
            dim: 2,
            data: vec![[1.0, 0.0]; 3],
        };
        assert!(bad.to_operator().unwrap_err().is_validation());
        let non_herm = MatrixFile {
            dim: 2,
            data: vec![[1.0, 0.0], [1.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
        };
        assert!(non_herm.to_operator().is_err());
    }

    #[test]
    fn pom_and_state_round_trip() {
        let mut r = rng(5);
        let pom = random_pom(2, 3, &mut r);
        let back = pom_from_json(&pom_to_json(&pom).unwrap()).unwrap();
        assert_eq!(back.labels(), pom.labels());
        assert_eq!(back.effects(), pom.effects());

        let g = make_log_grid(0.1, 10.0, 12).unwrap();
        let h = HamiltonianSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        let st = thermal_state_family(&h, &g).unwrap();
        let back = state_from_json(&state_to_json(&st).unwrap(), &g).unwrap();
        assert_eq!(back.states(), st.states());
        let other = make_log_grid(0.1, 11.0, 12).unwrap();
        assert!(state_from_json(&state_to_json(&st).unwrap(), &other).is_err());
    }

    #[test]
    fn prior_round_trip() {
        let g = make_log_grid(0.1, 10.0, 30).unwrap();
        let p = jeffreys_prior(&g);
        let csv = prior_to_csv(&p).unwrap();
        assert!(csv.starts_with("theta,weight,density\n"));
        let back = prior_from_csv(&csv).unwrap();
        assert_eq!(back.grid().nodes(), g.nodes());
        for (a, b) in back.values().iter().zip(p.values()) {
            assert!((a - b).abs() <= 1e-15 * b);
        }
    }

    #[test]
    fn hamiltonian_csv() {
        let h = hamiltonian_from_csv("energy\n0\n1.5\n", 2.0).unwrap();
        assert_eq!(h.energies(), &[0.0, 1.5]);
        assert!(hamiltonian_from_csv("energy\n1\n0\n", 1.0).is_err());
        assert!(hamiltonian_from_csv("level\n0\n1\n", 1.0).is_err());
    }
}
