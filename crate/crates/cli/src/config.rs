//! Experiment configuration: one JSON file describes one experiment.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spinlattice::models::{heisenberg_xxz, ising, toric_interaction, Interaction};
use spinlattice::Region;

use crate::failure::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    KmsCheck,
    LrSweep,
    Velocity,
    Clustering,
    Gns,
    Toric,
    FreeEnergy,
    GroundCheck,
    Passivity,
    Convergence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::KmsCheck => "kms-check",
            Experiment::LrSweep => "lr-sweep",
            Experiment::Velocity => "velocity",
            Experiment::Clustering => "clustering",
            Experiment::Gns => "gns",
            Experiment::Toric => "toric",
            Experiment::FreeEnergy => "free-energy",
            Experiment::GroundCheck => "ground-check",
            Experiment::Passivity => "passivity",
            Experiment::Convergence => "convergence",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Xxz {
        #[serde(rename = "Jx")]
        jx: f64,
        #[serde(rename = "Jy")]
        jy: f64,
        #[serde(rename = "Jz")]
        jz: f64,
        h: f64,
        #[serde(rename = "L")]
        l: usize,
    },
    Ising {
        h: f64,
        #[serde(rename = "J")]
        j: f64,
        #[serde(rename = "L")]
        l: usize,
    },
    Toric {
        #[serde(rename = "L")]
        l: usize,
    },
}

impl ModelSpec {
    pub fn size(&self) -> usize {
        match *self {
            ModelSpec::Xxz { l, .. } | ModelSpec::Ising { l, .. } | ModelSpec::Toric { l } => l,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ModelSpec::Xxz { .. } => "xxz",
            ModelSpec::Ising { .. } => "ising",
            ModelSpec::Toric { .. } => "toric",
        }
    }

    pub fn interaction(&self) -> Result<Interaction, Failure> {
        Ok(match *self {
            ModelSpec::Xxz { jx, jy, jz, h, .. } => heisenberg_xxz(jx, jy, jz, h),
            ModelSpec::Ising { h, j, .. } => ising(h, j),
            ModelSpec::Toric { l } => toric_interaction(l)?,
        })
    }

    /// The chain `0..L` of a one-dimensional model.
    pub fn chain(&self) -> Result<Region, Failure> {
        match self {
            ModelSpec::Toric { .. } => {
                Err(Failure::Schema("this experiment needs a chain model (xxz or ising)".into()))
            }
            _ => Ok(Region::chain(self.size())),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub t: Vec<f64>,
    pub dist: Vec<u64>,
    pub beta: Vec<f64>,
    pub radius: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Decay rate for the Lieb-Robinson bounds.
    pub lambda: f64,
    /// Local dimension bound `N`.
    pub n: usize,
    /// Front threshold for the velocity estimate.
    pub threshold: f64,
    /// Number of random samples drawn by sampling experiments.
    pub samples: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params { lambda: spinlattice::dynamics::DEFAULT_LAMBDA, n: 2, threshold: 1e-2, samples: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub kms: f64,
    pub identity: f64,
    pub ground: f64,
    pub passivity: f64,
    pub reconstruction: f64,
    pub bound: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { kms: 1e-8, identity: 1e-9, ground: 1e-9, passivity: 1e-8, reconstruction: 1e-10, bound: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum StateSpec {
    /// Diagonal density matrix with these weights.
    Diag(Vec<f64>),
    /// Seeded random density matrix on `M_dim`.
    Random { dim: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub queries: Vec<String>,
    pub output: OutputSpec,
}

fn schema(msg: impl Into<String>) -> Failure {
    Failure::Schema(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn model(&self) -> Result<&ModelSpec, Failure> {
        self.model.as_ref().ok_or_else(|| schema(format!("experiment {} needs a model", self.experiment.name())))
    }

    /// Checks everything that can be checked without running the experiment.
    pub fn validate(&self) -> Result<(), Failure> {
        use Experiment::*;
        let e = self.experiment;
        if self.output.format == Format::Csv && e != LrSweep {
            return Err(schema(format!("experiment {} writes json only", e.name())));
        }
        if !(self.params.lambda > 0.0 && self.params.lambda.is_finite()) {
            return Err(schema("params.lambda must be positive"));
        }
        if self.params.n < 2 {
            return Err(schema("params.n must be at least 2"));
        }
        if !(self.params.threshold > 0.0) {
            return Err(schema("params.threshold must be positive"));
        }
        let tol = &self.tolerances;
        for (name, v) in [
            ("kms", tol.kms),
            ("identity", tol.identity),
            ("ground", tol.ground),
            ("passivity", tol.passivity),
            ("reconstruction", tol.reconstruction),
            ("bound", tol.bound),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(schema(format!("tolerances.{name} must be finite and nonnegative")));
            }
        }
        if self.grid.t.iter().any(|t| !t.is_finite()) {
            return Err(schema("grid.t must be finite"));
        }
        if self.grid.beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(schema("grid.beta must be positive"));
        }
        match e {
            Gns => {
                if self.model.is_some() {
                    return Err(schema("gns takes a state, not a model"));
                }
                match &self.state {
                    None => return Err(schema("gns needs a state")),
                    Some(StateSpec::Diag(w)) if !(2..=16).contains(&w.len()) => {
                        return Err(schema("state.diag needs between 2 and 16 weights"))
                    }
                    Some(StateSpec::Random { dim }) if !(2..=16).contains(dim) => {
                        return Err(schema("state.random.dim must lie in 2..=16"))
                    }
                    _ => {}
                }
                return Ok(());
            }
            Toric => {
                let ModelSpec::Toric { l } = self.model()? else {
                    return Err(schema("toric needs the toric model"));
                };
                if *l < 2 {
                    return Err(schema("toric L must be at least 2"));
                }
                return Ok(());
            }
            _ => {}
        }
        let model = self.model()?;
        let l = model.size();
        model.chain()?;
        if l == 0 {
            return Err(schema("model L must be positive"));
        }
        if self.state.is_some() || !self.queries.is_empty() {
            return Err(schema(format!("experiment {} takes neither state nor queries", e.name())));
        }
        let need = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(schema(msg.to_string()))
            }
        };
        match e {
            KmsCheck => {
                need(!self.grid.beta.is_empty() && !self.grid.t.is_empty(), "kms-check needs grid.beta and grid.t")?;
                need(self.params.samples > 0, "params.samples must be positive")?;
            }
            LrSweep | Velocity => {
                need(!self.grid.t.is_empty() && !self.grid.dist.is_empty(), "sweeps need grid.t and grid.dist")?;
                need(self.grid.dist.iter().all(|&d| d >= 1 && (d as usize) < l), "grid.dist must lie in 1..L")?;
            }
            Clustering => {
                need(!self.grid.dist.is_empty(), "clustering needs grid.dist")?;
                need(self.grid.dist.iter().all(|&d| d >= 1 && (d as usize) < l), "grid.dist must lie in 1..L")?;
            }
            FreeEnergy | Passivity => {
                need(!self.grid.beta.is_empty(), "this experiment needs grid.beta")?;
                need(self.params.samples > 0, "params.samples must be positive")?;
            }
            GroundCheck => need(self.params.samples > 0, "params.samples must be positive")?,
            Convergence => {
                need(self.grid.t.len() == 1, "convergence needs exactly one time in grid.t")?;
                need(!self.grid.radius.is_empty(), "convergence needs grid.radius")?;
                need(self.grid.radius.windows(2).all(|w| w[0] < w[1]), "grid.radius must be increasing")?;
                let largest = *self.grid.radius.last().unwrap() as usize;
                need(2 * largest < l, "the largest radius must fit in the chain around its center")?;
            }
            Gns | Toric => unreachable!(),
        }
        Ok(())
    }
}
