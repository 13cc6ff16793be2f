//! One function per experiment. Each returns the artifact text and, when a
//! checked property fails, the reason.

use rayon::prelude::*;
use serde::Serialize;
use spinlattice::dynamics::{
    clustering_sweep, commutator_sweep, velocity_estimate, volume_convergence, LrBoundParams, SweepRecord,
    VelocityEstimate,
};
use spinlattice::gns::{gns_construct, purity_irreducibility_crosscheck};
use spinlattice::models::{local_hamiltonian, Interaction};
use spinlattice::sampling::{self, OperatorKind, SeededRng};
use spinlattice::states::{
    free_energy, ground_state_residual, passivity_check, relative_entropy, DensityState, Thermal,
};
use spinlattice::tensorcore::{hermitian_eig, trace_product, ComplexMatrix};
use spinlattice::toric::ToricLattice;
use spinlattice::{c64, Axis, LocalOperator, Region, Site};

use crate::config::{Experiment, ExperimentConfig, Format, ModelSpec, StateSpec};
use crate::failure::Failure;
use crate::output::{nums, to_json, Complex, Num};

/// Rendered artifact plus the reason a checked property failed, if any.
pub struct Artifact {
    pub contents: String,
    pub violation: Option<String>,
}

impl Artifact {
    fn json<T: Serialize>(value: &T, violation: Option<String>) -> Result<Self, Failure> {
        Ok(Artifact { contents: to_json(value)?, violation })
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    match config.experiment {
        Experiment::KmsCheck => kms_check(config),
        Experiment::LrSweep => lr_sweep(config),
        Experiment::Velocity => velocity(config),
        Experiment::Clustering => clustering(config),
        Experiment::Gns => gns(config),
        Experiment::Toric => toric(config),
        Experiment::FreeEnergy => free_energy_check(config),
        Experiment::GroundCheck => ground_check(config),
        Experiment::Passivity => passivity(config),
        Experiment::Convergence => convergence(config),
    }
}

/// Echo of the model with every coupling at full precision.
#[derive(Serialize)]
#[serde(tag = "model", rename_all = "lowercase")]
enum ModelView {
    Xxz {
        #[serde(rename = "Jx")]
        jx: Num,
        #[serde(rename = "Jy")]
        jy: Num,
        #[serde(rename = "Jz")]
        jz: Num,
        h: Num,
        #[serde(rename = "L")]
        l: usize,
    },
    Ising {
        h: Num,
        #[serde(rename = "J")]
        j: Num,
        #[serde(rename = "L")]
        l: usize,
    },
    Toric {
        #[serde(rename = "L")]
        l: usize,
    },
}

fn model_view(config: &ExperimentConfig) -> Result<ModelView, Failure> {
    Ok(match *config.model()? {
        ModelSpec::Xxz { jx, jy, jz, h, l } => ModelView::Xxz { jx: Num(jx), jy: Num(jy), jz: Num(jz), h: Num(h), l },
        ModelSpec::Ising { h, j, l } => ModelView::Ising { h: Num(h), j: Num(j), l },
        ModelSpec::Toric { l } => ModelView::Toric { l },
    })
}

fn z_at(i: i64) -> LocalOperator {
    LocalOperator::pauli_at(Site::line(i), Axis::Z)
}

fn chain_model(config: &ExperimentConfig) -> Result<(Interaction, Region), Failure> {
    let model = config.model()?;
    Ok((model.interaction()?, model.chain()?))
}

fn block_operators(rng: &mut SeededRng, region: &Region, count: usize, kind: OperatorKind) -> Vec<LocalOperator> {
    (0..count).map(|_| sampling::random_block_operator(rng, region, 2, kind, 2)).collect()
}

fn exceeds(what: &str, value: f64, limit: f64) -> Option<String> {
    (!(value <= limit)).then(|| format!("{what} {value:e} exceeds tolerance {limit:e}"))
}

fn below(what: &str, value: f64, limit: f64) -> Option<String> {
    (!(value >= limit)).then(|| format!("{what} {value:e} is below {limit:e}"))
}

/// Shared shape of the sampled state checks.
#[derive(Serialize)]
struct StateCheck {
    experiment: &'static str,
    model: ModelView,
    residual: Num,
    tolerance: Num,
    beta: Vec<Num>,
    t: Vec<Num>,
    dim: usize,
    seed: u64,
    samples: usize,
    per_beta: Vec<BetaResidual>,
}

#[derive(Serialize)]
struct BetaResidual {
    beta: Num,
    residual: Num,
}

fn state_check(
    config: &ExperimentConfig,
    residual: f64,
    tolerance: f64,
    dim: usize,
    per_beta: Vec<(f64, f64)>,
) -> Result<StateCheck, Failure> {
    Ok(StateCheck {
        experiment: config.experiment.name(),
        model: model_view(config)?,
        residual: Num(residual),
        tolerance: Num(tolerance),
        beta: nums(&config.grid.beta),
        t: nums(&config.grid.t),
        dim,
        seed: config.seed,
        samples: config.params.samples,
        per_beta: per_beta.into_iter().map(|(b, r)| BetaResidual { beta: Num(b), residual: Num(r) }).collect(),
    })
}

fn kms_check(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    let (phi, region) = chain_model(config)?;
    let h = local_hamiltonian(&phi, &region)?;
    let mut rng = sampling::rng(config.seed);
    let n = config.params.samples;
    let a = block_operators(&mut rng, &region, n, OperatorKind::Hermitian);
    let b = block_operators(&mut rng, &region, n, OperatorKind::Hermitian);
    let mut per_beta = Vec::new();
    for &beta in &config.grid.beta {
        let thermal = Thermal::new(&h, beta)?;
        let worst = (0..n)
            .into_par_iter()
            .map(|k| {
                config.grid.t.iter().try_fold(0.0f64, |acc, &t| {
                    Ok::<_, spinlattice::Error>(acc.max(thermal.kms_residual(&a[k], &b[k], t)?))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        per_beta.push((beta, worst));
    }
    let residual = per_beta.iter().map(|p| p.1).fold(0.0, f64::max);
    let tol = config.tolerances.kms;
    let report = state_check(config, residual, tol, h.dim(), per_beta)?;
    Artifact::json(&report, exceeds("KMS residual", residual, tol))
}

fn free_energy_check(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    let (phi, region) = chain_model(config)?;
    let h = local_hamiltonian(&phi, &region)?;
    let dim = h.dim();
    let mut rng = sampling::rng(config.seed);
    let states = (0..config.params.samples)
        .map(|_| DensityState::new(region.clone(), sampling::random_density(&mut rng, dim)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut per_beta = Vec::new();
    for &beta in &config.grid.beta {
        let thermal = Thermal::new(&h, beta)?;
        let gibbs = thermal.state();
        let phi_beta = thermal.free_energy();
        let at_gibbs = (free_energy(&gibbs, &h, beta)? - phi_beta).abs();
        let worst = states
            .par_iter()
            .map(|rho| {
                let srel = relative_entropy(&gibbs, rho)?.value();
                Ok((srel - beta * (free_energy(rho, &h, beta)? - phi_beta)).abs())
            })
            .collect::<Result<Vec<f64>, spinlattice::Error>>()?
            .into_iter()
            .fold(at_gibbs, f64::max);
        per_beta.push((beta, worst));
    }
    let residual = per_beta.iter().map(|p| p.1).fold(0.0, f64::max);
    let tol = config.tolerances.identity;
    let report = state_check(config, residual, tol, dim, per_beta)?;
    Artifact::json(&report, exceeds("free-energy identity residual", residual, tol))
}

fn ground_check(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    let (phi, region) = chain_model(config)?;
    let h = local_hamiltonian(&phi, &region)?;
    let spec = hermitian_eig(h.matrix())?;
    let psi = ComplexMatrix::from_fn(spec.dim(), 1, |i, _| spec.vectors[(i, 0)]);
    let ground = DensityState::pure(region.clone(), &psi)?;
    let mut rng = sampling::rng(config.seed);
    let samples = block_operators(&mut rng, &region, config.params.samples, OperatorKind::General);
    let residual = ground_state_residual(&ground, &phi, &samples)?;
    let tol = config.tolerances.ground;
    let report = state_check(config, residual, tol, h.dim(), Vec::new())?;
    Artifact::json(&report, below("ground-state residual", residual, -tol))
}

fn passivity(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    let (phi, region) = chain_model(config)?;
    let h = local_hamiltonian(&phi, &region)?;
    let mut rng = sampling::rng(config.seed);
    let unitaries = block_operators(&mut rng, &region, config.params.samples, OperatorKind::Unitary);
    let mut per_beta = Vec::new();
    for &beta in &config.grid.beta {
        let gibbs = Thermal::new(&h, beta)?.state();
        per_beta.push((beta, passivity_check(&gibbs, &phi, &unitaries)?));
    }
    let residual = per_beta.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let tol = config.tolerances.passivity;
    let report = state_check(config, residual, tol, h.dim(), per_beta)?;
    Artifact::json(&report, below("passivity minimum", residual, -tol))
}

fn sweep(config: &ExperimentConfig) -> Result<(Vec<SweepRecord>, LrBoundParams), Failure> {
    let model = config.model()?;
    let (phi, window) = chain_model(config)?;
    let params = LrBoundParams::for_interaction(&phi, config.params.lambda, config.params.n, model.tag())?;
    let family: Vec<LocalOperator> = config.grid.dist.iter().map(|&d| z_at(d as i64)).collect();
    let records = commutator_sweep(&phi, &window, &z_at(0), &family, &config.grid.t, &params)?;
    Ok((records, params))
}

fn bound_violation(records: &[SweepRecord]) -> Option<String> {
    records
        .iter()
        .find(|r| !(r.empirical <= r.bound_rough))
        .map(|r| format!("t={} dist={}: empirical {:e} exceeds bound {:e}", r.t, r.dist, r.empirical, r.bound_rough))
}

#[derive(Serialize)]
struct SweepRow {
    t: Num,
    dist: u64,
    empirical: Num,
    bound_rough: Num,
    bound_sharp: Option<Num>,
}

/// CSV columns, in order.
pub const SWEEP_HEADER: [&str; 5] = ["t", "dist", "empirical", "bound_rough", "bound_sharp"];

fn sweep_csv(records: &[SweepRecord]) -> Result<String, Failure> {
    let io = |e: csv::Error| Failure::Io(e.to_string());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).map_err(io)?;
    for r in records {
        let sharp = r.bound_sharp.map(|b| Num(b).text()).unwrap_or_default();
        w.write_record([
            Num(r.t).text(),
            r.dist.to_string(),
            Num(r.empirical).text(),
            Num(r.bound_rough).text(),
            sharp,
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Io(e.to_string()))
}

fn lr_sweep(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    let (records, params) = sweep(config)?;
    let violation = bound_violation(&records);
    let contents = match config.output.format {
        Format::Csv => sweep_csv(&records)?,
        Format::Json => {
            #[derive(Serialize)]
            struct Report {
                experiment: &'static str,
                model: ModelView,
                lambda: Num,
                phi_norm_lambda: Num,
                records: Vec<SweepRow>,
            }
            to_json(&Report {
                experiment: "lr-sweep",
                model: model_view(config)?,
                lambda: Num(params.lambda),
                phi_norm_lambda: Num(params.phi_norm_lambda),
                records: records
                    .iter()
                    .map(|r| SweepRow {
                        t: Num(r.t),
                        dist: r.dist,
                        empirical: Num(r.empirical),
                        bound_rough: Num(r.bound_rough),
                        bound_sharp: r.bound_sharp.map(Num),
                    })
                    .collect(),
            })?
        }
    };
    Ok(Artifact { contents, violation })
}

#[derive(Serialize)]
struct Crossing {
    dist: u64,
    t: Num,
}

fn velocity(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    let (records, params) = sweep(config)?;
    let estimate = velocity_estimate(&records, config.params.threshold, &params)?;
    #[derive(Serialize)]
    struct Report {
        experiment: &'static str,
        model: ModelView,
        outcome: &'static str,
        v_emp: Option<Num>,
        v_bound: Num,
        threshold: Num,
        crossings: Vec<Crossing>,
    }
    let (outcome, v_emp, v_bound, threshold, crossings) = match estimate {
        VelocityEstimate::Resolved { v_emp, v_bound, threshold, crossings } => {
            ("resolved", Some(v_emp), v_bound, threshold, crossings)
        }
        VelocityEstimate::FrontNotResolved { v_bound, threshold, crossings } => {
            ("front_not_resolved", None, v_bound, threshold, crossings)
        }
    };
    let mut violation = bound_violation(&records);
    if let Some(v) = v_emp.filter(|v| !(*v <= v_bound)) {
        violation.get_or_insert(format!("empirical velocity {v} exceeds bound {v_bound}"));
    }
    let report = Report {
        experiment: "velocity",
        model: model_view(config)?,
        outcome,
        v_emp: v_emp.map(Num),
        v_bound: Num(v_bound),
        threshold: Num(threshold),
        crossings: crossings.into_iter().map(|(dist, t)| Crossing { dist, t: Num(t) }).collect(),
    };
    Artifact::json(&report, violation)
}

fn clustering(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    let (phi, window) = chain_model(config)?;
    let pairs: Vec<_> = config.grid.dist.iter().map(|&d| (z_at(0), z_at(d as i64))).collect();
    let result = clustering_sweep(&phi, &window, &pairs)?;
    #[derive(Serialize)]
    struct Point {
        dist: u64,
        correlation: Num,
    }
    #[derive(Serialize)]
    struct Report {
        experiment: &'static str,
        model: ModelView,
        mu_fit: Option<Num>,
        gap: Num,
        degenerate: bool,
        points: Vec<Point>,
    }
    let report = Report {
        experiment: "clustering",
        model: model_view(config)?,
        mu_fit: result.mu_fit.map(Num),
        gap: Num(result.gap),
        degenerate: result.degenerate,
        points: result.points.iter().map(|&(dist, c)| Point { dist, correlation: Num(c) }).collect(),
    };
    Artifact::json(&report, None)
}

fn convergence(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    let (phi, chain) = chain_model(config)?;
    let center = (chain.len() / 2) as i64;
    let windows: Vec<Region> =
        config.grid.radius.iter().map(|&r| Region::interval(center - r as i64, center + r as i64 + 1)).collect();
    let t = config.grid.t[0];
    let deltas = volume_convergence(&phi, &z_at(center), t, &windows)?;
    #[derive(Serialize)]
    struct Report<'a> {
        experiment: &'static str,
        model: ModelView,
        t: Num,
        center: i64,
        radius: &'a [u64],
        deltas: Vec<Num>,
        monotone: bool,
    }
    let monotone = deltas.windows(2).all(|w| w[1] < w[0]);
    let report = Report {
        experiment: "convergence",
        model: model_view(config)?,
        t: Num(t),
        center,
        radius: &config.grid.radius,
        deltas: nums(&deltas),
        monotone,
    };
    Artifact::json(&report, None)
}

#[derive(Debug, Serialize)]
pub struct GnsReport {
    pub gns_dim: usize,
    pub commutant_dim: usize,
    pub is_pure: bool,
    pub reconstruction_residual: Num,
}

/// Number of random observables used for the reconstruction residual.
const RECONSTRUCTION_SAMPLES: usize = 100;

pub fn gns_report(state: &StateSpec, seed: u64) -> Result<GnsReport, Failure> {
    let mut rng = sampling::rng(seed);
    let rho = match state {
        StateSpec::Diag(w) => {
            ComplexMatrix::from_fn(
                w.len(),
                w.len(),
                |i, j| {
                    if i == j {
                        c64::new(w[i], 0.0)
                    } else {
                        c64::new(0.0, 0.0)
                    }
                },
            )
        }
        StateSpec::Random { dim } => sampling::random_density(&mut rng, *dim),
    };
    let d = rho.nrows();
    let omega = DensityState::with_site_dim(Region::chain(1), rho, d)?;
    let rep = gns_construct(d, &omega)?;
    let (is_pure, commutant_dim) = purity_irreducibility_crosscheck(d, &omega)?;
    let mut residual = 0.0f64;
    for _ in 0..RECONSTRUCTION_SAMPLES {
        let a = sampling::random_matrix(&mut rng, d);
        residual = residual.max((rep.vector_state(&a)? - trace_product(omega.matrix(), &a)).norm());
    }
    Ok(GnsReport { gns_dim: rep.gns_dim(), commutant_dim, is_pure, reconstruction_residual: Num(residual) })
}

fn gns(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    let state = config.state.as_ref().ok_or_else(|| Failure::Schema("gns needs a state".into()))?;
    let report = gns_report(state, config.seed)?;
    let tol = config.tolerances.reconstruction;
    let violation = exceeds("reconstruction residual", report.reconstruction_residual.0, tol);
    Artifact::json(&report, violation)
}

#[derive(Debug, Serialize)]
pub struct QueryResult {
    pub query: String,
    pub canonical: String,
    pub expectation: Complex,
}

#[derive(Debug, Serialize)]
pub struct ToricReport {
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degeneracy: Option<u128>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queries: Option<Vec<QueryResult>>,
}

/// Ground-state expectations of the queried Pauli strings on the `l x l`
/// torus.
pub fn toric_queries(l: usize, queries: &[String]) -> Result<Vec<QueryResult>, Failure> {
    let lattice = ToricLattice::new(l)?;
    queries
        .iter()
        .map(|q| {
            let p = lattice.parse_pauli(q)?;
            Ok(QueryResult {
                query: q.clone(),
                canonical: lattice.format_pauli(&p),
                expectation: lattice.ground_expectation_pauli(&p).into(),
            })
        })
        .collect()
}

pub fn toric_degeneracy(l: usize) -> Result<u128, Failure> {
    Ok(ToricLattice::new(l)?.ground_space_dimension())
}

fn toric(config: &ExperimentConfig) -> Result<Artifact, Failure> {
    let l = config.model()?.size();
    let report = ToricReport {
        l: Some(l),
        degeneracy: Some(toric_degeneracy(l)?),
        queries: Some(toric_queries(l, &config.queries)?),
    };
    Artifact::json(&report, None)
}
