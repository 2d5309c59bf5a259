use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qse_core::assessment::{classify, prior_estimate, prior_uncertainty, AssessmentReport};
use qse_core::estimation::{optimal_strategy_with, MinimumReport, OptimalStrategy};
use qse_core::io::{write_file, MatrixFile, PomFile};
use qse_core::multiparam::{
    evaluate_multi_mle, multi_bayes_estimators, multi_bound, multi_moments, product_pom,
    MultiPrior, ProductState,
};
use qse_core::multishot::{
    exact_multishot, simulate_batch, summarize, BatchSummary, TruthSampling,
    DEFAULT_ENUMERATION_CAP,
};
use qse_core::thermometry::{thermal_state_family, thermometry_optimum, ThermometryDiagnostics};
use qse_core::{
    bayes_estimator, evaluate_mle, hh_certificate, jeffreys_prior, minimum_error, operator_moments,
    scale_observable, Error, OperatorMoments, ParameterizedState, Pom, PriorDensity, Result,
};

use crate::config::{hamiltonian_from, RunConfig};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

#[derive(Serialize)]
struct CertificateOut {
    trace_upsilon: f64,
    min_eigs: Vec<f64>,
}

#[derive(Serialize)]
struct StrategyOut {
    theta_u: f64,
    labels: Vec<String>,
    eigenvalues: Vec<f64>,
    estimates: Vec<f64>,
    s: MatrixFile,
    scale_observable: MatrixFile,
    pom: PomFile,
}

impl StrategyOut {
    fn new(strat: &OptimalStrategy) -> Self {
        StrategyOut {
            theta_u: strat.theta_u,
            labels: strat.labels.clone(),
            eigenvalues: strat.eigenvalues.clone(),
            estimates: strat.estimates.clone(),
            s: MatrixFile::from_operator(&strat.s),
            scale_observable: MatrixFile::from_operator(&scale_observable(strat)),
            pom: PomFile {
                labels: strat.labels.clone(),
                effects: strat
                    .projectors
                    .iter()
                    .map(MatrixFile::from_operator)
                    .collect(),
            },
        }
    }
}

struct Problem {
    prior: PriorDensity,
    state: ParameterizedState,
    moments: OperatorMoments,
    strategy: OptimalStrategy,
}

fn problem(cfg: &RunConfig) -> Result<Problem> {
    let prior = cfg.build_prior()?;
    let state = cfg.build_state(prior.grid())?;
    let theta_u = cfg.theta_u.unwrap_or_else(|| prior_estimate(&prior, 1.0));
    let moments = operator_moments(&prior, &state, theta_u)?;
    let strategy = optimal_strategy_with(&moments, &cfg.tolerances)?;
    Ok(Problem {
        prior,
        state,
        moments,
        strategy,
    })
}

fn chosen_pom(cfg: &RunConfig, p: &Problem) -> Result<Pom> {
    Ok(cfg
        .build_pom(p.state.dim())?
        .unwrap_or_else(|| p.strategy.pom()))
}

#[derive(Serialize)]
struct SolveReport<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    minimum: MinimumReport,
    certificate: CertificateOut,
    assessment: AssessmentReport,
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let p = problem(cfg)?;
    let minimum = minimum_error(&p.moments)?;
    let cert = hh_certificate(&p.moments, &p.strategy);
    let pom = chosen_pom(cfg, &p)?;
    let assessment = classify(&p.prior, &p.state, &pom, &cfg.thresholds)?;
    let report = SolveReport {
        config: cfg,
        minimum,
        certificate: CertificateOut {
            trace_upsilon: cert.trace_upsilon,
            min_eigs: cert.min_eigs,
        },
        assessment,
    };
    let files = vec![out.join("report.json"), out.join("strategy.json")];
    write_json(&files[0], &report)?;
    write_json(&files[1], &StrategyOut::new(&p.strategy))?;
    Ok(files)
}

#[derive(Serialize)]
struct ThermometryReport<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    minimum: MinimumReport,
    diagnostics: ThermometryDiagnostics,
    energy_measurement: AssessmentReport,
}

pub fn thermometry(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let h = cfg.build_hamiltonian()?;
    let prior = cfg.build_prior()?;
    let theta_u = cfg.theta_u.unwrap_or_else(|| prior_estimate(&prior, 1.0));
    let opt = thermometry_optimum(&h, &prior, theta_u)?;
    let state = thermal_state_family(&h, prior.grid())?;
    let energy_measurement = classify(&prior, &state, &h.energy_pom(), &cfg.thresholds)?;

    let mut csv = String::from("energy,r0,r1,s\n");
    for (((e, a), b), s) in opt
        .r_table
        .energies
        .iter()
        .zip(&opt.r_table.r0)
        .zip(&opt.r_table.r1)
        .zip(opt.r_table.ratios())
    {
        writeln!(csv, "{e:?},{a:?},{b:?},{s:?}").expect("writing to a String");
    }
    let files = vec![
        out.join("report.json"),
        out.join("r_table.csv"),
        out.join("strategy.json"),
    ];
    write_json(
        &files[0],
        &ThermometryReport {
            config: cfg,
            minimum: opt.report,
            diagnostics: opt.diagnostics,
            energy_measurement,
        },
    )?;
    write_file(&files[1], &csv)?;
    write_json(&files[2], &StrategyOut::new(&opt.strategy))?;
    Ok(files)
}

#[derive(Serialize)]
struct AssessOut<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    assessment: AssessmentReport,
    /// Mean logarithmic error of the measurement with its Bayes estimator.
    epsilon_mle: f64,
}

pub fn assess(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let p = problem(cfg)?;
    let pom = chosen_pom(cfg, &p)?;
    let assessment = classify(&p.prior, &p.state, &pom, &cfg.thresholds)?;
    let est = bayes_estimator(&p.prior, &p.state, &pom)?;
    let epsilon_mle = evaluate_mle(&p.prior, &p.state, &pom, &est)?;
    let file = out.join("assessment.json");
    write_json(
        &file,
        &AssessOut {
            config: cfg,
            assessment,
            epsilon_mle,
        },
    )?;
    Ok(vec![file])
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    summary: BatchSummary,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let p = problem(cfg)?;
    let pom = chosen_pom(cfg, &p)?;
    let truth = cfg
        .true_theta
        .map_or(TruthSampling::FromPrior, TruthSampling::Fixed);
    let trajs = simulate_batch(
        &p.prior,
        &p.state,
        &pom,
        truth,
        cfg.shots,
        cfg.trajectories,
        cfg.seed,
    )?;
    let mut files = Vec::with_capacity(trajs.len() + 1);
    for (i, t) in trajs.iter().enumerate() {
        let f = out
            .join("trajectories")
            .join(format!("trajectory_{i:05}.csv"));
        write_file(&f, &t.to_csv())?;
        files.push(f);
    }
    let f = out.join("summary.json");
    write_json(
        &f,
        &SimulateSummary {
            config: cfg,
            summary: summarize(&trajs, cfg.seed),
        },
    )?;
    files.push(f);
    Ok(files)
}

pub fn multishot_exact(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let p = problem(cfg)?;
    let pom = chosen_pom(cfg, &p)?;
    let eps_min = minimum_error(&p.moments)?.epsilon_min;
    let eps_p = prior_uncertainty(&p.prior);
    let mut csv =
        String::from("shots,exact_error,information_gain,prior_uncertainty,single_shot_minimum\n");
    for n in 1..=cfg.shots {
        let r = exact_multishot(&p.prior, &p.state, &pom, n, DEFAULT_ENUMERATION_CAP)?;
        writeln!(
            csv,
            "{n},{:?},{:?},{eps_p:?},{eps_min:?}",
            r.epsilon_mle, r.k
        )
        .expect("writing to a String");
    }
    let f = out.join("multishot_exact.csv");
    write_file(&f, &csv)?;
    let meta = out.join("multishot_exact.json");
    write_json(&meta, &serde_json::json!({ "config": cfg }))?;
    Ok(vec![f, meta])
}

#[derive(Serialize)]
struct MultiOut<'a> {
    config: &'a RunConfig,
    per_parameter: Vec<f64>,
    bound: f64,
    commutator_norms: Vec<(usize, usize, f64)>,
    saturable: bool,
    /// Averaged error of the product of per-factor optimal measurements.
    product_strategy_error: f64,
}

pub fn multiparam(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    if cfg.parameters.is_empty() {
        return Err(Error::Validation(
            "multiparam needs a non-empty `parameters` list".into(),
        ));
    }
    let mut families = Vec::new();
    let mut poms = Vec::new();
    let mut theta_u = Vec::new();
    for par in &cfg.parameters {
        let g = par.grid.build()?;
        let h = hamiltonian_from(&par.hamiltonian, cfg.kb)?;
        let fam = thermal_state_family(&h, &g)?;
        let m = operator_moments(&jeffreys_prior(&g), &fam, par.theta_u)?;
        poms.push(optimal_strategy_with(&m, &cfg.tolerances)?.pom());
        families.push(fam);
        theta_u.push(par.theta_u);
    }
    let grids: Vec<_> = families.iter().map(|f| f.grid().clone()).collect();
    let prior = MultiPrior::jeffreys_product(&grids)?;
    let state = ProductState::tensor(&families)?;
    let ms = multi_moments(&prior, &state, &theta_u)?;
    let rep = multi_bound(&ms, &prior)?;
    let pom = product_pom(&poms)?;
    let ests = multi_bayes_estimators(&prior, &state, &pom)?;
    let product_strategy_error = evaluate_multi_mle(&prior, &state, &pom, &ests)?;
    let f = out.join("multibound.json");
    write_json(
        &f,
        &MultiOut {
            config: cfg,
            per_parameter: rep.per_parameter,
            bound: rep.bound,
            commutator_norms: rep.commutator_norms,
            saturable: rep.saturable,
            product_strategy_error,
        },
    )?;
    Ok(vec![f])
}
