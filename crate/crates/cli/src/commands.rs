//! Argument definitions and one handler per subcommand.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use safety_evidence::correlation::{
    correlation_ci, correlation_evidence_sample_size, QuantileConvention,
};
use safety_evidence::indicator::{correlation_report, model_accuracies, IndicatorMatrix};
use safety_evidence::kofn::{empirical_k_of_n, empirical_k_of_n_all, theoretical_k_of_n, KofNSpec};
use safety_evidence::planner::{
    binomial_test, frame_requirement, zero_failure_sample_size, CostMode,
};
use safety_evidence::redundancy::{
    pair_failure_probability, pair_failure_probability_approx, subsystem_sample_size,
    triple_failure_probability_approx, uncorrected_reduction_factor, PairJointTable,
};
use safety_evidence::rng::blocks;
use safety_evidence::simulator::{ensemble_block, pair_block, CommonShockSpec};
use safety_evidence::softmax::{committee_predict, entropy_binned_correlation};
use safety_evidence::trainer::{
    run_cell, train_ensemble, LearningRateSchedule, SweepReport, SyntheticDataset, SyntheticSpec,
    TrainingConfig, ViewSpec, DEFAULT_GRID,
};

use crate::config::{assumptions_from_map, read_campaign_config};
use crate::error::{CliError, CliResult};
use crate::formats::{read_indicators, read_softmax, write_indicators, write_softmax};
use crate::output::{to_value, Format};
use crate::parallel::parallel_map;

#[derive(Debug, Parser)]
#[command(
    name = "evidence",
    version,
    about = "Test-data budgets and error-correlation evidence for redundant perception systems"
)]
pub struct Cli {
    /// Report format on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Use the rounded labeling costs of the published campaign table and
    /// the one-sided normal quantile for correlation evidence.
    #[arg(long, global = true)]
    pub paper_mode: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Frames and labeling cost of a perception test campaign.
    Plan(PlanArgs),
    /// Exact binomial test and zero-failure sample size.
    Test(TestArgs),
    /// Test budget of n redundant subsystems and correlated failure probabilities.
    Redundancy(RedundancyArgs),
    /// Fisher-z confidence interval of a correlation estimate.
    CorrCi(CorrCiArgs),
    /// Pairs needed to bound a correlation to within sqrt(p_tol).
    CorrEvidence(CorrEvidenceArgs),
    /// k-out-of-n reliability, from the binomial formula or an indicator file.
    Kofn(KofnArgs),
    /// Error correlation report of an indicator or softmax file.
    Analyze(AnalyzeArgs),
    /// Sample correlated failure indicators.
    Simulate(SimulateArgs),
    /// Train a decorrelated ensemble on the synthetic task.
    Train(TrainArgs),
    /// Train every (lambda, repetition) cell of a grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// File of `key = value` campaign assumptions.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, alias = "meters_per_fatality", allow_negative_numbers = true)]
    pub meters_per_fatality: Option<f64>,
    #[arg(long, alias = "meters_per_frame", allow_negative_numbers = true)]
    pub meters_per_frame: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, alias = "robot_safety_factor", allow_negative_numbers = true)]
    pub robot_safety_factor: Option<f64>,
    #[arg(
        long,
        alias = "perception_risk_fraction",
        allow_negative_numbers = true
    )]
    pub perception_risk_fraction: Option<f64>,
    #[arg(long, alias = "minutes_per_frame_label", allow_negative_numbers = true)]
    pub minutes_per_frame_label: Option<f64>,
    #[arg(long, alias = "hourly_wage", allow_negative_numbers = true)]
    pub hourly_wage: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub p_tol: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Number of test samples; without it only the sample size is reported.
    #[arg(long)]
    pub n: Option<u64>,
    /// Observed failures among the `--n` samples.
    #[arg(long, default_value_t = 0)]
    pub k: u64,
}

#[derive(Debug, Args)]
pub struct RedundancyArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub p_tol: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Number of redundant subsystems.
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    /// Per-subsystem failure probability for the correlated forms.
    #[arg(long, allow_negative_numbers = true)]
    pub p_sub: Option<f64>,
    /// Correlation of the first two subsystems' failures.
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Correlation of the pair failure with the third subsystem.
    #[arg(long, allow_negative_numbers = true)]
    pub rho_triple: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CorrCiArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,
    /// Number of paired observations behind the estimate.
    #[arg(long)]
    pub samples: u64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct CorrEvidenceArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub p_tol: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Use z_{1-alpha} instead of z_{1-alpha/2}.
    #[arg(long)]
    pub one_sided: bool,
}

#[derive(Debug, Args)]
pub struct KofnArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub p_sub: Option<f64>,
    #[arg(long)]
    pub n: Option<u32>,
    /// Required working subsystems; all k when omitted.
    #[arg(long)]
    pub k: Option<u32>,
    /// Indicator CSV for empirical reliability.
    #[arg(long)]
    pub indicators: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["indicators", "softmax"])))]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub indicators: Option<PathBuf>,
    #[arg(long)]
    pub softmax: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Entropy bins for the conditional correlation (softmax input only).
    #[arg(long)]
    pub bins: Option<usize>,
    /// Model pair for the entropy bins, as `i,j`.
    #[arg(long, default_value = "0,1")]
    pub pair: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Marginal failure probability of every member (first member of a pair).
    #[arg(long, allow_negative_numbers = true)]
    pub p_sub: f64,
    /// Second marginal; switches to the exact two-member table.
    #[arg(long, allow_negative_numbers = true)]
    pub p2: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    /// Ensemble size of the common-shock model.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Write the sampled indicator CSV here.
    #[arg(long)]
    pub indicators: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    /// Every member sees the raw input.
    Identity,
    /// Every member sees the same rotated, truncated input.
    Shared,
    /// Each member sees its own rotated, truncated input.
    Distinct,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Ensemble size.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-4, allow_negative_numbers = true)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    pub lr_decayed: f64,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Size of the synthetic dataset.
    #[arg(long, default_value_t = 4000)]
    pub samples: usize,
    #[arg(long, default_value_t = 8)]
    pub input_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub center_scale: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub noise: f64,
    #[arg(long, default_value_t = 2024)]
    pub data_seed: u64,
    #[arg(long, value_enum, default_value_t = ViewMode::Identity)]
    pub views: ViewMode,
    /// Coordinates kept after rotation; defaults to all.
    #[arg(long)]
    pub observed_dims: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Write the held-out indicator CSV here.
    #[arg(long)]
    pub indicators: Option<PathBuf>,
    /// Write the held-out softmax CSV here.
    #[arg(long)]
    pub softmax: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRID, allow_hyphen_values = true)]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
    /// Write the per-cell sweep CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn execute(cli: &Cli) -> CliResult<Value> {
    match &cli.command {
        Command::Plan(a) => plan(a, cli.paper_mode),
        Command::Test(a) => test(a),
        Command::Redundancy(a) => redundancy(a),
        Command::CorrCi(a) => Ok(to_value(&correlation_ci(a.rho, a.samples, a.alpha)?)?),
        Command::CorrEvidence(a) => corr_evidence(a, cli.paper_mode),
        Command::Kofn(a) => kofn(a),
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn plan(a: &PlanArgs, paper_mode: bool) -> CliResult<Value> {
    let mut values = match &a.config {
        Some(path) => read_campaign_config(path)?,
        None => BTreeMap::new(),
    };
    let overrides = [
        ("meters_per_fatality", a.meters_per_fatality),
        ("meters_per_frame", a.meters_per_frame),
        ("alpha", a.alpha),
        ("robot_safety_factor", a.robot_safety_factor),
        ("perception_risk_fraction", a.perception_risk_fraction),
        ("minutes_per_frame_label", a.minutes_per_frame_label),
        ("hourly_wage", a.hourly_wage),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            values.insert(key.to_string(), v);
        }
    }
    let assumptions = assumptions_from_map(&values)?;
    let mode = if paper_mode {
        CostMode::Published
    } else {
        CostMode::Exact
    };
    let report = frame_requirement(&assumptions, mode)?;
    Ok(json!({ "assumptions": assumptions, "requirement": report }))
}

fn test(a: &TestArgs) -> CliResult<Value> {
    let required = zero_failure_sample_size(a.p_tol, a.alpha)?;
    let decision = match a.n {
        Some(n) => Some(binomial_test(n, a.k, a.p_tol, a.alpha)?),
        None => None,
    };
    Ok(json!({ "zero_failure_sample_size": required, "decision": decision }))
}

fn redundancy(a: &RedundancyArgs) -> CliResult<Value> {
    let plan = subsystem_sample_size(a.p_tol, a.alpha, a.n)?;
    let mut out = json!({
        "plan": plan,
        "uncorrected_reduction_factor": uncorrected_reduction_factor(a.p_tol, a.n)?,
        "single_system_samples": zero_failure_sample_size(a.p_tol, a.alpha)?,
    });
    match (a.p_sub, a.rho) {
        (Some(p), Some(rho)) => {
            let table = PairJointTable::new(p, p, rho)?;
            out["pair"] = json!({
                "p_sub": p,
                "rho": rho,
                "failure_probability": pair_failure_probability(p, p, rho)?,
                "failure_probability_approx": pair_failure_probability_approx(p, rho),
                "joint_table": table.cells(),
            });
            if let Some(r3) = a.rho_triple {
                if !(0.0..=1.0).contains(&r3) || rho < 0.0 {
                    return Err(safety_evidence::Error::Domain {
                        name: "rho_triple",
                        value: r3,
                        expected: "correlations in [0, 1] for the triple approximation",
                    }
                    .into());
                }
                out["triple"] = to_value(&triple_failure_probability_approx(p, rho, r3))?;
            }
        }
        (None, None) if a.rho_triple.is_none() => {}
        _ => {
            return Err(CliError::Usage(
                "--rho and --rho-triple need --p-sub (and --rho-triple needs --rho)".into(),
            ))
        }
    }
    Ok(out)
}

fn corr_evidence(a: &CorrEvidenceArgs, paper_mode: bool) -> CliResult<Value> {
    let convention = if a.one_sided || paper_mode {
        QuantileConvention::OneSided
    } else {
        QuantileConvention::TwoSided
    };
    let z = convention.quantile(a.alpha)?;
    let n = correlation_evidence_sample_size(a.p_tol, a.alpha, convention)?;
    Ok(json!({
        "convention": convention,
        "p_tol": a.p_tol,
        "alpha": a.alpha,
        "z": z,
        "z_squared": z * z,
        "n_pairs": n,
    }))
}

fn k_range(n: u32, k: Option<u32>) -> Vec<u32> {
    match k {
        Some(k) => vec![k],
        None => (1..=n).collect(),
    }
}

fn kofn(a: &KofnArgs) -> CliResult<Value> {
    let mut out = json!({});
    if let Some(p) = a.p_sub {
        let n =
            a.n.ok_or_else(|| CliError::Usage("--p-sub needs --n".into()))?;
        let mut rows = Vec::new();
        for k in k_range(n, a.k) {
            let spec = KofNSpec { n, k, p_sub: p };
            rows.push(json!({ "k": k, "reliability": spec.reliability()? }));
        }
        out["theoretical"] = json!({ "p_sub": p, "n": n, "rows": rows });
    }
    if let Some(path) = &a.indicators {
        let m = read_indicators(path)?;
        let n = m.n_models() as u32;
        if a.n.is_some_and(|given| given != n) {
            return Err(CliError::Usage(format!(
                "--n {} disagrees with the {n} models in {}",
                a.n.unwrap(),
                path.display()
            )));
        }
        let mut rows = Vec::new();
        for k in k_range(n, a.k) {
            rows.push(json!({ "k": k, "reliability": empirical_k_of_n(&m, k as usize)? }));
        }
        out["empirical"] = json!({ "n": n, "n_samples": m.n_samples(), "rows": rows });
    }
    if a.p_sub.is_none() && a.indicators.is_none() {
        return Err(CliError::Usage(
            "kofn needs --p-sub with --n, or --indicators".into(),
        ));
    }
    Ok(out)
}

fn parse_pair(text: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("--pair expects `i,j`, got `{text}`"));
    let (i, j) = text.split_once(',').ok_or_else(bad)?;
    Ok((
        i.trim().parse().map_err(|_| bad())?,
        j.trim().parse().map_err(|_| bad())?,
    ))
}

fn indicator_summary(m: &IndicatorMatrix, alpha: f64) -> CliResult<Value> {
    Ok(json!({
        "report": correlation_report(m, alpha)?,
        "model_accuracies": model_accuracies(m),
        "k_of_n": empirical_k_of_n_all(m),
    }))
}

fn analyze(a: &AnalyzeArgs) -> CliResult<Value> {
    if let Some(path) = &a.indicators {
        if a.bins.is_some() {
            return Err(CliError::Usage("--bins needs --softmax input".into()));
        }
        return indicator_summary(&read_indicators(path)?, a.alpha);
    }
    let path = a.softmax.as_ref().expect("clap requires one input");
    let tensor = read_softmax(path)?;
    let mut out = indicator_summary(&tensor.indicators(), a.alpha)?;
    let members: Vec<usize> = (0..tensor.n_models()).collect();
    out["committee_accuracy"] = json!(committee_predict(&tensor, &members)?.accuracy());
    if let Some(bins) = a.bins {
        let (i, j) = parse_pair(&a.pair)?;
        out["entropy_bins"] = json!({
            "pair": [i, j],
            "bins": entropy_binned_correlation(&tensor, i, j, bins)?,
        });
    }
    Ok(out)
}

fn check_jobs(jobs: usize) -> CliResult<usize> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    Ok(jobs)
}

fn simulate(a: &SimulateArgs) -> CliResult<Value> {
    let jobs = check_jobs(a.jobs)?;
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let block_list: Vec<(u64, usize)> = blocks(a.samples).collect();
    let (matrix, model) = match a.p2 {
        Some(p2) => {
            let table = PairJointTable::new(a.p_sub, p2, a.rho)?;
            let parts = parallel_map(block_list.len(), jobs, |i| {
                let (b, rows) = block_list[i];
                pair_block(&table, a.seed, b, rows)
            });
            let m = IndicatorMatrix::from_rows(parts.concat(), 2)?;
            let model = json!({
                "kind": "pair",
                "p1": a.p_sub,
                "p2": p2,
                "rho": a.rho,
                "joint_table": table.cells(),
            });
            (m, model)
        }
        None => {
            let spec = CommonShockSpec::new(a.p_sub, a.rho, a.n)?;
            let parts = parallel_map(block_list.len(), jobs, |i| {
                let (b, rows) = block_list[i];
                ensemble_block(&spec, a.seed, b, rows)
            });
            let m = IndicatorMatrix::from_rows(parts.concat(), a.n)?;
            // every member fails under the shock, so at most n − k failures
            // requires the independent branch
            let model_kofn: Vec<Option<f64>> = (1..=a.n as u32)
                .map(|k| {
                    theoretical_k_of_n(spec.q, a.n as u32, k)
                        .ok()
                        .map(|r| (1.0 - spec.theta) * r)
                })
                .collect();
            let model = json!({
                "kind": "common_shock",
                "spec": spec,
                "all_fail_probability": spec.joint_failure_probability(a.n),
                "k_of_n": model_kofn,
            });
            (m, model)
        }
    };
    let all_fail = matrix.rows().filter(|r| r.iter().all(|&v| v == 1)).count() as f64
        / matrix.n_samples() as f64;
    let failure_rates: Vec<f64> = model_accuracies(&matrix)
        .iter()
        .map(|acc| 1.0 - acc)
        .collect();
    let rho = match safety_evidence::indicator::mean_pairwise_correlation(&matrix) {
        Ok(r) => Some(r),
        Err(safety_evidence::Error::DegenerateVariance { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &a.indicators {
        write_indicators(&matrix, path)?;
    }
    Ok(json!({
        "n_samples": a.samples,
        "seed": a.seed,
        "model": model,
        "empirical": {
            "failure_rates": failure_rates,
            "mean_rho": rho,
            "all_fail_rate": all_fail,
            "k_of_n": empirical_k_of_n_all(&matrix),
        },
    }))
}

fn dataset(e: &EnsembleArgs) -> CliResult<SyntheticDataset> {
    Ok(SyntheticDataset::generate(&SyntheticSpec {
        n_samples: e.samples,
        input_dim: e.input_dim,
        n_classes: e.classes,
        center_scale: e.center_scale,
        noise: e.noise,
        seed: e.data_seed,
    })?)
}

fn views(e: &EnsembleArgs) -> CliResult<Vec<ViewSpec>> {
    let observed = e.observed_dims.unwrap_or(e.input_dim);
    Ok(match e.views {
        ViewMode::Identity if observed == e.input_dim => Vec::new(),
        ViewMode::Identity => {
            return Err(CliError::Usage(
                "--observed-dims needs --views shared or distinct".into(),
            ));
        }
        ViewMode::Shared => ViewSpec::shared(e.input_dim, observed, e.n, e.seed)?,
        ViewMode::Distinct => ViewSpec::distinct(e.input_dim, observed, e.n, e.seed)?,
    })
}

fn template(e: &EnsembleArgs, lambda: f64) -> TrainingConfig {
    TrainingConfig {
        n_members: e.n,
        hidden_dim: e.hidden,
        lambda,
        batch_size: e.batch,
        schedule: LearningRateSchedule {
            initial: e.lr,
            decayed: e.lr_decayed,
            patience: e.patience,
            ..LearningRateSchedule::default()
        },
        weight_decay: e.weight_decay,
        max_epochs: e.epochs,
        seed: e.seed,
        validation_fraction: e.validation_fraction,
        train_fraction: e.train_fraction,
    }
}

fn train(a: &TrainArgs) -> CliResult<Value> {
    check_jobs(a.ensemble.jobs)?;
    let data = dataset(&a.ensemble)?;
    let views = views(&a.ensemble)?;
    let config = template(&a.ensemble, a.lambda);
    let run = train_ensemble(&config, &data, &views)?;
    if let Some(path) = &a.indicators {
        write_indicators(&run.validation_softmax.indicators(), path)?;
    }
    if let Some(path) = &a.softmax {
        write_softmax(&run.validation_softmax, path)?;
    }
    Ok(json!({
        "config": config,
        "views": a.ensemble.views,
        "stop_reason": run.stop_reason,
        "epochs": run.history.len(),
        "final": run.final_metrics(),
        "history": run.history,
    }))
}

fn sweep_csv(report: &SweepReport) -> String {
    let n_k = report
        .cells
        .iter()
        .find_map(|c| c.summary.as_ref().map(|s| s.k_of_n.len()))
        .unwrap_or(0);
    let mut out = String::from("lambda,repetition,mean_rho,avg_acc,joint_acc");
    for k in 1..=n_k {
        out.push_str(&format!(",k{k}"));
    }
    out.push('\n');
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for c in &report.cells {
        let s = c.summary.as_ref();
        out.push_str(&format!(
            "{},{},{},{},{}",
            c.lambda,
            c.repetition,
            opt(s.and_then(|s| s.mean_rho)),
            opt(s.map(|s| s.avg_accuracy)),
            opt(s.map(|s| s.joint_accuracy)),
        ));
        for k in 0..n_k {
            out.push(',');
            out.push_str(&opt(s.and_then(|s| s.k_of_n.get(k).copied())));
        }
        out.push('\n');
    }
    out
}

fn sweep(a: &SweepArgs) -> CliResult<Value> {
    let jobs = check_jobs(a.ensemble.jobs)?;
    if a.grid.is_empty() || a.reps == 0 {
        return Err(CliError::Usage(
            "a sweep needs a nonempty --grid and --reps of at least 1".into(),
        ));
    }
    if let Some(&bad) = a.grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(safety_evidence::Error::Domain {
            name: "lambda",
            value: bad,
            expected: "a finite value >= 0",
        }
        .into());
    }
    let data = dataset(&a.ensemble)?;
    let views = views(&a.ensemble)?;
    let base = template(&a.ensemble, 0.0);
    base.validate()?;
    let reps = a.reps;
    let cells = parallel_map(a.grid.len() * reps, jobs, |i| {
        run_cell(&base, &data, &views, a.grid[i / reps], i % reps)
    });
    let report = SweepReport::from_cells(&a.grid, reps, cells)?;
    if let Some(path) = &a.csv {
        std::fs::write(path, sweep_csv(&report)).map_err(|e| CliError::io(path, e))?;
    }
    to_value(&report)
}
