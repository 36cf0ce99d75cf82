use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use clap::Parser;
use serde::Serialize;
use serde_json::json;

use ctbn_core::causality::{build_report, build_report_empirical, empirical_causality, REPORT_CSV_HEADER};
use ctbn_core::estimate::{collect_stats, mle_generator, ConditionalStats, SufficientStats};
use ctbn_core::generators::stationary_distribution;
use ctbn_core::simulate::{project, replication_rng, sample_batch, sample_with_rng, JumpTable};
use ctbn_core::tickdata::{parse_quotes, sample_skellam, tick_causality, SkellamSpec, TICK_CSV_HEADER};
use ctbn_core::{
    CausalityReport, CtbnModel, Direction, Error, Generator, GeneratorDocument, ModelDocument, ModulatedParams,
    ProbabilityVector, Result, SimConfig, Trajectory,
};

use crate::heatmap;
use crate::output::{OutputDir, RunManifest};
use crate::{CausalityArgs, Cli, Command, EstimateArgs, SimulateArgs, SkellamArgs, StudyArgs, TickArgs};

pub fn run(cli: Cli, arguments: Vec<String>) -> Result<()> {
    let out = cli.out;
    match cli.command {
        Command::Simulate(a) => simulate(&out, a, arguments),
        Command::Estimate(a) => estimate(&out, a, arguments),
        Command::Causality(a) => causality(&out, a, arguments),
        Command::ModulatedStudy(a) => modulated_study(&out, a, arguments),
        Command::Tick(a) => tick(&out, a, arguments),
        Command::Skellam(a) => skellam(&out, a, arguments),
        Command::Replay(a) => {
            let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(&a.manifest)?)?;
            let mut argv = vec!["ctbn".to_string()];
            argv.extend(manifest.arguments.iter().cloned());
            argv.push("--out".into());
            argv.push(out.display().to_string());
            let replayed = Cli::try_parse_from(&argv)
                .map_err(|e| Error::InvalidConfig(format!("manifest arguments do not parse: {e}")))?;
            if matches!(replayed.command, Command::Replay(_)) {
                return Err(Error::InvalidConfig("a manifest cannot replay another replay".into()));
            }
            run(replayed, manifest.arguments)
        }
    }
}

fn load_model(path: &Path) -> Result<CtbnModel> {
    let doc: ModelDocument = serde_json::from_str(&fs::read_to_string(path)?)?;
    CtbnModel::from_document(&doc)
}

fn parse_p0(text: &str, q: &Generator) -> Result<ProbabilityVector> {
    if text.trim().eq_ignore_ascii_case("stationary") {
        return stationary_distribution(q);
    }
    let values =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|_| {
            Error::InvalidConfig(format!("--p0 must be 'stationary' or comma-separated numbers, got '{text}'"))
        })?;
    if values.len() != q.dim() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: values.len() });
    }
    ProbabilityVector::new(values)
}

fn read_trajectories(paths: &[std::path::PathBuf]) -> Result<Vec<Trajectory>> {
    paths.iter().map(|p| Trajectory::read_tsv(BufReader::new(File::open(p)?))).collect()
}

fn require<T>(value: Option<T>, flag: &str, context: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidConfig(format!("{flag} is required with {context}")))
}

fn simulate(out: &Path, a: SimulateArgs, arguments: Vec<String>) -> Result<()> {
    let model = load_model(&a.model)?;
    let p0 = parse_p0(&a.p0, model.joint())?;
    let config = SimConfig::new(a.seed, a.replications, a.horizon)?;
    let paths = sample_batch(model.joint(), &p0, &config)?;
    let mut dir = OutputDir::create(out)?;
    let width = a.replications.saturating_sub(1).to_string().len().max(5);
    for (r, t) in paths.iter().enumerate() {
        dir.write(&format!("traj_{r:0width$}.tsv"), t.to_tsv().as_bytes())?;
    }
    println!("wrote {} trajectories over {} states to {}", paths.len(), model.joint().dim(), out.display());
    let params = json!({
        "model": a.model, "p0": p0.as_slice(), "horizon": a.horizon, "replications": a.replications,
        "nx": model.nx(), "ny": model.ny(),
    });
    dir.finish("simulate", arguments, params, Some(a.seed))?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput {
    nx: usize,
    ny: usize,
    trajectories: usize,
    joint_stats: SufficientStats,
    conditional_stats: ConditionalStats,
    joint: GeneratorDocument,
    x_given_y: Vec<GeneratorDocument>,
    y_given_x: Vec<GeneratorDocument>,
    x_marginal: GeneratorDocument,
    y_marginal: GeneratorDocument,
}

fn estimate(out: &Path, a: EstimateArgs, arguments: Vec<String>) -> Result<()> {
    let trajs = read_trajectories(&a.trajectories)?;
    let joint_stats = collect_stats(&trajs)?;
    if joint_stats.n != a.nx * a.ny {
        return Err(Error::DimensionMismatch { expected: a.nx * a.ny, found: joint_stats.n });
    }
    let mut cond = ConditionalStats::empty(a.nx, a.ny);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for t in &trajs {
        cond.add(t)?;
        let (x, y) = project(t, a.nx)?;
        xs.push(x);
        ys.push(y);
    }
    let doc = |s: &SufficientStats| mle_generator::<f64>(s).to_document();
    let result = EstimateOutput {
        nx: a.nx,
        ny: a.ny,
        trajectories: trajs.len(),
        joint: doc(&joint_stats),
        x_given_y: cond.x_given_y.iter().map(doc).collect(),
        y_given_x: cond.y_given_x.iter().map(doc).collect(),
        x_marginal: doc(&collect_stats(&xs)?),
        y_marginal: doc(&collect_stats(&ys)?),
        joint_stats,
        conditional_stats: cond,
    };
    let mut dir = OutputDir::create(out)?;
    dir.write("estimate.json", serde_json::to_string_pretty(&result)?.as_bytes())?;
    dir.write("joint_mle.csv", mle_generator::<f64>(&result.joint_stats).to_csv().as_bytes())?;
    println!(
        "estimated from {} trajectories, {} transitions, total time {}",
        result.trajectories,
        result.joint_stats.total_transitions(),
        result.joint_stats.horizon_total
    );
    let params = json!({ "trajectories": a.trajectories, "nx": a.nx, "ny": a.ny });
    dir.finish("estimate", arguments, params, None)?;
    Ok(())
}

fn write_reports(dir: &mut OutputDir, reports: &[CausalityReport]) -> Result<()> {
    if let [single] = reports {
        dir.write("report.json", serde_json::to_string_pretty(single)?.as_bytes())?;
    } else {
        dir.write("report.json", serde_json::to_string_pretty(reports)?.as_bytes())?;
    }
    let mut csv = String::from(REPORT_CSV_HEADER);
    csv.push('\n');
    for r in reports {
        csv.push_str(&r.to_csv_row());
        csv.push('\n');
    }
    dir.write("report.csv", csv.as_bytes())?;
    Ok(())
}

fn causality(out: &Path, a: CausalityArgs, arguments: Vec<String>) -> Result<()> {
    let mut joint = None;
    let (reports, params) = if let Some(model_path) = &a.model {
        let model = load_model(model_path)?;
        let horizon = require(a.horizon, "--horizon", "--model")?;
        let p0 = parse_p0(&a.p0, model.joint())?;
        let report = build_report(&model, &p0, horizon)?;
        joint = Some(model.joint().clone());
        (vec![report], json!({ "model": model_path, "p0": p0.as_slice(), "horizon": horizon }))
    } else {
        let nx = require(a.nx, "--nx", "--trajectories")?;
        let ny = require(a.ny, "--ny", "--trajectories")?;
        let trajs = read_trajectories(&a.trajectories)?;
        let reports = trajs.iter().map(|t| build_report_empirical(t, nx, ny)).collect::<Result<Vec<_>>>()?;
        (reports, json!({ "trajectories": a.trajectories, "nx": nx, "ny": ny }))
    };
    for r in &reports {
        print!("{}", r.to_table());
    }
    let mut dir = OutputDir::create(out)?;
    write_reports(&mut dir, &reports)?;
    if let Some(q) = joint {
        dir.write("joint.csv", q.to_csv().as_bytes())?;
        dir.write("joint.svg", heatmap::render(&q, "joint generator").as_bytes())?;
    }
    dir.finish("causality", arguments, params, None)?;
    Ok(())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn histogram_csv(values: &[f64], lower: f64, upper: f64, bins: usize) -> String {
    let width = if upper > lower { (upper - lower) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lower) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut csv = String::from("bin_lower,bin_upper,count\n");
    for (b, c) in counts.iter().enumerate() {
        csv.push_str(&format!("{},{},{}\n", lower + b as f64 * width, lower + (b + 1) as f64 * width, c));
    }
    csv
}

#[derive(Serialize)]
struct Summary {
    model_average: f64,
    mean: f64,
    q05: f64,
    q50: f64,
    q95: f64,
    min: f64,
    max: f64,
}

fn summarize(values: &[f64], model_average: f64) -> Summary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Summary {
        model_average,
        mean: values.iter().sum::<f64>() / values.len() as f64,
        q05: quantile(&sorted, 0.05),
        q50: quantile(&sorted, 0.5),
        q95: quantile(&sorted, 0.95),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    }
}

fn modulated_study(out: &Path, a: StudyArgs, arguments: Vec<String>) -> Result<()> {
    if a.replications == 0 || a.bins == 0 {
        return Err(Error::InvalidConfig("replications and bins must be at least 1".into()));
    }
    let model = CtbnModel::modulated(&ModulatedParams {
        lambda: [a.lambda1, a.lambda2],
        mu: [a.mu1, a.mu2],
        beta: [a.beta, a.beta],
        gamma: [a.gamma, a.gamma],
    })?;
    let p0 = stationary_distribution(model.joint())?;
    let config = SimConfig::new(a.seed, a.replications, a.horizon)?;
    let exact = build_report(&model, &p0, a.horizon)?;
    let table = JumpTable::new(model.joint());
    let mut xy = Vec::with_capacity(a.replications);
    let mut yx = Vec::with_capacity(a.replications);
    let mut rows = String::from("replication,avg_x_from_y,avg_y_from_x\n");
    for r in 0..config.replications {
        let w = sample_with_rng(&table, &p0, config.horizon, &mut replication_rng(config.seed, r as u64))?;
        let cxy = empirical_causality(&w, 2, 2, Direction::XFromY)? / a.horizon;
        let cyx = empirical_causality(&w, 2, 2, Direction::YFromX)? / a.horizon;
        rows.push_str(&format!("{r},{cxy},{cyx}\n"));
        xy.push(cxy);
        yx.push(cyx);
    }
    let upper = xy.iter().chain(&yx).fold(0.0_f64, |m, &v| m.max(v));
    let summary = json!({
        "x_from_y": summarize(&xy, exact.avg_x_from_y),
        "y_from_x": summarize(&yx, exact.avg_y_from_x),
        "horizon": a.horizon,
        "replications": a.replications,
    });
    let mut dir = OutputDir::create(out)?;
    dir.write("study.csv", rows.as_bytes())?;
    dir.write("histogram_x_from_y.csv", histogram_csv(&xy, 0.0, upper, a.bins).as_bytes())?;
    dir.write("histogram_y_from_x.csv", histogram_csv(&yx, 0.0, upper, a.bins).as_bytes())?;
    dir.write("summary.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    println!("{:<6}{:>14}{:>14}{:>14}{:>14}", "dir", "model", "mean", "q05", "q95");
    for (label, key) in [("X<-Y", "x_from_y"), ("Y<-X", "y_from_x")] {
        let s = &summary[key];
        println!(
            "{label:<6}{:>14.6e}{:>14.6e}{:>14.6e}{:>14.6e}",
            s["model_average"].as_f64().unwrap_or(f64::NAN),
            s["mean"].as_f64().unwrap_or(f64::NAN),
            s["q05"].as_f64().unwrap_or(f64::NAN),
            s["q95"].as_f64().unwrap_or(f64::NAN)
        );
    }
    let params = json!({
        "lambda": [a.lambda1, a.lambda2], "mu": [a.mu1, a.mu2], "beta": a.beta, "gamma": a.gamma,
        "horizon": a.horizon, "replications": a.replications, "bins": a.bins,
    });
    dir.finish("modulated-study", arguments, params, Some(a.seed))?;
    Ok(())
}

fn tick(out: &Path, a: TickArgs, arguments: Vec<String>) -> Result<()> {
    let quotes = parse_quotes(BufReader::new(File::open(&a.quotes)?), a.tick_size)?;
    let results = tick_causality(&quotes, &a.caps)?;
    let mut dir = OutputDir::create(out)?;
    let mut csv = String::from(TICK_CSV_HEADER);
    csv.push('\n');
    for r in &results {
        let cap = r.summary.cap;
        csv.push_str(&r.summary.to_csv_row());
        csv.push('\n');
        dir.write(&format!("qw_cap{cap}.csv"), r.joint.to_csv().as_bytes())?;
        let title = format!("estimated joint generator, cap {cap}");
        dir.write(&format!("qw_cap{cap}.svg"), heatmap::render(&r.joint, &title).as_bytes())?;
    }
    let summaries: Vec<_> = results.iter().map(|r| &r.summary).collect();
    dir.write("tick_reports.json", serde_json::to_string_pretty(&summaries)?.as_bytes())?;
    dir.write("tick_summary.csv", csv.as_bytes())?;
    print!("{csv}");
    let params = json!({ "quotes": a.quotes, "tick_size": a.tick_size, "caps": a.caps });
    dir.finish("tick", arguments, params, None)?;
    Ok(())
}

fn skellam(out: &Path, a: SkellamArgs, arguments: Vec<String>) -> Result<()> {
    let mut synth = SkellamSpec::unit(a.rate_up, a.rate_down, a.horizon, a.tick_size);
    synth.size_decay = a.size_decay;
    synth.start_ticks = (1.0 / a.tick_size).round().max(1.0) as i64 * 100;
    let quotes = sample_skellam(&synth, a.seed)?;
    let mut dir = OutputDir::create(out)?;
    dir.write("quotes.csv", quotes.to_csv().as_bytes())?;
    println!("wrote {} quotes", quotes.quotes().len());
    let params = json!({
        "rate_up": a.rate_up, "rate_down": a.rate_down, "horizon": a.horizon,
        "tick_size": a.tick_size, "size_decay": a.size_decay,
    });
    dir.finish("skellam", arguments, params, Some(a.seed))?;
    Ok(())
}
