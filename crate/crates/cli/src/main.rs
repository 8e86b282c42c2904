//! Command-line front door: run testing campaigns, compare techniques
//! statistically, export route data, and render figures.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use drivelab_core::agents::{Frame, KeyPrecision};
use drivelab_core::campaign::output::{load_campaign, write_campaign, StoredCampaign};
use drivelab_core::campaign::{run_campaign, CampaignConfig, CampaignMode, Technique};
use drivelab_core::microworld::{Route, RouteId};
use drivelab_core::monitors::DetectionMode;
use drivelab_core::render::{growth_svg, timeline_svg, trajectories_svg, BandSeries, GrowthSeries};
use drivelab_core::stats::{auc_normalized, dunn, friedman, summarize, ResultMatrix};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "drivelab", version, about = "RL-based online testing of a scripted driving stack in a 2D microworld")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a testing campaign and write its result directory.
    Run(RunArgs),
    /// Compare campaign results with Friedman + Dunn statistics.
    Compare(CompareArgs),
    /// Render SVG figures from campaign results.
    Render(RenderArgs),
    /// Inspect or export route definitions.
    Route(RouteArgs),
    /// Run built-in correctness checks (gradients, statistics, geometry).
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file with keys mirroring the campaign config; explicit
    /// flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["random", "q", "morlot", "dqn"])]
    technique: Option<String>,
    #[arg(long, value_parser = ["straight", "left_turn", "right_turn"])]
    route: Option<String>,
    #[arg(long, value_parser = ["replication", "extension"])]
    mode: Option<String>,
    #[arg(long, value_parser = ["sensor", "threshold", "fused"])]
    detection: Option<String>,
    #[arg(long)]
    budget_steps: Option<u64>,
    #[arg(long)]
    episode_timeout: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["absolute", "relative"])]
    frame: Option<String>,
    #[arg(long)]
    action_repeat: Option<u64>,
    /// Decimal places for state keys, or `full` for shortest round-trip.
    #[arg(long)]
    key_decimals: Option<String>,
    /// Worker threads for repetitions (0 = all logical cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Epsilon at the end of the anneal (exploration floor).
    #[arg(long)]
    eps_end: Option<f64>,
    /// Fraction of the budget over which epsilon anneals.
    #[arg(long)]
    anneal_fraction: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Campaign result directories (>= 2) sharing route, mode, repetitions.
    dirs: Vec<PathBuf>,
    #[arg(long, value_parser = ["coverage", "violations", "auc"], default_value = "violations")]
    metric: String,
    /// Write the JSON report here (defaults to stdout only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Campaign result directories.
    dirs: Vec<PathBuf>,
    #[arg(long, value_parser = ["trajectories", "coverage", "growth"])]
    kind: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RouteArgs {
    #[command(subcommand)]
    action: RouteAction,
}

#[derive(Subcommand)]
enum RouteAction {
    /// Print (or write) a built-in route as JSON.
    Dump {
        #[arg(long, value_parser = ["straight", "left_turn", "right_turn"])]
        route: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in routes.
    List,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            // configuration problems exit 2, runtime failures exit 1
            if e.downcast_ref::<drivelab_core::Error>()
                .map(|ce| matches!(ce, drivelab_core::Error::Config(_)))
                .unwrap_or(false)
                || e.to_string().starts_with("config:")
            {
                2
            } else {
                1
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Render(args) => cmd_render(args),
        Command::Route(args) => cmd_route(args),
        Command::Selftest => cmd_selftest(),
    }
}

fn build_config(args: &RunArgs) -> Result<CampaignConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("config: cannot read {}", path.display()))?;
            serde_json::from_str(&text).context("config: invalid campaign config JSON")?
        }
        None => CampaignConfig::default(),
    };
    if let Some(v) = &args.technique {
        cfg.technique = v.parse::<Technique>()?;
    }
    if let Some(v) = &args.route {
        cfg.route = v.parse::<RouteId>()?;
    }
    if let Some(v) = &args.mode {
        cfg.mode = v.parse::<CampaignMode>()?;
    }
    if let Some(v) = &args.detection {
        cfg.detection = Some(v.parse::<DetectionMode>()?);
    }
    if let Some(v) = args.budget_steps {
        cfg.budget_steps = v;
    }
    if let Some(v) = args.episode_timeout {
        cfg.episode_timeout = v;
    }
    if let Some(v) = args.reps {
        cfg.repetitions = v;
    }
    if let Some(v) = args.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = &args.frame {
        cfg.frame = match v.as_str() {
            "absolute" => Frame::Absolute,
            _ => Frame::Relative,
        };
    }
    if let Some(v) = args.action_repeat {
        cfg.action_repeat = v;
    }
    if let Some(v) = &args.key_decimals {
        cfg.key_precision = v.parse::<KeyPrecision>()?;
    }
    if let Some(v) = args.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = args.eps_end {
        cfg.eps_end = v;
    }
    if let Some(v) = args.anneal_fraction {
        cfg.anneal_fraction = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = build_config(&args)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("result").join(cfg.campaign_id()));
    let t0 = Instant::now();
    let result = run_campaign(&cfg)?;
    write_campaign(&result, &out)?;
    let wall = t0.elapsed().as_secs_f64();
    let violations: u64 = result
        .reps
        .iter()
        .map(|r| r.counted_violations(cfg.mode))
        .sum();
    let mean_coverage = result.reps.iter().map(|r| r.final_coverage()).sum::<f64>()
        / result.reps.len() as f64;
    println!(
        "{}: {} repetitions, {} violations, mean coverage {:.3}, {:.1}s -> {}",
        cfg.campaign_id(),
        result.reps.len(),
        violations,
        mean_coverage,
        wall,
        out.display()
    );
    Ok(())
}

fn metric_matrix(campaigns: &[StoredCampaign], metric: &str) -> Result<(ResultMatrix, Vec<f64>)> {
    let reps = campaigns[0].config.repetitions as usize;
    let k = campaigns.len();
    let mut data = vec![0.0; reps * k];
    let mut aucs = vec![0.0; k];
    match metric {
        "coverage" => {
            for (j, c) in campaigns.iter().enumerate() {
                for i in 0..reps {
                    data[i * k + j] = c.coverage_per_repetition[i];
                }
            }
        }
        "violations" => {
            for (j, c) in campaigns.iter().enumerate() {
                for i in 0..reps {
                    data[i * k + j] = c.violations_per_repetition[i] as f64;
                }
            }
        }
        "auc" => {
            // shared normalization: the overall maximum across every series
            fn series_of(c: &StoredCampaign, i: usize) -> &[f64] {
                match c.config.mode {
                    CampaignMode::Replication => &c.coverage_timelines[i],
                    CampaignMode::Extension => &c.violation_timelines[i],
                }
            }
            let v_max = campaigns
                .iter()
                .flat_map(|c| (0..reps).map(move |i| series_of(c, i)))
                .flatten()
                .cloned()
                .fold(0.0f64, f64::max);
            let t_max = campaigns[0].config.budget_steps as f64;
            for (j, c) in campaigns.iter().enumerate() {
                let mut sum = 0.0;
                for i in 0..reps {
                    let a = auc_normalized(series_of(c, i), t_max, v_max);
                    data[i * k + j] = a;
                    sum += a;
                }
                aucs[j] = sum / reps as f64;
            }
        }
        other => bail!("config: unknown metric `{other}`"),
    }
    Ok((ResultMatrix::new(reps, k, data)?, aucs))
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    if args.dirs.len() < 2 {
        bail!("config: compare needs at least two campaign directories");
    }
    let campaigns: Vec<StoredCampaign> = args
        .dirs
        .iter()
        .map(|d| load_campaign(d).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    let first = &campaigns[0].config;
    for c in &campaigns[1..] {
        if c.config.route != first.route
            || c.config.mode != first.mode
            || c.config.repetitions != first.repetitions
        {
            bail!("config: campaigns must share route, mode, and repetition count");
        }
    }
    let labels: Vec<String> = campaigns
        .iter()
        .map(|c| c.config.technique.name().to_string())
        .collect();
    let (matrix, aucs) = metric_matrix(&campaigns, &args.metric)?;
    let friedman_report = friedman(&matrix);
    let dunn_report = dunn(&matrix);

    println!(
        "metric={} | friedman chi2={:.4} df={} p={:.3e}",
        args.metric,
        friedman_report.statistic,
        friedman_report.degrees_of_freedom,
        friedman_report.p_value
    );
    for p in &dunn_report.pairwise {
        let (i, j) = p.pair;
        let marker = match p.direction {
            drivelab_core::stats::Direction::First => format!("{} higher", labels[i]),
            drivelab_core::stats::Direction::Second => format!("{} higher", labels[j]),
            drivelab_core::stats::Direction::Tied => "tied".to_string(),
        };
        println!(
            "  {} vs {}: z={:+.3} p_adj={:.3e} ({marker})",
            labels[i], labels[j], p.z, p.p_adjusted
        );
    }

    let mut summaries = serde_json::Map::new();
    for (j, label) in labels.iter().enumerate() {
        let col: Vec<f64> = (0..matrix.blocks).map(|i| matrix.row(i)[j]).collect();
        let s = summarize(&col)?;
        println!(
            "  {label}: mean={:.3} median={:.3} std={} iqr={:.3}",
            s.mean,
            s.median,
            s.std.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            s.iqr
        );
        summaries.insert(label.clone(), serde_json::to_value(&s)?);
    }

    let report = serde_json::json!({
        "version": drivelab_core::VERSION,
        "metric": args.metric,
        "inputs": args.dirs.iter().map(|d| d.display().to_string()).collect::<Vec<_>>(),
        "techniques": labels,
        "friedman": {
            "statistic": friedman_report.statistic,
            "df": friedman_report.degrees_of_freedom,
            "p": friedman_report.p_value,
            "mean_ranks": friedman_report.mean_ranks,
        },
        "dunn": dunn_report.pairwise.iter().map(|p| serde_json::json!({
            "pair": [labels[p.pair.0], labels[p.pair.1]],
            "z": p.z,
            "p_adjusted": p.p_adjusted,
            "higher_mean_rank": match p.direction {
                drivelab_core::stats::Direction::First => Some(labels[p.pair.0].clone()),
                drivelab_core::stats::Direction::Second => Some(labels[p.pair.1].clone()),
                drivelab_core::stats::Direction::Tied => None,
            },
        })).collect::<Vec<_>>(),
        "summaries": summaries,
        "auc_mean_per_technique": if args.metric == "auc" { Some(&aucs) } else { None },
    });
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(out) = &args.out {
        std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
        println!("report -> {}", out.display());
    } else {
        println!("{text}");
    }
    Ok(())
}

fn mean_sem_series(per_rep: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = per_rep.len();
    let len = per_rep.first().map(|s| s.len()).unwrap_or(0);
    let mut mean = vec![0.0; len];
    let mut sem = vec![0.0; len];
    for k in 0..len {
        let vals: Vec<f64> = per_rep.iter().map(|s| s[k]).collect();
        let m = vals.iter().sum::<f64>() / n as f64;
        mean[k] = m;
        if n >= 2 {
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
            sem[k] = (var / n as f64).sqrt();
        }
    }
    (mean, sem)
}

fn svg_provenance(kind: &str, dirs: &[PathBuf]) -> String {
    format!(
        "<!-- drivelab {} render --kind {kind} {} -->",
        drivelab_core::VERSION,
        dirs.iter()
            .map(|d| d.display().to_string())
            .collect::<Vec<_>>()
            .join(" ")
    )
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    if args.dirs.is_empty() {
        bail!("config: render needs at least one campaign directory");
    }
    let campaigns: Vec<StoredCampaign> = args
        .dirs
        .iter()
        .map(|d| load_campaign(d).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    let svg = match args.kind.as_str() {
        "trajectories" => {
            let c = &campaigns[0];
            let route = Route::builtin(c.config.route);
            if c.trajectories.is_empty() {
                eprintln!("warning: no failure trajectories; rendering the route only");
            }
            let title = format!(
                "{} / {} — {} failure trajectories",
                c.config.technique.name(),
                c.config.route.name(),
                c.trajectories.len()
            );
            trajectories_svg(&route, &c.trajectories, &title)
        }
        "coverage" => {
            let steps = campaigns[0].timeline_steps.clone();
            let replication = campaigns[0].config.mode == CampaignMode::Replication;
            let series: Vec<BandSeries> = campaigns
                .iter()
                .map(|c| {
                    let per_rep = if replication {
                        &c.coverage_timelines
                    } else {
                        &c.violation_timelines
                    };
                    let (mean, sem) = mean_sem_series(per_rep);
                    BandSeries {
                        label: c.config.technique.name().to_string(),
                        mean,
                        band: sem,
                    }
                })
                .collect();
            let y = if replication { "coverage" } else { "violations" };
            timeline_svg(
                &series,
                &steps,
                &format!("{y} over time (± standard error of the mean)"),
                y,
            )
        }
        "growth" => {
            let mut series = Vec::new();
            for c in &campaigns {
                if c.growth.is_empty() {
                    bail!("config: {} has no Q-table growth data", c.config.campaign_id());
                }
                // average distinct-state counts across repetitions
                let len = c.growth.iter().map(|g| g.len()).min().unwrap_or(0);
                let mut points = Vec::with_capacity(len);
                for k in 0..len {
                    let step = c.growth[0][k].0;
                    let mean =
                        c.growth.iter().map(|g| g[k].1).sum::<u64>() / c.growth.len() as u64;
                    points.push((step, mean));
                }
                series.push(GrowthSeries {
                    label: format!("{} {}", c.config.technique.name(), c.config.route.name()),
                    points,
                });
            }
            growth_svg(&series, "distinct table states over steps")
        }
        other => bail!("config: unknown render kind `{other}`"),
    };
    let svg = format!("{}\n{}", svg_provenance(&args.kind, &args.dirs), svg);
    std::fs::write(&args.out, svg).with_context(|| format!("writing {}", args.out.display()))?;
    println!("{} -> {}", args.kind, args.out.display());
    Ok(())
}

fn cmd_route(args: RouteArgs) -> Result<()> {
    match args.action {
        RouteAction::List => {
            for id in RouteId::ALL {
                let r = Route::builtin(id);
                println!(
                    "{:<11} length {:>6.1} m, {} obstacles, lane half-width {} m",
                    id.name(),
                    r.spec.route_length,
                    r.spec.obstacles.len(),
                    r.spec.lane_half_width
                );
            }
        }
        RouteAction::Dump { route, out } => {
            let id: RouteId = route.parse()?;
            let json = Route::builtin(id).to_json();
            match out {
                Some(path) => {
                    std::fs::write(&path, json)
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("{} -> {}", id.name(), path.display());
                }
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}

fn cmd_selftest() -> Result<()> {
    use drivelab_core::deepq::{grad_check, LossKind};
    use drivelab_core::geom::{obb_intersects, Obb, Vec2};
    use drivelab_core::microworld::{ads_control, center_distance, reset_scenario};
    use drivelab_core::monitors::{reward, DistanceVector, Requirement};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("{}: {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // backpropagation vs finite differences
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        worst = worst.max(grad_check(&[4, 8, 3], LossKind::Huber, &mut rng));
    }
    check(&format!("gradient check, max relative error {worst:.2e}"), worst < 1e-4);

    // statistics closed forms
    let mut data = Vec::new();
    for _ in 0..20 {
        data.extend_from_slice(&[1.0, 2.0, 3.0]);
    }
    let m = ResultMatrix::new(20, 3, data)?;
    let f = friedman(&m);
    check(
        &format!("friedman closed form, statistic {:.6}", f.statistic),
        (f.statistic - 40.0).abs() < 1e-9 && (f.p_value - (-20.0f64).exp()).abs() < 1e-12,
    );
    let d = dunn(&m);
    let extreme = d.pairwise.iter().find(|p| p.pair == (0, 2)).unwrap();
    check(
        &format!("dunn extreme pair, |z| {:.4}", extreme.z.abs()),
        (extreme.z.abs() - 6.324_555_320_336_759).abs() < 1e-9 && extreme.p_adjusted < 1e-4,
    );

    // geometry: corner contact intersects while the center distance stays positive
    let a = Obb::new(Vec2::new(0.0, 0.0), 0.0, 4.5, 2.0);
    let b = Obb::new(Vec2::new(2.2, 2.2), std::f64::consts::FRAC_PI_2, 4.5, 2.0);
    let cd = center_distance(a.center, 1.0, b.center, 1.0);
    check(
        &format!("collision sensor vs distance metric confound, gap {cd:.2} m"),
        obb_intersects(&a, &b) && cd > 0.0,
    );

    // controller blind spot: body in lane, center outside the corridor
    let mut w = reset_scenario(&Route::builtin(RouteId::Straight));
    w.ev.pose = drivelab_core::geom::Pose2D::new(10.0, 0.0, 0.0);
    w.ev.speed = 8.0;
    w.vif.pose = drivelab_core::geom::Pose2D::new(25.0, -2.3, 0.6);
    w.vif.speed = 0.0;
    let cmd = ads_control(&w);
    check("controller blind spot for lane-edge intruders", cmd.brake == 0.0);

    // reward point checks
    let dv = DistanceVector {
        dcl: 0.1,
        dv: 2.0,
        dp: 5.0,
        ds: 5.0,
        dt_norm: 0.5,
        tr_violated: false,
    };
    check(
        "reward function point values",
        reward(Requirement::R2Dv, &dv, false) == 0.5
            && reward(Requirement::R2Dv, &dv, true) == 1.0e6
            && reward(Requirement::R6Tr, &dv, false) == 0.0,
    );

    if failures > 0 {
        bail!("{failures} selftest section(s) failed");
    }
    println!("selftest: all sections passed");
    Ok(())
}
