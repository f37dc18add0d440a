use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use riskgrad::avar::DEVIATION_BOUND_CAVEAT;
use riskgrad::riskmeasure::estimate_evar;
use riskgrad::EvarConfig;
use riskgrad::{
    deviation_probability_bound, estimate_avar, gaussian_sampler, load_csv, psi_constant,
    to_increments, CsvOptions, ObjectiveConfig, PayoffModel, SampleMode, SampleSet, SgldConfig,
    StepSpec,
};
use serde::Serialize;

use crate::args::{BoundArgs, Cli, Command, EvarArgs, ReplayArgs, RunArgs, DEFAULT_STEP_SIZE};
use crate::output::{
    sha256_file, trace_csv, trace_svg, AvarReportFile, EvarReportFile, InputDigest, ObjectiveEcho,
    OutDir, RunManifest, SampleSource, WallClock, MANIFEST_SCHEMA, REPORT_SCHEMA,
};
use crate::Failure;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Inputs of an estimation run after defaults and presets are applied.
struct Setup {
    model: PayoffModel,
    objective: ObjectiveConfig,
    sgld: SgldConfig,
    source: SampleSource,
    inputs: Vec<InputDigest>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    command: &'a str,
    payoff: riskgrad::PayoffKind,
    dim: usize,
    level: f64,
    lambda: f64,
    gamma: f64,
    step: StepSpec,
    step_size: f64,
    steps: usize,
    implied_horizon: f64,
    time_span: f64,
    chains: usize,
    samples: usize,
    seed: u64,
    penalty_mode: riskgrad::PenaltyMode,
    sample_mode: SampleMode,
    record_stride: usize,
    out: String,
    svg: bool,
    preset: Option<String>,
    source: &'a SampleSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    evar: Option<&'a EvarConfig>,
}

fn load_samples(
    run: &RunArgs,
    chains: usize,
) -> Result<(SampleSet, SampleSource, Vec<InputDigest>), Failure> {
    match (&run.data, run.gaussian.is_empty()) {
        (Some(path), _) => {
            if !run.delimiter.is_ascii() {
                return Err(Failure::Config(format!(
                    "delimiter `{}` is not ASCII",
                    run.delimiter
                )));
            }
            let options = CsvOptions {
                delimiter: run.delimiter as u8,
                na_policy: run.na.into(),
                ..CsvOptions::default()
            };
            let sha256 = sha256_file(path)?;
            let table = load_csv(path, &options)?;
            let all = to_increments(&table)?;
            let available = all.len();
            let samples = match run.samples {
                None => all,
                Some(p) if p == 0 || p > available => {
                    return Err(Failure::Config(format!(
                        "--samples {p} not in 1..={available} (increments in {})",
                        path.display()
                    )));
                }
                // most recent P increments
                Some(p) => SampleSet::from_flat(
                    all.as_flat()[(available - p) * all.dim()..].to_vec(),
                    all.dim(),
                )?,
            };
            let display = path.display().to_string();
            Ok((
                samples,
                SampleSource::Data {
                    path: display.clone(),
                    sha256: sha256.clone(),
                    columns: table.names().to_vec(),
                    increments: available,
                },
                vec![InputDigest {
                    path: display,
                    sha256,
                }],
            ))
        }
        (None, false) => {
            let p = run.samples.unwrap_or(chains);
            let samples = gaussian_sampler(&run.gaussian, None, p, run.seed)?;
            let source = SampleSource::Gaussian {
                marginals: run.gaussian.clone(),
                seed: run.seed,
            };
            Ok((samples, source, Vec::new()))
        }
        (None, true) => Err(Failure::Config(
            "no samples: pass --data PATH or --gaussian mu=..,sigma=..".into(),
        )),
    }
}

fn setup(run: &RunArgs) -> Result<Setup, Failure> {
    let chains = run.resolved_chains();
    let steps = run.resolved_steps();
    let (samples, source, inputs) = load_samples(run, chains)?;
    let model = PayoffModel::new(run.payoff.into(), samples.dim())?;
    let mut objective = ObjectiveConfig::new(run.level, run.gamma, Arc::new(samples))
        .with_penalty(run.penalty.into());
    if let Some(size) = run.minibatch {
        objective = objective.with_sample_mode(SampleMode::Minibatch { size });
    }
    let step = match run.horizon_t {
        Some(t) => StepSpec::Horizon(t),
        None => StepSpec::Size(run.step_size.unwrap_or(DEFAULT_STEP_SIZE)),
    };
    let sgld = SgldConfig::new(run.lambda, step, steps, chains, run.seed)
        .with_record_stride(run.resolved_stride());
    objective.validate(&model)?;
    sgld.validate(&model)?;
    Ok(Setup {
        model,
        objective,
        sgld,
        source,
        inputs,
    })
}

fn resolved<'a>(
    command: &'a str,
    run: &RunArgs,
    s: &'a Setup,
    evar: Option<&'a EvarConfig>,
) -> serde_json::Value {
    let r = Resolved {
        command,
        payoff: s.model.kind(),
        dim: s.model.dim(),
        level: s.objective.u,
        lambda: s.sgld.lambda,
        gamma: s.objective.gamma,
        step: s.sgld.step,
        step_size: s.sgld.step_size(),
        steps: s.sgld.steps,
        implied_horizon: s.sgld.implied_horizon(),
        time_span: s.sgld.time_span(),
        chains: s.sgld.chains,
        samples: s.objective.samples.len(),
        seed: s.sgld.seed,
        penalty_mode: s.objective.penalty_mode,
        sample_mode: s.objective.sample_mode,
        record_stride: s.sgld.record_stride,
        out: run.out.display().to_string(),
        svg: run.svg,
        preset: run.preset.map(|p| format!("{p:?}").to_lowercase()),
        source: &s.source,
        evar,
    };
    serde_json::to_value(r).expect("resolved config serializes")
}

/// Context for the manifest of the current invocation.
pub struct Invocation {
    pub argv: Vec<String>,
    pub replay_of: Option<String>,
    started: SystemTime,
    clock: Instant,
}

impl Invocation {
    pub fn new(argv: Vec<String>) -> Self {
        Self {
            argv,
            replay_of: None,
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    fn manifest(
        &self,
        command: &str,
        resolved: serde_json::Value,
        seed: u64,
        inputs: Vec<InputDigest>,
        outputs: &[String],
    ) -> RunManifest {
        let mut outputs = outputs.to_vec();
        outputs.push("manifest.json".into());
        RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            tool: "estimate".into(),
            version: VERSION.into(),
            command: command.into(),
            argv: self.argv.clone(),
            resolved,
            seed,
            threads: rayon::current_num_threads(),
            inputs,
            wall_clock: WallClock {
                started_unix_seconds: self
                    .started
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs_f64())
                    .unwrap_or(0.0),
                elapsed_seconds: self.clock.elapsed().as_secs_f64(),
            },
            outputs,
            replay_of: self.replay_of.clone(),
        }
    }
}

pub fn cmd_avar(run: &RunArgs, inv: &Invocation) -> Result<(), Failure> {
    let s = setup(run)?;
    let report = estimate_avar(&s.sgld, &s.model, &s.objective)?;
    for w in report.warnings.iter().chain(&report.assumption_flags) {
        eprintln!("warning: {w}");
    }
    let mut out = OutDir::create(&run.out)?;
    out.write_json(
        "report.json",
        &AvarReportFile {
            schema: REPORT_SCHEMA.into(),
            tool_version: VERSION.into(),
            command: "avar".into(),
            source: s.source.clone(),
            estimate: report.clone(),
        },
    )?;
    out.write("trace.csv", trace_csv(&report.path).as_bytes())?;
    if run.svg {
        out.write("trace.svg", trace_svg(&report.path).as_bytes())?;
    }
    let manifest = inv.manifest(
        "avar",
        resolved("avar", run, &s, None),
        run.seed,
        s.inputs.clone(),
        out.written(),
    );
    out.write_json("manifest.json", &manifest)?;

    println!("avar = {}", report.avar);
    println!("var = {}", report.var);
    if !report.portfolio.is_empty() {
        println!("portfolio = {:?}", report.portfolio);
    }
    println!("wrote {}", run.out.display());
    Ok(())
}

pub fn evar_config(args: &EvarArgs) -> EvarConfig {
    let mut cfg = EvarConfig::new(args.run.level);
    cfg.q_order = args.q_order;
    cfg.k_multiplier = args.k;
    cfg.atoms = args.atoms;
    cfg.partitions = args.partitions;
    if let Some(d) = args.delta {
        cfg.delta = d;
    }
    cfg.seed = args.run.seed;
    cfg.force_atom = args.force_atom;
    cfg.level_grid = args.level_grid;
    cfg
}

pub fn cmd_evar(args: &EvarArgs, inv: &Invocation) -> Result<(), Failure> {
    let cfg = evar_config(args);
    cfg.validate()?;
    let s = setup(&args.run)?;
    let result = estimate_evar(&cfg, &s.sgld, &s.model, &s.objective)?;
    let warnings: Vec<String> = s
        .sgld
        .step_size_warning(s.objective.u, s.objective.gamma)
        .into_iter()
        .collect();
    let assumption_flags = s.model.assumption_flags();
    for w in warnings.iter().chain(&assumption_flags) {
        eprintln!("warning: {w}");
    }
    let mut out = OutDir::create(&args.run.out)?;
    out.write_json(
        "report.json",
        &EvarReportFile {
            schema: REPORT_SCHEMA.into(),
            tool_version: VERSION.into(),
            command: "evar".into(),
            source: s.source.clone(),
            objective: ObjectiveEcho {
                payoff: s.model.kind(),
                dim: s.model.dim(),
                u: s.objective.u,
                gamma: s.objective.gamma,
                penalty_mode: s.objective.penalty_mode,
                sample_mode: s.objective.sample_mode,
                samples: s.objective.samples.len(),
            },
            sgld: s.sgld.clone(),
            search: cfg.clone(),
            result: result.clone(),
            assumption_flags,
            warnings,
        },
    )?;
    let manifest = inv.manifest(
        "evar",
        resolved("evar", &args.run, &s, Some(&cfg)),
        args.run.seed,
        s.inputs.clone(),
        out.written(),
    );
    out.write_json("manifest.json", &manifest)?;

    let a = &result.best_atoms;
    println!("evar = {}", result.value);
    println!(
        "best candidate {} of {} ({} feasible): {} atoms in [{}, {}], mean {}",
        result.best_candidate,
        result.candidates,
        result.feasible_candidates,
        a.count,
        a.min,
        a.max,
        a.mean
    );
    println!("AVaR levels estimated: {}", result.levels_estimated);
    println!("wrote {}", args.run.out.display());
    Ok(())
}

pub fn cmd_bound(args: &BoundArgs) -> Result<(), Failure> {
    if args.steps == 0 {
        return Err(Failure::Config("M must be positive".into()));
    }
    let horizon = match args.step_size {
        Some(h) => h * (args.steps as f64).powi(2),
        None => args.horizon_t,
    };
    let psi = psi_constant(args.steps, horizon, args.level, args.lambda)?;
    let bound = deviation_probability_bound(args.epsilon, args.chains, psi)?;
    println!("psi = {psi:e}");
    println!("bound = {bound}");
    println!("note: {DEVIATION_BOUND_CAVEAT}");
    Ok(())
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.manifest)
        .map_err(|e| Failure::Io(format!("cannot read {}: {e}", args.manifest.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
        Failure::Config(format!(
            "{} is not a run manifest: {e}",
            args.manifest.display()
        ))
    })?;
    for input in &manifest.inputs {
        let now = sha256_file(Path::new(&input.path))?;
        if now != input.sha256 {
            return Err(Failure::Io(format!(
                "{} changed since the recorded run (sha256 {} != {})",
                input.path, now, input.sha256
            )));
        }
    }
    let mut full = vec!["estimate".to_string()];
    full.extend(manifest.argv.iter().cloned());
    let mut cli = <Cli as clap::Parser>::try_parse_from(&full)
        .map_err(|e| Failure::Config(format!("recorded arguments no longer parse: {e}")))?;
    if let Some(out) = &args.out {
        match &mut cli.command {
            Command::Avar(run) => run.out = out.clone(),
            Command::Evar(e) => e.run.out = out.clone(),
            _ => {}
        }
    }
    let mut inv = Invocation::new(manifest.argv.clone());
    inv.replay_of = Some(args.manifest.display().to_string());
    dispatch(&cli.command, &inv)
}

pub fn dispatch(command: &Command, inv: &Invocation) -> Result<(), Failure> {
    match command {
        Command::Avar(run) => cmd_avar(run, inv),
        Command::Evar(args) => cmd_evar(args, inv),
        Command::Bound(args) => cmd_bound(args),
        Command::Replay(args) => cmd_replay(args),
    }
}
