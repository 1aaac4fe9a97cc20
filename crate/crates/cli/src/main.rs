use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use streamtgn_client::{Client, ClientError};
use streamtgn_core::config::RunConfig;
use streamtgn_core::io::GenConfig;
use streamtgn_core::model::ModelDims;
use streamtgn_core::run::SweepAxis;
use streamtgn_proto::{
    BenchRequest, BenchResponse, ParamsInitRequest, PolicyRequest, RunRequest, SpeedupQuery, SpeedupRequest,
    StalenessRequest, Sweep,
};

mod args;

use args::*;

const REPORT_ENV: &str = "STREAMTGN_REPORT";

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for malformed input, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<ClientError>() {
            return if c.is_input_error() { 2 } else { 1 };
        }
        if let Some(c) = cause.downcast_ref::<streamtgn_core::Error>() {
            return if c.is_input_error() { 2 } else { 1 };
        }
        if cause.downcast_ref::<InputError>().is_some() || cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

async fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Command::Serve(args) = &cli.command {
        let listener = tokio::net::TcpListener::bind(args.bind)
            .await
            .with_context(|| format!("cannot bind {}", args.bind))?;
        println!("listening on http://{}", listener.local_addr()?);
        streamtgn_server::serve(listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        return Ok(ExitCode::SUCCESS);
    }
    let base = match &cli.server {
        Some(url) => url.clone(),
        None => {
            let (addr, _task) = streamtgn_server::spawn(([127, 0, 0, 1], 0).into()).await?;
            format!("http://{addr}")
        }
    };
    tracing::debug!(%base, "using server");
    let client = Client::new(base);
    let file_config = match &cli.config {
        Some(path) => read(path)?,
        None => String::new(),
    };
    match cli.command {
        Command::Gen(args) => gen(&client, args).await,
        Command::Verify(args) => {
            let (req, report) = run_request(&file_config, &args)?;
            let r = client.verify(&req).await?;
            emit(&r.to_lines(), report.as_deref())?;
            Ok(if r.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Bench(args) => {
            let (run, report) = run_request(&file_config, &args.run)?;
            let sweep = [
                (SweepAxis::BatchSize, args.sweep_batch_sizes),
                (SweepAxis::Fanout, args.sweep_fanouts),
                (SweepAxis::RebuildInterval, args.sweep_rebuild_intervals),
            ]
            .into_iter()
            .find(|(_, values)| !values.is_empty())
            .map(|(axis, values)| Sweep { axis, values });
            let lines = match client.bench(&BenchRequest { run, sweep }).await? {
                BenchResponse::Run(r) => r.to_lines(),
                BenchResponse::Sweep { points } => points.iter().map(|p| p.to_line()).collect(),
            };
            emit(&lines, report.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Staleness(args) => {
            let (run, report) = run_request(&file_config, &args.run)?;
            let r = client
                .staleness(&StalenessRequest {
                    run,
                    batch_sizes: args.batch_sizes,
                })
                .await?;
            emit(&r.to_lines(), report.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::PolicyCompare(args) => {
            let (run, report) = run_request(&file_config, &args.run)?;
            let r = client
                .policy_compare(&PolicyRequest {
                    run,
                    warmup: args.warmup,
                })
                .await?;
            emit(&[r.to_line()], report.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::SpeedupTable(args) => {
            let rows = args
                .rows
                .iter()
                .map(|r| parse_row(r))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let r = client
                .speedup_table(&SpeedupRequest {
                    rows,
                    only_user_rows: args.only_rows,
                })
                .await?;
            print!("{}", r.text);
            Ok(ExitCode::SUCCESS)
        }
        Command::Params(ParamsCommand::Init(args)) => {
            let mut cfg = RunConfig::default();
            cfg.apply_text(&file_config)?;
            for kv in &args.overrides {
                set_kv(&mut cfg, kv)?;
            }
            let r = client
                .params_init(&ParamsInitRequest {
                    seed: args.seed,
                    dims: cfg.dims,
                })
                .await?;
            write_output(args.output.as_deref(), &r.text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Params(ParamsCommand::Dump(args)) => {
            let r = client.params_dump(read(&args.file)?).await?;
            print_dims(&r.dims, r.tensors, r.scalars);
            if args.full {
                print!("{}", r.text);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve(_) => unreachable!("handled above"),
    }
}

async fn gen(client: &Client, a: GenArgs) -> anyhow::Result<ExitCode> {
    let req = GenConfig {
        seed: a.seed,
        n: a.n,
        m: a.m,
        d_e: a.d_e,
        attachment: a.attachment,
        burstiness: a.burstiness,
        epochs: a.epochs,
        epoch_length: a.epoch_length,
    };
    let r = client.gen(&req).await?;
    write_output(a.output.as_deref(), &r.text)?;
    if a.output.is_some() {
        eprintln!("wrote {} edges", r.edges);
    }
    Ok(ExitCode::SUCCESS)
}

fn print_dims(d: &ModelDims, tensors: usize, scalars: usize) {
    println!(
        "params d_s={} d_e={} d_t={} d_x={} d_m={} d_k={} heads={} d={} layers={} tensors={tensors} scalars={scalars}",
        d.d_s, d.d_e, d.d_t, d.d_x, d.d_m, d.d_k, d.heads, d.d, d.layers
    );
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn set_kv(cfg: &mut RunConfig, kv: &str) -> anyhow::Result<()> {
    let (k, v) = kv
        .split_once('=')
        .ok_or_else(|| input_error(format!("expected KEY=VALUE, found `{kv}`")))?;
    cfg.set(k, v)?;
    Ok(())
}

fn parse_row(text: &str) -> anyhow::Result<SpeedupQuery> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [n, b, l, k] = parts.as_slice() else {
        return Err(input_error(format!("row `{text}` must be n,B,L,K")));
    };
    let num = |s: &str| {
        s.parse::<u64>()
            .map_err(|_| input_error(format!("bad number `{s}` in row `{text}`")))
    };
    Ok(SpeedupQuery {
        n: num(n)?,
        b: num(b)?,
        l: num(l)?,
        k: u32::try_from(num(k)?).map_err(|_| input_error(format!("K too large in row `{text}`")))?,
    })
}

/// Applies defaults, then the `--config` file, then flags. Returns the request
/// and the report path.
fn run_request(file_config: &str, a: &RunArgs) -> anyhow::Result<(RunRequest, Option<PathBuf>)> {
    let mut cfg = RunConfig::default();
    cfg.apply_text(file_config)?;
    let mut set = |k: &str, v: Option<String>| -> anyhow::Result<()> {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
        Ok(())
    };
    set("batch_size", a.batch_size.map(|v| v.to_string()))?;
    set("fanout", a.fanout.map(|v| v.to_string()))?;
    set("window", a.window.clone())?;
    set("layers", a.layers.map(|v| v.to_string()))?;
    set("mode", a.mode.map(|v| v.to_string()))?;
    set("aggregator", a.aggregator.map(|v| v.to_string()))?;
    set("policy", a.policy.map(|v| v.to_string()))?;
    set("gamma", a.gamma.map(|v| v.to_string()))?;
    set("delta_max", a.delta_max.map(|v| v.to_string()))?;
    set("alpha", a.alpha.map(|v| v.to_string()))?;
    set("seed", a.seed.map(|v| v.to_string()))?;
    set("check_every", a.check_every.map(|v| v.to_string()))?;
    if a.sort {
        cfg.sort = true;
    }
    for kv in &a.overrides {
        set_kv(&mut cfg, kv)?;
    }
    if let Some(p) = &a.input {
        cfg.input = Some(p.display().to_string());
    }
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| input_error("no input stream: pass --input or set input= in the config"))?;
    let report = a
        .report
        .clone()
        .or_else(|| std::env::var_os(REPORT_ENV).map(PathBuf::from))
        .or_else(|| cfg.report.as_ref().map(PathBuf::from));
    cfg.report = report.as_ref().map(|p| p.display().to_string());
    cfg.validate()?;
    let edges = read(Path::new(&input))?;
    let params = a.params.as_deref().map(read).transpose()?;
    Ok((
        RunRequest {
            config: cfg,
            edges,
            params,
        },
        report,
    ))
}

/// Prints report lines and, when asked, writes them to `report`.
fn emit(lines: &[String], report: Option<&Path>) -> anyhow::Result<()> {
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    print!("{text}");
    if let Some(path) = report {
        fs::write(path, &text).with_context(|| format!("cannot write report {}", path.display()))?;
    }
    Ok(())
}
