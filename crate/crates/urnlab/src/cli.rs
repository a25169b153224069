//! Command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use urnlab_core::bounds::{
    bound_k, bound_k_alt, bound_r, bound_sigma, bound_tau, bound_tau_alt, lemma_product, n_t_gap_bounds, BoundInputs,
    BoundReport,
};
use urnlab_core::config::{self, predicted_active_fraction, SelectionPolicy};
use urnlab_core::oracle::{self, OracleOptions, DEFAULT_HORIZON_CAP};
use urnlab_core::urn::{self, n_t, Event, Simulation, UrnParams};
use urnlab_core::{seed, Error};

use crate::error::{AppError, AppResult};
use crate::io::{self as fmt, FigureRow, Header};
use crate::montecarlo;

/// Largest horizon for which `urn-run` stores a full path.
pub const FULL_PATH_CAP: u64 = 50_000_000;

#[derive(Parser, Debug, Serialize)]
#[command(name = "urnlab", version, about = "Drain urn and configuration model toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate one urn trajectory.
    UrnRun(UrnRunArgs),
    /// Exact law, event probabilities and martingale checks for a small urn.
    UrnExact(UrnExactArgs),
    /// Evaluate the closed-form estimates.
    Bounds(BoundsArgs),
    /// Monte Carlo estimation.
    #[command(subcommand)]
    Mc(McCommand),
    /// Generate a random regular multigraph by half-edge pairing.
    Graph(GraphArgs),
    /// Active half-edge fraction curve, optionally with a simulated overlay.
    Figure(FigureArgs),
    /// Regenerate an artifact from the command recorded in its header.
    Replay(ReplayArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum McCommand {
    /// Event probabilities with 95% intervals.
    Estimate(McEstimateArgs),
    /// K failure and tau tail over a grid of t, with log-log fits.
    Sweep(McSweepArgs),
    /// Per-step mean and quantiles of K_n and L_n.
    Ensemble(McEnsembleArgs),
    /// Smallest constants consistent with a sweep.
    Calibrate(McSweepArgs),
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
pub struct UrnArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub x0: f64,
    #[arg(long)]
    pub y0: f64,
}

impl UrnArgs {
    fn params(&self) -> AppResult<UrnParams> {
        Ok(UrnParams::new(self.a, self.b, self.x0, self.y0)?)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    K,
    L,
    R,
    Sigma,
    Tau,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    Lowest,
    Highest,
    Uniform,
}

impl From<PolicyArg> for SelectionPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Lowest => SelectionPolicy::LowestIndex,
            PolicyArg::Highest => SelectionPolicy::HighestIndex,
            PolicyArg::Uniform => SelectionPolicy::Uniform,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EventArgs {
    /// Events to evaluate; repeatable.
    #[arg(long = "event", value_enum)]
    pub events: Vec<EventKind>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    /// Threshold for the tau event `tau >= n`.
    #[arg(long)]
    pub n: Option<u64>,
}

fn need<T>(v: Option<T>, flag: &str, kind: &str) -> AppResult<T> {
    v.ok_or_else(|| AppError::Validation(format!("event {kind} needs --{flag}")))
}

impl EventArgs {
    fn resolve(&self, default: &[EventKind]) -> AppResult<Vec<Event>> {
        let kinds = if self.events.is_empty() { default } else { &self.events[..] };
        kinds
            .iter()
            .map(|k| {
                Ok(match k {
                    EventKind::K => Event::K { t: need(self.t, "t", "k")?, eps: need(self.eps, "eps", "k")? },
                    EventKind::L => Event::L { eps: need(self.eps, "eps", "l")? },
                    EventKind::R => Event::R,
                    EventKind::Sigma => {
                        Event::Sigma { m: need(self.m, "m", "sigma")?, eps: need(self.eps, "eps", "sigma")? }
                    }
                    EventKind::Tau => Event::TauGeq { n: need(self.n, "n", "tau")? },
                })
            })
            .collect()
    }
}

#[derive(Args, Debug, Serialize)]
pub struct UrnRunArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stream the path and report only summary statistics (JSON).
    #[arg(long)]
    pub summary_only: bool,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct UrnExactArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[command(flatten)]
    pub events: EventArgs,
    #[arg(long, default_value_t = DEFAULT_HORIZON_CAP)]
    pub horizon_cap: u64,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    K,
    KAlt,
    Tau,
    TauAlt,
    Sigma,
    R,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    /// Bounds to evaluate; all when absent.
    #[arg(long = "bound", value_enum)]
    pub bounds: Vec<BoundKind>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    #[arg(long, default_value_t = 0)]
    pub n: u64,
    #[arg(long, default_value_t = 1.0)]
    pub c_const: f64,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct McEstimateArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[command(flatten)]
    pub events: EventArgs,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also report the exact Clopper-Pearson interval.
    #[arg(long)]
    pub clopper_pearson: bool,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct McSweepArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Single grid value; combined with --t-grid.
    #[arg(long)]
    pub t: Option<f64>,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Vec<f64>,
    #[arg(long, default_value_t = 2_000)]
    pub replicates: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    pub c_const: f64,
    #[command(flatten)]
    pub output: OutArgs,
}

impl McSweepArgs {
    fn grid(&self) -> Vec<f64> {
        let mut g = self.t_grid.clone();
        g.extend(self.t);
        g.sort_by(f64::total_cmp);
        g
    }
}

#[derive(Args, Debug, Serialize)]
pub struct McEnsembleArgs {
    #[command(flatten)]
    pub urn: UrnArgs,
    #[arg(long, default_value_t = 100)]
    pub replicates: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Step spacing of the output grid; about 1000 rows when absent.
    #[arg(long)]
    pub stride: Option<u64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.5, 0.95])]
    pub quantiles: Vec<f64>,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct GraphArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub d: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Lowest)]
    pub policy: PolicyArg,
    /// Regenerate until simple, at most this many times.
    #[arg(long)]
    pub max_attempts: Option<u64>,
    /// Also write the `k,a,i,x_urn,y_urn` pairing trajectory here.
    #[arg(long)]
    #[serde(skip)]
    pub trajectory_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct FigureArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub d: u64,
    /// Simulated replicates for the overlay; none when 0.
    #[arg(long, default_value_t = 0)]
    pub replicates: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of sampled intervals along `k`.
    #[arg(long, default_value_t = 1000)]
    pub points: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Lowest)]
    pub policy: PolicyArg,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct ReplayArgs {
    /// Artifact whose header holds the command.
    pub file: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::UrnRun(_) => "urn-run",
            Command::UrnExact(_) => "urn-exact",
            Command::Bounds(_) => "bounds",
            Command::Mc(McCommand::Estimate(_)) => "mc estimate",
            Command::Mc(McCommand::Sweep(_)) => "mc sweep",
            Command::Mc(McCommand::Ensemble(_)) => "mc ensemble",
            Command::Mc(McCommand::Calibrate(_)) => "mc calibrate",
            Command::Graph(_) => "graph",
            Command::Figure(_) => "figure",
            Command::Replay(_) => "replay",
        }
    }

    fn seed_slot(&mut self) -> Option<&mut Option<u64>> {
        match self {
            Command::UrnRun(a) => Some(&mut a.seed),
            Command::Mc(McCommand::Estimate(a)) => Some(&mut a.seed),
            Command::Mc(McCommand::Sweep(a) | McCommand::Calibrate(a)) => Some(&mut a.seed),
            Command::Mc(McCommand::Ensemble(a)) => Some(&mut a.seed),
            Command::Graph(a) => Some(&mut a.seed),
            Command::Figure(a) => Some(&mut a.seed),
            _ => None,
        }
    }
}

const OUTPUT_FLAGS: [&str; 2] = ["--out", "--trajectory-out"];

fn shell_quote(s: &str) -> String {
    let safe = !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "._,:/=+-".contains(c));
    if safe {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', "'\\''"))
    }
}

/// Splits a command line written by [`shell_quote`].
pub fn shell_split(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_token = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\'' => {
                in_token = true;
                for q in chars.by_ref() {
                    if q == '\'' {
                        break;
                    }
                    cur.push(q);
                }
            }
            '\\' => {
                in_token = true;
                if let Some(n) = chars.next() {
                    cur.push(n);
                }
            }
            c if c.is_whitespace() => {
                if in_token {
                    out.push(std::mem::take(&mut cur));
                    in_token = false;
                }
            }
            c => {
                in_token = true;
                cur.push(c);
            }
        }
    }
    if in_token {
        out.push(cur);
    }
    out
}

/// The invocation without output paths, with the seed made explicit.
fn replay_line(args: &[String], injected_seed: Option<u64>) -> String {
    let mut kept = vec!["urnlab".to_string()];
    let mut skip_next = false;
    for a in args.iter().skip(1) {
        if skip_next {
            skip_next = false;
            continue;
        }
        if OUTPUT_FLAGS.contains(&a.as_str()) {
            skip_next = true;
            continue;
        }
        if OUTPUT_FLAGS.iter().any(|f| a.starts_with(&format!("{f}="))) {
            continue;
        }
        kept.push(a.clone());
    }
    if let Some(s) = injected_seed {
        kept.push("--seed".into());
        kept.push(s.to_string());
    }
    kept.iter().map(|s| shell_quote(s)).collect::<Vec<_>>().join(" ")
}

fn random_seed() -> AppResult<u64> {
    use rand_core::{OsRng, TryRngCore};
    OsRng.try_next_u64().map_err(|e| AppError::Io(io::Error::other(e.to_string())))
}

/// Parses and runs one invocation; `args[0]` is the program name.
pub fn execute(args: &[String]) -> AppResult<()> {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                print!("{e}");
                return Ok(());
            }
            return Err(AppError::Validation(e.to_string().trim_end().to_string()));
        }
    };
    let mut command = cli.command;
    if let Command::Replay(r) = &command {
        return replay(&r.file, r.out.as_deref());
    }
    let mut injected = None;
    if let Some(slot) = command.seed_slot() {
        if slot.is_none() {
            let s = random_seed()?;
            eprintln!("urnlab: no --seed given; using seed {s}");
            *slot = Some(s);
            injected = Some(s);
        }
    }
    let header = Header {
        command: command.name().to_string(),
        config: serde_json::to_value(&command)?,
        replay: replay_line(args, injected),
    };
    dispatch(&command, &header)
}

fn replay(file: &Path, out: Option<&Path>) -> AppResult<()> {
    let text = std::fs::read_to_string(file)?;
    let line = fmt::find_replay(&text)
        .ok_or_else(|| AppError::Validation(format!("{} has no replay header", file.display())))?;
    let mut args = shell_split(&line);
    if args.get(1).map(String::as_str) == Some("replay") {
        return Err(AppError::Validation("refusing to replay a replay command".into()));
    }
    if let Some(o) = out {
        args.push("--out".into());
        args.push(o.to_string_lossy().into_owned());
    }
    execute(&args)
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> AppResult<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, header: &Header, body: &T) -> AppResult<()> {
    let v = header.wrap_json(body)?;
    let text = serde_json::to_string_pretty(&v)?;
    emit(out, |w| writeln!(w, "{text}"))
}

fn emit_text(out: Option<&Path>, header: &Header, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> AppResult<()> {
    emit(out, |w| {
        header.write_comments(w)?;
        body(w)
    })
}

fn format_or(output: &OutArgs, default: Format, allowed: &[Format], command: &str) -> AppResult<Format> {
    let f = output.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(AppError::Validation(format!("{command} does not support --format {f:?}").to_lowercase()))
    }
}

fn dispatch(command: &Command, header: &Header) -> AppResult<()> {
    match command {
        Command::UrnRun(a) => cmd_urn_run(a, header),
        Command::UrnExact(a) => cmd_urn_exact(a, header),
        Command::Bounds(a) => cmd_bounds(a, header),
        Command::Mc(McCommand::Estimate(a)) => cmd_mc_estimate(a, header),
        Command::Mc(McCommand::Sweep(a)) => cmd_mc_sweep(a, header, false),
        Command::Mc(McCommand::Calibrate(a)) => cmd_mc_sweep(a, header, true),
        Command::Mc(McCommand::Ensemble(a)) => cmd_mc_ensemble(a, header),
        Command::Graph(a) => cmd_graph(a, header),
        Command::Figure(a) => cmd_figure(a, header),
        Command::Replay(_) => unreachable!("handled before dispatch"),
    }
}

fn resolved(seed: Option<u64>) -> u64 {
    seed.expect("seed resolved before dispatch")
}

pub fn cmd_urn_run(args: &UrnRunArgs, header: &Header) -> AppResult<()> {
    let params = args.urn.params()?;
    let seed = resolved(args.seed);
    let out = args.output.out.as_deref();
    if args.summary_only {
        format_or(&args.output, Format::Json, &[Format::Json], "urn-run --summary-only")?;
        let mut tau = None;
        let mut blue = 0u64;
        let mut last = params.initial_state();
        for (draw, state) in Simulation::new(params, seed::rng_from_seed(seed)) {
            if draw == urn::Draw::Blue {
                blue += 1;
            }
            if tau.is_none() && state.x.abs() <= 1e-9 * params.b() {
                tau = Some(state.n);
            }
            last = state;
        }
        let body = json!({
            "params": params,
            "seed": seed,
            "rho": last.rho.unwrap_or(last.n),
            "final": last,
            "blue_draws": blue,
            "tau": tau.or((params.x0() == 0.0).then_some(0)),
            "event_r": params.remaining(last.rho.unwrap_or(last.n)) <= 0.0,
        });
        return emit_json(out, header, &body);
    }
    if params.horizon() > FULL_PATH_CAP {
        return Err(AppError::Core(Error::SizeCap(format!(
            "horizon {} exceeds the full-path cap {FULL_PATH_CAP}; use --summary-only",
            params.horizon()
        ))));
    }
    let traj = urn::run(&params, seed);
    match format_or(&args.output, Format::Csv, &[Format::Csv, Format::Json], "urn-run")? {
        Format::Csv => emit_text(out, header, |w| fmt::write_urn_trajectory_csv(w, &traj)),
        Format::Json => emit_json(out, header, &json!({ "rho": traj.rho(), "trajectory": traj })),
    }
}

pub fn cmd_urn_exact(args: &UrnExactArgs, header: &Header) -> AppResult<()> {
    let params = args.urn.params()?;
    let events = args.events.resolve(&[EventKind::R])?;
    let options = OracleOptions { horizon_cap: args.horizon_cap, ..OracleOptions::default() };
    let dist = oracle::build_with(&params, options)?;
    let out = args.output.out.as_deref();
    match format_or(&args.output, Format::Json, &[Format::Csv, Format::Json], "urn-exact")? {
        Format::Csv => emit_text(out, header, |w| fmt::write_oracle_dump_csv(w, &dist.dump())),
        Format::Json => {
            let probs = events
                .iter()
                .map(|e| {
                    let p = dist.event_prob(e)?;
                    Ok(json!({ "event": e, "probability": p.value, "exact": p.exact_string() }))
                })
                .collect::<AppResult<Vec<_>>>()?;
            let rho_law: Vec<Value> = dist.rho_law().into_iter().map(|(r, p)| json!({ "rho": r, "prob": p })).collect();
            let body = json!({
                "params": params,
                "total_steps": dist.total_steps(),
                "exact_arithmetic": dist.is_exact(),
                "events": probs,
                "rho_law": rho_law,
                "martingale": dist.verify_martingale(),
            });
            emit_json(out, header, &body)
        }
    }
}

fn evaluate_bounds(args: &BoundsArgs, params: UrnParams) -> AppResult<Vec<BoundReport>> {
    let inputs = BoundInputs { params, c_const: args.c_const, t: args.t, eps: args.eps, m: args.m, n: args.n };
    let all = [BoundKind::K, BoundKind::KAlt, BoundKind::Tau, BoundKind::TauAlt, BoundKind::Sigma, BoundKind::R];
    let kinds = if args.bounds.is_empty() { &all[..] } else { &args.bounds[..] };
    let mut out = Vec::new();
    for k in kinds {
        match k {
            BoundKind::K => out.push(bound_k(&inputs)?),
            BoundKind::KAlt => out.push(bound_k_alt(&inputs)?),
            BoundKind::Tau => out.push(bound_tau(&inputs)?),
            BoundKind::TauAlt => out.push(bound_tau_alt(&inputs)?),
            BoundKind::Sigma => out.push(bound_sigma(&inputs)?),
            BoundKind::R => {
                let (strong, weak) = bound_r(&inputs)?;
                out.push(strong);
                out.push(weak);
            }
        }
    }
    Ok(out)
}

pub fn cmd_bounds(args: &BoundsArgs, header: &Header) -> AppResult<()> {
    let params = args.urn.params()?;
    let reports = evaluate_bounds(args, params)?;
    let out = args.output.out.as_deref();
    match format_or(&args.output, Format::Json, &[Format::Csv, Format::Json], "bounds")? {
        Format::Csv => emit_text(out, header, |w| fmt::write_bounds_csv(w, &reports)),
        Format::Json => {
            let product = (args.n >= 1).then(|| lemma_product(&params, args.n).ok()).flatten();
            let nt = (params.x0() > 0.0).then(|| n_t(&params, args.t).ok()).flatten();
            let body = json!({
                "bounds": reports.iter().map(fmt::bound_json).collect::<Vec<_>>(),
                "lemma_product": product.map(|p| json!({
                    "product": p.product, "lower": p.lower, "upper": p.upper, "holds": p.holds(),
                })),
                "n_t": nt,
                "n_t_gap_bounds": (params.x0() > 0.0).then(|| n_t_gap_bounds(&params, args.t)),
            });
            emit_json(out, header, &body)
        }
    }
}

pub fn cmd_mc_estimate(args: &McEstimateArgs, header: &Header) -> AppResult<()> {
    let params = args.urn.params()?;
    let events = args.events.resolve(&[EventKind::R])?;
    let seed = resolved(args.seed);
    let reports = montecarlo::estimate_many(&params, &events, args.replicates, seed, args.clopper_pearson)?;
    let out = args.output.out.as_deref();
    match format_or(&args.output, Format::Json, &[Format::Csv, Format::Json], "mc estimate")? {
        Format::Json => emit_json(out, header, &json!({ "estimates": reports })),
        Format::Csv => emit_text(out, header, |w| {
            writeln!(w, "event,replicates,successes,p_hat,ci_low,ci_high")?;
            for r in &reports {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    serde_json::to_string(&r.event).unwrap_or_default().replace(',', ";"),
                    r.replicates,
                    r.successes,
                    fmt::fmt_real(r.p_hat),
                    fmt::fmt_real(r.ci_low),
                    fmt::fmt_real(r.ci_high)
                )?;
            }
            Ok(())
        }),
    }
}

pub fn cmd_mc_sweep(args: &McSweepArgs, header: &Header, calibrate: bool) -> AppResult<()> {
    let params = args.urn.params()?;
    let seed = resolved(args.seed);
    let report = montecarlo::sweep_t(&params, args.eps, &args.grid(), args.replicates, seed, args.c_const)?;
    let out = args.output.out.as_deref();
    if calibrate {
        format_or(&args.output, Format::Json, &[Format::Json], "mc calibrate")?;
        let cal = montecarlo::calibrate(&report);
        return emit_json(out, header, &json!({ "calibration": cal, "sweep": report }));
    }
    match format_or(&args.output, Format::Json, &[Format::Csv, Format::Json], "mc sweep")? {
        Format::Json => emit_json(out, header, &report),
        Format::Csv => emit_text(out, header, |w| {
            writeln!(
                w,
                "t,n_t,k_failure,k_ci_low,k_ci_high,bound_k,bound_k_domain_ok,tau_tail,tau_ci_low,tau_ci_high,bound_tau,bound_tau_domain_ok"
            )?;
            for p in &report.points {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    fmt::fmt_real(p.t),
                    p.n_t,
                    fmt::fmt_real(p.k_failure.p_hat),
                    fmt::fmt_real(p.k_failure.ci_low),
                    fmt::fmt_real(p.k_failure.ci_high),
                    fmt::fmt_real(p.bound_k.value),
                    p.bound_k.domain_ok,
                    fmt::fmt_real(p.tau_tail.p_hat),
                    fmt::fmt_real(p.tau_tail.ci_low),
                    fmt::fmt_real(p.tau_tail.ci_high),
                    fmt::fmt_real(p.bound_tau.value),
                    p.bound_tau.domain_ok
                )?;
            }
            Ok(())
        }),
    }
}

pub fn cmd_mc_ensemble(args: &McEnsembleArgs, header: &Header) -> AppResult<()> {
    let params = args.urn.params()?;
    let seed = resolved(args.seed);
    let last = (params.total() / params.a()).floor() as u64;
    let stride = args.stride.unwrap_or((last / 1000).max(1));
    let report = montecarlo::ensemble_stats(&params, args.replicates, seed, &args.quantiles, stride)?;
    let out = args.output.out.as_deref();
    match format_or(&args.output, Format::Csv, &[Format::Csv, Format::Json], "mc ensemble")? {
        Format::Csv => emit_text(out, header, |w| fmt::write_ensemble_csv(w, &report)),
        Format::Json => emit_json(out, header, &report),
    }
}

pub fn cmd_graph(args: &GraphArgs, header: &Header) -> AppResult<()> {
    let seed = resolved(args.seed);
    let policy = SelectionPolicy::from(args.policy);
    let (graph, counts, attempts) = match args.max_attempts {
        Some(max) => {
            let s = config::sample_simple(args.n, args.d, seed, max, policy)?;
            (s.graph, s.counts, s.attempts)
        }
        None => {
            let (g, c) = config::generate(args.n, args.d, seed, policy)?;
            (g, c, 1)
        }
    };
    format_or(&args.output, Format::Csv, &[Format::Csv], "graph")?;
    if let Some(path) = &args.trajectory_out {
        emit_text(Some(path), header, |w| fmt::write_pairing_csv(w, &counts))?;
    }
    emit_text(args.output.out.as_deref(), header, |w| {
        writeln!(w, "# attempts={attempts}")?;
        fmt::write_edge_list(w, &graph, seed)
    })
}

/// Figure rows for `k` sampled at `points` evenly spaced positions of `[0, n d / 2]`.
pub fn figure_rows(n: u64, d: u64, points: u64, overlay: Option<&[f64]>) -> Vec<FigureRow> {
    let half = n * d / 2;
    let nd = (n * d) as f64;
    let mut ks: Vec<u64> = (0..=points).map(|i| ((i as u128 * half as u128) / points as u128) as u64).collect();
    ks.dedup();
    ks.into_iter()
        .map(|k| FigureRow {
            k,
            x: 2.0 * k as f64 / nd,
            predicted: predicted_active_fraction(n, d, k),
            diagonal: (nd - 2.0 * k as f64) / nd,
            simulated: overlay.map(|o| o[k as usize]),
        })
        .collect()
}

pub fn cmd_figure(args: &FigureArgs, header: &Header) -> AppResult<()> {
    if args.n == 0 || args.d == 0 || (args.n * args.d) % 2 == 1 {
        return Err(AppError::Validation(format!("need n, d >= 1 with n d even; got n = {}, d = {}", args.n, args.d)));
    }
    if args.points == 0 {
        return Err(AppError::Validation("--points must be at least 1".into()));
    }
    format_or(&args.output, Format::Csv, &[Format::Csv], "figure")?;
    let overlay = if args.replicates > 0 {
        Some(montecarlo::mean_active_fraction(
            args.n,
            args.d,
            args.replicates,
            resolved(args.seed),
            args.policy.into(),
        )?)
    } else {
        None
    };
    let rows = figure_rows(args.n, args.d, args.points, overlay.as_deref());
    emit_text(args.output.out.as_deref(), header, |w| fmt::write_figure_csv(w, &rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn replay_line_drops_outputs_and_adds_seed() {
        let args = argv("urnlab urn-run --a 1 --b 2 --x0 2 --y0 1 --out f.csv --format=csv");
        assert_eq!(replay_line(&args, Some(7)), "urnlab urn-run --a 1 --b 2 --x0 2 --y0 1 --format=csv --seed 7");
        let args = argv("urnlab graph --n 4 --d 3 --seed 1 --trajectory-out=t.csv --out e.txt");
        assert_eq!(replay_line(&args, None), "urnlab graph --n 4 --d 3 --seed 1");
    }

    #[test]
    fn quoting_round_trips() {
        let tokens = vec!["urnlab".to_string(), "a b".into(), "it's".into(), "--t-grid".into(), "1,2".into()];
        let line = tokens.iter().map(|t| shell_quote(t)).collect::<Vec<_>>().join(" ");
        assert_eq!(shell_split(&line), tokens);
    }

    #[test]
    fn figure_endpoints() {
        let rows = figure_rows(10_000, 20, 100, None);
        assert_eq!(rows[0].k, 0);
        assert!((rows[0].predicted - 1e-4).abs() < 1e-15);
        assert_eq!(rows.last().unwrap().x, 1.0);
        assert_eq!(rows.last().unwrap().predicted, 0.0);
        assert_eq!(rows.len(), 101);
    }

    #[test]
    fn event_flags_are_required() {
        let e = EventArgs { events: vec![EventKind::K], t: Some(1.0), eps: None, m: None, n: None };
        assert!(e.resolve(&[]).is_err());
        let e = EventArgs { events: vec![], t: None, eps: None, m: None, n: None };
        assert_eq!(e.resolve(&[EventKind::R]).unwrap(), vec![Event::R]);
    }
}
