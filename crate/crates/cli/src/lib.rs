//! Command-line front end: argument parsing, channel resolution and CSV
//! reporting. Every subcommand maps onto one library operation.

pub mod format;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fblearn_core::achievability::{max_rate_achievable_with, rcu_learning_bound_with, BoundParams, Method, RcuOptions};
use fblearn_core::asymptotics::{berry_esseen_radius, info_density_moments, normal_approx_rate_partial};
use fblearn_core::capacity::{blahut_arimoto, capacity_dispersion, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use fblearn_core::codesim::{
    generate_codebook, simulate_ensemble, simulate_error_prob_with, verify_reliability, ReliabilityConfig, SimOptions,
};
use fblearn_core::converse::converse_bound;
use fblearn_core::learning::{estimate_empirical_channel, max_blocklength, sample_training_set, tv_penalty};
use fblearn_core::{CapacityDispersion, Dist, Dmc, PenaltyParams, TrainingBudget};

pub use format::{fmt_num, parse_channel_file, parse_training_file, write_channel_file, write_training_file};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("index {value} out of range (limit {limit}) at line {line}, column {col}")]
    IndexOutOfRange {
        line: usize,
        col: usize,
        value: usize,
        limit: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] fblearn_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Parser)]
#[command(name = "fblearn", version, about = "Finite-blocklength bounds for channel codes learned from data")]
pub struct Cli {
    /// Write the CSV here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a channel from a training file.
    Estimate {
        #[command(flatten)]
        training: TrainingFileArgs,
        /// Also write the estimate as a channel file.
        #[arg(long)]
        write_channel: Option<PathBuf>,
    },
    /// Draw a training set from a channel (headerless `x,y` CSV).
    Sample {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Blahut–Arimoto capacity.
    Capacity {
        #[command(flatten)]
        source: ChannelArgs,
    },
    /// Capacity with the extremal dispersions.
    Dispersion {
        #[command(flatten)]
        source: ChannelArgs,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Random-coding-union bound with the learning penalty.
    Achieve {
        #[command(flatten)]
        source: ChannelArgs,
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        n0: Option<usize>,
    },
    /// Largest rate certified by the achievability bound.
    MaxRate {
        #[command(flatten)]
        source: ChannelArgs,
        #[command(flatten)]
        code: CodeArgs,
    },
    /// Metaconverse upper bound.
    Converse {
        #[command(flatten)]
        source: ChannelArgs,
        #[command(flatten)]
        code: CodeArgs,
        /// Auxiliary output distribution as comma-separated masses; defaults
        /// to the capacity-achieving output.
        #[arg(long)]
        qy: Option<String>,
    },
    /// Leading-order normal approximation of the maximal rate.
    NormalApprox {
        #[command(flatten)]
        source: ChannelArgs,
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long)]
        n0: Option<usize>,
    },
    /// Monte Carlo error probability of the learned random code.
    Simulate {
        /// True channel.
        #[arg(long)]
        channel: String,
        /// Train the decoder on this many pairs drawn from the channel;
        /// without it the decoder knows the channel.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: usize,
        /// Number of messages as `log2 M`.
        #[arg(long)]
        log2_m: f64,
        #[arg(long)]
        n0: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Average over this many fresh codebooks.
        #[arg(long)]
        codebooks: Option<usize>,
        #[arg(long)]
        px: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        random_ties: bool,
    },
    /// Empirical check of the statistical reliability of the learned code.
    Verify {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        log2_m: f64,
        #[arg(long)]
        n0: Option<usize>,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        px: Option<String>,
        /// Draw a fresh codebook for every training set.
        #[arg(long)]
        fresh_codebooks: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Achievable, converse and normal-approximation rates over blocklengths.
    Sandwich {
        #[command(flatten)]
        source: ChannelArgs,
        /// Comma-separated blocklengths.
        #[arg(long)]
        ns: String,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
    },
}

#[derive(Debug, Args)]
pub struct TrainingFileArgs {
    #[arg(long)]
    pub training: PathBuf,
    #[arg(long)]
    pub inputs: usize,
    #[arg(long)]
    pub outputs: usize,
}

/// Where the (estimated) channel comes from.
#[derive(Debug, Args)]
pub struct ChannelArgs {
    /// `bsc:p`, `bec:p`, `identity:k`, `uniform:kx,ky`, or a channel file.
    #[arg(long)]
    pub channel: Option<String>,
    /// Estimate the channel from this training file instead.
    #[arg(long, conflicts_with = "channel")]
    pub training: Option<PathBuf>,
    #[arg(long, requires = "training")]
    pub inputs: Option<usize>,
    #[arg(long, requires = "training")]
    pub outputs: Option<usize>,
    /// Draw this many training pairs from `--channel` and use the estimate.
    #[arg(long, requires = "channel")]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CodeArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub eps: f64,
    /// Training size for the learning penalty; defaults to the size of the
    /// training data when the channel is estimated.
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Treat the channel as known: no learning penalty.
    #[arg(long)]
    pub exact: bool,
    /// Input distribution: `caid`, `uniform`, or comma-separated masses.
    #[arg(long)]
    pub px: Option<String>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
}

struct Resolved {
    w: Dmc,
    /// Pairs behind the estimate, if any.
    m: Option<u64>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid {what} `{s}`")))
}

/// Built-in family or channel file path.
pub fn channel_from_spec(spec: &str) -> Result<Dmc, CliError> {
    if let Some((family, arg)) = spec.split_once(':') {
        let w = match family {
            "bsc" | "bec" => {
                let p: f64 = number(arg, "crossover probability")?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(CliError::Usage(format!("probability {p} outside [0, 1]")));
                }
                if family == "bsc" {
                    Dmc::bsc(p)
                } else {
                    Dmc::bec(p)
                }
            }
            "identity" => {
                let k: usize = number(arg, "alphabet size")?;
                if k == 0 {
                    return Err(CliError::Usage("alphabet size must be >= 1".into()));
                }
                Dmc::identity(k)
            }
            "uniform" => {
                let (a, b) = arg
                    .split_once(',')
                    .ok_or_else(|| CliError::Usage("uniform needs `kx,ky`".into()))?;
                let (kx, ky): (usize, usize) = (number(a, "input size")?, number(b, "output size")?);
                if kx == 0 || ky == 0 {
                    return Err(CliError::Usage("alphabet sizes must be >= 1".into()));
                }
                Dmc::uniform(kx, ky)
            }
            _ if Path::new(spec).exists() => return parse_channel_file(&read(Path::new(spec))?),
            _ => return Err(CliError::Usage(format!("unknown channel family `{family}`"))),
        };
        return Ok(w);
    }
    parse_channel_file(&read(Path::new(spec))?)
}

fn resolve(src: &ChannelArgs) -> Result<Resolved, CliError> {
    if let Some(path) = &src.training {
        let (Some(nx), Some(ny)) = (src.inputs, src.outputs) else {
            return Err(CliError::Usage("--training needs --inputs and --outputs".into()));
        };
        let set = parse_training_file(&read(path)?, nx, ny)?;
        return Ok(Resolved {
            m: Some(set.len() as u64),
            w: estimate_empirical_channel(&set),
        });
    }
    let spec = src
        .channel
        .as_deref()
        .ok_or_else(|| CliError::Usage("one of --channel or --training is required".into()))?;
    let w = channel_from_spec(spec)?;
    match src.sample {
        Some(m) => {
            let set = sample_training_set(&w, m, src.seed)?;
            Ok(Resolved {
                m: Some(m as u64),
                w: estimate_empirical_channel(&set),
            })
        }
        None => Ok(Resolved { w, m: None }),
    }
}

fn parse_masses(s: &str) -> Result<Dist, CliError> {
    let v = s
        .split(',')
        .map(|t| number::<f64>(t, "probability"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dist::new(v)?)
}

fn input_dist(spec: Option<&str>, w: &Dmc, cd: impl FnOnce() -> Result<Dist, CliError>) -> Result<Dist, CliError> {
    let d = match spec {
        None | Some("caid") => cd()?,
        Some("uniform") => Dist::uniform(w.num_inputs()),
        Some(list) => parse_masses(list)?,
    };
    if d.len() != w.num_inputs() {
        return Err(fblearn_core::Error::DimensionMismatch {
            expected: w.num_inputs(),
            found: d.len(),
        }
        .into());
    }
    Ok(d)
}

fn budget(code: &CodeArgs, resolved: &Resolved) -> Result<Option<TrainingBudget>, CliError> {
    if code.exact {
        return Ok(None);
    }
    match code.m.or(resolved.m) {
        Some(m) => Ok(Some(TrainingBudget::new(m, code.delta)?)),
        None => Ok(None),
    }
}

fn rcu_options(code: &CodeArgs, seed: u64) -> RcuOptions {
    let mut o = RcuOptions {
        seed,
        ..RcuOptions::default()
    };
    if let Some(k) = code.mc_samples {
        o.mc_samples = k;
    }
    o
}

/// Dispersion-optimal capacity-achieving input for `eps`; one half has no
/// preferred extreme and takes the minimum.
fn caid(cd: &CapacityDispersion, eps: f64) -> Dist {
    if eps > 0.5 {
        cd.caid_max.clone()
    } else {
        cd.caid_min.clone()
    }
}

/// Two-column `quantity,value` table.
struct Table {
    rows: Vec<(String, String)>,
}

impl Table {
    fn new() -> Self {
        Table { rows: Vec::new() }
    }

    fn num(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.rows.push((key.into(), fmt_num(v)));
        self
    }

    fn text(&mut self, key: impl Into<String>, v: impl ToString) -> &mut Self {
        self.rows.push((key.into(), v.to_string()));
        self
    }

    fn dist(&mut self, prefix: &str, d: &Dist) -> &mut Self {
        for (i, &p) in d.as_slice().iter().enumerate() {
            self.num(format!("{prefix}_{i}"), p);
        }
        self
    }

    fn render(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "value"])?;
        for (k, v) in &self.rows {
            w.write_record([k, v])?;
        }
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("fields are utf-8"))
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Exact => "exact",
        Method::MonteCarlo => "monte_carlo",
    }
}

fn counts_text(counts: &[usize]) -> String {
    counts.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

/// Runs one command and returns its CSV output.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Estimate { training, write_channel } => {
            let set = parse_training_file(&read(&training.training)?, training.inputs, training.outputs)?;
            let w = estimate_empirical_channel(&set);
            if let Some(path) = write_channel {
                std::fs::write(path, write_channel_file(&w)).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
            }
            let mut out = csv::Writer::from_writer(Vec::new());
            out.write_record(["x", "y", "probability"])?;
            for x in 0..w.num_inputs() {
                for y in 0..w.num_outputs() {
                    out.write_record([x.to_string(), y.to_string(), fmt_num(w.prob(x, y))])?;
                }
            }
            let s = finish(out)?;
            if !w.unvisited_inputs().is_empty() {
                eprintln!("warning: inputs never observed: {:?}", w.unvisited_inputs());
            }
            Ok(s)
        }
        Command::Sample { channel, m, seed } => {
            let w = channel_from_spec(channel)?;
            Ok(write_training_file(&sample_training_set(&w, *m, *seed)?))
        }
        Command::Capacity { source } => {
            let r = resolve(source)?;
            let est = blahut_arimoto(&r.w, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;
            Table::new()
                .num("capacity_bits", est.capacity)
                .num("upper_bound_bits", est.upper_bound)
                .text("iterations", est.iterations)
                .dist("caid", &est.caid_witness)
                .dist("caod", &est.caod)
                .render()
        }
        Command::Dispersion { source, eps } => {
            let r = resolve(source)?;
            let cd = capacity_dispersion(&r.w)?;
            let mut t = Table::new();
            t.num("capacity_bits", cd.capacity)
                .num("dispersion_min", cd.dispersion_min)
                .num("dispersion_max", cd.dispersion_max)
                .text("unique_caid", cd.unique_caid)
                .text("zero_dispersion_warning", cd.zero_dispersion_warning());
            if let Some(e) = eps {
                let v = if *e == 0.5 {
                    eprintln!("warning: eps = 1/2 selects no extreme; reporting the minimum dispersion");
                    cd.dispersion_min
                } else {
                    cd.dispersion_for(*e)?
                };
                t.num("dispersion_eps", v);
            }
            t.render()
        }
        Command::Achieve { source, code, rate, n0 } => {
            let r = resolve(source)?;
            let px = input_dist(code.px.as_deref(), &r.w, || {
                Ok(caid(&capacity_dispersion(&r.w)?, code.eps))
            })?;
            let mut p = BoundParams::new(code.n, *rate, code.eps)?;
            if let Some(t) = budget(code, &r)? {
                p = p.with_training(t);
            }
            if let Some(k) = n0 {
                p = p.with_n0(*k)?;
            }
            let res = rcu_learning_bound_with(&r.w, &px, &p, &rcu_options(code, source.seed))?;
            let mut t = Table::new();
            t.num("error_upper_bound", res.error_upper_bound)
                .text("best_n0", res.best_n0)
                .num("first_term", res.first_term)
                .num("penalty_term", res.penalty_term)
                .num("raw_sum", res.raw_sum)
                .text("method", method_name(res.method));
            if let Some(se) = res.mc_std_error {
                t.num("mc_std_error", se);
            }
            t.render()
        }
        Command::MaxRate { source, code } => {
            let r = resolve(source)?;
            let px = input_dist(code.px.as_deref(), &r.w, || {
                Ok(caid(&capacity_dispersion(&r.w)?, code.eps))
            })?;
            let training = budget(code, &r)?;
            let rate = max_rate_achievable_with(&r.w, &px, code.n, code.eps, training, &rcu_options(code, source.seed))?;
            Table::new()
                .num("max_rate_bits", rate)
                .num("log2_m", rate * code.n as f64)
                .render()
        }
        Command::Converse { source, code, qy } => {
            let r = resolve(source)?;
            let qy = match qy {
                Some(s) => parse_masses(s)?,
                None => blahut_arimoto(&r.w, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?.caod,
            };
            let res = converse_bound(&r.w, code.n, code.eps, budget(code, &r)?, &qy)?;
            Table::new()
                .num("log2_m_upper", res.log2_m_upper)
                .num("rate_upper", res.rate(code.n))
                .num("alpha", res.alpha_used)
                .num("kappa", res.kappa)
                .num("beta", res.beta)
                .text("vacuous", res.vacuous)
                .text("heuristic", res.heuristic)
                .text("composition", counts_text(&res.best_composition))
                .render()
        }
        Command::NormalApprox { source, code, n0 } => {
            let r = resolve(source)?;
            let cd = capacity_dispersion(&r.w)?;
            let training = budget(code, &r)?;
            let n0 = n0.unwrap_or(code.n);
            let ap = r.w.alphabet_product();
            let res = normal_approx_rate_partial(&cd, code.n, n0, code.eps, training, ap)?;
            let moments = info_density_moments(&r.w, &caid(&cd, code.eps))?;
            let mut t = Table::new();
            t.num("rate", res.rate)
                .num("capacity_term", res.capacity_term)
                .num("dispersion_term", res.dispersion_term)
                .text("condition_ok", res.condition_ok)
                .num("min_n_hint", res.min_n_hint)
                .text("small_n_warning", res.small_n_warning(code.n));
            if let Ok(radius) = berry_esseen_radius(&moments, n0) {
                t.num("berry_esseen_radius", radius);
            }
            if let Some(b) = training {
                t.text("max_blocklength", max_blocklength(b.m, ap, b.delta)?);
            }
            t.render()
        }
        Command::Simulate {
            channel,
            m,
            n,
            log2_m,
            n0,
            trials,
            codebooks,
            px,
            seed,
            random_ties,
        } => {
            let w = channel_from_spec(channel)?;
            let w_hat = match m {
                Some(m) => estimate_empirical_channel(&sample_training_set(&w, *m, *seed)?),
                None => w.clone(),
            };
            let px = input_dist(px.as_deref(), &w_hat, || Ok(Dist::uniform(w_hat.num_inputs())))?;
            let n0 = n0.unwrap_or(*n);
            let mut t = Table::new();
            match codebooks {
                Some(k) => {
                    let e = simulate_ensemble(&w, &w_hat, &px, *log2_m, *n, n0, *k, *trials, *seed)?;
                    t.num("error_estimate", e.mean_error)
                        .num("std_error", e.std_error)
                        .text("codebooks", k)
                        .text("trials_per_codebook", trials);
                }
                None => {
                    let cb = generate_codebook(&px, *log2_m, *n, n0, *seed)?;
                    let opts = SimOptions {
                        random_ties: *random_ties,
                    };
                    let s = simulate_error_prob_with(&w, &w_hat, &cb, *trials, *seed, opts)?;
                    t.num("error_estimate", s.error_estimate)
                        .num("std_error", s.std_error)
                        .text("trials", s.trials)
                        .text("m0", cb.m0())
                        .text("l_factor", cb.l_factor());
                }
            }
            t.text("seed", seed).render()
        }
        Command::Verify {
            channel,
            m,
            n,
            log2_m,
            n0,
            eps,
            delta,
            draws,
            trials,
            px,
            fresh_codebooks,
            seed,
        } => {
            let w = channel_from_spec(channel)?;
            let px = input_dist(px.as_deref(), &w, || Ok(Dist::uniform(w.num_inputs())))?;
            let cfg = ReliabilityConfig {
                m: *m,
                log2_m: *log2_m,
                n: *n,
                n0: n0.unwrap_or(*n),
                px,
                epsilon: *eps,
                delta: *delta,
                training_draws: *draws,
                trials_per_draw: *trials,
                fixed_codebook: !fresh_codebooks,
            };
            let r = verify_reliability(&w, &cfg, *seed)?;
            Table::new()
                .num("fraction_within_eps", r.fraction_within)
                .num("fraction_sigma", r.fraction_sigma)
                .num("mean_error", r.mean_error)
                .num("mean_sigma", r.mean_sigma)
                .text("fraction_ok", r.fraction_ok)
                .text("mean_ok", r.mean_ok)
                .text("passed", r.passed())
                .render()
        }
        Command::Sandwich {
            source,
            ns,
            eps,
            m,
            delta,
        } => {
            let r = resolve(source)?;
            let ns = ns
                .split(',')
                .map(|t| number::<usize>(t, "blocklength"))
                .collect::<Result<Vec<_>, _>>()?;
            let cd = capacity_dispersion(&r.w)?;
            let training = match m.or(r.m) {
                Some(m) => Some(TrainingBudget::new(m, *delta)?),
                None => None,
            };
            let px = caid(&cd, *eps);
            let ap = r.w.alphabet_product();
            let mut out = csv::Writer::from_writer(Vec::new());
            out.write_record(["n", "achievable_rate", "converse_rate", "normal_approx_rate", "kappa", "condition_ok"])?;
            for &n in &ns {
                let ach = max_rate_achievable_with(&r.w, &px, n, *eps, training, &RcuOptions {
                    seed: source.seed,
                    ..RcuOptions::default()
                })?;
                let conv = converse_bound(&r.w, n, *eps, training, &cd.caod)?;
                let na = normal_approx_rate_partial(&cd, n, n, *eps, training, ap)?;
                let kappa = match training {
                    Some(t) => tv_penalty(&PenaltyParams::new(t.m, ap, t.delta, n)?),
                    None => 0.0,
                };
                out.write_record([
                    n.to_string(),
                    fmt_num(ach),
                    fmt_num(conv.rate(n)),
                    fmt_num(na.rate),
                    fmt_num(kappa),
                    na.condition_ok.to_string(),
                ])?;
            }
            finish(out)
        }
    }
}

/// Sizes the global worker pool from `FBLEARN_THREADS`; unset means automatic.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("FBLEARN_THREADS") {
        let k: usize = number(&v, "FBLEARN_THREADS")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}
