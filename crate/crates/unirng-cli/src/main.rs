//! `unirng` — uniform random integers from samples of an unknown
//! finite-memory source, plus the experiment and audit harness around the
//! generators.
//!
//! Conventions shared by all subcommands:
//!
//! - models are JSON files (`{"alpha": 2, "k": 0, "cond": [[0.3, 0.7]]}`,
//!   optional `"s0"` initial state);
//! - symbol streams are raw bytes, one symbol per byte (byte value = symbol
//!   value); `-` reads standard input;
//! - targets: `int` (any range), `pow2`, `pow:P` (powers of `P`), or
//!   `list:FILE` (one admissible range per line, must include 1);
//! - CSV artifacts start with `#` metadata comments (tool version, schema,
//!   model hash, seed, command line) and rerunning the same command line
//!   reproduces them byte for byte.
//!
//! Exit codes: 0 success, 1 a requested check failed, 2 configuration or
//! input error.

use std::env;
use std::fs;
use std::io::Read as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use unirng::fvr::{self, ExplicitTarget, TargetSet};
use unirng::twice_universal::{
    distance_to_uniformity, estimate_order, extract_exact, extract_practical,
    overestimation_probability, underestimation_probability, EstimatorConfig, PenaltyFn, Scheme,
};
use unirng::types::{all_types, DEFAULT_BRUTE_FORCE_BOUND};
use unirng::vfr::{self, VfrOutcome};
use unirng::{ClassSizeCache, Error, MarkovParams, ModelSpec, Result, Symbol, TypeCounts};
use unirng_cli::asymptotics::{run_fv_asymptotics, run_vf_asymptotics};
use unirng_cli::report::{emit, model_hash, render_csv, RunMetadata};
use unirng_cli::selftest::{run_selftest, SOFT_TIME_LIMIT_SECS};
use unirng_cli::uniformity::{
    exact_fv_audit, exact_vf_audit, sampled_fv_uniformity, sampled_vf_uniformity,
};

const ENV_BRUTE_BOUND: &str = "UNIRNG_BRUTE_BOUND";
/// Sampled-mode verdicts flag only gross bias: a chi-square p-value below
/// this is a failure, anything above is merely reported.
const SMOKE_P_FLOOR: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "unirng",
    version,
    about = "Perfectly uniform random integers from samples of an unknown finite-memory source"
)]
struct Cli {
    /// Cap on exhaustive enumerations (overrides UNIRNG_BRUTE_BOUND; default 2^22).
    #[arg(long, global = true)]
    brute_bound: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert one n-block into a uniform integer; prints "value range".
    Fv {
        /// Source model JSON file.
        #[arg(long)]
        model: PathBuf,
        /// Block length.
        #[arg(long)]
        n: usize,
        /// Admissible output ranges: int, pow2, pow:P, or list:FILE.
        #[arg(long, default_value = "int")]
        target: String,
        /// Prime the conditioning state from the first k stream symbols
        /// instead of the model's initial state.
        #[arg(long)]
        sync_state: bool,
        /// Symbol stream: file of raw bytes, or - for stdin.
        #[arg(long = "in", default_value = "-")]
        input: String,
        /// Also print the value as base-P digits (power targets only).
        #[arg(long)]
        digits: bool,
    },
    /// Model-free conversion via order estimation; prints "value range k_hat".
    FvTu {
        /// Alphabet size.
        #[arg(long)]
        alpha: usize,
        /// Block length.
        #[arg(long)]
        n: usize,
        /// exact (uniform per agreement class) or practical (plug-in order).
        #[arg(long, default_value = "practical")]
        variant: String,
        /// Order-estimation penalty: mdl, or c:VALUE for a constant.
        #[arg(long, default_value = "mdl")]
        phi: String,
        /// Ceiling on the estimated order (default floor(log_alpha n) - 1).
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long, default_value = "int")]
        target: String,
        #[arg(long = "in", default_value = "-")]
        input: String,
    },
    /// Consume a stream until one uniform draw from 0..M can be emitted;
    /// prints "value length", or "FAIL length" if truncated.
    Vf {
        #[arg(long)]
        model: PathBuf,
        /// Output range.
        #[arg(long = "M", alias = "m")]
        m: u64,
        /// Truncation depth: report FAIL after this many symbols.
        #[arg(long)]
        max_len: Option<u64>,
        /// Prime the conditioning state from the first k stream symbols.
        #[arg(long)]
        sync_state: bool,
        #[arg(long = "in", default_value = "-")]
        input: String,
    },
    /// CSV: block entropy vs expected output length over block lengths.
    #[command(alias = "fv-analyze")]
    AnalyzeFv {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated ascending block lengths.
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<u64>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV: exact failure series for one M, or the Monte Carlo
    /// entropy-overhead sweep across several.
    #[command(alias = "vf-analyze")]
    AnalyzeVf {
        #[arg(long)]
        model: PathBuf,
        /// Single output range: emit (n, p_fail, truncated expected length).
        #[arg(long = "M", alias = "m", conflicts_with = "m_list")]
        m: Option<u64>,
        /// Comma-separated ascending ranges: emit the overhead sweep.
        #[arg(long, value_delimiter = ',')]
        m_list: Vec<u64>,
        /// Truncation depth (series mode: largest n).
        #[arg(long, default_value_t = 64)]
        max_len: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Fill the exact cross-check column for M up to this value.
        #[arg(long, default_value_t = 64)]
        exact_cutoff: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List all type classes at a block length (CSV), or describe one
    /// sequence's class.
    Enumerate {
        #[arg(long)]
        alpha: usize,
        /// Markov order (zero initial state).
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: u64,
        /// Comma-separated symbols: describe this sequence instead.
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit output uniformity, exhaustively or by sampling.
    Uniformity(UniformityArgs),
    /// Run every exact invariant suite at desk scale.
    Selftest,
}

#[derive(Args)]
struct UniformityArgs {
    /// fv, fv-tu-exact, fv-tu-practical, or vf.
    #[arg(long)]
    scheme: String,
    /// exact (exhaustive, zero tolerance) or sampled (chi-square smoke test).
    #[arg(long, default_value = "exact")]
    mode: String,
    /// Source model JSON (fv/vf schemes, every sampled run, and the
    /// fv-tu-practical exact distance bound).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Alphabet size (model-free fv-tu-exact audit).
    #[arg(long)]
    alpha: Option<usize>,
    /// Block length (fixed-to-variable schemes).
    #[arg(long)]
    n: Option<usize>,
    /// Output range (vf scheme).
    #[arg(long = "M", alias = "m")]
    m: Option<u64>,
    /// Truncation depth (vf scheme).
    #[arg(long, default_value_t = 48)]
    max_len: u64,
    #[arg(long, default_value = "int")]
    target: String,
    #[arg(long, default_value = "mdl")]
    phi: String,
    #[arg(long)]
    k_max: Option<usize>,
    /// Sampled mode: trial count (raised if too small for the range).
    #[arg(long, default_value_t = 2000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let bound = resolve_bound(cli.brute_bound)?;
    let cmdline = env::args().collect::<Vec<_>>().join(" ");
    let pass = match cli.command {
        Command::Fv {
            model,
            n,
            target,
            sync_state,
            input,
            digits,
        } => {
            cmd_fv(&model, n, &target, sync_state, &input, digits)?;
            true
        }
        Command::FvTu {
            alpha,
            n,
            variant,
            phi,
            k_max,
            target,
            input,
        } => {
            cmd_fv_tu(alpha, n, &variant, &phi, k_max, &target, &input)?;
            true
        }
        Command::Vf {
            model,
            m,
            max_len,
            sync_state,
            input,
        } => {
            cmd_vf(&model, m, max_len, sync_state, &input)?;
            true
        }
        Command::AnalyzeFv {
            model,
            n_list,
            trials,
            seed,
            out,
        } => {
            cmd_analyze_fv(&model, &n_list, trials, seed, out.as_deref(), &cmdline)?;
            true
        }
        Command::AnalyzeVf {
            model,
            m,
            m_list,
            max_len,
            trials,
            seed,
            exact_cutoff,
            out,
        } => {
            cmd_analyze_vf(
                &model,
                m,
                &m_list,
                max_len,
                trials,
                seed,
                exact_cutoff,
                out.as_deref(),
                &cmdline,
            )?;
            true
        }
        Command::Enumerate { alpha, k, n, x, out } => {
            cmd_enumerate(alpha, k, n, x.as_deref(), out.as_deref(), &cmdline)?;
            true
        }
        Command::Uniformity(args) => cmd_uniformity(&args, bound, &cmdline)?,
        Command::Selftest => cmd_selftest()?,
    };
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn resolve_bound(flag: Option<u64>) -> Result<u64> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match env::var(ENV_BRUTE_BOUND) {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("bad {ENV_BRUTE_BOUND} value {text:?}"))),
        Err(env::VarError::NotPresent) => Ok(DEFAULT_BRUTE_FORCE_BOUND),
        Err(e) => Err(Error::Config(format!("cannot read {ENV_BRUTE_BOUND}: {e}"))),
    }
}

fn load_model(path: &std::path::Path) -> Result<MarkovParams> {
    let text = fs::read_to_string(path)?;
    MarkovParams::from_json(&text)
}

fn read_stream(path: &str) -> Result<Vec<Symbol>> {
    if path == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf)?;
        Ok(buf)
    } else {
        Ok(fs::read(path)?)
    }
}

fn take_block(stream: &[Symbol], need: usize) -> Result<&[Symbol]> {
    stream.get(..need).ok_or_else(|| {
        Error::Config(format!(
            "stream supplies {} symbols but {need} are needed",
            stream.len()
        ))
    })
}

fn parse_target(s: &str) -> Result<TargetSet> {
    match s {
        "int" => Ok(TargetSet::AllIntegers),
        "pow2" => Ok(TargetSet::PowersOf(2)),
        _ => {
            if let Some(p) = s.strip_prefix("pow:") {
                let p = p
                    .parse::<u64>()
                    .ok()
                    .filter(|&p| p >= 2)
                    .ok_or_else(|| Error::Config(format!("bad power base {p:?}")))?;
                Ok(TargetSet::PowersOf(p))
            } else if let Some(path) = s.strip_prefix("list:") {
                let text = fs::read_to_string(path)?;
                let mut values = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let v = line.parse::<BigUint>().map_err(|_| {
                        Error::Config(format!("bad target value {line:?} on line {}", i + 1))
                    })?;
                    values.push(v);
                }
                Ok(TargetSet::Explicit(ExplicitTarget::new(values)?))
            } else {
                Err(Error::Config(format!(
                    "unknown target {s:?} (expected int, pow2, pow:P, or list:FILE)"
                )))
            }
        }
    }
}

fn parse_phi(s: &str) -> Result<PenaltyFn> {
    if s == "mdl" {
        return Ok(PenaltyFn::Mdl);
    }
    if let Some(v) = s.strip_prefix("c:") {
        let c = v
            .parse::<f64>()
            .ok()
            .filter(|c| c.is_finite() && *c >= 0.0)
            .ok_or_else(|| Error::Config(format!("bad penalty constant {v:?}")))?;
        return Ok(PenaltyFn::Const(c));
    }
    Err(Error::Config(format!(
        "unknown penalty {s:?} (expected mdl or c:VALUE)"
    )))
}

fn parse_symbols(text: &str) -> Result<Vec<Symbol>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<Symbol>()
                .map_err(|_| Error::Config(format!("bad symbol {part:?}")))
        })
        .collect()
}

fn cmd_fv(
    model: &std::path::Path,
    n: usize,
    target: &str,
    sync_state: bool,
    input: &str,
    digits: bool,
) -> Result<()> {
    let params = load_model(model)?;
    let target = parse_target(target)?;
    let stream = read_stream(input)?;
    let cache = ClassSizeCache::new();
    let out = if sync_state {
        let k = params.spec().order();
        let x = take_block(&stream, k + n)?;
        fvr::generate_synchronized(x, params.spec().alpha(), k, &target, &cache)?
    } else {
        let x = take_block(&stream, n)?;
        fvr::generate(x, params.spec(), &target, &cache)?
    };
    println!("{} {}", out.value, out.range);
    if digits {
        let p = match &target {
            TargetSet::PowersOf(p) => *p,
            _ => {
                return Err(Error::Config(
                    "--digits requires a pow2 or pow:P target".into(),
                ))
            }
        };
        let ds = out.digits(p).expect("power target yields a power range");
        let joined: Vec<String> = ds.iter().map(u64::to_string).collect();
        println!("digits {}", joined.join(" "));
    }
    Ok(())
}

fn cmd_fv_tu(
    alpha: usize,
    n: usize,
    variant: &str,
    phi: &str,
    k_max: Option<usize>,
    target: &str,
    input: &str,
) -> Result<()> {
    let cfg = EstimatorConfig {
        alpha,
        k_max,
        penalty: parse_phi(phi)?,
    };
    let target = parse_target(target)?;
    let stream = read_stream(input)?;
    let x = take_block(&stream, n)?;
    let cache = ClassSizeCache::new();
    let out = match variant {
        "exact" => extract_exact(x, &cfg, &target, &cache)?,
        "practical" => extract_practical(x, &cfg, &target, &cache)?,
        _ => {
            return Err(Error::Config(format!(
                "unknown variant {variant:?} (expected exact or practical)"
            )))
        }
    };
    println!("{} {} {}", out.output.value, out.output.range, out.k_hat);
    Ok(())
}

fn cmd_vf(
    model: &std::path::Path,
    m: u64,
    max_len: Option<u64>,
    sync_state: bool,
    input: &str,
) -> Result<()> {
    let params = load_model(model)?;
    let stream = read_stream(input)?;
    let cache = ClassSizeCache::new();
    let outcome = if sync_state {
        vfr::run_synchronized(
            params.spec().alpha(),
            params.spec().order(),
            m,
            max_len,
            stream.iter().copied(),
            &cache,
        )?
    } else {
        vfr::run_sequential(params.spec(), m, max_len, stream.iter().copied(), &cache)?
    };
    match outcome {
        VfrOutcome::Stopped { value, len } => println!("{value} {len}"),
        VfrOutcome::Failed { len } => println!("FAIL {len}"),
    }
    Ok(())
}

fn float(v: f64) -> String {
    format!("{v}")
}

fn cmd_analyze_fv(
    model: &std::path::Path,
    n_list: &[u64],
    trials: u64,
    seed: u64,
    out: Option<&std::path::Path>,
    cmdline: &str,
) -> Result<()> {
    let params = load_model(model)?;
    let report = run_fv_asymptotics(&params, n_list, trials, seed)?;
    let meta = RunMetadata {
        model_hash: Some(model_hash(&params)),
        seed: Some(seed),
        cmdline: cmdline.to_string(),
    };
    let mut comments = vec![format!("# trials: {trials}")];
    if let Some(fit) = &report.fit {
        comments.push(format!(
            "# gap-vs-log2n fit: slope={} intercept={} r2={}",
            float(fit.slope),
            float(fit.intercept),
            float(fit.r_squared)
        ));
    }
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                float(r.block_entropy),
                float(r.mean_log_class),
                float(r.std_err),
                float(r.gap),
            ]
        })
        .collect();
    let text = render_csv(
        &meta,
        &comments,
        &[
            "n",
            "block_entropy_bits",
            "mean_log2_class_size",
            "std_err",
            "gap_bits",
        ],
        &rows,
    );
    emit(out, &text)
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze_vf(
    model: &std::path::Path,
    m: Option<u64>,
    m_list: &[u64],
    max_len: u64,
    trials: u64,
    seed: u64,
    exact_cutoff: u64,
    out: Option<&std::path::Path>,
    cmdline: &str,
) -> Result<()> {
    let params = load_model(model)?;
    let cache = ClassSizeCache::new();
    let text = if let Some(m) = m {
        // Exact series mode: no sampling, hence no seed in the metadata.
        let series = vfr::failure_series(&params, m, max_len, &cache)?;
        let meta = RunMetadata {
            model_hash: Some(model_hash(&params)),
            seed: None,
            cmdline: cmdline.to_string(),
        };
        let mut rows = Vec::with_capacity(series.len());
        let mut partial = 0.0f64;
        for (n, p) in series.iter().enumerate() {
            partial += p;
            rows.push(vec![n.to_string(), float(*p), float(partial)]);
        }
        render_csv(
            &meta,
            &[format!("# M: {m}")],
            &["n", "p_fail", "expected_len_truncated_at_n_plus_1"],
            &rows,
        )
    } else {
        if m_list.is_empty() {
            return Err(Error::Config(
                "provide --M for the exact series or --m-list for the sweep".into(),
            ));
        }
        let report =
            run_vf_asymptotics(&params, m_list, max_len, trials, seed, exact_cutoff, &cache)?;
        let meta = RunMetadata {
            model_hash: Some(model_hash(&params)),
            seed: Some(seed),
            cmdline: cmdline.to_string(),
        };
        let comments = vec![
            format!("# trials: {trials}"),
            format!("# depth: {max_len}"),
            format!("# entropy-rate-bits: {}", float(report.entropy_rate)),
        ];
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.m.to_string(),
                    float(r.mean_len),
                    float(r.std_err),
                    r.failures.to_string(),
                    float(r.delta),
                    r.exact_len.map(float).unwrap_or_default(),
                ]
            })
            .collect();
        render_csv(
            &meta,
            &comments,
            &[
                "m",
                "mean_len",
                "std_err",
                "failures",
                "delta_bits",
                "exact_len",
            ],
            &rows,
        )
    };
    emit(out, &text)
}

fn cmd_enumerate(
    alpha: usize,
    k: usize,
    n: u64,
    x: Option<&str>,
    out: Option<&std::path::Path>,
    cmdline: &str,
) -> Result<()> {
    let spec = ModelSpec::with_zero_state(alpha, k)?;
    let cache = ClassSizeCache::new();
    let meta = RunMetadata {
        model_hash: None,
        seed: None,
        cmdline: cmdline.to_string(),
    };
    let text = if let Some(text) = x {
        let x = parse_symbols(text)?;
        if x.len() as u64 != n {
            return Err(Error::Config(format!(
                "--x has {} symbols but --n is {n}",
                x.len()
            )));
        }
        let t = TypeCounts::counts_of(&x, &spec)?;
        let size = cache.class_size(&t);
        let r = unirng::types::rank(&x, &spec, &cache)?;
        let k_hat = estimate_order(&x, &EstimatorConfig::mdl(alpha))?.k_hat;
        let row = vec![
            encode_symbols(&x),
            size.to_string(),
            r.to_string(),
            encode_symbols(t.final_state()),
            k_hat.to_string(),
        ];
        render_csv(
            &meta,
            &[],
            &["x", "class_size", "rank", "final_state", "k_hat_mdl"],
            &[row],
        )
    } else {
        let types = all_types(&spec, n)?;
        let rows: Vec<Vec<String>> = types
            .iter()
            .enumerate()
            .map(|(i, t)| {
                vec![
                    i.to_string(),
                    cache.class_size(t).to_string(),
                    encode_symbols(t.final_state()),
                    encode_counts(t),
                ]
            })
            .collect();
        render_csv(
            &meta,
            &[format!("# classes: {}", rows.len())],
            &["index", "class_size", "final_state", "counts"],
            &rows,
        )
    };
    emit(out, &text)
}

/// Symbols joined by `.` — unambiguous for any alphabet size.
fn encode_symbols(x: &[Symbol]) -> String {
    let parts: Vec<String> = x.iter().map(|s| s.to_string()).collect();
    parts.join(".")
}

/// Transition counts as `state.symbol:count` triples joined by `;`.
fn encode_counts(t: &TypeCounts) -> String {
    let parts: Vec<String> = t
        .iter()
        .map(|((state, symbol), count)| format!("{state}.{symbol}:{count}"))
        .collect();
    parts.join(";")
}

fn cmd_uniformity(args: &UniformityArgs, bound: u64, cmdline: &str) -> Result<bool> {
    let need = |opt: Option<&str>, what: &str| -> Result<()> {
        if opt.is_none() {
            return Err(Error::Config(format!(
                "--{what} is required for scheme {} in {} mode",
                args.scheme, args.mode
            )));
        }
        Ok(())
    };
    let cache = ClassSizeCache::new();
    let target = parse_target(&args.target)?;
    let params = args.model.as_deref().map(load_model).transpose()?;
    let meta = RunMetadata {
        model_hash: params.as_ref().map(model_hash),
        seed: (args.mode == "sampled").then_some(args.seed),
        cmdline: cmdline.to_string(),
    };
    for line in meta.header_lines() {
        println!("{line}");
    }

    let pass = match (args.scheme.as_str(), args.mode.as_str()) {
        ("fv", "exact") => {
            need(params.as_ref().map(|_| ""), "model")?;
            need(args.n.map(|_| ""), "n")?;
            let spec = params.as_ref().expect("checked").spec().clone();
            let report = exact_fv_audit(
                spec.alpha(),
                args.n.expect("checked"),
                bound,
                |x| TypeCounts::counts_of(x, &spec),
                |x| fvr::generate(x, &spec, &target, &cache),
            )?;
            println!(
                "inputs {} cells {} worst-spread {}",
                report.inputs, report.cells, report.worst_spread
            );
            report.pass()
        }
        ("fv-tu-exact", "exact") => {
            need(args.alpha.map(|_| ""), "alpha")?;
            need(args.n.map(|_| ""), "n")?;
            let cfg = EstimatorConfig {
                alpha: args.alpha.expect("checked"),
                k_max: args.k_max,
                penalty: parse_phi(&args.phi)?,
            };
            let report = exact_fv_audit(
                cfg.alpha,
                args.n.expect("checked"),
                bound,
                |x| {
                    let k_hat = estimate_order(x, &cfg)?.k_hat;
                    let spec = ModelSpec::with_zero_state(cfg.alpha, k_hat)?;
                    Ok((k_hat, TypeCounts::counts_of(x, &spec)?))
                },
                |x| Ok(extract_exact(x, &cfg, &target, &cache)?.output),
            )?;
            println!(
                "inputs {} agreement-cells {} worst-spread {}",
                report.inputs, report.cells, report.worst_spread
            );
            report.pass()
        }
        ("fv-tu-practical", "exact") => {
            // The practical variant is not exactly uniform; the exact claim
            // about it is the distance bound via estimation error masses.
            need(params.as_ref().map(|_| ""), "model")?;
            need(args.n.map(|_| ""), "n")?;
            let params = params.as_ref().expect("checked");
            let n = args.n.expect("checked");
            let cfg = EstimatorConfig {
                alpha: params.spec().alpha(),
                k_max: args.k_max,
                penalty: parse_phi(&args.phi)?,
            };
            let d = distance_to_uniformity(
                params,
                n,
                &Scheme::TwiceUniversalPractical,
                &cfg,
                &target,
                &cache,
            )?;
            let p_under = underestimation_probability(params, n, &cfg)?;
            let p_over = overestimation_probability(params, n, &cfg)?;
            let limit = BigRational::from_integer(4.into()) * (&p_under + &p_over);
            println!(
                "distance {} (~{:.6e}) bound {} (~{:.6e})",
                d,
                d.to_f64().unwrap_or(f64::NAN),
                limit,
                limit.to_f64().unwrap_or(f64::NAN)
            );
            d <= limit
        }
        ("vf", "exact") => {
            need(params.as_ref().map(|_| ""), "model")?;
            need(args.m.map(|_| ""), "M")?;
            let spec = params.as_ref().expect("checked").spec().clone();
            let report = exact_vf_audit(&spec, args.m.expect("checked"), args.max_len)?;
            println!(
                "levels {} cells {} worst-spread {} ragged-levels {}",
                report.levels, report.cells, report.worst_spread, report.ragged_levels
            );
            report.pass()
        }
        ("fv" | "fv-tu-exact" | "fv-tu-practical", "sampled") => {
            need(params.as_ref().map(|_| ""), "model")?;
            need(args.n.map(|_| ""), "n")?;
            let params = params.as_ref().expect("checked");
            let n = args.n.expect("checked");
            let cfg = EstimatorConfig {
                alpha: params.spec().alpha(),
                k_max: args.k_max,
                penalty: parse_phi(&args.phi)?,
            };
            let spec = params.spec().clone();
            let scheme = args.scheme.clone();
            let report = sampled_fv_uniformity(params, n, args.trials, args.seed, |x| {
                match scheme.as_str() {
                    "fv" => fvr::generate(x, &spec, &target, &cache),
                    "fv-tu-exact" => Ok(extract_exact(x, &cfg, &target, &cache)?.output),
                    _ => Ok(extract_practical(x, &cfg, &target, &cache)?.output),
                }
            })?;
            let mut ok = true;
            for (m, hist, chi) in &report.per_range {
                let total: u64 = hist.iter().sum();
                match chi {
                    Some(c) => {
                        println!(
                            "range {m}: draws {total} chi2 {:.4} dof {} p {:.6}",
                            c.statistic, c.dof, c.p_value
                        );
                        ok &= c.p_value >= SMOKE_P_FLOOR;
                    }
                    None => println!("range {m}: draws {total} (too few for a test)"),
                }
            }
            ok
        }
        ("vf", "sampled") => {
            need(params.as_ref().map(|_| ""), "model")?;
            need(args.m.map(|_| ""), "M")?;
            let params = params.as_ref().expect("checked");
            let report = sampled_vf_uniformity(
                params,
                args.m.expect("checked"),
                args.max_len,
                args.trials,
                args.seed,
                &cache,
            )?;
            if let Some(w) = &report.warning {
                println!("note: {w}");
            }
            println!(
                "trials {} produced {} failures {}",
                report.trials, report.produced, report.failures
            );
            match &report.chi {
                Some(c) => {
                    println!("chi2 {:.4} dof {} p {:.6}", c.statistic, c.dof, c.p_value);
                    c.p_value >= SMOKE_P_FLOOR
                }
                None => {
                    println!("no draws produced within the depth");
                    false
                }
            }
        }
        _ => {
            return Err(Error::Config(format!(
                "unknown scheme/mode {}/{}",
                args.scheme, args.mode
            )))
        }
    };
    println!("uniformity: {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn cmd_selftest() -> Result<bool> {
    let report = run_selftest()?;
    for check in &report.checks {
        println!(
            "{} {} — {}",
            if check.pass { "ok  " } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    let passed = report.checks.iter().filter(|c| c.pass).count();
    println!(
        "selftest: {passed}/{} checks passed in {:.1}s",
        report.checks.len(),
        report.elapsed_secs
    );
    if report.over_time_budget {
        eprintln!("warning: selftest exceeded the {SOFT_TIME_LIMIT_SECS}s soft budget");
    }
    Ok(report.pass())
}
