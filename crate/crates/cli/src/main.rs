use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use amqcfa_core::compose::{analyze_all_strategies, compose};
use amqcfa_core::history::{
    analyze_history_protocol, build_history_verifier, build_ntm_history_verifier, honest_history,
    HistoryVerifier, HistoryVerifierParams, StreamProver,
};
use amqcfa_core::knapsack::{
    analyze, best_effort_strategy, enumerate_strategies, is_member, parse_instance,
    KnapsackVerifier, StrategyProver, STRATEGY_CAP,
};
use amqcfa_core::machine::{
    chi_square_test, run_exact, run_sampled, sample_step, sample_superoperator, Limits, StepKind,
};
use amqcfa_core::report::{
    CompositionReport, HistoryReport, IterationSampleReport, KnapsackReport, StepSampleReport,
    SuperoperatorReport, SCHEMA,
};
use amqcfa_core::superop::{coin_flip, complete, parse_payloads, Denominator, Superoperator};
use amqcfa_core::turing::{validate_history, HistoryVerdict, TmSpec};
use amqcfa_core::Error;

const ALPHA: f64 = 0.001;

#[derive(Parser)]
#[command(
    name = "amqcfa",
    version,
    about = "Exact analysis of rational-amplitude interactive verifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Superoperator construction and checking.
    #[command(subcommand)]
    Sop(SopCommand),
    /// The alternating knapsack game.
    #[command(subcommand)]
    Knapsack(KnapsackCommand),
    /// Deterministic machines and their history protocol.
    #[command(subcommand)]
    Tm(TmCommand),
    /// History protocol with prover-chosen branches.
    #[command(subcommand)]
    Ntm(NtmCommand),
    /// History protocol for a reducer composed with the knapsack verifier.
    #[command(subcommand)]
    Compose(ComposeCommand),
    /// Sampled outcome frequencies checked against exact probabilities.
    Sample(SampleArgs),
}

#[derive(Subcommand)]
enum SopCommand {
    /// Complete main payloads into a superoperator.
    Complete {
        payloads: PathBuf,
        /// Denominator: `auto` or a positive integer.
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Check Σ EᵀE = I for a superoperator file.
    Validate {
        superoperator: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum KnapsackCommand {
    /// Decide membership by game-tree search.
    Member {
        instance: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Exact per-iteration and overall probabilities of the verifier.
    Analyze {
        instance: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        /// Analyse every prover strategy instead of the best-effort one.
        #[arg(long)]
        all_strategies: bool,
    },
}

#[derive(Subcommand)]
enum TmCommand {
    /// Print the configuration history of a machine on an input.
    Run {
        machine: PathBuf,
        #[arg(default_value = "")]
        input: String,
        #[arg(long)]
        json: bool,
    },
    /// Analyse the history protocol against the honest or a given history.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum NtmCommand {
    /// Analyse the labelled history protocol.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum ComposeCommand {
    /// Analyse the composed verifier over every bit strategy.
    Analyze(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Denominator: `auto` or a positive integer.
    #[arg(long, default_value = "auto")]
    d: String,
    /// Maximum number of verifier actions on one branch.
    #[arg(long)]
    depth_limit: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    machine: PathBuf,
    #[arg(default_value = "")]
    input: String,
    /// History stream to check instead of the honest one.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Mismatch coefficient (at least 3).
    #[arg(long, default_value_t = 3)]
    coeff: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Coin,
    Knapsack,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    PerStep,
    FullIteration,
}

#[derive(Args)]
struct SampleArgs {
    target: Target,
    /// Instance file (knapsack target only).
    instance: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "per-step")]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Denominator: `auto` or a positive integer (the coin needs D >= 2).
    #[arg(long, default_value = "auto")]
    d: String,
    #[arg(long)]
    depth_limit: Option<usize>,
    #[arg(long)]
    json: bool,
}

enum Failure {
    Args(String),
    File(String, String),
    Core(Error),
    Analysis(&'static str, String),
}

impl Failure {
    fn exit(&self) -> u8 {
        match self {
            Failure::Args(_) => 1,
            Failure::File(..) => 2,
            Failure::Core(e) if is_parse_error(e) => 2,
            Failure::Core(_) | Failure::Analysis(..) => 3,
        }
    }

    fn line(&self) -> String {
        match self {
            Failure::Args(m) => format!("E_ARGS: {m}"),
            Failure::File(code, m) => format!("{code}: {m}"),
            Failure::Core(e) => format!("{}: {e}", e.code()),
            Failure::Analysis(code, m) => format!("{code}: {m}"),
        }
    }
}

fn is_parse_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Syntax { .. }
            | Error::MachineFormat(_)
            | Error::InvalidInputSymbol(_)
            | Error::UnknownSymbol(_)
            | Error::InvalidConfiguration(_)
    )
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult = Result<String, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::File("E_IO".into(), format!("{}: {e}", path.display())))
}

fn denominator(s: &str) -> Result<Denominator, Failure> {
    Denominator::parse(s).ok_or_else(|| Failure::Args(format!("invalid denominator {s:?}")))
}

fn limits(depth: Option<usize>, default: Limits) -> Limits {
    depth.map_or(default, |max_depth| Limits { max_depth })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

fn load_machine(path: &Path) -> Result<TmSpec, Failure> {
    Ok(TmSpec::parse(&read(path)?)?)
}

fn load_instance(path: &Path) -> Result<amqcfa_core::knapsack::KnapsackInstance, Failure> {
    Ok(parse_instance(read(path)?.trim())?)
}

fn sop_complete(payloads: &Path, d: Option<String>, json: bool) -> CliResult {
    let set = parse_payloads(&read(payloads)?)?;
    let d = match d {
        Some(s) => denominator(&s)?,
        None => set
            .denominator
            .map_or(Denominator::Auto, Denominator::Fixed),
    };
    let s = complete(&set.mains, d)?;
    Ok(if json {
        #[derive(Serialize)]
        struct Completed {
            #[serde(flatten)]
            report: SuperoperatorReport,
            superoperator: String,
        }
        to_json(&Completed {
            report: (&s).into(),
            superoperator: s.to_text(),
        })
    } else {
        s.to_text()
    })
}

fn sop_validate(path: &Path, json: bool) -> CliResult {
    let s = Superoperator::parse_text(&read(path)?)?;
    let report = SuperoperatorReport::from(&s);
    if !report.valid {
        return Err(Failure::Analysis(
            Error::InvalidSuperoperator(String::new()).code(),
            "Σ EᵀE differs from the identity".into(),
        ));
    }
    Ok(if json {
        to_json(&report)
    } else {
        format!(
            "valid: {} elements, dim {}, D = {}",
            report.elements, report.dim, report.denominator
        )
    })
}

fn knapsack_member(path: &Path, json: bool) -> CliResult {
    let inst = load_instance(path)?;
    let member = is_member(&inst);
    Ok(if json {
        #[derive(Serialize)]
        struct Membership {
            schema: u32,
            kind: &'static str,
            instance: String,
            rounds: usize,
            member: bool,
        }
        to_json(&Membership {
            schema: SCHEMA,
            kind: "membership",
            instance: inst.text().to_string(),
            rounds: inst.n(),
            member,
        })
    } else {
        (if member { "member" } else { "non-member" }).to_string()
    })
}

fn knapsack_analyze(path: &Path, common: &CommonArgs, all: bool) -> CliResult {
    let inst = load_instance(path)?;
    let a = analyze(
        &inst,
        denominator(&common.d)?,
        all,
        STRATEGY_CAP,
        limits(common.depth_limit, Limits::default()),
    )?;
    let report = KnapsackReport::from(&a);
    Ok(if common.json {
        to_json(&report)
    } else {
        let mut out = format!(
            "instance {} ({} rounds, {}), D = {}\n",
            report.instance,
            report.rounds,
            if report.member {
                "member"
            } else {
                "non-member"
            },
            report.denominator
        );
        for s in &report.strategies {
            out.push_str(&format!(
                "strategy {}: p_accept {} p_reject {} overall reject {}\n",
                s.strategy.as_deref().unwrap_or("-"),
                s.iteration.p_accept.approx,
                s.iteration.p_reject.approx,
                s.outcome
                    .overall_reject
                    .as_ref()
                    .map_or("-", |p| p.approx.as_str())
            ));
        }
        out.push_str(&format!(
            "worst-case rejection {}",
            report.worst_case_rejection.exact
        ));
        out
    })
}

fn tm_run(machine: &Path, input: &str, json: bool) -> CliResult {
    let spec = load_machine(machine)?;
    let text = honest_history(&spec, input, !spec.is_deterministic())?;
    let accepted = matches!(
        validate_history(&spec, input, &text, !spec.is_deterministic()),
        HistoryVerdict::Valid { accepted: true }
    );
    Ok(if json {
        #[derive(Serialize)]
        struct Run {
            schema: u32,
            kind: &'static str,
            input: String,
            history: String,
            accepted: bool,
        }
        to_json(&Run {
            schema: SCHEMA,
            kind: "run",
            input: input.to_string(),
            history: text,
            accepted,
        })
    } else {
        format!("{text}\n{}", if accepted { "accept" } else { "reject" })
    })
}

fn params(spec: TmSpec, args: &VerifyArgs) -> Result<HistoryVerifierParams, Failure> {
    Ok(HistoryVerifierParams::new(spec, &args.input)
        .with_coefficient(args.coeff)
        .with_denominator(denominator(&args.common.d)?))
}

fn history_stream(args: &VerifyArgs) -> Result<Option<StreamProver>, Failure> {
    match &args.history {
        Some(path) => Ok(Some(StreamProver::new(read(path)?.trim()))),
        None => Ok(None),
    }
}

fn verify(args: &VerifyArgs, labelled: bool) -> CliResult {
    let spec = load_machine(&args.machine)?;
    let p = params(spec.clone(), args)?;
    let v: HistoryVerifier = if labelled {
        build_ntm_history_verifier(&p)?
    } else {
        build_history_verifier(&p)?
    };
    let (prover, name) = match history_stream(args)? {
        Some(s) => (s, "given"),
        None => (
            StreamProver::new(&honest_history(&spec, &args.input, labelled)?),
            "honest",
        ),
    };
    let a = analyze_history_protocol(
        &v,
        &prover,
        Some(limits(args.common.depth_limit, v.default_limits())),
    )?;
    let report = HistoryReport::new(&a, &args.input, labelled, name);
    Ok(if args.common.json {
        to_json(&report)
    } else {
        format!(
            "{} history on {:?}, c = {}, D = {}\np_accept {} p_reject {} p_restart {}\noverall accept {} overall reject {}",
            name,
            args.input,
            report.coefficient,
            report.denominator,
            report.iteration.p_accept.approx,
            report.iteration.p_reject.approx,
            report.iteration.p_restart.approx,
            report.outcome.overall_accept.as_ref().map_or("-", |p| p.exact.as_str()),
            report.outcome.overall_reject.as_ref().map_or("-", |p| p.exact.as_str()),
        )
    })
}

fn compose_analyze(args: &VerifyArgs) -> CliResult {
    let spec = load_machine(&args.machine)?;
    let v = compose(&spec, &args.input, args.coeff, denominator(&args.common.d)?)?;
    let prover = match history_stream(args)? {
        Some(s) => s,
        None => StreamProver::new(&v.honest_history()?),
    };
    let inst = parse_instance(&v.reduced_text()?)?;
    let codes: Vec<String> = enumerate_strategies(&inst, STRATEGY_CAP)?
        .iter()
        .map(|s| s.code())
        .collect();
    let r = analyze_all_strategies(
        &v,
        &prover,
        None,
        Some(limits(args.common.depth_limit, v.default_limits())),
    )?;
    let report = CompositionReport::new(&r, &args.input, &codes);
    Ok(if args.common.json {
        to_json(&report)
    } else {
        format!(
            "reduced instance {} ({}), D = {}, {} strategies\nworst-case rejection {}",
            report.reduced,
            if report.member {
                "member"
            } else {
                "non-member"
            },
            report.denominator,
            report.strategies.len(),
            report.worst_case_rejection.exact
        )
    })
}

fn sample(args: &SampleArgs) -> CliResult {
    let d = denominator(&args.d)?;
    let json = |s: String, text: String| if args.json { s } else { text };
    match args.target {
        Target::Coin => {
            if args.mode == Mode::FullIteration {
                return Err(Failure::Args(
                    "the coin has no iteration; use --mode per-step".into(),
                ));
            }
            let d = match d {
                Denominator::Auto => 2,
                Denominator::Fixed(d) => d,
            };
            let coin = coin_flip(4, d)?;
            let start = [1, 0, 0, 0].map(amqcfa_core::exact::rat);
            let s = sample_superoperator(&coin, &start, args.seed, args.samples)?;
            let chi = chi_square_test(&s.counts, &s.probabilities, ALPHA);
            let report = StepSampleReport::new(&s, args.seed, &chi);
            Ok(json(
                to_json(&report),
                format!(
                    "coin D = {d}: chi-square p = {:.4} ({})",
                    chi.p_value,
                    pass(chi.passed)
                ),
            ))
        }
        Target::Knapsack => {
            let path = args
                .instance
                .as_ref()
                .ok_or_else(|| Failure::Args("sample knapsack needs an instance file".into()))?;
            let inst = load_instance(path)?;
            let v = KnapsackVerifier::new(inst.text(), d)?;
            let prover = StrategyProver::new(best_effort_strategy(&inst));
            let lim = limits(args.depth_limit, Limits::default());
            match args.mode {
                Mode::PerStep => {
                    let s = sample_step(
                        &v,
                        &prover,
                        StepKind::Decision,
                        0,
                        args.seed,
                        args.samples,
                        lim,
                    )?;
                    let chi = chi_square_test(&s.counts, &s.probabilities, ALPHA);
                    let report = StepSampleReport::new(&s, args.seed, &chi);
                    Ok(json(
                        to_json(&report),
                        format!(
                            "$-decision: chi-square p = {:.4} ({})",
                            chi.p_value,
                            pass(chi.passed)
                        ),
                    ))
                }
                Mode::FullIteration => {
                    let exact = run_exact(&v, &prover, lim)?;
                    let counts = run_sampled(&v, &prover, args.seed, args.samples, lim)?;
                    let chi = chi_square_test(
                        &[counts.accept, counts.reject, counts.restart],
                        &[
                            exact.p_accept.clone(),
                            exact.p_reject.clone(),
                            exact.p_restart.clone(),
                        ],
                        ALPHA,
                    );
                    let report = IterationSampleReport::new(&exact, &counts, args.seed, &chi);
                    Ok(json(
                        to_json(&report),
                        format!(
                            "accept {} reject {} restart {}: chi-square p = {:.4} ({})",
                            counts.accept,
                            counts.reject,
                            counts.restart,
                            chi.p_value,
                            pass(chi.passed)
                        ),
                    ))
                }
            }
        }
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Sop(SopCommand::Complete { payloads, d, json }) => {
            sop_complete(&payloads, d, json)
        }
        Command::Sop(SopCommand::Validate {
            superoperator,
            json,
        }) => sop_validate(&superoperator, json),
        Command::Knapsack(KnapsackCommand::Member { instance, json }) => {
            knapsack_member(&instance, json)
        }
        Command::Knapsack(KnapsackCommand::Analyze {
            instance,
            common,
            all_strategies,
        }) => knapsack_analyze(&instance, &common, all_strategies),
        Command::Tm(TmCommand::Run {
            machine,
            input,
            json,
        }) => tm_run(&machine, &input, json),
        Command::Tm(TmCommand::Verify(args)) => verify(&args, false),
        Command::Ntm(NtmCommand::Verify(args)) => verify(&args, true),
        Command::Compose(ComposeCommand::Analyze(args)) => compose_analyze(&args),
        Command::Sample(args) => sample(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            eprintln!("error: E_ARGS: invalid arguments");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(out) => {
            println!("{}", out.trim_end());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.line());
            ExitCode::from(f.exit())
        }
    }
}
