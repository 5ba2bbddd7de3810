//! `qfuscate` command-line driver.
//!
//! Exit codes: 0 success, 1 circuits not equivalent (`verify` only), 2 usage
//! or input error, 3 soundness failure (a transform produced a circuit that
//! does not match its input; nothing is written).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qfuscate::metrics::{gate_mode, measure_circuit_run, measure_wrap_run, render_report, Report, ReportFormat};
use qfuscate::passes::{self, default_ruleset, parse_ruleset, verify_ruleset, Method, ObfuscationConfig, PassError, RulesetReport};
use qfuscate::passes::rules::DEFAULT_RULES;
use qfuscate::predicate::{self, PredicateKind, PredicateParams};
use qfuscate::qasm::{emit, parse};
use qfuscate::wrap::{
    self, env_template_dir, extract_payload, list_templates, load_template, resolve_branches, DecoyMode, DecoyPolicy,
    SourceBlock, WrapError,
};
use qfuscate::{equivalent, fixtures, Circuit, EquivalenceMode};
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_EQUIVALENT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOUNDNESS: i32 = 3;

/// Seed used when `--seed` is omitted.
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_INTENSITY: f64 = 0.5;
/// Pair count for `multi_pair` when `--pairs` is omitted.
pub const DEFAULT_PAIRS: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "qfuscate", version, about = "Obfuscate quantum circuits and wrap code behind quantum opaque predicates")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a circuit obfuscation pass; the output is written only if it is equivalent to the input.
    Obfuscate(ObfuscateArgs),
    /// Check two circuits for equivalence.
    Verify(VerifyArgs),
    /// Emit an opaque-predicate circuit and its outcome model.
    Predicate(PredicateArgs),
    /// Wrap a source file behind an opaque predicate.
    Wrap(WrapArgs),
    /// Measure obfuscation overheads.
    Report(ReportArgs),
    /// List available wrap templates.
    Templates(TemplatesArgs),
    /// Verify a cloaked-gate ruleset and print a verdict per rule.
    AuditRules(AuditArgs),
}

#[derive(Debug, Args)]
pub struct ObfuscateArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(short, long)]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_INTENSITY)]
    pub intensity: f64,
    /// Cloaked-gate ruleset file (defaults to the shipped X rules).
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Write a JSON overhead report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// statevector, unitary or distribution. Defaults to unitary up to 10 qubits.
    #[arg(long)]
    pub mode: Option<EquivalenceMode>,
}

#[derive(Debug, Args)]
pub struct PredicateSelect {
    /// Number of Bell pairs for multi_pair.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Decoy-segment seed for branch.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl PredicateSelect {
    fn params(&self, kind: PredicateKind) -> PredicateParams {
        match kind {
            PredicateKind::MultiPair => PredicateParams {
                n_pairs: Some(self.pairs.unwrap_or(DEFAULT_PAIRS)),
                seed: None,
            },
            PredicateKind::Branch => PredicateParams {
                n_pairs: None,
                seed: Some(self.seed.unwrap_or(DEFAULT_SEED)),
            },
            _ => PredicateParams::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct PredicateArgs {
    /// bell, multi_pair, shroud or branch.
    pub kind: PredicateKind,
    #[command(flatten)]
    pub select: PredicateSelect,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Outcome model path (default: output with extension `model.json`).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WrapArgs {
    pub payload: PathBuf,
    #[arg(short = 'p', long = "predicate")]
    pub kind: PredicateKind,
    #[command(flatten)]
    pub select: PredicateSelect,
    /// duplicate_payload, dead_decoy or restart.
    #[arg(long)]
    pub policy: Option<DecoyMode>,
    #[arg(long, default_value_t = 0)]
    pub decoy_seed: u64,
    #[arg(long, default_value_t = 2)]
    pub decoy_statements: usize,
    #[arg(short, long, default_value = "qiskit-python")]
    pub template: String,
    /// Template directory (overrides the QFUSCATE_TEMPLATE_DIR variable).
    #[arg(long)]
    pub template_dir: Option<PathBuf>,
    #[arg(long)]
    pub language: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Manifest path (default: output with extension `manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// QASM files to measure.
    pub inputs: Vec<PathBuf>,
    /// Also measure the built-in benchmark circuits.
    #[arg(long)]
    pub fixtures: bool,
    /// Passes to run (repeatable; default all four).
    #[arg(short, long)]
    pub method: Vec<Method>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_INTENSITY)]
    pub intensity: f64,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// json or table.
    #[arg(long, default_value = "table")]
    pub format: ReportFormat,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TemplatesArgs {
    #[arg(long)]
    pub template_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Ruleset file (defaults to the shipped X rules).
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

/// A failed command: exit code plus message for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn soundness(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_SOUNDNESS,
            message: message.into(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

/// Called on every pass output before the equivalence gate. Only tests install one.
pub type PassHook<'a> = &'a dyn Fn(&mut Circuit);

pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Io<'_> {
    fn warn(&mut self, msg: impl std::fmt::Display) {
        let _ = writeln!(self.err, "warning: {msg}");
    }

    fn note(&mut self, msg: impl std::fmt::Display) {
        let _ = writeln!(self.err, "{msg}");
    }
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_hook(args, None, out, err)
}

pub fn run_with_hook<I, T>(args: I, hook: Option<PassHook>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let mut io = Io { out, err };
    match dispatch(&cli.command, hook, &mut io) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(io.err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: &Command, hook: Option<PassHook>, io: &mut Io) -> CmdResult {
    match cmd {
        Command::Obfuscate(a) => cmd_obfuscate(a, hook, io),
        Command::Verify(a) => cmd_verify(a, io),
        Command::Predicate(a) => cmd_predicate(a, io),
        Command::Wrap(a) => cmd_wrap(a, io),
        Command::Report(a) => cmd_report(a, hook, io),
        Command::Templates(a) => cmd_templates(a, io),
        Command::AuditRules(a) => cmd_audit(a, io),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn load_circuit(path: &Path, io: &mut Io) -> Result<Circuit, Failure> {
    let src = read(path)?;
    parse(&src).map_err(|diags| {
        for d in &diags {
            io.note(format!("{}: {d}", path.display()));
        }
        Failure::input(format!("{} does not parse", path.display()))
    })
}

fn load_rules(path: Option<&Path>, io: &mut Io) -> Result<RulesetReport, Failure> {
    let text = match path {
        Some(p) => read(p)?,
        None => DEFAULT_RULES.to_string(),
    };
    let rules = parse_ruleset(&text).map_err(|e| Failure::input(format!("ruleset: {e}")))?;
    let report = verify_ruleset(&rules);
    for r in &report.rejected {
        io.warn(format!("rejected rule {}: {} ({})", r.target, r.replacement.describe(), r.reason));
    }
    Ok(report)
}

fn pass_error(e: PassError) -> Failure {
    match e {
        PassError::UnverifiedRule(_) => Failure::soundness(e.to_string()),
        _ => Failure::input(e.to_string()),
    }
}

/// Fail-closed check that `out` is a sound replacement for `input`.
fn soundness_gate(input: &Circuit, out: &Circuit) -> Result<qfuscate::Equivalence, Failure> {
    if let Some(d) = out.validate().into_iter().find(|d| d.is_error()) {
        return Err(Failure::soundness(format!("pass output is invalid: {d}")));
    }
    let mode = gate_mode(input.n_qubits());
    let eq = equivalent(input, out, mode).map_err(|e| Failure::soundness(format!("equivalence check failed: {e}")))?;
    if !eq.equivalent {
        return Err(Failure::soundness(format!(
            "pass output is not equivalent to its input ({} fidelity {:.12}); nothing written",
            mode_name(mode),
            eq.fidelity
        )));
    }
    if input.has_measurements() {
        let d = equivalent(input, out, EquivalenceMode::Distribution)
            .map_err(|e| Failure::soundness(format!("distribution check failed: {e}")))?;
        if !d.equivalent {
            return Err(Failure::soundness("pass output changes the measured distribution; nothing written"));
        }
    }
    Ok(eq)
}

fn mode_name(m: EquivalenceMode) -> &'static str {
    match m {
        EquivalenceMode::Statevector => "statevector",
        EquivalenceMode::Unitary => "unitary",
        EquivalenceMode::Distribution => "distribution",
    }
}

fn run_pass(c: &Circuit, cfg: &ObfuscationConfig, rules: &RulesetReport, hook: Option<PassHook>, io: &mut Io) -> Result<Circuit, Failure> {
    let out = passes::obfuscate(c, cfg, &rules.accepted).map_err(pass_error)?;
    for w in &out.warnings {
        io.warn(w);
    }
    let mut circuit = out.circuit;
    if let Some(h) = hook {
        h(&mut circuit);
    }
    let eq = soundness_gate(c, &circuit)?;
    log::info!("{} {}: fidelity {:.12}", cfg.method, mode_name(eq.mode), eq.fidelity);
    Ok(circuit)
}

fn cmd_obfuscate(a: &ObfuscateArgs, hook: Option<PassHook>, io: &mut Io) -> CmdResult {
    let c = load_circuit(&a.input, io)?;
    let rules = if a.method == Method::Cloaked {
        load_rules(a.rules.as_deref(), io)?
    } else {
        RulesetReport::default()
    };
    let cfg = ObfuscationConfig::new(a.method, a.seed, a.intensity);
    let out = run_pass(&c, &cfg, &rules, hook, io)?;
    let text = emit(&out);
    match &a.output {
        Some(p) => write_file(p, &text)?,
        None => {
            let _ = io.out.write_all(text.as_bytes());
        }
    }
    if let Some(rp) = &a.report {
        let id = a.input.display().to_string();
        let r = measure_circuit_run(&c, &out, a.method.name(), &id, Some(a.seed)).map_err(|e| Failure::input(e.to_string()))?;
        write_file(rp, &render_report(&[r], ReportFormat::Json))?;
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, io: &mut Io) -> CmdResult {
    let ca = load_circuit(&a.a, io)?;
    let cb = load_circuit(&a.b, io)?;
    if ca.n_qubits() != cb.n_qubits() {
        return Err(Failure::input(format!(
            "qubit count mismatch: {} has {}, {} has {}",
            a.a.display(),
            ca.n_qubits(),
            a.b.display(),
            cb.n_qubits()
        )));
    }
    let mode = a.mode.unwrap_or_else(|| gate_mode(ca.n_qubits()));
    let eq = equivalent(&ca, &cb, mode).map_err(|e| Failure::input(e.to_string()))?;
    let verdict = if eq.equivalent { "equivalent" } else { "not equivalent" };
    let _ = writeln!(io.out, "{verdict} ({} fidelity {:.12})", mode_name(mode), eq.fidelity);
    Ok(if eq.equivalent { EXIT_OK } else { EXIT_NOT_EQUIVALENT })
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn cmd_predicate(a: &PredicateArgs, io: &mut Io) -> CmdResult {
    let params = a.select.params(a.kind);
    let p = predicate::build(a.kind, &params).map_err(|e| Failure::input(e.to_string()))?;
    let model = predicate::outcome_model(&p).map_err(|e| Failure::soundness(e.to_string()))?;
    write_file(&a.output, &emit(&p.circuit))?;
    let doc = json!({
        "predicate": p.kind,
        "params": p.params,
        "semantics": p.semantics,
        "model": model,
    });
    let model_path = a.model.clone().unwrap_or_else(|| sibling(&a.output, "model.json"));
    write_file(&model_path, &serde_json::to_string_pretty(&doc).expect("model serializes"))?;
    for (id, pr) in &model.branch_probabilities {
        let _ = writeln!(io.out, "{id}\t{pr}");
    }
    Ok(EXIT_OK)
}

fn language_for(path: &Path) -> String {
    match path.extension().and_then(|e| e.to_str()) {
        Some("py") => "python".into(),
        Some(e) => e.to_string(),
        None => "text".into(),
    }
}

fn wrap_error(e: WrapError) -> Failure {
    match e {
        WrapError::Extraction(_) | WrapError::Predicate(_) => Failure::soundness(e.to_string()),
        _ => Failure::input(e.to_string()),
    }
}

fn cmd_wrap(a: &WrapArgs, io: &mut Io) -> CmdResult {
    let dir = a.template_dir.clone().or_else(env_template_dir);
    let t = load_template(&a.template, dir.as_deref()).map_err(wrap_error)?;
    let text = read(&a.payload)?;
    let src = SourceBlock::new(text, a.language.clone().unwrap_or_else(|| language_for(&a.payload))).map_err(wrap_error)?;
    let params = a.select.params(a.kind);
    let mut policy = DecoyPolicy::default_for(a.kind);
    if let Some(m) = a.policy {
        policy.mode = m;
    }
    policy.decoy_seed = a.decoy_seed;
    policy.decoy_statement_count = a.decoy_statements;
    let (emitted, manifest) = wrap::wrap(&src, a.kind, &params, &policy, &t).map_err(wrap_error)?;
    // Fail closed: the payload must come back out byte for byte.
    if extract_payload(&emitted, &manifest, &t).map_err(wrap_error)? != src.text {
        return Err(Failure::soundness("wrapped program does not reproduce the payload"));
    }
    let problems = wrap::check_manifest(&manifest);
    if !problems.is_empty() {
        return Err(Failure::soundness(problems.join("; ")));
    }
    let probs = resolve_branches(&manifest).map_err(wrap_error)?;
    write_file(&a.output, &emitted)?;
    let manifest_path = a.manifest.clone().unwrap_or_else(|| sibling(&a.output, "manifest.json"));
    write_file(&manifest_path, &manifest.to_json())?;
    for b in &manifest.branches {
        let _ = writeln!(io.out, "{}\t{:?}\t{}", b.id, b.role, probs[&b.id]);
    }
    if let Some(rp) = &a.report {
        let r = measure_wrap_run(&src, &emitted, &format!("wrap:{}", a.kind), &a.payload.display().to_string());
        write_file(rp, &render_report(&[r], ReportFormat::Json))?;
    }
    Ok(EXIT_OK)
}

fn cmd_report(a: &ReportArgs, hook: Option<PassHook>, io: &mut Io) -> CmdResult {
    let mut inputs: Vec<(String, Circuit)> = Vec::new();
    if a.fixtures {
        inputs.extend(fixtures::all().into_iter().map(|(n, c)| (n.to_string(), c)));
    }
    for p in &a.inputs {
        inputs.push((p.display().to_string(), load_circuit(p, io)?));
    }
    if inputs.is_empty() {
        return Err(Failure::input("no inputs (give QASM files or --fixtures)"));
    }
    let methods = if a.method.is_empty() { Method::ALL.to_vec() } else { a.method.clone() };
    let rules = if methods.contains(&Method::Cloaked) {
        load_rules(a.rules.as_deref(), io)?
    } else {
        RulesetReport::default()
    };
    let mut reports: Vec<Report> = Vec::new();
    for (id, c) in &inputs {
        for &m in &methods {
            let cfg = ObfuscationConfig::new(m, a.seed, a.intensity);
            let out = run_pass(c, &cfg, &rules, hook, io)?;
            reports.push(measure_circuit_run(c, &out, m.name(), id, Some(a.seed)).map_err(|e| Failure::input(e.to_string()))?);
        }
    }
    let text = render_report(&reports, a.format);
    match &a.output {
        Some(p) => write_file(p, &text)?,
        None => {
            let _ = writeln!(io.out, "{}", text.trim_end());
        }
    }
    Ok(EXIT_OK)
}

fn cmd_templates(a: &TemplatesArgs, io: &mut Io) -> CmdResult {
    let dir = a.template_dir.clone().or_else(env_template_dir);
    let listing = list_templates(dir.as_deref());
    for w in &listing.warnings {
        io.warn(w);
    }
    for t in &listing.templates {
        let path = t.path.as_ref().map_or("built-in".to_string(), |p| p.display().to_string());
        let _ = writeln!(io.out, "{}\t{}\t{}", t.id, t.description, path);
    }
    Ok(EXIT_OK)
}

fn cmd_audit(a: &AuditArgs, io: &mut Io) -> CmdResult {
    let report = match &a.rules {
        Some(p) => {
            let rules = parse_ruleset(&read(p)?).map_err(|e| Failure::input(format!("ruleset: {e}")))?;
            verify_ruleset(&rules)
        }
        None => default_ruleset(),
    };
    let _ = write!(io.out, "{}", report.render());
    Ok(EXIT_OK)
}
