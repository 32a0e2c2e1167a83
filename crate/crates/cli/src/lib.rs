//! Command-line front end for symkit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use symkit::catalog::{Catalog, CatalogEntry, CatalogError};
use symkit::expr::{Bindings, Context, Expr};
use symkit::invariance::{check_invariance, closure_check, generate_determining, golden_report, SKTSystem};
use symkit::jet::VectorField;
use symkit::simulator::{
    convergence_study, run, BCSpec, SimulateConfig, SimulateConfigError, Stencil,
};
use symkit::solutions::{
    builtin_family_branch, builtin_system, flux_check, group_orbit, parse_solution_file,
    reduce_ansatz, reduction_branch_check, verify, Branch, Generator, OrbitSpec, SolutionFamily,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_FOUND: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "symkit", version, about = "Lie symmetries of SKT cross-diffusion systems")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to a file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for numeric sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of numeric sample points.
    #[arg(long, global = true, default_value_t = 20)]
    points: usize,
    /// Numeric tolerance (relative).
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Parameter binding `name=value`, repeatable.
    #[arg(long = "bind", global = true, value_name = "K=V")]
    binds: Vec<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct EntrySel {
    #[arg(long)]
    table: Option<u8>,
    #[arg(long)]
    case: Option<u8>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check every listed operator of catalog entries.
    Validate {
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        sel: EntrySel,
    },
    /// Print determining equations.
    Determining {
        /// Generic 12-parameter system, compared with the printed equations.
        #[arg(long)]
        generic: bool,
        #[command(flatten)]
        sel: EntrySel,
        #[arg(long)]
        system: Option<String>,
    },
    /// Invariance of one system under one or more operators.
    Check {
        #[command(flatten)]
        sel: EntrySel,
        /// Named system (3-1, 3-2, 1-4, ...) instead of a catalog entry.
        #[arg(long)]
        system: Option<String>,
        /// Registry operator `NAME` or `NAME:variant`, repeatable.
        #[arg(long)]
        operator: Vec<String>,
        /// Operator file with `xi0 = ..`, `xi1 = ..`, `eta1 = ..`, `eta2 = ..`.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Commutator table and closure of an entry's algebra.
    Commutators {
        #[command(flatten)]
        sel: EntrySel,
    },
    /// Substitute exact solutions into their system.
    VerifySolution {
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        system: Option<String>,
        #[arg(long, value_enum)]
        branch: Option<BranchArg>,
        /// Solution file with `[solution]` blocks.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Finite group action of X1 or X2 on a family.
    Orbit {
        #[arg(long)]
        family: String,
        #[arg(long, default_value = "X1")]
        generator: String,
        #[arg(long, default_value = "p")]
        p: String,
        #[arg(long, default_value = "lambda1")]
        lambda1: String,
        #[arg(long, default_value = "lambda2")]
        lambda2: String,
    },
    /// Reduction by `d/dx + F(x)/(u - v)(d/du - d/dv)`.
    Reduce {
        #[arg(long, default_value = "3-2")]
        system: String,
        /// Operator file; defaults to the trigonometric profile.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Symbolic zero-flux check at both endpoints.
    FluxCheck {
        #[arg(long)]
        family: String,
        #[arg(long, default_value = "0")]
        x0: String,
        #[arg(long, default_value = "pi")]
        x1: String,
    },
    /// Run the finite-volume solver from a `[simulate]` file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Grid refinement against an exact family.
    Convergence {
        #[arg(long, default_value = "family-3-7")]
        family: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![64usize, 128, 256])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.2)]
        t_end: f64,
        #[arg(long, value_enum, default_value_t = BcArg::ZeroNeumann)]
        bc: BcArg,
        #[arg(long, value_enum, default_value_t = StencilArg::Central)]
        stencil: StencilArg,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        x1: Option<f64>,
    },
    /// Inspect the catalog.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand, Debug)]
enum CatalogAction {
    List,
    Show {
        #[command(flatten)]
        sel: EntrySel,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BranchArg {
    Upper,
    Lower,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BcArg {
    ZeroNeumann,
    Periodic,
    ExactDirichlet,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StencilArg {
    Central,
    OneSided,
}

/// One checked item.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub id: String,
    pub passed: bool,
    pub metrics: Vec<(String, String)>,
}

impl Record {
    fn new(id: impl Into<String>, passed: bool) -> Record {
        Record { id: id.into(), passed, metrics: Vec::new() }
    }

    fn metric(mut self, k: &str, v: impl ToString) -> Record {
        self.metrics.push((k.into(), v.to_string()));
        self
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub command: String,
    pub records: Vec<Record>,
    /// Rendered report (stdout or `--output`).
    pub body: String,
    /// Diagnostics for stderr.
    pub errors: String,
    pub exit_code: i32,
    pub wall_time: Duration,
    pub output: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    NotFound(String),
    Other(String),
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Failure {
        match e {
            CatalogError::UnknownCase(..) | CatalogError::UnknownOperator(_) | CatalogError::Restriction(_) => {
                Failure::Usage(e.to_string())
            }
            CatalogError::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                Failure::NotFound(e.to_string())
            }
            _ => Failure::Other(e.to_string()),
        }
    }
}

fn other(e: impl std::fmt::Display) -> Failure {
    Failure::Other(e.to_string())
}

fn read_file(p: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Failure::NotFound(format!("{}: file not found", p.display())),
        _ => Failure::Other(format!("{}: {e}", p.display())),
    })
}

struct Outcome {
    body: String,
    records: Vec<Record>,
}

impl Outcome {
    fn exit_code(&self) -> i32 {
        if self.records.iter().all(|r| r.passed) {
            EXIT_OK
        } else {
            EXIT_FAIL
        }
    }
}

/// Parse and run one invocation. `argv[0]` is the program name.
pub fn execute<I, T>(argv: I) -> RunReport
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let start = Instant::now();
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let command = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>().join(" ");
    let mut report = RunReport {
        command,
        records: Vec::new(),
        body: String::new(),
        errors: String::new(),
        exit_code: EXIT_OK,
        wall_time: Duration::ZERO,
        output: None,
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                report.body = e.to_string();
            } else {
                report.errors = e.to_string();
                report.exit_code = EXIT_USAGE;
            }
            report.wall_time = start.elapsed();
            return report;
        }
    };
    report.output = cli.global.output.clone();
    match dispatch(&cli) {
        Ok(o) => {
            report.exit_code = o.exit_code();
            report.body = o.body;
            report.records = o.records;
        }
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (EXIT_USAGE, m),
                Failure::NotFound(m) => (EXIT_NOT_FOUND, m),
                Failure::Other(m) => (EXIT_FAIL, m),
            };
            report.exit_code = code;
            report.errors = format!("error: {msg}\n");
        }
    }
    report.wall_time = start.elapsed();
    report
}

fn load_catalog() -> Result<Catalog, Failure> {
    match std::env::var_os("SYMKIT_CATALOG") {
        Some(p) => {
            let p = PathBuf::from(p);
            if !p.exists() {
                return Err(Failure::NotFound(format!("{}: catalog file not found", p.display())));
            }
            Ok(Catalog::load(&p)?)
        }
        None => Ok(Catalog::builtin()),
    }
}

fn split_bind(b: &str) -> Result<(&str, &str), Failure> {
    b.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| Failure::Usage(format!("--bind expects name=value, got '{b}'")))
}

fn symbolic_bindings(binds: &[String]) -> Result<Bindings, Failure> {
    let ctx = Context::new();
    let mut out = Bindings::new();
    for b in binds {
        let (k, v) = split_bind(b)?;
        let e = ctx.parse(v).map_err(|e| Failure::Usage(format!("--bind {k}: {e}")))?;
        out.insert(symkit::Symbol::param(k), e);
    }
    Ok(out)
}

/// Numeric binds set sample values unless `substitute` is set; expression
/// binds always substitute.
fn bind_family(f: SolutionFamily, binds: &[String], substitute: bool) -> Result<SolutionFamily, Failure> {
    let mut numeric = Vec::new();
    let mut symbolic = Vec::new();
    for b in binds {
        let (k, v) = split_bind(b)?;
        match v.parse::<f64>() {
            Ok(x) if !substitute => numeric.push((k, x)),
            _ => symbolic.push((k, v)),
        }
    }
    let f = if symbolic.is_empty() { f } else { f.substitute_params(&symbolic).map_err(other)? };
    Ok(if numeric.is_empty() { f } else { f.bind(&numeric) })
}

/// `3-6` and `family-3-6` both name the printed five-parameter family.
fn resolve_family(id: &str, branch: Option<Branch>) -> Result<SolutionFamily, Failure> {
    let b = branch.unwrap_or(Branch::Upper);
    if let Ok(f) = builtin_family_branch(id, b) {
        return Ok(f);
    }
    for prefix in ["seed-", "family-", "steady-", "reduced-"] {
        if let Ok(f) = builtin_family_branch(&format!("{prefix}{id}"), b) {
            return Ok(f);
        }
    }
    Err(Failure::Usage(format!("unknown family '{id}'")))
}

fn system_by_id(id: &str) -> Result<SKTSystem, Failure> {
    builtin_system(id).map_err(|e| Failure::Usage(e.to_string()))
}

fn entry<'a>(cat: &'a Catalog, sel: &EntrySel) -> Result<&'a CatalogEntry, Failure> {
    match (sel.table, sel.case) {
        (Some(t), Some(c)) => cat.entry(t, c).ok_or(Failure::Usage(format!("no catalog entry T{t}.{c}"))),
        _ => Err(Failure::Usage("--table and --case are both required".into())),
    }
}

fn field_file(p: &Path) -> Result<VectorField, Failure> {
    let text = read_file(p)?;
    VectorField::from_text(&text, &Context::new()).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate { all, sel } => cmd_validate(g, *all, sel),
        Command::Determining { generic, sel, system } => cmd_determining(g, *generic, sel, system.as_deref()),
        Command::Check { sel, system, operator, field } => cmd_check(g, sel, system.as_deref(), operator, field.as_deref()),
        Command::Commutators { sel } => cmd_commutators(g, sel),
        Command::VerifySolution { family, system, branch, file } => {
            let branch = branch.map(|b| match b {
                BranchArg::Upper => Branch::Upper,
                BranchArg::Lower => Branch::Lower,
            });
            cmd_verify(g, family.as_deref(), system.as_deref(), branch, file.as_deref())
        }
        Command::Orbit { family, generator, p, lambda1, lambda2 } => cmd_orbit(g, family, generator, p, lambda1, lambda2),
        Command::Reduce { system, field } => cmd_reduce(system, field.as_deref()),
        Command::FluxCheck { family, x0, x1 } => cmd_flux(g, family, x0, x1),
        Command::Simulate { config } => cmd_simulate(g, config),
        Command::Convergence { family, sizes, t_end, bc, stencil, x0, x1 } => {
            cmd_convergence(g, family, sizes, *t_end, *bc, *stencil, (*x0, *x1))
        }
        Command::Catalog { action } => cmd_catalog(g, action),
    }
}

fn cmd_validate(g: &Global, all: bool, sel: &EntrySel) -> Result<Outcome, Failure> {
    let cat = load_catalog()?;
    let report = match (all, sel.table, sel.case) {
        (false, Some(_), Some(_)) => cat.validate(&[entry(&cat, sel)?]),
        (false, Some(t), None) => cat.validate(&cat.entries.iter().filter(|e| e.table == t).collect::<Vec<_>>()),
        (false, None, Some(_)) => return Err(Failure::Usage("--case needs --table".into())),
        _ => cat.validate_all(),
    };
    let records = report
        .rows
        .iter()
        .map(|r| Record::new(r.id(), r.passed()).metric("operators", r.operators.len()).metric("closes", r.closure.closes()))
        .collect();
    let body = match g.format {
        Format::Text => format!("{report}\n"),
        Format::Csv => report.to_csv(),
    };
    Ok(Outcome { body, records })
}

fn cmd_determining(g: &Global, generic: bool, sel: &EntrySel, system: Option<&str>) -> Result<Outcome, Failure> {
    if generic {
        let r = golden_report(&SKTSystem::generic());
        let mut body = format!("{r}\n");
        let count = r.equation_count();
        body.push_str("equations:\n");
        body.push_str("  (10) xi0 = xi0(t), xi1 = xi1(t, x)\n");
        for (label, e) in &r.generated {
            let _ = writeln!(body, "  {label}: {e} = 0");
        }
        let rec = Record::new("determining", r.is_clean() && count == 17).metric("equations", count);
        return Ok(Outcome { body, records: vec![rec] });
    }
    let sys = match system {
        Some(id) => system_by_id(id)?,
        None => {
            let cat = load_catalog()?;
            let e = entry(&cat, sel)?;
            cat.instantiate(e.table, e.case_id, &symbolic_bindings(&g.binds)?)?.0
        }
    };
    let ds = generate_determining(&sys);
    let merged = ds.merged();
    let mut body = String::new();
    for (i, e) in &merged {
        let eq = &ds.equations[*i];
        let _ = writeln!(body, "S{} [{}]: {e} = 0", eq.equation, symkit::invariance::monomial_name(&eq.monomial));
    }
    let _ = writeln!(body, "total: {} equations", merged.len());
    Ok(Outcome { body, records: vec![Record::new("determining", true).metric("equations", merged.len())] })
}

fn cmd_check(
    g: &Global,
    sel: &EntrySel,
    system: Option<&str>,
    operators: &[String],
    field: Option<&Path>,
) -> Result<Outcome, Failure> {
    let cat = load_catalog()?;
    let binds = symbolic_bindings(&g.binds)?;
    let (label, sys, mut fields) = match system {
        Some(id) => (id.to_string(), system_by_id(id)?.substitute(&binds), Vec::new()),
        None => {
            let e = entry(&cat, sel)?;
            let (sys, ops) = cat.instantiate(e.table, e.case_id, &binds)?;
            let listed = if operators.is_empty() && field.is_none() { ops } else { Vec::new() };
            (e.id(), sys, listed)
        }
    };
    for name in operators {
        let f = cat.registry.resolve(name).ok_or_else(|| Failure::Usage(format!("unknown operator '{name}'")))?;
        let mut f = f.map(|c| c.substitute(&binds));
        f.name = Some(name.clone());
        fields.push(f);
    }
    if let Some(p) = field {
        fields.push(field_file(p)?.map(|c| c.substitute(&binds)).named(&p.display().to_string()));
    }
    if fields.is_empty() {
        return Err(Failure::Usage("no operator given (--operator or --field)".into()));
    }
    let mut body = String::new();
    let mut records = Vec::new();
    if g.format == Format::Csv {
        body.push_str("system,operator,status,witnesses\n");
    }
    for f in &fields {
        let name = f.name.clone().unwrap_or_else(|| f.to_string());
        let v = check_invariance(&sys, f);
        match g.format {
            Format::Text => {
                let _ = writeln!(body, "{label} {name}: {}", if v.invariant { "invariant" } else { "FAIL" });
                for w in &v.witnesses {
                    let _ = writeln!(body, "  {w}");
                }
            }
            Format::Csv => {
                let _ = writeln!(
                    body,
                    "{label},{name},{},{}",
                    if v.invariant { "invariant" } else { "FAIL" },
                    v.witnesses.len()
                );
            }
        }
        records.push(Record::new(format!("{label} {name}"), v.invariant).metric("witnesses", v.witnesses.len()));
    }
    Ok(Outcome { body, records })
}

fn cmd_commutators(g: &Global, sel: &EntrySel) -> Result<Outcome, Failure> {
    let cat = load_catalog()?;
    let e = entry(&cat, sel)?;
    let (_, ops) = cat.instantiate(e.table, e.case_id, &symbolic_bindings(&g.binds)?)?;
    let c = closure_check(&ops);
    let body = match g.format {
        Format::Text => format!("{}\n{c}\n", e.id()),
        Format::Csv => {
            let mut s = String::from("i,j,k,constant\n");
            for k in &c.constants {
                let _ = writeln!(s, "{},{},{},\"{}\"", c.names[k.i], c.names[k.j], c.names[k.k], k.value);
            }
            s
        }
    };
    let rec = Record::new(e.id(), c.closes())
        .metric("constants", c.constants.len())
        .metric("rational", c.rational());
    Ok(Outcome { body, records: vec![rec] })
}

fn cmd_verify(
    g: &Global,
    family: Option<&str>,
    system: Option<&str>,
    branch: Option<Branch>,
    file: Option<&Path>,
) -> Result<Outcome, Failure> {
    let families = match (family, file) {
        (Some(id), None) => vec![resolve_family(id, branch)?],
        (None, Some(p)) => {
            let fams = parse_solution_file(&read_file(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            match branch {
                Some(b) => fams.into_iter().map(|f| f.with_branch(b)).collect(),
                None => fams,
            }
        }
        _ => return Err(Failure::Usage("give exactly one of --family or --file".into())),
    };
    let mut body = String::new();
    let mut records = Vec::new();
    if g.format == Format::Csv {
        let _ = writeln!(body, "{}", symkit::solutions::Verification::csv_header());
    }
    for f in families {
        let f = bind_family(f, &g.binds, false)?;
        let sys_id = system.map(str::to_string).unwrap_or_else(|| f.system.clone());
        let sys = system_by_id(&sys_id)?;
        let v = verify(&sys, &sys_id, &f, g.points, g.seed, g.tol).map_err(other)?;
        match g.format {
            Format::Text => {
                let _ = writeln!(body, "{v}");
            }
            Format::Csv => {
                let _ = writeln!(body, "{}", v.csv_row());
            }
        }
        records.push(
            Record::new(v.family.clone(), v.passed())
                .metric("symbolic_zero", v.symbolic_zero())
                .metric("max_abs", format!("{:e}", v.numeric.max_abs)),
        );
    }
    Ok(Outcome { body, records })
}

fn cmd_orbit(g: &Global, family: &str, generator: &str, p: &str, l1: &str, l2: &str) -> Result<Outcome, Failure> {
    let gen = Generator::parse(generator).ok_or_else(|| Failure::Usage(format!("unknown generator '{generator}'")))?;
    let base = bind_family(resolve_family(family, None)?, &g.binds, false)?;
    let mut spec = OrbitSpec::new(gen, p, l1, l2);
    let mut new_values = Vec::new();
    for name in ["p", "lambda1", "lambda2"] {
        if !base.sample.params.contains_key(name) {
            let v = match name {
                "p" => 0.1,
                "lambda1" => 1.0,
                _ => 0.5,
            };
            new_values.push((name, v));
        }
    }
    for (k, v) in &new_values {
        spec = spec.value(k, *v);
    }
    let o = group_orbit(&base, &spec).map_err(other)?;
    let sys = system_by_id(&o.system)?;
    let v = verify(&sys, &o.system, &o, g.points, g.seed, g.tol).map_err(other)?;
    let body = match g.format {
        Format::Text => format!("orbit of {} under {generator}({p}):\n  u = {}\n  v = {}\n{v}\n", base.id, o.u, o.v),
        Format::Csv => format!("{}\n{}\n", symkit::solutions::Verification::csv_header(), v.csv_row()),
    };
    Ok(Outcome { body, records: vec![Record::new(o.id.clone(), v.passed())] })
}

const TRIG_PROFILE: &str = "xi0 = 0\nxi1 = 1\neta1 = (lambda1*cos(x) + lambda2*sin(x))/(u - v)\neta2 = -(lambda1*cos(x) + lambda2*sin(x))/(u - v)\n";

fn cmd_reduce(system: &str, field: Option<&Path>) -> Result<Outcome, Failure> {
    let sys = system_by_id(system)?;
    let x = match field {
        Some(p) => field_file(p)?,
        None => VectorField::from_text(TRIG_PROFILE, &Context::new()).expect("built-in operator parses"),
    };
    let red = reduce_ansatz(&sys, &x).map_err(other)?;
    let mut body = format!("{red}");
    let mut records = vec![Record::new("reduction", true).metric("equations", red.equations.len())];
    if system == "3-2" && field.is_none() {
        body.push_str("branches:\n");
        for id in ["reduced-3-14a", "reduced-3-14b", "reduced-3-14c"] {
            for b in [Branch::Upper, Branch::Lower] {
                let f = builtin_family_branch(id, b).map_err(other)?;
                let ok = reduction_branch_check(&red, &f);
                let _ = writeln!(body, "  {id}:{b} {}", if ok { "satisfies" } else { "FAIL" });
                records.push(Record::new(format!("{id}:{b}"), ok));
            }
        }
    }
    Ok(Outcome { body, records })
}

fn cmd_flux(g: &Global, family: &str, x0: &str, x1: &str) -> Result<Outcome, Failure> {
    let f = bind_family(resolve_family(family, None)?, &g.binds, true)?;
    let ctx = Context::new();
    let parse = |s: &str| -> Result<Expr, Failure> { ctx.parse(s).map_err(|e| Failure::Usage(format!("'{s}': {e}"))) };
    let r = flux_check(&f, &parse(x0)?, &parse(x1)?).map_err(other)?;
    Ok(Outcome { body: format!("{} on ({x0}, {x1})\n{r}\n", f.id), records: vec![Record::new(f.id.clone(), r.passed())] })
}

fn config_error(e: SimulateConfigError) -> Failure {
    match e {
        SimulateConfigError::Sim(s) => Failure::Other(s.to_string()),
        e => Failure::Usage(e.to_string()),
    }
}

fn cmd_simulate(g: &Global, config: &Path) -> Result<Outcome, Failure> {
    let cfg = SimulateConfig::parse(&read_file(config)?).map_err(config_error)?;
    let k = cfg.coefficients().map_err(config_error)?;
    let init = cfg.initial_state().map_err(config_error)?;
    let h = cfg.grid.h();
    let m0 = init.mass(h);
    let traj = run(&k, &cfg.grid, init, &cfg.bc, &cfg.solver).map_err(other)?;
    let last = traj.last();
    let m1 = last.mass(h);
    let body = match (g.format, &g.output) {
        (Format::Csv, _) | (_, Some(_)) => traj.to_csv(),
        (Format::Text, None) => format!(
            "system {} on [{}, {}], n = {}, bc = {}\nsteps {}, t = {}, samples {}\nmass u: {:.12e} -> {:.12e}\nmass v: {:.12e} -> {:.12e}\n",
            cfg.system,
            cfg.grid.x0,
            cfg.grid.x1,
            cfg.grid.n,
            cfg.bc.name(),
            traj.steps,
            last.time,
            traj.states.len(),
            m0.0,
            m1.0,
            m0.1,
            m1.1
        ),
    };
    let rec = Record::new("simulate", last.is_finite()).metric("steps", traj.steps);
    Ok(Outcome { body, records: vec![rec] })
}

fn cmd_convergence(
    g: &Global,
    family: &str,
    sizes: &[usize],
    t_end: f64,
    bc: BcArg,
    stencil: StencilArg,
    x: (Option<f64>, Option<f64>),
) -> Result<Outcome, Failure> {
    let mut f = resolve_family(family, None)?;
    if f.id == "family-3-7" {
        // parabolic regime: 1 - alpha2*exp(t) stays positive
        f = f.bind(&[("alpha2", 0.5), ("lambda2", 0.0)]);
    }
    let f = bind_family(f, &g.binds, false)?;
    let sys = system_by_id(&f.system)?;
    let x = (x.0.unwrap_or(f.sample.x.0), x.1.unwrap_or(f.sample.x.1));
    let bc = match bc {
        BcArg::ZeroNeumann => BCSpec::ZeroNeumann,
        BcArg::Periodic => BCSpec::Periodic,
        BcArg::ExactDirichlet => BCSpec::ExactDirichlet(Box::new(f.clone())),
    };
    let (stencil, expected) = match stencil {
        StencilArg::Central => (Stencil::Central, 2.0),
        StencilArg::OneSided => (Stencil::OneSided, 1.0),
    };
    if sizes.len() < 2 {
        return Err(Failure::Usage("--sizes needs at least two grids".into()));
    }
    let r = convergence_study(&sys, &f, x, sizes, t_end, &bc, stencil).map_err(other)?;
    let order = *r.orders.last().expect("two grids give an order");
    let ok = (order - expected).abs() <= 0.2;
    let body = match g.format {
        Format::Text => format!("{} on [{}, {}], t = {t_end}\n{r}\nobserved order {order:.3}, expected {expected}\n", f.id, x.0, x.1),
        Format::Csv => r.to_csv(),
    };
    Ok(Outcome { body, records: vec![Record::new(f.id.clone(), ok).metric("order", format!("{order:.3}"))] })
}

fn cmd_catalog(g: &Global, action: &CatalogAction) -> Result<Outcome, Failure> {
    let cat = load_catalog()?;
    match action {
        CatalogAction::List => {
            let mut body = String::new();
            if g.format == Format::Csv {
                body.push_str("entry,dim,operators\n");
            }
            for e in &cat.entries {
                match g.format {
                    Format::Text => {
                        let _ = writeln!(body, "{:<6} {:<3} {}", e.id(), e.operators.len(), e.operators.join(", "));
                    }
                    Format::Csv => {
                        let _ = writeln!(body, "{},{},\"{}\"", e.id(), e.operators.len(), e.operators.join(" "));
                    }
                }
            }
            let records = cat.entries.iter().map(|e| Record::new(e.id(), true)).collect();
            Ok(Outcome { body, records })
        }
        CatalogAction::Show { sel } => {
            let e = entry(&cat, sel)?;
            let mut body = format!("{}\nsystem:\n{}\n", e.id(), e.system);
            if !e.restrictions.is_empty() {
                let r: Vec<&str> = e.restrictions.iter().map(|r| r.text.as_str()).collect();
                let _ = writeln!(body, "restrictions: {}", r.join(", "));
            }
            body.push_str("operators:\n");
            for name in &e.operators {
                for (variant, f) in cat.registry.get(name).unwrap_or(&[]) {
                    let label = match variant {
                        Some(v) => format!("{name}:{v}"),
                        None => name.clone(),
                    };
                    let _ = writeln!(body, "  {label} = {f}");
                }
            }
            if !e.substitutions.is_empty() {
                let _ = writeln!(body, "substitutions: {}", e.substitutions.join(", "));
            }
            Ok(Outcome { body, records: vec![Record::new(e.id(), true)] })
        }
    }
}
