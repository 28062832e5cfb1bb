use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use gsrapid::catalog::ValueKind;
use gsrapid::codegen::BindingSet;
use gsrapid::model::Literal;
use gsrapid::{Catalog, Diagnostic, Diagram, Net, SensorScript, SimConfig};

#[derive(Parser)]
#[command(name = "gsr", version, about = "Check, compile, simulate and template command diagrams")]
struct Cli {
    /// Capability catalog (JSON); the built-in catalog when absent.
    #[arg(long, global = true, env = "GSR_CATALOG")]
    catalog: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a diagram.
    Check { diagram: PathBuf },
    /// Compile a diagram to a net.
    Compile {
        diagram: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate a net against a sensor script.
    Sim {
        #[arg(long, conflicts_with = "diagram", required_unless_present = "diagram")]
        net: Option<PathBuf>,
        #[arg(long)]
        diagram: Option<PathBuf>,
        #[arg(long)]
        script: PathBuf,
        /// Trace destination; `-` or absent for stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        max_ticks: Option<u64>,
    },
    /// Generate a template (`template.json`, `listing.txt`) into a directory.
    Gen {
        diagram: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Bind a template's variables and write the resulting net.
    Instantiate {
        #[arg(long)]
        template: PathBuf,
        /// `name=value`; repeatable.
        #[arg(long = "bind", value_name = "NAME=VALUE")]
        binds: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rank catalog factories returning a value kind.
    Suggest {
        #[arg(long)]
        kind: String,
        diagram: PathBuf,
    },
}

/// Failures that are the input's fault, reported with exit code 1.
struct Reported;

type Outcome = Result<(), Failure>;

enum Failure {
    Diagnostics,
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Failure {
        Failure::Usage(e)
    }
}

impl From<Reported> for Failure {
    fn from(_: Reported) -> Failure {
        Failure::Diagnostics
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diagnostics) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let catalog = load_catalog(cli.catalog.as_deref())?;
    let catalog = &catalog;
    match &cli.command {
        Cmd::Check { diagram } => {
            let d = parse_file(diagram, cli.format)?;
            let report = gsrapid::validate(&d, catalog);
            emit_diagnostics(&report.diagnostics, cli.format);
            if !report.is_valid {
                return Err(Failure::Diagnostics);
            }
        }
        Cmd::Compile { diagram, output } => {
            let net = compile_file(diagram, catalog, cli.format)?;
            write_out(output.as_deref(), &net.to_json())?;
        }
        Cmd::Sim { net, diagram, script, trace, max_ticks } => {
            let net = match (net, diagram) {
                (Some(path), _) => Net::from_json(&read(path)?).with_context(|| format!("reading net {}", path.display()))?,
                (None, Some(path)) => compile_file(path, catalog, cli.format)?,
                (None, None) => unreachable!("clap requires one of --net and --diagram"),
            };
            let script = SensorScript::from_json(&read(script)?).map_err(|e| report_error(&e.to_string(), cli.format))?;
            let mut config = SimConfig::default();
            if let Some(n) = max_ticks {
                config.max_ticks = *n;
            }
            let t = gsrapid::simulate(&net, &script, &config).map_err(|e| report_error(&e.to_string(), cli.format))?;
            let dest = trace.as_deref().filter(|p| p != &Path::new("-"));
            write_out(dest, &t.to_jsonl())?;
        }
        Cmd::Gen { diagram, output } => {
            let d = parse_file(diagram, cli.format)?;
            let template = gsrapid::generate(&d, catalog).map_err(|e| compile_failure(e, cli.format))?;
            fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
            let mut json = serde_json::to_string_pretty(&template).map_err(anyhow::Error::from)?;
            json.push('\n');
            write_out(Some(&output.join("template.json")), &json)?;
            write_out(Some(&output.join("listing.txt")), &template.listing)?;
        }
        Cmd::Instantiate { template, binds, output } => {
            let text = read(template)?;
            let template: gsrapid::CommandTemplate =
                serde_json::from_str(&text).with_context(|| format!("reading template {}", template.display()))?;
            let mut set = BindingSet::new();
            for b in binds {
                let (k, v) = b.split_once('=').ok_or_else(|| anyhow!("binding `{b}` is not NAME=VALUE"))?;
                set.insert(k.trim().to_string(), parse_literal(v.trim()));
            }
            let net = gsrapid::instantiate(&template, &set).map_err(|e| report_error(&e.to_string(), cli.format))?;
            write_out(output.as_deref(), &net.to_json())?;
        }
        Cmd::Suggest { kind, diagram } => {
            let needed = ValueKind::from_name(kind).ok_or_else(|| anyhow!("unknown value kind `{kind}`"))?;
            let d = parse_file(diagram, cli.format)?;
            let list = gsrapid::suggest(catalog, needed, &d);
            let text = match cli.format {
                Format::Json => format!("{}\n", serde_json::to_string_pretty(&list).map_err(anyhow::Error::from)?),
                Format::Text => list.iter().map(|s| format!("{}\t{}\n", s.tier, s.factory)).collect(),
            };
            write_out(None, &text)?;
        }
    }
    Ok(())
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing to stdout")?;
            out.flush().context("writing to stdout")
        }
    }
}

fn load_catalog(path: Option<&Path>) -> anyhow::Result<Catalog> {
    match path {
        None => Ok(Catalog::builtin().clone()),
        Some(p) => Ok(gsrapid::load_catalog(&read(p)?)?),
    }
}

fn parse_file(path: &Path, format: Format) -> Result<Diagram, Failure> {
    let text = read(path)?;
    gsrapid::parse(&text, &path.display().to_string()).map_err(|diags| {
        emit_diagnostics(&diags, format);
        Failure::Diagnostics
    })
}

fn compile_file(path: &Path, catalog: &Catalog, format: Format) -> Result<Net, Failure> {
    let d = parse_file(path, format)?;
    gsrapid::compile(&d, catalog).map_err(|e| compile_failure(e, format))
}

fn compile_failure(e: gsrapid::CompileError, format: Format) -> Failure {
    match e {
        gsrapid::CompileError::Invalid(diags) => {
            emit_diagnostics(&diags, format);
            Failure::Diagnostics
        }
        other => report_error(&other.to_string(), format).into(),
    }
}

fn report_error(message: &str, format: Format) -> Reported {
    match format {
        Format::Text => eprintln!("error: {message}"),
        Format::Json => println!("{}", serde_json::json!({ "error": message })),
    }
    Reported
}

fn emit_diagnostics(diags: &[Diagnostic], format: Format) {
    match format {
        Format::Text => {
            for d in diags {
                eprintln!("{d}");
            }
        }
        Format::Json => {
            let errors = diags.iter().any(Diagnostic::is_error);
            let doc = serde_json::json!({ "diagnostics": diags, "is_valid": !errors });
            println!("{}", serde_json::to_string_pretty(&doc).expect("diagnostics serialize"));
        }
    }
}

/// `true`/`false`, integers and reals keep their kind; quotes are optional
/// around strings.
fn parse_literal(v: &str) -> Literal {
    match v {
        "true" => return Literal::Bool(true),
        "false" => return Literal::Bool(false),
        _ => {}
    }
    if let Ok(i) = v.parse::<i64>() {
        return Literal::Int(i);
    }
    if let Ok(r) = v.parse::<f64>() {
        if r.is_finite() {
            return Literal::Real(r);
        }
    }
    let unquoted = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
    Literal::Str(unquoted.to_string())
}
