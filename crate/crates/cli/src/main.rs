use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hazop_core::consistency::check_consistency;
use hazop_core::diagnostic::{has_errors, sort_diagnostics, Diagnostic, Level};
use hazop_core::engine::regenerate;
use hazop_core::ids::DiagramType;
use hazop_core::metrics::{compute_stats, guideword_usage, ProjectStats};
use hazop_core::model::validate_model;
use hazop_core::project::{Project, ProjectError};
use hazop_core::report::{export_csv, render_report, write_csv_dir, RenderOptions};
use hazop_core::{AnalysisStore, GuideWordRegistry, ProjectModel};

/// HAZOP-UML workbench: generate, fill and report guide-word deviation tables
/// for use cases, sequence diagrams and state machines.
#[derive(Debug, Parser)]
#[command(name = "hazop", version)]
struct Cli {
    /// Project directory.
    #[arg(long, short = 'C', global = true, default_value = ".")]
    project: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create a project with the default registry and a starter model.
    Init {
        dir: PathBuf,
        /// Project name; defaults to the directory name.
        #[arg(long)]
        name: Option<String>,
    },
    /// Validate the model and the analysis; exits 1 on any error.
    Check,
    /// Generate deviation rows and merge them into the analysis.
    Generate,
    /// Print analysis statistics.
    Stats {
        #[arg(long)]
        json: bool,
    },
    /// Render the HTML report.
    Report {
        /// Omit the generation time so repeated runs are byte-identical.
        #[arg(long)]
        no_timestamp: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Render despite error-level diagnostics.
        #[arg(long)]
        force: bool,
    },
    /// Write tables, lists and statistics as CSV.
    ExportCsv {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = hazop_service::DEFAULT_PORT)]
        port: u16,
        /// Address to bind; only change this on a trusted network.
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
    },
}

/// Failure after which the process exits with the given code. Diagnostics
/// have already been printed.
enum Failure {
    Diagnostics,
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Diagnostics => 1,
            Failure::Io(_) => 3,
        }
    }
}

impl From<ProjectError> for Failure {
    fn from(e: ProjectError) -> Self {
        match e {
            ProjectError::Parse(errors) => {
                for err in &errors {
                    eprintln!("{}", err.to_diagnostic());
                }
                eprintln!("{} syntax error(s)", errors.len());
                Failure::Diagnostics
            }
            ProjectError::Registry { path, diagnostics } => {
                for d in &diagnostics {
                    eprintln!("{}: {d}", path.display());
                }
                Failure::Diagnostics
            }
            other if other.is_content_error() || matches!(other, ProjectError::AlreadyExists(_)) => {
                eprintln!("error: {other}");
                Failure::Diagnostics
            }
            other => Failure::Io(other.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("cannot write {}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Failure::Io(msg) = &f {
                eprintln!("error: {msg}");
            }
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Init { dir, name } => init(&dir, name),
        Command::Check => check(&Project::open(&cli.project)?),
        Command::Generate => generate(&Project::open(&cli.project)?),
        Command::Stats { json } => stats(&Project::open(&cli.project)?, json),
        Command::Report { no_timestamp, out, force } => report(&Project::open(&cli.project)?, no_timestamp, out, force),
        Command::ExportCsv { out } => export(&Project::open(&cli.project)?, out),
        Command::Serve { port, bind } => serve(Project::open(&cli.project)?, SocketAddr::new(bind, port)),
    }
}

struct Loaded {
    model: ProjectModel,
    registry: GuideWordRegistry,
    store: AnalysisStore,
}

fn load(project: &Project) -> Result<Loaded, Failure> {
    Ok(Loaded { model: project.load_model()?, registry: project.load_registry()?, store: project.load_store()? })
}

/// Prints diagnostics, giving findings without a source span the location
/// of their model element or, failing that, the analysis file.
fn print_diagnostics(project: &Project, model: &ProjectModel, diags: &[Diagnostic]) {
    let analysis = project.analysis_path();
    let analysis = analysis.strip_prefix(&project.root).unwrap_or(&analysis);
    for d in diags {
        if d.span.is_some() {
            eprintln!("{d}");
        } else if let Some(span) = d.element.as_deref().and_then(|id| model.span_of(id)) {
            eprintln!("{}", d.clone().with_span(Some(span.clone())));
        } else {
            eprintln!("{}: {d}", analysis.display());
        }
    }
}

fn init(dir: &Path, name: Option<String>) -> Result<(), Failure> {
    let name = name.unwrap_or_else(|| {
        let abs = std::path::absolute(dir).unwrap_or_else(|_| dir.to_path_buf());
        abs.file_name().map_or("project".into(), |n| n.to_string_lossy().into_owned())
    });
    let project = Project::init(dir, &name)?;
    println!("created project `{name}` in {}", project.root.display());
    Ok(())
}

fn check(project: &Project) -> Result<(), Failure> {
    let l = load(project)?;
    let mut diags = validate_model(&l.model);
    diags.extend(check_consistency(&l.model, &l.store));
    sort_diagnostics(&mut diags);
    print_diagnostics(project, &l.model, &diags);
    let errors = diags.iter().filter(|d| d.level == Level::Error).count();
    println!("{errors} error(s), {} warning(s)", diags.len() - errors);
    if errors > 0 {
        Err(Failure::Diagnostics)
    } else {
        Ok(())
    }
}

fn generate(project: &Project) -> Result<(), Failure> {
    let l = load(project)?;
    let model_diags = validate_model(&l.model);
    if has_errors(&model_diags) {
        print_diagnostics(project, &l.model, &model_diags);
        eprintln!("the model has errors; nothing generated");
        return Err(Failure::Diagnostics);
    }
    let (store, report) = regenerate(&l.store, &l.model, &l.registry);
    project.save_store(&store)?;
    for (table, m) in report.table_lines() {
        println!("{table}: kept {}, added {}, orphaned {}", m.kept, m.added, m.orphaned);
    }
    println!(
        "total: kept {}, added {}, orphaned {} ({} revived, {} previously orphaned)",
        report.kept, report.added, report.orphaned, report.revived, report.previously_orphaned
    );
    Ok(())
}

fn format_stats(stats: &ProjectStats) -> String {
    let mut out = String::new();
    let sub = |t| match t {
        DiagramType::UseCase => "conditions",
        DiagramType::Sequence => "messages",
        DiagramType::StateMachine => "transitions",
    };
    let head = |t| match t {
        DiagramType::UseCase => "use cases",
        DiagramType::Sequence => "sequence diagrams",
        DiagramType::StateMachine => "state machines",
    };
    for t in DiagramType::ALL {
        let s = stats.get(t);
        out += &format!(
            "{}: {} ({} {}), {} analyzed, {} interpreted, {} with recommendation\n",
            head(t),
            s.element_count,
            s.sub_element_count,
            sub(t),
            s.analyzed_deviations,
            s.interpreted_deviations,
            s.interpreted_with_recommendation
        );
    }
    out += &format!("states: {}\nhazards: {}\n", stats.state_count, stats.hazard_count);
    out
}

fn stats(project: &Project, json: bool) -> Result<(), Failure> {
    let l = load(project)?;
    let stats = compute_stats(&l.model, &l.store);
    if json {
        let usage = guideword_usage(&l.store, &l.registry);
        let v = serde_json::json!({ "stats": stats, "guideword_usage": usage });
        println!("{}", serde_json::to_string_pretty(&v).expect("stats serialize"));
    } else {
        print!("{}", format_stats(&stats));
    }
    Ok(())
}

fn report(project: &Project, no_timestamp: bool, out: Option<PathBuf>, force: bool) -> Result<(), Failure> {
    let l = load(project)?;
    let stats = compute_stats(&l.model, &l.store);
    let options = RenderOptions {
        timestamp: (!no_timestamp).then(|| chrono::Utc::now().format("%Y-%m-%d %H:%M:%S UTC").to_string()),
        force,
        guideword_usage: Some(guideword_usage(&l.store, &l.registry)),
    };
    let html = match render_report(&l.model, &l.store, &stats, &options) {
        Ok(html) => html,
        Err(e) => {
            print_diagnostics(project, &l.model, &e.blocking);
            eprintln!("{e}");
            return Err(Failure::Diagnostics);
        }
    };
    let dir = out.unwrap_or_else(|| project.out_dir());
    std::fs::create_dir_all(&dir).map_err(io_failure(&dir))?;
    let path = dir.join("report.html");
    std::fs::write(&path, html).map_err(io_failure(&path))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn export(project: &Project, out: Option<PathBuf>) -> Result<(), Failure> {
    let l = load(project)?;
    let stats = compute_stats(&l.model, &l.store);
    let usage = guideword_usage(&l.store, &l.registry);
    let files = export_csv(&l.store, Some((&stats, &usage)));
    let dir = out.unwrap_or_else(|| project.out_dir().join("csv"));
    write_csv_dir(&dir, &files).map_err(io_failure(&dir))?;
    println!("wrote {} file(s) to {}", files.len(), dir.display());
    Ok(())
}

fn serve(project: Project, addr: SocketAddr) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    runtime.block_on(hazop_service::serve(project, addr)).map_err(|e| match e {
        hazop_service::ServiceError::Project(p) => Failure::from(p),
        other => Failure::Io(other.to_string()),
    })
}
