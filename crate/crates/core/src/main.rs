use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cprank::cones::{extreme_rays, few_rays_factor};
use cprank::error::{CpError, Result};
use cprank::fixtures::{paper_matrix, random_dn, DnStyle, PaperExample};
use cprank::graphcond::{classify_graph, cycle_necessary, graph_of, kaykobad_factor, triangle_free_criterion};
use cprank::io::{format_matrix, read_matrix, MatrixFormat};
use cprank::nnq::{find_nnq_witness, nnq_factor, WitnessSearch, DEFAULT_MAX_SUBSETS};
use cprank::pipeline::{analyze, AnalyzeConfig, Verdict};
use cprank::report::{real_rows, reals, to_json, to_pretty_json, to_text, JsonCertificate, Real};
use cprank::rotate::SearchBudget;
use cprank::srfactor::sr_factor;
use cprank::{SymmetricMatrix, Tolerances};

#[derive(Parser)]
#[command(name = "cprank", version, about = "Completely positive factorization with cp-rank equal to rank")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full decision cascade.
    Analyze(Common),
    /// Print the best verified nonnegative factor.
    Factor(Common),
    /// Search for an nnq column basis of a symmetric rank factor.
    Nnq(Common),
    /// Extreme rays of the column cone.
    Rays(Common),
    /// Graph-pattern conditions.
    Graph(Common),
    /// Write a fixture or random instance.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dense,
    Csv,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Dense => MatrixFormat::DenseText,
            FormatArg::Csv => MatrixFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Json,
    Text,
}

#[derive(Args)]
struct Common {
    /// Matrix file.
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    input: Option<PathBuf>,
    /// Named example matrix instead of a file (e.g. EX2_7).
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long, value_enum, default_value = "dense")]
    format: FormatArg,
    #[arg(long, value_enum, default_value = "json")]
    report: ReportArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restarts for rotation searches.
    #[arg(long)]
    restarts: Option<usize>,
    /// Eigenvalue threshold for both PSD and rank decisions.
    #[arg(long)]
    tol_psd: Option<f64>,
    #[arg(long)]
    tol_nonneg: Option<f64>,
    #[arg(long)]
    tol_residual: Option<f64>,
    /// Attempt rotations for rank 5 and above.
    #[arg(long)]
    heuristic: bool,
    /// Budget on nnq subset tries.
    #[arg(long, default_value_t = DEFAULT_MAX_SUBSETS)]
    max_subsets: usize,
}

impl Common {
    fn load(&self) -> Result<(SymmetricMatrix, AnalyzeConfig)> {
        let (matrix, mut tol) = match (&self.input, &self.fixture) {
            (_, Some(id)) => {
                let id: PaperExample = id.parse()?;
                (paper_matrix(id), id.tolerances())
            }
            (Some(path), None) => {
                let tol = Tolerances::default();
                (read_matrix(path, self.format.into(), tol.eps_sym)?, tol)
            }
            (None, None) => return Err(CpError::InvalidInput("no input given".into())),
        };
        if let Some(x) = self.tol_psd {
            tol.eps_psd = x;
            tol.eps_rank = x;
        }
        if let Some(x) = self.tol_nonneg {
            tol.eps_nonneg = x;
        }
        if let Some(x) = self.tol_residual {
            tol.eps_residual = x;
        }
        tol.validate()?;
        let mut budget = SearchBudget::default();
        if let Some(r) = self.restarts {
            budget.restarts = r;
        }
        let config = AnalyzeConfig {
            tol,
            seed: self.seed,
            budget,
            heuristic: self.heuristic,
            max_subsets: self.max_subsets,
        };
        Ok((matrix, config))
    }
}

#[derive(Args)]
struct GenArgs {
    /// Example id (EX1_2, EX2_7, EX2_8, EX3_3, EX3_7, EX3_9).
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    fixture: Option<String>,
    /// Random style: rotated, gram or soules.
    #[arg(long, requires_all = ["n", "rank"])]
    random: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "dense")]
    format: FormatArg,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct FactorOutput {
    method: Option<&'static str>,
    verdict: String,
    certificate: Option<JsonCertificate>,
}

#[derive(Serialize)]
struct NnqOutput {
    rank: usize,
    outcome: &'static str,
    indices: Option<Vec<usize>>,
    detval: Option<Real>,
    p: Option<Vec<Vec<Real>>>,
    certificate: Option<JsonCertificate>,
}

#[derive(Serialize)]
struct RaysOutput {
    rank: usize,
    m: usize,
    extreme_indices: Vec<usize>,
    residual: Real,
    certificate: Option<JsonCertificate>,
}

#[derive(Serialize)]
struct GraphOutput {
    edges: Vec<(usize, usize)>,
    edge_count: usize,
    is_cycle: bool,
    is_triangle_free: bool,
    is_tree: bool,
    is_connected: bool,
    cycle_condition: &'static str,
    cycle_sums: Vec<Real>,
    cprk_lower_bound: Option<usize>,
    triangle_free: &'static str,
    triangle_free_cp_rank: Option<usize>,
    kaykobad_rows: Option<usize>,
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze(c) => {
            let (a, config) = c.load()?;
            let report = analyze(&a, &config)?;
            match c.report {
                ReportArg::Json => emit(&to_json(&report))?,
                ReportArg::Text => emit(&to_text(&report))?,
            }
            Ok(exit_for(report.verdict))
        }
        Command::Factor(c) => {
            let (a, config) = c.load()?;
            let report = analyze(&a, &config)?;
            let out = FactorOutput {
                method: report.certificate.as_ref().map(|c| c.method.tag()),
                verdict: report.verdict.label(),
                certificate: report.certificate.as_ref().map(JsonCertificate::from),
            };
            emit(&to_pretty_json(&out))?;
            Ok(if report.certificate.is_some() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Nnq(c) => {
            let (a, config) = c.load()?;
            let b = sr_factor(&a, &config.tol)?;
            let search = find_nnq_witness(&b, &config.tol, config.max_subsets);
            let mut out = NnqOutput {
                rank: b.rank(),
                outcome: search.label(),
                indices: None,
                detval: None,
                p: None,
                certificate: None,
            };
            if let WitnessSearch::Found(w) = &search {
                out.indices = Some(w.indices_one_based());
                out.detval = Some(Real(w.detval));
                out.p = Some(real_rows(&w.p));
                if let Ok(cert) = nnq_factor(&a, w, &config.tol, config.seed, config.budget) {
                    out.certificate = Some(JsonCertificate::from(&cert));
                }
            }
            emit(&to_pretty_json(&out))?;
            Ok(if search.witness().is_some() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Rays(c) => {
            let (a, config) = c.load()?;
            let rank = sr_factor(&a, &config.tol)?.rank();
            let cone = extreme_rays(&a, &config.tol)?;
            let certificate = if cone.m <= 4 {
                few_rays_factor(&a, &cone, &config.tol, config.seed, config.budget)
                    .ok()
                    .map(|c| JsonCertificate::from(&c))
            } else {
                None
            };
            let out = RaysOutput {
                rank,
                m: cone.m,
                extreme_indices: cone.extreme_one_based(),
                residual: Real(cone.residual),
                certificate,
            };
            emit(&to_pretty_json(&out))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph(c) => {
            let (a, config) = c.load()?;
            let tol = config.tol;
            let g = graph_of(&a, &tol);
            let class = classify_graph(&g);
            let cycle = cycle_necessary(&a, &tol);
            let tf = triangle_free_criterion(&a, &tol)?;
            let kk = kaykobad_factor(&a, &tol)?;
            let out = GraphOutput {
                edges: g.edges.iter().map(|&(i, j)| (i + 1, j + 1)).collect(),
                edge_count: g.edge_count(),
                is_cycle: class.is_cycle,
                is_triangle_free: class.is_triangle_free,
                is_tree: class.is_tree,
                is_connected: class.is_connected,
                cycle_condition: cycle.outcome.label(),
                cycle_sums: reals(&[2.0 * cycle.upper_sum, cycle.trace]),
                cprk_lower_bound: cycle.cprk_lower_bound,
                triangle_free: tf.outcome.label(),
                triangle_free_cp_rank: match tf.outcome {
                    cprank::graphcond::TriangleFreeOutcome::Cp { cp_rank } => Some(cp_rank),
                    _ => None,
                },
                kaykobad_rows: kk.map(|k| k.certificate.rows()),
            };
            emit(&to_pretty_json(&out))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen(g) => {
            let a = match (&g.fixture, &g.random) {
                (Some(id), _) => paper_matrix(id.parse()?),
                (None, Some(style)) => {
                    let style: DnStyle = style.parse()?;
                    let n = g.n.unwrap_or(0);
                    let r = g.rank.unwrap_or(0);
                    random_dn(n, r, g.seed, style)?
                }
                (None, None) => return Err(CpError::InvalidInput("give --fixture or --random".into())),
            };
            let text = format_matrix(&a, g.format.into());
            match &g.output {
                Some(path) => std::fs::write(path, text)?,
                None => emit(&text)?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_for(verdict: Verdict) -> ExitCode {
    if verdict.is_definitive() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
