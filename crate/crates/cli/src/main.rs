use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hyperlabel::correspondence::{MapSpec, RepresentativePolicy};
use hyperlabel::dcn::{face_safe, is_dcn, DcnSide, FaceMode, LabelSet};
use hyperlabel::degree::{
    boundary_degree_2d, completely_labeled_cells, completely_labeled_triangles, sperner_valid,
    LabeledTriangulation,
};
use hyperlabel::solver::Filter;
use hyperlabel::{label_grid, solve, Correspondence, GridSpec, LabelConfig, SolveReport, SolverConfig};

#[derive(Parser)]
#[command(name = "hyperlabel", version, about = "Fixed points of multivalued maps by orthant labeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search a map for a fixed point and write a JSON report.
    Solve {
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Label one grid and optionally dump it as CSV.
    Label {
        #[arg(long)]
        map: PathBuf,
        #[arg(long = "initial-res", default_value_t = 8)]
        resolution: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value = "centroid")]
        policy: RepresentativePolicy,
        #[arg(long = "dump-grid")]
        dump_grid: Option<PathBuf>,
    },
    /// Decide whether a set of orthant labels is a dC_N set.
    Dcn {
        #[arg(long = "d")]
        dim: usize,
        /// Comma-separated sign strings, e.g. "+++,++-".
        #[arg(long, allow_hyphen_values = true)]
        set: String,
    },
    /// Boundary degree of a labeled triangulation.
    Degree {
        #[arg(long)]
        labeling: PathBuf,
    },
    /// Sperner validity and completely labeled triangles.
    Sperner {
        #[arg(long)]
        labeling: PathBuf,
    },
    /// Solve the best-response map of a 2x2 bimatrix game.
    Game {
        #[arg(long, value_enum, conflicts_with_all = ["a", "b"])]
        game: Option<GameName>,
        /// Row player's payoffs, row-major: "a11,a12,a21,a22".
        #[arg(long = "A", allow_hyphen_values = true, requires = "b")]
        a: Option<String>,
        /// Column player's payoffs, row-major.
        #[arg(long = "B", allow_hyphen_values = true, requires = "a")]
        b: Option<String>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GameName {
    MatchingPennies,
    Coordination,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long = "initial-res", default_value_t = 8)]
    initial_res: usize,
    #[arg(long = "max-depth", default_value_t = 8)]
    max_depth: usize,
    #[arg(long = "refinement-factor", default_value_t = 2)]
    refinement_factor: usize,
    #[arg(long = "face-mode", default_value = "equality")]
    face_mode: FaceMode,
    #[arg(long, default_value = "off")]
    filter: Filter,
    #[arg(long, default_value = "centroid")]
    policy: RepresentativePolicy,
    #[arg(long, default_value_t = 2)]
    radius: usize,
    #[arg(long = "global-pass")]
    global_pass: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the JSON report; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            initial_resolution: self.initial_res,
            max_depth: self.max_depth,
            refinement_factor: self.refinement_factor,
            tolerance: self.tol,
            face_mode: self.face_mode,
            filter: self.filter,
            adaptive_radius: self.radius,
            policy: self.policy,
            seed: self.seed,
            global_pass: self.global_pass,
            ..SolverConfig::default()
        }
    }
}

/// Bad input (exit 2) versus a failed run (exit 1).
enum Failure {
    Input(anyhow::Error),
    Run(anyhow::Error),
}

impl From<hyperlabel::Error> for Failure {
    fn from(e: hyperlabel::Error) -> Self {
        if e.is_validation() {
            Failure::Input(e.into())
        } else {
            Failure::Run(e.into())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.into())
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Input)
}

fn read_map(path: &Path) -> Result<MapSpec, Failure> {
    let text = read_input(path)?;
    MapSpec::from_json(&text)
        .with_context(|| format!("in --map {}", path.display()))
        .map_err(|e| match e.downcast_ref::<hyperlabel::Error>() {
            Some(inner) if !inner.is_validation() => Failure::Run(e),
            _ => Failure::Input(e),
        })
}

fn read_triangulation(path: &Path) -> Result<LabeledTriangulation, Failure> {
    let text = read_input(path)?;
    LabeledTriangulation::from_json(&text)
        .with_context(|| format!("in --labeling {}", path.display()))
        .map_err(Failure::Input)
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.into()))?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(Failure::Run),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn summary(report: &SolveReport) -> String {
    let point: Vec<String> = report.point.iter().map(|x| x.to_string()).collect();
    format!(
        "status={} point=({}) residual={:e}",
        serde_json::to_value(report.status).unwrap().as_str().unwrap(),
        point.join(", "),
        report.residual
    )
}

fn parse_matrix(text: &str, flag: &str) -> Result<[[f64; 2]; 2], Failure> {
    let values: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("invalid {flag}: expected four comma-separated numbers"))
        .map_err(Failure::Input)?;
    if values.len() != 4 || values.iter().any(|v| !v.is_finite()) {
        return Err(Failure::Input(anyhow::anyhow!(
            "invalid {flag}: expected four finite comma-separated numbers, got {}",
            values.len()
        )));
    }
    Ok([[values[0], values[1]], [values[2], values[3]]])
}

#[derive(Serialize)]
struct GameOutput<'a> {
    map: &'a MapSpec,
    report: &'a SolveReport,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { map, solver } => {
            let spec = read_map(&map)?;
            let report = solve(&spec, &solver.config())?;
            write_json(&report, solver.report.as_deref())?;
            if solver.report.is_some() {
                println!("{}", summary(&report));
            }
        }
        Command::Label {
            map,
            resolution,
            tol,
            policy,
            dump_grid,
        } => {
            let spec = read_map(&map)?;
            let f = Correspondence::from_spec(&spec)?;
            let grid = GridSpec::new(spec.domain.clone(), resolution)?;
            let cfg = LabelConfig {
                eps_fix: tol,
                policy,
                ..LabelConfig::default()
            };
            let gl = label_grid(&grid, &f, &cfg)?;
            if let Some(path) = dump_grid {
                let file = fs::File::create(&path)
                    .with_context(|| format!("writing {}", path.display()))
                    .map_err(Failure::Run)?;
                gl.write_csv(io::BufWriter::new(file))?;
            }
            println!(
                "vertices={} fixed_hits={} complete_cells={}",
                gl.len(),
                gl.fixed_hits().count(),
                completely_labeled_cells(&gl)?.len()
            );
        }
        Command::Dcn { dim, set } => {
            let s = LabelSet::parse(dim, &set)?;
            if s.is_empty() {
                return Err(Failure::Input(anyhow::anyhow!("invalid set: must name at least one label")));
            }
            match is_dcn(&s) {
                Some(w) => println!(
                    "dcn=true witness={} side={}",
                    w.sigma,
                    match w.side {
                        DcnSide::Subcube => "subcube",
                        DcnSide::Complement => "complement",
                    }
                ),
                None => println!(
                    "dcn=false subcube_safe={}",
                    face_safe(&s, FaceMode::Subcube)
                ),
            }
        }
        Command::Degree { labeling } => {
            let t = read_triangulation(&labeling)?;
            let d = boundary_degree_2d(&t.boundary_cycle()?, t.n)?;
            println!("{}", d.degree);
            if d.orientation_ambiguous {
                eprintln!("warning: a boundary step joins opposite targets; counted as a positive half turn");
            }
        }
        Command::Sperner { labeling } => {
            let t = read_triangulation(&labeling)?;
            let valid = sperner_valid(&t)?;
            let complete = completely_labeled_triangles(&t);
            let list: Vec<String> = complete.iter().map(|k| k.to_string()).collect();
            println!(
                "sperner_valid={valid} completely_labeled={} triangles=[{}]",
                complete.len(),
                list.join(",")
            );
        }
        Command::Game { game, a, b, solver } => {
            let spec = match (game, a, b) {
                (Some(GameName::MatchingPennies), _, _) => MapSpec::matching_pennies(),
                (Some(GameName::Coordination), _, _) => MapSpec::coordination(),
                (None, Some(a), Some(b)) => {
                    MapSpec::bimatrix(parse_matrix(&a, "--A")?, parse_matrix(&b, "--B")?)?
                }
                _ => {
                    return Err(Failure::Input(anyhow::anyhow!(
                        "invalid game: pass --game or both --A and --B"
                    )))
                }
            };
            let report = solve(&spec, &solver.config())?;
            write_json(&GameOutput { map: &spec, report: &report }, solver.report.as_deref())?;
            if solver.report.is_some() {
                println!("{}", summary(&report));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
