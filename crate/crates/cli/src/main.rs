//! Command-line front end: single-trajectory simulation, bundled study
//! presets (decay traces and sphere-averaged sweeps), and the synthetic
//! counts -> tomography -> fit pipeline. Every output file carries its full
//! configuration in a comment/field header and is byte-reproducible for a
//! fixed seed.

mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use bbcav::analytics::{
    bloch_average, fidelity_compensated, AveragedQuantity, EvolutionPath, SphereSampling,
};
use bbcav::cavity::{evolve, CavityConfig, CavityMode, QuadratureScheme, SpectrumModel};
use bbcav::pipeline::{pulses_for_target_counts, run as run_pipeline_chain, PipelineConfig};
use bbcav::qubit::StateLabel;
use svg::{LineChart, Series};

#[derive(Parser)]
#[command(
    name = "bbcav",
    version,
    about = "Polarization dephasing in a dispersive ring cavity, with and without bang-bang decoupling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one input state and write purity/fidelity/state columns.
    Simulate(SimulateArgs),
    /// Emit the bundled study presets as CSV plus SVG plots.
    Reproduce(ReproduceArgs),
    /// Synthetic counts -> tomography -> decay fit, deterministic per seed.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Free,
    FreeSb,
    Bb,
    BbSb,
}

impl From<ModeArg> for CavityMode {
    fn from(m: ModeArg) -> CavityMode {
        match m {
            ModeArg::Free => CavityMode::Free,
            ModeArg::FreeSb => CavityMode::FreeSb,
            ModeArg::Bb => CavityMode::Bb,
            ModeArg::BbSb => CavityMode::BbSb,
        }
    }
}

#[derive(Parser)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Free)]
    mode: ModeArg,
    /// Retarder delay angle in radians (SB modes only).
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Gaussian phase spread in radians.
    #[arg(long, default_value_t = 0.0839)]
    sigma_phi: f64,
    /// Phase at the pulse center in radians.
    #[arg(long, default_value_t = 0.2182)]
    phi0: f64,
    #[arg(long, default_value_t = 30)]
    n_max: u32,
    /// One of H, V, D, A, R, L.
    #[arg(long, default_value = "D")]
    input_state: String,
    #[arg(long, default_value_t = 64)]
    quad_nodes: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser)]
struct ReproduceArgs {
    /// 2: named-state decay traces; 3: sphere-averaged retarder sweep.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    figure: u8,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.0839)]
    sigma_phi: f64,
    #[arg(long, default_value_t = 0.2182)]
    phi0: f64,
    /// Horizontal extent in decoupling cycles (two round trips each).
    #[arg(long, default_value_t = 20)]
    n_double_max: u32,
    #[arg(long, default_value_t = 64)]
    quad_nodes: usize,
    #[arg(long, default_value_t = 256)]
    sphere_points: usize,
    /// Comma-separated retarder angles in radians (figure 3).
    #[arg(long)]
    thetas: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Parser)]
struct PipelineArgs {
    /// JSON configuration file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Target expected counts per setting at unit projector overlap for the
    /// brightest analyzed round trip; rescales the pulse count.
    #[arg(long)]
    counts: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    sigma_phi: Option<f64>,
    #[arg(long)]
    phi0: Option<f64>,
    #[arg(long)]
    input_state: Option<String>,
    #[arg(long)]
    n_min: Option<u32>,
    #[arg(long)]
    n_max: Option<u32>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Reproduce(args) => reproduce(args),
        Command::Pipeline(args) => pipeline(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn parse_state(text: &str) -> Result<StateLabel> {
    text.parse::<StateLabel>()
        .map_err(|e| anyhow::anyhow!("{e}"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let label = parse_state(&args.input_state)?;
    let mode: CavityMode = args.mode.into();
    let config = CavityConfig::new(mode, args.theta)?;
    let spectrum = SpectrumModel::new(args.phi0, args.sigma_phi)?;
    let quad = QuadratureScheme::GaussHermite {
        nodes: args.quad_nodes,
    };
    quad.validate()?;
    let input = label.state();

    let mut out = String::new();
    out.push_str("# schema_version = 1\n");
    out.push_str("# command = simulate\n");
    writeln!(out, "# mode = {}", mode_name(mode))?;
    writeln!(out, "# theta = {}", args.theta)?;
    writeln!(out, "# sigma_phi = {}", args.sigma_phi)?;
    writeln!(out, "# phi0 = {}", args.phi0)?;
    writeln!(out, "# input_state = {label}")?;
    writeln!(out, "# quad = gauss-hermite")?;
    writeln!(out, "# quad_nodes = {}", args.quad_nodes)?;
    writeln!(out, "# n_max = {}", args.n_max)?;
    out.push_str(
        "n,purity,fidelity_raw,fidelity_compensated,rho11_re,rho11_im,rho12_re,rho12_im,rho21_re,rho21_im,rho22_re,rho22_im\n",
    );
    for n in 0..=args.n_max {
        let rho = evolve(&input, n, &spectrum, &config, &quad)?;
        let raw = bbcav::qubit::fidelity(&input, &rho);
        let comp = fidelity_compensated(&input, &rho, n, &spectrum, &config);
        write!(out, "{n},{},{raw},{comp}", rho.purity())?;
        for r in 0..2 {
            for c in 0..2 {
                let e = rho.entry(r, c);
                write!(out, ",{},{}", e.re, e.im)?;
            }
        }
        out.push('\n');
    }
    write_file(&args.out, &out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn mode_name(mode: CavityMode) -> &'static str {
    match mode {
        CavityMode::Free => "free",
        CavityMode::FreeSb => "free-sb",
        CavityMode::Bb => "bb",
        CavityMode::BbSb => "bb-sb",
    }
}

fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")
}

fn reproduce(args: ReproduceArgs) -> Result<()> {
    match args.figure {
        2 => reproduce_traces(&args),
        3 => reproduce_sweep(&args),
        _ => unreachable!("clap range"),
    }
}

/// Figure 2 preset: purity and fidelity of the named states H, D, R with
/// and without decoupling, against the number of decoupling cycles.
fn reproduce_traces(args: &ReproduceArgs) -> Result<()> {
    let spectrum = SpectrumModel::new(args.phi0, args.sigma_phi)?;
    let quad = QuadratureScheme::GaussHermite {
        nodes: args.quad_nodes,
    };
    quad.validate()?;
    let states = [StateLabel::H, StateLabel::D, StateLabel::R];
    let protocols = [("free", CavityConfig::free()), ("bb", CavityConfig::bb())];

    struct Row {
        n_double: u32,
        state: StateLabel,
        protocol: &'static str,
        purity: f64,
        raw: f64,
        comp: f64,
    }

    let work: Vec<(StateLabel, &'static str, CavityConfig, u32)> = states
        .iter()
        .flat_map(|&s| {
            protocols.iter().flat_map(move |&(name, config)| {
                (0..=args.n_double_max).map(move |k| (s, name, config, k))
            })
        })
        .collect();
    let pool = build_pool(args.threads)?;
    let rows: Vec<Row> = pool.install(|| {
        work.par_iter()
            .map(|&(state, protocol, config, k)| -> Result<Row> {
                let n = 2 * k;
                let input = state.state();
                let rho = evolve(&input, n, &spectrum, &config, &quad)?;
                Ok(Row {
                    n_double: k,
                    state,
                    protocol,
                    purity: rho.purity(),
                    raw: bbcav::qubit::fidelity(&input, &rho),
                    comp: fidelity_compensated(&input, &rho, n, &spectrum, &config),
                })
            })
            .collect::<Result<_>>()
    })?;

    let header = format!(
        "# schema_version = 1\n# command = reproduce --figure 2\n# sigma_phi = {}\n# phi0 = {}\n# quad_nodes = {}\n# n_double_max = {}\n",
        args.sigma_phi, args.phi0, args.quad_nodes, args.n_double_max
    );
    let mut csv = header.clone();
    csv.push_str("n_double,state,protocol,purity,fidelity_raw,fidelity_compensated\n");
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.n_double, row.state, row.protocol, row.purity, row.raw, row.comp
        )?;
    }
    write_file(&args.out_dir.join("fig2.csv"), &csv)?;

    let comment = format!(
        "command = reproduce --figure 2, sigma_phi = {}, phi0 = {}",
        args.sigma_phi, args.phi0
    );
    for (quantity, file, value) in [
        ("purity", "fig2_purity.svg", 0_usize),
        ("fidelity (compensated)", "fig2_fidelity.svg", 1),
    ] {
        let mut chart = LineChart {
            title: format!("Named-state {quantity} vs decoupling cycles"),
            x_label: "decoupling cycles (two round trips each)".into(),
            y_label: quantity.into(),
            series: Vec::new(),
        };
        for &state in &states {
            for &(protocol, _) in &protocols {
                let points: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.state == state && r.protocol == protocol)
                    .map(|r| {
                        (
                            r.n_double as f64,
                            if value == 0 { r.purity } else { r.comp },
                        )
                    })
                    .collect();
                chart.series.push(Series {
                    label: format!("{state}, {protocol}"),
                    points,
                });
            }
        }
        write_file(&args.out_dir.join(file), &chart.render(&comment))?;
    }
    println!(
        "wrote fig2.csv, fig2_purity.svg, fig2_fidelity.svg in {}",
        args.out_dir.display()
    );
    Ok(())
}

fn parse_thetas(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .with_context(|| format!("bad theta value `{tok}`"))
        })
        .collect()
}

/// Figure 3 preset: sphere-averaged purity and fidelity for a sweep of
/// retarder angles, with and without decoupling.
fn reproduce_sweep(args: &ReproduceArgs) -> Result<()> {
    let spectrum = SpectrumModel::new(args.phi0, args.sigma_phi)?;
    let quad = QuadratureScheme::GaussHermite {
        nodes: args.quad_nodes,
    };
    quad.validate()?;
    let thetas = match &args.thetas {
        Some(text) => parse_thetas(text)?,
        None => vec![
            0.0,
            std::f64::consts::FRAC_PI_8,
            std::f64::consts::FRAC_PI_4,
            3.0 * std::f64::consts::FRAC_PI_8,
            std::f64::consts::FRAC_PI_2,
        ],
    };
    let sampling = SphereSampling {
        points: args.sphere_points,
    };

    struct Row {
        n_double: u32,
        theta: f64,
        protocol: &'static str,
        purity: f64,
        comp: f64,
    }

    let mut work: Vec<(f64, &'static str, CavityConfig, u32)> = Vec::new();
    for &theta in &thetas {
        for k in 0..=args.n_double_max {
            work.push((theta, "free", CavityConfig::free_sb(theta)?, k));
            work.push((theta, "bb", CavityConfig::bb_sb(theta)?, k));
        }
    }

    let path = EvolutionPath::Quadrature(quad);
    let pool = build_pool(args.threads)?;
    let rows: Vec<Row> = pool.install(|| {
        work.par_iter()
            .map(|&(theta, protocol, config, k)| -> Result<Row> {
                let n = 2 * k;
                let purity = bloch_average(
                    AveragedQuantity::Purity,
                    n,
                    &spectrum,
                    &config,
                    &sampling,
                    &path,
                )?;
                let comp = bloch_average(
                    AveragedQuantity::CompensatedFidelity,
                    n,
                    &spectrum,
                    &config,
                    &sampling,
                    &path,
                )?;
                Ok(Row {
                    n_double: k,
                    theta,
                    protocol,
                    purity,
                    comp,
                })
            })
            .collect::<Result<_>>()
    })?;

    let mut csv = format!(
        "# schema_version = 1\n# command = reproduce --figure 3\n# sigma_phi = {}\n# phi0 = {}\n# quad_nodes = {}\n# sphere_points = {}\n# n_double_max = {}\n",
        args.sigma_phi, args.phi0, args.quad_nodes, args.sphere_points, args.n_double_max
    );
    csv.push_str("n_double,theta,protocol,avg_purity,avg_fidelity_compensated\n");
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            row.n_double, row.theta, row.protocol, row.purity, row.comp
        )?;
    }
    write_file(&args.out_dir.join("fig3.csv"), &csv)?;

    let comment = format!(
        "command = reproduce --figure 3, sigma_phi = {}, phi0 = {}",
        args.sigma_phi, args.phi0
    );
    for (quantity, file, use_purity) in [
        ("sphere-averaged purity", "fig3_purity.svg", true),
        (
            "sphere-averaged fidelity (compensated)",
            "fig3_fidelity.svg",
            false,
        ),
    ] {
        let mut chart = LineChart {
            title: format!("{quantity} vs decoupling cycles"),
            x_label: "decoupling cycles (two round trips each)".into(),
            y_label: quantity.into(),
            series: Vec::new(),
        };
        for &theta in &thetas {
            for protocol in ["free", "bb"] {
                let points: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.theta == theta && r.protocol == protocol)
                    .map(|r| {
                        (
                            r.n_double as f64,
                            if use_purity { r.purity } else { r.comp },
                        )
                    })
                    .collect();
                chart.series.push(Series {
                    label: format!("theta = {theta:.4}, {protocol}"),
                    points,
                });
            }
        }
        write_file(&args.out_dir.join(file), &chart.render(&comment))?;
    }
    println!(
        "wrote fig3.csv, fig3_purity.svg, fig3_fidelity.svg in {}",
        args.out_dir.display()
    );
    Ok(())
}

fn pipeline(args: PipelineArgs) -> Result<()> {
    let mut config: PipelineConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = args.mode {
        config.mode = mode.into();
    }
    if let Some(theta) = args.theta {
        config.theta = theta;
    }
    if let Some(sigma) = args.sigma_phi {
        config.sigma_phi = sigma;
    }
    if let Some(phi0) = args.phi0 {
        config.phi0 = phi0;
    }
    if let Some(state) = &args.input_state {
        config.input_state = parse_state(state)?;
    }
    if let Some(n_min) = args.n_min {
        config.n_min = n_min;
    }
    if let Some(n_max) = args.n_max {
        config.n_max = n_max;
    }
    // validate before deriving anything from the merged config
    config.validate()?;
    if let Some(target) = args.counts {
        if target < 0.0 {
            bail!("--counts must be non-negative");
        }
        config.detection.pulses = pulses_for_target_counts(&config, target);
    }
    let result = run_pipeline_chain(&config, args.threads)?;
    let files = result.write_to_dir(&args.out_dir)?;
    println!(
        "wrote {}, {}, {}",
        files.counts_csv.display(),
        files.states_json.display(),
        files.fit_json.display()
    );
    println!(
        "sigma_phi = {:.6} (chi2 = {:.3e})",
        result.report.sigma_phi, result.report.chi2
    );
    Ok(())
}
