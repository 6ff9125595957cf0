//! Subcommand execution: validate the full configuration first, compute
//! into memory buffers, then write every output file plus the manifest.
//! A failed validation therefore never leaves partial outputs behind.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use gfd_core::coverage::{run_coverage_continuous, run_coverage_discrete};
use gfd_core::density::{fisher_fiducial, tabulate_gfd};
use gfd_core::discrete::{discrete_bounds, slp_violation_demo};
use gfd_core::error::Error as CoreError;
use gfd_core::export;
use gfd_core::grid::{ParamBox, ParameterGrid};
use gfd_core::model::{
    BuiltinModel, GridConfig, ModelConfig, ModelKind, ParamSpaceConfig,
};
use gfd_core::principles::{check_slp_pair_sequential, wcp_demo};
use gfd_core::sampler::{
    sample_gfd_discrete, sample_gfd_eps, sample_gfd_exact, Norm, Representative, SamplerOptions,
};
use gfd_core::stats::normal_cdf;

use crate::args::*;

pub struct CliError {
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { exit_code: 2, message: message.into() }
    }

    fn numeric(err: CoreError) -> Self {
        Self { exit_code: 3, message: err.to_string() }
    }

    fn io(err: std::io::Error) -> Self {
        Self { exit_code: 3, message: format!("i/o: {err}") }
    }
}

// ---------------------------------------------------------------------------
// Small parsers.

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            t.parse::<f64>().map_err(|e| {
                CliError::config(format!("{what}: entry {} ({t:?}): {e}", i + 1))
            })
        })
        .collect()
}

fn parse_counts(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(['x', 'X'])
        .enumerate()
        .map(|(i, t)| {
            t.trim().parse::<usize>().map_err(|e| {
                CliError::config(format!("--grid: axis {} ({t:?}): {e}", i + 1))
            })
        })
        .collect()
}

fn parse_box(text: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for (i, part) in text.split(',').enumerate() {
        let (l, h) = part.split_once(':').ok_or_else(|| {
            CliError::config(format!("--box: range {} ({part:?}) must be lo:hi", i + 1))
        })?;
        lo.push(l.trim().parse::<f64>().map_err(|e| {
            CliError::config(format!("--box: range {} lower bound: {e}", i + 1))
        })?);
        hi.push(h.trim().parse::<f64>().map_err(|e| {
            CliError::config(format!("--box: range {} upper bound: {e}", i + 1))
        })?);
    }
    Ok((lo, hi))
}

fn read_data_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        for (col, tok) in line.split(',').map(str::trim).enumerate() {
            if tok.is_empty() {
                continue;
            }
            values.push(tok.parse::<f64>().map_err(|e| {
                CliError::config(format!(
                    "{}: line {}, field {}: {e}",
                    path.display(),
                    line_no + 1,
                    col + 1
                ))
            })?);
        }
    }
    if values.is_empty() {
        return Err(CliError::config(format!("{}: no data values found", path.display())));
    }
    Ok(values)
}

fn resolve_data(
    inline: &Option<String>,
    file: &Option<PathBuf>,
) -> Result<Option<Vec<f64>>, CliError> {
    match (inline, file) {
        (Some(text), None) => Ok(Some(parse_f64_list(text, "--data")?)),
        (None, Some(path)) => Ok(Some(read_data_file(path)?)),
        (None, None) => Ok(None),
        (Some(_), Some(_)) => Err(CliError::config("give --data or --data-file, not both")),
    }
}

// ---------------------------------------------------------------------------
// Model resolution: flags, or a TOML/JSON config file.

fn load_model_config(path: &Path) -> Result<ModelConfig, CliError> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

struct ResolvedModel {
    model: BuiltinModel,
    grid_from_config: Option<Vec<usize>>,
}

fn resolve_model(flags: &ModelFlags) -> Result<ResolvedModel, CliError> {
    let mut config = match (&flags.config, flags.model) {
        (Some(path), None) => load_model_config(path)?,
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                "give the model via --model flags or --config, not both",
            ))
        }
        (None, Some(name)) => {
            let need_n = |what: &str| {
                flags.n.ok_or_else(|| CliError::config(format!("--n is required for {what}")))
            };
            let need_sigmas = || -> Result<(f64, f64), CliError> {
                match (flags.sigma1, flags.sigma2) {
                    (Some(a), Some(b)) => Ok((a, b)),
                    _ => Err(CliError::config(
                        "--sigma1 and --sigma2 are required for two-instrument models",
                    )),
                }
            };
            let model = match name {
                ModelName::NormalLocation => {
                    ModelKind::NormalLocation { n: need_n("normal-location")? }
                }
                ModelName::NormalLs => ModelKind::NormalLs { n: need_n("normal-ls")? },
                ModelName::TwoInstrument => {
                    let (sigma1, sigma2) = need_sigmas()?;
                    ModelKind::TwoInstrument { sigma1, sigma2 }
                }
                ModelName::TwoInstrumentMarginal => {
                    let (sigma1, sigma2) = need_sigmas()?;
                    ModelKind::TwoInstrumentMarginal { sigma1, sigma2 }
                }
                ModelName::Geometric => ModelKind::Geometric,
                ModelName::Binomial => ModelKind::Binomial { n: need_n("binomial")? },
            };
            ModelConfig { model, param_space: None, grid: None }
        }
        (None, None) => return Err(CliError::config("no model given: use --model or --config")),
    };
    if let Some(box_text) = &flags.param_box {
        let (lo, hi) = parse_box(box_text)?;
        config.param_space = Some(ParamSpaceConfig { lo, hi });
    }
    let grid_from_config = config.grid.as_ref().map(|g: &GridConfig| g.counts.clone());
    let model = config.build().map_err(|e| CliError::config(e.to_string()))?;
    Ok(ResolvedModel { model, grid_from_config })
}

fn grid_for(
    model: &BuiltinModel,
    cli_grid: &Option<String>,
    config_grid: &Option<Vec<usize>>,
    default_per_axis: usize,
) -> Result<ParameterGrid, CliError> {
    let dge = model.as_dge();
    let counts = match (cli_grid, config_grid) {
        (Some(text), _) => parse_counts(text)?,
        (None, Some(counts)) => counts.clone(),
        (None, None) => vec![default_per_axis; dge.param_dim()],
    };
    if counts.len() != dge.param_dim() {
        return Err(CliError::config(format!(
            "--grid gives {} axes but the model has {} parameters",
            counts.len(),
            dge.param_dim()
        )));
    }
    ParameterGrid::from_box(dge.param_space(), &counts)
        .map_err(|e| CliError::config(e.to_string()))
}

// ---------------------------------------------------------------------------
// Output buffering and the manifest.

struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, path: &Path, bytes: Vec<u8>) {
        self.files.push((path.to_path_buf(), bytes));
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    subcommand: &'static str,
    config: serde_json::Value,
    seed: Option<u64>,
    workers: usize,
    version: &'static str,
    outputs: Vec<ManifestEntry>,
}

fn finalize(
    subcommand: &'static str,
    config: &impl Serialize,
    seed: Option<u64>,
    workers: usize,
    manifest_path: Option<&Path>,
    outputs: OutputSet,
) -> Result<(), CliError> {
    let entries = outputs
        .files
        .iter()
        .map(|(path, bytes)| ManifestEntry {
            path: path.display().to_string(),
            sha256: Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect(),
        })
        .collect();
    let manifest = Manifest {
        subcommand,
        config: serde_json::to_value(config)
            .map_err(|e| CliError::config(format!("config serialization: {e}")))?,
        seed,
        workers,
        version: env!("CARGO_PKG_VERSION"),
        outputs: entries,
    };
    for (path, bytes) in &outputs.files {
        std::fs::write(path, bytes).map_err(CliError::io)?;
    }
    let default_path = outputs
        .files
        .first()
        .map(|(p, _)| p.with_extension("manifest.json"))
        .unwrap_or_else(|| PathBuf::from("manifest.json"));
    let path = manifest_path.unwrap_or(&default_path);
    let mut buf = Vec::new();
    export::to_json(&manifest, &mut buf).map_err(CliError::numeric)?;
    std::fs::write(path, buf).map_err(CliError::io)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Dispatch.

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Density(a) => cmd_density(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::SlpDemo(a) => cmd_slp_demo(a),
        Command::WcpDemo(a) => cmd_wcp_demo(a),
        Command::SlpPair(a) => cmd_slp_pair(a),
        Command::Coverage(a) => cmd_coverage(a),
        Command::Fisher(a) => cmd_fisher(a),
    }
}

fn cmd_density(a: DensityArgs) -> Result<(), CliError> {
    let resolved = resolve_model(&a.model)?;
    let data = resolve_data(&a.data, &a.data_file)?
        .ok_or_else(|| CliError::config("density needs --data or --data-file"))?;
    let dge = resolved.model.as_dge();
    if data.len() != dge.data_dim() {
        return Err(CliError::config(format!(
            "data has {} values but the model expects {}",
            data.len(),
            dge.data_dim()
        )));
    }
    let grid = grid_for(&resolved.model, &a.grid, &resolved.grid_from_config, 400)?;

    let fd = tabulate_gfd(dge, &data, &grid).map_err(CliError::numeric)?;

    let mut outputs = OutputSet::new();
    let mut csv = Vec::new();
    export::density_to_csv(&fd, &mut csv).map_err(CliError::numeric)?;
    outputs.add(&a.out, csv);
    if let Some(json_path) = &a.json {
        let mut buf = Vec::new();
        export::to_json(&fd, &mut buf).map_err(CliError::numeric)?;
        outputs.add(json_path, buf);
    }
    finalize("density", &a, None, 1, a.manifest.as_deref(), outputs)
}

fn cmd_sample(a: SampleArgs) -> Result<(), CliError> {
    let resolved = resolve_model(&a.model)?;
    let opts = SamplerOptions {
        norm: match a.norm {
            NormName::L2 => Norm::L2,
            NormName::Linf => Norm::Linf,
        },
        workers: a.workers,
        budget: a.budget,
        representative: match a.representative {
            RepresentativeName::CdfMidpoint => Representative::CdfMidpoint,
            RepresentativeName::RandomEndpoint => Representative::RandomEndpoint,
        },
        ..Default::default()
    };
    if a.draws == 0 {
        return Err(CliError::config("--draws must be >= 1"));
    }
    let data = resolve_data(&a.data, &a.data_file)?;

    let mut outputs = OutputSet::new();
    let emit = |path: &Path, set: &gfd_core::sampler::SampleSet,
                outputs: &mut OutputSet|
     -> Result<(), CliError> {
        let mut csv = Vec::new();
        export::samples_to_csv(set, &mut csv).map_err(CliError::numeric)?;
        outputs.add(path, csv);
        let mut meta = Vec::new();
        export::to_json(&set.meta, &mut meta).map_err(CliError::numeric)?;
        outputs.add(&path.with_extension("meta.json"), meta);
        Ok(())
    };

    if let Some(discrete) = resolved.model.as_discrete() {
        let observed = a
            .observed
            .ok_or_else(|| CliError::config("discrete models need --observed"))?;
        if a.eps.is_some() || a.eps_ladder.is_some() {
            return Err(CliError::config(
                "discrete models condition exactly; --eps does not apply",
            ));
        }
        let set = sample_gfd_discrete(discrete, observed, a.draws, a.seed, &opts)
            .map_err(CliError::numeric)?;
        emit(&a.out, &set, &mut outputs)?;
        return finalize("sample", &a, Some(a.seed), opts.workers, a.manifest.as_deref(), outputs);
    }

    let dge = resolved.model.as_dge();
    let data = data.ok_or_else(|| CliError::config("continuous models need --data"))?;
    if data.len() != dge.data_dim() {
        return Err(CliError::config(format!(
            "data has {} values but the model expects {}",
            data.len(),
            dge.data_dim()
        )));
    }

    let ladder: Vec<f64> = match (&a.eps, &a.eps_ladder) {
        (Some(e), None) => vec![*e],
        (None, Some(text)) => parse_f64_list(text, "--eps-ladder")?,
        (None, None) => Vec::new(),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    if ladder.is_empty() {
        // Exact zero-residual conditioning; only some models support it.
        let set = sample_gfd_exact(dge, &data, a.draws, a.seed, &opts)
            .map_err(CliError::numeric)?;
        emit(&a.out, &set, &mut outputs)?;
    } else {
        if ladder.iter().any(|&e| e <= 0.0) {
            return Err(CliError::config("tolerances must be positive"));
        }
        let grid = grid_for(&resolved.model, &a.grid, &resolved.grid_from_config, 40)?;
        for &eps in &ladder {
            let set = sample_gfd_eps(dge, &data, eps, a.draws, &grid, a.seed, &opts)
                .map_err(CliError::numeric)?;
            let path = if ladder.len() == 1 {
                a.out.clone()
            } else {
                rung_path(&a.out, eps)
            };
            emit(&path, &set, &mut outputs)?;
        }
    }
    finalize("sample", &a, Some(a.seed), opts.workers, a.manifest.as_deref(), outputs)
}

fn rung_path(base: &Path, eps: f64) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("samples");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_eps{eps}.{ext}"))
}

fn cmd_bounds(a: BoundsArgs) -> Result<(), CliError> {
    let resolved = resolve_model(&a.model)?;
    let discrete = resolved
        .model
        .as_discrete()
        .ok_or_else(|| CliError::config("bounds applies to lattice models"))?;
    let grid = ParameterGrid::from_box(discrete.param_space(), &[a.grid])
        .map_err(|e| CliError::config(e.to_string()))?;
    let bounds = discrete_bounds(discrete, a.observed, &grid).map_err(CliError::numeric)?;
    let mut outputs = OutputSet::new();
    let mut csv = Vec::new();
    export::bounds_to_csv(&bounds, &mut csv).map_err(CliError::numeric)?;
    outputs.add(&a.out, csv);
    finalize("bounds", &a, None, 1, a.manifest.as_deref(), outputs)
}

fn cmd_slp_demo(a: SlpDemoArgs) -> Result<(), CliError> {
    if a.n < 2 {
        return Err(CliError::config("--n must be >= 2"));
    }
    let grid = ParameterGrid::line(1e-6, 1.0 - 1e-6, a.grid)
        .map_err(|e| CliError::config(e.to_string()))?;
    let report = slp_violation_demo(a.n, &grid).map_err(CliError::numeric)?;
    let mut outputs = OutputSet::new();
    let mut csv = Vec::new();
    export::slp_demo_to_csv(&report, &mut csv).map_err(CliError::numeric)?;
    outputs.add(&a.out, csv);
    if let Some(json_path) = &a.json {
        #[derive(Serialize)]
        struct GapSummary<'a> {
            n: usize,
            sup_gap_upper: f64,
            sup_gap_lower: f64,
            sup_gap_half: f64,
            max_width_geometric: f64,
            max_width_binomial: f64,
            grid_nodes: usize,
            note: &'a str,
        }
        let mut buf = Vec::new();
        export::to_json(
            &GapSummary {
                n: report.n,
                sup_gap_upper: report.sup_gap_upper,
                sup_gap_lower: report.sup_gap_lower,
                sup_gap_half: report.sup_gap_half,
                max_width_geometric: report.max_width_geometric,
                max_width_binomial: report.max_width_binomial,
                grid_nodes: a.grid,
                note: "upper bounds coincide; the stopping rule acts through the lower bound",
            },
            &mut buf,
        )
        .map_err(CliError::numeric)?;
        outputs.add(json_path, buf);
    }
    finalize("slp-demo", &a, None, 1, a.manifest.as_deref(), outputs)
}

fn cmd_wcp_demo(a: WcpDemoArgs) -> Result<(), CliError> {
    if a.m != 1 && a.m != 2 {
        return Err(CliError::config("--m must be 1 or 2"));
    }
    if !(a.sigma1 > 0.0 && a.sigma1 < a.sigma2) {
        return Err(CliError::config("need 0 < sigma1 < sigma2"));
    }
    if a.draws == 0 {
        return Err(CliError::config("--draws must be >= 1"));
    }
    let opts = SamplerOptions { workers: a.workers, ..Default::default() };
    let report = wcp_demo(a.sigma1, a.sigma2, a.x, a.m, a.draws, a.seed, &opts)
        .map_err(CliError::numeric)?;
    let mut outputs = OutputSet::new();
    let mut buf = Vec::new();
    export::to_json(&report, &mut buf).map_err(CliError::numeric)?;
    outputs.add(&a.out, buf);
    if let Some(csv_path) = &a.csv {
        let mut csv = Vec::new();
        use std::io::Write;
        writeln!(csv, "theta,conditional_pdf,mixture_pdf,conditional_hist,marginal_hist")
            .map_err(CliError::io)?;
        for row in &report.table {
            writeln!(
                csv,
                "{},{},{},{},{}",
                row.theta,
                row.conditional_pdf,
                row.mixture_pdf,
                row.conditional_hist,
                row.marginal_hist
            )
            .map_err(CliError::io)?;
        }
        outputs.add(csv_path, csv);
    }
    finalize("wcp-demo", &a, Some(a.seed), a.workers, a.manifest.as_deref(), outputs)
}

fn cmd_slp_pair(a: SlpPairArgs) -> Result<(), CliError> {
    let theta = parse_f64_list(&a.theta, "--theta")?;
    if theta.is_empty() {
        return Err(CliError::config("--theta must list at least one value"));
    }
    if a.sigma <= 0.0 {
        return Err(CliError::config("--sigma must be positive"));
    }
    if a.reps == 0 {
        return Err(CliError::config("--reps must be >= 1"));
    }
    let report = check_slp_pair_sequential(a.sigma, a.k_max, &theta, a.reps, a.seed)
        .map_err(CliError::numeric)?;
    let mut outputs = OutputSet::new();
    let mut buf = Vec::new();
    export::to_json(&report, &mut buf).map_err(CliError::numeric)?;
    outputs.add(&a.out, buf);
    if let Some(csv_path) = &a.csv {
        let mut csv = Vec::new();
        export::slp_pair_to_csv(&report, &mut csv).map_err(CliError::numeric)?;
        outputs.add(csv_path, csv);
    }
    finalize("slp-pair", &a, Some(a.seed), 1, a.manifest.as_deref(), outputs)
}

fn cmd_coverage(a: CoverageArgs) -> Result<(), CliError> {
    let resolved = resolve_model(&a.model)?;
    let levels = parse_f64_list(&a.level, "--level")?;
    if levels.iter().any(|&l| !(0.0 < l && l < 1.0)) {
        return Err(CliError::config("levels must be inside (0, 1)"));
    }
    if a.reps == 0 {
        return Err(CliError::config("--reps must be >= 1"));
    }

    #[derive(Serialize)]
    struct CoverageOutput {
        levels: Vec<f64>,
        continuous: Option<Vec<gfd_core::coverage::CoverageReport>>,
        discrete_half: Option<Vec<gfd_core::coverage::CoverageReport>>,
        discrete_envelope: Option<Vec<gfd_core::coverage::CoverageReport>>,
    }

    let output = if let Some(discrete) = resolved.model.as_discrete() {
        let grid = grid_for(&resolved.model, &a.grid, &resolved.grid_from_config, 10_000)?;
        let pairs = run_coverage_discrete(discrete, a.xi_true, &levels, a.reps, &grid, a.seed)
            .map_err(CliError::numeric)?;
        let (half, envelope): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        CoverageOutput {
            levels,
            continuous: None,
            discrete_half: Some(half),
            discrete_envelope: Some(envelope),
        }
    } else {
        let dge = resolved.model.as_dge();
        if dge.param_dim() != 1 {
            return Err(CliError::config(
                "continuous coverage needs a one-parameter model",
            ));
        }
        let grid = grid_for(&resolved.model, &a.grid, &resolved.grid_from_config, 2001)?;
        let reports =
            run_coverage_continuous(dge, &[a.xi_true], &levels, a.reps, &grid, a.seed)
                .map_err(CliError::numeric)?;
        CoverageOutput {
            levels,
            continuous: Some(reports),
            discrete_half: None,
            discrete_envelope: None,
        }
    };

    let mut outputs = OutputSet::new();
    let mut buf = Vec::new();
    export::to_json(&output, &mut buf).map_err(CliError::numeric)?;
    outputs.add(&a.out, buf);
    finalize("coverage", &a, Some(a.seed), 1, a.manifest.as_deref(), outputs)
}

fn cmd_fisher(a: FisherArgs) -> Result<(), CliError> {
    let (lo, hi) = parse_box(&a.param_box)?;
    if lo.len() != 1 {
        return Err(CliError::config("--box must give exactly one range"));
    }
    let pbox =
        ParamBox::new(lo, hi).map_err(|e| CliError::config(e.to_string()))?;
    let grid = ParameterGrid::from_box(&pbox, &[a.grid])
        .map_err(|e| CliError::config(e.to_string()))?;
    let cdf: Box<dyn Fn(f64, f64) -> f64> = match a.cdf {
        CdfName::NormalLocation => Box::new(|x, t| normal_cdf(x - t)),
        CdfName::ExponentialRate => Box::new(|x, t| {
            if x <= 0.0 {
                0.0
            } else {
                1.0 - (-t * x).exp()
            }
        }),
    };
    let fd = fisher_fiducial(|x, t| cdf(x, t), a.x, &grid).map_err(CliError::numeric)?;
    let mut outputs = OutputSet::new();
    let mut csv = Vec::new();
    export::density_to_csv(&fd, &mut csv).map_err(CliError::numeric)?;
    outputs.add(&a.out, csv);
    if let Some(json_path) = &a.json {
        let mut buf = Vec::new();
        export::to_json(&fd, &mut buf).map_err(CliError::numeric)?;
        outputs.add(json_path, buf);
    }
    finalize("fisher", &a, None, 1, a.manifest.as_deref(), outputs)
}
