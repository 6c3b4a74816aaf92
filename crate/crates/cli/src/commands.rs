use std::fs;
use std::io::Write;
use std::path::Path;

use tilenca::experiment::{run_experiment, run_mode, ExperimentSpec};
use tilenca::quant::calibrate;
use tilenca::shape::{canonical_shapes, catalog_refs, load_shape, lookup_catalog_ref, Catalog};
use tilenca::sim::{render_trace, LinkCodec, RunReport, SimClockConfig, SimMode};
use tilenca::trainer::{train_with_log, TrainConfig};
use tilenca::weights::{export_firmware_array, load_weights, save_weights};
use tilenca::{Error, Nca, ShapeGrid};

use crate::{ExperimentArgs, ExportArgs, RenderArgs, SimulateArgs, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(Error::Format(m) | Error::Validity(m) | Error::Calibration(m)) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::Format(_) | Error::Validity(_)) => 3,
            CliError::Core(Error::Io { .. }) => 4,
            CliError::Core(Error::Diverged { .. }) => 5,
            CliError::Core(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<(), CliError> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Core(Error::Io {
            path: "<stdout>".into(),
            source: e,
        })),
        _ => Ok(()),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

/// Catalog refs win over paths; anything that looks like a ref but is unknown is a usage error.
pub fn resolve_shape(reference: &str) -> Result<ShapeGrid, CliError> {
    if let Some(shape) = lookup_catalog_ref(reference) {
        return Ok(shape);
    }
    let path = Path::new(reference);
    if path.exists() {
        return Ok(load_shape(path)?);
    }
    Err(CliError::Usage(format!(
        "unknown shape '{reference}'; expected a shape file or one of {}",
        catalog_refs().join(", ")
    )))
}

fn parse_mode(text: &str) -> Result<SimMode, CliError> {
    text.parse::<SimMode>()
        .map_err(|_| CliError::Usage(format!("unknown mode '{text}'; expected sync, listing1 or firmware")))
}

fn load_model(path: &Path) -> Result<(Nca, tilenca::quant::Quantizer), CliError> {
    let (params, quantizer) = load_weights(path)?;
    Ok((Nca::new(&params), quantizer))
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let config = TrainConfig {
        iterations: args.iterations,
        batch_size: args.batch_size,
        rng_seed: args.seed,
        clip_grad_norm: args.clip.then_some(1.0),
        ..TrainConfig::default()
    };
    let shapes = canonical_shapes();
    let stdout = std::io::stdout();
    let (params, report) = train_with_log(&config, &shapes, |log| {
        if !args.quiet {
            let _ = writeln!(stdout.lock(), "{log}");
        }
    })?;
    let quantizer = calibrate(&Nca::new(&params), &shapes)?;
    save_weights(&params, &quantizer, &args.out)?;
    println!("{report}");
    println!("quantizer lo={} hi={}", quantizer.lo(), quantizer.hi());
    println!("wrote {}", args.out.display());
    Ok(())
}

fn clock_from(
    seed: u64,
    max_updates: usize,
    timeout_ms: u64,
    jitter_ms: u64,
    loss_rate: f64,
) -> Result<SimClockConfig, CliError> {
    let clock = SimClockConfig {
        update_timeout_ms: timeout_ms,
        send_jitter_ms: jitter_ms,
        message_loss_rate: loss_rate,
        rng_seed: seed,
        max_updates: u32::try_from(max_updates).unwrap_or(u32::MAX),
    };
    clock.validate()?;
    Ok(clock)
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mode = match args.mode.as_deref().or(args.mode_arg.as_deref()) {
        Some(m) => parse_mode(m)?,
        None => SimMode::Firmware,
    };
    let shape = resolve_shape(&args.shape)?;
    let (nca, quantizer) = load_model(&args.weights)?;
    let s = &args.sim;
    let clock = if mode == SimMode::Firmware {
        clock_from(s.seed, s.max_updates, s.timeout_ms, s.jitter_ms, s.loss_rate)?
    } else {
        SimClockConfig::with_seed(s.seed)
    };
    let report = run_mode(
        &nca,
        &shape,
        mode,
        s.seed,
        s.max_updates,
        &LinkCodec::Quantized(quantizer),
        &clock,
    )?;
    let export = report.to_export();
    if let Some(path) = &args.export {
        write_file(path, export.as_bytes())?;
    }
    emit(&format!("{export}\n{}\n", render_trace(&report)))?;
    match report.convergence_update() {
        Some(u) => println!("converged at update {u} to {}", report.label()),
        None => println!("did not converge to {}", report.label()),
    }
    Ok(())
}

pub fn experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let catalog = Catalog::from_name(&args.name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown catalog '{}'; expected canonical, scaled_down or scaled_up",
            args.name
        ))
    })?;
    let mut spec = ExperimentSpec::new(catalog);
    if let Some(m) = &args.mode {
        spec.mode = parse_mode(m)?;
    }
    if !args.seeds.is_empty() {
        spec.seeds = args.seeds.clone();
    }
    spec.max_updates = args.max_updates;
    if spec.mode == SimMode::Firmware {
        spec.clock = clock_from(0, args.max_updates, args.timeout_ms, args.jitter_ms, args.loss_rate)?;
    }
    let (nca, quantizer) = load_model(&args.weights)?;
    let outcome = run_experiment(&spec, &nca, &quantizer)?;
    if let Some(dir) = &args.export_dir {
        fs::create_dir_all(dir).map_err(|source| {
            CliError::Core(Error::Io {
                path: dir.clone(),
                source,
            })
        })?;
        for run in &outcome.runs {
            let name = format!("{}_{}_seed{}.txt", catalog.prefix(), run.label, run.seed);
            write_file(&dir.join(name), run.report.to_export().as_bytes())?;
        }
    }
    println!("{outcome}");
    Ok(())
}

pub fn export(args: ExportArgs) -> Result<(), CliError> {
    let (params, quantizer) = load_weights(&args.weights)?;
    let text = export_firmware_array(&params, &quantizer);
    match &args.out {
        Some(path) => write_file(path, text.as_bytes()),
        None => emit(&text),
    }
}

pub fn render(args: RenderArgs) -> Result<(), CliError> {
    let report = RunReport::from_export(&read_text(&args.report)?)?;
    println!("{}", render_trace(&report));
    match report.convergence_update() {
        Some(u) => println!("converged at update {u}"),
        None => println!("did not converge"),
    }
    Ok(())
}
