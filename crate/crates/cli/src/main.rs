//! Command-line front end: sweeps, calibration, the multilevel staircase,
//! logic truth tables and cascades, array management and the full in-situ
//! encryption workflow. Exit codes: 0 success, 1 domain failure, 2 usage.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mhdd_core::array::{capacity_report, ArrayGeometry, MolecularArray};
use mhdd_core::codec::{program_state, read_level, staircase_metrics, LevelCodec};
use mhdd_core::crypto::{
    decompose_rgb, decrypt_in_situ, encrypt_in_situ, gen_key, load_ppm, quantize_plane, render_image,
    save_ppm, stats, store_plaintext, word_bits, words_to_text, Channel, KeyMatrix,
};
use mhdd_core::device::{
    apply_waveform, calibrate, make_dual_sweep, make_sweep, spawn_unit, CalTarget, ModelParams,
    UnitState,
};
use mhdd_core::logic::{cascade_eval, parse_expr, truth_table, truth_table_csv, UnitPool};
use mhdd_core::protocols;
use mhdd_core::util::write_atomic;

#[derive(Parser)]
#[command(name = "mhdd", version, about = "Molecular hard-disk unit simulator")]
struct Cli {
    /// Model parameter file (key=value); defaults to the calibrated set.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Codec description file (key=value); defaults to the 96/64-level codec.
    #[arg(long, global = true)]
    codec: Option<PathBuf>,
    /// Parse inputs and simulate, but write no files.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a voltage sweep on a fresh unit and export the trace CSV.
    Sweep(SweepArgs),
    /// Fit model parameters to a calibration target CSV.
    Calibrate(CalibrateArgs),
    /// Program the multilevel staircase and report its metrics.
    Levels(LevelsArgs),
    /// Truth tables and cascade expressions.
    Logic(LogicArgs),
    /// Allocate or inspect an array file.
    Array(ArrayArgs),
    /// Quantize an image and store it into an array.
    Store(StoreArgs),
    /// In-situ XOR encryption of a stored image.
    Encrypt(CryptArgs),
    /// In-situ XOR decryption (the same involution).
    Decrypt(CryptArgs),
    /// Read an array back into a PPM image.
    Render(RenderArgs),
    /// Windows, power, uniformity and retention reports.
    Stats(StatsArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Stop voltage, volts.
    #[arg(long)]
    stop: f64,
    /// Ramping step, volts.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// Dwell per step, seconds.
    #[arg(long, default_value_t = protocols::DWELL)]
    dwell: f64,
    /// Sweep both polarities (0 -> +stop -> 0 -> -stop -> 0).
    #[arg(long, default_value_t = true)]
    bipolar: bool,
    /// Seed for cycle-to-cycle read noise (omit for noiseless).
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Trace CSV output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Target CSV (name,observable,value,weight); defaults to the built-in set.
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    max_iters: u32,
    /// Fitted parameter file output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LevelsArgs {
    /// Number of staircase states to program.
    #[arg(long, default_value_t = 96)]
    count: u8,
    /// Seed for noisy read-back (omit for noiseless).
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Staircase CSV output (level,voltage_V,G_target_S,G_measured_S).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LogicArgs {
    /// Gate name: xor, and, or, not, nand, nor, imp, max, min, threshold.
    #[arg(long, conflicts_with = "expr")]
    gate: Option<String>,
    /// Custom gate table (key=value file) evaluated over all input pairs.
    #[arg(long, conflicts_with_all = ["gate", "expr"])]
    gate_file: Option<PathBuf>,
    /// Print the full truth table of --gate.
    #[arg(long)]
    table: bool,
    /// Prefix cascade expression, e.g. "(max (min 2 p) q)".
    #[arg(long)]
    expr: Option<String>,
    /// Logic radix.
    #[arg(long, default_value_t = 2)]
    radix: u8,
    /// Variable bindings for --expr, e.g. p=2,q=1.
    #[arg(long, default_value = "")]
    inputs: String,
    /// Optional truth-table CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ArrayArgs {
    #[command(subcommand)]
    action: ArrayAction,
}

#[derive(Subcommand)]
enum ArrayAction {
    /// Allocate a pristine array and save it.
    Alloc {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a summary of an array file.
    Inspect {
        #[arg(long)]
        array: PathBuf,
    },
}

#[derive(Args)]
struct StoreArgs {
    /// PPM image (P3 or P6, maxval 255).
    #[arg(long)]
    image: PathBuf,
    /// Array file to create or overwrite.
    #[arg(long)]
    array: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dump the stored plaintext word matrices here.
    #[arg(long)]
    words_out: Option<PathBuf>,
}

#[derive(Args)]
struct CryptArgs {
    #[arg(long)]
    array: PathBuf,
    /// Key seed; the key matrices regenerate deterministically from it.
    #[arg(long, conflicts_with = "key_file")]
    key_seed: Option<u64>,
    /// Key file produced by a previous run.
    #[arg(long)]
    key_file: Option<PathBuf>,
    /// Write the key material here.
    #[arg(long)]
    key_out: Option<PathBuf>,
    /// Render the transformed array to a PPM here.
    #[arg(long)]
    cipher_out: Option<PathBuf>,
    #[arg(long)]
    plain_out: Option<PathBuf>,
    /// Seed for read noise during the transform (omit for noiseless).
    #[arg(long)]
    noise_seed: Option<u64>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    array: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Print the per-channel word histogram chi-squared statistic.
    #[arg(long)]
    histogram: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Window family at stop voltages 0.5 / 3 / 5.5 / 10 V.
    #[arg(long)]
    windows: bool,
    /// Peak power of the +-3 V sweep.
    #[arg(long)]
    power: bool,
    /// Cycle-to-cycle and device-to-device uniformity.
    #[arg(long)]
    uniformity: bool,
    /// 10-state retention over the given duration.
    #[arg(long)]
    retention: bool,
    #[arg(long, default_value_t = 1e4)]
    duration: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_params(cli: &Cli) -> mhdd_core::Result<ModelParams> {
    match &cli.params {
        Some(p) => ModelParams::load(p),
        None => Ok(ModelParams::calibrated()),
    }
}

fn load_codec(cli: &Cli) -> mhdd_core::Result<LevelCodec> {
    match &cli.codec {
        Some(p) => LevelCodec::load(p),
        None => Ok(LevelCodec::default()),
    }
}

/// Relative output paths land under MHDD_OUT_DIR when it is set.
fn out_path(path: &Path) -> PathBuf {
    match std::env::var_os("MHDD_OUT_DIR") {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_file(dry_run: bool, path: &Path, bytes: &[u8]) -> mhdd_core::Result<()> {
    if dry_run {
        println!("dry-run: skipped writing {}", path.display());
        return Ok(());
    }
    write_atomic(&out_path(path), bytes)
}

fn run(cli: Cli) -> mhdd_core::Result<()> {
    let params = load_params(&cli)?;
    let codec = load_codec(&cli)?;
    let dry = cli.dry_run;
    match &cli.command {
        Command::Sweep(a) => {
            let wf = if a.bipolar {
                make_dual_sweep(a.stop.abs(), a.step, a.dwell)?
            } else {
                make_sweep(0.0, a.stop, a.step, a.dwell, true)?
            };
            let (_, trace) = apply_waveform(&UnitState::pristine(), &wf, &params, a.noise_seed)?;
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            write_file(dry, &a.out, &buf)?;
            let (peak, per_mol) = trace.peak_power()?;
            println!("samples: {}", trace.samples.len());
            if let Some(v) = trace.sign_reversal_voltage() {
                println!("sign reversal on back branch at {v:.3} V");
            }
            println!("peak power: {:.1} pW ({:.2} pW per molecule)", peak * 1e12, per_mol * 1e12);
        }
        Command::Calibrate(a) => {
            let targets = match &a.targets {
                Some(path) => CalTarget::parse_csv(&std::fs::read_to_string(path)?)?,
                None => mhdd_core::device::reference_targets(),
            };
            let fit = calibrate(&targets, &params, a.max_iters)?;
            println!(
                "{} after {} iterations ({} evaluations), rss {:.4}",
                if fit.converged { "converged" } else { "iteration cap reached (best-so-far)" },
                fit.iterations,
                fit.evaluations,
                fit.rss
            );
            for r in &fit.residuals {
                println!("  {:<14} sim {:>12.4e}  target {:>12.4e}  log-residual {:+.4}", r.name, r.simulated, r.target, r.residual);
            }
            write_file(dry, &a.out, fit.params.to_key_value().as_bytes())?;
        }
        Command::Levels(a) => {
            if a.count == 0 || a.count > codec.n_states {
                return Err(mhdd_core::Error::InvalidArgument(format!(
                    "count must be 1..={}, got {}",
                    codec.n_states, a.count
                )));
            }
            let mut unit = spawn_unit(&params, 1);
            let mut rows = Vec::new();
            let mut csv = String::from("level,voltage_V,G_target_S,G_measured_S\n");
            for k in 0..a.count {
                let rep = program_state(&unit, k, &codec, &params)?;
                unit = rep.state;
                let seed = a.noise_seed.map(|s| s ^ (k as u64) << 8);
                let reading = read_level(&unit, &codec, &params, seed);
                rows.push((k, reading.g_measured.abs()));
                csv.push_str(&format!(
                    "{k},{:.4},{:.9e},{:.9e}\n",
                    codec.state_to_voltage(k)?,
                    codec.state_to_conductance(k)?,
                    reading.g_measured
                ));
            }
            let (r2, _) = staircase_metrics(&rows)?;
            println!("programmed {} states spanning [{:.3e}, {:.3e}] S", a.count, rows[0].1, rows[rows.len() - 1].1);
            println!("linear-fit r2 = {r2:.5}");
            if let Some(out) = &a.out {
                write_file(dry, out, csv.as_bytes())?;
            }
        }
        Command::Logic(a) => {
            if let Some(expr_text) = &a.expr {
                let expr = parse_expr(expr_text)?;
                let mut vars = HashMap::new();
                for binding in a.inputs.split(',').filter(|s| !s.is_empty()) {
                    let (name, value) = binding.split_once('=').ok_or_else(|| {
                        mhdd_core::Error::InvalidArgument(format!("bad binding {binding:?}; expected name=value"))
                    })?;
                    vars.insert(
                        name.trim().to_string(),
                        value.trim().parse::<u8>().map_err(|e| {
                            mhdd_core::Error::InvalidArgument(format!("bad value in {binding:?}: {e}"))
                        })?,
                    );
                }
                let mut pool = UnitPool::new(64, &params, 0xD15C);
                let result = cascade_eval(&expr, &vars, a.radix, &mut pool, &codec, &params)?;
                let arith = expr.eval_arith(a.radix, &vars)?;
                println!("device result: {} (arithmetic {}), {} scratch units", result.value, arith, pool.used());
            } else if let Some(path) = &a.gate_file {
                let spec = mhdd_core::logic::GateSpec::load(path)?;
                println!("p,q,G_final_S,output");
                for p_in in 0..2u8 {
                    for q_in in 0..2u8 {
                        let u = spawn_unit(&params, 0x6f11e + (p_in * 2 + q_in) as u64);
                        let out = mhdd_core::logic::boolean_gate(&spec, &u, p_in == 1, q_in == 1, &codec, &params)?;
                        println!("{p_in},{q_in},{:.4e},{}", out.g_final, out.output);
                    }
                }
            } else if let Some(gate) = &a.gate {
                let rows = truth_table(gate, a.radix, &codec, &params)?;
                if a.table || a.out.is_some() {
                    println!("p,q,G_final_S,output");
                    for r in &rows {
                        println!("{},{},{:.4e},{}", r.p, r.q, r.g_final, r.output);
                    }
                }
                if let Some(out) = &a.out {
                    write_file(dry, out, truth_table_csv(&rows).as_bytes())?;
                }
            } else {
                return Err(mhdd_core::Error::InvalidArgument("need --gate or --expr".into()));
            }
        }
        Command::Array(a) => match &a.action {
            ArrayAction::Alloc { rows, cols, seed, out } => {
                let array = MolecularArray::allocate(ArrayGeometry::new(*rows, *cols)?, params, codec, *seed)?;
                let cap = capacity_report(&array.geometry);
                println!(
                    "allocated {}x{}x3 = {} units ({} binary-cell equivalents, ratio {:.4})",
                    rows, cols, cap.molecular_units, cap.binary_units, cap.ratio
                );
                if !dry {
                    array.save(&out_path(out))?;
                }
            }
            ArrayAction::Inspect { array } => {
                let arr = MolecularArray::load(array, params, codec)?;
                let written = arr.levels.iter().filter(|l| l.is_some()).count();
                let cap = capacity_report(&arr.geometry);
                println!(
                    "{}x{}x{} = {} units, {} written, capacity ratio {:.4}",
                    arr.geometry.rows,
                    arr.geometry.cols,
                    arr.geometry.channels,
                    arr.geometry.unit_count(),
                    written,
                    cap.ratio
                );
            }
        },
        Command::Store(a) => {
            let img = load_ppm(&a.image)?;
            let planes = decompose_rgb(&img);
            let r = quantize_plane(&planes[0], Channel::R);
            let g = quantize_plane(&planes[1], Channel::G);
            let b = quantize_plane(&planes[2], Channel::B);
            let mut array = MolecularArray::allocate(
                ArrayGeometry::new(img.height, img.width)?,
                params,
                codec,
                a.seed,
            )?;
            store_plaintext(&mut array, &r, &g, &b)?;
            println!(
                "stored {} words ({} pixels x 3 channels)",
                array.geometry.unit_count(),
                img.width * img.height
            );
            if let Some(path) = &a.words_out {
                write_file(dry, path, words_to_text(&r, &g, &b).as_bytes())?;
            }
            println!(
                "first pixel words: R {} G {} B {}",
                word_bits(r.words[0]),
                word_bits(g.words[0]),
                word_bits(b.words[0])
            );
            if !dry {
                array.save(&out_path(&a.array))?;
            }
        }
        Command::Encrypt(a) | Command::Decrypt(a) => {
            let decrypting = matches!(cli.command, Command::Decrypt(_));
            let mut array = MolecularArray::load(&a.array, params, codec)?;
            let key = match (&a.key_file, a.key_seed) {
                (Some(path), _) => KeyMatrix::load(path)?,
                (None, Some(seed)) => gen_key(seed, array.geometry.cols, array.geometry.rows)?,
                (None, None) => {
                    return Err(mhdd_core::Error::InvalidArgument("need --key-seed or --key-file".into()))
                }
            };
            let stats_x = if decrypting {
                decrypt_in_situ(&mut array, &key, a.noise_seed)?
            } else {
                encrypt_in_situ(&mut array, &key, a.noise_seed)?
            };
            println!(
                "{} {} words through {} gate evaluations",
                if decrypting { "decrypted" } else { "encrypted" },
                stats_x.words,
                stats_x.gate_evaluations
            );
            if let Some(path) = &a.key_out {
                write_file(dry, path, key.to_text().as_bytes())?;
            }
            let render_path = if decrypting { &a.plain_out } else { &a.cipher_out };
            if let Some(path) = render_path {
                let img = render_image(&array, None)?;
                if !dry {
                    save_ppm(&img, &out_path(path))?;
                }
            }
            if !dry {
                array.save(&a.array)?;
            }
        }
        Command::Render(a) => {
            let array = MolecularArray::load(&a.array, params, codec)?;
            let img = render_image(&array, None)?;
            if a.histogram {
                let [r, g, b] = mhdd_core::crypto::read_channels(&array, None)?;
                for m in [&r, &g, &b] {
                    let chi2 = stats::chi2_uniform(&stats::word_histogram(&m.words));
                    println!("channel {:?}: chi2 = {:.2} (99% bound {:.2})", m.tag, chi2, stats::CHI2_99_DOF63);
                }
            }
            if !dry {
                save_ppm(&img, &out_path(&a.out))?;
            }
        }
        Command::Stats(a) => {
            let any = a.windows || a.power || a.uniformity || a.retention;
            if a.windows || !any {
                let family = protocols::window_family(&params, &[0.5, 3.0, 5.5, 10.0])?;
                println!("memory windows at the 0.5 V read:");
                for (stop, w) in family {
                    println!("  stop {:>5.1} V: {:>8.1} pS", stop, w * 1e12);
                }
            }
            if a.power || !any {
                let r = protocols::sweep_regression(&params)?;
                println!(
                    "+-3 V sweep: peak power {:.1} pW ({:.2} pW per molecule), reversal at {} V",
                    r.peak_power_w * 1e12,
                    r.peak_per_molecule_w * 1e12,
                    r.crossing_v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
                );
            }
            if a.uniformity || !any {
                let c2c = protocols::cycle_uniformity_pct(&params, 3, a.seed)?;
                let d2d = protocols::device_uniformity_pct(&params, 5, 400, a.seed)?;
                println!("cycle-to-cycle uniformity (3 sweeps): {c2c:.2}%");
                println!("device-to-device uniformity (5 devices): {d2d:.2}%");
            }
            if a.retention || !any {
                let curves = protocols::retention_run(&params, a.duration, a.seed)?;
                let fluct = protocols::retention_max_fluctuation_pct(&curves);
                let distinct = protocols::retention_states_distinguishable(&curves);
                println!(
                    "retention over {:.0} s: max fluctuation {:.3}%, 10 states {}",
                    a.duration,
                    fluct,
                    if distinct { "remain distinguishable" } else { "OVERLAP" }
                );
            }
        }
    }
    Ok(())
}
