use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;

use s3pl::baseline::{sn_pick, SnConfig};
use s3pl::data::imzml::read_imzml;
use s3pl::data::synth::{generate_synthetic, SynthConfig};
use s3pl::data::{dump, prepare, MsiDataset};
use s3pl::eval::{
    evaluate_with_table, within_budget, EvaluationReport, GroundTruth, PccTable, THRESHOLDS,
};
use s3pl::io::{ion_image_csv, read_mask, write_ion_image_png, write_mask_csv, write_mask_png};
use s3pl::pick::{export_peaks, pick_peaks, read_peaks, PeakList};
use s3pl::{train, Error, Result, S3plConfig, S3plModel};

use crate::args::*;
use crate::manifest::{self, Recorder};

pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Replay(a) => replay(&a),
        command => {
            let rec = Recorder::new(command.name(), argv, threads);
            match command {
                Command::Synth(a) => synth(&a, rec),
                Command::Train(a) => cmd_train(&a, rec),
                Command::Pick(a) => pick(&a, rec),
                Command::Eval(a) => eval(&a, rec),
                Command::Ionimage(a) => ionimage(&a, rec),
                Command::Baseline(a) => baseline(&a, rec),
                Command::Replay(_) => unreachable!("handled above"),
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::io(
            dir,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "output directory does not exist, create it first",
            ),
        ))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Native dumps are recognized by their magic bytes, imzML by extension.
fn load_dataset(path: &Path) -> Result<MsiDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(dump::MAGIC) {
        return dump::decode(&bytes);
    }
    let is_imzml = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("imzml"));
    if is_imzml {
        read_imzml(path)
    } else {
        Err(Error::Config(format!(
            "{} is neither an .imzML file nor a native dump",
            path.display()
        )))
    }
}

fn record_dataset(rec: &mut Recorder, path: &Path) -> Result<()> {
    rec.input(path)?;
    let ibd = path.with_extension("ibd");
    if ibd != path && ibd.is_file() {
        rec.input(&ibd)?;
    }
    Ok(())
}

fn resolve_config(args: &ConfigArgs, rec: &mut Recorder) -> Result<S3plConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            rec.input(path)?;
            S3plConfig::from_file(path)?
        }
        None => S3plConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn synth(a: &SynthArgs, mut rec: Recorder) -> Result<()> {
    ensure_dir(&a.out)?;
    let cfg = SynthConfig {
        width: a.width,
        height: a.height,
        c: a.bins,
        n_structured: a.structured,
        n_unstructured: a.unstructured,
        noise_level: a.noise,
        seed: a.seed,
    };
    rec.seed(a.seed);
    let (data, mask, truth) = rec.time("generate", || generate_synthetic(&cfg))?;
    let dataset = a.out.join("dataset.s3pl");
    let mask_png = a.out.join("mask.png");
    let mask_csv = a.out.join("mask.csv");
    let truth_json = a.out.join("truth.json");
    dump::write(&data, &dataset)?;
    write_mask_png(&mask, &mask_png)?;
    write_mask_csv(&mask, &mask_csv)?;
    write(&truth_json, &(to_json(&truth)? + "\n"))?;
    for p in [&dataset, &mask_png, &mask_csv, &truth_json] {
        rec.output(p)?;
    }
    println!(
        "wrote {}x{} grid with {} bins to {}",
        a.width,
        a.height,
        a.bins,
        a.out.display()
    );
    rec.finish(&a.out)?;
    Ok(())
}

fn to_json(value: &impl Serialize) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::InvalidData(format!("JSON: {e}")))
}

fn cmd_train(a: &TrainArgs, mut rec: Recorder) -> Result<()> {
    ensure_dir(&a.out)?;
    let mut cfg = resolve_config(&a.config, &mut rec)?;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    rec.config(&cfg);
    record_dataset(&mut rec, &a.input)?;
    let raw = rec.time("load", || load_dataset(&a.input))?;
    let data = rec.time("prepare", || prepare(&raw));
    let outcome = rec.time("train", || train::train(&data, &cfg))?;

    let ckpt = a.out.join("model.ckpt");
    let losses = a.out.join("losses.csv");
    outcome.model.save(&ckpt)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in outcome.epoch_losses.iter().enumerate() {
        writeln!(csv, "{},{l}", i + 1).unwrap();
    }
    write(&losses, &csv)?;
    rec.output(&ckpt)?;
    rec.output(&losses)?;
    match outcome.epoch_losses.last() {
        Some(l) => println!("trained {} epochs, final loss {l:.6}", cfg.epochs),
        None => println!("wrote the initialized model (0 epochs)"),
    }
    rec.finish(&a.out)?;
    Ok(())
}

fn pick(a: &PickArgs, mut rec: Recorder) -> Result<()> {
    ensure_dir(&a.out)?;
    let mut cfg = resolve_config(&a.config, &mut rec)?;
    if let Some(z) = a.z {
        cfg.z = z;
    }
    if a.n.is_some() {
        cfg.n = a.n;
    }
    cfg.validate()?;
    let n = cfg.n.ok_or_else(|| {
        Error::Config(
            "the number of peaks is required: pass --n or set n in the config file".into(),
        )
    })?;
    record_dataset(&mut rec, &a.input)?;
    rec.input(&a.model)?;
    let model = S3plModel::load(&a.model)?;
    cfg.p = model.patch_size();
    cfg.seed = model.seed();
    rec.config(&cfg);
    let raw = rec.time("load", || load_dataset(&a.input))?;
    model.check_compatible(&raw)?;
    let data = rec.time("prepare", || prepare(&raw));
    let list = rec.time("pick", || pick_peaks(&model, &data, cfg.z, n))?;
    let out = a.out.join("peaks.csv");
    export_peaks(&list, &out)?;
    rec.output(&out)?;
    println!(
        "picked {} peaks (z={}) into {}",
        list.len(),
        cfg.z,
        out.display()
    );
    rec.finish(&a.out)?;
    Ok(())
}

#[derive(Serialize)]
struct PickerReport {
    name: String,
    peaks: PathBuf,
    n_peaks: usize,
    #[serde(flatten)]
    report: EvaluationReport,
}

#[derive(Serialize)]
struct EvalOutput {
    pickers: Vec<PickerReport>,
}

fn parse_peaks_arg(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            (name, path)
        }
    }
}

fn eval(a: &EvalArgs, mut rec: Recorder) -> Result<()> {
    ensure_dir(&a.out)?;
    record_dataset(&mut rec, &a.input)?;
    rec.input(&a.mask)?;
    let data = rec.time("load", || load_dataset(&a.input))?;
    let mask = read_mask(&a.mask)?;
    mask.check_matches(&data)?;
    let lists: Vec<(String, PathBuf, PeakList)> = a
        .peaks
        .iter()
        .map(|spec| {
            let (name, path) = parse_peaks_arg(spec);
            rec.input(&path)?;
            let list = read_peaks(&path)?;
            Ok((name, path, list))
        })
        .collect::<Result<_>>()?;
    let table = rec.time("pcc", || PccTable::compute(&data, &mask))?;

    let pickers = lists
        .into_iter()
        .map(|(name, peaks, list)| {
            Ok(PickerReport {
                name,
                peaks,
                n_peaks: list.len(),
                report: evaluate_with_table(&table, &list)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("picker,n_peaks");
    for t in THRESHOLDS {
        write!(csv, ",f1_t{t}").unwrap();
    }
    csv.push_str(",mscf1\n");
    for p in &pickers {
        write!(csv, "{},{}", p.name, p.n_peaks).unwrap();
        for s in &p.report.thresholds {
            write!(csv, ",{}", s.score.f1).unwrap();
        }
        writeln!(csv, ",{}", p.report.mscf1).unwrap();
        println!(
            "{:<16} n={:<5} mscf1={:.4}",
            p.name, p.n_peaks, p.report.mscf1
        );
    }
    if a.budget {
        for &t in &THRESHOLDS {
            let budget = GroundTruth::from_table(&table, t)?.positives.len();
            print!("T_PCC {t}: {budget} positive bins");
            for p in &pickers {
                let ok = if within_budget(p.n_peaks, budget) {
                    "within"
                } else {
                    "outside"
                };
                print!("; {} {ok}", p.name);
            }
            println!();
        }
    }

    let report = a.out.join("report.json");
    let comparison = a.out.join("comparison.csv");
    let pcc = a.out.join("pcc_table.csv");
    write(&report, &(to_json(&EvalOutput { pickers })? + "\n"))?;
    write(&comparison, &csv)?;
    write(&pcc, &table.to_csv(data.axis().values()))?;
    for p in [&report, &comparison, &pcc] {
        rec.output(p)?;
    }
    rec.finish(&a.out)?;
    Ok(())
}

fn ionimage(a: &IonImageArgs, mut rec: Recorder) -> Result<()> {
    ensure_dir(&a.out)?;
    record_dataset(&mut rec, &a.input)?;
    let data = load_dataset(&a.input)?;
    let bins = match &a.peaks {
        Some(path) => {
            rec.input(path)?;
            read_peaks(path)?.bins()
        }
        None => a.bins.clone(),
    };
    for bin in bins {
        let image = data.ion_image(bin)?;
        let path = match a.format {
            ImageFormat::Png => {
                let path = a.out.join(format!("ion_{bin}.png"));
                write_ion_image_png(&image, &path)?;
                path
            }
            ImageFormat::Csv => {
                let path = a.out.join(format!("ion_{bin}.csv"));
                write(&path, &ion_image_csv(&image))?;
                path
            }
        };
        rec.output(&path)?;
    }
    rec.finish(&a.out)?;
    Ok(())
}

fn baseline(a: &BaselineArgs, mut rec: Recorder) -> Result<()> {
    ensure_dir(&a.out)?;
    record_dataset(&mut rec, &a.input)?;
    let data = load_dataset(&a.input)?;
    let cfg = SnConfig {
        half_window: a.half_window,
        snr_threshold: a.snr,
    };
    let list = rec.time("pick", || sn_pick(&data, &cfg, a.n))?;
    let out = a.out.join("peaks.csv");
    export_peaks(&list, &out)?;
    rec.output(&out)?;
    println!("picked {} peaks into {}", list.len(), out.display());
    rec.finish(&a.out)?;
    Ok(())
}

/// Replaces the value of `--out` in recorded arguments.
fn override_out(args: &[String], out: &Path) -> Vec<String> {
    let out = out.to_string_lossy().into_owned();
    let mut result = Vec::with_capacity(args.len());
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        if arg == "--out" {
            iter.next();
            result.push(arg.clone());
            result.push(out.clone());
        } else if arg.starts_with("--out=") {
            result.push(format!("--out={out}"));
        } else {
            result.push(arg.clone());
        }
    }
    result
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let m = manifest::read(&a.manifest)?;
    let out = match &a.out {
        Some(p) => Some(std::path::absolute(p).map_err(|e| Error::io(p, e))?),
        None => None,
    };
    std::env::set_current_dir(&m.cwd).map_err(|e| Error::io(&m.cwd, e))?;
    let args = match &out {
        Some(p) => override_out(&m.args, p),
        None => m.args.clone(),
    };
    let cli = Cli::try_parse_from(std::iter::once("s3pl".to_string()).chain(args.iter().cloned()))
        .map_err(|e| Error::Config(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::Config(
            "a manifest cannot replay another replay".into(),
        ));
    }
    run(cli, args)
}
