//! Command-line entry point: synthetic data generation, training,
//! inference, evaluation, and self-verification.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numerical
//! failure (NaN during training or a failed self-check).

use argan_core::config::ArganConfig;
use argan_core::data::{
    binarize_mask, gen_synthetic_sample, load_dataset, read_image, write_dataset, write_image,
    DatasetKind, SampleTriplet,
};
use argan_core::error::ArganError;
use argan_core::metrics::{ber_flagged, rmse_lab, Region};
use argan_core::train::{format_log, infer_image, train, TrainSession};
use argan_core::verify::run_selfcheck;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const USAGE: &str = "usage: argan <command> [flags]

commands:
  gen-data   --out DIR --count N --size S --seed SEED [--unlabeled]
  train      --config FILE --data DIR [--unlabeled DIR] --out CKPT
  infer      --ckpt CKPT --input IMG --out-prefix P
  eval       --pred DIR --gt DIR [--mask DIR] --mode {detect|remove}
  selfcheck

ARGAN_THREADS caps kernel parallelism (default 1).";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: usage: {msg}");
            eprintln!("{USAGE}");
            ExitCode::from(1)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            let code = match e {
                ArganError::Numeric(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
        Err(CliError::SelfCheck) => {
            eprintln!("error: numeric failure: selfcheck reported failures");
            ExitCode::from(3)
        }
    }
}

enum CliError {
    Usage(String),
    Run(ArganError),
    SelfCheck,
}

impl From<ArganError> for CliError {
    fn from(e: ArganError) -> Self {
        CliError::Run(e)
    }
}

/// Strict flag parser: every flag must be known, valued flags need values.
struct Flags {
    values: Vec<(String, String)>,
    switches: Vec<String>,
}

fn parse_flags(
    args: &[String],
    valued: &[&str],
    switches: &[&str],
) -> Result<Flags, CliError> {
    let mut out = Flags {
        values: Vec::new(),
        switches: Vec::new(),
    };
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        if let Some(name) = arg.strip_prefix("--") {
            if switches.contains(&name) {
                out.switches.push(name.to_string());
                i += 1;
            } else if valued.contains(&name) {
                let value = args
                    .get(i + 1)
                    .ok_or_else(|| CliError::Usage(format!("flag --{name} needs a value")))?;
                out.values.push((name.to_string(), value.clone()));
                i += 2;
            } else {
                return Err(CliError::Usage(format!("unknown flag --{name}")));
            }
        } else {
            return Err(CliError::Usage(format!("unexpected argument {arg:?}")));
        }
    }
    Ok(out)
}

impl Flags {
    fn get(&self, name: &str) -> Option<&str> {
        self.values
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, name: &str) -> Result<&str, CliError> {
        self.get(name)
            .ok_or_else(|| CliError::Usage(format!("missing required flag --{name}")))
    }

    fn has(&self, name: &str) -> bool {
        self.switches.iter().any(|s| s == name)
    }
}

fn dispatch(args: &[String]) -> Result<(), CliError> {
    let Some(command) = args.first() else {
        return Err(CliError::Usage("no command given".into()));
    };
    let rest = &args[1..];
    match command.as_str() {
        "gen-data" => cmd_gen_data(rest),
        "train" => cmd_train(rest),
        "infer" => cmd_infer(rest),
        "eval" => cmd_eval(rest),
        "selfcheck" => cmd_selfcheck(rest),
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(flags: &Flags, name: &str) -> Result<T, CliError> {
    let raw = flags.require(name)?;
    raw.parse()
        .map_err(|_| CliError::Usage(format!("flag --{name} has invalid value {raw:?}")))
}

fn cmd_gen_data(args: &[String]) -> Result<(), CliError> {
    let flags = parse_flags(args, &["out", "count", "size", "seed"], &["unlabeled"])?;
    let out = PathBuf::from(flags.require("out")?);
    let count: usize = parse_num(&flags, "count")?;
    let size: usize = parse_num(&flags, "size")?;
    let seed: u64 = parse_num(&flags, "seed")?;
    let kind = if flags.has("unlabeled") {
        DatasetKind::Unlabeled
    } else {
        DatasetKind::Labeled
    };
    let samples: Vec<SampleTriplet> = (0..count as u64)
        .map(|i| gen_synthetic_sample(seed.wrapping_add(i), size))
        .collect::<Result<_, _>>()?;
    // Count 0 still produces the directory layout.
    let subdirs: &[&str] = if kind == DatasetKind::Unlabeled {
        &["U"]
    } else {
        &["A", "B", "C"]
    };
    for sub in subdirs {
        std::fs::create_dir_all(out.join(sub)).map_err(ArganError::Io)?;
    }
    write_dataset(&out, &samples, kind)?;
    println!(
        "wrote {} {} sample(s) of size {size} under {}",
        samples.len(),
        if kind == DatasetKind::Unlabeled {
            "unlabeled"
        } else {
            "labeled"
        },
        out.display()
    );
    Ok(())
}

fn cmd_train(args: &[String]) -> Result<(), CliError> {
    let flags = parse_flags(args, &["config", "data", "unlabeled", "out"], &[])?;
    let cfg = ArganConfig::from_file(Path::new(flags.require("config")?))?;
    cfg.validate()?;
    let labeled = load_dataset(Path::new(flags.require("data")?), DatasetKind::Labeled)?;
    let unlabeled = match flags.get("unlabeled") {
        Some(dir) => Some(load_dataset(Path::new(dir), DatasetKind::Unlabeled)?),
        None => None,
    };
    if cfg.semi_supervised && unlabeled.is_none() {
        return Err(CliError::Run(ArganError::Config(
            "semi_supervised=true needs --unlabeled DIR".into(),
        )));
    }
    let ckpt = PathBuf::from(flags.require("out")?);
    let mut session = TrainSession::new(cfg)?;
    let rows = train(&mut session, &labeled, unlabeled.as_deref(), Some(&ckpt))?;
    let log_path = log_path_for(&ckpt);
    std::fs::write(&log_path, format_log(&rows)).map_err(ArganError::Io)?;
    println!(
        "trained {} iteration(s); checkpoint {}, log {}",
        rows.len(),
        ckpt.display(),
        log_path.display()
    );
    Ok(())
}

fn log_path_for(ckpt: &Path) -> PathBuf {
    let mut name = ckpt.file_name().unwrap_or_default().to_os_string();
    name.push(".log.csv");
    ckpt.with_file_name(name)
}

fn cmd_infer(args: &[String]) -> Result<(), CliError> {
    let flags = parse_flags(args, &["ckpt", "input", "out-prefix"], &[])?;
    let session = TrainSession::load(Path::new(flags.require("ckpt")?))?;
    let img = read_image(Path::new(flags.require("input")?))?;
    let prefix = flags.require("out-prefix")?;
    let (attentions, outputs) = infer_image(&session, &img)?;
    for (i, a) in attentions.iter().enumerate() {
        write_image(Path::new(&format!("{prefix}_A{}.ppm", i + 1)), a)?;
    }
    for (i, o) in outputs.iter().enumerate() {
        write_image(Path::new(&format!("{prefix}_O{}.ppm", i + 1)), o)?;
    }
    println!(
        "wrote {} attention map(s) and {} output(s) with prefix {prefix}",
        attentions.len(),
        outputs.len()
    );
    Ok(())
}

fn matching_files(dir: &Path) -> Result<Vec<String>, CliError> {
    let mut names = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| {
        CliError::Run(ArganError::Data(format!(
            "cannot list {}: {e}",
            dir.display()
        )))
    })?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Run(ArganError::Data(e.to_string())))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".ppm") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn cmd_eval(args: &[String]) -> Result<(), CliError> {
    let flags = parse_flags(args, &["pred", "gt", "mask", "mode"], &[])?;
    let pred_dir = PathBuf::from(flags.require("pred")?);
    let gt_dir = PathBuf::from(flags.require("gt")?);
    let mode = flags.require("mode")?;
    let names = matching_files(&pred_dir)?;
    if names.is_empty() {
        return Err(CliError::Run(ArganError::Data(format!(
            "no .ppm predictions under {}",
            pred_dir.display()
        ))));
    }
    let gt_for = |name: &str| -> Result<argan_core::data::Image, CliError> {
        let p = gt_dir.join(name);
        if !p.exists() {
            return Err(CliError::Run(ArganError::Data(format!(
                "missing ground truth for {name}"
            ))));
        }
        Ok(read_image(&p)?)
    };
    match mode {
        "detect" => {
            // Predictions are soft mattes; ground truth binarizes at 0.1,
            // predictions at the 0.5 attention threshold.
            let mut sum = 0.0;
            let mut flagged = 0usize;
            for name in &names {
                let pred = read_image(&pred_dir.join(name))?;
                let gt = gt_for(name)?;
                let pred_mask = binarize_mask(&pred, 0.5)?;
                let gt_mask = binarize_mask(&gt, 0.1)?;
                let (v, flag) = ber_flagged(&pred_mask, &gt_mask)?;
                sum += v;
                flagged += flag as usize;
            }
            let mean = sum / names.len() as f64;
            println!("mode    files   mean-BER");
            println!("detect  {:<7} {:.2}", names.len(), mean);
            if flagged > 0 {
                println!("warning: {flagged} image(s) had an empty shadow or non-shadow class");
            }
            println!("CSV,detect,{},{:.4}", names.len(), mean);
        }
        "remove" => {
            let mask_dir = flags.get("mask").map(PathBuf::from).ok_or_else(|| {
                CliError::Run(ArganError::Data(
                    "remove mode needs --mask DIR for the shadow/non-shadow split".into(),
                ))
            })?;
            let (mut s_sum, mut n_sum, mut a_sum) = (0.0, 0.0, 0.0);
            for name in &names {
                let pred = read_image(&pred_dir.join(name))?;
                let gt = gt_for(name)?;
                let mask_path = mask_dir.join(name);
                if !mask_path.exists() {
                    return Err(CliError::Run(ArganError::Data(format!(
                        "missing mask for {name}"
                    ))));
                }
                let mask = binarize_mask(&read_image(&mask_path)?, 0.1)?;
                s_sum += rmse_lab(&pred, &gt, Some(&mask), Region::Shadow)?;
                n_sum += rmse_lab(&pred, &gt, Some(&mask), Region::NonShadow)?;
                a_sum += rmse_lab(&pred, &gt, Some(&mask), Region::All)?;
            }
            let n = names.len() as f64;
            println!("mode    files   rmse-S  rmse-N  rmse-A");
            println!(
                "remove  {:<7} {:<7.2} {:<7.2} {:.2}",
                names.len(),
                s_sum / n,
                n_sum / n,
                a_sum / n
            );
            println!(
                "CSV,remove,{},{:.4},{:.4},{:.4}",
                names.len(),
                s_sum / n,
                n_sum / n,
                a_sum / n
            );
        }
        other => {
            return Err(CliError::Usage(format!(
                "--mode must be detect or remove, got {other:?}"
            )))
        }
    }
    Ok(())
}

fn cmd_selfcheck(args: &[String]) -> Result<(), CliError> {
    parse_flags(args, &[], &[])?;
    let outcomes = run_selfcheck(false)?;
    let mut all_ok = true;
    for o in &outcomes {
        println!(
            "{} {} ({})",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
        all_ok &= o.passed;
    }
    if all_ok {
        println!("selfcheck: all {} checks passed", outcomes.len());
        Ok(())
    } else {
        Err(CliError::SelfCheck)
    }
}
