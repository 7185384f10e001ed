//! The pipeline stages. Each reads and writes fixed filenames inside one run
//! directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cryozssr::evalctf::{
    fit_ctf, frc_registered, power_spectrum, radial_average, write_curve_csv, write_spectrum_png,
};
use cryozssr::formation::{
    apply_ctf, band_limited_phantom, noise_sigma_for_snr, random_walk_drift, simulate_movie, SimConfig,
};
use cryozssr::image::{bilinear_upsample, block_downsample, read_mrc, write_mrc};
use cryozssr::motion::{make_lr_set, LrSet};
use cryozssr::srnet::{load_checkpoint, save_checkpoint};
use cryozssr::zssr::{infer_detailed, train};
use cryozssr::{Image2D, MovieStack};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub const STACK: &str = "stack.mrc";
pub const TRUTH: &str = "truth.mrc";
pub const LRSET: &str = "lrset.mrc";
pub const MODEL: &str = "model.ckpt";
pub const TRAIN_REPORT: &str = "train_report.csv";
pub const SR: &str = "sr.mrc";
pub const EVAL_DIR: &str = "eval";
pub const CTF_REPORT: &str = "ctf_report.csv";
pub const FRC: &str = "frc.csv";
pub const SPECTRUM: &str = "spectrum.png";
pub const REPORT: &str = "report.csv";

/// Evaluated variants, in report order.
pub const VARIANTS: [&str; 4] = ["lr", "bilinear", "zssr", "truth"];

const DRIFT_STREAM: u64 = 0xd21f_7001;
const NOISE_STREAM: u64 = 0x9015_e001;
const LRSET_STREAM: u64 = 0x1125_e701;

fn input(dir: &Path, name: &str) -> CliResult<PathBuf> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::io(format!("{}: missing input (run the earlier stage first)", p.display())))
    }
}

fn read_single(path: &Path) -> CliResult<Image2D> {
    Ok(read_mrc(path)?.into_frames().swap_remove(0))
}

fn write_single(image: Image2D, path: &Path) -> CliResult<()> {
    write_mrc(&MovieStack::new(vec![image])?, path)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn simulate(dir: &Path, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let seed = cfg.seed()?;
    let s = cfg.train.scale;
    let cutoff = cfg.signal_extent / (2.0 * cfg.pixel_size * s as f64);
    let truth = band_limited_phantom(cfg.size, cfg.pixel_size, cutoff, seed)?;
    let sigma = if cfg.snr.is_finite() {
        noise_sigma_for_snr(&truth, &cfg.ctf, s, cfg.snr)?
    } else {
        0.0
    };
    let sim_cfg = SimConfig {
        frame_count: cfg.frames,
        drift: random_walk_drift(cfg.frames, cfg.drift_step, seed ^ DRIFT_STREAM),
        noise_sigma: sigma,
        downscale: s,
        seed: seed ^ NOISE_STREAM,
    };
    let sim = simulate_movie(&truth, &cfg.ctf, &sim_cfg)?;
    let (stack, truth_out) = (dir.join(STACK), dir.join(TRUTH));
    write_mrc(&sim.stack, &stack)?;
    // the reference for evaluation: noiseless, CTF-modulated, undrifted
    write_single(apply_ctf(&truth, &cfg.ctf)?, &truth_out)?;
    Ok(vec![stack, truth_out])
}

pub fn align(dir: &Path, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let src = match &cfg.input_stack {
        Some(p) => p.clone(),
        None => input(dir, STACK)?,
    };
    let stack = read_mrc(&src)?;
    let set = make_lr_set(&stack, cfg.train.k, cfg.seed()? ^ LRSET_STREAM)?;
    let out = dir.join(LRSET);
    write_mrc(&set.to_stack(), &out)?;
    Ok(vec![out])
}

fn load_lr_set(dir: &Path) -> CliResult<LrSet> {
    Ok(LrSet::from_stack(read_mrc(input(dir, LRSET)?)?)?)
}

pub fn train_stage(dir: &Path, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let set = load_lr_set(dir)?;
    let mut tc = cfg.train.clone();
    tc.seed = cfg.seed()?;
    tc.k = set.len();
    let (sr, shift, report) = train(&set, &tc)?;
    let model = dir.join(MODEL);
    save_checkpoint(&model, &sr, &shift)?;
    let mut csv = String::from("step,loss,lr\n");
    for (i, (loss, lr)) in report.losses.iter().zip(&report.lr_trace).enumerate() {
        writeln!(csv, "{i},{loss:.9e},{lr:e}").unwrap();
    }
    let path = dir.join(TRAIN_REPORT);
    write_text(&path, &csv)?;
    println!(
        "train: {} steps, stop reason {}, {:.1}s",
        report.losses.len(),
        report.stop_reason,
        report.wall_time.as_secs_f64()
    );
    Ok(vec![model, path])
}

pub fn sr_stage(dir: &Path, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let set = load_lr_set(dir)?;
    let (model, _) = load_checkpoint(&input(dir, MODEL)?)?;
    if model.config.scale != cfg.train.scale {
        return Err(CliError::config(format!(
            "checkpoint scale {} differs from configured scale {}",
            model.config.scale, cfg.train.scale
        )));
    }
    let inf = infer_detailed(&model, &set, cfg.train.back_projection_iters)?;
    let out = dir.join(SR);
    write_single(inf.output, &out)?;
    Ok(vec![out])
}

fn even_tile(requested: usize, image: &Image2D) -> usize {
    let (w, h) = image.dims();
    requested.min(w.min(h) & !1)
}

fn evaluate_variant(
    out: &Path,
    image: &Image2D,
    truth: Option<&Image2D>,
    cfg: &PipelineConfig,
) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("{}: {e}", out.display())))?;
    let spectrum = power_spectrum(image, even_tile(cfg.tile, image))?;
    let fit = fit_ctf(&radial_average(&spectrum), &cfg.ctf, &cfg.search)?;
    let mut written = vec![out.join(CTF_REPORT), out.join(SPECTRUM)];
    write_text(
        &written[0],
        &format!(
            "defocus_A,cc_score,fit_resolution_A\n{:.6},{:.6},{:.6}\n",
            fit.defocus, fit.cc_score, fit.fit_resolution
        ),
    )?;
    write_spectrum_png(&written[1], &spectrum)?;
    if let Some(t) = truth {
        let curve = frc_registered(image, t, cfg.frc_threshold)?;
        let path = out.join(FRC);
        write_curve_csv(&path, &curve.frequencies, &curve.correlation)?;
        written.push(path);
    }
    Ok(written)
}

pub fn eval(dir: &Path, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let set = load_lr_set(dir)?;
    let s = cfg.train.scale;
    let truth = match &cfg.truth_path {
        Some(p) => Some(read_single(p)?),
        None if dir.join(TRUTH).is_file() => Some(read_single(&dir.join(TRUTH))?),
        None => None,
    };
    let truth_lr = truth.as_ref().map(|t| block_downsample(t, s)).transpose()?;
    let lr = set.reference_image().clone();
    let bilinear = bilinear_upsample(&lr, s)?;
    let zssr = if dir.join(SR).is_file() {
        Some(read_single(&dir.join(SR))?)
    } else {
        None
    };
    let variants: [(&str, Option<&Image2D>, Option<&Image2D>); 4] = [
        ("lr", Some(&lr), truth_lr.as_ref()),
        ("bilinear", Some(&bilinear), truth.as_ref()),
        ("zssr", zssr.as_ref(), truth.as_ref()),
        ("truth", truth.as_ref(), truth.as_ref()),
    ];
    let mut written = Vec::new();
    for (name, image, reference) in variants {
        if let Some(img) = image {
            written.extend(evaluate_variant(&dir.join(EVAL_DIR).join(name), img, reference, cfg)?);
        }
    }
    Ok(written)
}

/// One summary row; `None` columns print as `absent`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub variant: &'static str,
    pub cc_score: Option<f64>,
    pub fit_resolution: Option<f64>,
    pub frc_resolution: Option<f64>,
}

fn read_ctf_report(path: &Path) -> CliResult<(f64, f64)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let row = text.lines().nth(1).unwrap_or("");
    let cols: Vec<f64> = row.split(',').filter_map(|c| c.trim().parse().ok()).collect();
    match cols[..] {
        [_, cc, res] => Ok((cc, res)),
        _ => Err(CliError::io(format!("{}: malformed row `{row}`", path.display()))),
    }
}

fn read_frc_resolution(path: &Path, threshold: f64) -> CliResult<f64> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut freqs = Vec::new();
    let mut corr = Vec::new();
    for line in text.lines().skip(1) {
        let parsed = line
            .split_once(',')
            .and_then(|(f, c)| Some((f.trim().parse::<f64>().ok()?, c.trim().parse::<f64>().ok()?)));
        let Some((f, c)) = parsed else {
            return Err(CliError::io(format!("{}: malformed line `{line}`", path.display())));
        };
        freqs.push(f);
        corr.push(c);
    }
    let crossing = cryozssr::evalctf::threshold_crossing(&freqs, &corr, threshold)
        .or(freqs.last().copied())
        .ok_or_else(|| CliError::io(format!("{}: empty curve", path.display())))?;
    Ok(1.0 / crossing)
}

pub fn collect_report(dir: &Path, cfg: &PipelineConfig) -> CliResult<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let mut present = 0;
    for variant in VARIANTS {
        let vdir = dir.join(EVAL_DIR).join(variant);
        let ctf = vdir.join(CTF_REPORT);
        let frc = vdir.join(FRC);
        let (cc, res) = if ctf.is_file() {
            present += 1;
            let (c, r) = read_ctf_report(&ctf)?;
            (Some(c), Some(r))
        } else {
            (None, None)
        };
        let frc_res = if frc.is_file() {
            Some(read_frc_resolution(&frc, cfg.frc_threshold)?)
        } else {
            None
        };
        rows.push(ReportRow { variant, cc_score: cc, fit_resolution: res, frc_resolution: frc_res });
    }
    if present < 2 {
        return Err(CliError::io(format!(
            "{}: report needs evaluated artifacts for at least 2 variants, found {present}",
            dir.join(EVAL_DIR).display()
        )));
    }
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |x| format!("{x:.4}"))
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("variant,cc_score,fit_resolution_A,frc_resolution_A\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.variant,
            cell(r.cc_score),
            cell(r.fit_resolution),
            cell(r.frc_resolution)
        )
        .unwrap();
    }
    out
}

pub fn report_table(rows: &[ReportRow]) -> String {
    let mut out = format!("{:<10}{:>12}{:>18}{:>18}\n", "variant", "cc_score", "fit_res (A)", "frc_res (A)");
    for r in rows {
        writeln!(
            out,
            "{:<10}{:>12}{:>18}{:>18}",
            r.variant,
            cell(r.cc_score),
            cell(r.fit_resolution),
            cell(r.frc_resolution)
        )
        .unwrap();
    }
    out
}

pub fn report(dir: &Path, cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let rows = collect_report(dir, cfg)?;
    let path = dir.join(REPORT);
    write_text(&path, &report_csv(&rows))?;
    print!("{}", report_table(&rows));
    Ok(vec![path])
}
