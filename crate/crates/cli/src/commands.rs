use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use signret::codec::{decode_image, encode_image, Container};
use signret::dataset::{example_from_image, random_crops};
use signret::metrics::{
    block_mean_rate, map_csv, median, per_block_heatmap, per_block_rates, recovery_rate,
    render_map, time_retrieval, HeatMap, RecoveryReport,
};
use signret::network::{
    load_weights, retrieve_signs, save_weights, train_with, Model, TrainConfig, TrainingExample,
    Variant,
};
use signret::pgm;
use signret::subband::{Plane2D, SignTensor3D};
use signret::transform::{quant_table_from_qf, ImagePlane, Sign, BLOCK};

use crate::meta::{self, Meta};
use crate::{
    DecodeArgs, EncodeArgs, EvalArgs, HeatmapArgs, Preset, RetrieveArgs, TrainArgs, VariantArg,
};

/// Variance of a rate in `[0, 1]` is at most 1/4.
const VARIANCE_RENDER_SCALE: f64 = 4.0;

fn warn(msg: impl std::fmt::Display) {
    eprintln!("warning: {msg}");
}

/// Sorted `*.pgm` paths of a directory.
fn pgm_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Images of a directory, skipping unreadable ones with a warning.
fn load_images(dir: &Path) -> Result<Vec<(PathBuf, ImagePlane)>> {
    let mut out = Vec::new();
    for path in pgm_paths(dir)? {
        match pgm::read_plane(&path) {
            Ok(img) => out.push((path, img)),
            Err(e) => warn(format!("skipping {}: {e}", path.display())),
        }
    }
    if out.is_empty() {
        bail!("no usable PGM images in {}", dir.display());
    }
    Ok(out)
}

fn load_model(path: &Path) -> Result<(Model<f32>, Option<Meta>)> {
    let file = File::open(path).with_context(|| format!("opening weights {}", path.display()))?;
    let model = load_weights(BufReader::new(file))
        .with_context(|| format!("loading weights {}", path.display()))?;
    Ok((model, Meta::read(path)?))
}

/// The QF to run at: the flag if given, else the training QF.
fn resolve_qf(flag: Option<u32>, meta: Option<&Meta>) -> Result<u32> {
    match (flag, meta) {
        (Some(qf), Some(m)) if qf != m.qf => {
            warn(format!(
                "model was trained at QF {} but runs at QF {qf}",
                m.qf
            ));
            Ok(qf)
        }
        (Some(qf), _) => Ok(qf),
        (None, Some(m)) => Ok(m.qf),
        (None, None) => bail!("no --qf given and the weights carry no metadata"),
    }
}

fn warn_qf_mismatch(qf: u32, meta: Option<&Meta>) {
    if let Some(m) = meta {
        if m.qf != qf {
            warn(format!(
                "model was trained at QF {} but runs at QF {qf}",
                m.qf
            ));
        }
    }
}

fn dc_plane(sign: &SignTensor3D) -> Plane2D<Sign> {
    Plane2D {
        width: sign.blocks_x(),
        height: sign.blocks_y(),
        data: sign.band(0).to_vec(),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn display_name(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let base = match a.preset {
        Preset::Desk => TrainConfig::desk(),
        Preset::Full => TrainConfig::full_scale(),
    };
    let default_crop = match a.preset {
        Preset::Desk => 64,
        Preset::Full => 512,
    };
    let config = TrainConfig {
        learning_rate: a.learning_rate.unwrap_or(base.learning_rate),
        batch_size: a.batch_size.map_or(base.batch_size, |b| b as usize),
        epochs: a.epochs.map_or(base.epochs, |e| e as usize),
        seed: a.seed,
        depth: a.depth.map_or(base.depth, |d| d as usize),
        variant: match a.variant {
            VariantArg::Subband => Variant::Subband,
            VariantArg::Naive => Variant::Naive,
        },
    };
    config.validate()?;
    let crop = a.crop_size.unwrap_or(default_crop) as usize;
    ensure!(
        crop > 0 && crop.is_multiple_of(BLOCK),
        "crop size {crop} is not a positive multiple of {BLOCK}"
    );

    let mut images = Vec::new();
    for (path, img) in load_images(&a.images)? {
        if img.width() < crop || img.height() < crop {
            warn(format!(
                "skipping {}: {}x{} is smaller than the {crop}x{crop} crop",
                path.display(),
                img.width(),
                img.height()
            ));
        } else {
            images.push(img);
        }
    }
    ensure!(!images.is_empty(), "no image is at least {crop}x{crop}");

    let table = quant_table_from_qf(a.qf)?;
    let crops = random_crops(&images, a.crops as usize, crop, a.seed.wrapping_add(2))?;
    let dataset: Vec<TrainingExample> = crops
        .iter()
        .map(|c| example_from_image(c, &table))
        .collect();

    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut p = a.out.as_os_str().to_owned();
        p.push(".loss.csv");
        PathBuf::from(p)
    });
    let mut log = BufWriter::new(
        File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?,
    );
    writeln!(log, "epoch,loss")?;
    let mut log_err = None;
    let outcome = train_with(&dataset, &config, |epoch, loss| {
        if log_err.is_none() {
            log_err = writeln!(log, "{epoch},{loss:.9}").err();
        }
    })?;
    if let Some(e) = log_err {
        return Err(e).context("writing loss log");
    }
    log.flush()?;

    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = BufWriter::new(file);
    save_weights(&outcome.model, &mut w)?;
    w.flush()?;
    Meta {
        qf: a.qf,
        variant: config.variant,
        depth: config.depth,
        seed: config.seed,
    }
    .write(&a.out)?;
    eprintln!(
        "trained {} layers ({}) on {} crops for {} epochs, final loss {:.6}",
        config.depth,
        meta::variant_name(config.variant),
        dataset.len(),
        config.epochs,
        outcome.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn report_row(out: &mut String, name: &str, r: &RecoveryReport) {
    let _ = writeln!(
        out,
        "{name},{},{},{:.6},{}",
        r.significant_ac_count, r.correct_count, r.recovery_rate, r.vacuous
    );
}

pub fn retrieve(a: &RetrieveArgs) -> Result<()> {
    let (model, meta) = load_model(&a.weights)?;
    let qf = resolve_qf(a.qf, meta.as_ref())?;
    let table = quant_table_from_qf(qf)?;
    let mut inputs = Vec::new();
    for path in &a.image {
        inputs.push((
            path.clone(),
            pgm::read_plane(path).with_context(|| format!("reading {}", path.display()))?,
        ));
    }
    if let Some(dir) = &a.images {
        inputs.extend(load_images(dir)?);
    }
    let reports = inputs
        .par_iter()
        .map(|(_, img)| {
            let ex = example_from_image(img, &table);
            let got = retrieve_signs(&model, &ex.amp, &dc_plane(&ex.sign))?;
            Ok(recovery_rate(&ex.sign, &got, &ex.amp)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::from("image,significant_ac,correct,recovery_rate,vacuous\n");
    for ((path, _), r) in inputs.iter().zip(&reports) {
        report_row(&mut out, &display_name(path), r);
    }
    report_row(&mut out, "all", &RecoveryReport::pooled(&reports));
    write_output(a.csv.as_deref(), &out)
}

pub fn encode(a: &EncodeArgs) -> Result<()> {
    let (model, meta) = load_model(&a.weights)?;
    let qf = resolve_qf(a.qf, meta.as_ref())?;
    let image =
        pgm::read_plane(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let container = encode_image(&image, qf, &model)?;
    fs::write(&a.out, container.to_bytes()).with_context(|| format!("writing {}", a.out.display()))
}

pub fn decode(a: &DecodeArgs) -> Result<()> {
    let (model, _) = load_model(&a.weights)?;
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let container = Container::from_bytes(&bytes)?;
    let decoded = decode_image(&container, &model)?;
    pgm::write_plane(&a.out, &decoded.image).with_context(|| format!("writing {}", a.out.display()))
}

struct ImageEval {
    report: RecoveryReport,
    rates: Plane2D<Option<f64>>,
    residual_bits: usize,
    truth: SignTensor3D,
    retrieved: SignTensor3D,
    amp: signret::subband::AmpTensor3D,
}

fn evaluate_image(model: &Model<f32>, img: &ImagePlane, qf: u32) -> Result<ImageEval> {
    let table = quant_table_from_qf(qf)?;
    let ex = example_from_image(img, &table);
    let retrieved = retrieve_signs(model, &ex.amp, &dc_plane(&ex.sign))?;
    let report = recovery_rate(&ex.sign, &retrieved, &ex.amp)?;
    let rates = per_block_rates(&ex.sign, &retrieved, &ex.amp)?;
    let container = encode_image(img, qf, model)?;
    Ok(ImageEval {
        report,
        rates,
        residual_bits: container.residual.len() * 8,
        truth: ex.sign,
        retrieved,
        amp: ex.amp,
    })
}

fn write_heatmaps(dir: &Path, prefix: &str, map: &HeatMap) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, plane, scale) in [
        ("worst", &map.worst, 1.0),
        ("variance", &map.variance, VARIANCE_RENDER_SCALE),
        ("mean", &map.mean, 1.0),
    ] {
        let stem = format!("{prefix}{name}");
        pgm::write(
            dir.join(format!("{stem}.pgm")),
            plane.width,
            plane.height,
            &render_map(plane, scale),
        )?;
        fs::write(dir.join(format!("{stem}.csv")), map_csv(plane))?;
    }
    Ok(())
}

fn heatmap_of(evals: &[ImageEval]) -> Result<HeatMap> {
    let cases: Vec<_> = evals
        .iter()
        .map(|e| (e.truth.clone(), e.retrieved.clone(), e.amp.clone()))
        .collect();
    Ok(per_block_heatmap(&cases)?)
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let (model, meta) = load_model(&a.weights)?;
    let qfs = if a.qf.is_empty() {
        vec![resolve_qf(None, meta.as_ref())?]
    } else {
        a.qf.clone()
    };
    let images = load_images(&a.images)?;
    let mut out = String::from(
        "qf,images,significant_ac,recovery_rate,block_mean_rate,bits_per_sign,median_seconds\n",
    );
    for &qf in &qfs {
        warn_qf_mismatch(qf, meta.as_ref());
        let evals = images
            .par_iter()
            .map(|(_, img)| evaluate_image(&model, img, qf))
            .collect::<Result<Vec<_>>>()?;
        let pooled = RecoveryReport::pooled(evals.iter().map(|e| &e.report));
        let rates: Vec<_> = evals.iter().map(|e| e.rates.clone()).collect();
        let block_mean = block_mean_rate(&rates).map_or(String::new(), |r| format!("{r:.6}"));
        let bits: usize = evals.iter().map(|e| e.residual_bits).sum();
        let bps = if pooled.significant_ac_count == 0 {
            String::new()
        } else {
            format!("{:.6}", bits as f64 / pooled.significant_ac_count as f64)
        };
        let timing = if a.timing_runs == 0 {
            String::new()
        } else {
            let per_image =
                evals
                    .iter()
                    .map(|e| {
                        Ok(time_retrieval(
                            &model,
                            &e.amp,
                            &dc_plane(&e.truth),
                            a.timing_runs as usize,
                        )?
                        .median_seconds)
                    })
                    .collect::<Result<Vec<_>>>()?;
            format!("{:.6}", median(&per_image))
        };
        let _ = writeln!(
            out,
            "{qf},{},{},{:.6},{block_mean},{bps},{timing}",
            evals.len(),
            pooled.significant_ac_count,
            pooled.recovery_rate
        );
        if let Some(dir) = &a.heatmap_dir {
            match heatmap_of(&evals) {
                Ok(map) => write_heatmaps(dir, &format!("qf{qf}_"), &map)?,
                Err(e) => warn(format!("no heat maps at QF {qf}: {e}")),
            }
        }
    }
    write_output(a.out.as_deref(), &out)
}

pub fn heatmap(a: &HeatmapArgs) -> Result<()> {
    let (model, meta) = load_model(&a.weights)?;
    let qf = resolve_qf(a.qf, meta.as_ref())?;
    let images = load_images(&a.images)?;
    let evals = images
        .par_iter()
        .map(|(_, img)| evaluate_image(&model, img, qf))
        .collect::<Result<Vec<_>>>()?;
    write_heatmaps(&a.out_dir, "", &heatmap_of(&evals)?)
}
