use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use dwcgp_core::evaluation::{
    bundled_manifest, read_manifest, run_experiment, run_experiment_bundled, ExperimentPlan, ExperimentReport,
    ExperimentSample,
};
use dwcgp_core::firerisk::{read_chainage_csv, road_profile, RoadFrame};
use dwcgp_core::image::save_binary_png;
use dwcgp_core::segmenter::{samples_from_corpus_dir, samples_from_scene_dir, subsample, train_with_report};
use dwcgp_core::synth::{default_corpus_specs, render_corpus, SceneSpec};
use dwcgp_core::{Pipeline, RasterImage, WindowSpec};
use serde::Deserialize;

use crate::{stem, Ctx, ExperimentArg};

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<std::fs::File> {
    std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn pipeline(ctx: &Ctx) -> anyhow::Result<Pipeline> {
    if ctx.config.model.path.is_none() {
        bail!("this command needs a trained model: pass --model or set model.path in the config");
    }
    Ok(Pipeline::from_config(ctx.config.clone())?)
}

fn load_image(path: &Path) -> anyhow::Result<RasterImage> {
    RasterImage::load(path).with_context(|| format!("reading image {}", path.display()))
}

pub fn train(ctx: &Ctx, corpus: &Path, per_image: usize, model_out: Option<&Path>) -> anyhow::Result<ExitCode> {
    if !corpus.is_dir() {
        bail!("corpus directory {} does not exist", corpus.display());
    }
    // accept the root written by `synth` as well as the corpus folder itself
    let root = if corpus.join("corpus").is_dir() {
        corpus.join("corpus")
    } else {
        corpus.to_path_buf()
    };
    let mut samples = samples_from_corpus_dir(&root)?;
    let scenes = root.join("scenes");
    if scenes.is_dir() {
        samples.extend(samples_from_scene_dir(&scenes, per_image, ctx.config.seed)?);
    }
    let cap = ctx.config.training.max_samples;
    if cap > 0 && samples.len() > cap {
        samples = subsample(&samples, cap, ctx.config.seed);
    }
    let (model, report) = train_with_report(&samples, &ctx.config.training_config())?;
    let path = model_out.map(Path::to_path_buf).unwrap_or_else(|| ctx.out.join("model.txt"));
    model.save(&path)?;
    let summary = serde_json::json!({
        "samples": samples.len(),
        "epochs": report.epochs,
        "final_mse": report.final_mse,
        "training_accuracy": report.training_accuracy,
        "stop_reason": format!("{:?}", report.stop_reason),
        "mse_history": report.mse_history,
        "model": path,
    });
    write_text(&ctx.out.join("training_report.json"), &serde_json::to_string_pretty(&summary)?)?;
    println!("samples: {}", samples.len());
    println!("epochs: {} ({:?})", report.epochs, report.stop_reason);
    println!("final mse: {:.6}", report.final_mse);
    println!("training accuracy: {:.2}%", 100.0 * report.training_accuracy);
    println!("model: {}", path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn segment(ctx: &Ctx, image: &Path) -> anyhow::Result<ExitCode> {
    let p = pipeline(ctx)?;
    let img = load_image(image)?;
    let mask = p.segment(&img)?;
    let path = ctx.out.join(format!("{}_mask.png", stem(image)));
    save_binary_png(mask.labels(), &path)?;
    let frac = mask.grass_count() as f64 / (mask.height() * mask.width()) as f64;
    println!("grass pixels: {} ({:.2}%)", mask.grass_count(), 100.0 * frac);
    println!("mask: {}", path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn orient(ctx: &Ctx, image: &Path) -> anyhow::Result<ExitCode> {
    // orientation needs no classifier, so a placeholder model is enough
    let p = Pipeline::new(ctx.config.clone(), dwcgp_core::NetworkModel::zeros(1))?;
    let img = load_image(image)?;
    let omap = p.orient(&img)?;
    let name = stem(image);
    let palette = ctx.out.join(format!("{name}_orientation.png"));
    let vertical = ctx.out.join(format!("{name}_vertical.png"));
    omap.save_palette_png(&palette)?;
    omap.save_vertical_png(&vertical)?;
    println!("vertical index: {}", omap.vertical_index());
    println!("vertical pixels: {:.2}%", 100.0 * omap.vertical_fraction());
    println!("orientation: {}", palette.display());
    println!("vertical: {}", vertical.display());
    Ok(ExitCode::SUCCESS)
}

pub fn estimate(ctx: &Ctx, image: &Path, window: Option<&WindowSpec>, calibration: Option<f64>) -> anyhow::Result<ExitCode> {
    let p = pipeline(ctx)?;
    let img = load_image(image)?;
    let r = p.estimate(&img, window)?;
    let name = stem(image);
    let csv = ctx.out.join(format!("{name}_columns.csv"));
    r.write_csv(create(&csv)?)?;
    let json = serde_json::json!({
        "image": image,
        "window": window,
        "dwcgp": r.dwcgp,
        "mode": r.mode,
        "length_agg": r.length_agg,
        "region_width": r.region_width,
        "biomass_t_ha": calibration.map(|a| a * r.dwcgp),
        "config": ctx.config,
    });
    write_text(&ctx.out.join(format!("{name}_dwcgp.json")), &serde_json::to_string_pretty(&json)?)?;
    println!("{:?}: {:.4}", r.mode, r.dwcgp);
    if let Some(a) = calibration {
        println!("biomass: {:.3} t/ha", a * r.dwcgp);
    }
    println!("columns: {}", csv.display());
    Ok(ExitCode::SUCCESS)
}

fn plans(arg: ExperimentArg) -> Vec<ExperimentPlan> {
    match arg {
        ExperimentArg::BaselineCompare => vec![ExperimentPlan::BaselineCompare],
        ExperimentArg::RotationSweep => vec![ExperimentPlan::RotationSweep],
        ExperimentArg::WidthSweep => vec![ExperimentPlan::WidthSweep],
        ExperimentArg::GaborModeGrid => vec![ExperimentPlan::GaborModeGrid],
        ExperimentArg::All => vec![
            ExperimentPlan::BaselineCompare,
            ExperimentPlan::RotationSweep,
            ExperimentPlan::WidthSweep,
            ExperimentPlan::GaborModeGrid,
        ],
    }
}

fn print_report(r: &ExperimentReport) {
    println!("{}", r.experiment);
    println!("  {:<18} {:>4} {:>10} {:>8} {:>8} {:>3}", "cell", "n", "a", "rmse", "ks p", "H");
    for c in &r.cells {
        let f = |v: Option<f64>, p: usize| v.map(|v| format!("{v:.p$}")).unwrap_or_else(|| "-".into());
        println!(
            "  {:<18} {:>4} {:>10} {:>8} {:>8} {:>3}",
            c.spec.label,
            c.n_samples,
            f(c.calibration_a, 6),
            f(c.rmse, 4),
            f(c.ks.as_ref().map(|k| k.p_value), 4),
            c.ks.as_ref().map(|k| u8::from(k.reject_h0).to_string()).unwrap_or_else(|| "-".into()),
        );
    }
}

pub fn evaluate(ctx: &Ctx, manifest: Option<&Path>, experiment: ExperimentArg) -> anyhow::Result<ExitCode> {
    let rows = match manifest {
        Some(m) => read_manifest(m).with_context(|| format!("reading manifest {}", m.display()))?,
        None => bundled_manifest(),
    };
    let samples = ExperimentSample::from_manifest(&rows);
    let pipeline = match ctx.config.model.path {
        Some(_) => Some(pipeline(ctx)?),
        None => None,
    };
    for plan in plans(experiment) {
        let report = match &pipeline {
            Some(p) => run_experiment(&samples, plan, p),
            None => run_experiment_bundled(&samples, plan, &ctx.config),
        };
        let name = plan.name();
        write_text(&ctx.out.join(format!("{name}.json")), &report.to_json()?)?;
        report.write_csv(create(&ctx.out.join(format!("{name}.csv")))?)?;
        report.write_predictions_csv(create(&ctx.out.join(format!("{name}_predictions.csv")))?)?;
        print_report(&report);
        if !report.issues.is_empty() {
            eprintln!("{}: {} sample issues", name, report.issues.len());
            let mut grouped: BTreeMap<(&str, &str), Vec<&str>> = BTreeMap::new();
            for i in &report.issues {
                grouped
                    .entry((i.cell.as_deref().unwrap_or("-"), i.message.as_str()))
                    .or_default()
                    .push(&i.id);
            }
            for ((cell, msg), ids) in grouped {
                eprintln!("  [{cell}] {msg}: {}", ids.join(" "));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn frame_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading frame directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| ["png", "jpg", "jpeg"].contains(&x.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no PNG or JPEG frames in {}", dir.display());
    }
    Ok(files)
}

pub fn firerisk(ctx: &Ctx, frames_dir: &Path, chainage: Option<&Path>) -> anyhow::Result<ExitCode> {
    let p = pipeline(ctx)?;
    let files = frame_files(frames_dir)?;
    let chain = match chainage {
        Some(c) => Some(read_chainage_csv(c).with_context(|| format!("reading chainage {}", c.display()))?),
        None => None,
    };
    let mut frames = Vec::with_capacity(files.len());
    let mut missing = Vec::new();
    for f in &files {
        let id = stem(f);
        let at = match &chain {
            Some(map) => match map.get(&id) {
                Some(&c) => Some(c),
                None => {
                    missing.push(id.clone());
                    None
                }
            },
            None => None,
        };
        frames.push(RoadFrame {
            id,
            image: load_image(f)?,
            chainage: at,
        });
    }
    if !missing.is_empty() {
        bail!("frames without chainage: {}", missing.join(", "));
    }
    // the profile expects frames in road order
    frames.sort_by(|a, b| a.chainage.unwrap_or(0.0).total_cmp(&b.chainage.unwrap_or(0.0)));
    let profile = road_profile(&frames, &p)?;
    profile.write_csv(create(&ctx.out.join("road_profile.csv"))?)?;
    write_text(&ctx.out.join("fire_segments.json"), &profile.segments_json()?)?;
    write_text(&ctx.out.join("road_profile.json"), &serde_json::to_string_pretty(&profile)?)?;
    if ctx.emit_plot_data {
        profile.write_plot_csv(create(&ctx.out.join("chainage_plot.csv"))?)?;
    }
    let high = profile.frames.iter().filter(|f| f.frame_label.as_str() == "high").count();
    println!("frames: {} ({} high risk)", profile.frames.len(), high);
    for s in &profile.segments {
        println!(
            "fire-prone: {} to {} ({} frames, peak {:.2})",
            s.start_chainage, s.end_chainage, s.frame_count, s.peak_dwcgp
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
struct SynthFile {
    #[serde(default)]
    scenes: Vec<SceneSpec>,
}

pub fn synth(ctx: &Ctx, spec: Option<&Path>, count: usize) -> anyhow::Result<ExitCode> {
    let specs = match spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: SynthFile = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            file.scenes
        }
        None => default_corpus_specs(count, ctx.config.seed),
    };
    if specs.is_empty() {
        bail!("no scenes to render");
    }
    let summary = render_corpus(&specs, &ctx.out)?;
    println!("scenes: {}", summary.rows.len());
    println!("manifest: {}", summary.manifest_path.display());
    Ok(ExitCode::SUCCESS)
}
