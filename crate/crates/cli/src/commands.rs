use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use ddsp_core::config::{ForecasterKind, PipelineConfig};
use ddsp_core::data::{aggregate_demand, ingest_trips, write_trips_csv, ZoneMap};
use ddsp_core::eval::{compare as compare_reports, ComparisonReport, EvaluationReport, OptimizerMode, PlanMode};
use ddsp_core::forecast::Forecast;
use ddsp_core::lp::Certificate;
use ddsp_core::nn::CellKind;
use ddsp_core::pipeline::{
    default_label, fit_residuals, load_configured_forecaster, load_demand, load_forecaster, partition, read_json,
    require, save_forecaster, train_forecaster, write_json, write_text, ArtifactManifest, HeadKind, Layout,
    ResidualArtifact, TrainingMeta,
};
use ddsp_core::relocation::{
    build_two_stage, deterministic_model, format_saa_table, rounded_with_gap, saa_convergence, solve_model,
    PlanDecision, RelocationInstance, RoundedPlan, SaaRow,
};
use ddsp_core::scenario::{sample_scenarios, ScenarioSet};
use ddsp_core::synth::{generate_series, trips_for_series, zone_map};

fn layout(cfg: &PipelineConfig) -> Layout {
    Layout::new(&cfg.paths.artifacts)
}

fn demand_manifest_path(layout: &Layout) -> std::path::PathBuf {
    layout.root.join("demand.manifest.json")
}

pub fn synth(cfg: &PipelineConfig, with_trips: bool) -> Result<()> {
    let layout = layout(cfg);
    let series = generate_series(&cfg.synth)?;
    std::fs::create_dir_all(&layout.root).with_context(|| format!("creating {}", layout.root.display()))?;
    series.save_csv(&layout.demand())?;
    write_json(&demand_manifest_path(&layout), &ArtifactManifest::new("synth", cfg, &[])?)?;
    if with_trips {
        let zones = zone_map(cfg.synth.zones);
        let trips = trips_for_series(&series, &zones, cfg.synth.seed);
        let path = layout.root.join("trips.csv");
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_trips_csv(std::io::BufWriter::new(file), &trips)?;
        write_json(&layout.root.join("zones.json"), &zones)?;
        println!("wrote {} trips to {}", trips.len(), path.display());
    }
    println!("wrote {} days x {} zones to {}", series.len(), series.zone_count(), layout.demand().display());
    Ok(())
}

pub fn ingest(cfg: &PipelineConfig) -> Result<()> {
    let layout = layout(cfg);
    let zones_text = std::fs::read_to_string(&cfg.paths.zones)
        .with_context(|| format!("reading zone map {}", cfg.paths.zones.display()))?;
    let zones: ZoneMap = serde_json::from_str(&zones_text).context("parsing zone map")?;
    let (trips, report) = ingest_trips(&cfg.paths.trips, &cfg.data.schema)?;
    let agg = aggregate_demand(&trips, &zones, cfg.data.unit);
    if agg.series.is_empty() {
        bail!("no trip fell inside the zone map; nothing to aggregate");
    }
    std::fs::create_dir_all(&layout.root)?;
    agg.series.save_csv(&layout.demand())?;
    let manifest = ArtifactManifest::new("ingest", cfg, &[&cfg.paths.trips, &cfg.paths.zones])?;
    write_json(&demand_manifest_path(&layout), &manifest)?;
    write_json(
        &layout.root.join("ingest_report.json"),
        &serde_json::json!({
            "ingest": report,
            "matched_trips": agg.matched_trips,
            "unmatched_trips": agg.unmatched_trips,
            "zero_filled_days": agg.zero_filled_days,
            "manifest": manifest,
        }),
    )?;
    println!(
        "rows {} accepted {} rejected {}; {} days x {} zones",
        report.total_rows,
        report.accepted,
        report.rejected,
        agg.series.len(),
        agg.series.zone_count()
    );
    for (reason, n) in &report.reasons {
        println!("  rejected ({reason}): {n}");
    }
    Ok(())
}

fn checkpoint_name(head: HeadKind) -> &'static str {
    match head {
        HeadKind::Mdn => "mdn",
        HeadKind::Point => "point",
    }
}

pub fn train(cfg: &PipelineConfig, head: HeadKind, cell: CellKind) -> Result<()> {
    let layout = layout(cfg);
    let series = load_demand(&layout.demand())?;
    let label = default_label(head, cell);
    let (f, history, validation_loss) = train_forecaster(cfg, &series, head, cell, &label)?;
    let meta = TrainingMeta {
        label,
        ws: f.ws,
        scaler: f.scaler.clone(),
        history: history.clone(),
        validation_loss,
        manifest: ArtifactManifest::new("train", cfg, &[&layout.demand()])?,
    };
    let path = layout.checkpoint(checkpoint_name(head));
    save_forecaster(&f, &meta, &path)?;
    match history.last() {
        Some(l) => println!("{}: {} epochs, final training loss {l:.6}", meta.label, history.len()),
        None => println!("{}: 0 epochs, initial weights saved", meta.label),
    }
    if let Some(v) = validation_loss {
        println!("validation loss {v:.6}");
    }
    println!("checkpoint {}", path.display());
    Ok(())
}

pub fn fit_gmm(cfg: &PipelineConfig) -> Result<()> {
    let layout = layout(cfg);
    let series = load_demand(&layout.demand())?;
    let ckpt = layout.checkpoint("point");
    let (base, _) = load_forecaster(&ckpt).context("fit-gmm needs a point checkpoint (`ddsp train --head point`)")?;
    let (ph, fits) = fit_residuals(cfg, base, &series)?;
    let art = ResidualArtifact {
        residuals: ph.residuals,
        fits,
        manifest: ArtifactManifest::new("fit-gmm", cfg, &[&layout.demand(), &ckpt])?,
    };
    let path = layout.posthoc("point");
    write_json(&path, &art)?;
    for (z, f) in art.fits.iter().enumerate() {
        println!(
            "zone {}: log-likelihood {:.4} after {} iterations (best restart {})",
            series.zones[z],
            f.log_likelihood_trace.last().copied().unwrap_or(f64::NAN),
            f.iterations,
            f.best_restart
        );
    }
    println!("residual mixtures {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ForecastArtifact {
    date: NaiveDate,
    zones: Vec<String>,
    forecaster: String,
    forecast: Forecast,
    manifest: ArtifactManifest,
}

fn forecaster_inputs(cfg: &PipelineConfig, layout: &Layout) -> Vec<std::path::PathBuf> {
    match cfg.eval.forecaster {
        ForecasterKind::Mdn => vec![layout.checkpoint("mdn")],
        ForecasterKind::Point => vec![layout.checkpoint("point")],
        ForecasterKind::PostHoc => vec![layout.checkpoint("point"), layout.posthoc("point")],
    }
}

pub fn forecast(cfg: &PipelineConfig, date: Option<NaiveDate>) -> Result<()> {
    let layout = layout(cfg);
    let series = load_demand(&layout.demand())?;
    let forecaster = load_configured_forecaster(cfg, &layout)?;
    let date = match date {
        Some(d) => d,
        None => partition(cfg, &series)?.1.index[0],
    };
    let end = match series.position(date) {
        Some(p) => p,
        None if series.index.last().and_then(|d| d.succ_opt()) == Some(date) => series.len(),
        None => bail!("{date} is neither in the demand series nor the day after it"),
    };
    let ws = forecaster.window_size();
    if end < ws {
        bail!("{date} has only {end} days of history; the model needs {ws}");
    }
    let window: Vec<Vec<f64>> = (end - ws..end).map(|d| series.day(d)).collect();
    let fc = forecaster.forecast(date, &window)?;
    let mut inputs = vec![layout.demand()];
    inputs.extend(forecaster_inputs(cfg, &layout));
    let refs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let art = ForecastArtifact {
        date,
        zones: series.zones.clone(),
        forecaster: forecaster.name(),
        forecast: fc,
        manifest: ArtifactManifest::new("forecast", cfg, &refs)?,
    };
    let path = layout.root.join("forecast.json");
    write_json(&path, &art)?;
    let mean = art.forecast.point();
    for (z, m) in art.zones.iter().zip(&mean) {
        println!("{date} {z}: mean {m:.4}");
    }
    println!("forecast {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanArtifact {
    date: NaiveDate,
    optimizer: OptimizerMode,
    instance: RelocationInstance,
    plan: PlanDecision,
    objective: f64,
    moving: f64,
    certificate: Certificate,
    rounded: RoundedPlan,
    saa: Vec<SaaRow>,
    manifest: ArtifactManifest,
}

pub fn optimize(cfg: &PipelineConfig, lp_out: Option<&Path>, saa_counts: &[usize]) -> Result<()> {
    let layout = layout(cfg);
    let fpath = layout.root.join("forecast.json");
    let fc: ForecastArtifact = read_json(&fpath, "forecast")?;
    let instance = cfg.instance_for(&fc.zones)?;
    let eval = cfg.eval_config();
    let scenarios = match (cfg.eval.optimizer, &fc.forecast) {
        (OptimizerMode::Stochastic, Forecast::Distribution(ms)) => sample_scenarios(ms, eval.scenarios, eval.seed, cfg.exec)?,
        _ => ScenarioSet::from_vectors(vec![fc.forecast.point().iter().map(|v| v.max(0.0)).collect()])?,
    };
    let (lp, idx) = match cfg.eval.optimizer {
        OptimizerMode::Stochastic => build_two_stage(&instance, &scenarios)?,
        OptimizerMode::Deterministic => deterministic_model(&instance, &scenarios.scenarios[0])?,
    };
    if let Some(p) = lp_out {
        write_text(p, &lp.to_lp_format())?;
        println!("LP written to {}", p.display());
    }
    let solved = solve_model(&instance, &lp, &idx)?;
    let rounded = rounded_with_gap(&instance, &solved, &scenarios)?;
    let saa = match &fc.forecast {
        Forecast::Distribution(ms) if !saa_counts.is_empty() => saa_convergence(&instance, ms, saa_counts, eval.seed, cfg.exec)?,
        _ => Vec::new(),
    };
    let art = PlanArtifact {
        date: fc.date,
        optimizer: cfg.eval.optimizer,
        moving: solved.plan.moving(),
        objective: solved.objective,
        certificate: solved.certificate,
        plan: solved.plan,
        instance,
        rounded,
        saa,
        manifest: ArtifactManifest::new("optimize", cfg, &[&fpath])?,
    };
    let path = layout.root.join("plan.json");
    write_json(&path, &art)?;
    println!(
        "{} plan for {}: expected profit {:.4}, moving {:.4}, certified {}",
        match art.optimizer {
            OptimizerMode::Stochastic => "stochastic",
            OptimizerMode::Deterministic => "deterministic",
        },
        art.date,
        art.objective,
        art.moving,
        art.certificate.is_certified()
    );
    for (z, s) in art.instance.zones.iter().zip(&art.plan.post_stock) {
        println!("  {z}: post-move stock {s:.4}");
    }
    println!("rounded plan gap {:.4}", art.rounded.integrality_gap);
    if !art.saa.is_empty() {
        print!("{}", format_saa_table(&art.saa));
    }
    println!("plan {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportArtifact {
    report: EvaluationReport,
    manifest: ArtifactManifest,
}

pub fn evaluate(cfg: &PipelineConfig, name: Option<&str>) -> Result<()> {
    let layout = layout(cfg);
    let series = load_demand(&layout.demand())?;
    let forecaster = load_configured_forecaster(cfg, &layout)?;
    let report = ddsp_core::pipeline::evaluate(cfg, forecaster.as_ref(), cfg.eval.optimizer, &series)?;
    let default_name = format!(
        "{}-{}{}",
        match cfg.eval.forecaster {
            ForecasterKind::Mdn => "mdn",
            ForecasterKind::PostHoc => "post-hoc",
            ForecasterKind::Point => "point",
        },
        match cfg.eval.optimizer {
            OptimizerMode::Stochastic => "stochastic",
            OptimizerMode::Deterministic => "deterministic",
        },
        match cfg.eval.plan {
            PlanMode::Replan => "",
            PlanMode::SinglePlan => "-single-plan",
        }
    );
    let name = name.unwrap_or(&default_name);
    let mut inputs = vec![layout.demand()];
    inputs.extend(forecaster_inputs(cfg, &layout));
    let refs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let art = ReportArtifact {
        manifest: ArtifactManifest::new("evaluate", cfg, &refs)?,
        report,
    };
    let path = layout.report(name);
    write_json(&path, &art)?;
    let table = art.report.to_table();
    write_text(&path.with_extension("txt"), &table)?;
    write_text(&path.with_extension("csv"), &art.report.days_csv())?;
    print!("{table}");
    println!("report {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct ComparisonArtifact<'a> {
    comparison: &'a ComparisonReport,
    manifest: ArtifactManifest,
}

pub fn compare(cfg: &PipelineConfig, a: &Path, b: &Path, name: &str) -> Result<()> {
    require(a, "evaluate")?;
    require(b, "evaluate")?;
    let ra: ReportArtifact = read_json(a, "evaluate")?;
    let rb: ReportArtifact = read_json(b, "evaluate")?;
    let cmp = compare_reports(&ra.report, &rb.report);
    let table = cmp.to_table();
    let layout = layout(cfg);
    let path = layout.report(name);
    write_json(
        &path,
        &ComparisonArtifact {
            comparison: &cmp,
            manifest: ArtifactManifest::new("compare", cfg, &[a, b])?,
        },
    )?;
    write_text(&path.with_extension("txt"), &table)?;
    print!("{table}");
    Ok(())
}
