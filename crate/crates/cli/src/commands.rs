use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use propsurro::dataset::{Dataset, Domain, Fidelity};
use propsurro::gp::DensityGp;
use propsurro::metrics::{cv_map, l2_mre, r2_score, relative_error, MetricsError};
use propsurro::model::{DensityModel, Prediction};
use propsurro::multifidelity::{
    fusion_experiment, mf_generative_fit, nargp_fit, score_rows, write_report, FidelityPair, FusionReport, ReportRow,
};
use propsurro::plot::{LinePlot, Series};
use propsurro::surrogate::{load_model, save_model, train_model, ModelFile, ModelKind};
use propsurro::synthdata::{critical_temperature, generate_table, generate_table_tagged, grid_temperatures, GRID_CARBONS, GRID_PRESSURES_MPA};
use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Failure(String),
    #[error("model file: {0}")]
    ModelFile(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failure(_) => 3,
            CliError::ModelFile(_) => 4,
        }
    }
}

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(|e| fail(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(fail)?;
    write_file(path, text + "\n")
}

fn load_table(path: &Path, fidelity: Fidelity) -> Result<Dataset, CliError> {
    Dataset::load_csv(path, fidelity).map_err(fail)
}

fn load_model_file(cfg: &RunConfig) -> Result<ModelFile, CliError> {
    let path = cfg.model_path();
    load_model(&path).map_err(|e| CliError::ModelFile(format!("{}: {e}", path.display())))
}

fn check_domain(domain: &Domain, states: impl IntoIterator<Item = (f64, f64, u32)>, extrapolate: bool) -> Result<(), CliError> {
    if extrapolate {
        return Ok(());
    }
    for (p, t, c) in states {
        if !domain.contains(p, t, c) {
            return Err(CliError::Config(format!(
                "query (p={p} MPa, T={t} K, C={c}) is outside the training domain {domain:?}; pass --extrapolate to allow it"
            )));
        }
    }
    Ok(())
}

pub fn generate(cfg: &RunConfig, carbons_flag: &[u32]) -> Result<(), CliError> {
    let carbons: Vec<u32> = if !carbons_flag.is_empty() {
        carbons_flag.to_vec()
    } else if !cfg.data.carbons.is_empty() {
        cfg.data.carbons.clone()
    } else {
        GRID_CARBONS.to_vec()
    };
    if let Some(&c) = carbons.iter().find(|&&c| critical_temperature(c).is_none()) {
        return Err(CliError::Config(format!("no oracle for carbon count {c}")));
    }
    let dir = out_dir(cfg)?;
    let temps = grid_temperatures();
    let low = generate_table(&GRID_PRESSURES_MPA, &temps, &carbons, &cfg.oracle).map_err(fail)?;
    let high = generate_table_tagged(&GRID_PRESSURES_MPA, &temps, &carbons, &cfg.oracle.high_fidelity(cfg.discrepancy), Fidelity::High)
        .map_err(fail)?;
    for (name, table) in [("low_fidelity.csv", &low), ("high_fidelity.csv", &high)] {
        let path = dir.join(name);
        table.save_csv(&path).map_err(fail)?;
        println!("wrote {} ({} rows)", path.display(), table.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainReport {
    model: ModelKind,
    l2_mre: Option<f64>,
    r2: Option<f64>,
    train_fraction: f64,
    subset_fraction: f64,
    n_train: usize,
    n_test: usize,
    /// Seconds spent fitting.
    wall_time: f64,
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load_table(&cfg.data_path(), Fidelity::Low)?;
    let (train, test) = data.split(&cfg.split).map_err(fail)?;
    let domain = Domain::of(&train).ok_or_else(|| fail("empty training set"))?;
    let spec = cfg.model_spec();
    let start = Instant::now();
    let model = train_model(&train, &spec).map_err(|e| fail(format!("training failed: {e}")))?;
    let wall_time = start.elapsed().as_secs_f64();

    let (l2, r2) = if test.is_empty() {
        (None, None)
    } else {
        let mean: Vec<f64> = model.predict_dataset(&test).map_err(fail)?.iter().map(|p| p.mean).collect();
        let truth = test.densities();
        (l2_mre(&truth, &mean).ok(), r2_score(&truth, &mean).ok())
    };
    let dir = out_dir(cfg)?;
    let file = ModelFile { model, domain };
    let model_path = cfg.model_path();
    save_model(&file, &model_path).map_err(fail)?;
    println!("wrote {}", model_path.display());
    let report = TrainReport {
        model: spec.kind,
        l2_mre: l2,
        r2,
        train_fraction: cfg.split.train_fraction,
        subset_fraction: cfg.split.subset_fraction,
        n_train: train.len(),
        n_test: test.len(),
        wall_time,
    };
    write_json(&dir.join("train_report.json"), &report)?;
    if let (Some(l2), Some(r2)) = (l2, r2) {
        println!("{}: l2_mre {l2:.4e}, r2 {r2:.6} on {} held-out rows ({wall_time:.1} s)", spec.kind, test.len());
    }
    Ok(())
}

fn sweep_temperatures(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let (lo, hi) = cfg.predict.temperature_range;
    let step = cfg.predict.temperature_step;
    if !(step > 0.0) || !(hi >= lo) {
        return Err(CliError::Config("predict: empty temperature sweep".into()));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

fn mpa_tag(p: f64) -> String {
    format!("{p}").replace('.', "_")
}

pub fn predict(cfg: &RunConfig, extrapolate: bool) -> Result<(), CliError> {
    let pc = &cfg.predict;
    if pc.pressures.is_empty() {
        return Err(CliError::Config("predict: empty pressure sweep".into()));
    }
    let temps = sweep_temperatures(cfg)?;
    let file = load_model_file(cfg)?;
    let reference = pc.reference.as_ref().map(|p| load_table(p, Fidelity::High)).transpose()?;
    let c = pc.carbon_count;
    let states = pc.pressures.iter().flat_map(|&p| temps.iter().map(move |&t| (p, t, c)));
    check_domain(&file.domain, states, extrapolate)?;
    if let Some(r) = &reference {
        check_domain(&file.domain, r.iter().map(|q| (q.pressure, q.temperature, q.carbon_count)), extrapolate)?;
    }

    let dir = out_dir(cfg)?;
    let mut plot = LinePlot {
        title: format!("density, C{c}"),
        x_label: "temperature [K]".into(),
        y_label: "density [kg/m3]".into(),
        series: Vec::new(),
    };
    for &p in &pc.pressures {
        let preds: Vec<Prediction> = temps.iter().map(|&t| file.model.predict(p, t, c)).collect::<Result<_, _>>().map_err(fail)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["pressure_mpa", "temperature_k", "carbon_count", "mean", "sd", "lower_2sd", "upper_2sd"]).map_err(fail)?;
        for (t, q) in temps.iter().zip(&preds) {
            let sd = q.sd();
            w.write_record([p.to_string(), t.to_string(), c.to_string(), q.mean.to_string(), sd.to_string(), (q.mean - 2.0 * sd).to_string(), (q.mean + 2.0 * sd).to_string()])
                .map_err(fail)?;
        }
        write_file(&dir.join(format!("prediction_p{}.csv", mpa_tag(p))), w.into_inner().map_err(fail)?)?;
        let markers = reference
            .iter()
            .flat_map(|r| r.iter())
            .filter(|q| q.pressure == p && q.carbon_count == c)
            .map(|q| (q.temperature, q.density))
            .collect();
        plot.series.push(Series {
            name: format!("{p} MPa"),
            x: temps.clone(),
            y: preds.iter().map(|q| q.mean).collect(),
            band: Some((preds.iter().map(|q| q.mean - 2.0 * q.sd()).collect(), preds.iter().map(|q| q.mean + 2.0 * q.sd()).collect())),
            markers,
        });
    }
    write_file(&dir.join("prediction.svg"), plot.render())?;

    if let Some(r) = &reference {
        let rows = score_rows(&file.model, file.model.kind().as_str(), 0, r).map_err(fail)?;
        let mut buf = Vec::new();
        write_report(&rows, &mut buf).map_err(fail)?;
        write_file(&dir.join("reference_errors.csv"), buf)?;
        let mean: Vec<f64> = rows.iter().map(|q| q.mean).collect();
        if let Ok(e) = l2_mre(&r.densities(), &mean) {
            println!("reference l2_mre {e:.4e} over {} points", r.len());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluateReport {
    model: ModelKind,
    data: String,
    n: usize,
    l2_mre: f64,
    r2: f64,
}

pub fn evaluate(cfg: &RunConfig, extrapolate: bool) -> Result<(), CliError> {
    let file = load_model_file(cfg)?;
    let (data, source) = match &cfg.evaluate.data {
        Some(path) => (load_table(path, Fidelity::Low)?, path.display().to_string()),
        None => {
            let path = cfg.data_path();
            let (_, test) = load_table(&path, Fidelity::Low)?.split(&cfg.split).map_err(fail)?;
            (test, format!("{} (held out)", path.display()))
        }
    };
    if data.is_empty() {
        return Err(fail("nothing to evaluate"));
    }
    check_domain(&file.domain, data.iter().map(|q| (q.pressure, q.temperature, q.carbon_count)), extrapolate)?;
    let rows = score_rows(&file.model, file.model.kind().as_str(), 0, &data).map_err(fail)?;
    let truth = data.densities();
    let mean: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let metric = |e: MetricsError| fail(format!("metrics: {e}"));
    let report = EvaluateReport {
        model: file.model.kind(),
        data: source,
        n: data.len(),
        l2_mre: l2_mre(&truth, &mean).map_err(metric)?,
        r2: r2_score(&truth, &mean).map_err(metric)?,
    };
    let dir = out_dir(cfg)?;
    let mut buf = Vec::new();
    write_report(&rows, &mut buf).map_err(fail)?;
    write_file(&dir.join("evaluation.csv"), buf)?;
    write_json(&dir.join("evaluate_report.json"), &report)?;
    println!("l2_mre {:.4e}, r2 {:.6} over {} rows", report.l2_mre, report.r2, report.n);
    Ok(())
}

pub fn cvmap(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.cvmap.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let file = load_model_file(cfg)?;
    let map = cv_map(&file.model, &cfg.cvmap).map_err(fail)?;
    let dir = out_dir(cfg)?;
    let mut buf = Vec::new();
    map.write_csv(&mut buf).map_err(fail)?;
    write_file(&dir.join("cv_map.csv"), buf)?;
    write_file(&dir.join("cv_map.svg"), map.to_svg())?;
    let invalid = map.cells.iter().filter(|c| !c.valid).count();
    println!("{} x {} cells, {invalid} invalid", map.temperature_rows(), map.pressures.len());
    Ok(())
}

fn curves_plot(title: &str, rows: &[ReportRow], groups: &[(String, Box<dyn Fn(&ReportRow) -> bool>)]) -> String {
    let mut plot = LinePlot { title: title.into(), x_label: "temperature [K]".into(), y_label: "density [kg/m3]".into(), series: Vec::new() };
    for (i, (name, keep)) in groups.iter().enumerate() {
        let sel: Vec<&ReportRow> = rows.iter().filter(|r| keep(r)).collect();
        if sel.is_empty() {
            continue;
        }
        plot.series.push(Series {
            name: name.clone(),
            x: sel.iter().map(|r| r.temperature_k).collect(),
            y: sel.iter().map(|r| r.mean).collect(),
            band: Some((sel.iter().map(|r| r.mean - 2.0 * r.sd).collect(), sel.iter().map(|r| r.mean + 2.0 * r.sd).collect())),
            markers: if i == 0 { sel.iter().map(|r| (r.temperature_k, r.ref_value)).collect() } else { Vec::new() },
        });
    }
    plot.render()
}

#[derive(Serialize)]
struct AnchorRow {
    n_added: usize,
    pressure_mpa: f64,
    temperature_k: f64,
    error_before: f64,
    error_after: f64,
}

pub fn fuse(cfg: &RunConfig) -> Result<(), CliError> {
    let fc = &cfg.fuse;
    let synthetic = fc.setup.build(&cfg.oracle, cfg.discrepancy).map_err(fail)?;
    let base = match &fc.base {
        Some(p) => load_table(p, Fidelity::Low)?,
        None => synthetic.base,
    };
    let extra = match &fc.extra {
        Some(p) => load_table(p, Fidelity::High)?,
        None => synthetic.extra,
    };
    let reference = match &fc.reference {
        Some(p) => load_table(p, Fidelity::High)?,
        None => synthetic.reference,
    };
    let spec = cfg.model_spec();
    let report: FusionReport = fusion_experiment(&base, &extra, &reference, &spec).map_err(fail)?;

    let dir = out_dir(cfg)?;
    let mut buf = Vec::new();
    write_report(&report.rows, &mut buf).map_err(fail)?;
    write_file(&dir.join("fusion_report.csv"), buf)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for a in &report.anchors {
        w.serialize(AnchorRow {
            n_added: a.n_added,
            pressure_mpa: a.pressure_mpa,
            temperature_k: a.temperature_k,
            error_before: a.error_before,
            error_after: a.error_after,
        })
        .map_err(fail)?;
    }
    write_file(&dir.join("fusion_anchors.csv"), w.into_inner().map_err(fail)?)?;
    let groups: Vec<(String, Box<dyn Fn(&ReportRow) -> bool>)> =
        (0..=extra.len()).map(|n| (format!("{n} added"), Box::new(move |r: &ReportRow| r.n_added == n) as Box<dyn Fn(&ReportRow) -> bool>)).collect();
    write_file(&dir.join("fusion.svg"), curves_plot(&format!("fusion study, {}", spec.kind), &report.rows, &groups))?;

    for n in 0..=extra.len() {
        if let Some(e) = report.max_rel_error(n, f64::NEG_INFINITY, f64::INFINITY) {
            println!("{} arm n_added={n}: max relative error {e:.4}", spec.kind);
        }
    }
    if !report.failures.is_empty() {
        let msgs: Vec<String> = report.failures.iter().map(|f| format!("arm {}: {}", f.n_added, f.message)).collect();
        return Err(fail(format!("fusion arms failed: {}", msgs.join("; "))));
    }
    Ok(())
}

#[derive(Serialize)]
struct MfSummary {
    model: String,
    n_high: usize,
    l2_mre: f64,
    max_rel_error: f64,
}

pub fn mf(cfg: &RunConfig, only: Option<ModelKind>) -> Result<(), CliError> {
    let mc = &cfg.mf;
    let synthetic = mc.setup.build(&cfg.oracle, cfg.discrepancy).map_err(fail)?;
    let low = match &mc.low {
        Some(p) => load_table(p, Fidelity::Low)?,
        None => synthetic.low,
    };
    let high = match &mc.high {
        Some(p) => load_table(p, Fidelity::High)?,
        None => synthetic.high,
    };
    let truth = match &mc.truth {
        Some(p) => load_table(p, Fidelity::High)?,
        None => synthetic.truth,
    };
    let n_high = high.len();
    let pair = FidelityPair::new(low, high.clone()).map_err(fail)?;
    let features = &cfg.model.features;
    let mut train = cfg.training.clone();
    train.disc_updates = mc.disc_updates;
    train.gen_updates = mc.gen_updates;
    train.steps = mc.steps;

    type Arm<'a> = (&'static str, Box<dyn Fn() -> Result<Box<dyn DensityModel>, String> + 'a>);
    let mut arms: Vec<Arm> = Vec::new();
    if only != Some(ModelKind::Gen) {
        arms.push(("gp_high", Box::new(|| Ok(Box::new(DensityGp::fit(&high, features, &cfg.gp).map_err(|e| e.to_string())?) as Box<dyn DensityModel>))));
        arms.push((
            "nargp",
            Box::new(|| Ok(Box::new(nargp_fit(&pair, features, &cfg.gp, mc.nargp_samples).map_err(|e| e.to_string())?) as Box<dyn DensityModel>)),
        ));
    }
    if only != Some(ModelKind::Gp) {
        arms.push((
            "mf_gen",
            Box::new(|| {
                let m = mf_generative_fit(&pair, features, &cfg.gp, &cfg.architecture, &train, cfg.model.n_samples).map_err(|e| e.to_string())?;
                Ok(Box::new(m) as Box<dyn DensityModel>)
            }),
        ));
    }

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for (name, fit) in &arms {
        let scored = fit().and_then(|m| score_rows(m.as_ref(), name, n_high, &truth).map_err(|e| e.to_string()));
        match scored {
            Ok(r) => {
                let mean: Vec<f64> = r.iter().map(|q| q.mean).collect();
                let l2 = l2_mre(&truth.densities(), &mean).map_err(fail)?;
                let worst = truth.iter().zip(&mean).map(|(q, m)| relative_error(q.density, *m)).fold(0.0, f64::max);
                println!("{name}: l2_mre {l2:.4e}");
                summary.push(MfSummary { model: name.to_string(), n_high, l2_mre: l2, max_rel_error: worst });
                rows.extend(r);
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }

    let dir = out_dir(cfg)?;
    let mut buf = Vec::new();
    write_report(&rows, &mut buf).map_err(fail)?;
    write_file(&dir.join("mf_report.csv"), buf)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in &summary {
        w.serialize(s).map_err(fail)?;
    }
    write_file(&dir.join("mf_summary.csv"), w.into_inner().map_err(fail)?)?;
    let groups: Vec<(String, Box<dyn Fn(&ReportRow) -> bool>)> = arms
        .iter()
        .map(|(name, _)| {
            let owned = name.to_string();
            (owned.clone(), Box::new(move |r: &ReportRow| r.model == owned) as Box<dyn Fn(&ReportRow) -> bool>)
        })
        .collect();
    write_file(&dir.join("mf.svg"), curves_plot("multi-fidelity study", &rows, &groups))?;
    if !failures.is_empty() {
        return Err(fail(format!("multi-fidelity arms failed: {}", failures.join("; "))));
    }
    Ok(())
}
