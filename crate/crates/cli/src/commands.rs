use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use seizure_core::class::Class;
use seizure_core::classify::BandScope;
use seizure_core::corrstat::{class_correlation_table, EventValues};
use seizure_core::evaluate::{evaluate_events, min_events_per_class, EventFeatures};
use seizure_core::ingest::{read_record, RecordFormat};
use seizure_core::rhythms::Band;

use crate::config::{CorrelateFeature, PipelineConfig, Settings};
use crate::features::{event_from_file, extract_features, parse_feature_file, render_feature_file, FeatureFile};
use crate::manifest::{display_name, Recorder};
use crate::report::{correlation_kv, correlation_table, evaluation_kv, evaluation_table, scatter_csv, EvalContext};

/// Failures that map onto distinct exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation or configuration (exit 2).
    Usage(anyhow::Error),
    /// Some input could not be processed (exit 1).
    Processing(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Processing(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) | Failure::Processing(e) => write!(f, "{e:#}"),
        }
    }
}

pub type Outcome = std::result::Result<(), Failure>;

fn out_dir(config: &PipelineConfig) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn require_inputs(inputs: &[PathBuf]) -> Outcome {
    if inputs.is_empty() {
        return Err(Failure::Usage(anyhow!("no input files given")));
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    let name = display_name(path);
    name.strip_suffix(".features.csv")
        .map(str::to_string)
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or(name)
        })
}

fn features_one(path: &Path, settings: &Settings, rec: &mut Recorder) -> Result<usize> {
    let format = RecordFormat::from_path(path)
        .ok_or_else(|| anyhow!("unrecognized record extension (expected .csv, .eegr, .bin or .raw)"))?;
    rec.input(path)?;
    let record = read_record(path, format)?;
    let rows = rec.time(format!("features:{}", display_name(path)), || {
        extract_features(&record, settings)
    })?;
    let file = FeatureFile {
        source: display_name(path),
        sample_rate_hz: record.sample_rate_hz(),
        rows,
    };
    rec.write(&format!("{}.features.csv", stem(path)), &render_feature_file(&file))?;
    Ok(file.rows.len())
}

/// One `<stem>.features.csv` per record. A failing record is reported and
/// skipped; the others are still written.
pub fn cmd_features(inputs: &[PathBuf], config: &PipelineConfig, settings: &Settings) -> Outcome {
    require_inputs(inputs)?;
    let mut rec = Recorder::new("features", config, &out_dir(config));
    let mut failed = 0;
    for path in inputs {
        match features_one(path, settings, &mut rec) {
            Ok(n) => eprintln!("{}: {n} segments", display_name(path)),
            Err(e) => {
                failed += 1;
                eprintln!("error: {}: {e:#}", path.display());
            }
        }
    }
    rec.finish().map_err(Failure::Processing)?;
    if failed > 0 {
        return Err(Failure::Processing(anyhow!(
            "{failed} of {} records failed",
            inputs.len()
        )));
    }
    Ok(())
}

/// Parses feature files in sorted path order so results do not depend on
/// how the shell listed them.
fn load_events(inputs: &[PathBuf], settings: &Settings, rec: &mut Recorder) -> Result<Vec<EventFeatures>> {
    let mut sorted = inputs.to_vec();
    sorted.sort();
    sorted
        .iter()
        .map(|path| {
            rec.input(path)?;
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file = parse_feature_file(&text).with_context(|| path.display().to_string())?;
            event_from_file(&stem(path), &file, settings.aggregation)
        })
        .collect()
}

pub fn cmd_evaluate(inputs: &[PathBuf], config: &PipelineConfig, settings: &Settings) -> Outcome {
    require_inputs(inputs)?;
    let mut rec = Recorder::new("evaluate", config, &out_dir(config));
    let run = |rec: &mut Recorder| -> Result<()> {
        let events = load_events(inputs, settings, rec)?;
        let need = settings
            .scopes
            .iter()
            .map(|s| min_events_per_class(*s))
            .max()
            .unwrap_or(0)
            .max(2);
        for class in [Class::Seizure, Class::NonSeizure] {
            let got = events.iter().filter(|e| e.class == class).count();
            if got < need {
                bail!("insufficient events: {class} has {got}, at least {need} per class are required");
            }
        }
        let report = rec.time("evaluate", || {
            evaluate_events(&events, &settings.scopes, &settings.classifier)
        })?;
        let ctx = EvalContext {
            events: &events,
            aggregation: settings.aggregation.to_string(),
            classifier: settings.classifier.mode.to_string(),
            shrinkage: settings.classifier.shrinkage,
        };
        print!("{}", evaluation_table(&report, &ctx));
        rec.write("evaluation.txt", &evaluation_table(&report, &ctx))?;
        rec.write("evaluation.kv", &evaluation_kv(&report, &ctx))?;
        let bands: Vec<Band> = match settings.scopes.as_slice() {
            [BandScope::Single(b)] => vec![*b],
            _ => Band::ALL.to_vec(),
        };
        for b in bands {
            rec.write(&format!("scatter_{}.csv", b.name()), &scatter_csv(b, &events))?;
        }
        Ok(())
    };
    let result = run(&mut rec);
    rec.finish().map_err(Failure::Processing)?;
    result.map_err(Failure::Processing)
}

fn scalar(e: &EventFeatures, band: Band, which: CorrelateFeature) -> f64 {
    let p = e.params[band.index()];
    match which {
        CorrelateFeature::Scale => p.scale_a,
        CorrelateFeature::Shape => p.shape_b,
    }
}

fn values_by_cell(events: &[EventFeatures], f: impl Fn(&EventFeatures, Band) -> f64) -> EventValues {
    let mut out = EventValues::new();
    for band in Band::ALL {
        for class in [Class::Seizure, Class::NonSeizure] {
            let v = events.iter().filter(|e| e.class == class).map(|e| f(e, band)).collect();
            out.insert((band, class), v);
        }
    }
    out
}

/// Without a reference set, correlates each event's scale with its shape
/// within every (rhythm, class) cell. With one, pairs the chosen scalar of
/// the i-th event of a class in each set.
pub fn cmd_correlate(
    inputs: &[PathBuf],
    reference: &[PathBuf],
    config: &PipelineConfig,
    settings: &Settings,
) -> Outcome {
    require_inputs(inputs)?;
    let mut rec = Recorder::new("correlate", config, &out_dir(config));
    let run = |rec: &mut Recorder| -> Result<()> {
        let events = load_events(inputs, settings, rec)?;
        let (x, y, pairing) = if reference.is_empty() {
            (
                values_by_cell(&events, |e, b| scalar(e, b, CorrelateFeature::Scale)),
                values_by_cell(&events, |e, b| scalar(e, b, CorrelateFeature::Shape)),
                "x = scale A, y = shape B of the same event; n = events of the class".to_string(),
            )
        } else {
            let refs = load_events(reference, settings, rec)?;
            let which = settings.correlate_feature;
            (
                values_by_cell(&events, |e, b| scalar(e, b, which)),
                values_by_cell(&refs, |e, b| scalar(e, b, which)),
                format!(
                    "x = {which} of the i-th event of the class in the primary set, y = {which} of the i-th event of the class in the reference set (events in sorted file order)"
                ),
            )
        };
        let mut rows = rec.time("correlate", || class_correlation_table(&x, &y));
        if let Some(BandScope::Single(b)) = settings.scopes.first().filter(|_| settings.scopes.len() == 1) {
            rows.retain(|r| r.band == *b);
        }
        print!("{}", correlation_table(&rows, &pairing));
        rec.write("correlation.txt", &correlation_table(&rows, &pairing))?;
        rec.write("correlation.kv", &correlation_kv(&rows, &pairing))?;
        let failures: BTreeMap<String, String> = rows
            .iter()
            .filter_map(|r| {
                r.outcome
                    .as_ref()
                    .err()
                    .map(|e| (format!("{}/{}", r.band, r.class), e.to_string()))
            })
            .collect();
        for (cell, e) in &failures {
            eprintln!("warning: {cell} flagged as degenerate: {e}");
        }
        if failures.len() == rows.len() {
            bail!("no (rhythm, class) cell could be correlated");
        }
        Ok(())
    };
    let result = run(&mut rec);
    rec.finish().map_err(Failure::Processing)?;
    result.map_err(Failure::Processing)
}
