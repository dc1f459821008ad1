//! Text tables (6 significant digits) and key-value files (full precision).

use std::fmt::Write as _;

use seizure_core::class::Class;
use seizure_core::corrstat::{prediction_scale, CorrelationRow};
use seizure_core::evaluate::{EvalReport, EventFeatures};
use seizure_core::rhythms::Band;

use crate::numfmt::{sig6, sig6_opt};

pub struct EvalContext<'a> {
    pub events: &'a [EventFeatures],
    pub aggregation: String,
    pub classifier: String,
    pub shrinkage: f64,
}

fn class_count(events: &[EventFeatures], class: Class) -> usize {
    events.iter().filter(|e| e.class == class).count()
}

pub fn evaluation_table(report: &EvalReport, ctx: &EvalContext) -> String {
    let n = ctx.events.len();
    let mut s = String::new();
    writeln!(s, "# event-level leave-one-out evaluation").unwrap();
    writeln!(
        s,
        "# events: {n} ({} seizure, {} non_seizure); aggregation = {}; classifier = {}; shrinkage = {}",
        class_count(ctx.events, Class::Seizure),
        class_count(ctx.events, Class::NonSeizure),
        ctx.aggregation,
        ctx.classifier,
        sig6(ctx.shrinkage)
    )
    .unwrap();
    writeln!(
        s,
        "# positive class: seizure; TPR/FPR/TNR/ACC from held-out predictions; ACC = correct events out of {n}"
    )
    .unwrap();
    writeln!(
        s,
        "# loss_value: 0-1 loss over folds; apparent_error: error when predicting the training events"
    )
    .unwrap();
    writeln!(
        s,
        "{:<8} {:>10} {:>10} {:>10} {:>5} {:>12} {:>15}",
        "band", "TPR", "FPR", "TNR", "ACC", "loss_value", "apparent_error"
    )
    .unwrap();
    for b in &report.bands {
        let m = &b.confusion;
        writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>10} {:>5} {:>12} {:>15}",
            b.scope.to_string(),
            sig6_opt(m.tpr),
            sig6_opt(m.fpr),
            sig6_opt(m.tnr),
            m.acc_count,
            sig6(b.loss_value),
            sig6(b.apparent_error)
        )
        .unwrap();
    }
    s
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".into(), |v| v.to_string())
}

pub fn evaluation_kv(report: &EvalReport, ctx: &EvalContext) -> String {
    let mut s = String::new();
    writeln!(s, "events = {}", report.events).unwrap();
    writeln!(s, "events.seizure = {}", class_count(ctx.events, Class::Seizure)).unwrap();
    writeln!(s, "events.non_seizure = {}", class_count(ctx.events, Class::NonSeizure)).unwrap();
    writeln!(s, "aggregation = {}", ctx.aggregation).unwrap();
    writeln!(s, "classifier = {}", ctx.classifier).unwrap();
    writeln!(s, "shrinkage = {}", ctx.shrinkage).unwrap();
    for b in &report.bands {
        let k = b.scope.to_string();
        let m = &b.confusion;
        writeln!(s, "{k}.tp = {}", m.counts.tp).unwrap();
        writeln!(s, "{k}.fp = {}", m.counts.fp).unwrap();
        writeln!(s, "{k}.tn = {}", m.counts.tn).unwrap();
        writeln!(s, "{k}.fn = {}", m.counts.fn_).unwrap();
        writeln!(s, "{k}.tpr = {}", opt(m.tpr)).unwrap();
        writeln!(s, "{k}.fpr = {}", opt(m.fpr)).unwrap();
        writeln!(s, "{k}.tnr = {}", opt(m.tnr)).unwrap();
        writeln!(s, "{k}.acc = {}", m.acc_count).unwrap();
        writeln!(s, "{k}.loss_value = {}", b.loss_value).unwrap();
        writeln!(s, "{k}.apparent_error = {}", b.apparent_error).unwrap();
        for p in &b.fold_predictions {
            writeln!(
                s,
                "{k}.fold.{} = {},{},{},{}",
                p.index, ctx.events[p.index].name, p.truth, p.predicted, p.score
            )
            .unwrap();
        }
    }
    s
}

/// One row per event: the scale/shape pair plotted on the x/y axes.
pub fn scatter_csv(band: Band, events: &[EventFeatures]) -> String {
    let mut s = String::new();
    writeln!(s, "# {} rhythm, one row per event", band.name()).unwrap();
    writeln!(s, "# x: scale A (input units); y: shape B (dimensionless)").unwrap();
    writeln!(s, "event,class,A,B").unwrap();
    for e in events {
        let p = e.params[band.index()];
        writeln!(s, "{},{},{},{}", e.name, e.class, p.scale_a, p.shape_b).unwrap();
    }
    s
}

fn find(rows: &[CorrelationRow], band: Band, class: Class) -> Option<&CorrelationRow> {
    rows.iter().find(|r| r.band == band && r.class == class)
}

pub fn correlation_table(rows: &[CorrelationRow], pairing: &str) -> String {
    let mut s = String::new();
    writeln!(s, "# Pearson product-moment correlation per rhythm and class").unwrap();
    writeln!(s, "# pairing: {pairing}").unwrap();
    writeln!(
        s,
        "# p: two-sided t test of rho = 0 on n-2 degrees of freedom; IC95%: Fisher z interval"
    )
    .unwrap();
    writeln!(
        s,
        "{:<6} {:<12} {:>4} {:>10} {:>11} {:>10} {:>10}  note",
        "band", "class", "n", "r", "p", "ci_low", "ci_high"
    )
    .unwrap();
    for row in rows {
        match &row.outcome {
            Ok(r) => writeln!(
                s,
                "{:<6} {:<12} {:>4} {:>10} {:>11} {:>10} {:>10}  {}",
                row.band.name(),
                row.class.as_str(),
                r.n,
                sig6(r.r),
                sig6(r.p_value),
                sig6(r.ci_low),
                sig6(r.ci_high),
                if r.boundary { "boundary |r| = 1" } else { "ok" }
            ),
            Err(e) => writeln!(
                s,
                "{:<6} {:<12} {:>4} {:>10} {:>11} {:>10} {:>10}  degenerate: {e}",
                row.band.name(),
                row.class.as_str(),
                "-",
                "-",
                "-",
                "-",
                "-"
            ),
        }
        .unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "# separation = r(non_seizure) - r(seizure)").unwrap();
    writeln!(s, "{:<6} {:>10} {:>10} {:>10}", "band", "r_ns", "r_s", "separation").unwrap();
    for band in Band::ALL {
        if let (Some(Ok(ns)), Some(Ok(sz))) = (
            find(rows, band, Class::NonSeizure).map(|r| &r.outcome),
            find(rows, band, Class::Seizure).map(|r| &r.outcome),
        ) {
            let p = prediction_scale(ns, sz);
            writeln!(
                s,
                "{:<6} {:>10} {:>10} {:>10}",
                band.name(),
                sig6(p.r_non_seizure),
                sig6(p.r_seizure),
                sig6(p.separation)
            )
            .unwrap();
        }
    }
    s
}

pub fn correlation_kv(rows: &[CorrelationRow], pairing: &str) -> String {
    let mut s = String::new();
    writeln!(s, "pairing = {pairing}").unwrap();
    for row in rows {
        let k = format!("{}.{}", row.band.name(), row.class.as_str());
        match &row.outcome {
            Ok(r) => {
                writeln!(s, "{k}.n = {}", r.n).unwrap();
                writeln!(s, "{k}.r = {}", r.r).unwrap();
                writeln!(s, "{k}.p = {}", r.p_value).unwrap();
                writeln!(s, "{k}.ci_low = {}", r.ci_low).unwrap();
                writeln!(s, "{k}.ci_high = {}", r.ci_high).unwrap();
                writeln!(s, "{k}.boundary = {}", r.boundary).unwrap();
            }
            Err(e) => writeln!(s, "{k}.error = {e}").unwrap(),
        }
    }
    for band in Band::ALL {
        if let (Some(Ok(ns)), Some(Ok(sz))) = (
            find(rows, band, Class::NonSeizure).map(|r| &r.outcome),
            find(rows, band, Class::Seizure).map(|r| &r.outcome),
        ) {
            writeln!(
                s,
                "{}.separation = {}",
                band.name(),
                prediction_scale(ns, sz).separation
            )
            .unwrap();
        }
    }
    s
}
