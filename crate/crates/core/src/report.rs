//! Flat-file renderings of fitted bundles and evaluation reports: CSV for
//! downstream tooling, short text summaries for humans.

use crate::clustering::{RouteClusterModel, RouteProperties};
use crate::error::{Error, Result};
use crate::pipeline::{EvalReport, TestReport, TrainedBundle};
use crate::segmentation::Segmentation;

/// Slot name on the padded route axis.
pub fn route_slot_name(route: usize, route_count: usize) -> String {
    if route < route_count {
        format!("route_{route}")
    } else {
        "other".to_string()
    }
}

fn fmt_opt(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("{v:.6}"),
        None => "n/a".to_string(),
    }
}

fn write_csv(rows: Vec<Vec<String>>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .write_record(&row)
            .map_err(|e| Error::InvalidConfig(format!("csv rendering failed: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv rendering failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidConfig(format!("csv not utf-8: {e}")))
}

fn property_row(name: &str, p: &RouteProperties) -> Vec<String> {
    vec![
        name.to_string(),
        p.flights.to_string(),
        format!("{:.6}", p.share),
        format!("{:.3}", p.avg_length_nm),
        format!("{:.6}", p.avg_length_ratio),
        format!("{:.3}", p.avg_charges_eur),
        format!("{:.6}", p.regulated_rate),
    ]
}

/// One row per named route plus the other bucket, with the aggregates the
/// choice models run on.
pub fn routes_csv(clusters: &RouteClusterModel) -> Result<String> {
    let mut rows = vec![vec![
        "route".to_string(),
        "flights".to_string(),
        "share".to_string(),
        "avg_length_nm".to_string(),
        "avg_length_ratio".to_string(),
        "avg_charges_eur".to_string(),
        "regulated_rate".to_string(),
    ]];
    let k = clusters.cluster_count;
    for (i, p) in clusters.properties.iter().enumerate() {
        rows.push(property_row(&route_slot_name(i, k), p));
    }
    rows.push(property_row(
        &route_slot_name(k, k),
        &clusters.other_properties,
    ));
    write_csv(rows)
}

/// One row per market segment with its training flight count; used by the
/// standalone segmentation command where no models exist yet.
pub fn segment_counts_csv(segmentation: &Segmentation, counts: &[usize]) -> Result<String> {
    let mut rows = vec![vec![
        "segment".to_string(),
        "label".to_string(),
        "airline_class".to_string(),
        "time_class".to_string(),
        "flights".to_string(),
    ]];
    for (s, &n) in counts.iter().enumerate() {
        rows.push(vec![
            s.to_string(),
            segmentation.segment_label(s),
            segmentation.airline_class_of(s).to_string(),
            segmentation.time_class_of(s).to_string(),
            n.to_string(),
        ]);
    }
    write_csv(rows)
}

/// One row per market segment: who it is, what it saw, what was fitted.
pub fn segments_csv(bundle: &TrainedBundle) -> Result<String> {
    let mut rows = vec![vec![
        "segment".to_string(),
        "label".to_string(),
        "airline_class".to_string(),
        "time_class".to_string(),
        "flights".to_string(),
        "considered".to_string(),
        "family".to_string(),
        "fit_score".to_string(),
    ]];
    for entry in &bundle.segments {
        let considered = entry
            .considered
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        rows.push(vec![
            entry.segment.to_string(),
            entry.label.clone(),
            entry.airline_class.to_string(),
            entry.time_class.to_string(),
            entry.flights.to_string(),
            considered,
            entry.model.family_name().to_string(),
            fmt_opt(entry.score),
        ]);
    }
    write_csv(rows)
}

/// Long-form comparison: one row per (scope, group, route slot).
pub fn eval_csv(evals: &[EvalReport]) -> Result<String> {
    let mut rows = vec![vec![
        "scope".to_string(),
        "group".to_string(),
        "route".to_string(),
        "observed".to_string(),
        "predicted".to_string(),
        "null_predicted".to_string(),
    ]];
    for eval in evals {
        let k = eval.observed.len().saturating_sub(1);
        for r in 0..eval.observed.len() {
            rows.push(vec![
                eval.scope.clone(),
                "all".to_string(),
                route_slot_name(r, k),
                format!("{:.3}", eval.observed[r]),
                format!("{:.3}", eval.predicted[r]),
                format!("{:.3}", eval.null_predicted[r]),
            ]);
        }
        for group in &eval.groups {
            let name = format!("{:?}", group.group).to_lowercase();
            for r in 0..group.observed.len() {
                rows.push(vec![
                    eval.scope.clone(),
                    name.clone(),
                    route_slot_name(r, k),
                    format!("{:.3}", group.observed[r]),
                    format!("{:.3}", group.predicted[r]),
                    String::new(),
                ]);
            }
        }
    }
    write_csv(rows)
}

fn push_eval_lines(out: &mut String, eval: &EvalReport) {
    out.push_str(&format!(
        "{}: {} flights, correlation {} (baseline {})\n",
        eval.scope,
        eval.flights,
        fmt_opt(eval.pearson),
        fmt_opt(eval.null_pearson),
    ));
    let k = eval.observed.len().saturating_sub(1);
    for r in 0..eval.observed.len() {
        out.push_str(&format!(
            "  {:>9} observed {:>8.1} predicted {:>8.1} baseline {:>8.1}\n",
            route_slot_name(r, k),
            eval.observed[r],
            eval.predicted[r],
            eval.null_predicted[r],
        ));
    }
    for group in &eval.groups {
        out.push_str(&format!(
            "  {:<7} {:>4} flights, correlation {}\n",
            format!("{:?}", group.group).to_lowercase(),
            group.flights,
            fmt_opt(group.pearson),
        ));
    }
}

/// Human-readable training summary.
pub fn train_summary(bundle: &TrainedBundle) -> String {
    let c = &bundle.clusters;
    let mut out = String::new();
    out.push_str(&format!(
        "market {}-{}, trained on cycles {}\n",
        bundle.config.origin,
        bundle.config.destination,
        bundle.config.training_airacs.join(" "),
    ));
    out.push_str(&format!(
        "flights: {} fitted, {} held out for validation\n",
        bundle.training_flights, bundle.validation_flights,
    ));
    out.push_str(&format!(
        "routes: {} named + other, silhouette {} after {} iterations{}\n",
        c.cluster_count,
        fmt_opt(c.silhouette),
        c.iterations,
        if c.warning {
            " (acceptance criteria missed)"
        } else {
            ""
        },
    ));
    let populated = bundle.segments.iter().filter(|e| e.flights > 0).count();
    out.push_str(&format!(
        "segments: {} of {} populated ({} airline classes x 4 time classes)\n",
        populated,
        bundle.segments.len(),
        bundle.segmentation.airline_classes.class_count(),
    ));
    let boundaries: Vec<String> = bundle
        .segmentation
        .time_classes
        .boundaries
        .iter()
        .map(|b| format!("{b:.2}"))
        .collect();
    out.push_str(&format!(
        "time class boundaries (hours): {}\n",
        boundaries.join(" ")
    ));
    out
}

/// Human-readable rendering of one or more evaluation reports.
pub fn eval_summary(evals: &[EvalReport]) -> String {
    let mut out = String::new();
    for eval in evals {
        push_eval_lines(&mut out, eval);
    }
    out
}

/// Human-readable rendering of the held-out replay.
pub fn test_summary(report: &TestReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "route refresh on cycle {}: {} named routes (trained {}){}\n",
        report.recluster_airac,
        report.fresh_clusters,
        report.trained_clusters,
        if report.clustering_warning {
            " (acceptance criteria missed)"
        } else {
            ""
        },
    ));
    for pair in &report.matching {
        match pair.centroid_distance {
            Some(d) => out.push_str(&format!(
                "  trained route_{} -> route_{} (centroid distance {d:.3})\n",
                pair.trained, pair.fresh
            )),
            None => out.push_str(&format!(
                "  trained route_{} -> route_{}\n",
                pair.trained, pair.fresh
            )),
        }
    }
    push_summary_gap(&mut out, report);
    out.push_str(&eval_summary(&report.evals));
    out
}

fn push_summary_gap(out: &mut String, report: &TestReport) {
    let unmatched: Vec<usize> = (0..report.trained_clusters)
        .filter(|t| !report.matching.iter().any(|p| p.trained == *t))
        .collect();
    if !unmatched.is_empty() {
        let list: Vec<String> = unmatched.iter().map(|t| format!("route_{t}")).collect();
        out.push_str(&format!(
            "  unmatched trained routes fold into other: {}\n",
            list.join(" ")
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::GroupEval;
    use crate::segmentation::TimeGroup;

    fn sample_eval() -> EvalReport {
        EvalReport {
            scope: "1604".to_string(),
            flights: 10,
            observed: vec![6.0, 3.0, 1.0],
            predicted: vec![5.5, 3.2, 1.3],
            null_predicted: vec![6.1, 2.9, 1.0],
            pearson: Some(0.987654321),
            null_pearson: None,
            groups: vec![GroupEval {
                group: TimeGroup::Early,
                flights: 4,
                observed: vec![3.0, 1.0, 0.0],
                predicted: vec![2.8, 1.1, 0.1],
                pearson: Some(0.99),
            }],
        }
    }

    #[test]
    fn eval_csv_has_one_row_per_scope_group_and_slot() {
        let text = eval_csv(&[sample_eval()]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // header + 3 "all" rows + 3 "early" rows
        assert_eq!(lines.len(), 7);
        assert_eq!(
            lines[0],
            "scope,group,route,observed,predicted,null_predicted"
        );
        assert!(lines[1].starts_with("1604,all,route_0,6.000,5.500,6.100"));
        assert!(lines[4].starts_with("1604,early,route_0,"));
        assert!(lines[3].contains("other"));
    }

    #[test]
    fn undefined_correlations_render_as_na() {
        let text = eval_summary(&[sample_eval()]);
        assert!(text.contains("correlation 0.987654"));
        assert!(text.contains("baseline n/a"));
    }

    #[test]
    fn slot_names_cover_named_routes_and_other() {
        assert_eq!(route_slot_name(0, 2), "route_0");
        assert_eq!(route_slot_name(1, 2), "route_1");
        assert_eq!(route_slot_name(2, 2), "other");
    }
}
