//! Correlation harness: monotonic logistic mapping, Pearson and Spearman
//! correlation, PSNR baseline, and the grouped evaluation report.
//!
//! Objective scores are mapped onto the subjective scale with a 4-parameter
//! logistic fitted by least squares before Pearson correlation and RMSE;
//! Spearman rank correlation is computed on the raw scores.

use crate::error::{Error, Result};
use crate::plane::ImagePlane;

/// One scored dataset row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub ref_id: String,
    pub distortion_label: String,
    pub q: f64,
    pub mos: f64,
}

/// Parameters of the monotonic logistic `(g1 - g2) / (1 + exp(-(q - g3)/g4)) + g2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g4: f64,
}

/// Evaluates the 4-parameter logistic at `q`.
pub fn logistic(p: &LogisticParams, q: f64) -> f64 {
    (p.g1 - p.g2) / (1.0 + (-(q - p.g3) / p.g4).exp()) + p.g2
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn check_paired(x: &[f64], y: &[f64], min: usize, context: &'static str) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < min {
        return Err(Error::InsufficientSamples {
            needed: min,
            got: x.len(),
            context,
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{context}: values must be finite"
        )));
    }
    Ok(())
}

/// Pearson linear correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, 2, "pearson correlation")?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "pearson correlation is undefined for a constant sequence".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Fractional ranks (1-based); tied values share the average of their
/// positions, e.g. `(1, 2, 2, 3)` ranks as `(1, 2.5, 2.5, 4)`.
pub fn fractional_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank-order correlation: Pearson on fractional ranks, so ties are
/// handled exactly and any strictly increasing transform of either argument
/// leaves the result unchanged.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, 3, "spearman correlation")?;
    pearson(&fractional_ranks(x), &fractional_ranks(y))
}

/// Root-mean-square error between paired sequences.
pub fn rmse(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    check_paired(predicted, observed, 1, "rmse")?;
    let s: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| (p - o).powi(2))
        .sum();
    Ok((s / predicted.len() as f64).sqrt())
}

/// Peak signal-to-noise ratio against a [0, 255] peak; identical planes give
/// positive infinity.
pub fn psnr(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::PlaneSizeMismatch {
            a_width: a.width(),
            a_height: a.height(),
            b_width: b.width(),
            b_height: b.height(),
        });
    }
    let n = (a.width() * a.height()) as f64;
    let mse: f64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

fn sse(params: &[f64; 4], q: &[f64], mos: &[f64]) -> f64 {
    let p = LogisticParams {
        g1: params[0],
        g2: params[1],
        g3: params[2],
        g4: params[3],
    };
    q.iter()
        .zip(mos)
        .map(|(&qi, &mi)| {
            let r = logistic(&p, qi) - mi;
            r * r
        })
        .sum()
}

/// Nelder-Mead downhill simplex in four dimensions. Returns the best vertex
/// and its objective value.
fn nelder_mead(
    f: &dyn Fn(&[f64; 4]) -> f64,
    start: [f64; 4],
    max_iter: usize,
) -> ([f64; 4], f64) {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut simplex: Vec<[f64; 4]> = vec![start];
    for i in 0..4 {
        let mut v = start;
        let h = 0.05 * v[i].abs();
        v[i] += if h > 0.0 { h } else { 0.00025 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let simplex_sorted: Vec<[f64; 4]> = order.iter().map(|&i| simplex[i]).collect();
        let values_sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = simplex_sorted;
        values = values_sorted;

        let f_spread = values[4] - values[0];
        let x_spread = (0..4)
            .map(|d| {
                simplex[1..]
                    .iter()
                    .map(|v| (v[d] - simplex[0][d]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if f_spread <= 1e-14 * (1.0 + values[0].abs()) && x_spread <= 1e-12 {
            break;
        }

        let mut centroid = [0.0f64; 4];
        for v in &simplex[..4] {
            for d in 0..4 {
                centroid[d] += v[d] / 4.0;
            }
        }
        let worst = simplex[4];
        let mut reflected = [0.0f64; 4];
        for d in 0..4 {
            reflected[d] = centroid[d] + ALPHA * (centroid[d] - worst[d]);
        }
        let f_reflected = f(&reflected);

        if f_reflected < values[0] {
            let mut expanded = [0.0f64; 4];
            for d in 0..4 {
                expanded[d] = centroid[d] + GAMMA * (reflected[d] - centroid[d]);
            }
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[4] = expanded;
                values[4] = f_expanded;
            } else {
                simplex[4] = reflected;
                values[4] = f_reflected;
            }
        } else if f_reflected < values[3] {
            simplex[4] = reflected;
            values[4] = f_reflected;
        } else {
            let mut contracted = [0.0f64; 4];
            let (towards, f_towards) = if f_reflected < values[4] {
                (reflected, f_reflected)
            } else {
                (worst, values[4])
            };
            for d in 0..4 {
                contracted[d] = centroid[d] + RHO * (towards[d] - centroid[d]);
            }
            let f_contracted = f(&contracted);
            if f_contracted < f_towards {
                simplex[4] = contracted;
                values[4] = f_contracted;
            } else {
                for i in 1..5 {
                    for d in 0..4 {
                        simplex[i][d] = simplex[0][d] + SIGMA * (simplex[i][d] - simplex[0][d]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..5 {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best], values[best])
}

/// Least-squares fit of the 4-parameter logistic by Nelder-Mead from eight
/// deterministic starts derived from the data (asymptotes at the MOS extremes,
/// center at the score median or mean, slope at the score spread or a third
/// of it, both signs), each refined by two restarts around its optimum.
pub fn fit_logistic(q: &[f64], mos: &[f64]) -> Result<LogisticParams> {
    check_paired(q, mos, 5, "logistic fit")?;
    let q_std = std_dev(q);
    let mos_min = mos.iter().cloned().fold(f64::INFINITY, f64::min);
    let mos_max = mos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if q_std == 0.0 {
        return Err(Error::Degenerate(
            "objective scores are constant; the logistic fit is undetermined".into(),
        ));
    }
    if mos_min == mos_max {
        return Err(Error::Degenerate(
            "subjective scores are constant; the logistic fit is undetermined".into(),
        ));
    }

    let objective = |p: &[f64; 4]| {
        if p[3] == 0.0 {
            return f64::INFINITY;
        }
        sse(p, q, mos)
    };

    let mut best: Option<([f64; 4], f64)> = None;
    for g3 in [median(q), mean(q)] {
        for g4_mag in [q_std, q_std / 3.0] {
            for sign in [1.0, -1.0] {
                let start = [mos_max, mos_min, g3, sign * g4_mag];
                let mut result = nelder_mead(&objective, start, 1600);
                for _ in 0..2 {
                    result = nelder_mead(&objective, result.0, 1600);
                }
                match &best {
                    Some((_, v)) if *v <= result.1 => {}
                    _ => best = Some(result),
                }
            }
        }
    }
    let (p, value) = best.expect("at least one start");
    if !value.is_finite() {
        return Err(Error::NonConvergence {
            what: "logistic fit",
            iterations: 1600,
        });
    }
    Ok(LogisticParams {
        g1: p[0],
        g2: p[1],
        g3: p[2],
        g4: p[3],
    })
}

/// Whether the logistic is refitted inside each distortion group or fitted
/// once on the pooled data and reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    PerGroup,
    Global,
}

/// Metrics of one report row, or the reason the row was skipped.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupOutcome {
    Fitted {
        plcc: f64,
        srocc: f64,
        rmse: f64,
        params: LogisticParams,
    },
    Skipped {
        reason: String,
    },
}

/// One report row: a distortion group or the pooled "All" row.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group: String,
    pub n: usize,
    pub outcome: GroupOutcome,
}

/// Grouped evaluation of one objective measure against MOS.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub fit_mode: FitMode,
    /// Per-distortion rows in first-appearance order, then the pooled row.
    pub groups: Vec<GroupReport>,
    pub overall: GroupReport,
}

fn group_metrics(q: &[f64], mos: &[f64], params: &LogisticParams) -> Result<GroupOutcome> {
    let predicted: Vec<f64> = q.iter().map(|&qi| logistic(params, qi)).collect();
    Ok(GroupOutcome::Fitted {
        plcc: pearson(&predicted, mos)?,
        srocc: spearman(q, mos)?,
        rmse: rmse(&predicted, mos)?,
        params: *params,
    })
}

/// Runs the grouped correlation study. Rows group by distortion label in
/// first-appearance order; each viable group gets PLCC (after logistic
/// mapping), SROCC on raw scores, and RMSE, plus the pooled "All" row. Groups
/// too small or degenerate to fit are flagged and skipped rather than fatal;
/// a degenerate pooled fit is an error.
pub fn evaluate(records: &[EvaluationRecord], fit_mode: FitMode) -> Result<EvaluationReport> {
    if records.is_empty() {
        return Err(Error::InsufficientSamples {
            needed: 1,
            got: 0,
            context: "evaluation",
        });
    }
    for r in records {
        if !r.q.is_finite() || !r.mos.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "record for '{}' ({}) has non-finite scores",
                r.ref_id, r.distortion_label
            )));
        }
    }
    let all_q: Vec<f64> = records.iter().map(|r| r.q).collect();
    let all_mos: Vec<f64> = records.iter().map(|r| r.mos).collect();
    let global_params = fit_logistic(&all_q, &all_mos)?;
    let overall = GroupReport {
        group: "All".into(),
        n: records.len(),
        outcome: group_metrics(&all_q, &all_mos, &global_params)?,
    };

    let mut labels: Vec<&str> = Vec::new();
    for r in records {
        if !labels.iter().any(|l| *l == r.distortion_label) {
            labels.push(&r.distortion_label);
        }
    }

    let mut groups = Vec::with_capacity(labels.len());
    for label in labels {
        let q: Vec<f64> = records
            .iter()
            .filter(|r| r.distortion_label == label)
            .map(|r| r.q)
            .collect();
        let mos: Vec<f64> = records
            .iter()
            .filter(|r| r.distortion_label == label)
            .map(|r| r.mos)
            .collect();
        let outcome = (|| -> Result<GroupOutcome> {
            let params = match fit_mode {
                FitMode::PerGroup => fit_logistic(&q, &mos)?,
                FitMode::Global => global_params,
            };
            group_metrics(&q, &mos, &params)
        })()
        .unwrap_or_else(|e| GroupOutcome::Skipped {
            reason: e.to_string(),
        });
        groups.push(GroupReport {
            group: label.to_string(),
            n: q.len(),
            outcome,
        });
    }

    Ok(EvaluationReport {
        fit_mode,
        groups,
        overall,
    })
}

fn all_rows(report: &EvaluationReport) -> impl Iterator<Item = &GroupReport> {
    report.groups.iter().chain(std::iter::once(&report.overall))
}

/// Renders correlation tables for one or more measures over the same groups:
/// a PLCC block and an SROCC block with groups as columns, then per-measure
/// detail rows. Skipped cells print `--`.
pub fn render_tables(reports: &[(&str, &EvaluationReport)]) -> String {
    let mut out = String::new();
    if reports.is_empty() {
        return out;
    }
    let columns: Vec<String> = all_rows(reports[0].1).map(|g| g.group.clone()).collect();
    let name_width = reports
        .iter()
        .map(|(n, _)| n.len())
        .max()
        .unwrap()
        .max("measure".len());

    let cell = |outcome: &GroupOutcome, pick: &dyn Fn(f64, f64, f64) -> f64| -> String {
        match outcome {
            GroupOutcome::Fitted { plcc, srocc, rmse, .. } => {
                format!("{:>8.4}", pick(*plcc, *srocc, *rmse))
            }
            GroupOutcome::Skipped { .. } => format!("{:>8}", "--"),
        }
    };

    for (title, pick) in [
        (
            "Correlation coefficient (PLCC, after logistic mapping)",
            (&|p: f64, _s: f64, _r: f64| p) as &dyn Fn(f64, f64, f64) -> f64,
        ),
        (
            "Rank-order correlation coefficient (SROCC)",
            &|_p: f64, s: f64, _r: f64| s,
        ),
    ] {
        out.push_str(title);
        out.push('\n');
        out.push_str(&format!("  {:<name_width$}", "measure"));
        for c in &columns {
            out.push_str(&format!("{c:>9}"));
        }
        out.push('\n');
        for (name, report) in reports {
            out.push_str(&format!("  {name:<name_width$}"));
            for row in all_rows(report) {
                out.push(' ');
                out.push_str(&cell(&row.outcome, pick));
            }
            out.push('\n');
        }
        out.push('\n');
    }

    for (name, report) in reports {
        out.push_str(&format!("Details [{name}]\n"));
        out.push_str(&format!(
            "  {:<12}{:>6}{:>9}{:>9}{:>9}  {}\n",
            "group", "n", "PLCC", "SROCC", "RMSE", "fit (g1, g2, g3, g4)"
        ));
        for row in all_rows(report) {
            match &row.outcome {
                GroupOutcome::Fitted { plcc, srocc, rmse, params } => {
                    out.push_str(&format!(
                        "  {:<12}{:>6}{:>9.4}{:>9.4}{:>9.4}  ({:.4}, {:.4}, {:.4}, {:.4})\n",
                        row.group, row.n, plcc, srocc, rmse, params.g1, params.g2, params.g3, params.g4
                    ));
                }
                GroupOutcome::Skipped { reason } => {
                    out.push_str(&format!(
                        "  {:<12}{:>6}  skipped: {}\n",
                        row.group, row.n, reason
                    ));
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Serializes a report as CSV with columns
/// `group,n,plcc,srocc,rmse,g1,g2,g3,g4`; skipped rows leave the metric
/// fields empty.
pub fn report_to_csv(report: &EvaluationReport) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["group", "n", "plcc", "srocc", "rmse", "g1", "g2", "g3", "g4"])
        .expect("in-memory write");
    for row in all_rows(report) {
        let record: Vec<String> = match &row.outcome {
            GroupOutcome::Fitted { plcc, srocc, rmse, params } => vec![
                row.group.clone(),
                row.n.to_string(),
                format!("{plcc:.6}"),
                format!("{srocc:.6}"),
                format!("{rmse:.6}"),
                format!("{:.6}", params.g1),
                format!("{:.6}", params.g2),
                format!("{:.6}", params.g3),
                format!("{:.6}", params.g4),
            ],
            GroupOutcome::Skipped { .. } => vec![
                row.group.clone(),
                row.n.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
        };
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// Serializes scatter data `(q, mos, mos_p)` as CSV for external plotting,
/// using the report's pooled fit for the predictions.
pub fn scatter_to_csv(records: &[EvaluationRecord], report: &EvaluationReport) -> String {
    let params = match &report.overall.outcome {
        GroupOutcome::Fitted { params, .. } => *params,
        GroupOutcome::Skipped { .. } => unreachable!("overall row is always fitted"),
    };
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["q", "mos", "mos_p"]).expect("in-memory write");
    for r in records {
        w.write_record(&[
            format!("{:.6}", r.q),
            format!("{:.6}", r.mos),
            format!("{:.6}", logistic(&params, r.q)),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logistic_hand_values() {
        let p = LogisticParams { g1: 1.0, g2: 0.0, g3: 0.0, g4: 1.0 };
        assert_eq!(logistic(&p, 0.0), 0.5);
        assert!((logistic(&p, 1e3) - 1.0).abs() < 1e-12);
        assert!(logistic(&p, -1e3).abs() < 1e-12);
        // Extreme arguments saturate rather than produce NaN.
        assert!(logistic(&p, -1e9).is_finite());
    }

    #[test]
    fn pearson_hand_value() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        assert!((pearson(&x, &y).unwrap() - 0.8).abs() < 1e-15);
        let exact: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &exact).unwrap() - 1.0).abs() < 1e-12);
        assert!(pearson(&[1.0, 1.0, 1.0], &y[..3]).is_err());
    }

    #[test]
    fn ranks_average_over_ties() {
        assert_eq!(
            fractional_ranks(&[1.0, 2.0, 2.0, 3.0]),
            vec![1.0, 2.5, 2.5, 4.0]
        );
        assert_eq!(fractional_ranks(&[5.0, 1.0, 3.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn spearman_is_exactly_invariant_under_increasing_transforms() {
        let x = [0.3, 1.2, -0.7, 2.2, 0.0, 0.3, 5.1];
        let y = [2.0, 1.0, 4.0, 0.5, 2.5, 2.5, 0.1];
        let base = spearman(&x, &y).unwrap();
        let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let ty: Vec<f64> = y.iter().map(|v| 3.0 * v + 10.0).collect();
        assert_eq!(spearman(&tx, &y).unwrap(), base);
        assert_eq!(spearman(&x, &ty).unwrap(), base);
        let perfect = spearman(&x, &tx).unwrap();
        assert_eq!(perfect, 1.0);
    }

    #[test]
    fn logistic_fit_reproduces_exact_generating_curve() {
        let truth = LogisticParams { g1: 1.0, g2: 0.0, g3: 0.5, g4: 0.2 };
        let q: Vec<f64> = (0..50).map(|i| -1.0 + 3.0 * i as f64 / 49.0).collect();
        let mos: Vec<f64> = q.iter().map(|&qi| logistic(&truth, qi)).collect();
        let fitted = fit_logistic(&q, &mos).unwrap();
        let predicted: Vec<f64> = q.iter().map(|&qi| logistic(&fitted, qi)).collect();
        let err = rmse(&predicted, &mos).unwrap();
        assert!(err < 1e-6, "rmse {err}");
    }

    #[test]
    fn logistic_fit_rejects_degenerate_data() {
        assert!(matches!(
            fit_logistic(&[1.0; 10], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            fit_logistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    fn synthetic_records(n_per_group: usize, noise: f64, seed: u64) -> Vec<EvaluationRecord> {
        let truth = LogisticParams { g1: 5.0, g2: 1.0, g3: 2.0, g4: 0.8 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = Vec::new();
        for (gi, label) in ["awgn", "blur", "jpeg"].iter().enumerate() {
            for i in 0..n_per_group {
                let q = 4.0 * (i as f64 + 0.5) / n_per_group as f64 + 0.05 * gi as f64;
                let mos = logistic(&truth, q)
                    + noise * (rng.random::<f64>() + rng.random::<f64>() - 1.0);
                records.push(EvaluationRecord {
                    ref_id: format!("r{i}"),
                    distortion_label: label.to_string(),
                    q,
                    mos,
                });
            }
        }
        records
    }

    #[test]
    fn evaluate_on_noiseless_logistic_data_is_perfect() {
        let records = synthetic_records(20, 0.0, 1);
        for mode in [FitMode::PerGroup, FitMode::Global] {
            let report = evaluate(&records, mode).unwrap();
            assert_eq!(report.groups.len(), 3);
            assert_eq!(report.groups[0].group, "awgn");
            assert_eq!(report.overall.n, 60);
            for row in report.groups.iter().chain([&report.overall]) {
                match &row.outcome {
                    GroupOutcome::Fitted { plcc, srocc, .. } => {
                        assert!(*plcc > 1.0 - 1e-9, "{mode:?} {} plcc {plcc}", row.group);
                        assert!(*srocc > 1.0 - 1e-12, "{} srocc {srocc}", row.group);
                    }
                    GroupOutcome::Skipped { reason } => panic!("skipped: {reason}"),
                }
            }
        }
    }

    #[test]
    fn evaluate_flags_small_groups_without_failing() {
        let mut records = synthetic_records(20, 0.0, 2);
        for i in 0..3 {
            records.push(EvaluationRecord {
                ref_id: format!("x{i}"),
                distortion_label: "tiny".into(),
                q: i as f64,
                mos: i as f64,
            });
        }
        let report = evaluate(&records, FitMode::PerGroup).unwrap();
        let tiny = report.groups.iter().find(|g| g.group == "tiny").unwrap();
        assert_eq!(tiny.n, 3);
        assert!(matches!(tiny.outcome, GroupOutcome::Skipped { .. }));
        assert!(matches!(report.overall.outcome, GroupOutcome::Fitted { .. }));
    }

    #[test]
    fn evaluate_rejects_constant_scores() {
        let records: Vec<EvaluationRecord> = (0..10)
            .map(|i| EvaluationRecord {
                ref_id: format!("r{i}"),
                distortion_label: "awgn".into(),
                q: 0.0,
                mos: i as f64,
            })
            .collect();
        assert!(matches!(
            evaluate(&records, FitMode::PerGroup),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn independent_scores_correlate_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let records: Vec<EvaluationRecord> = (0..1000)
            .map(|i| EvaluationRecord {
                ref_id: format!("r{i}"),
                distortion_label: "rand".into(),
                q: rng.random::<f64>(),
                mos: rng.random::<f64>() * 4.0 + 1.0,
            })
            .collect();
        let report = evaluate(&records, FitMode::Global).unwrap();
        match report.overall.outcome {
            GroupOutcome::Fitted { plcc, srocc, .. } => {
                assert!(plcc.abs() < 0.1, "plcc {plcc}");
                assert!(srocc.abs() < 0.1, "srocc {srocc}");
            }
            GroupOutcome::Skipped { ref reason } => panic!("skipped: {reason}"),
        }
    }

    #[test]
    fn psnr_values() {
        let a = ImagePlane::from_samples(2, 2, vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = ImagePlane::from_samples(2, 2, vec![15.0, 25.0, 35.0, 45.0]).unwrap();
        let expected = 10.0 * (255.0f64 * 255.0 / 25.0).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!(psnr(&a, &ImagePlane::zeros(3, 2)).is_err());
    }

    #[test]
    fn csv_report_shape() {
        let records = synthetic_records(10, 0.0, 3);
        let report = evaluate(&records, FitMode::Global).unwrap();
        let csv_text = report_to_csv(&report);
        let mut lines = csv_text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "group,n,plcc,srocc,rmse,g1,g2,g3,g4"
        );
        assert_eq!(csv_text.lines().count(), 1 + 3 + 1);
        assert!(csv_text.lines().last().unwrap().starts_with("All,30,"));
        let scatter = scatter_to_csv(&records, &report);
        assert_eq!(scatter.lines().next().unwrap(), "q,mos,mos_p");
        assert_eq!(scatter.lines().count(), 31);
    }

    #[test]
    fn rendered_tables_include_all_groups() {
        let records = synthetic_records(10, 0.0, 4);
        let report = evaluate(&records, FitMode::PerGroup).unwrap();
        let text = render_tables(&[("tetriqa", &report)]);
        assert!(text.contains("awgn"));
        assert!(text.contains("All"));
        assert!(text.contains("PLCC"));
        assert!(text.contains("SROCC"));
    }
}
