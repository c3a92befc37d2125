//! Text and CSV renderings of an [`EvalReport`]. Output depends only on
//! the report contents, never on time or thread scheduling.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::protocol::EvalReport;
use crate::error::{Error, Result};

pub fn render_text(report: &EvalReport) -> String {
    let c = &report.config;
    let mut s = String::new();
    let _ = writeln!(s, "leave-one-out evaluation");
    let _ = writeln!(
        s,
        "models {}  tasks {}  runs {}  seed {}",
        report.models.len(),
        report.tasks.len(),
        c.runs,
        c.seed
    );
    let _ = writeln!(
        s,
        "eta {}  gamma {}  epsilon {:e}  k {}  n_src {}  n_tgt {}",
        c.eta, c.gamma, c.epsilon, c.k, c.n_src, c.n_tgt
    );
    if let Some(col) = &c.imagenet_column_id {
        let _ = writeln!(s, "inb reference column {col}");
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<10} {:>18} {:>18} {:>18}",
        "method",
        format!("NDCG@{}", c.k),
        format!("tau@{}", c.k),
        "sum"
    );
    for ms in &report.summaries {
        let cell = |m: crate::metrics::MeanStd| format!("{:.4} ± {:.4}", m.mean, m.std);
        let _ = writeln!(
            s,
            "{:<10} {:>18} {:>18} {:>18}",
            ms.method.name(),
            cell(ms.summary.ndcg),
            cell(ms.summary.tau),
            cell(ms.summary.sum)
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "mean NDCG@{} per target", c.k);
    let _ = write!(s, "{:<16}", "target");
    for ms in &report.summaries {
        let _ = write!(s, " {:>9}", ms.method.name());
    }
    let _ = writeln!(s);
    for task in &report.tasks {
        let _ = write!(s, "{:<16}", task.as_str());
        for ms in &report.summaries {
            let vals: Vec<f64> = report
                .rows_for(ms.method)
                .filter(|r| &r.metrics.task_id == task)
                .map(|r| r.metrics.ndcg)
                .collect();
            let _ = write!(s, " {:>9.4}", vals.iter().sum::<f64>() / vals.len() as f64);
        }
        let _ = writeln!(s);
    }
    s
}

pub fn write_rows_csv<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run", "seed", "method", "target", "k", "intersection_size", "ndcg", "tau", "sum", "tau_degenerate",
    ])?;
    for r in &report.rows {
        let m = &r.metrics;
        w.write_record([
            r.run.to_string(),
            report.config.run_seed(r.run).to_string(),
            r.method.to_string(),
            m.task_id.to_string(),
            m.k.to_string(),
            m.intersection_size.to_string(),
            m.ndcg.to_string(),
            m.tau.to_string(),
            m.sum.to_string(),
            m.tau_degenerate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "runs", "ndcg_mean", "ndcg_std", "tau_mean", "tau_std", "sum_mean", "sum_std"])?;
    for ms in &report.summaries {
        let s = &ms.summary;
        w.write_record([
            ms.method.to_string(),
            s.runs.to_string(),
            s.ndcg.mean.to_string(),
            s.ndcg.std.to_string(),
            s.tau.mean.to_string(),
            s.tau.std.to_string(),
            s.sum.mean.to_string(),
            s.sum.std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rankings_csv<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "method", "target", "position", "model", "score"])?;
    for r in &report.rows {
        for (i, model) in r.ranking.order.iter().enumerate() {
            w.write_record([
                r.run.to_string(),
                r.method.to_string(),
                r.ranking.target.to_string(),
                (i + 1).to_string(),
                model.to_string(),
                r.ranking.scores[model].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.txt`, `report.csv`, `summary.csv`, `rankings.csv`, and
/// `config.json` into `dir`.
pub fn write_report_dir(report: &EvalReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    let file = |name: &str| -> Result<fs::File> {
        let path = dir.join(name);
        fs::File::create(&path).map_err(|e| Error::from(e).in_file(path))
    };
    fs::write(dir.join("report.txt"), render_text(report)).map_err(|e| Error::from(e).in_file(dir.join("report.txt")))?;
    write_rows_csv(report, file("report.csv")?)?;
    write_summary_csv(report, file("summary.csv")?)?;
    write_rankings_csv(report, file("rankings.csv")?)?;
    let mut config = serde_json::to_string_pretty(&report.config)?;
    config.push('\n');
    fs::write(dir.join("config.json"), config).map_err(|e| Error::from(e).in_file(dir.join("config.json")))?;
    Ok(())
}
