//! Accuracy table CSV: header `model_id,<task>...`, one row per model.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ids::{ModelId, TaskId};
use crate::rankagg::AccuracyTable;

pub fn read_accuracy_csv<R: Read>(input: R) -> Result<AccuracyTable> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = reader.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::validation("header", "expected model_id followed by task columns"));
    }
    let tasks: Vec<TaskId> = header.iter().skip(1).map(|t| TaskId::from(t.trim())).collect();
    let mut models = Vec::new();
    let mut acc = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let model = ModelId::from(record.get(0).unwrap_or_default().trim());
        let row = tasks
            .iter()
            .enumerate()
            .map(|(c, task)| {
                let cell = record.get(c + 1).map(str::trim).unwrap_or_default();
                if cell.is_empty() {
                    return Err(Error::validation(
                        format!("line {}, column {task}", r + 2),
                        "missing cell",
                    ));
                }
                cell.parse::<f64>().map_err(|_| {
                    Error::validation(format!("line {}, column {task}", r + 2), format!("not a number: `{cell}`"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if record.len() > tasks.len() + 1 {
            return Err(Error::validation(format!("line {}", r + 2), "more cells than header columns"));
        }
        models.push(model);
        acc.push(row);
    }
    AccuracyTable::new(models, tasks, acc)
}

pub fn write_accuracy_csv<W: Write>(table: &AccuracyTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["model_id".to_string()];
    header.extend(table.tasks().iter().map(ToString::to_string));
    w.write_record(&header)?;
    for model in table.models() {
        let mut rec = vec![model.to_string()];
        rec.extend(table.row(model.as_str())?.iter().map(|a| a.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_accuracy_table(path: impl AsRef<Path>) -> Result<AccuracyTable> {
    let path = path.as_ref();
    File::open(path)
        .map_err(Error::from)
        .and_then(read_accuracy_csv)
        .map_err(|e| e.in_file(path))
}

pub fn save_accuracy_table(table: &AccuracyTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    File::create(path)
        .map_err(Error::from)
        .and_then(|f| write_accuracy_csv(table, f))
        .map_err(|e| e.in_file(path))
}
