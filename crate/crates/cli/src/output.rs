use std::fs;
use std::io::Write;
use std::path::Path;

use gmpot::DiscreteMeasure;
use serde::Serialize;

use crate::error::CliResult;

/// Writes `text` to the file, or to standard output when none is given.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

pub fn emit_json<S: Serialize>(out: Option<&Path>, value: &S) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

/// Plan as CSV with columns `x1, …, xn, mass`.
pub fn plan_csv(plan: &DiscreteMeasure<f64>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=plan.dim()).map(|i| format!("x{i}")).collect();
    header.push("mass".into());
    w.write_record(&header)?;
    for (z, m) in plan.iter() {
        let mut row: Vec<String> = z.coords().iter().map(f64::to_string).collect();
        row.push(m.to_string());
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
