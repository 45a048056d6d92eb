//! Elementwise ratio of two error reports.

use std::collections::HashMap;
use std::fmt::Write;
use std::path::Path;

use crate::run::CliError;

const ERRORS_HEADER: [&str; 6] = ["case", "p", "eta", "metric", "variable", "error"];

type Key = (String, String, String, String);

struct Row {
    key: Key,
    metric: String,
    error: f64,
}

fn read_errors(path: &Path) -> Result<Vec<Row>, CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .clone();
    if header.iter().ne(ERRORS_HEADER) {
        return Err(CliError::Config(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            ERRORS_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let error: f64 = rec[5].parse().map_err(|_| {
            CliError::Config(format!(
                "{}: row {}: bad error value '{}'",
                path.display(),
                line + 1,
                &rec[5]
            ))
        })?;
        let key = (
            rec[0].to_string(),
            rec[1].to_string(),
            rec[2].to_string(),
            rec[4].to_string(),
        );
        if seen.insert(key.clone(), ()).is_some() {
            return Err(CliError::Config(format!(
                "{}: several rows for case {} p={} eta={} variable {}; compare files holding one metric each",
                path.display(),
                key.0,
                key.1,
                key.2,
                key.3
            )));
        }
        rows.push(Row {
            key,
            metric: rec[3].to_string(),
            error,
        });
    }
    Ok(rows)
}

/// `case,p,eta,variable,metric_first,error_first,metric_second,error_second,ratio`
/// over the rows present in both files, in the order of the first.
pub fn compare(first: &Path, second: &Path) -> Result<String, CliError> {
    let a = read_errors(first)?;
    let b: HashMap<Key, Row> = read_errors(second)?
        .into_iter()
        .map(|r| (r.key.clone(), r))
        .collect();
    let mut out = String::from(
        "case,p,eta,variable,metric_first,error_first,metric_second,error_second,ratio\n",
    );
    let mut matched = 0;
    for ra in &a {
        if let Some(rb) = b.get(&ra.key) {
            matched += 1;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.16e},{},{:.16e},{:.16e}",
                ra.key.0,
                ra.key.1,
                ra.key.2,
                ra.key.3,
                ra.metric,
                ra.error,
                rb.metric,
                rb.error,
                ra.error / rb.error
            );
        }
    }
    if matched == 0 {
        return Err(CliError::Config(
            "the two reports share no (case, p, eta, variable) rows".into(),
        ));
    }
    Ok(out)
}
