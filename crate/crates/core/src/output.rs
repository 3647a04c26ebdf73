//! CSV output of a finished run.
//!
//! Every file starts with `#` comment lines holding the resolved scenario
//! in TOML form, followed by an ordinary CSV table with a header row.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::{self, EngineError};
use crate::metrics::{
    brm_frm_ratio, MetricsBundle, DEFAULT_CONVERGENCE_TOL, DEFAULT_NOISE_EPS,
    DEFAULT_NOISE_WINDOW_S,
};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

/// Runs the scenario and writes its CSV files into `dir`.
pub fn run_and_emit(
    scenario: &Scenario,
    dir: &Path,
) -> Result<(MetricsBundle, Vec<PathBuf>), OutputError> {
    let bundle = engine::run(scenario)?;
    let files = write_outputs(&bundle, scenario, dir)?;
    Ok((bundle, files))
}

/// Writes all CSV files for `bundle`. On failure nothing written by this
/// call is left behind.
pub fn write_outputs(
    bundle: &MetricsBundle,
    scenario: &Scenario,
    dir: &Path,
) -> Result<Vec<PathBuf>, OutputError> {
    let mut written = Vec::new();
    let result = write_all(bundle, scenario, dir, &mut written);
    if result.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
        return result.map(|_| Vec::new());
    }
    Ok(written)
}

type Table = (String, Vec<&'static str>, Vec<Vec<String>>);

fn tables(bundle: &MetricsBundle) -> Vec<Table> {
    let mut out = Vec::new();
    // ABR sources that started before the horizon.
    let started = || bundle.sources.iter().filter(|s| s.abr && !s.acr.is_empty());
    for src in bundle.sources.iter().filter(|s| s.abr) {
        let rows = src
            .acr
            .iter()
            .map(|&(t, v)| vec![t.to_string(), v.to_string()])
            .collect();
        out.push((
            format!("acr_{}.csv", file_safe(&src.name)),
            vec!["t", "acr_mbps"],
            rows,
        ));
    }
    for q in &bundle.queues {
        let rows = q
            .samples
            .iter()
            .map(|&(t, n)| vec![t.to_string(), n.to_string()])
            .collect();
        out.push((
            format!("queue_{}.csv", file_safe(&q.port)),
            vec!["t", "cells"],
            rows,
        ));
    }

    let mut rm = Vec::new();
    for src in started() {
        let Some(c) = bundle.rm_counts.get(&src.vc) else {
            continue;
        };
        let (at_root, in_network) = match brm_frm_ratio(c) {
            Some(r) => (r.at_root.to_string(), r.in_network.to_string()),
            None => (String::new(), String::new()),
        };
        rm.push(vec![
            src.name.clone(),
            c.frm_sent_by_source.to_string(),
            c.brm_received_by_source.to_string(),
            c.brm_in_network.to_string(),
            c.rm_in_flight_root.to_string(),
            at_root,
            in_network,
        ]);
    }
    out.push((
        "rm_summary.csv".to_string(),
        vec![
            "source",
            "frm_sent",
            "brm_received",
            "brm_in_network",
            "rm_in_flight_root",
            "brm_frm_ratio",
            "network_brm_frm_ratio",
        ],
        rm,
    ));

    let mut noise = Vec::new();
    let mut conv = Vec::new();
    for src in started() {
        let reference = src
            .reference_rate
            .map(|r| r.to_string())
            .unwrap_or_default();
        let n = bundle
            .noise(&src.name, DEFAULT_NOISE_EPS, DEFAULT_NOISE_WINDOW_S)
            .map(|v| v.to_string())
            .unwrap_or_default();
        let c = bundle
            .convergence(&src.name, DEFAULT_CONVERGENCE_TOL)
            .map(|v| v.to_string())
            .unwrap_or_default();
        noise.push(vec![src.name.clone(), reference.clone(), n]);
        conv.push(vec![src.name.clone(), reference, c]);
    }
    out.push((
        "noise.csv".to_string(),
        vec!["source", "reference_mbps", "noise_index"],
        noise,
    ));
    out.push((
        "convergence.csv".to_string(),
        vec!["source", "reference_mbps", "convergence_s"],
        conv,
    ));
    out
}

fn write_all(
    bundle: &MetricsBundle,
    scenario: &Scenario,
    dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let header: String = scenario
        .to_toml()
        .lines()
        .map(|l| format!("# {l}\n"))
        .collect();
    for (name, columns, rows) in tables(bundle) {
        let path = dir.join(name);
        let io_err = |source| OutputError::Io {
            path: path.clone(),
            source,
        };
        let file = File::create(&path).map_err(io_err)?;
        written.push(path.clone());
        let mut w = BufWriter::new(file);
        w.write_all(header.as_bytes()).map_err(io_err)?;
        let mut csv = csv::Writer::from_writer(w);
        let csv_err = |source| OutputError::Csv {
            path: path.clone(),
            source,
        };
        csv.write_record(&columns).map_err(csv_err)?;
        for row in rows {
            csv.write_record(&row).map_err(csv_err)?;
        }
        csv.flush().map_err(io_err)?;
    }
    Ok(())
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Reads a CSV file written by this module, skipping the comment header.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), csv::Error> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
