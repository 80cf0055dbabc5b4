//! CSV files and the resumable sweep driver.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::plot::write_plots;
use super::sweep::{run_task, ExperimentSpec, Scenario, SweepResult, SweepRow, SweepTask};
use crate::error::{Result, SleError};
use crate::metrics::MetricReport;

pub const ROWS_FILE: &str = "rows.csv";
pub const MEANS_FILE: &str = "means.csv";
pub const PARTIAL_FILE: &str = "rows.partial.csv";
pub const RESUME_MARKER: &str = "sweep.resume";

pub const ROWS_HEADER: &str =
    "scenario,point,level,conf_alpha,conf_beta,rel_alpha,rel_beta,method,filtered,run,seed,f1,jsd,nes,n_items,nes_variant";
pub const MEANS_HEADER: &str =
    "scenario,point,level,conf_alpha,conf_beta,rel_alpha,rel_beta,method,filtered,runs,f1,jsd,nes";
pub const REPORT_HEADER: &str = "method,f1,jsd,nes,n_items,sweep_point,nes_variant";
pub const LOSS_HEADER: &str = "epoch,loss";

fn csv_err(path: &Path, e: csv::Error) -> SleError {
    let index = e.position().map_or(0, |p| p.record() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SleError::io(path, io),
        other => SleError::Parse {
            path: path.to_path_buf(),
            index,
            message: format!("{other:?}"),
        },
    }
}

fn to_csv<T: Serialize>(rows: &[T], header: &str, with_header: bool) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let mut out = Vec::new();
    if with_header {
        out.extend_from_slice(header.as_bytes());
        out.push(b'\n');
    }
    for r in rows {
        w.serialize(r).map_err(|e| SleError::Domain(e.to_string()))?;
    }
    out.extend(w.into_inner().map_err(|e| SleError::Domain(e.to_string()))?);
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &str) -> Result<()> {
    fs::write(path, to_csv(rows, header, true)?).map_err(|e| SleError::io(path, e))
}

fn read_csv<T: DeserializeOwned>(path: &Path, header: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let found = r.headers().map_err(|e| csv_err(path, e))?.iter().collect::<Vec<_>>().join(",");
    if found != header {
        return Err(SleError::Parse {
            path: path.to_path_buf(),
            index: 0,
            message: format!("unexpected header `{found}`"),
        });
    }
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_csv(path, rows, ROWS_HEADER)
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    read_csv(path, ROWS_HEADER)
}

pub fn write_means(path: &Path, result: &SweepResult) -> Result<()> {
    write_csv(path, &result.means, MEANS_HEADER)
}

pub fn write_reports(path: &Path, reports: &[MetricReport]) -> Result<()> {
    write_csv(path, reports, REPORT_HEADER)
}

pub fn read_reports(path: &Path) -> Result<Vec<MetricReport>> {
    read_csv(path, REPORT_HEADER)
}

pub fn write_loss_trace(path: &Path, trace: &[f64]) -> Result<()> {
    #[derive(Serialize)]
    struct Entry {
        epoch: usize,
        loss: f64,
    }
    let rows: Vec<Entry> = trace.iter().enumerate().map(|(epoch, &loss)| Entry { epoch, loss }).collect();
    write_csv(path, &rows, LOSS_HEADER)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepOptions {
    /// Worker threads; 1 runs on the calling thread.
    pub jobs: usize,
    /// Stop after this many newly completed tasks, leaving the resume marker.
    pub stop_after: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { jobs: 1, stop_after: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    Complete(SweepResult),
    Interrupted { completed: usize, remaining: usize },
}

fn fingerprint(spec: &ExperimentSpec) -> Result<String> {
    let mut s = spec.clone();
    s.output_dir = Default::default();
    serde_json::to_string(&s).map_err(|e| SleError::Domain(e.to_string()))
}

/// Rows of fully completed tasks in a partial file; a torn final line is dropped.
fn load_partial(path: &Path, rows_per_task: usize) -> Result<Vec<SweepRow>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(SleError::io(path, e)),
    };
    let mut rows = Vec::new();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    for row in reader.deserialize::<SweepRow>() {
        match row {
            Ok(r) => rows.push(r),
            Err(e) => {
                log::warn!("{}: dropping unreadable tail ({e})", path.display());
                break;
            }
        }
    }
    let mut counts: BTreeMap<(Scenario, usize, usize), usize> = BTreeMap::new();
    for r in &rows {
        *counts.entry((r.scenario, r.point, r.run)).or_default() += 1;
    }
    rows.retain(|r| counts[&(r.scenario, r.point, r.run)] == rows_per_task);
    Ok(rows)
}

fn append(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| SleError::io(path, e))?;
    f.write_all(&to_csv(rows, ROWS_HEADER, false)?).map_err(|e| SleError::io(path, e))?;
    f.flush().map_err(|e| SleError::io(path, e))
}

fn run_chunk(spec: &ExperimentSpec, chunk: &[SweepTask], pool: Option<&Pool>) -> Vec<Result<Vec<SweepRow>>> {
    #[cfg(feature = "parallel")]
    if let Some(pool) = pool {
        use rayon::prelude::*;
        return pool.install(|| chunk.par_iter().map(|t| run_task(spec, t)).collect());
    }
    let _ = pool;
    chunk.iter().map(|t| run_task(spec, t)).collect()
}

#[cfg(feature = "parallel")]
type Pool = rayon::ThreadPool;
#[cfg(not(feature = "parallel"))]
type Pool = ();

fn make_pool(jobs: usize) -> Result<Option<Pool>> {
    if jobs <= 1 {
        return Ok(None);
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map(Some)
            .map_err(|e| SleError::Config(e.to_string()))
    }
    #[cfg(not(feature = "parallel"))]
    Ok(None)
}

/// Runs a sweep into `out_dir`, resuming from a matching resume marker.
///
/// Completed tasks are appended to a partial file as they finish; on success
/// the sorted rows, the means and the plots are written and the partial file
/// and marker are removed.
pub fn execute_sweep(spec: &ExperimentSpec, out_dir: &Path, options: &SweepOptions) -> Result<SweepOutcome> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| SleError::io(out_dir, e))?;
    let marker = out_dir.join(RESUME_MARKER);
    let partial = out_dir.join(PARTIAL_FILE);
    let print = fingerprint(spec)?;

    let mut rows = match fs::read_to_string(&marker) {
        Ok(existing) if existing == print => load_partial(&partial, spec.rows_per_task())?,
        Ok(_) => {
            return Err(SleError::Config(format!(
                "{} was left by a different experiment; remove it to start over",
                marker.display()
            )))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(SleError::io(&marker, e)),
    };
    fs::write(&partial, to_csv(&rows, ROWS_HEADER, true)?).map_err(|e| SleError::io(&partial, e))?;
    fs::write(&marker, &print).map_err(|e| SleError::io(&marker, e))?;

    let done: BTreeSet<(Scenario, usize, usize)> = rows.iter().map(|r| (r.scenario, r.point, r.run)).collect();
    let pending: Vec<SweepTask> = spec.tasks().into_iter().filter(|t| !done.contains(&t.key())).collect();
    if !done.is_empty() {
        log::info!("resuming: {} tasks done, {} pending", done.len(), pending.len());
    }
    let pool = make_pool(options.jobs)?;
    let chunk_size = options.jobs.max(1) * 2;
    let mut completed = 0;
    for (i, chunk) in pending.chunks(chunk_size).enumerate() {
        let chunk = match options.stop_after {
            Some(limit) if completed + chunk.len() > limit => &chunk[..limit - completed],
            _ => chunk,
        };
        for result in run_chunk(spec, chunk, pool.as_ref()) {
            let new_rows = result?;
            append(&partial, &new_rows)?;
            rows.extend(new_rows);
            completed += 1;
        }
        log::debug!("chunk {i}: {completed}/{} tasks", pending.len());
        if options.stop_after.is_some_and(|limit| completed >= limit) && completed < pending.len() {
            return Ok(SweepOutcome::Interrupted {
                completed,
                remaining: pending.len() - completed,
            });
        }
    }

    let result = SweepResult::from_rows(rows);
    write_rows(&out_dir.join(ROWS_FILE), &result.rows)?;
    write_means(&out_dir.join(MEANS_FILE), &result)?;
    if spec.plots {
        write_plots(out_dir, &result)?;
    }
    fs::remove_file(&partial).map_err(|e| SleError::io(&partial, e))?;
    fs::remove_file(&marker).map_err(|e| SleError::io(&marker, e))?;
    Ok(SweepOutcome::Complete(result))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            runs: 2,
            grid_resolution: 2,
            annotators: 4,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn headers_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec { runs: 1, ..small_spec() };
        execute_sweep(&spec, dir.path(), &SweepOptions::default()).unwrap();
        let first_line = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap().lines().next().unwrap().to_string();
        assert_eq!(
            first_line(ROWS_FILE),
            "scenario,point,level,conf_alpha,conf_beta,rel_alpha,rel_beta,method,filtered,run,seed,f1,jsd,nes,n_items,nes_variant"
        );
        assert_eq!(
            first_line(MEANS_FILE),
            "scenario,point,level,conf_alpha,conf_beta,rel_alpha,rel_beta,method,filtered,runs,f1,jsd,nes"
        );
        let reports = vec![MetricReport::score("sle", "1.00", &[0], &[vec![1.0, 0.0]], &[vec![1.0, 0.0]]).unwrap()];
        let path = dir.path().join("report.csv");
        write_reports(&path, &reports).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap().lines().next().unwrap(),
            "method,f1,jsd,nes,n_items,sweep_point,nes_variant"
        );
    }

    #[test]
    fn rows_and_reports_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec();
        let result = match execute_sweep(&spec, dir.path(), &SweepOptions::default()).unwrap() {
            SweepOutcome::Complete(r) => r,
            other => panic!("{other:?}"),
        };
        assert_eq!(read_rows(&dir.path().join(ROWS_FILE)).unwrap(), result.rows);
        assert!(!dir.path().join(RESUME_MARKER).exists());
        assert!(!dir.path().join(PARTIAL_FILE).exists());
        assert!(dir.path().join("reliability_sweep_jsd.svg").exists());

        let reports = vec![
            MetricReport::score("mv", "2.00", &[0, 1], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![0.7, 0.3], vec![0.1, 0.9]]).unwrap(),
            MetricReport::score("sle", "2.00", &[0, 0], &[vec![0.6, 0.4], vec![0.55, 0.45]], &[vec![0.7, 0.3], vec![0.1, 0.9]]).unwrap(),
        ];
        let path = dir.path().join("r.csv");
        write_reports(&path, &reports).unwrap();
        assert_eq!(read_reports(&path).unwrap(), reports);
    }

    #[test]
    fn resumed_sweep_matches_uninterrupted() {
        let spec = small_spec();
        let full = tempfile::tempdir().unwrap();
        execute_sweep(&spec, full.path(), &SweepOptions::default()).unwrap();

        let resumed = tempfile::tempdir().unwrap();
        let stop = SweepOptions {
            jobs: 1,
            stop_after: Some(5),
        };
        let first = execute_sweep(&spec, resumed.path(), &stop).unwrap();
        assert!(matches!(first, SweepOutcome::Interrupted { completed: 5, .. }));
        assert!(resumed.path().join(RESUME_MARKER).exists());
        // simulate a write torn mid-row
        let partial = resumed.path().join(PARTIAL_FILE);
        let mut text = fs::read_to_string(&partial).unwrap();
        text.push_str("reliability_sweep,3,4.0,1");
        fs::write(&partial, text).unwrap();
        execute_sweep(&spec, resumed.path(), &SweepOptions { jobs: 2, stop_after: None }).unwrap();
        for f in [ROWS_FILE, MEANS_FILE] {
            assert_eq!(
                fs::read(full.path().join(f)).unwrap(),
                fs::read(resumed.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn foreign_marker_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(RESUME_MARKER), "something else").unwrap();
        let err = execute_sweep(&small_spec(), dir.path(), &SweepOptions::default()).unwrap_err();
        assert!(matches!(err, SleError::Config(_)));
    }

    #[test]
    fn corrupt_rows_report_the_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        fs::write(&path, format!("{ROWS_HEADER}\nreliability_sweep,0,1.0,10.0,0.0,10.0,0.0,mv,false,0,7,1.0,oops,1.0,3,x\n")).unwrap();
        assert!(matches!(read_rows(&path), Err(SleError::Parse { .. })));
    }
}
