use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::RunRecord;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "formulation,method,arch,dataset_size,restart_index,seed,fitness,error_integral,evals,wall_time_ms,status";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(io_err(dir))
        }
        _ => Ok(()),
    }
}

/// Writes `records` as CSV with the [`CSV_HEADER`] columns.
pub fn emit_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(csv_err(path))?;
    }
    for r in records {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::InvalidConfig(format!(
            "{}: unexpected CSV header `{}`",
            path.display(),
            header.join(",")
        )));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<RunRecord>, _>>()
        .map_err(csv_err(path))
}

/// Writes one two-column `dataset_size error_integral` file per
/// `(formulation, method, arch)` into `dir`, rows in increasing size order.
/// Returns the written paths.
pub fn emit_plot_data(best: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut groups: Vec<(String, Vec<&RunRecord>)> = Vec::new();
    for r in best {
        let name = format!("{}_{}_{}.dat", r.formulation, r.method, r.arch);
        match groups.iter_mut().find(|(n, _)| *n == name) {
            Some((_, rows)) => rows.push(r),
            None => groups.push((name, vec![r])),
        }
    }
    let mut written = Vec::new();
    for (name, mut rows) in groups {
        rows.sort_by_key(|r| r.dataset_size);
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        for r in rows {
            writeln!(f, "{} {}", r.dataset_size, r.error_integral).map_err(io_err(&path))?;
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Method, Status};

    fn sample() -> Vec<RunRecord> {
        vec![
            RunRecord {
                formulation: "f9".into(),
                method: Method::Imann,
                arch: "2-5-5-2".into(),
                dataset_size: 16,
                restart_index: 3,
                seed: 3,
                fitness: 1.234_567_890_123e-7,
                error_integral: 0.1 + 0.2,
                evals: 100_000,
                wall_time_ms: 812,
                status: Status::Aborted,
            },
            RunRecord {
                formulation: "f1".into(),
                method: Method::Dnn,
                arch: "1-32-16-16-1".into(),
                dataset_size: 9,
                restart_index: 0,
                seed: u64::MAX,
                fitness: f64::INFINITY,
                error_integral: f64::INFINITY,
                evals: 0,
                wall_time_ms: 0,
                status: Status::Failed,
            },
        ]
    }

    #[test]
    fn header_matches_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        emit_csv(&sample(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 3);

        let empty = dir.path().join("nested/empty.csv");
        emit_csv(&[], &empty).unwrap();
        assert_eq!(fs::read_to_string(&empty).unwrap().trim(), CSV_HEADER);
        assert!(read_csv(&empty).unwrap().is_empty());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        emit_csv(&sample(), &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), sample());
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_csv(&path).is_err());
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = read_csv(Path::new("/nonexistent/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }

    #[test]
    fn plot_rows_follow_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let mut best = Vec::new();
        for (i, n) in [64, 4, 16].into_iter().enumerate() {
            let mut r = sample()[0].clone();
            r.dataset_size = n;
            r.error_integral = i as f64;
            best.push(r);
        }
        let mut other = sample()[0].clone();
        other.method = Method::Dnn;
        other.arch = "2-32-32-16-1".into();
        best.push(other);
        let files = emit_plot_data(&best, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let text = fs::read_to_string(&files[0]).unwrap();
        assert!(files[0].ends_with("f9_imann_2-5-5-2.dat"));
        assert_eq!(text, "4 1\n16 2\n64 0\n");
    }
}
