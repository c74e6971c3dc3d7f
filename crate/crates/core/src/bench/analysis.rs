use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{BenchMode, BenchRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupPoint {
    pub size: usize,
    pub serial_mean: f64,
    pub parallel_mean: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupCurve {
    pub kernel: String,
    pub threshold: usize,
    /// Strictly increasing sizes.
    pub points: Vec<SpeedupPoint>,
    /// Smallest size from which the speedup stays above 1 for every larger size.
    pub inflection: Option<usize>,
}

/// Pairs serial and parallel records of one kernel and threshold by size.
pub fn compute_speedup(records: &[BenchRecord]) -> Result<SpeedupCurve> {
    let first = records
        .first()
        .ok_or_else(|| Error::Analysis("no records".into()))?;
    if let Some(r) = records
        .iter()
        .find(|r| r.kernel != first.kernel || r.threshold != first.threshold)
    {
        return Err(Error::Analysis(format!(
            "records mix {}@{} and {}@{}",
            first.kernel, first.threshold, r.kernel, r.threshold
        )));
    }

    let mut by_size: BTreeMap<usize, [Option<f64>; 2]> = BTreeMap::new();
    for r in records {
        let slot = &mut by_size.entry(r.array_size).or_default()[r.mode as usize];
        if slot.replace(r.summary).is_some() {
            return Err(Error::Analysis(format!(
                "duplicate {} record for size {}",
                r.mode, r.array_size
            )));
        }
    }

    let mut points = Vec::with_capacity(by_size.len());
    for (size, pair) in by_size {
        let [Some(serial_mean), Some(parallel_mean)] = pair else {
            let missing = if pair[0].is_none() {
                BenchMode::Serial
            } else {
                BenchMode::Parallel
            };
            return Err(Error::Analysis(format!(
                "no {missing} record for size {size}"
            )));
        };
        let speedup = if serial_mean == parallel_mean {
            1.0
        } else {
            serial_mean / parallel_mean
        };
        points.push(SpeedupPoint {
            size,
            serial_mean,
            parallel_mean,
            speedup,
        });
    }

    let above = points.iter().rev().take_while(|p| p.speedup > 1.0).count();
    let inflection = (above > 0).then(|| points[points.len() - above].size);
    Ok(SpeedupCurve {
        kernel: first.kernel.clone(),
        threshold: first.threshold,
        points,
        inflection,
    })
}

/// One curve per (kernel, threshold), in order of first appearance.
pub fn speedup_curves(records: &[BenchRecord]) -> Result<Vec<SpeedupCurve>> {
    let mut keys: Vec<(&str, usize)> = Vec::new();
    for r in records {
        let k = (r.kernel.as_str(), r.threshold);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(kernel, threshold)| {
            let group: Vec<BenchRecord> = records
                .iter()
                .filter(|r| r.kernel == kernel && r.threshold == threshold)
                .cloned()
                .collect();
            compute_speedup(&group)
        })
        .collect()
}

#[derive(Serialize)]
struct RecordRow<'a> {
    kernel: &'a str,
    size: usize,
    mode: BenchMode,
    threshold: usize,
    workers: usize,
    mean_s: f64,
    min_s: f64,
    max_s: f64,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    kernel: &'a str,
    threshold: usize,
    size: usize,
    serial_mean_s: f64,
    parallel_mean_s: f64,
    speedup: f64,
    inflection: Option<usize>,
}

const RECORD_HEADER: [&str; 8] = [
    "kernel",
    "size",
    "mode",
    "threshold",
    "workers",
    "mean_s",
    "min_s",
    "max_s",
];

pub fn records_to_csv<W: Write>(records: &[BenchRecord], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(RECORD_HEADER)?;
    for r in records {
        out.serialize(RecordRow {
            kernel: &r.kernel,
            size: r.array_size,
            mode: r.mode,
            threshold: r.threshold,
            workers: r.workers,
            mean_s: r.summary,
            min_s: r.min(),
            max_s: r.max(),
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn curve_to_csv<W: Write>(curve: &SpeedupCurve, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record([
        "kernel",
        "threshold",
        "size",
        "serial_mean_s",
        "parallel_mean_s",
        "speedup",
        "inflection",
    ])?;
    for p in &curve.points {
        out.serialize(CurveRow {
            kernel: &curve.kernel,
            threshold: curve.threshold,
            size: p.size,
            serial_mean_s: p.serial_mean,
            parallel_mean_s: p.parallel_mean,
            speedup: p.speedup,
            inflection: curve.inflection,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Writes records as CSV with a header row.
pub fn write_records_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    records_to_csv(records, std::fs::File::create(path)?)
}

pub fn write_curve_csv(curve: &SpeedupCurve, path: &Path) -> Result<()> {
    curve_to_csv(curve, std::fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(size: usize, mode: BenchMode, t: f64) -> BenchRecord {
        BenchRecord {
            kernel: "k".into(),
            array_size: size,
            mode,
            threshold: 0,
            workers: 2,
            times: vec![t, t, t],
            summary: t,
            flagged: false,
        }
    }

    fn pairs(points: &[(usize, f64, f64)]) -> Vec<BenchRecord> {
        points
            .iter()
            .flat_map(|&(s, ser, par)| {
                [
                    rec(s, BenchMode::Serial, ser),
                    rec(s, BenchMode::Parallel, par),
                ]
            })
            .collect()
    }

    #[test]
    fn equal_times_no_inflection() {
        let c =
            compute_speedup(&pairs(&[(1, 0.3, 0.3), (10, 1e-7, 1e-7), (100, 2.0, 2.0)])).unwrap();
        assert!(c.points.iter().all(|p| p.speedup == 1.0));
        assert_eq!(c.inflection, None);
    }

    #[test]
    fn synthetic_inflection() {
        let sizes = [1, 10, 100, 500, 1000, 5000, 10000];
        let pts: Vec<(usize, f64, f64)> = sizes
            .iter()
            .map(|&s| {
                if s >= 1000 {
                    (s, 2.0, 1.0)
                } else {
                    (s, 0.5, 1.0)
                }
            })
            .collect();
        let c = compute_speedup(&pairs(&pts)).unwrap();
        assert_eq!(c.inflection, Some(1000));
    }

    #[test]
    fn dip_moves_inflection() {
        let c = compute_speedup(&pairs(&[(1, 2.0, 1.0), (2, 0.5, 1.0), (3, 2.0, 1.0)])).unwrap();
        assert_eq!(c.inflection, Some(3));
    }

    #[test]
    fn missing_pair() {
        let mut r = pairs(&[(1, 1.0, 1.0), (7, 1.0, 1.0)]);
        r.pop();
        match compute_speedup(&r) {
            Err(Error::Analysis(m)) => assert!(m.contains("size 7"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_shapes() {
        let mut buf = Vec::new();
        records_to_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "kernel,size,mode,threshold,workers,mean_s,min_s,max_s\n"
        );
        let mut buf = Vec::new();
        records_to_csv(&[rec(10, BenchMode::Parallel, 0.5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "k,10,parallel,0,2,0.5,0.5,0.5"
        );
    }
}
