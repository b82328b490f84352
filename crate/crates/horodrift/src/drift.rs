//! Generic machinery shared by the walk modules: batch-means speed
//! estimation, stationarity and escape diagnostics, probe-based empirical
//! horofunction records, and CSV series I/O.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// A point estimate with its standard error.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub count: u64,
}

impl Estimate {
    /// Mean and standard error of the mean of i.i.d.-style samples.
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len();
        assert!(n > 0, "no samples");
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            value: mean,
            std_error,
            count: n as u64,
        }
    }
}

/// Speed estimate with diagnostics and the bound values the walk modules
/// attach to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub speed_estimate: f64,
    pub std_error: f64,
    pub sample_count: u64,
    /// Cross-estimate `-mean xi(x_1)` when a horofunction route was run.
    pub horofunction_estimate: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub dim_upper_bound: Option<f64>,
}

/// Per-step (or per-checkpoint) quantities recorded along one trajectory.
#[derive(Clone, Debug)]
pub struct IncrementSeries {
    pub values: Vec<f64>,
    pub checkpoint_stride: u64,
}

/// Batch-means estimate of the linear rate from cumulative checkpoint
/// values `d(0), d(stride), d(2 stride), ...` starting at zero.
pub fn kingman_speed_from_checkpoints(
    distances: &[f64],
    stride: u64,
    batches: usize,
) -> Result<Estimate> {
    if batches < 2 {
        return Err(Error::param("batches", "need at least 2"));
    }
    if distances.len() < batches + 1 {
        return Err(Error::param(
            "distances",
            format!(
                "series of {} checkpoints is too short for {batches} batches",
                distances.len()
            ),
        ));
    }
    let intervals = distances.len() - 1;
    let per = intervals / batches;
    let mut rates = Vec::with_capacity(batches);
    for b in 0..batches {
        let s = b * per;
        let e = s + per;
        let steps = (per as u64 * stride) as f64;
        rates.push((distances[e] - distances[s]) / steps);
    }
    Ok(Estimate::from_samples(&rates))
}

/// Batch-means rate from per-interval increments (each entry accrues over
/// `checkpoint_stride` steps).
pub fn kingman_speed_from_increments(series: &IncrementSeries, batches: usize) -> Result<Estimate> {
    if batches < 2 {
        return Err(Error::param("batches", "need at least 2"));
    }
    if series.values.len() < batches {
        return Err(Error::param("series", "fewer increments than batches"));
    }
    let per = series.values.len() / batches;
    let mut rates = Vec::with_capacity(batches);
    for b in 0..batches {
        let chunk = &series.values[b * per..(b + 1) * per];
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        rates.push(mean / series.checkpoint_stride as f64);
    }
    Ok(Estimate::from_samples(&rates))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StationarityReport {
    pub window_means: Vec<f64>,
    pub window_std_errors: Vec<f64>,
    /// Largest pairwise |mean gap| in units of the combined standard error.
    pub max_gap_sigmas: f64,
    pub drift_flagged: bool,
}

/// Splits the series into `windows` equal windows and flags drift when two
/// window means differ by more than four combined standard errors.
pub fn stationarity_diagnostic(values: &[f64], windows: usize) -> Result<StationarityReport> {
    if windows < 2 {
        return Err(Error::param("windows", "need at least 2"));
    }
    if values.len() < 2 * windows {
        return Err(Error::param("values", "series too short for the window count"));
    }
    let per = values.len() / windows;
    let mut means = Vec::with_capacity(windows);
    let mut ses = Vec::with_capacity(windows);
    for w in 0..windows {
        let est = Estimate::from_samples(&values[w * per..(w + 1) * per]);
        means.push(est.value);
        ses.push(est.std_error);
    }
    let mut max_gap: f64 = 0.0;
    for i in 0..windows {
        for j in i + 1..windows {
            let combined = (ses[i] * ses[i] + ses[j] * ses[j]).sqrt();
            if combined > 0.0 {
                max_gap = max_gap.max((means[i] - means[j]).abs() / combined);
            } else if means[i] != means[j] {
                max_gap = f64::INFINITY;
            }
        }
    }
    Ok(StationarityReport {
        window_means: means,
        window_std_errors: ses,
        drift_flagged: max_gap > 4.0,
        max_gap_sigmas: max_gap,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeReport {
    pub radii: Vec<f64>,
    /// Fraction of the first half of the trajectory within each radius.
    pub first_half_fractions: Vec<f64>,
    /// Fraction of the last half of the trajectory within each radius.
    pub last_half_fractions: Vec<f64>,
    pub escaped: bool,
}

pub const DEFAULT_ESCAPE_RADII: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];

/// For a ladder of radii, the fraction of late-trajectory points within each
/// radius of the start. Decaying occupation supports escape to infinity.
pub fn escape_diagnostic(backward_distances: &[f64], radii: &[f64]) -> Result<EscapeReport> {
    if backward_distances.is_empty() || radii.is_empty() {
        return Err(Error::param("backward_distances", "empty input"));
    }
    let half = backward_distances.len() / 2;
    let (first, last) = backward_distances.split_at(half.max(1));
    let frac = |xs: &[f64], r: f64| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().filter(|&&d| d <= r).count() as f64 / xs.len() as f64
        }
    };
    let first_half: Vec<f64> = radii.iter().map(|&r| frac(first, r)).collect();
    let last_half: Vec<f64> = radii.iter().map(|&r| frac(last, r)).collect();
    let escaped = *last_half.last().unwrap() <= 0.05;
    Ok(EscapeReport {
        radii: radii.to_vec(),
        first_half_fractions: first_half,
        last_half_fractions: last_half,
        escaped,
    })
}

/// Horofunction evaluations `xi_{x_{-i}}(z)` over a fixed probe set, one row
/// per backward index. Rows are checked for 1-Lipschitz consistency against
/// the pairwise probe distances on insertion.
#[derive(Clone, Debug)]
pub struct EmpiricalHorofunctionMeasure {
    probe_distances: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
}

impl EmpiricalHorofunctionMeasure {
    pub fn new(probe_distances: Vec<Vec<f64>>) -> Self {
        EmpiricalHorofunctionMeasure {
            probe_distances,
            rows: Vec::new(),
        }
    }

    pub fn probe_count(&self) -> usize {
        self.probe_distances.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn push_sample(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.probe_count() {
            return Err(Error::param("values", "wrong probe count"));
        }
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                let gap = (values[i] - values[j]).abs();
                if gap > self.probe_distances[i][j] + 1e-9 {
                    return Err(Error::param(
                        "values",
                        format!(
                            "Lipschitz violation between probes {i} and {j}: gap {gap}, distance {}",
                            self.probe_distances[i][j]
                        ),
                    ));
                }
            }
        }
        self.rows.push(values);
        Ok(())
    }

    /// Column means: the running empirical average of the probe evaluations.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.probe_count()];
        for row in &self.rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= self.rows.len().max(1) as f64;
        }
        means
    }
}

/// Writes a series as `index,value` CSV.
pub fn save_series(path: &Path, values: &[f64]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "index,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(file, "{i},{v}")?;
    }
    Ok(())
}

/// Reads a series written by [`save_series`] (the header line is optional).
pub fn load_series(path: &Path) -> Result<Vec<f64>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("index")) {
            continue;
        }
        let mut parts = line.split(',');
        let (idx, val) = (parts.next(), parts.next());
        match (idx, val) {
            (Some(_), Some(v)) => out.push(v.trim().parse::<f64>().map_err(|e| {
                Error::FileFormat {
                    path: path.display().to_string(),
                    reason: format!("line {}: {e}", lineno + 1),
                }
            })?),
            _ => {
                return Err(Error::FileFormat {
                    path: path.display().to_string(),
                    reason: format!("line {}: expected `index,value`", lineno + 1),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use rand::Rng;

    #[test]
    fn kingman_constant_increments() {
        let d: Vec<f64> = (0..101).map(|i| 0.5 * i as f64).collect();
        let est = kingman_speed_from_checkpoints(&d, 1, 10).unwrap();
        assert_eq!(est.value, 0.5);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn kingman_symmetric_increments_near_zero() {
        let mut rng = stream(20, Domain::Generic, 0);
        let mut d = vec![0.0];
        for _ in 0..20_000 {
            let step = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            d.push(d.last().unwrap() + step);
        }
        let est = kingman_speed_from_checkpoints(&d, 1, 20).unwrap();
        assert!(est.value.abs() <= 3.0 * est.std_error + 0.02, "{est:?}");
    }

    #[test]
    fn kingman_batch_count_self_consistency() {
        let mut rng = stream(21, Domain::Generic, 0);
        for trial in 0..10 {
            let drift = rng.gen_range(-1.0..1.0);
            let mut d = vec![0.0];
            for _ in 0..5000 {
                d.push(d.last().unwrap() + drift + rng.gen_range(-1.0..1.0));
            }
            let e10 = kingman_speed_from_checkpoints(&d, 1, 10).unwrap();
            let e25 = kingman_speed_from_checkpoints(&d, 1, 25).unwrap();
            let tol = 2.0 * (e10.std_error + e25.std_error);
            assert!(
                (e10.value - e25.value).abs() <= tol + 1e-9,
                "trial {trial}: {e10:?} vs {e25:?}"
            );
        }
    }

    #[test]
    fn kingman_rejects_short_series() {
        assert!(kingman_speed_from_checkpoints(&[0.0, 1.0], 1, 4).is_err());
        assert!(kingman_speed_from_checkpoints(&[0.0; 40], 1, 1).is_err());
    }

    #[test]
    fn stationarity_passes_and_flags() {
        let mut rng = stream(22, Domain::Generic, 0);
        let stationary: Vec<f64> = (0..4000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rep = stationarity_diagnostic(&stationary, 4).unwrap();
        assert!(!rep.drift_flagged, "{rep:?}");

        // mean shifting by ~5 sigma across windows
        let drifting: Vec<f64> = (0..4000)
            .map(|i| rng.gen_range(-1.0..1.0) + 0.3 * (i / 1000) as f64)
            .collect();
        let rep = stationarity_diagnostic(&drifting, 4).unwrap();
        assert!(rep.drift_flagged, "{rep:?}");
    }

    #[test]
    fn escape_transient_vs_recurrent() {
        // ballistic trajectory escapes
        let transient: Vec<f64> = (0..10_000).map(|i| i as f64 / 3.0).collect();
        let rep = escape_diagnostic(&transient, &DEFAULT_ESCAPE_RADII).unwrap();
        assert!(rep.escaped);
        assert!(rep.last_half_fractions.iter().all(|&f| f <= 0.05));

        // reflected random walk stays near the start
        let mut rng = stream(23, Domain::Generic, 0);
        let mut pos: f64 = 0.0;
        let recurrent: Vec<f64> = (0..10_000)
            .map(|_| {
                pos += if rng.gen::<bool>() { 1.0 } else { -1.0 };
                pos = pos.abs();
                pos
            })
            .collect();
        let rep = escape_diagnostic(&recurrent, &DEFAULT_ESCAPE_RADII).unwrap();
        assert!(!rep.escaped, "{rep:?}");

        // fractions are monotone in the radius by construction
        for w in rep.last_half_fractions.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn empirical_measure_lipschitz_gate() {
        let d = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let mut m = EmpiricalHorofunctionMeasure::new(d);
        assert!(m.push_sample(vec![0.3, -0.5]).is_ok());
        assert!(m.push_sample(vec![2.0, 0.0]).is_err());
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn series_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let values = vec![0.25, -1.5, 3.0, 0.0];
        save_series(&path, &values).unwrap();
        assert_eq!(load_series(&path).unwrap(), values);
    }
}
