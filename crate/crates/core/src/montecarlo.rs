//! Monte Carlo experiments over the random-phase channel family: per
//! realization slope records, empirical CDFs, and the median sweep over the
//! cross-gain `a`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::alignment::{optimize_phases, AlignOptions, PhaseVector};
use crate::channel::{make_symmetric, sample_random};
use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::outer_bound::{slope_outer_bound, BoundOptions, DEFAULT_PSD_TOL};
use crate::rng::derive_seed;
use crate::slope::{slope_tdma, slope_tin};

pub const RECORD_HEADER: [&str; 8] = ["a", "sample", "s0_tin", "s0_tdma", "s0_inta", "s0_bound", "membership", "converged"];
pub const SWEEP_HEADER: [&str; 4] = ["a", "median_inta", "s0_tin", "s0_tdma"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub a_values: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Alignment multi-start count.
    pub restarts: usize,
    /// Alignment gradient tolerance.
    pub tol: f64,
    pub include_bound: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 10,
            a_values: vec![0.1, 0.5, 0.9],
            samples: 1000,
            seed: 0,
            restarts: 32,
            tol: 1e-8,
            include_bound: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!("k = {}; need at least 2 users", self.k)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidArgument("samples must be at least 1".into()));
        }
        if self.a_values.is_empty() {
            return Err(Error::InvalidArgument("a_values must not be empty".into()));
        }
        if let Some(a) = self.a_values.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::InvalidArgument(format!("a = {a} must be finite and >= 0")));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol = {} must be positive", self.tol)));
        }
        Ok(())
    }

    /// Seed of the channel drawn for record `(a_index, sample_index)`.
    pub fn record_seed(&self, a_index: usize, sample_index: usize) -> u64 {
        derive_seed(self.seed, &[a_index as u64, sample_index as u64])
    }

    /// `key=value` lines describing the run, written next to CSV output.
    pub fn metadata(&self) -> String {
        let a_list: Vec<String> = self.a_values.iter().map(|&a| fmt17(a)).collect();
        format!(
            "tool=wbslope\nversion={}\nk={}\na_values={}\nsamples={}\nseed={}\nrestarts={}\ntol={}\ninclude_bound={}\nmedian=lower\n",
            env!("CARGO_PKG_VERSION"),
            self.k,
            a_list.join(","),
            self.samples,
            self.seed,
            self.restarts,
            fmt17(self.tol),
            self.include_bound
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub a: f64,
    pub sample_index: usize,
    pub s0_tin: f64,
    pub s0_tdma: f64,
    pub s0_inta: f64,
    pub s0_bound: Option<f64>,
    pub membership: Option<bool>,
    pub theta_star: PhaseVector,
    /// Alignment (and, when computed, bound) optimizer met its tolerance.
    pub converged: bool,
}

fn run_record(config: &ExperimentConfig, a_index: usize, sample_index: usize) -> Result<SampleRecord> {
    let a = config.a_values[a_index];
    let seed = config.record_seed(a_index, sample_index);
    let ch = sample_random(config.k, a, seed)?;
    let align = optimize_phases(
        &ch,
        &AlignOptions { restarts: config.restarts, seed: derive_seed(seed, &[1]), tol: config.tol, ..Default::default() },
    )?;
    let mut converged = align.converged;
    let (s0_bound, membership) = if config.include_bound {
        let ob = slope_outer_bound(
            &ch,
            &BoundOptions { restarts: config.restarts, seed: derive_seed(seed, &[2]), ..Default::default() },
            DEFAULT_PSD_TOL,
        )?;
        converged &= ob.denominator.converged;
        (Some(ob.slope), Some(ob.verified))
    } else {
        (None, None)
    };
    Ok(SampleRecord {
        a,
        sample_index,
        s0_tin: slope_tin(&ch),
        s0_tdma: slope_tdma(&ch),
        s0_inta: align.slope,
        s0_bound,
        membership,
        theta_star: align.theta_star,
        converged,
    })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {jobs} workers: {e}")))
}

/// Runs every `(a, sample)` record on `jobs` workers (0 = one per core).
/// Output is in `(a_index, sample_index)` order regardless of `jobs`.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Vec<SampleRecord>> {
    config.validate()?;
    let cells: Vec<(usize, usize)> = (0..config.a_values.len())
        .flat_map(|ai| (0..config.samples).map(move |si| (ai, si)))
        .collect();
    pool(jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(ai, si)| run_record(config, ai, si))
            .collect()
    })
}

/// Empirical CDF as `(value, i/n)` steps, ascending; tied values keep only
/// their largest index.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empirical CDF of an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (i, v) in sorted.into_iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    Ok(out)
}

/// Lower median: element `(n - 1) / 2` of the sorted sample.
pub fn lower_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("median of an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[(sorted.len() - 1) / 2])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub a: f64,
    pub median_inta: f64,
    pub s0_tin: f64,
    pub s0_tdma: f64,
}

/// Median alignment slope per `a`, next to the phase-independent TIN and
/// TDMA slopes of the family.
pub fn median_sweep_from(config: &ExperimentConfig, records: &[SampleRecord]) -> Result<Vec<SweepRow>> {
    config
        .a_values
        .iter()
        .enumerate()
        .map(|(ai, &a)| {
            let inta: Vec<f64> = records[ai * config.samples..(ai + 1) * config.samples]
                .iter()
                .map(|r| r.s0_inta)
                .collect();
            let ch = make_symmetric(config.k, a, None)?;
            Ok(SweepRow { a, median_inta: lower_median(&inta)?, s0_tin: slope_tin(&ch), s0_tdma: slope_tdma(&ch) })
        })
        .collect()
}

pub fn median_sweep(config: &ExperimentConfig, jobs: usize) -> Result<(Vec<SweepRow>, Vec<SampleRecord>)> {
    let cfg = ExperimentConfig { include_bound: false, ..config.clone() };
    let records = run_experiment(&cfg, jobs)?;
    Ok((median_sweep_from(&cfg, &records)?, records))
}

fn opt_field<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

pub fn write_records<W: Write>(records: &[SampleRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            fmt17(r.a),
            r.sample_index.to_string(),
            fmt17(r.s0_tin),
            fmt17(r.s0_tdma),
            fmt17(r.s0_inta),
            opt_field(r.s0_bound, fmt17),
            opt_field(r.membership, |m| m.to_string()),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([fmt17(r.a), fmt17(r.median_inta), fmt17(r.s0_tin), fmt17(r.s0_tdma)])?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn write_records_csv(records: &[SampleRecord], path: &Path) -> Result<()> {
    write_records(records, create(path)?).map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_sweep(rows, create(path)?).map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

/// Path of the metadata sidecar for a CSV destination: `<path>.meta`.
pub fn metadata_path(csv_path: &Path) -> std::path::PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta");
    name.into()
}

pub fn write_metadata(config: &ExperimentConfig, csv_path: &Path) -> Result<()> {
    let path = metadata_path(csv_path);
    std::fs::write(&path, config.metadata()).map_err(|source| Error::Io { path, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::slope_one_dim;
    use approx::assert_relative_eq;

    fn small(a_values: Vec<f64>, samples: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig { k: 4, a_values, samples, seed, restarts: 8, ..Default::default() }
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(empirical_cdf(&[3.0, 1.0, 2.0]).unwrap(), vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
        assert_eq!(empirical_cdf(&[5.0, 5.0]).unwrap(), vec![(5.0, 1.0)]);
        assert!(empirical_cdf(&[]).is_err());
    }

    #[test]
    fn median_convention() {
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.0);
        assert_eq!(lower_median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert!(lower_median(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(small(vec![], 1, 0).validate().is_err());
        assert!(small(vec![0.5], 0, 0).validate().is_err());
        assert!(small(vec![-0.1], 1, 0).validate().is_err());
        assert!(ExperimentConfig { k: 1, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { restarts: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn records_are_deterministic_and_ordered() {
        let cfg = small(vec![0.1, 0.7], 6, 3);
        let a = run_experiment(&cfg, 1).unwrap();
        let b = run_experiment(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let order: Vec<(f64, usize)> = a.iter().map(|r| (r.a, r.sample_index)).collect();
        let expected: Vec<(f64, usize)> = [0.1, 0.7].iter().flat_map(|&x| (0..6).map(move |s| (x, s))).collect();
        assert_eq!(order, expected);
    }

    #[test]
    fn tin_is_a_point_mass_and_tdma_is_two() {
        let cfg = small(vec![0.3], 100, 5);
        let records = run_experiment(&cfg, 0).unwrap();
        let tin = slope_tin(&make_symmetric(4, 0.3, None).unwrap());
        assert_eq!(empirical_cdf(&records.iter().map(|r| r.s0_tin).collect::<Vec<_>>()).unwrap(), vec![(tin, 1.0)]);
        assert!(records.iter().all(|r| r.s0_tdma == 2.0));
    }

    #[test]
    fn alignment_never_worse_than_zero_phases() {
        let cfg = small(vec![0.5, 0.9], 20, 8);
        for (idx, r) in run_experiment(&cfg, 0).unwrap().iter().enumerate() {
            let ai = idx / cfg.samples;
            let ch = sample_random(cfg.k, r.a, cfg.record_seed(ai, r.sample_index)).unwrap();
            assert_relative_eq!(slope_one_dim(&ch, &r.theta_star).unwrap(), r.s0_inta, max_relative = 1e-14);
            if r.converged {
                assert!(r.s0_inta >= slope_one_dim(&ch, &PhaseVector::zeros(cfg.k)).unwrap() - 1e-9);
            }
        }
    }

    #[test]
    fn sweep_interference_free_point() {
        let cfg = ExperimentConfig { k: 10, a_values: vec![0.0, 1.0], samples: 5, restarts: 4, ..Default::default() };
        let (rows, _) = median_sweep(&cfg, 0).unwrap();
        assert_eq!(rows[0].s0_tin, 20.0);
        assert_eq!(rows[0].s0_tdma, 2.0);
        assert_eq!(rows[0].median_inta, 10.0);
        assert_relative_eq!(rows[1].s0_tin, 200.0 / 190.0, max_relative = 1e-14);
        assert!(rows[1].s0_tin < rows[1].s0_tdma);
    }

    #[test]
    fn csv_shapes() {
        let mut buf = Vec::new();
        write_records(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,sample,s0_tin,s0_tdma,s0_inta,s0_bound,membership,converged\n");
        let cfg = ExperimentConfig { include_bound: true, ..small(vec![0.2], 3, 1) };
        let records = run_experiment(&cfg, 0).unwrap();
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        for (row, rec) in rdr.records().zip(&records) {
            let row = row.unwrap();
            assert_eq!(row[0].parse::<f64>().unwrap().to_bits(), rec.a.to_bits());
            assert_eq!(row[1].parse::<usize>().unwrap(), rec.sample_index);
            assert_eq!(row[4].parse::<f64>().unwrap().to_bits(), rec.s0_inta.to_bits());
            assert_eq!(row[5].parse::<f64>().unwrap().to_bits(), rec.s0_bound.unwrap().to_bits());
            assert_eq!(row[6].parse::<bool>().unwrap(), rec.membership.unwrap());
        }
    }

    #[test]
    fn csv_file_errors_name_the_path() {
        let err = write_sweep_csv(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }

    #[test]
    fn metadata_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_metadata(&ExperimentConfig::default(), &p).unwrap();
        let meta = std::fs::read_to_string(dir.path().join("r.csv.meta")).unwrap();
        assert!(meta.contains("seed=0\n") && meta.contains("samples=1000\n"));
    }
}
