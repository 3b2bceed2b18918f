//! Wall-time measurement and the CSV timing table.
//!
//! A run's wall time is the maximum elapsed time over ranks; the reported
//! best is the minimum of those maxima over repeated runs.

use std::io::Write;
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::decomp::Scheme;
use crate::driver::RunConfig;
use crate::error::{Error, Result};
use crate::pipeline::StrategyConfig;
use crate::tensor::TensorDims;
use crate::transport::{run_inproc, RankComms};

pub const CSV_HEADER: [&str; 11] = [
    "size", "ranks", "py", "pz", "scheme", "option", "k", "transport", "run", "wall_max_s", "wall_min_s",
];

pub const DEFAULT_RUNS: usize = 5;

/// Descriptive columns shared by every row of one configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimingMeta {
    pub size: String,
    pub ranks: usize,
    pub py: usize,
    pub pz: usize,
    pub scheme: Scheme,
    pub option: u8,
    pub k: usize,
    pub transport: String,
}

impl TimingMeta {
    pub fn new(cfg: &RunConfig, transport: &str) -> Self {
        TimingMeta {
            size: size_label(cfg.dims),
            ranks: cfg.ranks(),
            py: cfg.grid.py(),
            pz: cfg.grid.pz(),
            scheme: cfg.scheme,
            option: cfg.strategy.option_number(),
            k: cfg.strategy.k,
            transport: transport.to_string(),
        }
    }
}

/// `n` for a cube, `NXxNYxNZ` otherwise.
pub fn size_label(dims: TensorDims) -> String {
    if dims.is_cube() {
        dims.nx.to_string()
    } else {
        dims.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunTiming {
    pub wall_max: f64,
    pub wall_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub meta: TimingMeta,
    pub runs: Vec<RunTiming>,
}

impl TimingReport {
    /// Minimum `wall_max` over runs, with that run's `wall_min`.
    pub fn best(&self) -> Option<RunTiming> {
        self.runs
            .iter()
            .copied()
            .min_by(|a, b| a.wall_max.total_cmp(&b.wall_max))
    }
}

/// Sleep injected into one rank's timed region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectedDelay {
    pub rank: usize,
    pub delay: Duration,
}

/// Times `runs` forward transforms on this rank. Every rank must call this
/// collectively; the per-run `(max, min)` reductions land on rank 0.
pub fn time_rank(
    cfg: &RunConfig,
    comms: RankComms,
    runs: usize,
    seed: u64,
    inject: Option<InjectedDelay>,
) -> Result<(Option<Vec<RunTiming>>, RankComms)> {
    let mut fft = cfg.transform(comms)?;
    let mut timings = Vec::with_capacity(runs);
    for _ in 0..runs {
        let mut t = fft.random_input(seed);
        fft.comms_mut().world.barrier()?;
        let t0 = Instant::now();
        fft.forward(&mut t)?;
        if let Some(d) = inject.filter(|d| d.rank == fft.rank()) {
            thread::sleep(d.delay);
        }
        let elapsed = t0.elapsed().as_secs_f64();
        if let Some((wall_max, wall_min)) = fft.comms_mut().world.reduce_minmax(elapsed)? {
            timings.push(RunTiming { wall_max, wall_min });
        }
    }
    let rank0 = fft.rank() == 0;
    Ok((rank0.then_some(timings), fft.into_comms()))
}

/// [`time_rank`] on in-process ranks.
pub fn time_inproc(cfg: &RunConfig, runs: usize, seed: u64, inject: Option<InjectedDelay>) -> Result<TimingReport> {
    cfg.validate()?;
    let results = run_inproc(cfg.grid, |comms| time_rank(cfg, comms, runs, seed, inject).map(|r| r.0))?;
    let mut out = None;
    for r in results {
        if let Some(runs) = r? {
            out = Some(runs);
        }
    }
    Ok(TimingReport {
        meta: TimingMeta::new(cfg, "inproc"),
        runs: out.ok_or_else(|| Error::State("rank 0 produced no timings".into()))?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixRow {
    Timed(TimingReport),
    Skipped { meta: TimingMeta, reason: String },
}

impl MatrixRow {
    pub fn meta(&self) -> &TimingMeta {
        match self {
            MatrixRow::Timed(r) => &r.meta,
            MatrixRow::Skipped { meta, .. } => meta,
        }
    }
}

/// Axes of a timing matrix.
#[derive(Debug, Clone)]
pub struct MatrixSpec {
    pub sizes: Vec<TensorDims>,
    pub ranks: Vec<usize>,
    pub options: Vec<u8>,
    pub scheme: Scheme,
    pub k: usize,
    pub restore: bool,
    pub runs: usize,
    pub seed: u64,
}

impl MatrixSpec {
    pub fn new(sizes: Vec<TensorDims>, ranks: Vec<usize>, options: Vec<u8>) -> Self {
        MatrixSpec {
            sizes,
            ranks,
            options,
            scheme: Scheme::Pencil,
            k: crate::pipeline::DEFAULT_K,
            restore: true,
            runs: DEFAULT_RUNS,
            seed: 42,
        }
    }
}

fn matrix_config(spec: &MatrixSpec, dims: TensorDims, ranks: usize, option: u8) -> Result<RunConfig> {
    let strategy = StrategyConfig::option(option)?.with_k(spec.k);
    let cfg = match spec.scheme {
        Scheme::Slab => RunConfig::slab(dims, ranks, strategy)?,
        _ => RunConfig {
            scheme: spec.scheme,
            ..RunConfig::pencil(dims, ranks, strategy)?
        },
    };
    Ok(cfg.with_restore(spec.restore))
}

/// Times every (size, ranks, option) combination in order. Invalid
/// combinations become skipped rows; `on_row` sees each row as it is done.
pub fn run_matrix(spec: &MatrixSpec, mut on_row: impl FnMut(&MatrixRow)) -> Result<Vec<MatrixRow>> {
    let mut rows = Vec::new();
    for &dims in &spec.sizes {
        for &ranks in &spec.ranks {
            for &option in &spec.options {
                let row = match matrix_config(spec, dims, ranks, option)
                    .and_then(|cfg| cfg.validate().map(|_| cfg))
                {
                    Ok(cfg) => MatrixRow::Timed(time_inproc(&cfg, spec.runs, spec.seed, None)?),
                    Err(e) => MatrixRow::Skipped {
                        meta: TimingMeta {
                            size: size_label(dims),
                            ranks,
                            py: 0,
                            pz: 0,
                            scheme: spec.scheme,
                            option,
                            k: spec.k,
                            transport: "inproc".into(),
                        },
                        reason: e.to_string(),
                    },
                };
                on_row(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

fn secs(v: f64) -> String {
    format!("{v:.6}")
}

/// CSV table writer; the header is written on construction.
pub struct CsvTable<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> CsvTable<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER).map_err(csv_err)?;
        Ok(CsvTable { out })
    }

    fn record(&mut self, m: &TimingMeta, run: &str, max: &str, min: &str) -> Result<()> {
        let head = [
            m.size.clone(),
            m.ranks.to_string(),
            m.py.to_string(),
            m.pz.to_string(),
            m.scheme.to_string(),
            m.option.to_string(),
            m.k.to_string(),
            m.transport.clone(),
        ];
        let rec = head.iter().map(String::as_str).chain([run, max, min]);
        self.out.write_record(rec).map_err(csv_err)
    }

    /// One row per run, then a `best` summary row.
    pub fn write_report(&mut self, r: &TimingReport) -> Result<()> {
        for (i, run) in r.runs.iter().enumerate() {
            self.record(&r.meta, &(i + 1).to_string(), &secs(run.wall_max), &secs(run.wall_min))?;
        }
        if let Some(best) = r.best() {
            self.record(&r.meta, "best", &secs(best.wall_max), &secs(best.wall_min))?;
        }
        Ok(())
    }

    /// Skipped rows carry `skipped: <reason>` in the run column.
    pub fn write_row(&mut self, row: &MatrixRow) -> Result<()> {
        match row {
            MatrixRow::Timed(r) => self.write_report(r),
            MatrixRow::Skipped { meta, reason } => self.record(meta, &format!("skipped: {reason}"), "", ""),
        }
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Parsed row of a timing table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub fields: Vec<String>,
}

impl CsvRow {
    pub fn get(&self, column: &str) -> Option<&str> {
        let i = CSV_HEADER.iter().position(|c| *c == column)?;
        self.fields.get(i).map(String::as_str)
    }
}

/// Reads a timing table, checking the header.
pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Format(format!("unexpected CSV header {header:?}")));
    }
    rd.records()
        .map(|r| {
            r.map(|rec| CsvRow {
                fields: rec.iter().map(str::to_string).collect(),
            })
            .map_err(csv_err)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rank_max_equals_min() {
        let cfg = RunConfig::pencil(TensorDims::cube(8).unwrap(), 1, StrategyConfig::default()).unwrap();
        let r = time_inproc(&cfg, 3, 1, None).unwrap();
        assert_eq!(r.runs.len(), 3);
        for run in &r.runs {
            assert_eq!(run.wall_max, run.wall_min);
        }
    }

    #[test]
    fn injected_delay_raises_wall_max() {
        let cfg = RunConfig::pencil(TensorDims::cube(8).unwrap(), 4, StrategyConfig::default()).unwrap();
        let base = time_inproc(&cfg, 3, 1, None).unwrap().best().unwrap();
        let inject = InjectedDelay {
            rank: 2,
            delay: Duration::from_millis(50),
        };
        let slow = time_inproc(&cfg, 3, 1, Some(inject)).unwrap();
        for run in &slow.runs {
            assert!(run.wall_max >= base.wall_max + 0.050 - 1e-3, "{run:?} vs {base:?}");
            assert!(run.wall_min <= run.wall_max);
        }
    }

    #[test]
    fn csv_rows_and_best() {
        let cfg = RunConfig::pencil(TensorDims::cube(8).unwrap(), 2, StrategyConfig::default()).unwrap();
        let r = time_inproc(&cfg, 3, 5, None).unwrap();
        let mut t = CsvTable::new(Vec::new()).unwrap();
        t.write_report(&r).unwrap();
        let bytes = t.finish().unwrap();
        let rows = read_csv(&bytes[..]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3].get("run"), Some("best"));
        let maxes: Vec<f64> = rows[..3].iter().map(|r| r.get("wall_max_s").unwrap().parse().unwrap()).collect();
        let best: f64 = rows[3].get("wall_max_s").unwrap().parse().unwrap();
        assert_eq!(best, maxes.iter().copied().fold(f64::INFINITY, f64::min));
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("size,ranks,py,pz,scheme,option,k,transport,run,wall_max_s,wall_min_s\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("8,2,2,1,pencil,4,2,inproc,1,"));
    }

    #[test]
    fn matrix_is_cartesian_product() {
        let mut spec = MatrixSpec::new(vec![TensorDims::cube(16).unwrap()], vec![1, 4], vec![1, 2, 3, 4]);
        spec.runs = 1;
        let rows = run_matrix(&spec, |_| {}).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| matches!(r, MatrixRow::Timed(_))));
    }

    #[test]
    fn slab_beyond_limit_is_skipped() {
        let mut spec = MatrixSpec::new(vec![TensorDims::cube(8).unwrap()], vec![4, 16], vec![4]);
        spec.scheme = Scheme::Slab;
        spec.runs = 1;
        let rows = run_matrix(&spec, |_| {}).unwrap();
        assert!(matches!(rows[0], MatrixRow::Timed(_)));
        let MatrixRow::Skipped { reason, .. } = &rows[1] else {
            panic!("expected skip")
        };
        assert!(reason.contains('8'), "{reason}");
        let mut t = CsvTable::new(Vec::new()).unwrap();
        t.write_row(&rows[1]).unwrap();
        let rows = read_csv(&t.finish().unwrap()[..]).unwrap();
        assert!(rows[0].get("run").unwrap().starts_with("skipped"));
    }
}
