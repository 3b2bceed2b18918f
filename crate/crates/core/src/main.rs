use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pencil_fft::bench::{self, CsvTable, MatrixRow, MatrixSpec, TimingMeta, TimingReport};
use pencil_fft::decomp::max_ranks;
use pencil_fft::driver::{forward_gathered, forward_global_gathered, RunConfig};
use pencil_fft::pipeline::DEFAULT_K;
use pencil_fft::rng::random_tensor;
use pencil_fft::tensor::{read_tensor, write_tensor};
use pencil_fft::transport::{read_hosts_file, run_inproc, TcpMesh};
use pencil_fft::verify::{verify_rank, VerifyReport};
use pencil_fft::{Error, ProcessGrid, RankComms, Result, Scheme, StrategyConfig, Tensor3, TensorDims};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Parser)]
#[command(name = "pencil-fft", version, about = "Distributed 3D FFT runner and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time forward transforms and write a CSV table.
    Bench(BenchArgs),
    /// Check against the direct DFT, roundtrip, Parseval and option equivalence.
    Verify(VerifyArgs),
    /// Write the forward spectrum of the seeded input to a tensor file.
    Dump(DumpArgs),
    /// Read a tensor file, optionally transform it, and print a summary.
    Load(LoadArgs),
    /// Print the largest usable rank count per decomposition scheme.
    Info(SizeArgs),
}

#[derive(Args, Clone)]
struct SizeArgs {
    /// Cube edge length; comma list accepted by `bench`.
    #[arg(long, value_delimiter = ',', conflicts_with = "dims")]
    size: Vec<usize>,
    /// Non-cubic extents NX,NY,NZ.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    dims: Option<Vec<usize>>,
}

impl SizeArgs {
    fn all(&self) -> Result<Vec<TensorDims>> {
        match (&self.dims, self.size.as_slice()) {
            (Some(d), _) if d.len() == 3 => Ok(vec![TensorDims::new(d[0], d[1], d[2])?]),
            (Some(d), _) => Err(Error::InvalidSize(format!("--dims needs three values, got {d:?}"))),
            (None, []) => Err(Error::InvalidSize("one of --size or --dims is required".into())),
            (None, sizes) => sizes.iter().map(|&n| TensorDims::cube(n)).collect(),
        }
    }

    fn one(&self) -> Result<TensorDims> {
        match self.all()?.as_slice() {
            [d] => Ok(*d),
            many => Err(Error::InvalidSize(format!("expected one size, got {}", many.len()))),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Pencil,
    Slab,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransportArg {
    Inproc,
    Tcp,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    size: SizeArgs,
    /// Rank count; comma list accepted by `bench`.
    #[arg(long, value_delimiter = ',')]
    ranks: Vec<usize>,
    /// Process grid PY,PZ instead of the default factorization.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    grid: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "pencil")]
    scheme: SchemeArg,
    /// Strategy option 1..4; comma list accepted by `bench`.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    option: Vec<u8>,
    /// Chunks per transpose.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, value_enum, default_value = "inproc")]
    transport: TransportArg,
    /// Rendezvous file for tcp: one `rank host:port` per line.
    #[arg(long)]
    hosts: Option<PathBuf>,
    /// This process's rank in tcp mode.
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Leave the forward output in Z-pencils.
    #[arg(long)]
    no_restore: bool,
}

impl RunArgs {
    fn scheme(&self) -> Scheme {
        match self.scheme {
            SchemeArg::Pencil => Scheme::Pencil,
            SchemeArg::Slab => Scheme::Slab,
        }
    }

    fn config_for(&self, dims: TensorDims, ranks: usize, option: u8) -> Result<RunConfig> {
        let strategy = StrategyConfig::option(option)?.with_k(self.k);
        let cfg = match self.scheme() {
            Scheme::Slab => RunConfig::slab(dims, ranks, strategy)?,
            _ => RunConfig::pencil(dims, ranks, strategy)?,
        };
        let cfg = match self.grid.as_deref() {
            Some(&[py, pz]) => cfg.with_grid(ProcessGrid::with_shape(ranks, py, pz)?),
            Some(g) => return Err(Error::InvalidSize(format!("--grid needs PY,PZ, got {g:?}"))),
            None => cfg,
        };
        Ok(cfg.with_restore(!self.no_restore))
    }

    /// Single configuration; in tcp mode the rank count defaults to the
    /// number of hosts.
    fn config(&self) -> Result<RunConfig> {
        let ranks = match (self.ranks.as_slice(), self.transport) {
            ([p], _) => *p,
            ([], TransportArg::Tcp) => self.hosts()?.len(),
            ([], TransportArg::Inproc) => 1,
            (many, _) => return Err(Error::InvalidSize(format!("expected one rank count, got {many:?}"))),
        };
        let option = match self.option.as_slice() {
            [o] => *o,
            many => return Err(Error::InvalidSize(format!("expected one option, got {many:?}"))),
        };
        let cfg = self.config_for(self.size.one()?, ranks, option)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn hosts(&self) -> Result<Vec<std::net::SocketAddr>> {
        let path = self
            .hosts
            .as_deref()
            .ok_or_else(|| Error::State("--transport tcp needs --hosts".into()))?;
        read_hosts_file(path)
    }

    /// Connects this process's rank over TCP.
    fn tcp_comms(&self, cfg: &RunConfig) -> Result<RankComms> {
        let addrs = self.hosts()?;
        if addrs.len() != cfg.ranks() {
            return Err(Error::State(format!(
                "hosts file lists {} ranks but the run needs {}",
                addrs.len(),
                cfg.ranks()
            )));
        }
        let rank = self
            .rank
            .ok_or_else(|| Error::State("--transport tcp needs --rank".into()))?;
        let mesh = TcpMesh::connect(rank, &addrs, CONNECT_TIMEOUT)?;
        RankComms::tcp(mesh, cfg.grid)
    }

    /// Runs `f` on every rank this process hosts and returns rank 0's
    /// result, or `None` on other tcp ranks.
    fn on_ranks<T: Send>(
        &self,
        cfg: &RunConfig,
        f: impl Fn(RankComms) -> Result<Option<T>> + Sync,
    ) -> Result<Option<T>> {
        match self.transport {
            TransportArg::Tcp => f(self.tcp_comms(cfg)?),
            TransportArg::Inproc => {
                let mut out = None;
                for r in run_inproc(cfg.grid, &f)? {
                    if let Some(v) = r? {
                        out = Some(v);
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = bench::DEFAULT_RUNS)]
    runs: usize,
    /// Output path; stdout if absent.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    run: RunArgs,
    /// One JSON object per check.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    file: PathBuf,
    /// Write the seeded input instead of its spectrum.
    #[arg(long)]
    input_only: bool,
}

#[derive(Args)]
struct LoadArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    file: PathBuf,
    /// Forward-transform the loaded tensor and write the result here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Dump(a) => cmd_dump(a),
        Command::Load(a) => cmd_load(a),
        Command::Info(a) => cmd_info(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_bench(a: BenchArgs) -> Result<bool> {
    let mut table = CsvTable::new(open_output(a.csv.as_deref())?)?;
    match a.run.transport {
        TransportArg::Tcp => {
            let cfg = a.run.config()?;
            let seed = a.run.seed;
            let runs = a.run.on_ranks(&cfg, |comms| bench::time_rank(&cfg, comms, a.runs, seed, None).map(|r| r.0))?;
            if let Some(runs) = runs {
                table.write_report(&TimingReport {
                    meta: TimingMeta::new(&cfg, "tcp"),
                    runs,
                })?;
            }
        }
        TransportArg::Inproc => {
            let ranks = if a.run.ranks.is_empty() { vec![1] } else { a.run.ranks.clone() };
            let spec = MatrixSpec {
                scheme: a.run.scheme(),
                k: a.run.k,
                restore: !a.run.no_restore,
                runs: a.runs,
                seed: a.run.seed,
                ..MatrixSpec::new(a.run.size.all()?, ranks, a.run.option.clone())
            };
            if let Some(g) = &a.run.grid {
                // A fixed grid only makes sense for one configuration.
                let cfg = a.run.config()?;
                debug_assert_eq!(g.len(), 2);
                table.write_report(&bench::time_inproc(&cfg, a.runs, a.run.seed, None)?)?;
            } else {
                let mut err = None;
                bench::run_matrix(&spec, |row| {
                    if err.is_none() {
                        err = table.write_row(row).err();
                    }
                    if let MatrixRow::Skipped { meta, reason } = row {
                        eprintln!("skipped size={} ranks={}: {reason}", meta.size, meta.ranks);
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
            }
        }
    }
    table.finish()?.flush()?;
    Ok(true)
}

fn print_report(report: &VerifyReport, json: bool) {
    if json {
        print!("{}", report.to_json_lines());
        return;
    }
    for c in &report.checks {
        let metrics: Vec<String> = c
            .metrics
            .iter()
            .map(|(k, v)| format!("{k}={v:.3e} (<= {:.1e})", c.thresholds[k]))
            .collect();
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, metrics.join(", "));
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<bool> {
    let cfg = a.run.config()?;
    let seed = a.run.seed;
    let report = a.run.on_ranks(&cfg, |comms| verify_rank(&cfg, comms, seed).map(|r| r.0))?;
    Ok(match report {
        Some(r) => {
            print_report(&r, a.json);
            r.passed()
        }
        None => true,
    })
}

fn write_file(path: &Path, dims: TensorDims, t: &Tensor3) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, dims, t)?;
    w.flush()?;
    Ok(())
}

fn cmd_dump(a: DumpArgs) -> Result<bool> {
    let cfg = a.run.config()?;
    if a.input_only {
        write_file(&a.file, cfg.dims, &random_tensor(cfg.dims, a.run.seed))?;
        return Ok(true);
    }
    let seed = a.run.seed;
    let out = a.run.on_ranks(&cfg, |comms| {
        let mut fft = cfg.transform(comms)?;
        forward_gathered(&mut fft, seed)
    })?;
    if let Some(t) = out {
        write_file(&a.file, cfg.dims, &t)?;
        eprintln!("wrote {} spectrum ({cfg}) to {}", cfg.dims, a.file.display());
    }
    Ok(true)
}

fn cmd_load(a: LoadArgs) -> Result<bool> {
    let (dims, tensor) = read_tensor(BufReader::new(File::open(&a.file)?))?;
    println!("dims {dims}, {} samples, energy {:.6e}", tensor.len(), tensor.energy());
    let Some(out) = a.out else {
        return Ok(true);
    };
    let mut run = a.run;
    run.size = SizeArgs {
        size: Vec::new(),
        dims: Some(dims.as_array().to_vec()),
    };
    let cfg = run.config()?;
    let spectrum = run.on_ranks(&cfg, |comms| {
        let mut fft = cfg.transform(comms)?;
        forward_global_gathered(&mut fft, &tensor)
    })?;
    if let Some(s) = spectrum {
        write_file(&out, dims, &s)?;
        println!("wrote spectrum to {}", out.display());
    }
    Ok(true)
}

fn cmd_info(a: SizeArgs) -> Result<bool> {
    for dims in a.all()? {
        println!(
            "P_max slab={} pencil={} cell={}",
            max_ranks(dims, Scheme::Slab),
            max_ranks(dims, Scheme::Pencil),
            max_ranks(dims, Scheme::Cell)
        );
    }
    Ok(true)
}
