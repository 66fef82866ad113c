use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use bforest_core::compose::{compose, split, CompositeForest};
use bforest_core::decompose::{
    alternating_envelope, mark_and_split, red_innovation_walk, sample_geometric, split_at_marks,
    williams_split, MarkedSplit, WilliamsSplit,
};
use bforest_core::forest::{
    deserialize_forest, forest_to_walk, format_f64, read_walk_csv, serialize_forest,
    walk_to_forest, write_walk_csv, AlternatingWalk, Color, PlaneForest, Truncation,
};
use bforest_core::samplers::{
    sample_brownian_poisson, sample_forest, sample_walk, Horizon, Params, RngStream,
};
use bforest_core::stats::{run_suite, suite_info, write_reports_csv, SUITES};

mod plot;

/// Bad flags or unreadable input; exits with status 2.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

#[derive(Parser)]
#[command(
    name = "bforest",
    version,
    about = "Sample, compose, decompose and test binary forests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a forest, a walk or a sampled Brownian path
    #[command(subcommand)]
    Sample(SampleCmd),
    /// Compose a black forest with a red one
    Compose(ComposeArgs),
    /// Split a coloured forest into its black and red parts
    Split(SplitArgs),
    /// Split a walk at the minimum before a given, geometric or marked time
    Decompose(DecomposeArgs),
    /// Lower envelope of a walk relative to marked peaks
    Envelope(EnvelopeArgs),
    /// Run a Monte Carlo suite; exits 0 iff every check passes
    Verify(VerifyArgs),
    /// Render a forest or a walk as SVG
    Plot(PlotArgs),
}

#[derive(Subcommand)]
enum SampleCmd {
    /// binary(lambda, mu) forest in FTF
    Forest(ForestArgs),
    /// Walk with falls exponential(theta - lambda) and rises exponential(theta + lambda), as `n,H` CSV
    Walk(WalkArgs),
    /// Brownian motion with drift -lambda sampled at rate kappa^2 / 2, as `k,time,level,min` CSV
    Brownian(BrownianArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout if absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ForestArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    /// Number of trees (1 if neither this nor --floor-length is given)
    #[arg(long, conflicts_with = "floor_length")]
    trees: Option<usize>,
    #[arg(long)]
    floor_length: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long)]
    pairs: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BrownianArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, allow_negative_numbers = true)]
    kappa: f64,
    #[arg(long)]
    samples: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ComposeArgs {
    /// Black forest (FTF)
    #[arg(long)]
    black: PathBuf,
    /// Red forest (FTF)
    #[arg(long)]
    red: PathBuf,
    /// Where to write `branch,origin,side` rows
    #[arg(long)]
    provenance: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    /// Coloured forest (FTF)
    input: PathBuf,
    #[arg(long)]
    black_out: PathBuf,
    #[arg(long)]
    red_out: PathBuf,
}

#[derive(Args)]
#[group(id = "cut", required = true, multiple = false, args = ["n", "geometric_q", "q", "marks"])]
struct DecomposeArgs {
    /// Walk (`n,H` CSV)
    input: PathBuf,
    /// Split at the minimum of H_0 .. H_2n
    #[arg(long)]
    n: Option<usize>,
    /// Like --n with n geometric on {1, 2, ..} with success probability 1 - q
    #[arg(long)]
    geometric_q: Option<f64>,
    /// Mark each rise with probability 1 - q and split between marks
    #[arg(long)]
    q: Option<f64>,
    /// Comma-separated marked rises (1-based)
    #[arg(long, value_delimiter = ',')]
    marks: Option<Vec<usize>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EnvelopeArgs {
    /// Walk (`n,H` CSV) or coloured forest (FTF, black leaves are the marked peaks)
    input: PathBuf,
    /// Mark each peak of a walk with probability 1 - q
    #[arg(long, conflicts_with = "marks")]
    q: Option<f64>,
    /// Comma-separated marked peaks of a walk (1-based)
    #[arg(long, value_delimiter = ',')]
    marks: Option<Vec<usize>>,
    /// Also write the forest decoded from Z - J (FTF)
    #[arg(long)]
    red_out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite id; `list` prints the suites
    suite: String,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q: Option<f64>,
    /// Sample size (the suite's default if absent)
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the reports as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Forest (FTF) or walk (`n,H` CSV)
    input: PathBuf,
    /// Output SVG file
    #[arg(long)]
    svg: PathBuf,
    /// Draw the Harris walk under a forest
    #[arg(long)]
    harris: bool,
    #[arg(long, default_value_t = 800)]
    width: u32,
    #[arg(long, default_value_t = 400)]
    height: u32,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sample(SampleCmd::Forest(a)) => sample_forest_cmd(a)?,
        Command::Sample(SampleCmd::Walk(a)) => sample_walk_cmd(a)?,
        Command::Sample(SampleCmd::Brownian(a)) => sample_brownian_cmd(a)?,
        Command::Compose(a) => compose_cmd(a)?,
        Command::Split(a) => split_cmd(a)?,
        Command::Decompose(a) => decompose_cmd(a)?,
        Command::Envelope(a) => envelope_cmd(a)?,
        Command::Verify(a) => return verify_cmd(a),
        Command::Plot(a) => plot_cmd(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn emit(out: &Option<PathBuf>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut f = io::BufWriter::new(
                fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
            );
            write(&mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn read_text(p: &Path) -> Result<String> {
    match fs::read_to_string(p) {
        Ok(s) => Ok(s),
        Err(e) => usage(format!("cannot read {}: {e}", p.display())),
    }
}

fn read_forest(p: &Path) -> Result<PlaneForest> {
    deserialize_forest(&read_text(p)?).or_else(|e| usage(format!("{}: {e}", p.display())))
}

fn is_walk_csv(text: &str) -> bool {
    text.lines().next().map(str::trim) == Some("n,H")
}

fn parse_walk(p: &Path, text: &str) -> Result<AlternatingWalk> {
    read_walk_csv(io::Cursor::new(text)).or_else(|e| usage(format!("{}: {e}", p.display())))
}

fn read_walk(p: &Path) -> Result<AlternatingWalk> {
    parse_walk(p, &read_text(p)?)
}

fn params(lambda: f64, upper: f64) -> Result<Params> {
    Params::new(lambda, upper).or_else(|e| usage(e.to_string()))
}

fn sample_forest_cmd(a: ForestArgs) -> Result<()> {
    let p = params(a.lambda, a.mu)?;
    let truncation = match (a.trees, a.floor_length) {
        (Some(n), _) => Truncation::Trees(n),
        (None, Some(l)) if l > 0.0 && l.is_finite() => Truncation::FloorLength(l),
        (None, Some(l)) => return usage(format!("floor length must be positive, got {l}")),
        (None, None) => Truncation::Trees(1),
    };
    let mut rng = RngStream::new(a.common.seed, 0).rng();
    let f = sample_forest(&p, truncation, &mut rng)?;
    emit(&a.common.out, |w| {
        w.write_all(serialize_forest(&f).as_bytes())
    })
}

fn sample_walk_cmd(a: WalkArgs) -> Result<()> {
    let p = params(a.lambda, a.theta)?;
    let mut rng = RngStream::new(a.common.seed, 0).rng();
    let walk = sample_walk(&p, a.pairs, &mut rng);
    emit(&a.common.out, |w| write_walk_csv(&walk, w))
}

fn sample_brownian_cmd(a: BrownianArgs) -> Result<()> {
    if !(a.lambda >= 0.0 && a.kappa > 0.0) {
        return usage(format!(
            "need lambda >= 0 and kappa > 0, got {} and {}",
            a.lambda, a.kappa
        ));
    }
    let mut rng = RngStream::new(a.common.seed, 0).rng();
    let path = sample_brownian_poisson(a.lambda, a.kappa, Horizon::Samples(a.samples), &mut rng)?;
    emit(&a.common.out, |w| {
        writeln!(w, "k,time,level,min")?;
        for (k, r) in path.records.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                k + 1,
                format_f64(r.time),
                format_f64(r.level),
                format_f64(r.min)
            )?;
        }
        Ok(())
    })
}

fn compose_cmd(a: ComposeArgs) -> Result<()> {
    let black = read_forest(&a.black)?;
    let red = read_forest(&a.red)?;
    let c = compose(&black, &red)?;
    if let Some(p) = &a.provenance {
        emit(&Some(p.clone()), |w| c.write_provenance_csv(w))?;
    }
    emit(&a.out, |w| {
        w.write_all(serialize_forest(&c.forest).as_bytes())
    })
}

fn split_cmd(a: SplitArgs) -> Result<()> {
    let f = read_forest(&a.input)?;
    let c = CompositeForest::from_colored(f)
        .or_else(|e| usage(format!("{}: {e}", a.input.display())))?;
    let (black, red) = split(&c)?;
    emit(&Some(a.black_out), |w| {
        w.write_all(serialize_forest(&black).as_bytes())
    })?;
    emit(&Some(a.red_out), |w| {
        w.write_all(serialize_forest(&red).as_bytes())
    })
}

fn unit_open(name: &str, q: f64) -> Result<f64> {
    if q > 0.0 && q < 1.0 {
        Ok(q)
    } else {
        usage(format!("--{name} must lie in (0, 1), got {q}"))
    }
}

fn write_williams(w: &mut dyn Write, s: &WilliamsSplit) -> io::Result<()> {
    writeln!(w, "part,k,H")?;
    for (k, h) in s.pre_path.iter().enumerate() {
        writeln!(w, "pre,{k},{}", format_f64(*h))?;
    }
    for (k, h) in s.post_path_reversed().iter().enumerate() {
        writeln!(w, "post,{k},{}", format_f64(*h))?;
    }
    Ok(())
}

fn write_stretches(w: &mut dyn Write, s: &MarkedSplit) -> io::Result<()> {
    writeln!(w, "stretch,mark,start,min_index,end,fall,rise,excursions")?;
    for (i, (st, m)) in s.stretches.iter().zip(&s.marks).enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            i + 1,
            m,
            st.start,
            st.min_index,
            st.end,
            format_f64(st.fall),
            format_f64(st.rise),
            st.excursions.len()
        )?;
    }
    Ok(())
}

fn decompose_cmd(a: DecomposeArgs) -> Result<()> {
    let walk = read_walk(&a.input)?;
    let mut rng = RngStream::new(a.common.seed, 0).rng();
    let n = match (a.n, a.geometric_q) {
        (Some(0), _) => return usage("--n must be at least 1"),
        (Some(n), _) => Some(n),
        (None, Some(q)) => Some(sample_geometric(
            1.0 - unit_open("geometric-q", q)?,
            &mut rng,
        )?),
        (None, None) => None,
    };
    if let Some(n) = n {
        if n > walk.pairs() {
            anyhow::bail!(
                "split at n = {n} needs {n} pairs, the walk has {}",
                walk.pairs()
            );
        }
        let s = williams_split(&walk, n)?;
        return emit(&a.common.out, |w| write_williams(w, &s));
    }
    let s = match (a.q, a.marks) {
        (Some(q), _) => mark_and_split(&walk, 1.0 - unit_open("q", q)?, &mut rng)?,
        (None, Some(m)) => split_at_marks(&walk, m).or_else(|e| usage(e.to_string()))?,
        (None, None) => unreachable!("clap requires one cut"),
    };
    emit(&a.common.out, |w| write_stretches(w, &s))
}

fn envelope_cmd(a: EnvelopeArgs) -> Result<()> {
    let text = read_text(&a.input)?;
    let (walk, peaks) = if is_walk_csv(&text) {
        let walk = parse_walk(&a.input, &text)?;
        let peaks = match (a.q, &a.marks) {
            (Some(q), _) => {
                let keep = 1.0 - unit_open("q", q)?;
                let mut rng = RngStream::new(a.common.seed, 0).rng();
                (0..walk.pairs())
                    .map(|_| rand::Rng::random::<f64>(&mut rng) < keep)
                    .collect()
            }
            (None, Some(m)) => {
                let mut peaks = vec![false; walk.pairs()];
                for &k in m {
                    if k == 0 || k > walk.pairs() {
                        return usage(format!("mark {k} outside 1..={}", walk.pairs()));
                    }
                    peaks[k - 1] = true;
                }
                peaks
            }
            (None, None) => return usage("a walk needs --q or --marks"),
        };
        (walk, peaks)
    } else {
        let f =
            deserialize_forest(&text).or_else(|e| usage(format!("{}: {e}", a.input.display())))?;
        if a.q.is_some() || a.marks.is_some() {
            return usage("--q and --marks apply to walks; a forest is marked by its black leaves");
        }
        let mut peaks = Vec::new();
        for t in f.trees() {
            for i in t.leaves() {
                match t.node(i).color {
                    Some(c) => peaks.push(c == Color::Black),
                    None => return usage("forest is not coloured"),
                }
            }
        }
        (forest_to_walk(&f)?, peaks)
    };
    let env = alternating_envelope(&walk.heights(), &peaks).or_else(|e| usage(e.to_string()))?;
    if let Some(p) = &a.red_out {
        let red = walk_to_forest(&red_innovation_walk(&env, walk.tail())?)?.forest;
        emit(&Some(p.clone()), |w| {
            w.write_all(serialize_forest(&red).as_bytes())
        })?;
    }
    emit(&a.common.out, |w| env.write_csv(w))
}

fn verify_cmd(a: VerifyArgs) -> Result<ExitCode> {
    if a.suite == "list" {
        let mut out = io::stdout().lock();
        for s in SUITES {
            let ps: Vec<String> = s.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(
                out,
                "{:<8} n={:<8} {:<32} {}",
                s.id,
                s.samples,
                ps.join(" "),
                s.about
            )?;
        }
        return Ok(ExitCode::SUCCESS);
    }
    let Some(info) = suite_info(&a.suite) else {
        return usage(format!(
            "unknown suite {:?}; `bforest verify list` shows them",
            a.suite
        ));
    };
    let given = [
        ("lambda", a.lambda),
        ("mu", a.mu),
        ("theta", a.theta),
        ("kappa", a.kappa),
        ("q", a.q),
    ];
    for (name, v) in &given {
        if v.is_some() && !info.params.iter().any(|p| p.0 == *name) {
            return usage(format!("{} does not take --{name}", info.id));
        }
    }
    let ps: Vec<f64> = info
        .params
        .iter()
        .map(|(name, default)| {
            given
                .iter()
                .find(|g| g.0 == *name)
                .and_then(|g| g.1)
                .unwrap_or(*default)
        })
        .collect();
    let reports = run_suite(info.id, &ps, a.samples.unwrap_or(0), a.seed).or_else(|e| match e {
        bforest_core::stats::StatsError::BadParams(m) => usage(m),
        e => Err(e.into()),
    })?;
    let mut out = io::stdout().lock();
    for r in &reports {
        writeln!(out, "{}", r.line())?;
    }
    drop(out);
    if let Some(p) = &a.csv {
        emit(&Some(p.clone()), |w| write_reports_csv(&reports, w))?;
    }
    Ok(if reports.iter().all(|r| r.passed()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn plot_cmd(a: PlotArgs) -> Result<()> {
    let text = read_text(&a.input)?;
    let canvas = plot::Canvas {
        width: a.width as f64,
        height: a.height as f64,
    };
    let svg = if is_walk_csv(&text) {
        plot::walk_svg(&parse_walk(&a.input, &text)?, &canvas)
    } else {
        let f =
            deserialize_forest(&text).or_else(|e| usage(format!("{}: {e}", a.input.display())))?;
        plot::forest_svg(&f, a.harris, &canvas)?
    };
    emit(&Some(a.svg), |w| w.write_all(svg.as_bytes()))
}
