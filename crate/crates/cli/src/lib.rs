//! `detflop` command-line front end: instance generation, verification,
//! chamber tiling and oracle calibration.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use detflop::chamber::{bir_generators, chamber_bfs, ChamberError, GeneratorReport, PushforwardSet, TilingCertificate, TilingStatus};
use detflop::domain::{fundamental_domain, FundamentalDomainCandidate};
use detflop::exactnum::{FieldSpec, GfField};
use detflop::flop::{check_diagram, DiagramReport, FlopMap, PointSource};
use detflop::picard::{
    calibrated_pushforward, degree_count_pullback, structural_set, MatrixFixture, OracleConfig, PicardError, Provenance,
    PushforwardMatrix,
};
use detflop::tensor::{random_instance, Instance};
use detflop::varprobe::{
    fields_of_orders, rank_locus_scan, smoothness_scan, ProbeBudget, RankLocusReport, RankLocusVerdict, SmoothnessReport,
    SmoothnessVerdict, DEFAULT_RANK_FIELDS,
};

/// Stable exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A hard verification failure (diagram check).
    pub const FAILURE: i32 = 1;
    pub const PARAMS: i32 = 2;
    pub const DEGENERATE: i32 = 3;
    pub const FAN: i32 = 4;
    pub const DEPTH: i32 = 5;
    pub const ORACLE: i32 = 6;
}

#[derive(Debug, Parser)]
#[command(name = "detflop", version, about = "Exact determinantal flops of (1,...,1) complete intersections in (P^n)^N")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Largest ambient point count enumerated exhaustively.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Output file (gen, verify, oracle) or directory (cone).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Proceed past failed preconditions.
    #[arg(long, global = true)]
    pub force: bool,
    /// Accept oracle runs over a single prime without a warning.
    #[arg(long, global = true)]
    pub allow_single: bool,
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixMode {
    Structural,
    Oracle,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded random instance.
    Gen { n: i64, big_n: i64, seed: u64, bound: i64 },
    /// Probe smoothness, rank loci and flop diagrams.
    Verify {
        instance: PathBuf,
        /// Field orders for the smoothness scan.
        #[arg(long, value_delimiter = ',')]
        fields: Option<Vec<u64>>,
        /// Non-exceptional points per diagram check.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pushforward matrices, chamber tiling and fundamental domain.
    Cone {
        instance: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<MatrixMode>,
        /// JSON array of matrix fixtures (overrides --mode).
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        radius: Option<usize>,
    },
    /// Calibrate pushforward matrices with the degree-counting oracle.
    Oracle {
        instance: PathBuf,
        /// `j,i` for the flop `X_j --> X_i`, or `all`.
        #[arg(long)]
        flop: String,
        #[arg(long, value_delimiter = ',')]
        primes: Option<Vec<u64>>,
        #[arg(long)]
        tower: Option<u32>,
    },
}

/// Optional settings read from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub fields: Option<Vec<u64>>,
    pub rank_fields: Option<Vec<u64>>,
    pub diagram_field: Option<u64>,
    pub enumeration_cap: Option<u64>,
    pub samples: Option<usize>,
    pub retries: Option<usize>,
    pub depth_limit: Option<usize>,
    pub ball_radius: Option<usize>,
    pub seed: Option<u64>,
    pub primes: Option<Vec<u64>>,
    pub tower_height: Option<u32>,
}

impl RunConfig {
    fn validate(&self) -> Result<(), String> {
        let positive = [
            ("enumeration_cap", self.enumeration_cap.map(|x| x as u128)),
            ("samples", self.samples.map(|x| x as u128)),
            ("retries", self.retries.map(|x| x as u128)),
            ("ball_radius", self.ball_radius.map(|x| x as u128)),
            ("tower_height", self.tower_height.map(|x| x as u128)),
        ];
        for (name, v) in positive {
            if v == Some(0) {
                return Err(format!("{name} must be positive"));
            }
        }
        for (name, list) in [("fields", &self.fields), ("rank_fields", &self.rank_fields), ("primes", &self.primes)] {
            if list.as_ref().is_some_and(Vec::is_empty) {
                return Err(format!("{name} must not be empty"));
            }
        }
        Ok(())
    }
}

/// Command result: exit code; human-readable lines go to `stdout`, warnings to `stderr`.
struct Ctx<'a> {
    stdout: &'a mut (dyn Write + Send),
    stderr: &'a mut (dyn Write + Send),
}

impl Ctx<'_> {
    fn say(&mut self, line: &str) {
        let _ = writeln!(self.stdout, "{line}");
    }

    fn warn(&mut self, line: &str) {
        let _ = writeln!(self.stderr, "warning: {line}");
    }

    fn fail(&mut self, code: i32, line: &str) -> i32 {
        let _ = writeln!(self.stderr, "error: {line}");
        code
    }
}

/// Parses arguments and runs; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::PARAMS } else { exit::OK };
            let text = e.render().to_string();
            if code == exit::OK {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let mut ctx = Ctx { stdout, stderr };
    let config = match &cli.global.config {
        None => RunConfig::default(),
        Some(path) => match fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| {
            serde_json::from_str::<RunConfig>(&t).map_err(|e| e.to_string())
        }) {
            Ok(c) => c,
            Err(e) => return ctx.fail(exit::PARAMS, &format!("config {}: {e}", path.display())),
        },
    };
    if let Err(e) = config.validate() {
        return ctx.fail(exit::PARAMS, &e);
    }
    if cli.global.budget == Some(0) || cli.global.threads == Some(0) {
        return ctx.fail(exit::PARAMS, "--budget and --threads must be positive");
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return ctx.fail(exit::PARAMS, &format!("thread pool: {e}")),
    };
    pool.install(|| dispatch(&cli, &config, &mut ctx))
}

fn dispatch(cli: &Cli, config: &RunConfig, ctx: &mut Ctx) -> i32 {
    let g = &cli.global;
    match &cli.command {
        Command::Gen { n, big_n, seed, bound } => cmd_gen(*n, *big_n, *seed, *bound, g, ctx),
        Command::Verify { instance, fields, samples, seed } => {
            let opts = VerifyOptions {
                fields: fields.clone().or_else(|| config.fields.clone()).unwrap_or_else(|| vec![3]),
                rank_fields: config.rank_fields.clone().unwrap_or_else(|| DEFAULT_RANK_FIELDS.to_vec()),
                diagram_field: config.diagram_field.unwrap_or(7),
                samples: samples.or(config.samples).unwrap_or(100),
                budget: ProbeBudget {
                    enumeration_cap: g.budget.or(config.enumeration_cap).unwrap_or(ProbeBudget::default().enumeration_cap),
                    samples: samples.or(config.samples).unwrap_or(100),
                    retries: config.retries.unwrap_or(64),
                    seed: seed.or(config.seed).unwrap_or(0),
                },
            };
            if opts.samples == 0 {
                return ctx.fail(exit::PARAMS, "--samples must be positive");
            }
            with_instance(instance, ctx, |inst, ctx| cmd_verify(inst, &opts, g, ctx))
        }
        Command::Cone { instance, mode, fixtures, depth, radius } => {
            let opts = ConeOptions {
                mode: *mode,
                fixtures: fixtures.clone(),
                depth: depth.or(config.depth_limit).unwrap_or(3),
                radius: radius.or(config.ball_radius).unwrap_or(4),
                oracle: OracleConfig {
                    primes: config.primes.clone().unwrap_or_else(|| vec![7, 11]),
                    tower_height: config.tower_height.unwrap_or(2),
                    seed: config.seed.unwrap_or(0),
                    enumeration_cap: g.budget.or(config.enumeration_cap).unwrap_or(OracleConfig::default().enumeration_cap),
                    ..OracleConfig::default()
                },
            };
            if opts.radius == 0 {
                return ctx.fail(exit::PARAMS, "--radius must be positive");
            }
            with_instance(instance, ctx, |inst, ctx| cmd_cone(inst, &opts, g, ctx))
        }
        Command::Oracle { instance, flop, primes, tower } => {
            let cfg = OracleConfig {
                primes: primes.clone().or_else(|| config.primes.clone()).unwrap_or_else(|| vec![3, 5]),
                tower_height: tower.or(config.tower_height).unwrap_or(3),
                seed: config.seed.unwrap_or(0),
                enumeration_cap: g.budget.or(config.enumeration_cap).unwrap_or(OracleConfig::default().enumeration_cap),
                ..OracleConfig::default()
            };
            if cfg.primes.is_empty() || cfg.tower_height == 0 {
                return ctx.fail(exit::PARAMS, "need at least one prime and a positive tower height");
            }
            with_instance(instance, ctx, |inst, ctx| cmd_oracle(inst, flop, &cfg, g, ctx))
        }
    }
}

fn with_instance(path: &Path, ctx: &mut Ctx, f: impl FnOnce(&Instance, &mut Ctx) -> i32) -> i32 {
    match fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| Instance::from_json(&t).map_err(|e| e.to_string())) {
        Ok(inst) => f(&inst, ctx),
        Err(e) => ctx.fail(exit::PARAMS, &format!("instance {}: {e}", path.display())),
    }
}

fn write_out(path: &Path, text: &str, ctx: &mut Ctx) -> Result<(), i32> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if let Err(e) = fs::create_dir_all(dir) {
            return Err(ctx.fail(exit::PARAMS, &format!("{}: {e}", dir.display())));
        }
    }
    fs::write(path, text).map_err(|e| ctx.fail(exit::PARAMS, &format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_gen(n: i64, big_n: i64, seed: u64, bound: i64, g: &GlobalArgs, ctx: &mut Ctx) -> i32 {
    if n < 1 || big_n < 2 || bound < 0 {
        return ctx.fail(exit::PARAMS, &format!("need n >= 1, N >= 2, bound >= 0 (got n = {n}, N = {big_n}, bound = {bound})"));
    }
    let inst = match random_instance(n as usize, big_n as usize, seed, bound) {
        Ok(i) => i,
        Err(e) => return ctx.fail(exit::PARAMS, &e.to_string()),
    };
    let banner = format!("dim X = {}, models = {}", inst.dim_x(), inst.model_count());
    let mut json = inst.to_json();
    json.push('\n');
    match &g.out {
        Some(path) => {
            if let Err(code) = write_out(path, &json, ctx) {
                return code;
            }
            ctx.say(&banner);
        }
        None => {
            let _ = writeln!(ctx.stderr, "{banner}");
            let _ = write!(ctx.stdout, "{json}");
        }
    }
    if inst.dim_x() < 3 {
        ctx.warn("dim X < 3 is outside the supported range (flop results need dim X >= 3)");
    }
    if inst.tensor.is_degenerate() {
        ctx.warn("instance is degenerate (a hyperslice vanishes)");
    }
    exit::OK
}

struct VerifyOptions {
    fields: Vec<u64>,
    rank_fields: Vec<u64>,
    diagram_field: u64,
    samples: usize,
    budget: ProbeBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub dim_x: i64,
    pub degenerate: bool,
    pub smoothness: Vec<SmoothnessReport>,
    pub rank_locus: Vec<RankLocusReport>,
    pub diagram: Vec<DiagramReport>,
    pub smooth_on_tested_points: bool,
    pub exceptional_witness_for_every_pair: bool,
    pub diagram_failures: u64,
    pub hard_failure: bool,
}

fn cmd_verify(inst: &Instance, opts: &VerifyOptions, g: &GlobalArgs, ctx: &mut Ctx) -> i32 {
    let t = &inst.tensor;
    let big_n = t.big_n();
    let smooth_fields = match fields_of_orders(&opts.fields) {
        Ok(f) => f,
        Err(e) => return ctx.fail(exit::PARAMS, &format!("--fields: {e}")),
    };
    let rank_fields = match fields_of_orders(&opts.rank_fields) {
        Ok(f) => f,
        Err(e) => return ctx.fail(exit::PARAMS, &format!("rank fields: {e}")),
    };
    let diagram_field = match FieldSpec::of_order(opts.diagram_field).and_then(|s| GfField::new(&s)) {
        Ok(f) => f,
        Err(e) => return ctx.fail(exit::PARAMS, &format!("diagram field: {e}")),
    };
    if t.is_degenerate() {
        let report = VerifyReport {
            n: t.n(),
            big_n,
            dim_x: inst.dim_x(),
            degenerate: true,
            smoothness: Vec::new(),
            rank_locus: Vec::new(),
            diagram: Vec::new(),
            smooth_on_tested_points: false,
            exceptional_witness_for_every_pair: false,
            diagram_failures: 0,
            hard_failure: true,
        };
        if let Some(path) = &g.out {
            let _ = write_out(path, &to_json(&report), ctx);
        }
        return ctx.fail(exit::DEGENERATE, "instance is degenerate (a hyperslice of the coefficient tensor vanishes)");
    }
    let mut smoothness = Vec::new();
    for ell in 0..=big_n {
        match smoothness_scan(t, ell, &smooth_fields, &opts.budget) {
            Ok(r) => smoothness.push(r),
            Err(e) => return ctx.fail(exit::PARAMS, &format!("smoothness scan of X_{ell}: {e}")),
        }
    }
    let mut rank_locus = Vec::new();
    for j in 0..=big_n {
        for i in j + 1..=big_n {
            match rank_locus_scan(t, j, i, &rank_fields, &opts.budget) {
                Ok(r) => rank_locus.push(r),
                Err(e) => return ctx.fail(exit::PARAMS, &format!("rank-locus scan of ({j}, {i}): {e}")),
            }
        }
    }
    let mut diagram = Vec::new();
    for j in 0..=big_n {
        for i in (0..=big_n).filter(|&i| i != j) {
            let flop = FlopMap::new(big_n, j, i).expect("valid pair");
            let source = PointSource::Sample {
                count: opts.samples,
                max_draws: opts.samples * 20,
                seed: opts.budget.seed,
                retries: opts.budget.retries,
            };
            match check_diagram(t, diagram_field, flop, source) {
                Ok(r) => diagram.push(r),
                Err(e) => return ctx.fail(exit::PARAMS, &format!("diagram check of {j} -> {i}: {e}")),
            }
        }
    }
    let smooth = smoothness.iter().all(|r| r.verdict == SmoothnessVerdict::NoSingularPointFound);
    let exceptional = rank_locus.iter().all(|r| r.verdict == RankLocusVerdict::ExceptionalLocusNonempty);
    let failures: u64 = diagram.iter().map(|d| d.failures.len() as u64).sum();
    let report = VerifyReport {
        n: t.n(),
        big_n,
        dim_x: inst.dim_x(),
        degenerate: false,
        smooth_on_tested_points: smooth,
        exceptional_witness_for_every_pair: exceptional,
        diagram_failures: failures,
        hard_failure: failures > 0,
        smoothness,
        rank_locus,
        diagram,
    };
    let json = to_json(&report);
    match &g.out {
        Some(path) => {
            if let Err(code) = write_out(path, &json, ctx) {
                return code;
            }
        }
        None => {
            let _ = write!(ctx.stdout, "{json}");
        }
    }
    let mut summary = String::new();
    for r in &report.smoothness {
        let _ = writeln!(
            summary,
            "[7.3] X_{}: {} points tested over {:?} ({:?}), {} singular -> {:?}",
            r.model, r.tested, r.fields, r.methods, r.witness_count, r.verdict
        );
    }
    for r in &report.rank_locus {
        let _ = writeln!(summary, "[7.5] W_{:?}: witnesses per field {:?} over {:?} -> {:?}", r.pair, r.counts, r.fields, r.verdict);
    }
    let tested: u64 = report.diagram.iter().map(|d| d.tested).sum();
    let min_tested = report.diagram.iter().map(|d| d.tested).min().unwrap_or(0);
    let _ = writeln!(
        summary,
        "diagram: {} flops over {}, {tested} points (min {min_tested} per flop), {failures} failures",
        report.diagram.len(),
        diagram_field.spec()
    );
    let _ = write!(ctx.stderr, "{summary}");
    if !smooth {
        ctx.warn("singular points found: the smoothness assumption fails on the tested points (reduction may be bad at these primes)");
    }
    if !exceptional {
        ctx.warn("some pair has no exceptional witness in the scanned fields (probabilistic evidence only)");
    }
    if failures > 0 {
        return ctx.fail(exit::FAILURE, &format!("{failures} diagram failures"));
    }
    exit::OK
}

struct ConeOptions {
    mode: Option<MatrixMode>,
    fixtures: Option<PathBuf>,
    depth: usize,
    radius: usize,
    oracle: OracleConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub orbits: Vec<OrbitEntry>,
    pub generators: Vec<GeneratorEntry>,
    pub status: TilingStatus,
    pub walls: Vec<detflop::chamber::WallRecord>,
    pub explored_depth: usize,
    pub chambers: usize,
    pub fan_pairs_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitEntry {
    pub model: usize,
    pub word: Vec<usize>,
    pub transport: Vec<Vec<i128>>,
    pub generators: Vec<Vec<i128>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorEntry {
    pub matrix: Vec<Vec<i128>>,
    pub word: Vec<usize>,
    pub determinant: i128,
    /// `null`: infinite order.
    pub order: Option<u32>,
    pub word_replayed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainFile {
    pub generators: Vec<Vec<i128>>,
    pub facets: Vec<Vec<i128>>,
    pub ball_radius: usize,
    pub ball_size: usize,
    pub cuts: usize,
    pub certified: Vec<detflop::domain::Certification>,
    pub beyond_ball_certified: bool,
    pub stabilizer_assumption: bool,
    pub obstruction: Option<String>,
}

fn certificate_file(cert: &TilingCertificate, gens: &[GeneratorReport]) -> CertificateFile {
    CertificateFile {
        orbits: cert
            .representatives()
            .map(|r| OrbitEntry {
                model: r.model,
                word: r.word.clone(),
                transport: r.transport.clone(),
                generators: r.chamber.generators().to_vec(),
            })
            .collect(),
        generators: gens
            .iter()
            .map(|g| GeneratorEntry {
                matrix: g.element.matrix.clone(),
                word: g.element.word.clone(),
                determinant: g.determinant,
                order: g.order,
                word_replayed: g.word_replayed,
            })
            .collect(),
        status: cert.status,
        walls: cert.walls.clone(),
        explored_depth: cert.explored_depth,
        chambers: cert.chambers.len(),
        fan_pairs_checked: cert.fan_pairs_checked,
    }
}

fn domain_file(d: &FundamentalDomainCandidate) -> DomainFile {
    DomainFile {
        generators: d.cone.generators().to_vec(),
        facets: d.cone.facets().to_vec(),
        ball_radius: d.ball_radius,
        ball_size: d.ball_size,
        cuts: d.cuts,
        certified: d.certified.clone(),
        beyond_ball_certified: d.beyond_ball_certified,
        stabilizer_assumption: d.stabilizer_assumption,
        obstruction: None,
    }
}

/// Loads a JSON array of matrix fixtures.
pub fn load_fixtures(path: &Path) -> Result<Vec<PushforwardMatrix>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let list: Vec<MatrixFixture> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(list.into_iter().map(PushforwardMatrix::from).collect())
}

fn oracle_exit(e: &PicardError) -> i32 {
    match e {
        PicardError::OracleInconclusive(_) => exit::ORACLE,
        PicardError::Postcondition(_) => exit::FAN,
        _ => exit::PARAMS,
    }
}

/// Oracle-calibrated matrices for every ordered pair.
pub fn calibrate_all(inst: &Instance, cfg: &OracleConfig) -> Result<Vec<PushforwardMatrix>, PicardError> {
    let big_n = inst.big_n();
    let mut out = Vec::new();
    for j in 0..=big_n {
        for i in (0..=big_n).filter(|&i| i != j) {
            out.push(calibrated_pushforward(&inst.tensor, j, i, cfg)?);
        }
    }
    Ok(out)
}

fn cmd_cone(inst: &Instance, opts: &ConeOptions, g: &GlobalArgs, ctx: &mut Ctx) -> i32 {
    let t = &inst.tensor;
    let big_n = t.big_n();
    if t.is_degenerate() && !g.force {
        return ctx.fail(exit::DEGENERATE, "instance is degenerate; rerun with --force to tile anyway");
    }
    let matrices = if let Some(path) = &opts.fixtures {
        match load_fixtures(path) {
            Ok(m) => m,
            Err(e) => return ctx.fail(exit::PARAMS, &e),
        }
    } else {
        let mode = opts.mode.unwrap_or(if t.n() == 1 { MatrixMode::Oracle } else { MatrixMode::Structural });
        match mode {
            MatrixMode::Structural => {
                ctx.warn("structural matrices are provisional (shared coefficients in [0, n] not calibrated)");
                match structural_set(t.n(), big_n) {
                    Ok(m) => m,
                    Err(e) => return ctx.fail(exit::PARAMS, &e.to_string()),
                }
            }
            MatrixMode::Oracle => match calibrate_all(inst, &opts.oracle) {
                Ok(m) => m,
                Err(e) => return ctx.fail(oracle_exit(&e), &e.to_string()),
            },
        }
    };
    let identity: Vec<Vec<i64>> = (0..big_n).map(|r| (0..big_n).map(|c| i64::from(r == c)).collect()).collect();
    if !matrices.is_empty() && matrices.iter().all(|m| m.matrix == identity) {
        ctx.warn("every matrix is the identity: trivial lattice action, wall checks skipped");
    } else {
        for m in &matrices {
            if let Err(e) = m.validate() {
                return ctx.fail(exit::FAN, &e.to_string());
            }
        }
    }
    let set = match PushforwardSet::new(big_n, &matrices) {
        Ok(s) => s,
        Err(e) => return ctx.fail(exit::FAN, &e.to_string()),
    };
    let cert = match chamber_bfs(&set, opts.depth) {
        Ok(c) => c,
        Err(e) => return ctx.fail(exit::FAN, &e.to_string()),
    };
    let out_dir = g.out.clone();
    let fixtures_json = to_json(&matrices.iter().map(MatrixFixture::from).collect::<Vec<_>>());
    if cert.status == TilingStatus::FrontierOpen {
        let file = certificate_file(&cert, &[]);
        if let Some(dir) = &out_dir {
            let _ = write_out(&dir.join("certificate.json"), &to_json(&file), ctx);
        }
        return ctx.fail(exit::DEPTH, &format!("frontier still open at depth limit {}", opts.depth));
    }
    let gens = match bir_generators(&cert, &set) {
        Ok(g) => g,
        Err(e) => return ctx.fail(exit::FAN, &e.to_string()),
    };
    let (domain, obstruction) = match fundamental_domain(&cert, opts.radius) {
        Ok(d) => (Some(d), None),
        Err(e @ ChamberError::StabilizerObstruction { .. }) => (None, Some(e.to_string())),
        Err(ChamberError::InconsistentFan(e)) => return ctx.fail(exit::FAN, &e),
        Err(e) => return ctx.fail(exit::PARAMS, &e.to_string()),
    };
    let cert_file = certificate_file(&cert, &gens);
    let dom_file = match &domain {
        Some(d) => domain_file(d),
        None => DomainFile {
            generators: Vec::new(),
            facets: Vec::new(),
            ball_radius: opts.radius,
            ball_size: 0,
            cuts: 0,
            certified: Vec::new(),
            beyond_ball_certified: false,
            stabilizer_assumption: false,
            obstruction: obstruction.clone(),
        },
    };
    if let Some(dir) = &out_dir {
        for (name, text) in [
            ("matrices.json", fixtures_json),
            ("certificate.json", to_json(&cert_file)),
            ("domain.json", to_json(&dom_file)),
        ] {
            if let Err(code) = write_out(&dir.join(name), &text, ctx) {
                return code;
            }
        }
    }
    let reps = cert.orbits.len();
    let mark = if reps <= big_n + 1 { "✓" } else { "✗" };
    ctx.say(&format!("orbits = {reps} (≤ N+1 {mark})"));
    ctx.say(&format!("generators = {}", gens.len()));
    ctx.say(&format!("chambers = {}, fan pairs checked = {}", cert.chambers.len(), cert.fan_pairs_checked));
    let infinite = gens.iter().filter(|x| x.order.is_none()).count();
    ctx.say(&format!("generator orders: {} finite, {} infinite", gens.len() - infinite, infinite));
    match &domain {
        Some(d) => {
            ctx.say(&format!("domain: {} generators, {} facets, ball B_{} of {} elements", d.cone.generators().len(), d.cone.facets().len(), d.ball_radius, d.ball_size));
            for c in &d.certified {
                ctx.say(&format!("  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail));
            }
            ctx.say("  disjointness beyond the ball is not certified");
        }
        None => ctx.warn(obstruction.as_deref().unwrap_or("no domain")),
    }
    if matrices.iter().any(|m| m.provenance == Provenance::Structural) {
        ctx.warn("result depends on provisional structural matrices");
    }
    exit::OK
}

fn cmd_oracle(inst: &Instance, flop: &str, cfg: &OracleConfig, g: &GlobalArgs, ctx: &mut Ctx) -> i32 {
    let t = &inst.tensor;
    let big_n = t.big_n();
    if t.n() != 1 {
        return ctx.fail(exit::PARAMS, &format!("oracle calibration needs n = 1 (got n = {})", t.n()));
    }
    if cfg.primes.len() < 2 && !g.allow_single {
        ctx.warn("single prime: results are not cross-checked (pass --allow-single to silence)");
    }
    let json = if flop == "all" {
        match calibrate_all(inst, cfg) {
            Ok(list) => to_json(&list.iter().map(MatrixFixture::from).collect::<Vec<_>>()),
            Err(e) => return ctx.fail(oracle_exit(&e), &e.to_string()),
        }
    } else {
        let parts: Vec<Option<usize>> = flop.split(',').map(|x| x.trim().parse().ok()).collect();
        let (j, i) = match parts.as_slice() {
            [Some(j), Some(i)] if *j <= big_n && *i <= big_n => (*j, *i),
            _ => return ctx.fail(exit::PARAMS, &format!("--flop must be `j,i` with labels in 0..={big_n}, or `all`")),
        };
        if j == i {
            // The empty word: identity.
            let id: Vec<Vec<i64>> = (0..big_n).map(|r| (0..big_n).map(|c| i64::from(r == c)).collect()).collect();
            to_json(&MatrixFixture { flop: [j, i], matrix: id, provenance: Provenance::OracleCalibrated, primes: cfg.primes.clone() })
        } else {
            let res = match degree_count_pullback(t, i, j, cfg) {
                Ok(r) => r,
                Err(e) => return ctx.fail(oracle_exit(&e), &e.to_string()),
            };
            for p in &res.per_prime {
                let _ = writeln!(
                    ctx.stderr,
                    "GF({}): class {:?} from {} slice(s), strict degrees {:?}, {} rejected",
                    p.prime,
                    p.class,
                    p.slices.len(),
                    p.slices.iter().map(|s| s.strict_degree).collect::<Vec<_>>(),
                    p.rejected_slices
                );
            }
            let m = match calibrated_pushforward(t, j, i, cfg) {
                Ok(m) => m,
                Err(e) => return ctx.fail(oracle_exit(&e), &e.to_string()),
            };
            to_json(&MatrixFixture::from(&m))
        }
    };
    match &g.out {
        Some(path) => {
            if let Err(code) = write_out(path, &json, ctx) {
                return code;
            }
            ctx.say(&format!("wrote {}", path.display()));
        }
        None => {
            let _ = write!(ctx.stdout, "{json}");
        }
    }
    exit::OK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { samples: Some(0), ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { primes: Some(vec![]), ..RunConfig::default() }.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"depth_limit": 2}"#).is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"depth": 2}"#).is_err());
    }

    #[test]
    fn parser_shapes() {
        let cli = Cli::try_parse_from(["detflop", "--threads", "2", "cone", "x.json", "--mode", "structural", "--radius", "3"]).unwrap();
        assert_eq!(cli.global.threads, Some(2));
        assert!(matches!(cli.command, Command::Cone { mode: Some(MatrixMode::Structural), radius: Some(3), .. }));
        let cli = Cli::try_parse_from(["detflop", "oracle", "x.json", "--flop", "all", "--primes", "7,11"]).unwrap();
        assert!(matches!(cli.command, Command::Oracle { primes: Some(ref p), .. } if p == &vec![7, 11]));
    }

    #[test]
    fn json_ends_with_newline() {
        assert_eq!(to_json(&vec![1, 2]), "[\n  1,\n  2\n]\n");
    }
}
