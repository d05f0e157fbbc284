//! The `acdc` command line.
//!
//! Exit codes: 0 success, 2 validation failure (including bad arguments),
//! 3 missing input, 4 pipeline error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use acdc_core::affordance::Skill;
use acdc_core::bundle::{validate_bundle, validate_db, validate_pair, validate_scene, Provenance, SelectorPath, Violation};
use acdc_core::metrics::{aggregate, render_table};
use acdc_core::scenegen::RandomizationSpec;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bundle_io::{read_bundle, read_bundle_unchecked, BUNDLE_MANIFEST};
use crate::config::RunConfig;
use crate::db_io::{read_asset_db, read_asset_db_unchecked, read_link_mesh, DB_MANIFEST};
use crate::error::IoError;
use crate::fsio::{read_json, to_json, write_atomic, write_json};
use crate::hash::{bundle_hash, db_hash, file_hash};
use crate::obj::push_box;
use crate::pipeline::{
    eval_scenes, generate_scene, link_trajectory, match_bundle, randomize, thread_pool, MatchFile, PipelineError,
};
use crate::scene_io::{read_scene, read_scene_unchecked, scene_to_string};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_MISSING_INPUT: i32 = 3;
pub const EXIT_PIPELINE: i32 = 4;

/// Environment variable naming the default asset database.
pub const ASSET_DB_ENV: &str = "ACDC_ASSET_DB";

#[derive(Debug, Parser)]
#[command(name = "acdc", version, about = "Digital-cousin scene compiler")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Asset database directory (default: config, then $ACDC_ASSET_DB).
    #[arg(long, global = true)]
    pub assets: Option<PathBuf>,
    /// Seed for every stochastic stage (RANSAC, randomization).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-object stages; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a bundle, asset database or scene against its invariants.
    Validate(ValidateArgs),
    /// Rank digital cousins for every object of a bundle.
    Match(MatchArgs),
    /// Compile a scene from a bundle and its matches.
    Generate(GenerateArgs),
    /// Jitter poses and scales, optionally swapping cousins.
    Randomize(RandomizeArgs),
    /// Compare a reconstructed scene against ground truth.
    Eval(EvalArgs),
    /// Open or close trajectory for one articulated link.
    Traj(TrajArgs),
    /// Write the scene's boxes as a Wavefront OBJ preview.
    ExportObj(ExportObjArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Bundle,
    Db,
    Scene,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Bundle directory, asset database directory or scene file.
    pub path: PathBuf,
    /// Input kind; detected from the path when omitted.
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Also write the report here.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Selector {
    /// Embedding-only selection.
    Dino,
    /// Honor the bundle's delegate sidecar.
    Sidecar,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Scene bundle directory.
    #[arg(long)]
    pub bundle: PathBuf,
    /// Matches file to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Categories kept per object.
    #[arg(long)]
    pub k_cat: Option<usize>,
    /// Models re-ranked into cousins per object.
    #[arg(long)]
    pub k_cand: Option<usize>,
    /// Cousins kept per object.
    #[arg(long)]
    pub k_cous: Option<usize>,
    /// Models offered to the delegate selector.
    #[arg(long)]
    pub k_model: Option<usize>,
    /// Orientation snapshots shortlisted per model.
    #[arg(long)]
    pub k_ori: Option<usize>,
    /// Fraction of largest patch distances dropped.
    #[arg(long)]
    pub trim: Option<f64>,
    /// How the final model is chosen.
    #[arg(long, value_enum)]
    pub selector: Option<Selector>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Scene bundle directory.
    #[arg(long)]
    pub bundle: PathBuf,
    /// Matches produced by `match` for this bundle.
    #[arg(long)]
    pub matches: PathBuf,
    /// Scene file to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// 1-based rank of the cousin to place.
    #[arg(long)]
    pub cousin_rank: Option<usize>,
    /// Compile report path (default: next to the scene).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RandomizeArgs {
    /// Scene to perturb.
    #[arg(long)]
    pub scene: PathBuf,
    /// Matches supplying the cousin lists for instance swaps.
    #[arg(long)]
    pub matches: Option<PathBuf>,
    /// Scene file to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Maximum planar offset in meters.
    #[arg(long)]
    pub xy_jitter: Option<f64>,
    /// Maximum yaw offset in radians.
    #[arg(long)]
    pub yaw_jitter: Option<f64>,
    /// Maximum relative scale change.
    #[arg(long)]
    pub scale_range: Option<f64>,
    /// Swap each asset for another ranked cousin.
    #[arg(long)]
    pub swap: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth scene.
    #[arg(long)]
    pub gt: PathBuf,
    /// Reconstructed scene.
    #[arg(long)]
    pub rec: PathBuf,
    /// Metrics file to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Plain-text table path (default: next to the metrics).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Row label in the table.
    #[arg(long, default_value = "scene")]
    pub name: String,
    /// Category evaluated modulo a half turn about z (repeatable).
    #[arg(long)]
    pub centrosymmetric: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SkillArg {
    Open,
    Close,
}

#[derive(Debug, Args)]
pub struct TrajArgs {
    /// Asset id.
    #[arg(long)]
    pub asset: String,
    /// Articulated link name.
    #[arg(long)]
    pub link: String,
    /// Open or close the link.
    #[arg(long, value_enum)]
    pub skill: SkillArg,
    /// Number of waypoints.
    #[arg(long)]
    pub waypoints: Option<usize>,
    /// Trajectory file to write.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportObjArgs {
    /// Scene to export.
    #[arg(long)]
    pub scene: PathBuf,
    /// OBJ file to write.
    #[arg(short, long)]
    pub out: PathBuf,
}

/// A failed command: exit code plus message.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = match e {
            IoError::MissingFile { .. } => EXIT_MISSING_INPUT,
            IoError::Io { .. } => EXIT_MISSING_INPUT,
            _ => EXIT_VALIDATION,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError {
            code: EXIT_PIPELINE,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_VALIDATION,
        message: message.into(),
    }
}

/// Provenance of a successful command. Everything but `wall_clock` is a
/// function of the inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    /// SHA-256 of each input, keyed by role.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each output, keyed by role.
    pub outputs: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub wall_clock: WallClock,
}

#[derive(Debug, Serialize)]
pub struct WallClock {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

/// `scene.json` + `.report.json` -> `scene.report.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".json").unwrap_or(&name);
    path.with_file_name(format!("{stem}{suffix}"))
}

struct Run {
    command: &'static str,
    cfg: RunConfig,
    seed: u64,
    threads: usize,
    started: SystemTime,
    clock: Instant,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Run {
    fn input(&mut self, role: &str, hash: String) {
        self.inputs.insert(role.into(), hash);
    }

    fn output(&mut self, role: &str, bytes: &[u8]) {
        use sha2::{Digest, Sha256};
        self.outputs.insert(role.into(), hex::encode(Sha256::digest(bytes)));
    }

    fn put(&mut self, role: &str, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(path, bytes)?;
        self.output(role, bytes);
        Ok(())
    }

    fn manifest(self) -> RunManifest {
        RunManifest {
            command: self.command.into(),
            config: serde_json::to_value(&self.cfg).expect("config serializes"),
            inputs: self.inputs,
            outputs: self.outputs,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_clock: WallClock {
                started_unix_ms: self.started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
                elapsed_ms: self.clock.elapsed().as_millis(),
            },
        }
    }

    fn finish(self, out: &Path) -> Result<(), CliError> {
        write_json(&sibling(out, ".run.json"), &self.manifest())?;
        Ok(())
    }
}

fn assets_dir(cli_assets: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cli_assets
        .clone()
        .or_else(|| cfg.assets.clone())
        .or_else(|| std::env::var_os(ASSET_DB_ENV).map(PathBuf::from))
        .ok_or_else(|| CliError {
            code: EXIT_MISSING_INPUT,
            message: format!("no asset database: pass --assets, set it in the config, or set {ASSET_DB_ENV}"),
        })
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Runs a parsed command. `Ok` carries the exit code, which is
/// [`EXIT_VALIDATION`] when `validate` finds violations.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    cfg.seed = Some(seed);
    cfg.threads = Some(threads);
    cfg.compile.ransac.seed = seed;
    cfg.randomize.seed = seed;
    let mut run = Run {
        command: "",
        cfg,
        seed,
        threads,
        started: SystemTime::now(),
        clock: Instant::now(),
        inputs: BTreeMap::new(),
        outputs: BTreeMap::new(),
    };
    match cli.command {
        Command::Validate(a) => {
            run.command = "validate";
            cmd_validate(run, &cli.assets, a)
        }
        Command::Match(a) => {
            run.command = "match";
            cmd_match(run, &cli.assets, a).map(|_| 0)
        }
        Command::Generate(a) => {
            run.command = "generate";
            cmd_generate(run, &cli.assets, a).map(|_| 0)
        }
        Command::Randomize(a) => {
            run.command = "randomize";
            cmd_randomize(run, &cli.assets, a).map(|_| 0)
        }
        Command::Eval(a) => {
            run.command = "eval";
            cmd_eval(run, &cli.assets, a).map(|_| 0)
        }
        Command::Traj(a) => {
            run.command = "traj";
            cmd_traj(run, &cli.assets, a).map(|_| 0)
        }
        Command::ExportObj(a) => {
            run.command = "export-obj";
            cmd_export_obj(run, &cli.assets, a).map(|_| 0)
        }
    }
}

#[derive(Debug, Serialize)]
struct ViolationJson {
    code: &'static str,
    path: String,
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    kind: Kind,
    valid: bool,
    violations: Vec<ViolationJson>,
    run: RunManifest,
}

fn detect_kind(path: &Path) -> Kind {
    if path.join(BUNDLE_MANIFEST).is_file() {
        Kind::Bundle
    } else if path.join(DB_MANIFEST).is_file() {
        Kind::Db
    } else {
        Kind::Scene
    }
}

fn cmd_validate(mut run: Run, assets: &Option<PathBuf>, a: ValidateArgs) -> Result<i32, CliError> {
    let kind = a.kind.unwrap_or_else(|| detect_kind(&a.path));
    let mut violations: Vec<Violation> = match kind {
        Kind::Bundle => {
            let b = read_bundle_unchecked(&a.path)?;
            run.input("bundle", bundle_hash(&a.path)?);
            let mut v = validate_bundle(&b);
            // cross-check against a database only when one was named explicitly
            if let Some(dir) = assets.clone().or_else(|| run.cfg.assets.clone()) {
                let db = read_asset_db_unchecked(&dir)?;
                run.input("assets", db_hash(&dir)?);
                v.extend(validate_pair(&b, &db));
            }
            v
        }
        Kind::Db => {
            let db = read_asset_db_unchecked(&a.path)?;
            run.input("assets", db_hash(&a.path)?);
            validate_db(&db)
        }
        Kind::Scene => {
            let s = read_scene_unchecked(&a.path)?;
            run.input("scene", file_hash(&a.path)?);
            validate_scene(&s)
        }
    };
    violations.sort();
    let valid = violations.is_empty();
    let report = ValidationReport {
        kind,
        valid,
        violations: violations
            .iter()
            .map(|v| ViolationJson {
                code: v.code.as_str(),
                path: v.path.clone(),
            })
            .collect(),
        run: run.manifest(),
    };
    let text = to_json(&report);
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
    }
    print!("{text}");
    for v in &violations {
        eprintln!("{v}");
    }
    Ok(if valid { 0 } else { EXIT_VALIDATION })
}

fn cmd_match(mut run: Run, assets: &Option<PathBuf>, a: MatchArgs) -> Result<(), CliError> {
    let m = &mut run.cfg.matching;
    let overrides = [
        (&mut m.k_cat, a.k_cat),
        (&mut m.k_cand, a.k_cand),
        (&mut m.k_cous, a.k_cous),
        (&mut m.k_model, a.k_model),
        (&mut m.k_ori, a.k_ori),
    ];
    for (slot, v) in overrides {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(t) = a.trim {
        m.trim_fraction = t;
    }
    if let Some(s) = a.selector {
        m.selector_path = match s {
            Selector::Dino => SelectorPath::EmbeddingOnly,
            Selector::Sidecar => SelectorPath::Delegate,
        };
    }
    m.check().map_err(|e| usage(e.to_string()))?;
    let db_dir = assets_dir(assets, &run.cfg)?;
    let bundle = read_bundle(&a.bundle)?;
    let db = read_asset_db(&db_dir)?;
    let pair = validate_pair(&bundle, &db);
    if !pair.is_empty() {
        return Err(IoError::Invalid {
            what: "bundle and asset db".into(),
            violations: pair,
        }
        .into());
    }
    let hash = bundle_hash(&a.bundle)?;
    run.input("bundle", hash.clone());
    run.input("assets", db_hash(&db_dir)?);
    let pool = thread_pool(run.threads);
    let matches = match_bundle(&bundle, &db, &run.cfg.matching, &pool)?;
    let file = MatchFile {
        bundle_hash: hash,
        config: run.cfg.matching.clone(),
        matches,
    };
    for m in &file.matches {
        for w in &m.warnings {
            eprintln!("warning: object {}: {}: {}", m.object_id, w.stage, w.message);
        }
    }
    run.put("matches", &a.out, to_json(&file).as_bytes())?;
    run.finish(&a.out)
}

fn cmd_generate(mut run: Run, assets: &Option<PathBuf>, a: GenerateArgs) -> Result<(), CliError> {
    if let Some(r) = a.cousin_rank {
        run.cfg.compile.cousin_rank = r;
    }
    if run.cfg.compile.cousin_rank == 0 {
        return Err(usage("--cousin-rank is 1-based"));
    }
    let db_dir = assets_dir(assets, &run.cfg)?;
    let bundle = read_bundle(&a.bundle)?;
    let db = read_asset_db(&db_dir)?;
    let matches: MatchFile = read_json(&a.matches)?;
    let hash = bundle_hash(&a.bundle)?;
    if matches.bundle_hash != hash {
        return Err(usage(format!(
            "{} was computed for a different bundle",
            a.matches.display()
        )));
    }
    run.input("bundle", hash.clone());
    run.input("assets", db_hash(&db_dir)?);
    run.input("matches", file_hash(&a.matches)?);
    let provenance = Provenance {
        bundle_hash: hash,
        selector_path: matches.config.selector_path,
        seed: run.seed,
    };
    let pool = thread_pool(run.threads);
    let compiled = generate_scene(&bundle, &matches.matches, &db, &run.cfg.compile, provenance, &pool)?;
    for w in &compiled.report.warnings {
        let obj = w.object_id.as_deref().map(|o| format!("object {o}: ")).unwrap_or_default();
        eprintln!("warning: {obj}{}: {}", w.stage, w.message);
    }
    let report = a.report.unwrap_or_else(|| sibling(&a.out, ".report.json"));
    run.put("scene", &a.out, scene_to_string(&compiled.scene).as_bytes())?;
    run.put("report", &report, to_json(&compiled.report).as_bytes())?;
    run.finish(&a.out)
}

#[derive(Debug, Serialize)]
struct RandomizeReport<'a> {
    spec: &'a RandomizationSpec,
    /// (object, old asset, new asset)
    swaps: &'a [(String, String, String)],
    post: &'a acdc_core::scenegen::PostReport,
}

fn cmd_randomize(mut run: Run, assets: &Option<PathBuf>, a: RandomizeArgs) -> Result<(), CliError> {
    let spec = &mut run.cfg.randomize;
    if let Some(v) = a.xy_jitter {
        spec.xy_jitter = v;
    }
    if let Some(v) = a.yaw_jitter {
        spec.yaw_jitter = v;
    }
    if let Some(v) = a.scale_range {
        spec.scale_range = v;
    }
    spec.instance_swap |= a.swap;
    if spec.instance_swap && a.matches.is_none() {
        return Err(usage("instance swaps need --matches"));
    }
    let db_dir = assets_dir(assets, &run.cfg)?;
    let scene = read_scene(&a.scene)?;
    let db = read_asset_db(&db_dir)?;
    run.input("scene", file_hash(&a.scene)?);
    run.input("assets", db_hash(&db_dir)?);
    let matches = match &a.matches {
        Some(p) => {
            run.input("matches", file_hash(p)?);
            read_json::<MatchFile>(p)?.matches
        }
        None => Vec::new(),
    };
    let out = randomize(&scene, &run.cfg.randomize, &matches, &db, &run.cfg.compile.post)?;
    let report = RandomizeReport {
        spec: &run.cfg.randomize,
        swaps: &out.swaps,
        post: &out.post,
    };
    let report_text = to_json(&report);
    run.put("scene", &a.out, scene_to_string(&out.scene).as_bytes())?;
    run.put("report", &sibling(&a.out, ".report.json"), report_text.as_bytes())?;
    run.finish(&a.out)
}

fn cmd_eval(mut run: Run, assets: &Option<PathBuf>, a: EvalArgs) -> Result<(), CliError> {
    run.cfg.eval.centrosymmetric.extend(a.centrosymmetric);
    run.cfg.eval.centrosymmetric.sort();
    run.cfg.eval.centrosymmetric.dedup();
    let db_dir = assets_dir(assets, &run.cfg)?;
    let gt = read_scene(&a.gt)?;
    let rec = read_scene(&a.rec)?;
    let db = read_asset_db(&db_dir)?;
    run.input("gt", file_hash(&a.gt)?);
    run.input("rec", file_hash(&a.rec)?);
    run.input("assets", db_hash(&db_dir)?);
    let report = eval_scenes(&gt, &rec, &db, &run.cfg.eval.table())?;
    let table = render_table(&aggregate(&[(a.name, report.clone())]));
    let table_path = a.table.unwrap_or_else(|| sibling(&a.out, ".table.txt"));
    run.put("metrics", &a.out, to_json(&report).as_bytes())?;
    run.put("table", &table_path, table.as_bytes())?;
    print!("{table}");
    run.finish(&a.out)
}

fn cmd_traj(mut run: Run, assets: &Option<PathBuf>, a: TrajArgs) -> Result<(), CliError> {
    if let Some(n) = a.waypoints {
        run.cfg.traj.waypoints = n;
    }
    let db_dir = assets_dir(assets, &run.cfg)?;
    let db = read_asset_db(&db_dir)?;
    let asset = db.get(&a.asset).ok_or_else(|| CliError {
        code: EXIT_MISSING_INPUT,
        message: format!("asset {} is not in {}", a.asset, db_dir.display()),
    })?;
    let link = asset.link(&a.link).ok_or_else(|| CliError {
        code: EXIT_MISSING_INPUT,
        message: format!("asset {} has no link {}", a.asset, a.link),
    })?;
    let mesh = read_link_mesh(&db_dir, asset, &a.link)?;
    run.input("assets", db_hash(&db_dir)?);
    let skill = match a.skill {
        SkillArg::Open => Skill::Open,
        SkillArg::Close => Skill::Close,
    };
    let traj = link_trajectory(
        &asset.id,
        &mesh,
        link.front_axis,
        skill,
        run.cfg.traj.waypoints,
        &run.cfg.traj.handle,
    )?;
    run.put("trajectory", &a.out, to_json(&traj).as_bytes())?;
    run.finish(&a.out)
}

fn cmd_export_obj(mut run: Run, assets: &Option<PathBuf>, a: ExportObjArgs) -> Result<(), CliError> {
    let db_dir = assets_dir(assets, &run.cfg)?;
    let scene = read_scene(&a.scene)?;
    let db = read_asset_db(&db_dir)?;
    run.input("scene", file_hash(&a.scene)?);
    run.input("assets", db_hash(&db_dir)?);
    let mut text = String::from("# acdc scene preview: one box per placed object\n");
    let mut base = 0;
    for o in &scene.objects {
        let body = acdc_core::scenegen::Body::of(o, &db).map_err(|source| PipelineError::Scene {
            stage: "export_obj",
            source,
        })?;
        let name: String = o
            .source_object_id
            .chars()
            .map(|c| if c.is_whitespace() { '_' } else { c })
            .collect();
        base = push_box(&mut text, &name, &body.bbox, base);
    }
    run.put("mesh", &a.out, text.as_bytes())?;
    run.finish(&a.out)
}
