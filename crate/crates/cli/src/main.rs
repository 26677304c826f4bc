//! `nea`: search, fit, evaluate, render and export neural-enhanced
//! analytical BRDFs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nea::brdf::AnalyticalParams;
use nea::data::{
    gen_corrupted_ggx, gen_synthetic_ggx, merl_to_sampleset, planted_materials, read_merl, read_sampleset,
    write_sampleset, Corruption, Noise, SampleSet, SamplingMode,
};
use nea::graph::{graph_by_name, EnhancedModel, DEFAULT_P_NEURAL};
use nea::optimize::{loss_log_l1, TrainConfig};
use nea::runtime::{
    export_shader, fit_material, load_model, save_model, render_slice, FitConfig, FitResult, SliceMode,
};
use nea::search::{SearchConfig, SearchRun};

/// Samples per material for inline `synthetic:` and `merl:` data.
const DEFAULT_INLINE_SAMPLES: usize = 10_000;

#[derive(Parser, Debug)]
#[command(name = "nea", version, about = "Neural-enhanced analytical BRDFs")]
struct Cli {
    /// Master seed for data generation, initialization and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, env = "NEAM_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "info")]
    log_level: LevelFilter,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Search for the enhancement state that best fits the data.
    Enhance(EnhanceArgs),
    /// Fit one material's parameters with the model weights frozen.
    Fit(FitArgs),
    /// Report the loss of a fitted material on a data set.
    Eval(EvalArgs),
    /// Render a cosine-weighted BRDF slice to PFM.
    Slice(SliceArgs),
    /// Write the model and a fitted material as shader source.
    Export(ExportArgs),
    /// Generate synthetic sample files.
    Gen(GenArgs),
    /// Inspect or sample a MERL binary table.
    Merl(MerlArgs),
}

#[derive(Args, Debug)]
struct EnhanceArgs {
    /// ggx, cooktorrance, ward, toy-fresnel or toy-lambert-fresnel.
    #[arg(long, default_value = "ggx")]
    model: String,
    /// Sample file, `merl:<path>[@n]` or `synthetic:<spec>[@n]`; repeatable.
    #[arg(long, required = true)]
    data: Vec<String>,
    #[arg(long, default_value_t = 30)]
    epochs_per_stage: usize,
    #[arg(long, default_value_t = 30)]
    warmup_epochs: usize,
    /// Hamming radius of the candidate neighbourhood.
    #[arg(long, default_value_t = 1)]
    threshold: usize,
    #[arg(long)]
    max_modules: Option<usize>,
    /// Pin a slot, e.g. `F=1` or `3=0`; repeatable.
    #[arg(long = "fix-bit")]
    fix_bit: Vec<String>,
    #[arg(long, default_value_t = 20)]
    max_stages: usize,
    #[arg(long, default_value_t = 250)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Fraction of each material's samples held out for selection.
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,
    #[arg(long, default_value_t = DEFAULT_P_NEURAL)]
    p_neural: usize,
    #[arg(long)]
    out: PathBuf,
    /// Directory for a resumable checkpoint, written after every stage.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Model file, or `analytical:<name>` for an unmodified graph.
    #[arg(long)]
    model: String,
    #[arg(long)]
    data: Vec<String>,
    /// Material id to fit when the data holds several.
    #[arg(long)]
    material: Option<String>,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    data: Vec<String>,
    #[arg(long)]
    material: Option<String>,
}

#[derive(Args, Debug)]
struct SliceArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    fit: PathBuf,
    /// View direction `theta,phi` in degrees; omit for a theta_h x theta_d slice.
    #[arg(long)]
    wo: Option<String>,
    #[arg(long, default_value_t = 256)]
    res: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// `ggx` or `corrupted:{fresnel|dielectric|geometry|norm}`.
    #[arg(long, default_value = "ggx")]
    kind: String,
    #[arg(long, default_value_t = 4)]
    materials: usize,
    #[arg(long, default_value_t = DEFAULT_INLINE_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// `iso` (three angles) or `aniso` (four angles).
    #[arg(long, default_value = "iso")]
    mode: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MerlArgs {
    /// Print a summary of a table.
    #[arg(long, conflicts_with = "to_sampleset")]
    info: Option<PathBuf>,
    /// `<table> <n> <out>`: sample `n` pairs into a sample file.
    #[arg(long, num_args = 3, value_names = ["TABLE", "N", "OUT"])]
    to_sampleset: Option<Vec<String>>,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<nea::Error> for Failure {
    fn from(e: nea::Error) -> Self {
        use nea::Error as E;
        let m = e.to_string();
        match e {
            E::NonFinite(_) => Failure::Numerical(m),
            E::OutOfRange(_) | E::RefusedTooLarge(_) | E::InvalidGraph(_) => Failure::Usage(m),
            E::DimensionMismatch { .. }
            | E::BadHeader(_)
            | E::BadMagic { .. }
            | E::VersionUnsupported(_)
            | E::Truncated(_)
            | E::ChecksumMismatch(_)
            | E::Parse(_)
            | E::Io(_) => Failure::Data(m),
        }
    }
}

type Out<T = ()> = std::result::Result<T, Failure>;

/// Attaches the file name to I/O errors.
fn at(path: impl AsRef<Path>) -> impl FnOnce(nea::Error) -> Failure {
    move |e| match e {
        nea::Error::Io(io) => Failure::Data(format!("{}: {io}", path.as_ref().display())),
        e => Failure::from(e),
    }
}

/// Every failure while reading input data is a data error.
fn bad_data(path: impl AsRef<Path>) -> impl FnOnce(nea::Error) -> Failure {
    move |e| Failure::Data(format!("{}: {e}", path.as_ref().display()))
}

fn check_lr(lr: f64) -> Out {
    if lr.is_finite() && lr > 0.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--lr {lr} must be positive and finite")))
    }
}

/// Effective configuration as a replayable command line.
struct Echo(String);

impl Echo {
    fn new(cli: &Cli, threads: usize, sub: &str) -> Self {
        Echo(format!(
            "nea --seed {} --threads {threads} --log-level {} {sub}",
            cli.seed,
            cli.log_level.to_string().to_lowercase()
        ))
    }

    fn arg(&mut self, k: &str, v: impl std::fmt::Display) -> &mut Self {
        let _ = write!(self.0, " --{k} {v}");
        self
    }

    fn opt<T: std::fmt::Display>(&mut self, k: &str, v: &Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.arg(k, v);
        }
        self
    }

    fn print(&self) {
        println!("# {}", self.0);
    }
}

fn parse_seed_suffix(spec: &str) -> Out<(&str, usize)> {
    match spec.rsplit_once('@') {
        Some((s, n)) => Ok((
            s,
            n.parse()
                .map_err(|_| Failure::Usage(format!("bad sample count in {spec:?}")))?,
        )),
        None => Ok((spec, DEFAULT_INLINE_SAMPLES)),
    }
}

/// Resolves one `--data` entry.
fn load_data(spec: &str, seed: u64) -> Out<Vec<SampleSet>> {
    if let Some(rest) = spec.strip_prefix("synthetic:") {
        let (name, n) = parse_seed_suffix(rest)?;
        let mats = planted_materials();
        let mode = SamplingMode::Isotropic3Angle;
        return match name {
            "ggx" | "planted-ggx" => Ok(gen_synthetic_ggx(&mats, n, mode, Noise::NONE, seed)),
            _ => {
                let c = name
                    .strip_prefix("planted-")
                    .and_then(|c| c.parse::<Corruption>().ok())
                    .ok_or_else(|| {
                        Failure::Usage(format!(
                            "unknown synthetic spec {name:?}; expected ggx or planted-{{fresnel|dielectric|geometry|norm}}"
                        ))
                    })?;
                Ok(gen_corrupted_ggx(&mats, c, n, mode, Noise::NONE, seed))
            }
        };
    }
    if let Some(rest) = spec.strip_prefix("merl:") {
        let (path, n) = parse_seed_suffix(rest)?;
        let table = read_merl(path).map_err(bad_data(path))?;
        let id = Path::new(path).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(vec![merl_to_sampleset(&table, &id, n, seed)]);
    }
    Ok(vec![read_sampleset(spec).map_err(bad_data(spec))?])
}

fn load_all(specs: &[String], seed: u64) -> Out<Vec<SampleSet>> {
    if specs.is_empty() {
        return Err(Failure::Usage("no --data given".into()));
    }
    let mut out = Vec::new();
    for s in specs {
        out.extend(load_data(s, seed)?);
    }
    if let Some(s) = out.iter().find(|s| s.is_empty()) {
        return Err(Failure::Data(format!("material {:?} has no samples", s.material_id)));
    }
    Ok(out)
}

fn pick_material(sets: Vec<SampleSet>, id: &Option<String>) -> Out<SampleSet> {
    let ids: Vec<String> = sets.iter().map(|s| s.material_id.clone()).collect();
    match id {
        Some(id) => sets
            .into_iter()
            .find(|s| &s.material_id == id)
            .ok_or_else(|| Failure::Usage(format!("no material {id:?}; have {ids:?}"))),
        None if sets.len() == 1 => Ok(sets.into_iter().next().unwrap()),
        None => Err(Failure::Usage(format!("data holds {} materials {ids:?}; pick one with --material", sets.len()))),
    }
}

fn load_model_arg(s: &str) -> Out<EnhancedModel> {
    match s.strip_prefix("analytical:") {
        Some(name) => Ok(EnhancedModel::analytical(graph_by_name(name).map_err(|e| Failure::Usage(e.to_string()))?, DEFAULT_P_NEURAL)),
        None => load_model(s).map_err(bad_data(s)),
    }
}

fn load_fit(path: &Path, model: &EnhancedModel) -> Out<FitResult> {
    let fit = FitResult::from_text(&fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?)?;
    if fit.neural.len() != model.p_neural {
        return Err(Failure::Data(format!(
            "fit has {} neural parameters, model expects {}",
            fit.neural.len(),
            model.p_neural
        )));
    }
    Ok(fit)
}

fn write_text(path: &Option<PathBuf>, text: &str) -> Out {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Data(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn enhance(cli: &Cli, a: &EnhanceArgs, threads: usize) -> Out {
    let graph = graph_by_name(&a.model).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut fixed_bits = Vec::new();
    for f in &a.fix_bit {
        let (slot, v) = f
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--fix-bit expects slot=0|1, got {f:?}")))?;
        let slot = graph.parse_slot(slot).map_err(|e| Failure::Usage(e.to_string()))?;
        let v = match v {
            "0" => false,
            "1" => true,
            _ => return Err(Failure::Usage(format!("--fix-bit value must be 0 or 1, got {v:?}"))),
        };
        fixed_bits.push((slot, v));
    }
    if !(0.0..1.0).contains(&a.holdout) {
        return Err(Failure::Usage(format!("--holdout {} outside [0, 1)", a.holdout)));
    }
    check_lr(a.lr)?;
    if a.batch_size == 0 {
        return Err(Failure::Usage("--batch-size must be positive".into()));
    }
    let mut echo = Echo::new(cli, threads, "enhance");
    echo.arg("model", &a.model);
    for d in &a.data {
        echo.arg("data", d);
    }
    echo.arg("epochs-per-stage", a.epochs_per_stage)
        .arg("warmup-epochs", a.warmup_epochs)
        .arg("threshold", a.threshold)
        .opt("max-modules", &a.max_modules);
    for f in &a.fix_bit {
        echo.arg("fix-bit", f);
    }
    echo.arg("max-stages", a.max_stages)
        .arg("batch-size", a.batch_size)
        .arg("lr", a.lr)
        .arg("holdout", a.holdout)
        .arg("p-neural", a.p_neural)
        .arg("out", a.out.display())
        .opt("checkpoint", &a.checkpoint.as_ref().map(|p| p.display()))
        .opt("report", &a.report.as_ref().map(|p| p.display()));
    echo.print();

    let data = load_all(&a.data, cli.seed)?;
    let cfg = SearchConfig {
        hamming_threshold: a.threshold,
        epochs_per_stage: a.epochs_per_stage,
        warmup_epochs: a.warmup_epochs,
        max_modules: a.max_modules,
        fixed_bits,
        max_stages: a.max_stages,
        p_neural: a.p_neural,
        ..SearchConfig::default()
    };
    let tcfg = TrainConfig {
        batch_size: a.batch_size,
        lr: a.lr,
        seed: cli.seed,
        holdout: a.holdout,
        ..TrainConfig::default()
    };
    let ckpt = match &a.checkpoint {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
            Some(dir.join("search.neac"))
        }
        None => None,
    };
    let mut run = match &ckpt {
        Some(p) if p.exists() => {
            log::info!("resuming from {}", p.display());
            let bytes = fs::read(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            SearchRun::resume(graph.clone(), &data, &cfg, &tcfg, &bytes)?
        }
        _ => SearchRun::new(graph.clone(), &data, &cfg, &tcfg)?,
    };
    while !run.step()? {
        if let Some(p) = &ckpt {
            run.save_checkpoint(p)?;
        }
    }
    if let Some(p) = &ckpt {
        run.save_checkpoint(p)?;
    }
    let res = run.into_result();
    let mut report = format!(
        "model {}\nmaterials {}\nsamples {}\n",
        a.model,
        data.len(),
        data.iter().map(SampleSet::len).sum::<usize>()
    );
    report += &res.trace.report(&graph);
    let _ = writeln!(report, "final_state {}", res.model.state);
    let _ = writeln!(report, "final_model {}", res.model.describe());
    let _ = writeln!(report, "final_val_loss {:.9e}", res.val_loss);
    let _ = writeln!(report, "modules {}", res.model.modules.len());
    let _ = writeln!(report, "weights {}", res.model.total_weights());
    print!("{report}");
    if let Some(p) = &a.report {
        fs::write(p, format!("# {}\n{report}", echo.0)).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
    }
    if !res.val_loss.is_finite() {
        return Err(Failure::Numerical("search ended with a non-finite loss".into()));
    }
    save_model(&res.model, &a.out).map_err(at(&a.out))?;
    Ok(())
}

fn fit(cli: &Cli, a: &FitArgs, threads: usize) -> Out {
    let mut echo = Echo::new(cli, threads, "fit");
    echo.arg("model", &a.model);
    for d in &a.data {
        echo.arg("data", d);
    }
    echo.opt("material", &a.material)
        .arg("epochs", a.epochs)
        .arg("lr", a.lr)
        .opt("out", &a.out.as_ref().map(|p| p.display()));
    echo.print();
    check_lr(a.lr)?;
    let model = load_model_arg(&a.model)?;
    let set = pick_material(load_all(&a.data, cli.seed)?, &a.material)?;
    let cfg = FitConfig {
        epochs: a.epochs,
        lr: a.lr,
        seed: cli.seed,
    };
    let f = fit_material(&model, &set, &cfg)?;
    if !f.final_loss.is_finite() {
        return Err(Failure::Numerical(format!("fit of {:?} diverged", set.material_id)));
    }
    log::info!("fitted {} in {} epochs, loss {:.6e}", set.material_id, f.epochs_run, f.final_loss);
    let text = format!("# material {}\n{}", set.material_id, f.to_text());
    write_text(&a.out, &text)
}

fn eval(cli: &Cli, a: &EvalArgs, threads: usize) -> Out {
    let mut echo = Echo::new(cli, threads, "eval");
    echo.arg("model", &a.model).arg("fit", a.fit.display());
    for d in &a.data {
        echo.arg("data", d);
    }
    echo.opt("material", &a.material);
    echo.print();
    let model = load_model_arg(&a.model)?;
    let f = load_fit(&a.fit, &model)?;
    let set = pick_material(load_all(&a.data, cli.seed)?, &a.material)?;
    let (mut loss, mut log_err) = (0.0, 0.0);
    for s in &set.samples {
        let p = f.eval(&model, &s.wi, &s.wo)?;
        loss += loss_log_l1(&p, &s.value, s.wi.z());
        log_err += (0..3).map(|c| ((1.0 + p[c]).ln() - (1.0 + s.value[c]).ln()).abs()).sum::<f64>() / 3.0;
    }
    let n = set.len() as f64;
    let (loss, log_err) = (loss / n, log_err / n);
    println!("material={}", set.material_id);
    println!("samples={}", set.len());
    println!("mean_loss={loss:.9e}");
    println!("mean_abs_log_error={log_err:.9e}");
    if !loss.is_finite() || !log_err.is_finite() {
        return Err(Failure::Numerical("non-finite loss".into()));
    }
    Ok(())
}

fn slice(cli: &Cli, a: &SliceArgs, threads: usize) -> Out {
    let mut echo = Echo::new(cli, threads, "slice");
    echo.arg("model", &a.model)
        .arg("fit", a.fit.display())
        .opt("wo", &a.wo)
        .arg("res", a.res)
        .arg("out", a.out.display());
    echo.print();
    let mode = match &a.wo {
        Some(s) => {
            let v: Vec<f64> = s
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Failure::Usage(format!("--wo expects theta,phi in degrees, got {s:?}")))?;
            if v.len() != 2 || !(0.0..90.0).contains(&v[0]) {
                return Err(Failure::Usage(format!("--wo expects theta in [0, 90) and phi, got {s:?}")));
            }
            SliceMode::FixedWo {
                theta: v[0].to_radians(),
                phi: v[1].to_radians(),
            }
        }
        None => SliceMode::ThetaHThetaD,
    };
    let model = load_model_arg(&a.model)?;
    let f = load_fit(&a.fit, &model)?;
    let img = render_slice(&model, &f, mode, a.res, &a.out).map_err(at(&a.out))?;
    let max = img.data.iter().flatten().fold(0f32, |m, v| m.max(*v));
    let mean = img.data.iter().flatten().map(|v| *v as f64).sum::<f64>() / (3 * img.data.len()) as f64;
    println!("width={}\nheight={}\nmax={max:.6e}\nmean={mean:.6e}", img.width, img.height);
    if !img.data.iter().flatten().all(|v| v.is_finite()) {
        return Err(Failure::Numerical("slice contains non-finite pixels".into()));
    }
    Ok(())
}

fn export(cli: &Cli, a: &ExportArgs, threads: usize) -> Out {
    let mut echo = Echo::new(cli, threads, "export");
    echo.arg("model", &a.model).arg("fit", a.fit.display()).arg("out", a.out.display());
    echo.print();
    let model = load_model_arg(&a.model)?;
    let f = load_fit(&a.fit, &model)?;
    export_shader(&model, &f, &a.out).map_err(at(&a.out))?;
    println!("params={}\nweights={}", f.param_count(), model.total_weights());
    Ok(())
}

fn random_material(rng: &mut ChaCha8Rng) -> AnalyticalParams {
    let d = rng.random_range(0.0..0.3);
    let s = rng.random_range(0.2..1.0);
    AnalyticalParams::isotropic(
        [d, d * rng.random_range(0.5..1.0), d * rng.random_range(0.5..1.0)],
        [s, s, s],
        rng.random_range(0.05..0.6),
        rng.random_range(0.02..0.2),
    )
}

fn gen(cli: &Cli, a: &GenArgs, threads: usize) -> Out {
    let mut echo = Echo::new(cli, threads, "gen");
    echo.arg("kind", &a.kind)
        .arg("materials", a.materials)
        .arg("samples", a.samples)
        .arg("noise-sigma", a.noise_sigma)
        .arg("mode", &a.mode)
        .arg("out", a.out.display());
    echo.print();
    let mode = match a.mode.as_str() {
        "iso" => SamplingMode::Isotropic3Angle,
        "aniso" => SamplingMode::Anisotropic4Angle,
        m => return Err(Failure::Usage(format!("--mode must be iso or aniso, got {m:?}"))),
    };
    if !(a.noise_sigma >= 0.0 && a.noise_sigma.is_finite()) {
        return Err(Failure::Usage(format!("--noise-sigma {} must be finite and >= 0", a.noise_sigma)));
    }
    let noise = Noise {
        mu: 1.0,
        sigma: a.noise_sigma,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut mats = planted_materials();
    mats.truncate(a.materials);
    while mats.len() < a.materials {
        mats.push(random_material(&mut rng));
    }
    let sets = match a.kind.as_str() {
        "ggx" => gen_synthetic_ggx(&mats, a.samples, mode, noise, cli.seed),
        k => {
            let c = k
                .strip_prefix("corrupted:")
                .and_then(|c| c.parse::<Corruption>().ok())
                .ok_or_else(|| Failure::Usage(format!("unknown --kind {k:?}")))?;
            gen_corrupted_ggx(&mats, c, a.samples, mode, noise, cli.seed)
        }
    };
    fs::create_dir_all(&a.out).map_err(|e| Failure::Data(format!("{}: {e}", a.out.display())))?;
    for (s, p) in sets.iter().zip(&mats) {
        let path = a.out.join(format!("{}.neas", s.material_id));
        write_sampleset(s, &path).map_err(at(&path))?;
        let params: Vec<String> = p.to_array().iter().map(|v| format!("{v:.4}")).collect();
        println!("{} {} [{}]", path.display(), s.len(), params.join(", "));
    }
    Ok(())
}

fn merl(cli: &Cli, a: &MerlArgs, threads: usize) -> Out {
    let mut echo = Echo::new(cli, threads, "merl");
    echo.opt("info", &a.info.as_ref().map(|p| p.display()))
        .opt("to-sampleset", &a.to_sampleset.as_ref().map(|v| v.join(" ")));
    echo.print();
    if let Some(p) = &a.info {
        let t = read_merl(p).map_err(bad_data(p))?;
        let n = t.raw().len() / 3;
        let mut valid = 0usize;
        let mut sum = [0.0; 3];
        for cell in 0..n {
            let v = t.cell_value(cell);
            if v.iter().all(|c| *c >= 0.0) {
                valid += 1;
                (0..3).for_each(|c| sum[c] += v[c]);
            }
        }
        let mean = sum.map(|s| s / valid.max(1) as f64);
        println!("cells={n}\nvalid_cells={valid}\nmean={:.6e},{:.6e},{:.6e}", mean[0], mean[1], mean[2]);
        return Ok(());
    }
    if let Some(v) = &a.to_sampleset {
        let t = read_merl(&v[0]).map_err(bad_data(&v[0]))?;
        let n: usize = v[1]
            .parse()
            .map_err(|_| Failure::Usage(format!("sample count {:?} is not an integer", v[1])))?;
        let id = Path::new(&v[0]).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let set = merl_to_sampleset(&t, &id, n, cli.seed);
        write_sampleset(&set, &v[2]).map_err(at(&v[2]))?;
        println!("material={id}\nsamples={}\nout={}", set.len(), v[2]);
        return Ok(());
    }
    Err(Failure::Usage("merl needs --info or --to-sampleset".into()))
}

fn run(cli: &Cli) -> Out {
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    pool.install(|| match &cli.cmd {
        Cmd::Enhance(a) => enhance(cli, a, threads),
        Cmd::Fit(a) => fit(cli, a, threads),
        Cmd::Eval(a) => eval(cli, a, threads),
        Cmd::Slice(a) => slice(cli, a, threads),
        Cmd::Export(a) => export(cli, a, threads),
        Cmd::Gen(a) => gen(cli, a, threads),
        Cmd::Merl(a) => merl(cli, a, threads),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("nea: {f}");
            ExitCode::from(f.code())
        }
    }
}
