use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use surfdamage::config::PipelineConfig;
use surfdamage::eval::{evaluate, MetricsReport};
use surfdamage::io::{self, InstanceDocument, PlyEncoding, SceneBundle};
use surfdamage::mapping::{ClassCatalog, ViewCountMode};
use surfdamage::pipeline::{self, Extraction};
use surfdamage::synth::{self, SceneSpec};
use surfdamage::{Error, ErrorKind, Result};

/// Map damage heatmaps onto point clouds and extract crack axes and damage
/// polygons.
#[derive(Debug, Parser)]
#[command(name = "surfdamage", version)]
struct Cli {
    /// Stage parameters, TOML or JSON. Flags override file values.
    #[arg(long, global = true, env = "SURFDAMAGE_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "SURFDAMAGE_THREADS", default_value_t = 0)]
    threads: usize,
    /// Seed for every stochastic choice (synthetic jitter and noise).
    #[arg(long, global = true, env = "SURFDAMAGE_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse per-view heatmaps onto a cloud and write a segmented PLY.
    Map(MapArgs),
    /// Split a segmented PLY into damage instances.
    Cluster(ClusterArgs),
    /// Extract medial axes and polygons for clustered instances.
    Extract(ExtractArgs),
    /// Score predicted instances against annotations.
    Evaluate(EvaluateArgs),
    /// Run map, cluster and extract on a scene directory.
    Pipeline(PipelineArgs),
    /// Write a synthetic scene directory with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct CatalogArgs {
    /// Class names in heatmap order.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    #[arg(long, default_value = "background")]
    background: String,
}

#[derive(Debug, Args, Default)]
struct MapFlags {
    /// Count every visible view in the fusion weight, not only those in the
    /// angular interval.
    #[arg(long)]
    count_all_visible: bool,
    /// Disable the splat occlusion test.
    #[arg(long)]
    no_occlusion: bool,
    #[arg(long)]
    splat_radius: Option<f64>,
    #[arg(long)]
    depth_tol: Option<f64>,
    /// Neighbors for normal estimation.
    #[arg(long)]
    normal_k: Option<usize>,
    /// Re-estimate normals even if the cloud has them.
    #[arg(long)]
    recompute_normals: bool,
    /// Write ASCII instead of binary PLY.
    #[arg(long)]
    ascii: bool,
}

#[derive(Debug, Args, Default)]
struct ClusterFlags {
    /// DBSCAN radius (m) for every class; unset derives it from the data.
    #[arg(long)]
    eps: Option<f64>,
    /// DBSCAN core threshold for classes without their own setting.
    #[arg(long)]
    min_pts: Option<usize>,
    /// DBSCAN core threshold for cracks.
    #[arg(long)]
    crack_min_pts: Option<usize>,
}

#[derive(Debug, Args, Default)]
struct ExtractFlags {
    /// Alpha in normalized plane coordinates.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Laplacian neighborhood size.
    #[arg(long)]
    laplacian_k: Option<usize>,
    /// Douglas-Peucker tolerance (m).
    #[arg(long)]
    simplify: Option<f64>,
}

#[derive(Debug, Args)]
struct MapArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    cameras: PathBuf,
    #[arg(long)]
    heatmaps: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    catalog: CatalogArgs,
    #[command(flatten)]
    flags: MapFlags,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long)]
    segmented: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: ClusterFlags,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    segmented: PathBuf,
    /// Instance index written by `cluster`.
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the geometry as OBJ polylines.
    #[arg(long)]
    obj: Option<PathBuf>,
    #[command(flatten)]
    flags: ExtractFlags,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Instance JSON written by `extract` or `pipeline`.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    /// Positional tolerances (m); defaults to 1, 2, 4, 6 and 8 cm.
    #[arg(long, value_delimiter = ',')]
    tol: Option<Vec<f64>>,
    /// Resampling spacing (m); 0 scores the raw vertices.
    #[arg(long)]
    spacing: Option<f64>,
    /// Write the report as JSON here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Directory holding `scene.json`.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    map: MapFlags,
    #[command(flatten)]
    cluster: ClusterFlags,
    #[command(flatten)]
    extract: ExtractFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Cracks,
    Areal,
    Empty,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "cracks")]
    preset: Preset,
    /// Scene specification (TOML or JSON); replaces the preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Heatmap noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// Bend the wall into a cylinder of this radius (m).
    #[arg(long)]
    curvature: Option<f64>,
    /// Point spacing (m).
    #[arg(long)]
    spacing: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Validation => ExitCode::from(1),
                ErrorKind::Processing => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::InvalidParameter { name: "threads", reason: e.to_string() })?;
    }
    match cli.command {
        Command::Map(args) => {
            let mut config = load_config(cli.config.as_deref())?;
            args.flags.apply(&mut config);
            let catalog = args.catalog.catalog()?;
            let cloud = io::read_ply(&args.cloud)?;
            let views = io::load_views(&args.cameras, &args.heatmaps, &catalog)?;
            let seg = pipeline::map_cloud(&cloud, &views, &catalog, &config)?;
            report_labels(&seg);
            io::write_segmented_ply(&args.out, &seg, config.ply_encoding)
        }
        Command::Cluster(args) => {
            let mut config = load_config(cli.config.as_deref())?;
            args.flags.apply(&mut config);
            let seg = io::read_segmented_ply(&args.segmented, None)?;
            let instances = pipeline::cluster(&seg, &config)?;
            eprintln!("{} instances", instances.len());
            io::write_json(&args.out, &pipeline::instance_index(&seg, &instances))
        }
        Command::Extract(args) => {
            let mut config = load_config(cli.config.as_deref())?;
            args.flags.apply(&mut config);
            let seg = io::read_segmented_ply(&args.segmented, None)?;
            let index = io::read_instance_index(&args.instances)?;
            let instances = pipeline::instances_from_index(&seg, &index)?;
            let extraction = pipeline::extract(&seg, &instances, &config)?;
            write_extraction(&extraction, &args.out, args.obj.as_deref())
        }
        Command::Evaluate(args) => {
            let mut config = load_config(cli.config.as_deref())?;
            if let Some(tol) = args.tol {
                config.eval.tolerances = tol;
            }
            if let Some(s) = args.spacing {
                config.eval.spacing = (s > 0.0).then_some(s);
            }
            let truth = io::read_annotations(&args.annotations)?;
            let doc = io::read_instances(&args.predictions)?;
            let predictions = doc.predictions(&truth.classes)?;
            let report = evaluate(&truth, &predictions, &config.eval)?;
            print!("{}", report.to_text());
            match args.out {
                Some(out) => io::write_json(&out, &report),
                None => Ok(()),
            }
        }
        Command::Pipeline(args) => {
            let bundle = SceneBundle::open(&args.scene)?;
            let config_path = cli.config.or_else(|| bundle.config_path());
            let mut config = load_config(config_path.as_deref())?;
            args.map.apply(&mut config);
            args.cluster.apply(&mut config);
            args.extract.apply(&mut config);
            run_pipeline(&bundle, &config, &args.out)
        }
        Command::Synth(args) => {
            let mut spec = match &args.spec {
                Some(path) => load_spec(path)?,
                None => match args.preset {
                    Preset::Cracks => SceneSpec::cracks(),
                    Preset::Areal => SceneSpec::areal(),
                    Preset::Empty => SceneSpec::default(),
                },
            };
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            if let Some(noise) = args.noise {
                spec.noise = noise;
            }
            if let Some(r) = args.curvature {
                spec.wall.curvature_radius = Some(r);
            }
            if let Some(s) = args.spacing {
                spec.wall.spacing = s;
            }
            io::ensure_dir(&args.out)?;
            let scene = synth::generate(&spec)?;
            scene.write(&args.out)?;
            eprintln!(
                "wrote {} points, {} cameras, {} annotated instances to {}",
                scene.cloud.len(),
                scene.cameras.len(),
                scene.annotations.instances.len(),
                args.out.display()
            );
            Ok(())
        }
    }
}

fn run_pipeline(bundle: &SceneBundle, config: &PipelineConfig, out: &Path) -> Result<()> {
    let catalog = bundle.catalog()?;
    let cloud = bundle.load_cloud()?;
    let views = bundle.load_views(&catalog)?;
    let run = pipeline::run(&cloud, &views, &catalog, config)?;
    report_labels(&run.segmented);
    io::ensure_dir(out)?;
    io::write_segmented_ply(&out.join("segmented.ply"), &run.segmented, config.ply_encoding)?;
    io::write_json(&out.join("instance_index.json"), &pipeline::instance_index(&run.segmented, &run.instances))?;
    write_extraction(&run.extraction, &out.join("instances.json"), Some(&out.join("instances.obj")))?;
    if let Some(path) = bundle.annotations_path() {
        let truth = io::read_annotations(&path)?;
        let predictions = run.extraction.document.predictions(&truth.classes)?;
        let report = evaluate(&truth, &predictions, &config.eval)?;
        print!("{}", report.to_text());
        write_report(&report, out)?;
    }
    Ok(())
}

fn write_report(report: &MetricsReport, out: &Path) -> Result<()> {
    io::write_json(&out.join("metrics.json"), report)?;
    let path = out.join("metrics.txt");
    std::fs::write(&path, report.to_text()).map_err(|e| Error::Io { path, source: e })
}

fn write_extraction(extraction: &Extraction, out: &Path, obj: Option<&Path>) -> Result<()> {
    for s in &extraction.skipped {
        eprintln!("warning: skipped instance {} ({}, {} points): {}", s.id, s.class, s.point_count, s.reason);
    }
    let doc: &InstanceDocument = &extraction.document;
    eprintln!("{} instance records", doc.instances.len());
    io::write_instances(out, doc)?;
    match obj {
        Some(path) => io::write_obj(path, doc),
        None => Ok(()),
    }
}

fn report_labels(seg: &surfdamage::mapping::SegmentedCloud) {
    let catalog = seg.catalog();
    let mut counts = vec![0usize; catalog.len()];
    for &l in seg.labels() {
        counts[l] += 1;
    }
    let parts: Vec<String> = counts.iter().enumerate().map(|(c, n)| format!("{} {n}", catalog.name(c))).collect();
    eprintln!("labeled {} points: {}", seg.len(), parts.join(", "));
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_spec(path: &Path) -> Result<SceneSpec> {
    if path.extension().is_some_and(|e| e == "json") {
        return io::read_json(path);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    toml::from_str(&text).map_err(|e| Error::Schema { path: path.into(), reason: e.to_string() })
}

impl CatalogArgs {
    fn catalog(&self) -> Result<ClassCatalog> {
        let names = match &self.classes {
            Some(names) => names.clone(),
            None => ClassCatalog::default().names().to_vec(),
        };
        let bg = names
            .iter()
            .position(|n| *n == self.background)
            .ok_or_else(|| Error::UnknownClass(self.background.clone()))?;
        ClassCatalog::new(names, bg)
    }
}

impl MapFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if self.count_all_visible {
            config.fusion.view_count = ViewCountMode::AllVisible;
        }
        if self.no_occlusion {
            config.fusion.visibility.occlusion = false;
        }
        if let Some(r) = self.splat_radius {
            config.fusion.visibility.splat_radius_px = r;
        }
        if let Some(t) = self.depth_tol {
            config.fusion.visibility.depth_tol_rel = t;
        }
        if let Some(k) = self.normal_k {
            config.normals.k = k;
        }
        if self.recompute_normals {
            config.normals.recompute = true;
        }
        if self.ascii {
            config.ply_encoding = PlyEncoding::Ascii;
        }
    }
}

impl ClusterFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        let c = &mut config.clustering;
        if let Some(eps) = self.eps {
            c.fallback.eps = Some(eps);
            c.classes.values_mut().for_each(|p| p.eps = Some(eps));
        }
        if let Some(m) = self.min_pts {
            c.fallback.min_pts = m;
        }
        if let Some(m) = self.crack_min_pts {
            c.classes.entry("crack".into()).or_insert(c.fallback).min_pts = m;
        }
    }
}

impl ExtractFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(a) = self.alpha {
            config.polygon.alpha = a;
        }
        if let Some(n) = self.max_iterations {
            config.medial_axis.contraction.max_iterations = n;
        }
        if let Some(k) = self.laplacian_k {
            config.medial_axis.contraction.k = k;
        }
        if let Some(t) = self.simplify {
            config.medial_axis.simplify_tolerance = t;
        }
    }
}
