use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use entropath::evidential::Heads;
use entropath::image::BitDepth;
use entropath::pipeline::{self, restore_one, RunConfig};
use entropath::rng::derive_seed;
use entropath::seros::{build_graph, minimize_partition, node_contributions, two_d_se, CandidateSet, Partition, SimilarityGraph};
use entropath::Image;

#[derive(Parser)]
#[command(name = "entropath", version, about = "Compound degradation restoration with structural-entropy order selection")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise a clean/degraded corpus with recipe sidecars.
    MakeCorpus(CorpusArgs),
    /// Fit the type and evidence heads on a corpus.
    TrainHeads(TrainArgs),
    /// Restore one image or every image in a directory.
    Restore(RestoreArgs),
    /// Compare restoration strategies over a corpus.
    Bench(BenchArgs),
    /// Structural entropy of a graph file.
    Se(SeArgs),
    /// Dump the similarity graph over candidate restorations.
    Graph(GraphArgs),
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    #[arg(long)]
    corpus_size: Option<usize>,
    #[arg(long)]
    image_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    severity_min: Option<f64>,
    #[arg(long)]
    severity_max: Option<f64>,
    /// Restrict to one class: single, double or triple.
    #[arg(long)]
    class: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    #[arg(long)]
    heads: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    zeta: Option<f64>,
}

#[derive(Args)]
struct RestoreArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    heads: Option<PathBuf>,
    /// seros, rps, pea or fixed:<order> such as fixed:cbn.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    #[arg(long)]
    heads: Option<PathBuf>,
    /// Comma-separated strategies, or "all".
    #[arg(long)]
    strategies: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SeArgs {
    /// Edge-list graph file.
    graph: PathBuf,
    /// Partition file; minimised when omitted.
    #[arg(long)]
    partition: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    /// Candidate images (at least two).
    images: Vec<PathBuf>,
    /// Degraded image whose restoration paths become the candidates.
    #[arg(long, conflicts_with = "images")]
    input: Option<PathBuf>,
    #[arg(long)]
    heads: Option<PathBuf>,
    #[arg(long)]
    zeta: Option<f64>,
    /// Write the edge list here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Io(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Run(_) => 1,
        }
    }
}

impl From<entropath::Error> for Failure {
    fn from(e: entropath::Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Run(e.to_string())
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

/// Like `?` but reports failures to read inputs as I/O errors.
fn input<T>(r: entropath::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Io(e.to_string()))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn base_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn make_corpus(mut cfg: RunConfig, a: CorpusArgs) -> Result<(), Failure> {
    set(&mut cfg.corpus_dir, a.corpus_dir);
    set(&mut cfg.corpus_size, a.corpus_size);
    set(&mut cfg.image_size, a.image_size);
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.severity_min, a.severity_min);
    set(&mut cfg.severity_max, a.severity_max);
    if a.class.is_some() {
        cfg.class = a.class;
    }
    cfg.validate().map_err(config_err)?;
    let manifest = pipeline::make_corpus(&cfg, &cfg.corpus_dir)?;
    let [s, d, t] = manifest.class_counts();
    println!(
        "wrote {} images to {} (single {s}, double {d}, triple {t})",
        manifest.entries.len(),
        cfg.corpus_dir.display()
    );
    Ok(())
}

fn train_heads(mut cfg: RunConfig, a: TrainArgs) -> Result<(), Failure> {
    set(&mut cfg.corpus_dir, a.corpus_dir);
    set(&mut cfg.heads, a.heads);
    set(&mut cfg.epochs, a.epochs);
    set(&mut cfg.step, a.step);
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.zeta, a.zeta);
    cfg.validate().map_err(config_err)?;
    let items = input(pipeline::load_corpus(&cfg.corpus_dir))?;
    let samples = pipeline::training_samples(&items)?;
    let outcome = entropath::evidential::train_heads(&samples, &pipeline::train::train_config(&cfg))?;
    outcome.heads.save(&cfg.heads)?;
    let f1 = pipeline::type_f1(&outcome.heads, &samples, cfg.zeta)?;
    println!(
        "trained on {} images: final loss {:.6}, training F1 contrast {:.3} blur {:.3} noise {:.3}",
        samples.len(),
        outcome.final_loss,
        f1[0],
        f1[1],
        f1[2]
    );
    println!("heads written to {}", cfg.heads.display());
    Ok(())
}

fn image_files(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let rd = fs::read_dir(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| ["png", "pgm"].contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn restore(mut cfg: RunConfig, a: RestoreArgs) -> Result<(), Failure> {
    if a.input.is_some() {
        cfg.input = a.input;
    }
    set(&mut cfg.output_dir, a.output_dir);
    set(&mut cfg.heads, a.heads);
    set(&mut cfg.strategy, a.strategy);
    set(&mut cfg.zeta, a.zeta);
    set(&mut cfg.seed, a.seed);
    cfg.validate().map_err(config_err)?;
    let strategy = cfg.parsed_strategy().map_err(config_err)?;
    let input_path = cfg.input.clone().ok_or_else(|| Failure::Config("restore needs --input".into()))?;
    let heads = input(Heads::load(&cfg.heads))?;
    let files = image_files(&input_path)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Failure::Io(format!("{}: {e}", cfg.output_dir.display())))?;
    for (i, file) in files.iter().enumerate() {
        let img = input(Image::load(file))?;
        let (out, diag) = restore_one(&img, &heads, cfg.zeta, &strategy, derive_seed(cfg.seed, i as u64), None)?;
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        let out_path = cfg.output_dir.join(format!("{stem}.png"));
        out.save(&out_path, BitDepth::Sixteen)?;
        let json = serde_json::to_string_pretty(&diag).map_err(|e| Failure::Run(e.to_string()))?;
        write_text(&cfg.output_dir.join(format!("{stem}.diag.json")), &json)?;
        let active: String = diag.perception.gates.active().iter().map(|k| k.letter()).collect();
        println!("{} -> {} (active: {})", file.display(), out_path.display(), if active.is_empty() { "none" } else { &active });
    }
    Ok(())
}

fn bench(mut cfg: RunConfig, a: BenchArgs) -> Result<(), Failure> {
    set(&mut cfg.corpus_dir, a.corpus_dir);
    set(&mut cfg.heads, a.heads);
    set(&mut cfg.strategies, a.strategies);
    set(&mut cfg.report, a.report);
    set(&mut cfg.zeta, a.zeta);
    set(&mut cfg.seed, a.seed);
    cfg.validate().map_err(config_err)?;
    let strategies = cfg.parsed_strategies().map_err(config_err)?;
    let items = input(pipeline::load_corpus(&cfg.corpus_dir))?;
    let heads = input(Heads::load(&cfg.heads))?;
    let report = pipeline::run_bench(&items, &heads, &strategies, cfg.zeta, cfg.seed)?;
    report.write(&cfg)?;
    print!("{}", report.to_text());
    Ok(())
}

fn se(a: SeArgs) -> Result<(), Failure> {
    let g = input(SimilarityGraph::load(&a.graph))?;
    let p = match &a.partition {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            input(Partition::from_text(&text))?
        }
        None => minimize_partition(&g),
    };
    let h = two_d_se(&g, &p)?;
    println!("vertices {}", g.n());
    println!("parts {}", p.parts().len());
    println!("h2_bits {:.12}", h.bits);
    if h.zero_volume {
        println!("warning: graph has zero volume");
    }
    let dh = node_contributions(&g, &p)?;
    println!("vertex part delta_h");
    for (x, d) in dh.iter().enumerate() {
        println!("{x} {} {d:.12}", p.assignment()[x]);
    }
    Ok(())
}

fn graph(mut cfg: RunConfig, a: GraphArgs) -> Result<(), Failure> {
    set(&mut cfg.heads, a.heads);
    set(&mut cfg.zeta, a.zeta);
    cfg.validate().map_err(config_err)?;
    let items: Vec<(String, Image)> = if let Some(path) = &a.input {
        let heads = input(Heads::load(&cfg.heads))?;
        let img = input(Image::load(path))?;
        let cands = pipeline::candidates(&img, pipeline::perceive(&img, &heads, cfg.zeta)?)?;
        cands
            .paths
            .iter()
            .map(|p| (entropath::degrade::order_label(&p.order), p.output.clone()))
            .collect()
    } else {
        a.images
            .iter()
            .map(|p| Ok((p.display().to_string(), input(Image::load(p))?)))
            .collect::<Result<_, Failure>>()?
    };
    if items.len() < 2 {
        return Err(Failure::Config("graph needs at least two candidates".into()));
    }
    let labels: Vec<String> = items.iter().map(|(l, _)| l.clone()).collect();
    let g = build_graph(&CandidateSet::new(items)?)?;
    let mut text = String::new();
    for (i, l) in labels.iter().enumerate() {
        text.push_str(&format!("# {i} {l}\n"));
    }
    text.push_str(&g.to_edge_list());
    match &a.out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = base_config(cli.config.as_deref())?;
    match cli.command {
        Command::MakeCorpus(a) => make_corpus(cfg, a),
        Command::TrainHeads(a) => train_heads(cfg, a),
        Command::Restore(a) => restore(cfg, a),
        Command::Bench(a) => bench(cfg, a),
        Command::Se(a) => se(a),
        Command::Graph(a) => graph(cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(m) | Failure::Io(m) | Failure::Run(m)) = &f;
            let kind = match f {
                Failure::Config(_) => "config error",
                Failure::Io(_) => "i/o error",
                Failure::Run(_) => "error",
            };
            eprintln!("entropath: {kind}: {m}");
            ExitCode::from(f.code())
        }
    }
}
