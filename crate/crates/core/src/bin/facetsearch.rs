use std::error::Error;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use facetsearch::catalog::{load_catalog, AccessoryLexicon, CatalogTable, DEFAULT_ACCESSORY_TERMS};
use facetsearch::config::RunConfig;
use facetsearch::embedder::{
    embed_catalog, AdapterParams, VectorSet, DEFAULT_DIM, EXTERNAL_SCHEME_VERSION, HASH_SCHEME_VERSION,
};
use facetsearch::engine::{run_benchmark, Judgments, SearchEngine};
use facetsearch::index::IvfIndex;
use facetsearch::queryfilter::{
    filters_to_text, CommandExtractor, FilterExtractor, RuleExtractor, ThresholdTable,
};
use facetsearch::trainer::{read_pairs, synth_queries, train_adapter, TrainConfig, TrainingPair};

type Res<T> = Result<T, Box<dyn Error>>;

/// Constraint-filtered semantic product search.
#[derive(Parser, Debug)]
#[command(name = "facetsearch", version)]
struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Clean and classify a raw JSONL catalog.
    Ingest(IngestArgs),
    /// Embed catalog text (or import external vectors) into a vectors file.
    Embed(EmbedArgs),
    /// Fit the linear adapter on query/product pairs.
    TrainAdapter(TrainArgs),
    /// Train the coarse quantizer and build an IVF-Flat index.
    BuildIndex(BuildArgs),
    /// Print the structured filters extracted from a query.
    ExtractFilters(ExtractArgs),
    /// Run one query through the filtered search pipeline.
    Search(SearchArgs),
    /// Precision@k / recall@k over a judged query set.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Raw catalog, one JSON object per line.
    #[arg(long = "in", alias = "input")]
    input: Option<PathBuf>,
    /// Cleaned catalog; defaults to the config's catalog path, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accessory term list, one term per line.
    #[arg(long)]
    accessory_terms: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    adapter: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Import precomputed vectors instead of hashing text.
    #[arg(long)]
    import: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// query<TAB>asin lines.
    #[arg(long, conflicts_with = "synth")]
    pairs: Option<PathBuf>,
    /// Synthesize this many queries per product instead of reading pairs.
    #[arg(long)]
    synth: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Scheme {
    Hash,
    External,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    vecs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    nlist: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Embedding scheme the vectors came from.
    #[arg(long, value_enum, default_value = "hash")]
    scheme: Scheme,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    query: String,
    /// Shell command that reads the query on stdin and prints a filters object.
    #[arg(long)]
    extractor_cmd: Option<String>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    idx: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    adapter: Option<PathBuf>,
    #[arg(long)]
    thresholds: Option<PathBuf>,
    #[arg(long)]
    nprobe: Option<usize>,
    /// Skip filter extraction and search the whole index.
    #[arg(long)]
    no_filters: bool,
    #[arg(long)]
    extractor_cmd: Option<String>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    query: String,
    #[arg(short, long)]
    k: Option<usize>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    judgments: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,10")]
    ks: Vec<usize>,
    /// Machine-readable report instead of the table.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn usage(sub: &str, msg: String) -> ! {
    let mut cmd = Cli::command();
    let sub_cmd = cmd.find_subcommand_mut(sub).expect("known subcommand").clone();
    sub_cmd
        .bin_name(format!("facetsearch {sub}"))
        .error(ErrorKind::MissingRequiredArgument, msg)
        .exit()
}

fn need<T>(sub: &str, flag: &str, v: Option<T>) -> T {
    v.unwrap_or_else(|| usage(sub, format!("missing --{flag} (flag or config key)")))
}

fn open(path: &Path) -> Res<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("{}: {e}", path.display()).into())
}

fn create(path: &Path) -> Res<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("{}: {e}", path.display()).into())
}

fn read_catalog(path: &Path) -> Res<CatalogTable> {
    Ok(load_catalog(open(path)?, &AccessoryLexicon::default())?)
}

fn read_adapter(path: Option<&Path>) -> Res<Option<AdapterParams>> {
    path.map(|p| Ok(AdapterParams::read_from(open(p)?)?)).transpose()
}

fn read_thresholds(path: Option<&Path>) -> Res<ThresholdTable> {
    match path {
        Some(p) => Ok(ThresholdTable::from_toml(&std::fs::read_to_string(p)?)?),
        None => Ok(ThresholdTable::default()),
    }
}

fn extractor(cmd: Option<String>) -> Box<dyn FilterExtractor> {
    match cmd {
        Some(c) => Box::new(CommandExtractor::new(c)),
        None => Box::new(RuleExtractor::default()),
    }
}

fn ingest(a: IngestArgs, cfg: RunConfig) -> Res<()> {
    let input = need("ingest", "in", a.input);
    let lexicon = match a.accessory_terms {
        Some(p) => AccessoryLexicon::parse(&std::fs::read_to_string(p)?),
        None => AccessoryLexicon::parse(DEFAULT_ACCESSORY_TERMS),
    };
    let catalog = load_catalog(open(&input)?, &lexicon)?;
    match a.out.or(cfg.catalog) {
        Some(p) => {
            let mut w = create(&p)?;
            catalog.write_jsonl(&mut w)?;
            w.flush()?;
        }
        None => catalog.write_jsonl(io::stdout().lock())?,
    }
    log::info!("ingested {} products", catalog.len());
    Ok(())
}

fn embed(a: EmbedArgs, cfg: RunConfig) -> Res<()> {
    let out = need("embed", "out", a.out.or(cfg.vectors));
    let set = if let Some(import) = a.import {
        let set = VectorSet::read_from(open(&import)?)?;
        if let Some(d) = a.dim.or(cfg.dim) {
            if d != set.dim {
                return Err(format!("imported vectors have d={}, expected {d}", set.dim).into());
            }
        }
        set
    } else {
        let catalog = read_catalog(&need("embed", "catalog", a.catalog.or(cfg.catalog)))?;
        let adapter = read_adapter(a.adapter.or(cfg.adapter).as_deref())?;
        let dim = adapter.as_ref().map(AdapterParams::dim).or(a.dim).or(cfg.dim).unwrap_or(DEFAULT_DIM);
        embed_catalog(&catalog, dim, adapter.as_ref())?
    };
    let mut w = create(&out)?;
    set.write_to(&mut w)?;
    w.flush()?;
    log::info!("wrote {} vectors (d={})", set.len(), set.dim);
    Ok(())
}

fn train(a: TrainArgs, cfg: RunConfig) -> Res<()> {
    let catalog = read_catalog(&need("train-adapter", "catalog", a.catalog.or(cfg.catalog)))?;
    let out = need("train-adapter", "out", a.out.or(cfg.adapter));
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        batch_size: a.batch.or(cfg.batch_size).unwrap_or(defaults.batch_size),
        learning_rate: a.lr.or(cfg.lr).unwrap_or(defaults.learning_rate),
        epochs: a.epochs.or(cfg.epochs).unwrap_or(defaults.epochs),
        seed: a.seed.or(cfg.seed).unwrap_or(defaults.seed),
        dim: a.dim.or(cfg.dim).unwrap_or(defaults.dim),
        ..defaults
    };
    let pairs: Vec<TrainingPair> = match (a.pairs, a.synth) {
        (Some(p), _) => read_pairs(open(&p)?, &catalog)?,
        (None, Some(n)) => catalog
            .iter()
            .flat_map(|(id, r)| {
                synth_queries(r, n, config.seed ^ id)
                    .into_iter()
                    .map(move |q| TrainingPair::new(q, id))
            })
            .collect(),
        (None, None) => usage("train-adapter", "one of --pairs or --synth is required".into()),
    };
    let outcome = train_adapter(&catalog, &pairs, &config)?;
    for (e, l) in outcome.epoch_losses.iter().enumerate() {
        eprintln!("epoch {:>3}  loss {l:.6}", e + 1);
    }
    let mut w = create(&out)?;
    outcome.params.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

fn build(a: BuildArgs, cfg: RunConfig) -> Res<()> {
    let vecs = need("build-index", "vecs", a.vecs.or(cfg.vectors));
    let out = need("build-index", "out", a.out.or(cfg.index));
    let set = VectorSet::read_from(open(&vecs)?)?;
    let scheme = match a.scheme {
        Scheme::Hash => HASH_SCHEME_VERSION,
        Scheme::External => EXTERNAL_SCHEME_VERSION,
    };
    let index = IvfIndex::train_and_build(&set, a.nlist.or(cfg.nlist), a.seed.or(cfg.seed).unwrap_or(0), scheme)?;
    index.save(&out)?;
    log::info!("indexed {} vectors into {} lists", index.len(), index.nlist());
    Ok(())
}

fn extract(a: ExtractArgs) -> Res<()> {
    let f = extractor(a.extractor_cmd).extract(&a.query)?;
    println!("{}", filters_to_text(&f));
    Ok(())
}

struct Loaded {
    index: IvfIndex,
    catalog: CatalogTable,
    adapter: Option<AdapterParams>,
    thresholds: ThresholdTable,
    extractor: Box<dyn FilterExtractor>,
    nprobe: Option<usize>,
    no_filters: bool,
}

fn load_pipeline(sub: &str, p: PipelineArgs, cfg: &RunConfig) -> Res<Loaded> {
    let idx = need(sub, "idx", p.idx.or(cfg.index.clone()));
    let catalog = need(sub, "catalog", p.catalog.or(cfg.catalog.clone()));
    Ok(Loaded {
        index: IvfIndex::load(&idx)?,
        catalog: read_catalog(&catalog)?,
        adapter: read_adapter(p.adapter.or(cfg.adapter.clone()).as_deref())?,
        thresholds: read_thresholds(p.thresholds.or(cfg.thresholds.clone()).as_deref())?,
        extractor: extractor(p.extractor_cmd),
        nprobe: p.nprobe.or(cfg.nprobe),
        no_filters: p.no_filters || cfg.no_filters.unwrap_or(false),
    })
}

impl Loaded {
    fn engine(&self) -> Res<SearchEngine<'_>> {
        Ok(
            SearchEngine::new(&self.index, &self.catalog, &self.thresholds, self.extractor.as_ref())?
                .with_adapter(self.adapter.as_ref())?
                .with_filters(!self.no_filters),
        )
    }
}

fn search(a: SearchArgs, cfg: RunConfig) -> Res<()> {
    let k = a.k.or(cfg.k).unwrap_or(10);
    let loaded = load_pipeline("search", a.pipeline, &cfg)?;
    let engine = loaded.engine()?;
    let outcome = engine.run_query(&a.query, k, loaded.nprobe)?;
    if outcome.resolved.is_some() {
        eprintln!("filters: {}", filters_to_text(&outcome.filters));
        eprintln!("allowed: {}", outcome.allowed.unwrap_or(0));
    }
    let mut out = io::stdout().lock();
    for (rank, hit) in outcome.result.hits.iter().enumerate() {
        let r = loaded.catalog.get(hit.id).expect("engine checked ids");
        let price = r.price.map_or("-".to_string(), |p| format!("{p:.2}"));
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{}\t{}\t{}\t{}",
            rank + 1,
            r.asin,
            hit.score,
            price,
            r.average_rating,
            r.review_count,
            r.title
        )?;
    }
    Ok(())
}

fn eval(a: EvalArgs, cfg: RunConfig) -> Res<()> {
    let judgments = need("eval", "judgments", a.judgments.or(cfg.judgments.clone()));
    if a.ks.contains(&0) {
        usage("eval", "--ks values must be >= 1".into());
    }
    let loaded = load_pipeline("eval", a.pipeline, &cfg)?;
    let engine = loaded.engine()?;
    let judgments = Judgments::read(open(&judgments)?)?;
    let report = run_benchmark(&engine, &judgments, &a.ks, loaded.nprobe)?;
    let mut out = io::stdout().lock();
    if a.json {
        writeln!(out, "{}", report.to_json())?;
    } else {
        write!(out, "{}", report.to_table())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfg = match RunConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Cmd::Ingest(a) => ingest(a, cfg),
        Cmd::Embed(a) => embed(a, cfg),
        Cmd::TrainAdapter(a) => train(a, cfg),
        Cmd::BuildIndex(a) => build(a, cfg),
        Cmd::ExtractFilters(a) => extract(a),
        Cmd::Search(a) => search(a, cfg),
        Cmd::Eval(a) => eval(a, cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
