use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use tokensyn::codebook::{pairwise_distances, redundancy_stats_from};
use tokensyn::geom::chain_descriptors;
use tokensyn::io::{self, CodebookFormat, StructureFileOptions};
use tokensyn::metrics::{corpus_report, evaluate_ensembles_with, EvalConfig};
use tokensyn::perturb::{perturbation_validation, sample_seed};
use tokensyn::{
    build_synonym_dict, decode, encode, generate_ensemble, project_2d, synonym_swap, train_codebook, Codebook,
    Ensemble, Source, SwapConfig, SynonymDict, TokenSeq,
};

use crate::args::{ChainArgs, Cli, Command, ReportFormat};
use crate::manifest::{manifest_path, Manifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tokensyn::Error),
    #[error("{path}: {source}")]
    InFile { path: String, source: tokensyn::Error },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Core(e) | Self::InFile { source: e, .. } if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

trait InFile<T> {
    fn in_file(self, path: &Path) -> Result<T>;
}

impl<T> InFile<T> for tokensyn::Result<T> {
    fn in_file(self, path: &Path) -> Result<T> {
        self.map_err(|source| CliError::InFile { path: path.display().to_string(), source })
    }
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    manifest: Manifest,
}

impl Ctx {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        self.manifest.input(path, &bytes);
        Ok(bytes)
    }

    fn codebook(&mut self, path: &Path) -> Result<Codebook> {
        let bytes = self.read(path)?;
        io::load_codebook(&bytes, CodebookFormat::sniff(&bytes)).in_file(path)
    }

    fn structures(&mut self, path: &Path, chain: &ChainArgs) -> Result<Ensemble> {
        let bytes = self.read(path)?;
        let opts = StructureFileOptions { chain_id: chain.chain, ..Default::default() };
        io::parse_structure(&bytes, &opts).in_file(path)
    }

    /// Main data output: `--out` or stdout.
    fn emit(&self, bytes: &[u8]) -> Result<()> {
        match &self.out {
            Some(path) => write_file(path, bytes),
            None => std::io::stdout()
                .write_all(bytes)
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
        }
    }

    /// Auxiliary text: next to `--out` with `suffix` appended, else stderr.
    fn side_output(&self, suffix: &str, text: &str) -> Result<()> {
        match &self.out {
            Some(out) => write_file(&with_suffix(out, suffix), text.as_bytes()),
            None => {
                eprint!("{text}");
                Ok(())
            }
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn first_conformation(e: &Ensemble, path: &Path) {
    if e.len() > 1 {
        eprintln!("note: {} has {} models; using the first", path.display(), e.len());
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let name = match &cli.command {
        Command::TrainCodebook { .. } => "train-codebook",
        Command::Synonyms { .. } => "synonyms",
        Command::Stats { .. } => "stats",
        Command::Encode { .. } => "encode",
        Command::Decode { .. } => "decode",
        Command::Perturb { .. } => "perturb",
        Command::Ensemble { .. } => "ensemble",
        Command::Evaluate { .. } => "evaluate",
        Command::Report { .. } => "report",
        Command::Validate { .. } => "validate",
    };
    let mut ctx = Ctx { seed: cli.seed, out: cli.out.clone(), manifest: Manifest::new(name) };
    ctx.manifest.param("seed", cli.seed);
    ctx.manifest.param("out", cli.out.as_ref().map_or("<stdout>".into(), |p| p.display().to_string()));

    match cli.command {
        Command::TrainCodebook { input, codes, window, iters, chain } => {
            train(&mut ctx, &input, codes, window, iters, &chain)
        }
        Command::Synonyms { codebook, tau } => synonyms(&mut ctx, &codebook, tau),
        Command::Stats { codebook, tau, plots_dir } => stats(&mut ctx, &codebook, tau, &plots_dir),
        Command::Encode { input, codebook, window, chain } => encode_cmd(&mut ctx, &input, &codebook, window, &chain),
        Command::Decode { tokens, codebook, ignore_codebook_id } => {
            decode_cmd(&mut ctx, &tokens, &codebook, ignore_codebook_id)
        }
        Command::Perturb { tokens, dict, swap_prob, num_samples, ignore_codebook_id } => {
            perturb_cmd(&mut ctx, &tokens, &dict, swap_prob, num_samples, ignore_codebook_id)
        }
        Command::Ensemble { input, codebook, tau, num_samples, swap_prob, window, chain } => {
            ensemble_cmd(&mut ctx, &input, &codebook, tau, num_samples, swap_prob, window, &chain)
        }
        Command::Evaluate { generated, reference, target, n_components, format, chain } => {
            evaluate_cmd(&mut ctx, &generated, &reference, target, n_components, format, &chain)
        }
        Command::Report { inputs, rmsf } => report_cmd(&mut ctx, &inputs, rmsf),
        Command::Validate { input, codebook, tau, window, chain } => {
            validate_cmd(&mut ctx, &input, &codebook, tau, window, &chain)
        }
    }?;

    let manifest = ctx.manifest.render();
    match &ctx.out {
        Some(out) => write_file(&manifest_path(out), manifest.as_bytes()),
        None => {
            eprint!("{manifest}");
            Ok(())
        }
    }
}

fn chain_param(ctx: &mut Ctx, chain: &ChainArgs) {
    ctx.manifest.param("chain", chain.chain.map_or("<first>".into(), |c| c.to_string()));
}

fn train(ctx: &mut Ctx, inputs: &[PathBuf], codes: usize, window: usize, iters: usize, chain: &ChainArgs) -> Result<()> {
    ctx.manifest.param("codes", codes);
    ctx.manifest.param("window", window);
    ctx.manifest.param("iters", iters);
    chain_param(ctx, chain);
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for path in inputs {
        let e = ctx.structures(path, chain)?;
        for c in e.conformations() {
            samples.extend(chain_descriptors(c, window).in_file(path)?.into_iter().map(|d| d.values));
        }
    }
    let fit = train_codebook(&samples, codes, iters, ctx.seed)?;
    let bytes = io::save_codebook_binary(&fit.codebook);
    // The file stores f32; report the id of what a reader will load.
    let stored = io::load_codebook(&bytes, CodebookFormat::Binary)?;
    ctx.emit(&bytes)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "codebook_id={}", stored.id());
    let _ = writeln!(summary, "descriptors={}", samples.len());
    let _ = writeln!(summary, "iterations={}", fit.iterations);
    let _ = writeln!(summary, "converged={}", fit.converged);
    for (i, v) in fit.inertia.iter().enumerate() {
        let _ = writeln!(summary, "inertia.{}={v}", i + 1);
    }
    for (k, n) in fit.cluster_sizes.iter().enumerate() {
        let _ = writeln!(summary, "cluster_size.{k}={n}");
    }
    ctx.side_output(".summary.txt", &summary)
}

fn synonyms(ctx: &mut Ctx, codebook: &Path, tau: f64) -> Result<()> {
    ctx.manifest.param("tau", tau);
    let cb = ctx.codebook(codebook)?;
    let dict = build_synonym_dict(&cb, tau)?;
    ctx.emit(&io::save_synonym_dict(&dict))
}

fn stats(ctx: &mut Ctx, codebook: &Path, tau: f64, plots_dir: &Path) -> Result<()> {
    ctx.manifest.param("tau", tau);
    ctx.manifest.param("plots_dir", plots_dir.display());
    let cb = ctx.codebook(codebook)?;
    let distances = pairwise_distances(&cb);
    let s = redundancy_stats_from(&cb, &distances, tau)?;

    let mut text = String::new();
    let _ = writeln!(text, "codebook_id={}", cb.id());
    let _ = writeln!(text, "m={}", s.m);
    let _ = writeln!(text, "d={}", cb.d());
    let _ = writeln!(text, "tau={}", s.tau);
    let _ = writeln!(text, "synonym_fraction={}", s.synonym_fraction);
    let _ = writeln!(text, "component_count={}", s.component_count);
    for (size, count) in &s.set_size_histogram {
        let _ = writeln!(text, "set_size.{size}={count}");
    }
    for (level, d) in &s.distance_quantiles {
        let _ = writeln!(text, "distance_quantile.{level}={d}");
    }
    ctx.emit(text.as_bytes())?;

    fs::create_dir_all(plots_dir).map_err(|source| CliError::Io { path: plots_dir.display().to_string(), source })?;
    let mut table = String::new();
    for i in 0..distances.m() {
        let row: Vec<String> = distances.row(i).iter().map(f64::to_string).collect();
        let _ = writeln!(table, "{}", row.join(","));
    }
    write_file(&plots_dir.join("distances.csv"), table.as_bytes())?;

    if cb.m() >= 3 {
        let p = project_2d(&cb)?;
        let mut proj = format!("# explained_variance={},{}\ntoken,pc1,pc2\n", p.explained[0], p.explained[1]);
        for (k, [a, b]) in p.coords.iter().enumerate() {
            let _ = writeln!(proj, "{k},{a},{b}");
        }
        write_file(&plots_dir.join("projection.csv"), proj.as_bytes())?;
    } else {
        eprintln!("note: projection needs at least 3 codes; projection.csv not written");
    }
    Ok(())
}

fn encode_cmd(ctx: &mut Ctx, inputs: &[PathBuf], codebook: &Path, window: usize, chain: &ChainArgs) -> Result<()> {
    ctx.manifest.param("window", window);
    chain_param(ctx, chain);
    let cb = ctx.codebook(codebook)?;
    let mut seqs = Vec::new();
    for path in inputs {
        let e = ctx.structures(path, chain)?;
        for c in e.conformations() {
            seqs.push(encode(c, &cb, window).in_file(path)?);
        }
    }
    ctx.emit(&io::save_tokens(cb.id(), window, &seqs)?)
}

fn load_token_file(ctx: &mut Ctx, path: &Path) -> Result<Vec<TokenSeq>> {
    let bytes = ctx.read(path)?;
    let seqs = io::load_tokens(&bytes).in_file(path)?;
    if seqs.is_empty() {
        return Err(CliError::InFile { path: path.display().to_string(), source: tokensyn::Error::EmptyInput });
    }
    Ok(seqs)
}

fn decode_cmd(ctx: &mut Ctx, tokens: &Path, codebook: &Path, ignore_id: bool) -> Result<()> {
    ctx.manifest.param("ignore_codebook_id", ignore_id);
    let cb = ctx.codebook(codebook)?;
    let seqs = load_token_file(ctx, tokens)?;
    let chains = seqs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut s = s.clone();
            if ignore_id {
                s.codebook_id = cb.id().to_string();
            }
            Ok(decode(&s, &cb, s.window)?.with_label(format!("seq_{i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let lengths: Vec<usize> = chains.iter().map(|c| c.residue_count()).collect();
    if lengths.windows(2).any(|w| w[0] != w[1]) {
        return Err(CliError::Usage(format!(
            "{}: sequences decode to different lengths and cannot share one multi-model file",
            tokens.display()
        )));
    }
    ctx.emit(&io::write_structure(&Ensemble::new(chains, Source::Generated)?)?)
}

fn load_dict(ctx: &mut Ctx, path: &Path) -> Result<SynonymDict> {
    let bytes = ctx.read(path)?;
    io::load_synonym_dict(&bytes).in_file(path)
}

fn perturb_cmd(
    ctx: &mut Ctx,
    tokens: &Path,
    dict_path: &Path,
    swap_prob: f64,
    num_samples: usize,
    ignore_id: bool,
) -> Result<()> {
    ctx.manifest.param("swap_prob", swap_prob);
    ctx.manifest.param("num_samples", num_samples);
    ctx.manifest.param("ignore_codebook_id", ignore_id);
    SwapConfig { seed: ctx.seed, swap_prob, num_samples }.validate()?;
    let seqs = load_token_file(ctx, tokens)?;
    let dict = load_dict(ctx, dict_path)?;
    let window = seqs[0].window;
    let mut out = Vec::with_capacity(seqs.len() * num_samples);
    for (j, s) in seqs.iter().enumerate() {
        let mut s = s.clone();
        if ignore_id {
            s.codebook_id = dict.codebook_id().to_string();
        }
        for k in 0..num_samples {
            let index = (j * num_samples + k) as u64;
            out.push(synonym_swap(&s, &dict, sample_seed(ctx.seed, index), swap_prob)?);
        }
    }
    ctx.emit(&io::save_tokens(dict.codebook_id(), window, &out)?)
}

#[allow(clippy::too_many_arguments)]
fn ensemble_cmd(
    ctx: &mut Ctx,
    input: &Path,
    codebook: &Path,
    tau: f64,
    num_samples: usize,
    swap_prob: f64,
    window: usize,
    chain: &ChainArgs,
) -> Result<()> {
    ctx.manifest.param("tau", tau);
    ctx.manifest.param("num_samples", num_samples);
    ctx.manifest.param("swap_prob", swap_prob);
    ctx.manifest.param("window", window);
    chain_param(ctx, chain);
    let cfg = SwapConfig { seed: ctx.seed, swap_prob, num_samples };
    cfg.validate()?;
    let source = ctx.structures(input, chain)?;
    first_conformation(&source, input);
    let cb = ctx.codebook(codebook)?;
    let dict = build_synonym_dict(&cb, tau)?;
    let generated = generate_ensemble(&source.conformations()[0], &cb, &dict, &cfg, window).in_file(input)?;
    let generated = source.with_conformations(generated.into_conformations(), Source::Generated)?;
    ctx.emit(&io::write_structure(&generated)?)
}

fn evaluate_cmd(
    ctx: &mut Ctx,
    generated: &Path,
    reference: &Path,
    target: Option<String>,
    n_components: usize,
    format: ReportFormat,
    chain: &ChainArgs,
) -> Result<()> {
    let target = target.unwrap_or_else(|| stem(reference));
    ctx.manifest.param("target", &target);
    ctx.manifest.param("n_components", n_components);
    ctx.manifest.param("format", format!("{format:?}").to_lowercase());
    chain_param(ctx, chain);
    if n_components == 0 {
        return Err(CliError::Usage("--n-components must be at least 1".into()));
    }
    let gen = ctx.structures(generated, chain)?;
    let gen = gen.with_conformations(gen.conformations().to_vec(), Source::Generated)?;
    let reference = ctx.structures(reference, chain)?;
    let mut report = evaluate_ensembles_with(&gen, &reference, &EvalConfig { n_components })?;
    report.target = target;
    let bytes = match format {
        ReportFormat::Csv => io::reports_to_csv(&[report], n_components)?,
        ReportFormat::Jsonl => io::reports_to_jsonl(&[report]),
    };
    ctx.emit(&bytes)
}

fn n_components_of(bytes: &[u8]) -> Option<usize> {
    String::from_utf8_lossy(bytes)
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# n_components=").and_then(|v| v.trim().parse().ok()))
}

fn report_cmd(ctx: &mut Ctx, inputs: &[PathBuf], rmsf: Option<PathBuf>) -> Result<()> {
    let rmsf = rmsf.or_else(|| ctx.out.as_ref().map(|o| with_suffix(o, ".rmsf.csv")));
    ctx.manifest.param("rmsf", rmsf.as_ref().map_or("<none>".into(), |p| p.display().to_string()));
    let mut reports = Vec::new();
    let mut n_components = None;
    for path in inputs {
        let bytes = ctx.read(path)?;
        let n = n_components_of(&bytes);
        match (n_components, n) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Usage(format!("{}: n_components {b} differs from earlier inputs ({a})", path.display())))
            }
            (None, Some(b)) => n_components = Some(b),
            _ => {}
        }
        reports.extend(io::parse_reports_csv(&bytes).in_file(path)?);
    }
    let n_components = n_components.unwrap_or(tokensyn::metrics::DEFAULT_PCA_COMPONENTS);
    let corpus = corpus_report(&reports)?;
    ctx.emit(&io::corpus_report_csv(&corpus, n_components))?;
    match rmsf {
        Some(path) => write_file(&path, &io::rmsf_profile_csv(&reports)),
        None => {
            eprintln!("note: no --out or --rmsf given; per-residue RMSF table not written");
            Ok(())
        }
    }
}

fn validate_cmd(
    ctx: &mut Ctx,
    inputs: &[PathBuf],
    codebook: &Path,
    tau: f64,
    window: usize,
    chain: &ChainArgs,
) -> Result<()> {
    ctx.manifest.param("tau", tau);
    ctx.manifest.param("window", window);
    chain_param(ctx, chain);
    let cb = ctx.codebook(codebook)?;
    let dict = build_synonym_dict(&cb, tau)?;
    let mut chains = Vec::new();
    for path in inputs {
        let e = ctx.structures(path, chain)?;
        first_conformation(&e, path);
        chains.push(e.conformations()[0].clone().with_label(stem(path)));
    }
    let table = perturbation_validation(&chains, &cb, &dict, window, ctx.seed)?;
    let mut out = String::from("label,tm_single,rmsd_single,tm_mean,rmsd_mean,tm_vs_raw,rmsd_vs_raw\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.label, r.tm_single, r.rmsd_single, r.tm_mean, r.rmsd_mean, r.tm_vs_raw, r.rmsd_vs_raw
        );
    }
    let _ = writeln!(
        out,
        "mean,{},{},{},{},{},{}",
        table.mean_tm_single,
        table.mean_rmsd_single,
        table.mean_tm_mean,
        table.mean_rmsd_mean,
        table.mean_tm_vs_raw,
        table.mean_rmsd_vs_raw
    );
    ctx.emit(out.as_bytes())
}
