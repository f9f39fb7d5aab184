use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gammabt::analysis::{
    corpus_importance_report, corpus_profile, corpus_quality_report, sentence_representation_matrix, singular_spectrum,
    CorpusProfile, ImportanceReport, QualityReport, SpectrumReport,
};
use gammabt::btloop::{
    oracle_for_target, run_bt_experiment, synthesize_corpus, BtStrategy, ExperimentConfig, SynthesisOptions,
};
use gammabt::corpus::{MonoCorpus, ParallelCorpus};
use gammabt::manipulate::{assemble_mixed_corpus, split_monolingual, Provenance, SyntheticPair};
use gammabt::rng::{stream, Purpose};
use gammabt::scoring::{
    gamma_distribution, gamma_sample, gamma_select, CandidateSet, GammaParams, DEFAULT_GAMMA, DEFAULT_POOL_SIZE,
};
use gammabt::toyseq::{
    generate_toy_task, sample_candidate_set, train_channel, train_ngram_lm, ChannelModel, Direction, LmVocab, NGramLm,
    ToyTaskSpec, DEFAULT_ALPHA, DEFAULT_BEAM_SIZE, DEFAULT_ORDER,
};
use gammabt::Token;

use crate::manifest::{digest_inputs, digest_outputs, RunManifest};
use crate::records::{
    format_parallel, format_sentences, format_synthetic, parse_candidate_records, parse_parallel, parse_sentences,
    parse_synthetic, write_candidate_records,
};

#[derive(Debug, Parser)]
#[command(name = "gammabt", version, about = "Back-translation data synthesis, Gamma-score selection and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gamma distribution of every candidate record.
    Score(ScoreArgs),
    /// Pick one candidate per record by Gamma selection or sampling.
    Select(SelectArgs),
    /// Mix beam and sampling synthetic corpora through a seeded split.
    Manipulate(ManipulateArgs),
    /// Generate a synthetic toy translation task into a directory.
    Toygen(ToygenArgs),
    /// Train an n-gram LM or a channel model.
    Train(TrainArgs),
    /// Back-translate a monolingual corpus with one strategy.
    Backtranslate(BacktranslateArgs),
    /// Run the full strategy comparison on toy tasks.
    BtExperiment(BtExperimentArgs),
    /// Profile, spectrum and optional quality/importance reports of a corpus.
    Analyze(AnalyzeArgs),
    /// Exact marginal, Jensen bound and importance-sampling estimate per target.
    Oracle(OracleArgs),
    /// Re-run a command from its manifest and check the outputs match.
    Replay(ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Score(_) => "score",
            Command::Select(_) => "select",
            Command::Manipulate(_) => "manipulate",
            Command::Toygen(_) => "toygen",
            Command::Train(_) => "train",
            Command::Backtranslate(_) => "backtranslate",
            Command::BtExperiment(_) => "bt-experiment",
            Command::Analyze(_) => "analyze",
            Command::Oracle(_) => "oracle",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    /// Candidate records, one JSON object per line.
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Output: one JSON line per record with the distribution and argmax.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectMode {
    Select,
    Sample,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = SelectMode::Select)]
    mode: SelectMode,
    /// Required with `--mode sample`.
    #[arg(long, required_if_eq("mode", "sample"))]
    seed: Option<u64>,
    /// Output synthetic corpus: source, target, provenance per line.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ManipulateArgs {
    /// Beam synthetic corpus aligned with the monolingual corpus.
    #[arg(long)]
    beam: PathBuf,
    /// Sampling synthetic corpus over the same targets.
    #[arg(long)]
    sampling: PathBuf,
    /// Share of sentences taking the beam output.
    #[arg(long, default_value_t = gammabt::manipulate::DEFAULT_DM_GAMMA)]
    gamma: f64,
    #[arg(long)]
    seed: u64,
    /// Mixed corpus; the split plan goes to `<out>.plan`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Default,
    Tiny,
}

impl Preset {
    fn spec(self, seed: u64) -> ToyTaskSpec {
        match self {
            Preset::Default => ToyTaskSpec { seed, ..Default::default() },
            Preset::Tiny => ToyTaskSpec::tiny(seed),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ToygenArgs {
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    preset: Preset,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    source_vocab: Option<u32>,
    #[arg(long)]
    target_vocab: Option<u32>,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    bitext_size: Option<usize>,
    #[arg(long)]
    mono_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Lm,
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Training files, concatenated. Channels read tab-separated pairs; the
    /// LM reads one sentence per line, or one side of pairs with `--side`.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Channel direction: s2t or t2s.
    #[arg(long, default_value = "s2t")]
    direction: String,
    #[arg(long, value_enum)]
    side: Option<Side>,
    /// LM word vocabulary size; inferred from the data when absent.
    #[arg(long)]
    vocab: Option<u32>,
    #[arg(long)]
    source_vocab: Option<u32>,
    #[arg(long)]
    target_vocab: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BacktranslateArgs {
    #[arg(long)]
    mono: PathBuf,
    /// Target-to-source channel model.
    #[arg(long)]
    backward: PathBuf,
    /// Source LM (used by the Gamma strategies).
    #[arg(long)]
    lm: PathBuf,
    /// none, beam, sampling, beam-weak, dm[:gamma[:seed]],
    /// gamma-select[:gamma[:n]] or gamma-sample[:gamma[:n]].
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BEAM_SIZE)]
    beam_size: usize,
    /// Also write the sampled candidate pools to `<out>.candidates.jsonl`.
    #[arg(long)]
    emit_candidates: bool,
    /// Pool size for `--emit-candidates` when the strategy has none.
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pool_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BtExperimentArgs {
    /// `key = value` experiment configuration; defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated run seeds, overriding the configuration.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// JSON lines, one per cell; the table goes to `<out>.table.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Synthetic or parallel corpus (tab-separated), or one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = Side::Source)]
    side: Side,
    /// Vocabulary size of the analyzed side; inferred when absent.
    #[arg(long)]
    vocab: Option<u32>,
    /// Backward model for the quality report.
    #[arg(long)]
    backward: Option<PathBuf>,
    /// Source LM for the importance report (needs `--backward`).
    #[arg(long, requires = "backward")]
    lm: Option<PathBuf>,
    /// Reference sources for BLEU of the synthetic sources.
    #[arg(long, requires = "backward")]
    references: Option<PathBuf>,
    /// Also dump `index<TAB>singular value` to `<out>.spectrum.tsv`.
    #[arg(long)]
    emit_spectrum: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    #[arg(long, value_enum, default_value_t = Preset::Tiny)]
    task: Preset,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    targets: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Write to this path instead of the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// What a command read and wrote, for its manifest.
struct Outcome {
    params: serde_json::Value,
    seed: Option<u64>,
    out: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn outcome<A: Serialize>(
    args: &A,
    seed: Option<u64>,
    out: &Path,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
) -> Result<Outcome> {
    Ok(Outcome { params: serde_json::to_value(args)?, seed, out: out.to_path_buf(), inputs, outputs })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn in_file<T>(path: &Path, r: gammabt::Result<T>) -> Result<T> {
    r.with_context(|| path.display().to_string())
}

fn read_candidates(path: &Path) -> Result<Vec<CandidateSet>> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    in_file(path, parse_candidate_records(BufReader::new(file)))
}

fn load_channel(path: &Path) -> Result<ChannelModel> {
    in_file(path, ChannelModel::from_text(&read(path)?))
}

fn load_lm(path: &Path) -> Result<NGramLm> {
    in_file(path, NGramLm::from_text(&read(path)?))
}

fn vocab_of<'a>(sentences: impl IntoIterator<Item = &'a Vec<Token>>) -> u32 {
    sentences.into_iter().flatten().max().map_or(0, |&m| m + 1)
}

#[derive(Serialize)]
struct ScoreLine {
    target_id: u64,
    probs: Vec<f64>,
    argmax: usize,
}

fn score(a: &ScoreArgs) -> Result<Outcome> {
    let params = GammaParams::new(a.gamma)?;
    let mut text = String::new();
    for set in read_candidates(&a.candidates)? {
        let d = gamma_distribution(&set, &params).with_context(|| format!("record {}", set.target_id))?;
        let line = ScoreLine { target_id: set.target_id, argmax: d.argmax(), probs: d.probs };
        text += &serde_json::to_string(&line)?;
        text.push('\n');
    }
    write(&a.out, &text)?;
    outcome(a, None, &a.out, vec![a.candidates.clone()], vec![a.out.clone()])
}

fn select(a: &SelectArgs) -> Result<Outcome> {
    let params = GammaParams::new(a.gamma)?;
    let mut pairs = Vec::new();
    for set in read_candidates(&a.candidates)? {
        let (pick, tag) = match a.mode {
            SelectMode::Select => (gamma_select(&set, &params)?, Provenance::GammaSelect),
            SelectMode::Sample => {
                let seed = a.seed.ok_or_else(|| anyhow!("--seed is required for sampling"))?;
                let mut rng = stream(seed, Purpose::GammaSample, set.target_id);
                (gamma_sample(&set, &params, &mut rng)?, Provenance::GammaSample)
            }
        };
        pairs.push(SyntheticPair::new(set.candidates[pick].tokens.clone(), set.target_tokens.clone(), tag)?);
    }
    write(&a.out, &format_synthetic(&pairs))?;
    outcome(a, a.seed, &a.out, vec![a.candidates.clone()], vec![a.out.clone()])
}

fn manipulate(a: &ManipulateArgs) -> Result<Outcome> {
    let beam = in_file(&a.beam, parse_synthetic(&read(&a.beam)?, Provenance::Beam))?;
    let sampling = in_file(&a.sampling, parse_synthetic(&read(&a.sampling)?, Provenance::Sampling))?;
    if beam.len() != sampling.len() {
        bail!("beam corpus has {} pairs but sampling corpus has {}", beam.len(), sampling.len());
    }
    if let Some(i) = (0..beam.len()).find(|&i| beam[i].target != sampling[i].target) {
        bail!("beam and sampling corpora disagree on the target at line {}", i + 1);
    }
    let mono = MonoCorpus::new(beam.iter().map(|p| p.target.clone()).collect())?;
    let plan = split_monolingual(&mono, a.gamma, a.seed)?;
    let tagged = |pairs: &[SyntheticPair], ids: &[usize], tag| -> Result<BTreeMap<usize, SyntheticPair>> {
        ids.iter()
            .map(|&i| Ok((i, SyntheticPair::new(pairs[i].source.clone(), pairs[i].target.clone(), tag)?)))
            .collect()
    };
    let beam_part = tagged(&beam, &plan.beam_ids, Provenance::Beam)?;
    let sampling_part = tagged(&sampling, &plan.sampling_ids, Provenance::Sampling)?;
    let mixed = assemble_mixed_corpus(&plan, beam_part, sampling_part)?;
    let plan_path = with_suffix(&a.out, ".plan");
    write(&a.out, &format_synthetic(&mixed.pairs))?;
    write(&plan_path, &plan.manifest())?;
    outcome(a, Some(a.seed), &a.out, vec![a.beam.clone(), a.sampling.clone()], vec![a.out.clone(), plan_path])
}

fn task_spec_text(s: &ToyTaskSpec) -> String {
    format!(
        "source_vocab = {}\ntarget_vocab = {}\nmin_len = {}\nmax_len = {}\nchannel_noise = {}\n\
         bitext_size = {}\nmono_size = {}\ntest_size = {}\nlm_concentration = {}\nseed = {}\n",
        s.source_vocab,
        s.target_vocab,
        s.min_len,
        s.max_len,
        s.channel_noise,
        s.bitext_size,
        s.mono_size,
        s.test_size,
        s.lm_concentration,
        s.seed
    )
}

fn toygen(a: &ToygenArgs) -> Result<Outcome> {
    let mut spec = a.preset.spec(a.seed);
    spec.source_vocab = a.source_vocab.unwrap_or(spec.source_vocab);
    spec.target_vocab = a.target_vocab.unwrap_or(spec.target_vocab);
    spec.min_len = a.min_len.unwrap_or(spec.min_len);
    spec.max_len = a.max_len.unwrap_or(spec.max_len);
    spec.channel_noise = a.noise.unwrap_or(spec.channel_noise);
    spec.bitext_size = a.bitext_size.unwrap_or(spec.bitext_size);
    spec.mono_size = a.mono_size.unwrap_or(spec.mono_size);
    spec.test_size = a.test_size.unwrap_or(spec.test_size);
    let task = generate_toy_task(&spec)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let files = [
        ("spec.txt", task_spec_text(&spec)),
        ("bitext.tsv", format_parallel(task.bitext.pairs())),
        ("bitext_sources.txt", format_sentences(&task.bitext.sources())),
        ("mono.txt", format_sentences(task.mono.sentences())),
        ("mono_sources.txt", format_sentences(&task.mono_sources)),
        ("test.tsv", format_parallel(task.test.pairs())),
        ("truth_lm.txt", task.truth_lm.to_text()),
        ("truth_channel.txt", task.truth_channel.to_text()),
    ];
    let mut outputs = Vec::new();
    for (name, text) in files {
        let path = a.out.join(name);
        write(&path, &text)?;
        outputs.push(path);
    }
    outcome(a, Some(a.seed), &a.out, Vec::new(), outputs)
}

fn train(a: &TrainArgs) -> Result<Outcome> {
    let text = a.inputs.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?.concat();
    let model = match a.model {
        ModelKind::Lm => {
            let sentences = match a.side {
                None => parse_sentences(&text)?,
                Some(side) => {
                    parse_parallel(&text)?.into_iter().map(|(s, t)| if side == Side::Source { s } else { t }).collect()
                }
            };
            let vocab = a.vocab.unwrap_or_else(|| vocab_of(&sentences));
            train_ngram_lm(&sentences, LmVocab::with_markers(vocab), a.order, a.alpha)?.to_text()
        }
        ModelKind::Channel => {
            let direction: Direction = a.direction.parse()?;
            let pairs = parse_parallel(&text)?;
            let sv = a.source_vocab.unwrap_or_else(|| vocab_of(pairs.iter().map(|p| &p.0)));
            let tv = a.target_vocab.unwrap_or_else(|| vocab_of(pairs.iter().map(|p| &p.1)));
            let corpus = ParallelCorpus::new(pairs, sv, tv)?;
            train_channel(&corpus, direction, a.alpha)?.to_text()
        }
    };
    write(&a.out, &model)?;
    outcome(a, None, &a.out, a.inputs.clone(), vec![a.out.clone()])
}

fn backtranslate(a: &BacktranslateArgs) -> Result<Outcome> {
    let strategy: BtStrategy = a.strategy.parse()?;
    let mono = MonoCorpus::new(in_file(&a.mono, parse_sentences(&read(&a.mono)?))?)?;
    let backward = load_channel(&a.backward)?;
    let lm = load_lm(&a.lm)?;
    let opts = SynthesisOptions { seed: a.seed, beam_size: a.beam_size };
    let synthetic = synthesize_corpus(&mono, &backward, &lm, &strategy, &opts)?;
    write(&a.out, &format_synthetic(&synthetic))?;
    let mut outputs = vec![a.out.clone()];
    if a.emit_candidates {
        let n = match strategy {
            BtStrategy::GammaSelect { n, .. } | BtStrategy::GammaSample { n, .. } => n,
            _ => a.pool_size,
        };
        let sets = mono
            .sentences()
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let mut rng = stream(a.seed, Purpose::Candidates, i as u64);
                sample_candidate_set(&backward, &lm, i as u64, y, n, &mut rng)
            })
            .collect::<gammabt::Result<Vec<_>>>()?;
        let path = with_suffix(&a.out, ".candidates.jsonl");
        let mut buf = Vec::new();
        write_candidate_records(&sets, &mut buf)?;
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(path);
    }
    let inputs = vec![a.mono.clone(), a.backward.clone(), a.lm.clone()];
    outcome(a, Some(a.seed), &a.out, inputs, outputs)
}

fn bt_experiment(a: &BtExperimentArgs) -> Result<Outcome> {
    let mut config = match &a.config {
        Some(p) => in_file(p, ExperimentConfig::from_kv_text(&read(p)?))?,
        None => ExperimentConfig::default(),
    };
    config.seeds = a.seeds.clone();
    let report = run_bt_experiment(&config)?;
    let table = report.to_table();
    let table_path = with_suffix(&a.out, ".table.txt");
    write(&a.out, &report.to_jsonl())?;
    write(&table_path, &table)?;
    print!("{table}");
    let inputs = a.config.iter().cloned().collect();
    let mut params = serde_json::to_value(a)?;
    params["resolved_config"] = config.to_kv_text().into();
    Ok(Outcome {
        params,
        seed: a.seeds.first().copied(),
        out: a.out.clone(),
        inputs,
        outputs: vec![a.out.clone(), table_path],
    })
}

#[derive(Serialize)]
struct AnalysisReport {
    profile: CorpusProfile,
    mean_length: f64,
    spectrum: SpectrumReport,
    quality: Option<QualityReport>,
    importance: Option<ImportanceReport>,
}

fn analyze(a: &AnalyzeArgs) -> Result<Outcome> {
    let text = read(&a.corpus)?;
    let tabular = text.lines().any(|l| l.contains('\t'));
    let synthetic =
        if tabular { in_file(&a.corpus, parse_synthetic(&text, Provenance::Sampling))? } else { Vec::new() };
    let sentences: Vec<Vec<Token>> = if tabular {
        synthetic.iter().map(|p| if a.side == Side::Source { p.source.clone() } else { p.target.clone() }).collect()
    } else {
        in_file(&a.corpus, parse_sentences(&text))?
    };
    let vocab = a.vocab.unwrap_or_else(|| vocab_of(&sentences));
    let profile = corpus_profile(&sentences)?;
    let spectrum = singular_spectrum(&sentence_representation_matrix(&sentences, vocab)?)?;

    let mut inputs = vec![a.corpus.clone()];
    let (mut quality, mut importance) = (None, None);
    if let Some(bp) = &a.backward {
        if !tabular {
            bail!("quality reports need a tab-separated synthetic corpus");
        }
        let backward = load_channel(bp)?;
        inputs.push(bp.clone());
        let refs = match &a.references {
            Some(rp) => {
                inputs.push(rp.clone());
                Some(in_file(rp, parse_sentences(&read(rp)?))?)
            }
            None => None,
        };
        quality = Some(corpus_quality_report(&synthetic, &backward, refs.as_deref())?);
        if let Some(lp) = &a.lm {
            inputs.push(lp.clone());
            importance = Some(corpus_importance_report(&synthetic, &load_lm(lp)?, &backward)?);
        }
    }

    let mut outputs = vec![a.out.clone()];
    if a.emit_spectrum {
        let path = with_suffix(&a.out, ".spectrum.tsv");
        let dump: String = spectrum.singular_values.iter().enumerate().map(|(i, s)| format!("{i}\t{s}\n")).collect();
        write(&path, &dump)?;
        outputs.push(path);
    }
    let mean_length = profile.mean_length();
    let report = AnalysisReport { profile, mean_length, spectrum, quality, importance };
    write(&a.out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    outcome(a, None, &a.out, inputs, outputs)
}

fn oracle(a: &OracleArgs) -> Result<Outcome> {
    let task = generate_toy_task(&a.task.spec(a.seed))?;
    let forward = train_channel(&task.bitext, Direction::SourceToTarget, a.alpha)?;
    let backward = train_channel(&task.bitext, Direction::TargetToSource, a.alpha)?;
    let mut text =
        String::from("index\ty\texact_log_marginal\tjensen_bound\tmc_estimate\tmc_std_error\tmc_sample_sd\tbound_ok\n");
    for (i, (_, y)) in task.test.pairs().iter().take(a.targets).enumerate() {
        let mut rng = stream(a.seed, Purpose::Oracle, i as u64);
        let r = oracle_for_target(&task.truth_lm, &backward, &forward, y, a.samples, &mut rng)
            .with_context(|| format!("target {i}"))?;
        let ok = r.jensen_bound <= r.exact_log_marginal + 1e-9;
        text += &format!(
            "{i}\t{}\t{}\t{}\t{}\t{}\t{}\t{ok}\n",
            crate::records::format_tokens(&r.y),
            r.exact_log_marginal,
            r.jensen_bound,
            r.mc_estimate,
            r.mc_std_error,
            r.mc_sample_sd
        );
    }
    write(&a.out, &text)?;
    outcome(a, Some(a.seed), &a.out, Vec::new(), vec![a.out.clone()])
}

fn replace_out(args: &[String], out: &Path) -> Result<Vec<String>> {
    let new = out.to_string_lossy().into_owned();
    let mut replaced = false;
    let mut result = Vec::with_capacity(args.len());
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        if arg == "--out" {
            iter.next().ok_or_else(|| anyhow!("manifest args end after --out"))?;
            result.extend(["--out".to_string(), new.clone()]);
            replaced = true;
        } else if arg.starts_with("--out=") {
            result.push(format!("--out={new}"));
            replaced = true;
        } else {
            result.push(arg.clone());
        }
    }
    if !replaced {
        bail!("manifest args carry no --out");
    }
    Ok(result)
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let manifest = RunManifest::read(&a.manifest)?;
    for (path, digest) in &manifest.inputs {
        let now = crate::manifest::sha256_file(Path::new(path))?;
        if &now != digest {
            bail!("input {path} changed since the recorded run");
        }
    }
    let args = match &a.out {
        Some(out) => replace_out(&manifest.args, out)?,
        None => manifest.args.clone(),
    };
    let cli = Cli::try_parse_from(std::iter::once("gammabt".to_string()).chain(args.iter().cloned()))
        .map_err(|e| anyhow!("manifest args no longer parse: {}", e.kind()))?;
    if matches!(cli.command, Command::Replay(_)) {
        bail!("cannot replay a replay");
    }
    let result = execute(&cli, &args)?;
    let outputs = digest_outputs(&result.out, &result.outputs)?;
    if outputs != manifest.outputs {
        let differing: Vec<&String> = manifest
            .outputs
            .keys()
            .chain(outputs.keys())
            .filter(|k| manifest.outputs.get(*k) != outputs.get(*k))
            .collect();
        bail!("replayed outputs differ from the manifest: {differing:?}");
    }
    println!("replay matches: {} outputs identical", outputs.len());
    Ok(())
}

/// Runs a parsed command line and writes its manifest.
fn execute(cli: &Cli, args: &[String]) -> Result<Outcome> {
    let result = match &cli.command {
        Command::Score(a) => score(a),
        Command::Select(a) => select(a),
        Command::Manipulate(a) => manipulate(a),
        Command::Toygen(a) => toygen(a),
        Command::Train(a) => train(a),
        Command::Backtranslate(a) => backtranslate(a),
        Command::BtExperiment(a) => bt_experiment(a),
        Command::Analyze(a) => analyze(a),
        Command::Oracle(a) => oracle(a),
        Command::Replay(_) => unreachable!("replay is dispatched separately"),
    }?;
    let manifest = RunManifest {
        tool: "gammabt".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        args: args.to_vec(),
        params: result.params.clone(),
        seed: result.seed,
        inputs: digest_inputs(&result.inputs)?,
        outputs: digest_outputs(&result.out, &result.outputs)?,
    };
    manifest.write(&result.out)?;
    Ok(result)
}

pub fn dispatch(cli: &Cli, args: &[String]) -> Result<()> {
    match &cli.command {
        Command::Replay(a) => replay(a),
        _ => execute(cli, args).map(|_| ()),
    }
}
