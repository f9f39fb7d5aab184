//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use gammabt::analysis::{corpus_bleu, singular_spectrum, Matrix};
use gammabt::btloop::{
    exact_marginal, importance_mc_estimate, jensen_lower_bound, run_bt_experiment, BtStrategy, ExperimentConfig,
    ExperimentReport,
};
use gammabt::rng::{stream, Purpose};
use gammabt::scoring::{gamma_distribution, gamma_select, standardize, Candidate, CandidateSet, GammaParams};
use gammabt::toyseq::{generate_toy_task, train_channel, Direction, ToyTaskSpec};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn within(limit: Duration, elapsed: Duration, v: Verdict) -> Verdict {
    if elapsed > limit {
        Verdict::new(false, format!("{}; took {elapsed:.1?}, limit {limit:?}", v.detail))
    } else {
        v
    }
}

// ---------------------------------------------------------------- 1

fn random_set<R: Rng>(rng: &mut R, equal_length: bool) -> CandidateSet {
    let n = rng.random_range(2..=50);
    let shared = rng.random_range(0..20);
    let candidates = (0..n)
        .map(|_| {
            let len = if equal_length { shared } else { rng.random_range(0..20) };
            // occasional exact duplicates exercise ties
            let q = if rng.random_bool(0.1) { -3.0 } else { rng.random_range(-80.0..0.0) };
            Candidate::new(vec![0; len], q, rng.random_range(-120.0..0.0)).unwrap()
        })
        .collect();
    CandidateSet::new(0, vec![1], candidates).unwrap()
}

fn argmax_value(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn check_scoring_set<R: Rng>(rng: &mut R) -> Result<(), String> {
    let set = random_set(rng, false);
    let gamma = rng.random_range(0.0..=1.0);
    let d = gamma_distribution(&set, &GammaParams::new(gamma).unwrap()).map_err(|e| e.to_string())?;
    let sum: f64 = d.probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || d.probs.iter().any(|&p| p <= 0.0) {
        return Err(format!("distribution sums to {sum}"));
    }

    let norm = |f: &dyn Fn(&Candidate) -> f64| -> Vec<f64> {
        set.candidates.iter().map(|c| f(c) / (c.tokens.len() + 1) as f64).collect()
    };
    let q = norm(&|c| c.log_q);
    let imp = norm(&|c| c.log_lm - c.log_q);
    let s0 = gamma_select(&set, &GammaParams::new(0.0).unwrap()).unwrap();
    let s1 = gamma_select(&set, &GammaParams::new(1.0).unwrap()).unwrap();
    if q[s0] < argmax_value(&q) - 1e-9 || imp[s1] < argmax_value(&imp) - 1e-9 {
        return Err("boundary gamma does not select the single-factor argmax".into());
    }

    let eq = random_set(rng, true);
    let params = GammaParams::new(rng.random_range(0.0..=1.0)).unwrap();
    let base = gamma_distribution(&eq, &params).unwrap();
    let shift = rng.random_range(-30.0..30.0);
    for on_q in [true, false] {
        let shifted = eq
            .candidates
            .iter()
            .map(|c| {
                let (dq, dl) = if on_q { (shift, 0.0) } else { (0.0, shift) };
                Candidate::new(c.tokens.clone(), c.log_q + dq, c.log_lm + dl).unwrap()
            })
            .collect();
        let moved = gamma_distribution(&CandidateSet::new(0, vec![1], shifted).unwrap(), &params).unwrap();
        if base.probs.iter().zip(&moved.probs).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err("equal-length shift changed the distribution".into());
        }
    }

    let lengths: Vec<usize> = set.candidates.iter().map(|c| c.tokens.len() + 1).collect();
    let values: Vec<f64> = set.candidates.iter().map(|c| c.log_q).collect();
    let s = standardize(&values, &lengths, 1e-12).unwrap();
    if s.sigma > 1e-12 {
        let n = s.values.len() as f64;
        let mean = s.values.iter().sum::<f64>() / n;
        let sd = (s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if mean.abs() > 1e-9 || (sd - 1.0).abs() > 1e-6 {
            return Err(format!("standardized mean {mean}, sd {sd}"));
        }
    }
    Ok(())
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = stream(2024, Purpose::Test, 1);
    let cases = 10_000;
    for i in 0..cases {
        if let Err(e) = check_scoring_set(&mut rng) {
            return Verdict::new(false, format!("case {i}: {e}"));
        }
    }
    within(Duration::from_secs(10), start.elapsed(), Verdict::new(true, format!("{cases} random candidate sets")))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let seed = 1;
    let task = generate_toy_task(&ToyTaskSpec::tiny(seed)).unwrap();
    let forward = train_channel(&task.bitext, Direction::SourceToTarget, 0.1).unwrap();
    let backward = train_channel(&task.bitext, Direction::TargetToSource, 0.1).unwrap();
    let targets: Vec<Vec<u32>> = task.test.targets().into_iter().take(100).collect();

    let outcomes: Vec<Result<usize, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = targets
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let (task, forward, backward) = (&task, &forward, &backward);
                scope.spawn(move || {
                    let exact = exact_marginal(&task.truth_lm, forward, y).map_err(|e| e.to_string())?;
                    let bound = jensen_lower_bound(&task.truth_lm, forward, y).map_err(|e| e.to_string())?;
                    if bound > exact + 1e-9 {
                        return Err(format!("target {i}: bound {bound} above marginal {exact}"));
                    }
                    for attempt in 0..3u64 {
                        let mut rng = stream(seed, Purpose::Oracle, (attempt << 32) | i as u64);
                        let est = importance_mc_estimate(&task.truth_lm, backward, forward, y, 100_000, &mut rng)
                            .map_err(|e| e.to_string())?;
                        if (est.mean - bound).abs() <= 3.0 * est.std_error {
                            return Ok(attempt as usize);
                        }
                    }
                    Err(format!("target {i}: estimate outside 3 standard errors after 2 retries"))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut retries = 0;
    for o in outcomes {
        match o {
            Ok(r) => retries += r,
            Err(e) => return Verdict::new(false, e),
        }
    }
    within(
        Duration::from_secs(120),
        start.elapsed(),
        Verdict::new(true, format!("100 targets, bound <= marginal everywhere, {retries} retries used")),
    )
}

// ---------------------------------------------------------- 3, 4, 5, 7

fn diag(report: &ExperimentReport, s: &BtStrategy, seed: u64) -> gammabt::btloop::SyntheticDiagnostics {
    report.cell(s, seed).and_then(|c| c.synthetic.clone()).expect("diagnostics present")
}

fn bleu(report: &ExperimentReport, s: &BtStrategy, seed: u64) -> f64 {
    report.cell(s, seed).expect("cell present").test_bleu
}

fn count_seeds(pred: impl Fn(u64) -> bool) -> usize {
    SEEDS.iter().filter(|&&s| pred(s)).count()
}

fn criterion_3(report: &ExperimentReport, elapsed: Duration) -> Verdict {
    let quality = count_seeds(|s| {
        diag(report, &BtStrategy::Beam, s).mean_log_q > diag(report, &BtStrategy::Sampling, s).mean_log_q
    });
    let importance = count_seeds(|s| {
        diag(report, &BtStrategy::Sampling, s).mean_log_importance
            > diag(report, &BtStrategy::Beam, s).mean_log_importance
    });
    within(
        Duration::from_secs(120),
        elapsed,
        Verdict::new(
            quality >= 4 && importance >= 4,
            format!("quality beam>sampling on {quality}/5, importance sampling>beam on {importance}/5"),
        ),
    )
}

fn criterion_4(report: &ExperimentReport) -> Verdict {
    let n = count_seeds(|s| bleu(report, &BtStrategy::BeamWeak, s) <= bleu(report, &BtStrategy::Beam, s));
    Verdict::new(n >= 4, format!("beam-weak <= beam test BLEU on {n}/5"))
}

fn criterion_5(report: &ExperimentReport, elapsed: Duration) -> Verdict {
    let std = BtStrategy::standard_set();
    let find = |label: &str| std.iter().find(|s| s.to_string().starts_with(label)).copied().unwrap();
    let (beam, sampling) = (BtStrategy::Beam, BtStrategy::Sampling);
    let (gsel, gsam, dm) = (find("gamma-select"), find("gamma-sample"), find("dm"));
    let gamma = count_seeds(|s| {
        let best = bleu(report, &gsel, s).max(bleu(report, &gsam, s));
        best >= bleu(report, &beam, s).max(bleu(report, &sampling, s)) - 0.5
    });
    let mixed = count_seeds(|s| bleu(report, &dm, s) >= bleu(report, &beam, s).min(bleu(report, &sampling, s)) - 0.5);
    within(
        Duration::from_secs(600),
        elapsed,
        Verdict::new(
            gamma >= 4 && mixed >= 4,
            format!("gamma >= max(beam, sampling) - 0.5 on {gamma}/5, {dm} >= min - 0.5 on {mixed}/5"),
        ),
    )
}

fn criterion_7(report: &ExperimentReport) -> Verdict {
    let mut failures = Vec::new();
    let id = singular_spectrum(&Matrix::diagonal(&[1.0, 1.0, 1.0])).unwrap();
    if id.singular_values != [1.0, 1.0, 1.0] {
        failures.push(format!("identity gave {:?}", id.singular_values));
    }
    let d = singular_spectrum(&Matrix::diagonal(&[3.0, 2.0, 1.0])).unwrap();
    if d.singular_values != [3.0, 2.0, 1.0] {
        failures.push(format!("diagonal gave {:?}", d.singular_values));
    }
    let u = [0.5, -1.0, 2.0, 0.25];
    let v = [1.5, 0.2, -0.7];
    let rank1 = Matrix::from_rows(&u.iter().map(|a| v.iter().map(|b| a * b).collect()).collect::<Vec<_>>()).unwrap();
    let above = singular_spectrum(&rank1).unwrap().singular_values.iter().filter(|&&s| s > 1e-9).count();
    if above != 1 {
        failures.push(format!("rank-1 matrix has {above} values above 1e-9"));
    }
    let mut rng = stream(7, Purpose::Test, 50);
    for trial in 0..5 {
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..50).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let s = singular_spectrum(&m).unwrap();
        let energy: f64 = s.singular_values.iter().map(|x| x * x).sum();
        let rel = (energy - m.frobenius_sq()).abs() / m.frobenius_sq();
        if rel > 1e-6 || s.singular_values.windows(2).any(|w| w[0] < w[1]) {
            failures.push(format!("random 50x50 trial {trial}: relative energy error {rel:e}"));
        }
    }
    let n = count_seeds(|s| {
        diag(report, &BtStrategy::Sampling, s).spectral_entropy >= diag(report, &BtStrategy::Beam, s).spectral_entropy
    });
    if n < 4 {
        failures.push(format!("entropy sampling >= beam on only {n}/5"));
    }
    if failures.is_empty() {
        Verdict::new(true, format!("exact cases, 5 random 50x50 energies, entropy sampling >= beam on {n}/5"))
    } else {
        Verdict::new(false, failures.join("; "))
    }
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Verdict {
    let w = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
    let hyps = vec![w("a b c d e f"), w("g h i j")];
    let identity = corpus_bleu(&hyps, &hyps, 4).unwrap();
    let zero = corpus_bleu(&[w("x y z")], &[w("a b c")], 4).unwrap();
    let cat = corpus_bleu(&[w("the cat sat")], &[w("the cat sat down")], 4).unwrap();
    let golden = 60.25286104785453;
    let passed = identity == 100.0 && zero == 0.0 && (cat - golden).abs() <= 1e-4;
    Verdict::new(passed, format!("identity {identity}, zero overlap {zero}, golden {cat:.6} vs {golden:.6}"))
}

// ---------------------------------------------------------------- 8

fn gammabt(dir: &Path, args: &[&str]) -> Result<(), String> {
    let output =
        Command::new(env!("CARGO_BIN_EXE_gammabt")).args(args).current_dir(dir).output().map_err(|e| e.to_string())?;
    if output.status.success() {
        Ok(())
    } else {
        Err(format!("`gammabt {}` failed: {}", args.join(" "), String::from_utf8_lossy(&output.stderr).trim()))
    }
}

/// Every file under `root` whose path starts with `prefix`, keyed by the
/// remainder.
fn outputs_with_prefix(root: &Path, prefix: &str) -> Vec<(String, PathBuf)> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            if path.is_dir() {
                stack.push(path);
            } else if let Some(rest) = rel.strip_prefix(prefix) {
                if !rest.ends_with(".manifest.json") {
                    found.push((rest.to_string(), path));
                }
            }
        }
    }
    found.sort();
    found
}

fn criterion_8() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("experiment.cfg"),
        "source_vocab = 6\ntarget_vocab = 6\nbitext_size = 60\nmono_size = 30\ntest_size = 20\n\
         strategies = beam, sampling, dm:0.5, gamma-sample:0.2:8, beam-weak\n",
    )
    .unwrap();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("toygen", vec!["toygen", "--seed", "3", "--source-vocab", "8", "--target-vocab", "8", "--out", "task"]),
        (
            "train",
            vec!["train", "--model", "channel", "--input", "task/bitext.tsv", "--direction", "t2s", "--out", "bwd.txt"],
        ),
        ("train", vec!["train", "--model", "lm", "--input", "task/bitext.tsv", "--side", "source", "--out", "lm.txt"]),
        (
            "backtranslate",
            vec![
                "backtranslate",
                "--mono",
                "task/mono.txt",
                "--backward",
                "bwd.txt",
                "--lm",
                "lm.txt",
                "--strategy",
                "gamma-sample:0.2:10",
                "--seed",
                "5",
                "--emit-candidates",
                "--out",
                "gs.tsv",
            ],
        ),
        (
            "backtranslate",
            vec![
                "backtranslate",
                "--mono",
                "task/mono.txt",
                "--backward",
                "bwd.txt",
                "--lm",
                "lm.txt",
                "--strategy",
                "beam",
                "--seed",
                "5",
                "--out",
                "beam.tsv",
            ],
        ),
        (
            "backtranslate",
            vec![
                "backtranslate",
                "--mono",
                "task/mono.txt",
                "--backward",
                "bwd.txt",
                "--lm",
                "lm.txt",
                "--strategy",
                "sampling",
                "--seed",
                "5",
                "--out",
                "samp.tsv",
            ],
        ),
        ("score", vec!["score", "--candidates", "gs.tsv.candidates.jsonl", "--out", "scores.jsonl"]),
        ("select", vec!["select", "--candidates", "gs.tsv.candidates.jsonl", "--mode", "select", "--out", "sel.tsv"]),
        (
            "select",
            vec![
                "select",
                "--candidates",
                "gs.tsv.candidates.jsonl",
                "--mode",
                "sample",
                "--seed",
                "9",
                "--out",
                "sam.tsv",
            ],
        ),
        (
            "manipulate",
            vec![
                "manipulate",
                "--beam",
                "beam.tsv",
                "--sampling",
                "samp.tsv",
                "--gamma",
                "0.5",
                "--seed",
                "7",
                "--out",
                "dm.tsv",
            ],
        ),
        (
            "analyze",
            vec![
                "analyze",
                "--corpus",
                "samp.tsv",
                "--backward",
                "bwd.txt",
                "--lm",
                "lm.txt",
                "--references",
                "task/mono_sources.txt",
                "--emit-spectrum",
                "--out",
                "analysis.json",
            ],
        ),
        (
            "oracle",
            vec![
                "oracle",
                "--task",
                "tiny",
                "--seed",
                "2",
                "--targets",
                "5",
                "--samples",
                "2000",
                "--out",
                "oracle.tsv",
            ],
        ),
        ("bt-experiment", vec!["bt-experiment", "--config", "experiment.cfg", "--seeds", "1,2", "--out", "exp.jsonl"]),
    ];
    let mut covered = std::collections::BTreeSet::new();
    for (name, args) in &runs {
        if let Err(e) = gammabt(dir, args) {
            return Verdict::new(false, e);
        }
        covered.insert(*name);
        let out = args[args.iter().position(|a| *a == "--out").unwrap() + 1];
        let replay_out = format!("replay_{out}");
        let manifest = format!("{out}.manifest.json");
        if let Err(e) = gammabt(dir, &["replay", "--manifest", &manifest, "--out", &replay_out]) {
            return Verdict::new(false, e);
        }
        let original = outputs_with_prefix(dir, out);
        let replayed = outputs_with_prefix(dir, &replay_out);
        let keys = |v: &[(String, PathBuf)]| v.iter().map(|(k, _)| k.clone()).collect::<Vec<_>>();
        if original.is_empty() || keys(&original) != keys(&replayed) {
            return Verdict::new(
                false,
                format!("{name}: replay wrote {:?}, original {:?}", keys(&replayed), keys(&original)),
            );
        }
        for ((key, a), (_, b)) in original.iter().zip(&replayed) {
            if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
                return Verdict::new(false, format!("{name}: output '{out}{key}' differs on replay"));
            }
        }
    }
    Verdict::new(
        covered.len() == 9,
        format!("{} commands, {} runs replayed byte-identically", covered.len(), runs.len()),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut results: Vec<(u8, &str, Verdict, Duration)> = Vec::new();
    let mut timed = |id: u8, name: &'static str, f: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let v = f();
        results.push((id, name, v, start.elapsed()));
    };

    timed(1, "scoring invariants", &criterion_1);
    timed(2, "oracle suite", &criterion_2);

    let start = Instant::now();
    let config = ExperimentConfig { seeds: SEEDS.to_vec(), ..Default::default() };
    let report = run_bt_experiment(&config).expect("experiment runs");
    let experiment_time = start.elapsed();
    timed(3, "two-factor ordering", &|| criterion_3(&report, experiment_time));
    timed(4, "weak-backward pattern", &|| criterion_4(&report));
    timed(5, "method ordering", &|| criterion_5(&report, experiment_time));
    timed(6, "BLEU unit correctness", &criterion_6);
    timed(7, "spectrum correctness and entropy pattern", &|| criterion_7(&report));
    timed(8, "CLI reproducibility", &criterion_8);

    println!("\nexperiment (5 seeds) ran in {experiment_time:.2?}");
    print!("{}", report.to_table());
    println!();
    let mut failed = 0;
    for (id, name, v, t) in &results {
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!("criterion {id}: {status} {name}: {} [{t:.2?}]", v.detail);
        failed += usize::from(!v.passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
