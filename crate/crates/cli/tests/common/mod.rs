#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use canonlab_core::corpus::{Comment, CommentKind};
use canonlab_core::sampling::Label;
use canonlab_core::synth::{threaded_corpus, to_jsonl, AliasFixture};
use tempfile::TempDir;

pub fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["canonlab", "--workspace", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    canonlab_cli::cli::run(full)
}

pub fn run_ok(dir: &Path, args: &[&str]) {
    assert_eq!(run(dir, args), 0, "canonlab {args:?} failed in {}", dir.display());
}

pub fn copy_dir(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for e in fs::read_dir(src).unwrap() {
        let e = e.unwrap();
        let to = dst.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &to);
        } else {
            fs::copy(e.path(), to).unwrap();
        }
    }
}

/// Oracle labels keyed on the planted term group a text mentions.
pub fn oracle_label(text: &str) -> Label {
    let words: Vec<String> = text.to_lowercase().split(|c: char| !c.is_alphanumeric()).map(str::to_string).collect();
    let has = |w: &str| words.iter().any(|x| x == w);
    if ["hrc", "hillary", "killary", "hc"].iter().any(|w| has(w)) {
        Label::Belief
    } else if has("seedb") || has("aliasb") {
        Label::Dissonance
    } else {
        Label::Neutral
    }
}

pub const SEED_LEXICON: &str = "foes\thrc\nheroes,movement\tthe plan\nexpectations\tseeda\npractices\tseedc\nfoes\tseedd\n";

fn alias_comments() -> Vec<Comment> {
    AliasFixture::hrc()
        .generate(0)
        .into_iter()
        .enumerate()
        .map(|(i, body)| Comment {
            id: format!("a{i:05}"),
            parent_id: None,
            thread_id: format!("a{i:05}"),
            community: if i % 3 == 0 { "beta" } else { "alpha" }.into(),
            author: format!("u{}", i % 40),
            created_at: 1_500_000_000 + i as i64 * 3600,
            body,
            score: (i % 7) as i64,
            kind: CommentKind::Post,
            empty_text: false,
        })
        .collect()
}

const ALIAS_CONFIG: &str = r#"
[ingest]
input = "comments.jsonl"

[lexicon]
seed = "seed.tsv"

[pool]
random_size = 300

[pool.biased]
k = 3
n_per_extreme = 50
sweep_max = 4

[annotate]
pool = "random"

[annotate.active]
eval_interval = 50
seed = 3
"#;

/// Workspace over the planted-alias corpus with vocab, embeddings, canon,
/// features and pools built. Built once per test binary.
pub fn alias_template() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        run_ok(p, &["init"]);
        fs::write(p.join("canonlab.toml"), ALIAS_CONFIG).unwrap();
        fs::write(p.join("comments.jsonl"), to_jsonl(&alias_comments())).unwrap();
        fs::write(p.join("seed.tsv"), SEED_LEXICON).unwrap();
        for step in ["ingest", "vocab", "embed", "lexicon", "features", "pool"] {
            run_ok(p, &[step]);
        }
        dir
    })
    .path()
}

/// Fresh copy of the alias template.
pub fn alias_workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(alias_template(), dir.path());
    dir
}

pub const THREADED_CONFIG: &str = r#"
[ingest]
input = "comments.jsonl"

[vocab]
min_count = 5

[embed]
k = 20
seed = 1
doc_seed = 2

[lexicon]
seed = "seed.tsv"

[pool]
random_size = 70
random_seed = 5

[pool.biased]
k = 3
n_per_extreme = 15
sweep_max = 4
n_init = 2

[train]
folds = 3
seed = 7

[train.rf]
n_trees = [25]
max_depth = [4, 8]
min_samples_leaf = [1]
max_features = ["sqrt"]

[train.gbt]
n_rounds = [20]
learning_rate = [0.1]
max_depth = [3]
lambda = [1.0]
min_child_weight = [1.0]

[predict]
strategy = "average"

[importance]
n_lambdas = 20
folds = 3

[engagement]
community = "alpha"
ban_time = 1504500000

[its]
window = 5

[tenure]
min_comments = 3
prefix = 3
censor_days = 1
remain_days = 2
"#;

/// Threaded 200-comment fixture with inputs and label files written; no
/// stage run yet.
pub fn threaded_inputs(dir: &Path) {
    run_ok(dir, &["init"]);
    fs::write(dir.join("canonlab.toml"), THREADED_CONFIG).unwrap();
    fs::write(dir.join("comments.jsonl"), to_jsonl(&threaded_corpus(200, 21))).unwrap();
    fs::write(dir.join("seed.tsv"), SEED_LEXICON).unwrap();
}

/// `comment_id<TAB>label` lines for every comment of a pool.
pub fn pool_label_file(dir: &Path, pool: &str) -> PathBuf {
    let corpus = canonlab_core::corpus::Corpus::read_snapshot(
        fs::read(dir.join("artifacts/corpus.jsonl")).unwrap().as_slice(),
    )
    .unwrap();
    let ids = fs::read_to_string(dir.join(format!("artifacts/pool_{pool}.txt"))).unwrap();
    let mut out = String::new();
    for id in ids.lines().skip(1) {
        let c = corpus.get(id).unwrap();
        out.push_str(&format!("{id}\t{}\n", oracle_label(&c.body)));
    }
    let path = dir.join(format!("labels_{pool}.tsv"));
    fs::write(&path, out).unwrap();
    path
}

pub const PIPELINE: [&str; 6] = ["ingest", "vocab", "embed", "lexicon", "features", "pool"];
pub const DOWNSTREAM: [&str; 5] = ["train", "predict", "importance", "its", "tenure"];

/// Run every batch stage on the threaded fixture.
pub fn full_pipeline(dir: &Path) {
    threaded_inputs(dir);
    for step in PIPELINE {
        run_ok(dir, &[step]);
    }
    for pool in ["random", "biased"] {
        let f = pool_label_file(dir, pool);
        run_ok(dir, &["annotate", "--pool", pool, "--input", f.to_str().unwrap()]);
    }
    for step in DOWNSTREAM {
        run_ok(dir, &[step]);
    }
}
