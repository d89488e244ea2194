use std::hint::black_box;

use canonlab_bench::{alias_world, embed_config};
use canonlab_core::embed::{count_cooc, embed_sequences, pmi, StopList};
use canonlab_core::engagement::{fit_its, negbin, ItsWindow, Scope};
use canonlab_core::importance::{fit_importance, ImportanceConfig};
use canonlab_core::learner::{ActiveConfig, SelectionStrategy};
use canonlab_core::lexicon::{EvidenceIndex, ExpansionSession, Lexicon, SuggestContext};
use canonlab_core::sampling::{one_sided_selection, Label};
use canonlab_core::synth::{count_regression, its_planted, labels_to_target, separable_pool};
use canonlab_core::textprep::{PhraseVocab, VocabConfig};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn embedding(c: &mut Criterion) {
    let w = alias_world(2000, 0);
    let mut g = c.benchmark_group("embed");
    g.sample_size(10);
    g.bench_function("learn vocab 2000 comments", |b| {
        b.iter(|| PhraseVocab::learn(black_box(&w.texts), VocabConfig::default()).unwrap())
    });
    g.bench_function("cooc and ppmi", |b| {
        b.iter(|| pmi(&count_cooc(black_box(&w.seqs), &w.vocab, 5, &StopList::none()).unwrap()).unwrap())
    });
    for k in [50, 200] {
        g.bench_function(format!("full table k={k}"), |b| {
            b.iter(|| embed_sequences(black_box(&w.seqs), &w.vocab, &embed_config(k)).unwrap())
        });
    }
    g.finish();
}

fn lexicon(c: &mut Criterion) {
    let w = alias_world(2000, 1);
    let table = w.table(100);
    let evidence = EvidenceIndex::build(&w.seqs, &w.vocab, 5);
    let ctx = SuggestContext { vocab: &w.vocab, table: &table, evidence: &evidence };
    let seed = Lexicon::read("foes\tseeda\nheroes\tseedb\nmovement\tseedc\n".as_bytes()).unwrap();
    c.bench_function("suggest without query", |b| {
        b.iter(|| {
            let mut s = ExpansionSession::new("bench", seed.clone());
            s.suggest(ctx, None, 20)
        })
    });
}

fn sampling_and_learning(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Vec<f64>> = (0..600).map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<usize> = (0..600).map(|i| if i % 20 == 0 { 2 } else { i % 2 }).collect();
    c.bench_function("one-sided selection 600x10", |b| b.iter(|| one_sided_selection(black_box(&points), &labels, 0).unwrap()));

    let pool = separable_pool(1000, 0.05, 5, 0);
    let mut g = c.benchmark_group("active");
    g.sample_size(10);
    g.bench_function("uncertainty sampling to target", |b| {
        b.iter(|| {
            let cfg = ActiveConfig { strategy: SelectionStrategy::Uncertainty, holdout_fraction: 0.0, ..ActiveConfig::default() };
            labels_to_target(&pool, cfg, 0.6, 1000).unwrap()
        })
    });
    g.finish();

    let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..80).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let classes: Vec<Label> = (0..300).map(|i| Label::from_index(i % 3)).collect();
    let slots: Vec<_> = (0..80)
        .map(|j| canonlab_core::features::Slot {
            name: format!("f{j}"),
            family: canonlab_core::features::Family::Category,
            normalization: "raw".into(),
            tag: "LEX".into(),
        })
        .collect();
    let mut g = c.benchmark_group("importance");
    g.sample_size(10);
    g.bench_function("elastic net path with cv 300x80", |b| {
        b.iter(|| fit_importance(black_box(&rows), &classes, &slots, &ImportanceConfig::default()).unwrap())
    });
    g.finish();
}

fn engagement(c: &mut Criterion) {
    let obs = its_planted(200, [0.5, -0.01, -0.02, -0.01], 0.01, ItsWindow::default(), 0);
    c.bench_function("its fit 200 users", |b| b.iter(|| fit_its(black_box(&obs), Scope::Inside, false).unwrap()));
    let names: Vec<String> = ["const", "x1", "x2", "x3"].map(String::from).to_vec();
    let (x, y) = count_regression(2000, &[3.6, -0.06, 0.04, -0.03], 0.3, 0);
    c.bench_function("nb2 fit n=2000", |b| b.iter(|| negbin(black_box(&x), &y, &names).unwrap()));
}

criterion_group!(benches, embedding, lexicon, sampling_and_learning, engagement);
criterion_main!(benches);
