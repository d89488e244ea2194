use canonlab_core::corpus::Corpus;
use canonlab_core::embed::{embed_sequences, EmbedConfig, EmbeddingTable, FactorizeConfig};
use canonlab_core::features::*;
use canonlab_core::lexicon::Lexicon;
use canonlab_core::synth::threaded_corpus;
use canonlab_core::textprep::{resolve_corpus, tokenize, word_tokens, NearestAntecedentResolver, PhraseSequence, PhraseVocab, VocabConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

struct Fixture {
    corpus: Corpus,
    texts: Vec<String>,
    seqs: Vec<PhraseSequence>,
    vocab: PhraseVocab,
    table: EmbeddingTable,
    canon: Lexicon,
}

fn fixture(n: usize) -> Fixture {
    let mut comments = threaded_corpus(n, 11);
    comments[3].body = "[deleted]".into();
    comments[3].empty_text = true;
    comments[5].body = "I trust Q but the arrests failed; therefore I weigh both. Is \"hrc\" done?".into();
    let corpus = Corpus::from_comments(comments).unwrap();
    let texts: Vec<String> = resolve_corpus(&corpus, &NearestAntecedentResolver::new())
        .unwrap()
        .into_iter()
        .map(|r| r.text)
        .collect();
    let vocab = PhraseVocab::learn(&texts, VocabConfig::default()).unwrap();
    let seqs: Vec<_> = corpus.comments().iter().zip(&texts).map(|(c, t)| tokenize(&c.id, t, &vocab)).collect();
    let cfg = EmbedConfig { factorize: FactorizeConfig { k: SIF_DIM, seed: 1, ..Default::default() }, ..Default::default() };
    let table = embed_sequences(&seqs, &vocab, &cfg).unwrap();
    let canon = Lexicon::read("foes\thrc\nfoes\thillary\nmovement,heroes\tthe plan\nexpectations\tarrests\n".as_bytes()).unwrap();
    Fixture { corpus, texts, seqs, vocab, table, canon }
}

#[test]
fn row_equals_concatenated_families() {
    let f = fixture(20);
    let (cats, cues, ic) = (CategoryLexica::builtin(), CueLists::builtin(), ConnectiveIc::default());
    let ex = Extractor::new(&f.canon, &cats, &cues, &ic, &f.vocab, &f.table).unwrap();
    let (m, debug) = ex.extract_all(&f.corpus, &f.texts, &f.seqs).unwrap();
    assert_eq!((m.rows(), m.width), (20, f.canon.len() + 80));

    let canon = CanonIndex::new(&f.canon);
    let mut sifs: Vec<Vec<f64>> = Vec::new();
    let mut heads: Vec<Vec<f64>> = Vec::new();
    for (i, c) in f.corpus.comments().iter().enumerate() {
        let (text, seq) = if c.empty_text {
            (String::new(), PhraseSequence { comment_id: c.id.clone(), tokens: vec![] })
        } else {
            (f.texts[i].clone(), f.seqs[i].clone())
        };
        let lower = word_tokens(&text);
        let words: Vec<&str> = lower.iter().map(String::as_str).collect();
        let mut row = canon_counts(&seq, &canon).rates;
        row.extend(category_counts(&words, &cats.lists));
        row.push(ic.score(&text));
        row.extend(credibility_cues(&text, &words, &cues));
        row.extend(feedback(c, f.corpus.parent_of(c)).0);
        heads.push(row);
        sifs.push(sif_raw(&seq, &f.vocab, &f.table, SIF_A));
    }
    remove_common_component(&mut sifs);
    for i in 0..20 {
        let mut want = heads[i].clone();
        want.extend(&sifs[i]);
        assert_eq!(m.row(i), want.as_slice(), "row {i}");
    }
    assert!(debug.iter().filter(|d| d.missing_parent).count() >= 1);

    // deleted comment: zeros except IC floor, feedback and (zero) SIF
    let r = m.row(3);
    let k = f.canon.len();
    assert!(r[..k + 19].iter().all(|&v| v == 0.0));
    assert_eq!(r[k + 19], 1.0);
    assert!(r[k + 20..k + 28].iter().all(|&v| v == 0.0));
    assert!(r[k + 30..].iter().all(|&v| v == 0.0));
    // ic and question/quote cues on the planted comment
    let r = m.row(5);
    // one connective of each kind over two sentences: 1 + 3(1/2) + 3(1/2)
    assert_eq!(r[k + 19], 4.0);
    assert_eq!(r[k + 27], 1.0);
    assert_eq!(r[k + 26], 1.0);
}

#[test]
fn sif_component_mean_projection_vanishes() {
    let f = fixture(60);
    let mut sifs: Vec<Vec<f64>> = f.seqs.iter().map(|s| sif_raw(s, &f.vocab, &f.table, SIF_A)).collect();
    let u = remove_common_component(&mut sifs).unwrap();
    let mean: f64 = sifs.iter().map(|r| r.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>()).sum::<f64>() / sifs.len() as f64;
    assert!(mean.abs() < 1e-6);
}

#[test]
fn rates_invariant_under_duplicated_text() {
    let cats = CategoryLexica::builtin();
    let cues = CueLists::builtin();
    let canon = CanonIndex::from_phrases(["hrc", "the plan"]);
    let vocab = PhraseVocab::learn(&["maybe hrc lost the plan. Actually I know."], VocabConfig::default()).unwrap();
    let t1 = "maybe hrc lost the plan. Actually I know.";
    let t2 = format!("{t1} {t1}");
    let w = |t: &str| word_tokens(t);
    let (w1, w2) = (w(t1), w(&t2));
    let v1: Vec<&str> = w1.iter().map(String::as_str).collect();
    let v2: Vec<&str> = w2.iter().map(String::as_str).collect();
    assert_eq!(category_counts(&v1, &cats.lists), category_counts(&v2, &cats.lists));
    assert_eq!(credibility_cues(t1, &v1, &cues)[..6], credibility_cues(&t2, &v2, &cues)[..6]);
    let c1 = canon_counts(&tokenize("a", t1, &vocab), &canon).rates;
    let c2 = canon_counts(&tokenize("a", &t2, &vocab), &canon).rates;
    assert_eq!(c1, c2);
}

/// Regex oracle: a category hits at word position i if any entry, written
/// as an anchored regex, matches the space-joined text starting at i.
fn regex_rate(words: &[String], entries: &[String]) -> f64 {
    if words.is_empty() {
        return 0.0;
    }
    let res: Vec<Regex> = entries
        .iter()
        .map(|e| {
            let (stem, wild) = match e.strip_suffix('*') {
                Some(s) => (s, true),
                None => (e.as_str(), false),
            };
            let body = regex::escape(&stem.replace('_', " "));
            Regex::new(&format!("^{body}{}( |$)", if wild { "[^ ]*" } else { "" })).unwrap()
        })
        .collect();
    let hits = (0..words.len())
        .filter(|&i| {
            let tail = words[i..].join(" ");
            res.iter().any(|r| r.is_match(&tail))
        })
        .count();
    100.0 * hits as f64 / words.len() as f64
}

#[test]
fn synthetic_categories_match_regex_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let alphabet = ["ab", "abc", "abd", "b", "ba", "bab", "c", "ca", "cab", "d"];
    for _ in 0..20 {
        let mut file = String::new();
        let mut entries = Vec::new();
        for c in 0..CATEGORY_COUNT {
            let mut es = Vec::new();
            for _ in 0..rng.random_range(1..4) {
                let mut e = alphabet[rng.random_range(0..alphabet.len())].to_string();
                if rng.random_bool(0.2) {
                    e = format!("{e}_{}", alphabet[rng.random_range(0..alphabet.len())]);
                }
                if rng.random_bool(0.4) {
                    e.push('*');
                }
                es.push(e);
            }
            file.push_str(&format!("cat{c}: {}\n", es.join(" ")));
            entries.push(es);
        }
        let cats = CategoryLexica::parse(&file).unwrap();
        let words: Vec<String> =
            (0..rng.random_range(0..30)).map(|_| alphabet[rng.random_range(0..alphabet.len())].to_string()).collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let got = category_counts(&refs, &cats.lists);
        for (c, es) in entries.iter().enumerate() {
            assert!((got[c] - regex_rate(&words, es)).abs() < 1e-12, "category {c}: {es:?} on {words:?}");
        }
    }
}
