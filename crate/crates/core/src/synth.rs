//! Seeded synthetic fixtures shared by tests, benchmarks and demos.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use nalgebra::DMatrix;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use crate::corpus::{Comment, CommentKind};
use crate::engagement::{ItsObservation, ItsWindow};
use crate::error::Result;
use crate::learner::{evaluate, ActiveConfig, ActiveSession, Next, Outcome};
use crate::sampling::Label;

/// Default planted pairs: each alias shares most of its contexts with its seed.
pub const ALIAS_PAIRS: [(&str, &str); 5] = [
    ("seeda", "aliasa"),
    ("seedb", "aliasb"),
    ("seedc", "aliasc"),
    ("seedd", "aliasd"),
    ("seede", "aliase"),
];

/// A group of interchangeable terms: the first is the seed, the rest aliases.
#[derive(Debug, Clone)]
pub struct AliasGroup {
    pub terms: Vec<String>,
}

impl AliasGroup {
    pub fn new(terms: &[&str]) -> Self {
        AliasGroup { terms: terms.iter().map(|t| t.to_string()).collect() }
    }
}

#[derive(Debug, Clone)]
pub struct AliasFixture {
    pub groups: Vec<AliasGroup>,
    pub comments: usize,
    pub length: usize,
    /// Share of context tokens drawn from the group pool rather than the
    /// term's private pool.
    pub shared: f64,
    /// Share of tokens drawn from the corpus-wide filler pool.
    pub filler: f64,
    /// Size of a pair's shared context vocabulary; larger groups scale it
    /// so context words keep the same frequency.
    pub context_words: usize,
}

impl AliasFixture {
    pub fn pairs() -> Self {
        AliasFixture {
            groups: ALIAS_PAIRS.iter().map(|(s, a)| AliasGroup::new(&[s, a])).collect(),
            comments: 2000,
            length: 10,
            shared: 0.9,
            filler: 0.3,
            context_words: 200,
        }
    }

    /// "hrc" with its nicknames plus four unrelated groups. The larger group
    /// gets a larger corpus so each nickname is seen as often as a pair term.
    pub fn hrc() -> Self {
        let mut f = Self::pairs();
        f.groups[0] = AliasGroup::new(&["hrc", "hillary", "killary", "hc"]);
        f.comments = 2800;
        f
    }

    pub fn generate(&self, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let private_pool = 10;
        let filler_pool = 200;
        let pool: Vec<usize> =
            self.groups.iter().map(|g| (self.context_words * g.terms.len() / 2).max(self.context_words)).collect();
        let total_terms: usize = self.groups.iter().map(|g| g.terms.len()).sum();
        (0..self.comments)
            .map(|_| {
                // Terms are equally likely, so larger groups get more comments.
                let mut pick = rng.random_range(0..total_terms);
                let g = self.groups.iter().position(|gr| {
                    let hit = pick < gr.terms.len();
                    if !hit {
                        pick -= gr.terms.len();
                    }
                    hit
                });
                let g = g.expect("pick below total");
                let t = pick;
                let at = rng.random_range(0..self.length);
                // A dominant function word, the usual stop-list casualty.
                let mut words = vec!["the".to_string()];
                for i in 0..self.length {
                    if i == at {
                        words.push(self.groups[g].terms[t].clone());
                    } else if rng.random_bool(self.filler) {
                        words.push(format!("filler{}", rng.random_range(0..filler_pool)));
                    } else if rng.random_bool(self.shared) {
                        words.push(format!("g{g}w{}", rng.random_range(0..pool[g])));
                    } else {
                        words.push(format!("g{g}t{t}w{}", rng.random_range(0..private_pool)));
                    }
                }
                words.join(" ")
            })
            .collect()
    }
}

/// Threaded corpus across two communities with posts, replies, pronouns,
/// planted aliases and scores, for end-to-end runs.
pub fn threaded_corpus(n: usize, seed: u64) -> Vec<Comment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texts = AliasFixture { comments: n, ..AliasFixture::hrc() }.generate(seed ^ 0x5eed);
    let communities = ["alpha", "beta"];
    let openers = ["She said", "They think", "He knows", "It is", "Trust the plan and", "Maybe"];
    let t0 = 1_500_000_000i64;
    let mut out: Vec<Comment> = Vec::with_capacity(n);
    let mut thread_ids: Vec<String> = Vec::new();
    for (i, text) in texts.into_iter().enumerate() {
        let id = format!("c{i:05}");
        let new_thread = out.is_empty() || rng.random_bool(0.1);
        let (parent_id, thread_id, kind) = if new_thread {
            thread_ids.push(id.clone());
            (None, id.clone(), CommentKind::Post)
        } else {
            let thread = thread_ids.choose(&mut rng).expect("non-empty").clone();
            let members: Vec<&Comment> = out.iter().filter(|c| c.thread_id == thread).collect();
            let parent = members.choose(&mut rng).expect("thread has its post");
            (Some(parent.id.clone()), thread, CommentKind::Comment)
        };
        let community = communities[thread_ids.iter().position(|t| *t == thread_id).unwrap_or(0) % 2];
        let body = format!("{} {}. {}?", openers.choose(&mut rng).expect("non-empty"), text, text.split(' ').next().unwrap_or(""));
        out.push(Comment {
            id,
            parent_id,
            thread_id,
            community: community.to_string(),
            author: format!("u{}", rng.random_range(0..25)),
            created_at: t0 + i as i64 * 3600 * 6,
            body,
            score: rng.random_range(-5..40),
            kind,
            empty_text: false,
        });
    }
    out
}

/// Serialize comments as one JSON object per line in the default field layout.
pub fn to_jsonl(comments: &[Comment]) -> String {
    let mut s = String::new();
    for c in comments {
        s.push_str(&serde_json::to_string(c).expect("comment serializes"));
        s.push('\n');
    }
    s
}


/// Pool of Gaussian blobs with oracle labels. The minority class (dissonance)
/// sits midway between the two majority centres along the first axis.
#[derive(Debug, Clone)]
pub struct SeparablePool {
    pub ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Label>,
}

pub fn separable_pool(n: usize, minority: f64, dim: usize, seed: u64) -> SeparablePool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.6).expect("valid sd");
    let n_min = (minority * n as f64).round() as usize;
    let mut pool = SeparablePool { ids: Vec::new(), x: Vec::new(), y: Vec::new() };
    for i in 0..n {
        let label = if i < n_min {
            Label::Dissonance
        } else if (i - n_min).is_multiple_of(2) {
            Label::Belief
        } else {
            Label::Neutral
        };
        let centre = match label {
            Label::Belief => 4.0,
            Label::Dissonance => 0.0,
            Label::Neutral => -4.0,
        };
        let mut row: Vec<f64> = (0..dim).map(|_| noise.sample(&mut rng)).collect();
        row[0] += centre;
        pool.x.push(row);
        pool.y.push(label);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let x = order.iter().map(|&i| pool.x[i].clone()).collect();
    let y = order.iter().map(|&i| pool.y[i]).collect();
    SeparablePool { ids: (0..n).map(|i| format!("p{i:05}")).collect(), x, y }
}

/// Labels an oracle must supply before the interim model reaches `tau`
/// precision and recall on every class, judged against the whole pool.
pub fn labels_to_target(pool: &SeparablePool, cfg: ActiveConfig, tau: f64, max_labels: usize) -> Result<Option<usize>> {
    let mut session = ActiveSession::new(pool.ids.clone(), &pool.x, cfg)?;
    let truth: HashMap<&str, Label> = pool.ids.iter().map(String::as_str).zip(pool.y.iter().copied()).collect();
    for n in 1..=max_labels {
        let Next::Item(id) = session.next_to_label() else { return Ok(None) };
        session.submit_label(&id, truth[id.as_str()])?;
        let pred: Vec<Outcome> = pool.x.iter().map(|r| session.predict(r).argmax().into()).collect();
        if evaluate(&pool.y, &pred)?.meets(tau) {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Planted interrupted series `y = b0 + b1 T + b2 D + b3 P + e`, one row
/// per user-week.
pub fn its_planted(users: usize, beta: [f64; 4], sigma: f64, window: ItsWindow, seed: u64) -> Vec<ItsObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("valid sd");
    let n_pre = window.pre_weeks() as i64;
    let mut obs = Vec::with_capacity(users * window.weeks());
    for u in 0..users {
        for rel in -n_pre..=n_pre {
            let (t, d, p) = window.encode(rel).expect("inside window");
            let mean = beta[0] + beta[1] * t as f64 + beta[2] * d as f64 + beta[3] * p as f64;
            let e = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            obs.push(ItsObservation { user: format!("u{u:04}"), t, d, p, y: mean + e });
        }
    }
    obs
}

/// Design with a constant column and `beta.len() - 1` standard-normal
/// regressors, and NB2 counts with the given dispersion (Poisson when
/// `alpha` is zero).
pub fn count_regression(n: usize, beta: &[f64], alpha: f64, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).expect("valid sd");
    let k = beta.len();
    let x = DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { z.sample(&mut rng) });
    let y = (0..n)
        .map(|i| {
            let mu = (0..k).map(|j| x[(i, j)] * beta[j]).sum::<f64>().exp();
            let rate = if alpha > 0.0 {
                mu * Gamma::new(1.0 / alpha, alpha).expect("valid gamma").sample(&mut rng)
            } else {
                mu
            };
            if rate > 0.0 {
                Poisson::new(rate).expect("valid rate").sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    (x, y)
}
