//! Ingestion of threaded discussion dumps and comment-tree reconstruction.
//!
//! Records arrive as one JSON object per line. A [`FieldMapping`] names the
//! source field for each comment attribute so that differently shaped dumps
//! share one ingest path. Malformed lines never abort an ingest; they are
//! collected in the reject report together with their line number.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::io::{BufRead, Write};

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const CORPUS_FORMAT: &str = "canonlab-corpus";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommentKind {
    Post,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub parent_id: Option<String>,
    pub thread_id: String,
    pub community: String,
    pub author: String,
    pub created_at: i64,
    pub body: String,
    pub score: i64,
    pub kind: CommentKind,
    /// Set for deleted, removed or blank bodies. Kept for tree structure only.
    #[serde(default)]
    pub empty_text: bool,
}

impl Comment {
    pub fn is_post(&self) -> bool {
        self.kind == CommentKind::Post
    }
}

fn is_empty_body(body: &str) -> bool {
    matches!(body.trim(), "" | "[deleted]" | "[removed]")
}

/// Source field names for each comment attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMapping {
    pub id: String,
    pub parent_id: String,
    pub thread_id: String,
    pub community: String,
    pub author: String,
    pub created_at: String,
    pub body: String,
    pub score: String,
    /// Optional explicit kind field. When absent the kind is inferred from
    /// the presence of a parent id.
    pub kind: Option<String>,
    /// Prefixes stripped from id-like fields (e.g. `t1_`, `t3_`).
    pub strip_prefixes: Vec<String>,
}

impl Default for FieldMapping {
    fn default() -> Self {
        FieldMapping {
            id: "id".into(),
            parent_id: "parent_id".into(),
            thread_id: "thread_id".into(),
            community: "community".into(),
            author: "author".into(),
            created_at: "created_at".into(),
            body: "body".into(),
            score: "score".into(),
            kind: Some("kind".into()),
            strip_prefixes: Vec::new(),
        }
    }
}

impl FieldMapping {
    /// Mapping for Pushshift-style Reddit dumps.
    pub fn pushshift() -> Self {
        FieldMapping {
            id: "id".into(),
            parent_id: "parent_id".into(),
            thread_id: "link_id".into(),
            community: "subreddit".into(),
            author: "author".into(),
            created_at: "created_utc".into(),
            body: "body".into(),
            score: "score".into(),
            kind: None,
            strip_prefixes: vec!["t1_".into(), "t3_".into()],
        }
    }

    fn strip<'a>(&self, s: &'a str) -> &'a str {
        for p in &self.strip_prefixes {
            if let Some(rest) = s.strip_prefix(p.as_str()) {
                return rest;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    comments: Vec<Comment>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    pub rejects: Vec<Reject>,
    pub duplicates: usize,
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn scalar_i64(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.is_finite()).map(|f| f as i64)),
        Value::String(s) => s
            .trim()
            .parse::<i64>()
            .ok()
            .or_else(|| s.trim().parse::<f64>().ok().filter(|f| f.is_finite()).map(|f| f as i64)),
        _ => None,
    }
}

fn parse_record(line: &str, map: &FieldMapping) -> std::result::Result<Comment, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid json: {e}"))?;
    let obj = value.as_object().ok_or("record is not an object")?;
    let get = |key: &str| obj.get(key).filter(|v| !v.is_null());

    let id = get(&map.id)
        .and_then(scalar_string)
        .ok_or_else(|| format!("missing field {:?}", map.id))?;
    let id = map.strip(&id).to_string();
    if id.is_empty() {
        return Err("empty id".into());
    }
    let body = get(&map.body)
        .and_then(|v| v.as_str().map(str::to_owned))
        .ok_or_else(|| format!("missing field {:?}", map.body))?;
    let created_at = get(&map.created_at)
        .and_then(scalar_i64)
        .ok_or_else(|| format!("missing or invalid field {:?}", map.created_at))?;
    if created_at < 0 {
        return Err(format!("negative timestamp {created_at}"));
    }
    let parent_id = get(&map.parent_id)
        .and_then(scalar_string)
        .map(|p| map.strip(&p).to_string())
        .filter(|p| !p.is_empty());
    let kind = match map.kind.as_deref().and_then(get).and_then(|v| v.as_str()) {
        Some("post") | Some("submission") => CommentKind::Post,
        Some("comment") | Some("reply") => CommentKind::Comment,
        Some(other) => return Err(format!("unknown kind {other:?}")),
        None if parent_id.is_none() => CommentKind::Post,
        None => CommentKind::Comment,
    };
    // Pushshift marks top-level comments with the submission as parent, so a
    // comment without a parent is only possible with an explicit kind field.
    if kind == CommentKind::Post && parent_id.is_some() {
        return Err("post carries a parent id".into());
    }
    if kind == CommentKind::Comment && parent_id.is_none() {
        return Err("comment without parent id".into());
    }
    let thread_id = get(&map.thread_id)
        .and_then(scalar_string)
        .map(|t| map.strip(&t).to_string())
        .unwrap_or_else(|| if kind == CommentKind::Post { id.clone() } else { String::new() });
    let community = get(&map.community).and_then(scalar_string).unwrap_or_default();
    let author = get(&map.author).and_then(scalar_string).unwrap_or_default();
    let score = get(&map.score).and_then(scalar_i64).unwrap_or(0);
    let empty_text = is_empty_body(&body);
    Ok(Comment { id, parent_id, thread_id, community, author, created_at, body, score, kind, empty_text })
}

impl Corpus {
    /// Ingest line-delimited records. Blank lines are skipped silently.
    pub fn ingest<R: BufRead>(reader: R, mapping: &FieldMapping) -> Result<Corpus> {
        let mut corpus = Corpus::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match parse_record(&line, mapping) {
                Ok(c) => {
                    if corpus.index.contains_key(&c.id) {
                        warn!("duplicate comment id {} at line {}; keeping first", c.id, n + 1);
                        corpus.duplicates += 1;
                    } else {
                        corpus.push(c);
                    }
                }
                Err(reason) => corpus.rejects.push(Reject { line: n + 1, reason }),
            }
        }
        Ok(corpus)
    }

    pub fn from_comments(comments: Vec<Comment>) -> Result<Corpus> {
        let mut corpus = Corpus::default();
        for c in comments {
            if corpus.index.contains_key(&c.id) {
                return Err(Error::invalid(format!("duplicate comment id {}", c.id)));
            }
            corpus.push(c);
        }
        Ok(corpus)
    }

    fn push(&mut self, c: Comment) {
        self.index.insert(c.id.clone(), self.comments.len());
        self.comments.push(c);
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn get(&self, id: &str) -> Option<&Comment> {
        self.index.get(id).map(|&i| &self.comments[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn parent_of(&self, c: &Comment) -> Option<&Comment> {
        c.parent_id.as_deref().and_then(|p| self.get(p))
    }

    /// Write a versioned snapshot: header line then one comment per line.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{}",
            serde_json::json!({"format": CORPUS_FORMAT, "version": CORPUS_VERSION, "comments": self.comments.len()})
        )?;
        for c in &self.comments {
            serde_json::to_writer(&mut w, c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(reader: R) -> Result<Corpus> {
        let mut lines = reader.lines();
        let header: Value = match lines.next() {
            Some(l) => serde_json::from_str(&l?)?,
            None => return Err(Error::Parse { line: 1, message: "missing header".into() }),
        };
        if header["format"] != CORPUS_FORMAT {
            return Err(Error::Version { expected: CORPUS_FORMAT.into(), found: header["format"].to_string() });
        }
        if header["version"] != CORPUS_VERSION {
            return Err(Error::Version {
                expected: CORPUS_VERSION.to_string(),
                found: header["version"].to_string(),
            });
        }
        let mut comments = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            let c: Comment = serde_json::from_str(&line)
                .map_err(|e| Error::Parse { line: n + 2, message: e.to_string() })?;
            comments.push(c);
        }
        Corpus::from_comments(comments)
    }

    pub fn write_rejects<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.rejects {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// One thread rooted at a post, or a quarantined orphan subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommentTree {
    pub root: String,
    pub children: BTreeMap<String, Vec<String>>,
    /// True when the root is a reply whose parent is missing from the corpus.
    pub orphan: bool,
}

impl CommentTree {
    pub fn node_count(&self) -> usize {
        1 + self.children.values().map(Vec::len).sum::<usize>()
    }

    pub fn edge_count(&self) -> usize {
        self.node_count() - 1
    }

    pub fn depth(&self) -> usize {
        let mut depth = 0;
        let mut queue = VecDeque::from([(self.root.as_str(), 0usize)]);
        while let Some((id, d)) = queue.pop_front() {
            depth = depth.max(d);
            if let Some(kids) = self.children.get(id) {
                queue.extend(kids.iter().map(|k| (k.as_str(), d + 1)));
            }
        }
        depth
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Forest {
    pub trees: Vec<CommentTree>,
    pub orphans: Vec<CommentTree>,
}

impl Forest {
    pub fn orphan_count(&self) -> usize {
        self.orphans.iter().map(CommentTree::node_count).sum()
    }

    pub fn all(&self) -> impl Iterator<Item = &CommentTree> {
        self.trees.iter().chain(self.orphans.iter())
    }
}

fn grow<'a>(
    root: &'a str,
    orphan: bool,
    children: &HashMap<&'a str, Vec<&'a str>>,
    visited: &mut HashSet<&'a str>,
) -> CommentTree {
    let mut tree = CommentTree { root: root.to_string(), children: BTreeMap::new(), orphan };
    let mut queue = VecDeque::from([root]);
    visited.insert(root);
    while let Some(id) = queue.pop_front() {
        if let Some(kids) = children.get(id) {
            let mut list = Vec::with_capacity(kids.len());
            for &k in kids {
                if visited.insert(k) {
                    list.push(k.to_string());
                    queue.push_back(k);
                }
            }
            if !list.is_empty() {
                tree.children.insert(id.to_string(), list);
            }
        }
    }
    tree
}

/// Reconstruct one tree per post. Replies whose parent is missing are
/// quarantined as orphan subtrees rather than attached elsewhere.
pub fn build_trees(corpus: &Corpus) -> Result<Forest> {
    let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut orphan_roots = Vec::new();
    for c in corpus.comments() {
        if let Some(p) = c.parent_id.as_deref() {
            if corpus.get(p).is_some() {
                children.entry(p).or_default().push(&c.id);
            } else {
                orphan_roots.push(c.id.as_str());
            }
        }
    }

    let mut visited: HashSet<&str> = HashSet::new();
    let mut forest = Forest::default();
    for c in corpus.comments().iter().filter(|c| c.is_post()) {
        forest.trees.push(grow(&c.id, false, &children, &mut visited));
    }
    for root in orphan_roots {
        forest.orphans.push(grow(root, true, &children, &mut visited));
    }

    // Anything unreached hangs off a parent cycle.
    if let Some(start) = corpus.comments().iter().find(|c| !visited.contains(c.id.as_str())) {
        let mut seen: Vec<&str> = Vec::new();
        let mut cur = start;
        loop {
            if let Some(pos) = seen.iter().position(|&s| s == cur.id) {
                let mut cycle: Vec<String> = seen[pos..].iter().map(|s| s.to_string()).collect();
                cycle.push(cur.id.clone());
                return Err(Error::Cycle(cycle));
            }
            seen.push(&cur.id);
            match corpus.parent_of(cur) {
                Some(p) => cur = p,
                None => return Err(Error::Cycle(seen.iter().map(|s| s.to_string()).collect())),
            }
        }
    }
    Ok(forest)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairContext<'a> {
    pub parent: Option<&'a Comment>,
    pub child: &'a Comment,
}

/// Breadth-first parent/child pairs, root first as `(None, root)`.
pub fn pairs<'a>(tree: &CommentTree, corpus: &'a Corpus) -> Result<Vec<PairContext<'a>>> {
    let lookup = |id: &str| {
        corpus.get(id).ok_or_else(|| Error::invalid(format!("tree references unknown comment {id}")))
    };
    let mut out = Vec::with_capacity(tree.node_count());
    out.push(PairContext { parent: None, child: lookup(&tree.root)? });
    let mut queue = VecDeque::from([tree.root.as_str()]);
    while let Some(id) = queue.pop_front() {
        let parent = lookup(id)?;
        for k in tree.children.get(id).into_iter().flatten() {
            out.push(PairContext { parent: Some(parent), child: lookup(k)? });
            queue.push_back(k);
        }
    }
    Ok(out)
}
