use std::collections::HashMap;

use crate::error::{Error, Result};

pub const CATEGORY_COUNT: usize = 19;
pub const CUE_LISTS: [&str; 4] = ["booster", "hedge", "modal", "evidential"];

const BUILTIN_CATEGORIES: &str = include_str!("../../data/categories.txt");
const BUILTIN_CUES: &str = include_str!("../../data/cues.txt");
const BUILTIN_VALENCE: &str = include_str!("../../data/valence.txt");

/// One entry of a word list: a word sequence whose last word may end in a
/// prefix wildcard. Multi-word entries are written with `_` between words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub words: Vec<String>,
    pub wildcard: bool,
}

impl Pattern {
    pub fn parse(raw: &str) -> Result<Pattern> {
        let raw = raw.trim().to_lowercase();
        let (body, wildcard) = match raw.strip_suffix('*') {
            Some(b) => (b.to_string(), true),
            None => (raw.clone(), false),
        };
        if body.is_empty() || body.contains('*') {
            return Err(Error::invalid(format!("bad pattern {raw:?}: wildcard must be terminal on a non-empty stem")));
        }
        let words: Vec<String> = body.split('_').map(str::to_string).collect();
        if words.iter().any(String::is_empty) {
            return Err(Error::invalid(format!("bad pattern {raw:?}")));
        }
        Ok(Pattern { words, wildcard })
    }

    pub fn matches_at(&self, words: &[&str], at: usize) -> bool {
        let m = self.words.len();
        if at + m > words.len() {
            return false;
        }
        let last = m - 1;
        self.words.iter().enumerate().all(|(k, w)| {
            let t = words[at + k];
            if k == last && self.wildcard {
                t.starts_with(w.as_str())
            } else {
                t == w
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternList {
    pub name: String,
    pub patterns: Vec<Pattern>,
}

impl PatternList {
    /// Number of positions at which some entry matches.
    pub fn count(&self, words: &[&str]) -> usize {
        (0..words.len()).filter(|&i| self.patterns.iter().any(|p| p.matches_at(words, i))).count()
    }

    /// Matches per 100 words; 0 for empty input.
    pub fn rate(&self, words: &[&str]) -> f64 {
        if words.is_empty() {
            0.0
        } else {
            100.0 * self.count(words) as f64 / words.len() as f64
        }
    }
}

/// Parse `name: entry entry ...` lines; `#` starts a comment line.
pub fn parse_lists(text: &str) -> Result<Vec<PatternList>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::Parse { line: n + 1, message: "expected \"name: entries\"".into() })?;
        let patterns =
            rest.split_whitespace().map(Pattern::parse).collect::<Result<Vec<_>>>().map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        if patterns.is_empty() {
            return Err(Error::Parse { line: n + 1, message: format!("list {name:?} is empty") });
        }
        out.push(PatternList { name: name.trim().to_string(), patterns });
    }
    Ok(out)
}

/// Exactly 19 named word categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryLexica {
    pub lists: Vec<PatternList>,
}

impl CategoryLexica {
    pub fn parse(text: &str) -> Result<Self> {
        let lists = parse_lists(text)?;
        if lists.len() != CATEGORY_COUNT {
            return Err(Error::Schema(format!("expected {CATEGORY_COUNT} categories, found {}", lists.len())));
        }
        Ok(CategoryLexica { lists })
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CATEGORIES).expect("shipped category file is valid")
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.lists.iter().map(|l| l.name.as_str())
    }
}

/// Booster, hedge, modal and evidential lists plus a word valence table.
#[derive(Debug, Clone, PartialEq)]
pub struct CueLists {
    pub lists: [PatternList; 4],
    pub valence: HashMap<String, f64>,
}

impl CueLists {
    pub fn parse(cues: &str, valence: &str) -> Result<Self> {
        let mut by_name: HashMap<String, PatternList> =
            parse_lists(cues)?.into_iter().map(|l| (l.name.clone(), l)).collect();
        let mut take = |name: &str| {
            by_name.remove(name).ok_or_else(|| Error::Schema(format!("cue list {name:?} missing")))
        };
        let lists = [take(CUE_LISTS[0])?, take(CUE_LISTS[1])?, take(CUE_LISTS[2])?, take(CUE_LISTS[3])?];
        Ok(CueLists { lists, valence: parse_valence(valence)? })
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CUES, BUILTIN_VALENCE).expect("shipped cue files are valid")
    }
}

pub fn parse_valence(text: &str) -> Result<HashMap<String, f64>> {
    let mut out = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(w), Some(v), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Parse { line: n + 1, message: "expected word<TAB>valence".into() });
        };
        let v: f64 = v.parse().map_err(|_| Error::Parse { line: n + 1, message: format!("bad valence {v:?}") })?;
        out.insert(w.to_lowercase(), v);
    }
    Ok(out)
}
