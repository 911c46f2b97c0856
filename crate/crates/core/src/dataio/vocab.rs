use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const ADJECTIVES_FILE: &str = "adjectives.txt";
pub const NOUNS_FILE: &str = "nouns.txt";
pub const ANPS_FILE: &str = "anps.csv";

/// Minimum number of distinct nouns an adjective should pair with.
pub const MIN_NOUNS_PER_ADJECTIVE: usize = 3;

/// Adjective, noun and adjective-noun pair class spaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    adjectives: Vec<String>,
    nouns: Vec<String>,
    anps: Vec<(u32, u32)>,
    index: HashMap<(u32, u32), usize>,
}

impl Vocabulary {
    /// Rejects duplicate pairs and out-of-range indices.
    pub fn new(adjectives: Vec<String>, nouns: Vec<String>, anps: Vec<(u32, u32)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(anps.len());
        for (k, &(a, n)) in anps.iter().enumerate() {
            if a as usize >= adjectives.len() {
                return Err(Error::OutOfRange {
                    what: "adjective index",
                    index: a as usize,
                    len: adjectives.len(),
                });
            }
            if n as usize >= nouns.len() {
                return Err(Error::OutOfRange {
                    what: "noun index",
                    index: n as usize,
                    len: nouns.len(),
                });
            }
            if index.insert((a, n), k).is_some() {
                return Err(Error::InvalidInput(format!("duplicate ANP ({a},{n})")));
            }
        }
        if anps.is_empty() {
            return Err(Error::InvalidInput("vocabulary has no ANPs".into()));
        }
        Ok(Self {
            adjectives,
            nouns,
            anps,
            index,
        })
    }

    /// Every adjective paired with every noun, with generated names.
    pub fn grid(n_adj: usize, n_noun: usize) -> Result<Self> {
        let anps = (0..n_adj as u32)
            .flat_map(|a| (0..n_noun as u32).map(move |n| (a, n)))
            .collect();
        Self::new(default_names("adj", n_adj), default_names("noun", n_noun), anps)
    }

    pub fn n_adj(&self) -> usize {
        self.adjectives.len()
    }

    pub fn n_noun(&self) -> usize {
        self.nouns.len()
    }

    pub fn n_anp(&self) -> usize {
        self.anps.len()
    }

    pub fn adjectives(&self) -> &[String] {
        &self.adjectives
    }

    pub fn nouns(&self) -> &[String] {
        &self.nouns
    }

    pub fn anps(&self) -> &[(u32, u32)] {
        &self.anps
    }

    pub fn anp(&self, k: usize) -> (usize, usize) {
        let (a, n) = self.anps[k];
        (a as usize, n as usize)
    }

    pub fn anp_index(&self, adj: usize, noun: usize) -> Option<usize> {
        self.index.get(&(adj as u32, noun as u32)).copied()
    }

    /// `"adjective noun"`.
    pub fn anp_name(&self, k: usize) -> String {
        let (a, n) = self.anp(k);
        format!("{} {}", self.adjectives[a], self.nouns[n])
    }

    /// Looks an ANP up by its index or by its `"adjective noun"` name.
    pub fn find_anp(&self, key: &str) -> Option<usize> {
        if let Ok(k) = key.trim().parse::<usize>() {
            return (k < self.n_anp()).then_some(k);
        }
        (0..self.n_anp()).find(|&k| self.anp_name(k) == key.trim())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let adjectives = read_tokens(&dir.join(ADJECTIVES_FILE))?;
        let nouns = read_tokens(&dir.join(NOUNS_FILE))?;
        let anps_path = dir.join(ANPS_FILE);
        let anps = parse_anps(&fs::read_to_string(&anps_path)?, &anps_path.display().to_string())?;
        Self::new(adjectives, nouns, anps)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let lines = |items: &[String]| items.iter().map(|s| format!("{s}\n")).collect::<String>();
        fs::write(dir.join(ADJECTIVES_FILE), lines(&self.adjectives))?;
        fs::write(dir.join(NOUNS_FILE), lines(&self.nouns))?;
        let anps: String = self.anps.iter().map(|(a, n)| format!("{a},{n}\n")).collect();
        fs::write(dir.join(ANPS_FILE), anps)?;
        Ok(())
    }

    /// Checks the curation constraints. Violations are warnings only.
    pub fn validate(&self) -> VocabReport {
        let mut nouns_per_adj = vec![BTreeSet::new(); self.n_adj()];
        let mut noun_used = vec![false; self.n_noun()];
        for &(a, n) in &self.anps {
            nouns_per_adj[a as usize].insert(n);
            noun_used[n as usize] = true;
        }
        let warnings = nouns_per_adj
            .iter()
            .enumerate()
            .filter_map(|(a, set)| match set.len() {
                0 => Some(VocabWarning::UnreferencedAdjective {
                    adjective: self.adjectives[a].clone(),
                }),
                n if n < MIN_NOUNS_PER_ADJECTIVE => Some(VocabWarning::FewNouns {
                    adjective: self.adjectives[a].clone(),
                    distinct_nouns: n,
                }),
                _ => None,
            })
            .chain(noun_used.iter().enumerate().filter(|(_, used)| !**used).map(|(n, _)| {
                VocabWarning::UnreferencedNoun {
                    noun: self.nouns[n].clone(),
                }
            }))
            .collect();
        VocabReport {
            nouns_per_adjective: nouns_per_adj.iter().map(BTreeSet::len).collect(),
            warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VocabWarning {
    FewNouns { adjective: String, distinct_nouns: usize },
    UnreferencedAdjective { adjective: String },
    UnreferencedNoun { noun: String },
}

impl std::fmt::Display for VocabWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VocabWarning::FewNouns {
                adjective,
                distinct_nouns,
            } => write!(
                f,
                "adjective '{adjective}' pairs with {distinct_nouns} distinct nouns (< {MIN_NOUNS_PER_ADJECTIVE})"
            ),
            VocabWarning::UnreferencedAdjective { adjective } => {
                write!(f, "adjective '{adjective}' is not used by any ANP")
            }
            VocabWarning::UnreferencedNoun { noun } => write!(f, "noun '{noun}' is not used by any ANP"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabReport {
    pub nouns_per_adjective: Vec<usize>,
    pub warnings: Vec<VocabWarning>,
}

impl VocabReport {
    pub fn passes(&self) -> bool {
        self.warnings.is_empty()
    }
}

pub(crate) fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn read_tokens(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let location = path.display().to_string();
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let token = line.trim();
            if token.is_empty() {
                Err(Error::parse(&location, i + 1, "empty token"))
            } else {
                Ok(token.to_string())
            }
        })
        .collect()
}

fn parse_anps(text: &str, location: &str) -> Result<Vec<(u32, u32)>> {
    let mut anps = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (a, n) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(location, line_no, "expected 'adj_index,noun_index'"))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<u32>()
                .map_err(|e| Error::parse(location, line_no, format!("bad index '{}': {e}", s.trim())))
        };
        let pair = (parse(a)?, parse(n)?);
        if let Some(first) = seen.insert(pair, line_no) {
            return Err(Error::parse(
                location,
                line_no,
                format!("duplicate ANP {},{} (first on line {first})", pair.0, pair.1),
            ));
        }
        anps.push(pair);
    }
    Ok(anps)
}
