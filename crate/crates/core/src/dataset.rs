//! Examples, splits, persistence and the bag-of-words vocabulary.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::executor::{answers_match, execute, Answer};
use crate::mr::{Program, Sketch};
use crate::table::{TableEnv, TableJson};
use crate::text::tokenize;

pub type Tables = BTreeMap<String, Arc<TableEnv>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Split::ALL.into_iter().find(|x| x.as_str() == s).ok_or_else(|| format!("unknown split `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    /// Surface text as stored on disk.
    pub text: String,
    /// Lowercased tokens of `text`.
    pub utterance: Vec<String>,
    pub table_id: String,
    pub answer: Answer,
    pub gold_mr: Option<Program>,
    pub gold_sketch: Option<Sketch>,
    /// Generator template name, when known.
    pub template: Option<String>,
}

impl Example {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        table_id: impl Into<String>,
        answer: Answer,
        gold_mr: Option<Program>,
    ) -> Self {
        let text = text.into();
        Example {
            id: id.into(),
            utterance: tokenize(&text),
            text,
            table_id: table_id.into(),
            answer,
            gold_sketch: gold_mr.as_ref().map(Program::sketch),
            gold_mr,
            template: None,
        }
    }

    /// Easy examples are the ones a single statement answers.
    pub fn is_easy(&self) -> Option<bool> {
        self.gold_mr.as_ref().map(|p| p.len() == 1)
    }
}

#[derive(Serialize, Deserialize)]
struct ExampleLine {
    id: String,
    utterance: String,
    table_id: String,
    answer: Answer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_mr: Option<Program>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    template: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("example {id}: {message}")]
    InvariantViolation { id: String, message: String },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub split: Split,
    pub examples: Vec<Example>,
    pub tables: Arc<Tables>,
}

impl Dataset {
    pub fn table(&self, ex: &Example) -> &TableEnv {
        &self.tables[&ex.table_id]
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Checks every example against its table.
    pub fn validate(&self) -> Result<(), DatasetError> {
        for ex in &self.examples {
            validate_example(ex, &self.tables)?;
        }
        Ok(())
    }

    /// A copy with gold programs removed, as a weak-only corpus would ship.
    pub fn strip_gold(&self) -> Dataset {
        let mut d = self.clone();
        for ex in &mut d.examples {
            ex.gold_mr = None;
            ex.gold_sketch = None;
        }
        d
    }
}

fn validate_example(ex: &Example, tables: &Tables) -> Result<(), DatasetError> {
    let bad = |message: String| DatasetError::InvariantViolation { id: ex.id.clone(), message };
    let env = tables
        .get(&ex.table_id)
        .ok_or_else(|| bad(format!("unknown table `{}`", ex.table_id)))?;
    if let Some(p) = &ex.gold_mr {
        let out = execute(p, env);
        if !answers_match(&out, &ex.answer) {
            return Err(bad(format!("gold program `{p}` gives {out:?}, expected {}", ex.answer)));
        }
        if ex.gold_sketch.as_ref() != Some(&p.sketch()) {
            return Err(bad("gold sketch disagrees with gold program".into()));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

impl Corpus {
    pub fn split(&self, s: Split) -> &Dataset {
        match s {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn tables(&self) -> &Arc<Tables> {
        &self.train.tables
    }

    pub fn save(&self, dir: &Path) -> Result<(), DatasetError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        save_tables(self.tables(), &dir.join("tables.json"))?;
        for s in Split::ALL {
            save_examples(&self.split(s).examples, &dir.join(format!("{s}.jsonl")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Corpus, DatasetError> {
        let tables = Arc::new(load_tables(&dir.join("tables.json"))?);
        let mut seen = HashSet::new();
        let mut load = |split: Split| -> Result<Dataset, DatasetError> {
            let d = load_dataset(&dir.join(format!("{split}.jsonl")), tables.clone(), split)?;
            for ex in &d.examples {
                if !seen.insert(ex.id.clone()) {
                    return Err(DatasetError::InvariantViolation {
                        id: ex.id.clone(),
                        message: "id repeated across splits".into(),
                    });
                }
            }
            Ok(d)
        };
        Ok(Corpus { train: load(Split::Train)?, dev: load(Split::Dev)?, test: load(Split::Test)? })
    }
}

pub fn save_examples(examples: &[Example], path: &Path) -> Result<(), DatasetError> {
    let mut out = String::new();
    for ex in examples {
        let line = ExampleLine {
            id: ex.id.clone(),
            utterance: ex.text.clone(),
            table_id: ex.table_id.clone(),
            answer: ex.answer.clone(),
            gold_mr: ex.gold_mr.clone(),
            template: ex.template.clone(),
        };
        out.push_str(&serde_json::to_string(&line).expect("example serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Reads a JSONL split and validates it against `tables`.
pub fn load_dataset(path: &Path, tables: Arc<Tables>, split: Split) -> Result<Dataset, DatasetError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut examples = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ExampleLine = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let mut ex = Example::new(parsed.id, parsed.utterance, parsed.table_id, parsed.answer, parsed.gold_mr);
        ex.template = parsed.template;
        if !ids.insert(ex.id.clone()) {
            return Err(DatasetError::InvariantViolation { id: ex.id, message: "duplicate id".into() });
        }
        validate_example(&ex, &tables)?;
        examples.push(ex);
    }
    Ok(Dataset { split, examples, tables })
}

pub fn save_tables(tables: &Tables, path: &Path) -> Result<(), DatasetError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    let mut out = String::from("{\n");
    for (i, (id, t)) in tables.iter().enumerate() {
        if i > 0 {
            out.push_str(",\n");
        }
        out.push_str(&serde_json::to_string(id).expect("string"));
        out.push_str(": ");
        out.push_str(&serde_json::to_string(&t.to_json()).expect("table serializes"));
    }
    out.push_str("\n}\n");
    f.write_all(out.as_bytes()).map_err(io_err(path))
}

pub fn load_tables(path: &Path) -> Result<Tables, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let raw: BTreeMap<String, TableJson> = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    raw.into_iter()
        .map(|(id, t)| {
            let env = TableEnv::from_json(id.clone(), t).map_err(|e| DatasetError::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: e.to_string(),
            })?;
            Ok((id, Arc::new(env)))
        })
        .collect()
}

/// Sorted distinct tokens of a split.
#[derive(Clone, Debug, Default)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a Example>) -> Self {
        let mut words: Vec<String> = examples
            .into_iter()
            .flat_map(|e| e.utterance.iter().cloned())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        words.sort();
        Vocab::from_words(words)
    }

    pub fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, w: &str) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// Dense count vector; unknown tokens are ignored.
    pub fn bag_of_words(&self, tokens: &[String]) -> Vec<u32> {
        let mut v = vec![0; self.words.len()];
        for (j, c) in self.bag_sparse(tokens) {
            v[j] = c;
        }
        v
    }

    /// Nonzero entries of the count vector, by word index.
    pub fn bag_sparse(&self, tokens: &[String]) -> Vec<(usize, u32)> {
        let mut m: BTreeMap<usize, u32> = BTreeMap::new();
        for t in tokens {
            if let Some(j) = self.get(t) {
                *m.entry(j).or_default() += 1;
            }
        }
        m.into_iter().collect()
    }
}

pub fn vocab_of(d: &Dataset) -> Vocab {
    Vocab::from_examples(&d.examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Cell, Column, ColumnKind};

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn bag_counts() {
        let v = Vocab::from_words(vec!["how".into(), "many".into()]);
        assert_eq!(v.bag_of_words(&toks("how many how")), vec![2, 1]);
        assert_eq!(v.bag_of_words(&[]), vec![0, 0]);
        assert_eq!(v.bag_of_words(&toks("what")), vec![0, 0]);
    }

    fn tiny() -> (Arc<Tables>, Vec<Example>) {
        let env = TableEnv::new(
            "t0",
            vec![Column { name: "Year".into(), kind: ColumnKind::Number }],
            vec![vec![Cell::int(2006)], vec![Cell::int(2007)]],
        )
        .unwrap();
        let tables: Tables = [("t0".to_string(), Arc::new(env))].into_iter().collect();
        let ex = Example::new(
            "train-0",
            "how many years",
            "t0",
            Answer::Atom(Cell::int(2)),
            Some("(count all_rows)".parse().unwrap()),
        );
        (Arc::new(tables), vec![ex])
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (tables, exs) = tiny();
        let path = dir.path().join("train.jsonl");
        save_examples(&exs, &path).unwrap();
        let d = load_dataset(&path, tables.clone(), Split::Train).unwrap();
        assert_eq!(d.examples, exs);

        std::fs::write(&path, "{\"id\":\"a\",\"utterance\":\"x\",\"table_id\":\"t0\"}\n").unwrap();
        match load_dataset(&path, tables.clone(), Split::Train) {
            Err(DatasetError::Parse { line: 1, message, .. }) => assert!(message.contains("answer")),
            other => panic!("{other:?}"),
        }

        std::fs::write(
            &path,
            "{\"id\":\"a\",\"utterance\":\"x\",\"table_id\":\"t0\",\"answer\":5,\"gold_mr\":\"(count all_rows)\"}\n",
        )
        .unwrap();
        assert!(matches!(
            load_dataset(&path, tables, Split::Train),
            Err(DatasetError::InvariantViolation { id, .. }) if id == "a"
        ));
    }
}
