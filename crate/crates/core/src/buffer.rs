//! Per-example memory of programs that execute to the gold answer.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::grammar::Action;
use crate::model::ActionSeq;
use crate::mr::Sketch;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BufferEntry {
    pub actions: ActionSeq,
    /// Canonical program text; the dedup key.
    pub text: String,
}

impl BufferEntry {
    pub fn new(actions: &[Action], text: String) -> Self {
        BufferEntry { actions: actions.iter().copied().collect(), text }
    }

    pub fn matches_sketch(&self, s: &Sketch) -> bool {
        self.actions.len() == s.len() && self.actions.iter().zip(&s.funcs).all(|(a, f)| a.func == *f)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MemoryBuffer {
    entries: Vec<BufferEntry>,
    locked: bool,
    sketch: Option<Sketch>,
    /// Every program text ever offered, resident or not.
    seen: BTreeSet<String>,
}

impl MemoryBuffer {
    pub fn entries(&self) -> &[BufferEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_locked(&self) -> bool {
        self.locked
    }

    pub fn sketch(&self) -> Option<&Sketch> {
        self.sketch.as_ref()
    }

    pub fn contains(&self, text: &str) -> bool {
        self.entries.iter().any(|e| e.text == text)
    }

    /// Whether `text` was offered to this buffer before.
    pub fn seen(&self, text: &str) -> bool {
        self.seen.contains(text)
    }

    pub fn action_seqs(&self) -> Vec<&[Action]> {
        self.entries.iter().map(|e| e.actions.as_slice()).collect()
    }

    /// Replaces the contents with one program and freezes the buffer.
    pub fn lock_to(&mut self, entry: BufferEntry) {
        self.entries = vec![entry];
        self.locked = true;
    }

    /// Drops entries whose operators differ from `s` and admits only
    /// matching programs from now on.
    pub fn constrain(&mut self, s: Sketch) {
        self.entries.retain(|e| e.matches_sketch(&s));
        self.sketch = Some(s);
    }

    /// Adds `entry` unless locked, filtered by the sketch, or present. When
    /// over `capacity`, keeps the entries `log_prob` ranks highest (ties by
    /// text). Returns whether the new entry is resident afterwards.
    pub fn insert<F: PartialOrd>(
        &mut self,
        entry: BufferEntry,
        capacity: usize,
        mut log_prob: impl FnMut(&[Action]) -> F,
    ) -> bool {
        if self.locked || self.contains(&entry.text) {
            return false;
        }
        if self.sketch.as_ref().is_some_and(|s| !entry.matches_sketch(s)) {
            return false;
        }
        let text = entry.text.clone();
        self.seen.insert(text.clone());
        self.entries.push(entry);
        if self.entries.len() > capacity {
            let mut scored: Vec<(F, BufferEntry)> =
                self.entries.drain(..).map(|e| (log_prob(&e.actions), e)).collect();
            scored.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| a.1.text.cmp(&b.1.text))
            });
            scored.truncate(capacity);
            self.entries = scored.into_iter().map(|(_, e)| e).collect();
        }
        self.contains(&text)
    }
}

/// Buffers for every training example, by position in the split.
#[derive(Clone, Debug, PartialEq)]
pub struct BufferSet {
    pub capacity: usize,
    bufs: Vec<MemoryBuffer>,
}

impl BufferSet {
    pub fn new(n: usize, capacity: usize) -> Self {
        BufferSet { capacity, bufs: vec![MemoryBuffer::default(); n] }
    }

    pub fn len(&self) -> usize {
        self.bufs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bufs.is_empty()
    }

    pub fn get(&self, i: usize) -> &MemoryBuffer {
        &self.bufs[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut MemoryBuffer {
        &mut self.bufs[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &MemoryBuffer> {
        self.bufs.iter()
    }

    pub fn nonempty(&self) -> usize {
        self.bufs.iter().filter(|b| !b.is_empty()).count()
    }

    pub fn hit_rate(&self) -> f64 {
        if self.bufs.is_empty() {
            0.0
        } else {
            self.nonempty() as f64 / self.bufs.len() as f64
        }
    }

    pub fn mean_size(&self) -> f64 {
        if self.bufs.is_empty() {
            0.0
        } else {
            self.bufs.iter().map(MemoryBuffer::len).sum::<usize>() as f64 / self.bufs.len() as f64
        }
    }
}
