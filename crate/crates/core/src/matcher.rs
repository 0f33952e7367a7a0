//! Dictionary matching over Unicode scalar values.
//!
//! [`Dictionary`] compiles a set of surfaces into an Aho-Corasick automaton
//! whose alphabet is `char`. It can report every raw hit (including nested
//! and overlapping ones) or the canonical leftmost-longest, non-overlapping
//! selection used for annotation: scan left to right, and at each position
//! not covered by an accepted match take the longest surface starting there.
//!
//! All offsets are scalar indices, never byte offsets.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

const ROOT: u32 = 0;
const NONE: u32 = u32::MAX;

/// A match of one dictionary entry inside a text, `start..end` in scalars.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hit<T> {
    pub start: usize,
    pub end: usize,
    pub value: T,
}

#[derive(Debug, Clone)]
struct State {
    /// Sorted by char for binary search.
    trans: Vec<(char, u32)>,
    fail: u32,
    /// Index of the pattern ending exactly at this state.
    output: u32,
    /// Nearest state on the failure chain that has an output.
    dict_link: u32,
}

impl State {
    fn goto(&self, c: char) -> Option<u32> {
        self.trans
            .binary_search_by_key(&c, |&(k, _)| k)
            .ok()
            .map(|i| self.trans[i].1)
    }
}

#[derive(Debug, Clone)]
struct Automaton {
    states: Vec<State>,
}

impl Automaton {
    fn build<'a>(patterns: impl Iterator<Item = &'a str>) -> Self {
        // Trie construction with ordered maps; flattened once complete.
        let mut trie: Vec<(BTreeMap<char, u32>, u32)> = vec![(BTreeMap::new(), NONE)];
        for (index, pattern) in patterns.enumerate() {
            let mut node = ROOT;
            for c in pattern.chars() {
                let next = trie.len() as u32;
                match trie[node as usize].0.get(&c) {
                    Some(&child) => node = child,
                    None => {
                        trie[node as usize].0.insert(c, next);
                        trie.push((BTreeMap::new(), NONE));
                        node = next;
                    }
                }
            }
            trie[node as usize].1 = index as u32;
        }

        let mut states: Vec<State> = trie
            .into_iter()
            .map(|(children, output)| State {
                trans: children.into_iter().collect(),
                fail: ROOT,
                output,
                dict_link: NONE,
            })
            .collect();

        let mut queue = VecDeque::new();
        for &(_, child) in &states[ROOT as usize].trans {
            queue.push_back(child);
        }
        while let Some(state) = queue.pop_front() {
            let trans = states[state as usize].trans.clone();
            for (c, child) in trans {
                let mut fallback = states[state as usize].fail;
                let fail = loop {
                    if let Some(next) = states[fallback as usize].goto(c) {
                        break next;
                    }
                    if fallback == ROOT {
                        break ROOT;
                    }
                    fallback = states[fallback as usize].fail;
                };
                let fail_state = &states[fail as usize];
                let dict_link = if fail_state.output != NONE {
                    fail
                } else {
                    fail_state.dict_link
                };
                let child_state = &mut states[child as usize];
                child_state.fail = fail;
                child_state.dict_link = dict_link;
                queue.push_back(child);
            }
        }

        Automaton { states }
    }

    /// Calls `on_hit(end, pattern)` for every pattern occurrence, where `end`
    /// is the exclusive scalar offset. Returns the text length in scalars.
    fn for_each_hit(&self, text: &str, mut on_hit: impl FnMut(usize, u32)) -> usize {
        let mut state = ROOT;
        let mut len = 0;
        for (i, c) in text.chars().enumerate() {
            len = i + 1;
            loop {
                if let Some(next) = self.states[state as usize].goto(c) {
                    state = next;
                    break;
                }
                if state == ROOT {
                    break;
                }
                state = self.states[state as usize].fail;
            }
            let current = &self.states[state as usize];
            let mut emit = if current.output != NONE {
                state
            } else {
                current.dict_link
            };
            while emit != NONE {
                let s = &self.states[emit as usize];
                on_hit(len, s.output);
                emit = s.dict_link;
            }
        }
        len
    }
}

/// A compiled set of `(surface, value)` entries.
///
/// Empty surfaces are ignored and a repeated surface keeps its first value,
/// so `compile` accepts any input; compiling nothing yields a dictionary that
/// matches nothing.
#[derive(Debug, Clone)]
pub struct Dictionary<T> {
    automaton: Automaton,
    surfaces: Vec<String>,
    lengths: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy> Dictionary<T> {
    pub fn compile<S, I>(entries: I) -> Self
    where
        S: AsRef<str>,
        I: IntoIterator<Item = (S, T)>,
    {
        let mut seen = BTreeMap::new();
        let mut surfaces = Vec::new();
        let mut values = Vec::new();
        for (surface, value) in entries {
            let surface = surface.as_ref();
            if surface.is_empty() || seen.contains_key(surface) {
                continue;
            }
            seen.insert(String::from(surface), ());
            surfaces.push(String::from(surface));
            values.push(value);
        }
        let lengths = surfaces.iter().map(|s| s.chars().count()).collect();
        let automaton = Automaton::build(surfaces.iter().map(String::as_str));
        Dictionary {
            automaton,
            surfaces,
            lengths,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, T)> + '_ {
        self.surfaces
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
    }

    /// Every occurrence of every surface, nested and overlapping ones
    /// included, sorted by `(start, end)`.
    pub fn raw_hits(&self, text: &str) -> Vec<Hit<T>> {
        let mut hits = Vec::new();
        self.automaton.for_each_hit(text, |end, pattern| {
            let p = pattern as usize;
            hits.push((end - self.lengths[p], end, p));
        });
        hits.sort_unstable();
        hits.into_iter()
            .map(|(start, end, p)| Hit {
                start,
                end,
                value: self.values[p],
            })
            .collect()
    }

    /// The leftmost-longest non-overlapping match set, sorted by start.
    pub fn annotate(&self, text: &str) -> Vec<Hit<T>> {
        if self.is_empty() || text.is_empty() {
            return Vec::new();
        }
        // longest[start] = pattern index + 1 of the longest surface starting there
        let mut longest: Vec<u32> = Vec::new();
        let len = self.automaton.for_each_hit(text, |end, pattern| {
            let start = end - self.lengths[pattern as usize];
            if longest.len() <= start {
                longest.resize(start + 1, 0);
            }
            let slot = &mut longest[start];
            if *slot == 0 || self.lengths[*slot as usize - 1] < self.lengths[pattern as usize] {
                *slot = pattern + 1;
            }
        });

        let mut out = Vec::new();
        let mut pos = 0;
        while pos < len.min(longest.len()) {
            match longest[pos] {
                0 => pos += 1,
                slot => {
                    let p = slot as usize - 1;
                    let end = pos + self.lengths[p];
                    out.push(Hit {
                        start: pos,
                        end,
                        value: self.values[p],
                    });
                    pos = end;
                }
            }
        }
        out
    }
}
