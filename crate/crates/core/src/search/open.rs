//! OPEN list bucketed by rank, ordered by `f` inside the look-ahead window.

use std::collections::{BTreeMap, BTreeSet};

use ordered_float::OrderedFloat;

use super::Node;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Entry {
    f: OrderedFloat<f64>,
    rank: u32,
    cost: OrderedFloat<f64>,
    insertion: u64,
    id: usize,
}

#[derive(Debug, Default, Clone)]
pub struct OpenList {
    buckets: BTreeMap<u32, BTreeSet<Entry>>,
    len: usize,
}

impl OpenList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `r_open`, the smallest rank present.
    pub fn min_rank(&self) -> Option<u32> {
        self.buckets.keys().next().copied()
    }

    pub fn insert(&mut self, n: &Node) {
        let e = Entry {
            f: OrderedFloat(n.f),
            rank: n.rank.0,
            cost: OrderedFloat(n.cost_to_come),
            insertion: n.insertion_index,
            id: n.id,
        };
        self.buckets.entry(n.rank.0).or_default().insert(e);
        self.len += 1;
    }

    /// Removes the node with least `(f, rank, cost, insertion)` among ranks
    /// in `[r_open, r_open + n_la]`.
    pub fn extract(&mut self, n_la: u32) -> Option<usize> {
        let r_open = self.min_rank()?;
        let hi = r_open.saturating_add(n_la);
        let best = self
            .buckets
            .range(r_open..=hi)
            .filter_map(|(_, set)| set.first().copied())
            .min()?;
        let set = self.buckets.get_mut(&best.rank).expect("bucket exists");
        set.remove(&best);
        if set.is_empty() {
            self.buckets.remove(&best.rank);
        }
        self.len -= 1;
        Some(best.id)
    }
}

/// Extracts the next node id; see [`OpenList::extract`].
pub fn open_extract(open: &mut OpenList, n_la: u32) -> Option<usize> {
    open.extract(n_la)
}
