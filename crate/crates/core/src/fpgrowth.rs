//! Frequent itemset mining with FP-Growth, bounded by itemset size.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Itemset {
    /// Sorted ascending, no duplicates.
    pub items: Vec<u32>,
    pub support_count: usize,
}

const ROOT: usize = 0;

#[derive(Debug)]
struct Node {
    item: u32,
    count: usize,
    parent: usize,
    children: Vec<(u32, usize)>,
}

#[derive(Debug)]
struct FpTree {
    nodes: Vec<Node>,
    /// item -> (total support, nodes carrying the item)
    header: BTreeMap<u32, (usize, Vec<usize>)>,
}

impl FpTree {
    /// Builds a tree from weighted transactions, keeping only items with
    /// weighted support of at least `min_count`.
    fn build(transactions: &[(Vec<u32>, usize)], min_count: usize) -> FpTree {
        let mut freq: BTreeMap<u32, usize> = BTreeMap::new();
        for (items, w) in transactions {
            for &it in items {
                *freq.entry(it).or_insert(0) += w;
            }
        }
        freq.retain(|_, c| *c >= min_count);

        let mut tree = FpTree {
            nodes: vec![Node { item: u32::MAX, count: 0, parent: ROOT, children: Vec::new() }],
            header: BTreeMap::new(),
        };
        let mut path = Vec::new();
        for (items, w) in transactions {
            path.clear();
            path.extend(items.iter().copied().filter(|it| freq.contains_key(it)));
            // frequency descending, item id ascending
            path.sort_unstable_by(|a, b| freq[b].cmp(&freq[a]).then(a.cmp(b)));
            path.dedup();
            tree.insert(&path, *w);
        }
        tree
    }

    fn insert(&mut self, path: &[u32], weight: usize) {
        let mut at = ROOT;
        for &item in path {
            let next = match self.nodes[at].children.iter().find(|(it, _)| *it == item) {
                Some(&(_, child)) => child,
                None => {
                    let id = self.nodes.len();
                    self.nodes.push(Node { item, count: 0, parent: at, children: Vec::new() });
                    self.nodes[at].children.push((item, id));
                    self.header.entry(item).or_insert((0, Vec::new())).1.push(id);
                    id
                }
            };
            self.nodes[next].count += weight;
            self.header.get_mut(&item).expect("header entry exists").0 += weight;
            at = next;
        }
    }

    fn prefix_path(&self, node: usize) -> Vec<u32> {
        let mut items = Vec::new();
        let mut at = self.nodes[node].parent;
        while at != ROOT {
            items.push(self.nodes[at].item);
            at = self.nodes[at].parent;
        }
        items
    }

    fn mine(&self, suffix: &mut Vec<u32>, min_count: usize, max_len: usize, out: &mut Vec<Itemset>) {
        for (&item, (support, nodes)) in &self.header {
            if *support < min_count {
                continue;
            }
            suffix.push(item);
            let mut items = suffix.clone();
            items.sort_unstable();
            out.push(Itemset { items, support_count: *support });
            if suffix.len() < max_len {
                let base: Vec<(Vec<u32>, usize)> = nodes
                    .iter()
                    .map(|&n| (self.prefix_path(n), self.nodes[n].count))
                    .filter(|(p, _)| !p.is_empty())
                    .collect();
                if !base.is_empty() {
                    let cond = FpTree::build(&base, min_count);
                    cond.mine(suffix, min_count, max_len, out);
                }
            }
            suffix.pop();
        }
    }
}

/// Smallest count satisfying `count / n >= min_support`.
pub fn min_support_count(min_support: f64, n: usize) -> usize {
    let raw = min_support * n as f64;
    let c = math::floor(raw + 1e-9);
    let c = if raw - c > 1e-9 { c + 1.0 } else { c };
    (c as usize).max(1)
}

/// All itemsets with relative support `>= min_support` and at most
/// `max_cardinality` items, sorted by descending support, then ascending
/// size, then lexicographically.
pub fn fp_growth(transactions: &[Vec<u32>], min_support: f64, max_cardinality: usize) -> Result<Vec<Itemset>> {
    if transactions.is_empty() {
        return Err(Error::EmptyTransactionSet);
    }
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(Error::InvalidArgument(alloc::format!("min_support {min_support} not in (0, 1]")));
    }
    let min_count = min_support_count(min_support, transactions.len());
    let weighted: Vec<(Vec<u32>, usize)> = transactions.iter().map(|t| (t.clone(), 1)).collect();
    let tree = FpTree::build(&weighted, min_count);
    let mut out = Vec::new();
    if max_cardinality > 0 {
        tree.mine(&mut Vec::new(), min_count, max_cardinality, &mut out);
    }
    sort_itemsets(&mut out);
    Ok(out)
}

pub fn sort_itemsets(sets: &mut [Itemset]) {
    sets.sort_by(|a, b| {
        b.support_count
            .cmp(&a.support_count)
            .then(a.items.len().cmp(&b.items.len()))
            .then(a.items.cmp(&b.items))
    });
}
