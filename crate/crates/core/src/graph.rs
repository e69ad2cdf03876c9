//! Labeled simple graphs and the enumerated state space of a chain.
//!
//! A graph on nodes `1..=n` stores its upper-triangular adjacency as a bitset.
//! Pairs are ordered row-major by the smaller endpoint, so for `n = 4` the bit
//! order is `(1,2) (1,3) (1,4) (2,3) (2,4) (3,4)`. Bits live in 64-bit
//! little-endian words and every bit past `n(n-1)/2` is zero, which makes
//! `(n, words)` a canonical encoding.

use std::fmt;
use std::str::FromStr;

use crate::error::{NecError, Result};

/// Largest node count a graph may carry (simulation-only operations).
pub const MAX_NODES: usize = 64;

/// Largest `n_max` for which the full state space is materialized.
pub const ENUMERATION_CAP: usize = 6;

#[inline]
fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[inline]
fn word_count(n: usize) -> usize {
    pair_count(n).div_ceil(64)
}

/// Bit position of the 0-based pair `a < b` in a graph on `n` nodes.
#[inline]
fn pair_index(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < n);
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// Edges joining a new node to the existing nodes `1..=width`.
///
/// Bit `k - 1` set means the new node is adjacent to node `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgePattern {
    width: usize,
    bits: u64,
}

impl EdgePattern {
    pub fn new(width: usize, bits: u64) -> Result<Self> {
        if width >= MAX_NODES {
            return Err(NecError::arg(format!(
                "edge pattern width {width} exceeds {}",
                MAX_NODES - 1
            )));
        }
        if width < 64 && bits >> width != 0 {
            return Err(NecError::arg(format!(
                "edge pattern {bits:#x} has bits beyond width {width}"
            )));
        }
        Ok(Self { width, bits })
    }

    pub fn empty(width: usize) -> Result<Self> {
        Self::new(width, 0)
    }

    /// Pattern from 1-based neighbor labels.
    pub fn from_neighbors(width: usize, labels: &[usize]) -> Result<Self> {
        let mut bits = 0u64;
        for &label in labels {
            if label == 0 || label > width {
                return Err(NecError::arg(format!(
                    "neighbor label {label} outside 1..={width}"
                )));
            }
            bits |= 1 << (label - 1);
        }
        Self::new(width, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn contains(&self, label: usize) -> bool {
        label >= 1 && label <= self.width && self.bits >> (label - 1) & 1 == 1
    }

    /// Number of edges the pattern creates.
    pub fn count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Every pattern of the given width, in ascending bit value.
    pub fn all(width: usize) -> impl Iterator<Item = EdgePattern> {
        assert!(width <= 30, "refusing to enumerate 2^{width} patterns");
        (0..1u64 << width).map(move |bits| EdgePattern { width, bits })
    }
}

/// A labeled simple undirected graph on nodes `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledGraph {
    n: usize,
    words: Vec<u64>,
}

impl LabeledGraph {
    /// The graph every chain starts from.
    pub fn single() -> Self {
        Self {
            n: 1,
            words: Vec::new(),
        }
    }

    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_NODES {
            return Err(NecError::Bounds {
                what: "node count",
                value: n,
                cap: MAX_NODES,
            });
        }
        Ok(Self {
            n,
            words: vec![0; word_count(n)],
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for a in 0..n {
            for b in a + 1..n {
                g.set_pair(a, b);
            }
        }
        Ok(g)
    }

    /// Builds a graph from 1-based edge endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for &(i, j) in edges {
            if i == j || i == 0 || j == 0 || i > n || j > n {
                return Err(NecError::arg(format!(
                    "edge ({i},{j}) is not a valid pair on {n} nodes"
                )));
            }
            g.set_pair(i.min(j) - 1, i.max(j) - 1);
        }
        Ok(g)
    }

    /// Graph with `n <= 11` nodes whose whole adjacency fits one word.
    pub(crate) fn from_word(n: usize, word: u64) -> Self {
        debug_assert!(pair_count(n) <= 64);
        Self {
            n,
            words: if n >= 2 { vec![word] } else { Vec::new() },
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of addressable adjacency bits, `n(n-1)/2`.
    pub fn pair_count(&self) -> usize {
        pair_count(self.n)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn edge_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    fn bit(&self, idx: usize) -> bool {
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    #[inline]
    fn set_pair(&mut self, a: usize, b: usize) {
        let idx = pair_index(self.n, a, b);
        self.words[idx / 64] |= 1 << (idx % 64);
    }

    #[inline]
    fn has_pair(&self, a: usize, b: usize) -> bool {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.bit(pair_index(self.n, a, b))
    }

    /// Whether nodes `i` and `j` (1-based) are adjacent.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && i >= 1 && j >= 1 && i <= self.n && j <= self.n && self.has_pair(i - 1, j - 1)
    }

    /// Edges as 1-based pairs `(i, j)` with `i < j`, in bit order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.has_pair(a, b) {
                    out.push((a + 1, b + 1));
                }
            }
        }
        out
    }

    pub fn degree(&self, label: usize) -> usize {
        (1..=self.n).filter(|&j| self.has_edge(label, j)).count()
    }

    /// `masks[a]` has bit `b` set when 0-based nodes `a` and `b` are adjacent.
    fn neighbor_masks(&self) -> Vec<u64> {
        let mut masks = vec![0u64; self.n];
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.has_pair(a, b) {
                    masks[a] |= 1 << b;
                    masks[b] |= 1 << a;
                }
            }
        }
        masks
    }

    /// Removes node `label` and shifts every larger label down by one.
    pub fn delete_node(&self, label: usize) -> Result<Self> {
        if self.n == 1 {
            return Err(NecError::InvalidDeletion);
        }
        if label == 0 || label > self.n {
            return Err(NecError::arg(format!(
                "node label {label} outside 1..={}",
                self.n
            )));
        }
        let gone = label - 1;
        let mut out = Self::empty(self.n - 1)?;
        for a in 0..self.n {
            if a == gone {
                continue;
            }
            for b in a + 1..self.n {
                if b != gone && self.has_pair(a, b) {
                    let na = if a > gone { a - 1 } else { a };
                    let nb = if b > gone { b - 1 } else { b };
                    out.set_pair(na, nb);
                }
            }
        }
        Ok(out)
    }

    /// Appends node `n + 1` wired to the nodes in `pattern`.
    pub fn add_node(&self, pattern: &EdgePattern) -> Result<Self> {
        if pattern.width() != self.n {
            return Err(NecError::arg(format!(
                "edge pattern width {} does not match node count {}",
                pattern.width(),
                self.n
            )));
        }
        let mut out = Self::empty(self.n + 1)?;
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.has_pair(a, b) {
                    out.set_pair(a, b);
                }
            }
            if pattern.bits >> a & 1 == 1 {
                out.set_pair(a, self.n);
            }
        }
        Ok(out)
    }

    /// Neighbors of the highest-labeled node among `1..n`.
    pub fn last_node_pattern(&self) -> Result<EdgePattern> {
        if self.n < 2 {
            return Err(NecError::arg("a single-node graph has no attachment pattern"));
        }
        let last = self.n - 1;
        let mut bits = 0u64;
        for a in 0..last {
            if self.has_pair(a, last) {
                bits |= 1 << a;
            }
        }
        EdgePattern::new(last, bits)
    }

    /// Whether `other` is this graph with one node appended.
    pub fn is_extended_by(&self, other: &LabeledGraph) -> bool {
        if other.n != self.n + 1 {
            return false;
        }
        (0..self.n).all(|a| (a + 1..self.n).all(|b| self.has_pair(a, b) == other.has_pair(a, b)))
    }

    /// Text encoding `n:HEX`.
    pub fn encode(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LabeledGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.n)?;
        match self.words.iter().rposition(|&w| w != 0) {
            None => write!(f, "0"),
            Some(top) => {
                write!(f, "{:x}", self.words[top])?;
                for w in self.words[..top].iter().rev() {
                    write!(f, "{w:016x}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for LabeledGraph {
    type Err = NecError;

    fn from_str(s: &str) -> Result<Self> {
        let (n_str, hex) = s
            .split_once(':')
            .ok_or_else(|| NecError::arg(format!("graph {s:?} is not of the form n:HEX")))?;
        let n: usize = n_str
            .parse()
            .map_err(|_| NecError::arg(format!("bad node count in graph {s:?}")))?;
        let mut g = Self::empty(n)?;
        if hex.is_empty() || !hex.bytes().all(|c| c.is_ascii_hexdigit()) {
            return Err(NecError::arg(format!("bad adjacency hex in graph {s:?}")));
        }
        let hex = hex.trim_start_matches('0');
        let digits = hex.as_bytes();
        let mut word_idx = 0;
        let mut end = digits.len();
        while end > 0 {
            let start = end.saturating_sub(16);
            let chunk = std::str::from_utf8(&digits[start..end]).expect("ascii");
            let value = u64::from_str_radix(chunk, 16).expect("validated hex");
            if word_idx >= g.words.len() {
                return Err(NecError::arg(format!(
                    "adjacency of graph {s:?} exceeds {} pair bits",
                    g.pair_count()
                )));
            }
            g.words[word_idx] = value;
            word_idx += 1;
            end = start;
        }
        let pairs = g.pair_count();
        if let Some(&last) = g.words.last() {
            let used = pairs - 64 * (g.words.len() - 1);
            if used < 64 && last >> used != 0 {
                return Err(NecError::arg(format!(
                    "adjacency of graph {s:?} exceeds {pairs} pair bits"
                )));
            }
        }
        Ok(g)
    }
}

/// Number of 3-cliques in `g`.
pub fn triangle_count(g: &LabeledGraph) -> usize {
    let masks = g.neighbor_masks();
    let mut count = 0;
    for a in 0..g.n() {
        for b in a + 1..g.n() {
            if masks[a] >> b & 1 == 1 {
                let above = u64::MAX.checked_shl(b as u32 + 1).unwrap_or(0);
                count += (masks[a] & masks[b] & above).count_ones() as usize;
            }
        }
    }
    count
}

/// All labeled graphs with `1..=n_max` nodes in canonical order: ascending
/// node count, then ascending adjacency value.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n_max: usize,
    offsets: Vec<usize>,
    graphs: Vec<LabeledGraph>,
}

/// Closed-form `|S| = sum_{n=1}^{n_max} 2^{n(n-1)/2}`.
pub fn state_space_size(n_max: usize) -> u128 {
    (1..=n_max).map(|n| 1u128 << pair_count(n)).sum()
}

impl StateSpace {
    pub fn enumerate(n_max: usize) -> Result<Self> {
        if n_max == 0 || n_max > ENUMERATION_CAP {
            return Err(NecError::Bounds {
                what: "n_max for state-space enumeration",
                value: n_max,
                cap: ENUMERATION_CAP,
            });
        }
        let mut offsets = Vec::with_capacity(n_max + 1);
        let mut graphs = Vec::with_capacity(state_space_size(n_max) as usize);
        for n in 1..=n_max {
            offsets.push(graphs.len());
            for word in 0..1u64 << pair_count(n) {
                graphs.push(LabeledGraph::from_word(n, word));
            }
        }
        offsets.push(graphs.len());
        Ok(Self {
            n_max,
            offsets,
            graphs,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[LabeledGraph] {
        &self.graphs
    }

    pub fn get(&self, id: usize) -> Option<&LabeledGraph> {
        self.graphs.get(id)
    }

    /// Dense id of `g`, or `None` when `g` lies outside the space.
    pub fn index_of(&self, g: &LabeledGraph) -> Option<usize> {
        if g.n() == 0 || g.n() > self.n_max {
            return None;
        }
        let word = g.words().first().copied().unwrap_or(0);
        Some(self.offsets[g.n() - 1] + word as usize)
    }

    /// Id range of the graphs with exactly `n` nodes.
    pub fn range_of(&self, n: usize) -> std::ops::Range<usize> {
        self.offsets[n - 1]..self.offsets[n]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledGraph> {
        self.graphs.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path3() -> LabeledGraph {
        LabeledGraph::from_edges(3, &[(1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn enumeration_sizes() {
        assert_eq!(StateSpace::enumerate(1).unwrap().len(), 1);
        assert_eq!(StateSpace::enumerate(3).unwrap().len(), 11);
        assert_eq!(StateSpace::enumerate(5).unwrap().len(), 1099);
        for n_max in 1..=ENUMERATION_CAP {
            let s = StateSpace::enumerate(n_max).unwrap();
            assert_eq!(s.len() as u128, state_space_size(n_max));
        }
    }

    #[test]
    fn enumeration_rejects_out_of_range() {
        let err = StateSpace::enumerate(7).unwrap_err();
        assert!(err.to_string().contains('6'), "{err}");
        assert!(StateSpace::enumerate(0).is_err());
    }

    #[test]
    fn enumeration_is_indexed_and_ordered() {
        let s = StateSpace::enumerate(4).unwrap();
        for (i, g) in s.iter().enumerate() {
            assert_eq!(s.index_of(g), Some(i));
            assert_eq!(s.get(i), Some(g));
        }
        assert!(s.graphs().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.index_of(&LabeledGraph::empty(5).unwrap()), None);
    }

    #[test]
    fn triangle_examples() {
        assert_eq!(triangle_count(&LabeledGraph::complete(3).unwrap()), 1);
        assert_eq!(triangle_count(&LabeledGraph::empty(3).unwrap()), 0);
        assert_eq!(triangle_count(&LabeledGraph::complete(4).unwrap()), 4);
        assert_eq!(triangle_count(&LabeledGraph::complete(64).unwrap()), 41664);
    }

    /// trace(A^3) / 6 with a dense integer adjacency matrix.
    fn trace_cubed_over_six(g: &LabeledGraph) -> usize {
        let n = g.n();
        let a: Vec<Vec<usize>> = (1..=n)
            .map(|i| (1..=n).map(|j| g.has_edge(i, j) as usize).collect())
            .collect();
        let mut trace = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    trace += a[i][j] * a[j][k] * a[k][i];
                }
            }
        }
        trace / 6
    }

    #[test]
    fn triangle_count_matches_trace_formula() {
        let s = StateSpace::enumerate(4).unwrap();
        for g in s.iter() {
            assert_eq!(triangle_count(g), trace_cubed_over_six(g), "{g}");
        }
    }

    #[test]
    fn delete_node_examples() {
        let p = path3();
        assert_eq!(p.delete_node(2).unwrap(), LabeledGraph::empty(2).unwrap());
        assert_eq!(
            p.delete_node(1).unwrap(),
            LabeledGraph::from_edges(2, &[(1, 2)]).unwrap()
        );
        let k4 = LabeledGraph::complete(4).unwrap();
        for label in 1..=4 {
            assert_eq!(k4.delete_node(label).unwrap(), LabeledGraph::complete(3).unwrap());
        }
    }

    #[test]
    fn delete_node_errors() {
        assert!(matches!(
            LabeledGraph::single().delete_node(1),
            Err(NecError::InvalidDeletion)
        ));
        assert!(matches!(path3().delete_node(4), Err(NecError::Argument(_))));
        assert!(matches!(path3().delete_node(0), Err(NecError::Argument(_))));
    }

    #[test]
    fn add_node_examples() {
        let one = LabeledGraph::single();
        let p = EdgePattern::from_neighbors(1, &[1]).unwrap();
        assert_eq!(
            one.add_node(&p).unwrap(),
            LabeledGraph::from_edges(2, &[(1, 2)]).unwrap()
        );
        assert_eq!(
            one.add_node(&EdgePattern::empty(1).unwrap()).unwrap(),
            LabeledGraph::empty(2).unwrap()
        );
        let two = LabeledGraph::empty(2).unwrap();
        let both = EdgePattern::from_neighbors(2, &[1, 2]).unwrap();
        assert_eq!(
            two.add_node(&both).unwrap(),
            LabeledGraph::from_edges(3, &[(1, 3), (2, 3)]).unwrap()
        );
        assert!(one.add_node(&both).is_err());
    }

    #[test]
    fn text_encoding() {
        let g = LabeledGraph::from_edges(3, &[(1, 2), (1, 3)]).unwrap();
        assert_eq!(g.encode(), "3:3");
        assert_eq!(LabeledGraph::single().encode(), "1:0");
        assert_eq!("3:3".parse::<LabeledGraph>().unwrap(), g);
        // (1,4) is bit 2 under row-major order on 4 nodes.
        let g4 = LabeledGraph::from_edges(4, &[(1, 4)]).unwrap();
        assert_eq!(g4.encode(), "4:4");
        assert!("3:8".parse::<LabeledGraph>().is_err());
        assert!("3:".parse::<LabeledGraph>().is_err());
        assert!("0:0".parse::<LabeledGraph>().is_err());
        assert!("3:zz".parse::<LabeledGraph>().is_err());
    }

    #[test]
    fn multiword_encoding_round_trips() {
        let k = LabeledGraph::complete(20).unwrap();
        assert_eq!(k.words().len(), 3);
        assert_eq!(k.encode().parse::<LabeledGraph>().unwrap(), k);
        let sparse = LabeledGraph::from_edges(20, &[(19, 20)]).unwrap();
        assert_eq!(sparse.encode().parse::<LabeledGraph>().unwrap(), sparse);
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = LabeledGraph> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), pair_count(n)).prop_map(move |bits| {
                let mut g = LabeledGraph::empty(n).unwrap();
                let mut k = 0;
                for a in 0..n {
                    for b in a + 1..n {
                        if bits[k] {
                            g.set_pair(a, b);
                        }
                        k += 1;
                    }
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn add_then_delete_last_is_identity(g in arb_graph(14), raw in any::<u64>()) {
            let width = g.n();
            let pattern = EdgePattern::new(width, raw & ((1u64 << width) - 1)).unwrap();
            let grown = g.add_node(&pattern).unwrap();
            prop_assert_eq!(grown.last_node_pattern().unwrap(), pattern);
            prop_assert!(g.is_extended_by(&grown));
            prop_assert_eq!(grown.delete_node(width + 1).unwrap(), g);
        }

        #[test]
        fn encoding_round_trips(g in arb_graph(20)) {
            prop_assert_eq!(g.encode().parse::<LabeledGraph>().unwrap(), g);
        }

        #[test]
        fn deletion_keeps_surviving_edges(g in arb_graph(10), pick in any::<usize>()) {
            prop_assume!(g.n() >= 2);
            let label = pick % g.n() + 1;
            let h = g.delete_node(label).unwrap();
            let relabel = |x: usize| if x > label { x - 1 } else { x };
            for (i, j) in g.edges() {
                if i != label && j != label {
                    prop_assert!(h.has_edge(relabel(i), relabel(j)));
                }
            }
            prop_assert_eq!(h.edge_count(), g.edge_count() - g.degree(label));
        }
    }
}
