//! Row adjacency graphs and greedy multi-coloring.
//!
//! Rows `i` and `j` are adjacent when either `a_ij` or `a_ji` is structurally
//! nonzero; the diagonal never contributes. [`group_vertices`] partitions the
//! rows into groups such that no two rows of a group are adjacent, so a
//! Gauss-Seidel sweep may update all rows of one group concurrently.
//!
//! Groups are peeled off one at a time by [`split_vertices`]: a greedy pass
//! that prefers high-degree vertices, keeps a frontier of distance-2
//! candidates around the vertices it has accepted, and defers every neighbor
//! of an accepted vertex to the next round. All selections break ties toward
//! the lowest vertex index, so the grouping is deterministic.

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::io::Write;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Symmetrized off-diagonal pattern of a square matrix.
#[derive(Clone, Debug)]
pub struct AdjacencyGraph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl AdjacencyGraph {
    pub fn from_matrix(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidStructure(
                "adjacency graph needs a square matrix".into(),
            ));
        }
        let n = a.nrows();
        let at = a.transpose();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for i in 0..n {
            let (ca, _) = a.row(i);
            let (cb, _) = at.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(usize::MAX);
                let jb = cb.get(q).copied().unwrap_or(usize::MAX);
                let j = ja.min(jb);
                if ja == j {
                    p += 1;
                }
                if jb == j {
                    q += 1;
                }
                if j != i {
                    neighbors.push(j);
                }
            }
            offsets.push(neighbors.len());
        }
        Ok(Self {
            n,
            offsets,
            neighbors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Number of neighbors of `i` in the full graph. Selection heuristics use
    /// this degree regardless of how many neighbors are still active.
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }
}

/// Vertex states local to one [`split_vertices`] pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Outside,
    Pending,
    Accepted,
    Deferred,
}

/// One greedy pass over `active`: returns `(accepted, deferred)` where
/// `accepted` is a maximal independent subset of `active` and `deferred`
/// holds everything else, each vertex adjacent to at least one accepted one.
///
/// Selection order: while the frontier (distance-2 candidates of previously
/// accepted vertices, still pending) is nonempty, take its highest-degree
/// member; otherwise take the highest-degree pending vertex overall. Ties go
/// to the lowest index. A selected vertex is accepted unless it is adjacent
/// to an already accepted vertex; accepting it defers all of its pending
/// neighbors. Isolated vertices are always accepted.
pub fn split_vertices(
    graph: &AdjacencyGraph,
    active: &[usize],
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = graph.n();
    let mut state = vec![State::Outside; n];
    for &v in active {
        if v >= n {
            return Err(Error::InvalidPlan(format!("vertex {v} out of range")));
        }
        if state[v] != State::Outside {
            return Err(Error::InvalidPlan(format!("vertex {v} listed twice")));
        }
        state[v] = State::Pending;
    }

    // Static pick order for the non-frontier case.
    let mut by_degree: Vec<usize> = active.to_vec();
    by_degree.sort_unstable_by_key(|&v| (Reverse(graph.degree(v)), v));
    let mut cursor = 0;

    let mut frontier: BTreeSet<(Reverse<usize>, usize)> = BTreeSet::new();
    let mut in_frontier = vec![false; n];

    let mut accepted = Vec::new();
    let mut deferred = Vec::new();
    let mut remaining = active.len();

    while remaining > 0 {
        let v = if let Some(&(Reverse(_), v)) = frontier.iter().next() {
            frontier.take(&(Reverse(graph.degree(v)), v));
            in_frontier[v] = false;
            v
        } else {
            while state[by_degree[cursor]] != State::Pending {
                cursor += 1;
            }
            by_degree[cursor]
        };
        debug_assert_eq!(state[v], State::Pending);
        remaining -= 1;

        let blocked = graph
            .neighbors(v)
            .iter()
            .any(|&j| state[j] == State::Accepted);
        if blocked {
            state[v] = State::Deferred;
            deferred.push(v);
            continue;
        }

        state[v] = State::Accepted;
        accepted.push(v);
        for &j in graph.neighbors(v) {
            if state[j] == State::Pending {
                state[j] = State::Deferred;
                deferred.push(j);
                remaining -= 1;
                if in_frontier[j] {
                    frontier.remove(&(Reverse(graph.degree(j)), j));
                    in_frontier[j] = false;
                }
            }
        }
        // Pending vertices two steps away become preferred candidates. The
        // neighbors of v were just deferred, so anything still pending here
        // is genuinely outside v's closed neighborhood.
        for &j in graph.neighbors(v) {
            for &k in graph.neighbors(j) {
                if state[k] == State::Pending && !in_frontier[k] {
                    frontier.insert((Reverse(graph.degree(k)), k));
                    in_frontier[k] = true;
                }
            }
        }
    }
    Ok((accepted, deferred))
}

/// Partition of the rows into mutually independent groups. Group ids are
/// 0-based and ordered by creation; sweeping the groups in order with the
/// rows of each group in parallel reproduces a sequential Gauss-Seidel sweep
/// in [`ColoringPlan::color_order`].
#[derive(Clone, Debug)]
pub struct ColoringPlan {
    n: usize,
    group_of: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

impl ColoringPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_of(&self, vertex: usize) -> usize {
        self.group_of[vertex]
    }

    pub fn group_labels(&self) -> &[usize] {
        &self.group_of
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// All vertices, group 0 first, preserving each group's internal order.
    pub fn color_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.n);
        for g in &self.groups {
            order.extend_from_slice(g);
        }
        order
    }
}

/// Peels maximal independent groups until every vertex is placed.
pub fn group_vertices(graph: &AdjacencyGraph) -> ColoringPlan {
    let n = graph.n();
    let mut group_of = vec![usize::MAX; n];
    let mut groups = Vec::new();
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        let (accepted, deferred) =
            split_vertices(graph, &active).expect("active list is well-formed");
        let g = groups.len();
        for &v in &accepted {
            group_of[v] = g;
        }
        groups.push(accepted);
        active = deferred;
    }
    ColoringPlan {
        n,
        group_of,
        groups,
    }
}

/// Builds the adjacency graph of `a` and colors it in one call.
pub fn color_matrix(a: &SparseMatrix) -> Result<ColoringPlan> {
    Ok(group_vertices(&AdjacencyGraph::from_matrix(a)?))
}

/// Outcome of checking a plan against a graph, one flag per principle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlanReport {
    /// Every vertex appears in exactly one group.
    pub partition_ok: bool,
    /// The per-vertex labels agree with the group lists.
    pub labels_ok: bool,
    /// No edge connects two vertices of the same group.
    pub independence_ok: bool,
    /// An edge inside a group, if any.
    pub first_conflict: Option<(usize, usize)>,
}

impl PlanReport {
    pub fn is_valid(&self) -> bool {
        self.partition_ok && self.labels_ok && self.independence_ok
    }
}

pub fn validate_plan(plan: &ColoringPlan, graph: &AdjacencyGraph) -> PlanReport {
    let n = graph.n();
    let mut seen = vec![0usize; n];
    let mut labels_ok = plan.n() == n;
    let mut partition_ok = plan.n() == n;
    for (g, group) in plan.groups().iter().enumerate() {
        for &v in group {
            if v >= n {
                partition_ok = false;
                continue;
            }
            seen[v] += 1;
            if plan.group_of(v) != g {
                labels_ok = false;
            }
        }
    }
    if seen.iter().any(|&c| c != 1) {
        partition_ok = false;
    }

    let mut first_conflict = None;
    if plan.n() == n {
        'edges: for i in 0..n {
            for &j in graph.neighbors(i) {
                if j > i && plan.group_of(i) == plan.group_of(j) {
                    first_conflict = Some((i, j));
                    break 'edges;
                }
            }
        }
    }
    PlanReport {
        partition_ok,
        labels_ok,
        independence_ok: first_conflict.is_none(),
        first_conflict,
    }
}

/// Writes one `vertex_id group_id` line per vertex.
pub fn write_plan<W: Write>(plan: &ColoringPlan, mut w: W) -> Result<()> {
    for v in 0..plan.n() {
        writeln!(w, "{} {}", v, plan.group_of(v))?;
    }
    Ok(())
}
