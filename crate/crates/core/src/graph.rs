//! Edge-labeled multigraphs with an underlying simple graph for distances.

use std::collections::{BTreeSet, VecDeque};

/// Distance marker for vertices a search never reached.
pub const UNREACHABLE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledEdge {
    pub from: usize,
    pub to: usize,
    pub label: String,
}

/// Loops and parallel edges are kept in `edges` but dropped from the
/// adjacency used by every distance computation.
#[derive(Clone, Debug)]
pub struct Graph {
    labels: Vec<String>,
    edges: Vec<LabeledEdge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(labels: Vec<String>, edges: Vec<LabeledEdge>) -> Self {
        let mut adj = vec![Vec::new(); labels.len()];
        for e in &edges {
            if e.from != e.to {
                adj[e.from].push(e.to);
                adj[e.to].push(e.from);
            }
        }
        for nb in &mut adj {
            nb.sort_unstable();
            nb.dedup();
        }
        Graph { labels, edges, adj }
    }

    /// Unlabeled graph on `0..n` with vertex labels equal to their index.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let labels = (0..n).map(|i| i.to_string()).collect();
        let edges = edges
            .iter()
            .map(|&(from, to)| LabeledEdge {
                from,
                to,
                label: "e".into(),
            })
            .collect();
        Graph::new(labels, edges)
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &edges)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[LabeledEdge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn bfs(&self, source: usize) -> Vec<usize> {
        self.bfs_from_set(std::iter::once(source))
    }

    pub fn bfs_from_set(&self, sources: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut dist = vec![UNREACHABLE; self.len()];
        let mut queue = VecDeque::new();
        for s in sources {
            if dist[s] == UNREACHABLE {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if dist[w] == UNREACHABLE {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Shortest path from `a` to `b`; each step goes to the smallest-index
    /// neighbor that is one closer to `b`.
    pub fn shortest_path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let to_b = self.bfs(b);
        if to_b[a] == UNREACHABLE {
            return None;
        }
        let mut path = vec![a];
        let mut cur = a;
        while cur != b {
            cur = *self.adj[cur]
                .iter()
                .find(|&&w| to_b[w] + 1 == to_b[cur])
                .expect("bfs layers are consistent");
            path.push(cur);
        }
        Some(path)
    }

    pub fn is_connected(&self) -> bool {
        self.is_empty() || self.bfs(0).iter().all(|&d| d != UNREACHABLE)
    }

    /// ∂W: members of `set` with a neighbor outside it.
    pub fn boundary(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        set.iter()
            .copied()
            .filter(|&x| self.adj[x].iter().any(|w| !set.contains(w)))
            .collect()
    }

    /// Γ_k(W): vertices within distance `k` of `set`.
    pub fn neighborhood(&self, set: &BTreeSet<usize>, k: usize) -> BTreeSet<usize> {
        let dist = self.bfs_from_set(set.iter().copied());
        (0..self.len()).filter(|&v| dist[v] <= k).collect()
    }
}
