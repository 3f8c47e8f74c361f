use crate::IlpError;

#[derive(Debug, Clone, PartialEq)]
pub struct IndependentSet {
    /// Selected vertices in ascending order.
    pub vertices: Vec<usize>,
    pub total: f64,
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    fn has(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn first(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }

    fn minus(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & !b).collect())
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + b)
            })
        })
    }
}

struct Search<'a> {
    weights: &'a [f64],
    adj: Vec<Bits>,
    /// Vertex ids sorted by descending weight, ties by index.
    by_weight: Vec<usize>,
    best: f64,
    best_set: Vec<usize>,
    current: Vec<usize>,
}

impl Search<'_> {
    /// Greedy clique cover of `cand`; the sum of each clique's heaviest vertex
    /// bounds any independent set inside `cand`.
    fn clique_bound(&self, cand: &Bits) -> f64 {
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        let mut bound = 0.0;
        for &v in &self.by_weight {
            if !cand.has(v) {
                continue;
            }
            match cliques
                .iter_mut()
                .find(|c| c.iter().all(|&u| self.adj[v].has(u)))
            {
                Some(c) => c.push(v),
                None => {
                    bound += self.weights[v];
                    cliques.push(vec![v]);
                }
            }
        }
        bound
    }

    fn run(&mut self, cand: Bits, weight: f64) {
        let Some(v) = cand.first() else {
            if weight > self.best {
                self.best = weight;
                self.best_set = self.current.clone();
            }
            return;
        };
        if weight + self.clique_bound(&cand) <= self.best {
            return;
        }
        // Include v first so lower-indexed vertices win ties.
        let mut without_nbrs = cand.minus(&self.adj[v]);
        without_nbrs.clear(v);
        self.current.push(v);
        self.run(without_nbrs, weight + self.weights[v]);
        self.current.pop();

        let mut rest = cand;
        rest.clear(v);
        self.run(rest, weight);
    }
}

/// Exact maximum-weight independent set by branch-and-bound.
///
/// Branches on the lowest-indexed candidate vertex (include before exclude)
/// and prunes with a greedy clique-cover bound. Vertices of non-positive
/// weight are never selected. Errors when the graph has more than
/// `vertex_limit` vertices.
pub fn mwis_exact(
    vertex_weights: &[f64],
    edges: &[(usize, usize)],
    vertex_limit: usize,
) -> Result<IndependentSet, IlpError> {
    let n = vertex_weights.len();
    if n > vertex_limit {
        return Err(IlpError::Size(format!(
            "{n} vertices exceeds the exact-search limit of {vertex_limit}"
        )));
    }
    let mut adj = vec![Bits::empty(n); n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(IlpError::Structural(format!("edge ({a}, {b}) out of range")));
        }
        if a != b {
            adj[a].set(b);
            adj[b].set(a);
        }
    }
    let mut cand = Bits::empty(n);
    for (v, &w) in vertex_weights.iter().enumerate() {
        if w > 0.0 {
            cand.set(v);
        }
    }
    let mut by_weight: Vec<usize> = cand.iter().collect();
    by_weight.sort_by(|&a, &b| vertex_weights[b].total_cmp(&vertex_weights[a]).then(a.cmp(&b)));

    let mut search = Search {
        weights: vertex_weights,
        adj,
        by_weight,
        best: 0.0,
        best_set: Vec::new(),
        current: Vec::new(),
    };
    search.run(cand, 0.0);
    let mut vertices = search.best_set;
    vertices.sort_unstable();
    Ok(IndependentSet {
        vertices,
        total: search.best,
    })
}
