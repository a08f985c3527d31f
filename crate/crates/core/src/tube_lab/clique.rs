//! Maximum clique on a dense bitset graph (Bron–Kerbosch with Tomita
//! pivoting).

#[derive(Debug, Clone)]
pub struct BitGraph {
    n: usize,
    words: usize,
    adj: Vec<u64>,
}

impl BitGraph {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        BitGraph {
            n,
            words,
            adj: vec![0; n * words],
        }
    }

    /// Graph on `0..n` with an edge wherever `rel(i, j)` holds (`i < j`).
    pub fn from_relation(n: usize, rel: impl Fn(usize, usize) -> bool + Sync) -> Self {
        use rayon::prelude::*;
        let mut g = BitGraph::new(n);
        let words = g.words;
        let rows: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).filter(|&j| rel(i, j)).collect())
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            for j in row {
                g.adj[i * words + j / 64] |= 1 << (j % 64);
                g.adj[j * words + i / 64] |= 1 << (i % 64);
            }
        }
        g
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.adj[i * self.words..(i + 1) * self.words]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.row(i)[j / 64] >> (j % 64) & 1 == 1
    }
}

fn count(s: &[u64]) -> usize {
    s.iter().map(|w| w.count_ones() as usize).sum()
}

fn and(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn bits(s: &[u64]) -> impl Iterator<Item = usize> + '_ {
    s.iter().enumerate().flat_map(|(k, &w)| {
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

fn expand(g: &BitGraph, size: usize, mut p: Vec<u64>, mut x: Vec<u64>, best: &mut usize) {
    let pc = count(&p);
    if pc == 0 {
        if count(&x) == 0 {
            *best = (*best).max(size);
        }
        return;
    }
    if size + pc <= *best {
        return;
    }
    let pivot = bits(&p)
        .chain(bits(&x))
        .max_by_key(|&u| count(&and(&p, g.row(u))))
        .expect("nonempty");
    let cand: Vec<usize> = bits(&p).filter(|&v| !g.has_edge(pivot, v)).collect();
    for v in cand {
        let row = g.row(v);
        expand(g, size + 1, and(&p, row), and(&x, row), best);
        p[v / 64] &= !(1 << (v % 64));
        x[v / 64] |= 1 << (v % 64);
        if size + count(&p) <= *best {
            return;
        }
    }
}

/// Clique number of `g`.
pub fn max_clique(g: &BitGraph) -> usize {
    if g.n == 0 {
        return 0;
    }
    let mut p = vec![0u64; g.words];
    for i in 0..g.n {
        p[i / 64] |= 1 << (i % 64);
    }
    let mut best = 1;
    expand(g, 0, p, vec![0; g.words], &mut best);
    best
}
