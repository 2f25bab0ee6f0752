//! Undirected random graphs: Barabási–Albert, Newman–Watts–Strogatz and
//! Holme–Kim (power-law cluster).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rng::{substream, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphParamError {
    #[error("{family} needs n > {needed}, got n = {n}")]
    TooFewNodes {
        family: GraphFamily,
        n: usize,
        needed: usize,
    },
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("attachment count must be at least 1")]
    ZeroAttachment,
    #[error("unknown graph family {0:?}")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFamily {
    #[serde(rename = "ba")]
    BarabasiAlbert,
    #[serde(rename = "nws")]
    NewmanWattsStrogatz,
    #[serde(rename = "hk")]
    HolmeKim,
}

impl GraphFamily {
    pub const ALL: [GraphFamily; 3] = [
        GraphFamily::BarabasiAlbert,
        GraphFamily::NewmanWattsStrogatz,
        GraphFamily::HolmeKim,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GraphFamily::BarabasiAlbert => "ba",
            GraphFamily::NewmanWattsStrogatz => "nws",
            GraphFamily::HolmeKim => "hk",
        }
    }

    /// Default parameters for `n` nodes.
    pub fn default_params(self, n: usize) -> GraphParams {
        match self {
            GraphFamily::BarabasiAlbert => GraphParams::BarabasiAlbert { m: 5 },
            GraphFamily::NewmanWattsStrogatz => GraphParams::NewmanWattsStrogatz {
                k: 2,
                p: if n == 0 {
                    0.0
                } else {
                    (3.0 / n as f64).min(1.0)
                },
            },
            GraphFamily::HolmeKim => GraphParams::HolmeKim { m: 4, p: 0.25 },
        }
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphFamily {
    type Err = GraphParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ba" | "barabasi-albert" => Ok(GraphFamily::BarabasiAlbert),
            "nws" | "newman-watts-strogatz" => Ok(GraphFamily::NewmanWattsStrogatz),
            "hk" | "holme-kim" => Ok(GraphFamily::HolmeKim),
            _ => Err(GraphParamError::UnknownFamily(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GraphParams {
    BarabasiAlbert { m: usize },
    NewmanWattsStrogatz { k: usize, p: f64 },
    HolmeKim { m: usize, p: f64 },
}

impl GraphParams {
    pub fn family(&self) -> GraphFamily {
        match self {
            GraphParams::BarabasiAlbert { .. } => GraphFamily::BarabasiAlbert,
            GraphParams::NewmanWattsStrogatz { .. } => GraphFamily::NewmanWattsStrogatz,
            GraphParams::HolmeKim { .. } => GraphFamily::HolmeKim,
        }
    }
}

/// Simple undirected graph; each edge stored once as `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomGraph {
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
    pub family: GraphFamily,
    pub seed: u64,
}

impl RandomGraph {
    fn empty(n: usize, family: GraphFamily, seed: u64) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
            family,
            seed,
        }
    }

    fn add(&mut self, u: usize, v: usize) -> bool {
        u != v && self.edges.insert((u.min(v), u.max(v)))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency().iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }
}

pub fn gen_graph(params: GraphParams, n: usize, seed: u64) -> Result<RandomGraph, GraphParamError> {
    let mut rng = substream(seed, 0);
    match params {
        GraphParams::BarabasiAlbert { m } => barabasi_albert(n, m, seed, &mut rng),
        GraphParams::NewmanWattsStrogatz { k, p } => newman_watts_strogatz(n, k, p, seed, &mut rng),
        GraphParams::HolmeKim { m, p } => holme_kim(n, m, p, seed, &mut rng),
    }
}

/// `m` distinct elements drawn from `pool` with multiplicity weighting.
fn random_subset(pool: &[usize], m: usize, rng: &mut Rng) -> Vec<usize> {
    let mut chosen = BTreeSet::new();
    while chosen.len() < m {
        chosen.insert(*pool.choose(rng).expect("nonempty pool"));
    }
    chosen.into_iter().collect()
}

fn barabasi_albert(
    n: usize,
    m: usize,
    seed: u64,
    rng: &mut Rng,
) -> Result<RandomGraph, GraphParamError> {
    let family = GraphFamily::BarabasiAlbert;
    if m == 0 {
        return Err(GraphParamError::ZeroAttachment);
    }
    if m >= n {
        return Err(GraphParamError::TooFewNodes {
            family,
            n,
            needed: m,
        });
    }
    let mut g = RandomGraph::empty(n, family, seed);
    let mut targets: Vec<usize> = (0..m).collect();
    let mut repeated = Vec::with_capacity(2 * m * n);
    for source in m..n {
        for &t in &targets {
            g.add(source, t);
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m));
        targets = random_subset(&repeated, m, rng);
    }
    Ok(g)
}

fn newman_watts_strogatz(
    n: usize,
    k: usize,
    p: f64,
    seed: u64,
    rng: &mut Rng,
) -> Result<RandomGraph, GraphParamError> {
    let family = GraphFamily::NewmanWattsStrogatz;
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphParamError::Probability(p));
    }
    if k >= n {
        return Err(GraphParamError::TooFewNodes {
            family,
            n,
            needed: k,
        });
    }
    let mut g = RandomGraph::empty(n, family, seed);
    let ring: Vec<(usize, usize)> = (1..=k / 2)
        .flat_map(|j| (0..n).map(move |u| (u, (u + j) % n)))
        .collect();
    for &(u, v) in &ring {
        g.add(u, v);
    }
    for &(u, _) in &ring {
        if rng.random::<f64>() < p {
            let degree = g.edges.iter().filter(|&&(a, b)| a == u || b == u).count();
            if degree >= n - 1 {
                continue;
            }
            let mut w = rng.random_range(0..n);
            while w == u || g.has_edge(u, w) {
                w = rng.random_range(0..n);
            }
            g.add(u, w);
        }
    }
    Ok(g)
}

fn holme_kim(
    n: usize,
    m: usize,
    p: f64,
    seed: u64,
    rng: &mut Rng,
) -> Result<RandomGraph, GraphParamError> {
    let family = GraphFamily::HolmeKim;
    if m == 0 {
        return Err(GraphParamError::ZeroAttachment);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphParamError::Probability(p));
    }
    if m >= n {
        return Err(GraphParamError::TooFewNodes {
            family,
            n,
            needed: m,
        });
    }
    let mut g = RandomGraph::empty(n, family, seed);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut repeated: Vec<usize> = (0..m).collect();
    let link = |g: &mut RandomGraph,
                adj: &mut Vec<Vec<usize>>,
                repeated: &mut Vec<usize>,
                s: usize,
                t: usize| {
        if g.add(s, t) {
            adj[s].push(t);
            adj[t].push(s);
            repeated.push(t);
            true
        } else {
            false
        }
    };
    for source in m..n {
        let mut candidates = random_subset(&repeated, m, rng);
        let mut target = candidates.pop().expect("m >= 1");
        link(&mut g, &mut adj, &mut repeated, source, target);
        let mut count = 1;
        while count < m {
            if rng.random::<f64>() < p {
                let closing: Vec<usize> = adj[target]
                    .iter()
                    .copied()
                    .filter(|&w| w != source && !g.has_edge(source, w))
                    .collect();
                if let Some(&w) = closing.choose(rng) {
                    link(&mut g, &mut adj, &mut repeated, source, w);
                    count += 1;
                    continue;
                }
            }
            // triad steps may already have used a candidate; draw fresh ones then
            target = loop {
                let t = candidates
                    .pop()
                    .unwrap_or_else(|| *repeated.choose(rng).expect("nonempty pool"));
                if t != source && !g.has_edge(source, t) {
                    break t;
                }
            };
            link(&mut g, &mut adj, &mut repeated, source, target);
            count += 1;
        }
        repeated.extend(std::iter::repeat_n(source, m));
    }
    Ok(g)
}
