//! Verdicts from directional scores, distance-decayed thresholds and the
//! document-level causal graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::domain::{CausalDecision, CausalEdge, CausalGraph, Verdict};
use crate::error::ConfigError;
use crate::scoring::Scope;

/// Scope of an ordered pair plus its sentence distance (zero when intra).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairScope {
    pub scope: Scope,
    pub distance: usize,
}

impl PairScope {
    pub fn between(sent_i: usize, sent_j: usize) -> Self {
        let distance = sent_i.abs_diff(sent_j);
        PairScope {
            scope: if distance == 0 { Scope::Intra } else { Scope::Inter },
            distance,
        }
    }
}

/// `theta * exp(-distance / (2 * max_distance))`.
pub fn decayed_threshold(theta: f64, distance: usize, max_distance: u32) -> Result<f64, ConfigError> {
    if max_distance == 0 {
        return Err(ConfigError::InvalidValue {
            key: "max_distance".into(),
            reason: "must be a positive integer".into(),
        });
    }
    if distance == 0 {
        return Ok(theta);
    }
    Ok(theta * (-0.5 * (distance as f64 / max_distance as f64)).exp())
}

/// Forward if the forward score clears the threshold and beats the reverse
/// score, symmetric for reverse, otherwise no causality. Exact ties never
/// produce a direction.
pub fn determine(s_cause: f64, s_causedby: f64, threshold: f64) -> Verdict {
    if s_cause >= threshold && s_cause > s_causedby {
        Verdict::Forward
    } else if s_causedby >= threshold && s_causedby > s_cause {
        Verdict::Reverse
    } else {
        Verdict::NoCausality
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index becomes the root so clusters are stable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Builds the causal graph of one document.
///
/// Coreferent events are merged into clusters. Every asserted edge `u -> v`
/// is copied to all pairs `(u', v')` with `u'` coreferent with `u` and `v'`
/// coreferent with `v`, carrying the original score; edges inside a cluster
/// are dropped. When several decisions produce the same edge the highest
/// score is kept. Nodes keep the order given; unknown ids found in decisions
/// or coreference pairs are appended.
pub fn assemble_graph(
    nodes: &[String],
    decisions: &[CausalDecision],
    coref_pairs: &[(String, String)],
) -> CausalGraph {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut intern = |id: &str, ids: &mut Vec<String>| -> usize {
        *index.entry(id.to_string()).or_insert_with(|| {
            ids.push(id.to_string());
            ids.len() - 1
        })
    };
    for n in nodes {
        intern(n, &mut ids);
    }
    let mut edges_in: Vec<(usize, usize, f64)> = Vec::new();
    for d in decisions {
        if let Some((c, e)) = d.directed_edge() {
            let (c, e) = (intern(c, &mut ids), intern(e, &mut ids));
            edges_in.push((c, e, d.edge_score()));
        }
    }
    let coref_idx: Vec<(usize, usize)> = coref_pairs
        .iter()
        .map(|(a, b)| (intern(a, &mut ids), intern(b, &mut ids)))
        .collect();

    let mut uf = UnionFind::new(ids.len());
    for (a, b) in coref_idx {
        uf.union(a, b);
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..ids.len() {
        let root = uf.find(i);
        members.entry(root).or_default().push(i);
    }

    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (c, e, score) in edges_in {
        let (rc, re) = (uf.find(c), uf.find(e));
        if rc == re {
            continue;
        }
        for &u in &members[&rc] {
            for &v in &members[&re] {
                let slot = edges.entry((u, v)).or_insert(score);
                if score > *slot {
                    *slot = score;
                }
            }
        }
    }

    let coref_clusters = members
        .values()
        .filter(|m| m.len() > 1)
        .map(|m| m.iter().map(|&i| ids[i].clone()).collect())
        .collect();
    CausalGraph {
        edges: edges
            .into_iter()
            .map(|((u, v), score)| CausalEdge {
                cause: ids[u].clone(),
                effect: ids[v].clone(),
                score,
            })
            .collect(),
        nodes: ids,
        coref_clusters,
    }
}

/// Renders the graph as tab-separated `cause effect score` lines, preceded by
/// one `# coref` comment line per cluster.
pub fn graph_edge_list(doc_id: &str, graph: &CausalGraph) -> String {
    let mut out = String::new();
    for cluster in &graph.coref_clusters {
        out.push_str(&format!("# coref\t{doc_id}\t{}\n", cluster.join(",")));
    }
    for e in &graph.edges {
        out.push_str(&format!("{doc_id}\t{}\t{}\t{}\n", e.cause, e.effect, e.score));
    }
    out
}

/// Unordered pair set helper used when collecting coreference links.
pub fn coref_pair_set<'a, I>(pairs: I) -> Vec<(String, String)>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let set: BTreeSet<(String, String)> = pairs
        .into_iter()
        .map(|(a, b)| {
            if a <= b {
                (a.to_string(), b.to_string())
            } else {
                (b.to_string(), a.to_string())
            }
        })
        .collect();
    set.into_iter().collect()
}
