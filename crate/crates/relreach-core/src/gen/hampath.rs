//! Walk-and-stop gadget turning Hamiltonian-path existence into a
//! reachability-comparison query.
//!
//! From a fresh start state a coin either enters the input graph at the
//! chosen vertex or a reference chain of the same length. Inside the graph
//! the scheduler walks edges, each step surviving with probability 1/2, and
//! may stop at any vertex, which reaches `s_a` surely; the chain reaches
//! `s_b` with probability 2^-|V|. Under memoryless deterministic schedulers
//! the two probabilities agree up to the instance tolerance exactly when the
//! graph has a Hamiltonian path from the chosen vertex, because a stop after
//! k distinct vertices yields 2^-k and revisits yield 0.

use super::{Engine, Expected, GenError, GeneratedInstance};
use crate::model::{Action, Mdp};
use crate::rational::{fmt_rat, rat, Rat};
use crate::verdict::Verdict;
use num::{BigInt, One};
use std::collections::{BTreeMap, BTreeSet};

/// A directed graph with named vertices in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    pub names: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl Digraph {
    /// Index of a vertex by name.
    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Parses a graph listing: each line is an edge `U V`, a lone vertex name,
/// or blank; `#` starts a comment. Duplicate edges collapse.
pub fn parse_graph(text: &str) -> Result<Digraph, GenError> {
    let mut names: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = line.split_whitespace().collect();
        let mut intern = |tok: &str| -> usize {
            if let Some(&i) = index.get(tok) {
                i
            } else {
                index.insert(tok.to_string(), names.len());
                names.push(tok.to_string());
                names.len() - 1
            }
        };
        match toks.len() {
            0 => {}
            1 => {
                intern(toks[0]);
            }
            2 => {
                let u = intern(toks[0]);
                let w = intern(toks[1]);
                if seen.insert((u, w)) {
                    edges.push((u, w));
                }
            }
            _ => {
                return Err(GenError::MalformedGraphLine {
                    line: lineno + 1,
                    text: raw.trim().to_string(),
                })
            }
        }
    }
    Ok(Digraph { names, edges })
}

/// Depth-first search for a simple path from `v_init` covering every vertex.
pub fn has_hamiltonian_path_from(graph: &Digraph, v_init: usize) -> bool {
    let v = graph.names.len();
    if v_init >= v {
        return false;
    }
    let mut adj = vec![Vec::new(); v];
    for &(a, b) in &graph.edges {
        if a != b {
            adj[a].push(b);
        }
    }
    fn dfs(u: usize, count: usize, v: usize, adj: &[Vec<usize>], visited: &mut [bool]) -> bool {
        if count == v {
            return true;
        }
        for &w in &adj[u] {
            if !visited[w] {
                visited[w] = true;
                if dfs(w, count + 1, v, adj, visited) {
                    return true;
                }
                visited[w] = false;
            }
        }
        false
    }
    let mut visited = vec![false; v];
    visited[v_init] = true;
    dfs(v_init, 1, v, &adj, &mut visited)
}

/// Builds the gadget for `graph` with the walk starting at vertex `v_init`.
pub fn gen_hampath_reduction(
    graph: &Digraph,
    v_init: usize,
) -> Result<GeneratedInstance, GenError> {
    let v = graph.names.len();
    if v == 0 {
        return Err(GenError::EmptyGraph);
    }
    if v_init >= v {
        return Err(GenError::UnknownVertex(v_init.to_string()));
    }
    let (s0, s_bot, s_a, s_b) = (v, v + 1, v + 2, v + 3);
    let half = || rat(1, 2);
    let one = Rat::one;

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); v];
    for &(a, b) in &graph.edges {
        adj[a].push(b);
    }
    for out in &mut adj {
        out.sort_unstable();
    }

    let mut actions: Vec<Vec<Action>> = Vec::with_capacity(v + 3 + v.max(1));
    for u in 0..v {
        let mut acts: Vec<Action> = adj[u]
            .iter()
            .map(|&w| Action {
                name: format!("e_{}_{}", graph.names[u], graph.names[w]),
                transitions: vec![(w, half()), (s_bot, half())],
            })
            .collect();
        acts.push(Action {
            name: "stop".into(),
            transitions: vec![(s_a, one())],
        });
        actions.push(acts);
    }
    // Start state: enter the graph or the reference chain.
    let chain_entry = if v >= 2 { v + 4 } else { s_b };
    actions.push(vec![Action {
        name: "tau".into(),
        transitions: vec![(v_init, half()), (chain_entry, half())],
    }]);
    for s in [s_bot, s_a, s_b] {
        actions.push(vec![Action {
            name: "done".into(),
            transitions: vec![(s, one())],
        }]);
    }
    // Reference chain of v-1 coin flips ending at s_b.
    for i in 1..v {
        let next = if i == v - 1 { s_b } else { v + 4 + i };
        actions.push(vec![Action {
            name: "tau".into(),
            transitions: vec![(next, half()), (s_bot, half())],
        }]);
    }

    let labels: BTreeMap<String, BTreeSet<usize>> = [
        ("s0".to_string(), BTreeSet::from([s0])),
        ("s_a".to_string(), BTreeSet::from([s_a])),
        ("s_b".to_string(), BTreeSet::from([s_b])),
    ]
    .into();

    let eps = Rat::new(BigInt::one(), BigInt::one() << (v + 2));
    let ham = has_hamiltonian_path_from(graph, v_init);
    let expected = vec![Expected {
        engine: Engine::MdOracle,
        verdict: if ham { Verdict::Holds } else { Verdict::Violated },
        source: if ham {
            "a depth-first search finds a simple path from the start vertex covering every vertex"
        } else {
            "no simple path from the start vertex covers every vertex"
        }
        .into(),
    }];

    Ok(GeneratedInstance {
        name: format!("hampath_{}", graph.names[v_init]),
        mdp: Mdp { actions, labels },
        property: format!(
            "exists s . P(s, s0, F s_a) - P(s, s0, F s_b) ~ 0 eps {}",
            fmt_rat(&eps)
        ),
        expected,
        notes: format!(
            "Hamiltonian-path gadget over {v} vertices; intended for the \
             memoryless-deterministic oracle, where stopping after k distinct vertices \
             reaches s_a with probability 2^-k and the reference chain reaches s_b with \
             probability 2^-{v}. The unrestricted checker may answer differently."
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtmc::reach_probability;
    use crate::model::induce_dtmc;
    use crate::oracle::md_check;
    use crate::property::parse_query;
    use crate::rational::rat;

    #[test]
    fn parses_comments_lone_vertices_and_dedups() {
        let g = parse_graph("# roads\na b\n\nb c # back\nc\nd\na b\n").unwrap();
        assert_eq!(g.names, vec!["a", "b", "c", "d"]);
        assert_eq!(g.edges, vec![(0, 1), (1, 2)]);
        assert_eq!(g.vertex("c"), Some(2));
        assert_eq!(g.vertex("z"), None);
    }

    #[test]
    fn rejects_overlong_lines() {
        assert_eq!(
            parse_graph("a b c").unwrap_err(),
            GenError::MalformedGraphLine {
                line: 1,
                text: "a b c".into()
            }
        );
    }

    #[test]
    fn path_graph_has_the_path_and_the_oracle_agrees() {
        let g = parse_graph("a b\nb c\n").unwrap();
        assert!(has_hamiltonian_path_from(&g, 0));
        assert!(!has_hamiltonian_path_from(&g, 1));
        let inst = gen_hampath_reduction(&g, 0).unwrap();
        assert_eq!(inst.mdp.num_states(), 9);
        assert!(inst.property.ends_with("eps 1/32"));
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let out = md_check(&inst.mdp, &q, 1_000_000).unwrap();
        assert_eq!(out.verdict, Verdict::Holds);
        // The witness walks the whole path and stops at its end.
        let w = &out.witness.unwrap()[0];
        let dtmc = induce_dtmc(&inst.mdp, w).unwrap();
        let pa = reach_probability(&dtmc, &inst.mdp.labels["s_a"].clone()).unwrap()[3].clone();
        let pb = reach_probability(&dtmc, &inst.mdp.labels["s_b"].clone()).unwrap()[3].clone();
        assert_eq!(pa, rat(1, 8));
        assert_eq!(pb, rat(1, 8));
    }

    #[test]
    fn star_graph_has_no_path() {
        let g = parse_graph("c x\nc y\nc z\n").unwrap();
        assert!(!has_hamiltonian_path_from(&g, 0));
        let inst = gen_hampath_reduction(&g, 0).unwrap();
        assert_eq!(inst.expected[0].verdict, Verdict::Violated);
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let out = md_check(&inst.mdp, &q, 1_000_000).unwrap();
        assert_eq!(out.verdict, Verdict::Violated);
    }

    #[test]
    fn single_vertex_is_a_trivial_path() {
        let g = parse_graph("only\n").unwrap();
        let inst = gen_hampath_reduction(&g, 0).unwrap();
        assert_eq!(inst.mdp.num_states(), 5);
        assert_eq!(inst.expected[0].verdict, Verdict::Holds);
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let out = md_check(&inst.mdp, &q, 1_000).unwrap();
        assert_eq!(out.verdict, Verdict::Holds);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert_eq!(
            gen_hampath_reduction(&Digraph {
                names: vec![],
                edges: vec![]
            }, 0)
            .unwrap_err(),
            GenError::EmptyGraph
        );
        let g = parse_graph("a b\n").unwrap();
        assert_eq!(
            gen_hampath_reduction(&g, 5).unwrap_err(),
            GenError::UnknownVertex("5".into())
        );
    }
}
