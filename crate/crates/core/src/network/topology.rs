use alloc::vec;
use alloc::vec::Vec;

/// A maximal run of elements through nodes of degree two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub nodes: Vec<usize>,
    /// Element index and whether it is traversed from its node `b` to `a`.
    pub elements: Vec<(usize, bool)>,
}

pub(crate) fn incidence(n_nodes: usize, elements: &[[usize; 2]]) -> Vec<Vec<usize>> {
    let mut inc = vec![Vec::new(); n_nodes];
    for (e, [a, b]) in elements.iter().enumerate() {
        inc[*a].push(e);
        inc[*b].push(e);
    }
    inc
}

/// Component label of every node; isolated nodes get their own label.
pub(crate) fn components(n_nodes: usize, elements: &[[usize; 2]]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n_nodes).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for [a, b] in elements {
        let (ra, rb) = (find(&mut parent, *a), find(&mut parent, *b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..n_nodes).map(|x| find(&mut parent, x)).collect()
}

/// Splits the element graph into chains. Chains start at nodes whose degree
/// is not two; closed loops without such nodes start at their lowest element.
pub fn chains(n_nodes: usize, elements: &[[usize; 2]]) -> Vec<Chain> {
    let inc = incidence(n_nodes, elements);
    let mut used = vec![false; elements.len()];
    let mut out = Vec::new();
    let walk = |start_node: usize, first: usize, used: &mut Vec<bool>| {
        let mut chain = Chain {
            nodes: vec![start_node],
            elements: Vec::new(),
        };
        let mut node = start_node;
        let mut e = first;
        loop {
            used[e] = true;
            let [a, b] = elements[e];
            let reversed = b == node && a != node;
            let next = if reversed { a } else { b };
            chain.elements.push((e, reversed));
            chain.nodes.push(next);
            node = next;
            if inc[node].len() != 2 {
                break;
            }
            match inc[node].iter().find(|&&f| !used[f]) {
                Some(&f) => e = f,
                None => break,
            }
        }
        chain
    };
    for n in 0..n_nodes {
        if inc[n].len() == 2 {
            continue;
        }
        for &e in &inc[n] {
            if !used[e] {
                out.push(walk(n, e, &mut used));
            }
        }
    }
    for e in 0..elements.len() {
        if !used[e] {
            out.push(walk(elements[e][0], e, &mut used));
        }
    }
    out
}
