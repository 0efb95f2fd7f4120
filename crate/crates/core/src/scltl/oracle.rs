//! Reference satisfaction semantics on finite words. Everything must be
//! witnessed inside the word: an atom needs its position to exist, `X`
//! needs a successor position, and `F`/`U` need a witness at or after the
//! current position. Satisfaction is therefore preserved when a word is
//! extended, which is what lets the automata in [`super::dfa`] treat
//! accepting states as absorbing.
//!
//! This evaluator is deliberately independent of the DFA construction; the
//! test suites use it as the ground truth that `to_dfa` is checked against.

use super::Formula;

enum Node<'f> {
    Atom(&'f str),
    NotAtom(&'f str),
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    Until(usize, usize),
    Eventually(usize),
}

fn collect<'f>(f: &'f Formula, nodes: &mut Vec<Node<'f>>) -> usize {
    let node = match f {
        Formula::Atom(a) => Node::Atom(a),
        Formula::NotAtom(a) => Node::NotAtom(a),
        Formula::And(l, r) => {
            let (l, r) = (collect(l, nodes), collect(r, nodes));
            Node::And(l, r)
        }
        Formula::Or(l, r) => {
            let (l, r) = (collect(l, nodes), collect(r, nodes));
            Node::Or(l, r)
        }
        Formula::Next(g) => Node::Next(collect(g, nodes)),
        Formula::Until(l, r) => {
            let (l, r) = (collect(l, nodes), collect(r, nodes));
            Node::Until(l, r)
        }
        Formula::Eventually(g) => Node::Eventually(collect(g, nodes)),
    };
    nodes.push(node);
    nodes.len() - 1
}

/// Evaluates `f` on a finite word of proposition sets.
///
/// Computed as a backward sweep over positions with the standard expansion
/// rules; the empty suffix satisfies nothing, so e.g. `X a` is false on a
/// one-symbol word.
pub fn semantic_oracle<S: AsRef<str>>(f: &Formula, word: &[Vec<S>]) -> bool {
    let mut nodes = Vec::new();
    let root = collect(f, &mut nodes);
    let n = word.len();
    // vals[v] is the truth of node v at the position currently being
    // filled; next[v] is its truth one position later.
    let mut vals = vec![false; nodes.len()];
    let mut next = vec![false; nodes.len()];
    for i in (0..n).rev() {
        std::mem::swap(&mut vals, &mut next);
        let here = &word[i];
        let holds = |name: &str| here.iter().any(|p| p.as_ref() == name);
        for (v, node) in nodes.iter().enumerate() {
            vals[v] = match *node {
                Node::Atom(a) => holds(a),
                Node::NotAtom(a) => !holds(a),
                Node::And(l, r) => vals[l] && vals[r],
                Node::Or(l, r) => vals[l] || vals[r],
                Node::Next(g) => i + 1 < n && next[g],
                Node::Eventually(g) => vals[g] || (i + 1 < n && next[v]),
                Node::Until(l, r) => vals[r] || (vals[l] && i + 1 < n && next[v]),
            };
        }
    }
    n > 0 && vals[root]
}
