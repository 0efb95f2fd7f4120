//! Formula-to-DFA compilation.
//!
//! States are formula residuals: what still has to hold on the rest of the
//! word. Reading a symbol rewrites a residual with the expansion rules
//! (`F g` becomes `after(g) | F g`, `l U r` becomes `after(r) | after(l) &
//! (l U r)`, atoms resolve immediately). Every residual is a positive
//! Boolean combination of "unit" subformulas (atoms, negated atoms,
//! temporal nodes), kept canonical as a minimal monotone DNF over interned
//! units, so the expansion terminates and equal residuals collide. The
//! `true` residual is the accepting state and is absorbing by
//! construction; `false` is the reject sink. The raw automaton is then
//! minimized by partition refinement and renumbered breadth-first.

use std::collections::HashMap;

use super::{Formula, FormulaError, MAX_ATOMS};

/// Hard cap on raw construction size; realistic request formulas stay far
/// below it.
const MAX_RAW_STATES: usize = 10_000;
const MAX_UNITS: usize = 64;

/// Deterministic, total, minimal acceptor of the finite words that satisfy
/// a formula (equivalently: that have a satisfying prefix — accepting
/// states are absorbing). The input alphabet is `2^atoms`; symbol index
/// bit `i` means atom `atoms()[i]` is present. Propositions outside the
/// formula's atoms are ignored by [`Dfa::sym_of`], so a network's larger
/// label universe never enlarges the automaton.
#[derive(Debug, Clone)]
pub struct Dfa {
    atoms: Vec<String>,
    table: Vec<Vec<u32>>,
    init: u32,
    accepting: Vec<bool>,
}

impl Dfa {
    pub fn num_states(&self) -> usize {
        self.table.len()
    }

    pub fn num_syms(&self) -> usize {
        1 << self.atoms.len()
    }

    /// Formula atoms, sorted; defines the symbol encoding.
    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn init(&self) -> u32 {
        self.init
    }

    pub fn step(&self, state: u32, sym: u16) -> u32 {
        self.table[state as usize][sym as usize]
    }

    pub fn is_accepting(&self, state: u32) -> bool {
        self.accepting[state as usize]
    }

    /// Encodes a proposition set as a symbol index, ignoring names that are
    /// not atoms of this automaton.
    pub fn sym_of<S: AsRef<str>>(&self, props: impl IntoIterator<Item = S>) -> u16 {
        let mut sym = 0u16;
        for p in props {
            if let Ok(i) = self.atoms.binary_search_by(|a| a.as_str().cmp(p.as_ref())) {
                sym |= 1 << i;
            }
        }
        sym
    }

    /// Runs the word from the initial state and reports whether it ends in
    /// an accepting state. Absorption makes this equivalent to "some prefix
    /// is satisfying".
    pub fn accepts<S: AsRef<str>>(&self, word: &[Vec<S>]) -> bool {
        let mut q = self.init;
        for props in word {
            q = self.step(q, self.sym_of(props.iter().map(|p| p.as_ref())));
        }
        self.is_accepting(q)
    }

    /// Re-runs minimization; used by tests to confirm the automaton is
    /// already minimal.
    pub fn minimized(&self) -> Dfa {
        minimize(self.atoms.clone(), &self.table, &self.accepting, self.init)
    }

    /// Plain-text dump of states and guards (as DNF over the atoms) for
    /// debugging.
    pub fn export_description(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("atoms: {}\n", self.atoms.join(", ")));
        out.push_str(&format!("states: {}\n", self.num_states()));
        out.push_str(&format!("init: {}\n", self.init));
        let acc: Vec<String> = (0..self.num_states())
            .filter(|&s| self.accepting[s])
            .map(|s| s.to_string())
            .collect();
        out.push_str(&format!("accepting: {}\n", acc.join(", ")));
        for src in 0..self.num_states() {
            let mut by_dst: Vec<(u32, Vec<u16>)> = Vec::new();
            for sym in 0..self.num_syms() as u16 {
                let dst = self.table[src][sym as usize];
                match by_dst.iter_mut().find(|(d, _)| *d == dst) {
                    Some((_, syms)) => syms.push(sym),
                    None => by_dst.push((dst, vec![sym])),
                }
            }
            for (dst, syms) in by_dst {
                let guard: Vec<String> = syms.iter().map(|&s| self.minterm(s)).collect();
                out.push_str(&format!("{src} -> {dst} [{}]\n", guard.join(" | ")));
            }
        }
        out
    }

    fn minterm(&self, sym: u16) -> String {
        if self.atoms.is_empty() {
            return "true".to_string();
        }
        let lits: Vec<String> = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if sym & (1 << i) != 0 {
                    a.clone()
                } else {
                    format!("!{a}")
                }
            })
            .collect();
        lits.join(" & ")
    }
}

/// Monotone DNF over interned units: sorted clause bitmasks forming a
/// minimal antichain. `vec![0]` (one empty clause) is `true`, no clauses is
/// `false`.
type Dnf = Vec<u64>;

const TRUE: &[u64] = &[0];

fn canon(mut clauses: Vec<u64>) -> Dnf {
    clauses.sort_by_key(|c| (c.count_ones(), *c));
    clauses.dedup();
    let mut out: Vec<u64> = Vec::new();
    'next: for c in clauses {
        for &kept in &out {
            if kept & c == kept {
                continue 'next;
            }
        }
        out.push(c);
    }
    out.sort_unstable();
    out
}

fn dnf_or(a: &Dnf, b: &Dnf) -> Dnf {
    let mut all = a.clone();
    all.extend_from_slice(b);
    canon(all)
}

fn dnf_and(a: &Dnf, b: &Dnf) -> Dnf {
    let mut all = Vec::with_capacity(a.len() * b.len());
    for &ca in a {
        for &cb in b {
            all.push(ca | cb);
        }
    }
    canon(all)
}

struct Builder {
    atoms: Vec<String>,
    units: Vec<Formula>,
    unit_ids: HashMap<Formula, usize>,
}

impl Builder {
    fn unit(&mut self, f: &Formula) -> Result<u64, FormulaError> {
        let id = match self.unit_ids.get(f) {
            Some(&id) => id,
            None => {
                let id = self.units.len();
                if id >= MAX_UNITS {
                    return Err(FormulaError::TooComplex);
                }
                self.units.push(f.clone());
                self.unit_ids.insert(f.clone(), id);
                id
            }
        };
        Ok(1u64 << id)
    }

    /// Formula as a DNF over units, flattening `&`/`|`.
    fn dnf_of(&mut self, f: &Formula) -> Result<Dnf, FormulaError> {
        match f {
            Formula::And(l, r) => {
                let (l, r) = (self.dnf_of(l)?, self.dnf_of(r)?);
                Ok(dnf_and(&l, &r))
            }
            Formula::Or(l, r) => {
                let (l, r) = (self.dnf_of(l)?, self.dnf_of(r)?);
                Ok(dnf_or(&l, &r))
            }
            other => Ok(vec![self.unit(other)?]),
        }
    }

    fn atom_bit(&self, name: &str) -> usize {
        self.atoms
            .binary_search_by(|a| a.as_str().cmp(name))
            .expect("atom interned")
    }

    /// Residual of `f` after reading `sym`: what the rest of the word must
    /// satisfy.
    fn deriv(&mut self, f: &Formula, sym: u16) -> Result<Dnf, FormulaError> {
        Ok(match f {
            Formula::Atom(a) => {
                if sym & (1 << self.atom_bit(a)) != 0 {
                    TRUE.to_vec()
                } else {
                    Vec::new()
                }
            }
            Formula::NotAtom(a) => {
                if sym & (1 << self.atom_bit(a)) == 0 {
                    TRUE.to_vec()
                } else {
                    Vec::new()
                }
            }
            Formula::And(l, r) => {
                let (l, r) = (self.deriv(l, sym)?, self.deriv(r, sym)?);
                dnf_and(&l, &r)
            }
            Formula::Or(l, r) => {
                let (l, r) = (self.deriv(l, sym)?, self.deriv(r, sym)?);
                dnf_or(&l, &r)
            }
            Formula::Next(g) => self.dnf_of(g)?,
            Formula::Eventually(g) => {
                let now = self.deriv(g, sym)?;
                let again = vec![self.unit(f)?];
                dnf_or(&now, &again)
            }
            Formula::Until(l, r) => {
                let done = self.deriv(r, sym)?;
                let keep = self.deriv(l, sym)?;
                let again = vec![self.unit(f)?];
                dnf_or(&done, &dnf_and(&keep, &again))
            }
        })
    }

    fn step_dnf(&mut self, state: &Dnf, sym: u16) -> Result<Dnf, FormulaError> {
        let mut result: Dnf = Vec::new();
        for &clause in state {
            let mut acc: Dnf = TRUE.to_vec();
            let mut bits = clause;
            while bits != 0 {
                let u = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let uf = self.units[u].clone();
                let d = self.deriv(&uf, sym)?;
                acc = dnf_and(&acc, &d);
                if acc.is_empty() {
                    break;
                }
            }
            result = dnf_or(&result, &acc);
        }
        Ok(result)
    }
}

/// Compiles a formula into its minimal total DFA. Accepted words are
/// exactly those with a satisfying prefix, matching
/// [`super::semantic_oracle`] on every finite word.
pub fn to_dfa(f: &Formula) -> Result<Dfa, FormulaError> {
    let atoms = f.atoms();
    if atoms.len() > MAX_ATOMS {
        return Err(FormulaError::TooManyAtoms(atoms.len()));
    }
    let nsyms = 1usize << atoms.len();
    let mut b = Builder {
        atoms: atoms.clone(),
        units: Vec::new(),
        unit_ids: HashMap::new(),
    };

    let init_dnf = b.dnf_of(f)?;
    let mut states: Vec<Dnf> = vec![init_dnf.clone()];
    let mut index: HashMap<Dnf, u32> = HashMap::new();
    index.insert(init_dnf, 0);
    let mut table: Vec<Vec<u32>> = Vec::new();
    let mut at = 0;
    while at < states.len() {
        let state = states[at].clone();
        let mut row = Vec::with_capacity(nsyms);
        for sym in 0..nsyms as u16 {
            let succ = b.step_dnf(&state, sym)?;
            let id = match index.get(&succ) {
                Some(&id) => id,
                None => {
                    let id = states.len() as u32;
                    if states.len() >= MAX_RAW_STATES {
                        return Err(FormulaError::TooComplex);
                    }
                    states.push(succ.clone());
                    index.insert(succ, id);
                    id
                }
            };
            row.push(id);
        }
        table.push(row);
        at += 1;
    }

    let accepting: Vec<bool> = states.iter().map(|s| s.as_slice() == TRUE).collect();
    let dfa = minimize(atoms, &table, &accepting, 0);
    debug_assert!(check_absorbing(&dfa));
    Ok(dfa)
}

fn check_absorbing(d: &Dfa) -> bool {
    (0..d.num_states() as u32).all(|s| {
        !d.is_accepting(s) || (0..d.num_syms() as u16).all(|sym| d.is_accepting(d.step(s, sym)))
    })
}

/// Moore-style partition refinement followed by a breadth-first canonical
/// renumbering, so equal languages always produce the identical table.
fn minimize(atoms: Vec<String>, table: &[Vec<u32>], accepting: &[bool], init: u32) -> Dfa {
    let n = table.len();
    let nsyms = table.first().map_or(1, |r| r.len());
    let mut block: Vec<u32> = accepting.iter().map(|&a| a as u32).collect();
    let mut nblocks = 2.min(n);
    loop {
        let mut sig_ids: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
        let mut next: Vec<u32> = Vec::with_capacity(n);
        for s in 0..n {
            let sig = (
                block[s],
                table[s].iter().map(|&t| block[t as usize]).collect::<Vec<u32>>(),
            );
            let fresh = sig_ids.len() as u32;
            next.push(*sig_ids.entry(sig).or_insert(fresh));
        }
        let count = sig_ids.len();
        block = next;
        if count == nblocks {
            break;
        }
        nblocks = count;
    }

    // Quotient on blocks, then renumber breadth-first from the initial
    // block in symbol order.
    let mut rep: Vec<usize> = vec![usize::MAX; nblocks];
    for (s, &b) in block.iter().enumerate() {
        if rep[b as usize] == usize::MAX {
            rep[b as usize] = s;
        }
    }
    let mut order: Vec<u32> = Vec::with_capacity(nblocks);
    let mut renum: Vec<u32> = vec![u32::MAX; nblocks];
    let start = block[init as usize];
    renum[start as usize] = 0;
    order.push(start);
    let mut at = 0;
    while at < order.len() {
        let b = order[at] as usize;
        for sym in 0..nsyms {
            let t = block[table[rep[b]][sym] as usize];
            if renum[t as usize] == u32::MAX {
                renum[t as usize] = order.len() as u32;
                order.push(t);
            }
        }
        at += 1;
    }

    let mut new_table = vec![vec![0u32; nsyms]; order.len()];
    let mut new_acc = vec![false; order.len()];
    for (new_id, &b) in order.iter().enumerate() {
        let r = rep[b as usize];
        new_acc[new_id] = accepting[r];
        for sym in 0..nsyms {
            new_table[new_id][sym] = renum[block[table[r][sym] as usize] as usize];
        }
    }
    Dfa {
        atoms,
        table: new_table,
        init: 0,
        accepting: new_acc,
    }
}
