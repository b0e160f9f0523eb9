use std::cmp::Ordering;
use std::collections::BinaryHeap;

use statrs::function::gamma::ln_gamma;

use super::{check_eps, grouped_atoms, ComplexityInterval, Count, Marginals, Method, TensorProblem, TIE_TOL};
use crate::error::{Error, Result};
use crate::numeric::{log_add, NeumaierSum};

struct Entry<T> {
    ln_w: f64,
    seq: u64,
    item: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Entry<T> {}
impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ln_w.total_cmp(&other.ln_w).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Running count and mass while popping weight classes in nonincreasing order.
struct Accumulator {
    targets: [f64; 2],
    hit: [Option<Count>; 2],
    cum: NeumaierSum,
    n_exact: Option<u128>,
    n_ln: f64,
    last_ln_w: f64,
}

impl Accumulator {
    fn new(upper_target: f64, lower_target: f64) -> Self {
        Accumulator {
            targets: [lower_target - TIE_TOL, upper_target - TIE_TOL],
            hit: [if lower_target <= TIE_TOL { Some(Count::exact(1)) } else { None }, None],
            cum: NeumaierSum::new(),
            n_exact: Some(0),
            n_ln: f64::NEG_INFINITY,
            last_ln_w: f64::INFINITY,
        }
    }

    /// Adds `count` eigenvalues of weight `e^{ln_w}`; returns true once both targets are met.
    fn push(&mut self, ln_w: f64, count: Count) -> bool {
        assert!(ln_w <= self.last_ln_w + 1e-12, "heap emitted weights out of order");
        self.last_ln_w = ln_w;
        let w = ln_w.exp();
        let mass = (ln_w + count.ln).exp();
        let before = self.cum.value();
        for t in 0..2 {
            if self.hit[t].is_some() || before + mass < self.targets[t] {
                continue;
            }
            let need = (self.targets[t] - before).max(0.0);
            let ratio = need / w;
            let j = if ratio.is_finite() && ratio < 4.0e15 {
                let j = (ratio.ceil().max(1.0) as u128).min(count.exact.unwrap_or(u128::MAX));
                Count::exact(j)
            } else {
                Count { ln: need.ln() - ln_w, exact: None }
            };
            self.hit[t] = Some(self.add_count(&j));
        }
        self.cum.add(mass);
        let total = self.add_count(&count);
        self.n_exact = total.exact;
        self.n_ln = total.ln;
        self.hit.iter().all(Option::is_some)
    }

    fn add_count(&self, c: &Count) -> Count {
        match (self.n_exact, c.exact) {
            (Some(a), Some(b)) => match a.checked_add(b) {
                Some(s) => Count::exact(s),
                None => Count { ln: log_add(self.n_ln, c.ln), exact: None },
            },
            _ => Count { ln: log_add(self.n_ln, c.ln), exact: None },
        }
    }

    fn finish(self, method: Method) -> Result<ComplexityInterval> {
        match (self.hit[0], self.hit[1]) {
            (Some(lo), Some(hi)) => Ok(ComplexityInterval { n_lower: lo, n_upper: hi, ln_lower: lo.ln, ln_upper: hi.ln, method }),
            // Explicit eigenvalues exhausted before the upper target.
            _ => Err(Error::DefectTooLarge(1.0 - self.cum.value())),
        }
    }
}

/// Exact `n(ε)` (or a bracket when marginals carry discarded tails) by best-first search.
///
/// `n_cap` bounds the number of heap pops; each pop is one distinct weight class
/// (a lattice point with its multiplicity, or a composition in the degree case).
pub fn exact_complexity(problem: &TensorProblem, eps: f64, n_cap: u64) -> Result<ComplexityInterval> {
    check_eps(eps)?;
    let target = 1.0 - eps * eps;
    let acc = Accumulator::new(target, target - problem.total_defect);
    match &problem.marginals {
        Marginals::Degree { spectrum, d } => {
            let atoms = grouped_atoms(spectrum);
            let method = if atoms.len() == 1 { Method::Flat } else { Method::Enumeration };
            degree_search(&atoms, *d, acc, n_cap)?.finish(method)
        }
        Marginals::Product(list) => {
            let atoms: Vec<_> = list.iter().map(grouped_atoms).collect();
            product_search(&atoms, acc, n_cap)?.finish(Method::Enumeration)
        }
    }
}

fn ln_factorial(n: u32) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

fn binom_u128(n: u32, k: u32) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(c)
}

/// Number of index vectors whose multiset of atoms is `m` (sparse `(atom, count)`).
fn composition_count(m: &[(u32, u32)], d: u32, atoms: &[(f64, u64, f64)]) -> Count {
    let mut exact: Option<u128> = Some(1);
    let mut rest = d;
    let mut ln = ln_factorial(d);
    for &(i, c) in m {
        let mult = atoms[i as usize].1;
        ln += c as f64 * (mult as f64).ln() - ln_factorial(c);
        exact = exact.and_then(|e| {
            let b = binom_u128(rest, c)?;
            let p = (mult as u128).checked_pow(c)?;
            e.checked_mul(b)?.checked_mul(p)
        });
        rest -= c;
    }
    match exact {
        Some(n) => Count::exact(n),
        None => Count { ln, exact: None },
    }
}

fn composition_ln_w(m: &[(u32, u32)], atoms: &[(f64, u64, f64)]) -> f64 {
    m.iter().map(|&(i, c)| c as f64 * atoms[i as usize].0).sum()
}

fn bump(m: &[(u32, u32)], from: u32, to: u32) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = Vec::with_capacity(m.len() + 1);
    let mut placed = false;
    for &(i, c) in m {
        if !placed && to < i {
            out.push((to, 1));
            placed = true;
        }
        let mut c = c;
        if i == from {
            c -= 1;
        }
        if i == to {
            c += 1;
            placed = true;
        }
        if c > 0 {
            out.push((i, c));
        }
    }
    if !placed {
        out.push((to, 1));
    }
    out
}

/// Enumerates multisets of `d` atoms in nonincreasing product weight. Each multiset,
/// viewed as a nondecreasing index sequence, has a unique parent obtained by
/// decrementing its first positive entry; this yields at most two children per node.
fn degree_search(atoms: &[(f64, u64, f64)], d: usize, mut acc: Accumulator, n_cap: u64) -> Result<Accumulator> {
    let d = d as u32;
    let a_len = atoms.len() as u32;
    let mut heap = BinaryHeap::new();
    let root = vec![(0u32, d)];
    let mut seq = 0u64;
    heap.push(Entry { ln_w: composition_ln_w(&root, atoms), seq, item: root });
    let mut pops = 0u64;
    while let Some(Entry { ln_w, item: m, .. }) = heap.pop() {
        pops += 1;
        if pops > n_cap {
            return Err(Error::CapExceeded(n_cap));
        }
        if acc.push(ln_w, composition_count(&m, d, atoms)) {
            return Ok(acc);
        }
        let m0 = if m[0].0 == 0 { m[0].1 } else { 0 };
        let mut children = Vec::with_capacity(2);
        if m0 >= 1 && a_len > 1 {
            children.push(bump(&m, 0, 1));
        }
        if m0 < d {
            let (a, ma) = if m[0].0 == 0 { m[1] } else { m[0] };
            if ma == 1 && a + 1 < a_len {
                children.push(bump(&m, a, a + 1));
            }
        }
        for c in children {
            seq += 1;
            heap.push(Entry { ln_w: composition_ln_w(&c, atoms), seq, item: c });
        }
    }
    Ok(acc)
}

#[derive(Clone, Copy)]
struct Node {
    /// Last coordinate (in sorted marginal order) away from its head atom.
    pos: usize,
    atom: u32,
    count: Count,
}

fn scale_count(c: Count, div: u64, mul: u64) -> Count {
    let ln = c.ln - (div as f64).ln() + (mul as f64).ln();
    let exact = c.exact.and_then(|e| (e / div as u128).checked_mul(mul as u128));
    match exact {
        Some(n) => Count::exact(n),
        None => Count { ln, exact: None },
    }
}

/// Best-first search over the product lattice. Marginals are ordered by their
/// second-to-first weight ratio, descending, so that moving a trailing `2`
/// one coordinate to the right never increases the weight.
fn product_search(atoms: &[Vec<(f64, u64, f64)>], mut acc: Accumulator, n_cap: u64) -> Result<Accumulator> {
    let mut base_ln_w = 0.0;
    let mut base_count = Count::exact(1);
    for a in atoms {
        base_ln_w += a[0].0;
        base_count = scale_count(base_count, 1, a[0].1);
    }
    let mut order: Vec<usize> = (0..atoms.len()).filter(|&j| atoms[j].len() > 1).collect();
    order.sort_by(|&x, &y| {
        let gx = atoms[x][1].0 - atoms[x][0].0;
        let gy = atoms[y][1].0 - atoms[y][0].0;
        gy.total_cmp(&gx).then(x.cmp(&y))
    });
    let marg: Vec<&Vec<(f64, u64, f64)>> = order.iter().map(|&j| &atoms[j]).collect();
    let delta = |p: usize, k: u32| marg[p][k as usize].0 - marg[p][0].0;

    let mut heap: BinaryHeap<Entry<Option<Node>>> = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Entry { ln_w: base_ln_w, seq, item: None });
    let mut pops = 0u64;
    while let Some(Entry { ln_w, item, .. }) = heap.pop() {
        pops += 1;
        if pops > n_cap {
            return Err(Error::CapExceeded(n_cap));
        }
        let count = item.map_or(base_count, |n| n.count);
        if acc.push(ln_w, count) {
            return Ok(acc);
        }
        let mut push = |ln_w: f64, node: Node| {
            seq += 1;
            heap.push(Entry { ln_w, seq, item: Some(node) });
        };
        let open_next = |p: usize, count: Count| {
            let c = scale_count(count, marg[p][0].1, marg[p][1].1);
            Node { pos: p, atom: 1, count: c }
        };
        match item {
            None => {
                if !marg.is_empty() {
                    push(ln_w + delta(0, 1), open_next(0, base_count));
                }
            }
            Some(n) => {
                let p = n.pos;
                let k = n.atom as usize;
                if k + 1 < marg[p].len() {
                    let c = scale_count(n.count, marg[p][k].1, marg[p][k + 1].1);
                    push(ln_w + delta(p, n.atom + 1) - delta(p, n.atom), Node { pos: p, atom: n.atom + 1, count: c });
                }
                if p + 1 < marg.len() {
                    push(ln_w + delta(p + 1, 1), open_next(p + 1, n.count));
                    if n.atom == 1 {
                        let back = scale_count(n.count, marg[p][1].1, marg[p][0].1);
                        push(ln_w + delta(p + 1, 1) - delta(p, 1), open_next(p + 1, back));
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Bracket reported by [`enumeration_oracle`]: counts against the defect-adjusted
/// target and against `1−ε²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCount {
    pub lower: u64,
    pub upper: u64,
}

/// Materializes every product weight, sorts, and scans prefix sums.
pub fn enumeration_oracle(problem: &TensorProblem, eps: f64) -> Result<OracleCount> {
    check_eps(eps)?;
    let d = problem.d();
    let size: f64 = (0..d).map(|j| problem.marginal(j).len() as f64).product();
    if size > 1e7 {
        return Err(Error::TooLarge(size));
    }
    let mut prods = vec![1.0f64];
    for j in 0..d {
        let w = &problem.marginal(j).weights;
        prods = prods.iter().flat_map(|&p| w.iter().map(move |&x| p * x)).collect();
    }
    prods.sort_by(|a, b| b.total_cmp(a));
    let target = 1.0 - eps * eps;
    let find = |t: f64| -> Option<u64> {
        if t <= TIE_TOL {
            return Some(1);
        }
        let mut cum = NeumaierSum::new();
        for (i, &p) in prods.iter().enumerate() {
            cum.add(p);
            if cum.value() >= t - TIE_TOL {
                return Some(i as u64 + 1);
            }
        }
        None
    };
    let upper = find(target).ok_or(Error::DefectTooLarge(problem.total_defect))?;
    let lower = find(target - problem.total_defect).unwrap_or(upper);
    Ok(OracleCount { lower, upper })
}
