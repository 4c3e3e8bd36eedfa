//! Potts MRF energies minimized by alpha-expansion.

use crate::maxflow::FlowGraph;

/// Binary energy `sum_p U_p(x_p) + sum_(p,q) E_pq(x_p, x_q)` with submodular pairs.
#[derive(Clone, Debug, Default)]
pub struct BinaryEnergy {
    /// (cost of x = 0, cost of x = 1) per variable.
    pub unary: Vec<(i64, i64)>,
    /// (p, q, E00, E01, E10, E11).
    pub pairs: Vec<(usize, usize, i64, i64, i64, i64)>,
}

impl BinaryEnergy {
    pub fn new(vars: usize) -> Self {
        Self { unary: vec![(0, 0); vars], pairs: Vec::new() }
    }

    pub fn evaluate(&self, x: &[bool]) -> i64 {
        let u: i64 = self.unary.iter().zip(x).map(|(&(c0, c1), &b)| if b { c1 } else { c0 }).sum();
        let p: i64 = self
            .pairs
            .iter()
            .map(|&(p, q, e00, e01, e10, e11)| match (x[p], x[q]) {
                (false, false) => e00,
                (false, true) => e01,
                (true, false) => e10,
                (true, true) => e11,
            })
            .sum();
        u + p
    }

    /// Exact minimizer via one s-t min cut. Source side means `x = 0`.
    ///
    /// Panics if a pair term is not submodular (`E01 + E10 < E00 + E11`).
    pub fn minimize(&self) -> (i64, Vec<bool>) {
        let n = self.unary.len();
        let (s, t) = (n, n + 1);
        let mut g = FlowGraph::new(n + 2);
        let mut constant = 0i64;
        // net linear coefficient on x_p after folding pair terms
        let mut lin0: Vec<i64> = self.unary.iter().map(|u| u.0).collect();
        let mut lin1: Vec<i64> = self.unary.iter().map(|u| u.1).collect();
        for &(p, q, a, b, c, d) in &self.pairs {
            let coupling = b + c - a - d;
            assert!(coupling >= 0, "non-submodular pair ({p}, {q})");
            // E = A + (C - A) x_p + (D - C) x_q + (B + C - A - D)(1 - x_p) x_q
            constant += a;
            lin1[p] += c - a;
            lin1[q] += d - c;
            g.add_edge(p, q, coupling);
        }
        for p in 0..n {
            let (c0, c1) = (lin0[p], lin1[p]);
            let m = c0.min(c1);
            constant += m;
            lin0[p] -= m;
            lin1[p] -= m;
            // x = 1 cuts s->p, x = 0 cuts p->t
            g.add_edge(s, p, lin1[p]);
            g.add_edge(p, t, lin0[p]);
        }
        let flow = g.max_flow(s, t);
        let side = g.source_side(s);
        let x: Vec<bool> = side[..n].iter().map(|&src| !src).collect();
        (constant + flow, x)
    }
}

/// Multi-label MRF with integer data costs and a Potts smoothness term.
#[derive(Clone, Debug)]
pub struct PottsMrf {
    pub labels: usize,
    /// Row-major `nodes x labels` data costs.
    pub data: Vec<i64>,
    pub edges: Vec<(usize, usize)>,
    pub lambda: i64,
}

impl PottsMrf {
    pub fn nodes(&self) -> usize {
        self.data.len() / self.labels.max(1)
    }

    #[inline]
    pub fn cost(&self, node: usize, label: usize) -> i64 {
        self.data[node * self.labels + label]
    }

    pub fn energy(&self, f: &[usize]) -> i64 {
        let d: i64 = f.iter().enumerate().map(|(p, &l)| self.cost(p, l)).sum();
        let s = self.edges.iter().filter(|&&(p, q)| f[p] != f[q]).count() as i64;
        d + s * self.lambda
    }

    /// Per-node argmin of the data term, ties to the lower label.
    pub fn data_argmin(&self) -> Vec<usize> {
        (0..self.nodes()).map(|p| (0..self.labels).min_by_key(|&l| (self.cost(p, l), l)).unwrap_or(0)).collect()
    }

    /// Best alpha-expansion move from `f`.
    pub fn expansion(&self, f: &[usize], alpha: usize) -> (i64, Vec<usize>) {
        let mut be = BinaryEnergy::new(f.len());
        for (p, &fp) in f.iter().enumerate() {
            be.unary[p] = (self.cost(p, fp), self.cost(p, alpha));
        }
        let v = |a: usize, b: usize| if a == b { 0 } else { self.lambda };
        for &(p, q) in &self.edges {
            let (fp, fq) = (f[p], f[q]);
            be.pairs.push((p, q, v(fp, fq), v(fp, alpha), v(alpha, fq), 0));
        }
        let (e, x) = be.minimize();
        let g = f.iter().zip(&x).map(|(&fp, &switch)| if switch { alpha } else { fp }).collect();
        (e, g)
    }

    /// Alpha-expansion from `init`, sweeping labels in id order for `passes`
    /// passes. Returns the labeling and the energy before the first pass and
    /// after each pass.
    pub fn alpha_expansion(&self, init: Vec<usize>, passes: usize) -> (Vec<usize>, Vec<i64>) {
        let mut f = init;
        let mut energy = self.energy(&f);
        let mut trace = vec![energy];
        for _ in 0..passes {
            for alpha in 0..self.labels {
                let (e, g) = self.expansion(&f, alpha);
                if e < energy {
                    f = g;
                    energy = e;
                }
            }
            trace.push(energy);
        }
        (f, trace)
    }
}
