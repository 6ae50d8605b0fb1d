//! KKT linear algebra.
//!
//! Unknowns (variables and equality multipliers) are permuted by their
//! ordering keys so that the time-coupled kinematics give a banded matrix.
//! The banded path is an LU with partial pivoting in LAPACK `gbtrf` layout;
//! the dense path uses nalgebra and exists for differential testing.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Factorization {
    #[default]
    Banded,
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingularMatrix;

/// General band matrix with `kl` sub- and `ku` super-diagonals, stored with
/// `kl` extra rows for pivoting fill.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ldab, ab: vec![0.0; ldab * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    /// Adds `v` to entry (i, j); the entry must lie inside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i <= j + self.kl && j <= i + self.ku, "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i > j + self.kl || j > i + self.ku {
            0.0
        } else {
            self.ab[self.idx(i, j)]
        }
    }

    /// In-place LU with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    pub fn factor(mut self) -> Result<BandLu, SingularMatrix> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = self.ab[self.idx(j, j)].abs();
            for r in 1..=km {
                let v = self.ab[self.idx(j + r, j)].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            piv[j] = j + jp;
            if !(best > 0.0) || !best.is_finite() {
                return Err(SingularMatrix);
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let inv = 1.0 / self.ab[self.idx(j, j)];
                for r in 1..=km {
                    let k = self.idx(j + r, j);
                    self.ab[k] *= inv;
                }
                for c in (j + 1)..=ju {
                    let ujc = self.ab[self.idx(j, c)];
                    if ujc == 0.0 {
                        continue;
                    }
                    for r in 1..=km {
                        let l = self.ab[self.idx(j + r, j)];
                        let k = self.idx(j + r, c);
                        self.ab[k] -= l * ujc;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = m.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for r in 1..=km {
                    b[j + r] -= m.ab[m.idx(j + r, j)] * bj;
                }
            }
        }
        let bw = m.kl + m.ku;
        for j in (0..n).rev() {
            b[j] /= m.ab[m.idx(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(bw)..j {
                b[i] -= m.ab[m.idx(i, j)] * bj;
            }
        }
    }
}

/// Fixed sparsity description of a KKT system: permutation and bandwidth.
#[derive(Clone, Debug)]
pub struct KktPattern {
    num_vars: usize,
    dim: usize,
    /// Position of unknown `u` (variables first, then equality rows).
    pos: Vec<usize>,
    bandwidth: usize,
}

impl KktPattern {
    /// `groups` lists variable sets that share dense Hessian blocks;
    /// `eq_rows` gives each equality's variables and ordering key.
    pub fn new(var_order: &[usize], eq_rows: &[(Vec<usize>, usize)], groups: impl Iterator<Item = Vec<usize>>) -> Self {
        let num_vars = var_order.len();
        let dim = num_vars + eq_rows.len();
        // Equality rows sort before variables that share their key.
        let mut keys: Vec<(usize, usize, usize)> = (0..num_vars)
            .map(|i| (var_order[i], 1, i))
            .chain(eq_rows.iter().enumerate().map(|(r, (_, k))| (*k, 0, num_vars + r)))
            .collect();
        keys.sort_unstable();
        let mut pos = vec![0; dim];
        for (p, &(_, _, u)) in keys.iter().enumerate() {
            pos[u] = p;
        }
        let mut bw = 0usize;
        for g in groups {
            if let (Some(lo), Some(hi)) = (g.iter().map(|&i| pos[i]).min(), g.iter().map(|&i| pos[i]).max()) {
                bw = bw.max(hi - lo);
            }
        }
        for (r, (vars, _)) in eq_rows.iter().enumerate() {
            let pr = pos[num_vars + r];
            for &v in vars {
                bw = bw.max(pr.abs_diff(pos[v]));
            }
        }
        Self { num_vars, dim, pos, bandwidth: bw }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }
}

/// Accumulates KKT entries for one Newton step and solves with static
/// regularisation plus iterative refinement on the unregularised matrix.
pub struct KktSystem<'a> {
    pattern: &'a KktPattern,
    entries: Vec<(usize, usize, f64)>,
}

impl<'a> KktSystem<'a> {
    pub fn new(pattern: &'a KktPattern) -> Self {
        Self { pattern, entries: Vec::new() }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Adds to entry (i, j) in unpermuted unknown indices.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// Solves K·x = rhs with regularisation `reg` (added on the variable
    /// diagonal, subtracted on the multiplier diagonal).
    pub fn solve(&self, rhs: &[f64], reg: f64, kind: Factorization) -> Result<Vec<f64>, SingularMatrix> {
        let p = self.pattern;
        let n = p.dim;
        let solver = self.factor(reg, kind)?;
        let permute = |v: &[f64]| {
            let mut out = vec![0.0; n];
            for u in 0..n {
                out[p.pos[u]] = v[u];
            }
            out
        };
        let unpermute = |v: &[f64]| (0..n).map(|u| v[p.pos[u]]).collect::<Vec<f64>>();
        let mut x = {
            let mut b = permute(rhs);
            solver.solve(&mut b);
            unpermute(&b)
        };
        for _ in 0..3 {
            let kx = self.matvec(&x);
            let r: Vec<f64> = rhs.iter().zip(&kx).map(|(b, k)| b - k).collect();
            let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let bn = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rn <= 1e-14 * bn.max(1e-300) {
                break;
            }
            let mut d = permute(&r);
            solver.solve(&mut d);
            for (xi, di) in x.iter_mut().zip(unpermute(&d)) {
                *xi += di;
            }
        }
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(SingularMatrix)
        }
    }

    fn factor(&self, reg: f64, kind: Factorization) -> Result<Factored, SingularMatrix> {
        let p = self.pattern;
        let n = p.dim;
        let diag_sign = |u: usize| if u < p.num_vars { 1.0 } else { -1.0 };
        match kind {
            Factorization::Banded => {
                let bw = p.bandwidth;
                let mut m = BandMatrix::zeros(n, bw, bw);
                for &(i, j, v) in &self.entries {
                    m.add(p.pos[i], p.pos[j], v);
                }
                for u in 0..n {
                    m.add(p.pos[u], p.pos[u], diag_sign(u) * reg);
                }
                Ok(Factored::Band(m.factor()?))
            }
            Factorization::Dense => {
                let mut m = DMatrix::<f64>::zeros(n, n);
                for &(i, j, v) in &self.entries {
                    m[(p.pos[i], p.pos[j])] += v;
                }
                for u in 0..n {
                    m[(p.pos[u], p.pos[u])] += diag_sign(u) * reg;
                }
                let lu = m.lu();
                if !lu.is_invertible() {
                    return Err(SingularMatrix);
                }
                Ok(Factored::Dense(lu))
            }
        }
    }
}

enum Factored {
    Band(BandLu),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factored {
    fn solve(&self, b: &mut [f64]) {
        match self {
            Factored::Band(lu) => lu.solve(b),
            Factored::Dense(lu) => {
                let rhs = DVector::from_column_slice(b);
                match lu.solve(&rhs) {
                    Some(x) => b.copy_from_slice(x.as_slice()),
                    None => b.iter_mut().for_each(|v| *v = f64::NAN),
                }
            }
        }
    }
}
