//! Smooth convex building blocks with hand-derived gradients and Hessians.
//!
//! Every term touches a handful of variables; derivatives are returned in
//! the local ordering given by [`Term::vars`].

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    /// Σ cₖ·xₖ
    Linear { vars: Vec<usize>, coefs: Vec<f64> },
    /// w·‖x − c‖²
    SquaredNorm { vars: Vec<usize>, center: Vec<f64>, weight: f64 },
    /// w·‖x‖³
    NormCubed { vars: Vec<usize>, weight: f64 },
    /// w·(1 + ‖a‖²/g²)/τ, the induced-power term with a speed slack.
    InducedPower { accel: [usize; 2], speed: usize, weight: f64, gravity: f64 },
    /// w/x on x > 0.
    Reciprocal { var: usize, weight: f64 },
}

impl Term {
    pub fn linear(vars: Vec<usize>, coefs: Vec<f64>) -> Self {
        debug_assert_eq!(vars.len(), coefs.len());
        Term::Linear { vars, coefs }
    }

    pub fn vars(&self) -> Vec<usize> {
        match self {
            Term::Linear { vars, .. } | Term::SquaredNorm { vars, .. } | Term::NormCubed { vars, .. } => vars.clone(),
            Term::InducedPower { accel, speed, .. } => vec![accel[0], accel[1], *speed],
            Term::Reciprocal { var, .. } => vec![*var],
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Term::Linear { .. })
    }

    /// The same term multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut t = self.clone();
        match &mut t {
            Term::Linear { coefs, .. } => coefs.iter_mut().for_each(|k| *k *= c),
            Term::SquaredNorm { weight, .. }
            | Term::NormCubed { weight, .. }
            | Term::InducedPower { weight, .. }
            | Term::Reciprocal { weight, .. } => *weight *= c,
        }
        t
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Term::Linear { vars, coefs } => vars.iter().zip(coefs).map(|(&i, c)| c * x[i]).sum(),
            Term::SquaredNorm { vars, center, weight } => {
                weight * vars.iter().zip(center).map(|(&i, c)| (x[i] - c).powi(2)).sum::<f64>()
            }
            Term::NormCubed { vars, weight } => weight * norm(vars, x).powi(3),
            Term::InducedPower { accel, speed, weight, gravity } => {
                let a2 = x[accel[0]].powi(2) + x[accel[1]].powi(2);
                weight * (1.0 + a2 / (gravity * gravity)) / x[*speed]
            }
            Term::Reciprocal { var, weight } => weight / x[*var],
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Term::Linear { coefs, .. } => coefs.clone(),
            Term::SquaredNorm { vars, center, weight } => {
                vars.iter().zip(center).map(|(&i, c)| 2.0 * weight * (x[i] - c)).collect()
            }
            Term::NormCubed { vars, weight } => {
                let r = norm(vars, x);
                vars.iter().map(|&i| 3.0 * weight * r * x[i]).collect()
            }
            Term::InducedPower { accel, speed, weight, gravity } => {
                let g2 = gravity * gravity;
                let (ax, ay, tau) = (x[accel[0]], x[accel[1]], x[*speed]);
                let inner = 1.0 + (ax * ax + ay * ay) / g2;
                vec![2.0 * weight * ax / (g2 * tau), 2.0 * weight * ay / (g2 * tau), -weight * inner / (tau * tau)]
            }
            Term::Reciprocal { var, weight } => vec![-weight / x[*var].powi(2)],
        }
    }

    /// Local Hessian, row-major, `k×k` with `k = self.vars().len()`.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Term::Linear { vars, .. } => vec![0.0; vars.len() * vars.len()],
            Term::SquaredNorm { vars, weight, .. } => {
                let k = vars.len();
                let mut h = vec![0.0; k * k];
                for d in 0..k {
                    h[d * k + d] = 2.0 * weight;
                }
                h
            }
            Term::NormCubed { vars, weight } => {
                // 3w (‖x‖ I + x xᵀ/‖x‖)
                let k = vars.len();
                let r = norm(vars, x);
                let mut h = vec![0.0; k * k];
                if r == 0.0 {
                    return h;
                }
                for a in 0..k {
                    for b in 0..k {
                        let outer = x[vars[a]] * x[vars[b]] / r;
                        h[a * k + b] = 3.0 * weight * (outer + if a == b { r } else { 0.0 });
                    }
                }
                h
            }
            Term::InducedPower { accel, speed, weight, gravity } => {
                let g2 = gravity * gravity;
                let (ax, ay, tau) = (x[accel[0]], x[accel[1]], x[*speed]);
                let inner = 1.0 + (ax * ax + ay * ay) / g2;
                let w = *weight;
                let aa = 2.0 * w / (g2 * tau);
                let at_x = -2.0 * w * ax / (g2 * tau * tau);
                let at_y = -2.0 * w * ay / (g2 * tau * tau);
                let tt = 2.0 * w * inner / tau.powi(3);
                vec![aa, 0.0, at_x, 0.0, aa, at_y, at_x, at_y, tt]
            }
            Term::Reciprocal { var, weight } => vec![2.0 * weight / x[*var].powi(3)],
        }
    }
}

fn norm(vars: &[usize], x: &[f64]) -> f64 {
    vars.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt()
}

/// Sum of terms plus a constant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SmoothFn {
    pub terms: Vec<Term>,
    pub constant: f64,
}

impl SmoothFn {
    pub fn new(terms: Vec<Term>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn push(&mut self, term: Term) -> &mut Self {
        self.terms.push(term);
        self
    }

    /// `c·self`; convexity is preserved only for `c ≥ 0` unless the function is affine.
    pub fn scaled(&self, c: f64) -> Self {
        Self { terms: self.terms.iter().map(|t| t.scaled(c)).collect(), constant: c * self.constant }
    }

    /// `self + other`.
    pub fn plus(&self, other: &SmoothFn) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms, constant: self.constant + other.constant }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|t| t.value(x)).sum::<f64>()
    }

    /// Gradient as sorted, merged (index, value) pairs.
    pub fn sparse_gradient(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for t in &self.terms {
            for (i, g) in t.vars().into_iter().zip(t.gradient(x)) {
                out.push((i, g));
            }
        }
        merge_sorted(out)
    }

    /// Calls `sink(i, j, weight·∂²f/∂xᵢ∂xⱼ)` for every local Hessian entry.
    pub fn hessian_entries(&self, x: &[f64], weight: f64, mut sink: impl FnMut(usize, usize, f64)) {
        for t in self.terms.iter().filter(|t| !t.is_linear()) {
            let vars = t.vars();
            let k = vars.len();
            let h = t.hessian(x);
            for a in 0..k {
                for b in 0..k {
                    let v = h[a * k + b];
                    if v != 0.0 {
                        sink(vars[a], vars[b], weight * v);
                    }
                }
            }
        }
    }

    pub fn is_affine(&self) -> bool {
        self.terms.iter().all(Term::is_linear)
    }

    /// Every variable index the function touches.
    pub fn support(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.terms.iter().flat_map(|t| t.vars()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub(crate) fn merge_sorted(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_unstable_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (i, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => out.push((i, v)),
        }
    }
    out
}
