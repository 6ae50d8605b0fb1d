use std::io::{self, Write};

use super::terms::{SmoothFn, Term};

/// `Σ coeffs·x = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearEquality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    /// Ordering key used when interleaving rows with variables in the KKT
    /// matrix; rows and variables with nearby keys end up close together.
    pub order: usize,
}

/// `func(x) ≤ 0`, multiplied by `scale` inside the solver.
#[derive(Clone, Debug, PartialEq)]
pub struct Inequality {
    pub func: SmoothFn,
    pub scale: f64,
    pub label: &'static str,
}

/// Minimise a smooth convex objective subject to linear equalities and
/// smooth convex inequalities.
///
/// The solver works on `x / var_scale`; `objective_scale` and each
/// inequality's `scale` only change the units the residuals are measured in.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexProgram {
    pub num_vars: usize,
    pub var_scale: Vec<f64>,
    pub var_order: Vec<usize>,
    pub var_names: Vec<String>,
    pub objective: SmoothFn,
    pub objective_scale: f64,
    pub equalities: Vec<LinearEquality>,
    pub inequalities: Vec<Inequality>,
    /// Default starting point; must strictly satisfy every inequality.
    pub initial: Option<Vec<f64>>,
}

impl ConvexProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            var_scale: vec![1.0; num_vars],
            var_order: vec![0; num_vars],
            var_names: (0..num_vars).map(|i| format!("x{i}")).collect(),
            objective: SmoothFn::default(),
            objective_scale: 1.0,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            initial: None,
        }
    }

    pub fn add_equality(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, order: usize) {
        self.equalities.push(LinearEquality { coeffs, rhs, order });
    }

    pub fn add_inequality(&mut self, func: SmoothFn, scale: f64, label: &'static str) {
        self.inequalities.push(Inequality { func, scale, label });
    }

    /// Smallest inequality slack `-func(x)` (scaled), or `None` without inequalities.
    pub fn min_slack(&self, x: &[f64]) -> Option<f64> {
        self.inequalities.iter().map(|c| -c.scale * c.func.value(x)).reduce(f64::min)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.value(x)
    }

    /// Human-readable listing of layout, objective and constraints.
    pub fn dump(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# variables: {}", self.num_vars)?;
        for i in 0..self.num_vars {
            writeln!(w, "var {i} {} scale={:e} order={}", self.var_names[i], self.var_scale[i], self.var_order[i])?;
        }
        writeln!(w, "# objective (scale {:e})", self.objective_scale)?;
        self.dump_fn(&mut w, &self.objective)?;
        writeln!(w, "# equalities: {}", self.equalities.len())?;
        for (k, e) in self.equalities.iter().enumerate() {
            let lhs: Vec<String> = e.coeffs.iter().map(|(i, c)| format!("{c:+e}*{}", self.var_names[*i])).collect();
            writeln!(w, "eq {k}: {} = {:e}", lhs.join(" "), e.rhs)?;
        }
        writeln!(w, "# inequalities: {}", self.inequalities.len())?;
        for (k, c) in self.inequalities.iter().enumerate() {
            writeln!(w, "ineq {k} [{}] scale={:e}: <= 0", c.label, c.scale)?;
            self.dump_fn(&mut w, &c.func)?;
        }
        Ok(())
    }

    fn dump_fn(&self, w: &mut impl Write, f: &SmoothFn) -> io::Result<()> {
        writeln!(w, "  const {:e}", f.constant)?;
        for t in &f.terms {
            let names: Vec<&str> = t.vars().iter().map(|&i| self.var_names[i].as_str()).collect();
            let desc = match t {
                Term::Linear { coefs, .. } => format!("linear {coefs:?}"),
                Term::SquaredNorm { center, weight, .. } => format!("sqnorm w={weight:e} c={center:?}"),
                Term::NormCubed { weight, .. } => format!("normcubed w={weight:e}"),
                Term::InducedPower { weight, gravity, .. } => format!("induced w={weight:e} g={gravity}"),
                Term::Reciprocal { weight, .. } => format!("reciprocal w={weight:e}"),
            };
            writeln!(w, "  {desc} on [{}]", names.join(", "))?;
        }
        Ok(())
    }
}
