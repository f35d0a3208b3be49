//! Sparse linear combinations of degrees of freedom.

/// `Σ c_i · dof_i`, sorted by dof index, without zero terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lin(pub Vec<(u32, f64)>);

impl Lin {
    pub fn zero() -> Self {
        Lin(Vec::new())
    }

    pub fn dof(i: usize) -> Self {
        Lin(vec![(i as u32, 1.0)])
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, (_, c)| m.max(c.abs()))
    }

    pub fn scale(&self, f: f64) -> Lin {
        if f == 0.0 {
            return Lin::zero();
        }
        Lin(self.0.iter().map(|&(i, c)| (i, c * f)).collect())
    }

    /// `Σ f_k · x_k`.
    pub fn combo(terms: &[(f64, &Lin)]) -> Lin {
        let mut all: Vec<(u32, f64)> = Vec::new();
        for (f, l) in terms {
            if *f == 0.0 {
                continue;
            }
            all.extend(l.0.iter().map(|&(i, c)| (i, c * f)));
        }
        all.sort_unstable_by_key(|x| x.0);
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(all.len());
        for (i, c) in all {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|x| x.1 != 0.0);
        Lin(out)
    }

    pub fn sub(&self, other: &Lin) -> Lin {
        Lin::combo(&[(1.0, self), (-1.0, other)])
    }

    pub fn eval(&self, dofs: &[f64]) -> f64 {
        self.0.iter().map(|&(i, c)| c * dofs[i as usize]).sum()
    }

    /// Applies a dense matrix to a vector of combinations.
    pub fn apply(m: &nalgebra::DMatrix<f64>, x: &[&Lin]) -> Vec<Lin> {
        (0..m.nrows())
            .map(|r| {
                let terms: Vec<(f64, &Lin)> = (0..m.ncols()).map(|c| (m[(r, c)], x[c])).collect();
                Lin::combo(&terms)
            })
            .collect()
    }
}
