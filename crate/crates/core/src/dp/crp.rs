use rand::Rng;

use crate::error::{Error, Result};

/// One sequential seating of `n` customers.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpDraw {
    /// Table of each customer; tables are numbered in order of opening.
    pub assignments: Vec<usize>,
    /// Dish served at each table, drawn from the base distribution.
    pub values: Vec<f64>,
}

impl CrpDraw {
    pub fn n_clusters(&self) -> usize {
        self.values.len()
    }

    pub fn table_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.values.len()];
        for &c in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }

    /// Value attached to each customer.
    pub fn customer_values(&self) -> Vec<f64> {
        self.assignments.iter().map(|&c| self.values[c]).collect()
    }
}

/// Seats `n` customers: customer `i` (0-based) joins table `c` with
/// probability `n_c / (i + alpha)` or opens a new one with probability
/// `alpha / (i + alpha)`.
pub fn crp_draw<R, F>(n: usize, alpha: f64, mut base: F, rng: &mut R) -> Result<CrpDraw>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    if n == 0 {
        return Err(Error::domain("a CRP draw needs at least one customer"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    let mut assignments = Vec::with_capacity(n);
    let mut sizes: Vec<usize> = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        let u = rng.random::<f64>() * (i as f64 + alpha);
        let mut acc = 0.0;
        let mut chosen = None;
        for (c, &size) in sizes.iter().enumerate() {
            acc += size as f64;
            if u < acc {
                chosen = Some(c);
                break;
            }
        }
        let table = match chosen {
            Some(c) => c,
            None => {
                sizes.push(0);
                values.push(base(rng));
                sizes.len() - 1
            }
        };
        sizes[table] += 1;
        assignments.push(table);
    }
    Ok(CrpDraw {
        assignments,
        values,
    })
}

/// `E[K] = sum_{i=1..n} alpha / (alpha + i - 1)`.
pub fn expected_clusters(n: usize, alpha: f64) -> f64 {
    (0..n).map(|i| alpha / (alpha + i as f64)).sum()
}
