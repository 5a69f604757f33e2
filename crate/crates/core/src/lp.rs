//! Small dense linear programs solved by the two-phase simplex method.
//!
//! Bland's rule is used for both entering and leaving variables, so the
//! method cannot cycle.

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

/// `maximize c'x` subject to `A_ub x <= b_ub`, `A_eq x = b_eq`, `x >= 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[col];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                    row[col] = 0.0;
                }
            }
        }
        self.basis[r] = col;
    }

    /// Maximises `cost'x` over the columns marked in `allowed`.
    fn optimise(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..self.width).find(|&j| {
                allowed[j] && !self.basis.contains(&j) && {
                    let z: f64 = self.basis.iter().zip(&self.rows).map(|(&b, row)| cost[b] * row[j]).sum();
                    cost[j] - z > EPS
                }
            });
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((r, best)) => {
                            ratio < best - EPS || (ratio <= best + EPS && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Lp("objective is unbounded".into()));
            };
            self.pivot(r, col);
        }
        Err(Error::Lp(format!("no optimum after {MAX_PIVOTS} pivots")))
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.c.len();
    let m_ub = lp.a_ub.len();
    let m_eq = lp.a_eq.len();
    if lp.b_ub.len() != m_ub || lp.b_eq.len() != m_eq {
        return Err(Error::invalid("constraint and bound counts differ"));
    }
    if lp.a_ub.iter().chain(&lp.a_eq).any(|r| r.len() != n) {
        return Err(Error::invalid("constraint row width differs from objective length"));
    }
    let needs_art: Vec<bool> = lp.b_ub.iter().map(|&b| b < 0.0).chain((0..m_eq).map(|_| true)).collect();
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let width = n + m_ub + n_art;
    let m = m_ub + m_eq;
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_art = n + m_ub;
    for i in 0..m {
        let mut row = vec![0.0; width + 1];
        let (coeffs, b) = if i < m_ub {
            row[n + i] = 1.0;
            (&lp.a_ub[i], lp.b_ub[i])
        } else {
            (&lp.a_eq[i - m_ub], lp.b_eq[i - m_ub])
        };
        row[..n].copy_from_slice(coeffs);
        row[width] = b;
        if b < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        if needs_art[i] {
            row[next_art] = 1.0;
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(n + i);
        }
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis, width };
    let is_art = |j: usize| j >= n + m_ub;

    if n_art > 0 {
        let cost: Vec<f64> = (0..width).map(|j| if is_art(j) { -1.0 } else { 0.0 }).collect();
        tab.optimise(&cost, &vec![true; width])?;
        let infeas: f64 = (0..m).filter(|&i| is_art(tab.basis[i])).map(|i| tab.rhs(i)).sum();
        if infeas > 1e-9 {
            return Err(Error::Lp(format!("infeasible (residual {infeas:e})")));
        }
        for i in 0..m {
            if is_art(tab.basis[i]) {
                if let Some(j) = (0..n + m_ub).find(|&j| tab.rows[i][j].abs() > EPS) {
                    tab.pivot(i, j);
                }
            }
        }
    }
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.c);
    let allowed: Vec<bool> = (0..width).map(|j| !is_art(j)).collect();
    tab.optimise(&cost, &allowed)?;
    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(i);
        }
    }
    let objective = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let lp = LinearProgram {
            c: vec![3.0, 5.0],
            a_ub: vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            b_ub: vec![4.0, 12.0, 18.0],
            ..Default::default()
        };
        let s = solve(&lp).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_negative_bounds() {
        // max -x - 2y, x + y = 1, x >= 0.25 -> (1, 0), -1
        let lp = LinearProgram {
            c: vec![-1.0, -2.0],
            a_ub: vec![vec![-1.0, 0.0]],
            b_ub: vec![-0.25],
            a_eq: vec![vec![1.0, 1.0]],
            b_eq: vec![1.0],
        };
        let s = solve(&lp).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-9);
        assert!((s.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let infeasible = LinearProgram {
            c: vec![1.0],
            a_ub: vec![vec![1.0]],
            b_ub: vec![1.0],
            a_eq: vec![vec![1.0]],
            b_eq: vec![2.0],
        };
        assert!(matches!(solve(&infeasible), Err(Error::Lp(_))));
        let unbounded = LinearProgram {
            c: vec![1.0],
            ..Default::default()
        };
        assert!(matches!(solve(&unbounded), Err(Error::Lp(_))));
    }
}
