//! Exact zero-sum matrix games via a rational simplex.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::prob::Rational;

/// Optimal strategies of a matrix game with nonnegative payoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    pub value: Rational,
    /// Maximizing row player's mixed strategy.
    pub row_strategy: Vec<Rational>,
    /// Minimizing column player's mixed strategy.
    pub col_strategy: Vec<Rational>,
}

/// Solve `max_x min_j (xᵀA)_j` for a nonnegative matrix in which every
/// column has a positive entry.
///
/// Runs the simplex method with Bland's rule on
/// `max Σy s.t. Ay ≤ 1, y ≥ 0`, whose origin is feasible; the row strategy is
/// read off the final reduced costs of the slacks.
pub fn solve_game(a: &[Vec<Rational>]) -> Result<GameSolution> {
    let rows = a.len();
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("empty payoff matrix".into()));
    }
    for r in a {
        if r.len() != cols {
            return Err(Error::InvalidParameter("ragged payoff matrix".into()));
        }
        if r.iter().any(|v| v.is_negative()) {
            return Err(Error::InvalidParameter("payoffs must be nonnegative".into()));
        }
    }
    for j in 0..cols {
        if a.iter().all(|r| r[j].is_zero()) {
            return Err(Error::InvalidParameter(format!("column {j} has no positive payoff")));
        }
    }

    let width = cols + rows;
    let hint = float_basis(a);
    if let Some(sol) = hint.as_deref().and_then(|h| certify_basis(a, h)) {
        return Ok(sol);
    }
    let (mut t, mut obj, mut basis) = tableau(a);
    // warm start from the float basis unless it is infeasible in exact arithmetic
    if let Some(hint) = hint {
        let mut warm = (t.clone(), obj.clone(), basis.clone());
        if enter_basis(&mut warm.0, &mut warm.1, &mut warm.2, &hint) {
            (t, obj, basis) = warm;
        }
    }

    loop {
        let Some(enter) = (0..width).find(|&j| obj[j].is_negative()) else { break };
        let mut leave: Option<usize> = None;
        let mut best: Option<Rational> = None;
        for i in 0..rows {
            if t[i][enter].is_positive() {
                let ratio = &t[i][width] / &t[i][enter];
                let better = match &best {
                    None => true,
                    Some(b) => ratio < *b || (ratio == *b && basis[i] < basis[leave.unwrap()]),
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        let leave = leave.ok_or_else(|| Error::InvariantViolation("unbounded game LP".into()))?;
        pivot(&mut t, &mut obj, leave, enter);
        basis[leave] = enter;
    }

    let total = obj[width].clone();
    if !total.is_positive() {
        return Err(Error::InvariantViolation("game LP optimum is not positive".into()));
    }
    let value = total.recip();
    let mut y = vec![Rational::zero(); cols];
    for (i, &b) in basis.iter().enumerate() {
        if b < cols {
            y[b] = t[i][width].clone();
        }
    }
    let col_strategy: Vec<Rational> = y.iter().map(|v| v * &value).collect();
    let row_strategy: Vec<Rational> = (0..rows).map(|i| &obj[cols + i] * &value).collect();
    Ok(GameSolution { value, row_strategy, col_strategy })
}

/// Exact solution at a given basis, if that basis is primal and dual
/// feasible. With `J` the basic `y` columns and `I` the rows whose slack is
/// nonbasic, the tight system is `A[I,J] y = 1` and its dual `uᵀA[I,J] = 1`.
fn certify_basis(a: &[Vec<Rational>], basis: &[usize]) -> Option<GameSolution> {
    let rows = a.len();
    let cols = a[0].len();
    let mut jset: Vec<usize> = basis.iter().copied().filter(|&b| b < cols).collect();
    jset.sort_unstable();
    let iset: Vec<usize> = (0..rows).filter(|i| !basis.contains(&(cols + i))).collect();
    if jset.is_empty() || iset.len() != jset.len() {
        return None;
    }
    let m: Vec<Vec<Rational>> = iset.iter().map(|&i| jset.iter().map(|&j| a[i][j].clone()).collect()).collect();
    let mt: Vec<Vec<Rational>> = (0..jset.len()).map(|c| m.iter().map(|r| r[c].clone()).collect()).collect();
    let yj = solve_square(m)?;
    let ui = solve_square(mt)?;
    if yj.iter().chain(&ui).any(|v| v.is_negative()) {
        return None;
    }
    let mut y = vec![Rational::zero(); cols];
    for (k, &j) in jset.iter().enumerate() {
        y[j] = yj[k].clone();
    }
    let mut u = vec![Rational::zero(); rows];
    for (k, &i) in iset.iter().enumerate() {
        u[i] = ui[k].clone();
    }
    let one = Rational::one();
    if col_guarantee(a, &y) > one || row_guarantee(a, &u) < one {
        return None;
    }
    let total: Rational = y.iter().sum();
    if total != u.iter().sum::<Rational>() || !total.is_positive() {
        return None;
    }
    let value = total.recip();
    Some(GameSolution {
        col_strategy: y.iter().map(|v| v * &value).collect(),
        row_strategy: u.iter().map(|v| v * &value).collect(),
        value,
    })
}

/// Solve `m z = 1` by fraction-free (Bareiss) elimination; `None` if singular.
fn solve_square(m: Vec<Vec<Rational>>) -> Option<Vec<Rational>> {
    let k = m.len();
    // clear denominators row by row
    let mut g: Vec<Vec<BigInt>> = m
        .into_iter()
        .map(|row| {
            let l = row.iter().fold(BigInt::one(), |l, v| l.lcm(v.denom()));
            let mut out: Vec<BigInt> = row.iter().map(|v| v.numer() * (&l / v.denom())).collect();
            out.push(l);
            out
        })
        .collect();
    let mut prev = BigInt::one();
    for c in 0..k {
        let p = (c..k).find(|&r| !g[r][c].is_zero())?;
        g.swap(c, p);
        let (top, rest) = g.split_at_mut(c + 1);
        let pr = &top[c];
        for row in rest.iter_mut() {
            for j in c + 1..=k {
                row[j] = (&row[j] * &pr[c] - &row[c] * &pr[j]) / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = pr[c].clone();
    }
    let mut z = vec![Rational::zero(); k];
    for i in (0..k).rev() {
        let mut acc = Rational::from_integer(g[i][k].clone());
        for j in i + 1..k {
            if !g[i][j].is_zero() {
                acc -= &z[j] * &g[i][j];
            }
        }
        z[i] = acc / &g[i][i];
    }
    Some(z)
}

type Tableau = (Vec<Vec<Rational>>, Vec<Rational>, Vec<usize>);

/// `rows × (cols + rows slacks + rhs)`; variables `0..cols` are `y`.
fn tableau(a: &[Vec<Rational>]) -> Tableau {
    let rows = a.len();
    let cols = a[0].len();
    let width = cols + rows;
    let mut t: Vec<Vec<Rational>> = Vec::with_capacity(rows);
    for (i, r) in a.iter().enumerate() {
        let mut row = Vec::with_capacity(width + 1);
        row.extend(r.iter().cloned());
        for k in 0..rows {
            row.push(if k == i { Rational::one() } else { Rational::zero() });
        }
        row.push(Rational::one());
        t.push(row);
    }
    // reduced costs of a max problem; entering when negative
    let obj: Vec<Rational> = (0..=width).map(|j| if j < cols { -Rational::one() } else { Rational::zero() }).collect();
    let basis: Vec<usize> = (cols..cols + rows).collect();
    (t, obj, basis)
}

/// Pivot the columns of `hint` into the basis. False if they are singular
/// or the resulting basis is infeasible.
fn enter_basis(t: &mut [Vec<Rational>], obj: &mut [Rational], basis: &mut [usize], hint: &[usize]) -> bool {
    let width = t[0].len() - 1;
    for &c in hint {
        if basis.contains(&c) {
            continue;
        }
        let Some(r) = (0..t.len()).find(|&r| !hint.contains(&basis[r]) && !t[r][c].is_zero()) else {
            return false;
        };
        pivot(t, obj, r, c);
        basis[r] = c;
    }
    t.iter().all(|row| !row[width].is_negative())
}

/// Optimal basis of the same LP in floating point, if the float run settles.
fn float_basis(a: &[Vec<Rational>]) -> Option<Vec<usize>> {
    let af: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(crate::prob::rational_to_f64).collect()).collect();
    float_simplex(&af).map(|s| s.basis)
}

struct FloatRun {
    t: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
}

fn float_simplex(a: &[Vec<f64>]) -> Option<FloatRun> {
    const TOL: f64 = 1e-11;
    let rows = a.len();
    let cols = a[0].len();
    let width = cols + rows;
    let mut t: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..rows).map(|k| if k == i { 1.0 } else { 0.0 }));
            // distinct tiny offsets keep the float run off degenerate vertices
            row.push(1.0 + 1e-10 * (i as f64 * 0.618_033_988_749_895).fract());
            row
        })
        .collect();
    let mut obj: Vec<f64> = (0..=width).map(|j| if j < cols { -1.0 } else { 0.0 }).collect();
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    let cap = 50 * (rows + cols);
    for iter in 0.. {
        if iter >= cap {
            return None;
        }
        // Dantzig's rule, with Bland's rule in the second half against cycling
        let enter = if iter < cap / 2 {
            (0..width).filter(|&j| obj[j] < -TOL).min_by(|&x, &y| obj[x].total_cmp(&obj[y]))
        } else {
            (0..width).find(|&j| obj[j] < -TOL)
        };
        let Some(enter) = enter else { break };
        let leave = (0..rows)
            .filter(|&i| t[i][enter] > TOL)
            .min_by(|&x, &y| (t[x][width] / t[x][enter]).total_cmp(&(t[y][width] / t[y][enter])).then(basis[x].cmp(&basis[y])))?;
        let p = t[leave][enter];
        for v in t[leave].iter_mut() {
            *v /= p;
        }
        let pr = t[leave].clone();
        for (i, row) in t.iter_mut().enumerate() {
            let f = row[enter];
            if i != leave && f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pr) {
                    *v -= f * pv;
                }
            }
        }
        let f = obj[enter];
        for (v, pv) in obj.iter_mut().zip(&pr) {
            *v -= f * pv;
        }
        basis[leave] = enter;
    }
    Some(FloatRun { t, obj, basis })
}

/// Floating-point game solution: `(value, row strategy, column strategy)`.
/// Same preconditions as [`solve_game`]; `None` if the float run stalls.
pub fn solve_game_f64(a: &[Vec<f64>]) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let rows = a.len();
    let cols = a[0].len();
    let width = cols + rows;
    let run = float_simplex(a)?;
    let total = run.obj[width];
    if total <= 0.0 {
        return None;
    }
    let value = 1.0 / total;
    let mut y = vec![0.0; cols];
    for (i, &b) in run.basis.iter().enumerate() {
        if b < cols {
            y[b] = run.t[i][width].max(0.0) * value;
        }
    }
    let x: Vec<f64> = (0..rows).map(|i| run.obj[cols + i].max(0.0) * value).collect();
    Some((value, x, y))
}

fn pivot(t: &mut [Vec<Rational>], obj: &mut [Rational], r: usize, c: usize) {
    let p = t[r][c].clone();
    for v in t[r].iter_mut() {
        *v /= &p;
    }
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r || row[c].is_zero() {
            continue;
        }
        let f = row[c].clone();
        for (v, pv) in row.iter_mut().zip(&pivot_row) {
            if !pv.is_zero() {
                *v -= &f * pv;
            }
        }
    }
    if !obj[c].is_zero() {
        let f = obj[c].clone();
        for (v, pv) in obj.iter_mut().zip(&pivot_row) {
            if !pv.is_zero() {
                *v -= &f * pv;
            }
        }
    }
}

/// `min_j (xᵀA)_j`, the payoff `x` guarantees.
pub fn row_guarantee(a: &[Vec<Rational>], x: &[Rational]) -> Rational {
    let cols = a[0].len();
    (0..cols)
        .map(|j| a.iter().zip(x).fold(Rational::zero(), |s, (r, xi)| s + &r[j] * xi))
        .min()
        .expect("nonempty matrix")
}

/// `max_i (Ay)_i`, the payoff `y` concedes at most.
pub fn col_guarantee(a: &[Vec<Rational>], y: &[Rational]) -> Rational {
    a.iter()
        .map(|r| r.iter().zip(y).fold(Rational::zero(), |s, (v, yj)| s + v * yj))
        .max()
        .expect("nonempty matrix")
}
