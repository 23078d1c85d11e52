//! Dense two-phase primal simplex with Bland's rule.
//!
//! Problems here are small (tens of variables), so a dense tableau is the
//! simplest thing that is exact at vertices. After the pivoting phase the
//! basic solution and the duals are recomputed from an LU factorization of
//! the final basis, which removes most of the accumulated tableau error.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `optimize cᵀx` subject to row constraints and per-variable bounds.
/// Variables default to `[0, +∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub direction: Direction,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Shadow prices: derivative of the optimal objective with respect to
    /// each row's right-hand side.
    pub duals: Vec<f64>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LinearProgram {
    pub fn new(direction: Direction, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { direction, objective, rows: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Direction::Minimize, objective)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Direction::Maximize, objective)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constraint(mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        self.add_constraint(coeffs, sense, rhs);
        self
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) {
        self.rows.push(Row { coeffs, sense, rhs });
    }

    pub fn bound(mut self, var: usize, lower: f64, upper: f64) -> Self {
        self.bounds[var] = (lower, upper);
        self
    }

    pub fn free(self, var: usize) -> Self {
        self.bound(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::dims("LP bounds", n, self.bounds.len()));
        }
        for row in &self.rows {
            if row.coeffs.len() != n {
                return Err(Error::dims("LP constraint row", n, row.coeffs.len()));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("LP constraint".into()));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("LP objective".into()));
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.validate()?;
        let n = self.num_vars();
        if self.bounds.iter().any(|&(l, u)| l > u || l == f64::INFINITY || u == f64::NEG_INFINITY) {
            return Ok(self.infeasible());
        }
        let std = StandardForm::build(self);
        match std.solve()? {
            Outcome::Infeasible => Ok(self.infeasible()),
            Outcome::Unbounded => Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: vec![f64::NAN; n],
                objective: match self.direction {
                    Direction::Minimize => f64::NEG_INFINITY,
                    Direction::Maximize => f64::INFINITY,
                },
                duals: vec![f64::NAN; self.rows.len()],
            }),
            Outcome::Optimal { z, y } => {
                let x = std.recover_x(&z);
                let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                let sign = match self.direction {
                    Direction::Minimize => 1.0,
                    Direction::Maximize => -1.0,
                };
                let duals = (0..self.rows.len())
                    .map(|i| {
                        let r = std.row_of_constraint[i];
                        sign * std.row_sign[r] * y[r]
                    })
                    .collect();
                Ok(LpSolution { status: LpStatus::Optimal, x, objective, duals })
            }
        }
    }

    fn infeasible(&self) -> LpSolution {
        LpSolution {
            status: LpStatus::Infeasible,
            x: vec![f64::NAN; self.num_vars()],
            objective: f64::NAN,
            duals: vec![f64::NAN; self.rows.len()],
        }
    }

    /// Largest violation of any row or bound at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let viol = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (&v, &(l, u)) in x.iter().zip(&self.bounds) {
            worst = worst.max(l - v).max(v - u);
        }
        worst
    }
}

/// How an original variable is written in terms of standard-form columns.
#[derive(Debug, Clone)]
enum VarMap {
    /// x = offset + z
    Shift { col: usize, offset: f64 },
    /// x = offset - z
    Mirror { col: usize, offset: f64 },
    /// x = z⁺ - z⁻
    Split { pos: usize, neg: usize },
}

enum Outcome {
    Optimal { z: Vec<f64>, y: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// `min cᵀz, Az = b, z ≥ 0, b ≥ 0`.
struct StandardForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    maps: Vec<VarMap>,
    /// standard-form row for each original constraint
    row_of_constraint: Vec<usize>,
    /// +1 or -1: whether the row was negated to make b ≥ 0
    row_sign: Vec<f64>,
    /// column usable as an initial basic variable, per row
    initial_basic: Vec<Option<usize>>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut ncols = 0usize;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for &(l, u) in &lp.bounds {
            if l.is_finite() {
                maps.push(VarMap::Shift { col: ncols, offset: l });
                if u.is_finite() {
                    bound_rows.push((ncols, u - l));
                }
                ncols += 1;
            } else if u.is_finite() {
                maps.push(VarMap::Mirror { col: ncols, offset: u });
                ncols += 1;
            } else {
                maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
                ncols += 2;
            }
        }
        let structural = ncols;
        let slack_count = lp.rows.iter().filter(|r| r.sense != Sense::Eq).count() + bound_rows.len();
        let total = structural + slack_count;
        let m = lp.rows.len() + bound_rows.len();

        let mut a = DMatrix::<f64>::zeros(m, total);
        let mut b = DVector::<f64>::zeros(m);
        let mut c = DVector::<f64>::zeros(total);
        let obj_sign = match lp.direction {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        };
        for (j, map) in maps.iter().enumerate() {
            let cj = obj_sign * lp.objective[j];
            match *map {
                VarMap::Shift { col, .. } => c[col] = cj,
                VarMap::Mirror { col, .. } => c[col] = -cj,
                VarMap::Split { pos, neg } => {
                    c[pos] = cj;
                    c[neg] = -cj;
                }
            }
        }

        let mut slack_of_row = vec![None; m];
        let mut next_slack = structural;
        let mut row_of_constraint = Vec::with_capacity(lp.rows.len());
        for (i, row) in lp.rows.iter().enumerate() {
            let mut rhs = row.rhs;
            for (j, map) in maps.iter().enumerate() {
                let aij = row.coeffs[j];
                if aij == 0.0 {
                    continue;
                }
                match *map {
                    VarMap::Shift { col, offset } => {
                        a[(i, col)] += aij;
                        rhs -= aij * offset;
                    }
                    VarMap::Mirror { col, offset } => {
                        a[(i, col)] -= aij;
                        rhs -= aij * offset;
                    }
                    VarMap::Split { pos, neg } => {
                        a[(i, pos)] += aij;
                        a[(i, neg)] -= aij;
                    }
                }
            }
            match row.sense {
                Sense::Le => {
                    a[(i, next_slack)] = 1.0;
                    slack_of_row[i] = Some((next_slack, 1.0));
                    next_slack += 1;
                }
                Sense::Ge => {
                    a[(i, next_slack)] = -1.0;
                    slack_of_row[i] = Some((next_slack, -1.0));
                    next_slack += 1;
                }
                Sense::Eq => {}
            }
            b[i] = rhs;
            row_of_constraint.push(i);
        }
        for (k, &(col, width)) in bound_rows.iter().enumerate() {
            let i = lp.rows.len() + k;
            a[(i, col)] = 1.0;
            a[(i, next_slack)] = 1.0;
            slack_of_row[i] = Some((next_slack, 1.0));
            next_slack += 1;
            b[i] = width;
        }

        let mut row_sign = vec![1.0; m];
        let mut initial_basic = vec![None; m];
        for i in 0..m {
            if b[i] < 0.0 {
                row_sign[i] = -1.0;
                b[i] = -b[i];
                for j in 0..total {
                    a[(i, j)] = -a[(i, j)];
                }
            }
            if let Some((col, s)) = slack_of_row[i] {
                if s * row_sign[i] > 0.0 {
                    initial_basic[i] = Some(col);
                }
            }
        }
        Self { a, b, c, maps, row_of_constraint, row_sign, initial_basic }
    }

    fn recover_x(&self, z: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|map| match *map {
                VarMap::Shift { col, offset } => offset + z[col],
                VarMap::Mirror { col, offset } => offset - z[col],
                VarMap::Split { pos, neg } => z[pos] - z[neg],
            })
            .collect()
    }

    fn solve(&self) -> Result<Outcome> {
        let (m, n) = self.a.shape();
        let artificial_rows: Vec<usize> = (0..m).filter(|&i| self.initial_basic[i].is_none()).collect();
        let n_art = artificial_rows.len();
        let width = n + n_art;

        // tableau rows 0..m, last column is the rhs
        let mut t = DMatrix::<f64>::zeros(m, width + 1);
        for i in 0..m {
            for j in 0..n {
                t[(i, j)] = self.a[(i, j)];
            }
            t[(i, width)] = self.b[i];
        }
        let mut basis = vec![0usize; m];
        for i in 0..m {
            if let Some(col) = self.initial_basic[i] {
                basis[i] = col;
            }
        }
        for (k, &i) in artificial_rows.iter().enumerate() {
            t[(i, n + k)] = 1.0;
            basis[i] = n + k;
        }
        let mut active_rows: Vec<bool> = vec![true; m];
        let mut pivots = 0usize;

        if n_art > 0 {
            let mut cost = DVector::<f64>::zeros(width);
            for k in 0..n_art {
                cost[n + k] = 1.0;
            }
            match run_simplex(&mut t, &mut basis, &cost, width, &active_rows, &mut pivots)? {
                Phase::Optimal => {}
                Phase::Unbounded => {
                    return Err(Error::SolverFailure("phase one reported unbounded".into()))
                }
            }
            let infeas: f64 = (0..m).filter(|&i| basis[i] >= n).map(|i| t[(i, width)]).sum();
            let scale = 1.0 + self.b.amax();
            if infeas > 1e-9 * scale {
                return Ok(Outcome::Infeasible);
            }
            // drive remaining artificials out of the basis
            for i in 0..m {
                if basis[i] < n {
                    continue;
                }
                let entering = (0..n).find(|&j| t[(i, j)].abs() > 1e-9);
                match entering {
                    Some(j) => pivot(&mut t, &mut basis, i, j),
                    None => active_rows[i] = false,
                }
            }
        }

        // phase two over structural + slack columns only
        let mut cost = DVector::<f64>::zeros(width);
        for j in 0..n {
            cost[j] = self.c[j];
        }
        match run_simplex(&mut t, &mut basis, &cost, n, &active_rows, &mut pivots)? {
            Phase::Unbounded => return Ok(Outcome::Unbounded),
            Phase::Optimal => {}
        }

        // refine from the final basis
        let rows: Vec<usize> = (0..m).filter(|&i| active_rows[i]).collect();
        let k = rows.len();
        let mut bmat = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        let mut cb = DVector::<f64>::zeros(k);
        for (r, &i) in rows.iter().enumerate() {
            rhs[r] = self.b[i];
            for (cidx, &ib) in rows.iter().enumerate() {
                bmat[(r, cidx)] = self.a[(i, basis[ib])];
            }
        }
        for (cidx, &ib) in rows.iter().enumerate() {
            cb[cidx] = self.c[basis[ib]];
        }
        let mut z = vec![0.0; n];
        let mut y = vec![0.0; m];
        let lu = bmat.clone().lu();
        let refined = lu.solve(&rhs).filter(|v| v.iter().all(|x| x.is_finite()));
        let duals = bmat.transpose().lu().solve(&cb).filter(|v| v.iter().all(|x| x.is_finite()));
        match refined {
            Some(xb) => {
                for (cidx, &ib) in rows.iter().enumerate() {
                    z[basis[ib]] = xb[cidx].max(0.0);
                }
            }
            None => {
                for &i in &rows {
                    z[basis[i]] = t[(i, width)].max(0.0);
                }
            }
        }
        if let Some(yv) = duals {
            for (r, &i) in rows.iter().enumerate() {
                y[i] = yv[r];
            }
        }
        Ok(Outcome::Optimal { z, y })
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

fn pivot(t: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
    let cols = t.ncols();
    let p = t[(row, col)];
    for j in 0..cols {
        t[(row, j)] /= p;
    }
    for i in 0..t.nrows() {
        if i == row {
            continue;
        }
        let f = t[(i, col)];
        if f != 0.0 {
            for j in 0..cols {
                let v = t[(row, j)];
                t[(i, j)] -= f * v;
            }
        }
    }
    basis[row] = col;
}

/// Bland's rule over columns `0..eligible`.
fn run_simplex(
    t: &mut DMatrix<f64>,
    basis: &mut [usize],
    cost: &DVector<f64>,
    eligible: usize,
    active: &[bool],
    pivots: &mut usize,
) -> Result<Phase> {
    let m = t.nrows();
    let rhs_col = t.ncols() - 1;
    loop {
        // reduced costs d_j = c_j - c_Bᵀ B⁻¹ A_j, read off the tableau
        let mut entering = None;
        for j in 0..eligible {
            if basis.iter().enumerate().any(|(i, &b)| active[i] && b == j) {
                continue;
            }
            let mut d = cost[j];
            for i in 0..m {
                if active[i] {
                    d -= cost[basis[i]] * t[(i, j)];
                }
            }
            if d < -COST_TOL {
                entering = Some(j);
                break;
            }
        }
        let Some(col) = entering else {
            return Ok(Phase::Optimal);
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if !active[i] {
                continue;
            }
            let a = t[(i, col)];
            if a > PIVOT_TOL {
                let ratio = t[(i, rhs_col)].max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-14 * (1.0 + br)
                            || (ratio <= br + 1e-14 * (1.0 + br) && basis[i] < basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = leave else {
            return Ok(Phase::Unbounded);
        };
        pivot(t, basis, row, col);
        *pivots += 1;
        if *pivots > MAX_PIVOTS {
            return Err(Error::SolverFailure("simplex pivot limit exceeded".into()));
        }
    }
}
