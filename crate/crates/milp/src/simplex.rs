//! Two-phase bounded-variable primal simplex on a sparse tableau.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots the engine
//! switches to Bland's rule (lowest-index entering and leaving variable)
//! until the objective moves again, which rules out cycling.

use crate::error::ModelError;
use crate::model::{MilpModel, RowSense};
use crate::scalar::Scalar;

/// Degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// What occupies a basis position at termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasicVar {
    Column(usize),
    Slack(usize),
    Artificial(usize),
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Column values; meaningful only when `status == Optimal`.
    pub values: Vec<T>,
    pub objective: T,
    /// One entry per row.
    pub basis: Vec<BasicVar>,
    pub iterations: usize,
}

/// Solves the LP relaxation of `model` (integrality is ignored).
pub fn solve_lp<T: Scalar>(model: &MilpModel<T>) -> Result<LpSolution<T>, ModelError> {
    if model.columns.is_empty() {
        return Err(ModelError::Empty);
    }
    model.validate()?;
    let lower: Vec<_> = model.columns.iter().map(|c| c.lower.clone()).collect();
    let upper: Vec<_> = model.columns.iter().map(|c| c.upper.clone()).collect();
    Ok(solve_with_bounds(model, &lower, &upper))
}

/// Solves the relaxation with the column bounds replaced by `lower`/`upper`.
/// The model is assumed valid.
pub(crate) fn solve_with_bounds<T: Scalar>(
    model: &MilpModel<T>,
    lower: &[Option<T>],
    upper: &[Option<T>],
) -> LpSolution<T> {
    let infeasible = |iterations| LpSolution {
        status: LpStatus::Infeasible,
        values: Vec::new(),
        objective: T::zero(),
        basis: Vec::new(),
        iterations,
    };
    for (l, u) in lower.iter().zip(upper) {
        if let (Some(l), Some(u)) = (l, u) {
            if (l.clone() - u.clone()).is_pos() {
                return infeasible(0);
            }
        }
    }
    let mut tab = Tableau::build(model, lower, upper);
    let mut iterations = 0;

    if tab.num_artificial > 0 {
        let cost: Vec<T> =
            (0..tab.num_vars()).map(|k| if tab.is_artificial(k) { T::one() } else { T::zero() }).collect();
        tab.set_cost(cost);
        // Phase 1 is bounded below by zero.
        let _ = tab.run(&mut iterations);
        let residual = tab
            .basis
            .iter()
            .filter(|&&k| tab.is_artificial(k))
            .fold(T::zero(), |acc, &k| acc + tab.x[k].clone());
        if residual.is_pos() {
            return infeasible(iterations);
        }
        for k in tab.first_artificial..tab.num_vars() {
            tab.upper[k] = Some(T::zero());
            if !matches!(tab.state[k], VarState::Basic) {
                tab.x[k] = T::zero();
                tab.state[k] = VarState::Lower;
            }
        }
    }

    tab.set_cost(tab.phase_two_cost.clone());
    if tab.run(&mut iterations) == RunOutcome::Unbounded {
        return LpSolution {
            status: LpStatus::Unbounded,
            values: Vec::new(),
            objective: T::zero(),
            basis: tab.basis_descriptor(),
            iterations,
        };
    }
    let values = tab.column_values();
    let objective = model.objective_value(&values);
    LpSolution { status: LpStatus::Optimal, values, objective, basis: tab.basis_descriptor(), iterations }
}

#[derive(Debug, Clone)]
struct SparseRow<T> {
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> SparseRow<T> {
    fn get(&self, col: usize) -> Option<&T> {
        self.entries.binary_search_by_key(&col, |e| e.0).ok().map(|p| &self.entries[p].1)
    }

    /// `self - factor * other`, dropping (near-)zeros.
    fn minus_scaled(&self, factor: &T, other: &SparseRow<T>) -> SparseRow<T> {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some((ja, va)), Some((jb, vb))) => {
                    if ja < jb {
                        out.push((*ja, va.clone()));
                        a.next();
                    } else if jb < ja {
                        out.push((*jb, -(factor.clone() * vb.clone())));
                        b.next();
                    } else {
                        let v = va.clone() - factor.clone() * vb.clone();
                        if !v.near_zero() {
                            out.push((*ja, v));
                        }
                        a.next();
                        b.next();
                    }
                }
                (Some((ja, va)), None) => {
                    out.push((*ja, va.clone()));
                    a.next();
                }
                (None, Some((jb, vb))) => {
                    out.push((*jb, -(factor.clone() * vb.clone())));
                    b.next();
                }
                (None, None) => break,
            }
        }
        SparseRow { entries: out }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunOutcome {
    Optimal,
    Unbounded,
}

/// How a model column is expressed through internal variables, all of
/// which live in `[0, u]`.
#[derive(Debug, Clone)]
enum ColumnMap<T> {
    /// `x = offset + v`
    Shift { var: usize, offset: T },
    /// `x = offset - v`
    Mirror { var: usize, offset: T },
    /// `x = v+ - v-`
    Split { pos: usize, neg: usize },
}

struct Tableau<T> {
    rows: Vec<SparseRow<T>>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    upper: Vec<Option<T>>,
    x: Vec<T>,
    cost: Vec<T>,
    reduced: Vec<T>,
    phase_two_cost: Vec<T>,
    column_map: Vec<ColumnMap<T>>,
    first_slack: usize,
    slack_row: Vec<usize>,
    first_artificial: usize,
    num_artificial: usize,
}

impl<T: Scalar> Tableau<T> {
    fn build(model: &MilpModel<T>, lower: &[Option<T>], upper: &[Option<T>]) -> Self {
        let mut column_map = Vec::with_capacity(model.columns.len());
        let mut var_upper: Vec<Option<T>> = Vec::new();
        let mut cost: Vec<T> = Vec::new();
        for (j, col) in model.columns.iter().enumerate() {
            let c = col.objective.clone();
            match (&lower[j], &upper[j]) {
                (Some(l), u) => {
                    column_map.push(ColumnMap::Shift { var: var_upper.len(), offset: l.clone() });
                    var_upper.push(u.as_ref().map(|u| u.clone() - l.clone()));
                    cost.push(c);
                }
                (None, Some(u)) => {
                    column_map.push(ColumnMap::Mirror { var: var_upper.len(), offset: u.clone() });
                    var_upper.push(None);
                    cost.push(-c);
                }
                (None, None) => {
                    let pos = var_upper.len();
                    column_map.push(ColumnMap::Split { pos, neg: pos + 1 });
                    var_upper.push(None);
                    var_upper.push(None);
                    cost.push(c.clone());
                    cost.push(-c);
                }
            }
        }

        let first_slack = var_upper.len();
        let mut slack_row = Vec::new();
        let mut rows = Vec::with_capacity(model.rows.len());
        let mut rhs_values = Vec::with_capacity(model.rows.len());
        // (row, slack var with +1 coefficient after sign normalisation)
        let mut slack_basis: Vec<Option<usize>> = Vec::with_capacity(model.rows.len());

        for (i, row) in model.rows.iter().enumerate() {
            let mut rhs = row.rhs.clone();
            let mut entries: Vec<(usize, T)> = Vec::with_capacity(row.coefficients.len() + 1);
            for (j, a) in &row.coefficients {
                if a.near_zero() {
                    continue;
                }
                match &column_map[*j] {
                    ColumnMap::Shift { var, offset } => {
                        rhs = rhs - a.clone() * offset.clone();
                        entries.push((*var, a.clone()));
                    }
                    ColumnMap::Mirror { var, offset } => {
                        rhs = rhs - a.clone() * offset.clone();
                        entries.push((*var, -a.clone()));
                    }
                    ColumnMap::Split { pos, neg } => {
                        entries.push((*pos, a.clone()));
                        entries.push((*neg, -a.clone()));
                    }
                }
            }
            let slack_sign = match row.sense {
                RowSense::Le => Some(T::one()),
                RowSense::Ge => Some(-T::one()),
                RowSense::Eq => None,
            };
            let mut slack = None;
            if let Some(sign) = slack_sign {
                let var = var_upper.len();
                var_upper.push(None);
                cost.push(T::zero());
                slack_row.push(i);
                entries.push((var, sign));
                slack = Some(var);
            }
            if rhs.is_negative() {
                rhs = -rhs;
                for e in &mut entries {
                    e.1 = -e.1.clone();
                }
            }
            entries.sort_by_key(|e| e.0);
            let basic_slack =
                slack.filter(|s| entries.iter().any(|(k, v)| k == s && *v == T::one()));
            slack_basis.push(basic_slack);
            rows.push(SparseRow { entries });
            rhs_values.push(rhs);
        }

        let first_artificial = var_upper.len();
        let mut basis = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter_mut().enumerate() {
            match slack_basis[i] {
                Some(s) => basis.push(s),
                None => {
                    let var = var_upper.len();
                    var_upper.push(None);
                    cost.push(T::zero());
                    row.entries.push((var, T::one()));
                    basis.push(var);
                }
            }
        }
        let num_vars = var_upper.len();
        let mut state = vec![VarState::Lower; num_vars];
        let mut x = vec![T::zero(); num_vars];
        for (i, &b) in basis.iter().enumerate() {
            state[b] = VarState::Basic;
            x[b] = rhs_values[i].clone();
        }
        Tableau {
            rows,
            basis,
            state,
            upper: var_upper,
            x,
            reduced: vec![T::zero(); num_vars],
            cost: vec![T::zero(); num_vars],
            phase_two_cost: cost,
            column_map,
            first_slack,
            slack_row,
            first_artificial,
            num_artificial: num_vars - first_artificial,
        }
    }

    fn num_vars(&self) -> usize {
        self.upper.len()
    }

    fn is_artificial(&self, k: usize) -> bool {
        k >= self.first_artificial
    }

    fn set_cost(&mut self, cost: Vec<T>) {
        let mut reduced = cost.clone();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (j, a) in &row.entries {
                reduced[*j] = reduced[*j].clone() - cb.clone() * a.clone();
            }
        }
        for &b in &self.basis {
            reduced[b] = T::zero();
        }
        self.cost = cost;
        self.reduced = reduced;
    }

    fn choose_entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.num_vars() {
            let d = &self.reduced[j];
            let score = match self.state[j] {
                VarState::Basic => continue,
                VarState::Lower => {
                    if !d.is_neg() || self.upper[j].as_ref().is_some_and(|u| u.near_zero()) {
                        continue;
                    }
                    -d.clone()
                }
                VarState::Upper => {
                    if !d.is_pos() {
                        continue;
                    }
                    d.clone()
                }
            };
            if bland {
                return Some(j);
            }
            if best.as_ref().is_none_or(|(_, s)| score > *s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn run(&mut self, iterations: &mut usize) -> RunOutcome {
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_STREAK;
            let Some(q) = self.choose_entering(bland) else {
                return RunOutcome::Optimal;
            };
            *iterations += 1;
            let increasing = self.state[q] == VarState::Lower;

            let column: Vec<(usize, T)> =
                self.rows.iter().enumerate().filter_map(|(i, r)| r.get(q).map(|a| (i, a.clone()))).collect();

            // Ratio test. `leave` is (row, step, |alpha|, hits_upper).
            let mut leave: Option<(usize, T, T, bool)> = None;
            for (i, a) in &column {
                let b = self.basis[*i];
                // rate of change of x_b per unit step of the entering variable
                let rate = if increasing { -a.clone() } else { a.clone() };
                let (step, hits_upper) = if rate.is_neg() {
                    (self.x[b].clone() / (-rate.clone()), false)
                } else if rate.is_pos() {
                    match &self.upper[b] {
                        Some(u) => ((u.clone() - self.x[b].clone()) / rate.clone(), true),
                        None => continue,
                    }
                } else {
                    continue;
                };
                let step = if step.is_negative() { T::zero() } else { step };
                let better = match &leave {
                    None => true,
                    Some((li, ls, la, _)) => {
                        if step < *ls && !(ls.clone() - step.clone()).near_zero() {
                            true
                        } else if (step.clone() - ls.clone()).near_zero() {
                            if bland {
                                b < self.basis[*li]
                            } else {
                                a.abs() > *la
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((*i, step, a.abs(), hits_upper));
                }
            }

            let flip_step = self.upper[q].clone();
            let flips = match (&flip_step, &leave) {
                (Some(u), Some((_, s, _, _))) => *u <= *s,
                (Some(_), None) => true,
                (None, _) => false,
            };
            if !flips && leave.is_none() {
                return RunOutcome::Unbounded;
            }
            let step = if flips { flip_step.clone().unwrap() } else { leave.as_ref().unwrap().1.clone() };

            if step.near_zero() {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            // Move along the edge.
            if !step.is_zero() {
                let signed = if increasing { step.clone() } else { -step.clone() };
                self.x[q] = self.x[q].clone() + signed.clone();
                for (i, a) in &column {
                    let b = self.basis[*i];
                    self.x[b] = self.x[b].clone() - a.clone() * signed.clone();
                }
            }

            if flips {
                if increasing {
                    self.state[q] = VarState::Upper;
                    self.x[q] = self.upper[q].clone().unwrap();
                } else {
                    self.state[q] = VarState::Lower;
                    self.x[q] = T::zero();
                }
                continue;
            }

            let (r, _, _, hits_upper) = leave.unwrap();
            let leaving = self.basis[r];
            if hits_upper {
                self.state[leaving] = VarState::Upper;
                self.x[leaving] = self.upper[leaving].clone().unwrap();
            } else {
                self.state[leaving] = VarState::Lower;
                self.x[leaving] = T::zero();
            }
            self.pivot(r, q, &column);
            self.state[q] = VarState::Basic;
        }
    }

    fn pivot(&mut self, r: usize, q: usize, column: &[(usize, T)]) {
        let alpha = self.rows[r].get(q).cloned().expect("pivot element present");
        let inv = T::one() / alpha;
        for e in &mut self.rows[r].entries {
            e.1 = e.1.clone() * inv.clone();
        }
        // exact unit entry, whatever rounding did
        if let Ok(p) = self.rows[r].entries.binary_search_by_key(&q, |e| e.0) {
            self.rows[r].entries[p].1 = T::one();
        }
        let pivot_row = self.rows[r].clone();
        for (i, a) in column {
            if *i == r {
                continue;
            }
            let mut updated = self.rows[*i].minus_scaled(a, &pivot_row);
            updated.entries.retain(|e| e.0 != q);
            self.rows[*i] = updated;
        }
        let dq = self.reduced[q].clone();
        if !dq.is_zero() {
            for (j, a) in &pivot_row.entries {
                self.reduced[*j] = self.reduced[*j].clone() - dq.clone() * a.clone();
            }
        }
        self.reduced[q] = T::zero();
        self.basis[r] = q;
    }

    fn column_values(&self) -> Vec<T> {
        self.column_map
            .iter()
            .map(|m| match m {
                ColumnMap::Shift { var, offset } => offset.clone() + self.x[*var].clone(),
                ColumnMap::Mirror { var, offset } => offset.clone() - self.x[*var].clone(),
                ColumnMap::Split { pos, neg } => self.x[*pos].clone() - self.x[*neg].clone(),
            })
            .collect()
    }

    fn basis_descriptor(&self) -> Vec<BasicVar> {
        let mut var_to_column = vec![usize::MAX; self.first_slack];
        for (j, m) in self.column_map.iter().enumerate() {
            match m {
                ColumnMap::Shift { var, .. } | ColumnMap::Mirror { var, .. } => var_to_column[*var] = j,
                ColumnMap::Split { pos, neg } => {
                    var_to_column[*pos] = j;
                    var_to_column[*neg] = j;
                }
            }
        }
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                if k < self.first_slack {
                    BasicVar::Column(var_to_column[k])
                } else if k < self.first_artificial {
                    BasicVar::Slack(self.slack_row[k - self.first_slack])
                } else {
                    BasicVar::Artificial(i)
                }
            })
            .collect()
    }
}
