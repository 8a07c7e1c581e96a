//! Enumeration oracle for tiny pure-integer models.
//!
//! Every integer point inside the column bounds is covered, but subtrees are
//! skipped when interval reasoning on a single row proves them infeasible or
//! when the trivial objective bound cannot beat the best point found so far.
//! Once the fixed columns split the remaining ones into row-disconnected
//! groups, each group is enumerated on its own and the minima are added;
//! group results are memoised. No LP is ever solved here, which keeps this
//! path independent of the simplex/branch-and-bound code it is used to check.

use std::collections::HashMap;
use std::time::Instant;

use crate::branch_bound::{MilpResult, MilpStatus};
use crate::error::SolveError;
use crate::model::{MilpModel, RowSense};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationCaps {
    /// Maximum number of enumeration nodes (single-value assignments).
    pub max_nodes: u64,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        EnumerationCaps { max_nodes: 10_000_000 }
    }
}

type Domain = (i64, i64);
type Assignment<T> = Option<(T, Vec<(usize, i64)>)>;

struct Oracle<'a, T> {
    model: &'a MilpModel<T>,
    col_rows: Vec<Vec<usize>>,
    caps: EnumerationCaps,
    nodes: u64,
    memo: HashMap<String, Assignment<T>>,
}

/// Finds the true optimum of a pure-integer model with finite bounds.
pub fn solve_exhaustive<T: Scalar>(model: &MilpModel<T>, caps: EnumerationCaps) -> Result<MilpResult<T>, SolveError> {
    model.validate()?;
    let start = Instant::now();
    let mut dom: Vec<Domain> = Vec::with_capacity(model.columns.len());
    for c in &model.columns {
        let (Some(l), Some(u)) = (&c.lower, &c.upper) else {
            return Err(SolveError::NotEnumerable(c.name.clone()));
        };
        if !c.kind.is_integer() {
            return Err(SolveError::NotEnumerable(c.name.clone()));
        }
        let (Some(lo), Some(hi)) = (ceil_i64(l), floor_i64(u)) else {
            return Err(SolveError::NotEnumerable(c.name.clone()));
        };
        dom.push((lo, hi));
    }
    let mut col_rows = vec![Vec::new(); model.columns.len()];
    for (i, r) in model.rows.iter().enumerate() {
        for (j, _) in &r.coefficients {
            col_rows[*j].push(i);
        }
    }
    let mut oracle = Oracle { model, col_rows, caps, nodes: 0, memo: HashMap::new() };

    let all_rows: Vec<usize> = (0..model.rows.len()).collect();
    let feasible = dom.iter().all(|(l, h)| l <= h) && oracle.propagate(&mut dom, all_rows);
    let outcome = if feasible {
        let free: Vec<usize> = (0..dom.len()).filter(|&j| dom[j].0 < dom[j].1).collect();
        oracle.solve(&free, &dom)?
    } else {
        None
    };

    let Some((_, assignment)) = outcome else {
        return Ok(MilpResult {
            status: MilpStatus::Infeasible,
            values: Vec::new(),
            objective: None,
            best_bound: None,
            nodes: oracle.nodes,
            wall_time: start.elapsed(),
        });
    };
    let mut values: Vec<T> = dom.iter().map(|(l, _)| T::from_i64(*l).unwrap()).collect();
    for (j, v) in assignment {
        values[j] = T::from_i64(v).unwrap();
    }
    let objective = model.objective_value(&values);
    Ok(MilpResult {
        status: MilpStatus::Optimal,
        values,
        objective: Some(objective.clone()),
        best_bound: Some(objective),
        nodes: oracle.nodes,
        wall_time: start.elapsed(),
    })
}

fn floor_i64<T: Scalar>(v: &T) -> Option<i64> {
    (v.clone() + T::tolerance()).floor().to_i64()
}

fn ceil_i64<T: Scalar>(v: &T) -> Option<i64> {
    (v.clone() - T::tolerance()).ceil().to_i64()
}

impl<T: Scalar> Oracle<'_, T> {
    /// Single-row interval propagation to a fixpoint. Returns `false` when
    /// some row cannot be satisfied.
    fn propagate(&self, dom: &mut [Domain], mut queue: Vec<usize>) -> bool {
        let mut queued = vec![false; self.model.rows.len()];
        for &r in &queue {
            queued[r] = true;
        }
        while let Some(r) = queue.pop() {
            queued[r] = false;
            let row = &self.model.rows[r];
            let mut min_act = T::zero();
            let mut max_act = T::zero();
            for (j, a) in &row.coefficients {
                let (lo, hi) = dom[*j];
                let (l, h) = (T::from_i64(lo).unwrap() * a.clone(), T::from_i64(hi).unwrap() * a.clone());
                if a.is_positive() {
                    min_act = min_act + l;
                    max_act = max_act + h;
                } else {
                    min_act = min_act + h;
                    max_act = max_act + l;
                }
            }
            let check_le = matches!(row.sense, RowSense::Le | RowSense::Eq);
            let check_ge = matches!(row.sense, RowSense::Ge | RowSense::Eq);
            if check_le && (min_act.clone() - row.rhs.clone()).is_pos() {
                return false;
            }
            if check_ge && (row.rhs.clone() - max_act.clone()).is_pos() {
                return false;
            }
            for (j, a) in &row.coefficients {
                if a.is_zero() {
                    continue;
                }
                let (lo, hi) = dom[*j];
                let (l, h) = (T::from_i64(lo).unwrap() * a.clone(), T::from_i64(hi).unwrap() * a.clone());
                let (own_min, own_max) = if a.is_positive() { (l, h) } else { (h, l) };
                let (mut new_lo, mut new_hi) = (lo, hi);
                if check_le {
                    // a * x <= rhs - (min_act - own_min)
                    let limit = (row.rhs.clone() - (min_act.clone() - own_min.clone())) / a.clone();
                    if a.is_positive() {
                        new_hi = new_hi.min(floor_i64(&limit).unwrap_or(i64::MAX));
                    } else {
                        new_lo = new_lo.max(ceil_i64(&limit).unwrap_or(i64::MIN));
                    }
                }
                if check_ge {
                    // a * x >= rhs - (max_act - own_max)
                    let limit = (row.rhs.clone() - (max_act.clone() - own_max.clone())) / a.clone();
                    if a.is_positive() {
                        new_lo = new_lo.max(ceil_i64(&limit).unwrap_or(i64::MIN));
                    } else {
                        new_hi = new_hi.min(floor_i64(&limit).unwrap_or(i64::MAX));
                    }
                }
                if new_lo > new_hi {
                    return false;
                }
                if (new_lo, new_hi) != (lo, hi) {
                    dom[*j] = (new_lo, new_hi);
                    for &r2 in &self.col_rows[*j] {
                        if !queued[r2] {
                            queued[r2] = true;
                            queue.push(r2);
                        }
                    }
                }
            }
        }
        true
    }

    /// Minimum objective over the `free` columns (all other columns are
    /// fixed in `dom`).
    fn solve(&mut self, free: &[usize], dom: &[Domain]) -> Result<Assignment<T>, SolveError> {
        if free.is_empty() {
            return Ok(Some((T::zero(), Vec::new())));
        }
        let groups = self.split(free, dom);
        let mut total = T::zero();
        let mut assignment = Vec::new();
        for group in groups {
            match self.solve_group(&group, dom)? {
                Some((c, a)) => {
                    total = total + c;
                    assignment.extend(a);
                }
                None => return Ok(None),
            }
        }
        Ok(Some((total, assignment)))
    }

    /// Row-connected groups among the free columns.
    fn split(&self, free: &[usize], dom: &[Domain]) -> Vec<Vec<usize>> {
        let mut group_of: HashMap<usize, usize> = free.iter().map(|&j| (j, usize::MAX)).collect();
        let mut groups = Vec::new();
        for &start in free {
            if group_of[&start] != usize::MAX {
                continue;
            }
            let id = groups.len();
            let mut members = vec![start];
            group_of.insert(start, id);
            let mut k = 0;
            while k < members.len() {
                let j = members[k];
                k += 1;
                for &r in &self.col_rows[j] {
                    for (other, _) in &self.model.rows[r].coefficients {
                        if dom[*other].0 < dom[*other].1 && group_of.get(other) == Some(&usize::MAX) {
                            group_of.insert(*other, id);
                            members.push(*other);
                        }
                    }
                }
            }
            members.sort_unstable();
            groups.push(members);
        }
        groups
    }

    fn memo_key(&self, group: &[usize], dom: &[Domain]) -> String {
        use std::fmt::Write;
        let mut key = String::new();
        let mut rows: Vec<usize> = group.iter().flat_map(|&j| self.col_rows[j].iter().copied()).collect();
        rows.sort_unstable();
        rows.dedup();
        for &j in group {
            let _ = write!(key, "{}:{}:{};", j, dom[j].0, dom[j].1);
        }
        key.push('|');
        for r in rows {
            let row = &self.model.rows[r];
            let residual = row
                .coefficients
                .iter()
                .filter(|(j, _)| group.binary_search(j).is_err())
                .fold(row.rhs.clone(), |acc, (j, a)| acc - a.clone() * T::from_i64(dom[*j].0).unwrap());
            let _ = write!(key, "{}:{:?};", r, residual);
        }
        key
    }

    fn solve_group(&mut self, group: &[usize], dom: &[Domain]) -> Result<Assignment<T>, SolveError> {
        let key = self.memo_key(group, dom);
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let var = *group
            .iter()
            .min_by_key(|&&j| (dom[j].1 - dom[j].0, j))
            .expect("group is non-empty");
        let cost = self.model.columns[var].objective.clone();
        let (lo, hi) = dom[var];
        let values: Box<dyn Iterator<Item = i64>> =
            if cost.is_negative() { Box::new((lo..=hi).rev()) } else { Box::new(lo..=hi) };

        let mut best: Assignment<T> = None;
        for v in values {
            self.nodes += 1;
            if self.nodes > self.caps.max_nodes {
                return Err(SolveError::EnumerationLimit { limit: self.caps.max_nodes });
            }
            let mut next = dom.to_vec();
            next[var] = (v, v);
            if !self.propagate(&mut next, self.col_rows[var].clone()) {
                continue;
            }
            let mut fixed_cost = T::zero();
            let mut fixed = Vec::new();
            let mut remaining = Vec::new();
            let mut bound = T::zero();
            for &j in group {
                let c = &self.model.columns[j].objective;
                let (l, h) = next[j];
                if l == h {
                    fixed_cost = fixed_cost + c.clone() * T::from_i64(l).unwrap();
                    fixed.push((j, l));
                } else {
                    remaining.push(j);
                    let (a, b) = (c.clone() * T::from_i64(l).unwrap(), c.clone() * T::from_i64(h).unwrap());
                    bound = bound + if a < b { a } else { b };
                }
            }
            if let Some((b, _)) = &best {
                if fixed_cost.clone() + bound >= *b {
                    continue;
                }
            }
            if let Some((sub_cost, sub)) = self.solve(&remaining, &next)? {
                let total = fixed_cost + sub_cost;
                if best.as_ref().is_none_or(|(b, _)| total < *b) {
                    fixed.extend(sub);
                    best = Some((total, fixed));
                }
            }
        }
        self.memo.insert(key, best.clone());
        Ok(best)
    }
}
