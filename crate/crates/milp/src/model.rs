use std::collections::HashMap;
use std::fmt;

use crate::error::ModelError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_integer(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        })
    }
}

/// A model column. `None` bounds are infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Column<T> {
    pub name: String,
    pub lower: Option<T>,
    pub upper: Option<T>,
    pub kind: VarKind,
    pub objective: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row<T> {
    pub name: String,
    /// `(column index, coefficient)`; at most one entry per column.
    pub coefficients: Vec<(usize, T)>,
    pub sense: RowSense,
    pub rhs: T,
}

impl<T: Scalar> Row<T> {
    pub fn new(name: impl Into<String>, coefficients: Vec<(usize, T)>, sense: RowSense, rhs: T) -> Self {
        Row { name: name.into(), coefficients, sense, rhs }
    }

    pub fn activity(&self, values: &[T]) -> T {
        self.coefficients
            .iter()
            .fold(T::zero(), |acc, (j, a)| acc + a.clone() * values[*j].clone())
    }

    /// Amount by which `values` violates this row (zero when satisfied).
    pub fn violation(&self, values: &[T]) -> T {
        let act = self.activity(values);
        let zero = T::zero();
        match self.sense {
            RowSense::Le => {
                let d = act - self.rhs.clone();
                if d > zero { d } else { zero }
            }
            RowSense::Ge => {
                let d = self.rhs.clone() - act;
                if d > zero { d } else { zero }
            }
            RowSense::Eq => (act - self.rhs.clone()).abs(),
        }
    }
}

/// A minimisation MILP: `min c·x` subject to linear rows and column bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel<T> {
    pub name: String,
    pub columns: Vec<Column<T>>,
    pub rows: Vec<Row<T>>,
}

impl<T: Scalar> Default for MilpModel<T> {
    fn default() -> Self {
        Self::new("model")
    }
}

impl<T: Scalar> MilpModel<T> {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel { name: name.into(), columns: Vec::new(), rows: Vec::new() }
    }

    pub fn add_column(
        &mut self,
        name: impl Into<String>,
        lower: Option<T>,
        upper: Option<T>,
        kind: VarKind,
        objective: T,
    ) -> usize {
        self.columns.push(Column { name: name.into(), lower, upper, kind, objective });
        self.columns.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: T) -> usize {
        self.add_column(name, Some(T::zero()), Some(T::one()), VarKind::Binary, objective)
    }

    pub fn add_row(&mut self, row: Row<T>) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self) -> HashMap<&str, usize> {
        self.columns.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect()
    }

    /// Checks structural consistency: coefficients reference existing
    /// columns, no duplicates, `lb <= ub`, binaries inside `[0, 1]`.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut names = HashMap::new();
        for (j, col) in self.columns.iter().enumerate() {
            if names.insert(col.name.as_str(), j).is_some() {
                return Err(ModelError::DuplicateColumn(col.name.clone()));
            }
            if let (Some(l), Some(u)) = (&col.lower, &col.upper) {
                if l > u {
                    return Err(ModelError::InvertedBounds(col.name.clone()));
                }
            }
            if col.kind == VarKind::Binary {
                let lo_ok = col.lower.as_ref().is_some_and(|l| *l >= T::zero());
                let hi_ok = col.upper.as_ref().is_some_and(|u| *u <= T::one());
                if !lo_ok || !hi_ok {
                    return Err(ModelError::BinaryBounds(col.name.clone()));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for row in &self.rows {
            seen.clear();
            for (j, _) in &row.coefficients {
                if *j >= self.columns.len() {
                    return Err(ModelError::UnknownColumn { row: row.name.clone(), column: *j });
                }
                if !seen.insert(*j) {
                    return Err(ModelError::RepeatedCoefficient {
                        row: row.name.clone(),
                        column: self.columns[*j].name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[T]) -> T {
        self.columns
            .iter()
            .zip(values)
            .fold(T::zero(), |acc, (c, v)| acc + c.objective.clone() * v.clone())
    }

    /// Rows violated by more than `tol`, as `(row index, violation)`.
    pub fn row_violations(&self, values: &[T], tol: &T) -> Vec<(usize, T)> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                let v = r.violation(values);
                (v > *tol).then_some((i, v))
            })
            .collect()
    }

    /// Full feasibility check: bounds, integrality and rows.
    pub fn is_feasible(&self, values: &[T], tol: &T) -> bool {
        if values.len() != self.columns.len() {
            return false;
        }
        for (c, v) in self.columns.iter().zip(values) {
            if let Some(l) = &c.lower {
                if l.clone() - v.clone() > *tol {
                    return false;
                }
            }
            if let Some(u) = &c.upper {
                if v.clone() - u.clone() > *tol {
                    return false;
                }
            }
            if c.kind.is_integer() && !v.is_integral(tol) {
                return false;
            }
        }
        self.row_violations(values, tol).is_empty()
    }

    /// Copy with every column made continuous.
    pub fn relaxed(&self) -> Self {
        let mut m = self.clone();
        for c in &mut m.columns {
            c.kind = VarKind::Continuous;
        }
        m
    }

    /// Converts coefficients to another scalar type.
    pub fn map_scalar<U: Scalar>(&self, mut f: impl FnMut(&T) -> U) -> MilpModel<U> {
        MilpModel {
            name: self.name.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    lower: c.lower.as_ref().map(&mut f),
                    upper: c.upper.as_ref().map(&mut f),
                    kind: c.kind,
                    objective: f(&c.objective),
                })
                .collect(),
            rows: self
                .rows
                .iter()
                .map(|r| Row {
                    name: r.name.clone(),
                    coefficients: r.coefficients.iter().map(|(j, a)| (*j, f(a))).collect(),
                    sense: r.sense,
                    rhs: f(&r.rhs),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn validate_catches_bad_models() {
        let mut m = MilpModel::<BigRational>::new("t");
        let x = m.add_column("x", Some(q(0)), Some(q(3)), VarKind::Integer, q(1));
        m.add_row(Row::new("r", vec![(x, q(1)), (x, q(2))], RowSense::Le, q(1)));
        assert!(matches!(m.validate(), Err(ModelError::RepeatedCoefficient { .. })));

        let mut m = MilpModel::<BigRational>::new("t");
        m.add_column("x", Some(q(4)), Some(q(3)), VarKind::Integer, q(1));
        assert!(matches!(m.validate(), Err(ModelError::InvertedBounds(_))));

        let mut m = MilpModel::<BigRational>::new("t");
        m.add_column("x", Some(q(0)), Some(q(1)), VarKind::Integer, q(1));
        m.add_row(Row::new("r", vec![(5, q(1))], RowSense::Le, q(1)));
        assert!(matches!(m.validate(), Err(ModelError::UnknownColumn { .. })));
    }

    #[test]
    fn feasibility_and_violation() {
        let mut m = MilpModel::<BigRational>::new("t");
        let x = m.add_column("x", Some(q(0)), Some(q(10)), VarKind::Integer, q(2));
        let y = m.add_column("y", Some(q(0)), None, VarKind::Continuous, q(1));
        m.add_row(Row::new("c", vec![(x, q(1)), (y, q(1))], RowSense::Ge, q(4)));
        assert!(m.is_feasible(&[q(3), q(1)], &q(0)));
        assert!(!m.is_feasible(&[q(1), q(1)], &q(0)));
        assert_eq!(m.row_violations(&[q(1), q(1)], &q(0)), vec![(0, q(2))]);
        assert_eq!(m.objective_value(&[q(3), q(1)]), q(7));
    }
}
