//! LP-based branch-and-bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::error::ModelError;
use crate::model::MilpModel;
use crate::scalar::Scalar;
use crate::simplex::{solve_with_bounds, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchingRule {
    LowestIndex,
    MostFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSelection {
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    /// Ignored by exact scalar types.
    pub integrality_tolerance: f64,
    pub branching: BranchingRule,
    pub node_selection: NodeSelection,
    pub threads: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            node_limit: None,
            time_limit: None,
            integrality_tolerance: 0.0,
            branching: BranchingRule::LowestIndex,
            node_selection: NodeSelection::BestBound,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    /// A limit stopped the search; an incumbent is available.
    Feasible,
    Infeasible,
    /// The LP relaxation is unbounded.
    Unbounded,
    /// A limit stopped the search before any incumbent was found.
    LimitReached,
}

impl MilpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MilpStatus::Optimal => "optimal",
            MilpStatus::Feasible => "feasible",
            MilpStatus::Infeasible => "infeasible",
            MilpStatus::Unbounded => "unbounded",
            MilpStatus::LimitReached => "limit_reached",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MilpResult<T> {
    pub status: MilpStatus,
    /// Incumbent column values (empty when none was found).
    pub values: Vec<T>,
    pub objective: Option<T>,
    /// Proven lower bound on the optimum.
    pub best_bound: Option<T>,
    pub nodes: u64,
    pub wall_time: Duration,
}

impl<T: Scalar> MilpResult<T> {
    pub fn has_solution(&self) -> bool {
        matches!(self.status, MilpStatus::Optimal | MilpStatus::Feasible)
    }
}

struct Node<T> {
    bound: T,
    seq: u64,
    depth: u64,
    lower: Vec<Option<T>>,
    upper: Vec<Option<T>>,
}

struct Keyed<T> {
    node: Node<T>,
    selection: NodeSelection,
}

impl<T: Scalar> PartialEq for Keyed<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Keyed<T> {}

impl<T: Scalar> PartialOrd for Keyed<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Keyed<T> {
    // BinaryHeap pops the greatest element, so "better" nodes compare greater.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.node, &other.node);
        match self.selection {
            NodeSelection::BestBound => b
                .bound
                .partial_cmp(&a.bound)
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.seq.cmp(&a.seq)),
            NodeSelection::DepthFirst => a.depth.cmp(&b.depth).then_with(|| a.seq.cmp(&b.seq)),
        }
    }
}

enum NodeOutcome<T> {
    Pruned,
    Integral { objective: T, values: Vec<T> },
    Branch(Node<T>, Node<T>),
}

struct Search<'a, T> {
    model: &'a MilpModel<T>,
    params: &'a SolverParams,
    tol: T,
}

impl<T: Scalar> Search<'_, T> {
    /// Solves the node LP and decides what to do with it. `cutoff` is the
    /// incumbent objective, if any.
    fn process(&self, node: &Node<T>, cutoff: Option<&T>, next_seq: &mut dyn FnMut() -> u64) -> NodeOutcome<T> {
        if cutoff.is_some_and(|c| node.bound >= *c) {
            return NodeOutcome::Pruned;
        }
        let lp = solve_with_bounds(self.model, &node.lower, &node.upper);
        if lp.status != LpStatus::Optimal {
            return NodeOutcome::Pruned;
        }
        if cutoff.is_some_and(|c| lp.objective >= *c) {
            return NodeOutcome::Pruned;
        }
        let Some(j) = self.branching_column(&lp.values) else {
            let values: Vec<T> = lp
                .values
                .iter()
                .zip(&self.model.columns)
                .map(|(v, c)| if c.kind.is_integer() { v.round_integral() } else { v.clone() })
                .collect();
            let objective = self.model.objective_value(&values);
            return NodeOutcome::Integral { objective, values };
        };
        let v = &lp.values[j];
        let mut down = Node {
            bound: lp.objective.clone(),
            seq: next_seq(),
            depth: node.depth + 1,
            lower: node.lower.clone(),
            upper: node.upper.clone(),
        };
        down.upper[j] = Some(v.floor());
        let mut up = Node {
            bound: lp.objective,
            seq: next_seq(),
            depth: node.depth + 1,
            lower: node.lower.clone(),
            upper: node.upper.clone(),
        };
        up.lower[j] = Some(v.ceil());
        NodeOutcome::Branch(down, up)
    }

    fn branching_column(&self, values: &[T]) -> Option<usize> {
        let fractional = self
            .model
            .columns
            .iter()
            .enumerate()
            .filter(|(j, c)| c.kind.is_integer() && !values[*j].is_integral(&self.tol));
        match self.params.branching {
            BranchingRule::LowestIndex => fractional.map(|(j, _)| j).next(),
            BranchingRule::MostFractional => {
                let half = T::from_ratio(1, 2);
                let mut best: Option<(usize, T)> = None;
                for (j, _) in fractional {
                    let frac = values[j].clone() - values[j].floor();
                    let dist = (frac - half.clone()).abs();
                    if best.as_ref().is_none_or(|(_, d)| dist < *d) {
                        best = Some((j, dist));
                    }
                }
                best.map(|(j, _)| j)
            }
        }
    }
}

/// Branch-and-bound on LP relaxations. Deterministic for a fixed
/// `params` with `threads == 1`; with more threads the objective is the same
/// but the incumbent may be a different optimum.
pub fn solve_milp<T: Scalar>(model: &MilpModel<T>, params: &SolverParams) -> Result<MilpResult<T>, ModelError> {
    if model.columns.is_empty() {
        return Err(ModelError::Empty);
    }
    model.validate()?;
    let start = Instant::now();
    let tol = if T::EXACT { T::zero() } else { T::from_f64(params.integrality_tolerance.max(1e-9)).unwrap() };
    let search = Search { model, params, tol };

    // The root is solved up front so that an unbounded relaxation can be
    // reported as such rather than as an empty search.
    let lower: Vec<_> = model.columns.iter().map(|c| c.lower.clone()).collect();
    let upper: Vec<_> = model.columns.iter().map(|c| c.upper.clone()).collect();
    let root_lp = solve_with_bounds(model, &lower, &upper);
    match root_lp.status {
        LpStatus::Infeasible => {
            return Ok(finish(MilpStatus::Infeasible, None, None, 1, start));
        }
        LpStatus::Unbounded => {
            return Ok(finish(MilpStatus::Unbounded, None, None, 1, start));
        }
        LpStatus::Optimal => {}
    }
    let root = Node { bound: root_lp.objective, seq: 0, depth: 0, lower, upper };
    if params.threads <= 1 {
        Ok(serial(&search, root, start))
    } else {
        Ok(parallel(&search, root, start))
    }
}

fn finish<T: Scalar>(
    status: MilpStatus,
    incumbent: Option<(T, Vec<T>)>,
    open_bound: Option<T>,
    nodes: u64,
    start: Instant,
) -> MilpResult<T> {
    let (objective, values) = match incumbent {
        Some((o, v)) => (Some(o), v),
        None => (None, Vec::new()),
    };
    let best_bound = match status {
        MilpStatus::Optimal => objective.clone(),
        _ => match (open_bound, &objective) {
            (Some(b), Some(o)) => Some(if b < *o { b } else { o.clone() }),
            (b, _) => b,
        },
    };
    MilpResult { status, values, objective, best_bound, nodes, wall_time: start.elapsed() }
}

fn limit_hit(params: &SolverParams, nodes: u64, start: Instant) -> bool {
    params.node_limit.is_some_and(|n| nodes >= n) || params.time_limit.is_some_and(|t| start.elapsed() >= t)
}

fn serial<T: Scalar>(search: &Search<'_, T>, root: Node<T>, start: Instant) -> MilpResult<T> {
    let selection = search.params.node_selection;
    let mut heap = BinaryHeap::new();
    heap.push(Keyed { node: root, selection });
    let mut seq = 0u64;
    let mut next_seq = || {
        seq += 1;
        seq
    };
    let mut incumbent: Option<(T, Vec<T>)> = None;
    let mut nodes = 0u64;

    while let Some(Keyed { node, .. }) = heap.pop() {
        if limit_hit(search.params, nodes, start) {
            let open = heap.iter().map(|k| k.node.bound.clone()).chain(std::iter::once(node.bound.clone()));
            let bound = open.reduce(|a, b| if b < a { b } else { a });
            let status = if incumbent.is_some() { MilpStatus::Feasible } else { MilpStatus::LimitReached };
            return finish(status, incumbent, bound, nodes, start);
        }
        nodes += 1;
        match search.process(&node, incumbent.as_ref().map(|i| &i.0), &mut next_seq) {
            NodeOutcome::Pruned => {}
            NodeOutcome::Integral { objective, values } => {
                if incumbent.as_ref().is_none_or(|(o, _)| objective < *o) {
                    incumbent = Some((objective, values));
                }
            }
            NodeOutcome::Branch(down, up) => {
                // Depth-first explores the most recently pushed node first.
                if selection == NodeSelection::DepthFirst {
                    heap.push(Keyed { node: up, selection });
                    heap.push(Keyed { node: down, selection });
                } else {
                    heap.push(Keyed { node: down, selection });
                    heap.push(Keyed { node: up, selection });
                }
            }
        }
    }
    let status = if incumbent.is_some() { MilpStatus::Optimal } else { MilpStatus::Infeasible };
    finish(status, incumbent, None, nodes, start)
}

struct Shared<T> {
    heap: BinaryHeap<Keyed<T>>,
    incumbent: Option<(T, Vec<T>)>,
    active: usize,
    nodes: u64,
    seq: u64,
    stopped: bool,
}

fn parallel<T: Scalar>(search: &Search<'_, T>, root: Node<T>, start: Instant) -> MilpResult<T> {
    let selection = search.params.node_selection;
    let mut heap = BinaryHeap::new();
    heap.push(Keyed { node: root, selection });
    let shared = Mutex::new(Shared { heap, incumbent: None, active: 0, nodes: 0, seq: 0, stopped: false });
    let wake = Condvar::new();

    std::thread::scope(|scope| {
        for _ in 0..search.params.threads {
            scope.spawn(|| loop {
                let (node, cutoff) = {
                    let mut guard = shared.lock().unwrap();
                    loop {
                        if guard.stopped {
                            return;
                        }
                        if !guard.heap.is_empty() {
                            break;
                        }
                        if guard.active == 0 {
                            wake.notify_all();
                            return;
                        }
                        guard = wake.wait(guard).unwrap();
                    }
                    if limit_hit(search.params, guard.nodes, start) {
                        guard.stopped = true;
                        wake.notify_all();
                        return;
                    }
                    let node = guard.heap.pop().unwrap().node;
                    guard.active += 1;
                    guard.nodes += 1;
                    (node, guard.incumbent.as_ref().map(|i| i.0.clone()))
                };
                // Sequence numbers only order ties, so reserve two per node.
                let base = {
                    let mut guard = shared.lock().unwrap();
                    guard.seq += 2;
                    guard.seq
                };
                let mut k = 0;
                let mut next_seq = || {
                    k += 1;
                    base - 2 + k
                };
                let outcome = search.process(&node, cutoff.as_ref(), &mut next_seq);
                let mut guard = shared.lock().unwrap();
                match outcome {
                    NodeOutcome::Pruned => {}
                    NodeOutcome::Integral { objective, values } => {
                        if guard.incumbent.as_ref().is_none_or(|(o, _)| objective < *o) {
                            guard.incumbent = Some((objective, values));
                        }
                    }
                    NodeOutcome::Branch(down, up) => {
                        guard.heap.push(Keyed { node: down, selection });
                        guard.heap.push(Keyed { node: up, selection });
                    }
                }
                guard.active -= 1;
                wake.notify_all();
            });
        }
    });

    let shared = shared.into_inner().unwrap();
    if shared.stopped {
        let bound = shared.heap.iter().map(|k| k.node.bound.clone()).reduce(|a, b| if b < a { b } else { a });
        let status = if shared.incumbent.is_some() { MilpStatus::Feasible } else { MilpStatus::LimitReached };
        return finish(status, shared.incumbent, bound, shared.nodes, start);
    }
    let status = if shared.incumbent.is_some() { MilpStatus::Optimal } else { MilpStatus::Infeasible };
    finish(status, shared.incumbent, None, shared.nodes, start)
}
