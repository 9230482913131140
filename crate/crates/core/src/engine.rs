//! Constraint-refinement search over overestimated ReLU nodes.
//!
//! The verification loop per task: propagate relaxed symbolic bounds under
//! the task's forced sign decisions, build one violation system per disjunct
//! of the negated property, and discharge each with the LP solver. A task
//! whose systems are all infeasible is safe. A satisfiable system yields a
//! candidate input; if the network concretely violates the property there,
//! verification ends with that witness. Otherwise the highest-priority
//! overestimated node (gradient magnitude times its maximum relaxation
//! error) is split into a forced-inactive and a forced-active child, each
//! carrying the matching sign constraint on the node's pre-activation
//! bounds, and the search recurses depth-first across a work-stealing pool.
//!
//! Brightness and contrast regions run the same check loop but refine by
//! bisecting their single scalar variable instead of splitting nodes.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::debug;

use crate::error::{Error, Result};
use crate::interval::{ConcreteInterval, InputBox, LinearExpression};
use crate::lp::{solve, Constraint, LinearProgram, LpOutcome, Relation, Sense};
use crate::network::{Network, NodeId};
use crate::propagate::{
    interval_gradient, max_relaxation_gap, slr_forward, ForcedMap, PropagationTrace,
};
use crate::property::{
    build_violation_systems, region_to_box, InputRegion, LpRow, OutputProperty, RegionEncoding,
    ViolationSystem,
};

/// Slack added when interpreting an optimal check value as satisfiable.
/// Leans toward "satisfiable", which costs refinement work, never soundness.
const CHECK_SLACK: f64 = 1e-9;

/// Narrowest scalar interval the brightness/contrast loop will bisect.
const MIN_SCALAR_WIDTH: f64 = 1e-12;

/// Default depth cap for scalar bisection, where the ReLU count is not a
/// meaningful budget.
const DEFAULT_SCALAR_DEPTH: usize = 24;

/// Engine configuration.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Wall-clock budget for one verification run.
    pub timeout: Duration,
    /// Split-depth cap. Defaults to the network's total ReLU count for node
    /// refinement and to 24 for scalar bisection.
    pub max_depth: Option<usize>,
    pub workers: usize,
    /// Completed-task cadence at which a busy worker donates queue entries
    /// to idle peers; idle workers also steal half of the longest queue on
    /// demand.
    pub rebalance_interval: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(3600),
            max_depth: None,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            rebalance_interval: 16,
        }
    }
}

/// Final answer of a verification run.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Safe,
    Violated { witness: Vec<f64>, outputs: Vec<f64> },
    /// The search was cut off (wall clock or depth) before a proof or a
    /// validated counterexample emerged.
    Timeout,
    SolverFailure,
}

/// Search statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub lp_calls: u64,
    pub tasks_explored: u64,
    pub max_depth: u64,
    pub avg_depth: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct VerdictReport {
    pub verdict: Verdict,
    pub stats: RunStats,
}

/// A node in the refinement search tree.
#[derive(Debug, Clone)]
pub struct RefinementTask {
    /// Sign decisions accumulated along this branch (`true` = active).
    pub forced: ForcedMap,
    pub depth: usize,
    /// Pre-activation sign rows added by each ancestor split.
    pub split_rows: Vec<LpRow>,
    /// Sub-interval of the scalar variable for brightness/contrast tasks.
    pub scalar: Option<(f64, f64)>,
}

impl RefinementTask {
    fn root(scalar: Option<(f64, f64)>) -> Self {
        Self {
            forced: ForcedMap::new(),
            depth: 0,
            split_rows: Vec::new(),
            scalar,
        }
    }
}

struct SearchCtx<'a> {
    net: &'a Network,
    region: &'a InputRegion,
    prop: &'a OutputProperty,
    enc: &'a RegionEncoding,
    max_depth: usize,
    deadline: Instant,
    cancel: AtomicBool,
    violated: Mutex<Option<(Vec<f64>, Vec<f64>)>>,
    solver_failed: AtomicBool,
    unresolved: AtomicBool,
    timed_out: AtomicBool,
    hard_error: Mutex<Option<Error>>,
    lp_calls: AtomicU64,
    tasks_explored: AtomicU64,
    depth_sum: AtomicU64,
    depth_max: AtomicU64,
}

impl SearchCtx<'_> {
    fn should_stop(&self) -> bool {
        if self.cancel.load(Ordering::Relaxed) {
            return true;
        }
        if Instant::now() >= self.deadline {
            self.timed_out.store(true, Ordering::Relaxed);
            self.cancel.store(true, Ordering::Relaxed);
            return true;
        }
        false
    }

    fn record_violation(&self, witness: Vec<f64>, outputs: Vec<f64>) {
        let mut slot = self.violated.lock().unwrap();
        if slot.is_none() {
            *slot = Some((witness, outputs));
        }
        self.cancel.store(true, Ordering::Relaxed);
    }

    fn record_error(&self, err: Error) {
        let mut slot = self.hard_error.lock().unwrap();
        if slot.is_none() {
            *slot = Some(err);
        }
        self.cancel.store(true, Ordering::Relaxed);
    }
}

/// Check a safety property, returning a proof verdict or a concretely
/// validated counterexample.
pub fn verify(
    net: &Network,
    region: &InputRegion,
    prop: &OutputProperty,
    cfg: &EngineConfig,
) -> Result<VerdictReport> {
    let started = Instant::now();
    if region.dim() != net.input_dim {
        return Err(Error::DimensionMismatch {
            context: "region",
            expected: net.input_dim,
            actual: region.dim(),
        });
    }
    prop.validate(net.output_dim())?;
    let enc = region_to_box(region)?;

    let scalar_mode = matches!(
        region,
        InputRegion::Brightness { .. } | InputRegion::Contrast { .. }
    );
    let max_depth = cfg.max_depth.unwrap_or(if scalar_mode {
        DEFAULT_SCALAR_DEPTH
    } else {
        net.relu_count()
    });

    let ctx = SearchCtx {
        net,
        region,
        prop,
        enc: &enc,
        max_depth,
        deadline: started + cfg.timeout,
        cancel: AtomicBool::new(false),
        violated: Mutex::new(None),
        solver_failed: AtomicBool::new(false),
        unresolved: AtomicBool::new(false),
        timed_out: AtomicBool::new(false),
        hard_error: Mutex::new(None),
        lp_calls: AtomicU64::new(0),
        tasks_explored: AtomicU64::new(0),
        depth_sum: AtomicU64::new(0),
        depth_max: AtomicU64::new(0),
    };

    let root_scalar = match region {
        InputRegion::Brightness { eps, .. } => Some((-eps, *eps)),
        InputRegion::Contrast {
            lo_scale, hi_scale, ..
        } => Some((*lo_scale, *hi_scale)),
        _ => None,
    };
    run_search(
        &ctx,
        vec![RefinementTask::root(root_scalar)],
        cfg.workers.max(1),
        cfg.rebalance_interval.max(1),
    );

    if let Some(err) = ctx.hard_error.lock().unwrap().take() {
        return Err(err);
    }

    let tasks = ctx.tasks_explored.load(Ordering::Relaxed);
    let stats = RunStats {
        lp_calls: ctx.lp_calls.load(Ordering::Relaxed),
        tasks_explored: tasks,
        max_depth: ctx.depth_max.load(Ordering::Relaxed),
        avg_depth: if tasks == 0 {
            0.0
        } else {
            ctx.depth_sum.load(Ordering::Relaxed) as f64 / tasks as f64
        },
        wall_time: started.elapsed().as_secs_f64(),
    };

    // Aggregation order: a validated violation dominates, then solver
    // failures, then any form of incompleteness, then safety.
    let verdict = if let Some((witness, outputs)) = ctx.violated.lock().unwrap().take() {
        Verdict::Violated { witness, outputs }
    } else if ctx.solver_failed.load(Ordering::Relaxed) {
        Verdict::SolverFailure
    } else if ctx.timed_out.load(Ordering::Relaxed) || ctx.unresolved.load(Ordering::Relaxed) {
        Verdict::Timeout
    } else {
        Verdict::Safe
    };
    Ok(VerdictReport { verdict, stats })
}

/// True iff `witness` lies in the original region definition (tolerance
/// 1e-7) and the network's exact execution on it violates the property.
pub fn validate_counterexample(
    net: &Network,
    region: &InputRegion,
    prop: &OutputProperty,
    witness: &[f64],
) -> bool {
    if witness.len() != net.input_dim {
        return false;
    }
    if !region.contains(witness, 1e-7) {
        return false;
    }
    match net.forward(witness) {
        Ok(outputs) => prop.violated_by(&outputs),
        Err(_) => false,
    }
}

// --- search machinery ------------------------------------------------------

fn run_search(ctx: &SearchCtx<'_>, roots: Vec<RefinementTask>, workers: usize, rebalance: usize) {
    let queues: Vec<Mutex<VecDeque<RefinementTask>>> =
        (0..workers).map(|_| Mutex::new(VecDeque::new())).collect();
    let pending = AtomicU64::new(roots.len() as u64);
    for (i, task) in roots.into_iter().enumerate() {
        queues[i % workers].lock().unwrap().push_back(task);
    }

    std::thread::scope(|scope| {
        for w in 0..workers {
            let queues = &queues;
            let pending = &pending;
            scope.spawn(move || worker_loop(ctx, queues, w, pending, rebalance));
        }
    });
}

fn worker_loop(
    ctx: &SearchCtx<'_>,
    queues: &[Mutex<VecDeque<RefinementTask>>],
    me: usize,
    pending: &AtomicU64,
    rebalance: usize,
) {
    let mut completed = 0usize;
    loop {
        if ctx.should_stop() {
            return;
        }
        let task = queues[me].lock().unwrap().pop_back();
        let task = match task {
            Some(t) => Some(t),
            None => steal_half(queues, me),
        };
        match task {
            Some(task) => {
                let children = match process_task(ctx, &task) {
                    Ok(children) => children,
                    Err(err) => {
                        ctx.record_error(err);
                        return;
                    }
                };
                let n = children.len() as u64;
                if n > 0 {
                    let mut q = queues[me].lock().unwrap();
                    // Depth-first: the first child is pushed last so it pops
                    // next (forced-inactive before forced-active).
                    for child in children.into_iter().rev() {
                        q.push_back(child);
                    }
                }
                // One task finished, n created.
                if n > 0 {
                    pending.fetch_add(n, Ordering::AcqRel);
                }
                pending.fetch_sub(1, Ordering::AcqRel);
                completed += 1;
                if completed.is_multiple_of(rebalance) {
                    donate_to_idle(queues, me);
                }
            }
            None => {
                if pending.load(Ordering::Acquire) == 0 {
                    return;
                }
                std::thread::yield_now();
                std::thread::sleep(Duration::from_micros(50));
            }
        }
    }
}

/// Steal half of the longest peer queue (from the front, where the
/// shallowest and therefore largest subtrees live).
fn steal_half(
    queues: &[Mutex<VecDeque<RefinementTask>>],
    me: usize,
) -> Option<RefinementTask> {
    let mut victim = None;
    let mut longest = 0usize;
    for (i, q) in queues.iter().enumerate() {
        if i == me {
            continue;
        }
        let len = q.lock().unwrap().len();
        if len > longest {
            longest = len;
            victim = Some(i);
        }
    }
    let victim = victim?;
    let mut grabbed = Vec::new();
    {
        let mut vq = queues[victim].lock().unwrap();
        let take = vq.len().div_ceil(2);
        for _ in 0..take {
            if let Some(t) = vq.pop_front() {
                grabbed.push(t);
            }
        }
    }
    if grabbed.is_empty() {
        return None;
    }
    let first = grabbed.remove(0);
    if !grabbed.is_empty() {
        let mut q = queues[me].lock().unwrap();
        for t in grabbed {
            q.push_back(t);
        }
    }
    Some(first)
}

/// Periodic rebalance: hand half of this queue to an idle peer.
fn donate_to_idle(queues: &[Mutex<VecDeque<RefinementTask>>], me: usize) {
    let idle = queues
        .iter()
        .enumerate()
        .find(|(i, q)| *i != me && q.lock().unwrap().is_empty())
        .map(|(i, _)| i);
    let Some(idle) = idle else { return };
    let mut moved = Vec::new();
    {
        let mut q = queues[me].lock().unwrap();
        if q.len() < 2 {
            return;
        }
        let take = q.len() / 2;
        for _ in 0..take {
            if let Some(t) = q.pop_front() {
                moved.push(t);
            }
        }
    }
    let mut target = queues[idle].lock().unwrap();
    for t in moved {
        target.push_back(t);
    }
}

/// Propagation box and auxiliary bounds for a task, narrowing the scalar
/// variable for brightness/contrast sub-intervals.
fn task_geometry(ctx: &SearchCtx<'_>, task: &RefinementTask) -> Result<(InputBox, Vec<(f64, f64)>)> {
    match (task.scalar, ctx.region) {
        (Some((a, b)), InputRegion::Brightness { center, .. }) => {
            let lo = center.iter().map(|c| c + a).collect();
            let hi = center.iter().map(|c| c + b).collect();
            Ok((InputBox::new(lo, hi)?, vec![(a, b)]))
        }
        (Some((a, b)), InputRegion::Contrast { center, .. }) => {
            let lo = center.iter().map(|c| (a * c).min(b * c)).collect();
            let hi = center.iter().map(|c| (a * c).max(b * c)).collect();
            Ok((InputBox::new(lo, hi)?, vec![(a, b)]))
        }
        _ => Ok((ctx.enc.box_.clone(), ctx.enc.aux_bounds.clone())),
    }
}

fn lp_constraints(rows: &[LpRow]) -> Vec<Constraint> {
    rows.iter()
        .map(|r| Constraint {
            expr: r.expr.clone(),
            relation: r.relation,
            rhs: r.rhs,
        })
        .collect()
}

/// Sign rows for every forced node, rebuilt from the current trace. On the
/// branch where a node is pinned active its true pre-activation satisfies
/// `eq_up >= 0`; pinned inactive, `eq_low <= 0`. These tighten the branch
/// polytope beyond the rows captured at split time.
fn forced_sign_rows(
    trace: &PropagationTrace,
    forced: &ForcedMap,
    num_vars: usize,
) -> Vec<LpRow> {
    let mut rows = Vec::with_capacity(forced.len());
    for (&id, &active) in forced {
        let Some(node) = trace.node(id) else { continue };
        if active {
            rows.push(LpRow {
                expr: node.pre.eq_up.padded(num_vars),
                relation: Relation::Ge,
                rhs: 0.0,
            });
        } else {
            rows.push(LpRow {
                expr: node.pre.eq_low.padded(num_vars),
                relation: Relation::Le,
                rhs: 0.0,
            });
        }
    }
    rows
}

enum SystemStatus {
    Infeasible,
    Satisfiable { witness: Vec<f64> },
}

/// Discharge one violation system: optimize the check row over the task
/// polytope and compare against the threshold. The optimizer doubles as the
/// deepest-violation candidate.
fn check_system(
    ctx: &SearchCtx<'_>,
    system: &ViolationSystem,
    constraints: &[Constraint],
    bounds: &[(f64, f64)],
) -> Result<SystemStatus> {
    let lp = LinearProgram {
        sense: system.sense,
        objective: system.check.expr.clone(),
        constraints: constraints.to_vec(),
        bounds: bounds.to_vec(),
    };
    ctx.lp_calls.fetch_add(1, Ordering::Relaxed);
    match solve(&lp) {
        Ok(LpOutcome::Optimal { solution, value }) => {
            if system.satisfied_by(value, CHECK_SLACK) {
                Ok(SystemStatus::Satisfiable { witness: solution })
            } else {
                Ok(SystemStatus::Infeasible)
            }
        }
        Ok(LpOutcome::Infeasible) => Ok(SystemStatus::Infeasible),
        Ok(LpOutcome::Unbounded) => {
            // Bounded boxes rule this out; treat as a solver failure.
            ctx.solver_failed.store(true, Ordering::Relaxed);
            Ok(SystemStatus::Infeasible)
        }
        Err(failure) => {
            debug!("lp failure: {failure}");
            ctx.solver_failed.store(true, Ordering::Relaxed);
            Ok(SystemStatus::Infeasible)
        }
    }
}

/// Pick the overestimated node with the largest gradient-times-error score.
/// Ties resolve to the smallest `(layer, index)`.
fn pick_split_node(
    ctx: &SearchCtx<'_>,
    trace: &PropagationTrace,
    gradient_row: &[f64],
) -> Result<Option<NodeId>> {
    if trace.overestimated.is_empty() {
        return Ok(None);
    }
    let grads = interval_gradient(ctx.net, trace, gradient_row)?;
    let mut best: Option<(f64, NodeId)> = None;
    for &id in &trace.overestimated {
        let node = trace.node(id).expect("overestimated node is traced");
        let hull = node.pre.hull();
        let gap = max_relaxation_gap(hull.lo, hull.hi);
        let magnitude = grads
            .iter()
            .find(|(gid, _)| *gid == id)
            .map_or(0.0, |(_, g)| g.magnitude());
        let score = magnitude * gap;
        let better = match best {
            None => true,
            Some((bs, _)) => score > bs,
        };
        if better {
            best = Some((score, id));
        }
    }
    Ok(best.map(|(_, id)| id))
}

/// Process one task. Returns the child tasks (empty for resolved leaves).
fn process_task(ctx: &SearchCtx<'_>, task: &RefinementTask) -> Result<Vec<RefinementTask>> {
    if ctx.should_stop() {
        return Ok(Vec::new());
    }
    ctx.tasks_explored.fetch_add(1, Ordering::Relaxed);
    ctx.depth_sum.fetch_add(task.depth as u64, Ordering::Relaxed);
    ctx.depth_max.fetch_max(task.depth as u64, Ordering::Relaxed);

    let (box_, aux_bounds) = task_geometry(ctx, task)?;
    let trace = slr_forward(ctx.net, &box_, &task.forced)?;
    let num_vars = box_.dim() + aux_bounds.len();
    let systems = build_violation_systems(ctx.prop, &trace, num_vars)?;

    let mut rows = ctx.enc.rows.clone();
    rows.extend(task.split_rows.iter().cloned());
    rows.extend(forced_sign_rows(&trace, &task.forced, num_vars));
    let constraints = lp_constraints(&rows);
    let mut bounds: Vec<(f64, f64)> = box_
        .lo
        .iter()
        .zip(box_.hi.iter())
        .map(|(&l, &h)| (l, h))
        .collect();
    bounds.extend_from_slice(&aux_bounds);

    let mut first_feasible: Option<usize> = None;
    for (i, system) in systems.iter().enumerate() {
        if ctx.should_stop() {
            return Ok(Vec::new());
        }
        match check_system(ctx, system, &constraints, &bounds)? {
            SystemStatus::Infeasible => {}
            SystemStatus::Satisfiable { witness } => {
                let input = witness[..ctx.net.input_dim].to_vec();
                if validate_counterexample(ctx.net, ctx.region, ctx.prop, &input) {
                    let outputs = ctx.net.forward(&input)?;
                    debug!(
                        "task depth {} found violation via {}",
                        task.depth, system.label
                    );
                    ctx.record_violation(input, outputs);
                    return Ok(Vec::new());
                }
                if first_feasible.is_none() {
                    first_feasible = Some(i);
                }
            }
        }
    }

    let Some(sys_idx) = first_feasible else {
        debug!("task depth {} safe ({} systems)", task.depth, systems.len());
        return Ok(Vec::new());
    };

    // A satisfiable system with a spurious witness: refine.
    if task.scalar.is_some() {
        return Ok(split_scalar(ctx, task));
    }
    if task.depth >= ctx.max_depth {
        ctx.unresolved.store(true, Ordering::Relaxed);
        return Ok(Vec::new());
    }
    let node = pick_split_node(ctx, &trace, &systems[sys_idx].gradient_row)?;
    let Some(node) = node else {
        // No overestimated node left, yet a system stayed satisfiable with a
        // spurious witness: the branch polytope is still an over-approximation.
        ctx.unresolved.store(true, Ordering::Relaxed);
        return Ok(Vec::new());
    };
    debug!(
        "task depth {} splits node {} ({} overestimated)",
        task.depth,
        node,
        trace.overestimated.len()
    );
    Ok(split_node(task, &trace, node, num_vars))
}

fn split_scalar(ctx: &SearchCtx<'_>, task: &RefinementTask) -> Vec<RefinementTask> {
    let (a, b) = task.scalar.expect("scalar task");
    if task.depth >= ctx.max_depth || b - a <= MIN_SCALAR_WIDTH {
        ctx.unresolved.store(true, Ordering::Relaxed);
        return Vec::new();
    }
    let mid = a + (b - a) / 2.0;
    let mut low = task.clone();
    low.depth += 1;
    low.scalar = Some((a, mid));
    let mut high = task.clone();
    high.depth += 1;
    high.scalar = Some((mid, b));
    vec![low, high]
}

/// Two children pinning `node` inactive and active. The split row uses the
/// node's pre-split bounds: `eq_low <= 0` over-approximates the inactive
/// cell, `eq_up >= 0` the active cell, so both branches stay
/// over-approximations of their true sets.
fn split_node(
    task: &RefinementTask,
    trace: &PropagationTrace,
    node: NodeId,
    num_vars: usize,
) -> Vec<RefinementTask> {
    let pre = &trace.node(node).expect("split node is traced").pre;
    let mut inactive = task.clone();
    inactive.depth += 1;
    inactive.forced.insert(node, false);
    inactive.split_rows.push(LpRow {
        expr: pre.eq_low.padded(num_vars),
        relation: Relation::Le,
        rhs: 0.0,
    });
    let mut active = task.clone();
    active.depth += 1;
    active.forced.insert(node, true);
    active.split_rows.push(LpRow {
        expr: pre.eq_up.padded(num_vars),
        relation: Relation::Ge,
        rhs: 0.0,
    });
    // Task invariants: depth tracks the forced-decision count and each split
    // contributes exactly one row consistent with its decision.
    debug_assert_eq!(inactive.depth, inactive.forced.len());
    debug_assert_eq!(active.depth, active.forced.len());
    debug_assert_eq!(active.split_rows.len(), active.depth);
    vec![inactive, active]
}

// --- refined output ranges --------------------------------------------------

/// Immediate bounds of one split: the parent's LP output bounds and each
/// child's (absent when the child polytope is infeasible).
#[derive(Debug, Clone)]
pub struct SplitRecord {
    pub node: NodeId,
    pub parent: Vec<ConcreteInterval>,
    pub children: [Option<Vec<ConcreteInterval>>; 2],
}

/// Refined output range: split every overestimated node (earliest layer
/// first, re-propagating each branch) and return the elementwise hull of the
/// leaf ranges. With all nodes split the result equals the exact reachable
/// range up to LP tolerance. Child ranges are clipped to their parent's,
/// and the walk is sequential; `cfg` contributes only the depth cap.
pub fn refine_output_range(
    net: &Network,
    box_: &InputBox,
    cfg: &EngineConfig,
) -> Result<Vec<ConcreteInterval>> {
    refine_output_range_recorded(net, box_, cfg).map(|(r, _)| r)
}

/// As [`refine_output_range`], also returning the per-split bound records.
pub fn refine_output_range_recorded(
    net: &Network,
    box_: &InputBox,
    cfg: &EngineConfig,
) -> Result<(Vec<ConcreteInterval>, Vec<SplitRecord>)> {
    if box_.dim() != net.input_dim {
        return Err(Error::DimensionMismatch {
            context: "refinement box",
            expected: net.input_dim,
            actual: box_.dim(),
        });
    }
    let cap = cfg.max_depth.unwrap_or(net.relu_count());
    let mut records = Vec::new();
    let outcome = refine_rec(
        net,
        box_,
        &ForcedMap::new(),
        &[],
        None,
        0,
        cap,
        &mut records,
    )?;
    match outcome {
        Some(node) => Ok((node.leaf_union, records)),
        None => Err(Error::InvalidNetwork(
            "refinement box is empty".to_string(),
        )),
    }
}

struct RefineNode {
    bounds_here: Vec<ConcreteInterval>,
    leaf_union: Vec<ConcreteInterval>,
}

#[allow(clippy::too_many_arguments)]
fn refine_rec(
    net: &Network,
    box_: &InputBox,
    forced: &ForcedMap,
    rows: &[LpRow],
    parent_bounds: Option<&Vec<ConcreteInterval>>,
    depth: usize,
    cap: usize,
    records: &mut Vec<SplitRecord>,
) -> Result<Option<RefineNode>> {
    let trace = slr_forward(net, box_, forced)?;
    let num_vars = box_.dim();
    let mut all_rows = rows.to_vec();
    all_rows.extend(forced_sign_rows(&trace, forced, num_vars));
    let constraints = lp_constraints(&all_rows);
    let bounds: Vec<(f64, f64)> = box_
        .lo
        .iter()
        .zip(box_.hi.iter())
        .map(|(&l, &h)| (l, h))
        .collect();

    let Some(mut bounds_here) = lp_output_bounds(&trace, &constraints, &bounds)? else {
        return Ok(None);
    };
    // Monotone tightening: a bound valid for the parent region is valid for
    // any subset, so child ranges never widen past their parent's.
    if let Some(parent) = parent_bounds {
        for (b, p) in bounds_here.iter_mut().zip(parent.iter()) {
            let lo = b.lo.max(p.lo);
            let hi = b.hi.min(p.hi);
            if lo <= hi {
                *b = ConcreteInterval { lo, hi };
            } else {
                let mid = lo + (hi - lo) / 2.0;
                *b = ConcreteInterval { lo: mid, hi: mid };
            }
        }
    }

    // Earliest overestimated node first: upstream nodes are already pinned,
    // so its pre-activation equations are exact and so are the split rows.
    let split = trace
        .overestimated
        .first()
        .copied()
        .filter(|_| depth < cap);
    let Some(node) = split else {
        return Ok(Some(RefineNode {
            leaf_union: bounds_here.clone(),
            bounds_here,
        }));
    };

    let pre = &trace.node(node).expect("traced").pre;
    let mut children_bounds: [Option<Vec<ConcreteInterval>>; 2] = [None, None];
    let mut union: Option<Vec<ConcreteInterval>> = None;
    for (slot, active) in [(0usize, false), (1usize, true)] {
        let mut child_forced = forced.clone();
        child_forced.insert(node, active);
        let mut child_rows = rows.to_vec();
        child_rows.push(LpRow {
            expr: if active {
                pre.eq_up.padded(num_vars)
            } else {
                pre.eq_low.padded(num_vars)
            },
            relation: if active { Relation::Ge } else { Relation::Le },
            rhs: 0.0,
        });
        if let Some(child) = refine_rec(
            net,
            box_,
            &child_forced,
            &child_rows,
            Some(&bounds_here),
            depth + 1,
            cap,
            records,
        )? {
            children_bounds[slot] = Some(child.bounds_here.clone());
            union = Some(match union {
                None => child.leaf_union,
                Some(prev) => prev
                    .iter()
                    .zip(child.leaf_union.iter())
                    .map(|(a, b)| a.hull(b))
                    .collect(),
            });
        }
    }
    records.push(SplitRecord {
        node,
        parent: bounds_here.clone(),
        children: children_bounds,
    });
    let leaf_union = union.unwrap_or_else(|| bounds_here.clone());
    Ok(Some(RefineNode {
        bounds_here,
        leaf_union,
    }))
}

/// Per-output `[min eq_low, max eq_up]` over the polytope, or `None` when it
/// is empty.
fn lp_output_bounds(
    trace: &PropagationTrace,
    constraints: &[Constraint],
    bounds: &[(f64, f64)],
) -> Result<Option<Vec<ConcreteInterval>>> {
    let mut out = Vec::with_capacity(trace.output.len());
    for pair in &trace.output {
        let lo = match solve(&LinearProgram {
            sense: Sense::Minimize,
            objective: pad_to(&pair.eq_low, bounds.len()),
            constraints: constraints.to_vec(),
            bounds: bounds.to_vec(),
        })
        .map_err(Error::Lp)?
        {
            LpOutcome::Optimal { value, .. } => value,
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Unbounded => {
                return Err(Error::InvalidNetwork("unbounded refinement".into()))
            }
        };
        let hi = match solve(&LinearProgram {
            sense: Sense::Maximize,
            objective: pad_to(&pair.eq_up, bounds.len()),
            constraints: constraints.to_vec(),
            bounds: bounds.to_vec(),
        })
        .map_err(Error::Lp)?
        {
            LpOutcome::Optimal { value, .. } => value,
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Unbounded => {
                return Err(Error::InvalidNetwork("unbounded refinement".into()))
            }
        };
        out.push(ConcreteInterval {
            lo: lo.min(hi),
            hi: hi.max(lo),
        });
    }
    Ok(Some(out))
}

fn pad_to(expr: &LinearExpression, n: usize) -> LinearExpression {
    if expr.dim() == n {
        expr.clone()
    } else {
        expr.padded(n)
    }
}
