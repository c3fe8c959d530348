"""Primal-dual state machines for the gossip optimizers.

Three variants share a two-time-scale loop: a fast randomized Gauss-Seidel
sweep minimizes the augmented Lagrangian block by block (one block per slot
event), and a slow synchronous multiplier step moves the duals by the penalty
times the observed constraint violation. The pairwise variant keeps a link
variable per directed arc plus two dual vectors per arc; the multi-neighbor
variant shares that state but broadcasts all link variables of a node at
once; the broadcast variant (reliable links only) keeps a single aggregated
dual per node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, KindError, NumericError
from .events import (ClockModel, Event, EventDistribution, EventKind, Variant,
                     event_distribution, sample_event, sample_mg_event)
from .graph import Arc, FailureModel, Supergraph
from .metrics import MetricsLog, MetricsRow
from .problem import ProblemInstance, err_f
from .subsolve import XSubproblem, solve_bg_block, solve_x_block, \
    y_closed_form_peredge


def _sign(owner: int, partner: int) -> int:
    """Orientation sign of a link term, from the total order on node ids:
    + for the smaller id (any fixed assignment of signs per edge works)."""
    return 1 if partner > owner else -1


def consensus_spread(x: np.ndarray) -> float:
    """Largest node distance to the across-node mean."""
    x = np.atleast_2d(x)
    center = x.mean(axis=0)
    return float(np.max(np.linalg.norm(x - center, axis=1)))


def default_inner_events(graph: Supergraph) -> int:
    """Default fast-scale budget per outer slot: ten expected visits per
    block (nodes plus arcs)."""
    return 10 * (graph.n + graph.num_arcs)


# --------------------------------------------------------------------------
# Penalty schedules
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PenaltySchedule:
    """Rule producing the penalty sequence across outer slots.

    Kinds: ``fixed`` (constant), ``power`` (``t**exponent + offset``),
    ``geometric`` (``coeff * base**t + offset``), and ``adaptive`` (per-dual
    penalties driven by constraint-violation progress). Every kind yields a
    positive, nondecreasing sequence.
    """

    kind: str
    params: tuple[float, ...]

    @classmethod
    def fixed(cls, rho: float) -> "PenaltySchedule":
        if rho <= 0:
            raise DomainError(f"fixed penalty must be positive, got {rho}")
        return cls("fixed", (float(rho),))

    @classmethod
    def power(cls, exponent: float, offset: float) -> "PenaltySchedule":
        if exponent < 0:
            raise DomainError("power exponent must be nonnegative")
        if offset <= 0:
            raise DomainError("power offset must be positive")
        return cls("power", (float(exponent), float(offset)))

    @classmethod
    def geometric(cls, coeff: float, base: float,
                  offset: float) -> "PenaltySchedule":
        if coeff < 0 or base < 1:
            raise DomainError("geometric schedule needs coeff >= 0, base >= 1")
        if coeff + offset <= 0:
            raise DomainError("geometric schedule must start positive")
        return cls("geometric", (float(coeff), float(base), float(offset)))

    @classmethod
    def adaptive(cls, kappa: float, sigma: float,
                 rho0: float) -> "PenaltySchedule":
        if not (0 < kappa < 1):
            raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
        if sigma <= 1:
            raise DomainError(f"sigma must exceed 1, got {sigma}")
        if rho0 <= 0:
            raise DomainError(f"rho0 must be positive, got {rho0}")
        return cls("adaptive", (float(kappa), float(sigma), float(rho0)))


def penalty_at(schedule: PenaltySchedule, t: int) -> float:
    """Penalty value at outer slot ``t`` for the non-adaptive kinds."""
    if t < 0:
        raise DomainError(f"slot index must be nonnegative, got {t}")
    if schedule.kind == "fixed":
        return schedule.params[0]
    if schedule.kind == "power":
        exponent, offset = schedule.params
        return float(t) ** exponent + offset
    if schedule.kind == "geometric":
        coeff, base, offset = schedule.params
        return coeff * base ** t + offset
    if schedule.kind == "adaptive":
        raise KindError("adaptive penalties are per-dual; query them through "
                        "update_adaptive")
    raise KindError(f"unknown schedule kind {schedule.kind!r}")


def update_adaptive(rho_prev: float, eps_prev: float | None, eps_cur: float,
                    kappa: float, sigma: float) -> float:
    """One per-dual penalty adjustment.

    Keeps the penalty when the violation decreased enough
    (``eps_cur <= kappa * eps_prev``); multiplies it by ``sigma`` otherwise.
    The first outer step (no previous violation) keeps the penalty.
    """
    if not (0 < kappa < 1):
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    if sigma <= 1:
        raise DomainError(f"sigma must exceed 1, got {sigma}")
    if rho_prev <= 0:
        raise DomainError(f"rho_prev must be positive, got {rho_prev}")
    if eps_prev is None:
        return rho_prev
    if eps_prev < 0:
        raise DomainError("violations must be nonnegative")
    if eps_cur <= kappa * eps_prev:
        return rho_prev
    return sigma * rho_prev


class SlotPenalties:
    """Penalty values in force during one outer slot, one per dual
    variable. ``uniform`` is set when every value coincides."""

    __slots__ = ("mu_map", "lam_map", "uniform")

    def __init__(self, mu_map: dict[Arc, float], lam_map: dict[Arc, float],
                 uniform: float | None = None):
        self.mu_map = mu_map
        self.lam_map = lam_map
        self.uniform = uniform

    @classmethod
    def constant(cls, graph: Supergraph, rho: float) -> "SlotPenalties":
        return cls({a: rho for a in graph.arcs},
                   {a: rho for a in graph.arcs}, uniform=rho)

    def mu_of(self, arc: Arc) -> float:
        return self.mu_map[arc]

    def lam_of(self, arc: Arc) -> float:
        return self.lam_map[arc]


# --------------------------------------------------------------------------
# Algorithm states
# --------------------------------------------------------------------------

class ALGState:
    """State of the pairwise / multi-neighbor gossip variants.

    Node ``i`` owns its estimate ``x[i]``, the link variables ``y[(i, j)]``
    and duals ``mu[(i, j)]``, ``lam[(i, j)]`` for each neighbor ``j``, and a
    copy ``y_recv[(j, i)]`` of the last value of ``y_(j,i)`` it received.
    ``stale[(i, j)]`` accumulates how far ``y[(i, j)]`` has drifted from the
    copy its receiver holds. All duals start at zero.
    """

    def __init__(self, problem: ProblemInstance, graph: Supergraph):
        self.problem = problem
        self.graph = graph
        m = problem.dim
        self.x = np.stack([problem.node_project(i, np.zeros(m))
                           for i in range(graph.n)])
        self.y: dict[Arc, np.ndarray] = {
            (i, j): self.x[i].copy() for (i, j) in graph.arcs}
        # Before any communication the receiver assumes the sender agrees
        # with its own initial value.
        self.y_recv: dict[Arc, np.ndarray] = {
            (i, j): self.x[j].copy() for (i, j) in graph.arcs}
        zero = lambda: np.zeros(m)
        self.mu: dict[Arc, np.ndarray] = {a: zero() for a in graph.arcs}
        self.lam: dict[Arc, np.ndarray] = {a: zero() for a in graph.arcs}
        self.stale: dict[Arc, float] = {
            a: float(np.linalg.norm(self.y[a] - self.y_recv[a]))
            for a in graph.arcs}
        self.t = 0
        self.last_move: dict = {}
        self.reset_movement()
        self.x_final = None
        self.y_final = None
        self.y_recv_final = None

    def reset_movement(self) -> None:
        self.last_move = {("x", i): np.inf for i in range(self.graph.n)}
        self.last_move.update({("y", a): np.inf for a in self.graph.arcs})

    def snapshot_finals(self) -> None:
        self.x_final = self.x.copy()
        self.y_final = {a: v.copy() for a, v in self.y.items()}
        self.y_recv_final = {a: v.copy() for a, v in self.y_recv.items()}

    def max_dual_gap(self) -> float:
        """Largest disagreement between the two copies of a link dual."""
        gap = 0.0
        for i, j in self.graph.edges:
            gap = max(gap, float(np.linalg.norm(self.lam[(i, j)]
                                                - self.lam[(j, i)])))
        return gap


class ALBGState:
    """State of the broadcast variant: per-node estimate, per-node
    aggregated dual, and each node's copy of its neighbors' last broadcast.
    The aggregated duals start at zero and always sum to zero across nodes
    (every multiplier increment telescopes)."""

    def __init__(self, problem: ProblemInstance, graph: Supergraph):
        self.problem = problem
        self.graph = graph
        m = problem.dim
        self.x = np.stack([problem.node_project(i, np.zeros(m))
                           for i in range(graph.n)])
        # Copies as of the last broadcast; seeded during network setup.
        self.x_bcast = self.x.copy()
        self.lam_bar = np.zeros((graph.n, m))
        self.t = 0
        self.last_move: dict = {}
        self.reset_movement()
        self.x_final = None
        self.xbar_final = None

    def reset_movement(self) -> None:
        self.last_move = {("x", i): np.inf for i in range(self.graph.n)}

    def neighbor_sum(self, i: int) -> np.ndarray:
        out = np.zeros(self.problem.dim)
        for j in self.graph.neighbors[i]:
            out += self.x_bcast[j]
        return out

    def snapshot_finals(self) -> None:
        # Broadcasts are reliable, so the final local values and the final
        # received copies coincide.
        self.x_final = self.x.copy()
        self.xbar_final = np.stack([self.neighbor_sum(i)
                                    for i in range(self.graph.n)])

    def dual_sum(self) -> np.ndarray:
        return self.lam_bar.sum(axis=0)


@dataclass
class Counters:
    """Cumulative fast-scale counters for one run."""

    k: int = 0
    transmissions: int = 0
    flops: int = 0


# --------------------------------------------------------------------------
# Inner (fast-scale) steps
# --------------------------------------------------------------------------

def _update_x_block(state: ALGState, i: int, pen: SlotPenalties,
                    inner_budget: int, inner_tol: float | None,
                    counters: Counters) -> float:
    linear = np.zeros(state.problem.dim)
    quad = 0.0
    for j in state.graph.neighbors[i]:
        arc = (i, j)
        rho_mu = pen.mu_of(arc)
        linear += state.mu[arc] - rho_mu * state.y[arc]
        quad += rho_mu
    sub = XSubproblem(state.problem, i, linear, quad)
    new = solve_x_block(sub, inner_budget, inner_tol, warm_start=state.x[i],
                        counters=counters)
    moved = float(np.linalg.norm(new - state.x[i]))
    state.x[i] = new
    state.last_move[("x", i)] = moved
    return moved


def _deliver_and_update(state: ALGState, sender: int, receiver: int,
                        pen: SlotPenalties, counters: Counters) -> float:
    """Receiver stores the incoming link value and re-minimizes its own
    link block toward the sender."""
    inbound = (sender, receiver)
    outbound = (receiver, sender)
    state.y_recv[inbound] = state.y[inbound].copy()
    state.stale[inbound] = 0.0
    new = y_closed_form_peredge(
        state.x[receiver], state.y_recv[inbound],
        state.mu[outbound], state.lam[outbound],
        pen.lam_of(outbound), pen.mu_of(outbound),
        _sign(receiver, sender),
    )
    moved = float(np.linalg.norm(new - state.y[outbound]))
    state.stale[outbound] += moved
    state.y[outbound] = new
    state.last_move[("y", outbound)] = moved
    counters.flops += 8 * state.problem.dim
    return moved


def inner_step_alg(state: ALGState, ev: Event, pen: SlotPenalties,
                   inner_budget: int = 50, inner_tol: float | None = None,
                   counters: Counters | None = None) -> float:
    """Apply one pairwise-gossip event; returns the block movement.

    A node tick re-minimizes that node's estimate; a successful transfer
    delivers the sender's link value and re-minimizes the receiver's link
    block; a void slot (failed transfer) changes nothing. Successful and
    failed transfers both count one transmission.
    """
    counters = counters if counters is not None else Counters()
    if ev.kind is EventKind.X_UPDATE:
        return _update_x_block(state, ev.node, pen, inner_budget, inner_tol,
                               counters)
    if ev.kind is EventKind.Y_TRANSFER:
        sender, receiver = ev.arc
        counters.transmissions += 1
        return _deliver_and_update(state, sender, receiver, pen, counters)
    if ev.kind is EventKind.VOID:
        counters.transmissions += 1
        return 0.0
    raise KindError(f"event {ev.kind} is not part of the pairwise variant")


def inner_step_mg(state: ALGState, ev: Event, pen: SlotPenalties,
                  inner_budget: int = 50, inner_tol: float | None = None,
                  counters: Counters | None = None) -> float:
    """Apply one multi-neighbor event.

    A broadcast sends every link variable of the node at once (one message
    per neighbor, all counted, delivered or not); each successful receiver
    applies the same link update as the pairwise variant. The touched link
    blocks are disjoint, so the joint update is an exact block minimization.
    """
    counters = counters if counters is not None else Counters()
    if ev.kind is EventKind.X_UPDATE:
        return _update_x_block(state, ev.node, pen, inner_budget, inner_tol,
                               counters)
    if ev.kind is EventKind.MG_BROADCAST:
        if ev.receivers is None:
            raise KindError("broadcast tick must be resolved into receivers "
                            "before stepping (see sample_mg_event)")
        counters.transmissions += int(state.graph.degrees[ev.node])
        moved = 0.0
        for j in ev.receivers:
            moved = max(moved,
                        _deliver_and_update(state, ev.node, j, pen, counters))
        return moved
    if ev.kind is EventKind.VOID:
        counters.transmissions += int(state.graph.degrees[ev.node])
        return 0.0
    raise KindError(f"event {ev.kind} is not part of the multi-neighbor "
                    f"variant")


def step_bg(state: ALBGState, node: int, rho: float,
            inner_budget: int = 50, inner_tol: float | None = None,
            counters: Counters | None = None) -> float:
    """One broadcast-variant event: the node re-minimizes its block and
    broadcasts the new value to all neighbors (one transmission)."""
    counters = counters if counters is not None else Counters()
    x_bar = state.neighbor_sum(node)
    new = solve_bg_block(state.problem, node, state.lam_bar[node], x_bar,
                         int(state.graph.degrees[node]), rho,
                         inner_budget, inner_tol,
                         warm_start=state.x[node], counters=counters)
    moved = float(np.linalg.norm(new - state.x[node]))
    state.x[node] = new
    state.x_bcast[node] = new.copy()
    state.last_move[("x", node)] = moved
    counters.transmissions += 1
    return moved


# --------------------------------------------------------------------------
# Dual (slow-scale) updates
# --------------------------------------------------------------------------

def constraint_violations(state: ALGState) -> tuple[dict[Arc, float],
                                                    dict[Arc, float]]:
    """Per-arc violation norms at the last inner snapshot, as each node
    observes them locally."""
    if state.x_final is None:
        raise ValueError("run the inner loop before reading violations")
    eps_mu, eps_lam = {}, {}
    for (i, j) in state.graph.arcs:
        eps_mu[(i, j)] = float(np.linalg.norm(
            state.x_final[i] - state.y_final[(i, j)]))
        eps_lam[(i, j)] = float(np.linalg.norm(
            state.y_final[(i, j)] - state.y_recv_final[(j, i)]))
    return eps_mu, eps_lam


def dual_update_alg(state: ALGState, pen: SlotPenalties) -> None:
    """Multiplier step from the inner snapshot.

    Each arc's link dual moves by the penalty times the locally observable
    disagreement (own final link value minus the last received copy of the
    partner's); each arc's tie dual moves by the penalty times the node-link
    gap. Advances the outer index.
    """
    if state.x_final is None:
        raise ValueError("run the inner loop before the dual update")
    for (i, j) in state.graph.arcs:
        arc = (i, j)
        state.lam[arc] = state.lam[arc] + pen.lam_of(arc) * _sign(i, j) * (
            state.y_final[arc] - state.y_recv_final[(j, i)])
        state.mu[arc] = state.mu[arc] + pen.mu_of(arc) * (
            state.x_final[i] - state.y_final[arc])
    state.t += 1
    state.x_final = None
    state.y_final = None
    state.y_recv_final = None


def dual_update_bg(state: ALBGState, rho: float) -> None:
    """Aggregated multiplier step: each node's dual moves by the penalty
    times (degree * own final value - final neighbor sum). The across-node
    dual sum stays zero because every pairwise difference telescopes."""
    if state.x_final is None:
        raise ValueError("run the inner loop before the dual update")
    for i in range(state.graph.n):
        state.lam_bar[i] = state.lam_bar[i] + rho * (
            state.graph.degrees[i] * state.x_final[i] - state.xbar_final[i])
    state.t += 1
    state.x_final = None
    state.xbar_final = None


# --------------------------------------------------------------------------
# Lagrangians
# --------------------------------------------------------------------------

def lagrangian_alg(problem: ProblemInstance, graph: Supergraph,
                   x: np.ndarray, y: dict[Arc, np.ndarray],
                   mu: dict[Arc, np.ndarray], lam: dict[Arc, np.ndarray],
                   pen: SlotPenalties) -> float:
    """Augmented Lagrangian of the cloned formulation (node, link, and tie
    terms; the orientation sign assigns + to the smaller node id)."""
    total = sum(problem.node_value(i, x[i]) for i in range(graph.n))
    for (i, j) in graph.arcs:
        diff = x[i] - y[(i, j)]
        total += float(mu[(i, j)] @ diff)
        total += 0.5 * pen.mu_of((i, j)) * float(diff @ diff)
    for (i, j) in graph.edges:  # i < j by canonicalization
        total += float(lam[(i, j)] @ y[(i, j)]) - float(lam[(j, i)] @ y[(j, i)])
        gap = y[(i, j)] - y[(j, i)]
        total += 0.5 * pen.lam_of((i, j)) * float(gap @ gap)
    return float(total)


def lagrangian_bg(problem: ProblemInstance, graph: Supergraph, x: np.ndarray,
                  lam_bar: np.ndarray, rho: float) -> float:
    """Augmented Lagrangian of the direct consensus formulation; the edge
    dual terms aggregate exactly into one inner product per node."""
    total = sum(problem.node_value(i, x[i]) for i in range(graph.n))
    total += float((lam_bar * x).sum())
    for (i, j) in graph.edges:
        diff = x[i] - x[j]
        total += 0.5 * rho * float(diff @ diff)
    return float(total)


def lagrangian_eval(state, pen) -> float:
    """Evaluate the augmented Lagrangian of a state at the given penalties
    (a :class:`SlotPenalties` for the gossip variants, a scalar for the
    broadcast variant)."""
    if isinstance(state, ALGState):
        if not isinstance(pen, SlotPenalties):
            pen = SlotPenalties.constant(state.graph, float(pen))
        return lagrangian_alg(state.problem, state.graph, state.x, state.y,
                              state.mu, state.lam, pen)
    if isinstance(state, ALBGState):
        if isinstance(pen, SlotPenalties):
            if pen.uniform is None:
                raise KindError("broadcast variant uses a single penalty")
            pen = pen.uniform
        return lagrangian_bg(state.problem, state.graph, state.x,
                             state.lam_bar, float(pen))
    raise KindError(f"cannot evaluate a Lagrangian for {type(state).__name__}")


def expected_events_bound(l_initial: float, l_star: float,
                          min_expected_decrease: float) -> float:
    """Diagnostic upper bound on the expected number of inner events before
    the Lagrangian enters a level set: initial gap over the worst-case
    per-event expected decrease outside that set. Reported for inspection
    only; the quantity in the denominator is not computable in general."""
    if min_expected_decrease <= 0:
        raise DomainError("expected decrease must be positive")
    return max(0.0, l_initial - l_star) / min_expected_decrease


# --------------------------------------------------------------------------
# Run loops
# --------------------------------------------------------------------------

def _is_converged(state, stop_tol: float | None) -> bool:
    if stop_tol is None:
        return False
    if max(state.last_move.values()) >= stop_tol:
        return False
    if isinstance(state, ALGState) and state.stale:
        if max(state.stale.values()) >= stop_tol:
            return False
    return True


def run_inner(state, variant: Variant, graph: Supergraph,
              failures: FailureModel, dist: EventDistribution,
              pen, rng: np.random.Generator, counters: Counters,
              k_inner: int, inner_budget: int = 50,
              inner_tol: float | None = None,
              stop_tol: float | None = None,
              on_event=None) -> int:
    """Run the fast-scale loop for one outer slot.

    Applies up to ``k_inner`` sampled events (``k_inner = 0`` leaves the
    state unchanged apart from the final snapshot). When ``stop_tol`` is
    given the loop also stops once every block has been re-minimized with
    movement below the tolerance and no link value has drifted from its
    receiver's copy by more than it. Records the final primal snapshot for
    the dual update and returns the number of events applied.
    """
    state.reset_movement()
    applied = 0
    for _ in range(k_inner):
        ev = sample_event(dist, rng)
        if variant is Variant.ALMG and ev.kind is EventKind.MG_BROADCAST:
            ev = sample_mg_event(ev.node, graph, failures, rng)
        if variant is Variant.ALG:
            inner_step_alg(state, ev, pen, inner_budget, inner_tol, counters)
        elif variant is Variant.ALMG:
            inner_step_mg(state, ev, pen, inner_budget, inner_tol, counters)
        elif variant is Variant.ALBG:
            step_bg(state, ev.node, pen.uniform if isinstance(
                pen, SlotPenalties) else pen, inner_budget, inner_tol,
                counters)
        else:
            raise ConfigError(f"unknown variant {variant}")
        counters.k += 1
        applied += 1
        if on_event is not None:
            on_event()
        if _is_converged(state, stop_tol):
            break
    state.snapshot_finals()
    return applied


def make_state(variant: Variant, problem: ProblemInstance,
               graph: Supergraph):
    if variant is Variant.ALBG:
        return ALBGState(problem, graph)
    return ALGState(problem, graph)


def _validate_run(variant: Variant, schedule: PenaltySchedule,
                  failures: FailureModel) -> None:
    if variant is Variant.ALBG and failures.mode != "always_on":
        raise ConfigError("the broadcast variant requires reliable links "
                          "(always_on failure model)")
    if variant is Variant.ALMG and not failures.spatially_independent:
        raise ConfigError("the multi-neighbor variant requires spatially "
                          "independent link failures")
    if variant is Variant.ALBG and schedule.kind == "adaptive":
        raise ConfigError("per-dual adaptive penalties are not defined for "
                          "the aggregated-dual broadcast variant")


def run_outer(problem: ProblemInstance, graph: Supergraph, variant: Variant,
              schedule: PenaltySchedule, t_outer: int, k_inner: int,
              seed: int, failures: FailureModel | None = None,
              clocks: ClockModel | None = None, fstar: float | None = None,
              inner_budget: int = 50, inner_tol: float | None = None,
              inner_stop_tol: float | None = None,
              checkpoint_every: int = 100,
              feas_tol: float = 1e-9) -> tuple[MetricsLog, object]:
    """Full two-time-scale run: alternate the fast-scale sweep and the
    multiplier step ``t_outer`` times, logging metrics at every outer
    boundary and every ``checkpoint_every`` inner events. Deterministic for
    a fixed seed."""
    if t_outer < 0 or k_inner < 0:
        raise ConfigError("t_outer and k_inner must be nonnegative")
    if problem.n_nodes != graph.n:
        raise ConfigError(f"problem has {problem.n_nodes} nodes but the "
                          f"graph has {graph.n}")
    variant = Variant(variant)
    if failures is None:
        failures = FailureModel.always_on(graph)
    _validate_run(variant, schedule, failures)
    if clocks is None:
        clocks = ClockModel(variant)
    if clocks.variant is not variant:
        raise ConfigError("clock model variant does not match the run")

    rng = np.random.default_rng(seed)
    counters = Counters()
    state = make_state(variant, problem, graph)
    dist = event_distribution(graph, failures, clocks)
    log = MetricsLog()

    adaptive = schedule.kind == "adaptive"
    if adaptive:
        kappa, sigma, rho0 = schedule.params
        rho_mu = {a: rho0 for a in graph.arcs}
        rho_lam = {a: rho0 for a in graph.arcs}
        eps_prev_mu: dict[Arc, float | None] = {a: None for a in graph.arcs}
        eps_prev_lam: dict[Arc, float | None] = {a: None for a in graph.arcs}

    def penalties(t: int):
        if adaptive:
            return SlotPenalties(dict(rho_mu), dict(rho_lam))
        return SlotPenalties.constant(graph, penalty_at(schedule, t))

    def checkpoint(pen) -> None:
        if not np.isfinite(state.x).all():
            raise NumericError(f"non-finite node estimate at k={counters.k}")
        err = float("nan") if fstar is None else err_f(problem, state.x, fstar)
        gap = (state.max_dual_gap() if isinstance(state, ALGState)
               else float("nan"))
        log.append(MetricsRow(
            t=state.t, k=counters.k, transmissions=counters.transmissions,
            flops=counters.flops, err_f=err,
            L_value=lagrangian_eval(state, pen), max_dual_gap=gap,
            feasible=problem.all_feasible(state.x, feas_tol),
        ))

    pen = penalties(0)
    checkpoint(pen)
    for t in range(t_outer):
        pen = penalties(t)

        def on_event():
            if checkpoint_every and counters.k % checkpoint_every == 0:
                checkpoint(pen)

        run_inner(state, variant, graph, failures, dist, pen, rng, counters,
                  k_inner, inner_budget, inner_tol, inner_stop_tol, on_event)
        if variant is Variant.ALBG:
            dual_update_bg(state, pen.uniform)
        else:
            if adaptive:
                eps_mu, eps_lam = constraint_violations(state)
            dual_update_alg(state, pen)
            if adaptive:
                for a in graph.arcs:
                    rho_mu[a] = update_adaptive(rho_mu[a], eps_prev_mu[a],
                                                eps_mu[a], kappa, sigma)
                    rho_lam[a] = update_adaptive(rho_lam[a], eps_prev_lam[a],
                                                 eps_lam[a], kappa, sigma)
                eps_prev_mu, eps_prev_lam = dict(eps_mu), dict(eps_lam)
        checkpoint(pen)
    return log, state
