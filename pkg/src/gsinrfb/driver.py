"""Alternating downlink / virtual-uplink optimization.

Every iteration runs six steps: downlink power, downlink receive filters,
downlink power, uplink power, uplink receive filters (the new transmit
filters), uplink power. ``solve_pr`` maximizes the balanced level under a
sum-power budget, ``solve_pp`` minimizes sum power subject to the targets.
"""
import enum
from dataclasses import dataclass, field

import numpy as np

from . import power as pw
from .beamform import bd_transmit, gsinr_receive_dl, gsinr_receive_ul
from .errors import DimensionInfeasible, GsinrError, Infeasible
from .model import BeamformerSet, build_coupling, explode_streams

__all__ = [
    "Method",
    "Status",
    "IterationResult",
    "FeasibilityResult",
    "OscillationMonitor",
    "solve_pr",
    "solve_pp",
    "solve",
    "feasibility_test",
    "FEASIBILITY_PMAX_DB",
    "OSC_WINDOW",
    "OSC_REL",
]

FEASIBILITY_PMAX_DB = 43.0
OSC_WINDOW = 6
OSC_REL = 1e-6


class Method(str, enum.Enum):
    GROUP = "group"
    STREAM = "stream"
    KHACHAN = "khachan"
    BD_GROUP = "bd-group"
    BD_STREAM = "bd-stream"

    @property
    def is_bd(self):
        return self in (Method.BD_GROUP, Method.BD_STREAM)

    @property
    def per_stream(self):
        return self in (Method.STREAM, Method.BD_STREAM)


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    INFEASIBLE = "Infeasible"
    BUDGET_EXCEEDED = "BudgetExceeded"


@dataclass
class IterationResult:
    """Outcome of one solve.

    ``trace`` holds the level after every power step, ``levels`` the value
    tested for convergence once per iteration. ``rescued_steps`` counts
    minimization steps that fell back to balancing. ``cfg``/``beamformers``
    describe the (possibly stream-exploded) system the solution lives in.
    """

    status: Status
    method: Method
    cfg: object
    solution: pw.BalancedSolution = None
    beamformers: BeamformerSet = None
    trace: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    iters_used: int = 0
    feasibility_iters: int = 0
    oscillation_detected: bool = False
    objective_trace: list = field(default_factory=list)
    rescued_steps: int = 0
    channels: object = None

    @property
    def converged(self):
        return self.status == Status.CONVERGED

    @property
    def feasible(self):
        return self.status != Status.INFEASIBLE

    @property
    def level(self):
        return self.solution.level if self.solution is not None else float("nan")

    @property
    def total_power(self):
        return self.solution.total if self.solution is not None else float("nan")


@dataclass
class FeasibilityResult:
    feasible: bool
    iters: int
    level: float
    beamformers: BeamformerSet = None
    trace: list = field(default_factory=list)


class OscillationMonitor:
    """Flags a stalled objective: the best of the last ``window`` values is
    no better, by the relative margin ``rel``, than the best seen before
    the window."""

    def __init__(self, window=OSC_WINDOW, rel=OSC_REL):
        self.window = window
        self.rel = rel
        self.values = []

    def update(self, value):
        self.values.append(float(value))
        return self.detected()

    def detected(self):
        v = self.values
        if len(v) <= self.window:
            return False
        best_before = min(v[: -self.window])
        return min(v[-self.window:]) >= (1.0 - self.rel) * best_before


def _tag(exc, n):
    exc.args = (f"iteration {n}: {exc.args[0] if exc.args else ''}",) + exc.args[1:]
    return exc


class _Power:
    """Power step dispatcher holding the per-stream balancing state.

    In minimization mode a step whose targets have become unreachable with
    the current filters is replaced by balancing at ``rescue_pmax``; the
    count of such steps is kept in ``rescued``.
    """

    def __init__(self, cfg, per_stream, problem, inner=False, rescue_pmax=None):
        self.per_stream = per_stream
        self.problem = problem
        self.inner = inner
        self.rescue_pmax = rescue_pmax
        self.rescued = 0
        self.t = {"dl": pw.even_totals(cfg), "ul": pw.even_totals(cfg)}

    def __call__(self, cp, side):
        if self.problem == "pp":
            fn = pw.stream_pp_allocate if self.per_stream else pw.group_pp_allocate
            try:
                return fn(cp, side)
            except Infeasible:
                if self.rescue_pmax is None:
                    raise
            self.rescued += 1
            if self.per_stream:
                t0 = self.rescue_pmax * pw.even_totals(cp.cfg) / cp.cfg.p_max
                return pw.stream_pr_allocate(cp, t0, side, inner=True, p_max=self.rescue_pmax)
            return pw.group_pr_allocate(cp, side, p_max=self.rescue_pmax)
        if self.per_stream:
            sol = pw.stream_pr_allocate(cp, self.t[side], side, inner=self.inner)
            self.t[side] = sol.t
            return sol
        return pw.group_pr_allocate(cp, side)


def _dl_filters(cfg, ch, bf, p):
    return bf.with_V([gsinr_receive_dl(k, ch, bf, p, cfg.noise_power).filters for k in range(cfg.K)])


def _ul_filters(cfg, ch, bf, q):
    return bf.with_U([gsinr_receive_ul(k, ch, bf, q, cfg.noise_power).filters for k in range(cfg.K)])


def _expand(cfg, ch, method):
    if method is Method.KHACHAN:
        cfg2, ch2, shifts = explode_streams(cfg, ch)
        return cfg2, ch2, shifts
    return cfg, ch, None


def _pr_loop(cfg, ch, per_stream, v_shift=None, stop_level=None, inner=False):
    """Table-style Pr iterations. With ``stop_level`` set, returns as soon
    as a downlink power step reaches it (feasibility mode)."""
    bf = BeamformerSet.identity(cfg, v_shift)
    step = _Power(cfg, per_stream, "pr", inner)
    trace, levels = [], []
    prev = None
    best = None
    status = Status.MAX_ITERS
    n = 0
    for n in range(1, cfg.max_iters + 1):
        try:
            sol = step(build_coupling(ch, bf, cfg), "dl")
            trace.append(sol.level)
            if stop_level is not None and sol.level >= stop_level:
                return Status.CONVERGED, n, sol, bf, trace, levels, True
            if prev is None:
                prev = sol.level
            bf = _dl_filters(cfg, ch, bf, sol.p)
            sol = step(build_coupling(ch, bf, cfg), "dl")
            trace.append(sol.level)
            best = (sol, bf)
            if stop_level is not None and sol.level >= stop_level:
                return Status.CONVERGED, n, sol, bf, trace, levels, True
            usol = step(build_coupling(ch, bf, cfg), "ul")
            trace.append(usol.level)
            bf_next = _ul_filters(cfg, ch, bf, usol.p)
            usol = step(build_coupling(ch, bf_next, cfg), "ul")
            trace.append(usol.level)
        except GsinrError as exc:
            raise _tag(exc, n)
        levels.append(sol.level)
        bf = bf_next
        if abs(sol.level - prev) < cfg.epsilon:
            status = Status.CONVERGED
            break
        prev = sol.level
    sol, bf_out = best
    return status, n, sol, bf_out, trace, levels, False


def _bd_pass(cfg, ch, per_stream, problem):
    U = bd_transmit(ch, cfg)
    bf = BeamformerSet(U, BeamformerSet.identity(cfg).V)
    p0 = np.repeat(pw.even_totals(cfg) / np.asarray(cfg.L), cfg.L)
    bf = _dl_filters(cfg, ch, bf, p0)
    cp = build_coupling(ch, bf, cfg)
    if problem == "pr":
        if per_stream:
            sol = pw.stream_pr_allocate(cp, pw.even_totals(cfg), "dl", inner=True)
        else:
            sol = pw.group_pr_allocate(cp, "dl")
    else:
        sol = (pw.stream_pp_allocate if per_stream else pw.group_pp_allocate)(cp, "dl")
    return sol, bf


def solve_pr(cfg, ch, method, inner_fixed_point=False):
    """Maximize the balanced level under the budget ``cfg.p_max``.

    Returns the beamformers of the last completed downlink stage and the
    power of its second power step. BD methods fix the transmit filters
    and finish in one pass.
    """
    method = Method(method)
    ch.check(cfg)
    if method.is_bd:
        sol, bf = _bd_pass(cfg, ch, method.per_stream, "pr")
        return IterationResult(
            Status.CONVERGED, method, cfg, sol, bf, trace=[sol.level], levels=[sol.level], iters_used=1,
            channels=ch,
        )
    cfg2, ch2, shift = _expand(cfg, ch, method)
    status, n, sol, bf, trace, levels, _ = _pr_loop(
        cfg2, ch2, method.per_stream, shift, inner=inner_fixed_point
    )
    return IterationResult(
        status, method, cfg2, sol, bf, trace=trace, levels=levels, iters_used=n, channels=ch2
    )


def feasibility_test(cfg, ch, method):
    """Run the Pr algorithm at ``P_max = 10^4.3 sigma^2`` until the balanced
    level first reaches 1 (feasible) or the run ends below 1."""
    method = Method(method)
    big = cfg.replace(p_max=10 ** (FEASIBILITY_PMAX_DB / 10) * cfg.noise_power)
    if method.is_bd:
        try:
            sol, bf = _bd_pass(big, ch, method.per_stream, "pr")
        except DimensionInfeasible:
            return FeasibilityResult(False, 1, float("nan"))
        return FeasibilityResult(sol.level >= 1.0, 1, sol.level, bf, [sol.level])
    cfg2, ch2, shift = _expand(big, ch, method)
    status, n, sol, bf, trace, _, hit = _pr_loop(cfg2, ch2, method.per_stream, shift, stop_level=1.0)
    return FeasibilityResult(hit, n, sol.level, bf, trace)


def solve_pp(cfg, ch, method, oscillation="last"):
    """Minimize sum power subject to every user's average-SINR target.

    A feasibility stage comes first; its beamformers seed the minimization.
    Convergence is ``|C - 1| < epsilon`` where ``C`` is the worst downlink
    ratio after the uplink stage refreshes the transmit filters.

    Parameters
    ----------
    oscillation : {"last", "group"}
        Per-stream methods only. On a stalled objective, "last" keeps
        iterating and returns the final iterate; "group" switches the
        remaining power steps to group allocation.
    """
    method = Method(method)
    if oscillation not in ("last", "group"):
        raise ValueError("oscillation must be 'last' or 'group'")
    ch.check(cfg)
    feas = feasibility_test(cfg, ch, method)
    base = IterationResult(
        Status.INFEASIBLE, method, cfg, iters_used=feas.iters, feasibility_iters=feas.iters,
        trace=list(feas.trace), channels=ch,
    )
    if not feas.feasible:
        return base
    if method.is_bd:
        try:
            sol, bf = _bd_pass(cfg, ch, method.per_stream, "pp")
        except Infeasible:
            return base
        base.status = Status.CONVERGED if sol.total <= cfg.p_max else Status.BUDGET_EXCEEDED
        base.solution, base.beamformers = sol, bf
        base.iters_used = 1
        base.objective_trace = [sol.total]
        return base

    cfg2, ch2, _ = _expand(cfg, ch, method)
    base.cfg, base.channels = cfg2, ch2
    bf = feas.beamformers
    rescue = 10 ** (FEASIBILITY_PMAX_DB / 10) * cfg.noise_power
    step = _Power(cfg2, method.per_stream, "pp", rescue_pmax=rescue)
    monitor = OscillationMonitor()
    status = Status.MAX_ITERS
    n = 0
    for n in range(1, cfg.max_iters + 1):
        try:
            sol = step(build_coupling(ch2, bf, cfg2), "dl")
            base.trace.append(sol.level)
            bf = _dl_filters(cfg2, ch2, bf, sol.p)
            sol = step(build_coupling(ch2, bf, cfg2), "dl")
            base.trace.append(sol.level)
            dl_sol, dl_bf = sol, bf
            usol = step(build_coupling(ch2, bf, cfg2), "ul")
            base.trace.append(usol.level)
            bf = _ul_filters(cfg2, ch2, bf, usol.p)
            cp = build_coupling(ch2, bf, cfg2)
            usol = step(cp, "ul")
            base.trace.append(usol.level)
        except Infeasible:
            base.status = Status.INFEASIBLE
            base.iters_used = feas.iters + n
            return base
        except GsinrError as exc:
            raise _tag(exc, n)
        level = float(np.min(pw.user_ratios(cp, dl_sol.p, "dl")))
        base.levels.append(level)
        base.objective_trace.append(dl_sol.total)
        base.solution, base.beamformers = dl_sol, dl_bf
        if abs(level - 1.0) < cfg.epsilon:
            status = Status.CONVERGED
            break
        if method.per_stream and monitor.update(dl_sol.total):
            base.oscillation_detected = True
            if oscillation == "group":
                step.per_stream = False
    base.rescued_steps = step.rescued
    if status == Status.CONVERGED and base.solution.total > cfg.p_max:
        status = Status.BUDGET_EXCEEDED
    base.status = status
    base.iters_used = feas.iters + n
    return base


def solve(cfg, ch, method, problem="pr", **kwargs):
    """Dispatch to :func:`solve_pr` or :func:`solve_pp`."""
    if problem == "pr":
        return solve_pr(cfg, ch, method, **kwargs)
    if problem == "pp":
        return solve_pp(cfg, ch, method, **kwargs)
    raise ValueError(f"problem must be 'pr' or 'pp', got {problem!r}")
