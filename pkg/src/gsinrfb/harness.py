"""Monte Carlo experiments: spec-file parsing, seeded trials, aggregation
and CSV output."""
import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .driver import Method, Status, feasibility_test, solve
from .errors import ConfigError, DimensionInfeasible
from .model import SystemConfig, db_to_linear, generate_channel, sum_rate

__all__ = [
    "ExperimentSpec",
    "ExperimentRow",
    "TrialRecord",
    "CSV_HEADER",
    "parse_spec",
    "load_spec",
    "run_experiment",
    "aggregate",
    "write_rows",
    "write_trials",
    "feasibility_rates",
    "base_seed",
]

CSV_HEADER = (
    "sweep_value",
    "method",
    "mean_C",
    "mean_power_db",
    "mean_sum_rate",
    "feasibility_rate",
    "convergence_rate",
    "mean_iters",
)
FILTER_POLICIES = ("AllConverged", "PerMethod", "All")


def base_seed(default):
    """``MIMO_SEED`` from the environment wins over ``default``."""
    env = os.environ.get("MIMO_SEED")
    if env is None or env.strip() == "":
        return int(default)
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"MIMO_SEED must be an integer, got {env!r}") from None


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a system, a list of methods and one swept quantity
    (``pmax_db`` or ``gamma_db``)."""

    problem: str
    methods: tuple
    K: int
    M: int
    N: tuple
    L: tuple
    gamma_db: tuple
    pmax_db: tuple
    trials: int = 200
    seed: int = 0
    filter_policy: str = "AllConverged"
    epsilon: float = 1e-3
    max_iters: int = 50
    oscillation: str = "last"

    @property
    def sweep_key(self):
        if len(self.pmax_db) > 1:
            return "pmax_db"
        if len(self.gamma_db) > 1:
            return "gamma_db"
        return "pmax_db" if self.problem == "pr" else "gamma_db"

    @property
    def sweep_values(self):
        return getattr(self, self.sweep_key)

    def config_at(self, value):
        """System config with the sweep variable set to ``value`` (dB)."""
        gamma_db = value if self.sweep_key == "gamma_db" else self.gamma_db[0]
        pmax_db = value if self.sweep_key == "pmax_db" else self.pmax_db[0]
        return SystemConfig(
            K=self.K,
            M=self.M,
            N=self.N,
            L=self.L,
            gamma=float(db_to_linear(gamma_db)),
            p_max=float(db_to_linear(pmax_db)),
            epsilon=self.epsilon,
            max_iters=self.max_iters,
        )


@dataclass
class TrialRecord:
    sweep_value: float
    method: str
    trial: int
    seed: int
    status: str
    feasible: bool
    converged: bool
    level: float
    power: float
    sum_rate: float
    iters: int
    oscillation: bool


@dataclass
class ExperimentRow:
    sweep_value: float
    method: str
    mean_C: float
    mean_power_db: float
    mean_sum_rate: float
    feasibility_rate: float
    convergence_rate: float
    mean_iters: float
    n_used: int = field(default=0, compare=False)

    def csv_fields(self):
        return [_fmt(self.sweep_value), self.method] + [
            _fmt(getattr(self, name)) for name in CSV_HEADER[2:]
        ]


def _fmt(x):
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".10g")


_INT_KEYS = {"K", "M", "trials", "seed", "max_iters"}
_KNOWN = {
    "problem", "methods", "K", "M", "N", "L", "Lequal", "gamma_db", "pmax_db",
    "trials", "seed", "filter_policy", "epsilon", "max_iters", "oscillation",
}


def _numbers(text, cast, line, key):
    try:
        vals = tuple(cast(v.strip()) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"cannot parse {text!r}", line=line, field=key) from None
    if not vals:
        raise ConfigError("empty value", line=line, field=key)
    if cast is float and not all(math.isfinite(v) for v in vals):
        raise ConfigError("values must be finite", line=line, field=key)
    return vals


def parse_spec(text):
    """Parse the flat ``key = value`` experiment format.

    ``#`` starts a comment. ``methods``, ``N``, ``L``, ``gamma_db`` and
    ``pmax_db`` take comma lists; ``Lequal = N`` (or ``L = N``) sets one
    stream per receive antenna.

    Raises
    ------
    ConfigError
        With the line number and key of the first bad entry.
    """
    raw, where = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _KNOWN:
            raise ConfigError("unknown key", line=lineno, field=key)
        if key in raw:
            raise ConfigError("duplicate key", line=lineno, field=key)
        raw[key], where[key] = value, lineno

    for key in ("problem", "methods", "K", "M", "N"):
        if key not in raw:
            raise ConfigError("missing required key", field=key)

    def at(key):
        return where.get(key)

    problem = raw["problem"].lower()
    if problem not in ("pr", "pp"):
        raise ConfigError("must be 'pr' or 'pp'", line=at("problem"), field="problem")
    try:
        methods = tuple(Method(m.strip().lower()) for m in raw["methods"].split(",") if m.strip())
    except ValueError as exc:
        raise ConfigError(str(exc), line=at("methods"), field="methods") from None
    if not methods:
        raise ConfigError("no methods given", line=at("methods"), field="methods")

    ints = {}
    for key in _INT_KEYS & raw.keys():
        (ints[key],) = _numbers(raw[key], int, at(key), key)[:1]
    K = ints["K"]
    N = _numbers(raw["N"], int, at("N"), "N")
    if len(N) == 1:
        N = N * K
    if len(N) != K:
        raise ConfigError(f"{len(N)} entries for K={K} users", line=at("N"), field="N")
    l_key = "Lequal" if "Lequal" in raw else "L"
    l_text = raw.get(l_key, "N")
    if l_text.strip().upper() == "N":
        L = N
    else:
        L = _numbers(l_text, int, at(l_key), l_key)
        L = L * K if len(L) == 1 else L
    gamma_db = _numbers(raw.get("gamma_db", "0"), float, at("gamma_db"), "gamma_db")
    pmax_db = _numbers(raw.get("pmax_db", "43"), float, at("pmax_db"), "pmax_db")
    if len(gamma_db) > 1 and len(pmax_db) > 1:
        raise ConfigError("only one of gamma_db / pmax_db may be a list", line=at("pmax_db"), field="pmax_db")
    policy = raw.get("filter_policy", "AllConverged")
    if policy not in FILTER_POLICIES:
        raise ConfigError(f"must be one of {FILTER_POLICIES}", line=at("filter_policy"), field="filter_policy")
    oscillation = raw.get("oscillation", "last")
    if oscillation not in ("last", "group"):
        raise ConfigError("must be 'last' or 'group'", line=at("oscillation"), field="oscillation")
    (epsilon,) = _numbers(raw.get("epsilon", "1e-3"), float, at("epsilon"), "epsilon")[:1]

    spec = ExperimentSpec(
        problem=problem,
        methods=methods,
        K=K,
        M=ints["M"],
        N=N,
        L=tuple(L),
        gamma_db=gamma_db,
        pmax_db=pmax_db,
        trials=ints.get("trials", 200),
        seed=ints.get("seed", 0),
        filter_policy=policy,
        epsilon=epsilon,
        max_iters=ints.get("max_iters", 50),
        oscillation=oscillation,
    )
    if spec.trials < 1:
        raise ConfigError("must be at least 1", line=at("trials"), field="trials")
    try:
        spec.config_at(spec.sweep_values[0])
    except ConfigError as exc:
        raise ConfigError(str(exc), line=at(exc.field), field=exc.field) from None
    return spec


def load_spec(path):
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


def _run_one(cfg, ch, method, problem, oscillation):
    kwargs = {"oscillation": oscillation} if problem == "pp" else {}
    try:
        res = solve(cfg, ch, method, problem, **kwargs)
    except DimensionInfeasible:
        return Status.INFEASIBLE.value, False, False, math.nan, math.nan, math.nan, 1, False
    feasible = res.feasible
    if res.solution is None or not feasible:
        return res.status.value, False, False, math.nan, math.nan, math.nan, res.iters_used, False
    rate = sum_rate(res.channels, res.beamformers, res.solution.p, res.cfg.noise_power)
    return (
        res.status.value,
        True,
        res.converged,
        res.level,
        res.total_power,
        rate,
        res.iters_used,
        res.oscillation_detected,
    )


def _trial_records(spec, trial):
    seed = base_seed(spec.seed) + trial
    out = []
    ch = None
    for value in spec.sweep_values:
        cfg = spec.config_at(value)
        if ch is None:
            ch = generate_channel(cfg, seed)
        for method in spec.methods:
            fields = _run_one(cfg, ch, method, spec.problem, spec.oscillation)
            out.append(TrialRecord(float(value), method.value, trial, seed, *fields))
    return out


def run_experiment(spec, workers=1):
    """Run every (trial, sweep value, method) and aggregate.

    Trial ``i`` draws its channel from seed ``base + i`` and feeds it to
    every method at every sweep value. Results do not depend on
    ``workers``.

    Returns
    -------
    rows : list of ExperimentRow
    records : list of TrialRecord, ordered by trial, sweep value, method
    """
    indices = range(spec.trials)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_trial_records, [spec] * spec.trials, indices))
    else:
        chunks = [_trial_records(spec, i) for i in indices]
    records = [r for chunk in chunks for r in chunk]
    return aggregate(spec, records), records


def aggregate(spec, records):
    """Reduce trial records to one row per (sweep value, method).

    Feasibility rate counts feasible trials over all trials, convergence
    rate converged over feasible. Means use the trials kept by the filter
    policy: under AllConverged a trial counts only if every method
    converged on it at that sweep value, under PerMethod each method keeps
    its own converged trials, and under All a trial counts if every method
    returned a solution, converged or not. ``mean_power_db`` is the dB value
    of the mean linear power.
    """
    by_key = {}
    for r in records:
        by_key.setdefault((r.sweep_value, r.method), {})[r.trial] = r
    rows = []
    for value in spec.sweep_values:
        value = float(value)
        keep_all = None
        if spec.filter_policy != "PerMethod":
            attr = "converged" if spec.filter_policy == "AllConverged" else "feasible"
            keep_all = {
                t
                for t in range(spec.trials)
                if all(getattr(by_key[(value, m.value)][t], attr) for m in spec.methods)
            }
        for method in spec.methods:
            recs = by_key[(value, method.value)]
            n_feas = sum(r.feasible for r in recs.values())
            n_conv = sum(r.converged for r in recs.values())
            keep = keep_all if keep_all is not None else {t for t, r in recs.items() if r.converged}
            used = [recs[t] for t in sorted(keep)]
            if used:
                mean_c = float(np.mean([r.level for r in used]))
                mean_p = float(np.mean([r.power for r in used]))
                mean_p_db = 10.0 * math.log10(mean_p) if mean_p > 0 else math.nan
                mean_rate = float(np.mean([r.sum_rate for r in used]))
                mean_it = float(np.mean([r.iters for r in used]))
            else:
                mean_c = mean_p_db = mean_rate = mean_it = math.nan
            rows.append(
                ExperimentRow(
                    sweep_value=value,
                    method=method.value,
                    mean_C=mean_c,
                    mean_power_db=mean_p_db,
                    mean_sum_rate=mean_rate,
                    feasibility_rate=n_feas / spec.trials,
                    convergence_rate=n_conv / n_feas if n_feas else 0.0,
                    mean_iters=mean_it,
                    n_used=len(used),
                )
            )
    return rows


def write_rows(rows, target):
    """Write aggregate rows as CSV to a path or text stream."""
    text = io.StringIO()
    text.write(",".join(CSV_HEADER) + "\n")
    for row in rows:
        text.write(",".join(row.csv_fields()) + "\n")
    _emit(text.getvalue(), target)


def write_trials(records, target):
    """Write per-trial records as CSV to a path or text stream."""
    text = io.StringIO()
    names = list(TrialRecord.__dataclass_fields__)
    writer = csv.writer(text, lineterminator="\n")
    writer.writerow(names)
    for rec in records:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in asdict(rec).values()])
    _emit(text.getvalue(), target)


def _emit(content, target):
    if hasattr(target, "write"):
        target.write(content)
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)


def feasibility_rates(cfg, methods, trials, seed=0):
    """Fraction of ``trials`` seeded channels on which each method passes
    the feasibility test."""
    start = base_seed(seed)
    hits = {Method(m).value: 0 for m in methods}
    for i in range(trials):
        ch = generate_channel(cfg, start + i)
        for m in methods:
            m = Method(m)
            if feasibility_test(cfg, ch, m).feasible:
                hits[m.value] += 1
    return {m: h / trials for m, h in hits.items()}
