"""Command-line drivers that run the numerical checks and emit JSON or CSV reports.

Every subcommand reads an optional JSON config (all fields optional)::

    {"n": 2, "q": 0.5, "L": 5, "N": 2,
     "block_spec": {"rotation_params": [], "fixed_count": 2},
     "q0": null, "d": 4, "max_degree": 3, "ms": [2, 4, 8], "samples": 4,
     "eps": [0.1, 0.01], "ts": [1.0, 0.5, 0.25, 0.125], "projection_rank": null}

Randomness comes from ``numpy.random.SeedSequence(seed)``; each driver spawns
child sequences in a fixed order, so a report is reproducible from its config
and seed.

Exit status: 0 all checks passed, 1 some check failed, 2 invalid config,
3 memory budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .deformed_space import BlockSpec, build
from .embedding import (
    DEFAULT_MAX_CELLS,
    FactorizationChoice,
    TensorFock,
    convergence_table,
    decay_slopes,
    decay_table,
)
from .errors import InvalidArgument, MemoryBudgetExceeded
from .fock import build_fock, field as field_op, operator_norm, vacuum_expectation
from .khintchine import khintchine_check
from .quantization import (
    RealContraction,
    cmap_approximant,
    cmap_schedule,
    coordinate_projection,
    cb_constant,
    pointwise_residual,
)
from .wick import (
    RadialSymbol,
    WickDecomposition,
    basis_samples,
    moment,
    multiplier_ratio,
    random_samples,
    wick_direct,
    wick_recursive,
    wick_word,
)

COMMANDS = ("moments", "wick-check", "khintchine", "multiplier-bound",
            "embedding-convergence", "remainder-decay", "cmap-schedule")

IDENTITY_TOL = 1e-10
NORM_TOL = 1e-8
SLOPE_BAND = (-0.7, -0.3)


@dataclass
class RunConfig:
    command: str
    n: int = 2
    q: float = 0.5
    L: int = 5
    N: int = 2
    block_spec: dict | None = None
    q0: float | None = None
    d: int = 4
    max_degree: int = 3
    ms: list = field(default_factory=lambda: [2, 4, 8])
    samples: int = 4
    eps: list = field(default_factory=lambda: [0.1, 0.01])
    ts: list = field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125])
    projection_rank: int | None = None
    seed: int = 0
    max_cells: int = DEFAULT_MAX_CELLS
    jobs: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidArgument(f"unknown command {self.command!r}")
        if not -1 < self.q < 1:
            raise InvalidArgument(f"q must lie in (-1, 1), got {self.q}")
        if self.n < 1 or self.L < 0 or self.N < 1 or self.d < 0 or self.max_degree < 0:
            raise InvalidArgument("n, N must be positive and L, d, max_degree nonnegative")
        if self.seed < 0 or self.seed >= 2**64:
            raise InvalidArgument("seed must be an unsigned 64-bit integer")
        if self.max_cells < 1 or self.jobs < 1:
            raise InvalidArgument("max_cells and jobs must be positive")
        if self.block_spec is not None and BlockSpec.from_dict(self.block_spec).n != self.n:
            raise InvalidArgument("block_spec dimension does not match n")

    @property
    def spec(self) -> BlockSpec:
        return BlockSpec.from_dict(self.block_spec) if self.block_spec is not None else BlockSpec.tracial(self.n)

    @property
    def factorization(self) -> FactorizationChoice:
        if self.q0 is None:
            return FactorizationChoice.default(self.q)
        return FactorizationChoice.with_q0(self.q, self.q0)


def load_config(command: str, path: str | None, overrides: dict) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgument(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidArgument("config must be a JSON object")
    known = set(RunConfig.__dataclass_fields__) - {"command"}
    unknown = set(data) - known
    if unknown:
        raise InvalidArgument(f"unknown config fields: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(command=command, **data)
    except TypeError as exc:
        raise InvalidArgument(str(exc)) from exc


def _check(name, passed, measured, tolerance=None, bound=None) -> dict:
    row = {"name": name, "passed": bool(passed), "measured": measured}
    if tolerance is not None:
        row["tolerance"] = tolerance
        row["slack"] = tolerance - measured
    if bound is not None:
        row["bound"] = bound
        row["slack"] = bound - measured
    return row


def _maxabs(x) -> float:
    return float(abs(x.M).max()) if x.M.nnz else 0.0


def _pmap(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _fock(cfg: RunConfig, L: int | None = None, q: float | None = None):
    f = build_fock(build(cfg.spec), cfg.q if q is None else q, cfg.L if L is None else L)
    if f.dim**2 > cfg.max_cells:
        raise MemoryBudgetExceeded(f"Fock dimension {f.dim} exceeds the cell budget")
    return f


# -- drivers ----------------------------------------------------------------

def run_moments(cfg: RunConfig):
    f = _fock(cfg, L=max(cfg.d, 1))
    basis = np.eye(f.n)
    rows, worst = [], 0.0
    for d in range(cfg.d + 1):
        vecs = [basis[0]] * d
        comb = moment(f, vecs)
        op = None
        for v in vecs:
            s = field_op(f, v)
            op = s if op is None else op @ s
        mat = vacuum_expectation(op) if op is not None else 1.0
        rows.append({"q": f.q, "block_spec": cfg.spec.to_dict(), "d": d, "value": comb.real,
                     "matrix_value": complex(mat).real, "tolerance": IDENTITY_TOL})
        for word in itertools.product(range(f.n), repeat=d):
            if not d:
                continue
            fields = [field_op(f, basis[i]) for i in word]
            prod = fields[0]
            for s in fields[1:]:
                prod = prod @ s
            worst = max(worst, abs(vacuum_expectation(prod) - moment(f, [basis[i] for i in word])))
    checks = [_check("matrix moments equal pair-partition sums", worst <= IDENTITY_TOL, worst, tolerance=IDENTITY_TOL)]
    return rows, checks


def run_wick_check(cfg: RunConfig):
    dmax = min(cfg.d, 4)
    f = _fock(cfg, L=max(dmax, 1))
    basis = np.eye(f.n)
    rows, worst_rec, worst_word, worst_vac = [], 0.0, 0.0, 0.0
    for d in range(dmax + 1):
        r_d = w_d = v_d = 0.0
        for word in itertools.product(range(f.n), repeat=d):
            vecs = [basis[i] for i in word]
            a = wick_direct(f, vecs)
            r_d = max(r_d, _maxabs(a - wick_recursive(f, vecs)))
            w_d = max(w_d, _maxabs(a - wick_word(f, vecs)))
            v = a.apply(f.vacuum())
            target = np.zeros(f.dim, dtype=complex)
            target[f.word_index(word)] = 1
            v_d = max(v_d, float(np.abs(v - target).max()))
        rows.append({"d": d, "direct_vs_recursive": r_d, "direct_vs_splits": w_d, "vacuum_residual": v_d,
                     "tolerance": IDENTITY_TOL})
        worst_rec, worst_word, worst_vac = max(worst_rec, r_d), max(worst_word, w_d), max(worst_vac, v_d)
    checks = [
        _check("direct equals recursive", worst_rec <= IDENTITY_TOL, worst_rec, tolerance=IDENTITY_TOL),
        _check("direct equals split assembly", worst_word <= IDENTITY_TOL, worst_word, tolerance=IDENTITY_TOL),
        _check("W(xi) Omega = xi", worst_vac <= IDENTITY_TOL, worst_vac, tolerance=IDENTITY_TOL),
    ]
    return rows, checks


def run_khintchine(cfg: RunConfig):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    rows, checks = [], []
    for n in range(cfg.max_degree + 1):
        f = _fock(cfg, L=n + 2)
        for s in range(cfg.samples):
            shape = (cfg.N, cfg.N) + (f.n,) * n
            xi = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            rep = khintchine_check(f, n, xi)
            rep["sample"] = s
            rep["tolerance"] = 1e-9
            rows.append(rep)
    min_slack = min(r["minorization_slack"] for r in rows)
    checks.append(_check("minorization holds on all samples", all(r["minorization_ok"] for r in rows),
                         -min_slack, tolerance=0.0))
    return rows, checks


def run_multiplier_bound(cfg: RunConfig):
    f = _fock(cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(1)
    top = min(cfg.max_degree, f.L - 1)
    samples = basis_samples(f, min(4, f.L - 1), cfg.N)
    samples += random_samples(f, np.random.default_rng(seeds[0]), cfg.samples, top, cfg.N)
    cq = cb_constant(f.q)
    rows, checks = [], []
    for n in range(top + 1):
        ratios = _pmap(lambda s: multiplier_ratio(f, RadialSymbol.delta(n), s), samples, cfg.jobs)
        bound = cq**2 * (n + 1) ** 2
        r = max(ratios)
        rows.append({"q": f.q, "block_spec": cfg.spec.to_dict(), "n": n, "value": r, "bound": bound,
                     "tolerance": NORM_TOL})
        checks.append(_check(f"P_{n} ratio below C(|q|)^2 (n+1)^2", r <= bound + NORM_TOL, r, bound=bound))
    ones = _pmap(lambda s: multiplier_ratio(f, RadialSymbol.ones(), s), samples, cfg.jobs)
    dev = max(abs(r - 1) for r in ones)
    rows.append({"q": f.q, "block_spec": cfg.spec.to_dict(), "n": "ones", "value": max(ones), "bound": 1.0,
                 "tolerance": IDENTITY_TOL})
    checks.append(_check("identity symbol ratio is 1", dev <= IDENTITY_TOL, dev, tolerance=IDENTITY_TOL))
    return rows, checks


def _embedding_vectors(cfg: RunConfig, count: int):
    basis = np.eye(cfg.n)
    return [basis[0]] * count


def run_embedding_convergence(cfg: RunConfig):
    space = build(cfg.spec)
    fact = cfg.factorization
    vecs = _embedding_vectors(cfg, cfg.d)
    L = max((cfg.d + 1) // 2, 1)
    for m in cfg.ms:
        TensorFock(space, fact, m, L, L, max_cells=cfg.max_cells).check_budget(m)
    rows = convergence_table(space, fact, vecs, cfg.ms, max_cells=cfg.max_cells)
    for r in rows:
        r["tolerance"] = IDENTITY_TOL
    gap = max(abs(r["moment_matrix"] - r["moment_closed"]) for r in rows)
    excess = max(r["abs_error"] - r["bound"] for r in rows)
    checks = [
        _check("matrix moment equals closed form", gap <= IDENTITY_TOL, gap, tolerance=IDENTITY_TOL),
        _check("error below c/m", excess <= IDENTITY_TOL, excess, tolerance=IDENTITY_TOL),
    ]
    return rows, checks


def run_remainder_decay(cfg: RunConfig):
    space = build(cfg.spec)
    fact = cfg.factorization
    d = 2 if cfg.d > 3 else max(cfg.d, 1)
    vecs = _embedding_vectors(cfg, d + 1)
    ms = [m for m in cfg.ms if m >= d]
    if len(ms) < 2:
        raise InvalidArgument("remainder decay needs at least two values of m >= d")
    for m in ms:
        TensorFock(space, fact, m, d + 1, d + 1, max_cells=cfg.max_cells).check_budget(6)
    rows = decay_table(space, fact, vecs, ms, max_cells=cfg.max_cells)
    slopes = decay_slopes(rows)
    for r in rows:
        r["tolerance"] = list(SLOPE_BAND)
    checks = []
    for (i, l), s in slopes.items():
        rows.append({"d": d, "l": l, "i": i, "slope": s, "tolerance": list(SLOPE_BAND)})
        checks.append(_check(f"slope of R_{i},{l} in [-0.7, -0.3]", SLOPE_BAND[0] <= s <= SLOPE_BAND[1], s, bound=SLOPE_BAND[1]))
    return rows, checks


def run_cmap_schedule(cfg: RunConfig):
    f = _fock(cfg)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    T = RealContraction.identity(f.n)
    if cfg.projection_rank is not None:
        T = coordinate_projection(f.space, range(cfg.projection_rank))
    top = min(cfg.max_degree, f.L - 1)
    samples = [WickDecomposition({d: rng.standard_normal((f.n,) * d) for d in range(top + 1)})
               for _ in range(cfg.samples)]
    rows, checks = [], []
    for eps in cfg.eps:
        sched = cmap_schedule(f.q, eps, cfg.ts)
        for row in sched:
            n = min(row["n"], f.L - 1)
            ratios, residuals = [], []
            for x in samples:
                xo = x.reassemble(f)
                base = operator_norm(xo)
                ratios.append(operator_norm(cmap_approximant(f, n, row["t"], T, x)) / base)
                residuals.append(pointwise_residual(f, n, row["t"], x, T))
            row.update({"max_sampled_ratio": max(ratios), "max_pointwise_residual": max(residuals),
                        "tolerance": 1e-6})
            rows.append(row)
        ok = sched[-1]["bound"] < 1 + eps
        checks.append(_check(f"schedule reaches 1 + {eps}", ok, sched[-1]["bound"], bound=1 + eps))
        res = [r["max_pointwise_residual"] for r in sched]
        checks.append(_check(f"pointwise residual decreases (eps={eps})",
                             all(b <= a + NORM_TOL for a, b in zip(res, res[1:])), res[-1], bound=res[0]))
        worst = max(r["max_sampled_ratio"] - r["bound"] for r in sched)
        checks.append(_check(f"sampled ratio below bound (eps={eps})", worst <= 1e-6, worst, tolerance=1e-6))
    return rows, checks


DRIVERS = {
    "moments": run_moments,
    "wick-check": run_wick_check,
    "khintchine": run_khintchine,
    "multiplier-bound": run_multiplier_bound,
    "embedding-convergence": run_embedding_convergence,
    "remainder-decay": run_remainder_decay,
    "cmap-schedule": run_cmap_schedule,
}


# -- output -----------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        return x.real if x.imag == 0 else {"re": x.real, "im": x.imag}
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def run(cfg: RunConfig) -> tuple[int, dict]:
    rows, checks = DRIVERS[cfg.command](cfg)
    report = {
        "command": cfg.command,
        "config": asdict(cfg),
        "version": __version__,
        "rows": rows,
        "checks": checks,
    }
    return (0 if all(c["passed"] for c in checks) else 1), _jsonable(report)


def to_csv(report: dict) -> str:
    rows = report["rows"]
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in r.items()})
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qaraki", description="Numerical checks on truncated q-Fock spaces.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="report path (stdout if omitted)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int)
        p.add_argument("--max-cells", type=int, dest="max_cells")
        p.add_argument("--jobs", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config,
                          {"seed": args.seed, "max_cells": args.max_cells, "jobs": args.jobs})
        status, report = run(cfg)
    except MemoryBudgetExceeded as exc:
        print(f"memory budget exceeded: {exc}", file=sys.stderr)
        return 3
    except (InvalidArgument, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    text = to_csv(report) if args.format == "csv" else json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
