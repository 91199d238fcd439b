"""Experiment runner for the distributed saddle/VI solvers.

Subcommands
-----------
run           execute an (instance x solver x epsilon) grid from a config
              file, with per-run oracle ledgers, and write a CSV table plus
              one SVG plot (rounds against 1/epsilon) per instance.
hard-instance emit a worst-case chain construction as an instance file.
verify        run a built-in battery of invariant checks.
bounds        print the closed-form complexity bounds for an instance.

Config files are flat INI text.  ``[experiment]`` holds the grid (epsilon
list, solver list, seed, bound toggle); ``[instance]`` or ``[instance.*]``
sections declare instances inline in the problems module's serialization
format, or point at a file with ``file = path``; ``[solver.*]`` sections
override solver parameters.  Runs are deterministic for a fixed config and
seed; wall-clock fields come from an injectable clock so tests can pin
them.
"""

import argparse
import ast
import configparser
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from saddlesplit.accounting import OracleLedger, span_check
from saddlesplit.baselines import (
    ExtragradientParams, LocalGdaParams, extragradient_run, local_gda_run,
)
from saddlesplit.decoupled import (
    DecoupledParams, decoupled_saddle_run, decoupled_vi_run, split_prox_step,
    scaled_prox_check,
)
from saddlesplit.evaluation import complexity_bounds, restricted_gap, theta_factor
from saddlesplit.hard_instances import (
    chain_matrices, krylov_min_residual, make_hard_instance, make_hard_saddle,
)
from saddlesplit.metrics import ProductMetric, ScaledMetric
from saddlesplit.problems import (
    SaddleProblem, VipProblem, instance_from_section, load_instance,
    make_bilinear, random_polymatrix, save_instance,
)

SOLVERS = ("decoupled", "extragradient", "local_gda")
_GOOD_STATUSES = ("converged", "solution_found", "local_solve")

CSV_HEAD = ("instance_id", "solver", "epsilon", "rounds")
CSV_TAIL = ("weighted_cost", "gap", "gap_exact", "bound_comm",
            "bound_oracle", "compliant", "wall_ms")


class ConfigError(Exception):
    """Raised for malformed experiment configuration."""


@dataclass
class ExperimentConfig:
    instances: list                 # (instance_id, problem) pairs
    solvers: list
    epsilons: list
    seed: int = 0
    check_bounds: bool = False
    out_dir: str = "results"
    jobs: int = 1
    solver_params: dict = field(default_factory=dict)
    name: str = "experiment"


@dataclass
class ResultRow:
    instance_id: str
    solver: str
    epsilon: float
    rounds: int
    queries: dict
    weighted_cost: float
    gap: float              # None when unavailable
    gap_exact: bool
    bound_comm: float       # None when not applicable
    bound_oracle: float
    compliant: str          # "true" / "false" / ""
    wall_ms: int
    status: str = ""


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _literal(sec, key, where):
    try:
        return ast.literal_eval(sec[key])
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"bad literal for {key!r} in [{where}]: {exc}")


def parse_config(path, seed=None):
    """Parse an experiment file; `seed` overrides the config's own seed."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}")
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    exp = cp["experiment"]
    epsilons = _literal(exp, "epsilons", "experiment") if "epsilons" in exp \
        else [0.1]
    if not isinstance(epsilons, (list, tuple)) or not epsilons:
        raise ConfigError("epsilons must be a nonempty list")
    if any(e <= 0 for e in epsilons):
        raise ConfigError("epsilon grid entries must be positive")
    solvers = [s.strip() for s in exp.get("solvers", "decoupled").split(",")
               if s.strip()]
    for s in solvers:
        if s not in SOLVERS:
            raise ConfigError(
                f"unknown solver {s!r}; available: {', '.join(SOLVERS)}")
    seed = int(exp.get("seed", "0")) if seed is None else int(seed)
    check_bounds = exp.getboolean("check_bounds", fallback=False)
    out_dir = exp.get("out", "results")
    name = exp.get("name", "experiment")

    rng = np.random.default_rng(seed)
    base = os.path.dirname(os.path.abspath(path))
    instances = []
    for section in cp.sections():
        if section != "instance" and not section.startswith("instance."):
            continue
        sec = cp[section]
        iid = section.split(".", 1)[1] if "." in section else \
            sec.get("name", "instance")
        try:
            if "file" in sec:
                ref = sec["file"]
                if not os.path.isabs(ref):
                    ref = os.path.join(base, ref)
                problem = load_instance(ref)
            elif sec.get("kind") == "random_polymatrix":
                dims = tuple(_literal(sec, "dims", section))
                problem = random_polymatrix(
                    len(dims), dims, rng,
                    coupling=_literal(sec, "coupling", section)
                    if "coupling" in sec else 1.0,
                    diag=_literal(sec, "diag", section)
                    if "diag" in sec else 0.0,
                    name=iid)
            else:
                problem = instance_from_section(sec)
        except (KeyError, ValueError, OSError) as exc:
            raise ConfigError(f"cannot build instance [{section}]: {exc}")
        instances.append((iid, problem))
    if not instances:
        raise ConfigError("config declares no [instance] sections")

    solver_params = {}
    for section in cp.sections():
        if not section.startswith("solver."):
            continue
        sname = section.split(".", 1)[1]
        if sname not in SOLVERS:
            raise ConfigError(f"parameters for unknown solver {sname!r}")
        solver_params[sname] = {k: _literal(cp[section], k, section)
                                for k in cp[section]}

    return ExperimentConfig(
        instances=instances, solvers=solvers, epsilons=list(epsilons),
        seed=seed, check_bounds=check_bounds, out_dir=out_dir,
        solver_params=solver_params, name=name)


# ---------------------------------------------------------------------------
# running the grid
# ---------------------------------------------------------------------------

def _agents_of(problem):
    if isinstance(problem, VipProblem):
        return tuple(str(i + 1) for i in range(problem.K))
    return ("x", "y")


def _dispatch(problem, solver, eps, params, ledger):
    kw = dict(params)
    kw.pop("d_hat", None)
    if solver == "decoupled":
        p = DecoupledParams(epsilon=eps, d_hat=params.get("d_hat"), **kw)
        if isinstance(problem, VipProblem):
            return decoupled_vi_run(problem, p, ledger=ledger)
        return decoupled_saddle_run(problem, p, ledger=ledger)
    if isinstance(problem, VipProblem):
        raise ValueError(f"solver {solver!r} handles saddle problems only")
    if solver == "extragradient":
        p = ExtragradientParams(epsilon=eps, d_hat=params.get("d_hat"), **kw)
        return extragradient_run(problem, p, ledger=ledger)
    p = LocalGdaParams(epsilon=eps, **kw)
    return local_gda_run(problem, p, ledger=ledger)


def _bounds_for(problem, solver, eps, params):
    """Communication/oracle bounds that apply to this cell, or Nones."""
    if solver == "local_gda":
        return None, None
    report = complexity_bounds(problem, eps, d_hat=params.get("d_hat"))
    if isinstance(problem, VipProblem):
        if solver == "decoupled":
            return report.dmvip_comm, None
        return None, None
    if solver == "decoupled":
        return report.dmsp_comm, report.dmsp_oracle
    return report.eg_comm, report.eg_oracle


def run_cell(instance_id, problem, solver, eps, params, check_bounds,
             clock=time.perf_counter):
    ledger = OracleLedger(_agents_of(problem), costs=problem.costs)
    t0 = clock()
    status, gap = "", None
    try:
        result = _dispatch(problem, solver, eps, params, ledger)
        status, gap = result.status, result.gap
    except Exception as exc:                      # recorded, run continues
        status = f"error: {exc}"
    wall_ms = int(round((clock() - t0) * 1000.0))

    bound_comm = bound_oracle = None
    compliant = ""
    if check_bounds:
        bound_comm, bound_oracle = _bounds_for(problem, solver, eps, params)
        # A run that stops without the target accuracy violates the bound
        # just as surely as one that overruns the counts; only errored runs
        # (incomplete ledgers) stay unassessed.
        if bound_comm is not None and not status.startswith("error"):
            ok = status in _GOOD_STATUSES and ledger.round <= bound_comm + 1e-9
            if bound_oracle is not None:
                ok = ok and ledger.weighted_cost() <= bound_oracle + 1e-9
            compliant = "true" if ok else "false"
    return ResultRow(
        instance_id=instance_id, solver=solver, epsilon=float(eps),
        rounds=ledger.round, queries=dict(ledger.queries()),
        weighted_cost=float(ledger.weighted_cost()),
        gap=None if gap is None else float(gap.value),
        gap_exact=bool(gap.exact) if gap is not None else False,
        bound_comm=bound_comm, bound_oracle=bound_oracle,
        compliant=compliant, wall_ms=wall_ms, status=status)


def run_experiment(config, clock=time.perf_counter):
    """Execute the full grid; rows come back sorted by (instance, solver, eps)."""
    cells = [(iid, prob, solver, eps)
             for iid, prob in config.instances
             for solver in config.solvers
             for eps in config.epsilons]

    def work(cell):
        iid, prob, solver, eps = cell
        return run_cell(iid, prob, solver, eps,
                        config.solver_params.get(solver, {}),
                        config.check_bounds, clock)

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(work, cells))
    else:
        rows = [work(c) for c in cells]
    rows.sort(key=lambda r: (r.instance_id, r.solver, r.epsilon))
    return rows


# ---------------------------------------------------------------------------
# output artifacts
# ---------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_header(rows):
    agents = []
    for row in rows:
        for a in row.queries:
            if a not in agents:
                agents.append(a)
    return list(CSV_HEAD) + [f"queries_{a}" for a in agents] + list(CSV_TAIL)


def rows_to_csv(rows):
    header = csv_header(rows)
    agent_cols = [h[len("queries_"):] for h in header
                  if h.startswith("queries_")]
    lines = [",".join(header)]
    for r in rows:
        rec = [r.instance_id, r.solver, _fmt(r.epsilon), str(r.rounds)]
        rec += [_fmt(r.queries.get(a)) for a in agent_cols]
        rec += [_fmt(r.weighted_cost), _fmt(r.gap),
                "true" if r.gap_exact else "false",
                _fmt(r.bound_comm), _fmt(r.bound_oracle), r.compliant,
                str(r.wall_ms)]
        lines.append(",".join(rec))
    return "\n".join(lines) + "\n"


def read_results(path):
    """Parse a results.csv back into a list of field dictionaries."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


_PALETTE = ("#1b6ca8", "#c84b31", "#3a7d44", "#8d5fd3", "#c49b0b")


def _svg_plot(instance_id, rows):
    """Hand-written log-log polyline plot: rounds against 1/epsilon."""
    width, height, margin = 640, 440, 60
    pts_by_solver = {}
    for r in rows:
        if r.rounds > 0:
            pts_by_solver.setdefault(r.solver, []).append(
                (1.0 / r.epsilon, max(r.rounds, 1)))
    xs = [x for pts in pts_by_solver.values() for x, _ in pts]
    ys = [y for pts in pts_by_solver.values() for _, y in pts]
    if not xs:
        xs, ys = [1.0, 10.0], [1.0, 10.0]
    lx0, lx1 = math.floor(math.log10(min(xs))), math.ceil(math.log10(max(xs)))
    ly0, ly1 = math.floor(math.log10(min(ys))), math.ceil(math.log10(max(ys)))
    lx1, ly1 = max(lx1, lx0 + 1), max(ly1, ly0 + 1)

    def sx(v):
        return margin + (math.log10(v) - lx0) / (lx1 - lx0) * (width - 2 * margin)

    def sy(v):
        return height - margin - (math.log10(v) - ly0) / (ly1 - ly0) * \
            (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 15}" text-anchor="middle" '
        f'font-size="13">1/epsilon (log)</text>',
        f'<text x="18" y="{height // 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {height // 2})">rounds (log)</text>',
        f'<text x="{width // 2}" y="25" text-anchor="middle" '
        f'font-size="14">{instance_id}</text>',
    ]
    for d in range(lx0, lx1 + 1):
        x = sx(10.0 ** d)
        parts.append(f'<line x1="{x:.2f}" y1="{height - margin}" '
                     f'x2="{x:.2f}" y2="{height - margin + 6}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{height - margin + 20}" '
                     f'text-anchor="middle" font-size="11">1e{d}</text>')
    for d in range(ly0, ly1 + 1):
        y = sy(10.0 ** d)
        parts.append(f'<line x1="{margin - 6}" y1="{y:.2f}" x2="{margin}" '
                     f'y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{margin - 10}" y="{y + 4:.2f}" '
                     f'text-anchor="end" font-size="11">1e{d}</text>')
    for idx, (solver, pts) in enumerate(sorted(pts_by_solver.items())):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = sorted(pts)
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" '
                         f'fill="{color}"/>')
        ly = 40 + 16 * idx
        parts.append(f'<line x1="{width - margin - 110}" y1="{ly}" '
                     f'x2="{width - margin - 80}" y2="{ly}" stroke="{color}" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{width - margin - 74}" y="{ly + 4}" '
                     f'font-size="12">{solver}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_outputs(rows, directory):
    """Write results.csv and one SVG per instance; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    csv_path = os.path.join(directory, "results.csv")
    with open(csv_path, "w") as fh:
        fh.write(rows_to_csv(rows))
    paths.append(csv_path)
    by_instance = {}
    for r in rows:
        by_instance.setdefault(r.instance_id, []).append(r)
    for iid in sorted(by_instance):
        safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in iid)
        svg_path = os.path.join(directory, f"{safe}.svg")
        with open(svg_path, "w") as fh:
            fh.write(_svg_plot(iid, by_instance[iid]))
        paths.append(svg_path)
    return paths


# ---------------------------------------------------------------------------
# verify battery
# ---------------------------------------------------------------------------

def _verify_battery():
    """Deterministic invariant checks across the library; yields (name, ok)."""
    rng = np.random.default_rng(42)

    def metric_duality():
        for _ in range(50):
            w = ScaledMetric(1.0 + rng.random(6))
            z, g = rng.normal(size=6), rng.normal(size=6)
            if abs(float(g @ z)) > w.dual_norm(g) * w.norm(z) + 1e-9:
                return False
            if not np.isclose(w.dual_norm(w.apply(z)), w.norm(z)):
                return False
        return True

    def ledger_bookkeeping():
        led = OracleLedger(("x", "y"), costs=(2.0, 3.0))
        fx = led.bind("x", lambda p: np.ones(2))
        fx(np.zeros(2))
        led.end_round()
        fx(np.ones(2))
        led.end_round()
        ok = led.round == 2 and led.queries()["x"] == 2
        ok = ok and np.isclose(led.weighted_cost(), 4.0)
        member, _ = span_check(led, "x", np.full(2, 0.5), np.zeros(2),
                               ScaledMetric(2))
        return ok and member

    def theta_properties():
        if not np.isclose(theta_factor(1, 1, 3, 3), 2.0):
            return False
        for _ in range(100):
            d = 0.1 + rng.random(4)
            if theta_factor(d[0], d[1], d[0] * (1 + d[2]),
                            d[1] * (1 + d[3])) < 2.0 - 1e-12:
                return False
        return True

    def chain_identity():
        for p in (3, 7, 21):
            B, M = chain_matrices(p)
            if not np.array_equal(B.T @ B, M):
                return False
        return True

    def krylov_closed_form():
        inst = make_hard_instance(L=1.0, D=1.0, k=5)
        for k in range(1, 6):
            got = krylov_min_residual(inst, k)
            p = inst.p
            want = inst.L ** 2 * inst.gamma ** 2 * (
                (p - k) ** 2 / ((k + 1) * (p + 1) ** 2)
                + (p - k) / (p + 1) ** 2) / 8.0
            if not np.isclose(got, want, rtol=1e-9):
                return False
        resid = np.linalg.norm(inst.A @ inst.v_star - inst.b)
        return resid <= 1e-10 * (1 + np.linalg.norm(inst.b))

    def gap_nonnegative():
        prob = make_bilinear(np.array([[1.0, 0.3], [0.0, 0.8]]),
                             np.array([0.2, -0.1]))
        for _ in range(25):
            x = rng.normal(size=2)
            x *= min(1.0, 1.0 / np.linalg.norm(x))
            y = rng.normal(size=2)
            y *= min(1.0, 1.0 / np.linalg.norm(y))
            if restricted_gap(prob, (x, y)).value < -1e-10:
                return False
        return True

    def split_meets_joint_check():
        from saddlesplit.problems import ZeroTerm
        one = ScaledMetric(1)
        for _ in range(10):
            vx, vy = rng.normal(size=2) * 2.0
            c = 0.5 + rng.random()
            z, subs, _ = split_prox_step(
                [lambda w: np.array([c * vy]), lambda w: np.array([-c * vx])],
                [ZeroTerm(), ZeroTerm()], [one, one], [c, c],
                [np.array([vx]), np.array([vy])], 2.0, [0.0, 0.0],
                [True, True])
            V = np.array([c * z[1][0], -c * z[0][0]])
            ok, _, _ = scaled_prox_check(
                V, np.concatenate(subs), np.concatenate(z),
                np.array([vx, vy]), 2.0,
                ProductMetric([(one, c), (one, c)]))
            if not ok:
                return False
        return True

    checks = [
        ("metric duality", metric_duality),
        ("ledger bookkeeping and span membership", ledger_bookkeeping),
        ("theta factor lower bound", theta_properties),
        ("chain factorization integer identity", chain_identity),
        ("krylov residual closed form", krylov_closed_form),
        ("restricted gap nonnegativity", gap_nonnegative),
        ("split step joint criterion", split_meets_joint_check),
    ]
    for name, fn in checks:
        yield name, bool(fn())


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_run(args):
    try:
        config = parse_config(args.config, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.check_bounds:
        config.check_bounds = True
    if args.jobs is not None:
        config.jobs = max(1, args.jobs)
    out_dir = args.out if args.out is not None else config.out_dir
    rows = run_experiment(config)
    paths = emit_outputs(rows, out_dir)
    for p in paths:
        print(f"wrote {p}")
    bad = [r for r in rows if r.compliant == "false"]
    for r in bad:
        print(f"bound violation: {r.instance_id}/{r.solver} at "
              f"epsilon={r.epsilon}", file=sys.stderr)
    return 1 if bad else 0


def _cmd_hard_instance(args):
    try:
        problem = make_hard_saddle(args.kind, L=args.L, D=args.D, k=args.k)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    save_instance(problem, args.out)
    print(f"wrote {args.out} (kind={args.kind}, L={args.L}, D={args.D}, "
          f"k={args.k})")
    return 0


def _cmd_verify(_args):
    failures = 0
    for name, ok in _verify_battery():
        print(f"{'ok  ' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1
    return 1 if failures else 0


def _cmd_bounds(args):
    try:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        cp = configparser.ConfigParser()
        with open(args.config) as fh:
            cp.read_file(fh)
        if "instance" not in cp:
            raise ConfigError("missing [instance] section")
        problem = instance_from_section(cp["instance"])
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    d_hat = tuple(ast.literal_eval(args.d_hat)) if args.d_hat else None
    report = complexity_bounds(problem, args.epsilon, d_hat=d_hat)
    for key, value in report.as_dict().items():
        print(f"{key} = {value}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="saddlesplit",
        description="benchmark runner for decoupled saddle/VI solvers")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment grid")
    run_p.add_argument("--config", required=True, help="experiment INI file")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--jobs", type=int, default=None)
    run_p.add_argument("--check-bounds", action="store_true")
    run_p.set_defaults(func=_cmd_run)

    hard_p = sub.add_parser("hard-instance",
                            help="emit a worst-case chain construction")
    hard_p.add_argument("--kind", choices=("xy", "x", "y"), default="xy")
    hard_p.add_argument("--L", type=float, default=1.0)
    hard_p.add_argument("--D", type=float, default=1.0)
    hard_p.add_argument("--k", type=int, required=True)
    hard_p.add_argument("--out", required=True)
    hard_p.set_defaults(func=_cmd_hard_instance)

    ver_p = sub.add_parser("verify", help="run the invariant battery")
    ver_p.set_defaults(func=_cmd_verify)

    bnd_p = sub.add_parser("bounds", help="print complexity bounds")
    bnd_p.add_argument("--config", required=True)
    bnd_p.add_argument("--epsilon", type=float, required=True)
    bnd_p.add_argument("--d-hat", default=None,
                       help="distance estimates, e.g. '(2.0, 2.0)'")
    bnd_p.set_defaults(func=_cmd_bounds)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
