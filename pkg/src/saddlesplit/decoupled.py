"""Anchored proximal-point solver with communication-free inner solves.

Outer loop.  Each iteration approximately solves the metric-regularised
inclusion ``0 in V(z) + psi'(z) + lam P (z - v)`` to relative accuracy
(the scaled-prox criterion below), queries the operator at the new point,
forms the step weight

    a = 2 <V_psi(z), v - z> / ||V_psi(z)||_*^2   (always >= 1/lam),

updates the ergodic candidate with weight ``a`` and moves the anchor by a
projected dual step.  Two communication rounds per iteration: one to
exchange the block solutions, one to exchange operator values.

Inner solves.  The regularised subproblem splits across agents once the
remote blocks are frozen at the anchor: block ``i`` minimises its own
strongly-convex model to relative accuracy ``delta_i = alpha_i lam / 2``
(the relative-residual criterion).  Two inner engines are provided: a
staged accelerated gradient method with restarts for blocks whose operator
is a gradient, and an anchored extragradient loop for general monotone
blocks.  Neither touches a remote oracle, which is what keeps the round
count independent of the single-agent conditioning.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from saddlesplit.accounting import OracleLedger, RunResult
from saddlesplit.evaluation import restricted_gap, theta_factor
from saddlesplit.metrics import ProductMetric
from saddlesplit.problems import (
    QuadraticReg, RegularizedTerm, ZeroTerm, argmin_linear,
)

_ZERO_OPERATOR_TOL = 1e-14
_CHECK_SLACK = 1e-10
_FEG_QUERY_CAP = 1000000


# ---------------------------------------------------------------------------
# tasks and accuracy checks
# ---------------------------------------------------------------------------

@dataclass
class BlockTask:
    """One agent's regularised subproblem.

    ``operator`` maps a block vector to a covector (queries are counted by
    whoever constructed the closure).  ``psi`` is the full composite term of
    the subproblem, including any anchor regulariser.  ``strong`` is a known
    strong-monotonicity modulus of ``operator + psi'`` in the block metric
    (0 when unknown); ``lipschitz`` bounds the operator's variation.
    """
    operator: object
    psi: object
    anchor: np.ndarray
    metric: object
    lipschitz: float
    strong: float = 0.0
    delta: float = None


@dataclass
class BlockSolveResult:
    point: np.ndarray
    subgrad: np.ndarray
    queries: int
    residual: float
    operator_value: np.ndarray
    exit: str
    info: dict = field(default_factory=dict)


def relative_residual_check(task, point, subgrad, operator_value=None,
                            slack=_CHECK_SLACK):
    """Relative stationarity: ``||V(w) + psi'(w)||_* <= delta ||w - v||``.

    Passing `operator_value` avoids spending an oracle query on the check.
    Returns ``(ok, residual, threshold)``.
    """
    if operator_value is None:
        operator_value = task.operator(point)
    r = task.metric.dual_norm(np.asarray(operator_value) + np.asarray(subgrad))
    thr = task.delta * task.metric.norm(point - task.anchor)
    return r <= thr + slack, r, thr


def scaled_prox_check(V_value, psi_prime, z_plus, anchor, lam, metric,
                      slack=_CHECK_SLACK):
    """Joint relative criterion for the regularised inclusion.

    ``||V(z) + psi'(z) + lam P (z - v)||_* <= lam ||z - v||`` in the
    assembled metric.  All arguments are joint vectors; the operator value
    is always supplied by the caller (reuse the exchanged one).
    """
    lhs = metric.dual_norm(np.asarray(V_value) + np.asarray(psi_prime)
                           + lam * metric.apply(np.asarray(z_plus) - anchor))
    rhs = lam * metric.norm(np.asarray(z_plus) - anchor)
    return lhs <= rhs + slack, lhs, rhs


def anchor_weight(v_psi, anchor, z_plus, metric, lam):
    """Step weight ``a = 2 <V_psi, v - z> / ||V_psi||_*^2``; always >= 1/lam."""
    dual = metric.dual_norm(v_psi)
    a = 2.0 * float(np.dot(v_psi, anchor - z_plus)) / dual ** 2
    if a < (1.0 / lam) * (1.0 - 1e-9) - 1e-12:
        raise AssertionError(
            f"step weight {a} fell below 1/lambda = {1.0 / lam}")
    return a


def sp_coupling(L_xy, alpha_x, alpha_y):
    """Scaled coupling constant of a two-agent saddle problem."""
    return L_xy / math.sqrt(alpha_x * alpha_y)


def vip_coupling(L, alphas, D):
    """Scaled coupling constant of a block VIP (cross terms only).

    ``Lc^2 = max_j (alpha_j D_j)^{-1} sum_{i != j} L_ij
    (sum_{l != i} L_il D_l) / alpha_i``.
    """
    K = len(alphas)
    worst = 0.0
    for j in range(K):
        s = 0.0
        for i in range(K):
            if i == j:
                continue
            inner = sum(L[i][l] * D[l] for l in range(K) if l != i)
            s += L[i][j] * inner / alphas[i]
        worst = max(worst, s / (alphas[j] * D[j]))
    return math.sqrt(worst)


# ---------------------------------------------------------------------------
# inner engine: staged accelerated gradient on the residual
# ---------------------------------------------------------------------------

@dataclass
class AgdSchedule:
    stages: int
    sigmas: list
    counts: list

    @property
    def total(self):
        return sum(self.counts)


def agd_schedule(L, xi):
    """Stage plan: regularisations ``sigma_k = 4^{k-3} (2 xi / 3)`` and
    per-stage iteration counts ``N_k = ceil(16 sqrt(L / sigma_k))``."""
    if xi <= 0:
        raise ValueError("target accuracy xi must be positive")
    if L <= 0:
        raise ValueError("schedule needs a positive Lipschitz constant")
    tau = 2 + max(0, math.ceil(math.log(3.0 * L / (2.0 * xi), 4.0)))
    sigmas = [4.0 ** (k - 3) * (2.0 * xi / 3.0) for k in range(1, tau + 1)]
    counts = [math.ceil(16.0 * math.sqrt(L / s)) for s in sigmas]
    return AgdSchedule(stages=tau, sigmas=sigmas, counts=counts)


def _solve_constant_operator(task, counter):
    """Constant-operator fast path: one probe fixes the whole subproblem."""
    c = np.asarray(task.operator(task.anchor), dtype=float)
    counter[0] += 1
    w = argmin_linear(task.psi, task.metric, c, fallback=task.anchor)
    # Optimality of the linear-plus-composite problem gives -c in the
    # subdifferential exactly, so the residual vanishes.
    return BlockSolveResult(point=w, subgrad=-c, queries=counter[0],
                            residual=0.0, operator_value=c, exit="constant")


def _differentiable(psi):
    if isinstance(psi, (ZeroTerm, QuadraticReg)):
        return True
    if isinstance(psi, RegularizedTerm):
        return isinstance(psi.base, (ZeroTerm, QuadraticReg))
    return False


def residual_agd(task, xi):
    """Drive the subproblem residual below ``xi * ||v - w_opt||``.

    Runs stages of FISTA on increasingly weakly regularised models; a
    subgradient of ``psi`` at every prox output comes for free from the
    prox optimality condition, so the stationarity residual is measurable.

    Two certificates can end the run early, both implying the target:
    with a known strong-monotonicity modulus ``mu``, a residual below
    ``xi mu / (mu + xi) * ||w - v||`` suffices; with differentiable ``psi``
    the first query gives ``r0 = ||grad at v||`` and a residual below
    ``xi r0 / L_total`` suffices.  Certificate probes cost one counted
    query each and run on a doubling schedule.  If nothing fires, the full
    stage plan runs to completion, which guarantees the target on its own.
    """
    metric, psi, v = task.metric, task.psi, task.anchor
    counter = [0]

    def op(w):
        counter[0] += 1
        out = np.asarray(task.operator(w), dtype=float)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("operator returned nonfinite values")
        return out

    if task.lipschitz == 0.0:
        return _solve_constant_operator(task, counter)

    mu_quad = psi.quad.mu if isinstance(psi, RegularizedTerm) else (
        psi.mu if isinstance(psi, QuadraticReg) else 0.0)
    L_total = task.lipschitz + mu_quad
    smooth_psi = _differentiable(psi)

    g_anchor = op(v)
    start_sub = psi.subgradient(metric, v)
    r0 = metric.dual_norm(g_anchor + start_sub)
    if r0 <= _ZERO_OPERATOR_TOL:
        return BlockSolveResult(point=v.copy(), subgrad=start_sub,
                                queries=counter[0], residual=r0,
                                operator_value=g_anchor, exit="anchor")

    lip_floor = xi * r0 / L_total if smooth_psi else -1.0
    mu = task.strong

    def certified(r, w):
        if r <= lip_floor:
            return "certificate-lip"
        if mu > 0 and r <= (xi * mu / (mu + xi)) * metric.norm(w - v):
            return "certificate-mu"
        return None

    plan = agd_schedule(task.lipschitz, xi)
    w_stage = v.copy()
    w_tilde = v.copy()
    g_cached = g_anchor           # operator value at w_stage when available
    best = None
    for k in range(plan.stages):
        sigma = plan.sigmas[k]
        gamma = 1.0 if k == 0 else 1.0 - plan.sigmas[k - 1] / sigma
        w_tilde = (1.0 - gamma) * w_tilde + gamma * w_stage
        Lk = task.lipschitz + sigma
        x = w_stage.copy()
        y = w_stage.copy()
        t = 1.0
        g_y = g_cached      # operator value at y == w_stage is already known
        next_check = 1
        for i in range(plan.counts[k]):
            if g_y is None:
                g_y = op(y)
            model_grad = g_y + sigma * metric.apply(y - w_tilde)
            x_next = psi.prox(metric, y - metric.apply_inv(model_grad) / Lk,
                              1.0 / Lk)
            if not np.all(np.isfinite(x_next)):
                raise FloatingPointError("inner iterate became nonfinite")
            sub = -model_grad - Lk * metric.apply(x_next - y)
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_next + ((t - 1.0) / t_next) * (x_next - x)
            x, t = x_next, t_next
            g_y = None
            last = i == plan.counts[k] - 1
            if i + 1 == next_check or last:
                next_check *= 2
                g_x = op(x)
                r = metric.dual_norm(g_x + sub)
                best = BlockSolveResult(
                    point=x, subgrad=sub, queries=counter[0], residual=r,
                    operator_value=g_x, exit="schedule",
                    info={"stage": k + 1})
                tag = certified(r, x)
                if tag is not None:
                    best.exit = tag
                    return best
        w_stage = x
        g_cached = best.operator_value
    best.queries = counter[0]
    return best


# ---------------------------------------------------------------------------
# inner engine: anchored extragradient for general monotone blocks
# ---------------------------------------------------------------------------

def anchored_eg(task, xi=None):
    """Anchored extragradient until the relative-residual criterion holds.

    Iterates pull toward the anchor with Halpern weights ``1/(t+2)``; the
    prox optimality condition at the trial point supplies the subgradient,
    and the second operator query of the iteration doubles as the residual
    measurement.  With a known strong modulus the stricter certified
    threshold is used so the result also meets the distance-based target.
    """
    metric, psi, v = task.metric, task.psi, task.anchor
    if task.delta is None:
        raise ValueError("the anchored loop needs a relative target delta")
    counter = [0]

    def op(w):
        counter[0] += 1
        out = np.asarray(task.operator(w), dtype=float)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("operator returned nonfinite values")
        return out

    if task.lipschitz == 0.0:
        return _solve_constant_operator(task, counter)
    if xi is None:
        xi = 2.0 * task.delta / 3.0
    if task.strong > 0:
        factor = min(task.delta, xi * task.strong / (task.strong + xi))
    else:
        factor = task.delta

    eta = 1.0 / (2.0 * task.lipschitz)
    w = v.copy()
    t = 0
    while counter[0] < _FEG_QUERY_CAP:
        w_tilde = w + (v - w) / (t + 2.0)
        g_tilde = op(w_tilde)
        if t == 0:
            sub0 = psi.subgradient(metric, w_tilde)
            r_start = metric.dual_norm(g_tilde + sub0)
            if r_start <= _ZERO_OPERATOR_TOL:
                return BlockSolveResult(point=w_tilde, subgrad=sub0,
                                        queries=counter[0], residual=r_start,
                                        operator_value=g_tilde, exit="anchor")
        u = psi.prox(metric, w_tilde - eta * metric.apply_inv(g_tilde), eta)
        sub = metric.apply(w_tilde - u) / eta - g_tilde
        g_u = op(u)
        r = metric.dual_norm(g_u + sub)
        if r <= factor * metric.norm(u - v) + _CHECK_SLACK:
            return BlockSolveResult(point=u, subgrad=sub, queries=counter[0],
                                    residual=r, operator_value=g_u,
                                    exit="residual", info={"iterations": t + 1})
        w = psi.prox(metric, w_tilde - eta * metric.apply_inv(g_u), eta)
        if not np.all(np.isfinite(w)):
            raise FloatingPointError("inner iterate became nonfinite")
        t += 1
    raise RuntimeError("anchored extragradient hit its query cap without "
                       "meeting the relative criterion")


# ---------------------------------------------------------------------------
# frozen-remote splitting step
# ---------------------------------------------------------------------------

def split_prox_step(operators, psis, metrics, alphas, anchors, lam,
                    lipschitz, inner_flags, strongs=None):
    """One decoupled solve of the regularised inclusion.

    Each block minimises its own model with the remote blocks frozen at the
    anchor: the composite is ``psi_i`` plus the quadratic anchor term with
    modulus ``alpha_i * lam``; the relative target is ``alpha_i * lam / 2``.
    Returns the block solutions, the de-regularised subgradients of the
    original ``psi_i``, and per-block diagnostics.  The relative-residual
    criterion is asserted on every block before returning.
    """
    K = len(operators)
    z_parts, sub_parts, diags = [], [], []
    for i in range(K):
        mu = alphas[i] * lam
        reg = RegularizedTerm(QuadraticReg(mu, anchors[i]), psis[i])
        task = BlockTask(operator=operators[i], psi=reg, anchor=anchors[i],
                         metric=metrics[i], lipschitz=lipschitz[i],
                         strong=mu if strongs is None else mu + strongs[i],
                         delta=mu / 2.0)
        if inner_flags[i]:
            res = residual_agd(task, xi=mu / 3.0)
        else:
            res = anchored_eg(task)
        ok, r, thr = relative_residual_check(
            task, res.point, res.subgrad, operator_value=res.operator_value)
        if not ok:
            raise AssertionError(
                f"block {i} inner solve missed its relative target: "
                f"residual {r} > {thr}")
        # Remove the anchor regulariser's gradient to recover a subgradient
        # of the original composite term.
        dereg = res.subgrad - mu * metrics[i].apply(res.point - anchors[i])
        z_parts.append(res.point)
        sub_parts.append(dereg)
        diags.append(res)
    return z_parts, sub_parts, diags


# ---------------------------------------------------------------------------
# outer loop
# ---------------------------------------------------------------------------

def _prox_point_loop(metric, psis, metrics, v_parts, lam, inner_step,
                     query_joint, ledger, gap_fn, epsilon, max_rounds,
                     gap_stride=1, reference=None):
    """Shared outer loop; see the module docstring for the iteration."""
    join = metric.join
    v = [p.copy() for p in v_parts]
    acc = [np.zeros_like(p) for p in v_parts]
    a_sum = 0.0
    candidate = [p.copy() for p in v_parts]
    round_candidates = []
    gap = None
    status = "budget_exhausted"
    telescope_lhs = 0.0
    v0_joint = join(v)
    ref_joint = join(reference) if reference is not None else None
    a_history = []
    iteration = 0

    while ledger.round < max_rounds:
        z_parts, sub_parts, diags = inner_step(v, lam)
        ledger.end_round()
        round_candidates.append([c.copy() for c in candidate])
        V_parts = query_joint(z_parts)
        ledger.end_round()
        iteration += 1

        z_joint = join(z_parts)
        v_joint = join(v)
        V_joint = join(V_parts)
        sub_joint = join(sub_parts)
        v_psi = V_joint + sub_joint

        dual = metric.dual_norm(v_psi)
        if dual <= _ZERO_OPERATOR_TOL:
            candidate = [z.copy() for z in z_parts]
            round_candidates.append([c.copy() for c in candidate])
            status = "solution_found"
            gap = gap_fn(candidate) if gap_fn is not None else None
            break

        ok, lhs, rhs = scaled_prox_check(V_joint, sub_joint, z_joint,
                                         v_joint, lam, metric)
        if not ok:
            raise AssertionError(
                f"scaled-prox criterion violated: {lhs} > {rhs}")

        a = anchor_weight(v_psi, v_joint, z_joint, metric, lam)
        a_history.append(a)
        a_sum += a
        acc = [ai + a * zi for ai, zi in zip(acc, z_parts)]
        candidate = [ai / a_sum for ai in acc]

        half = v_joint - a * metric.apply_inv(v_psi)
        half_parts = metric.split(half)
        v = [psis[i].project_domain(metrics[i], half_parts[i])
             for i in range(len(v))]

        if ref_joint is not None:
            telescope_lhs += a * float(np.dot(v_psi, z_joint - ref_joint))
            budget = (0.5 * metric.norm(v0_joint - ref_joint) ** 2
                      - 0.5 * metric.norm(join(v) - ref_joint) ** 2)
            if telescope_lhs > budget + 1e-8:
                raise AssertionError(
                    f"telescoped progress inequality violated: "
                    f"{telescope_lhs} > {budget}")

        round_candidates.append([c.copy() for c in candidate])
        if gap_fn is not None and iteration % gap_stride == 0:
            gap = gap_fn(candidate)
            if gap.value <= epsilon:
                status = "converged"
                break

    if status == "budget_exhausted" and gap_fn is not None:
        gap = gap_fn(candidate)
        if gap.value <= epsilon:
            status = "converged"
    return {
        "status": status, "candidate": candidate, "gap": gap,
        "round_candidates": round_candidates, "a_history": a_history,
        "iterations": iteration, "telescope_lhs": telescope_lhs,
    }


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

@dataclass
class DecoupledParams:
    epsilon: float
    d_hat: tuple = None
    lam: float = 2.0
    max_rounds: int = None
    gap_stride: int = 1


def decoupled_saddle_run(problem, params, ledger=None, domain=None):
    """Decoupled solver for two-agent saddle problems.

    Scalings ``alpha_x = L_xy Dhat_y / Dhat_x`` (and symmetrically) make
    the scaled coupling constant equal to one, so the default ``lam = 2``
    meets the weak-coupling requirement with equality.  When the agents do
    not interact at all (``L_xy = 0``) the run degenerates to one local
    solve per agent and a single exchange; see `_local_saddle_solve`.
    """
    p = problem
    if ledger is None:
        ledger = OracleLedger(("x", "y"), costs=p.costs)
    d_hat = params.d_hat if params.d_hat is not None else (p.D_x, p.D_y)
    if p.L_xy == 0.0:
        return _local_saddle_solve(p, params, ledger, domain, d_hat)
    ax = p.L_xy * d_hat[1] / d_hat[0]
    ay = p.L_xy * d_hat[0] / d_hat[1]
    lam = params.lam
    if lam < 2.0 * sp_coupling(p.L_xy, ax, ay) - 1e-12:
        raise ValueError("lam is below twice the scaled coupling constant")
    metric = ProductMetric([(p.metric_x, ax), (p.metric_y, ay)])
    ox = ledger.bind("x", p.grad_x)
    oy = ledger.bind("y", p.grad_y)

    def inner_step(v, lam_t):
        def op_x(w):
            return ox((w, v[1]))

        def op_y(w):
            return p.vy_from_raw(oy((v[0], w)))

        return split_prox_step(
            [op_x, op_y], [p.psi_x, p.psi_y], [p.metric_x, p.metric_y],
            [ax, ay], v, lam_t, [p.L_x, p.L_y], inner_flags=[True, True])

    def query_joint(z):
        zt = (z[0], z[1])
        return [ox(zt), p.vy_from_raw(oy(zt))]

    def gap_fn(cand):
        return restricted_gap(p, (cand[0], cand[1]), domain)

    theta = theta_factor(p.D_x, p.D_y, d_hat[0], d_hat[1])
    max_rounds = params.max_rounds
    if max_rounds is None:
        max_rounds = math.ceil(
            2.0 + 2.0 * theta * p.L_xy * p.D_x * p.D_y / params.epsilon) + 2

    ref = list(p.saddle) if p.saddle is not None else None
    out = _prox_point_loop(
        metric, [p.psi_x, p.psi_y], [p.metric_x, p.metric_y],
        list(p.z0), lam, inner_step, query_joint, ledger, gap_fn,
        params.epsilon, max_rounds, params.gap_stride, reference=ref)
    return RunResult(
        status=out["status"], candidate=(out["candidate"][0],
                                         out["candidate"][1]),
        gap=out["gap"], rounds=ledger.round, ledger=ledger,
        round_candidates=[(c[0], c[1]) for c in out["round_candidates"]],
        info={"alpha": (ax, ay), "lam": lam, "a_history": out["a_history"],
              "iterations": out["iterations"], "theta": theta,
              "telescope_lhs": out["telescope_lhs"]})


def _local_saddle_solve(p, params, ledger, domain, d_hat):
    """Fully decoupled case: each agent minimises its own side locally.

    The residual target ``xi_i = eps / (4 Dhat_i^2)`` turns a stationarity
    residual into a gap contribution of at most ``eps / 2`` per agent over
    the restriction ball.  Two rounds: one of local work, one exchange.
    """
    ox = ledger.bind("x", p.grad_x)
    oy = ledger.bind("y", p.grad_y)
    results = []
    for side, oracle, psi, metric, L, v0, dh in (
            ("x", lambda w: ox((w, p.y0)), p.psi_x, p.metric_x, p.L_x,
             p.x0, d_hat[0]),
            ("y", lambda w: p.vy_from_raw(oy((p.x0, w))), p.psi_y,
             p.metric_y, p.L_y, p.y0, d_hat[1])):
        task = BlockTask(operator=oracle, psi=psi, anchor=v0, metric=metric,
                         lipschitz=L, strong=0.0, delta=None)
        if L == 0.0:
            res = _solve_constant_operator(task, [0])
        else:
            res = residual_agd(task, xi=params.epsilon / (4.0 * dh * dh))
        results.append(res)
    ledger.end_round()
    candidate = (results[0].point, results[1].point)
    ledger.end_round()
    gap = restricted_gap(p, candidate, domain)
    status = "local_solve" if gap.value <= params.epsilon else "budget_exhausted"
    return RunResult(status=status, candidate=candidate, gap=gap,
                     rounds=ledger.round, ledger=ledger,
                     round_candidates=[candidate, candidate],
                     info={"local": True,
                           "inner_queries": [r.queries for r in results]})


def decoupled_vi_run(problem, params, ledger=None, domain=None):
    """Decoupled solver for block variational inequalities.

    Scalings ``alpha_i = sum_{j != i} L_ij Dhat_j / Dhat_i`` balance the
    cross-coupling; blocks with ``alpha_i = 0`` are solved locally once and
    frozen.  Gradient blocks use the staged accelerated engine, the rest
    the anchored extragradient loop.
    """
    p = problem
    K = p.K
    agents = tuple(str(i + 1) for i in range(K))
    if ledger is None:
        ledger = OracleLedger(agents, costs=p.costs)
    d_hat = params.d_hat if params.d_hat is not None else list(p.D)
    alphas_all = [sum(p.L[i, j] * d_hat[j] for j in range(K) if j != i)
                  / d_hat[i] for i in range(K)]
    active = [i for i in range(K) if alphas_all[i] > 0]
    for i in range(K):
        if alphas_all[i] == 0.0 and any(p.L[j, i] != 0.0 for j in range(K)
                                        if j != i):
            raise ValueError(
                f"block {i} has no outgoing coupling but others depend on "
                "it; freezing it would change their subproblems")
    frozen = {}
    oracles = [ledger.bind(agents[i], p.operators[i]) for i in range(K)]

    z_work = [b.copy() for b in p.z0]
    for i in range(K):
        if i in active:
            continue
        # Fully decoupled block: its operator ignores the others, so one
        # local solve pins it for the rest of the run.
        def op_i(w, i=i):
            probe = [q.copy() for q in z_work]
            probe[i] = w
            return oracles[i](probe)
        task = BlockTask(operator=op_i, psi=p.psis[i], anchor=p.z0[i],
                         metric=p.metrics[i], lipschitz=float(p.L[i, i]),
                         strong=0.0, delta=None)
        if task.lipschitz == 0.0:
            res = _solve_constant_operator(task, [0])
        else:
            res = residual_agd(
                task, xi=params.epsilon / (4.0 * d_hat[i] * d_hat[i]))
        frozen[i] = res.point
        z_work[i] = res.point

    if not active:
        ledger.end_round()
        ledger.end_round()
        candidate = [z_work[i].copy() for i in range(K)]
        gap = restricted_gap(p, candidate, domain)
        status = ("local_solve" if gap.value <= params.epsilon
                  else "budget_exhausted")
        return RunResult(status=status, candidate=candidate, gap=gap,
                         rounds=ledger.round, ledger=ledger,
                         round_candidates=[candidate],
                         info={"local": True})

    act_alphas = [alphas_all[i] for i in active]
    act_metrics = [p.metrics[i] for i in active]
    act_psis = [p.psis[i] for i in active]
    Lsub = [[float(p.L[i, j]) for j in active] for i in active]
    Dsub = [d_hat[i] for i in active]
    coupling = vip_coupling(Lsub, act_alphas, Dsub)
    lam = params.lam if params.lam is not None else 2.0 * coupling
    if lam < 2.0 * coupling - 1e-9:
        raise ValueError("lam is below twice the scaled coupling constant")
    metric = ProductMetric([(p.metrics[i], alphas_all[i]) for i in active])

    def full_point(parts_active):
        full = [frozen[i].copy() if i in frozen else None for i in range(K)]
        for pos, i in enumerate(active):
            full[i] = parts_active[pos]
        return full

    def inner_step(v, lam_t):
        anchor_full = full_point(v)

        def make_op(pos, i):
            def op(w):
                probe = [q.copy() for q in anchor_full]
                probe[i] = w
                return oracles[i](probe)
            return op

        ops = [make_op(pos, i) for pos, i in enumerate(active)]
        return split_prox_step(
            ops, act_psis, act_metrics, act_alphas, v, lam_t,
            [float(p.L[i, i]) for i in active],
            inner_flags=[p.block_is_gradient[i] for i in active])

    def query_joint(z):
        full = full_point(z)
        return [oracles[i](full) for i in active]

    def gap_fn(cand):
        return restricted_gap(p, full_point(cand), domain)

    cross = sum(p.L[i, j] * p.D[i] * p.D[j]
                for i in range(K) for j in range(K) if i != j)
    max_rounds = params.max_rounds
    if max_rounds is None:
        max_rounds = math.ceil(2.0 + 2.0 * cross / params.epsilon) + 2

    ref = None
    if p.solution is not None:
        ref = [p.solution[i] for i in active]
    out = _prox_point_loop(
        metric, act_psis, act_metrics, [p.z0[i] for i in active], lam,
        inner_step, query_joint, ledger, gap_fn, params.epsilon, max_rounds,
        params.gap_stride, reference=ref)
    return RunResult(
        status=out["status"], candidate=full_point(out["candidate"]),
        gap=out["gap"], rounds=ledger.round, ledger=ledger,
        round_candidates=[full_point(c) for c in out["round_candidates"]],
        info={"alpha": alphas_all, "lam": lam, "coupling": coupling,
              "a_history": out["a_history"], "iterations": out["iterations"],
              "frozen_blocks": sorted(frozen),
              "telescope_lhs": out["telescope_lhs"]})
