"""Oracle ledgers: who queried what, when, and at what cost.

Each agent owns one first-order oracle.  Inside a communication round agents
may only query their own oracle; information merges at round boundaries.
The ledger records every (point, response) pair per agent per round, counts
queries ``N_i``, counts completed rounds ``T``, and exposes the weighted
cost ``sum_i c_i N_i``.

`span_check` verifies the gradient-span discipline: any point an agent can
form must sit in the affine span of its origin and the preconditioned
responses it has seen so far.
"""

import copy
from dataclasses import dataclass, field

import numpy as np


class OracleLedger:
    """Query/round bookkeeping for a set of named agents.

    Parameters
    ----------
    agents : sequence of str
        Agent names, e.g. ``("x", "y")`` or ``("1", "2", "3")``.
    costs : sequence of float, optional
        Per-query cost ``c_i`` of each agent's oracle.  Defaults to ones.
    """

    def __init__(self, agents, costs=None):
        self.agents = tuple(agents)
        if len(set(self.agents)) != len(self.agents):
            raise ValueError("agent names must be distinct")
        if costs is None:
            costs = [1.0] * len(self.agents)
        if len(costs) != len(self.agents):
            raise ValueError("one cost per agent required")
        self.costs = {a: float(c) for a, c in zip(self.agents, costs)}
        if any(c < 0 for c in self.costs.values()):
            raise ValueError("oracle costs must be nonnegative")
        self._counts = {a: 0 for a in self.agents}
        self._closed = []          # list of dicts: agent -> [(point, response)]
        self._open = {a: [] for a in self.agents}

    # -- recording ---------------------------------------------------------

    def record(self, agent, point, response):
        """Record one oracle query by `agent` in the current round."""
        if agent not in self._counts:
            raise KeyError(f"unknown agent {agent!r}")
        self._counts[agent] += 1
        self._open[agent].append(
            (copy.deepcopy(point), np.array(response, dtype=float, copy=True)))

    def end_round(self):
        """Close the current round; queries after this land in the next one."""
        self._closed.append(self._open)
        self._open = {a: [] for a in self.agents}

    def bind(self, agent, fn):
        """Wrap `fn` so every call is recorded under `agent`."""
        def recorded(point):
            response = fn(point)
            self.record(agent, point, response)
            return response
        return recorded

    # -- accessors ---------------------------------------------------------

    @property
    def round(self):
        """Number of completed rounds."""
        return len(self._closed)

    def queries(self, agent=None):
        if agent is None:
            return dict(self._counts)
        return self._counts[agent]

    def weighted_cost(self):
        """Total cost ``sum_i c_i N_i``."""
        return float(sum(self.costs[a] * n for a, n in self._counts.items()))

    def trace(self, agent, through_round=None, include_open=True):
        """All (point, response) pairs recorded by `agent`.

        Parameters
        ----------
        agent : str
        through_round : int, optional
            Only include rounds ``1..through_round``.  Default: all closed
            rounds.
        include_open : bool
            Whether queries of the still-open round are visible.  True for
            the agent's own view, False for what remote agents have seen.
        """
        if through_round is None:
            through_round = len(self._closed)
        out = []
        for rec in self._closed[:through_round]:
            out.extend(rec[agent])
        if include_open and through_round >= len(self._closed):
            out.extend(self._open[agent])
        return out

    def responses(self, agent, through_round=None, include_open=True):
        return [r for _, r in self.trace(agent, through_round, include_open)]


def span_check(ledger, agent, candidate, origin, metric,
               through_round=None, include_open=True, tol=1e-8):
    """Check that ``candidate - origin`` lies in span{P^{-1} g : g seen}.

    The responses visible to `agent` (its own oracle answers through the
    given round) are mapped through the inverse block metric and a least
    squares fit of ``candidate - origin`` against them is formed.

    Returns
    -------
    (ok, residual) : (bool, float)
        `ok` is True when the Euclidean least-squares residual is at most
        ``tol * (1 + ||candidate||)``.
    """
    candidate = np.asarray(candidate, dtype=float)
    origin = np.asarray(origin, dtype=float)
    d = candidate - origin
    gs = ledger.responses(agent, through_round, include_open)
    if gs:
        cols = np.stack([metric.apply_inv(g) for g in gs], axis=1)
        coef, _, _, _ = np.linalg.lstsq(cols, d, rcond=None)
        residual = float(np.linalg.norm(d - cols @ coef))
    else:
        residual = float(np.linalg.norm(d))
    ok = residual <= tol * (1.0 + float(np.linalg.norm(candidate)))
    return ok, residual


@dataclass
class RunResult:
    """Outcome of one solver run.

    Attributes
    ----------
    status : str
        "converged", "solution_found", "budget_exhausted", "diverged",
        or "local_solve" for the fully decoupled special case.
    candidate : ndarray
        Final joint candidate.
    gap : object or None
        Last gap evaluation (a `GapResult`), when a gap oracle was supplied.
    rounds : int
        Communication rounds used.
    ledger : OracleLedger
    round_candidates : list of ndarray
        Candidate available after each completed round; entry ``t`` is the
        candidate after round ``t + 1``.
    info : dict
        Solver-specific extras (step sizes, inner-iteration stats, ...).
    """
    status: str
    candidate: np.ndarray
    gap: object
    rounds: int
    ledger: OracleLedger
    round_candidates: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status in ("converged", "solution_found", "local_solve")
