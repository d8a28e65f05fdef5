"""
P2D2 iterations in three algebraically equivalent forms.

``p2d2_agent_step``
    The per-agent recursion: each agent broadcasts ``alpha z + w - w_prev``
    once per round and keeps ``psi`` as local memory.
``p2d2_stacked_step``
    The z-only stacked recursion driven by gradient differences.
``p2d2_reference_step``
    The primal-dual recursion with explicit dual variable ``Y`` and
    ``B^{1/2}``. Used for analysis only.

Iterates are K x M arrays (row k belongs to agent k). With ``R = 0`` and
``alpha = 1`` the method is EXTRA.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .prox import RegularizerSpec, prox as prox_map, value as regularizer_value
from .errors import InvalidConfig, NoConvergence, NonFiniteIterate
from .model import average_gradient, average_lipschitz, average_value, stacked_gradient
from .topology import CombinationMatrix, ConsensusMatrix, consensus_matrix, spectral_bounds

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
FORMS = ("agent", "stacked", "reference", "extra")


@dataclass(frozen=True, eq=False)
class Problem:
    """Costs, common regularizer and network of one decentralized instance."""

    costs: list
    regularizer: RegularizerSpec
    A: CombinationMatrix
    B: ConsensusMatrix = None

    def __post_init__(self):
        if self.B is None:
            object.__setattr__(self, "B", consensus_matrix(self.A))
        if len(self.costs) != self.A.num_agents:
            raise InvalidConfig(f"{len(self.costs)} costs for {self.A.num_agents} agents")
        if len({c.dim for c in self.costs}) != 1:
            raise InvalidConfig("all agents must share the same dimension M")

    @property
    def num_agents(self):
        return len(self.costs)

    @property
    def dim(self):
        return self.costs[0].dim


@dataclass(frozen=True)
class SolverConfig:
    mu: float
    alpha: float = 1.0
    max_iters: int = 1000
    tol: float = 0.0
    w0: np.ndarray | None = field(default=None, compare=False)
    workers: int = 1

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidConfig(f"mu must be positive, got {self.mu}")
        if not 0 < self.alpha <= 1:
            raise InvalidConfig(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.max_iters < 0:
            raise InvalidConfig("max_iters must be nonnegative")
        if self.tol < 0:
            raise InvalidConfig("tol must be nonnegative")
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")


@dataclass(frozen=True, eq=False)
class SolverState:
    """
    Iterates after round ``iter``.

    ``W_prev`` and ``G_prev`` hold ``w_{i-1}`` and its stacked gradient (the
    stacked form needs both), ``Psi`` the agents' ``psi`` memory and ``Y`` the
    dual variable of the reference form.
    """

    W: np.ndarray
    Z: np.ndarray
    Psi: np.ndarray
    W_prev: np.ndarray
    G_prev: np.ndarray
    Y: np.ndarray
    iter: int = 0


def initial_state(K, M, w0=None):
    """``z_0 = w_{-1} = 0``, zero stored gradient and memory, ``y_0 = 0``."""
    zeros = np.zeros((K, M))
    W = zeros.copy() if w0 is None else np.array(w0, dtype=float).reshape(K, M)
    return SolverState(W=W, Z=zeros.copy(), Psi=zeros.copy(), W_prev=zeros.copy(),
                       G_prev=zeros.copy(), Y=zeros.copy(), iter=0)


def _guard(state):
    for name in ("W", "Z", "Y"):
        arr = getattr(state, name)
        if not np.all(np.isfinite(arr)) or np.max(np.abs(arr), initial=0.0) > DIVERGENCE_LIMIT:
            raise NonFiniteIterate(
                f"{name} diverged at iteration {state.iter} (max |entry| = {np.max(np.abs(arr)):.3g}); "
                "reduce mu or alpha"
            )
    return state


def _weights(A):
    A = A.A if isinstance(A, CombinationMatrix) else np.asarray(A, dtype=float)
    return 0.5 * (np.eye(A.shape[0]) - A)


def _neighborhoods(B):
    K = B.shape[0]
    return [[s for s in range(K) if s == k or B[s, k] != 0.0] for k in range(K)]


def p2d2_agent_step(state, costs, prox_spec, A, config):
    """One synchronous round of the per-agent algorithm."""
    B = _weights(A)
    mu, alpha = config.mu, config.alpha
    # communication phase: every agent publishes one vector
    messages = alpha * state.Z + state.W - state.W_prev
    hoods = _neighborhoods(B)

    def update(k):
        phi = np.zeros(state.W.shape[1])
        for s in hoods[k]:
            phi = phi + B[s, k] * messages[s]
        grad = costs[k].gradient(state.W[k])
        psi = state.W[k] - mu * grad
        z = state.Z[k] + psi - state.Psi[k] - phi
        return z, prox_map(prox_spec, z, mu), psi, grad

    workers = getattr(config, "workers", 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(update, range(len(costs))))
    else:
        results = [update(k) for k in range(len(costs))]
    Z, W, Psi, G = (np.stack(part) for part in zip(*results))
    return _guard(SolverState(W=W, Z=Z, Psi=Psi, W_prev=state.W, G_prev=G, Y=state.Y, iter=state.iter + 1))


def p2d2_stacked_step(state, costs, prox_spec, B, config):
    """``Z <- (I - aB)Z + (I - B)(W - W_prev) - mu (G - G_prev)``, then prox."""
    B = B.B if isinstance(B, ConsensusMatrix) else np.asarray(B, dtype=float)
    mu, alpha = config.mu, config.alpha
    G = stacked_gradient(costs, state.W)
    dW = state.W - state.W_prev
    Z = state.Z - alpha * (B @ state.Z) + dW - B @ dW - mu * (G - state.G_prev)
    W = prox_map(prox_spec, Z, mu)
    return _guard(SolverState(W=W, Z=Z, Psi=state.W - mu * G, W_prev=state.W, G_prev=G,
                              Y=state.Y, iter=state.iter + 1))


def p2d2_reference_step(state, costs, prox_spec, B, B_sqrt, config):
    """Primal descent, dual ascent on ``z``, then prox."""
    B = B.B if isinstance(B, ConsensusMatrix) else np.asarray(B, dtype=float)
    mu, alpha = config.mu, config.alpha
    G = stacked_gradient(costs, state.W)
    Z = state.W - mu * G - B @ state.W - B_sqrt @ state.Y
    Y = state.Y + alpha * (B_sqrt @ Z)
    W = prox_map(prox_spec, Z, mu)
    return _guard(SolverState(W=W, Z=Z, Psi=state.W - mu * G, W_prev=state.W, G_prev=G,
                              Y=Y, iter=state.iter + 1))


def ista_oracle(costs, prox_spec, step=None, tol=1e-12, max_iters=200000):
    """
    Centralized proximal gradient on the averaged cost plus R.

    Returns ``(w_star, r_star)`` where ``r_star = (z_t - w_t)/step`` is a
    subgradient of R at ``w_star`` with ``avg grad + r_star ~ 0``.
    """
    if step is None:
        step = 0.99 / average_lipschitz(costs)
    if not step > 0 or not tol > 0:
        raise InvalidConfig("ista_oracle needs positive step and tol")
    w = np.zeros(costs[0].dim)
    residual = math.inf
    for _ in range(max_iters):
        z = w - step * average_gradient(costs, w)
        w_next = prox_map(prox_spec, z, step)
        residual = np.linalg.norm(w_next - w) / max(1.0, np.linalg.norm(w_next))
        w = w_next
        if residual < tol:
            break
    else:
        if residual > 10 * tol:
            raise NoConvergence(f"ISTA residual {residual:.3g} after {max_iters} iterations")
    return w, (z - w) / step


def dual_fixed_point(problem, w_star, r_star, mu):
    """
    ``(W*, Z*, Y*)`` with ``z* = mu r* + w*`` on every agent and ``Y*`` the
    minimum-norm least-squares solution of ``B^{1/2} Y = W* - Z* - mu grad J_mu(W*)``.
    """
    K = problem.num_agents
    W_star = np.tile(w_star, (K, 1))
    Z_star = np.tile(mu * r_star + w_star, (K, 1))
    rhs = W_star - Z_star - mu * stacked_gradient(problem.costs, W_star) - problem.B.B @ W_star
    Y_star = problem.B.B_sqrt_pinv @ rhs
    return W_star, Z_star, Y_star


TRACE_FIELDS = ("iter", "rel_sq_error", "consensus_residual", "objective",
                "fixed_point_residual", "lyapunov", "elapsed_ms")


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    rel_sq_error: float | None = None
    consensus_residual: float | None = None
    objective: float | None = None
    fixed_point_residual: float | None = None
    lyapunov: float | None = None
    elapsed_ms: float | None = None


@dataclass(eq=False)
class IterationTrace:
    records: list = field(default_factory=list)
    form: str = "agent"
    is_extra: bool = False
    meta: dict = field(default_factory=dict)
    final_state: SolverState | None = None
    history: list | None = None

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records])

    @property
    def final_W(self):
        return None if self.final_state is None else self.final_state.W

    def to_csv(self, fh=None):
        """Serialize to CSV text; ``meta`` goes into ``# key=value`` lines."""
        out = io.StringIO()
        for key, val in self.meta.items():
            out.write(f"# {key}={val}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRACE_FIELDS)
        for rec in self.records:
            writer.writerow(["" if getattr(rec, f) is None else repr(getattr(rec, f)) for f in TRACE_FIELDS])
        text = out.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text):
        meta, body = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif line:
                body.append(line)
        reader = csv.DictReader(body)
        if tuple(reader.fieldnames or ()) != TRACE_FIELDS:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        records = []
        for row in reader:
            vals = {f: (None if row[f] == "" else float(row[f])) for f in TRACE_FIELDS}
            vals["iter"] = int(vals["iter"])
            records.append(TraceRecord(**vals))
        return cls(records=records, form=meta.get("form", "agent"),
                   is_extra=meta.get("is_extra") == "True", meta=meta)


def relative_squared_error(W, w_star):
    """``sum_k |w_k - w*|^2 / |w*|^2`` (unnormalized when ``w* = 0``)."""
    err = float(np.sum((W - w_star) ** 2))
    denom = float(w_star @ w_star)
    return err / denom if denom > 0 else err


def _advise(problem, config, form):
    # step-size conditions are sufficient, not necessary: warn only
    try:
        from .analysis import max_rho
        from .model import estimate_constants

        spectrum = spectral_bounds(problem.B)
        constants = estimate_constants(problem.costs)
        max_rho(config.mu, constants.delta, spectrum.sigma_max)
    except Exception as exc:  # noqa: BLE001 - advisory only
        warnings.warn(f"step sizes outside the certified regime ({form}): {exc}", stacklevel=3)


def run(problem, config, form="agent", w_star=None, r_star=None, keep_history=False,
        record_timing=False, track_fixed_point=True, advise=True):
    """
    Iterate `form` from ``initial_state`` and record an :class:`IterationTrace`.

    Stops after ``config.max_iters`` rounds, or earlier once the relative
    squared error to `w_star` drops below ``config.tol`` (``tol = 0``
    disables). The Lyapunov column is filled for the reference form when
    both `w_star` and `r_star` are given.
    """
    if form not in FORMS:
        raise InvalidConfig(f"unknown solver form {form!r}; expected one of {FORMS}")
    reg = problem.regularizer
    if form == "extra":
        if not reg.is_zero:
            raise InvalidConfig("EXTRA requires the zero regularizer")
        if config.alpha != 1:
            raise InvalidConfig("EXTRA requires alpha = 1")
    if advise:
        _advise(problem, config, form)

    from .analysis import fixed_point_residual, lyapunov_value

    K, M = problem.num_agents, problem.dim
    B = problem.B
    state = initial_state(K, M, config.w0)
    trace = IterationTrace(form=form, is_extra=form == "extra",
                           history=[state] if keep_history else None)

    lyap = None
    if form == "reference" and w_star is not None and r_star is not None:
        W_star, _, Y_star = dual_fixed_point(problem, w_star, r_star, config.mu)
        beta = 1.0 - config.alpha * spectral_bounds(B).sigma_max
        lyap = (W_star, Y_star, beta)

    t0 = time.perf_counter()

    def record(st):
        rel = None if w_star is None else relative_squared_error(st.W, w_star)
        wbar = st.W.mean(axis=0)
        objective = average_value(problem.costs, wbar) + regularizer_value(reg, wbar)
        fpr = None
        if track_fixed_point:
            rep = fixed_point_residual(st.W, st.Z, st.Y if form == "reference" else None,
                                       problem.costs, reg, B, config.mu)
            fpr = rep.total
        lv = None
        if lyap is not None:
            lv = lyapunov_value(st.W, st.Y, lyap[0], lyap[1], config.alpha, lyap[2], B,
                                r_is_zero=reg.is_zero)
        elapsed = (time.perf_counter() - t0) * 1e3 if record_timing else None
        trace.records.append(TraceRecord(st.iter, rel, float(np.linalg.norm(B.B @ st.W)),
                                         float(objective), fpr, lv, elapsed))
        return rel

    record(state)
    for _ in range(config.max_iters):
        if form == "agent":
            state = p2d2_agent_step(state, problem.costs, reg, problem.A, config)
        elif form == "reference":
            state = p2d2_reference_step(state, problem.costs, reg, B, B.B_sqrt, config)
        else:
            state = p2d2_stacked_step(state, problem.costs, reg, B, config)
        if keep_history:
            trace.history.append(state)
        rel = record(state)
        if config.tol > 0 and rel is not None and rel < config.tol:
            break
    trace.final_state = state
    trace.meta.update(form=form, is_extra=trace.is_extra, mu=repr(config.mu), alpha=repr(config.alpha))
    logger.info("%s form: %d iterations", form, state.iter)
    return trace


def extra_solver(problem, config, **kwargs):
    """EXTRA: the stacked recursion with ``R = 0`` and ``alpha = 1``."""
    if not problem.regularizer.is_zero:
        raise InvalidConfig("EXTRA requires the zero regularizer")
    if config.alpha != 1:
        raise InvalidConfig("EXTRA requires alpha = 1")
    return run(problem, config, form="extra", **kwargs)


__all__ = [
    "FORMS", "IterationTrace", "Problem", "SolverConfig", "SolverState", "TraceRecord",
    "dual_fixed_point", "extra_solver", "initial_state", "ista_oracle", "p2d2_agent_step",
    "p2d2_reference_step", "p2d2_stacked_step", "relative_squared_error", "run",
]
