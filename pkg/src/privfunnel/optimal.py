"""Synthesis of utility-optimal protocols under LDP, LIP and SRLIP constraints.

* LDP: the feasible channels form a polytope over ``a x a`` column-stochastic
  matrices; mutual information is convex in the channel, so the optimum sits
  at a vertex.
* LIP: the feasible posterior columns ``R_{X|y}`` form a small polytope over
  the data simplex; the optimal protocol mixes its vertices with weights
  found by a linear program.
* SRLIP: one channel per attribute, each constrained against every prior
  obtained by conditioning on other attributes; the product channel is then
  verified against the full side-channel definition.

Every result carries a certificate recomputed by the generic evaluators in
``mechanisms`` rather than by the polytope code that produced it.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import lp
from .errors import AttributeBudgetExceeded, DimensionMismatch, LPInfeasible
from .mechanisms import Channel, PrivacyReport, _json_float, ldp_of, lip_of
from .polytope import DEFAULT_MAX_VERTICES, Polytope, enumerate_vertices
from .prob import JointDistribution, batch_channel_mi, entropies, entropy

TAU_SUPP = 1e-10
CERT_TOL = 1e-9
MAX_ATTRIBUTES = 8


def _exp(eps: float) -> float:
    return math.inf if math.isinf(eps) else math.exp(eps)


def _check_eps(eps: float):
    if math.isnan(eps) or eps < 0:
        raise ValueError("epsilon must be non-negative")


@dataclass
class ReverseChannel:
    """Protocol given by output masses ``q`` and posterior columns ``R[:, y]``."""

    R: np.ndarray
    q: np.ndarray

    @property
    def b(self) -> int:
        return self.q.size

    def forward(self, p_x: np.ndarray) -> Channel:
        return Channel.from_approximate(self.q[:, None] * self.R.T / p_x[None, :])

    def residual(self, p_x: np.ndarray) -> float:
        """``max |R q - p_X|``."""
        return float(np.abs(self.R @ self.q - p_x).max())

    def to_dict(self) -> dict:
        return {"R": self.R.tolist(), "q": self.q.tolist()}


@dataclass
class LPSolution:
    weights: np.ndarray
    objective: float
    support: np.ndarray


@dataclass
class ProtocolResult:
    """Outcome of a synthesis run, ready to serialise as a protocol bundle."""

    kind: str
    epsilon: float
    channel: Channel
    utility: float
    vertex_count: int
    certificate: PrivacyReport
    reverse: ReverseChannel | None = None
    lp: LPSolution | None = None
    components: list = field(default_factory=list)
    budgets: list[float] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def certified(self) -> bool:
        return self.certificate.satisfies(self.epsilon, CERT_TOL)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "epsilon": _json_float(self.epsilon),
               "channel": self.channel.to_dict()}
        if self.reverse is not None:
            out["reverse"] = self.reverse.to_dict()
        if self.components:
            out["components"] = [c.to_dict() for c in self.components]
            out["budgets"] = [_json_float(e) for e in self.budgets]
        out["utility_nats"] = self.utility
        out["vertex_count"] = self.vertex_count
        cert = self.certificate.to_dict()
        cert["passed"] = self.certified
        out["certificate"] = cert
        return out


def _lex_argmax(values: np.ndarray, points: np.ndarray, tol: float = 1e-12) -> int:
    """Index of the maximum; near-ties go to the lexicographically smallest point."""
    top = values.max()
    cand = np.flatnonzero(values >= top - tol)
    if cand.size == 1:
        return int(cand[0])
    keys = np.round(points[cand], 9)
    order = np.lexsort(keys.T[::-1])
    return int(cand[order[0]])


def _stochastic_equalities(a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``sum_y Q[y, x] = 1`` on ``vec(Q)`` with index ``y * a + x``."""
    E = np.zeros((a, a * b))
    for x in range(a):
        E[x, x::a] = 1.0
    return E, np.ones(a)


def _row_block_constraints(vecs: np.ndarray, a: int, b: int) -> np.ndarray:
    """Replicate each coefficient vector over x onto every output row y."""
    rows = np.zeros((len(vecs) * b, a * b))
    for y in range(b):
        rows[y * len(vecs):(y + 1) * len(vecs), y * a:(y + 1) * a] = vecs
    return rows


def prune_cone_rows(vecs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Drop rows of ``G`` implied by the others on ``{r >= 0 : G r <= 0}``.

    Row ``g`` is redundant when ``max g.r`` over the rest of the cone,
    normalised by ``sum(r) = 1``, is at most ``tol``. Rows are tested in
    order against the rows still kept, so of two identical rows only the
    later one survives. If the cone is just the origin nothing is pruned.
    """
    G = np.asarray(vecs, dtype=float)
    k, a = G.shape
    if k <= 1:
        return G
    norms = np.abs(G).max(axis=1)
    G = G[norms > 0] / norms[norms > 0, None]
    keep = np.ones(len(G), dtype=bool)
    for i in range(len(G)):
        keep[i] = False
        others = G[keep]
        n_o = len(others)
        # variables (r, slack); others.r + slack = 0, sum(r) = 1
        A_eq = np.zeros((n_o + 1, a + n_o))
        A_eq[:n_o, :a] = others
        A_eq[:n_o, a:] = np.eye(n_o)
        A_eq[n_o, :a] = 1.0
        b_eq = np.zeros(n_o + 1)
        b_eq[n_o] = 1.0
        cost = np.concatenate([-G[i], np.zeros(n_o)])
        try:
            res = lp.simplex(cost, A_eq, b_eq)
        except LPInfeasible:
            return np.asarray(vecs, dtype=float)
        if -res.fun > tol:
            keep[i] = True
    return G[keep]


# LDP ------------------------------------------------------------------------------

def build_gamma(j: JointDistribution, eps: float) -> Polytope:
    """ε-LDP channels with ``b = a``, as a polytope over ``vec(Q)``."""
    _check_eps(eps)
    a, c = j.a, j.c
    E, f = _stochastic_equalities(a, a)
    ineq = [-np.eye(a * a)]
    if not math.isinf(eps):
        cond = j.p_x_given_s
        vecs = np.array([cond[s] - math.exp(eps) * cond[t]
                         for s in range(c) for t in range(c) if s != t]).reshape(-1, a)
        ineq.append(_row_block_constraints(vecs, a, a))
    A = np.vstack(ineq)
    return Polytope(A, np.zeros(A.shape[0]), E, f)


def optimal_ldp(j: JointDistribution, eps: float,
                max_vertices: int = DEFAULT_MAX_VERTICES) -> ProtocolResult:
    t0 = time.perf_counter()
    a = j.a
    verts = enumerate_vertices(build_gamma(j, eps), max_vertices=max_vertices).points
    Qs = np.clip(verts.reshape(-1, a, a), 0.0, None)
    Qs /= Qs.sum(axis=1, keepdims=True)
    utils = batch_channel_mi(Qs, j.p_x)
    best = _lex_argmax(utils, Qs.reshape(len(Qs), -1))
    channel = Channel.from_approximate(Qs[best]).canonical()
    cert = ldp_of(channel, j)
    return ProtocolResult("ldp", eps, channel, float(utils[best]), len(verts), cert,
                          seconds=time.perf_counter() - t0)


# LIP ------------------------------------------------------------------------------

def build_delta(j: JointDistribution, eps: float) -> Polytope:
    """Posterior columns ``v`` with ``e^-ε p_s <= p_{s|X}.v <= e^ε p_s``."""
    _check_eps(eps)
    a = j.a
    rows = [-np.eye(a)]
    rhs = [np.zeros(a)]
    if not math.isinf(eps):
        post = j.p_s_given_x  # [s, x]
        rows += [post, -post]
        rhs += [math.exp(eps) * j.p_s, -math.exp(-eps) * j.p_s]
    return Polytope(np.vstack(rows), np.concatenate(rhs), np.ones((1, a)), [1.0])


def solve_mixture_lp(vertices: np.ndarray, p_x: np.ndarray) -> LPSolution:
    """Minimise sum_i H(v_i) w_i subject to w >= 0 and sum_i w_i v_i = p_X."""
    H = entropies(vertices)
    try:
        res = lp.simplex(H, vertices.T, p_x)
    except LPInfeasible as exc:
        raise LPInfeasible(f"no convex combination of vertices reaches p_X: {exc}") from exc
    w = res.x
    support = np.flatnonzero(w > TAU_SUPP)
    return LPSolution(w, float(H @ w), support)


def optimal_lip(j: JointDistribution, eps: float,
                max_vertices: int = DEFAULT_MAX_VERTICES) -> ProtocolResult:
    t0 = time.perf_counter()
    verts = enumerate_vertices(build_delta(j, eps), max_vertices=max_vertices).points
    verts = np.clip(verts, 0.0, None)
    verts /= verts.sum(axis=1, keepdims=True)
    sol = solve_mixture_lp(verts, j.p_x)
    R = verts[sol.support].T
    q = sol.weights[sol.support]
    reverse = ReverseChannel(R, q)
    channel = reverse.forward(j.p_x)
    # reorder (R, q) consistently with the canonical output order of the channel
    order = np.lexsort(np.round(channel.Q, 12).T[::-1])
    reverse = ReverseChannel(R[:, order], q[order])
    channel = Channel(channel.Q[order])
    util = entropy(j.p_x) - sol.objective
    cert = lip_of(channel, j)
    return ProtocolResult("lip", eps, channel, float(util), len(verts), cert,
                          reverse=reverse, lp=sol, seconds=time.perf_counter() - t0)


# SRLIP ----------------------------------------------------------------------------

def _require_shape(j: JointDistribution) -> tuple[int, ...]:
    if j.shape is None:
        raise DimensionMismatch("SRLIP needs a joint distribution with an attribute shape")
    if len(j.shape) > MAX_ATTRIBUTES:
        raise AttributeBudgetExceeded(
            f"{len(j.shape)} attributes exceed the limit of {MAX_ATTRIBUTES}")
    return j.shape


def conditioned_priors(j: JointDistribution, jdx: int):
    """Yield ``(J, x^J, s, p_{X^j|x^J}, p_{X^j|s,x^J})`` over positive-mass cells.

    ``J`` ranges over all subsets of the other attributes, including the
    empty set.
    """
    shape = _require_shape(j)
    others = [k for k in range(len(shape)) if k != jdx]
    for r in range(len(others) + 1):
        for J in itertools.combinations(others, r):
            for xJ in itertools.product(*(range(shape[k]) for k in J)):
                given = dict(zip(J, xJ))
                if j.event_mass(given) <= 0:
                    continue
                base = j.attribute_conditional(jdx, given)
                for s in range(j.c):
                    if j.event_mass(given, s) <= 0:
                        continue
                    yield J, xJ, s, base, j.attribute_conditional(jdx, given, s)


def split_budget(eps: float, m: int, budgets: Sequence[float] | None = None) -> list[float]:
    if budgets is None:
        return [eps / m] * m
    budgets = [float(e) for e in budgets]
    if len(budgets) != m or any(e < 0 for e in budgets):
        raise ValueError("one non-negative budget per attribute is required")
    return budgets


def build_srlip_polytope(j: JointDistribution, eps: float, jdx: int,
                         budgets: Sequence[float] | None = None) -> Polytope:
    """Channels ``Q^j`` on attribute ``jdx`` meeting the per-attribute LIP budget.

    The budget is ``eps / m`` unless an explicit per-attribute ``budgets``
    vector is supplied.
    """
    _check_eps(eps)
    shape = _require_shape(j)
    e = split_budget(eps, len(shape), budgets)[jdx]
    aj = shape[jdx]
    E, f = _stochastic_equalities(aj, aj)
    ineq = [-np.eye(aj * aj)]
    if not math.isinf(e):
        up, lo = math.exp(e), math.exp(-e)
        vecs = []
        for _, _, _, base, cond in conditioned_priors(j, jdx):
            vecs.append(cond - up * base)
            vecs.append(lo * base - cond)
        if vecs:
            # conditioned priors overlap heavily; most of their rows are implied
            ineq.append(_row_block_constraints(prune_cone_rows(np.array(vecs)), aj, aj))
    A = np.vstack(ineq)
    return Polytope(A, np.zeros(A.shape[0]), E, f)


def conditioned_lip(Qj, j: JointDistribution, jdx: int) -> float:
    """Worst LIP level of ``Q^j`` over all attribute-conditioned priors."""
    Qm = np.asarray(getattr(Qj, "Q", Qj), dtype=float)
    worst = 0.0
    for _, _, _, base, cond in conditioned_priors(j, jdx):
        num = Qm @ cond
        den = Qm @ base
        reach = den > 0
        with np.errstate(divide="ignore"):
            lr = np.abs(np.log(num[reach]) - np.log(den[reach]))
        worst = max(worst, float(lr.max(initial=0.0)))
    return worst


def product_channel(components: Sequence[Channel]) -> Channel:
    Q = np.ones((1, 1))
    for comp in components:
        Q = np.kron(Q, comp.Q)
    return Channel.from_approximate(Q)


def srlip_check(Q, j: JointDistribution, eps: float | None = None) -> PrivacyReport:
    """Worst side-channel log-ratio of a channel over the full data alphabet.

    Witnesses are ``(J_mask, xJ_index, s, y)`` where bit ``k`` of ``J_mask``
    marks attribute ``k`` as known and ``xJ_index`` is the mixed-radix index
    of the known values.
    """
    shape = _require_shape(j)
    Qm = np.asarray(getattr(Q, "Q", Q), dtype=float)
    if Qm.shape[1] != j.a:
        raise DimensionMismatch("channel does not act on the full data alphabet")
    m = len(shape)
    coords = np.array(np.unravel_index(np.arange(j.a), shape)).T  # (a, m)
    best, witnesses = 0.0, []
    for mask in range(2 ** m):
        J = [k for k in range(m) if mask >> k & 1]
        if J:
            dims = tuple(shape[k] for k in J)
            g = np.ravel_multi_index(tuple(coords[:, J].T), dims)
            ng = math.prod(dims)
        else:
            g = np.zeros(j.a, dtype=int)
            ng = 1
        G = np.zeros((j.a, ng))
        G[np.arange(j.a), g] = 1.0
        p_sg = j.p @ G                                       # P(s, x^J)
        p_ysg = np.einsum("yx,sx,xg->ysg", Qm, j.p, G)       # P(y, s, x^J)
        p_g = p_sg.sum(axis=0)
        p_yg = p_ysg.sum(axis=1)
        valid = (p_sg > 0)[None, :, :] & (p_yg > 0)[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.log(p_ysg / p_sg[None]) - np.log(p_yg / p_g[None])[:, None, :]
        lr = np.where(valid, np.abs(lr), -1.0)
        top = float(lr.max(initial=-1.0))
        if top > best + 1e-12:
            best, witnesses = top, []
        if top >= best - 1e-12 and top >= 0:
            for y, s, gi in zip(*np.nonzero(lr >= best - 1e-12)):
                witnesses.append((mask, int(gi), int(s), int(y)))
    return PrivacyReport("SRLIP", max(best, 0.0), witnesses)


def srlip_protocol(j: JointDistribution, eps: float, budgets: Sequence[float] | None = None,
                   max_vertices: int = DEFAULT_MAX_VERTICES) -> ProtocolResult:
    """Per-attribute vertex synthesis composed into one product channel."""
    t0 = time.perf_counter()
    shape = _require_shape(j)
    split = split_budget(eps, len(shape), budgets)
    comps, total_vertices = [], 0
    for jdx, aj in enumerate(shape):
        P = build_srlip_polytope(j, eps, jdx, split)
        verts = enumerate_vertices(P, max_vertices=max_vertices).points
        total_vertices += len(verts)
        Qs = np.clip(verts.reshape(-1, aj, aj), 0.0, None)
        Qs /= Qs.sum(axis=1, keepdims=True)
        utils = batch_channel_mi(Qs, j.attribute_marginal(jdx))
        best = _lex_argmax(utils, Qs.reshape(len(Qs), -1))
        comps.append(Channel.from_approximate(Qs[best]))
    channel = product_channel(comps)
    util = float(batch_channel_mi(channel.Q[None], j.p_x)[0])
    cert = srlip_check(channel, j)
    return ProtocolResult("srlip", float(sum(split)), channel, util, total_vertices, cert,
                          components=comps, budgets=split, seconds=time.perf_counter() - t0)


def synthesize(kind: str, j: JointDistribution, eps: float, **kw) -> ProtocolResult:
    fns = {"ldp": optimal_ldp, "lip": optimal_lip, "srlip": srlip_protocol}
    try:
        fn = fns[kind]
    except KeyError:
        raise ValueError(f"unknown metric {kind!r}") from None
    return fn(j, eps, **kw)
