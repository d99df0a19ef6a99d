"""Closed-form normalizing constants and exact means for special colorings.

Five families have an analytic ``log I(delta, D)``:

* ``Tree``: tree skeleton, distinct vertex colors, every edge the same color.
* ``StarLeaves``: star with its leaves in one vertex class, edges distinct.
* ``StarAll``: star with every vertex in one class, edges distinct.
* ``Triangle``: complete graph on three vertices, two edges sharing a color.
* ``Decomp4``: two triangles glued along an edge, the two outer vertices
  sharing a color and each outer vertex's pair of edges sharing a color.

``I(delta, D)`` is the integral of ``|K|^{(delta-2)/2} exp(-<K, D>/2)`` over
the colored cone against Lebesgue measure on the free entries. The mean
follows from ``E(K) = -2 d log I / dD`` (by finite differences), and a
Monte-Carlo importance sampler gives an independent check on any graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import betaln, logsumexp

from .colored_graph import ColoredGraph, FreeEntryMap, free_entry_map, tree_metadata
from .completion import (
    TOL_EQ,
    colored_matrix,
    complete_batch,
    extract_free,
    project_to_colored,
    scale_factor,
)
from .errors import (
    DegenerateEnvelope,
    DimensionMismatch,
    NotATree,
    NotInDualCone,
    PatternMismatch,
    QuadratureFailure,
    StepTooLarge,
)
from .special import SeriesControl, elementary_symmetric, gauss_2f1, log_bessel_k

LOG2 = math.log(2.0)
LOGPI = math.log(math.pi)

FAMILIES = ("Tree", "StarLeaves", "StarAll", "Triangle", "Decomp4")


@dataclass(frozen=True)
class Hyperparams:
    """Shape ``delta`` and scale ``D`` of the colored G-Wishart."""

    delta: float
    D: np.ndarray

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        D = np.asarray(self.D, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise DimensionMismatch(f"D must be square, got shape {D.shape}")
        object.__setattr__(self, "D", D)


@dataclass(frozen=True)
class GraphFamily:
    """A colored graph recognised as one of the closed-form families.

    ``roles`` lists 1-indexed vertex labels in the order the formulas use:
    ``(center, leaf_1, ..., leaf_n)`` for stars, ``(u, w, apex)`` for the
    triangle (apex is the vertex on the two same-colored edges) and
    ``(u, w, x, y)`` for ``Decomp4`` (``u, w`` adjacent to everything).
    Trees need no roles.
    """

    tag: str
    graph: ColoredGraph
    fmap: FreeEntryMap = field(repr=False)
    roles: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.graph.p - 1


# -- structural detection ---------------------------------------------------


def _singleton_vertices(g: ColoredGraph) -> bool:
    return all(len(c) == 1 for c in g.vertex_classes)


def _distinct_edges(g: ColoredGraph) -> bool:
    return all(len(c) == 1 for c in g.edge_classes)


def _edge_class_index(g: ColoredGraph) -> dict[tuple[int, int], int]:
    return {e: k for k, c in enumerate(g.edge_classes) for e in c}


def _as_tree(g: ColoredGraph) -> tuple[int, ...] | None:
    if g.p < 2 or not _singleton_vertices(g) or len(g.edge_classes) != 1:
        return None
    try:
        tree_metadata(g)
    except NotATree:
        return None
    return ()


def _star_center(g: ColoredGraph) -> int | None:
    p = g.p
    if p < 2 or len(g.edges) != p - 1:
        return None
    nb = g.neighbors()
    for v in range(1, p + 1):
        if len(nb[v]) == p - 1:
            return v
    return None


def _as_star_leaves(g: ColoredGraph) -> tuple[int, ...] | None:
    c = _star_center(g)
    if c is None or not _distinct_edges(g):
        return None
    leaves = tuple(v for v in range(1, g.p + 1) if v != c)
    if set(map(frozenset, g.vertex_classes)) != {frozenset([c]), frozenset(leaves)}:
        return None
    return (c,) + leaves


def _as_star_all(g: ColoredGraph) -> tuple[int, ...] | None:
    c = _star_center(g)
    if c is None or not _distinct_edges(g) or len(g.vertex_classes) != 1:
        return None
    return (c,) + tuple(v for v in range(1, g.p + 1) if v != c)


def _as_triangle(g: ColoredGraph) -> tuple[int, ...] | None:
    if g.p != 3 or len(g.edges) != 3 or not _singleton_vertices(g):
        return None
    sizes = sorted(len(c) for c in g.edge_classes)
    if sizes != [1, 2]:
        return None
    pair = next(c for c in g.edge_classes if len(c) == 2)
    apex = (set(pair[0]) & set(pair[1])).pop()
    u, w = (v for v in (1, 2, 3) if v != apex)
    return (u, w, apex)


def _as_decomp4(g: ColoredGraph) -> tuple[int, ...] | None:
    if g.p != 4 or len(g.edges) != 5:
        return None
    nb = g.neighbors()
    hubs = [v for v in range(1, 5) if len(nb[v]) == 3]
    if len(hubs) != 2:
        return None
    u, w = hubs
    x, y = (v for v in range(1, 5) if v not in hubs)
    vcls = set(map(frozenset, g.vertex_classes))
    if vcls != {frozenset([u]), frozenset([w]), frozenset([x, y])}:
        return None
    eidx = _edge_class_index(g)
    key = lambda i, j: (min(i, j), max(i, j))
    same = lambda e1, e2: eidx[key(*e1)] == eidx[key(*e2)]
    if not (same((u, x), (w, x)) and same((u, y), (w, y))):
        return None
    classes = {eidx[key(u, w)], eidx[key(u, x)], eidx[key(u, y)]}
    if len(classes) != 3 or len(g.edge_classes) != 3:
        return None
    return (u, w, x, y)


_DETECTORS = {
    "Tree": _as_tree,
    "StarLeaves": _as_star_leaves,
    "StarAll": _as_star_all,
    "Triangle": _as_triangle,
    "Decomp4": _as_decomp4,
}


def bind_family(graph: ColoredGraph, tag: str | None = None) -> GraphFamily:
    """Recognise ``graph`` as one of the closed-form families.

    With ``tag`` given only that family is tried; otherwise the first match
    in :data:`FAMILIES` order wins (a two-vertex path is both a ``Tree`` and
    a one-leaf ``StarLeaves``; the two give the same constant).
    """
    tags = FAMILIES if tag is None else (tag,)
    for t in tags:
        if t not in _DETECTORS:
            raise ValueError(f"unknown family {t!r}")
        roles = _DETECTORS[t](graph)
        if roles is not None:
            return GraphFamily(t, graph, free_entry_map(graph), roles)
    raise PatternMismatch(f"graph does not match family {tag or 'any'}")


# -- parameter extraction and dual cones -----------------------------------


def _check_pattern(family: GraphFamily, D: np.ndarray) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    p = family.graph.p
    if D.shape != (p, p):
        raise DimensionMismatch(f"D has shape {D.shape}, graph has p={p}")
    proj = project_to_colored(D, family.fmap)
    if not np.allclose(D, proj, rtol=0.0, atol=TOL_EQ * max(1.0, np.abs(D).max())):
        raise PatternMismatch("D is not in the linear span of the colored cone")
    return proj


def tree_params(family: GraphFamily, D) -> tuple[np.ndarray, float]:
    D = _check_pattern(family, D)
    i, j = family.graph.edges[0]
    return np.diag(D).copy(), float(D[i - 1, j - 1])


def star_params(family: GraphFamily, D) -> tuple[float, np.ndarray, float]:
    """``(a', b', c')``: center value, edge values in leaf order, leaf value."""
    D = _check_pattern(family, D)
    c, *leaves = [v - 1 for v in family.roles]
    b = np.array([D[c, l] for l in leaves])
    return float(D[c, c]), b, float(D[leaves[0], leaves[0]])


def _relabelled(family: GraphFamily, D) -> np.ndarray:
    D = _check_pattern(family, D)
    idx = [v - 1 for v in family.roles]
    return D[np.ix_(idx, idx)]


def _cone_terms(family: GraphFamily, D) -> list[float]:
    """Quantities that must all be strictly positive inside the dual cone."""
    tag = family.tag
    if tag == "Tree":
        a, b = tree_params(family, D)
        if np.any(a <= 0):
            return [float(a.min())]
        s = sum(math.sqrt(a[i - 1] * a[j - 1]) for i, j in family.graph.edges)
        return [s - (family.graph.p - 1) * abs(b)]
    if tag == "StarLeaves":
        a, b, c = star_params(family, D)
        return [a, c, family.n * a * c - float(b @ b)]
    if tag == "StarAll":
        a, b, _ = star_params(family, D)
        # {K: a > 0, a^2 > |b|^2} weighted by <K, D> = (n+1) a a' + 2 b.b'
        return [a, (family.n + 1) * a - 2.0 * math.sqrt(float(b @ b))]
    M = _relabelled(family, D)
    d = M[0, 0] + M[1, 1] + 2 * M[0, 1]
    det12 = M[0, 0] * M[1, 1] - M[0, 1] ** 2
    if tag == "Triangle":
        return [M[0, 0], M[1, 1], M[2, 2], det12, d * M[2, 2] - 4 * M[0, 2] ** 2]
    return [M[0, 0], det12, d, M[2, 2] * d - 2 * (M[0, 2] ** 2 + M[0, 3] ** 2)]


def dual_cone_check(family: GraphFamily, D) -> bool:
    """``True`` iff ``D`` lies in the open dual cone of the family."""
    return all(t > 0 for t in _cone_terms(family, D))


def _require_cone(family, D):
    if not dual_cone_check(family, D):
        raise NotInDualCone(f"D is outside the dual cone of the {family.tag} family")


# -- log normalizing constants ---------------------------------------------


def _tree_b_integral(delta, a, edges, b, ctrl):
    """``log int |b|^{(p-1) delta/2} e^{-(p-1) b b'} prod K_{delta/2}(|b| s_e) db``."""
    s = np.array([math.sqrt(a[i - 1] * a[j - 1]) for i, j in edges])
    m = len(s)
    lam = 0.5 * delta
    expo = m * lam

    def log_f(x, sign):
        # x = |b| > 0; sign picks the half line b = sign * x
        return expo * math.log(x) - sign * m * b * x + sum(log_bessel_k(lam, x * si, ctrl) for si in s)

    pieces = []
    for sign in (1.0, -1.0):
        rate = s.sum() + sign * m * b
        # the integrand behaves like x^{(m delta - m)/2} e^{-rate x} for large x
        grid = np.geomspace(1e-6, 1.0, 7) * (10.0 + expo) / rate
        log_peak = max(log_f(x, sign) for x in grid)
        upper = grid[-1]
        while log_f(upper, sign) > log_peak - 40.0:
            upper *= 2.0
        f = lambda x, sg=sign: math.exp(log_f(x, sg) - log_peak) if x > 0 else 0.0
        val, err = integrate.quad(f, 0.0, upper, epsabs=0.0, epsrel=1e-11, limit=400)
        if not val > 0 or err > 1e-7 * val:
            raise QuadratureFailure(f"tree b-integral: {val} +/- {err}")
        pieces.append(math.log(val) + log_peak)
    return float(np.logaddexp(*pieces))


def log_norm_tree(delta: float, family: GraphFamily, D, ctrl: SeriesControl | None = None) -> float:
    """``log I`` for the tree family; closed forms at ``delta`` = 1 and 3."""
    _require_cone(family, D)
    a, b = tree_params(family, D)
    p = family.graph.p
    edges = family.graph.edges
    s = np.array([math.sqrt(a[i - 1] * a[j - 1]) for i, j in edges])
    S, B = s.sum(), (p - 1) * b
    log_a = np.log(a)
    if delta == 1:
        return 0.5 * p * (LOG2 + LOGPI) - 0.5 * log_a.sum() + math.log(1.0 / (S - B) + 1.0 / (S + B))
    if delta == 3:
        sig = elementary_symmetric(s)
        k = np.arange(p)
        with np.errstate(divide="ignore"):
            log_sig = np.log(sig)
        lg = np.array([math.lgamma(kk + 1) for kk in k])
        terms = np.concatenate(
            [log_sig + lg - (k + 1) * math.log(S - B), log_sig + lg - (k + 1) * math.log(S + B)]
        )
        return 0.5 * p * (LOG2 + LOGPI) - 1.5 * log_a.sum() + float(logsumexp(terms))
    degrees, _ = tree_metadata(family.graph)
    const = (p + 0.5 * delta - 1) * LOG2 + math.lgamma(0.5 * delta)
    const += 0.25 * delta * float(np.sum((np.array(degrees) - 2) * log_a))
    return const + _tree_b_integral(delta, a, edges, b, ctrl)


def log_norm_star_leaves(delta: float, family: GraphFamily, D) -> float:
    if delta < 1:
        raise ValueError("the star-leaves closed form needs delta >= 1")
    _require_cone(family, D)
    a, b, c = star_params(family, D)
    n = family.n
    e = (delta - 1) * n / 2 + 1
    return (
        0.5 * (delta + n * delta + 2) * LOG2
        + 0.5 * n * LOGPI
        + (0.5 * delta - 1) * (n - 1) * math.log(a)
        - e * math.log(n * a * c - float(b @ b))
        + math.lgamma(e)
        + math.lgamma(0.5 * delta)
    )


def _log_star_all_prefactor(delta, n, a):
    m = (n + 1) * delta / 2
    log_cn = LOG2 + 0.5 * n * LOGPI - math.lgamma(0.5 * n)
    return (m - 1) * LOG2 + log_cn + math.lgamma(m) - m * math.log((n + 1) * a) + betaln(0.5 * delta, 0.5 * n)


def _star_all_hyper(delta, n, a, b2):
    alpha = (n + 1) * delta / 4
    u = 4.0 * b2 / ((n + 1) * a) ** 2
    return alpha, alpha + 0.5, 0.5 * (n + delta), u


def log_norm_star_all(delta: float, family: GraphFamily, D, ctrl: SeriesControl | None = None) -> float:
    _require_cone(family, D)
    a, b, _ = star_params(family, D)
    n = family.n
    A, Bp, C, u = _star_all_hyper(delta, n, a, float(b @ b))
    return _log_star_all_prefactor(delta, n, a) + math.log(gauss_2f1(A, Bp, C, u, ctrl))


def star_all_mean(family: GraphFamily, delta: float, D, ctrl: SeriesControl | None = None) -> np.ndarray:
    """Analytic ``E(K)`` for the star with one vertex class.

    Uses the 2F1 derivative rule instead of finite differences; handy as a
    cross-check of :func:`exact_mean`.
    """
    from .special import gauss_2f1_derivative

    _require_cone(family, D)
    a, b, _ = star_params(family, D)
    n = family.n
    b2 = float(b @ b)
    A, Bp, C, u = _star_all_hyper(delta, n, a, b2)
    F = gauss_2f1(A, Bp, C, u, ctrl)
    dF = gauss_2f1_derivative(A, Bp, C, u, ctrl) / F
    m = (n + 1) * delta / 2
    # log I = -m log a + log F(u), u = 4 |b|^2 / ((n+1) a)^2
    g_a = -m / a + dF * (-2.0 * u / a)
    g_b = dF * 8.0 * b / ((n + 1) * a) ** 2
    p = n + 1
    c, *leaves = [v - 1 for v in family.roles]
    E = np.zeros((p, p))
    # the vertex class has n+1 diagonal cells, each edge class two cells
    E[np.diag_indices(p)] = -2.0 * g_a / (n + 1)
    for l, gb in zip(leaves, g_b):
        E[c, l] = E[l, c] = -gb
    return E


def log_norm_triangle(delta: float, family: GraphFamily, D) -> float:
    _require_cone(family, D)
    M = _relabelled(family, D)
    d = M[0, 0] + M[1, 1] + 2 * M[0, 1]
    h = 0.5 * (delta + 1)
    return (
        0.5 * (3 * delta + 4) * LOG2
        + LOGPI
        + math.lgamma(0.5 * delta)
        + 2 * math.lgamma(h)
        + 0.5 * delta * math.log(d)
        - h * math.log(M[2, 2] * d - 4 * M[0, 2] ** 2)
        - h * math.log(M[0, 0] * M[1, 1] - M[0, 1] ** 2)
    )


def log_norm_decomp4(delta: float, family: GraphFamily, D) -> float:
    _require_cone(family, D)
    M = _relabelled(family, D)
    d = M[0, 0] + M[1, 1] + 2 * M[0, 1]
    return (
        (delta + 2) * LOG2
        + 1.5 * LOGPI
        + math.lgamma(0.5 * delta)
        + math.lgamma(0.5 * (delta + 1))
        + math.lgamma(delta)
        + (delta - 1) * math.log(d)
        - 0.5 * (delta + 1) * math.log(M[0, 0] * M[1, 1] - M[0, 1] ** 2)
        - delta * math.log(M[2, 2] * d - 2 * (M[0, 2] ** 2 + M[0, 3] ** 2))
    )


def log_norm(family: GraphFamily, delta: float, D, ctrl: SeriesControl | None = None) -> float:
    """Dispatch to the closed form for ``family.tag``."""
    tag = family.tag
    if tag == "Tree":
        return log_norm_tree(delta, family, D, ctrl)
    if tag == "StarLeaves":
        return log_norm_star_leaves(delta, family, D)
    if tag == "StarAll":
        return log_norm_star_all(delta, family, D, ctrl)
    if tag == "Triangle":
        return log_norm_triangle(delta, family, D)
    if tag == "Decomp4":
        return log_norm_decomp4(delta, family, D)
    raise ValueError(f"unknown family {tag!r}")


# -- exact mean -------------------------------------------------------------


def class_gradient(
    family: GraphFamily,
    delta: float,
    D,
    step: float = 1e-5,
    max_halvings: int = 40,
) -> np.ndarray:
    """``d log I / d d_u`` for every color class ``u`` by central differences.

    Moving ``d_u`` moves every cell of class ``u`` in ``D`` at once. The
    step starts at ``step * max(1, |d_u|)`` and is halved until both
    perturbed matrices stay in the dual cone.
    """
    D = _check_pattern(family, D)
    _require_cone(family, D)
    fmap = family.fmap
    base = extract_free(D, fmap)
    grad = np.empty(fmap.n_free)
    for u in range(fmap.n_free):
        mask = fmap.class_of == u
        h = step * max(1.0, abs(base[u]))
        for _ in range(max_halvings):
            Dp, Dm = D.copy(), D.copy()
            Dp[mask] += h
            Dm[mask] -= h
            if dual_cone_check(family, Dp) and dual_cone_check(family, Dm):
                break
            h *= 0.5
        else:
            raise StepTooLarge(f"no admissible finite-difference step for class {u}")
        grad[u] = (log_norm(family, delta, Dp) - log_norm(family, delta, Dm)) / (2 * h)
    return grad


def exact_mean(family: GraphFamily, delta: float, D, step: float = 1e-5) -> np.ndarray:
    """``E(K) = -2 d log I / dD`` on the colored span.

    A class occupying ``m`` cells of the symmetric matrix contributes
    ``m * K_u * d_u`` to ``<K, D>``, so ``E(K_u) = -2 g_u / m``.
    """
    g = class_gradient(family, delta, D, step=step)
    return colored_matrix(-2.0 * g / family.fmap.multiplicity(), family.fmap)


# -- Monte-Carlo oracle -------------------------------------------------------


@dataclass(frozen=True)
class MCEstimate:
    """Importance-sampling estimate of ``I(delta, D)``.

    ``estimate`` and ``std_err`` can overflow for large constants;
    ``log_estimate`` and ``rel_std_err`` are always usable.
    """

    estimate: float
    std_err: float
    log_estimate: float
    rel_std_err: float
    n_draws: int
    n_valid: int


def proposal_dof(fmap: FreeEntryMap, delta: float) -> np.ndarray:
    """Chi-square degrees of freedom ``p - i - v_i + delta`` (1-indexed ``i``)."""
    i = np.arange(1, fmap.p + 1)
    return fmap.p - i - fmap.v_counts + delta


def mc_norm_oracle(
    graph: ColoredGraph,
    delta: float,
    D,
    n_draws: int = 1_000_000,
    seed: int | None = 0,
    chunk: int = 200_000,
) -> MCEstimate:
    """Importance sampling of ``I(delta, D)`` in the scaled Cholesky coordinates.

    Draws the free entries of ``Psi`` from the sampler's proposal (standard
    normal off the diagonal, chi roots on it), completes them, and weights
    each draw by target over proposal. Everything the two densities share
    cancels, leaving a constant times ``h`` from the sampler, so the weights
    are bounded whenever ``h`` is. Chunks use independent child seeds so the
    result does not depend on how draws are split across workers.
    """
    from .sampler import log_h_batch

    fmap = free_entry_map(graph)
    D = np.asarray(D, dtype=float)
    Q = scale_factor(D)
    p = fmap.p
    k = proposal_dof(fmap, delta)
    rows, cols = fmap.free_rows, fmap.free_cols
    diag_free = rows == cols
    k_free = k[rows[diag_free]]
    if np.any(k_free <= 0):
        raise DegenerateEnvelope("nonpositive chi-square degrees of freedom in the proposal")
    n_off = int((~diag_free).sum())

    log_c = fmap.n_vertex_classes * LOG2
    log_c += float(np.sum((p - fmap.v_counts - fmap.d_counts + delta - 1) * np.log(np.diag(Q))))
    log_c += float(np.sum((0.5 * k_free - 1) * LOG2 + np.array([math.lgamma(0.5 * kk) for kk in k_free])))
    log_c += n_off * 0.5 * math.log(2 * math.pi)

    n_chunks = max(1, -(-int(n_draws) // chunk))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    log_w = []
    remaining = int(n_draws)
    for child in children:
        m = min(chunk, remaining)
        remaining -= m
        rng = np.random.default_rng(child)
        free = np.empty((m, fmap.n_free))
        free[:, ~diag_free] = rng.standard_normal((m, n_off))
        free[:, diag_free] = np.sqrt(rng.gamma(0.5 * k_free, 2.0, size=(m, k_free.size)))
        psi, _, ok = complete_batch(free, Q, fmap)
        lh = log_h_batch(psi, fmap, delta)
        log_w.append(np.where(ok, lh, -np.inf))
    lw = np.concatenate(log_w)
    n_valid = int(np.isfinite(lw).sum())
    if n_valid == 0:
        raise DegenerateEnvelope("no proposal draw completed to a valid matrix")
    top = lw.max()
    w = np.exp(lw - top)
    mean = w.mean()
    se = w.std(ddof=1) / math.sqrt(w.size)
    log_est = log_c + top + math.log(mean)
    scale = math.exp(log_c + top) if log_c + top < 700 else math.inf
    return MCEstimate(
        estimate=scale * mean,
        std_err=scale * se,
        log_estimate=log_est,
        rel_std_err=se / mean,
        n_draws=int(n_draws),
        n_valid=n_valid,
    )
