"""Independence Metropolis-Hastings sampler for the colored G-Wishart.

The chain lives on the free entries of ``Psi = Phi Q^{-1}``. Proposals draw
each free off-diagonal entry from N(0, 1) and each free diagonal entry as
the root of a chi-square variate; the remaining entries are completed and
the move is accepted with probability ``min(1, h(new) / h(current))``.

Many chains are advanced together by :func:`run_many`. Each chain reads its
random numbers from its own :class:`ProposalStream`, drawn in fixed-size
blocks, so a chain's trajectory depends only on its seed and not on which
other chains share the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .colored_graph import ColoredGraph, FreeEntryMap, free_entry_map
from .completion import complete_batch, extract_free, reconstruct_k, scale_factor
from .errors import DNotPositiveDefinite, InitFailed, InvalidDoF, PosteriorScaleNotPD
from .exact import Hyperparams, proposal_dof

BLOCK = 256
INIT_RETRIES = 1_000_000


@dataclass(frozen=True)
class ChainConfig:
    """Length and seeding of one chain.

    Steps are numbered ``1..iterations``; steps after ``burn_in`` are kept
    (every ``thin``-th one).
    """

    iterations: int = 5000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    record_trace: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")

    @property
    def kept(self) -> int:
        return -(-(self.iterations - self.burn_in) // self.thin)


@dataclass
class SampleSummary:
    """Output of one chain.

    ``logdet_trace`` and ``free_trace`` (kept values of ``log|K|`` and of
    the free entries of ``K``) are ``None`` unless ``record_trace`` was set.
    """

    mean_k: np.ndarray
    kept: int
    acceptance_rate: float
    logdet_trace: np.ndarray | None = None
    free_trace: np.ndarray | None = None


class ProposalStream:
    """Per-chain source of proposals and acceptance uniforms.

    Random numbers are drawn ``BLOCK`` steps at a time in a fixed order
    (normals, chi-square variates, uniforms), so single-step and batched
    consumers see identical values.
    """

    def __init__(self, fmap: FreeEntryMap, delta: float, seed, block: int = BLOCK):
        dof = proposal_dof(fmap, delta)
        rows, cols = fmap.free_rows, fmap.free_cols
        self.diag = rows == cols
        self.dof = dof[rows[self.diag]]
        if np.any(self.dof <= 0):
            bad = rows[self.diag][self.dof <= 0] + 1
            raise InvalidDoF(f"nonpositive proposal degrees of freedom at rows {bad.tolist()}")
        self.n_free = fmap.n_free
        self.n_off = int((~self.diag).sum())
        self.block = block
        self.rng = np.random.default_rng(seed)
        self._free = np.empty((0, self.n_free))
        self._logu = np.empty(0)
        self._pos = 0

    def _refill(self):
        L = self.block
        free = np.empty((L, self.n_free))
        free[:, ~self.diag] = self.rng.standard_normal((L, self.n_off))
        free[:, self.diag] = np.sqrt(self.rng.gamma(0.5 * self.dof, 2.0, size=(L, self.dof.size)))
        self._free = free
        self._logu = np.log(self.rng.random(L))
        self._pos = 0

    def take(self, m: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Next ``m`` proposals and log-uniforms, refilling across block edges."""
        out_f, out_u = [], []
        while m > 0:
            if self._pos == self._free.shape[0]:
                self._refill()
            k = min(m, self._free.shape[0] - self._pos)
            out_f.append(self._free[self._pos : self._pos + k])
            out_u.append(self._logu[self._pos : self._pos + k])
            self._pos += k
            m -= k
        return np.concatenate(out_f), np.concatenate(out_u)


def _h_masks(fmap: FreeEntryMap):
    cached = getattr(fmap, "_h_cache", None)
    if cached is None:
        p = fmap.p
        upper = np.triu(np.ones((p, p), dtype=bool))
        free = np.zeros((p, p), dtype=bool)
        free[fmap.free_rows, fmap.free_cols] = True
        nonfree = upper & ~free
        nonfree_diag = np.diag(nonfree).copy()
        cached = (nonfree, nonfree_diag)
        object.__setattr__(fmap, "_h_cache", cached)
    return cached


def log_h_batch(psi: np.ndarray, fmap: FreeEntryMap, delta) -> np.ndarray:
    """``log h`` for a stack of completed ``Psi`` (shape ``(B, p, p)``).

    Sum over non-free diagonal cells of ``(p - i - v_i + delta - 1) log Psi_ii``
    minus half the sum of squares over all non-free upper cells, structural
    zeros included. Returns ``-inf`` where a non-free diagonal is not positive.
    """
    nonfree, nonfree_diag = _h_masks(fmap)
    psi = np.asarray(psi, dtype=float)
    delta = np.asarray(delta, dtype=float).reshape(-1, 1)
    i = np.arange(1, fmap.p + 1)
    expo = (fmap.p - i - fmap.v_counts - 1) + delta  # (B or 1, p)
    with np.errstate(over="ignore"):
        # far-out invalid candidates can overflow; -inf then means rejection
        quad = 0.5 * np.sum(np.where(nonfree, psi, 0.0) ** 2, axis=(-2, -1))
    if not nonfree_diag.any():
        return -quad
    d = np.diagonal(psi, axis1=-2, axis2=-1)[:, nonfree_diag]
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(d > 0, np.log(np.where(d > 0, d, 1.0)), -np.inf)
    e = np.broadcast_to(expo, (psi.shape[0], fmap.p))[:, nonfree_diag]
    # a zero exponent must not turn log(0) into nan
    diag_term = np.where(e == 0, 0.0, e * logs).sum(axis=-1)
    diag_term = np.where(np.all(d > 0, axis=-1), diag_term, -np.inf)
    return diag_term - quad


def log_h(psi: np.ndarray, fmap: FreeEntryMap, delta: float) -> float:
    """``log h`` of one completed ``Psi``; ``-inf`` marks certain rejection."""
    return float(log_h_batch(np.asarray(psi)[None], fmap, delta)[0])


# -- single chain API ---------------------------------------------------------


@dataclass
class ChainState:
    """Current ``Psi`` with everything needed to take the next step."""

    psi: np.ndarray
    q: np.ndarray
    hyper: Hyperparams
    fmap: FreeEntryMap = field(repr=False)
    stream: ProposalStream = field(repr=False)
    log_h: float = 0.0
    step_index: int = 0

    @property
    def k(self) -> np.ndarray:
        return reconstruct_k(self.psi, self.q)


def _q_from(D) -> np.ndarray:
    return scale_factor(np.asarray(D, dtype=float))


def _init_psi(stream: ProposalStream, Q, fmap, delta):
    """First valid proposal in the stream; slots up to it are consumed."""
    tried = 0
    while tried < INIT_RETRIES:
        if stream._pos == stream._free.shape[0]:
            stream._refill()
        free = stream._free[stream._pos :]
        psi, _, ok = complete_batch(free, Q, fmap)
        if ok.any():
            k = int(np.argmax(ok))
            stream._pos += k + 1
            return psi[k], float(log_h_batch(psi[k : k + 1], fmap, delta)[0])
        stream._pos += free.shape[0]
        tried += free.shape[0]
    raise InitFailed(f"no valid starting point in {tried} proposals")


def init_chain(graph: ColoredGraph, delta: float, D, seed=0) -> ChainState:
    """Start a chain from a single proposal draw (redrawn if it is invalid)."""
    hyper = Hyperparams(delta, D)
    fmap = free_entry_map(graph)
    Q = _q_from(hyper.D)
    stream = ProposalStream(fmap, delta, seed)
    psi, lh = _init_psi(stream, Q, fmap, delta)
    return ChainState(psi=psi, q=Q, hyper=hyper, fmap=fmap, stream=stream, log_h=lh)


def propose(state: ChainState) -> tuple[np.ndarray, float]:
    """Fresh candidate free entries (independent of ``state.psi``) and a log-uniform."""
    free, logu = state.stream.take(1)
    return free[0], float(logu[0])


def step(state: ChainState) -> tuple[ChainState, bool]:
    """One MH move, in place; a candidate that fails completion is rejected."""
    free, logu = propose(state)
    psi, _, ok = complete_batch(free[None], state.q, state.fmap)
    accepted = False
    if ok[0]:
        lh = float(log_h_batch(psi, state.fmap, state.hyper.delta)[0])
        if logu < lh - state.log_h:
            state.psi, state.log_h = psi[0], lh
            accepted = True
    state.step_index += 1
    return state, accepted


# -- batched engine ---------------------------------------------------------


def run_many(
    graph: ColoredGraph,
    hypers: Hyperparams | Sequence[Hyperparams],
    seeds: Sequence,
    config: ChainConfig = ChainConfig(),
) -> list[SampleSummary]:
    """Run one chain per seed, all advanced together.

    ``hypers`` is either shared by every chain or given per chain. The seed
    in ``config`` is ignored; chain ``j`` uses ``seeds[j]`` and produces the
    same summary as ``run`` with that seed.
    """
    fmap = free_entry_map(graph)
    B = len(seeds)
    if isinstance(hypers, Hyperparams):
        hypers = [hypers] * B
    if len(hypers) != B:
        raise ValueError("need one Hyperparams per seed")
    deltas = np.array([h.delta for h in hypers])
    Q = np.stack([_q_from(h.D) for h in hypers])
    streams = [ProposalStream(fmap, h.delta, s) for h, s in zip(hypers, seeds)]

    psi = np.empty((B, fmap.p, fmap.p))
    lh = np.empty(B)
    for b in range(B):
        psi[b], lh[b] = _init_psi(streams[b], Q[b], fmap, deltas[b])

    p = fmap.p
    n_keep = config.kept
    k_sum = np.zeros((B, p, p))
    accepted = np.zeros(B, dtype=np.int64)
    logdet_q = 2.0 * np.log(np.diagonal(Q, axis1=1, axis2=2)).sum(axis=1)
    if config.record_trace:
        logdet_tr = np.empty((B, n_keep))
        free_tr = np.empty((B, n_keep, fmap.n_free))
    rows, cols = fmap.free_rows, fmap.free_cols

    kept = 0
    s = 0
    while s < config.iterations:
        L = min(BLOCK, config.iterations - s)
        draws = [st.take(L) for st in streams]
        free_blk = np.stack([d[0] for d in draws], axis=1)  # (L, B, m)
        logu_blk = np.stack([d[1] for d in draws], axis=1)  # (L, B)
        for t in range(L):
            s += 1
            cand, _, ok = complete_batch(free_blk[t], Q, fmap)
            lh_new = log_h_batch(cand, fmap, deltas)
            acc = ok & (logu_blk[t] < lh_new - lh)
            psi[acc] = cand[acc]
            lh[acc] = lh_new[acc]
            accepted += acc
            if s > config.burn_in and (s - config.burn_in - 1) % config.thin == 0:
                K = reconstruct_k(psi, Q)
                k_sum += K
                if config.record_trace:
                    logdet_tr[:, kept] = logdet_q + 2.0 * np.log(np.diagonal(psi, axis1=1, axis2=2)).sum(axis=1)
                    free_tr[:, kept] = K[:, rows, cols]
                kept += 1

    out = []
    for b in range(B):
        out.append(
            SampleSummary(
                mean_k=k_sum[b] / kept,
                kept=kept,
                acceptance_rate=float(accepted[b]) / config.iterations,
                logdet_trace=logdet_tr[b].copy() if config.record_trace else None,
                free_trace=free_tr[b].copy() if config.record_trace else None,
            )
        )
    return out


def run(graph: ColoredGraph, delta: float, D, config: ChainConfig = ChainConfig()) -> SampleSummary:
    """Run a single chain and average ``K`` over the kept steps."""
    return run_many(graph, Hyperparams(delta, D), [config.seed], config)[0]


def posterior_params(delta: float, D, n: int, S) -> Hyperparams:
    """Conjugate update ``(delta + n, D + n S)`` after ``n`` observations."""
    if n < 1:
        raise ValueError("posterior update needs n >= 1")
    D = np.asarray(D, dtype=float)
    S = np.asarray(S, dtype=float)
    if D.shape != S.shape:
        raise ValueError(f"D {D.shape} and S {S.shape} differ in shape")
    post = D + n * S
    try:
        np.linalg.cholesky(post)
    except np.linalg.LinAlgError as exc:
        raise PosteriorScaleNotPD("D + nS is not positive definite") from exc
    return Hyperparams(delta + n, post)


def wishart_complete_mean(delta: float, D) -> np.ndarray:
    """Mean of ``|K|^{(delta-2)/2} exp(-<K, D>/2)`` on all of the PD cone.

    This is a Wishart with ``delta + p - 1`` degrees of freedom and scale
    ``D^{-1}``, whose mean is ``(delta + p - 1) D^{-1}``.
    """
    D = np.asarray(D, dtype=float)
    try:
        np.linalg.cholesky(D)
    except np.linalg.LinAlgError as exc:
        raise DNotPositiveDefinite("D is not positive definite") from exc
    return (delta + D.shape[0] - 1) * np.linalg.inv(D)


__all__ = [
    "BLOCK",
    "ChainConfig",
    "ChainState",
    "ProposalStream",
    "SampleSummary",
    "extract_free",
    "init_chain",
    "log_h",
    "log_h_batch",
    "posterior_params",
    "propose",
    "run",
    "run_many",
    "step",
    "wishart_complete_mean",
]
