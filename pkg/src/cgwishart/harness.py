"""Built-in fixtures, data simulation and the prior/posterior experiments.

Reports are plain dictionaries so they serialize to JSON without a custom
encoder. Everything except ``timing_s`` is a deterministic function of the
config and master seed.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .colored_graph import ColoredGraph, free_entry_map
from .diagnostics import DEFAULT_BATCHES, acf, batch_standard_error, nmse, write_series_csv
from .errors import KNotPD, UnknownFixture
from .exact import Hyperparams, bind_family, exact_mean
from .sampler import ChainConfig, posterior_params, run_many

CHAIN_GROUP = 100  # chains advanced together in one batch


@dataclass(frozen=True)
class Fixture:
    name: str
    graph: ColoredGraph
    delta: float
    D: np.ndarray
    K_true: np.ndarray | None = None


def _fig1a() -> Fixture:
    edges = [(1, 4), (2, 4), (3, 4), (4, 5), (5, 6), (5, 7)]
    g = ColoredGraph.from_parts(7, edges, None, [edges])
    D = np.diag([1.0, 2, 5, 25, 6, 3, 4])
    for i, j in edges:
        D[i - 1, j - 1] = D[j - 1, i - 1] = 2.0
    return Fixture("fig1a", g, 1.0, D)


def _star_D(a, b, c):
    n = len(b)
    D = np.diag([a] + [c] * n).astype(float)
    D[0, 1:] = D[1:, 0] = b
    return D


def _fig1b() -> Fixture:
    edges = [(1, j) for j in range(2, 10)]
    g = ColoredGraph.from_parts(9, edges, [[1], list(range(2, 10))], None)
    return Fixture("fig1b", g, 3.0, _star_D(9.0, np.arange(1.0, 9.0), 25.0))


def _fig1c() -> Fixture:
    edges = [(1, j) for j in range(2, 11)]
    g = ColoredGraph.from_parts(10, edges, [list(range(1, 11))], None)
    # D_1j = j - 1; E(K_1j) is proportional to D_1j, and this order is the
    # one consistent with the reference E(K) (a leaf relabelling of 9..1)
    return Fixture("fig1c", g, 3.0, _star_D(25.0, np.arange(1.0, 10.0), 25.0))


def _fig1d() -> Fixture:
    g = ColoredGraph.from_parts(3, [(1, 2), (1, 3), (2, 3)], None, [[(1, 2)], [(1, 3), (2, 3)]])
    return Fixture("fig1d", g, 3.0, np.array([[3.0, 1, 2], [1, 4, 2], [2, 2, 5]]))


def _fig1e() -> Fixture:
    g = ColoredGraph.from_parts(
        4,
        [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4)],
        [[1], [2], [3, 4]],
        [[(1, 2)], [(1, 3), (2, 3)], [(1, 4), (2, 4)]],
    )
    D = np.array([[2.0, 1, 3, 4], [1, 1, 3, 4], [3, 3, 200, 0], [4, 4, 0, 200]])
    return Fixture("fig1e", g, 3.0, D)


def cycle_graph(p: int, pattern: str) -> ColoredGraph:
    """Cycle ``1-2-...-p-1`` with one of three colorings.

    ``a``: odd / even vertex classes and alternating edge classes (edges
    leaving an odd vertex vs. the rest, the closing edge ``(1, p)`` joining
    the latter). ``b``: odd / even vertex classes, all edges distinct.
    ``c``: all vertices distinct, alternating edge classes.
    """
    if p < 3:
        raise ValueError("a cycle needs p >= 3")
    edges = [(i, i + 1) for i in range(1, p)] + [(1, p)]
    parity_v = [list(range(1, p + 1, 2)), list(range(2, p + 1, 2))]
    odd_e = [(i, i + 1) for i in range(1, p, 2)]
    rest_e = [e for e in edges if e not in odd_e]
    if pattern == "a":
        return ColoredGraph.from_parts(p, edges, parity_v, [odd_e, rest_e])
    if pattern == "b":
        return ColoredGraph.from_parts(p, edges, parity_v, None)
    if pattern == "c":
        return ColoredGraph.from_parts(p, edges, None, [odd_e, rest_e])
    raise ValueError(f"unknown cycle pattern {pattern!r}")


def cycle_true_k(p: int) -> np.ndarray:
    """0.1 on odd diagonal cells, 0.03 on even ones, 0.01 on every cycle edge."""
    K = np.zeros((p, p))
    idx = np.arange(p)
    K[idx, idx] = np.where(idx % 2 == 0, 0.1, 0.03)
    K[idx[:-1], idx[1:]] = K[idx[1:], idx[:-1]] = 0.01
    K[0, p - 1] = K[p - 1, 0] = 0.01
    return K


_FIG1 = {"fig1a": _fig1a, "fig1b": _fig1b, "fig1c": _fig1c, "fig1d": _fig1d, "fig1e": _fig1e}
FIXTURE_NAMES = tuple(_FIG1) + tuple(f"cycle{p}{c}" for p in (20, 30) for c in "abc")


def builtin_fixture(name: str) -> Fixture:
    """One of :data:`FIXTURE_NAMES`. Cycle fixtures carry the true ``K`` and a
    ``delta = 3``, ``D = I`` prior."""
    if name in _FIG1:
        return _FIG1[name]()
    if name in FIXTURE_NAMES:
        p, pattern = int(name[5:7]), name[7]
        return Fixture(name, cycle_graph(p, pattern), 3.0, np.eye(p), cycle_true_k(p))
    raise UnknownFixture(name)


def simulate_gaussian(K_true, n: int, seed=None) -> np.ndarray:
    """``S = X^T X / n`` for ``n`` draws from ``N(0, K_true^{-1})``."""
    K_true = np.asarray(K_true, dtype=float)
    if n < 1:
        raise ValueError("n must be positive")
    try:
        L = np.linalg.cholesky(K_true)
    except np.linalg.LinAlgError as exc:
        raise KNotPD("K_true is not positive definite") from exc
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, K_true.shape[0]))
    # K = L L^T, so x = L^{-T} z has covariance K^{-1}
    X = np.linalg.solve(L.T, Z.T).T
    S = X.T @ X / n
    return 0.5 * (S + S.T)


# -- experiments --------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a report.

    ``iterations`` / ``burn_in`` default to 5000 / 1000 for prior runs and
    6000 / 1000 (5000 kept) for posterior runs.
    """

    fixture: str = "fig1d"
    mode: str = "prior"
    replications: int = 100
    iterations: int | None = None
    burn_in: int = 1000
    seed: int = 0
    n_data: int = 1000
    delta: float | None = None
    record_trace: bool = True
    n_batches: int = DEFAULT_BATCHES
    graph_path: str | None = None
    D_path: str | None = None
    K_true_path: str | None = None

    def __post_init__(self):
        if self.mode not in ("prior", "posterior"):
            raise ValueError(f"mode must be 'prior' or 'posterior', got {self.mode!r}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.mode == "posterior" and self.n_data < 1:
            raise ValueError("posterior mode needs n_data >= 1")
        if self.iterations is None:
            self.iterations = self.burn_in + (5000 if self.mode == "posterior" else 4000)

    def chain(self) -> ChainConfig:
        return ChainConfig(self.iterations, self.burn_in, 1, self.seed, self.record_trace)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _read_matrix(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def resolve_fixture(config: ExperimentConfig) -> Fixture:
    """Fixture named in ``config`` with any file overrides applied."""
    if config.graph_path:
        graph = ColoredGraph.from_json(config.graph_path)
        base = Fixture("custom", graph, 3.0, np.eye(graph.p))
    else:
        base = builtin_fixture(config.fixture)
    D = _read_matrix(config.D_path) if config.D_path else base.D
    K_true = _read_matrix(config.K_true_path) if config.K_true_path else base.K_true
    delta = config.delta if config.delta is not None else base.delta
    return Fixture(base.name, base.graph, float(delta), D, K_true)


def _groups(items, size=CHAIN_GROUP):
    for start in range(0, len(items), size):
        yield start, items[start : start + size]


def _series_block(summary, fmap, n_batches, p):
    """Trace-derived diagnostics for one replication."""
    out = {"acf": acf(summary.logdet_trace).tolist()}
    entries = {"K11": (0, 0), "K12": (0, 1), "K1p": (0, p - 1), "K22": (1, 1)}
    bse = {}
    for name, (i, j) in entries.items():
        if i >= p or j >= p:
            continue
        c = int(fmap.class_of[i, j])
        if c < 0:
            continue
        series = summary.free_trace[:, c]
        try:
            bse[name] = batch_standard_error(series, n_batches)
        except Exception:
            bse[name] = None
    out["batch_se"] = bse
    return out


def _base_report(config, fx, kind):
    return {
        "kind": kind,
        "config": asdict(config),
        "seed": config.seed,
        "provenance": {"version": __version__, "config_hash": config.digest()},
        "graph": fx.graph.to_dict(),
        "delta": fx.delta,
    }


def run_prior_experiment(config: ExperimentConfig) -> dict:
    """Replicated prior sampling against the closed-form mean.

    Returns a report whose ``nmse.mean`` is the average over replications
    of ``nmse(E(K), K_hat_j)``.
    """
    fx = resolve_fixture(config)
    t0 = time.perf_counter()
    family = bind_family(fx.graph)
    EK = exact_mean(family, fx.delta, fx.D)
    hyper = Hyperparams(fx.delta, fx.D)
    seeds = np.random.SeedSequence(config.seed).spawn(config.replications)
    summaries = []
    for _, grp in _groups(seeds):
        summaries += run_many(fx.graph, hyper, grp, config.chain())
    elapsed = time.perf_counter() - t0

    per = [nmse(EK, s.mean_k) for s in summaries]
    report = _base_report(config, fx, "prior")
    report.update(
        {
            "family": family.tag,
            "D": fx.D.tolist(),
            "estimates": {
                "exact_mean": EK.tolist(),
                "mean_k": np.mean([s.mean_k for s in summaries], axis=0).tolist(),
                "per_rep": [s.mean_k.tolist() for s in summaries],
            },
            "nmse": _stats(per),
            "acceptance": _stats([s.acceptance_rate for s in summaries]),
            "kept": summaries[0].kept,
            "timing_s": {"total": elapsed, "per_replication": elapsed / len(summaries)},
        }
    )
    if config.record_trace:
        fmap = free_entry_map(fx.graph)
        report["diagnostics"] = _series_block(summaries[0], fmap, config.n_batches, fx.graph.p)
        report["_traces"] = summaries[0]
    return report


def run_posterior_experiment(config: ExperimentConfig) -> dict:
    """Replicated posterior estimation from simulated Gaussian data.

    Each replication draws ``n_data`` observations from ``N(0, K_true^{-1})``,
    updates the ``(delta, D)`` prior and estimates ``K`` by the chain mean.
    """
    fx = resolve_fixture(config)
    if fx.K_true is None:
        raise ValueError(f"fixture {fx.name} has no true K for posterior mode")
    t0 = time.perf_counter()
    children = np.random.SeedSequence(config.seed).spawn(config.replications)
    chain_seeds, hypers = [], []
    for child in children:
        ds, cs = child.spawn(2)
        S = simulate_gaussian(fx.K_true, config.n_data, ds)
        hypers.append(posterior_params(fx.delta, fx.D, config.n_data, S))
        chain_seeds.append(cs)
    summaries = []
    for start, grp in _groups(chain_seeds):
        summaries += run_many(fx.graph, hypers[start : start + len(grp)], grp, config.chain())
    elapsed = time.perf_counter() - t0

    per = [nmse(fx.K_true, s.mean_k) for s in summaries]
    p = fx.graph.p
    fmap = free_entry_map(fx.graph)
    report = _base_report(config, fx, "posterior")
    avg = np.mean([s.mean_k for s in summaries], axis=0)
    entries = {"K11": avg[0, 0], "K12": avg[0, 1], "K1p": avg[0, p - 1], "K22": avg[1, 1]}
    report.update(
        {
            "n_data": config.n_data,
            "estimates": {
                "true_k": fx.K_true.tolist(),
                "mean_k": avg.tolist(),
                "entries": {k: float(v) for k, v in entries.items()},
                "per_rep": [s.mean_k.tolist() for s in summaries],
            },
            "nmse": _stats(per),
            "acceptance": _stats([s.acceptance_rate for s in summaries]),
            "kept": summaries[0].kept,
            "timing_s": {"total": elapsed, "per_replication": elapsed / len(summaries)},
        }
    )
    if config.record_trace:
        blocks = [_series_block(s, fmap, config.n_batches, p) for s in summaries]
        report["diagnostics"] = {
            "acf": blocks[0]["acf"],
            "batch_se": blocks[0]["batch_se"],
            "batch_se_mean": {
                k: float(np.mean([b["batch_se"][k] for b in blocks if b["batch_se"].get(k) is not None]))
                for k in blocks[0]["batch_se"]
                if blocks[0]["batch_se"][k] is not None
            },
        }
        report["_traces"] = summaries[0]
    return report


def run_experiment(config: ExperimentConfig) -> dict:
    if config.mode == "prior":
        return run_prior_experiment(config)
    return run_posterior_experiment(config)


def _stats(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {
        "mean": float(v.mean()),
        "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
        "per_rep": v.tolist(),
    }


def report_payload(report: dict) -> dict:
    """The reproducible part of a report: drops timings and in-memory traces."""
    return {k: v for k, v in report.items() if k not in ("timing_s", "_traces", "series_paths")}


def emit_report(report: dict, path: str | Path) -> dict:
    """Write ``path`` (JSON) plus trace and ACF CSV files next to it.

    Returns the dictionary that was written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = {k: v for k, v in report.items() if k != "_traces"}
    summary = report.get("_traces")
    if summary is not None and summary.logdet_trace is not None:
        stem = path.with_suffix("")
        trace_path = Path(f"{stem}_trace.csv")
        acf_path = Path(f"{stem}_acf.csv")
        write_series_csv(trace_path, {"logdet": summary.logdet_trace})
        rho = np.asarray(report["diagnostics"]["acf"])
        write_series_csv(acf_path, {"lag": np.arange(rho.size), "acf": rho})
        out["series_paths"] = {"trace": trace_path.name, "acf": acf_path.name}
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return out


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def payload_bytes(report: dict) -> bytes:
    """Canonical serialization of :func:`report_payload`, for byte comparisons."""
    return json.dumps(report_payload(report), sort_keys=True).encode()
