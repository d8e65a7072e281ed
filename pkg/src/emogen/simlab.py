"""Simulation studies over automated evolution sessions.

A study pins a target face and replaces the human selector with a
metric-driven one, then repeats the whole session many times to build
per-generation error distributions. On top of that sit the analysis
tools: KL divergence between consecutive generations, a Gaussian
mixture fit over PCA-projected outcome distributions, target-bias and
repeatability summaries, the blendshape-activation study and the
ranked selection-pressure variant.

Every repetition gets its own RNG stream derived from the master seed
and the repetition index, so studies are reproducible and repetitions
are order-independent.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import metrics
from .evolution import (
    POP_SIZE,
    GAConfig,
    Population,
    Selection,
    TAG_AVG_ALL,
    TAG_AVG_PAIR,
    TAG_CARRY,
    TAG_CHILD,
    TAG_ELITE,
    TAG_RANDOM,
    eligible_genes,
    finalize_member,
    mutate,
    random_member,
    run_session,
)
from .metrics import MetricUndefinedError, PcaModel, VertexCovariance
from .rig import BlendshapeRig

log = logging.getLogger(__name__)

METRIC_KINDS = ("ED_blend", "CD", "VRTX_RMS", "ED_pca", "STD_ED_pca", "MD_vertex")
_KIND_LOOKUP = {k.lower(): k for k in METRIC_KINDS}

TAG_CHILD_RANKED = "child-ranked"

KL_BINS = 40
KL_RANGE = (0.0, 1.0)
KL_SMOOTHING = 1e-6


def normalize_metric(name: str) -> str:
    kind = _KIND_LOOKUP.get(str(name).lower())
    if kind is None:
        raise ValueError(f"unknown metric {name!r}; expected one of {METRIC_KINDS}")
    return kind


# -- metric-driven selection ---------------------------------------------------

class MetricContext:
    """Distance evaluator for one metric kind against full weight vectors.

    Caches whatever the kind needs: the reduced/projected/evaluated target
    is computed once, members per call. PCA-space kinds need ``pca``;
    MD_vertex needs ``vcov``.
    """

    def __init__(self, rig: BlendshapeRig, kind: str,
                 pca: PcaModel | None = None, vcov: VertexCovariance | None = None):
        self.rig = rig
        self.kind = normalize_metric(kind)
        self.pca = pca
        self.vcov = vcov
        if self.kind in ("ED_pca", "STD_ED_pca") and pca is None:
            raise ValueError(f"metric {self.kind} requires a PCA model")
        if self.kind == "MD_vertex" and vcov is None:
            raise ValueError("metric MD_vertex requires a vertex covariance")
        self._target_raw: np.ndarray | None = None
        self._target_rep = None

    def _represent(self, w: np.ndarray):
        if self.kind in ("ED_blend", "CD"):
            return self.rig.reduce_weights(w)
        if self.kind in ("ED_pca", "STD_ED_pca"):
            return metrics.project(self.pca, self.rig.reduce_weights(w))
        return self.rig.evaluate(w).vertices  # VRTX_RMS, MD_vertex

    def distance(self, target: np.ndarray, w: np.ndarray) -> float:
        target = np.asarray(target, dtype=float)
        if self._target_raw is None or not np.array_equal(self._target_raw, target):
            self._target_raw = target.copy()
            self._target_rep = self._represent(target)
        t = self._target_rep
        m = self._represent(np.asarray(w, dtype=float))
        if self.kind == "ED_blend":
            return metrics.ed_blend(t, m)
        if self.kind == "CD":
            return metrics.cd(t, m)
        if self.kind == "VRTX_RMS":
            return metrics.vrtx_rms(t, m)
        if self.kind == "ED_pca":
            return metrics.ed_pca(t, m)
        if self.kind == "STD_ED_pca":
            return metrics.std_ed_pca(t, m, self.pca)
        return metrics.md_vertex(t, m, self.vcov)


def auto_select(pop: Population, target, metric: MetricContext, count: int) -> Selection:
    """Pick the metric-nearest member as elite and the next count-1 as others.

    Members on which the metric is undefined rank worst; ties break by
    member index. All-undefined populations are an error.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    count = min(int(count), len(pop.members))
    dists = np.empty(len(pop.members))
    for i, w in enumerate(pop.members):
        try:
            dists[i] = metric.distance(target, w)
        except MetricUndefinedError:
            dists[i] = np.inf
    if not np.any(np.isfinite(dists)):
        raise MetricUndefinedError("metric undefined on every member of the population")
    order = np.argsort(dists, kind="stable")
    elite = int(order[0])
    others = [int(i) for i in order[1:count]]
    scores = [float(dists[i]) for i in order[:count]]
    return Selection(elite=elite, others=others, scores=scores)


# -- simulation configuration ---------------------------------------------------

def default_schedule(generations: int) -> list:
    """Selections per generation: 2 at init, 4 through gen 5, 5 afterwards."""
    return [2 if g == 0 else (4 if g <= 5 else 5) for g in range(generations + 1)]


@dataclass
class SimConfig:
    target: np.ndarray
    target_name: str = ""
    metric: str = "CD"
    repetitions: int = 500
    generations: int = 10
    schedule: list | None = None            # None -> default_schedule
    init_mode: str = "protocol"
    init_activation_range: tuple = (3, 8)
    seed: int = 0
    pressure_mode: str = "default"           # "default" | "ranked"
    disable_eyes: bool = False
    disable_pupils: bool = False
    correct_collisions: bool = True

    def schedule_list(self) -> list:
        sched = self.schedule if self.schedule is not None else default_schedule(self.generations)
        sched = [int(c) for c in sched]
        if len(sched) != self.generations + 1:
            raise ValueError(
                f"schedule length {len(sched)} != generations+1 ({self.generations + 1})")
        for c in sched:
            if not 1 <= c <= POP_SIZE:
                raise ValueError(f"selection count {c} outside 1..{POP_SIZE}")
        return sched

    def validate(self, rig: BlendshapeRig | None = None) -> None:
        normalize_metric(self.metric)
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.pressure_mode not in ("default", "ranked"):
            raise ValueError(f"unknown pressure_mode {self.pressure_mode!r}")
        self.schedule_list()
        if rig is not None:
            t = np.asarray(self.target, dtype=float)
            if t.shape != (rig.n_shapes,):
                raise ValueError(f"target shape {t.shape} != ({rig.n_shapes},)")
            if np.any(t < 0.0) or np.any(t > 1.0) or np.any(~np.isfinite(t)):
                raise ValueError("target weights must be finite and within [0, 1]")

    def ga_config(self) -> GAConfig:
        return GAConfig(
            generations=self.generations,
            init_mode=self.init_mode,
            init_activation_range=tuple(self.init_activation_range),
            disable_eyes=self.disable_eyes,
            disable_pupils=self.disable_pupils,
            correct_collisions=self.correct_collisions,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "target": np.asarray(self.target, dtype=float).tolist(),
            "target_name": self.target_name,
            "metric": self.metric,
            "repetitions": self.repetitions,
            "generations": self.generations,
            "schedule": None if self.schedule is None else [int(c) for c in self.schedule],
            "init_mode": self.init_mode,
            "init_activation_range": list(self.init_activation_range),
            "seed": self.seed,
            "pressure_mode": self.pressure_mode,
            "disable_eyes": self.disable_eyes,
            "disable_pupils": self.disable_pupils,
            "correct_collisions": self.correct_collisions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        cfg = cls(
            target=np.asarray(d["target"], dtype=float),
            target_name=d.get("target_name", ""),
            metric=d.get("metric", "CD"),
            repetitions=int(d.get("repetitions", 500)),
            generations=int(d.get("generations", 10)),
            schedule=d.get("schedule"),
            init_mode=d.get("init_mode", "protocol"),
            init_activation_range=tuple(d.get("init_activation_range", (3, 8))),
            seed=int(d.get("seed", 0)),
            pressure_mode=d.get("pressure_mode", "default"),
            disable_eyes=bool(d.get("disable_eyes", False)),
            disable_pupils=bool(d.get("disable_pupils", False)),
            correct_collisions=bool(d.get("correct_collisions", True)),
        )
        cfg.validate()
        return cfg


@dataclass
class DistributionStats:
    """Per-generation elite-to-target CD errors across repetitions."""

    target_name: str
    metric: str
    seed: int
    schedule: list
    errors: np.ndarray                      # (n_ok, generations+1)
    init_elites: np.ndarray                 # (n_ok, n_shapes)
    final_elites: np.ndarray                # (n_ok, n_shapes)
    failed: list = field(default_factory=list)   # (repetition, reason)
    kl: list = field(default_factory=list)       # KL(P_{g+1} || P_g) per step

    @property
    def repetitions_ok(self) -> int:
        return int(self.errors.shape[0])

    @property
    def generations(self) -> int:
        return int(self.errors.shape[1] - 1)

    @property
    def mu(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    @property
    def sigma(self) -> np.ndarray:
        return self.errors.std(axis=0, ddof=1) if self.errors.shape[0] > 1 \
            else np.zeros(self.errors.shape[1])

    @property
    def final_mu(self) -> float:
        return float(self.mu[-1])

    @property
    def final_sigma(self) -> float:
        return float(self.sigma[-1])

    def to_dict(self) -> dict:
        return {
            "target_name": self.target_name,
            "metric": self.metric,
            "seed": self.seed,
            "schedule": [int(c) for c in self.schedule],
            "errors": self.errors.tolist(),
            "init_elites": self.init_elites.tolist(),
            "final_elites": self.final_elites.tolist(),
            "failed": [[int(r), str(m)] for r, m in self.failed],
            "kl": [float(v) for v in self.kl],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionStats":
        return cls(
            target_name=d.get("target_name", ""),
            metric=d.get("metric", "CD"),
            seed=int(d.get("seed", 0)),
            schedule=[int(c) for c in d.get("schedule", [])],
            errors=np.asarray(d["errors"], dtype=float),
            init_elites=np.asarray(d["init_elites"], dtype=float),
            final_elites=np.asarray(d["final_elites"], dtype=float),
            failed=[(int(r), str(m)) for r, m in d.get("failed", [])],
            kl=[float(v) for v in d.get("kl", [])],
        )


# -- ranked selection-pressure advance ------------------------------------------

def _ranked_picks(pop: Population, selection: Selection) -> list:
    picks = [pop.members[selection.elite]] + [pop.members[int(i)] for i in selection.others]
    if selection.scores is not None and len(selection.scores) == len(picks):
        order = np.argsort(np.asarray(selection.scores, dtype=float), kind="stable")
        picks = [picks[int(i)] for i in order]
    return picks


def _pair_children(genes: np.ndarray, picks: list, m: int, rng) -> list:
    """Breed each rank-adjacent pair once: complementary crossover + mutation."""
    children = []
    for i in range(0, len(picks) - 1, 2):
        a, b = picks[i], picks[i + 1]
        if np.array_equal(a, b):
            children.append(mutate(a, genes, m, rng))
            children.append(mutate(b, genes, m, rng))
            continue
        mask = rng.random(len(genes)) < 0.5
        c1, c2 = a.copy(), b.copy()
        c1[genes[mask]] = b[genes[mask]]
        c2[genes[mask]] = a[genes[mask]]
        children.append(mutate(c1, genes, m, rng))
        children.append(mutate(c2, genes, m, rng))
    return children


def advance_generation_pressure(rig: BlendshapeRig, cfg: GAConfig, pop: Population,
                                selection: Selection, rng) -> Population:
    """Like the default advance, but child slots come from rank-paired parents.

    Parents are paired strictly by fitness rank; each pair breeds exactly
    once, producing two complementary children. Elite/average/random slots
    keep their usual recipes. When the pair queue runs dry, leftover child
    slots fall back to a mutated elite.
    """
    selection.validate()
    genes = eligible_genes(rig, cfg)
    elite_w = pop.members[selection.elite]
    picks = [elite_w] + [pop.members[int(i)] for i in selection.others]
    n_sel = len(picks)
    g = pop.generation

    queue = _pair_children(genes, _ranked_picks(pop, selection), cfg.mutation_genes, rng)

    members = np.zeros_like(pop.members)
    tags: list = [None] * POP_SIZE
    corrections: list = [None] * POP_SIZE

    def next_child():
        if queue:
            return queue.pop(0), TAG_CHILD_RANKED
        return mutate(elite_w, genes, cfg.mutation_genes, rng), TAG_CHILD

    for slot in range(1, POP_SIZE + 1):
        idx = slot - 1
        if slot == 1:
            members[idx] = elite_w
            tags[idx] = TAG_ELITE
            corrections[idx] = pop.corrections[selection.elite]
            continue
        if slot == 2 and n_sel > 2:
            w, corr = finalize_member(rig, cfg, np.mean(picks, axis=0))
            members[idx], tags[idx], corrections[idx] = w, TAG_AVG_ALL, corr
            continue
        if slot == 3 and g not in (1, 2):
            if n_sel >= 2:
                partner = picks[1 + int(rng.integers(n_sel - 1))]
                w, corr = finalize_member(rig, cfg, 0.5 * (elite_w + partner))
                members[idx], tags[idx], corrections[idx] = w, TAG_AVG_PAIR, corr
            else:
                members[idx] = pop.members[idx]
                tags[idx] = TAG_CARRY
                corrections[idx] = pop.corrections[idx]
            continue
        if slot < 7:
            child, tag = next_child()
            w, corr = finalize_member(rig, cfg, child)
            members[idx], tags[idx], corrections[idx] = w, tag, corr
            continue
        w, corr = finalize_member(rig, cfg, random_member(rig, genes, cfg.random_active, rng))
        members[idx], tags[idx], corrections[idx] = w, TAG_RANDOM, corr

    return Population(g + 1, members, tags, corrections)


# -- running studies -------------------------------------------------------------

def run_simulation(rig: BlendshapeRig, sim: SimConfig,
                   pca: PcaModel | None = None, vcov: VertexCovariance | None = None,
                   fixed_members: np.ndarray | None = None) -> DistributionStats:
    """Repeat auto-selected sessions and collect elite-to-target CD errors.

    The selection metric is ``sim.metric``; the recorded error is always
    the cosine distance of the generation's elite to the target. Failed
    repetitions (aborted sessions) are recorded, not raised.
    """
    sim.validate(rig)
    schedule = sim.schedule_list()
    target = np.asarray(sim.target, dtype=float)
    metric_ctx = MetricContext(rig, sim.metric, pca=pca, vcov=vcov)
    error_ctx = metric_ctx if metric_ctx.kind == "CD" else MetricContext(rig, "CD")
    advance = advance_generation_pressure if sim.pressure_mode == "ranked" else None
    cfg = sim.ga_config()

    def selector(pop, gen, _rig):
        return auto_select(pop, target, metric_ctx, schedule[gen])

    rows, init_elites, final_elites, failed = [], [], [], []
    for rep in range(sim.repetitions):
        rng = np.random.default_rng([sim.seed, rep])
        session_log = run_session(rig, cfg, selector, rng=rng,
                                  fixed_members=fixed_members, advance_fn=advance)
        if session_log.abort is not None:
            failed.append((rep, session_log.abort))
            continue
        errs = []
        for pop, sel in zip(session_log.populations, session_log.selections):
            try:
                errs.append(error_ctx.distance(target, pop.members[sel.elite]))
            except MetricUndefinedError:
                errs.append(np.nan)
        rows.append(errs)
        init_elites.append(session_log.populations[0].members[session_log.selections[0].elite])
        final_elites.append(session_log.final_elite)

    n_shapes = rig.n_shapes
    errors = np.asarray(rows, dtype=float) if rows else np.zeros((0, sim.generations + 1))
    stats = DistributionStats(
        target_name=sim.target_name,
        metric=metric_ctx.kind,
        seed=sim.seed,
        schedule=schedule,
        errors=errors,
        init_elites=np.asarray(init_elites) if init_elites else np.zeros((0, n_shapes)),
        final_elites=np.asarray(final_elites) if final_elites else np.zeros((0, n_shapes)),
        failed=failed,
    )
    if stats.repetitions_ok:
        stats.kl = kl_series(stats)
    if failed:
        log.warning("%d/%d repetitions failed", len(failed), sim.repetitions)
    return stats


def pressure_variant(rig: BlendshapeRig, sim: SimConfig, **kwargs) -> DistributionStats:
    """Run the ranked selection-pressure study; requires pressure_mode='ranked'."""
    if sim.pressure_mode != "ranked":
        raise ValueError("pressure_variant requires pressure_mode='ranked'")
    return run_simulation(rig, sim, **kwargs)


# -- KL divergence ----------------------------------------------------------------

def histogram_distribution(values, bins: int = KL_BINS, value_range=KL_RANGE,
                           smoothing: float = KL_SMOOTHING) -> np.ndarray:
    """Additively smoothed, normalized histogram over a fixed range."""
    values = np.clip(np.asarray(values, dtype=float), value_range[0], value_range[1])
    if values.size == 0:
        raise ValueError("cannot histogram an empty distribution")
    counts, _ = np.histogram(values, bins=bins, range=value_range)
    p = counts.astype(float) + smoothing
    return p / p.sum()


def kl_divergence(p, q) -> float:
    """Discrete KL divergence sum(p * ln(p/q)) over the support of p."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must share a shape")
    mask = p > 0.0
    if np.any(q[mask] <= 0.0):
        raise ValueError("q must be positive wherever p is")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_series(stats) -> list:
    """KL(P_{g+1} || P_g) between consecutive per-generation error histograms."""
    errors = stats.errors if isinstance(stats, DistributionStats) else np.asarray(stats, dtype=float)
    if errors.ndim != 2 or errors.shape[1] < 2:
        raise ValueError("need per-generation errors for at least two generations")
    if errors.shape[0] == 0:
        raise ValueError("empty error distributions")
    hists = [histogram_distribution(errors[:, g]) for g in range(errors.shape[1])]
    return [kl_divergence(hists[g + 1], hists[g]) for g in range(len(hists) - 1)]


# -- Gaussian mixture --------------------------------------------------------------

class GmmDegenerateError(RuntimeError):
    """Every EM restart collapsed a component."""


@dataclass
class GmmModel:
    weights: np.ndarray          # (k,)
    means: np.ndarray            # (k, d)
    covariances: np.ndarray      # (k, d, d)
    loglik: float
    loglik_history: list
    correspondence: dict = field(default_factory=dict)   # cluster index -> name

    @property
    def k(self) -> int:
        return int(self.weights.shape[0])


def _component_logpdf(X: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    L = np.linalg.cholesky(cov)     # raises LinAlgError on degenerate covariance
    diff = X - mean
    y = np.linalg.solve(L, diff.T)
    maha = np.sum(y * y, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (d * math.log(2.0 * math.pi) + logdet + maha)


def _log_prob_matrix(gmm_weights, gmm_means, gmm_covs, X) -> np.ndarray:
    k = len(gmm_weights)
    lp = np.empty((X.shape[0], k))
    for j in range(k):
        lp[:, j] = math.log(gmm_weights[j]) + _component_logpdf(X, gmm_means[j], gmm_covs[j])
    return lp


def _kmeans_seed(X: np.ndarray, k: int, rng, seedings: int = 10, iters: int = 20):
    """k-means++ seeding plus Lloyd refinement; best of several seedings."""
    n = X.shape[0]
    best = None
    for _ in range(seedings):
        means = [X[int(rng.integers(n))]]
        for _ in range(k - 1):
            d2 = np.min([np.sum((X - m) ** 2, axis=1) for m in means], axis=0)
            total = d2.sum()
            if total <= 0.0:
                means.append(X[int(rng.integers(n))])
                continue
            means.append(X[int(rng.choice(n, p=d2 / total))])
        means = np.array(means)
        for _ in range(iters):
            labels = np.argmin(((X[:, None, :] - means[None]) ** 2).sum(-1), axis=1)
            for j in range(k):
                if np.any(labels == j):
                    means[j] = X[labels == j].mean(axis=0)
        inertia = float(np.sum((X - means[labels]) ** 2))
        if best is None or inertia < best[0]:
            best = (inertia, means, labels)
    return best[1], best[2]


def _em_once(X: np.ndarray, k: int, rng, max_iter: int, tol: float, reg: float):
    n, d = X.shape
    means, labels = _kmeans_seed(X, k, rng)
    covs = np.empty((k, d, d))
    weights = np.empty(k)
    for j in range(k):
        sel = X[labels == j]
        weights[j] = max(len(sel), 1) / n
        diff = sel - means[j] if len(sel) else X - means[j]
        covs[j] = diff.T @ diff / max(len(sel), 1) + reg * np.eye(d)
    weights = weights / weights.sum()

    history = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        lp = _log_prob_matrix(weights, means, covs, X)
        lse = logsumexp(lp, axis=1)
        ll = float(lse.sum())
        history.append(ll)
        resp = np.exp(lp - lse[:, None])

        nk = resp.sum(axis=0)
        if np.any(nk < 1e-8):
            raise np.linalg.LinAlgError("component collapsed")
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        for j in range(k):
            diff = X - means[j]
            covs[j] = (resp[:, j][:, None] * diff).T @ diff / nk[j] + reg * np.eye(d)

        if ll - prev_ll <= tol * max(1.0, abs(ll)) and len(history) > 1:
            break
        prev_ll = ll
    return weights, means, covs, history


def fit_gmm(samples, k: int = 3, rng=None, restarts: int = 5,
            max_iter: int = 200, tol: float = 1e-7, shrinkage: float = 1e-6) -> GmmModel:
    """Full-covariance GMM via EM, best of several k-means++-seeded restarts.

    ``shrinkage`` is a relative diagonal loading (fraction of the average
    per-dimension variance) applied to every component covariance; small
    sample sets in high dimensions need a heavier value (~0.05) to keep
    the likelihood from favoring degenerate splits. A restart whose
    component covariance loses positive definiteness (or whose
    responsibility mass vanishes) is discarded; if every restart
    degenerates, the fit fails.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2:
        raise ValueError("samples must be a (n, d) matrix")
    if X.shape[0] < 10 * k:
        raise ValueError(f"need at least {10 * k} samples for k={k}, got {X.shape[0]}")
    rng = rng if rng is not None else np.random.default_rng(0)
    d = X.shape[1]
    total_var = float(np.trace(np.atleast_2d(np.cov(X, rowvar=False, ddof=1))))
    reg = max(shrinkage * total_var / d, 1e-12)

    best = None
    for _ in range(restarts):
        try:
            weights, means, covs, history = _em_once(X, k, rng, max_iter, tol, reg)
        except np.linalg.LinAlgError:
            continue
        if best is None or history[-1] > best[3][-1]:
            best = (weights, means, covs, history)
    if best is None:
        raise GmmDegenerateError("every EM restart produced a degenerate component")
    weights, means, covs, history = best
    return GmmModel(weights=weights, means=means, covariances=covs,
                    loglik=history[-1], loglik_history=history)


def gmm_predict(gmm: GmmModel, X) -> np.ndarray:
    """Hard cluster labels under the mixture."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lp = _log_prob_matrix(gmm.weights, gmm.means, gmm.covariances, X)
    return np.argmax(lp, axis=1)


def assign_clusters(gmm: GmmModel, named_points: dict) -> dict:
    """Map cluster labels to names by where each name's point lands.

    First name to claim a cluster keeps it; clusters nobody claims stay
    unnamed. The mapping is stored on the model and returned.
    """
    mapping: dict = {}
    for name, point in named_points.items():
        label = int(gmm_predict(gmm, np.asarray(point, dtype=float)[None, :])[0])
        if label not in mapping:
            mapping[label] = name
    gmm.correspondence = mapping
    return mapping


@dataclass
class SeparabilityResult:
    counts: np.ndarray        # (n_sets, k) counts, columns reordered name-first
    row_labels: list
    col_labels: list
    diagonal_fraction: float
    gmm: GmmModel


def separability_table(distributions: dict, gmm: GmmModel) -> SeparabilityResult:
    """Cross-tabulate true target sets against predicted GMM clusters.

    ``distributions`` maps target name to its (n_i, d) projected samples.
    Columns are ordered so a correctly separated fit is diagonal; clusters
    no target claims are labeled "unnamed".
    """
    names = list(distributions.keys())
    if not gmm.correspondence:
        assign_clusters(gmm, {n: np.mean(np.asarray(s, dtype=float), axis=0)
                              for n, s in distributions.items()})
    raw = np.zeros((len(names), gmm.k), dtype=int)
    for i, name in enumerate(names):
        labels = gmm_predict(gmm, distributions[name])
        for lab in labels:
            raw[i, int(lab)] += 1

    name_to_cluster = {v: k for k, v in gmm.correspondence.items()}
    col_order, col_labels = [], []
    for name in names:
        if name in name_to_cluster:
            col_order.append(name_to_cluster[name])
            col_labels.append(name)
    for j in range(gmm.k):
        if j not in col_order:
            col_order.append(j)
            col_labels.append("unnamed")
    counts = raw[:, col_order]

    total = counts.sum()
    diag = sum(counts[i, i] for i in range(min(len(names), counts.shape[1]))
               if i < len(col_labels) and col_labels[i] == names[i])
    frac = float(diag) / float(total) if total else 0.0
    return SeparabilityResult(counts=counts, row_labels=names, col_labels=col_labels,
                              diagonal_fraction=frac, gmm=gmm)


# -- bias, repeatability, activation ------------------------------------------------

def target_bias(init_pop: Population, target, rig: BlendshapeRig) -> float:
    """CD between the target and the best member of an initial population."""
    ctx = MetricContext(rig, "CD")
    best = np.inf
    for w in init_pop.members:
        try:
            best = min(best, ctx.distance(target, w))
        except MetricUndefinedError:
            continue
    if not np.isfinite(best):
        raise MetricUndefinedError("CD undefined on every initial member")
    return float(best)


def mean_target_bias(rig: BlendshapeRig, cfg: GAConfig, target, repetitions: int,
                     seed: int = 0, fixed_members: np.ndarray | None = None) -> float:
    """Average initial-elite CD over protocol-drawn initializations."""
    from .evolution import fixed_init, protocol_init

    vals = []
    for rep in range(repetitions):
        rng = np.random.default_rng([seed, rep])
        if cfg.init_mode == "fixed":
            pop = fixed_init(rig, cfg, fixed_members)
        else:
            pop = protocol_init(rig, cfg, rng)
        vals.append(target_bias(pop, target, rig))
    return float(np.mean(vals))


def repeatability_bins(final_elites, rig: BlendshapeRig | None = None) -> np.ndarray:
    """Percentage of pairwise elite CDs in [0,.25), [.25,.5), [.5,.75), [.75,1]."""
    arr = np.asarray(final_elites, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ValueError("need at least two final elites")
    if rig is not None:
        arr = np.stack([rig.reduce_weights(w) for w in arr])
    dists = []
    for i in range(arr.shape[0]):
        for j in range(i + 1, arr.shape[0]):
            dists.append(metrics.cd(arr[i], arr[j]))
    dists = np.clip(np.asarray(dists), 0.0, 1.0)
    edges = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    counts, _ = np.histogram(dists, bins=edges)
    return 100.0 * counts / counts.sum()


ACTIVATION_RANGES = ((1, 3), (3, 8), (8, 16))


def activation_study(rig: BlendshapeRig, targets: dict, ranges=ACTIVATION_RANGES,
                     repetitions: int = 50, generations: int = 10, seed: int = 0) -> list:
    """Initial bias and final accuracy per activation range and target.

    Returns a row dict per (target, range) with mu0/sigma0/muG/sigmaG.
    Ranges wider than the eligible gene count are rejected.
    """
    n_genes = len(eligible_genes(rig, GAConfig()))
    rows = []
    for lo, hi in ranges:
        if lo > n_genes:
            raise ValueError(f"activation range ({lo}, {hi}) exceeds {n_genes} usable shapes")
        for name, target in targets.items():
            sim = SimConfig(target=np.asarray(target, dtype=float), target_name=name,
                            repetitions=repetitions, generations=generations,
                            init_activation_range=(lo, hi), seed=seed)
            stats = run_simulation(rig, sim)
            rows.append({
                "target": name,
                "range": (lo, hi),
                "mu0": float(stats.mu[0]),
                "sigma0": float(stats.sigma[0]),
                "muG": stats.final_mu,
                "sigmaG": stats.final_sigma,
            })
    return rows


# -- heatmaps and desk targets -------------------------------------------------------

def heatmap_field(mesh_a, mesh_b) -> np.ndarray:
    """Per-vertex Euclidean distance between two same-topology meshes."""
    fa = getattr(mesh_a, "faces", None)
    fb = getattr(mesh_b, "faces", None)
    if fa is not None and fb is not None and not np.array_equal(fa, fb):
        raise ValueError("meshes differ in topology")
    va = np.asarray(getattr(mesh_a, "vertices", mesh_a), dtype=float)
    vb = np.asarray(getattr(mesh_b, "vertices", mesh_b), dtype=float)
    if va.shape != vb.shape:
        raise ValueError("meshes differ in topology")
    return np.linalg.norm(va - vb, axis=1)


_T1_RECIPE = {"jaw_open": 0.9}
_T3_RECIPE = {"jaw_open": 0.9, "frown_L": 0.5, "nose_wrinkle": 0.65}
_T12_RECIPE = {
    "jaw_open": 0.55, "smile_L": 0.6, "frown_L": 0.35, "brow_raise_L": 0.5,
    "lip_press": 0.4, "nose_wrinkle": 0.45, "lower_lip_raise": 0.3,
    "brow_lower_L": 0.4, "cheek_puff": 0.5, "lip_pucker": 0.35,
    "chin_raise": 0.45, "squint_L": 0.4,
}
# t6a/t6b share five genes and differ in one 0.5-weight discriminator each,
# so their outcome clouds overlap by construction.
_T6_BASE = {
    "jaw_open": 0.55, "smile_L": 0.6, "lip_press": 0.4,
    "cheek_puff": 0.5, "chin_raise": 0.45,
}
_T6A_RECIPE = {**_T6_BASE, "brow_raise_L": 0.5}
_T6B_RECIPE = {**_T6_BASE, "nose_wrinkle": 0.5}


def make_desk_targets(rig: BlendshapeRig, cfg: GAConfig | None = None) -> dict:
    """Reference targets with 1, 3, 6 and 12 active shapes plus a dense one.

    t1 and t3 share the dominant jaw shape, and t6a/t6b differ in a single
    discriminator gene, so those pairs' outcome distributions overlap on
    purpose. All targets are finalized (symmetry, combinational weights,
    collision correction) so they are reachable faces.
    """
    cfg = cfg or GAConfig()
    genes = set(eligible_genes(rig, cfg).tolist())

    def build(recipe: dict) -> np.ndarray:
        w = np.zeros(rig.n_shapes)
        for name, value in recipe.items():
            idx = rig.shape_index(name)
            if idx not in genes:
                raise ValueError(f"target shape {name!r} is not an eligible gene")
            w[idx] = value
        final, _ = finalize_member(rig, cfg, w)
        return final

    dense_recipe = {}
    dense_weights = (0.55, 0.4, 0.35, 0.5, 0.3, 0.45)
    for i, gene in enumerate(sorted(genes)):
        dense_recipe[rig.shapes[gene].name] = dense_weights[i % len(dense_weights)]

    return {
        "t1": build(_T1_RECIPE),
        "t3": build(_T3_RECIPE),
        "t6a": build(_T6A_RECIPE),
        "t6b": build(_T6B_RECIPE),
        "t12": build(_T12_RECIPE),
        "dense": build(dense_recipe),
    }
