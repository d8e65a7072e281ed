"""Desk-scale acceptance gates, one test per headline guarantee.

Covers: collision repair over random GA faces, solver optimality against an
exhaustive grid, GA operator statistics, metric identities, convergence
ordering across target complexity, CD-vs-ED outcome separability, KL series
flattening and bit-exact replay. The expensive simulation studies are shared
through module fixtures; everything is seeded and deterministic.
"""

import time

import numpy as np
import pytest

from emogen.collision import CollisionConstraint, detect_collisions, solve_correctives
from emogen.evolution import (
    GAConfig,
    Selection,
    TAG_RANDOM,
    advance_generation,
    crossover,
    eligible_genes,
    finalize_member,
    mutate,
    protocol_init,
    random_member,
    run_session,
)
from emogen.metrics import cd, fit_pca, md_pca, project, std_ed_pca, vrtx_rms
from emogen.session_io import read_log, replay_from_log, write_log
from emogen.simlab import (
    MetricContext,
    SimConfig,
    auto_select,
    fit_gmm,
    make_desk_targets,
    run_simulation,
    separability_table,
)


@pytest.fixture(scope="module")
def targets(rig):
    return make_desk_targets(rig)


@pytest.fixture(scope="module")
def convergence_runs(rig, targets):
    """50-repetition, 10-generation CD studies for the 1/3/12-active targets."""
    t0 = time.monotonic()
    out = {}
    for name in ("t1", "t3", "t12"):
        sim = SimConfig(target=targets[name], target_name=name,
                        repetitions=50, generations=10, seed=101)
        out[name] = run_simulation(rig, sim)
    out["elapsed"] = time.monotonic() - t0
    return out


def test_collision_repair_500_random_faces(rig):
    cfg = GAConfig()
    genes = eligible_genes(rig, cfg)
    rng = np.random.default_rng(2024)
    flagged = unresolved = 0
    t0 = time.monotonic()
    for _ in range(500):
        raw = random_member(rig, genes, 6, rng)
        w, corr = finalize_member(rig, cfg, raw)
        assert corr.iterations <= 3
        if corr.constraints_before == 0:
            continue
        flagged += 1
        # the resolved flag must agree with a fresh detection pass
        clean = not detect_collisions(rig.evaluate(w), rig).any_declared
        assert clean == corr.resolved
        if corr.resolved:
            assert corr.constraints_after == 0
        else:
            unresolved += 1
    elapsed = time.monotonic() - t0
    assert flagged >= 50  # the draw actually exercises the repair path
    assert unresolved / flagged < 0.02
    assert elapsed < 60.0


_GRID = np.linspace(0.0, 1.0, 21)
_BLOCK_POINTS = np.stack(
    np.meshgrid(*([_GRID] * 4), indexing="ij"), axis=-1).reshape(-1, 4)
_BLOCK_SQ = np.sum(_BLOCK_POINTS ** 2, axis=1)


def _grid_min(constraints, w1=0.98):
    """Exhaustive 0.05-grid cost over [0,1]^8.

    Each row touches only its own type's slot block, so the full-grid
    minimum is the sum of the per-block grid minima; the other block's
    optimum sits at exactly zero.
    """
    lam = (1.0 - w1) * len(constraints)
    total = 0.0
    for ctype, block in (("lip", slice(0, 4)), ("teeth", slice(4, 8))):
        rows = [c for c in constraints if c.ctype == ctype]
        if not rows:
            continue
        Ab = np.stack([c.delta_a[block] for c in rows])
        b = np.array([c.delta_b for c in rows])
        resid = _BLOCK_POINTS @ Ab.T - b
        cost = w1 * np.sum(resid ** 2, axis=1) + lam * _BLOCK_SQ
        total += float(cost.min())
    return total


def test_solver_cost_beats_exhaustive_grid():
    rng = np.random.default_rng(55)
    for _ in range(200):
        m = int(rng.integers(1, 7))
        both = m >= 2 and rng.random() < 0.5
        kinds = ("lip", "teeth") if both else (("lip", "teeth")[int(rng.integers(2))],)
        cons = []
        for i in range(m):
            ctype = kinds[i % len(kinds)]
            da = np.zeros(8)
            block = slice(0, 4) if ctype == "lip" else slice(4, 8)
            da[block] = rng.normal(0.0, 0.8, 4)
            cons.append(CollisionConstraint(ctype, i, 0,
                                            float(rng.uniform(-0.2, 1.2)), da))
        res = solve_correctives(cons, w1=0.98)
        assert res.cost <= _grid_min(cons) + 1e-6


def test_ga_operator_statistics(rig, cfg):
    genes = eligible_genes(rig, cfg)
    rng = np.random.default_rng(303)

    # per-gene crossover inheritance is a fair coin over 1e5 trials
    a = np.zeros(rig.n_shapes)
    b = np.zeros(rig.n_shapes)
    b[genes] = 1.0
    trials = 100_000
    took_b = np.zeros(len(genes))
    for _ in range(trials):
        took_b += crossover(a, b, genes, rng)[genes]
    rates = took_b / trials
    assert np.all(np.abs(rates - 0.5) <= 0.01)

    # mutation touches exactly the configured number of gene indices
    w = np.zeros(rig.n_shapes)
    w[genes] = 0.5
    for _ in range(2000):
        assert np.count_nonzero(mutate(w, genes, cfg.mutation_genes, rng)[genes] != 0.5) == 2

    # elite carried bit-exactly; slots 7-10 fresh random members each generation
    pop = protocol_init(rig, cfg, rng)
    sel = Selection(elite=0, others=[1, 2])
    for _ in range(5):
        nxt = advance_generation(rig, cfg, pop, sel, rng)
        assert np.array_equal(nxt.members[0], pop.members[sel.elite])
        for i in range(6, 10):
            assert nxt.tags[i] == TAG_RANDOM
            assert not np.array_equal(nxt.members[i], pop.members[i])
            assert np.count_nonzero(rig.reduce_weights(nxt.members[i])) == cfg.random_active
        pop = nxt


def test_metric_identities(rig, cfg):
    rng = np.random.default_rng(404)
    genes = eligible_genes(rig, cfg)

    # cosine distance ignores per-vector positive scaling
    for _ in range(1000):
        u = rng.random(14) + 0.01
        v = rng.random(14) + 0.01
        s, t = rng.uniform(0.01, 100.0, 2)
        assert abs(cd(s * u, t * v) - cd(u, v)) < 1e-12

    # Mahalanobis in PCA space equals the standardized Euclidean sum
    samples = np.stack([rig.reduce_weights(random_member(rig, genes, 5, rng))
                        for _ in range(300)])
    model = fit_pca(samples)
    for _ in range(1000):
        b1 = project(model, rng.random(samples.shape[1]))
        b2 = project(model, rng.random(samples.shape[1]))
        assert abs(md_pca(b1, b2, model) - std_ed_pca(b1, b2, model)) < 1e-9

    # closed-form RMS case: one vertex displaced by d on a 64-vertex mesh
    va = rng.normal(size=(64, 3))
    vb = va.copy()
    vb[10, 2] += 2.0
    assert vrtx_rms(va, vb) == 2.0 / np.sqrt(64.0)

    # retained variance honors the construction target
    assert model.variances.sum() / model.total_variance >= 0.99 - 1e-9


def test_convergence_improves_with_target_complexity(convergence_runs):
    mu_final = {}
    for name in ("t1", "t3", "t12"):
        stats = convergence_runs[name]
        assert stats.failed == []
        assert stats.final_mu < 0.6 * stats.mu[0], name
        mu_final[name] = stats.final_mu
    assert mu_final["t1"] > mu_final["t3"] > mu_final["t12"]
    assert convergence_runs["elapsed"] < 600.0


def test_cd_separates_similar_targets_better_than_ed(rig, targets):
    names = ("t6a", "t6b", "t12")
    diagonal = {}
    for metric in ("CD", "ED_blend"):
        reduced = {}
        for name in names:
            sim = SimConfig(target=targets[name], target_name=name, metric=metric,
                            repetitions=100, generations=10, seed=101)
            stats = run_simulation(rig, sim)
            assert stats.repetitions_ok == 100
            reduced[name] = np.stack([rig.reduce_weights(w) for w in stats.final_elites])
        union = np.vstack([reduced[n] for n in names])
        pca = fit_pca(union, variance_target=0.999)
        proj = {n: np.stack([project(pca, w) for w in reduced[n]]) for n in names}
        gmm = fit_gmm(np.vstack([proj[n] for n in names]), k=3,
                      rng=np.random.default_rng(0), shrinkage=0.05)
        diagonal[metric] = separability_table(proj, gmm).diagonal_fraction
    assert diagonal["CD"] >= 0.90
    assert diagonal["ED_blend"] < diagonal["CD"]


def test_protocol_kl_series_flattens(convergence_runs):
    kl = convergence_runs["t12"].kl
    assert len(kl) == 10
    assert np.all(np.isfinite(kl))
    assert kl[-1] < kl[0]


def test_reruns_are_bit_exact(rig, targets, tmp_path):
    # a logged session replays bit-exactly from its config and selections
    ctx = MetricContext(rig, "CD")
    target = targets["t3"]
    log = run_session(rig, GAConfig(generations=5, seed=303),
                      lambda pop, gen, _rig: auto_select(pop, target, ctx, 3),
                      rng=np.random.default_rng(303))
    path = tmp_path / "log.json"
    write_log(log, path)
    again = replay_from_log(rig, read_log(path))
    for pa, pb in zip(log.populations, again.populations):
        assert np.array_equal(pa.members, pb.members)
    assert np.array_equal(log.final_elite, again.final_elite)

    # a simulation run twice from the same config is identical everywhere
    sim = SimConfig(target=target, repetitions=3, generations=3, seed=77)
    s1 = run_simulation(rig, sim)
    s2 = run_simulation(rig, sim)
    assert np.array_equal(s1.errors, s2.errors)
    assert np.array_equal(s1.init_elites, s2.init_elites)
    assert np.array_equal(s1.final_elites, s2.final_elites)
    assert s1.kl == s2.kl
