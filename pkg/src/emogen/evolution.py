"""Genetic evolution of face weight vectors.

Populations hold 10 members. Each advance fills the next generation
slot by slot from the current selection set (elite plus other picks):

1. the elite, carried verbatim,
2. the average of all selections (needs at least three picks),
3. the average of the elite and one random other pick; at generations
   1 and 2 this slot breeds a child instead, and with a lone selection
   the previous slot-3 member is carried,
4-6. children: uniform crossover of two distinct picks, then mutation,
7-10. fresh random members (diversity floor of 40%).

Slots 2 and 3 fall through to the child recipe when their conditions are
not met. Every bred or random member is symmetry-enforced, combinational
weights recomputed, and collision-corrected; carried members are copied
bit-exactly. Genes are the rig's unique cores minus any shapes disabled
by config (eyes, pupils).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision import CorrectionResult, correct_face
from .rig import BlendshapeRig

POP_SIZE = 10
EMOTION_ORDER = ("happy", "sad", "angry", "fearful")

TAG_INIT = "init"
TAG_ELITE = "elite-carry"
TAG_AVG_ALL = "avg-all"
TAG_AVG_PAIR = "avg-elite-pair"
TAG_CARRY = "carry"
TAG_CHILD = "child"
TAG_RANDOM = "random"


class SelectionError(ValueError):
    """Invalid selection payload (bounds, duplicate or out-of-range picks)."""


class SessionStateError(RuntimeError):
    """Operation does not match the session's current state."""


@dataclass
class GAConfig:
    generations: int = 10
    mutation_genes: int = 2
    random_active: int = 6
    init_activation_range: tuple = (3, 8)
    init_mode: str = "protocol"          # "protocol" | "fixed"
    disable_eyes: bool = False
    disable_pupils: bool = False
    w1: float = 0.98
    correct_collisions: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.mutation_genes < 1:
            raise ValueError("mutation_genes must be >= 1")
        if self.random_active < 1:
            raise ValueError("random_active must be >= 1")
        lo, hi = self.init_activation_range
        if not (1 <= lo <= hi):
            raise ValueError(f"bad init_activation_range {self.init_activation_range}")
        if self.init_mode not in ("protocol", "fixed"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if not 0.0 < self.w1 <= 1.0:
            raise ValueError("w1 must be in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "generations": self.generations,
            "mutation_genes": self.mutation_genes,
            "random_active": self.random_active,
            "init_activation_range": list(self.init_activation_range),
            "init_mode": self.init_mode,
            "disable_eyes": self.disable_eyes,
            "disable_pupils": self.disable_pupils,
            "w1": self.w1,
            "correct_collisions": self.correct_collisions,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GAConfig":
        cfg = cls(
            generations=int(d.get("generations", 10)),
            mutation_genes=int(d.get("mutation_genes", 2)),
            random_active=int(d.get("random_active", 6)),
            init_activation_range=tuple(d.get("init_activation_range", (3, 8))),
            init_mode=d.get("init_mode", "protocol"),
            disable_eyes=bool(d.get("disable_eyes", False)),
            disable_pupils=bool(d.get("disable_pupils", False)),
            w1=float(d.get("w1", 0.98)),
            correct_collisions=bool(d.get("correct_collisions", True)),
            seed=int(d.get("seed", 0)),
        )
        cfg.validate()
        return cfg


@dataclass
class Selection:
    elite: int
    others: list = field(default_factory=list)
    scores: list | None = None   # optional metric scores (logged when present)

    def validate(self, pop_size: int = POP_SIZE) -> None:
        picks = [self.elite] + list(self.others)
        if not 1 <= len(picks) <= pop_size:
            raise SelectionError(f"selection must pick between 1 and {pop_size} members")
        for i in picks:
            if not 0 <= int(i) < pop_size:
                raise SelectionError(f"selection index {i} out of range")
        if self.elite in self.others:
            raise SelectionError("elite must not appear among the other picks")
        if len(set(self.others)) != len(self.others):
            raise SelectionError("duplicate indices in selection")


@dataclass
class Population:
    generation: int
    members: np.ndarray                     # (10, n_shapes)
    tags: list
    corrections: list                       # CorrectionResult | None per member


@dataclass
class SessionLog:
    rig_id: str
    rig_gen_params: dict | None
    config: GAConfig
    populations: list = field(default_factory=list)   # Population per generation
    selections: list = field(default_factory=list)    # Selection | None per generation
    final_elite: np.ndarray | None = None
    abort: str | None = None


def eligible_genes(rig: BlendshapeRig, cfg: GAConfig) -> np.ndarray:
    """Unique-core gene indices after config-level disabling."""
    drop_tags = set()
    if cfg.disable_eyes:
        drop_tags.add("eye")
    if cfg.disable_pupils:
        drop_tags.add("pupil")
    keep = [i for i in rig.unique_core_indices if not (rig.shapes[i].tags & drop_tags)]
    if not keep:
        raise ValueError("no eligible genes remain after config disabling")
    return np.array(keep, dtype=int)


def crossover(a: np.ndarray, b: np.ndarray, genes: np.ndarray, rng) -> np.ndarray:
    """Uniform crossover: per gene take b's value on a coin flip, else a's."""
    child = a.copy()
    take_b = rng.random(len(genes)) < 0.5
    child[genes[take_b]] = b[genes[take_b]]
    return child


def mutate(w: np.ndarray, genes: np.ndarray, m: int, rng) -> np.ndarray:
    """Replace exactly m distinct genes with fresh U[0,1) draws.

    Indices come from repeated discrete-uniform draws, rejecting repeats.
    """
    if m > len(genes):
        raise ValueError(f"cannot mutate {m} of {len(genes)} genes")
    out = w.copy()
    chosen = []
    while len(chosen) < m:
        i = int(rng.integers(len(genes)))
        if i not in chosen:
            chosen.append(i)
    for i in chosen:
        out[genes[i]] = rng.random()
    return out


def random_member(rig: BlendshapeRig, genes: np.ndarray, count: int, rng) -> np.ndarray:
    """A fresh member with ``count`` active genes at U[0,1) weights."""
    count = min(count, len(genes))
    w = np.zeros(rig.n_shapes)
    active = rng.choice(genes, size=count, replace=False)
    w[active] = rng.random(count)
    return w


def finalize_member(rig: BlendshapeRig, cfg: GAConfig, w: np.ndarray):
    """Symmetry, combinational weights, then collision correction."""
    w = rig.apply_combinational(rig.enforce_symmetry(w))
    if cfg.correct_collisions:
        return correct_face(rig, w, w1=cfg.w1)
    return w, None


def _all_identical(vectors) -> bool:
    first = vectors[0]
    return all(np.array_equal(first, v) for v in vectors[1:])


def _breed_child(rig, cfg, genes, picks, rng):
    if _all_identical(picks):
        child = mutate(picks[0], genes, cfg.mutation_genes, rng)
    else:
        while True:
            a = picks[int(rng.integers(len(picks)))]
            b = picks[int(rng.integers(len(picks)))]
            if not np.array_equal(a, b):
                break
        child = crossover(a, b, genes, rng)
        child = mutate(child, genes, cfg.mutation_genes, rng)
    return child


def advance_generation(rig: BlendshapeRig, cfg: GAConfig, pop: Population,
                       selection: Selection, rng) -> Population:
    selection.validate()
    genes = eligible_genes(rig, cfg)
    elite_w = pop.members[selection.elite]
    picks = [elite_w] + [pop.members[int(i)] for i in selection.others]
    n_sel = len(picks)
    g = pop.generation

    members = np.zeros_like(pop.members)
    tags: list = [None] * POP_SIZE
    corrections: list = [None] * POP_SIZE

    for slot in range(1, POP_SIZE + 1):
        idx = slot - 1
        if slot == 1:
            members[idx] = elite_w           # verbatim, bit-exact
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
                members[idx] = pop.members[idx]   # carry previous slot-3 member
                tags[idx] = TAG_CARRY
                corrections[idx] = pop.corrections[idx]
            continue
        if slot < 7:
            child = _breed_child(rig, cfg, genes, picks, rng)
            w, corr = finalize_member(rig, cfg, child)
            members[idx], tags[idx], corrections[idx] = w, TAG_CHILD, corr
            continue
        w, corr = finalize_member(rig, cfg, random_member(rig, genes, cfg.random_active, rng))
        members[idx], tags[idx], corrections[idx] = w, TAG_RANDOM, corr

    return Population(g + 1, members, tags, corrections)


def protocol_init(rig: BlendshapeRig, cfg: GAConfig, rng) -> Population:
    """Two members per emotion subset, one arbitrary member, one neutral."""
    genes = eligible_genes(rig, cfg)
    gene_set = set(genes.tolist())
    lo, hi = cfg.init_activation_range
    members = np.zeros((POP_SIZE, rig.n_shapes))
    tags = []
    corrections = []

    def add(w):
        w, corr = finalize_member(rig, cfg, w)
        members[len(tags)] = w
        tags.append(TAG_INIT)
        corrections.append(corr)

    for emotion in EMOTION_ORDER:
        subset = np.array([i for i in rig.emotion_subsets[emotion] if i in gene_set], dtype=int)
        if subset.size == 0:
            raise ValueError(f"emotion subset {emotion!r} has no eligible shapes")
        for _ in range(2):
            count = int(rng.integers(lo, hi + 1))
            add(random_member(rig, subset, count, rng))
    count = int(rng.integers(lo, hi + 1))
    add(random_member(rig, genes, count, rng))
    add(np.zeros(rig.n_shapes))  # neutral
    return Population(0, members, tags, corrections)


def fixed_init(rig: BlendshapeRig, cfg: GAConfig, members: np.ndarray) -> Population:
    """Initial population from a user-supplied 10-member set."""
    arr = np.asarray(members, dtype=float)
    if arr.shape != (POP_SIZE, rig.n_shapes):
        raise ValueError(f"fixed init must be ({POP_SIZE}, {rig.n_shapes}), got {arr.shape}")
    genes = set(eligible_genes(rig, cfg).tolist())
    out = np.zeros_like(arr)
    tags = []
    corrections = []
    for i, row in enumerate(arr):
        w = rig.clamp_weights(row)
        disabled_cores = [k for k in rig.unique_core_indices if k not in genes]
        w[disabled_cores] = 0.0
        w, corr = finalize_member(rig, cfg, w)
        out[i] = w
        tags.append(TAG_INIT)
        corrections.append(corr)
    return Population(0, out, tags, corrections)


class EvolutionSession:
    """Stateful session: one initialized population, advanced by selections.

    Selections apply to the current generation; the session finishes after
    the selection at generation ``cfg.generations`` (no further advance).
    """

    def __init__(self, rig: BlendshapeRig, cfg: GAConfig, rng=None,
                 fixed_members: np.ndarray | None = None, advance_fn=None):
        cfg.validate()
        self.rig = rig
        self.cfg = cfg
        self.advance_fn = advance_fn or advance_generation
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        if cfg.init_mode == "fixed":
            if fixed_members is None:
                raise ValueError("init_mode 'fixed' requires fixed_members")
            pop = fixed_init(rig, cfg, fixed_members)
        else:
            pop = protocol_init(rig, cfg, self.rng)
        self.population = pop
        self.log = SessionLog(rig.rig_id, rig.gen_params, cfg, populations=[pop], selections=[])
        self.finished = False

    @property
    def generation(self) -> int:
        return self.population.generation

    def submit(self, selection: Selection):
        """Record a selection for the current generation and advance.

        Returns the new population, or None when the session finished.
        """
        if self.finished:
            raise SessionStateError("session already finished")
        selection.validate()
        self.log.selections.append(selection)
        if self.generation >= self.cfg.generations:
            self.finished = True
            self.log.final_elite = self.population.members[selection.elite].copy()
            return None
        self.population = self.advance_fn(self.rig, self.cfg, self.population, selection, self.rng)
        self.log.populations.append(self.population)
        return self.population

    def mark_aborted(self, reason: str) -> None:
        self.abort = reason
        self.log.abort = reason
        self.finished = True


def run_session(rig: BlendshapeRig, cfg: GAConfig, selector, rng=None,
                fixed_members: np.ndarray | None = None, advance_fn=None) -> SessionLog:
    """Drive a session with a selector callback until it finishes.

    ``selector(population, generation, rig) -> Selection``. A selector
    exception aborts the session, leaving a partial log with the abort
    marker set.
    """
    session = EvolutionSession(rig, cfg, rng=rng, fixed_members=fixed_members,
                               advance_fn=advance_fn)
    while not session.finished:
        try:
            sel = selector(session.population, session.generation, rig)
        except Exception as exc:  # noqa: BLE001 - any selector failure aborts
            session.mark_aborted(f"selector failed at generation {session.generation}: {exc!r}")
            break
        session.submit(sel)
    return session.log


def replay_session(rig: BlendshapeRig, cfg: GAConfig, selections,
                   fixed_members: np.ndarray | None = None) -> SessionLog:
    """Re-run a session from its seed and recorded selections."""
    queue = list(selections)

    def selector(pop, gen, _rig):
        if not queue:
            raise RuntimeError("log ended before the session finished")
        return queue.pop(0)

    return run_session(rig, cfg, selector, fixed_members=fixed_members)
