"""Lip/teeth collision detection and corrective solving.

Two collision mechanisms are handled, each with four zone correctives:

* ``lip``: the upper lip against the lower lip, corrected by vertical
  separation of both lips.
* ``teeth``: the static upper teeth against the lower lip, corrected by
  outward motion of the lower lip.

Detection casts sampling lines from barycentric anchor points through the
lower-lip face set. An anchor is *within* the lower lip when it has an odd
crossing count both along the positive direction (the direction the lower
lip moves under the corrective) and along the negative direction; either
mechanism axis may establish this. An anchor has passed *through* when the
negative ray meets exactly two oppositely oriented lower-lip faces. A
collision of a given type is declared only when at least one of its
anchors is within.

Each detected anchor yields one linear constraint delta_a . w ~= delta_b,
where delta_b is the interpenetration depth along the escape direction and
delta_a holds per-unit-weight separation rates of the eight correctives.
Weights solve a box-constrained ridge problem (see solve_correctives).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from ._kernels import line_hits
from .rig import LIP, TEETH, BlendshapeRig, Mesh, barycentric_points, sample_shape_offset

W1_DEFAULT = 0.98
MAX_PASSES = 3

# anchor region feeding each mechanism
_ANCHOR_REGION = {LIP: "upr_lip", TEETH: "teeth"}


@dataclass
class AnchorSet:
    """Evaluated anchor positions for one labelled region."""

    region: str
    anchors: np.ndarray    # (a, 3) rows (face, c1, c2)
    points: np.ndarray     # (a, 3) positions on the supplied mesh


@dataclass
class TypeDetection:
    ctype: str
    within: list = field(default_factory=list)    # anchor row indices
    through: list = field(default_factory=list)
    pair_t: dict = field(default_factory=dict)    # row -> depth along escape dir
    pair_face: dict = field(default_factory=dict)  # row -> global face index

    @property
    def declared(self) -> bool:
        return len(self.within) > 0


@dataclass
class DetectionReport:
    lip: TypeDetection
    teeth: TypeDetection

    @property
    def any_declared(self) -> bool:
        return self.lip.declared or self.teeth.declared

    def get(self, ctype: str) -> TypeDetection:
        return self.lip if ctype == LIP else self.teeth


@dataclass
class CollisionConstraint:
    ctype: str
    anchor_row: int
    pair_face: int
    delta_b: float
    delta_a: np.ndarray  # (8,) canonical corrective order


@dataclass
class CorrectionResult:
    w_clsn: np.ndarray          # (8,) final collision weights
    resolved: bool
    iterations: int
    constraints_before: int
    constraints_after: int
    residual: float


def sample_anchors(mesh: Mesh, rig: BlendshapeRig, region: str) -> AnchorSet:
    """Anchor positions of a named region on a (deformed) mesh."""
    reg = rig.collision_config.regions[region]
    return AnchorSet(region, reg.anchors, barycentric_points(mesh, reg.anchors))


_T_EPS = 1e-12


def _axis_counts(points, axis, tri):
    """Per-anchor crossing bookkeeping along one signed axis.

    Returns (pos_count, neg_count, neg_hits) where neg_hits[i] is the list
    of (distance, tri_index, orient) for anchor i along the escape ray.
    """
    ai, ti, t, orient = line_hits(points, axis, tri[:, 0], tri[:, 1], tri[:, 2])
    n = len(points)
    pos = np.zeros(n, dtype=int)
    neg = np.zeros(n, dtype=int)
    neg_hits = [[] for _ in range(n)]
    for a, f, tv, o in zip(ai, ti, t, orient):
        if tv > _T_EPS:
            pos[a] += 1
        elif tv < -_T_EPS:
            neg[a] += 1
            neg_hits[a].append((-tv, int(f), int(o)))
    return pos, neg, neg_hits


def detect_collisions(mesh: Mesh, rig: BlendshapeRig) -> DetectionReport:
    cfg = rig.collision_config
    tol = cfg.depth_tolerance
    lwr_faces = cfg.regions["lwr_lip"].faces
    tri = mesh.vertices[mesh.faces[lwr_faces]]
    axes = {LIP: np.asarray(cfg.lip_axis, float), TEETH: np.asarray(cfg.teeth_axis, float)}

    report = {}
    for ctype in (LIP, TEETH):
        det = TypeDetection(ctype)
        anchors = sample_anchors(mesh, rig, _ANCHOR_REGION[ctype])
        own = axes[ctype]
        other = axes[TEETH if ctype == LIP else LIP]
        pos, neg, neg_hits = _axis_counts(anchors.points, own, tri)
        pos2, neg2, _ = _axis_counts(anchors.points, other, tri)
        for i in range(len(anchors.points)):
            within = (pos[i] % 2 == 1 and neg[i] % 2 == 1) or (pos2[i] % 2 == 1 and neg2[i] % 2 == 1)
            hits = sorted(neg_hits[i])
            if within:
                # escape depths at or below tolerance are resting contact
                if hits and hits[0][0] > tol:
                    det.within.append(i)
                    det.pair_t[i] = hits[0][0]
                    det.pair_face[i] = int(lwr_faces[hits[0][1]])
                continue
            if pos[i] == 0 and neg[i] == 2 and hits[0][2] != hits[1][2] and hits[1][0] > tol:
                det.through.append(i)
                det.pair_t[i] = hits[1][0]
                det.pair_face[i] = int(lwr_faces[hits[1][1]])
        report[ctype] = det
    return DetectionReport(lip=report[LIP], teeth=report[TEETH])


def quantify_depth(mesh: Mesh, detections: DetectionReport, rig: BlendshapeRig) -> list:
    """Build one constraint per detected anchor of each declared type.

    Cross-type coefficient columns stay enabled only when the other type is
    also declared; otherwise they are exactly zero.
    """
    cfg = rig.collision_config
    order = rig.collision_indices
    slot_type = [rig.shapes[k].collision[0] for k in order]
    constraints = []
    for ctype in (LIP, TEETH):
        det = detections.get(ctype)
        if not det.declared:
            continue
        other_declared = detections.get(TEETH if ctype == LIP else LIP).declared
        axis = cfg.lip_axis if ctype == LIP else cfg.teeth_axis
        escape = -np.asarray(axis, float)
        region = cfg.regions[_ANCHOR_REGION[ctype]]
        for row in det.within + det.through:
            if row not in det.pair_t:
                continue
            face_a, c1, c2 = region.anchors[row]
            pair_face = det.pair_face[row]
            da = np.zeros(8)
            for slot, k in enumerate(order):
                if slot_type[slot] != ctype and not other_declared:
                    continue
                off_anchor = sample_shape_offset(rig, int(k), int(face_a), c1, c2)
                off_pair = sample_shape_offset(rig, int(k), pair_face, 1.0 / 3.0, 1.0 / 3.0)
                da[slot] = float((off_anchor - off_pair) @ escape)
            constraints.append(
                CollisionConstraint(ctype, int(row), int(pair_face), float(det.pair_t[row]), da)
            )
    return constraints


@dataclass
class SolveResult:
    w: np.ndarray
    cost: float
    passes: int


def _solve_block(A_act, b_eff, w1, lam):
    """Box-constrained ridge over one corrective block via stacked BVLS."""
    k = A_act.shape[1]
    lam = max(lam, 1e-12)  # keeps the system full rank; min-norm limit at w1=1
    stacked = np.vstack([np.sqrt(w1) * A_act, np.sqrt(lam) * np.eye(k)])
    target = np.concatenate([np.sqrt(w1) * b_eff, np.zeros(k)])
    res = lsq_linear(stacked, target, bounds=(0.0, 1.0), method="bvls")
    return np.clip(res.x, 0.0, 1.0)


def solve_correctives(constraints: list, w1: float = W1_DEFAULT) -> SolveResult:
    """Least-squares corrective weights for a constraint system.

    Minimises w1 * ||A w - b||^2 + (1 - w1) * M * ||w||^2 over w in [0,1]^8.
    When both collision types contribute constraints, each type's block is
    solved with the other type's contribution held constant, alternating
    (lip pass then teeth pass) until the weights reach a fixed point.
    """
    if not constraints:
        raise ValueError("solve_correctives called with an empty constraint system")
    if not 0.0 < w1 <= 1.0:
        raise ValueError(f"w1 must be in (0, 1], got {w1}")
    M = len(constraints)
    A = np.stack([c.delta_a for c in constraints])
    b = np.array([c.delta_b for c in constraints])
    lam = (1.0 - w1) * M

    types = [c.ctype for c in constraints]
    present = sorted(set(types), key=lambda t: 0 if t == LIP else 1)
    lip_slots = np.arange(0, 4)
    teeth_slots = np.arange(4, 8)
    slot_of = {LIP: lip_slots, TEETH: teeth_slots}
    rows_of = {t: np.array([i for i, ct in enumerate(types) if ct == t]) for t in present}

    w = np.zeros(8)
    passes = 0
    if len(present) == 1:
        t = present[0]
        act = slot_of[t]
        w[act] = _solve_block(A[np.ix_(rows_of[t], act)], b[rows_of[t]], w1, lam)
        passes = 1
    else:
        for _ in range(50):
            prev = w.copy()
            for t in present:  # lip first, then teeth
                act = slot_of[t]
                rest = teeth_slots if t == LIP else lip_slots
                rows = rows_of[t]
                b_eff = b[rows] - A[np.ix_(rows, rest)] @ w[rest]
                w[act] = _solve_block(A[np.ix_(rows, act)], b_eff, w1, lam)
                passes += 1
            if passes >= 2 and np.max(np.abs(w - prev)) < 1e-12:
                break
    cost = w1 * float(np.sum((A @ w - b) ** 2)) + lam * float(w @ w)
    return SolveResult(w=w, cost=cost, passes=passes)


def correct_face(rig: BlendshapeRig, weights: np.ndarray, w1: float = W1_DEFAULT,
                 max_iters: int = MAX_PASSES):
    """Repair collisions of a face by solving corrective weights.

    Starts from zeroed collision entries, then iterates detect -> quantify
    -> solve, accumulating clamped increments, until no anchor is within
    the lower lip or the pass budget is spent. Returns the adjusted weight
    vector and a CorrectionResult diagnostic.
    """
    w = rig._check_weights(weights).copy()
    clsn = rig.collision_indices
    w[clsn] = 0.0

    constraints_before = 0
    residual = 0.0
    iterations = 0
    for it in range(max_iters):
        mesh = rig.evaluate(w)
        detections = detect_collisions(mesh, rig)
        if not detections.any_declared:
            break
        constraints = quantify_depth(mesh, detections, rig)
        if not constraints:
            break
        if it == 0:
            constraints_before = len(constraints)
        res = solve_correctives(constraints, w1=w1)
        w[clsn] = np.clip(w[clsn] + res.w, 0.0, 1.0)
        residual = res.cost
        iterations += 1

    mesh = rig.evaluate(w)
    final = detect_collisions(mesh, rig)
    constraints_after = len(quantify_depth(mesh, final, rig)) if final.any_declared else 0
    resolved = not final.any_declared
    return w, CorrectionResult(
        w_clsn=w[clsn].copy(),
        resolved=resolved,
        iterations=iterations,
        constraints_before=constraints_before,
        constraints_after=constraints_after,
        residual=residual,
    )
