"""Blendshape rig model.

A rig is a neutral triangle mesh plus a list of sparse per-shape vertex
offsets. Shapes come in three kinds:

* ``core``: directly weighted shapes, possibly organised in left/right
  symmetry pairs (the left member is authoritative).
* ``combinational``: corrective shapes whose weight is the product of
  their driver core weights.
* ``collision``: corrective shapes whose weights are produced by the
  collision solver. Each carries a (type, zone) label.

Weight vectors are plain float64 arrays over all shapes in rig order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

CORE = "core"
COMBINATIONAL = "combinational"
COLLISION = "collision"

LIP = "lip"
TEETH = "teeth"
ZONES = ("outer-left", "inner-left", "inner-right", "outer-right")

# tags that keep a core shape out of the unique-core reduction
_EXCLUDED_TAGS = frozenset({"disabled", "lip-seal", "head"})


class RigError(ValueError):
    """Raised for malformed rigs or weight vectors."""


@dataclass
class Mesh:
    vertices: np.ndarray  # (N, 3) float64
    faces: np.ndarray     # (T, 3) int

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])


@dataclass
class Shape:
    name: str
    kind: str
    indices: np.ndarray            # (n,) int vertex ids, sorted
    offsets: np.ndarray            # (n, 3) float64 deltas from neutral
    drivers: tuple = ()            # core shape indices (combinational only)
    collision: tuple | None = None  # (type, zone) for collision shapes
    tags: frozenset = frozenset()

    def offset_at_vertices(self, vertex_ids: np.ndarray) -> np.ndarray:
        """Dense (len(vertex_ids), 3) offsets, zero where the shape is silent."""
        out = np.zeros((len(vertex_ids), 3))
        if self.indices.size == 0:
            return out
        pos = np.searchsorted(self.indices, vertex_ids)
        pos = np.clip(pos, 0, len(self.indices) - 1)
        hit = self.indices[pos] == vertex_ids
        out[hit] = self.offsets[pos[hit]]
        return out


@dataclass
class AnchorRegion:
    """A labelled mesh region: its face subset and barycentric anchors.

    Anchors are (face_index, c1, c2) rows; the third coordinate is
    1 - c1 - c2. Face indices refer to the rig's global face list and must
    be members of ``faces``.
    """

    faces: np.ndarray    # (m,) int face indices
    anchors: np.ndarray  # (a, 3) float rows (face, c1, c2)


@dataclass
class CollisionConfig:
    """Rig-level collision metadata.

    ``lip_axis``/``teeth_axis`` give the positive direction of each
    corrective mechanism, i.e. the direction the lower lip moves when the
    corresponding corrective weight increases.
    """

    lip_axis: np.ndarray
    teeth_axis: np.ndarray
    regions: dict            # {"teeth"|"upr_lip"|"lwr_lip": AnchorRegion}
    correctives: dict        # {(type, zone): shape index}, 8 entries
    depth_tolerance: float = 2e-3

    def corrective_order(self) -> list:
        """Canonical 8-slot order: lip zones then teeth zones."""
        return [self.correctives[(t, z)] for t in (LIP, TEETH) for z in ZONES]


@dataclass
class BlendshapeRig:
    rig_id: str
    vertices: np.ndarray                  # (N, 3) neutral
    faces: np.ndarray                     # (T, 3) int
    shapes: list
    symmetry_pairs: list                  # [(left_idx, right_idx), ...]
    emotion_subsets: dict                 # {name: [unique core indices]}
    collision_config: CollisionConfig
    gen_params: dict | None = None        # synthetic generation recipe, if any
    _unique_core_cache: np.ndarray | None = field(default=None, repr=False)

    # -- index helpers ----------------------------------------------------

    @property
    def n_shapes(self) -> int:
        return len(self.shapes)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    def indices_of_kind(self, kind: str) -> np.ndarray:
        return np.array([i for i, s in enumerate(self.shapes) if s.kind == kind], dtype=int)

    @property
    def core_indices(self) -> np.ndarray:
        return self.indices_of_kind(CORE)

    @property
    def combinational_indices(self) -> np.ndarray:
        return self.indices_of_kind(COMBINATIONAL)

    @property
    def collision_indices(self) -> np.ndarray:
        """The 8 collision shapes in canonical zone order."""
        return np.array(self.collision_config.corrective_order(), dtype=int)

    @property
    def right_members(self) -> set:
        return {r for _, r in self.symmetry_pairs}

    @property
    def unique_core_indices(self) -> np.ndarray:
        """Core shapes minus right pair members and excluded-tag shapes.

        This is the reduced space used by metrics and by the genetic
        operators (lip-seal/head/disabled shapes never evolve).
        """
        if self._unique_core_cache is None:
            rights = self.right_members
            keep = [
                i
                for i, s in enumerate(self.shapes)
                if s.kind == CORE and i not in rights and not (s.tags & _EXCLUDED_TAGS)
            ]
            self._unique_core_cache = np.array(keep, dtype=int)
        return self._unique_core_cache

    def shape_index(self, name: str) -> int:
        for i, s in enumerate(self.shapes):
            if s.name == name:
                return i
        raise KeyError(name)

    # -- weight vector operations -----------------------------------------

    def _check_weights(self, weights: np.ndarray) -> np.ndarray:
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.n_shapes,):
            raise RigError(f"weight vector has shape {w.shape}, expected ({self.n_shapes},)")
        if np.isnan(w).any():
            raise RigError("weight vector contains NaN")
        return w

    def clamp_weights(self, weights: np.ndarray) -> np.ndarray:
        """Clamp ingested weights into [0, 1], logging when anything moved."""
        w = self._check_weights(weights)
        clamped = np.clip(w, 0.0, 1.0)
        moved = np.nonzero(clamped != w)[0]
        if moved.size:
            log.warning("clamped %d out-of-range weights (shapes %s)", moved.size, moved.tolist())
        return clamped

    def evaluate(self, weights: np.ndarray) -> Mesh:
        """Deform the neutral mesh: V = B0 + sum_k w_k * (Bk - B0)."""
        w = self._check_weights(weights)
        v = self.vertices.copy()
        for k, s in enumerate(self.shapes):
            wk = w[k]
            if wk != 0.0:
                # indices within one shape are unique, fancy add is safe
                v[s.indices] += wk * s.offsets
        return Mesh(v, self.faces)

    def enforce_symmetry(self, weights: np.ndarray) -> np.ndarray:
        """Copy each left pair member's weight onto its right member."""
        w = self._check_weights(weights).copy()
        for left, right in self.symmetry_pairs:
            w[right] = w[left]
        return w

    def apply_combinational(self, weights: np.ndarray) -> np.ndarray:
        """Set every combinational weight to the product of its drivers."""
        w = self._check_weights(weights).copy()
        for k in self.combinational_indices:
            w[k] = float(np.prod(w[list(self.shapes[k].drivers)]))
        return w

    def reduce_weights(self, weights: np.ndarray, extra_excluded=()) -> np.ndarray:
        """Project a full weight vector onto the unique-core axes."""
        w = self._check_weights(weights)
        idx = self.unique_core_indices
        if len(extra_excluded):
            drop = set(int(i) for i in extra_excluded)
            idx = np.array([i for i in idx if i not in drop], dtype=int)
        return w[idx]

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        """Raise RigError on structural problems; silent when healthy."""
        problems = []
        n_faces = len(self.faces)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= self.n_vertices):
            problems.append("face list references out-of-range vertices")
        seen_in_pair = set()
        for left, right in self.symmetry_pairs:
            for m in (left, right):
                if m in seen_in_pair:
                    problems.append(f"shape {m} appears in more than one symmetry pair")
                seen_in_pair.add(m)
            if self.shapes[left].kind != self.shapes[right].kind:
                problems.append(f"pair ({left},{right}) mixes shape kinds")
        for i, s in enumerate(self.shapes):
            if s.indices.size and (s.indices.min() < 0 or s.indices.max() >= self.n_vertices):
                problems.append(f"shape {s.name} references out-of-range vertices")
            if s.indices.shape[0] != s.offsets.shape[0]:
                problems.append(f"shape {s.name} has mismatched index/offset lengths")
            if np.any(np.diff(s.indices) <= 0):
                problems.append(f"shape {s.name} has unsorted or duplicate vertex indices")
            if s.kind == COMBINATIONAL:
                if not s.drivers:
                    problems.append(f"combinational shape {s.name} has no drivers")
                for d in s.drivers:
                    if self.shapes[d].kind != CORE:
                        problems.append(f"combinational shape {s.name} driven by non-core {d}")
            if s.kind == COLLISION:
                if s.collision is None or s.collision[0] not in (LIP, TEETH) or s.collision[1] not in ZONES:
                    problems.append(f"collision shape {s.name} lacks a valid (type, zone) label")
        cc = self.collision_config
        if len(cc.correctives) != 8:
            problems.append(f"expected 8 collision correctives, found {len(cc.correctives)}")
        for key, idx in cc.correctives.items():
            if self.shapes[idx].kind != COLLISION or self.shapes[idx].collision != key:
                problems.append(f"collision corrective map entry {key} -> {idx} is inconsistent")
        for label, region in cc.regions.items():
            if region.faces.size and (region.faces.min() < 0 or region.faces.max() >= n_faces):
                problems.append(f"region {label} references out-of-range faces")
            face_set = set(region.faces.tolist())
            for row in region.anchors:
                f, c1, c2 = int(row[0]), float(row[1]), float(row[2])
                if f not in face_set:
                    problems.append(f"region {label} anchor face {f} outside region subset")
                if c1 < -1e-12 or c2 < -1e-12 or c1 + c2 > 1 + 1e-12:
                    problems.append(f"region {label} anchor ({f}) has invalid barycentric coords")
        unique = set(self.unique_core_indices.tolist())
        for emotion, subset in self.emotion_subsets.items():
            for i in subset:
                if int(i) not in unique:
                    problems.append(f"emotion subset {emotion} references non-unique-core shape {i}")
        if problems:
            raise RigError("; ".join(problems))


def barycentric_points(mesh: Mesh, anchors: np.ndarray) -> np.ndarray:
    """3D positions of (face, c1, c2) anchors on a (deformed) mesh."""
    faces = mesh.faces[anchors[:, 0].astype(int)]
    c1 = anchors[:, 1][:, None]
    c2 = anchors[:, 2][:, None]
    c3 = 1.0 - c1 - c2
    v = mesh.vertices
    return c1 * v[faces[:, 0]] + c2 * v[faces[:, 1]] + c3 * v[faces[:, 2]]


def sample_shape_offset(rig: BlendshapeRig, shape_idx: int, face: int, c1: float, c2: float) -> np.ndarray:
    """Interpolated offset of one shape at a barycentric point of a face."""
    tri = rig.faces[int(face)]
    dense = rig.shapes[shape_idx].offset_at_vertices(tri)
    coeff = np.array([c1, c2, 1.0 - c1 - c2])
    return coeff @ dense
