"""Procedural low-poly test face.

Builds a deterministic face-like rig from a seed: a curved face plate,
closed box lips, a closed box of upper teeth, a catalogue of core shapes
(jaw, smile/frown pairs, brows, lip press, ...), two combinational
correctives and the eight zone collision correctives (four lip, four
teeth). Dimensions are centimetres.

The geometry is arranged so that:

* the neutral face is collision free (0.5 cm lip gap, teeth behind lips),
* jaw-open at weight 1 drags the lower lip over the upper teeth (teeth
  collision), and lip-press/lower-lip-raise push the lips together (lip
  collision),
* collision correctives are axis-pure: lip zones move the lips only
  vertically, teeth zones move the lower lip only outward.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .rig import (
    CORE,
    COMBINATIONAL,
    COLLISION,
    LIP,
    TEETH,
    ZONES,
    AnchorRegion,
    BlendshapeRig,
    CollisionConfig,
    RigError,
    Shape,
)

# lateral extent of the lip boxes; zone hats tile this range
LIP_X = (-2.3, 2.3)
UPR_LIP_Z = (0.25, 1.05)
LWR_LIP_Z = (-1.05, -0.25)
LIP_Y = (1.6, 2.4)
TEETH_X = (-1.8, 1.8)
TEETH_Y = (0.95, 1.45)
TEETH_Z = (-0.55, 0.55)

LIP_SEPARATION = 1.3    # per-unit-weight vertical motion of each lip, per zone
TEETH_PUSH = 2.0        # per-unit-weight outward motion of the lower lip, per zone

# catalogue order; the first 12 entries are mandatory
_CATALOG = (
    "jaw_open",
    "smile_L", "smile_R",
    "frown_L", "frown_R",
    "brow_raise_L", "brow_raise_R",
    "lip_press",
    "nose_wrinkle",
    "lower_lip_raise",
    "eye_close_L", "eye_close_R",
    "brow_lower_L", "brow_lower_R",
    "pupil_shift",
    "cheek_puff",
    "lip_pucker",
    "chin_raise",
    "squint_L", "squint_R",
    "head_tilt",
    "lip_seal",
)


@dataclass
class RigGenParams:
    seed: int = 7
    k_core: int = 22
    plate_segments: tuple = (12, 14)
    lip_segments: tuple = (12, 2, 2)
    teeth_segments: tuple = (9, 2, 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["plate_segments"] = list(self.plate_segments)
        d["lip_segments"] = list(self.lip_segments)
        d["teeth_segments"] = list(self.teeth_segments)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RigGenParams":
        return cls(
            seed=int(d.get("seed", 7)),
            k_core=int(d.get("k_core", 22)),
            plate_segments=tuple(d.get("plate_segments", (12, 14))),
            lip_segments=tuple(d.get("lip_segments", (12, 2, 2))),
            teeth_segments=tuple(d.get("teeth_segments", (9, 2, 2))),
        )


# -- geometry builders -------------------------------------------------------

def _plate(nx: int, nz: int):
    xs = np.linspace(-4.5, 4.5, nx + 1)
    zs = np.linspace(-5.0, 5.0, nz + 1)
    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    gy = 0.9 - 0.045 * gx ** 2 - 0.018 * gz ** 2
    gy += 0.5 * np.exp(-((gx / 0.8) ** 2) - (((gz - 2.4) / 1.2) ** 2))  # nose ridge
    verts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    faces = []
    for i in range(nx):
        for k in range(nz):
            a = i * (nz + 1) + k
            b = (i + 1) * (nz + 1) + k
            # wound so normals point toward +y (out of the face)
            faces.append((a, b, a + 1))
            faces.append((b, b + 1, a + 1))
    return verts, np.array(faces, dtype=int)


def _box_surface(x0, x1, y0, y1, z0, z1, nx, ny, nz):
    """Closed, outward-oriented boundary surface of a box lattice."""
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    zs = np.linspace(z0, z1, nz + 1)
    ids = -np.ones((nx + 1, ny + 1, nz + 1), dtype=int)
    verts = []
    for i in range(nx + 1):
        for j in range(ny + 1):
            for k in range(nz + 1):
                on_boundary = i in (0, nx) or j in (0, ny) or k in (0, nz)
                if on_boundary:
                    ids[i, j, k] = len(verts)
                    verts.append((xs[i], ys[j], zs[k]))
    faces = []

    def emit(grid, flip):
        # grid: 2D array of vertex ids; winding chosen by flip
        r, c = grid.shape
        for u in range(r - 1):
            for v in range(c - 1):
                a, b = grid[u, v], grid[u + 1, v]
                d, e = grid[u, v + 1], grid[u + 1, v + 1]
                if flip:
                    faces.append((a, d, b))
                    faces.append((b, d, e))
                else:
                    faces.append((a, b, d))
                    faces.append((b, e, d))

    # sides: (grid axes u, v) chosen so that not-flipped winding u x v
    # follows the right-hand rule toward the outward normal
    emit(ids[0, :, :], flip=True)     # x = x0, normal -x
    emit(ids[nx, :, :], flip=False)   # x = x1, normal +x
    emit(ids[:, 0, :], flip=False)    # y = y0, normal -y (u x v = x cross z = -y)
    emit(ids[:, ny, :], flip=True)    # y = y1, normal +y
    emit(ids[:, :, 0], flip=True)     # z = z0, normal -z (x cross y = +z, flip)
    emit(ids[:, :, nz], flip=False)   # z = z1, normal +z
    return np.array(verts, dtype=float), np.array(faces, dtype=int)


def _zone_hats(x: np.ndarray, x_range) -> np.ndarray:
    """(4, len(x)) triangular zone profiles; outer zones saturate laterally.

    The four hats sum to exactly 1 across the whole range, so combined
    corrective authority does not dip between zones.
    """
    lo, hi = x_range
    width = (hi - lo) / 4.0
    centers = lo + width * (np.arange(4) + 0.5)
    hats = np.clip(1.0 - np.abs(x[None, :] - centers[:, None]) / width, 0.0, None)
    hats[0, x <= centers[0]] = 1.0
    hats[3, x >= centers[3]] = 1.0
    return hats


def _gauss_region(verts, center, sigma, vec, cutoff=0.02):
    """Sparse offsets: vec scaled by a 2-sigma Gaussian in x/z around center."""
    cx, cz = center
    sx, sz = sigma
    g = np.exp(-((verts[:, 0] - cx) / sx) ** 2 - ((verts[:, 2] - cz) / sz) ** 2)
    idx = np.nonzero(g > cutoff)[0]
    return idx, g[idx, None] * np.asarray(vec, dtype=float)[None, :]


def _merge_sparse(n_vertices, pieces):
    """Sum a list of (indices, offsets) into one sorted sparse block."""
    dense = np.zeros((n_vertices, 3))
    for idx, off in pieces:
        np.add.at(dense, idx, off)
    nz = np.nonzero(np.any(dense != 0.0, axis=1))[0]
    return nz, dense[nz]


def generate_synthetic_rig(params: RigGenParams | None = None) -> BlendshapeRig:
    params = params or RigGenParams()
    if params.k_core < 12:
        raise RigError(f"k_core must be at least 12, got {params.k_core}")
    rng = np.random.default_rng(params.seed)

    plate_v, plate_f = _plate(*params.plate_segments)
    ul_v, ul_f = _box_surface(*LIP_X, *LIP_Y, *UPR_LIP_Z, *params.lip_segments)
    ll_v, ll_f = _box_surface(*LIP_X, *LIP_Y, *LWR_LIP_Z, *params.lip_segments)
    th_v, th_f = _box_surface(*TEETH_X, *TEETH_Y, *TEETH_Z, *params.teeth_segments)

    blocks = [plate_v, ul_v, ll_v, th_v]
    face_blocks = [plate_f, ul_f, ll_f, th_f]
    offsets = np.cumsum([0] + [len(b) for b in blocks])[:-1]
    face_starts = np.cumsum([0] + [len(f) for f in face_blocks])[:-1]
    vertices = np.vstack(blocks)
    faces = np.vstack([f + o for f, o in zip(face_blocks, offsets)])

    plate_ids = np.arange(len(plate_v))
    upr_ids = offsets[1] + np.arange(len(ul_v))
    lwr_ids = offsets[2] + np.arange(len(ll_v))

    n = len(vertices)
    pv = vertices[plate_ids]

    def plate_gauss(center, sigma, vec):
        idx, off = _gauss_region(pv, center, sigma, vec)
        return plate_ids[idx], off

    def lip_block(ids, vec):
        return ids, np.tile(np.asarray(vec, float), (len(ids), 1))

    def corner(side):  # mouth corner x for a side (+1 right half of array space)
        return 2.4 * side

    # -- core shape recipes (left variants; right built by mirroring) --------
    def build_core(name):
        side = 1.0 if name.endswith("_L") else -1.0 if name.endswith("_R") else 0.0
        pieces = []
        if name == "jaw_open":
            pieces.append(lip_block(lwr_ids, (0.0, -0.85, -0.25)))
            idx, off = plate_gauss((0.0, -3.2), (2.6, 1.6), (0.0, -0.2, -0.8))
            pieces.append((idx, off))
        elif name.startswith("smile"):
            pieces.append(plate_gauss((corner(side), -0.2), (1.0, 1.1), (0.35 * side, 0.1, 0.5)))
            mask = side * ll_v[:, 0] > 0.8
            pieces.append((lwr_ids[mask], np.tile((0.2 * side, 0.0, 0.22), (mask.sum(), 1))))
            umask = side * ul_v[:, 0] > 0.8
            pieces.append((upr_ids[umask], np.tile((0.2 * side, 0.0, 0.3), (umask.sum(), 1))))
        elif name.startswith("frown"):
            pieces.append(plate_gauss((corner(side), -0.6), (1.0, 1.1), (0.2 * side, 0.0, -0.45)))
            mask = side * ll_v[:, 0] > 0.8
            pieces.append((lwr_ids[mask], np.tile((0.1 * side, 0.0, -0.18), (mask.sum(), 1))))
        elif name.startswith("brow_raise"):
            pieces.append(plate_gauss((1.7 * side, 3.1), (1.0, 0.8), (0.0, 0.08, 0.5)))
        elif name.startswith("brow_lower"):
            pieces.append(plate_gauss((1.7 * side, 3.1), (1.0, 0.8), (0.0, 0.05, -0.4)))
        elif name == "lip_press":
            pieces.append(lip_block(upr_ids, (0.0, 0.0, -0.35)))
            pieces.append(lip_block(lwr_ids, (0.0, 0.0, 0.35)))
        elif name == "nose_wrinkle":
            pieces.append(plate_gauss((0.0, 1.9), (1.0, 1.0), (0.0, 0.12, 0.3)))
        elif name == "lower_lip_raise":
            pieces.append(lip_block(lwr_ids, (0.0, 0.0, 1.1)))
        elif name.startswith("eye_close"):
            pieces.append(plate_gauss((1.8 * side, 2.3), (0.9, 0.6), (0.0, -0.05, -0.3)))
        elif name == "pupil_shift":
            pieces.append(plate_gauss((1.8, 2.3), (0.5, 0.4), (0.08, 0.0, 0.0)))
            pieces.append(plate_gauss((-1.8, 2.3), (0.5, 0.4), (0.08, 0.0, 0.0)))
        elif name == "cheek_puff":
            pieces.append(plate_gauss((2.6, 0.0), (1.0, 1.3), (0.12, 0.45, 0.0)))
            pieces.append(plate_gauss((-2.6, 0.0), (1.0, 1.3), (-0.12, 0.45, 0.0)))
        elif name == "lip_pucker":
            pieces.append(lip_block(upr_ids, (0.0, 0.4, 0.0)))
            pieces.append(lip_block(lwr_ids, (0.0, 0.25, 0.0)))
        elif name == "chin_raise":
            pieces.append(plate_gauss((0.0, -2.6), (1.4, 1.0), (0.0, 0.15, 0.45)))
        elif name.startswith("squint"):
            pieces.append(plate_gauss((1.7 * side, 1.6), (0.9, 0.5), (0.0, 0.06, 0.22)))
        elif name == "head_tilt":
            # linearised rotation about the x axis
            all_ids = np.arange(n)
            off = np.stack([np.zeros(n), -0.04 * vertices[:, 2], 0.04 * vertices[:, 1]], axis=1)
            pieces.append((all_ids, off))
        elif name == "lip_seal":
            pieces.append(lip_block(upr_ids, (0.0, 0.0, -0.18)))
            pieces.append(lip_block(lwr_ids, (0.0, 0.0, 0.18)))
        elif name.startswith("sculpt"):
            cx, cz, vec = sculpt_recipes[int(name.split("_")[1])]
            flip = np.array([side, 1.0, 1.0]) if side else np.array([1.0, 1.0, 1.0])
            pieces.append(plate_gauss((cx * (side or 1.0), cz), (0.8, 0.8), vec * flip))
        else:
            raise RigError(f"unknown catalogue shape {name}")
        idx, off = _merge_sparse(n, pieces)
        tags = set()
        if name.startswith("eye_close"):
            tags.add("eye")
        if name == "pupil_shift":
            tags.add("pupil")
        if name == "head_tilt":
            tags |= {"head", "disabled"}
        if name == "lip_seal":
            tags |= {"lip-seal", "disabled"}
        return Shape(name, CORE, idx, off, tags=frozenset(tags))

    names = list(_CATALOG[: min(params.k_core, len(_CATALOG))])
    extra = params.k_core - len(names)
    sculpt_recipes = []
    while extra > 0:
        # sculpt shapes come in mirrored pairs sharing one random recipe
        vec = rng.uniform(-0.3, 0.3, size=3)
        vec[1] = abs(vec[1])
        sculpt_recipes.append((rng.uniform(0.9, 3.2), rng.uniform(-4.0, 4.0), vec))
        sid = len(sculpt_recipes) - 1
        names.append(f"sculpt_{sid}_L")
        if extra > 1:
            names.append(f"sculpt_{sid}_R")
        extra -= 2

    shapes = [build_core(nm) for nm in names]

    # mirror-pair bookkeeping (left first)
    symmetry_pairs = []
    for i, s in enumerate(shapes):
        if s.name.endswith("_L"):
            rn = s.name[:-2] + "_R"
            for j, t in enumerate(shapes):
                if t.name == rn:
                    symmetry_pairs.append((i, j))
    name_to_idx = {s.name: i for i, s in enumerate(shapes)}

    # -- combinational correctives -------------------------------------------
    combos = []
    if "smile_L" in name_to_idx:
        idx, off = _merge_sparse(n, [plate_gauss((2.4, -0.2), (0.8, 0.8), (0.08, 0.1, 0.12))])
        combos.append(Shape("fix_jaw_smile", COMBINATIONAL, idx, off,
                            drivers=(name_to_idx["jaw_open"], name_to_idx["smile_L"])))
    if "lower_lip_raise" in name_to_idx:
        idx, off = _merge_sparse(n, [lip_block(upr_ids, (0.0, -0.12, 0.0))])
        combos.append(Shape("fix_press_raise", COMBINATIONAL, idx, off,
                            drivers=(name_to_idx["lip_press"], name_to_idx["lower_lip_raise"])))
    if len(combos) < 2:
        raise RigError("rig catalogue too small to host two combinational correctives")
    shapes.extend(combos)

    # -- collision correctives (axis-pure) ------------------------------------
    ul_hats = _zone_hats(ul_v[:, 0], LIP_X)
    ll_hats = _zone_hats(ll_v[:, 0], LIP_X)
    collision_map = {}
    for zi, zone in enumerate(ZONES):
        pieces = [
            (upr_ids, np.stack([np.zeros(len(ul_v)), np.zeros(len(ul_v)), LIP_SEPARATION * ul_hats[zi]], axis=1)),
            (lwr_ids, np.stack([np.zeros(len(ll_v)), np.zeros(len(ll_v)), -LIP_SEPARATION * ll_hats[zi]], axis=1)),
        ]
        idx, off = _merge_sparse(n, pieces)
        collision_map[(LIP, zone)] = len(shapes)
        shapes.append(Shape(f"clsn_lip_{zone}", COLLISION, idx, off, collision=(LIP, zone)))
    for zi, zone in enumerate(ZONES):
        pieces = [
            (lwr_ids, np.stack([np.zeros(len(ll_v)), TEETH_PUSH * ll_hats[zi], np.zeros(len(ll_v))], axis=1)),
        ]
        idx, off = _merge_sparse(n, pieces)
        collision_map[(TEETH, zone)] = len(shapes)
        shapes.append(Shape(f"clsn_teeth_{zone}", COLLISION, idx, off, collision=(TEETH, zone)))

    # -- anchor regions --------------------------------------------------------
    def bottom_faces(block_f, block_start, block_v, z_plane):
        out = []
        for fi, tri in enumerate(block_f):
            if np.all(np.abs(block_v[tri][:, 2] - z_plane) < 1e-9):
                out.append(block_start + fi)
        return np.array(out, dtype=int)

    def column_anchors(face_ids, x_range, nx, mid_y):
        """One anchor per lattice x column, on the face nearest the y midline."""
        cents = vertices[faces[face_ids]].mean(axis=1)
        width = (x_range[1] - x_range[0]) / nx
        best = {}
        for f, c in zip(face_ids, cents):
            col = min(nx - 1, max(0, int((c[0] - x_range[0]) // width)))
            score = abs(c[1] - mid_y)
            if col not in best or score < best[col][1]:
                best[col] = (int(f), score, c[0])
        chosen = sorted(best.values(), key=lambda t: t[2])
        return np.array([[f, 1.0 / 3.0, 1.0 / 3.0] for f, _, _ in chosen])

    upr_bottom = bottom_faces(ul_f, face_starts[1], ul_v, UPR_LIP_Z[0])
    teeth_bottom = bottom_faces(th_f, face_starts[3], th_v, TEETH_Z[0])
    lwr_all = face_starts[2] + np.arange(len(ll_f))

    # upper-lip anchors sit toward the inner rows (they stay over the lower
    # lip when the jaw pulls it inward); teeth anchors toward the outer rows
    # (first to be swept by the inward-moving lip)
    regions = {
        "upr_lip": AnchorRegion(upr_bottom, column_anchors(upr_bottom, LIP_X, params.lip_segments[0], np.mean(LIP_Y) - 0.1)),
        "teeth": AnchorRegion(teeth_bottom, column_anchors(teeth_bottom, TEETH_X, params.teeth_segments[0], TEETH_Y[1] - 0.15)),
        "lwr_lip": AnchorRegion(lwr_all, np.array([[f, 1.0 / 3.0, 1.0 / 3.0] for f in lwr_all])),
    }

    collision_config = CollisionConfig(
        lip_axis=np.array([0.0, 0.0, -1.0]),   # lip corrective moves the lower lip down
        teeth_axis=np.array([0.0, 1.0, 0.0]),  # teeth corrective moves the lower lip outward
        regions=regions,
        correctives=collision_map,
    )

    def u(nm):
        return name_to_idx[nm]

    emotion_subsets = {
        "happy": [u("smile_L"), u("brow_raise_L"), u("jaw_open")],
        "sad": [u("frown_L"), u("brow_raise_L"), u("lip_press"), u("lower_lip_raise")],
        "angry": [u("frown_L"), u("nose_wrinkle"), u("lip_press"), u("jaw_open")],
        "fearful": [u("brow_raise_L"), u("jaw_open"), u("lower_lip_raise"), u("nose_wrinkle")],
    }
    if "brow_lower_L" in name_to_idx:
        emotion_subsets["angry"].insert(0, u("brow_lower_L"))
    if "cheek_puff" in name_to_idx:
        emotion_subsets["happy"].append(u("cheek_puff"))
    if "chin_raise" in name_to_idx:
        emotion_subsets["sad"].append(u("chin_raise"))
    if "squint_L" in name_to_idx:
        emotion_subsets["angry"].append(u("squint_L"))
        emotion_subsets["happy"].append(u("squint_L"))
    if "lip_pucker" in name_to_idx:
        emotion_subsets["fearful"].append(u("lip_pucker"))

    rig = BlendshapeRig(
        rig_id=f"synthface/{params.seed}/{params.k_core}",
        vertices=vertices,
        faces=faces,
        shapes=shapes,
        symmetry_pairs=symmetry_pairs,
        emotion_subsets=emotion_subsets,
        collision_config=collision_config,
        gen_params=params.to_dict(),
    )
    rig.validate()
    return rig
