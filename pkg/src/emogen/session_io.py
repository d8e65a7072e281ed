"""Persistence for rigs, session logs, configs, models and study outputs.

Everything is one JSON document family with a ``schema`` field naming the
document kind and version ("sessionlog/1", "rigfmt/1", ...). Floats are
serialized at full round-trip precision, so read(write(x)) is bit-exact.
Parse failures raise SchemaError with the file, the offending line/column
for malformed text, or the name of the missing section.

Plain-text exchange formats live here too: OBJ meshes, CSV tables and the
per-vertex scalar sidecar used by heatmaps.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .collision import CorrectionResult
from .evolution import GAConfig, Population, Selection, SessionLog, replay_session
from .metrics import PcaModel, VertexCovariance
from .rig import AnchorRegion, BlendshapeRig, CollisionConfig, Mesh, Shape
from .simlab import DistributionStats, SimConfig

SCHEMA_VERSIONS = {
    "rigfmt": 1,
    "sessionlog": 1,
    "gaconfig": 1,
    "fixedinit": 1,
    "pcamodel": 1,
    "vertexcov": 1,
    "simstats": 1,
}


class SchemaError(ValueError):
    """Document does not match its declared (or expected) schema."""


# -- document plumbing ---------------------------------------------------------

def _check_schema(doc: dict, family: str, path) -> None:
    tag = doc.get("schema")
    if tag is None:
        raise SchemaError(f"{path}: document missing 'schema' field")
    try:
        got_family, got_version = str(tag).split("/", 1)
        got_version = int(got_version)
    except ValueError as exc:
        raise SchemaError(f"{path}: bad schema tag {tag!r}") from exc
    if got_family != family:
        raise SchemaError(f"{path}: expected a {family} document, found {got_family!r}")
    if got_version != SCHEMA_VERSIONS[family]:
        raise SchemaError(
            f"{path}: unsupported {family} version {got_version} "
            f"(supported: {SCHEMA_VERSIONS[family]})")


def _require(doc: dict, key: str, family: str, path):
    if key not in doc:
        raise SchemaError(f"{path}: {family} document missing {key!r}")
    return doc[key]


def load_document(path, family: str) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read ({exc})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"{path}: malformed document: {exc.msg} at line {exc.lineno} "
            f"column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: document root must be an object")
    _check_schema(doc, family, path)
    return doc


def dump_document(path, family: str, body: dict) -> None:
    doc = {"schema": f"{family}/{SCHEMA_VERSIONS[family]}"}
    doc.update(body)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


# -- rig documents --------------------------------------------------------------

def _shape_to_dict(s: Shape) -> dict:
    return {
        "name": s.name,
        "kind": s.kind,
        "indices": s.indices.tolist(),
        "offsets": s.offsets.tolist(),
        "drivers": [int(d) for d in s.drivers],
        "collision": list(s.collision) if s.collision else None,
        "tags": sorted(s.tags),
    }


def _shape_from_dict(d: dict, path) -> Shape:
    try:
        return Shape(
            name=d["name"],
            kind=d["kind"],
            indices=np.asarray(d["indices"], dtype=int),
            offsets=np.asarray(d["offsets"], dtype=float),
            drivers=tuple(int(x) for x in d.get("drivers", ())),
            collision=tuple(d["collision"]) if d.get("collision") else None,
            tags=frozenset(d.get("tags", ())),
        )
    except KeyError as exc:
        raise SchemaError(f"{path}: shape record missing {exc.args[0]!r}") from exc


def rig_to_dict(rig: BlendshapeRig) -> dict:
    cc = rig.collision_config
    return {
        "rig_id": rig.rig_id,
        "vertices": rig.vertices.tolist(),
        "faces": rig.faces.tolist(),
        "shapes": [_shape_to_dict(s) for s in rig.shapes],
        "symmetry_pairs": [[int(a), int(b)] for a, b in rig.symmetry_pairs],
        "emotion_subsets": {k: [int(i) for i in v] for k, v in rig.emotion_subsets.items()},
        "collision": {
            "lip_axis": np.asarray(cc.lip_axis, dtype=float).tolist(),
            "teeth_axis": np.asarray(cc.teeth_axis, dtype=float).tolist(),
            "depth_tolerance": cc.depth_tolerance,
            "regions": {
                name: {"faces": r.faces.tolist(), "anchors": r.anchors.tolist()}
                for name, r in cc.regions.items()
            },
            "correctives": {f"{t}:{z}": int(i) for (t, z), i in cc.correctives.items()},
        },
        "gen_params": rig.gen_params,
    }


def rig_from_dict(doc: dict, path="<memory>") -> BlendshapeRig:
    coll = _require(doc, "collision", "rigfmt", path)
    regions = {
        name: AnchorRegion(faces=np.asarray(r["faces"], dtype=int),
                           anchors=np.asarray(r["anchors"], dtype=float))
        for name, r in _require(coll, "regions", "rigfmt", path).items()
    }
    correctives = {}
    for key, idx in _require(coll, "correctives", "rigfmt", path).items():
        ctype, _, zone = key.partition(":")
        correctives[(ctype, zone)] = int(idx)
    cc = CollisionConfig(
        lip_axis=np.asarray(coll["lip_axis"], dtype=float),
        teeth_axis=np.asarray(coll["teeth_axis"], dtype=float),
        regions=regions,
        correctives=correctives,
        depth_tolerance=float(coll.get("depth_tolerance", 2e-3)),
    )
    rig = BlendshapeRig(
        rig_id=_require(doc, "rig_id", "rigfmt", path),
        vertices=np.asarray(_require(doc, "vertices", "rigfmt", path), dtype=float),
        faces=np.asarray(_require(doc, "faces", "rigfmt", path), dtype=int),
        shapes=[_shape_from_dict(s, path) for s in _require(doc, "shapes", "rigfmt", path)],
        symmetry_pairs=[(int(a), int(b)) for a, b in doc.get("symmetry_pairs", [])],
        emotion_subsets={k: [int(i) for i in v]
                         for k, v in doc.get("emotion_subsets", {}).items()},
        collision_config=cc,
        gen_params=doc.get("gen_params"),
    )
    rig.validate()
    return rig


def write_rig(rig: BlendshapeRig, path) -> None:
    dump_document(path, "rigfmt", rig_to_dict(rig))


def read_rig(path) -> BlendshapeRig:
    return rig_from_dict(load_document(path, "rigfmt"), path)


# -- session logs ----------------------------------------------------------------

def _correction_to_dict(c: CorrectionResult | None):
    if c is None:
        return None
    return {
        "w_clsn": np.asarray(c.w_clsn, dtype=float).tolist(),
        "resolved": bool(c.resolved),
        "iterations": int(c.iterations),
        "constraints_before": int(c.constraints_before),
        "constraints_after": int(c.constraints_after),
        "residual": float(c.residual),
    }


def _correction_from_dict(d):
    if d is None:
        return None
    return CorrectionResult(
        w_clsn=np.asarray(d["w_clsn"], dtype=float),
        resolved=bool(d["resolved"]),
        iterations=int(d["iterations"]),
        constraints_before=int(d["constraints_before"]),
        constraints_after=int(d["constraints_after"]),
        residual=float(d["residual"]),
    )


def _population_to_dict(p: Population) -> dict:
    return {
        "generation": int(p.generation),
        "members": p.members.tolist(),
        "tags": list(p.tags),
        "corrections": [_correction_to_dict(c) for c in p.corrections],
    }


def _population_from_dict(d: dict, path) -> Population:
    try:
        return Population(
            generation=int(d["generation"]),
            members=np.asarray(d["members"], dtype=float),
            tags=list(d["tags"]),
            corrections=[_correction_from_dict(c) for c in d["corrections"]],
        )
    except KeyError as exc:
        raise SchemaError(f"{path}: population record missing {exc.args[0]!r}") from exc


def _selection_to_dict(s: Selection) -> dict:
    return {
        "elite": int(s.elite),
        "others": [int(i) for i in s.others],
        "scores": None if s.scores is None else [float(v) for v in s.scores],
    }


def _selection_from_dict(d: dict) -> Selection:
    return Selection(
        elite=int(d["elite"]),
        others=[int(i) for i in d.get("others", [])],
        scores=None if d.get("scores") is None else [float(v) for v in d["scores"]],
    )


def log_to_dict(log: SessionLog) -> dict:
    return {
        "rig_id": log.rig_id,
        "rig_gen_params": log.rig_gen_params,
        "config": log.config.to_dict(),
        "populations": [_population_to_dict(p) for p in log.populations],
        "selections": [_selection_to_dict(s) for s in log.selections],
        "final_elite": None if log.final_elite is None else log.final_elite.tolist(),
        "abort": log.abort,
    }


def log_from_dict(doc: dict, path="<memory>") -> SessionLog:
    return SessionLog(
        rig_id=_require(doc, "rig_id", "sessionlog", path),
        rig_gen_params=doc.get("rig_gen_params"),
        config=GAConfig.from_dict(_require(doc, "config", "sessionlog", path)),
        populations=[_population_from_dict(p, path)
                     for p in _require(doc, "populations", "sessionlog", path)],
        selections=[_selection_from_dict(s)
                    for s in _require(doc, "selections", "sessionlog", path)],
        final_elite=(np.asarray(doc["final_elite"], dtype=float)
                     if doc.get("final_elite") is not None else None),
        abort=doc.get("abort"),
    )


def write_log(log: SessionLog, path) -> None:
    dump_document(path, "sessionlog", log_to_dict(log))


def read_log(path) -> SessionLog:
    return log_from_dict(load_document(path, "sessionlog"), path)


def replay_from_log(rig: BlendshapeRig, log: SessionLog) -> SessionLog:
    """Re-run a logged session from its config seed and recorded selections.

    Fixed-mode sessions replay from the logged generation-0 members, which
    finalization maps back onto themselves.
    """
    fixed = log.populations[0].members if log.config.init_mode == "fixed" else None
    return replay_session(rig, log.config, log.selections, fixed_members=fixed)


# -- configs and fixed init sets ---------------------------------------------------

def write_run_config(path, ga: GAConfig, rig_path=None, rig_gen_params=None,
                     auto: dict | None = None, fixed_init_path=None) -> None:
    body = {"ga": ga.to_dict()}
    if rig_path is not None:
        body["rig_path"] = str(rig_path)
    if rig_gen_params is not None:
        body["rig_gen_params"] = rig_gen_params
    if auto is not None:
        body["auto"] = auto
    if fixed_init_path is not None:
        body["fixed_init_path"] = str(fixed_init_path)
    dump_document(path, "gaconfig", body)


def read_run_config(path) -> dict:
    doc = load_document(path, "gaconfig")
    out = {
        "ga": GAConfig.from_dict(_require(doc, "ga", "gaconfig", path)),
        "rig_path": doc.get("rig_path"),
        "rig_gen_params": doc.get("rig_gen_params"),
        "auto": doc.get("auto"),
        "fixed_init_path": doc.get("fixed_init_path"),
    }
    return out


def write_fixed_init(members: np.ndarray, path) -> None:
    dump_document(path, "fixedinit", {"members": np.asarray(members, dtype=float).tolist()})


def read_fixed_init(path) -> np.ndarray:
    doc = load_document(path, "fixedinit")
    return np.asarray(_require(doc, "members", "fixedinit", path), dtype=float)


# -- metric models ------------------------------------------------------------------

def write_pca(model: PcaModel, path) -> None:
    dump_document(path, "pcamodel", {
        "mean": model.mean.tolist(),
        "components": model.components.tolist(),
        "variances": model.variances.tolist(),
        "total_variance": model.total_variance,
    })


def read_pca(path) -> PcaModel:
    doc = load_document(path, "pcamodel")
    return PcaModel(
        mean=np.asarray(_require(doc, "mean", "pcamodel", path), dtype=float),
        components=np.asarray(_require(doc, "components", "pcamodel", path), dtype=float),
        variances=np.asarray(_require(doc, "variances", "pcamodel", path), dtype=float),
        total_variance=float(_require(doc, "total_variance", "pcamodel", path)),
    )


def write_vertex_covariance(cov: VertexCovariance, path) -> None:
    # rank form: mean + centered samples; the matrix is rebuilt on read
    dump_document(path, "vertexcov", {
        "mean": cov.mean.tolist(),
        "centered": cov.centered.tolist(),
        "epsilon": cov.epsilon,
    })


def read_vertex_covariance(path) -> VertexCovariance:
    doc = load_document(path, "vertexcov")
    mean = np.asarray(_require(doc, "mean", "vertexcov", path), dtype=float)
    centered = np.asarray(_require(doc, "centered", "vertexcov", path), dtype=float)
    eps = float(_require(doc, "epsilon", "vertexcov", path))
    S = (centered.T @ centered) / (centered.shape[0] - 1)
    S[np.diag_indices_from(S)] += eps
    return VertexCovariance(mean=mean, centered=centered, matrix=S, epsilon=eps)


# -- study outputs --------------------------------------------------------------------

def write_stats(stats: DistributionStats, path, sim: SimConfig | None = None) -> None:
    body = {"stats": stats.to_dict()}
    if sim is not None:
        body["sim"] = sim.to_dict()
    dump_document(path, "simstats", body)


def read_stats(path):
    doc = load_document(path, "simstats")
    stats = DistributionStats.from_dict(_require(doc, "stats", "simstats", path))
    sim = SimConfig.from_dict(doc["sim"]) if doc.get("sim") else None
    return stats, sim


def export_csv(stats: DistributionStats, path) -> None:
    """One row per repetition and generation: repetition, generation, cd_error."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repetition", "generation", "cd_error"])
        for rep in range(stats.errors.shape[0]):
            for gen in range(stats.errors.shape[1]):
                writer.writerow([rep, gen, repr(float(stats.errors[rep, gen]))])


def export_table_csv(rows: list, path) -> None:
    """Generic list-of-dicts table export; header from the first row's keys."""
    if not rows:
        raise ValueError("nothing to export")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})


# -- meshes -----------------------------------------------------------------------------

def export_obj(mesh: Mesh, path) -> None:
    lines = [f"v {float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in mesh.vertices]
    lines += [f"f {int(a) + 1} {int(b) + 1} {int(c) + 1}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def import_obj(path) -> Mesh:
    vertices, faces = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0] not in ("v", "f"):
            continue
        try:
            if parts[0] == "v":
                vertices.append([float(v) for v in parts[1:4]])
            else:
                # keep only the vertex index of any i/j/k face token
                faces.append([int(tok.split("/")[0]) - 1 for tok in parts[1:4]])
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"{path}: bad OBJ record at line {lineno}: {line!r}") from exc
    if not vertices:
        raise SchemaError(f"{path}: OBJ file contains no vertices")
    return Mesh(vertices=np.asarray(vertices, dtype=float),
                faces=np.asarray(faces, dtype=int).reshape(-1, 3))


def export_heatmap(mesh: Mesh, field_values, obj_path, sidecar_path) -> None:
    """Mesh plus per-vertex scalar sidecar (one value per line)."""
    field_values = np.asarray(field_values, dtype=float)
    if field_values.shape != (mesh.n_vertices,):
        raise ValueError("field length does not match the mesh vertex count")
    export_obj(mesh, obj_path)
    lines = ["# per-vertex distance"] + [repr(float(v)) for v in field_values]
    Path(sidecar_path).write_text("\n".join(lines) + "\n")
