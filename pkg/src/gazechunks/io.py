"""Bit-exact file formats: latent binaries, label tables, reports, model weights.

Latent payloads are 32-bit floats on disk (matching typical latent
exports) and promoted to float64 in memory; model weights are stored as
float64 so a write/read round trip reproduces trained parameters
exactly.  All integers are little-endian u32.
"""

from __future__ import annotations

import csv
import json
import struct
from importlib import resources
from pathlib import Path

import numpy as np

from .analysis import AnalysisReport, SelectionMask
from .core import FormatError, LatentDataset, LatentLayout, LayoutError
from .regressor import RegressorParams
from .shiftsim import ToyPipelineParams

LATENT_MAGIC = b"LGZ1"
REGRESSOR_MAGIC = b"LGZM"
PIPELINE_MAGIC = b"LGZS"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIIII")  # magic, version, n_samples, n_layers, layer_dim, chunk_size


def write_latent_file(path: str | Path, layout: LatentLayout, codes: np.ndarray) -> None:
    codes = np.asarray(codes, dtype=np.float64)
    if codes.ndim != 2 or codes.shape[1] != layout.total_dims:
        raise LayoutError(f"codes shape {codes.shape} does not match the layout")
    header = _HEADER.pack(
        LATENT_MAGIC,
        FORMAT_VERSION,
        codes.shape[0],
        layout.n_layers,
        layout.layer_dim,
        layout.chunk_size,
    )
    payload = np.ascontiguousarray(codes, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_latent_file(path: str | Path) -> tuple[LatentLayout, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n_samples, n_layers, layer_dim, chunk_size = _HEADER.unpack_from(raw)
    if magic != LATENT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    try:
        layout = LatentLayout(n_layers, layer_dim, chunk_size)
    except LayoutError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    expected = _HEADER.size + 4 * n_samples * layout.total_dims
    if len(raw) != expected:
        raise FormatError(f"{path}: payload is {len(raw)} bytes, header declares {expected}")
    payload = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    codes = payload.reshape(n_samples, layout.total_dims).astype(np.float64)
    return layout, codes


def write_labels_csv(path: str | Path, sample_ids, yaw_deg, pitch_deg) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "yaw_deg", "pitch_deg"])
        for sid, yaw, pitch in zip(sample_ids, yaw_deg, pitch_deg):
            writer.writerow([sid, repr(float(yaw)), repr(float(pitch))])


def read_labels_csv(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_id", "yaw_deg", "pitch_deg"]:
            raise FormatError(f"{path}: unexpected header {header}")
        ids: list[str] = []
        yaw: list[float] = []
        pitch: list[float] = []
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"{path}: malformed row {row}")
            try:
                ids.append(row[0])
                yaw.append(float(row[1]))
                pitch.append(float(row[2]))
            except ValueError as exc:
                raise FormatError(f"{path}: {exc}") from exc
    return ids, np.asarray(yaw), np.asarray(pitch)


def load_dataset(latents_path: str | Path, labels_path: str | Path) -> LatentDataset:
    """Pair a latent file with its label table (by order)."""
    layout, codes = read_latent_file(latents_path)
    ids, yaw, pitch = read_labels_csv(labels_path)
    if len(ids) != codes.shape[0]:
        raise FormatError(
            f"sample count mismatch: {codes.shape[0]} latents vs {len(ids)} labels"
        )
    return LatentDataset(layout, ids, codes, yaw, pitch)


def write_dataset(out_dir: str | Path, dataset: LatentDataset) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    latents = out / "latents.lgz"
    labels = out / "labels.csv"
    write_latent_file(latents, dataset.layout, dataset.codes)
    write_labels_csv(labels, dataset.sample_ids, dataset.yaw_deg, dataset.pitch_deg)
    return latents, labels


# ---------------------------------------------------------------------------
# analysis reports
# ---------------------------------------------------------------------------


def report_to_doc(report: AnalysisReport, tool_version: str) -> dict:
    layout = report.layout
    chunks = []
    for i in range(layout.n_chunks):
        chunks.append(
            {
                "index": i,
                "layer": layout.layer_of_chunk(i),
                "mean_L": float(report.mean_left[i]),
                "mean_R": float(report.mean_right[i]),
                "var_L": float(report.var_left[i]),
                "var_R": float(report.var_right[i]),
                "mean_diff": float(report.mean_diff[i]),
                "t": float(report.t_stat[i]),
                "p": float(report.p_value[i]),
                "rank": int(report.rank[i]),
                "selected": bool(report.selected[i]),
            }
        )
    return {
        "tool_version": tool_version,
        "seed": report.seed,
        "config": {
            "left_range": [report.left_range[0], report.left_range[1]],
            "right_range": [report.right_range[0], report.right_range[1]],
            "selection": {
                "mode": report.selection_mode,
                "param": report.selection_param,
            },
        },
        "layout": {
            "n_layers": layout.n_layers,
            "layer_dim": layout.layer_dim,
            "chunk_size": layout.chunk_size,
        },
        "split": {
            "n_left": report.n_left,
            "n_right": report.n_right,
            "n_excluded": report.n_excluded,
            "small_group_warning": report.small_group_warning,
        },
        "chunks": chunks,
    }


def write_report(path: str | Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_report(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def load_report_schema() -> dict:
    text = resources.files("gazechunks").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def mask_from_report_doc(doc: dict) -> SelectionMask:
    try:
        layout = LatentLayout(
            doc["layout"]["n_layers"], doc["layout"]["layer_dim"], doc["layout"]["chunk_size"]
        )
        indices = tuple(c["index"] for c in doc["chunks"] if c["selected"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"report document missing field: {exc}") from exc
    return SelectionMask(layout, indices)


# ---------------------------------------------------------------------------
# model weights
# ---------------------------------------------------------------------------


def _write_f64(fh, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_f64(fh, shape: tuple[int, ...]) -> np.ndarray:
    count = int(np.prod(shape)) if shape else 1
    raw = fh.read(8 * count)
    if len(raw) != 8 * count:
        raise FormatError("model file truncated")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def write_regressor(path: str | Path, params: RegressorParams) -> None:
    layout = params.mask.layout
    mask_idx = np.asarray(params.mask.chunk_indices, dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(
            struct.pack(
                "<4sIIIIII",
                REGRESSOR_MAGIC,
                FORMAT_VERSION,
                layout.n_layers,
                layout.layer_dim,
                layout.chunk_size,
                params.hidden_dim,
                len(params.mask),
            )
        )
        fh.write(mask_idx.tobytes())
        for arr in (params.attention_logits, params.w1, params.b1, params.w2, params.b2):
            _write_f64(fh, arr)


def read_regressor(path: str | Path) -> RegressorParams:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sIIIIII"))
        if len(head) != struct.calcsize("<4sIIIIII"):
            raise FormatError(f"{path}: truncated header")
        magic, version, n_layers, layer_dim, chunk_size, hidden, n_mask = struct.unpack(
            "<4sIIIIII", head
        )
        if magic != REGRESSOR_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        layout = LatentLayout(n_layers, layer_dim, chunk_size)
        raw = fh.read(4 * n_mask)
        if len(raw) != 4 * n_mask:
            raise FormatError(f"{path}: truncated mask")
        mask = SelectionMask(layout, tuple(int(i) for i in np.frombuffer(raw, dtype="<u4")))
        in_dim = n_mask * chunk_size
        return RegressorParams(
            mask=mask,
            attention_logits=_read_f64(fh, (layout.n_chunks,)),
            w1=_read_f64(fh, (in_dim, hidden)),
            b1=_read_f64(fh, (hidden,)),
            w2=_read_f64(fh, (hidden, 2)),
            b2=_read_f64(fh, (2,)),
        )


def write_pipeline(path: str | Path, params: ToyPipelineParams) -> None:
    with open(path, "wb") as fh:
        fh.write(
            struct.pack(
                "<4sIIII",
                PIPELINE_MAGIC,
                FORMAT_VERSION,
                params.image_dim,
                params.latent_dim,
                1 if params.extractor_trained else 0,
            )
        )
        for arr in (
            params.w_enc,
            params.b_enc,
            params.w_gen,
            params.b_gen,
            params.w_ext,
            params.b_ext,
        ):
            _write_f64(fh, arr)


def read_pipeline(path: str | Path) -> ToyPipelineParams:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sIIII"))
        if len(head) != struct.calcsize("<4sIIII"):
            raise FormatError(f"{path}: truncated header")
        magic, version, m, d, flags = struct.unpack("<4sIIII", head)
        if magic != PIPELINE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        return ToyPipelineParams(
            w_enc=_read_f64(fh, (m, d)),
            b_enc=_read_f64(fh, (d,)),
            w_gen=_read_f64(fh, (d, m)),
            b_gen=_read_f64(fh, (m,)),
            w_ext=_read_f64(fh, (m, 2)),
            b_ext=_read_f64(fh, (2,)),
            extractor_trained=bool(flags & 1),
        )
