"""On-disk formats: grid files, CSV grids, checkpoints, eval reports, PNG renders.

Grid file
    ``<path>`` holds the raw little-endian float32/float64 payload, row-major
    M x N. ``<path>.json`` is the sidecar header::

        {"format": "n2nseismic-grid", "version": 1, "m": M, "n": N,
         "dtype": "float64", "byte_order": "little", "sample_interval": 0.002,
         "axis_unit": "time", "provenance": ["stage 1", "stage 2", ...],
         "crc32": <CRC-32 of the payload>}

Checkpoint
    ``b"N2NSCKPT"`` magic, uint32 LE format version, uint32 LE header length,
    UTF-8 JSON header, then the tensor payload. The header lists every tensor
    as ``{"name", "shape", "dtype": "<f4", "offset", "nbytes"}`` with offsets
    relative to the payload start. Tensor names are prefixed ``param/``,
    ``buffer/``, ``adam_m/`` and ``adam_v/``.

Eval CSV
    ``label,mse,snr_db,corrcoef,phase_corr_<lo>_<hi>,...`` with one row per
    tested section; floats are written with ``repr`` so they read back exactly.
"""

from __future__ import annotations

import csv
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import ChecksumError, GridFormatError
from .grid import SeismicSection
from .metrics import EvalReport
from .nn.model import DenoiserConfig, DenoiserModel, buffer_shapes, parameter_shapes

GRID_FORMAT = "n2nseismic-grid"
GRID_VERSION = 1
CKPT_MAGIC = b"N2NSCKPT"
CKPT_VERSION = 1
_DTYPES = {"float32": "<f4", "float64": "<f8"}


def header_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_grid(path, section: SeismicSection, dtype: str = "float64") -> Path:
    if dtype not in _DTYPES:
        raise ValueError(f"dtype must be one of {sorted(_DTYPES)}")
    path = Path(path)
    payload = np.ascontiguousarray(section.data, dtype=_DTYPES[dtype]).tobytes()
    header = {
        "format": GRID_FORMAT,
        "version": GRID_VERSION,
        "m": section.n_samples,
        "n": section.n_traces,
        "dtype": dtype,
        "byte_order": "little",
        "sample_interval": section.sample_interval,
        "axis_unit": section.axis_unit,
        "provenance": section.provenance.split("\n") if section.provenance else [],
        "crc32": zlib.crc32(payload),
    }
    path.write_bytes(payload)
    header_path(path).write_text(_dump_json(header))
    return path


def read_grid(path) -> SeismicSection:
    path = Path(path)
    try:
        header = json.loads(header_path(path).read_text())
    except FileNotFoundError:
        raise GridFormatError(f"missing grid header {header_path(path)}") from None
    except json.JSONDecodeError as exc:
        raise GridFormatError(f"unreadable grid header {header_path(path)}: {exc}") from None
    if header.get("format") != GRID_FORMAT:
        raise GridFormatError(f"{path}: not a {GRID_FORMAT} header")
    if header.get("version") != GRID_VERSION:
        raise GridFormatError(f"{path}: unsupported grid version {header.get('version')}")
    dtype = header.get("dtype")
    if dtype not in _DTYPES or header.get("byte_order") != "little":
        raise GridFormatError(f"{path}: unsupported dtype/byte order")
    m, n = int(header["m"]), int(header["n"])
    payload = path.read_bytes()
    expected = m * n * np.dtype(_DTYPES[dtype]).itemsize
    if len(payload) != expected:
        raise ChecksumError(f"{path}: checksum error, payload is {len(payload)} bytes, "
                            f"header promises {expected}")
    if zlib.crc32(payload) != header["crc32"]:
        raise ChecksumError(f"{path}: checksum error, CRC-32 mismatch")
    data = np.frombuffer(payload, dtype=_DTYPES[dtype]).reshape(m, n).astype(np.float64)
    return SeismicSection(data, sample_interval=header["sample_interval"],
                          axis_unit=header["axis_unit"], provenance="\n".join(header["provenance"]))


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_csv_grid(path, sample_interval: float = 0.002, axis_unit: str = "time") -> SeismicSection:
    """Rows are samples, columns are traces; a non-numeric first row is a header."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise GridFormatError(f"{path}: no numeric rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise GridFormatError(f"{path}: ragged CSV rows")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise GridFormatError(f"{path}: {exc}") from None
    return SeismicSection(data, sample_interval=sample_interval, axis_unit=axis_unit,
                          provenance=f"load_csv({path.name})")


def load_seismic(path, format: str | None = None, **kw) -> SeismicSection:
    """Load a section from a grid file or a CSV (chosen by suffix when unset)."""
    if format is None:
        format = "csv" if str(path).lower().endswith(".csv") else "gridfile"
    if format == "gridfile":
        return read_grid(path)
    if format == "csv":
        return read_csv_grid(path, **kw)
    raise ValueError(f"unknown format {format!r}")


# --- checkpoints -----------------------------------------------------------

def save_checkpoint(path, model: DenoiserModel, provenance: str = "", extra: dict | None = None) -> Path:
    groups = (("param", model.params), ("buffer", model.buffers),
              ("adam_m", model.adam_m), ("adam_v", model.adam_v))
    tensors, blobs, offset = [], [], 0
    for prefix, group in groups:
        for name in sorted(group):
            blob = np.ascontiguousarray(group[name], dtype="<f4").tobytes()
            tensors.append({"name": f"{prefix}/{name}", "shape": list(group[name].shape),
                            "dtype": "<f4", "offset": offset, "nbytes": len(blob)})
            blobs.append(blob)
            offset += len(blob)
    payload = b"".join(blobs)
    best = model.best_val_mse
    header = {
        "format_version": CKPT_VERSION,
        "config": model.config.to_dict(),
        "training_state": {"step": model.step, "epoch": model.epoch,
                           "best_val_mse": best if np.isfinite(best) else None,
                           "epochs_since_best": model.epochs_since_best},
        "tensors": tensors,
        "payload_crc32": zlib.crc32(payload),
        "provenance": provenance,
        "extra": extra or {},
    }
    hbytes = json.dumps(header, sort_keys=True, allow_nan=False).encode()
    path = Path(path)
    path.write_bytes(CKPT_MAGIC + struct.pack("<II", CKPT_VERSION, len(hbytes)) + hbytes + payload)
    return path


def read_checkpoint_header(path) -> dict:
    raw = Path(path).read_bytes()
    header, _ = _split_checkpoint(raw, path)
    return header


def _split_checkpoint(raw: bytes, path):
    if raw[:8] != CKPT_MAGIC:
        raise GridFormatError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != CKPT_VERSION:
        raise GridFormatError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[16:16 + hlen].decode())
    return header, raw[16 + hlen:]


def load_checkpoint(path) -> tuple[DenoiserModel, dict]:
    """Rebuild a model (float32) from a checkpoint; returns ``(model, header)``."""
    raw = Path(path).read_bytes()
    header, payload = _split_checkpoint(raw, path)
    if zlib.crc32(payload) != header["payload_crc32"]:
        raise ChecksumError(f"{path}: checkpoint payload checksum mismatch")
    config = DenoiserConfig.from_dict(header["config"])
    groups = {"param": {}, "buffer": {}, "adam_m": {}, "adam_v": {}}
    for t in header["tensors"]:
        prefix, name = t["name"].split("/", 1)
        blob = payload[t["offset"]:t["offset"] + t["nbytes"]]
        groups[prefix][name] = np.frombuffer(blob, dtype=t["dtype"]).reshape(t["shape"]).astype(np.float32)
    expected = parameter_shapes(config)
    for prefix in ("param", "adam_m", "adam_v"):
        if set(groups[prefix]) != set(expected):
            raise GridFormatError(f"{path}: {prefix} tensors do not match the config")
    if set(groups["buffer"]) != set(buffer_shapes(config)):
        raise GridFormatError(f"{path}: buffers do not match the config")
    st = header["training_state"]
    best = st["best_val_mse"]
    model = DenoiserModel(config, groups["param"], groups["buffer"], groups["adam_m"], groups["adam_v"],
                          step=st["step"], epoch=st["epoch"],
                          best_val_mse=float("inf") if best is None else best,
                          epochs_since_best=st["epochs_since_best"])
    return model, header


# --- eval reports ------------------------------------------------------------

def band_column(lo: float, hi: float) -> str:
    return f"phase_corr_{lo:g}_{hi:g}"


def eval_header(bands) -> list[str]:
    return ["label", "mse", "snr_db", "corrcoef"] + [band_column(lo, hi) for lo, hi in bands]


def write_eval_csv(path, reports: list[EvalReport]) -> Path:
    bands = [(lo, hi) for lo, hi, _ in reports[0].phase_band_corr] if reports else []
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(eval_header(bands))
        for r in reports:
            w.writerow([r.label, repr(r.mse), repr(r.snr_db), repr(r.corrcoef)]
                       + [repr(c) for _, _, c in r.phase_band_corr])
    return path


def read_eval_csv(path) -> list[EvalReport]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    if head[:4] != ["label", "mse", "snr_db", "corrcoef"]:
        raise GridFormatError(f"{path}: unexpected eval CSV header {head}")
    bands = []
    for col in head[4:]:
        lo, hi = col.removeprefix("phase_corr_").split("_")
        bands.append((float(lo), float(hi)))
    return [EvalReport(mse=float(r[1]), snr_db=float(r[2]), corrcoef=float(r[3]),
                       phase_band_corr=[(lo, hi, float(v)) for (lo, hi), v in zip(bands, r[4:])],
                       label=r[0])
            for r in body]


def write_training_log(path, log, wall_time: bool = False) -> Path:
    """Per-epoch CSV ``epoch,train_loss,val_mse[,wall_time_s]``.

    Wall time is opt-in because it is the one column that differs between
    otherwise identical runs.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_mse"] + (["wall_time_s"] if wall_time else []))
        for r in log.records:
            row = [r.epoch, repr(r.train_loss), repr(r.val_mse)]
            if wall_time:
                row.append(f"{r.wall_time_s:.3f}")
            w.writerow(row)
    return path


def write_phase_csv(path, freqs, curves: dict) -> Path:
    """Phase curves for external plotting: ``freq_hz,<label>,...`` in radians."""
    path = Path(path)
    labels = list(curves)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz"] + labels)
        for i, f in enumerate(freqs):
            w.writerow([repr(float(f))] + [repr(float(curves[k][i])) for k in labels])
    return path


# --- rendering -------------------------------------------------------------

def amplitude_to_pixels(data: np.ndarray, clip_percentile: float = 99.0, cmap: str = "gray") -> np.ndarray:
    """Symmetric percentile clip, then map [-c, c] to 8-bit gray or blue-white-red.

    A grid without any amplitude variation maps to uniform mid-gray.
    """
    if cmap not in ("gray", "seismic"):
        raise ValueError(f"cmap must be 'gray' or 'seismic', got {cmap!r}")
    if not 0 < clip_percentile <= 100:
        raise ValueError("clip_percentile must be in (0, 100]")
    c = float(np.percentile(np.abs(data), clip_percentile))
    if np.ptp(data) == 0 or c == 0:
        v = np.zeros_like(data)
    else:
        v = np.clip(data / c, -1.0, 1.0)
    if cmap == "gray":
        return np.round((v + 1.0) * 127.5).astype(np.uint8)
    neg, pos = np.minimum(v, 0.0), np.maximum(v, 0.0)
    r = 255.0 * (1.0 + neg)
    g = 255.0 * (1.0 + neg - pos)
    b = 255.0 * (1.0 - pos)
    return np.round(np.stack([r, g, b], axis=-1)).astype(np.uint8)


def render_png(section, path, clip_percentile: float = 99.0, cmap: str = "gray") -> Path:
    from PIL import Image

    data = section.data if isinstance(section, SeismicSection) else np.asarray(section, float)
    pixels = amplitude_to_pixels(data, clip_percentile, cmap)
    path = Path(path)
    Image.fromarray(pixels).save(path, format="PNG")
    return path


def load_image_corpus(directory) -> list[np.ndarray]:
    """Grayscale images from a directory, scaled to [-1, 1], sorted by name."""
    from PIL import Image

    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {directory}")
    exts = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".gif"}
    images = []
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() in exts:
            with Image.open(p) as im:
                images.append(np.asarray(im.convert("L"), dtype=np.float64) / 127.5 - 1.0)
    if not images:
        raise FileNotFoundError(f"no images in corpus directory {directory}")
    return images
