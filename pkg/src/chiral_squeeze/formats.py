"""On-disk formats: HMDT0001 trace containers and CSV spectra."""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .physics import ComplexSpectrum, FrequencyGrid, SqueezingSpectrum, TimeDomainWavefunction

__all__ = [
    "MAGIC",
    "TraceFormatError",
    "TraceRecord",
    "TraceSet",
    "write_traces",
    "read_traces",
    "encode_traces",
    "decode_traces",
    "write_complex_spectrum_csv",
    "read_complex_spectrum_csv",
    "write_squeezing_spectrum_csv",
    "read_squeezing_spectrum_csv",
    "write_time_domain_csv",
    "write_table_csv",
]

MAGIC = b"HMDT0001"
RECORD_KINDS = ("probe", "beat", "vacuum")


class TraceFormatError(ValueError):
    pass


@dataclass(eq=False)
class TraceRecord:
    kind: str
    data: np.ndarray
    theta_true: float | None = None

    def __post_init__(self):
        if self.kind not in RECORD_KINDS:
            raise ValueError(f"unknown record kind {self.kind!r}")
        self.data = np.ascontiguousarray(self.data, dtype="<f8")

    def __eq__(self, other):
        if not isinstance(other, TraceRecord):
            return NotImplemented
        return (
            self.kind == other.kind
            and _same_float(self.theta_true, other.theta_true)
            and self.data.tobytes() == other.data.tobytes()
        )


def _same_float(a, b) -> bool:
    if a is None or b is None:
        return a is b
    return struct.pack("<d", a) == struct.pack("<d", b)


@dataclass(eq=False)
class TraceSet:
    """Homodyne photocurrent records sharing one sampling configuration."""

    sample_rate: float
    n_samples: int
    records: list[TraceRecord] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        for rec in self.records:
            if rec.data.shape != (self.n_samples,):
                raise ValueError(f"record length {rec.data.shape} != n_samples {self.n_samples}")

    def by_kind(self, kind: str) -> list[TraceRecord]:
        return [r for r in self.records if r.kind == kind]

    def repetitions(self):
        """Yield ``(probe, beat, vacuum)`` triples matched by order of appearance."""
        probes, beats, vacua = (self.by_kind(k) for k in RECORD_KINDS)
        if not (len(probes) == len(beats) == len(vacua)):
            raise ValueError("probe, beat and vacuum record counts differ")
        yield from zip(probes, beats, vacua)

    def __eq__(self, other):
        if not isinstance(other, TraceSet):
            return NotImplemented
        return (
            _same_float(self.sample_rate, other.sample_rate)
            and self.n_samples == other.n_samples
            and self.seed == other.seed
            and len(self.records) == len(other.records)
            and all(a == b for a, b in zip(self.records, other.records))
        )


def encode_traces(ts: TraceSet) -> bytes:
    records = []
    for rec in ts.records:
        entry = {"kind": rec.kind}
        if rec.theta_true is not None:
            entry["theta_true"] = float(rec.theta_true)
        records.append(entry)
    header = {
        "sample_rate_hz": float(ts.sample_rate),
        "n_samples": int(ts.n_samples),
        "records": records,
        "seed": int(ts.seed),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(rec.data.astype("<f8", copy=False).tobytes() for rec in ts.records)
    return MAGIC + struct.pack("<I", len(head)) + head + payload


def decode_traces(blob: bytes) -> TraceSet:
    if len(blob) < 12 or blob[:8] != MAGIC:
        raise TraceFormatError("bad magic")
    (head_len,) = struct.unpack("<I", blob[8:12])
    if len(blob) < 12 + head_len:
        raise TraceFormatError("truncated header")
    try:
        header = json.loads(blob[12 : 12 + head_len].decode("utf-8"))
        n = int(header["n_samples"])
        entries = header["records"]
        sample_rate = float(header["sample_rate_hz"])
        seed = int(header["seed"])
    except (KeyError, TypeError, ValueError, UnicodeDecodeError) as exc:
        raise TraceFormatError(f"malformed header: {exc}") from exc
    payload = blob[12 + head_len :]
    expected = 8 * n * len(entries)
    if len(payload) < expected:
        raise TraceFormatError(f"truncated payload: {len(payload)} of {expected} bytes")
    if len(payload) > expected:
        raise TraceFormatError(f"header/payload length disagreement: {len(payload)} != {expected} bytes")
    data = np.frombuffer(payload, dtype="<f8")
    records = []
    for i, entry in enumerate(entries):
        chunk = data[i * n : (i + 1) * n].copy()
        records.append(TraceRecord(entry["kind"], chunk, entry.get("theta_true")))
    return TraceSet(sample_rate, n, records, seed)


def write_traces(ts: TraceSet, path) -> None:
    Path(path).write_bytes(encode_traces(ts))


def read_traces(path) -> TraceSet:
    return decode_traces(Path(path).read_bytes())


def _fmt(x: float) -> str:
    return repr(float(x))


def write_table_csv(path, header: list[str], columns) -> None:
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_complex_spectrum_csv(spec: ComplexSpectrum, path) -> None:
    write_table_csv(
        path,
        ["omega_over_gamma", "re", "im"],
        [spec.grid.omega, spec.values.real, spec.values.imag],
    )


def _read_columns(path, expected: list[str]) -> list[np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != expected:
        raise ValueError(f"{path}: expected header {expected}, got {rows[0] if rows else None}")
    body = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float).reshape(-1, len(expected))
    return [body[:, i] for i in range(len(expected))]


def read_complex_spectrum_csv(path) -> ComplexSpectrum:
    omega, re, im = _read_columns(path, ["omega_over_gamma", "re", "im"])
    return ComplexSpectrum(FrequencyGrid(omega), re + 1j * im)


def write_squeezing_spectrum_csv(spec: SqueezingSpectrum, path) -> None:
    write_table_csv(
        path,
        ["omega_over_gamma", "s_value", "theta"],
        [spec.grid.omega, spec.values, np.full(spec.grid.size, float(spec.theta))],
    )


def read_squeezing_spectrum_csv(path, ordering: str = "normal") -> SqueezingSpectrum:
    omega, values, theta = _read_columns(path, ["omega_over_gamma", "s_value", "theta"])
    return SqueezingSpectrum(FrequencyGrid(omega), values, float(theta[0]) if theta.size else 0.0, ordering)


def write_time_domain_csv(wf: TimeDomainWavefunction, path, extra: dict | None = None) -> None:
    header = ["tau_times_gamma", "re", "im"]
    cols = [wf.tau, wf.values.real, wf.values.imag]
    for name, col in (extra or {}).items():
        header.append(name)
        cols.append(col)
    write_table_csv(path, header, cols)
