"""Binary CIR recording format and the ground-truth sidecar.

Recording layout (little-endian):
  header: magic "VMPC", version u16, bandwidth f64 [Hz], T_b f64 [s],
          U u32 (bins per snapshot), set count u32
  per set: index u32, t0 f64 [s], d f64 [m], v_tx f64 [m/s], v_rx f64 [m/s],
           snapshot count u8, then per snapshot:
           t f64 [s], reference_delay f64 [ns], U complex pairs f32

The sidecar is JSON: run metadata, one record per ground-truth MPC, and one
record per (set, MPC) with the true amplitude / mean delay / Doppler.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FileParseError
from .simulate import CirSnapshot, GroundTruth, GroundTruthMpc, RecordingSet

MAGIC = b"VMPC"
VERSION = 1

_HEADER = struct.Struct("<4sHddII")
_SET_HEADER = struct.Struct("<IddddB")
_SNAP_HEADER = struct.Struct("<dd")


@dataclass(frozen=True)
class CirHeader:
    bandwidth_hz: float
    t_bin_s: float
    n_bins: int
    n_sets: int


def write_cir(path: str | Path, sets: list[RecordingSet], bandwidth_hz: float) -> None:
    if not sets:
        raise ValueError("cannot write an empty recording")
    n_bins = len(sets[0].snapshots[0].h)
    t_bin = 1.0 / bandwidth_hz
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, bandwidth_hz, t_bin, n_bins, len(sets)))
        for rset in sets:
            n_snap = len(rset.snapshots)
            if n_snap > 255:
                raise ValueError("snapshot count exceeds the u8 field")
            fh.write(
                _SET_HEADER.pack(rset.index, rset.t0, rset.d, rset.v_tx, rset.v_rx, n_snap)
            )
            for snap in rset.snapshots:
                if len(snap.h) != n_bins:
                    raise ValueError("snapshot length differs from header U")
                fh.write(_SNAP_HEADER.pack(snap.t, snap.reference_delay_ns))
                fh.write(np.ascontiguousarray(snap.h, dtype="<c8").tobytes())


def read_cir(path: str | Path) -> tuple[CirHeader, list[RecordingSet]]:
    data = Path(path).read_bytes()
    offset = 0

    def need(nbytes: int, what: str) -> int:
        nonlocal offset
        if offset + nbytes > len(data):
            raise FileParseError(f"truncated CIR file while reading {what}", offset)
        start = offset
        offset += nbytes
        return start

    start = need(_HEADER.size, "header")
    magic, version, bw, t_bin, n_bins, n_sets = _HEADER.unpack_from(data, start)
    if magic != MAGIC:
        raise FileParseError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise FileParseError(f"unsupported CIR format version {version}", 4)
    if n_bins < 1 or bw <= 0 or t_bin <= 0:
        raise FileParseError("invalid header fields", 6)

    sets: list[RecordingSet] = []
    snap_bytes = 8 * n_bins  # complex64
    for _ in range(n_sets):
        start = need(_SET_HEADER.size, "set header")
        index, t0, d, v_tx, v_rx, n_snap = _SET_HEADER.unpack_from(data, start)
        snaps = []
        for _ in range(n_snap):
            s2 = need(_SNAP_HEADER.size, "snapshot header")
            t, ref = _SNAP_HEADER.unpack_from(data, s2)
            s3 = need(snap_bytes, "snapshot samples")
            h = np.frombuffer(data, dtype="<c8", count=n_bins, offset=s3).copy()
            snaps.append(CirSnapshot(t=t, reference_delay_ns=ref, h=h))
        sets.append(
            RecordingSet(index=index, t0=t0, d=d, v_tx=v_tx, v_rx=v_rx, snapshots=tuple(snaps))
        )
    if offset != len(data):
        raise FileParseError("trailing bytes after final set", offset)
    return CirHeader(bandwidth_hz=bw, t_bin_s=t_bin, n_bins=n_bins, n_sets=n_sets), sets


# --- ground-truth sidecar -----------------------------------------------------

def write_ground_truth(path: str | Path, truth: GroundTruth) -> None:
    payload = {
        "metadata": truth.metadata,
        "mpcs": [
            {
                "id": m.id,
                "birth_set": m.birth_set,
                "death_set": m.death_set,
                "birth_time": m.birth_time,
                "tau_x_ns": m.tau_x_ns,
                "nu_n": m.nu_n,
                "doppler_hz": m.doppler_hz,
                "lifetime_m": m.lifetime_m,
                "amplitude": m.amplitude,
                "is_los": m.is_los,
            }
            for m in truth.mpcs
        ],
        "per_set": [list(row) for row in truth.per_set],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def read_ground_truth(path: str | Path) -> GroundTruth:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FileParseError(f"cannot read ground truth file {path}: {exc}") from exc
    try:
        mpcs = [
            GroundTruthMpc(
                id=int(m["id"]),
                birth_set=int(m["birth_set"]),
                death_set=None if m["death_set"] is None else int(m["death_set"]),
                birth_time=float(m["birth_time"]),
                tau_x_ns=float(m["tau_x_ns"]),
                nu_n=float(m["nu_n"]),
                doppler_hz=float(m["doppler_hz"]),
                lifetime_m=float(m["lifetime_m"]),
                amplitude=float(m["amplitude"]),
                is_los=bool(m["is_los"]),
            )
            for m in data["mpcs"]
        ]
        per_set = [
            (int(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4]))
            for r in data["per_set"]
        ]
        return GroundTruth(mpcs=mpcs, per_set=per_set, metadata=dict(data["metadata"]))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FileParseError(f"malformed ground truth file {path}: {exc}") from exc
