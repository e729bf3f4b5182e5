"""Track-database file: the extractor's output consumed by the analysis.

JSON text with three sections: run metadata, the per-set kinematics table,
and one record per track point (k, i, mean amplitude, mean delay, Doppler).
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import FileParseError
from .extract import ExtractionResult, SetInfo, Track, TrackPoint

FORMAT_NAME = "vmpc-trackdb"
FORMAT_VERSION = 1


def write_trackdb(path: str | Path, result: ExtractionResult, extra_meta: dict | None = None) -> None:
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "carrier_hz": result.carrier_hz,
        "bandwidth_hz": result.bandwidth_hz,
        "set_period": result.set_period,
        "detection_loss_db": result.detection_loss_db,
        "longterm_loss_db": result.longterm_loss_db,
        "n_detections": result.n_detections,
        "n_short_tracks": result.n_short_tracks,
        "n_full_lifetime": result.n_full_lifetime,
        "n_aborted_snapshots": result.n_aborted_snapshots,
    }
    if extra_meta:
        meta.update(extra_meta)
    payload = {
        "metadata": meta,
        "sets": [
            {
                "i": s.index,
                "t0": s.t0,
                "t_mean": s.t_mean,
                "d": s.d,
                "v_tx": s.v_tx,
                "v_rx": s.v_rx,
                "n_snapshots": s.n_snapshots,
            }
            for s in result.set_info
        ],
        "points": [
            {"k": t.id, "i": p.set_index, "a": p.amplitude, "tau_ns": p.delay_ns,
             "nu_hz": p.doppler_hz, "t_mean": p.t_mean}
            for t in result.tracks
            for p in t.points
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def read_trackdb(path: str | Path) -> ExtractionResult:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FileParseError(f"cannot read track database {path}: {exc}") from exc
    try:
        meta = data["metadata"]
        if meta.get("format") != FORMAT_NAME:
            raise FileParseError(f"{path} is not a track database")
        sets = [
            SetInfo(
                index=int(s["i"]),
                t0=float(s["t0"]),
                t_mean=float(s["t_mean"]),
                d=float(s["d"]),
                v_tx=float(s["v_tx"]),
                v_rx=float(s["v_rx"]),
                n_snapshots=int(s["n_snapshots"]),
            )
            for s in data["sets"]
        ]
        by_track: dict[int, list[TrackPoint]] = {}
        for p in data["points"]:
            by_track.setdefault(int(p["k"]), []).append(
                TrackPoint(
                    set_index=int(p["i"]),
                    amplitude=float(p["a"]),
                    delay_ns=float(p["tau_ns"]),
                    doppler_hz=float(p["nu_hz"]),
                    t_mean=float(p["t_mean"]),
                )
            )
        tracks = []
        for k in sorted(by_track):
            points = sorted(by_track[k], key=lambda p: p.set_index)
            tracks.append(Track(id=k, points=points))
        return ExtractionResult(
            tracks=tracks,
            set_info=sets,
            carrier_hz=float(meta["carrier_hz"]),
            bandwidth_hz=float(meta["bandwidth_hz"]),
            set_period=float(meta["set_period"]),
            detection_loss_db=float(meta["detection_loss_db"]),
            longterm_loss_db=float(meta["longterm_loss_db"]),
            n_detections=int(meta["n_detections"]),
            n_short_tracks=int(meta["n_short_tracks"]),
            n_full_lifetime=int(meta["n_full_lifetime"]),
            n_aborted_snapshots=int(meta.get("n_aborted_snapshots", 0)),
        )
    except FileParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FileParseError(f"malformed track database {path}: {exc}") from exc
