"""Serialization of fields, trajectories, symbol tables and reports.

Binary field format (.spf): one JSON header line terminated by a newline,
followed by the raw little-endian complex128 coefficients in the lattice's
lexicographic enumeration order (C order of the coefficient array).
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .spectral import FrequencyLattice, SpinorField, Trajectory


def field_to_json_dict(f: SpinorField) -> dict:
    flat = f.coeffs.reshape(-1)
    return {
        "d": f.lattice.d,
        "radius": f.lattice.radius,
        "d0": f.d0,
        "coeffs": [[z.real, z.imag] for z in flat],
    }


def field_from_json_dict(obj: dict) -> SpinorField:
    lattice = FrequencyLattice(int(obj["d"]), int(obj["radius"]))
    d0 = int(obj["d0"])
    flat = np.array([complex(re, im) for re, im in obj["coeffs"]])
    return SpinorField(lattice, d0, flat.reshape(lattice.shape + (d0,)))


def save_field(f: SpinorField, path: str) -> None:
    header = json.dumps(
        {"d": f.lattice.d, "radius": f.lattice.radius, "d0": f.d0,
         "dtype": "complex128-le", "order": "lexicographic"},
        sort_keys=True,
    )
    data = np.ascontiguousarray(f.coeffs).astype("<c16")
    with open(path, "wb") as fh:
        fh.write(header.encode() + b"\n")
        fh.write(data.tobytes())


def load_field(path: str) -> SpinorField:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        lattice = FrequencyLattice(int(header["d"]), int(header["radius"]))
        d0 = int(header["d0"])
        raw = np.frombuffer(fh.read(), dtype="<c16")
    return SpinorField(lattice, d0, raw.reshape(lattice.shape + (d0,)).copy())


def save_trajectory(tr: Trajectory, directory: str, extra: dict | None = None) -> None:
    """Directory layout: manifest.json plus frames/frame_NNNNN.spf."""
    frames_dir = os.path.join(directory, "frames")
    os.makedirs(frames_dir, exist_ok=True)
    manifest = {
        "d": tr.lattice.d,
        "radius": tr.lattice.radius,
        "d0": tr.d0,
        "n_frames": tr.n_frames,
        "times": [float(t) for t in tr.times],
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    for k in range(tr.n_frames):
        save_field(tr.frame(k), os.path.join(frames_dir, f"frame_{k:05d}.spf"))


def load_trajectory(directory: str) -> Trajectory:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    times = np.array(manifest["times"], dtype=float)
    fields = [
        load_field(os.path.join(directory, "frames", f"frame_{k:05d}.spf"))
        for k in range(int(manifest["n_frames"]))
    ]
    frames = np.stack([f.coeffs for f in fields])
    return Trajectory(fields[0].lattice, fields[0].d0, times, frames)


def dump_symbol_table(lattice: FrequencyLattice, symbols: dict, path: str) -> None:
    """CSV of per-lattice-point symbol values, one column per named symbol."""
    names = sorted(symbols)
    xi = lattice.xi.reshape(-1, lattice.d)
    cols = [symbols[n].reshape(-1) for n in names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"xi_{j + 1}" for j in range(lattice.d)] + names)
        for i in range(xi.shape[0]):
            writer.writerow(
                [int(x) for x in xi[i]] + [repr(float(c[i])) for c in cols]
            )


def save_norm_report(report, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)


def dump_breakdown_csv(report, path: str) -> None:
    """Per-scale contributions of a NormReport as two CSV columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scale", "contribution"])
        for k in sorted(report.breakdown, key=str):
            writer.writerow([k, repr(float(report.breakdown[k]))])
