"""Snapshot data container and CSV interchange.

Snapshot data are independent observations at each observation time
(units are destroyed on measurement).  The CSV layout is one row per
observation with header ``time,rep,y1[,y2]``; lines starting with ``#``
carry provenance (config hash, seed) and are skipped on read.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SpecValidationError

__all__ = ["SnapshotData", "read_csv", "write_csv"]


@dataclass
class SnapshotData:
    """Observations grouped by time: ``obs[i]`` has shape ``(N_i, q)``."""

    times: tuple
    obs: list

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise SpecValidationError("snapshot times must be sorted ascending")
        norm = []
        q = None
        for i, y in enumerate(self.obs):
            y = np.atleast_1d(np.asarray(y, dtype=float))
            if y.ndim == 1:
                y = y[:, None]
            if q is None:
                q = y.shape[1]
            elif y.shape[1] != q:
                raise SpecValidationError(
                    f"observations at time index {i} have dimension {y.shape[1]}, "
                    f"expected {q}"
                )
            norm.append(y)
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "obs", norm)

    @property
    def q(self):
        return self.obs[0].shape[1]

    @property
    def n_total(self):
        return sum(y.shape[0] for y in self.obs)

    def subset(self, n_per_time):
        """First ``n_per_time`` observations at each time."""
        return SnapshotData(self.times, [y[:n_per_time] for y in self.obs])


def write_csv(path, data, header_comments=()):
    q = data.q
    cols = ",".join(f"y{j + 1}" for j in range(q))
    with open(path, "w") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        fh.write(f"time,rep,{cols}\n")
        for t, block in zip(data.times, data.obs):
            for rep, row in enumerate(block):
                vals = ",".join(repr(float(v)) for v in row)
                fh.write(f"{t!r},{rep},{vals}\n")


def read_csv(path):
    times, rows = [], {}
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                if header[:2] != ["time", "rep"]:
                    raise SpecValidationError(
                        f"snapshot CSV must start with 'time,rep', got {header[:2]}"
                    )
                continue
            parts = line.split(",")
            t = float(parts[0])
            rows.setdefault(t, []).append([float(v) for v in parts[2:]])
    for t in rows:
        times.append(t)
    times.sort()
    return SnapshotData(tuple(times), [np.asarray(rows[t]) for t in times])
