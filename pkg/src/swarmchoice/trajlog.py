"""Binary per-tick trajectory log.

Layout (little endian):
  header: magic b"SWTJ", uint32 version (1), uint32 robot count N, float64 dt
  frames: poses as N x 3 float64 (x, y, heading, row-major)
          followed by N uint8 collision-avoidance flags

Frame 0 holds the initial poses with zeroed flags; frame t (t >= 1) holds
the poses after tick t and the flags of that tick.  float64 poses make
metric replay from the log bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SWTJ"
VERSION = 1
_HEADER = struct.Struct("<4sII d")
HEADER_SIZE = _HEADER.size


class TrajectoryWriter:
    def __init__(self, path: str | Path, n_robots: int, dt: float):
        self.path = Path(path)
        self.n = n_robots
        self._fh = open(self.path, "wb")
        self._fh.write(_HEADER.pack(MAGIC, VERSION, n_robots, dt))

    def append(self, poses: np.ndarray, ca_flags: np.ndarray) -> None:
        self._fh.write(np.ascontiguousarray(poses, dtype="<f8").tobytes())
        self._fh.write(np.ascontiguousarray(ca_flags, dtype=np.uint8).tobytes())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class TrajectoryReader:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        with open(self.path, "rb") as fh:
            header = fh.read(HEADER_SIZE)
        if len(header) < HEADER_SIZE:
            raise ValueError(f"{self.path}: truncated trajectory header")
        magic, version, self.n, self.dt = _HEADER.unpack(header)
        if magic != MAGIC or version != VERSION:
            raise ValueError(f"{self.path}: not a version-{VERSION} trajectory log")
        self._frame_size = self.n * 3 * 8 + self.n
        payload = self.path.stat().st_size - HEADER_SIZE
        if payload % self._frame_size:
            raise ValueError(f"{self.path}: truncated trajectory payload")
        self.frames = payload // self._frame_size

    @property
    def steps(self) -> int:
        """Number of simulation steps recorded (frames minus the initial one)."""
        return max(self.frames - 1, 0)

    def __iter__(self):
        """Yields (poses (N,3), ca_flags (N,)) per frame, in order."""
        with open(self.path, "rb") as fh:
            fh.seek(HEADER_SIZE)
            for _ in range(self.frames):
                raw = fh.read(self._frame_size)
                poses = np.frombuffer(raw, dtype="<f8", count=self.n * 3).reshape(self.n, 3)
                flags = np.frombuffer(raw, dtype=np.uint8, offset=self.n * 3 * 8)
                yield poses, flags
