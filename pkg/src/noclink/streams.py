"""Synthetic data streams and per-stream bit/switching statistics.

A stream is a sequence of unsigned words of a fixed bit width.  From a
stream we derive two kinds of statistics:

* ``BitStats`` -- the joint 1-probability matrix S (S_ij = fraction of
  words where bits i and j are both 1) and the bit probability vector p
  (its diagonal).
* ``SwitchingMatrix`` -- mean switching between consecutive words: the
  diagonal holds the self-switching probabilities E{db_i^2}, off-diagonal
  entries hold E{db_i^2 - db_i*db_j}.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

STREAM_MAGIC = b"NESTRM"

DISTRIBUTIONS = ("uniform", "gaussian", "lognormal")


class StreamError(ValueError):
    """Invalid stream data or stream specification."""


def word_bits(words: np.ndarray, width: int) -> np.ndarray:
    """Unpack words into a (len, width) 0/1 matrix, bit 0 in column 0."""
    w = np.asarray(words, dtype=np.uint64)
    shifts = np.arange(width, dtype=np.uint64)
    return ((w[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.int8)


@dataclass(frozen=True)
class DataStream:
    words: np.ndarray
    width: int
    type_id: int = 0

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        object.__setattr__(self, "words", words)
        if self.width < 1:
            raise StreamError(f"stream width must be >= 1, got {self.width}")
        if self.width < 64 and words.size and int(words.max()) >= (1 << self.width):
            raise StreamError(f"word out of range for width {self.width}")

    def __len__(self) -> int:
        return int(self.words.size)

    def bits(self) -> np.ndarray:
        return word_bits(self.words, self.width)


@dataclass(frozen=True)
class BitStats:
    """Joint bit 1-probabilities S and the probability vector p = diag(S)."""

    s: np.ndarray
    p: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64)
        object.__setattr__(self, "s", s)
        p = np.diag(s).copy() if self.p is None else np.asarray(self.p, np.float64)
        object.__setattr__(self, "p", p)
        self.validate()

    @property
    def width(self) -> int:
        return self.s.shape[0]

    def validate(self, atol: float = 1e-9) -> None:
        s, p = self.s, self.p
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise StreamError("S matrix must be square")
        if p.shape != (s.shape[0],):
            raise StreamError("p vector does not match S dimension")
        if not np.allclose(s, s.T, atol=atol):
            raise StreamError("S matrix must be symmetric")
        if s.min() < -atol or s.max() > 1 + atol:
            raise StreamError("S entries must lie in [0, 1]")
        if not np.allclose(np.diag(s), p, atol=atol):
            raise StreamError("p must equal the diagonal of S")
        bound = np.minimum(p[:, None], p[None, :])
        if np.any(s > bound + atol):
            raise StreamError("S_ij must not exceed min(p_i, p_j)")


@dataclass(frozen=True)
class SwitchingMatrix:
    """Per-cycle switching: diag E{db_i^2}, off-diag E{db_i^2 - db_i db_j}."""

    t: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        object.__setattr__(self, "t", t)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise StreamError("switching matrix must be square")
        if not np.all(np.isfinite(t)):
            raise StreamError("switching matrix entries must be finite")

    @property
    def width(self) -> int:
        return self.t.shape[0]

    @property
    def self_switching(self) -> np.ndarray:
        return np.diag(self.t).copy()


@dataclass(frozen=True)
class StreamSpec:
    distribution: str
    width: int
    length: int
    sigma: float | None = None
    rho: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise StreamError(f"unknown distribution {self.distribution!r}")
        if self.width < 1:
            raise StreamError("width must be >= 1")
        if self.length < 1:
            raise StreamError("length must be >= 1")
        if self.distribution in ("gaussian", "lognormal"):
            if self.sigma is None or self.rho is None:
                raise StreamError(f"{self.distribution} stream needs sigma and rho")
            lo, hi = 2.0 ** (self.width / 10.0), 2.0 ** (self.width - 1)
            if not lo <= self.sigma <= hi:
                raise StreamError(
                    f"sigma {self.sigma} outside [{lo:.3g}, {hi:.3g}] for width {self.width}"
                )
            if not 0.0 <= self.rho <= 1.0:
                raise StreamError(f"rho {self.rho} outside [0, 1]")


def _ar1(rng: np.random.Generator, length: int, sigma: float, rho: float) -> np.ndarray:
    """Stationary AR(1) series with variance sigma^2 and lag-1 correlation rho."""
    x0 = rng.normal(0.0, sigma)
    if rho >= 1.0 or length == 1:
        return np.full(length, x0)
    eps = rng.normal(0.0, sigma * np.sqrt(1.0 - rho * rho), size=length - 1)
    tail, _ = lfilter([1.0], [1.0, -rho], eps, zi=np.array([rho * x0]))
    return np.concatenate(([x0], tail))


def _quantize(x: np.ndarray, width: int) -> np.ndarray:
    top = float((1 << width) - 1)
    return np.clip(np.rint(x), 0.0, top).astype(np.uint64)


def generate_stream(spec: StreamSpec) -> DataStream:
    """Generate a synthetic stream; deterministic for a given spec."""
    rng = np.random.default_rng(spec.seed)
    n, width = spec.length, spec.width
    offset = float(1 << (width - 1)) if width > 1 else 0.5
    if spec.distribution == "uniform":
        words = rng.integers(0, 1 << width, size=n, dtype=np.uint64)
    elif spec.distribution == "gaussian":
        x = _ar1(rng, n, spec.sigma, spec.rho)
        words = _quantize(x + offset, width)
    else:  # lognormal
        z = _ar1(rng, n, 1.0, spec.rho)
        w = np.exp(z)
        std = w.std()
        if std == 0.0:
            x = np.full(n, offset)
        else:
            x = (w - w.mean()) / std * spec.sigma + offset
        words = _quantize(x, width)
    return DataStream(words, width)


def multiplex_streams(
    streams: list[DataStream], mux_prob: float, seed: int = 0
) -> tuple[DataStream, np.ndarray]:
    """Interleave streams, switching the active source with probability mux_prob.

    Each source is consumed in order and recycled from its start when
    exhausted.  The output length is the total input length.  Returns the
    interleaved stream and the per-position source-index trace.
    """
    if len(streams) < 2:
        raise StreamError("multiplexing needs at least two streams")
    width = streams[0].width
    if any(s.width != width for s in streams):
        raise StreamError("all multiplexed streams must share one width")
    if any(len(s) == 0 for s in streams):
        raise StreamError("cannot multiplex an empty stream")
    if not 0.0 <= mux_prob <= 1.0:
        raise StreamError("mux_prob must lie in [0, 1]")

    rng = np.random.default_rng(seed)
    total = sum(len(s) for s in streams)
    k = len(streams)
    switch = rng.random(total) < mux_prob
    picks = rng.integers(0, k - 1, size=total)

    out = np.empty(total, dtype=np.uint64)
    trace = np.empty(total, dtype=np.int64)
    cursors = [0] * k
    words = [s.words for s in streams]
    active = 0
    for t in range(total):
        if t > 0 and switch[t]:
            other = int(picks[t])
            active = other if other < active else other + 1
        c = cursors[active]
        out[t] = words[active][c % len(words[active])]
        cursors[active] = c + 1
        trace[t] = active
    return DataStream(out, width), trace


def compute_bit_stats(stream: DataStream) -> BitStats:
    if len(stream) == 0:
        raise StreamError("cannot compute bit statistics of an empty stream")
    b = stream.bits().astype(np.float64)
    s = (b.T @ b) / len(stream)
    return BitStats(s)


def compute_sequential_switching(stream: DataStream) -> SwitchingMatrix:
    if len(stream) < 2:
        raise StreamError("sequential switching needs at least two words")
    b = stream.bits().astype(np.float64)
    d = np.diff(b, axis=0)
    m = len(stream) - 1
    corr = (d.T @ d) / m  # corr[i, j] = E{db_i db_j}; diag = E{db_i^2}
    ts = np.diag(corr).copy()
    t = ts[:, None] - corr
    np.fill_diagonal(t, ts)
    return SwitchingMatrix(t)


# --- stream / matrix serialization -------------------------------------------

def write_stream_binary(path, stream: DataStream) -> None:
    with open(path, "wb") as fh:
        fh.write(STREAM_MAGIC + struct.pack("<H", stream.width))
        fh.write(stream.words.astype("<u8").tobytes())


def read_stream_binary(path, type_id: int = 0) -> DataStream:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8 or header[:6] != STREAM_MAGIC:
            raise StreamError(f"{path}: not a stream file (bad magic)")
        (width,) = struct.unpack("<H", header[6:])
        words = np.frombuffer(fh.read(), dtype="<u8")
    return DataStream(words.copy(), width, type_id)


def write_stream_csv(path, stream: DataStream) -> None:
    np.savetxt(path, stream.words.astype(np.int64), fmt="%d")


def read_stream_csv(path, width: int, type_id: int = 0) -> DataStream:
    words = np.loadtxt(path, dtype=np.int64, ndmin=1)
    return DataStream(words.astype(np.uint64), width, type_id)


def save_matrix_csv(path, matrix: np.ndarray, header: str) -> None:
    np.savetxt(path, np.asarray(matrix, dtype=np.float64), delimiter=",",
               header=header, comments="# ")


def load_matrix_csv(path) -> tuple[np.ndarray, str]:
    with open(path) as fh:
        first = fh.readline()
    header = first[1:].strip() if first.startswith("#") else ""
    m = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    return m, header
