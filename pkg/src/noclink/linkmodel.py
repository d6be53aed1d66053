"""Link switching and bit-probability estimation under VC multiplexing.

The link model combines per-data-type statistics with a data-flow matrix
M recorded during simulation.  M is a 2n x 2n joint distribution over
consecutive link-cycle state pairs: states 0..n-1 mean "transmitting a
flit of type x", states n..2n-1 mean "idle, link holds the last pattern
of type x".  Head flits are type n-1 by convention.

Cross-type switching uses only the S matrices of the two streams (the
cross-correlation of distinct sources is taken as zero); same-type
switching always comes from the measured sequential statistics.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .energy import (
    Capacitance2D,
    Capacitance3D,
    TechnologyParams,
    absolute_energy_fj,
    energy_2d,
    energy_3d,
)
from .streams import BitStats, SwitchingMatrix


class LinkModelError(ValueError):
    """Inconsistent link-model inputs."""


@dataclass(frozen=True)
class DataFlowMatrix:
    """Joint probabilities of consecutive link-cycle states."""

    m: np.ndarray
    n: int

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        object.__setattr__(self, "m", m)
        self.validate()

    def validate(self, atol: float = 1e-9) -> None:
        n, m = self.n, self.m
        if m.shape != (2 * n, 2 * n):
            raise LinkModelError(f"M must be {2 * n}x{2 * n}, got {m.shape}")
        if m.min() < -atol:
            raise LinkModelError("M entries must be non-negative")
        if abs(m.sum() - 1.0) > max(atol, 1e-9):
            raise LinkModelError(f"M entries must sum to 1, got {m.sum()}")
        for x in range(n):
            for y in range(n):
                if y != x:
                    if m[x + n, y + n] > atol:
                        raise LinkModelError("idle cycles cannot change the held type")
                    if m[x, y + n] > atol:
                        raise LinkModelError("entering idle must preserve the held type")

    def active_fraction(self) -> float:
        """Fraction of link cycles that transmit a flit."""
        return float(self.m[:, : self.n].sum())

    def type_frequencies(self) -> np.ndarray:
        """Per-type fraction of link cycles transmitting that type."""
        return self.m[:, : self.n].sum(axis=0)


@dataclass(frozen=True)
class LinkTypeStats:
    """Per-type bit statistics and sequential switching, head type last."""

    bit_stats: list[BitStats]
    seq_switching: list[SwitchingMatrix]

    def __post_init__(self):
        if len(self.bit_stats) != len(self.seq_switching):
            raise LinkModelError("bit stats / switching count mismatch")
        if not self.bit_stats:
            raise LinkModelError("need statistics for at least one type")
        width = self.bit_stats[0].width
        for bs, sw in zip(self.bit_stats, self.seq_switching):
            if bs.width != width or sw.width != width:
                raise LinkModelError("all per-type matrices must share one width")

    @property
    def n(self) -> int:
        return len(self.bit_stats)

    @property
    def width(self) -> int:
        return self.bit_stats[0].width


def mux_switching(sx: BitStats, sy: BitStats) -> SwitchingMatrix:
    """Switching matrix for a type-x pattern followed by a type-y pattern.

    E{db_i db_j} = S^y_ij + S^x_ij - p^y_i p^x_j - p^x_i p^y_j, assuming
    zero cross-correlation between the two streams.
    """
    if sx.width != sy.width:
        raise LinkModelError("mux switching needs equal stream widths")
    px, py = sx.p, sy.p
    corr = sy.s + sx.s - np.outer(py, px) - np.outer(px, py)
    ts = np.diag(corr).copy()  # p^y + p^x - 2 p^y p^x
    t = ts[:, None] - corr
    np.fill_diagonal(t, ts)
    return SwitchingMatrix(t)


def _component_switching(stats: LinkTypeStats, x: int, y: int) -> np.ndarray:
    if x == y:
        return stats.seq_switching[x].t
    return mux_switching(stats.bit_stats[x], stats.bit_stats[y]).t


def _check_dims(stats: LinkTypeStats, m: DataFlowMatrix) -> None:
    if stats.n != m.n:
        raise LinkModelError(f"type count mismatch: stats n={stats.n}, M n={m.n}")


def link_switching(stats: LinkTypeStats, m: DataFlowMatrix) -> SwitchingMatrix:
    """Mean per-cycle link switching: sum of (M_xy + M_{x+n,y}) T^{x->y}."""
    _check_dims(stats, m)
    n, width = m.n, stats.width
    t = np.zeros((width, width))
    for x in range(n):
        for y in range(n):
            w = m.m[x, y] + m.m[x + n, y]
            if w != 0.0:
                t += w * _component_switching(stats, x, y)
    return SwitchingMatrix(t)


def standard_link_switching(stats: LinkTypeStats, m: DataFlowMatrix) -> SwitchingMatrix:
    """VC-blind baseline: per-type active frequencies weight sequential T only."""
    _check_dims(stats, m)
    freqs = m.type_frequencies()
    t = np.zeros((stats.width, stats.width))
    for y, f in enumerate(freqs):
        if f != 0.0:
            t += f * stats.seq_switching[y].t
    return SwitchingMatrix(t)


def link_bit_probabilities(
    stats: LinkTypeStats, m: DataFlowMatrix, literal: bool = False
) -> np.ndarray:
    """Mean held-value bit probabilities of the link.

    The printed formula omits idle->idle cycles; by default the weight
    sum is completed with the idle->idle mass so that the result is a
    true probability.  ``literal=True`` reproduces the uncorrected form.
    """
    _check_dims(stats, m)
    n = m.n
    p = np.zeros(stats.width)
    for y in range(n):
        w = m.m[:, y].sum() + m.m[:n, y + n].sum()
        if not literal:
            w += m.m[y + n, y + n]
        p += w * stats.bit_stats[y].p
    return p


@dataclass(frozen=True)
class LinkEnergyReport:
    link: str
    kind: str  # "2d" | "3d"
    normalized_per_cycle_af: float
    energy_per_cycle_fj: float
    active_fraction: float
    energy_per_flit_fj: Optional[float]
    payload_bytes_per_cycle: float
    energy_per_byte_fj: Optional[float]
    std_normalized_per_cycle_af: float
    std_energy_per_cycle_fj: float
    std_energy_per_flit_fj: Optional[float]
    std_energy_per_byte_fj: Optional[float]
    p_link: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "link", "kind", "normalized_per_cycle_af", "energy_per_cycle_fj",
            "active_fraction", "energy_per_flit_fj", "payload_bytes_per_cycle",
            "energy_per_byte_fj", "std_normalized_per_cycle_af",
            "std_energy_per_cycle_fj", "std_energy_per_flit_fj",
            "std_energy_per_byte_fj",
        )}
        d["p_link"] = None if self.p_link is None else list(map(float, self.p_link))
        return d


def link_energy_report(
    stats: LinkTypeStats,
    m: DataFlowMatrix,
    cap: Capacitance2D | Capacitance3D,
    tech: TechnologyParams,
    *,
    link: str = "",
    payload_bits: int | None = None,
    head_type: int | None = None,
    eq11_literal: bool = False,
) -> LinkEnergyReport:
    """Per-cycle, per-flit and per-payload-byte energy for one link.

    ``payload_bits`` is the number of effective payload bits carried by a
    body flit (the uncoded width when a codec adds wires); head flits
    carry no payload.
    """
    _check_dims(stats, m)
    t_link = link_switching(stats, m)
    t_std = standard_link_switching(stats, m)
    p_link = link_bit_probabilities(stats, m, literal=eq11_literal)

    if isinstance(cap, Capacitance3D):
        kind = "3d"
        e_norm = energy_3d(t_link, p_link, cap)
        e_std = energy_3d(t_std, p_link, cap)
    else:
        kind = "2d"
        e_norm = energy_2d(t_link, cap)
        e_std = energy_2d(t_std, cap)

    active = m.active_fraction()
    freqs = m.type_frequencies()
    bits = stats.width if payload_bits is None else payload_bits
    body = freqs.sum() if head_type is None else freqs.sum() - freqs[head_type]
    bytes_per_cycle = body * bits / 8.0

    e_cyc = absolute_energy_fj(e_norm, tech)
    e_std_cyc = absolute_energy_fj(e_std, tech)

    def per(val: float, denom: float) -> Optional[float]:
        return val / denom if denom > 0.0 else None

    return LinkEnergyReport(
        link=link,
        kind=kind,
        normalized_per_cycle_af=e_norm,
        energy_per_cycle_fj=e_cyc,
        active_fraction=active,
        energy_per_flit_fj=per(e_cyc, active),
        payload_bytes_per_cycle=bytes_per_cycle,
        energy_per_byte_fj=per(e_cyc, bytes_per_cycle),
        std_normalized_per_cycle_af=e_std,
        std_energy_per_cycle_fj=e_std_cyc,
        std_energy_per_flit_fj=per(e_std_cyc, active),
        std_energy_per_byte_fj=per(e_std_cyc, bytes_per_cycle),
        p_link=p_link,
    )


def save_data_flow_matrix(path, m: DataFlowMatrix, cycles: int, link: str) -> None:
    from .streams import save_matrix_csv

    save_matrix_csv(path, m.m, f"n={m.n} cycles={cycles} link={link}")


def load_data_flow_matrix(path) -> tuple[DataFlowMatrix, int, str]:
    from .streams import load_matrix_csv

    mat, header = load_matrix_csv(path)
    fields = dict(tok.split("=", 1) for tok in header.split() if "=" in tok)
    n = int(fields["n"])
    cycles = int(fields.get("cycles", 0))
    link = fields.get("link", "")
    return DataFlowMatrix(mat, n), cycles, link
