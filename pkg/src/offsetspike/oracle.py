"""Deliberately naive reference implementations for differential testing.

Nothing here imports the simulation engine. The simulators are plain Python
loops over scalar floats, one neuron at a time; only the shift grid search
sweeps its candidates with numpy, using its own loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def oracle_simulate(v0, currents, theta):
    """Scalar IF loop.

    ``v0`` is a list of starting potentials (one per neuron), ``currents`` a
    list of per-step lists. Returns ``(m, v, s)`` as nested lists indexed
    ``[t][i]``; spikes are 0/1 ints.
    """
    n = len(v0)
    m_out, v_out, s_out = [], [], []
    pot = [float(x) for x in v0]
    for row in currents:
        if len(row) != n:
            raise ValueError("current row width does not match v0")
        m_row, v_row, s_row = [], [], []
        for i in range(n):
            m = pot[i] + float(row[i])
            if m >= theta:
                spike = 1
                v = m - theta
            else:
                spike = 0
                v = m
            pot[i] = v
            m_row.append(m)
            v_row.append(v)
            s_row.append(spike)
        m_out.append(m_row)
        v_out.append(v_row)
        s_out.append(s_row)
    return m_out, v_out, s_out


def oracle_count(v0: float, currents, theta: float) -> int:
    """Spike count of a single neuron."""
    v = float(v0)
    count = 0
    for c in currents:
        v += float(c)
        if v >= theta:
            v -= theta
            count += 1
    return count


@dataclass(frozen=True)
class ShiftInterval:
    """Grid-searched set of shifts ``delta`` (applied as v0 + delta) that work.

    ``lo``/``hi`` are the extreme valid grid points; ``lo_open``/``hi_open``
    are the nearest failing grid points beyond them (infinite when the run
    touches the edge of the search range). The true valid set is an interval
    because the spike count is monotone in v0, so any shift strictly between
    the two failing points and inside the same run is valid.
    """

    lo: float
    hi: float
    lo_open: float
    hi_open: float

    @property
    def empty(self) -> bool:
        return math.isnan(self.lo)

    def contains(self, delta: float) -> bool:
        return not self.empty and self.lo_open < delta < self.hi_open


EMPTY = ShiftInterval(math.nan, math.nan, math.nan, math.nan)


def _sweep(currents, v0, theta, steps_per_theta, span):
    n = int(round(2 * span * steps_per_theta))
    grid = theta * (np.arange(n + 1) / steps_per_theta - span)
    pot = v0 + grid
    count = np.zeros(n + 1, dtype=np.int64)
    for c in currents:
        pot = pot + float(c)
        fired = pot >= theta
        pot = np.where(fired, pot - theta, pot)
        count += fired
    return grid, count


def oracle_shift_search(currents, v0: float, theta: float, target_delta: int,
                        steps_per_theta: int = 1000, span: float = 3.0,
                        max_span: float = 256.0) -> ShiftInterval:
    """Exhaustive search over shifts in ``[-span*theta, span*theta]``.

    Grid step is ``theta / steps_per_theta``. Returns the run of grid shifts
    whose spike count differs from the unshifted count by ``target_delta``.
    Large currents push the valid run past the initial range, so the range
    doubles until the run is bracketed by failing grid points on both sides
    (or ``max_span`` is reached; an unbracketed side is then open to infinity).
    """
    base = oracle_count(v0, currents, theta)
    while True:
        grid, count = _sweep(currents, v0, theta, steps_per_theta, span)
        ok = count - base == target_delta
        hits = np.flatnonzero(ok)
        touches = hits.size and (hits[0] == 0 or hits[-1] == len(grid) - 1)
        if (hits.size == 0 or touches) and span * 2 <= max_span:
            span *= 2
            continue
        break
    if hits.size == 0:
        return EMPTY
    first, last = int(hits[0]), int(hits[-1])
    if not ok[first : last + 1].all():
        raise AssertionError("valid shifts are not contiguous; count is not monotone in v0")
    lo_open = float(grid[first - 1]) if first > 0 else -math.inf
    hi_open = float(grid[last + 1]) if last < len(grid) - 1 else math.inf
    return ShiftInterval(float(grid[first]), float(grid[last]), lo_open, hi_open)


def oracle_qcfs(z: float, lam: float, L: int) -> float:
    k = math.floor(z * L / lam + 0.5)
    k = min(max(k, 0), L)
    return lam * k / L


def oracle_offset(a, spikes, theta: float, T: int):
    """psi_i = a_i*T/theta - sum_t s_i(t), per neuron, as Python ints.

    ``spikes`` is a nested list ``[t][i]``.
    """
    out = []
    for i, ai in enumerate(a):
        designed = float(ai) * T / theta
        k = round(designed)
        if abs(designed - k) > 1e-6:
            raise ValueError(f"neuron {i}: designed count {designed} is not an integer")
        out.append(int(k) - sum(int(row[i]) for row in spikes))
    return out
