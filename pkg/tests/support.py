"""Independent oracles and shared helpers for the test suite.

The Coulomb oracle below is written from first principles with plain floats
and shares no code with the engine; only the physical constants are common.
"""

from __future__ import annotations

import math

from scipy.constants import elementary_charge as E_CHARGE
from scipy.constants import epsilon_0 as EPS0

from qcapim.engine import exhaustive_input_schedule, simulate
from qcapim.layout import SimParams
from qcapim.verification import extract_truth_table, required_samples, schedule_labels

#: desk-scale regime: default parameters with 256 samples
DESK = SimParams(num_samples=256)

# Frozen goldens from a 40-digit mpmath evaluation of the same 16-term sum.
GOLDEN_KINK_INLINE_20NM = 1.0924064947493994e-21
GOLDEN_KINK_DIAGONAL_20NM = -2.7469416561750455e-22
GOLDEN_KINK_INLINE_24NM = 4.2307457290177881e-22
# Golden for a cell at rest under (gamma = Ek/2, F = +Ek) whose field flips to -Ek.
GOLDEN_FLIP_DISSIPATION_J = 2.9915889944645027e-22


def oracle_dots(x, y, cell=18.0, dot=5.0):
    a = (cell - dot) / 2
    return [(x + a, y + a), (x - a, y + a), (x - a, y - a), (x + a, y - a)]


def oracle_charges(p):
    """Net charge per dot (units of e): the two electrons of a P = +1 cell sit
    top-right and bottom-left, each dot carrying +e/2 of background charge."""
    occupied = (1, 0, 1, 0) if p > 0 else (0, 1, 0, 1)
    return [0.5 - o for o in occupied]


def oracle_energy(c1, c2, p1, p2, epsr, cell=18.0, dot=5.0):
    total = 0.0
    for (x1, y1), q1 in zip(oracle_dots(*c1, cell, dot), oracle_charges(p1)):
        for (x2, y2), q2 in zip(oracle_dots(*c2, cell, dot), oracle_charges(p2)):
            r = math.hypot(x1 - x2, y1 - y2) * 1e-9
            total += q1 * q2 * E_CHARGE**2 / (4 * math.pi * EPS0 * epsr * r)
    return total


def oracle_kink(c1, c2, epsr=12.9, cell=18.0, dot=5.0):
    """E(opposite) - E(same) by direct 16-term summation."""
    return oracle_energy(c1, c2, 1, -1, epsr, cell, dot) - oracle_energy(c1, c2, 1, 1, epsr, cell, dot)


def oracle_fixed_point(ek, p_driver, gamma):
    f = ek * p_driver / (2 * gamma)
    return f / math.sqrt(1 + f * f)


def truth_table(layout, params=DESK, order=(), workers=None, latency_cycles=None):
    """Simulate ``layout`` over every input combination and extract its table."""
    schedule = exhaustive_input_schedule(schedule_labels(layout), params.num_samples, order)
    traces = simulate(layout, params, schedule, required_samples(layout, schedule, latency_cycles), workers)
    return extract_truth_table(traces, layout, schedule, latency_cycles), traces, schedule
