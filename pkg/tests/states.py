"""Small named states used across tests."""
import math

import numpy as np

from mipt import gates as G
from mipt import statevec as sv


def ghz(n):
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = amps[-1] = 1 / math.sqrt(2)
    return sv.StateVector(n, amps)


def brickwork(n, depth, rng):
    s = sv.StateVector.zeros(n)
    for layer in range(depth):
        for a in range(layer % 2, n - 1, 2):
            sv.apply_gate(s, G.haar_unitary(4, rng), [a, a + 1])
    return s


def product(n, rng):
    s = sv.StateVector.zeros(n)
    for q in range(n):
        sv.apply_gate(s, G.haar_unitary(2, rng), [q])
    return s
