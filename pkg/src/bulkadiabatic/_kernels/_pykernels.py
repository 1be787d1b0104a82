"""Pure numpy versions of the compiled kernels."""

import numpy as np

_BLOCK = 1 << 22


def cosine_sum(x, c, h):
    """out[j] = sum_i c[i] * cos(x[j] * i * h)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    s = np.arange(c.size) * h
    out = np.empty(x.size)
    step = max(1, _BLOCK // max(1, c.size))
    for lo in range(0, x.size, step):
        out[lo:lo + step] = np.cos(np.outer(x[lo:lo + step], s)) @ c
    return out


def split_modes(states, n_modes, positions):
    """Local bits, remaining bits and reordering sign for each basis state."""
    states = np.ascontiguousarray(states, dtype=np.int64)
    smask = 0
    for p in positions:
        smask |= 1 << (n_modes - 1 - int(p))
    rest = states & ~np.int64(smask)
    local = np.zeros_like(states)
    parity = np.zeros_like(states)
    for p in positions:
        bit = n_modes - 1 - int(p)
        occ = (states >> bit) & 1
        local = (local << 1) | occ
        parity ^= occ & (np.bitwise_count(rest >> (bit + 1)).astype(np.int64) & 1)
    return local, rest, (1 - 2 * parity).astype(np.int8)
