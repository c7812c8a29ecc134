"""Counter-based uniform and Gaussian variates.

Every variate is addressed by ``(seed, stream, step, index)``.  The 256-bit
Philox counter is laid out as ``[index // 4, step, stream, 0]`` so variate
``index`` of a given step never depends on how many variates are drawn, on
the order they are drawn in, or on how the index range is split between
workers.
"""

import numpy as np
from scipy.special import ndtri

from .errors import ParameterDomainError

STREAM_XI = 0
STREAM_LANGEVIN = 1

_MASK64 = (1 << 64) - 1
_SCALE = 2.0 ** -53


def _check_seed(seed):
    seed = int(seed)
    if seed < 0 or seed >= 1 << 128:
        raise ParameterDomainError(f"seed must be in [0, 2**128), got {seed}")
    return seed


def uniforms(seed, stream, step, start, count):
    """Uniform variates in the open interval (0, 1), 53 bits each."""
    seed = _check_seed(seed)
    if count < 0 or start < 0:
        raise ParameterDomainError("start and count must be non-negative")
    block, offset = divmod(int(start), 4)
    bitgen = np.random.Philox(
        key=[seed & _MASK64, seed >> 64], counter=[block, int(step), int(stream), 0]
    )
    raw = bitgen.random_raw(int(count) + offset)[offset:]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _SCALE


def normals(seed, stream, step, start, count):
    """Standard normal variates by inverse-CDF transform of :func:`uniforms`."""
    return ndtri(uniforms(seed, stream, step, start, count))


BLOCK = 1 << 16


def normal_block(seed, stream, step, block, count):
    """Fast standard normals for one fixed-size block of paths at one step.

    Uses the ziggurat sampler on a Philox generator keyed by ``seed`` with
    counter ``[0, step, stream, block]``.  Variate ``k`` of a block depends
    only on ``(seed, stream, step, block, k)``: requesting fewer values yields
    a prefix of the same sequence.
    """
    seed = _check_seed(seed)
    if count < 0 or count > BLOCK:
        raise ParameterDomainError(f"block size must be in [0, {BLOCK}]")
    bitgen = np.random.Philox(
        key=[seed & _MASK64, seed >> 64], counter=[0, int(step), int(stream), int(block)]
    )
    return np.random.Generator(bitgen).standard_normal(int(count))
