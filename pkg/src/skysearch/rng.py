"""Deterministic pseudo-random streams shared by the whole pipeline.

Everything that needs randomness (backbone projection matrices, k-means
seeding, synthetic pixel noise) draws from the same xorshift64* generator
so that results are reproducible across platforms and numpy versions.

State initialisation for stream ``s`` of seed ``seed``:

    x0 = seed XOR 0x9E3779B97F4A7C15 XOR (s * 0xA24BAED4963EE407)   (mod 2^64)

step:  x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27
out:   ((x * 0x2545F4914F6CDD1D) mod 2^64) >> 40   -> 24-bit value

Uniform variates are the 24-bit outputs scaled by 2^-24, so they lie in
[0, 1).
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_INIT_XOR = 0x9E3779B97F4A7C15
_STREAM_MIX = 0xA24BAED4963EE407
_OUT_MULT = 0x2545F4914F6CDD1D
_U24_SCALE = 1.0 / (1 << 24)


def _init_state(seed: int, stream: int) -> int:
    return (seed ^ _INIT_XOR ^ ((stream * _STREAM_MIX) & _MASK64)) & _MASK64


class XorShift64Star:
    """Scalar xorshift64* stream; one instance per (seed, stream) pair."""

    def __init__(self, seed: int, stream: int = 0):
        self._state = _init_state(int(seed), int(stream))

    def next_u24(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self._state = x
        return ((x * _OUT_MULT) & _MASK64) >> 40

    def next_u01(self) -> float:
        return self.next_u24() * _U24_SCALE

    def uniform_block(self, count: int) -> np.ndarray:
        return np.array([self.next_u01() for _ in range(count)], dtype=np.float64)


def uniform_matrix(seed: int, streams: np.ndarray, count: int) -> np.ndarray:
    """Draw ``count`` uniforms from each of several streams at once.

    Row ``i`` equals what ``XorShift64Star(seed, streams[i])`` would produce,
    but the per-step work is vectorised across streams, which keeps large
    noise fields cheap.
    """
    state = np.array(
        [_init_state(int(seed), int(s)) for s in np.asarray(streams).ravel()],
        dtype=np.uint64,
    )
    out = np.empty((state.size, count), dtype=np.float64)
    c12, c25, c27 = np.uint64(12), np.uint64(25), np.uint64(27)
    mult, c40 = np.uint64(_OUT_MULT), np.uint64(40)
    for j in range(count):
        state ^= state >> c12
        state ^= state << c25
        state ^= state >> c27
        out[:, j] = ((state * mult) >> c40).astype(np.float64)
    out *= _U24_SCALE
    return out


def gaussian_field(seed: int, rows: int, cols: int, stream_base: int = 1 << 32) -> np.ndarray:
    """Standard-normal field with one xorshift64* substream per row.

    Box-Muller over pairs of uniforms; ``1 - u`` keeps the log argument
    strictly positive.
    """
    u = uniform_matrix(seed, np.arange(stream_base, stream_base + rows), 2 * cols)
    u1, u2 = u[:, :cols], u[:, cols:]
    return np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(2.0 * math.pi * u2)
