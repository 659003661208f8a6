"""Counter-based random streams.

Every draw is a pure function of ``(master_seed, purpose, replicate, machine,
round, step, draw index)``. A stream is keyed by everything except the step and
draw index; the step selects a fixed block of Philox counters, so step ``k`` can
be generated without generating steps ``0..k-1`` first. Gaussian variates use the
Box-Muller transform on those uniforms.
"""

import hashlib
import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

GENERATOR_NAME = "philox4x64"
GAUSSIAN_TRANSFORM = "box-muller"

_UINT64_MASK = (1 << 64) - 1
# Philox4x64 emits four 64 bit words per counter increment
_WORDS_PER_COUNTER = 4


class StreamPurpose(IntEnum):
    """Separates independent uses of the same (replicate, machine, round) key."""

    NOISE = 0
    PARTICIPATION = 1
    DATA = 2
    ESTIMATE = 3


@dataclass(frozen=True)
class RngStream:
    """A keyed, position-addressable random stream."""

    master_seed: int
    replicate: int = 0
    machine: int = 0
    round_index: int = 0
    purpose: StreamPurpose = StreamPurpose.NOISE

    @property
    def key(self) -> np.ndarray:
        """Return the 128 bit Philox key derived from the stream identity."""
        packed = struct.pack(
            "<Q4q",
            self.master_seed & _UINT64_MASK,
            int(self.purpose),
            self.replicate,
            self.machine,
            self.round_index,
        )
        digest = hashlib.blake2b(packed, digest_size=16).digest()
        return np.frombuffer(digest, dtype="<u8").astype(np.uint64)

    def _generator(self, first_counter: int) -> np.random.Generator:
        counter = np.array([first_counter, 0, 0, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=self.key))

    def uniforms(self, steps: int, width: int, first_step: int = 0) -> np.ndarray:
        """Draw a ``steps x width`` block of uniforms in [0, 1).

        Row ``i`` holds the draws of step ``first_step + i`` and only depends on
        that step index.

        Args:
            steps: Number of consecutive steps
            width: Uniforms per step
            first_step: Index of the first step

        Returns:
            np.ndarray: Array of shape (steps, width)
        """
        if steps < 0 or width < 0 or first_step < 0:
            raise ValueError("steps, width and first_step must be non-negative")
        if steps == 0 or width == 0:
            return np.zeros((steps, width))
        counters_per_step = -(-width // _WORDS_PER_COUNTER)
        row = counters_per_step * _WORDS_PER_COUNTER
        generator = self._generator(first_step * counters_per_step)
        return generator.random((steps, row))[:, :width]

    def normals(self, steps: int, width: int, first_step: int = 0) -> np.ndarray:
        """Draw standard normal variates with the Box-Muller transform.

        Args:
            steps: Number of consecutive steps
            width: Normals per step
            first_step: Index of the first step

        Returns:
            np.ndarray: Array of shape (steps, width)
        """
        raw = self.uniforms(steps, 2 * width, first_step)
        # 1 - u lies in (0, 1], keeps the log finite
        radius = np.sqrt(-2.0 * np.log1p(-raw[:, :width]))
        return radius * np.cos(2.0 * np.pi * raw[:, width:])

    def integers(
        self, steps: int, width: int, high: int, first_step: int = 0
    ) -> np.ndarray:
        """Draw integers uniformly from ``0..high-1``.

        Args:
            steps: Number of consecutive steps
            width: Integers per step
            high: Exclusive upper bound
            first_step: Index of the first step

        Returns:
            np.ndarray: Integer array of shape (steps, width)
        """
        if high < 1:
            raise ValueError(f"high must be at least 1, got {high}")
        scaled = np.floor(self.uniforms(steps, width, first_step) * high)
        return np.minimum(scaled.astype(np.int64), high - 1)

    def sample_without_replacement(self, population: int, count: int) -> np.ndarray:
        """Return ``count`` distinct indices from ``range(population)``, sorted.

        A seeded shuffle: the ``count`` smallest of ``population`` uniform keys.

        Args:
            population: Size of the index range
            count: How many indices to keep
        """
        if not 0 <= count <= population:
            raise ValueError(f"cannot draw {count} of {population} without replacement")
        keys = self.uniforms(1, population)[0]
        return np.sort(np.argsort(keys, kind="stable")[:count])

    def permutation(self, population: int) -> np.ndarray:
        """Return a seeded permutation of ``range(population)``."""
        keys = self.uniforms(1, population)[0]
        return np.argsort(keys, kind="stable")


def provenance(master_seed: int, replicate: int = 0) -> dict:
    """Describe how a run's randomness was produced."""
    return {
        "master_seed": master_seed,
        "replicate": replicate,
        "generator": GENERATOR_NAME,
        "transform": GAUSSIAN_TRANSFORM,
    }
