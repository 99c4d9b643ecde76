"""
Reproducible random streams and the named parameter store.

Rng is SplitMix64: the 64-bit state advances by 0x9E3779B97F4A7C15 and each
output is the state passed through the mix
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)
(all mod 2**64). Floats use the top 53 bits, (u >> 11) * 2**-53, so any
implementation of the same recipe draws identical parameters.
"""

import math
from typing import Iterator, Mapping, Sequence

import numpy as np

from coop_forecaster.Numerics.tensor import Tensor
from coop_forecaster.Utils.errors import ContractError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / (1 << 53)


class Rng:
    def __init__(self, seed: int) -> None:
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * MIX_1) & MASK64
        z = ((z ^ (z >> 27)) * MIX_2) & MASK64
        return z ^ (z >> 31)

    def u64_array(self, count: int) -> np.ndarray:
        steps = np.arange(1, count + 1, dtype=np.uint64)
        z = np.uint64(self.state) + steps * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_2)
        z = z ^ (z >> np.uint64(31))
        self.state = (self.state + count * GOLDEN_GAMMA) & MASK64
        return z

    def random(self, size: int | Sequence[int] | None = None):
        """Uniform floats in [0, 1)."""
        if size is None:
            return (self.next_u64() >> 11) * INV_2_53
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape)) if shape else 1
        values = (self.u64_array(count) >> np.uint64(11)).astype(np.float64) * INV_2_53
        return values.reshape(shape)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return low + (high - low) * self.random(size)

    def normal(self, size=None):
        """Box-Muller with the cosine branch only (two uniforms per draw)."""
        u1 = 1.0 - self.random(size)
        u2 = self.random(size)
        if size is None:
            return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def integers(self, upper: int) -> int:
        """Integer in [0, upper)."""
        if upper <= 0:
            raise ValueError("upper must be positive")
        return self.next_u64() % upper

    def permutation(self, count: int) -> list[int]:
        order = list(range(count))
        for i in range(count - 1, 0, -1):
            j = self.integers(i + 1)
            order[i], order[j] = order[j], order[i]
        return order

    def choice(self, weights: Sequence[float]) -> int:
        total = float(sum(weights))
        pick = self.random() * total
        running = 0.0
        for index, weight in enumerate(weights):
            running += weight
            if pick < running:
                return index
        return max(i for i, w in enumerate(weights) if w > 0)

    def split(self, count: int) -> list['Rng']:
        return [Rng(self.next_u64()) for _ in range(count)]


class ParamStore(Mapping[str, Tensor]):
    """Named learnable tensors; iteration is lexicographic by name."""

    def __init__(self, rng_seed: int = 0) -> None:
        self.rng_seed = rng_seed
        self._rng = Rng(rng_seed)
        self._entries: dict[str, Tensor] = {}

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, name: str, values: np.ndarray) -> Tensor:
        if name in self._entries:
            raise ContractError(f"duplicate parameter name: {name}")
        tensor = Tensor(values, requires_grad=True, name=name)
        self._entries[name] = tensor
        return tensor

    def glorot(self, name: str, fan_in: int, fan_out: int) -> Tensor:
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, self._rng.uniform(-bound, bound, (fan_in, fan_out)))

    def zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self.add(name, np.zeros(shape))

    def ones(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self.add(name, np.ones(shape))

    def linear(self, prefix: str, n_in: int, n_out: int) -> None:
        self.glorot(f"{prefix}.weight", n_in, n_out)
        self.zeros(f"{prefix}.bias", (n_out,))

    def scope(self, prefix: str) -> 'ParamScope':
        return ParamScope(self, prefix)

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self._entries.values())

    def copy(self) -> 'ParamStore':
        clone = ParamStore(self.rng_seed)
        for name in self:
            clone.add(name, self._entries[name].data.copy())
        return clone

    def assign(self, name: str, values: np.ndarray) -> None:
        self._entries[name].data = np.array(values, dtype=np.float64)

    def state(self) -> dict[str, np.ndarray]:
        return {name: self._entries[name].data.copy() for name in self}


class ParamScope:
    """Prefixed view on a ParamStore, used both to declare and to look up weights."""

    def __init__(self, store: ParamStore, prefix: str) -> None:
        self.store = store
        self.prefix = prefix

    def _full(self, name: str) -> str:
        return f"{self.prefix}.{name}" if self.prefix else name

    def __getitem__(self, name: str) -> Tensor:
        return self.store[self._full(name)]

    def __contains__(self, name: str) -> bool:
        return self._full(name) in self.store

    def scope(self, name: str) -> 'ParamScope':
        return ParamScope(self.store, self._full(name))

    def glorot(self, name: str, fan_in: int, fan_out: int) -> Tensor:
        return self.store.glorot(self._full(name), fan_in, fan_out)

    def zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self.store.zeros(self._full(name), shape)

    def ones(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self.store.ones(self._full(name), shape)

    def linear(self, name: str, n_in: int, n_out: int) -> None:
        self.store.linear(self._full(name), n_in, n_out)
