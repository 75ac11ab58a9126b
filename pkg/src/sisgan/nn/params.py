"""Named-tensor parameter container with freeze semantics."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from ..errors import FrozenStore, InvariantViolation, ShapeMismatch


class ParameterStore:
    """Ordered map of name -> float64 tensor.

    Holds trainable parameters and persistent buffers (batch-norm running
    statistics) side by side; the optimizer only touches names it receives
    gradients for. Once frozen, every tensor is read-only and optimizer
    steps are rejected, while forward/backward passes remain available.
    """

    def __init__(self) -> None:
        self._tensors: dict[str, np.ndarray] = {}
        self._frozen = False

    @property
    def frozen(self) -> bool:
        return self._frozen

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if self._frozen:
            raise FrozenStore(f"cannot add {name!r} to a frozen store")
        if name in self._tensors:
            raise InvariantViolation(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=np.float64, copy=True, order="C")
        self._tensors[name] = arr
        return arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._tensors.items())

    def n_parameters(self) -> int:
        return sum(int(t.size) for t in self._tensors.values())

    def copy(self) -> "ParameterStore":
        """Deep, unfrozen copy."""
        out = ParameterStore()
        for name, tensor in self._tensors.items():
            out.add(name, tensor)
        return out

    def equals(self, other: "ParameterStore") -> bool:
        if self.names() != other.names():
            return False
        return all(np.array_equal(self._tensors[n], other[n]) for n in self._tensors)

    def _mark_frozen(self) -> None:
        for tensor in self._tensors.values():
            tensor.setflags(write=False)
        self._frozen = True


def freeze(store: ParameterStore) -> ParameterStore:
    """Mark a store frozen: tensors become read-only, optimizer steps fail.

    Gradients may still flow *through* a network bound to a frozen store.
    Idempotent.
    """
    if not store.frozen:
        store._mark_frozen()
    return store


def restore_parameters(target: ParameterStore, source: ParameterStore) -> None:
    """Copy tensor values from ``source`` into ``target``, in place.

    Both stores must hold exactly the same names with identical shapes;
    otherwise ShapeMismatch names the offending tensor.
    """
    if target.frozen:
        raise FrozenStore("cannot restore into a frozen store")
    t_names, s_names = set(target.names()), set(source.names())
    if t_names != s_names:
        odd = sorted(t_names.symmetric_difference(s_names))[0]
        raise ShapeMismatch(f"tensor {odd!r} present in only one store")
    for name, tensor in target.items():
        src = source[name]
        if src.shape != tensor.shape:
            raise ShapeMismatch(
                f"tensor {name!r}: expected shape {tensor.shape}, got {src.shape}"
            )
        np.copyto(tensor, src)
