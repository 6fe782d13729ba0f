from dataclasses import dataclass
from typing import Dict, Iterator, Sequence, Tuple

import numpy as np

from ..errors import ShapeError


@dataclass
class Parameter:
    """
    A learned tensor and its accumulated gradient.

    :param value: Current parameter value (float64).
    :param grad: Gradient accumulated since the last :meth:`ParamStore.zero_grad`.
    """

    value: np.ndarray
    grad: np.ndarray


class ParamStore:
    """
    Ordered collection of named parameters.

    Iteration follows insertion order, which keeps checkpoints and optimizer
    updates deterministic.
    """

    def __init__(self):
        self._entries: Dict[str, Parameter] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        """
        Registers a new parameter with a zero gradient.

        :param name: Unique parameter name, e.g. ``"backbone.conv0.weight"``.
        :param value: Initial value; copied to float64.
        :return: The stored value array.
        :raises ValueError: If the name is already registered.
        """
        if name in self._entries:
            raise ValueError(f"Parameter {name!r} is already registered")
        value = np.array(value, dtype=np.float64)
        self._entries[name] = Parameter(value, np.zeros_like(value))
        return value

    def __getitem__(self, name: str) -> np.ndarray:
        return self._entries[name].value

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> Sequence[str]:
        return list(self._entries)

    def items(self) -> Iterator[Tuple[str, Parameter]]:
        return iter(self._entries.items())

    def grad(self, name: str) -> np.ndarray:
        return self._entries[name].grad

    def set_value(self, name: str, value: np.ndarray) -> None:
        entry = self._entries[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != entry.value.shape:
            raise ShapeError(
                f"Parameter {name!r} has shape {entry.value.shape}, got value of shape {value.shape}"
            )
        entry.value[...] = value

    def accumulate(self, name: str, grad: np.ndarray, scale: float = 1.0) -> None:
        """
        Adds ``scale * grad`` to the gradient of ``name``.

        :raises ShapeError: If the gradient shape differs from the parameter shape.
        """
        entry = self._entries[name]
        if grad.shape != entry.grad.shape:
            raise ShapeError(
                f"Gradient for {name!r} has shape {grad.shape}, parameter has shape {entry.grad.shape}"
            )
        if scale == 1.0:
            entry.grad += grad
        else:
            entry.grad += scale * grad

    def zero_grad(self) -> None:
        for entry in self._entries.values():
            entry.grad[...] = 0.0

    def copy(self) -> "ParamStore":
        clone = ParamStore()
        for name, entry in self._entries.items():
            clone._entries[name] = Parameter(entry.value.copy(), entry.grad.copy())
        return clone

    def num_values(self) -> int:
        return sum(entry.value.size for entry in self._entries.values())


def glorot_uniform(shape: Tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """
    Uniform initialization in ``+-sqrt(6 / (fan_in + fan_out))``.

    For convolution kernels ``(Cout, C, k, k)`` the receptive field ``k * k``
    multiplies both fans.
    """
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    fan_out, fan_in = shape[0] * receptive, shape[1] * receptive
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
