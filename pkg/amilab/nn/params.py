import hashlib
from collections import OrderedDict
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

import numpy as np

from ..exceptions import ConfigurationError, NumericError
from ..utils.audit import audit


class ParameterSet:
    """Ordered, uniquely named float64 blocks.

    `owner` tags the set for the access audit (e.g. "victim"); reads through `__getitem__` are
    recorded against the active principal.
    """

    def __init__(self, blocks: Optional[Mapping[str, np.ndarray]] = None, owner: Optional[str] = None):
        self._blocks: "OrderedDict[str, np.ndarray]" = OrderedDict()
        self.owner = owner
        self._frozen = False
        for name, values in (blocks or {}).items():
            self.add(name, values)

    def add(self, name: str, values: np.ndarray) -> None:
        if self._frozen:
            raise ConfigurationError(f"Cannot add block '{name}' to a frozen parameter set")
        if name in self._blocks:
            raise ConfigurationError(f"Duplicate parameter block '{name}'")
        arr = np.array(values, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(arr)):
            raise NumericError("Non-finite parameter values", block=name)
        self._blocks[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        audit.record(self.owner, name)
        try:
            return self._blocks[name]
        except KeyError:
            raise ConfigurationError(f"Missing parameter block '{name}'") from None

    def __setitem__(self, name: str, values: np.ndarray) -> None:
        if self._frozen:
            raise ConfigurationError(f"Parameter set is frozen; cannot write '{name}'")
        if name not in self._blocks:
            raise ConfigurationError(f"Unknown parameter block '{name}'")
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != self._blocks[name].shape:
            raise ConfigurationError(
                f"Shape mismatch for '{name}': {arr.shape} vs {self._blocks[name].shape}"
            )
        self._blocks[name] = arr.copy()

    def __contains__(self, name: str) -> bool:
        return name in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def __iter__(self) -> Iterator[str]:
        return iter(self._blocks)

    def names(self) -> list[str]:
        return list(self._blocks)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: arr.shape for name, arr in self._blocks.items()}

    def items(self) -> Iterable[Tuple[str, np.ndarray]]:
        for name in self._blocks:
            yield name, self[name]

    @property
    def total_size(self) -> int:
        return int(sum(arr.size for arr in self._blocks.values()))

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "ParameterSet":
        for arr in self._blocks.values():
            arr.flags.writeable = False
        self._frozen = True
        return self

    def copy(self, owner: Optional[str] = None) -> "ParameterSet":
        return ParameterSet(
            OrderedDict((k, v.copy()) for k, v in self._blocks.items()),
            owner=self.owner if owner is None else owner,
        )

    def zeros_like(self) -> "ParameterSet":
        return ParameterSet(OrderedDict((k, np.zeros_like(v)) for k, v in self._blocks.items()))

    def same_layout(self, other: "ParameterSet") -> bool:
        return self.shapes() == other.shapes() and self.names() == other.names()

    def flatten(self) -> np.ndarray:
        if not self._blocks:
            return np.zeros(0)
        return np.concatenate([arr.ravel() for arr in self._blocks.values()])

    def assign_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.total_size:
            raise ConfigurationError(f"Flat vector has {flat.size} values, expected {self.total_size}")
        offset = 0
        for name, arr in list(self._blocks.items()):
            self[name] = flat[offset:offset + arr.size].reshape(arr.shape)
            offset += arr.size

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(arr * arr)) for arr in self._blocks.values())))

    def scaled(self, factor: float) -> "ParameterSet":
        return ParameterSet(OrderedDict((k, v * factor) for k, v in self._blocks.items()), owner=self.owner)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name, arr in self._blocks.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()

    def check_finite(self, what: str = "values") -> None:
        for name, arr in self._blocks.items():
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"Non-finite {what}", block=name)

    def subset(self, prefix: str) -> "ParameterSet":
        return ParameterSet(
            OrderedDict((k, v) for k, v in self._blocks.items() if k.startswith(prefix)), owner=self.owner
        )

    def raw_blocks(self) -> "OrderedDict[str, np.ndarray]":
        """Unaudited view for persistence and optimizer plumbing."""
        return self._blocks

    @staticmethod
    def merge(*sets: "ParameterSet") -> "ParameterSet":
        merged = ParameterSet()
        for ps in sets:
            for name, arr in ps.raw_blocks().items():
                merged.add(name, arr)
        return merged
