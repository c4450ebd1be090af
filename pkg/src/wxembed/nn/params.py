"""Named, ordered parameter tensors with a content fingerprint."""

from __future__ import annotations

import hashlib

import numpy as np


class ParamError(ValueError):
    pass


class ParamSet:
    """Ordered mapping name -> ndarray for one model role.

    The fingerprint is a 64-bit content hash over names, shapes, dtypes and
    raw bytes; it changes iff any tensor byte (or the structure) changes.
    Freezing flips every array to read-only, so an accidental in-place write
    during downstream training raises instead of silently corrupting phi.
    """

    def __init__(self, role: str, tensors: dict[str, np.ndarray] | None = None):
        self.role = role
        self._tensors: dict[str, np.ndarray] = {}
        if tensors:
            for name, arr in tensors.items():
                self.add(name, arr)

    def add(self, name: str, arr: np.ndarray) -> None:
        if name in self._tensors:
            raise ParamError(f"duplicate parameter name {name!r}")
        self._tensors[name] = np.ascontiguousarray(arr)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __setitem__(self, name: str, arr: np.ndarray) -> None:
        if name not in self._tensors:
            raise ParamError(f"unknown parameter {name!r}")
        old = self._tensors[name]
        if arr.shape != old.shape or arr.dtype != old.dtype:
            raise ParamError(f"shape/dtype change for {name!r}")
        self._tensors[name] = np.ascontiguousarray(arr)

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    @property
    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def n_elements(self) -> int:
        return sum(int(a.size) for a in self._tensors.values())

    def fingerprint(self) -> int:
        h = hashlib.blake2b(digest_size=8)
        for name, arr in self._tensors.items():
            h.update(name.encode())
            h.update(str(arr.dtype).encode())
            h.update(repr(arr.shape).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return int.from_bytes(h.digest(), "little")

    def freeze(self) -> "ParamSet":
        for arr in self._tensors.values():
            arr.flags.writeable = False
        return self

    def copy(self) -> "ParamSet":
        return ParamSet(self.role, {n: a.copy() for n, a in self._tensors.items()})

    def astype(self, dtype) -> "ParamSet":
        return ParamSet(self.role, {n: a.astype(dtype) for n, a in self._tensors.items()})

    def subset(self, prefix: str, role: str | None = None) -> "ParamSet":
        """New ParamSet of every tensor under `prefix/`, prefix stripped."""
        cut = len(prefix) + 1
        sub = {n[cut:]: a for n, a in self._tensors.items() if n.startswith(prefix + "/")}
        if not sub:
            raise ParamError(f"no parameters under prefix {prefix!r}")
        return ParamSet(role or self.role, sub)

    def equal_bytes(self, other: "ParamSet") -> bool:
        if self.names != other.names:
            return False
        return all(a.dtype == other._tensors[n].dtype
                   and a.shape == other._tensors[n].shape
                   and a.tobytes() == other._tensors[n].tobytes()
                   for n, a in self._tensors.items())
