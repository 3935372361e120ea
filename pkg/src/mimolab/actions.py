"""Componentized action space: prioritizer x allocator x precoder triples.

The per-TTI action is a triple (c1, c2, c3): a UE prioritizer (4 options),
an antenna allocator (9 options: FSO plus MinG/PF at four reserve ratios),
and a hybrid precoder (3 options), 108 combinations total. The agent works
in a continuous cube [-1, 1]^3; `embed` maps a continuous point to its
discrete triple by equal-width binning per dimension.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Prioritizer(Enum):
    CQI = "CQI"
    DELAY = "Delay"
    REMAIN = "Remain"
    FIFO = "FIFO"


@dataclass(frozen=True)
class AllocMethod:
    kind: str  # "FSO" | "MinG" | "PF"
    iota: float | None = None

    @property
    def label(self) -> str:
        if self.iota is None:
            return self.kind
        return f"{self.kind}{int(round(self.iota * 100))}"


class PrecoderKind(Enum):
    AS = "AS"
    CE = "CE"
    ACE = "ACE"


C1_OPTIONS = [Prioritizer.CQI, Prioritizer.DELAY, Prioritizer.REMAIN, Prioritizer.FIFO]
C2_OPTIONS = [
    AllocMethod("FSO"),
    AllocMethod("MinG", 0.25),
    AllocMethod("MinG", 0.50),
    AllocMethod("MinG", 0.75),
    AllocMethod("MinG", 1.00),
    AllocMethod("PF", 0.25),
    AllocMethod("PF", 0.50),
    AllocMethod("PF", 0.75),
    AllocMethod("PF", 1.00),
]
C3_OPTIONS = [PrecoderKind.AS, PrecoderKind.CE, PrecoderKind.ACE]

DIMS = (len(C1_OPTIONS), len(C2_OPTIONS), len(C3_OPTIONS))
N_TRIPLES = DIMS[0] * DIMS[1] * DIMS[2]
ACTION_DIM = 3

_DIMS_ARR = np.array(DIMS, dtype=float)


@dataclass(frozen=True)
class ActionTriple:
    """Discrete component choice as indices into the option lists."""

    c1: int
    c2: int
    c3: int

    def __post_init__(self):
        for i, (c, n) in enumerate(zip((self.c1, self.c2, self.c3), DIMS), start=1):
            if not 0 <= c < n:
                raise ValueError(f"c{i}={c} outside [0, {n})")

    @property
    def prioritizer(self) -> Prioritizer:
        return C1_OPTIONS[self.c1]

    @property
    def allocator(self) -> AllocMethod:
        return C2_OPTIONS[self.c2]

    @property
    def precoder(self) -> PrecoderKind:
        return C3_OPTIONS[self.c3]

    @property
    def name(self) -> str:
        return f"{self.prioritizer.value}-{self.allocator.label}-{self.precoder.value}"

    def indices(self) -> tuple[int, int, int]:
        return (self.c1, self.c2, self.c3)


ALL_TRIPLES = [
    ActionTriple(i, j, k)
    for i in range(DIMS[0])
    for j in range(DIMS[1])
    for k in range(DIMS[2])
]
_NAME_TO_TRIPLE = {t.name.lower(): t for t in ALL_TRIPLES}


def parse_triple(name: str) -> ActionTriple:
    """Resolve a static-combination name like 'CQI-MinG75-AS' to its triple."""
    key = name.strip().lower()
    if key not in _NAME_TO_TRIPLE:
        raise ValueError(
            f"unknown action triple '{name}'; expected e.g. "
            f"'{ALL_TRIPLES[0].name}' .. '{ALL_TRIPLES[-1].name}'"
        )
    return _NAME_TO_TRIPLE[key]


def embed_indices(a_cont: np.ndarray) -> np.ndarray:
    """Vectorized continuous-to-bin-index mapping, shape (..., 3) -> (..., 3).

    Each dimension of [-1, 1] is split into DIMS[i] equal-width bins; the
    upper edge belongs to the last bin. Out-of-range inputs are clipped.
    """
    a = np.clip(np.asarray(a_cont, dtype=float), -1.0, 1.0)
    idx = np.floor((a + 1.0) / 2.0 * _DIMS_ARR).astype(int)
    return np.minimum(idx, (_DIMS_ARR - 1).astype(int))


def embed(a_cont) -> ActionTriple:
    """Convert one continuous action in [-1, 1]^3 to its discrete triple."""
    a = np.asarray(a_cont, dtype=float).reshape(-1)
    if a.shape[0] != ACTION_DIM:
        raise ValueError(f"continuous action must have {ACTION_DIM} components")
    i1, i2, i3 = embed_indices(a)
    return ActionTriple(int(i1), int(i2), int(i3))


def center(triple: ActionTriple) -> np.ndarray:
    """Bin-center continuous pre-image of a discrete triple."""
    idx = np.array(triple.indices(), dtype=float)
    return -1.0 + (2.0 * idx + 1.0) / _DIMS_ARR


def centers_from_indices(idx: np.ndarray) -> np.ndarray:
    """Vectorized bin centers for an (..., 3) index array."""
    return -1.0 + (2.0 * np.asarray(idx, dtype=float) + 1.0) / _DIMS_ARR


def snap(a_cont: np.ndarray) -> np.ndarray:
    """Project continuous actions onto the center of their discrete bin."""
    return centers_from_indices(embed_indices(a_cont))
