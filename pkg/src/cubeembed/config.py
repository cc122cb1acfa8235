"""Resource caps shared by the search and construction routines."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Caps:
    # largest n for which a 2^n membership array is materialized
    dense_limit: int = 28
    # budget for enumerations (forms, search nodes, pair tuples)
    enumeration_cap: int = 50_000_000
    # multiply-accumulate budget for the Gram-matrix pair search
    gram_cap: int = 2**37
    # pair samples used when the exact pair search is over budget
    sample_budget: int = 1_000_000

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_CAPS = Caps()


class CapExceeded(RuntimeError):
    """Raised when a requested enumeration is larger than the configured cap."""

    def __init__(self, what: str, predicted: int, cap: int):
        super().__init__(f"{what}: predicted size {predicted} exceeds cap {cap} (use force=True)")
        self.what = what
        self.predicted = predicted
        self.cap = cap


class RepresentationTooLarge(ValueError):
    """A dense 2^n array was required but n is over the dense limit."""
