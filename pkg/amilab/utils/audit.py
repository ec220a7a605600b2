"""Read auditing for parameter blocks.

Attack-side code runs under the ``attacker`` principal; any read of a block owned by ``victim``
while that principal is active is recorded as a violation of the black-box contract.
"""
from collections import Counter
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator

_principal: ContextVar[str] = ContextVar("amilab_principal", default="environment")

PROTECTED_OWNERS = {"attacker": {"victim"}}


class AccessAudit:
    def __init__(self) -> None:
        self.reads: Counter = Counter()
        self.violations: Counter = Counter()

    def record(self, owner: str | None, block: str) -> None:
        if owner is None:
            return
        principal = _principal.get()
        self.reads[(principal, owner)] += 1
        if owner in PROTECTED_OWNERS.get(principal, ()):
            self.violations[block] += 1

    @property
    def violation_count(self) -> int:
        return sum(self.violations.values())

    def reset(self) -> None:
        self.reads.clear()
        self.violations.clear()


audit = AccessAudit()


def current_principal() -> str:
    return _principal.get()


@contextmanager
def principal(name: str) -> Iterator[None]:
    token = _principal.set(name)
    try:
        yield
    finally:
        _principal.reset(token)
