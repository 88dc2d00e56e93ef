import math
import threading
from typing import Optional


class BudgetLedger:
    """Wall-clock seconds charged by training jobs against an optional cap

    The only object training workers share; every access holds the lock.
    """

    def __init__(self, cap_seconds: Optional[float] = None, consumed: float = 0.0):
        self.cap_seconds = math.inf if cap_seconds is None else cap_seconds
        self._consumed = consumed
        self._lock = threading.Lock()

    def charge(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError(f"Cannot charge negative time {seconds}")
        with self._lock:
            self._consumed += seconds

    def charge_within_cap(self, seconds: float) -> float:
        """Charges `seconds` but never past the cap; returns the amount charged"""
        if seconds < 0:
            raise ValueError(f"Cannot charge negative time {seconds}")
        with self._lock:
            charged = min(seconds, max(self.cap_seconds - self._consumed, 0.0))
            self._consumed += charged
        return charged

    @property
    def consumed(self) -> float:
        with self._lock:
            return self._consumed

    @property
    def remaining(self) -> float:
        return max(self.cap_seconds - self.consumed, 0.0)

    @property
    def exhausted(self) -> bool:
        return self.consumed >= self.cap_seconds
