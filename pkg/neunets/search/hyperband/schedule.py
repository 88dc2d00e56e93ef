from __future__ import annotations

from dataclasses import dataclass

from neunets.errors import NeunetsError


class ScheduleError(NeunetsError):
    pass


@dataclass
class Rung:
    n: int
    # resource per configuration, in epochs
    r: float

    @property
    def epochs(self) -> int:
        return max(1, int(round(self.r)))


@dataclass
class Bracket:
    s: int
    rungs: list[Rung]

    @property
    def n(self) -> int:
        return self.rungs[0].n

    @property
    def resource(self) -> float:
        """Epochs spent on the bracket when every rung trains its survivors from scratch"""
        return sum(rung.n * rung.r for rung in self.rungs)


@dataclass
class HyperbandSchedule:
    max_resource: int
    eta: int
    s_max: int
    # most exploratory bracket first
    brackets: list[Bracket]


def max_bracket(max_resource: int, eta: int) -> int:
    """floor(log_eta(R)) without floating point"""
    s = 0
    while eta ** (s + 1) <= max_resource:
        s += 1
    return s


def build_schedule(max_resource: int, eta: int = 3) -> HyperbandSchedule:
    """
    :raises ScheduleError: unless R >= 1 and eta >= 2
    """
    if isinstance(max_resource, bool) or not isinstance(max_resource, int) or max_resource < 1:
        raise ScheduleError(f"Maximum resource must be an integer >= 1, got {max_resource!r}")
    if isinstance(eta, bool) or not isinstance(eta, int) or eta < 2:
        raise ScheduleError(f"Halving factor must be an integer >= 2, got {eta!r}")
    s_max = max_bracket(max_resource, eta)
    brackets = []
    for s in range(s_max, -1, -1):
        n = -(-(s_max + 1) * eta**s // (s + 1))
        rungs = [Rung(n=n // eta**i, r=max_resource * float(eta) ** (i - s)) for i in range(s + 1)]
        brackets.append(Bracket(s=s, rungs=rungs))
    return HyperbandSchedule(max_resource=max_resource, eta=eta, s_max=s_max, brackets=brackets)
