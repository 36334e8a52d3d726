"""Real and virtual time sources.

Everything that waits or timestamps goes through a Clock so the same code
runs live (monotonic wall time) and in replay (discrete virtual time with
instant, deterministic sleeps).
"""

from __future__ import annotations

import threading
import time


class Clock:
    def now(self) -> float:
        raise NotImplementedError

    def sleep(self, seconds: float) -> None:
        raise NotImplementedError

    def sleep_until(self, deadline: float) -> None:
        remaining = deadline - self.now()
        if remaining > 0:
            self.sleep(remaining)

    # Participant hooks are only meaningful for LockstepClock; real clocks
    # let threads run unsupervised.
    def expect(self, name: str, priority: int) -> None:
        pass

    def attach(self, name: str) -> None:
        pass

    def detach(self) -> None:
        pass

    @property
    def is_virtual(self) -> bool:
        return False


class RealClock(Clock):
    """Monotonic wall clock; sleep_until spins the last stretch to keep
    periodic loops within a few hundred microseconds of their ticks."""

    SPIN_WINDOW = 0.002

    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)

    def sleep_until(self, deadline: float) -> None:
        coarse = deadline - self.SPIN_WINDOW
        now = time.monotonic()
        if coarse > now:
            time.sleep(coarse - now)
        while time.monotonic() < deadline:
            time.sleep(0)


class LockstepClock(Clock):
    """Virtual clock shared by a fixed set of cooperating threads.

    Every participant is declared with expect() before any of them starts,
    then bound to its thread with attach().  At most one participant runs
    at a time: when every live participant is parked in sleep_until, the
    waiter with the smallest (deadline, priority) wakes and the clock jumps
    to its deadline.  Work takes zero virtual time, so the interleaving is
    a pure function of the declared priorities and the requested deadlines;
    replays with the same inputs are bit-identical.

    Contract: a participant must never hold a lock another participant
    needs while it sleeps, and must detach() when its loop exits.
    """

    def __init__(self, start: float = 0.0):
        self._cv = threading.Condition()
        self._now = float(start)
        self._priority: dict[str, int] = {}
        self._attached: set[str] = set()
        self._detached: set[str] = set()
        self._waiting: dict[str, float] = {}
        self._wake: str | None = None
        self._local = threading.local()

    def expect(self, name: str, priority: int) -> None:
        with self._cv:
            if name in self._priority:
                raise ValueError(f"participant {name!r} already declared")
            self._priority[name] = int(priority)

    def attach(self, name: str) -> None:
        with self._cv:
            if name not in self._priority:
                raise ValueError(f"participant {name!r} was never declared")
            if name in self._attached:
                raise ValueError(f"participant {name!r} already attached")
            self._attached.add(name)
            self._local.name = name

    def detach(self) -> None:
        name = getattr(self._local, "name", None)
        if name is None:
            return
        with self._cv:
            self._detached.add(name)
            self._waiting.pop(name, None)
            self._local.name = None
            self._grant_if_quiescent()

    def now(self) -> float:
        with self._cv:
            return self._now

    def sleep(self, seconds: float) -> None:
        self.sleep_until(self.now() + max(0.0, float(seconds)))

    def sleep_until(self, deadline: float) -> None:
        name = getattr(self._local, "name", None)
        if name is None:
            raise RuntimeError("thread is not attached to this LockstepClock")
        with self._cv:
            # Never sleep into the past; a zero-length sleep is a pure yield.
            self._waiting[name] = max(float(deadline), self._now)
            self._grant_if_quiescent()
            while self._wake != name:
                self._cv.wait()
            self._wake = None

    def _grant_if_quiescent(self) -> None:
        # Called with the condition held.  A grant is only legal when no
        # participant is running: everyone still live is parked in _waiting.
        if self._wake is not None:
            return
        live = set(self._priority) - self._detached
        if not live or len(self._waiting) != len(live):
            return
        name = min(self._waiting, key=lambda n: (self._waiting[n], self._priority[n]))
        deadline = self._waiting.pop(name)
        if deadline > self._now:
            self._now = deadline
        self._wake = name
        self._cv.notify_all()

    @property
    def is_virtual(self) -> bool:
        return True


class VirtualClock(Clock):
    """Deterministic clock: sleeps advance time instantly."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            self._now += seconds

    def advance_to(self, t: float) -> None:
        if t > self._now:
            self._now = t

    @property
    def is_virtual(self) -> bool:
        return True
