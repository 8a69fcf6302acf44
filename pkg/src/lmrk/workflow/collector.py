"""Generation barrier: gathers evaluated offspring until a generation is complete."""
from __future__ import annotations

import threading

from ..core import Candidate


class StaleGeneration(RuntimeError):
    pass


class Collector:
    """Accepts submissions for the open generation only.

    ``submit`` never blocks.  ``poll`` returns the full generation (sorted by
    id, so the result does not depend on arrival order) once the expected
    count has arrived; ``await_generation`` blocks for it.  Collecting a
    generation closes it, and later submissions for it raise StaleGeneration.
    """

    def __init__(self):
        self._cond = threading.Condition()
        self.generation = -1
        self.expected = 0
        self._received: list[Candidate] = []
        self._closed = True

    def open(self, generation: int, expected: int) -> None:
        with self._cond:
            if generation <= self.generation:
                raise StaleGeneration(f"generation {generation} is not after {self.generation}")
            if not self._closed:
                raise RuntimeError(f"generation {self.generation} is still open")
            self.generation, self.expected = generation, expected
            self._received = []
            self._closed = False

    def submit(self, generation: int, candidate: Candidate) -> None:
        with self._cond:
            if generation != self.generation or self._closed:
                raise StaleGeneration(
                    f"submission for generation {generation}; open generation is "
                    f"{self.generation if not self._closed else 'none'}")
            if len(self._received) >= self.expected:
                raise RuntimeError(f"generation {generation} already has {self.expected} offspring")
            self._received.append(candidate)
            self._cond.notify_all()

    @property
    def received(self) -> int:
        return len(self._received)

    def _take(self) -> list[Candidate]:
        self._closed = True
        return sorted(self._received, key=lambda c: c.id)

    def poll(self, generation: int) -> list[Candidate] | None:
        with self._cond:
            if generation != self.generation or self._closed:
                raise StaleGeneration(f"generation {generation} is not open")
            if len(self._received) < self.expected:
                return None
            return self._take()

    def await_generation(self, generation: int, timeout: float | None = None) -> list[Candidate]:
        with self._cond:
            if generation != self.generation or self._closed:
                raise StaleGeneration(f"generation {generation} is not open")
            if not self._cond.wait_for(lambda: len(self._received) >= self.expected, timeout):
                raise TimeoutError(f"generation {generation}: {len(self._received)}/{self.expected}")
            return self._take()
