"""
Counters and timestamps
"""
from .base import Structure


class CounterState(Structure):
    """A `width`-bit counter; every write wraps modulo 2^width."""

    @property
    def value(self):
        return self.get(0)

    def set(self, value):
        self.put(0, value)

    def query(self, method, args=()):
        return self.value


class TimestampState(CounterState):
    """Nanosecond clock reading; 0 means unset."""

    def stamp(self, now_ns):
        self.set(now_ns)


def counter_set(counter, value):
    counter.set(value)
