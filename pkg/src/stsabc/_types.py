class Score(float):
    """A float similarity that remembers whether it came from a fallback path.

    ``degenerate`` is set when the value is a defined fallback (no in-vocabulary
    tokens, zero vector, no mapped word pair) rather than a measured similarity.
    """

    __slots__ = ("degenerate",)

    def __new__(cls, value, degenerate=False):
        obj = super().__new__(cls, value)
        obj.degenerate = bool(degenerate)
        return obj

    def __repr__(self):
        flag = ", degenerate" if self.degenerate else ""
        return f"Score({float(self)!r}{flag})"

    def __reduce__(self):
        return (Score, (float(self), self.degenerate))


def is_degenerate(value) -> bool:
    return bool(getattr(value, "degenerate", False))
