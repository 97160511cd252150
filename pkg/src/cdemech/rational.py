"""Exact rational helpers and their JSON encoding ``{"num": int, "den": int}``."""

from fractions import Fraction

from .errors import InputError


def frac(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not accepted in exact accounting")
    return Fraction(x)


def to_json(x):
    x = frac(x)
    return {"num": x.numerator, "den": x.denominator}


def from_json(obj):
    if isinstance(obj, bool):
        raise InputError(f"not a rational: {obj!r}")
    if isinstance(obj, int):
        return Fraction(obj)
    if not isinstance(obj, dict) or set(obj) != {"num", "den"}:
        raise InputError(f"rational must be {{'num','den'}}, got {obj!r}")
    num, den = obj["num"], obj["den"]
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in (num, den)) or den == 0:
        raise InputError(f"bad rational {obj!r}")
    return Fraction(num, den)


def fmt(x):
    x = frac(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
