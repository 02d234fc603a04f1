"""Cell values and their exact arithmetic.

Every table cell is one of: Integer (python int, magnitude capped at 2040
bits when written to the log), Real (arbitrary-precision decimal held as
mantissa * 10**scale), Char (str), Boolean (bool), Date (datetime.date) or
Null (None).  Reals are kept exact; there is no binary floating point
anywhere in the storage or evaluation path.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from typing import Any, Optional

from .errors import EncodingError, SqlRuntimeError

# Max magnitude of a storable Integer: 255 magnitude bytes.
INTEGER_MAX_BITS = 2040

# Scale carried through inexact division before rounding.
DIV_SCALE = 12


@dataclass(frozen=True)
class Real:
    """Exact decimal: the value is mantissa * 10**scale.

    The (mantissa, scale) pair is kept as constructed so that a value cast
    to NUMERIC(p, 2) still prints with two digits; equality and ordering
    compare the numeric value, not the representation.
    """

    mantissa: int
    scale: int

    def normalized(self) -> "Real":
        m, s = self.mantissa, self.scale
        if m == 0:
            return Real(0, 0)
        while m % 10 == 0:
            m //= 10
            s += 1
        return Real(m, s)

    def _cmp(self, other) -> int:
        if isinstance(other, int):
            other = Real(other, 0)
        if not isinstance(other, Real):
            raise TypeError(f"cannot compare Real with {type(other).__name__}")
        # Align to the smaller scale and compare mantissas.
        s = min(self.scale, other.scale)
        a = self.mantissa * 10 ** (self.scale - s)
        b = other.mantissa * 10 ** (other.scale - s)
        return (a > b) - (a < b)

    def __eq__(self, other):
        if isinstance(other, (int, Real)) and not isinstance(other, bool):
            return self._cmp(other) == 0
        return NotImplemented

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __hash__(self):
        n = self.normalized()
        if n.scale == 0:
            return hash(n.mantissa)  # matches int hash for whole values
        return hash((n.mantissa, n.scale))

    def __str__(self):
        m, s = self.mantissa, self.scale
        sign = "-" if m < 0 else ""
        digits = str(abs(m))
        if s >= 0:
            return sign + digits + "0" * s
        if len(digits) <= -s:
            digits = "0" * (-s - len(digits) + 1) + digits
        return sign + digits[:s] + "." + digits[s:]

    def __repr__(self):
        return f"Real({self.mantissa}, {self.scale})"

    @classmethod
    def from_string(cls, text: str) -> "Real":
        text = text.strip()
        neg = text.startswith("-")
        if text and text[0] in "+-":
            text = text[1:]
        if "." in text:
            whole, frac = text.split(".", 1)
        else:
            whole, frac = text, ""
        if not (whole + frac).isdigit() or not (whole or frac):
            raise SqlRuntimeError(f"bad numeric literal: {text!r}")
        mant = int((whole or "0") + frac) if (whole + frac) else 0
        val = cls(-mant if neg else mant, -len(frac))
        return val


def round_div(num: int, den: int) -> int:
    """Integer division rounding half away from zero."""
    if den == 0:
        raise SqlRuntimeError("division by zero")
    q, r = divmod(abs(num), abs(den))
    if 2 * r >= abs(den):
        q += 1
    return q if (num >= 0) == (den > 0) else -q


def _as_real(v) -> Real:
    if isinstance(v, Real):
        return v
    if isinstance(v, int) and not isinstance(v, bool):
        return Real(v, 0)
    raise SqlRuntimeError(f"not a number: {v!r}")


def num_add(a, b):
    if isinstance(a, int) and isinstance(b, int):
        return a + b
    ra, rb = _as_real(a), _as_real(b)
    s = min(ra.scale, rb.scale)
    return Real(ra.mantissa * 10 ** (ra.scale - s) + rb.mantissa * 10 ** (rb.scale - s), s)


def num_sub(a, b):
    if isinstance(a, int) and isinstance(b, int):
        return a - b
    ra, rb = _as_real(a), _as_real(b)
    s = min(ra.scale, rb.scale)
    return Real(ra.mantissa * 10 ** (ra.scale - s) - rb.mantissa * 10 ** (rb.scale - s), s)


def num_mul(a, b):
    if isinstance(a, int) and isinstance(b, int):
        return a * b
    ra, rb = _as_real(a), _as_real(b)
    return Real(ra.mantissa * rb.mantissa, ra.scale + rb.scale)


def num_div(a, b):
    """Exact where possible, else rounded half-away at DIV_SCALE digits."""
    ra, rb = _as_real(a), _as_real(b)
    if rb.mantissa == 0:
        raise SqlRuntimeError("division by zero")
    # mantissa for result scale -DIV_SCALE: ra/rb * 10**DIV_SCALE
    shift = ra.scale - rb.scale + DIV_SCALE
    if shift >= 0:
        m = round_div(ra.mantissa * 10 ** shift, rb.mantissa)
    else:
        m = round_div(ra.mantissa, rb.mantissa * 10 ** (-shift))
    return Real(m, -DIV_SCALE)


def real_round(v, scale: int) -> Real:
    """Round a number to the given decimal scale, half away from zero."""
    r = _as_real(v)
    if -r.scale <= scale:
        return Real(r.mantissa * 10 ** (r.scale + scale), -scale)
    return Real(round_div(r.mantissa, 10 ** (-r.scale - scale)), -scale)


def check_integer_bound(v: int):
    if abs(v).bit_length() > INTEGER_MAX_BITS:
        raise EncodingError(f"integer exceeds {INTEGER_MAX_BITS} bits")


# ---------------------------------------------------------------------------
# Comparison across cell values (SQL semantics: None is unknown)

_NUMBER = (int, Real)


def kind_class(v) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, _NUMBER):
        return "number"
    if isinstance(v, str):
        return "text"
    if isinstance(v, datetime.date):
        return "date"
    if isinstance(v, tuple):
        return "tuple"
    raise TypeError(f"unorderable value: {v!r}")


def compare(a, b) -> int:
    """Total order within one kind class; mixing classes is an error.

    Returns -1/0/1.  Neither argument may be None; three-valued NULL
    handling lives in the expression evaluator.
    """
    ka, kb = kind_class(a), kind_class(b)
    if ka != kb:
        raise TypeError(f"cannot compare {ka} with {kb}")
    if ka == "tuple":
        for x, y in zip(a, b):
            c = compare(x, y)
            if c:
                return c
        return (len(a) > len(b)) - (len(a) < len(b))
    if ka == "number" and (isinstance(a, Real) or isinstance(b, Real)):
        return _as_real(a)._cmp(b)
    return (a > b) - (a < b)


def cells_equal(a, b) -> bool:
    """Structural equality treating None as equal to None (for replay diffs)."""
    if a is None or b is None:
        return a is None and b is None
    try:
        return compare(a, b) == 0
    except TypeError:
        return False


def format_cell(v, scale: Optional[int] = None) -> str:
    """Render a cell for the CLI / text output."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Real):
        if scale is not None:
            v = real_round(v, scale)
        return str(v)
    if isinstance(v, datetime.date):
        return v.isoformat()
    return str(v)


def json_ready(v) -> Any:
    """Map a cell to a JSON-safe value.

    Integers beyond 53 bits and all Reals travel as strings so nothing is
    squeezed through binary floating point.
    """
    if v is None or isinstance(v, bool) or isinstance(v, str):
        return v
    if isinstance(v, int):
        return v if abs(v) < (1 << 53) else str(v)
    if isinstance(v, Real):
        return str(v)
    if isinstance(v, datetime.date):
        return v.isoformat()
    raise SqlRuntimeError(f"value not JSON-mappable: {v!r}")
