"""Exception hierarchy shared by every module.

All errors derive from :class:`HdcovError` (itself a ``ValueError``) so callers
can catch the whole family; the CLI maps them to exit code 2.
"""

from __future__ import annotations


class HdcovError(ValueError):
    """Base class for user-facing errors."""


class NotPSD(HdcovError):
    pass


class BadDimension(HdcovError):
    pass


class InvalidReference(HdcovError):
    pass


class BadArgument(HdcovError):
    pass


class InsufficientSamples(HdcovError):
    pass


class DegenerateStatistic(HdcovError):
    """An LRT-type statistic was requested where ``S`` is singular."""


class ZeroTrace(DegenerateStatistic):
    pass


class TooLarge(HdcovError):
    pass


class BadIndex(HdcovError):
    pass


class Unsupported(HdcovError):
    pass


class RatioTooLarge(HdcovError):
    pass


class UnknownMoment(HdcovError):
    pass
