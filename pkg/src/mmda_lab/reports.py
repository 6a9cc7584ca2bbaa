"""Constraint-check records shared by the LP and hierarchy verifiers."""

from __future__ import annotations

from dataclasses import dataclass, field

from .scalars import (EQ, GT, LT, UNDECIDED, PrecisionCapExceeded, Scalar,
                      as_scalar, compare_certified, scalar_to_json)


@dataclass(frozen=True)
class ConstraintCheck:
    constraint_id: str
    kind: str                  # "covering" | "packing" | "bounds" | "equality"
    lhs: Scalar
    rhs: Scalar
    satisfied: bool | None     # None when undecided
    certified: bool
    factor: Scalar | None = None

    def to_json(self) -> dict:
        out = {
            "constraint_id": self.constraint_id,
            "kind": self.kind,
            "lhs": scalar_to_json(self.lhs),
            "rhs": scalar_to_json(self.rhs),
            "satisfied": self.satisfied,
            "certified": self.certified,
        }
        if self.factor is not None:
            out["factor"] = scalar_to_json(self.factor)
        return out


@dataclass
class ViolationReport:
    checks: list[ConstraintCheck] = field(default_factory=list)

    def add(self, check: ConstraintCheck):
        self.checks.append(check)

    @property
    def violations(self) -> list[ConstraintCheck]:
        return [c for c in self.checks if c.satisfied is False]

    @property
    def undecided(self) -> list[ConstraintCheck]:
        return [c for c in self.checks if c.satisfied is None]

    @property
    def ok(self) -> bool:
        return not self.violations and not self.undecided

    def merge(self, other: "ViolationReport") -> "ViolationReport":
        self.checks.extend(other.checks)
        return self

    def summary(self) -> dict:
        return {
            "checks": len(self.checks),
            "violations": len(self.violations),
            "undecided": len(self.undecided),
        }

    def to_json(self) -> dict:
        return {"summary": self.summary(),
                "checks": [c.to_json() for c in self.checks]}


def _safe_div(lhs: Scalar, rhs: Scalar) -> Scalar | None:
    from .scalars import Interval, Monomial, Rat, iv_div
    if isinstance(lhs, Rat) and isinstance(rhs, Rat) and rhs.value != 0:
        return Rat(lhs.value / rhs.value)
    if isinstance(lhs, Monomial) and isinstance(rhs, Monomial):
        return lhs.div(rhs)
    try:
        return iv_div(lhs.to_interval(), rhs.to_interval())
    except (ZeroDivisionError, ValueError):
        return None


def check_ge(cid: str, lhs, rhs, kind: str = "covering") -> ConstraintCheck:
    """Record lhs >= rhs with a certified comparison."""
    lhs, rhs = as_scalar(lhs), as_scalar(rhs)
    try:
        cmp = compare_certified(lhs, rhs)
    except PrecisionCapExceeded:
        cmp = UNDECIDED
    sat = None if cmp == UNDECIDED else cmp in (GT, EQ)
    return ConstraintCheck(cid, kind, lhs, rhs, sat, cmp != UNDECIDED,
                           _safe_div(lhs, rhs))


def check_le(cid: str, lhs, rhs, kind: str = "packing") -> ConstraintCheck:
    lhs, rhs = as_scalar(lhs), as_scalar(rhs)
    try:
        cmp = compare_certified(lhs, rhs)
    except PrecisionCapExceeded:
        cmp = UNDECIDED
    sat = None if cmp == UNDECIDED else cmp in (LT, EQ)
    return ConstraintCheck(cid, kind, lhs, rhs, sat, cmp != UNDECIDED,
                           _safe_div(lhs, rhs))


def check_eq(cid: str, lhs, rhs, kind: str = "equality") -> ConstraintCheck:
    lhs, rhs = as_scalar(lhs), as_scalar(rhs)
    try:
        cmp = compare_certified(lhs, rhs)
    except PrecisionCapExceeded:
        cmp = UNDECIDED
    sat = None if cmp == UNDECIDED else cmp == EQ
    return ConstraintCheck(cid, kind, lhs, rhs, sat, cmp != UNDECIDED,
                           _safe_div(lhs, rhs))


def vacuous(cid: str, kind: str, lhs, rhs) -> ConstraintCheck:
    """A constraint satisfied because its right side is zero."""
    return ConstraintCheck(cid, kind, as_scalar(lhs), as_scalar(rhs), True, True, None)
