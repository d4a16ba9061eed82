"""Certification reports: named checks with computed value, bound and oracle."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any


def _num(x):
    if x is None:
        return None
    if isinstance(x, bool):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _unnum(x):
    if isinstance(x, str):
        return float(x)
    return x


@dataclass
class Check:
    """One verified claim.

    ``relation`` is how computed is compared with bound: 'le', 'ge' or 'eq'
    (for 'eq' the bound is the target value).  When an oracle value is
    present, ``oracle_relation`` says how computed must relate to it:
    'eq' within oracle_tol, 'le' (computed <= oracle + oracle_tol) or 'ge'.
    """

    name: str
    condition: str
    computed: float
    bound: float | None = None
    relation: str = "le"
    tol: float = 0.0
    oracle: float | None = None
    oracle_relation: str = "eq"
    oracle_tol: float = 0.0
    oracle_relative: bool = False

    def _compare(self, rel, a, b, tol):
        if rel == "le":
            return a <= b + tol
        if rel == "ge":
            return a >= b - tol
        if rel == "eq":
            return abs(a - b) <= tol
        raise ValueError(f"unknown relation {rel!r}")

    @property
    def passed(self) -> bool:
        c = float(self.computed)
        if math.isnan(c):
            return False
        ok = True
        if self.bound is not None:
            ok &= self._compare(self.relation, c, float(self.bound), self.tol)
        if self.oracle is not None:
            tol = self.oracle_tol * (max(abs(float(self.oracle)), 1e-300) if self.oracle_relative else 1.0)
            ok &= self._compare(self.oracle_relation, c, float(self.oracle), tol)
        return bool(ok)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "condition": self.condition,
            "computed": _num(self.computed),
            "bound": _num(self.bound),
            "relation": self.relation,
            "tol": _num(self.tol),
            "oracle": _num(self.oracle),
            "oracle_relation": self.oracle_relation,
            "oracle_tol": _num(self.oracle_tol),
            "oracle_relative": self.oracle_relative,
            "pass": self.passed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Check:
        return cls(
            name=d["name"],
            condition=d["condition"],
            computed=_unnum(d["computed"]),
            bound=_unnum(d["bound"]),
            relation=d["relation"],
            tol=_unnum(d["tol"]),
            oracle=_unnum(d["oracle"]),
            oracle_relation=d["oracle_relation"],
            oracle_tol=_unnum(d["oracle_tol"]),
            oracle_relative=d["oracle_relative"],
        )


def flag(name: str, condition: str, ok: bool) -> Check:
    """A yes/no check recorded as 1.0 (holds) against bound 1."""
    return Check(name, condition, 1.0 if ok else 0.0, 1.0, "ge")


@dataclass
class CertReport:
    construction: str
    params: dict[str, Any]
    checks: list[Check] = field(default_factory=list)
    rng_seed: int | None = None
    observations: dict[str, Any] = field(default_factory=dict)
    timings: dict[str, float] | None = None
    # bulky by-products (error traces and the like) kept out of the JSON
    artifacts: dict[str, Any] = field(default_factory=dict, repr=False, compare=False)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, other: CertReport, prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(Check(**{**c.__dict__, "name": prefix + c.name}))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        out = {
            "construction": self.construction,
            "params": _clean(self.params),
            "rng_seed": self.rng_seed,
            "pass": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "observations": _clean(self.observations),
        }
        if self.timings is not None:
            out["timings"] = {k: round(float(v), 6) for k, v in self.timings.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> CertReport:
        return cls(
            construction=d["construction"],
            params=d["params"],
            checks=[Check.from_dict(c) for c in d["checks"]],
            rng_seed=d.get("rng_seed"),
            observations=d.get("observations", {}),
            timings=d.get("timings"),
        )

    def summary(self) -> str:
        lines = [f"{self.construction}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            ref = f" bound {c.bound:.6g}" if c.bound is not None else ""
            orc = f" oracle {c.oracle:.12g}" if c.oracle is not None else ""
            lines.append(f"  [{'ok' if c.passed else 'FAIL'}] {c.name}: {float(c.computed):.12g}{ref}{orc}")
        return "\n".join(lines)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if hasattr(obj, "item"):
        return _clean(obj.item())
    if isinstance(obj, float):
        return _num(obj)
    return str(obj)


def load_schema(name: str = "certreport") -> dict:
    text = resources.files("posbasis").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
