"""JSON forms of datasets, distributions and reports.

Exact quantities are written as strings: terminating rationals in decimal
notation (``"0.25"``), the rest as ``"n/d"``; probabilities always as
``"n/d"``. ``Fraction(s)`` parses every form back bit-exactly.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .adversary import AdvantageReport, ChallengeReport
from .core_model import DataPoint, Dataset, ModelParam, as_fraction
from .kripke import PathDistribution
from .privacy import DecompositionReport, EpsilonReport


def _terminates(d: int) -> bool:
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


def fraction_to_str(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    if not _terminates(x.denominator):
        return f"{x.numerator}/{x.denominator}"
    digits = 0
    while (x * 10**digits).denominator != 1:
        digits += 1
    scaled = abs(x.numerator * 10**digits // x.denominator)
    sign = "-" if x < 0 else ""
    s = str(scaled).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def prob_to_str(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"


def float_or_inf(x: float) -> float | str:
    # JSON has no infinity literal
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x



def point_to_json(p: DataPoint) -> dict:
    return {
        "id": p.id,
        "features": [fraction_to_str(f) for f in p.features],
        "value": fraction_to_str(p.value),
        "secret": p.secret,
    }


def point_from_json(obj: dict) -> DataPoint:
    return DataPoint(
        id=str(obj["id"]),
        features=tuple(as_fraction(f) for f in obj.get("features", [])),
        value=as_fraction(obj["value"]),
        secret=bool(obj.get("secret", False)),
    )


def dataset_to_json(ds: Dataset) -> list[dict]:
    return [point_to_json(p) for p in ds]


def dataset_from_json(arr: list) -> Dataset:
    if not isinstance(arr, list):
        raise ValueError("dataset must be a JSON array of points")
    return Dataset(frozenset(point_from_json(o) for o in arr))


def outcome_key(o: ModelParam) -> str:
    return ",".join(fraction_to_str(c) for c in o)


def parse_outcome_key(k: str) -> ModelParam:
    return tuple(Fraction(c) for c in k.split(",")) if k else ()


def _sorted_outcomes(outcomes):
    return sorted(outcomes, key=lambda o: tuple(o) if isinstance(o, tuple) else (o,))


def distribution_to_json(d: PathDistribution) -> dict:
    return {
        "outcomes": {outcome_key(o): prob_to_str(d.outcomes[o]) for o in _sorted_outcomes(d.outcomes)},
        "trace_count": d.trace_count,
    }


def distribution_from_json(obj: dict) -> PathDistribution:
    outcomes = {parse_outcome_key(k): Fraction(v) for k, v in obj["outcomes"].items()}
    return PathDistribution(outcomes, int(obj.get("trace_count", 0)))


def epsilon_report_to_json(r: EpsilonReport) -> dict:
    return {
        "epsilon": float_or_inf(r.epsilon),
        "exp_epsilon": None if r.exp_epsilon is None else prob_to_str(r.exp_epsilon),
        "delta": None if r.delta is None else prob_to_str(r.delta),
        "per_outcome": [
            {
                "outcome": outcome_key(x.outcome),
                "p0": prob_to_str(x.p0),
                "p1": prob_to_str(x.p1),
                "log_ratio": float_or_inf(x.log_ratio),
            }
            for x in r.per_outcome
        ],
    }


def advantage_report_to_json(r: AdvantageReport) -> dict:
    return {
        "description": r.description,
        "advantage": prob_to_str(r.advantage),
        "advantage_float": float(r.advantage),
        "success_prob": prob_to_str(r.success_prob),
        "tv": prob_to_str(r.tv),
        "tv_float": float(r.tv),
        "tight_bound": r.tight_bound,
        "exp_bound": r.exp_bound,
        "eps_star": epsilon_report_to_json(r.eps_star),
    }


def challenge_to_json(c: ChallengeReport) -> dict:
    return {
        "trials": c.trials,
        "successes": c.successes,
        "success_prob": c.success_prob,
        "advantage": c.advantage,
    }


def challenge_csv_rows(c: ChallengeReport) -> list[list]:
    return [["trial_block", "successes", "trials", "advantage_estimate"]] + [
        [b, w, n, repr(a)] for b, w, n, a in c.rows
    ]


def decomposition_report_to_json(r: DecompositionReport) -> dict:
    return {
        "mode": r.mode.value,
        "per_client": {c: epsilon_report_to_json(e) for c, e in r.per_client.items()},
        "global": epsilon_report_to_json(r.global_report),
        "bound": float_or_inf(r.bound),
        "bound_holds": r.bound_holds,
    }


def moniteo_report_to_json(r, *, include_runtime: bool = True) -> dict:
    out = {
        "mode": r.mode,
        "target": r.target,
        "epsilon": epsilon_report_to_json(r.epsilon),
        "advantage": advantage_report_to_json(r.advantage),
        "budget_ok": r.budget_ok,
        "per_client_epsilon": {c: float_or_inf(e.epsilon) for c, e in r.per_client.items()},
    }
    if include_runtime:
        out["runtime_ms"] = r.runtime_ms
    return out


def moniteo_summary(r) -> str:
    eps = "inf" if math.isinf(r.epsilon.epsilon) else f"{r.epsilon.epsilon:.6f}"
    return (
        f"moniteo target={r.target} mode={r.mode} epsilon={eps} "
        f"tv={float(r.advantage.tv):.6f} budget_ok={r.budget_ok} runtime_ms={r.runtime_ms}"
    )
