"""Collapse-rate bookkeeping for the rod-cell perception chain.

Each stage contributes ``f^2 n^2 N`` to the rate multiplier S (Gamma =
lambda S): N well-separated clusters of n daltons, with effective-mass
factor f (1 in vacuum). A perceived flash of ``photon_count`` photons
multiplies the sum.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from cslbounds.medium import PROTEIN_FACTOR, SODIUM_FACTOR
from cslbounds.model import InvalidParameterError, gamma_from_lambda
from cslbounds.rates import ClusterSpec

DEFAULT_PHOTONS = 6
SODIUM_DA = 23.0

#: Range quoted for the original vacuum analysis. Its lower end cannot be
#: rebuilt from the stage values, so it is stored and never recomputed.
QUOTED_ORIGINAL_RANGE = (5e-9, 2e-11)

#: Correlation length at which the stage clusterings were worked out, cm.
REFERENCE_R_C = 1e-5


@dataclass(frozen=True)
class PerceptionStage:
    name: str
    n: float  # daltons per coherent cluster
    N: float  # number of well-separated clusters
    f: float = 1.0  # effective-mass factor

    def __post_init__(self):
        if not (self.n > 0 and self.N > 0):
            raise InvalidParameterError(f"stage {self.name!r}: n and N must be positive")
        if not math.isfinite(self.f):
            raise InvalidParameterError(f"stage {self.name!r}: f must be finite")

    @property
    def contribution(self) -> float:
        return self.f ** 2 * self.n ** 2 * self.N


@dataclass(frozen=True)
class PerceptionScenario:
    name: str
    stages: tuple
    photon_count: int = DEFAULT_PHOTONS

    def __post_init__(self):
        if int(self.photon_count) != self.photon_count or self.photon_count < 1:
            raise InvalidParameterError("photon_count must be a positive integer")
        if not self.stages:
            raise InvalidParameterError("scenario needs at least one stage")
        object.__setattr__(self, "stages", tuple(self.stages))

    def with_photons(self, photon_count: int) -> "PerceptionScenario":
        return replace(self, photon_count=photon_count)

    def cluster_spec(self) -> ClusterSpec:
        """Equivalent clusters: n daltons as one unit of mass f*n."""
        return ClusterSpec(tuple((abs(s.f) * s.n, 1.0, s.N) for s in self.stages))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "photon_count": self.photon_count,
            "stages": [asdict(s) for s in self.stages],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PerceptionScenario":
        unknown = set(d) - {"name", "photon_count", "stages"}
        if unknown:
            raise InvalidParameterError(f"unknown scenario keys: {sorted(unknown)}")
        stages = []
        for i, s in enumerate(d.get("stages", [])):
            extra = set(s) - {"name", "n", "N", "f"}
            if extra:
                raise InvalidParameterError(f"stage {i}: unknown keys {sorted(extra)}")
            missing = {"name", "n", "N"} - set(s)
            if missing:
                raise InvalidParameterError(f"stage {i}: missing keys {sorted(missing)}")
            stages.append(PerceptionStage(str(s["name"]), float(s["n"]), float(s["N"]), float(s.get("f", 1.0))))
        if "name" not in d:
            raise InvalidParameterError("scenario needs a name")
        return cls(str(d["name"]), tuple(stages), int(d.get("photon_count", DEFAULT_PHOTONS)))


@dataclass(frozen=True)
class BoundCriterion:
    gamma_t_threshold: float = 100.0
    perception_time: float = 0.1  # s
    slack_decades: int = 1

    def __post_init__(self):
        if not (self.gamma_t_threshold > 0 and self.perception_time > 0 and self.slack_decades > 0):
            raise InvalidParameterError("criterion values must be positive")

    @property
    def required_rate(self) -> float:
        """Gamma needed to collapse within the perception time, 1/s."""
        return self.gamma_t_threshold / self.perception_time


def _stages(f_protein: float = 1.0, f_sodium: float = 1.0, extreme: bool = False):
    # alpha-subunits of transducin; GMP molecules; sodium ion clusters.
    if extreme:
        n3, N3 = 5 * 1e3 * SODIUM_DA, 60.0
    else:
        n3, N3 = 5 * 3 * SODIUM_DA, 60.0 * 333
    return (
        PerceptionStage("transducin-alpha", 3.9e4, 20.0, f_protein),
        PerceptionStage("GMP", 363.0, 2000.0, f_protein),
        PerceptionStage("Na+", n3, N3, f_sodium),
    )


def bdf_builtin_scenarios(
    protein_factor: float = PROTEIN_FACTOR,
    sodium_factor: float = SODIUM_FACTOR,
) -> dict:
    """The four built-in ledgers.

    ``most_likely`` and ``extreme`` are the vacuum treatments; the
    ``corrected_`` variants apply effective-mass factors (0.3 to both
    protein-like stages including GMP, 0.08 to sodium).
    """
    return {
        "most_likely": PerceptionScenario("most_likely", _stages()),
        "extreme": PerceptionScenario("extreme", _stages(extreme=True)),
        "corrected_most_likely": PerceptionScenario(
            "corrected_most_likely", _stages(protein_factor, sodium_factor)
        ),
        "corrected_extreme": PerceptionScenario(
            "corrected_extreme", _stages(protein_factor, sodium_factor, extreme=True)
        ),
    }


BUILTIN_NAMES = tuple(bdf_builtin_scenarios())


def get_scenario(name: str) -> PerceptionScenario:
    table = bdf_builtin_scenarios()
    if name not in table:
        raise KeyError(f"unknown scenario {name!r}; available: {', '.join(table)}")
    return table[name]


def scenario_rate_sum(scenario: PerceptionScenario) -> float:
    """S = photon_count * sum_i f_i^2 n_i^2 N_i."""
    return scenario.photon_count * math.fsum(s.contribution for s in scenario.stages)


@dataclass(frozen=True)
class LambdaBound:
    lam: float  # smallest lambda collapsing within the perception time
    low: float
    high: float


def lambda_bound(S: float, criterion: BoundCriterion = BoundCriterion()) -> LambdaBound:
    if not S > 0:
        raise InvalidParameterError("rate sum must be positive")
    lam = criterion.required_rate / S
    k = 10.0 ** criterion.slack_decades
    return LambdaBound(lam, lam / k, lam * k)


def round_sig(x: float, sig: int = 1) -> float:
    if x == 0:
        return 0.0
    return float(f"{x:.{sig - 1}e}")


def comparison_table(
    criterion: BoundCriterion = BoundCriterion(), photon_count: int = DEFAULT_PHOTONS
) -> dict:
    """Computed ranges for every built-in, plus the quoted original range.

    Rows hold S and the lambda bound for each built-in at ``photon_count``
    and in single-photon mode.
    """
    rows = []
    for name, sc in bdf_builtin_scenarios().items():
        for photons in sorted({photon_count, 1}, reverse=True):
            S = scenario_rate_sum(sc.with_photons(photons))
            b = lambda_bound(S, criterion)
            rows.append({
                "scenario": name,
                "photon_count": photons,
                "S": S,
                "lambda": b.lam,
                "lambda_low": b.low,
                "lambda_high": b.high,
            })

    def span(names, photons):
        vals = [r["lambda"] for r in rows if r["scenario"] in names and r["photon_count"] == photons]
        return [max(vals), min(vals)]

    return {
        "criterion": asdict(criterion),
        "rows": rows,
        "ranges": {
            "vacuum": span(("most_likely", "extreme"), photon_count),
            "corrected": span(("corrected_most_likely", "corrected_extreme"), photon_count),
            "vacuum_single_photon": span(("most_likely", "extreme"), 1),
            "corrected_single_photon": span(("corrected_most_likely", "corrected_extreme"), 1),
        },
        "quoted_original": {
            "range": list(QUOTED_ORIGINAL_RANGE),
            "provenance": "as quoted, not re-derivable from the stage values",
        },
    }


@dataclass
class ScanResult:
    rows: list = field(default_factory=list)
    caveat: str = (
        f"cluster counts held fixed at their r_C = {REFERENCE_R_C:g} cm values for every r_C"
    )

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["lambda", "r_C", "gamma", "S", "collapse_time", "collapses", "fixed_clusters"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()


def scan(lambda_grid, r_C_grid, scenario: PerceptionScenario, criterion: BoundCriterion = BoundCriterion()) -> ScanResult:
    """Collapse verdict for every (lambda, r_C) pair.

    The collapse time is ``threshold / (lambda S)`` and the verdict is
    whether it fits within the perception time. Rows are ordered with
    lambda outermost.
    """
    lams = np.atleast_1d(np.asarray(lambda_grid, dtype=float))
    rcs = np.atleast_1d(np.asarray(r_C_grid, dtype=float))
    if not (lams.size and rcs.size) or np.any(lams <= 0) or np.any(rcs <= 0):
        raise InvalidParameterError("scan grids must be nonempty and positive")
    S = scenario_rate_sum(scenario)
    out = ScanResult()
    for lam in lams:
        t_c = criterion.gamma_t_threshold / (lam * S)
        for r in rcs:
            out.rows.append({
                "lambda": float(lam),
                "r_C": float(r),
                "gamma": gamma_from_lambda(lam, r),
                "S": S,
                "collapse_time": t_c,
                "collapses": bool(t_c <= criterion.perception_time),
                "fixed_clusters": bool(not math.isclose(r, REFERENCE_R_C, rel_tol=1e-9)),
            })
    return out
