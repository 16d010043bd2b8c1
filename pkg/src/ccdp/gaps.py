"""Parameter sweeps, constant-gap certification and monotonicity audits.

A sweep evaluates one (inner, outer) bound pair over a Cartesian grid and
records the gap per point.  Certification checks the grid-wide maximum gap
against a claimed constant; points in the small-parameter regime (P <= 3 or
c2 <= 3) are covered by the trivial rule that the whole capacity is below
1/2*log2(1+P) there, so either the direct comparison or that bound must stay
within the claim.

Sweeps are exact closed-form evaluations: output is deterministic and two
runs over the same grid produce byte-identical CSV.
"""

import json
from dataclasses import dataclass, field
from math import inf, log2, sqrt

import numpy as np

from . import bounds
from .errors import WrongModel
from .model import ChannelParams, rho_range

GAP_TOL = 1e-9
MONOTONE_TOL = 1e-9
SMALL_P = 3.0
SMALL_C2 = 3.0

CLAIMED_GAP = {"Th3": 1.0, "Th4": 2.25, "Th5": 2.25, "Th6": 2.25}
THEOREMS = tuple(CLAIMED_GAP)

CSV_COLUMNS = ("M", "P", "c", "rho", "variant",
               "inner_bpcu", "outer_bpcu", "gap_bpcu",
               "inner_branch", "outer_branch")

# Variant *kinds* accepted by certification; mapped per theorem to the
# concrete bound variant ("appendix" is the loosened form for Th3 and the
# general-M appendix form otherwise).
_APPENDIX_SPELLINGS = ("appendix", bounds.APPENDIX_FORM, bounds.APPENDIX_LOOSENED)


@dataclass(frozen=True)
class SweepGrid:
    """Axes of a sweep.  rho_values=None means 13 evenly spaced feasible
    correlations per M (endpoints included); an explicit list is filtered
    per M to the feasible range."""

    m_values: tuple
    p_values: tuple
    c2_values: tuple
    rho_values: tuple | None = None
    rho_points: int = 13
    outer_variant: str = bounds.APPENDIX_FORM

    def __post_init__(self):
        for name in ("m_values", "p_values", "c2_values"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        object.__setattr__(self, "c2_values", tuple(float(c) for c in self.c2_values))
        if self.rho_values is not None:
            object.__setattr__(self, "rho_values",
                               tuple(float(r) for r in self.rho_values))

    def rho_axis(self, M):
        """Feasible correlation values for this M, in axis order."""
        lo, hi = rho_range(M)
        if self.rho_values is None:
            return tuple(np.linspace(lo, hi, self.rho_points))
        return tuple(r for r in self.rho_values if lo - 1e-12 <= r <= hi + 1e-12)

    def size(self):
        per_m = {M: len(self.rho_axis(M)) for M in self.m_values}
        return len(self.p_values) * len(self.c2_values) * sum(per_m.values())


def standard_grid(m_values=(2, 3, 4, 5, 6, 7, 8), rho_values=None,
                  outer_variant=bounds.APPENDIX_FORM):
    """The default certification grid: P log-spaced 50 points in [3.01, 1e4],
    c2 log-spaced 50 points in [3.01, 1e6]."""
    return SweepGrid(
        m_values=tuple(m_values),
        p_values=tuple(np.logspace(np.log10(3.01), 4.0, 50)),
        c2_values=tuple(np.logspace(np.log10(3.01), 6.0, 50)),
        rho_values=rho_values,
        outer_variant=outer_variant,
    )


@dataclass(frozen=True)
class GapRow:
    """One grid point: parameters, both bounds, their gap and branch labels."""

    M: int
    P: float
    c: float
    rho: float
    variant: str
    inner: float
    outer: float
    gap: float
    inner_branch: str
    outer_branch: str
    small_regime: bool = False
    error: str | None = None


@dataclass
class GapReport:
    """Sweep output plus the grid-wide gap certificate."""

    rows: list
    grid: SweepGrid
    claimed_gap: float | None = None
    theorem: str | None = None
    max_gap: float = -inf
    min_gap: float = inf
    argmax: GapRow | None = None
    certified: bool | None = None
    small_regime_rows: int = 0
    warnings: list = field(default_factory=list)

    def finalize(self):
        """Recompute the certificate from the rows (pure function of them)."""
        regular = [r for r in self.rows if r.error is None and not r.small_regime]
        small = [r for r in self.rows if r.error is None and r.small_regime]
        self.small_regime_rows = len(small)
        self.max_gap, self.min_gap, self.argmax = -inf, inf, None
        for r in regular:
            if r.gap > self.max_gap:
                self.max_gap, self.argmax = r.gap, r
            self.min_gap = min(self.min_gap, r.gap)
        if self.claimed_gap is not None:
            covered = all(
                r.gap <= self.claimed_gap + GAP_TOL
                or 0.5 * log2(1.0 + r.P) <= self.claimed_gap + GAP_TOL
                for r in small
            )
            self.certified = covered and self.max_gap <= self.claimed_gap + GAP_TOL
        negatives = sum(1 for r in regular + small if r.gap < -GAP_TOL)
        if negatives:
            self.warnings.append(
                f"{negatives} grid points have the outer bound below the inner "
                f"bound (negative gap); the selected outer variant is not a "
                f"valid upper bound there"
            )
        return self


def _bound_pair(theorem, variant_kind):
    """Map (theorem, variant kind) to concrete inner/outer evaluators."""
    if variant_kind in _APPENDIX_SPELLINGS:
        kind = "appendix"
    elif variant_kind == bounds.THEOREM:
        kind = bounds.THEOREM
    else:
        raise ValueError(f"unknown outer variant {variant_kind!r}")

    if theorem == "Th3":
        outer_variant = bounds.APPENDIX_LOOSENED if kind == "appendix" else bounds.THEOREM
        return (lambda p: bounds.ccdp2_inner(p),
                lambda p: bounds.ccdp2_outer(p, outer_variant))
    if theorem == "Th4":
        outer_variant = bounds.APPENDIX_FORM if kind == "appendix" else bounds.THEOREM
        return (lambda p: bounds.ccdp_m_inner(p),
                lambda p: bounds.ccdp_m_outer(p, outer_variant))
    if theorem in ("Th5", "Th6"):
        outer_variant = bounds.APPENDIX_FORM if kind == "appendix" else bounds.THEOREM
        return (lambda p: bounds.ccdp_es_inner(p),
                lambda p: bounds.ccdp_es_outer(p, outer_variant))
    raise ValueError(f"unknown theorem {theorem!r}, expected one of {THEOREMS}")


def _evaluate_rows(grid, inner_fn, outer_fn, threads=1):
    """One row per feasible grid point, lexicographic in (M, P, c2, rho).

    The variant column records the outer bound variant actually evaluated.
    """
    def slice_rows(task):
        M, rho = task
        out = []
        for P in grid.p_values:
            for c2 in grid.c2_values:
                c = sqrt(c2)
                small = P <= SMALL_P or c2 <= SMALL_C2
                try:
                    params = ChannelParams(M, P, c, rho)
                    inner = inner_fn(params)
                    outer = outer_fn(params)
                    out.append(GapRow(M, P, c, rho, outer.variant,
                                      inner.value, outer.value,
                                      outer.value - inner.value,
                                      inner.branch, outer.branch, small))
                except WrongModel:
                    raise
                except ValueError as exc:
                    out.append(GapRow(M, P, c, rho, grid.outer_variant,
                                      float("nan"), float("nan"), float("nan"),
                                      f"error:{type(exc).__name__}",
                                      f"error:{type(exc).__name__}",
                                      small, type(exc).__name__))
        return out

    tasks = [(M, rho) for M in grid.m_values for rho in grid.rho_axis(M)]
    slices = _map_ordered(slice_rows, tasks, threads)
    # Rows are produced per (M, rho) slice; reorder to (M, P, c2, rho).
    rows = [r for s in slices for r in s]
    rows.sort(key=lambda r: (r.M, r.P, r.c, r.rho))
    return rows


def _map_ordered(fn, items, threads):
    """Apply fn to items, preserving item order regardless of thread count."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_sweep(grid, threads=1):
    """Sweep inner/outer gaps over the grid.

    Each point is evaluated with the tightest certified pair for its model:
    the dedicated two-receiver pair at M = 2 with independent states, the
    correlated-states pair everywhere else.  The grid's outer variant selects
    the as-stated or the appendix family; per-point domain errors become
    row-level markers, never sweep failures.
    """
    if grid.outer_variant in _APPENDIX_SPELLINGS:
        kind = "appendix"
    elif grid.outer_variant == bounds.THEOREM:
        kind = bounds.THEOREM
    else:
        raise ValueError(f"unknown outer variant {grid.outer_variant!r}")

    def inner_fn(p):
        if p.M == 2 and p.rho == 0.0:
            return bounds.ccdp2_inner(p)
        return bounds.ccdp_es_inner(p)

    def outer_fn(p):
        if p.M == 2 and p.rho == 0.0:
            variant = bounds.APPENDIX_LOOSENED if kind == "appendix" \
                else bounds.THEOREM
            return bounds.ccdp2_outer(p, variant)
        variant = bounds.APPENDIX_FORM if kind == "appendix" else bounds.THEOREM
        return bounds.ccdp_es_outer(p, variant)

    rows = _evaluate_rows(grid, inner_fn, outer_fn, threads)
    return GapReport(rows=rows, grid=grid).finalize()


def theorem_grid(theorem, grid=None):
    """Restrict (or build) a standard grid matching the theorem's model."""
    base = grid or standard_grid()
    if theorem == "Th3":
        return SweepGrid((2,), base.p_values, base.c2_values, (0.0,),
                         outer_variant=base.outer_variant)
    if theorem == "Th4":
        return SweepGrid(base.m_values, base.p_values, base.c2_values, (0.0,),
                         outer_variant=base.outer_variant)
    if theorem == "Th5":
        return SweepGrid((2,), base.p_values, base.c2_values, base.rho_values,
                         rho_points=base.rho_points, outer_variant=base.outer_variant)
    if theorem == "Th6":
        return base
    raise ValueError(f"unknown theorem {theorem!r}, expected one of {THEOREMS}")


def certify_theorem(theorem, grid, variant_kind="appendix", threads=1):
    """Certify one constant-gap claim over a (suitably restricted) grid.

    Raises WrongModel if the grid contains points outside the theorem's
    model.  The certificate compares max(outer - inner) against the claimed
    constant; theorem-statement variants are reported with a warning where
    the stated expression is known to disagree with its derivation.
    """
    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem!r}, expected one of {THEOREMS}")
    if theorem in ("Th3", "Th5") and tuple(grid.m_values) != (2,):
        raise WrongModel(f"{theorem} applies to M=2 only, grid has {grid.m_values}")
    if theorem in ("Th3", "Th4"):
        for M in grid.m_values:
            if any(r != 0.0 for r in grid.rho_axis(M)):
                raise WrongModel(f"{theorem} applies to independent states (rho=0)")

    inner_fn, outer_fn = _bound_pair(theorem, variant_kind)
    rows = _evaluate_rows(grid, inner_fn, outer_fn, threads)
    report = GapReport(rows=rows, grid=grid,
                       claimed_gap=CLAIMED_GAP[theorem], theorem=theorem)
    report.finalize()
    if variant_kind == bounds.THEOREM and theorem in ("Th4", "Th6"):
        report.warnings.append(
            "theorem-statement outer: the middle branch increases with the "
            "state gain, so it disagrees with the non-increasing appendix "
            "form; certification is defined on the appendix form"
        )
    return report


def fig3_curve(P, c_values):
    """Raw vs gain-optimized two-receiver outer bound, for plotting.

    raw(c) is the pre-clamping expression; optimized(c) is its minimum over
    gains in (0, c], i.e. raw evaluated at min(c, sqrt(P+1)).  The optimized
    curve is flat past sqrt(P+1), where the raw curve keeps increasing.
    """
    if not P > 0:
        raise ValueError(f"P must be > 0, got {P!r}")
    c_opt = sqrt(P + 1.0)
    rows = []
    for c in c_values:
        c = float(c)
        raw = bounds._outer2_raw(P, c * c)
        clamped = min(c, c_opt)
        optimized = bounds._outer2_raw(P, clamped * clamped)
        rows.append((c, raw, optimized))
    return rows


# Families the monotonicity audit can scan.  "optimized" is the default set
# (the certification forms); the raw/theorem families document where the
# un-optimized or as-stated expressions fail to be non-increasing.
AUDIT_FAMILIES = {
    "inner-2": lambda p: bounds.ccdp2_inner(p),
    "outer-2-appendix": lambda p: bounds.ccdp2_outer(p, bounds.APPENDIX_LOOSENED),
    "inner-m": lambda p: bounds.ccdp_m_inner(p),
    "outer-m-appendix": lambda p: bounds.ccdp_m_outer(p, bounds.APPENDIX_FORM),
    "inner-es": lambda p: bounds.ccdp_es_inner(p),
    "outer-es-appendix": lambda p: bounds.ccdp_es_outer(p, bounds.APPENDIX_FORM),
    "outer-2-raw": lambda p: bounds.ccdp2_outer(p, bounds.RAW),
    "outer-2-theorem": lambda p: bounds.ccdp2_outer(p, bounds.THEOREM),
    "outer-m-theorem": lambda p: bounds.ccdp_m_outer(p, bounds.THEOREM),
    "outer-es-theorem": lambda p: bounds.ccdp_es_outer(p, bounds.THEOREM),
    "baseline-outer-2": bounds.baseline_outer_2,
}
OPTIMIZED_FAMILIES = ("inner-2", "outer-2-appendix", "inner-m",
                      "outer-m-appendix", "inner-es", "outer-es-appendix")


@dataclass(frozen=True)
class MonotonicityViolation:
    family: str
    M: int
    P: float
    rho: float
    c_low: float
    c_high: float
    increase: float


def monotonicity_audit(grid, families=OPTIMIZED_FAMILIES):
    """Scan each family for value increases along the c axis.

    Slices where a family does not apply (wrong M or rho) are skipped; any
    adjacent-pair increase beyond MONOTONE_TOL is returned as a violation
    record, never raised.
    """
    violations = []
    c2_sorted = sorted(grid.c2_values)
    for name in families:
        fn = AUDIT_FAMILIES[name]
        for M in grid.m_values:
            for rho in grid.rho_axis(M):
                for P in grid.p_values:
                    try:
                        values = [fn(ChannelParams(M, P, sqrt(c2), rho)).value
                                  for c2 in c2_sorted]
                    except (WrongModel, ValueError):
                        continue  # family not applicable on this slice
                    for i in range(len(values) - 1):
                        inc = values[i + 1] - values[i]
                        if inc > MONOTONE_TOL:
                            violations.append(MonotonicityViolation(
                                name, M, P, rho,
                                sqrt(c2_sorted[i]), sqrt(c2_sorted[i + 1]), inc))
    return violations


# ---------------------------------------------------------------------------
# Serialization (fixed schemas; floats use shortest round-trip formatting).
# ---------------------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def rows_to_csv(rows, meta=None):
    """Render gap rows as CSV text: optional '# key: value' metadata lines,
    one header row, then one line per row in sweep order."""
    lines = [f"# {k}: {v}" for k, v in (meta or {}).items()]
    lines.append(",".join(CSV_COLUMNS))
    for r in rows:
        lines.append(",".join((
            str(r.M), _fmt(r.P), _fmt(r.c), _fmt(r.rho), r.variant,
            _fmt(r.inner), _fmt(r.outer), _fmt(r.gap),
            r.inner_branch, r.outer_branch,
        )))
    return "\n".join(lines) + "\n"


def _row_dict(r):
    return {
        "M": r.M, "P": r.P, "c": r.c, "rho": r.rho, "variant": r.variant,
        "inner_bpcu": r.inner, "outer_bpcu": r.outer, "gap_bpcu": r.gap,
        "inner_branch": r.inner_branch, "outer_branch": r.outer_branch,
    }


def grid_description(grid):
    return {
        "m_values": list(grid.m_values),
        "p_range": [min(grid.p_values), max(grid.p_values)],
        "p_points": len(grid.p_values),
        "c2_range": [min(grid.c2_values), max(grid.c2_values)],
        "c2_points": len(grid.c2_values),
        "rho_values": None if grid.rho_values is None else list(grid.rho_values),
        "rho_points_per_m": {str(M): len(grid.rho_axis(M)) for M in grid.m_values},
        "outer_variant": grid.outer_variant,
        "size": grid.size(),
    }


def report_summary(report):
    """JSON-ready summary: maxGap, argmax, certified, grid description."""
    return {
        "theorem": report.theorem,
        "claimedGap": report.claimed_gap,
        "maxGap": None if report.max_gap == -inf else report.max_gap,
        "minGap": None if report.min_gap == inf else report.min_gap,
        "argmax": None if report.argmax is None else _row_dict(report.argmax),
        "certified": report.certified,
        "rows": len(report.rows),
        "smallRegimeRows": report.small_regime_rows,
        "errorRows": sum(1 for r in report.rows if r.error is not None),
        "grid": grid_description(report.grid),
    }


def report_to_json(report, indent=None):
    return json.dumps(report_summary(report), indent=indent, allow_nan=True)
