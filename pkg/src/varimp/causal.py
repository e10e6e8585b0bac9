"""Marginal-vs-conditional causal screening and intervention ranking.

A variable important under both a marginal measure (LMG, forest) and a
conditional one (PMVD) is treated as directly causal; one important only
marginally is a candidate indirect cause, attached to direct variables it
correlates with strongly enough.  The screen never orders indirect
variables among themselves: sufficiently correlated candidates are
reported as unresolved.
"""

from dataclasses import dataclass

from .dataset import MomentModel
from .errors import InputError
from .result import ImportanceResult

# Preconditions the screen assumes; echoed verbatim in every report.
SCREEN_ASSUMPTIONS = (
    "every candidate causal link has been judged plausible by the analyst",
    "correlations between variables are low enough to avoid confounding",
    "variables important only marginally are not mediators or suppressors",
)

INTERVENTION_NOTE = ("an intervention can change the correlation structure "
                     "among regressors and weaken its expected effect")


@dataclass(frozen=True)
class ScreenSettings:
    """Thresholds for the screen; ``ambiguity_threshold`` defaults to
    ``corr_threshold``."""

    importance_cutoff: float = 0.15
    corr_threshold: float = 0.3
    ambiguity_threshold: float | None = None

    def __post_init__(self):
        for name in ("importance_cutoff", "corr_threshold"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise InputError(f"{name} must lie in (0, 1)")
        if self.ambiguity_threshold is None:
            object.__setattr__(self, "ambiguity_threshold", self.corr_threshold)
        elif not 0 < self.ambiguity_threshold < 1:
            raise InputError("ambiguity_threshold must lie in (0, 1)")


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    correlation: float
    status: str  # "accepted" | "rejected"


@dataclass(frozen=True)
class CausalReport:
    """Outcome of the screen.

    ``direct``: important under both measures.  ``indirect``: important
    under the marginal measure only.  ``edges``: candidate indirect->direct
    links with their correlation evidence.  ``unresolved_pairs``: indirect
    pairs too correlated to order.  ``unclassifiable``: variables important
    only conditionally; nothing can be said beyond that they cause the
    response somehow.
    """

    direct: frozenset
    indirect: frozenset
    edges: tuple
    unresolved_pairs: tuple
    unclassifiable: frozenset
    assumptions: tuple
    settings: ScreenSettings


def important_set(res: ImportanceResult, cutoff: float) -> frozenset:
    """Labels whose proportion of the fit meets the cutoff (boundary included)."""
    if not 0 < cutoff < 1:
        raise InputError("cutoff must lie in (0, 1)")
    return frozenset(lb for lb, p in zip(res.labels, res.proportions) if p >= cutoff)


def discern_structure(marginal: ImportanceResult, conditional: ImportanceResult,
                      mm: MomentModel, settings: ScreenSettings | None = None) -> CausalReport:
    """Partial causal structure from a marginal/conditional importance pair.

    The caller chooses the pairing (e.g. LMG vs PMVD, or forest importance
    as the marginal input); it is never inferred.  Both results must cover
    the same variables, which must exist in the moment model for the
    correlation evidence.
    """
    settings = settings or ScreenSettings()
    if set(marginal.labels) != set(conditional.labels):
        raise InputError(
            "marginal and conditional results cover different variables: "
            f"{sorted(set(marginal.labels) ^ set(conditional.labels))}")
    missing = set(marginal.labels) - set(mm.var_names)
    if missing:
        raise InputError(f"variables absent from the moment model: {sorted(missing)}")

    marg = important_set(marginal, settings.importance_cutoff)
    cond = important_set(conditional, settings.importance_cutoff)
    direct = marg & cond
    indirect = marg - cond
    unclassifiable = cond - marg

    edges = []
    for src in sorted(indirect):
        for dst in sorted(direct):
            rho = mm.pairwise_corr(src, dst)
            status = "accepted" if abs(rho) >= settings.corr_threshold else "rejected"
            edges.append(Edge(source=src, target=dst, correlation=rho, status=status))

    unresolved = []
    ind_sorted = sorted(indirect)
    for i, a in enumerate(ind_sorted):
        for b in ind_sorted[i + 1:]:
            rho = mm.pairwise_corr(a, b)
            if abs(rho) >= settings.ambiguity_threshold:
                unresolved.append((a, b, rho))

    return CausalReport(direct=frozenset(direct), indirect=frozenset(indirect),
                        edges=tuple(edges), unresolved_pairs=tuple(unresolved),
                        unclassifiable=frozenset(unclassifiable),
                        assumptions=SCREEN_ASSUMPTIONS, settings=settings)


@dataclass(frozen=True)
class InterventionRanking:
    """Variables ordered by importance for intervention, minus exclusions."""

    ranked: tuple          # (label, share) pairs, descending share
    excluded: tuple        # (label, reason) pairs
    note: str = INTERVENTION_NOTE


def rank_interventions(res: ImportanceResult, excluded=()) -> InterventionRanking:
    """Rank variables by descending share, ties broken by label order.

    Excluded variables (legal or physical limitations) are listed
    separately rather than dropped silently.
    """
    excluded = set(excluded)
    unknown = excluded - set(res.labels)
    if unknown:
        raise InputError(f"excluded variables not in the result: {sorted(unknown)}")
    candidates = [(lb, float(s)) for lb, s in zip(res.labels, res.shares)
                  if lb not in excluded]
    candidates.sort(key=lambda it: (-it[1], it[0]))
    out = tuple((lb, "user-excluded") for lb in sorted(excluded))
    return InterventionRanking(ranked=tuple(candidates), excluded=out)
