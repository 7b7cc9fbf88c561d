"""Causal analysis of site covariates on trap scores.

Two pieces: (1) backdoor adjustment-set discovery on a user-supplied DAG,
via d-separation in the graph with the exposure's outgoing edges removed;
(2) a doubly robust dose-response estimate for a continuous exposure. The
exposure is regressed linearly on the adjustment covariates to produce a
Gaussian generalized propensity score; the outcome is regressed on a cubic
B-spline basis in the exposure plus propensity terms (density value and
centered linear predictor, each with a treatment interaction); the fitted
surface is averaged over units at each grid value. Pointwise errors come
from bootstrapping the whole procedure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import BSpline

DEFAULT_N_BOOT = 500
DEFAULT_GRID_POINTS = 50
DEFAULT_GRID_QUANTILES = (0.05, 0.95)
DEFAULT_INTERIOR_KNOTS = 5
MAX_BACKDOOR_CANDIDATES = 20
MIN_GPS_VARIANCE = 1e-12


class DagError(Exception):
    """Malformed DAG input (cycles, unknown nodes, parse failures)."""


class CausalModelError(Exception):
    """Estimation failure (rank deficiency, degenerate variance, extrapolation)."""


# ---------------------------------------------------------------------------
# DAG and backdoor criterion


@dataclass(frozen=True)
class CausalDag:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    hidden: frozenset[str]

    def __post_init__(self):
        known = set(self.nodes)
        for u, v in self.edges:
            if u not in known or v not in known:
                raise DagError(f"edge ({u!r} -> {v!r}) references an undeclared node")
        cycle = _find_cycle(self.nodes, self.edges)
        if cycle:
            raise DagError("graph has a cycle: " + " -> ".join(cycle))

    def parents(self, node: str) -> set[str]:
        return {u for u, v in self.edges if v == node}

    def children(self, node: str) -> set[str]:
        return {v for u, v in self.edges if u == node}

    def descendants(self, node: str) -> set[str]:
        out: set[str] = set()
        stack = [node]
        while stack:
            for child in self.children(stack.pop()):
                if child not in out:
                    out.add(child)
                    stack.append(child)
        return out

    def ancestors_of(self, nodes) -> set[str]:
        out = set(nodes)
        stack = list(nodes)
        while stack:
            for parent in self.parents(stack.pop()):
                if parent not in out:
                    out.add(parent)
                    stack.append(parent)
        return out

    def require(self, node: str) -> None:
        if node not in self.nodes:
            raise DagError(f"unknown node {node!r}")


def _find_cycle(nodes, edges) -> list[str] | None:
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for u, v in edges:
        children[u].append(v)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    trail: list[str] = []

    def visit(n) -> list[str] | None:
        color[n] = GREY
        trail.append(n)
        for c in children[n]:
            if color[c] == GREY:
                return trail[trail.index(c):] + [c]
            if color[c] == WHITE:
                found = visit(c)
                if found:
                    return found
        trail.pop()
        color[n] = BLACK
        return None

    for n in nodes:
        if color[n] == WHITE:
            found = visit(n)
            if found:
                return found
    return None


def load_dag(path: str | Path) -> CausalDag:
    """Parse a DAG from text: one ``from -> to`` edge per line.

    A ``hidden:`` prefix on a node name flags it unobservable; a bare line
    ``hidden: name`` declares a hidden node without edges. Blank lines and
    ``#`` comments are ignored.
    """
    path = Path(path)
    nodes: list[str] = []
    hidden: set[str] = set()
    edges: list[tuple[str, str]] = []

    def note(token: str) -> str:
        token = token.strip()
        if token.startswith("hidden:"):
            token = token[len("hidden:"):].strip()
            hidden.add(token)
        if not token:
            raise DagError(f"{path.name}: empty node name")
        if token not in nodes:
            nodes.append(token)
        return token

    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            left, _, right = line.partition("->")
            edges.append((note(left), note(right)))
        else:
            note(line)

    return CausalDag(nodes=tuple(nodes), edges=tuple(edges), hidden=frozenset(hidden))


def d_separated(dag: CausalDag, x: str, y: str, given) -> bool:
    """Whether x and y are d-separated by the conditioning set ``given``.

    Reachability search over active trails: motion along edges carries a
    direction, colliders open only when they have a conditioned descendant.
    """
    dag.require(x)
    dag.require(y)
    z = set(given)
    for node in z:
        dag.require(node)
    an_z = dag.ancestors_of(z) if z else set()

    # state: (node, came_from_child); start as if entered against an arrow
    visited: set[tuple[str, bool]] = set()
    stack: list[tuple[str, bool]] = [(x, True)]
    while stack:
        node, from_child = stack.pop()
        if (node, from_child) in visited:
            continue
        visited.add((node, from_child))
        if node == y and node not in z:
            return False
        if from_child:
            if node not in z:
                for p in dag.parents(node):
                    stack.append((p, True))
                for c in dag.children(node):
                    stack.append((c, False))
        else:
            if node not in z:
                for c in dag.children(node):
                    stack.append((c, False))
            if node in an_z:
                for p in dag.parents(node):
                    stack.append((p, True))
    return True


def backdoor_adjustment_sets(dag: CausalDag, exposure: str, outcome: str) -> list[frozenset[str]]:
    """All minimal observed adjustment sets satisfying the backdoor criterion.

    A set qualifies when it contains no descendant of the exposure and
    d-separates exposure from outcome once the exposure's outgoing edges are
    cut. Minimal means no valid proper subset. An empty list means the
    effect is not identifiable from observed nodes; ``[frozenset()]`` means
    no adjustment is needed.
    """
    dag.require(exposure)
    dag.require(outcome)
    forbidden = dag.descendants(exposure) | {exposure, outcome}
    candidates = sorted(set(dag.nodes) - dag.hidden - forbidden)
    if len(candidates) > MAX_BACKDOOR_CANDIDATES:
        raise DagError(
            f"{len(candidates)} candidate adjustment nodes exceeds the exhaustive-search "
            f"limit of {MAX_BACKDOOR_CANDIDATES}"
        )

    cut = CausalDag(
        nodes=dag.nodes,
        edges=tuple(e for e in dag.edges if e[0] != exposure),
        hidden=dag.hidden,
    )

    minimal: list[frozenset[str]] = []
    for size in range(len(candidates) + 1):
        for combo in itertools.combinations(candidates, size):
            zset = frozenset(combo)
            if any(prev <= zset for prev in minimal):
                continue
            if d_separated(cut, exposure, outcome, zset):
                minimal.append(zset)
    return sorted(minimal, key=lambda s: (len(s), sorted(s)))


# ---------------------------------------------------------------------------
# generalized propensity score


@dataclass(frozen=True)
class GpsModel:
    """Linear-Gaussian treatment model: treatment | covariates ~ N(Xb, sigma2)."""

    coefficients: np.ndarray
    sigma2: float

    def density(self, t, covariates) -> np.ndarray:
        """Normal density of treatment value(s) t at each unit's conditional mean."""
        mean = np.asarray(covariates, dtype=float) @ self.coefficients
        resid = np.asarray(t, dtype=float) - mean
        return np.exp(-0.5 * resid**2 / self.sigma2) / np.sqrt(2.0 * np.pi * self.sigma2)


def fit_gps(treatment, covariates) -> GpsModel:
    """OLS treatment model with residual-variance estimate RSS / (n - p).

    ``covariates`` must include the intercept column. Rank deficiency names
    the collinear columns; (near-)constant treatment is rejected.
    """
    t = np.asarray(treatment, dtype=float)
    x = np.asarray(covariates, dtype=float)
    if x.ndim != 2:
        raise ValueError("covariates must be a 2-D matrix")
    n, p = x.shape
    if n < p + 2:
        raise CausalModelError(f"need at least {p + 2} rows to fit a GPS on {p} columns")

    from scipy.linalg import qr

    r = qr(x, mode="r", pivoting=True)
    diag = np.abs(np.diag(r[0]))[: min(n, p)]
    tol = diag.max() * max(n, p) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < p:
        bad = sorted(int(c) for c in r[1][rank:])
        raise CausalModelError(f"rank-deficient treatment design: collinear column(s) {bad}")

    beta, *_ = np.linalg.lstsq(x, t, rcond=None)
    rss = float(np.sum((t - x @ beta) ** 2))
    sigma2 = rss / (n - p)
    if sigma2 < MIN_GPS_VARIANCE:
        raise CausalModelError(
            "degenerate treatment variance: treatment is (near-)constant given covariates"
        )
    return GpsModel(coefficients=beta, sigma2=sigma2)


# ---------------------------------------------------------------------------
# dose-response estimation


@dataclass(frozen=True)
class AdrfEstimate:
    grid: np.ndarray
    mu: np.ndarray
    se: np.ndarray | None
    n_boot: int

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 1 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if len(self.mu) != len(g) or (self.se is not None and len(self.se) != len(g)):
            raise ValueError("grid, mu and se must have the same length")


def _spline_knots(t: np.ndarray, n_interior: int) -> np.ndarray:
    interior = np.quantile(t, np.linspace(0.0, 1.0, n_interior + 2)[1:-1])
    return np.concatenate([[t.min()] * 4, interior, [t.max()] * 4])


def _adrf_mu(y, t, x, grid, n_interior_knots: int) -> np.ndarray:
    if np.any(grid < t.min()) or np.any(grid > t.max()):
        raise CausalModelError("grid extends outside the observed treatment range")

    gps = fit_gps(t, x)
    r_own = gps.density(t, x)
    # the Gaussian density is symmetric in (t - mean), so it alone cannot
    # carry the confounder's sign; the treatment-model linear predictor
    # characterizes the propensity fully and restores identification.
    # Centered, so it vanishes when the adjustment set is empty.
    mean_t = np.asarray(x, dtype=float) @ gps.coefficients
    theta = mean_t - mean_t.mean()

    knots = _spline_knots(t, n_interior_knots)
    basis = BSpline.design_matrix(t, knots, 3).toarray()
    design = np.column_stack([basis, r_own, r_own * t, theta, theta * t])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    n_basis = basis.shape[1]
    gamma_b = coef[:n_basis]
    gamma_r, gamma_rt, gamma_p, gamma_pt = coef[n_basis:]

    basis_grid = BSpline.design_matrix(grid, knots, 3).toarray()
    mu = np.empty(len(grid))
    for j, value in enumerate(grid):
        r_cf = gps.density(value, x)  # counterfactual propensity at this dose
        mu[j] = basis_grid[j] @ gamma_b + np.mean(
            gamma_r * r_cf + gamma_rt * r_cf * value + gamma_p * theta + gamma_pt * theta * value
        )
    return mu


def estimate_adrf(
    outcome,
    treatment,
    covariates,
    grid,
    n_interior_knots: int = DEFAULT_INTERIOR_KNOTS,
) -> AdrfEstimate:
    """Doubly robust dose-response curve without error bands.

    Outcome model: cubic B-spline basis in the treatment (interior knots at
    treatment quantiles) plus propensity terms, fitted by least squares.
    The propensity enters twice: as the density value (with its treatment
    interaction) and as the centered treatment-model linear predictor (with
    interaction), which carries the part of the confounding signal the
    symmetric density cannot. Each grid value is scored by averaging the
    fitted surface over every unit's counterfactual propensity there.
    """
    y = np.asarray(outcome, dtype=float)
    t = np.asarray(treatment, dtype=float)
    x = np.asarray(covariates, dtype=float)
    grid = np.asarray(grid, dtype=float)
    mu = _adrf_mu(y, t, x, grid, n_interior_knots)
    return AdrfEstimate(grid=grid, mu=mu, se=None, n_boot=0)


def bootstrap_adrf(
    outcome,
    treatment,
    covariates,
    grid,
    n_boot: int = DEFAULT_N_BOOT,
    seed: int = 0,
    n_interior_knots: int = DEFAULT_INTERIOR_KNOTS,
) -> AdrfEstimate:
    """Dose-response curve with bootstrap pointwise standard errors.

    Units are resampled with replacement and the whole estimation re-run per
    replicate; failed replicates (e.g. a rank-deficient resample) are
    redrawn, up to 10 * n_boot attempts. Deterministic given the seed.
    """
    if n_boot < 100:
        raise ValueError("n_boot must be at least 100")
    y = np.asarray(outcome, dtype=float)
    t = np.asarray(treatment, dtype=float)
    x = np.asarray(covariates, dtype=float)
    grid = np.asarray(grid, dtype=float)

    point = estimate_adrf(y, t, x, grid, n_interior_knots)
    rng = np.random.default_rng(seed)
    n = len(y)
    draws = np.empty((n_boot, len(grid)))
    done = 0
    for _ in range(10 * n_boot):
        if done == n_boot:
            break
        idx = rng.integers(0, n, size=n)
        tb = t[idx]
        try:
            clipped = np.clip(grid, tb.min(), tb.max())  # resample range may not span the grid
            draws[done] = _adrf_mu(y[idx], tb, x[idx], clipped, n_interior_knots)
        except CausalModelError:
            continue
        done += 1
    if done < n_boot:
        raise CausalModelError(f"bootstrap exhausted retries: {done}/{n_boot} replicates succeeded")

    se = draws.std(axis=0, ddof=1)
    return AdrfEstimate(grid=grid, mu=point.mu, se=se, n_boot=n_boot)


# ---------------------------------------------------------------------------
# phase-3 driver


@dataclass(frozen=True)
class Phase3Config:
    n_boot: int = DEFAULT_N_BOOT
    seed: int = 0
    grid_points: int = DEFAULT_GRID_POINTS
    grid_quantiles: tuple[float, float] = DEFAULT_GRID_QUANTILES
    outcome: str = "score"  # scorecard attribute: "score" or "score_prime"
    outcome_node: str = "score"  # DAG node name of the outcome
    n_interior_knots: int = DEFAULT_INTERIOR_KNOTS


@dataclass(frozen=True)
class ExposureResult:
    exposure: str
    identifiable: bool
    adjustment_set: tuple[str, ...] | None
    minimal_sets: tuple[tuple[str, ...], ...]
    estimate: AdrfEstimate | None


def run_phase3(scorecards, sites, dag: CausalDag, exposures, config: Phase3Config = Phase3Config()) -> dict[str, ExposureResult]:
    """Dose-response of the trap score on each exposure, backdoor-adjusted.

    Joins scorecards to site covariates, picks the smallest minimal
    adjustment set (lexicographic tie-break), fits the GPS on it, and
    estimates the ADRF over a grid between the configured treatment
    quantiles with bootstrap bands. Non-identifiable exposures are recorded
    and skipped.
    """
    site_by_id = {s.trap_id: s for s in sites}
    rows = []
    for card in scorecards:
        value = getattr(card, config.outcome)
        if value is None:
            continue
        site = site_by_id.get(card.trap_id)
        if site is None:
            continue
        rows.append((value, site))
    if not rows:
        raise CausalModelError(f"no traps with a defined {config.outcome!r} to analyze")
    y = np.array([v for v, _ in rows])

    results: dict[str, ExposureResult] = {}
    for exposure in exposures:
        dag.require(exposure)
        minimal = backdoor_adjustment_sets(dag, exposure, config.outcome_node)
        if not minimal:
            results[exposure] = ExposureResult(exposure, False, None, (), None)
            continue
        chosen = sorted(minimal[0])

        def column(name: str) -> np.ndarray:
            try:
                return np.array([s.covariates[name] for _, s in rows])
            except KeyError:
                raise CausalModelError(f"covariate column {name!r} missing from site table") from None

        t = column(exposure)
        x = np.column_stack([np.ones(len(rows))] + [column(c) for c in chosen])
        lo, hi = np.quantile(t, config.grid_quantiles)
        if hi <= lo:
            raise CausalModelError(f"exposure {exposure!r} is constant across traps")
        grid = np.linspace(lo, hi, config.grid_points)
        estimate = bootstrap_adrf(
            y, t, x, grid,
            n_boot=config.n_boot,
            seed=config.seed,
            n_interior_knots=config.n_interior_knots,
        )
        results[exposure] = ExposureResult(
            exposure=exposure,
            identifiable=True,
            adjustment_set=tuple(chosen),
            minimal_sets=tuple(tuple(sorted(s)) for s in minimal),
            estimate=estimate,
        )
    return results
