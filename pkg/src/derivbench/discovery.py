"""Equation discovery from evaluated candidate-term libraries.

Two backends over the same library: sequentially thresholded least squares
(the deterministic sparse-regression workhorse) and an elitist
multi-objective evolutionary search over term subsets, whose two
objectives are residual MSE and active-term count.  Small pools admit an
exact brute-force Pareto oracle, used by the tests to validate the search.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .benchmarks import ReferenceEquation
from .core import Field
from .diffapi import DiffResult

Deriv = tuple[int, int]  # (axis, order)

_AXIS_SUFFIX = ("t", "x")


def deriv_label(var: str, deriv: Deriv | None) -> str:
    if deriv is None:
        return var
    axis, order = deriv
    return f"{var}_{_AXIS_SUFFIX[axis] * order}"


@dataclass(frozen=True)
class TermSpec:
    """Product of powers of state variables and/or their derivatives."""

    factors: tuple[tuple[str, Deriv | None, int], ...]  # (var, deriv, power)

    def __post_init__(self) -> None:
        if any(power < 1 for _, _, power in self.factors):
            raise ValueError("factor powers must be >= 1")

    @property
    def id(self) -> str:
        if not self.factors:
            return "1"
        parts = []
        for var, deriv, power in self.factors:
            base = deriv_label(var, deriv)
            parts.append(base if power == 1 else f"{base}^{power}")
        return "*".join(parts)

    @property
    def degree(self) -> int:
        return sum(power for _, _, power in self.factors)

    def source_labels(self) -> tuple[str, ...]:
        return tuple(deriv_label(var, deriv) for var, deriv, _ in self.factors)

    def evaluate(self, columns: dict[str, np.ndarray]) -> np.ndarray:
        size = len(next(iter(columns.values())))
        out = np.ones(size)
        for var, deriv, power in self.factors:
            out = out * columns[deriv_label(var, deriv)] ** power
        return out


CONSTANT_TERM = TermSpec(())


def state_term(var: str, power: int = 1) -> TermSpec:
    return TermSpec(((var, None, power),))


def deriv_term(var: str, axis: int, order: int) -> TermSpec:
    return TermSpec(((var, (axis, order), 1),))


def polynomial_terms(var_names: list[str], degree: int) -> list[TermSpec]:
    """Constant plus all state monomials up to the given total degree."""
    terms = [CONSTANT_TERM]
    for total in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(sorted(var_names), total):
            factors = tuple(
                (var, None, combo.count(var)) for var in sorted(set(combo))
            )
            terms.append(TermSpec(factors))
    return terms


@dataclass
class CandidateLibrary:
    """Evaluated candidate terms restricted to jointly mask-valid nodes."""

    terms: list[TermSpec]
    matrix: np.ndarray  # (rows, len(terms))
    target: np.ndarray  # (rows,)
    target_term: TermSpec
    valid_rows: np.ndarray  # flat node indices that survived masking

    def __post_init__(self) -> None:
        if self.matrix.shape != (len(self.target), len(self.terms)):
            raise ValueError("library matrix shape mismatch")
        if not np.isfinite(self.matrix).all() or not np.isfinite(self.target).all():
            raise ValueError("library contains non-finite entries")


def build_library(
    fields: dict[str, Field],
    estimates: dict[str, DiffResult],
    target: TermSpec,
    degree: int = 2,
    terms: list[TermSpec] | None = None,
) -> CandidateLibrary:
    """Assemble the term matrix and target column on mask-valid nodes.

    `estimates` is keyed by derivative label ("x_t", "u_tt", ...).  When
    `terms` is omitted, the feature set is every state monomial up to
    `degree` (the protocol for the linear system); explicit pools cover the
    ODE/PDE cases.  Rows are the intersection of the validity masks of all
    derivative estimates any term (or the target) touches.
    """
    if terms is None:
        terms = polynomial_terms(sorted(fields), degree)
    terms = [t for t in terms if t.id != target.id]

    columns: dict[str, np.ndarray] = {name: f.flat for name, f in fields.items()}
    mask = None
    needed = set(target.source_labels())
    for term in terms:
        needed.update(term.source_labels())
    for label in sorted(needed):
        if label in columns:
            continue
        if label not in estimates:
            raise ValueError(f"no field or derivative estimate supplies {label!r}")
        est = estimates[label]
        columns[label] = est.derivative.flat
        flat_mask = est.valid_mask.reshape(-1)
        mask = flat_mask if mask is None else (mask & flat_mask)

    size = len(next(iter(columns.values())))
    if mask is None:
        mask = np.ones(size, dtype=bool)
    valid_rows = np.flatnonzero(mask)
    if valid_rows.size == 0:
        raise ValueError("no nodes survive the intersection of validity masks")

    restricted = {label: col[valid_rows] for label, col in columns.items()}
    matrix = np.column_stack([term.evaluate(restricted) for term in terms])
    return CandidateLibrary(
        terms=terms,
        matrix=matrix,
        target=target.evaluate(restricted),
        target_term=target,
        valid_rows=valid_rows,
    )


@dataclass
class EquationModel:
    """lhs = sum(coefficients * terms); zeros mark inactive terms."""

    lhs: TermSpec
    terms: list[TermSpec]
    coefficients: np.ndarray
    residual_mse: float
    flags: tuple[str, ...] = dc_field(default=())

    @property
    def complexity(self) -> int:
        return int(np.count_nonzero(self.coefficients))

    def active(self) -> dict[str, float]:
        return {
            term.id: float(c)
            for term, c in zip(self.terms, self.coefficients)
            if c != 0.0
        }

    def structure(self) -> frozenset[str]:
        return frozenset(self.active())

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs.id,
            "terms": [
                {"id": tid, "coefficient": coef} for tid, coef in self.active().items()
            ],
            "residual_mse": self.residual_mse,
            "complexity": self.complexity,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _fit_subset(lib: CandidateLibrary, active: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares coefficients on the active columns and the residual MSE.

    Residuals at double-precision noise level are clamped to exactly zero so
    that exact fits through collinear columns tie instead of being ranked by
    rounding accidents.
    """
    coefs = np.zeros(len(lib.terms))
    if active.any():
        sub = lib.matrix[:, active]
        sol, _, _, _ = np.linalg.lstsq(sub, lib.target, rcond=None)
        coefs[active] = sol
        resid = lib.target - sub @ sol
    else:
        resid = lib.target
    resid_mse = float(np.mean(resid * resid))
    floor = 1e-28 * float(np.mean(lib.target * lib.target))
    return coefs, 0.0 if resid_mse <= floor else resid_mse


def stlsq(lib: CandidateLibrary, threshold: float = 0.05, max_iter: int = 20) -> EquationModel:
    """Sequentially thresholded least squares.

    Alternates a full least-squares fit with hard-thresholding of small
    coefficients until the support stops changing.  If everything is
    thresholded away the result is returned flagged "empty" rather than
    raising.
    """
    if lib.matrix.shape[0] < lib.matrix.shape[1]:
        raise ValueError("library needs at least as many rows as terms")
    active = np.ones(len(lib.terms), dtype=bool)
    coefs, resid = _fit_subset(lib, active)
    for _ in range(max_iter):
        keep = np.abs(coefs) >= threshold
        if not keep.any():
            return EquationModel(
                lib.target_term, lib.terms, np.zeros(len(lib.terms)), resid, ("empty",)
            )
        if (keep == active).all():
            break
        active = keep
        coefs, resid = _fit_subset(lib, active)
    return EquationModel(lib.target_term, lib.terms, coefs, resid)


@dataclass(frozen=True)
class EvolutionParams:
    population: int = 30
    generations: int = 60
    mutation_rate: float = 0.1
    crossover_rate: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 10:
            raise ValueError("population must be >= 10")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")


@dataclass
class ParetoFront:
    individuals: list[EquationModel]

    def __post_init__(self) -> None:
        costs = [(ind.residual_mse, ind.complexity) for ind in self.individuals]
        for i, a in enumerate(costs):
            for j, b in enumerate(costs):
                if i != j and _dominates(b, a):
                    raise ValueError("returned front contains a dominated individual")


def _dominates(a: tuple[float, int], b: tuple[float, int]) -> bool:
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def _nondominated_sort(costs: list[tuple[float, int]]) -> list[list[int]]:
    n = len(costs)
    dominated_by = [[] for _ in range(n)]
    domination_count = [0] * n
    fronts: list[list[int]] = [[]]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if _dominates(costs[i], costs[j]):
                dominated_by[i].append(j)
            elif _dominates(costs[j], costs[i]):
                domination_count[i] += 1
        if domination_count[i] == 0:
            fronts[0].append(i)
    current = 0
    while fronts[current]:
        nxt = []
        for i in fronts[current]:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        current += 1
        fronts.append(nxt)
    return [f for f in fronts if f]


def _crowding(costs: list[tuple[float, int]], front: list[int]) -> dict[int, float]:
    distance = {i: 0.0 for i in front}
    for dim in range(2):
        ordered = sorted(front, key=lambda i: costs[i][dim])
        lo, hi = costs[ordered[0]][dim], costs[ordered[-1]][dim]
        distance[ordered[0]] = distance[ordered[-1]] = math.inf
        if hi == lo:
            continue
        for pos in range(1, len(ordered) - 1):
            gap = costs[ordered[pos + 1]][dim] - costs[ordered[pos - 1]][dim]
            distance[ordered[pos]] += gap / (hi - lo)
    return distance


def evolutionary_discover(lib: CandidateLibrary, params: EvolutionParams) -> ParetoFront:
    """Term-subset evolution with elitist non-dominated selection.

    Genomes are inclusion masks over the library terms (the lhs is the
    library's target term); fitness objectives are residual MSE of the
    least-squares fit and active-term count.  Deterministic per seed.
    """
    n_terms = len(lib.terms)
    if n_terms < 1:
        raise ValueError("term pool is empty")
    rng = np.random.default_rng(params.seed)

    cache: dict[bytes, tuple[np.ndarray, float]] = {}

    def evaluate(genome: np.ndarray) -> tuple[np.ndarray, float]:
        key = genome.tobytes()
        if key not in cache:
            cache[key] = _fit_subset(lib, genome)
        return cache[key]

    pop = [rng.random(n_terms) < 0.5 for _ in range(params.population)]
    costs = []
    for genome in pop:
        coefs, resid = evaluate(genome)
        costs.append((resid, int(genome.sum())))

    def rank_and_crowd(cost_list):
        fronts = _nondominated_sort(cost_list)
        rank = {}
        crowd = {}
        for level, front in enumerate(fronts):
            dist = _crowding(cost_list, front)
            for i in front:
                rank[i] = level
                crowd[i] = dist[i]
        return rank, crowd

    for _ in range(params.generations):
        rank, crowd = rank_and_crowd(costs)

        def tournament() -> int:
            a, b = rng.integers(0, len(pop), size=2)
            if rank[a] != rank[b]:
                return int(a if rank[a] < rank[b] else b)
            return int(a if crowd[a] >= crowd[b] else b)

        offspring = []
        while len(offspring) < params.population:
            p1, p2 = pop[tournament()], pop[tournament()]
            if rng.random() < params.crossover_rate:
                swap = rng.random(n_terms) < 0.5
                child = np.where(swap, p1, p2)
            else:
                child = p1.copy()
            flip = rng.random(n_terms) < params.mutation_rate
            child = child ^ flip
            offspring.append(child)

        pop = pop + offspring
        costs = costs + [
            (evaluate(g)[1], int(g.sum())) for g in offspring
        ]

        # Elitist survival: fill by front, break ties by crowding distance.
        rank, crowd = rank_and_crowd(costs)
        order = sorted(range(len(pop)), key=lambda i: (rank[i], -crowd[i]))
        keep = order[: params.population]
        pop = [pop[i] for i in keep]
        costs = [costs[i] for i in keep]

    fronts = _nondominated_sort(costs)
    seen: set[frozenset[str]] = set()
    individuals = []
    for i in sorted(fronts[0], key=lambda i: costs[i][1]):
        coefs, resid = evaluate(pop[i])
        model = EquationModel(lib.target_term, lib.terms, coefs, resid)
        if model.structure() in seen:
            continue
        seen.add(model.structure())
        individuals.append(model)
    return ParetoFront(individuals)


def brute_force_pareto(lib: CandidateLibrary) -> ParetoFront:
    """Exact Pareto front by enumerating every term subset (small pools)."""
    n_terms = len(lib.terms)
    if n_terms > 20:
        raise ValueError("brute force is limited to pools of <= 20 terms")
    models = []
    for bits in range(1 << n_terms):
        genome = np.array([(bits >> i) & 1 for i in range(n_terms)], dtype=bool)
        coefs, resid = _fit_subset(lib, genome)
        models.append(EquationModel(lib.target_term, lib.terms, coefs, resid))
    costs = [(m.residual_mse, m.complexity) for m in models]
    front_idx = _nondominated_sort(costs)[0]
    seen: set[frozenset[str]] = set()
    front = []
    for i in sorted(front_idx, key=lambda i: costs[i][1]):
        if models[i].structure() in seen:
            continue
        seen.add(models[i].structure())
        front.append(models[i])
    return ParetoFront(front)


def structure_match(model: EquationModel, reference: ReferenceEquation) -> bool:
    """True iff lhs and the active term SET match; coefficients ignored."""
    return model.lhs.id == reference.lhs_term and model.structure() == set(
        reference.term_ids()
    )


def pareto_correct_share(front: ParetoFront, reference: ReferenceEquation) -> float:
    if not front.individuals:
        raise ValueError("empty Pareto front")
    hits = sum(structure_match(ind, reference) for ind in front.individuals)
    return hits / len(front.individuals)


def coefficient_stats(models: list[EquationModel], term_id: str) -> dict[str, float]:
    """Order statistics of one coefficient across repeated runs."""
    if not models:
        raise ValueError("need at least one model")
    values = []
    for model in models:
        ids = [t.id for t in model.terms]
        if term_id not in ids:
            raise ValueError(f"term {term_id!r} absent from model vocabulary")
        values.append(float(model.coefficients[ids.index(term_id)]))
    arr = np.asarray(values)
    return {
        "median": float(np.median(arr)),
        "q25": float(np.percentile(arr, 25)),
        "q75": float(np.percentile(arr, 75)),
        "min": float(arr.min()),
        "max": float(arr.max()),
    }


def benchmark_pool(name: str) -> tuple[list[TermSpec], TermSpec | None]:
    """Feature terms and (single-equation) target for each benchmark.

    linear2d has two targets (x_t, y_t) handled by the harness, so its
    target slot is None and features are the degree-2 state monomials.
    """
    if name == "linear2d":
        return polynomial_terms(["x", "y"], 2), None
    if name == "oscillator":
        return [state_term("u"), deriv_term("u", 0, 1)], deriv_term("u", 0, 2)
    if name == "wave":
        features = [
            state_term("u"),
            deriv_term("u", 0, 1),
            deriv_term("u", 1, 1),
            deriv_term("u", 1, 2),
            TermSpec((("u", None, 1), ("u", (1, 1), 1))),  # u * u_x
        ]
        return features, deriv_term("u", 0, 2)
    raise ValueError(f"unknown benchmark {name!r}")
