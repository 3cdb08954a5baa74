"""Decomposition of importance scores into per-source / per-pathway parts.

Two routes: the fast decomposition (one extra measure evaluation per
component, sensitive but not additive) and the Shapley decomposition
(additive and axiom-fair, exponentially many coalitions unless orders
are sampled).
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Optional

import numpy as np

from .core import ImportanceEstimate, derive_seed
from .errors import DimensionMismatch, TooManyPlayers
from .importance import ImportanceEvaluator

EXACT_SOLVER_MAX_PLAYERS = 15
AUTO_EXACT_THRESHOLD = 8


class CooperativeGame:
    """Coalition value function with a consistent evaluation cache."""

    def __init__(self, n_players: int, value_fn: Callable[[frozenset], float]):
        if n_players < 1:
            raise DimensionMismatch("need at least one player")
        self.n_players = n_players
        self._value_fn = value_fn
        self.cache: dict[frozenset, float] = {}

    def value(self, coalition) -> float:
        coalition = frozenset(coalition)
        if any(p < 0 or p >= self.n_players for p in coalition):
            raise DimensionMismatch(f"coalition {sorted(coalition)} out of range")
        if coalition not in self.cache:
            self.cache[coalition] = float(self._value_fn(coalition))
        return self.cache[coalition]


@dataclass(frozen=True)
class ShapleyResult:
    attributions: np.ndarray
    std_errors: np.ndarray
    n_orders_used: Optional[int]
    solver: str


def shapley_exact(game: CooperativeGame) -> ShapleyResult:
    """Exact Shapley attributions over all 2^n coalitions."""
    n = game.n_players
    if n > EXACT_SOLVER_MAX_PLAYERS:
        raise TooManyPlayers(f"{n} players exceeds exact-solver limit {EXACT_SOLVER_MAX_PLAYERS}")
    phi = np.zeros(n)
    for i in range(n):
        others = [p for p in range(n) if p != i]
        for size in range(n):
            weight = 1.0 / (n * comb(n - 1, size))
            for subset in itertools.combinations(others, size):
                s = frozenset(subset)
                phi[i] += weight * (game.value(s | {i}) - game.value(s))
    return ShapleyResult(phi, np.zeros(n), None, "exact")


def shapley_sampled(game: CooperativeGame, n_orders: int, seed: int = 0) -> ShapleyResult:
    """Shapley estimate from uniformly random player orders.

    The empirical mean satisfies efficiency exactly because every order
    telescopes to value(full) - value(empty).
    """
    n = game.n_players
    rng = np.random.default_rng(seed)
    contribs = np.empty((n_orders, n))
    for o in range(n_orders):
        perm = rng.permutation(n)
        prev = frozenset()
        v_prev = game.value(prev)
        for player in perm:
            cur = prev | {int(player)}
            v_cur = game.value(cur)
            contribs[o, int(player)] = v_cur - v_prev
            prev, v_prev = cur, v_cur
    phi = contribs.mean(axis=0)
    if n_orders > 1:
        se = contribs.std(axis=0, ddof=1) / np.sqrt(n_orders)
    else:
        se = np.zeros(n)
    return ShapleyResult(phi, se, n_orders, "sampled")


def solve_game(game: CooperativeGame, solver: str = "auto", n_orders: int = 50, seed: int = 0) -> ShapleyResult:
    if solver == "auto":
        solver = "exact" if game.n_players <= AUTO_EXACT_THRESHOLD else "sampled"
    if solver == "exact":
        return shapley_exact(game)
    if solver == "sampled":
        return shapley_sampled(game, n_orders, seed)
    raise DimensionMismatch(f"unknown solver {solver!r}")


@dataclass
class DecompositionTable:
    """Per-target row: total importance, per-source components, remainder."""

    target_label: str
    total: ImportanceEstimate
    components: dict[str, tuple[float, float]]
    method: str
    order_log: list = field(default_factory=list)
    per_context: list = field(default_factory=list)

    @property
    def remainder(self) -> float:
        return self.total.value - sum(v for v, _ in self.components.values())

    @property
    def combined_std_error(self) -> float:
        return float(np.sqrt(self.total.std_error ** 2 + sum(se ** 2 for _, se in self.components.values())))

    def as_dict(self) -> dict:
        return {
            "target": self.target_label,
            "method": self.method,
            "total": self.total.value,
            "total_se": self.total.std_error,
            "components": {k: {"value": v, "se": se} for k, (v, se) in self.components.items()},
            "remainder": self.remainder,
        }


# -- PFI decompositions ----------------------------------------------------


def fast_decompose_pfi(
    ev: ImportanceEvaluator, k: int, sources: Optional[list[int]] = None,
    n_mc: Optional[int] = None, seed: Optional[int] = None,
) -> DecompositionTable:
    """One DI-from evaluation per information source."""
    seed = ev.seed if seed is None else seed
    d = ev.data.n_cols
    sources = list(range(d)) if sources is None else list(sources)
    baseline = [c for c in range(d) if c != k]
    total = ev.pfi(k, n_mc=n_mc, seed=seed)
    components = {}
    for j in sources:
        est = ev.di_from([k], baseline, [j], n_mc=n_mc, seed=seed)
        components[ev.data.column_names[j]] = (est.value, est.std_error)
    return DecompositionTable(ev.data.column_names[k], total, components, "fast")


def fast_decompose_pfi_ordered(
    ev: ImportanceEvaluator, k: int, order: list[int],
    n_mc: Optional[int] = None, seed: Optional[int] = None,
) -> DecompositionTable:
    """Additive, order-dependent variant: telescoping DI-from prefixes."""
    seed = ev.seed if seed is None else seed
    d = ev.data.n_cols
    baseline = [c for c in range(d) if c != k]
    total = ev.pfi(k, n_mc=n_mc, seed=seed)
    components = {}
    prev_value, prev_se = 0.0, 0.0
    for i, j in enumerate(order):
        est = ev.di_from([k], baseline, order[: i + 1], n_mc=n_mc, seed=seed)
        components[ev.data.column_names[j]] = (
            est.value - prev_value,
            float(np.hypot(est.std_error, prev_se)),
        )
        prev_value, prev_se = est.value, est.std_error
    return DecompositionTable(
        ev.data.column_names[k], total, components, "fast_ordered", order_log=[list(order)]
    )


def shapley_decompose_pfi(
    ev: ImportanceEvaluator, k: int, players: Optional[list[int]] = None,
    solver: str = "auto", n_orders: int = 50,
    n_mc: Optional[int] = None, seed: Optional[int] = None,
) -> DecompositionTable:
    """Additive attribution of PFI over variable-players via DI-from games."""
    seed = ev.seed if seed is None else seed
    d = ev.data.n_cols
    players = list(range(d)) if players is None else list(players)
    baseline = [c for c in range(d) if c != k]
    game_seed = derive_seed(seed, 41)

    def value_fn(coalition: frozenset) -> float:
        sources = [players[p] for p in sorted(coalition)]
        return ev.di_from([k], baseline, sources, n_mc=n_mc, seed=game_seed).value

    game = CooperativeGame(len(players), value_fn)
    result = solve_game(game, solver, n_orders, derive_seed(seed, 42))
    total = ev.pfi(k, n_mc=n_mc, seed=game_seed)
    components = {
        ev.data.column_names[players[p]]: (float(result.attributions[p]), float(result.std_errors[p]))
        for p in range(len(players))
    }
    return DecompositionTable(
        ev.data.column_names[k], total, components, f"shapley_{result.solver}"
    )


# -- SAGE decompositions ----------------------------------------------------


def _sage_contexts(d: int, j: int, n_orders: int, seed: int) -> list[list[int]]:
    rng = np.random.default_rng(derive_seed(seed, 7001))
    contexts = []
    for _ in range(n_orders):
        perm = rng.permutation(d)
        pos = int(np.where(perm == j)[0][0])
        contexts.append([int(c) for c in perm[:pos]])
    return contexts


def fast_decompose_sage(
    ev: ImportanceEvaluator, j: int, pathways: Optional[list[int]] = None,
    n_orders: int = 25, n_mc: Optional[int] = None, seed: Optional[int] = None,
) -> DecompositionTable:
    """Per-pathway surplus components averaged over sampled SAGE orders.

    Interaction contributions are attributed to every partaking pathway,
    so components may over-add; the remainder is reported, not hidden.
    """
    seed = ev.seed if seed is None else seed
    d = ev.data.n_cols
    pathways = list(range(d)) if pathways is None else list(pathways)
    contexts = _sage_contexts(d, j, n_orders, seed)
    alphas = np.empty(n_orders)
    comp = np.empty((n_orders, len(pathways)))
    for o, context in enumerate(contexts):
        seed_o = derive_seed(seed, 811, o)
        alpha = ev.associative_importance([j], context, mode="marginalized", n_mc=n_mc, seed=seed_o)
        alphas[o] = alpha.value
        for p, k in enumerate(pathways):
            blocked = [c for c in range(d) if c != k]
            via = ev.ai_via([j], context, blocked, mode="marginalized", n_mc=n_mc, seed=seed_o)
            comp[o, p] = alpha.value - via.value
    total = ImportanceEstimate(
        float(alphas.mean()),
        float(alphas.std(ddof=1) / np.sqrt(n_orders)) if n_orders > 1 else 0.0,
        n_orders, "marginalized",
        {"measure": "SAGE", "interest": (j,), "n_orders": n_orders}, seed,
    )
    components = {}
    for p, k in enumerate(pathways):
        se = float(comp[:, p].std(ddof=1) / np.sqrt(n_orders)) if n_orders > 1 else 0.0
        components[ev.data.column_names[k]] = (float(comp[:, p].mean()), se)
    return DecompositionTable(
        ev.data.column_names[j], total, components, "fast", order_log=[list(c) for c in contexts]
    )


def shapley_decompose_sage(
    ev: ImportanceEvaluator, j: int, pathways: Optional[list[int]] = None,
    solver: str = "auto", n_sage_orders: int = 60, n_decomp_orders: int = 25,
    n_mc: Optional[int] = None, seed: Optional[int] = None, n_workers: int = 1,
) -> DecompositionTable:
    """Pathway games per SAGE context, Shapley-solved and pooled."""
    seed = ev.seed if seed is None else seed
    d = ev.data.n_cols
    pathways = list(range(d)) if pathways is None else list(pathways)
    contexts = _sage_contexts(d, j, n_sage_orders, seed)

    def solve_context(o: int):
        context = contexts[o]
        seed_o = derive_seed(seed, 813, o)

        def value_fn(coalition: frozenset) -> float:
            cols = [pathways[p] for p in sorted(coalition)]
            return ev.ai_via([j], context, cols, mode="marginalized", n_mc=n_mc, seed=seed_o).value

        game = CooperativeGame(len(pathways), value_fn)
        result = solve_game(game, solver, n_decomp_orders, derive_seed(seed, 814, o))
        alpha = game.value(frozenset(range(len(pathways))))
        return alpha, result

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            solved = list(pool.map(solve_context, range(n_sage_orders)))
    else:
        solved = [solve_context(o) for o in range(n_sage_orders)]

    alphas = np.array([alpha for alpha, _ in solved])
    phis = np.stack([res.attributions for _, res in solved])
    total = ImportanceEstimate(
        float(alphas.mean()),
        float(alphas.std(ddof=1) / np.sqrt(n_sage_orders)) if n_sage_orders > 1 else 0.0,
        n_sage_orders, "marginalized",
        {"measure": "SAGE", "interest": (j,), "n_orders": n_sage_orders}, seed,
    )
    components = {}
    for p, k in enumerate(pathways):
        col = phis[:, p]
        se = float(col.std(ddof=1) / np.sqrt(n_sage_orders)) if n_sage_orders > 1 else 0.0
        components[ev.data.column_names[k]] = (float(col.mean()), se)
    solver_name = solved[0][1].solver if solved else solver
    return DecompositionTable(
        ev.data.column_names[j], total, components, f"shapley_{solver_name}",
        order_log=[list(c) for c in contexts],
        per_context=[{"context": contexts[o], "alpha": float(alphas[o]),
                      "phi": [float(x) for x in phis[o]]} for o in range(n_sage_orders)],
    )
