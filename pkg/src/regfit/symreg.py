"""Symbolic regression by tree-based genetic programming.

Expressions are immutable syntax trees over a user-chosen primitive set:
binary '+', '-', '*', protected '/', unary sin/cos/exp, and the terminals
x_i (input variables) and real constants. Protected division returns 1
whenever |denominator| < 1e-12, and every node output is clamped to
+-1e300, so evaluation is total: finite inputs can never produce a
non-finite prediction.

The evolutionary loop is generational with elitism, replication, subtree
crossover and subtree mutation; parents come from tournament selection
with fitness ties broken by smaller trees, then by population index. The
population is initialized ramped half-and-half between depth 1 and the
configured maximum. Depth counts edges from the root: a lone terminal has
depth 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ValidationError
from .losses import mse

DIV_GUARD = 1e-12
VALUE_CLAMP = 1e300
CONST_RANGE = (-5.0, 5.0)
CROSSOVER_RETRIES = 8

BINARY_OPS = ("add", "sub", "mul", "div")
UNARY_OPS = ("sin", "cos", "exp")
TERMINALS = ("var", "const")
ARITY = {**{op: 2 for op in BINARY_OPS}, **{op: 1 for op in UNARY_OPS}, "var": 0, "const": 0}

_INFIX = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


@dataclass(frozen=True)
class ExprTree:
    """One node: an operation name, its children, and the terminal payload
    (variable index or constant value)."""

    op: str
    children: tuple = ()
    value: float | None = None
    index: int | None = None

    def __post_init__(self):
        if self.op not in ARITY:
            raise ValidationError(f"unknown node kind {self.op!r}")
        if len(self.children) != ARITY[self.op]:
            raise ValidationError(
                f"{self.op} takes {ARITY[self.op]} children, got {len(self.children)}"
            )
        if self.op == "const":
            if self.value is None or not np.isfinite(self.value):
                raise ValidationError("constant terminals need a finite value")
        if self.op == "var" and (self.index is None or self.index < 0):
            raise ValidationError("variable terminals need a nonnegative index")


def var(i: int) -> ExprTree:
    return ExprTree("var", index=i)


def const(v: float) -> ExprTree:
    return ExprTree("const", value=float(v))


def node(op: str, *children: ExprTree) -> ExprTree:
    return ExprTree(op, children=tuple(children))


def eval_tree(t: ExprTree, X) -> np.ndarray:
    """Evaluate the tree at every input row; always finite (see module doc)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with np.errstate(over="ignore", invalid="ignore"):
        out = _eval(t, X)
    return out


def _eval(t: ExprTree, X: np.ndarray) -> np.ndarray:
    if t.op == "const":
        return np.full(X.shape[0], t.value)
    if t.op == "var":
        if t.index >= X.shape[1]:
            raise ValidationError(
                f"variable x{t.index} out of range for {X.shape[1]} input columns"
            )
        return X[:, t.index].copy()
    args = [_eval(c, X) for c in t.children]
    if t.op == "add":
        out = args[0] + args[1]
    elif t.op == "sub":
        out = args[0] - args[1]
    elif t.op == "mul":
        out = args[0] * args[1]
    elif t.op == "div":
        out = np.where(np.abs(args[1]) < DIV_GUARD, 1.0, args[0] / np.where(args[1] == 0.0, 1.0, args[1]))
    elif t.op == "sin":
        out = np.sin(args[0])
    elif t.op == "cos":
        out = np.cos(args[0])
    else:  # exp
        out = np.exp(args[0])
    return np.clip(out, -VALUE_CLAMP, VALUE_CLAMP)


def tree_depth(t: ExprTree) -> int:
    """Edges from the root to the deepest leaf; a single terminal is 0."""
    if not t.children:
        return 0
    return 1 + max(tree_depth(c) for c in t.children)


def tree_size(t: ExprTree) -> int:
    return 1 + sum(tree_size(c) for c in t.children)


def to_prefix(t: ExprTree) -> str:
    """Parenthesized prefix form, e.g. (add (mul x0 x0) x0)."""
    if t.op == "var":
        return f"x{t.index}"
    if t.op == "const":
        return repr(t.value)
    inner = " ".join(to_prefix(c) for c in t.children)
    return f"({t.op} {inner})"


def to_infix(t: ExprTree) -> str:
    """Human-readable infix form with full parenthesization."""
    if t.op == "var":
        return f"x{t.index}"
    if t.op == "const":
        return repr(t.value)
    if t.op in _INFIX:
        a, b = (to_infix(c) for c in t.children)
        return f"({a} {_INFIX[t.op]} {b})"
    return f"{t.op}({to_infix(t.children[0])})"


def _positions(t: ExprTree, prefix=()) -> list:
    """Preorder list of node positions; a position is a child-index path."""
    out = [prefix]
    for i, c in enumerate(t.children):
        out.extend(_positions(c, prefix + (i,)))
    return out


def _subtree_at(t: ExprTree, pos) -> ExprTree:
    for i in pos:
        t = t.children[i]
    return t


def _replace_at(t: ExprTree, pos, repl: ExprTree) -> ExprTree:
    if not pos:
        return repl
    i = pos[0]
    children = list(t.children)
    children[i] = _replace_at(children[i], pos[1:], repl)
    return ExprTree(t.op, tuple(children), t.value, t.index)


@dataclass(frozen=True)
class GPConfig:
    """Primitive set, population shape and the genetic-operation rates
    (elitism + replication + crossover + mutation must sum to 1)."""

    primitives: tuple = ("add", "sub", "mul", "div", "sin", "cos", "var", "const")
    population_size: int = 200
    generations: int = 50
    elitism_rate: float = 0.05
    replication_rate: float = 0.1
    crossover_rate: float = 0.65
    mutation_rate: float = 0.2
    max_depth: int = 6
    tournament_size: int = 4
    seed: int = 0

    def __post_init__(self):
        prims = tuple(self.primitives)
        for p in prims:
            if p not in ARITY:
                raise ValidationError(f"unknown primitive {p!r}")
        if not any(p in TERMINALS for p in prims):
            raise ValidationError("primitive set needs at least one terminal kind")
        rates = (self.elitism_rate, self.replication_rate, self.crossover_rate, self.mutation_rate)
        if any(r < 0 or r > 1 for r in rates):
            raise ValidationError("rates must lie in [0, 1]")
        if abs(sum(rates) - 1.0) > 1e-9:
            raise ValidationError(f"rates must sum to 1, got {sum(rates)}")
        if self.population_size < 2:
            raise ValidationError("population must have at least 2 individuals")
        if self.generations < 1 or self.max_depth < 1 or self.tournament_size < 1:
            raise ValidationError("generations, max_depth and tournament_size must be >= 1")
        object.__setattr__(self, "primitives", prims)

    @property
    def functions(self) -> tuple:
        return tuple(p for p in self.primitives if ARITY[p] >= 1)

    @property
    def terminals(self) -> tuple:
        return tuple(p for p in self.primitives if p in TERMINALS)


def _random_terminal(rng, terminals, n_inputs) -> ExprTree:
    kind = terminals[rng.integers(len(terminals))]
    if kind == "var":
        return var(int(rng.integers(n_inputs)))
    return const(rng.uniform(*CONST_RANGE))


def random_tree(rng, cfg: GPConfig, n_inputs: int, depth: int, full: bool) -> ExprTree:
    """Grow ('full'=False) or full-method random tree of depth <= depth."""
    funcs = cfg.functions
    if depth <= 0 or not funcs or (not full and rng.random() < 0.3):
        return _random_terminal(rng, cfg.terminals, n_inputs)
    op = funcs[rng.integers(len(funcs))]
    kids = tuple(random_tree(rng, cfg, n_inputs, depth - 1, full) for _ in range(ARITY[op]))
    return ExprTree(op, kids)


def crossover(t1: ExprTree, t2: ExprTree, rng, max_depth: int = 17) -> tuple[ExprTree, ExprTree]:
    """Swap uniformly chosen subtrees; offspring deeper than max_depth are
    rejected and, after a few retries, the parents come back unchanged."""
    for _ in range(CROSSOVER_RETRIES):
        p1 = _positions(t1)
        p2 = _positions(t2)
        pos1 = p1[rng.integers(len(p1))]
        pos2 = p2[rng.integers(len(p2))]
        s1 = _subtree_at(t1, pos1)
        s2 = _subtree_at(t2, pos2)
        c1 = _replace_at(t1, pos1, s2)
        c2 = _replace_at(t2, pos2, s1)
        if tree_depth(c1) <= max_depth and tree_depth(c2) <= max_depth:
            return c1, c2
    return t1, t2


def mutate(t: ExprTree, rng, cfg: GPConfig, n_inputs: int) -> ExprTree:
    """Replace a uniformly chosen node by a freshly grown subtree that fits
    the remaining depth budget."""
    positions = _positions(t)
    pos = positions[rng.integers(len(positions))]
    budget = cfg.max_depth - len(pos)
    repl = random_tree(rng, cfg, n_inputs, budget, full=False)
    return _replace_at(t, pos, repl)


def _fitness(t: ExprTree, X: np.ndarray, y: np.ndarray) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        f = mse(y, eval_tree(t, X))
    return f if np.isfinite(f) else np.inf


def evolve(d: Dataset, cfg: GPConfig) -> tuple[ExprTree, np.ndarray]:
    """Run the genetic program; returns the best-ever tree and a
    (generations x 2) history of [best-so-far fitness, mean fitness].

    Fitness is the MSE of the tree's predictions against the targets.
    Deterministic given (dataset, config); non-convergence is a valid
    outcome.
    """
    if d.n_outputs != 1:
        raise ValidationError("symbolic regression supports a single target column")
    rng = np.random.default_rng(cfg.seed)
    X, y = d.inputs, d.targets[:, 0]
    n_inputs = d.n_inputs

    # ramped half-and-half initialization
    population = []
    for i in range(cfg.population_size):
        depth = 1 + i % cfg.max_depth
        population.append(random_tree(rng, cfg, n_inputs, depth, full=(i % 2 == 0)))

    def key(idx, fit):
        return (fit[idx], tree_size(population[idx]), idx)

    def tournament(fit):
        contenders = rng.integers(cfg.population_size, size=cfg.tournament_size)
        best = min(contenders, key=lambda i: key(i, fit))
        return population[best]

    n_elite = int(np.rint(cfg.elitism_rate * cfg.population_size))
    best_tree = None
    best_fit = np.inf
    history = np.zeros((cfg.generations, 2))
    for gen in range(cfg.generations):
        fit = np.array([_fitness(t, X, y) for t in population])
        order = sorted(range(cfg.population_size), key=lambda i: key(i, fit))
        leader = order[0]
        if fit[leader] < best_fit or (
            fit[leader] == best_fit
            and best_tree is not None
            and tree_size(population[leader]) < tree_size(best_tree)
        ):
            best_tree, best_fit = population[leader], fit[leader]
        finite = fit[np.isfinite(fit)]
        history[gen] = (best_fit, finite.mean() if finite.size else np.inf)
        if gen == cfg.generations - 1:
            break
        next_pop = [population[i] for i in order[:n_elite]]
        var_rates = np.array([cfg.replication_rate, cfg.crossover_rate, cfg.mutation_rate])
        total = var_rates.sum()
        while len(next_pop) < cfg.population_size:
            if total <= 0:  # pure-elitism config: pad with the elites in order
                next_pop.append(population[order[len(next_pop) % cfg.population_size]])
                continue
            u = rng.random() * total
            if u < var_rates[0]:
                next_pop.append(tournament(fit))
            elif u < var_rates[0] + var_rates[1]:
                c1, c2 = crossover(tournament(fit), tournament(fit), rng, cfg.max_depth)
                next_pop.append(c1)
                if len(next_pop) < cfg.population_size:
                    next_pop.append(c2)
            else:
                next_pop.append(mutate(tournament(fit), rng, cfg, n_inputs))
        population = next_pop
    return best_tree, history
