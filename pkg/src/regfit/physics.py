"""Meshless collocation for 1-D linear second-order boundary-value problems,
and its fusion with data fitting.

A problem is a(x) u'' + b(x) u' + c(x) u = g(x) on [x_lo, x_hi] with
Dirichlet or Neumann boundary conditions. A candidate solution is a linear
combination of basis functions; its pointwise defect at the collocation
points is the residual vector that the solvers drive toward zero.

Two fusion strategies are implemented on top of the shared residual
machinery:

* ``penalized_fit`` adds the squared residuals (interior and boundary) to
  the data cost with a weight ``alpha_phys`` and solves the resulting
  quadratic; boundary conditions are only met approximately, ever more
  tightly as the weight grows.
* ``constrained_solve`` enforces the boundary rows exactly through Lagrange
  multipliers, reducing to a symmetric indefinite KKT linear system; the
  interior residual stays in the quadratic objective.

``pinn_train`` applies the penalty strategy to a neural network whose
input derivatives are taken by central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve

from .data import Dataset
from .errors import NumericalError, ValidationError
from .linear import BasisSpec, GaussianRBF, LinearModel, Polynomial, feature_matrix, ridge_solve
from .losses import MSE, LossSpec
from .network import MLP, backprop, backprop_from_output_grad, flatten_params, forward
from .optim import BatchSchedule, OptimizerState, step

# hard-constraint satisfaction tolerance (relative) and the jitter tried on
# a numerically singular KKT block
BC_RESIDUAL_RTOL = 1e-8
KKT_JITTER = 1e-12


@dataclass(frozen=True)
class BoundaryCondition:
    location: float
    kind: str  # "dirichlet" (value of u) or "neumann" (value of u')
    value: float

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise ValidationError(f"boundary kind must be dirichlet|neumann, got {self.kind!r}")


@dataclass(frozen=True)
class CollocationProblem:
    """Coefficients a, b, c and source g of a(x)u'' + b(x)u' + c(x)u = g(x),
    the domain, the boundary conditions, and (optionally) explicit interior
    collocation points. When the points are omitted, solvers default to
    2 * n_basis equispaced interior points."""

    a: object
    b: object
    c: object
    source: object
    domain: tuple
    boundary: tuple
    collocation_points: np.ndarray | None = None

    def __post_init__(self):
        lo, hi = (float(v) for v in self.domain)
        if not lo < hi:
            raise ValidationError(f"domain must satisfy x_lo < x_hi, got [{lo}, {hi}]")
        bcs = tuple(self.boundary)
        if not bcs:
            raise ValidationError("at least one boundary condition is required")
        pts = self.collocation_points
        if pts is not None:
            pts = np.array(pts, dtype=float, copy=True).ravel()
            if not ((pts > lo) & (pts < hi)).all():
                raise ValidationError("collocation points must lie strictly inside the domain")
            pts.setflags(write=False)
        object.__setattr__(self, "domain", (lo, hi))
        object.__setattr__(self, "boundary", bcs)
        object.__setattr__(self, "collocation_points", pts)

    def interior_points(self, n_basis: int) -> np.ndarray:
        if self.collocation_points is not None:
            return self.collocation_points
        lo, hi = self.domain
        return np.linspace(lo, hi, 2 * n_basis + 2)[1:-1]


@dataclass(frozen=True)
class PhysicsCost:
    """Data loss + alpha_phys * residual cost for one collocation problem."""

    problem: CollocationProblem
    alpha_phys: float
    data_loss: LossSpec = MSE()

    def __post_init__(self):
        if self.alpha_phys < 0:
            raise ValidationError(f"alpha_phys must be nonnegative, got {self.alpha_phys}")


@dataclass(frozen=True)
class ConstrainedSolution:
    """Weights, Lagrange multipliers and the achieved boundary defect."""

    weights: np.ndarray
    multipliers: np.ndarray
    constraint_residual_norm: float


def derivative_matrices(basis: BasisSpec, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Feature matrix and its first/second derivatives at scalar points x.

    Gaussian columns exp(-c^2 (x - xc)^2) differentiate to
    -2 c^2 (x - xc) phi and (4 c^4 (x - xc)^2 - 2 c^2) phi; polynomial
    columns differentiate power by power.
    """
    x = np.asarray(x, dtype=float).ravel()
    if isinstance(basis, GaussianRBF):
        if basis.centers.shape[1] != 1:
            raise ValidationError("derivative matrices require 1-D centers")
        d = x[:, None] - basis.centers[None, :, 0]
        c2 = basis.shapes**2
        phi = np.exp(-c2 * d * d)
        phi1 = -2.0 * c2 * d * phi
        phi2 = (4.0 * c2 * c2 * d * d - 2.0 * c2) * phi
        return phi, phi1, phi2
    if isinstance(basis, Polynomial):
        deg = basis.degree
        powers = np.arange(deg, -1, -1)  # highest power first
        phi = np.vander(x, deg + 1)
        phi1 = np.zeros_like(phi)
        phi2 = np.zeros_like(phi)
        for j, p in enumerate(powers):
            if p >= 1:
                phi1[:, j] = p * x ** (p - 1)
            if p >= 2:
                phi2[:, j] = p * (p - 1) * x ** (p - 2)
        return phi, phi1, phi2
    raise ValidationError(f"no derivative rule for basis {basis!r}")


def rbf_derivative_matrices(basis: GaussianRBF, x):
    """Analytic derivatives of the Gaussian radial basis (1-D inputs)."""
    if not isinstance(basis, GaussianRBF):
        raise ValidationError("rbf_derivative_matrices needs a GaussianRBF basis")
    return derivative_matrices(basis, x)


def _coeffs_at(problem: CollocationProblem, x: np.ndarray):
    a = np.asarray([problem.a(v) for v in x], dtype=float)
    b = np.asarray([problem.b(v) for v in x], dtype=float)
    c = np.asarray([problem.c(v) for v in x], dtype=float)
    g = np.asarray([problem.source(v) for v in x], dtype=float)
    return a, b, c, g


def operator_matrix(problem: CollocationProblem, basis: BasisSpec, x):
    """Rows of the collocated differential operator, L = a phi'' + b phi' + c phi,
    together with the source samples g."""
    x = np.asarray(x, dtype=float).ravel()
    phi, phi1, phi2 = derivative_matrices(basis, x)
    a, b, c, g = _coeffs_at(problem, x)
    return a[:, None] * phi2 + b[:, None] * phi1 + c[:, None] * phi, g


def boundary_rows(problem: CollocationProblem, basis: BasisSpec):
    """Constraint rows B and values u_b: one row per boundary condition,
    the feature row for Dirichlet and the derivative row for Neumann."""
    rows = []
    vals = []
    for bc in problem.boundary:
        phi, phi1, _ = derivative_matrices(basis, [bc.location])
        rows.append(phi[0] if bc.kind == "dirichlet" else phi1[0])
        vals.append(bc.value)
    return np.asarray(rows), np.asarray(vals, dtype=float)


def pde_residual(problem: CollocationProblem, basis: BasisSpec, w) -> np.ndarray:
    """Pointwise defect L w - g at the problem's collocation points."""
    w = np.asarray(w, dtype=float).ravel()
    x = problem.interior_points(basis.n_basis)
    L, g = operator_matrix(problem, basis, x)
    return L @ w - g


def _check_scalar_targets(d: Dataset | None):
    if d is not None and d.n_outputs != 1:
        raise ValidationError("physics-constrained fits support a single output column")
    if d is not None and d.n_inputs != 1:
        raise ValidationError("physics-constrained fits support 1-D inputs")


def physics_residual_norm(problem: CollocationProblem, basis: BasisSpec, w) -> float:
    """sqrt(mean squared interior residual + sum of squared boundary
    defects): the quantity the soft-constraint weight trades against the
    data error."""
    w = np.asarray(w, dtype=float).ravel()
    r = pde_residual(problem, basis, w)
    B, u_b = boundary_rows(problem, basis)
    bc = B @ w - u_b
    return float(np.sqrt(np.sum(r * r) / r.size + np.sum(bc * bc)))


def penalized_fit(
    d: Dataset | None,
    cost: PhysicsCost,
    basis: BasisSpec,
    alpha_reg: float = 0.0,
) -> LinearModel:
    """Quadratic data + physics fit with soft constraints.

    Minimizes

        mean squared data error
        + alpha_reg ||w||^2
        + alpha_phys * (mean squared interior residual
                        + sum of squared boundary defects)

    by stacking the scaled data rows, ridge rows, interior-residual rows and
    boundary rows into one augmented least-squares system (solved by SVD,
    which tolerates the severe conditioning of large physics weights).
    With alpha_phys = 0 and n_p data rows the minimizer coincides with
    ``ridge_fit`` at ridge alpha = n_p * alpha_reg (the data term here is a
    mean while the ridge normal equations use a sum).
    """
    _check_scalar_targets(d)
    if alpha_reg < 0:
        raise ValidationError(f"alpha_reg must be nonnegative, got {alpha_reg}")
    if not isinstance(cost.data_loss, MSE):
        raise ValidationError("the closed-form penalized fit requires the plain MSE data term")
    n_b = basis.n_basis
    if cost.alpha_phys == 0:
        # no physics rows left: this is ridge regression, solved by the same
        # normal-equations routine (note the mean-vs-sum alpha mapping)
        if d is not None:
            Phi = feature_matrix(basis, d.inputs)
            return LinearModel(basis, ridge_solve(Phi, d.targets[:, :1], d.n_points * alpha_reg))
        if alpha_reg > 0:
            return LinearModel(basis, np.zeros((n_b, 1)))
        raise ValidationError("need data rows, regularization, or a physics weight")
    blocks = []
    targets = []
    if d is not None:
        s = 1.0 / np.sqrt(d.n_points)
        blocks.append(s * feature_matrix(basis, d.inputs))
        targets.append(s * d.targets[:, 0])
    if alpha_reg > 0:
        blocks.append(np.sqrt(alpha_reg) * np.eye(n_b))
        targets.append(np.zeros(n_b))
    x_c = cost.problem.interior_points(n_b)
    L, g = operator_matrix(cost.problem, basis, x_c)
    B, u_b = boundary_rows(cost.problem, basis)
    s_int = np.sqrt(cost.alpha_phys / x_c.size)
    s_bc = np.sqrt(cost.alpha_phys)
    blocks.extend([s_int * L, s_bc * B])
    targets.extend([s_int * g, s_bc * u_b])
    M = np.vstack(blocks)
    rhs = np.concatenate(targets)
    w, _, rank, _ = np.linalg.lstsq(M, rhs, rcond=None)
    if rank < n_b and alpha_reg == 0:
        raise NumericalError(
            f"stacked data+physics system is rank-deficient (rank {rank} of {n_b}); "
            "add regularization (alpha_reg)"
        )
    return LinearModel(basis, w[:, None])


def constrained_solve(
    problem: CollocationProblem,
    basis: BasisSpec,
    alpha_reg: float,
    data: Dataset | None = None,
) -> ConstrainedSolution:
    """Interior-residual least squares subject to exact boundary conditions.

    Minimizes (data MSE if data is given) + alpha_reg ||w||^2
    + mean squared interior residual, subject to the boundary rows holding
    exactly; solved through the symmetric indefinite KKT system
    [[H, B^T], [B, 0]] [w; lambda] = [f; u_b].
    """
    _check_scalar_targets(data)
    if not alpha_reg > 0:
        raise ValidationError(f"alpha_reg must be positive, got {alpha_reg}")
    n_b = basis.n_basis
    x_c = problem.interior_points(n_b)
    L, g = operator_matrix(problem, basis, x_c)
    B, u_b = boundary_rows(problem, basis)
    n_eq = B.shape[0]
    if n_eq > n_b:
        raise ValidationError(f"{n_eq} hard constraints exceed the {n_b} basis functions")
    rank_B = np.linalg.matrix_rank(B)
    if rank_B < n_eq:
        aug_rank = np.linalg.matrix_rank(np.column_stack([B, u_b]))
        if aug_rank > rank_B:
            raise ValidationError("boundary conditions are mutually infeasible")
        raise ValidationError("boundary conditions are redundant; remove duplicates")
    H = 2.0 * (alpha_reg * np.eye(n_b) + (L.T @ L) / x_c.size)
    f = 2.0 * (L.T @ g) / x_c.size
    if data is not None:
        Phi = feature_matrix(basis, data.inputs)
        H = H + 2.0 * (Phi.T @ Phi) / data.n_points
        f = f + 2.0 * (Phi.T @ data.targets[:, 0]) / data.n_points
    kkt = np.block([[H, B.T], [B, np.zeros((n_eq, n_eq))]])
    rhs = np.concatenate([f, u_b])
    try:
        sol = solve(kkt, rhs, assume_a="sym")
    except LinAlgError:
        kkt_j = np.block([[H + KKT_JITTER * np.eye(n_b), B.T], [B, np.zeros((n_eq, n_eq))]])
        try:
            sol = solve(kkt_j, rhs, assume_a="sym")
        except LinAlgError as exc:
            raise NumericalError(
                f"KKT system is singular (rank {np.linalg.matrix_rank(kkt)} "
                f"of {kkt.shape[0]})"
            ) from exc
    w, lam = sol[:n_b], sol[n_b:]
    bc_defect = float(np.linalg.norm(B @ w - u_b))
    bc_scale = max(1.0, float(np.linalg.norm(u_b)))
    if bc_defect > BC_RESIDUAL_RTOL * bc_scale:
        raise NumericalError(
            f"boundary defect {bc_defect:.3e} exceeds {BC_RESIDUAL_RTOL:.0e} (relative)"
        )
    return ConstrainedSolution(w, lam, bc_defect)


def _network_physics_terms(net: MLP, problem: CollocationProblem, alpha_phys, fd_step):
    """Physics cost of the network and the matching output-gradient batch.

    Returns (cost, eval_points, dcost/du at those points); derivatives of
    the network along its input use central differences with step fd_step.
    """
    if problem.collocation_points is not None:
        x_c = problem.collocation_points
    else:
        # no explicit points: a fixed default independent of any basis
        lo, hi = problem.domain
        x_c = np.linspace(lo, hi, 34)[1:-1]
    h = fd_step
    a, b, c, g = _coeffs_at(problem, x_c)
    pts = [x_c - h, x_c, x_c + h]
    n_c = x_c.size
    neumann = [bc for bc in problem.boundary if bc.kind == "neumann"]
    dirichlet = [bc for bc in problem.boundary if bc.kind == "dirichlet"]
    for bc in dirichlet:
        pts.append(np.array([bc.location]))
    for bc in neumann:
        pts.append(np.array([bc.location - h, bc.location + h]))
    X = np.concatenate(pts)[:, None]
    u = forward(net, X)[0][:, 0]
    u_minus, u_0, u_plus = u[:n_c], u[n_c : 2 * n_c], u[2 * n_c : 3 * n_c]
    du = (u_plus - u_minus) / (2.0 * h)
    ddu = (u_plus - 2.0 * u_0 + u_minus) / (h * h)
    r = a * ddu + b * du + c * u_0 - g
    cost = float(np.sum(r * r) / n_c)
    G = np.zeros_like(u)
    dr = 2.0 * r / n_c
    G[:n_c] = dr * (a / (h * h) - b / (2.0 * h))
    G[n_c : 2 * n_c] = dr * (-2.0 * a / (h * h) + c)
    G[2 * n_c : 3 * n_c] = dr * (a / (h * h) + b / (2.0 * h))
    pos = 3 * n_c
    for bc in dirichlet:
        rb = u[pos] - bc.value
        cost += rb * rb
        G[pos] = 2.0 * rb
        pos += 1
    for bc in neumann:
        rb = (u[pos + 1] - u[pos]) / (2.0 * h) - bc.value
        cost += rb * rb
        G[pos] = -2.0 * rb / (2.0 * h)
        G[pos + 1] = 2.0 * rb / (2.0 * h)
        pos += 2
    return alpha_phys * cost, X, alpha_phys * G[:, None]


def pinn_cost(net: MLP, problem, data: Dataset | None, alpha_phys, fd_step=1e-3) -> float:
    """Combined data + physics cost of a network (monitoring helper)."""
    cost, _, _ = _network_physics_terms(net, problem, alpha_phys, fd_step)
    if data is not None:
        e = forward(net, data.inputs)[0] - data.targets
        cost += float(np.sum(e * e) / data.n_points)
    return cost


def pinn_train(
    net: MLP,
    problem: CollocationProblem,
    data: Dataset | None,
    alpha_phys: float,
    opt: OptimizerState,
    sched: BatchSchedule,
    fd_step: float = 1e-3,
) -> tuple[MLP, np.ndarray]:
    """Penalty-trained network solver for the collocation problem.

    The cost is the mean squared data error (when data is present) plus
    alpha_phys times the physics cost: mean squared interior residual with
    the network's u', u'' taken by central finite differences, plus squared
    boundary defects appended as extra penalty rows. Gradients flow through
    every finite-difference stencil evaluation by backprop.

    With data, each epoch walks seeded mini-batches of the data rows (the
    physics gradient is recomputed in full at every step); without data,
    each epoch is one full physics step. The per-epoch combined cost is
    recorded; training aborts with the last finite state on divergence.
    """
    _check_scalar_targets(data)
    if alpha_phys < 0:
        raise ValidationError(f"alpha_phys must be nonnegative, got {alpha_phys}")
    rng = np.random.default_rng(sched.shuffle_seed)
    history = []
    last_finite = net
    for _ in range(sched.epochs):
        if data is not None:
            perm = rng.permutation(data.n_points)
            batches = [
                perm[s : s + sched.batch_size]
                for s in range(0, data.n_points, sched.batch_size)
            ]
        else:
            batches = [None]
        w = flatten_params(net)
        for batch in batches:
            grad = np.zeros_like(w)
            if batch is not None:
                grad += backprop(net, data.inputs[batch], data.targets[batch], MSE())
            if alpha_phys > 0:
                _, X_points, G = _network_physics_terms(net, problem, alpha_phys, fd_step)
                grad += backprop_from_output_grad(net, X_points, G)
            w, opt = step(opt, w, grad)
            net = net.with_params(w)
        j = pinn_cost(net, problem, data, alpha_phys, fd_step)
        if not np.isfinite(j):
            return last_finite, np.asarray(history)
        last_finite = net
        history.append(j)
    return net, np.asarray(history)


# ---------------------------------------------------------------------------
# problem files: coefficient functions are named built-ins with parameters

def coefficient_from_spec(doc) -> object:
    """Build a scalar coefficient function from its JSON description.

    Supported kinds: const {value}, poly {coeffs, highest power first},
    sin {amplitude, frequency, phase} meaning A sin(f x + p).
    """
    if isinstance(doc, (int, float)):
        v = float(doc)
        return lambda x: v
    kind = doc.get("kind")
    if kind == "const":
        v = float(doc["value"])
        return lambda x: v
    if kind == "poly":
        coeffs = [float(c) for c in doc["coeffs"]]
        return lambda x: float(np.polyval(coeffs, x))
    if kind == "sin":
        amp = float(doc.get("amplitude", 1.0))
        freq = float(doc.get("frequency", 1.0))
        phase = float(doc.get("phase", 0.0))
        return lambda x: amp * np.sin(freq * x + phase)
    raise ValidationError(f"unknown coefficient kind {kind!r}")


def problem_from_dict(doc: dict) -> CollocationProblem:
    bcs = tuple(
        BoundaryCondition(float(b["location"]), str(b["kind"]).lower(), float(b["value"]))
        for b in doc["boundary"]
    )
    pts = doc.get("collocation_points")
    if pts is None and "n_collocation" in doc:
        lo, hi = (float(v) for v in doc["domain"])
        pts = np.linspace(lo, hi, int(doc["n_collocation"]) + 2)[1:-1]
    return CollocationProblem(
        a=coefficient_from_spec(doc.get("a", 1.0)),
        b=coefficient_from_spec(doc.get("b", 0.0)),
        c=coefficient_from_spec(doc.get("c", 0.0)),
        source=coefficient_from_spec(doc.get("source", 0.0)),
        domain=tuple(float(v) for v in doc["domain"]),
        boundary=bcs,
        collocation_points=pts,
    )


def load_problem(path) -> CollocationProblem:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc
    return problem_from_dict(doc)
