"""Command-line front end: fit/predict/cv/bootstrap/pde-solve/symreg/gen-data.

All randomness flows from the single --seed flag (default 42), every report
embeds the seed, and repeated runs with identical flags produce
byte-identical artifacts. Reports are JSON with a schema_version field;
data tables are CSV. Exit codes: 0 success, 1 validation error, 2
numerical failure.

Wall-clock timing is reported only when --with-timing is passed (the field
is null otherwise) so that default outputs stay reproducible.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError

from . import kernels, linear, losses, network, optim, physics, resampling, symreg
from .data import Dataset, generate_fig2_like, load_csv, load_inputs_csv, save_csv
from .errors import NumericalError, ValidationError

DEFAULT_SEED = 42
CONFIDENCE_FACTOR = 1.96  # half-width multiplier of the 95% band


def _write_json(path: Path, doc: dict) -> None:
    def convert(obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        raise TypeError(f"not JSON serializable: {type(obj)}")

    path.write_text(json.dumps(doc, sort_keys=True, indent=2, default=convert) + "\n")


def _write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(float(v), ".17g") for v in row])


def _outdir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _standardizer(d: Dataset):
    mean = d.inputs.mean(axis=0)
    std = d.inputs.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return {"mean": mean.tolist(), "std": std.tolist()}


def _apply_standardize(doc, X):
    if not doc:
        return X
    return (X - np.asarray(doc["mean"])) / np.asarray(doc["std"])


def _basis_from_args(args, d: Dataset) -> linear.BasisSpec:
    if args.rbf_centers:
        if d.n_inputs != 1:
            raise ValidationError("--rbf-centers places centers over a 1-D input range")
        lo, hi = float(d.inputs.min()), float(d.inputs.max())
        centers = np.linspace(lo, hi, args.rbf_centers)[:, None]
        shapes = (
            np.full(args.rbf_centers, args.rbf_shape)
            if args.rbf_shape
            else linear.default_rbf_shapes(centers)
        )
        return linear.GaussianRBF(centers, shapes)
    return linear.Polynomial(args.degree)


def _kernel_from_args(args) -> kernels.KernelSpec:
    if args.kernel == "gaussian":
        return kernels.GaussianKernel(args.gamma)
    if args.kernel == "linear":
        return kernels.LinearKernel()
    if args.kernel == "polynomial":
        return kernels.PolynomialKernel(args.kernel_degree, args.kernel_offset)
    raise ValidationError(f"unknown kernel {args.kernel!r}")


def _optimizer_from_args(args) -> optim.OptimizerState:
    name = args.optimizer
    if name == "gd":
        return optim.GD(eta=args.eta)
    if name == "momentum":
        return optim.Momentum(eta=args.eta, beta=args.beta)
    if name == "rmsprop":
        return optim.RMSProp(eta=args.eta, beta=args.beta, eps=args.opt_eps)
    if name == "adam":
        return optim.Adam(eta=args.eta, beta1=args.beta1, beta2=args.beta2, eps=args.opt_eps)
    raise ValidationError(f"unknown optimizer {name!r}")


def cmd_gen_data(args) -> int:
    out = _outdir(args)
    d = generate_fig2_like(args.n_points, args.seed)
    save_csv(d, out / "data.csv")
    _write_json(out / "report.json", {
        "schema_version": 1,
        "command": "gen-data",
        "seed": args.seed,
        "n_points": d.n_points,
    })
    return 0


def cmd_fit(args) -> int:
    out = _outdir(args)
    started = time.perf_counter()
    d = load_csv(args.input)
    loss = losses.parse_loss_spec(args.loss)
    standardize_doc = _standardizer(d) if args.standardize else None
    fit_data = (
        Dataset(_apply_standardize(standardize_doc, d.inputs), d.targets)
        if standardize_doc
        else d
    )
    history = None
    if args.model in ("ridge", "lasso"):
        basis = _basis_from_args(args, fit_data)
        if args.model == "ridge":
            model = linear.ridge_fit(fit_data, basis, args.alpha)
        else:
            model = linear.lasso_fit(fit_data, basis, args.alpha, args.max_iters, args.tol)
        final_loss = losses.loss_value(loss, fit_data.targets, model.predict(fit_data.inputs),
                                       model.get_params())
    elif args.model == "krr":
        model = kernels.krr_fit(fit_data, _kernel_from_args(args), args.alpha)
        final_loss = losses.loss_value(loss, fit_data.targets, model.predict(fit_data.inputs))
    elif args.model == "gpr":
        model = kernels.gpr_fit(fit_data, _kernel_from_args(args), args.noise)
        final_loss = losses.loss_value(loss, fit_data.targets, model.predict(fit_data.inputs))
    elif args.model == "mlp":
        sizes = [int(v) for v in args.layers.split(",")]
        if sizes[0] != fit_data.n_inputs or sizes[-1] != fit_data.n_outputs:
            raise ValidationError(
                f"--layers {args.layers} does not match data widths "
                f"({fit_data.n_inputs} in, {fit_data.n_outputs} out)"
            )
        acts = args.activations.split(",") if args.activations else None
        net = network.init_mlp(sizes, acts, seed=args.seed)
        sched = optim.BatchSchedule(min(args.batch, fit_data.n_points), args.epochs,
                                    shuffle_seed=args.seed)
        model, history = optim.minibatch_train(net, fit_data, loss,
                                               _optimizer_from_args(args), sched)
        final_loss = losses.loss_value(loss, fit_data.targets, model.predict(fit_data.inputs),
                                       model.get_params())
    else:
        raise ValidationError(f"unknown model {args.model!r}")
    doc = model.to_dict()
    if standardize_doc:
        doc["standardize"] = standardize_doc
    _write_json(out / "model.json", doc)
    if history is not None:
        _write_csv(out / "history.csv", ["epoch", "loss"],
                   [(i, v) for i, v in enumerate(history)])
    _write_json(out / "report.json", {
        "schema_version": 1,
        "command": "fit",
        "model": args.model,
        "seed": args.seed,
        "loss": args.loss,
        "final_loss": float(final_loss),
        "n_points": d.n_points,
        "elapsed_seconds": time.perf_counter() - started if args.with_timing else None,
    })
    return 0


def _load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc
    kind = doc.get("kind")
    if kind == "linear":
        return doc, linear.LinearModel.from_dict(doc)
    if kind == "krr":
        return doc, kernels.KRRModel.from_dict(doc)
    if kind == "gpr":
        return doc, kernels.GPRModel.from_dict(doc)
    if kind == "mlp":
        return doc, network.MLP.from_dict(doc)
    if kind == "linear_ensemble":
        return doc, None
    raise ValidationError(f"unknown model kind {kind!r}")


def cmd_predict(args) -> int:
    out = _outdir(args)
    doc, model = _load_model(args.model_file)
    X = load_inputs_csv(args.input)
    Xs = _apply_standardize(doc.get("standardize"), X)
    unc = None
    if doc["kind"] == "gpr":
        y, var = model.predict_with_variance(Xs)
        unc = CONFIDENCE_FACTOR * np.sqrt(var)
    elif doc["kind"] == "linear_ensemble":
        basis = linear.basis_from_dict(doc["basis"])
        W = np.asarray(doc["weight_population"])

        def predict_member(xg, w):
            return linear.LinearModel(basis, w[:, None]).predict(xg)[:, 0]

        y_mean, u = resampling.ensemble_predict(Xs, W, float(doc["j_i_mean"]), predict_member)
        y = y_mean[:, None]
        unc = CONFIDENCE_FACTOR * u
    else:
        y = model.predict(Xs)
    header = [f"x{i}" for i in range(X.shape[1])]
    header += [f"y{j}_mean" for j in range(y.shape[1])]
    rows = np.column_stack([X, y])
    if unc is not None:
        header.append("y_unc")
        rows = np.column_stack([rows, unc])
    _write_csv(out / "predictions.csv", header, rows)
    return 0


def _fit_fn_for_basis(basis):
    def fit(train: Dataset):
        model = linear.ridge_fit(train, basis, 0.0)
        return model.get_params(), model

    return fit


def cmd_cv(args) -> int:
    out = _outdir(args)
    d = load_csv(args.input)
    basis = _basis_from_args(args, d)

    report = resampling.kfold_cv(
        d, lambda train: linear.ridge_fit(train, basis, args.alpha),
        args.folds, seed=args.seed, shuffle=True,
    )
    _write_csv(out / "folds.csv", ["fold", "J_o"],
               [(k, v) for k, v in enumerate(report.per_fold_mse)])
    _write_json(out / "summary.json", {
        "schema_version": 1,
        "command": "cv",
        "K": args.folds,
        "mean": report.mean,
        "std": report.std,
        "seed": args.seed,
    })
    return 0


def cmd_bootstrap(args) -> int:
    out = _outdir(args)
    d = load_csv(args.input)
    if d.n_outputs != 1:
        raise ValidationError("bootstrap ensembles support a single target column")
    basis = _basis_from_args(args, d)
    result = resampling.bootstrap_ensemble(
        d, _fit_fn_for_basis(basis), args.members,
        test_fraction=args.test_fraction, mode=args.mode, seed=args.seed,
    )
    _write_csv(out / "members.csv", ["member", "J_i", "J_o"],
               [(j, result.in_sample_mse[j], result.out_sample_mse[j])
                for j in range(result.n_members)])
    _write_json(out / "summary.json", {
        "schema_version": 1,
        "command": "bootstrap",
        "n_E": result.n_members,
        "mode": args.mode,
        "mean": float(result.out_sample_mse.mean()),
        "std": float(result.out_sample_mse.std()),
        "seed": args.seed,
    })
    _write_json(out / "model.json", {
        "schema_version": 1,
        "kind": "linear_ensemble",
        "basis": linear.basis_to_dict(basis),
        "weight_population": result.weight_population.tolist(),
        "j_i_mean": float(result.in_sample_mse.mean()),
    })
    return 0


def cmd_pde_solve(args) -> int:
    out = _outdir(args)
    problem = physics.load_problem(args.problem)
    lo, hi = problem.domain
    centers = np.linspace(lo, hi, args.centers)[:, None]
    shapes = (
        np.full(args.centers, args.shape) if args.shape
        else linear.default_rbf_shapes(centers)
    )
    basis = linear.GaussianRBF(centers, shapes)
    data = load_csv(args.input) if args.input else None
    if args.mode == "kkt":
        solution = physics.constrained_solve(problem, basis, args.alpha_reg, data)
        w = solution.weights
        extra = {
            "multipliers": solution.multipliers.tolist(),
            "boundary_defect": solution.constraint_residual_norm,
        }
    else:
        cost = physics.PhysicsCost(problem, args.alpha_phys)
        model = physics.penalized_fit(data, cost, basis, args.alpha_reg)
        w = model.get_params()
        B, u_b = physics.boundary_rows(problem, basis)
        extra = {"boundary_defect": float(np.linalg.norm(B @ w - u_b))}
    residual = physics.pde_residual(problem, basis, w)
    x_c = problem.interior_points(args.centers)
    xs = np.linspace(lo, hi, args.samples)
    u = linear.LinearModel(basis, w[:, None]).predict(xs[:, None])[:, 0]
    _write_csv(out / "solution.csv", ["x", "u"], np.column_stack([xs, u]))
    _write_csv(out / "residuals.csv", ["x", "residual"], np.column_stack([x_c, residual]))
    _write_json(out / "residuals.json", {
        "schema_version": 1,
        "command": "pde-solve",
        "mode": args.mode,
        "seed": args.seed,
        "n_centers": args.centers,
        "alpha_reg": args.alpha_reg,
        "alpha_phys": args.alpha_phys if args.mode == "penalty" else None,
        "interior_residual_rms": float(np.sqrt(np.mean(residual**2))),
        "interior_residual_max": float(np.max(np.abs(residual))),
        **extra,
    })
    return 0


def cmd_symreg(args) -> int:
    out = _outdir(args)
    d = load_csv(args.input)
    cfg = symreg.GPConfig(
        primitives=tuple(args.primitives.split(",")),
        population_size=args.population,
        generations=args.generations,
        max_depth=args.max_depth,
        tournament_size=args.tournament,
        seed=args.seed,
    )
    best, history = symreg.evolve(d, cfg)
    (out / "expression.txt").write_text(
        f"{symreg.to_prefix(best)}\n{symreg.to_infix(best)}\n"
    )
    _write_csv(out / "history.csv", ["generation", "best_fitness", "mean_fitness"],
               [(g, history[g, 0], history[g, 1]) for g in range(history.shape[0])])
    _write_json(out / "summary.json", {
        "schema_version": 1,
        "command": "symreg",
        "seed": args.seed,
        "best_fitness": float(history[-1, 0]),
        "generations": args.generations,
        "population": args.population,
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regfit",
        description="regression and physics-constrained fitting over CSV datasets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--output", required=True, help="output directory")

    p = sub.add_parser("gen-data", help="write a synthetic noisy-curve dataset")
    common(p)
    p.add_argument("--n-points", type=int, default=60)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("fit", help="train a model and store it as JSON")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True,
                   choices=["ridge", "lasso", "krr", "gpr", "mlp"])
    p.add_argument("--loss", default="mse",
                   help="mse | wmse | huber:d | eps:e | ridge:a | lasso:a")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--rbf-centers", type=int, default=0)
    p.add_argument("--rbf-shape", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--kernel", default="gaussian",
                   choices=["gaussian", "linear", "polynomial"])
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--kernel-degree", type=int, default=2)
    p.add_argument("--kernel-offset", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=1e-6)
    p.add_argument("--layers", default="1,16,16,1")
    p.add_argument("--activations", default="")
    p.add_argument("--optimizer", default="adam",
                   choices=["gd", "momentum", "rmsprop", "adam"])
    p.add_argument("--eta", type=float, default=1e-3)
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--beta1", type=float, default=0.9)
    p.add_argument("--beta2", type=float, default=0.999)
    p.add_argument("--opt-eps", type=float, default=1e-8)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--standardize", action="store_true",
                   help="z-score the inputs (stored with the model)")
    p.add_argument("--with-timing", action="store_true",
                   help="record wall-clock time in the report (non-reproducible)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="evaluate a stored model on query inputs")
    common(p)
    p.add_argument("--model", dest="model_file", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="K-fold cross-validation of a polynomial/RBF fit")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--rbf-centers", type=int, default=0)
    p.add_argument("--rbf-shape", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("bootstrap", help="bootstrap ensemble assessment + bagged model")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--members", type=int, default=100)
    p.add_argument("--test-fraction", type=float, default=0.3)
    p.add_argument("--mode", default="split", choices=["split", "replacement"])
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--rbf-centers", type=int, default=0)
    p.add_argument("--rbf-shape", type=float, default=0.0)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("pde-solve", help="RBF collocation solve of a 1-D BVP")
    common(p)
    p.add_argument("--problem", required=True, help="problem definition JSON")
    p.add_argument("--input", default="", help="optional data CSV to fit alongside")
    p.add_argument("--centers", type=int, default=40)
    p.add_argument("--shape", type=float, default=0.0)
    p.add_argument("--alpha-reg", type=float, default=1e-10)
    p.add_argument("--alpha-phys", type=float, default=1.0)
    p.add_argument("--mode", default="kkt", choices=["kkt", "penalty"])
    p.add_argument("--samples", type=int, default=200)
    p.set_defaults(func=cmd_pde_solve)

    p = sub.add_parser("symreg", help="genetic-programming symbolic regression")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--population", type=int, default=200)
    p.add_argument("--generations", type=int, default=50)
    p.add_argument("--primitives", default="add,sub,mul,div,sin,cos,var,const")
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--tournament", type=int, default=4)
    p.set_defaults(func=cmd_symreg)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
