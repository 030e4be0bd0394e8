"""Command-line front end.

Commands: balance | sensitivity | lambda-star | amplify | simulate.
Configuration comes from an optional JSON file plus flags (flags win);
the seed falls back to the BALSENS_SEED environment variable. All
outputs are plain CSV/JSON files, deterministic given inputs and seed.

Exit codes: 0 success, 2 schema/config error, 3 solver error,
4 lambda-star not bracketed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import amplification, bootstrap, simulate
from .core import (
    Dataset,
    Estimand,
    SensConfig,
    flip_treatment,
    standardize,
    validate,
)
from .errors import (
    BalsensError,
    DomainError,
    NotBracketedError,
    SchemaError,
    ValidationError,
)
from .balancer import (
    BalanceSpec,
    Method,
    TargetGroup,
    design,
    solve_entropy,
    solve_sbw_dual,
)

_ESTIMANDS = {
    "mu1": Estimand.MEAN_TREATED,
    "mu0": Estimand.MEAN_TREATED,  # via label flip at load time
    "mu01": Estimand.MEAN_CONTROL_OF_TREATED,
    "att": Estimand.ATT,
    "ate": Estimand.ATE,
}
_METHODS = {"sbw": Method.SBW_DUAL, "entropy": Method.ENTROPY}


def load_csv(path: str) -> Dataset:
    """Read a dataset: header row, required columns y and z, numeric rest."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot read CSV {path}: {exc}") from exc
    for required in ("y", "z"):
        if required not in frame.columns:
            raise SchemaError(f"missing required column '{required}'")
    covariate_cols = [c for c in frame.columns if c not in ("y", "z")]
    if not covariate_cols:
        raise SchemaError("no covariate columns found")
    for col in covariate_cols + ["y", "z"]:
        if not np.issubdtype(frame[col].dtype, np.number):
            raise SchemaError(
                f"column '{col}' is not numeric; pre-encode it first"
            )
    dataset = Dataset(
        y=frame["y"].to_numpy(dtype=float),
        z=frame["z"].to_numpy(),
        x=frame[covariate_cols].to_numpy(dtype=float),
        names=tuple(covariate_cols),
    )
    return validate(dataset)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [repr(float(v)) if isinstance(v, (float, np.floating)) else v
                 for v in row]
            )


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


class RunConfig:
    """Merged configuration: JSON file values overridden by flags."""

    defaults = {
        "estimand": "att",
        "method": "sbw",
        "tol": 0.05,
        "alpha": 0.05,
        "b_reps": 1000,
        "iota": 0.0,
        "lambda_sens": None,
        "lambda_grid": None,
        "lambda_max": 50.0,
        "out_dir": ".",
        "workers": 1,
        "input": None,
        "n": 2000,
        "n_sims": 100,
    }

    def __init__(self, args: argparse.Namespace):
        merged = dict(self.defaults)
        if args.config:
            try:
                with open(args.config) as fh:
                    file_conf = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise SchemaError(f"cannot read config: {exc}") from exc
            unknown = set(file_conf) - set(self.defaults) - {"seed"}
            if unknown:
                raise SchemaError(f"unknown config keys: {sorted(unknown)}")
            merged.update(file_conf)
        merged.setdefault("seed", None)
        self.explicit = set(file_conf) if args.config else set()
        for key, value in vars(args).items():
            if key in ("command", "config", "func"):
                continue
            if value is not None:
                merged[key] = value
                self.explicit.add(key)
        if merged["seed"] is None:
            merged["seed"] = int(os.environ.get("BALSENS_SEED", "0"))

        if merged["estimand"] not in _ESTIMANDS:
            raise SchemaError(f"unknown estimand {merged['estimand']!r}")
        if merged["method"] not in _METHODS:
            raise SchemaError(f"unknown method {merged['method']!r}")
        grid = merged["lambda_grid"]
        if grid is not None:
            if isinstance(grid, str):
                grid = [float(v) for v in grid.split(",")]
            if sorted(grid) != list(grid) or (grid and grid[0] < 1.0):
                raise SchemaError(
                    "lambda grid must be sorted ascending and start at >= 1"
                )
            merged["lambda_grid"] = grid
        self.values = merged

    def __getattr__(self, item):
        try:
            return self.values[item]
        except KeyError as exc:
            raise AttributeError(item) from exc

    @property
    def estimand_enum(self) -> Estimand:
        return _ESTIMANDS[self.values["estimand"]]

    @property
    def method_enum(self) -> Method:
        return _METHODS[self.values["method"]]

    @property
    def flip(self) -> bool:
        return self.values["estimand"] == "mu0"

    def dataset(self) -> Dataset:
        if not self.values["input"]:
            raise SchemaError("--input is required for this command")
        data = load_csv(self.values["input"])
        return flip_treatment(data) if self.flip else data

    def out_dir(self) -> Path:
        path = Path(self.values["out_dir"])
        path.mkdir(parents=True, exist_ok=True)
        return path

    def plan(self) -> bootstrap.BootstrapPlan:
        return bootstrap.BootstrapPlan(
            b_reps=int(self.values["b_reps"]), seed=int(self.values["seed"])
        )

    def sens(self, lam: float = 1.0) -> SensConfig:
        return SensConfig(
            lambda_sens=lam,
            alpha=float(self.values["alpha"]),
            b_reps=int(self.values["b_reps"]),
            seed=int(self.values["seed"]),
            iota=float(self.values["iota"]),
        )


def _primary_sides(config: RunConfig) -> list[TargetGroup]:
    est = config.estimand_enum
    if est is Estimand.MEAN_TREATED:
        return [TargetGroup.TREATED_TO_FULL]
    if est in (Estimand.MEAN_CONTROL_OF_TREATED, Estimand.ATT):
        return [TargetGroup.CONTROL_TO_TREATED]
    return [TargetGroup.TREATED_TO_FULL, TargetGroup.CONTROL_TO_FULL]


def cmd_balance(config: RunConfig) -> None:
    data = config.dataset()
    data_std, scaling = standardize(data)
    out = config.out_dir()
    solver = solve_sbw_dual if config.method_enum is Method.SBW_DUAL \
        else solve_entropy

    weight_rows = []
    table_rows = []
    fits_json = []
    for target_group in _primary_sides(config):
        spec = BalanceSpec(tol=float(config.tol), target_group=target_group)
        fit = solver(data_std, spec)
        _, group, target, _ = design(data_std, target_group)
        for row_id, gamma in zip(np.flatnonzero(group), fit.gamma):
            weight_rows.append((int(row_id), float(gamma)))
        group_mean = data_std.x[group].mean(axis=0)
        target_mean = target[1:]
        weighted_mean = fit.gamma @ data_std.x[group] / fit.gamma.sum()
        for j, name in enumerate(data.names):
            table_rows.append(
                (name, abs(group_mean[j] - target_mean[j]),
                 abs(weighted_mean[j] - target_mean[j]), target_group.value)
            )
        fits_json.append(json.loads(fit.to_json()))

    weight_rows.sort(key=lambda r: r[0])
    _write_csv(out / "weights.csv", ["row_id", "gamma"], weight_rows)
    _write_csv(
        out / "balance_table.csv",
        ["name", "delta_pre", "delta_post", "target_group"],
        table_rows,
    )
    _write_json(out / "fit.json", {"fits": fits_json})
    print(f"wrote weights.csv, fit.json, balance_table.csv to {out}")


def cmd_sensitivity(config: RunConfig) -> None:
    grid = config.lambda_grid
    if not grid:
        raise SchemaError("--lambda-grid is required for the sensitivity command")
    data = config.dataset()
    engine = bootstrap.BootstrapEngine(
        data,
        float(config.tol),
        config.plan(),
        config.estimand_enum,
        config.method_enum,
        int(config.workers),
    )
    rows = []
    for lam in grid:
        res = engine.interval_at(float(lam), float(config.alpha))
        rows.append(
            (float(lam), res.estimate_range.lo, res.estimate_range.hi,
             res.ci.lo, res.ci.hi)
        )
    out = config.out_dir()
    _write_csv(
        out / "intervals.csv",
        ["lambda", "est_lo", "est_hi", "ci_lo", "ci_hi"],
        rows,
    )
    print(f"wrote intervals.csv to {out}")


def _compute_lambda_star(config: RunConfig, data: Dataset,
                         engine=None) -> bootstrap.LambdaStar:
    return bootstrap.lambda_star(
        data,
        BalanceSpec(tol=float(config.tol)),
        config.sens(),
        config.plan(),
        config.estimand_enum,
        lambda_max=float(config.lambda_max),
        method=config.method_enum,
        workers=int(config.workers),
        engine=engine,
    )


def cmd_lambda_star(config: RunConfig) -> None:
    data = config.dataset()
    result = _compute_lambda_star(config, data)
    out = config.out_dir()
    _write_json(out / "lambda_star.json", result.to_dict())
    print(f"lambda_star = {result.value}"
          + (" (not significant at lambda = 1)" if result.not_significant else ""))


def cmd_amplify(config: RunConfig) -> None:
    estimand = config.estimand_enum
    if estimand is Estimand.ATE:
        raise SchemaError(
            "amplify analyzes one reweighted group; use mu1, mu0, or att"
        )
    data = config.dataset()
    if config.lambda_sens is not None:
        lam = float(config.lambda_sens)
    else:
        lam = _compute_lambda_star(config, data).value

    data_std, scaling = standardize(data)
    target_group = _primary_sides(config)[0]
    spec = BalanceSpec(tol=float(config.tol), target_group=target_group)
    solver = solve_sbw_dual if config.method_enum is Method.SBW_DUAL \
        else solve_entropy
    fit = solver(data_std, spec)
    result = amplification.amplify(
        data_std, fit.gamma, lam, estimand, flagged=scaling.constant
    )
    verdict = amplification.classify(result) if result.curve.size else None

    out = config.out_dir()
    _write_csv(out / "contour.csv", ["delta", "beta"],
               [tuple(p) for p in result.curve])
    _write_csv(
        out / "benchmarks.csv",
        ["name", "delta_pre", "delta_post", "beta_hat"],
        [(b.name, b.delta_pre, b.delta_post, b.beta_hat)
         for b in result.benchmarks if not b.flagged],
    )
    _write_csv(out / "hull.csv", ["delta", "beta"],
               [tuple(p) for p in result.hull])
    _write_json(
        out / "verdict.json",
        {
            "verdict": verdict.value if verdict else None,
            "error_bound": result.error_bound,
            "lambda": lam,
            "no_confounding_needed": result.no_confounding_needed,
        },
    )
    print(f"verdict: {verdict.value if verdict else 'NO_CONFOUNDING_NEEDED'}")


def cmd_simulate(config: RunConfig) -> None:
    dgp = simulate.DGPSpec(n=int(config.n), seed=int(config.seed))
    plan = config.plan()
    sens = config.sens(float(config.lambda_sens or 1.0))
    # the harness defaults to entropy balancing with exact balance
    method = config.method_enum if "method" in config.explicit else Method.ENTROPY
    tol = float(config.tol) if method is Method.SBW_DUAL else 0.0
    report = simulate.coverage_experiment(
        dgp, int(config.n_sims), plan, sens, method=method, tol=tol,
        workers=int(config.workers),
    )
    out = config.out_dir()
    _write_csv(
        out / "coverage.csv",
        ["sim_id", "estimate", "ci_lo", "ci_hi", "covered"],
        [(r.sim_id, r.estimate, r.ci_lo, r.ci_hi, int(r.covered))
         for r in report.records],
    )
    split = simulate.split_compare(dgp, plan, method=method, tol=tol)
    pairs = zip(
        split.split_vs_full["full_estimates"],
        split.split_vs_full["split_estimates"],
    )
    _write_csv(
        out / "split_compare.csv",
        ["replicate", "full_estimate", "split_estimate"],
        [(i, f, s) for i, (f, s) in enumerate(pairs)],
    )
    print(
        f"coverage = {report.coverage:.3f} over {report.reps} sims; "
        f"wrote coverage.csv and split_compare.csv to {out}"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="balsens",
        description="Balancing-weights causal estimates with percentile-"
        "bootstrap sensitivity analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "balance": cmd_balance,
        "sensitivity": cmd_sensitivity,
        "lambda-star": cmd_lambda_star,
        "amplify": cmd_amplify,
        "simulate": cmd_simulate,
    }
    for name, func in commands.items():
        cmd = sub.add_parser(name)
        cmd.set_defaults(func=func)
        cmd.add_argument("--input")
        cmd.add_argument("--config")
        cmd.add_argument("--estimand", choices=sorted(_ESTIMANDS))
        cmd.add_argument("--lambda", dest="lambda_sens", type=float)
        cmd.add_argument("--lambda-grid", dest="lambda_grid")
        cmd.add_argument("--lambda-max", dest="lambda_max", type=float)
        cmd.add_argument("--alpha", type=float)
        cmd.add_argument("--b-reps", dest="b_reps", type=int)
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--tol", type=float)
        cmd.add_argument("--method", choices=sorted(_METHODS))
        cmd.add_argument("--iota", type=float)
        cmd.add_argument("--out-dir", dest="out_dir")
        cmd.add_argument("--workers", type=int)
        if name == "simulate":
            cmd.add_argument("--n", type=int)
            cmd.add_argument("--n-sims", dest="n_sims", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(args)
        args.func(config)
    except NotBracketedError as exc:
        _emit_error(exc)
        return 4
    except (SchemaError, ValidationError, DomainError) as exc:
        _emit_error(exc)
        return 2
    except BalsensError as exc:
        _emit_error(exc)
        return 3
    return 0


def _emit_error(exc: BalsensError) -> None:
    print(
        json.dumps({"error": exc.code, "message": str(exc), **exc.details}),
        file=sys.stderr,
    )


if __name__ == "__main__":
    sys.exit(main())
