"""Command-line interface.

Subcommands: knots, factor, bound, fit, predict, sample, simulate.  Inputs
are headered CSV files plus flat key=value config files; every subcommand
prints one JSON document (with a ``schema_version`` field) to stdout, writes
any tabular output to files named by flags, and keeps human-oriented notes
on stderr.  Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

import argparse
import csv
import json
import sys

import numpy as np

from .bounds import continuum_tail, eps_for_confidence, finite_set_tail
from .data import load_csv
from .errors import NumericalError
from .kernels import ARDSquaredExponential, ScaledProjectedSE, VaryingCoefficientSum
from .lowrank import kappa_s, pivoted_ichol
from .mcmc import SamplerConfig, run_chain
from .regression import component_posterior, marginal_loglik, posterior_predict

SCHEMA_VERSION = 1


def _emit(payload):
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def _note(message):
    print(message, file=sys.stderr)


def read_config(path):
    """Parse a flat key=value config file; '#' starts a comment line."""
    config = {}
    with open(path) as handle:
        for line_no, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}: line {line_no}: expected key=value")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key in config:
                raise ValueError(f"{path}: duplicate key {key!r}")
            config[key] = value.strip()
    return config


def _floats(text, key):
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse {text!r} as numbers") from None


def _projection_from_config(text, dim):
    if text in (None, "", "identity"):
        return np.eye(dim)
    if text.startswith("axis:"):
        axis = int(text.split(":", 1)[1])
        if not 0 <= axis < dim:
            raise ValueError(f"projection axis {axis} out of range for dimension {dim}")
        Q = np.zeros((dim, dim))
        Q[axis, axis] = 1.0
        return Q
    rows = [_floats(row, "projection") for row in text.split(";")]
    return np.asarray(rows)


def kernel_from_config(config, coord_dim):
    """Build (kernel, covariate column names) from a parsed config dict.

    Supported kinds (key ``kernel``):
      ardse                    rates=r1,...,rp
      scaled_projected_se      decay=..., projection=identity|axis:K|a,b;c,d
                               [x_column=NAME]
      varying_coefficient_sum  scales=s0,...,sJ decays=b0,...,bJ
                               covariate_columns=n1,...,nJ
    """
    kind = config.get("kernel")
    if kind is None:
        raise ValueError("kernel config must set 'kernel'")
    if kind == "ardse":
        if "rates" not in config:
            raise ValueError("ardse kernel needs 'rates'")
        rates = _floats(config["rates"], "rates")
        if len(rates) != coord_dim:
            raise ValueError(f"got {len(rates)} rates for {coord_dim} coordinate columns")
        return ARDSquaredExponential(rates), ()
    if kind == "scaled_projected_se":
        if "decay" not in config:
            raise ValueError("scaled_projected_se kernel needs 'decay'")
        projection = _projection_from_config(config.get("projection"), coord_dim)
        kernel = ScaledProjectedSE(float(config["decay"]), projection)
        x_column = config.get("x_column")
        return kernel, ((x_column,) if x_column else ())
    if kind == "varying_coefficient_sum":
        for key in ("scales", "decays"):
            if key not in config:
                raise ValueError(f"varying_coefficient_sum kernel needs {key!r}")
        scales = _floats(config["scales"], "scales")
        decays = _floats(config["decays"], "decays")
        names = tuple(
            name.strip()
            for name in config.get("covariate_columns", "").split(",")
            if name.strip()
        )
        if len(scales) != len(names) + 1:
            raise ValueError(
                f"{len(scales)} scales require {len(scales) - 1} covariate_columns, "
                f"got {len(names)}"
            )
        kernel = VaryingCoefficientSum(scales, decays, coord_dim=coord_dim)
        return kernel, names
    raise ValueError(f"unknown kernel kind {kind!r}")


def _coord_names(args):
    if args.coords:
        return [name.strip() for name in args.coords.split(",") if name.strip()]
    return None


def _load_with_kernel(args, response=None):
    """Read the kernel config and the data file it applies to."""
    config = read_config(args.kernel_config)
    coords = _coord_names(args)
    peek = load_csv(args.data, coords=coords, response=response)
    wanted_coords = coords or [f"x{j + 1}" for j in range(peek.p)]
    kernel, covariate_cols = kernel_from_config(config, peek.p)
    dataset = load_csv(
        args.data,
        coords=wanted_coords,
        response=response,
        covariates=covariate_cols,
        id_column=getattr(args, "id_col", None),
    )
    return dataset, kernel, covariate_cols, wanted_coords


def factor_summary(factor):
    return {
        "schema_version": SCHEMA_VERSION,
        "n": int(factor.n),
        "rank": int(factor.rank),
        "pivot": [int(i) for i in factor.pivot],
        "abs_tol": float(factor.abs_tol),
        "kappa_s": float(kappa_s(factor)),
        "terminated_by": factor.terminated_by,
    }


def cmd_factor(args):
    dataset, kernel, covariate_cols, _ = _load_with_kernel(args)
    factor = pivoted_ichol(
        kernel, dataset.rows(covariate_cols), rel_tol=args.tol_rel, m_max=args.m_max
    )
    if args.rows_out:
        with open(args.rows_out, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow([f"c{j + 1}" for j in range(factor.n)])
            for row in factor.rows:
                writer.writerow([repr(float(v)) for v in row])
        _note(f"wrote {factor.rank} factor rows to {args.rows_out}")
    summary = factor_summary(factor)
    if args.rows_out:
        summary["rows_out"] = args.rows_out
    _emit(summary)
    _note(f"rank {factor.rank} of {factor.n}, kappa_s {kappa_s(factor):.3e}")
    return 0


def cmd_knots(args):
    dataset, kernel, covariate_cols, coord_names = _load_with_kernel(args)
    factor = pivoted_ichol(
        kernel, dataset.rows(covariate_cols), rel_tol=args.tol_rel, m_max=args.m_max
    )
    with open(args.out, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["selection_order", "original_index"]
            + coord_names
            + ["residual_sd_before_selection"]
        )
        for k in range(factor.rank):
            index = int(factor.pivot[k])
            writer.writerow(
                [k + 1, index]
                + [repr(float(v)) for v in dataset.pts[index]]
                + [repr(float(factor.rows[k, k]))]
            )
    summary = factor_summary(factor)
    summary["knots_out"] = args.out
    _emit(summary)
    _note(f"wrote {factor.rank} knots to {args.out}")
    return 0


def cmd_bound(args):
    if (args.eps is None) == (args.prob is None):
        raise ValueError("pass exactly one of --eps and --prob")
    if args.prob is not None:
        if args.continuum:
            raise ValueError("--prob inversion is available for the finite-set bound only")
        eps = eps_for_confidence(args.prob, args.kappa, args.set_size, modified=args.modified)
        _emit({
            "schema_version": SCHEMA_VERSION,
            "eps": eps,
            "target_prob": args.prob,
            "kappa": args.kappa,
            "set_size": args.set_size,
            "modified": bool(args.modified),
        })
        return 0
    if args.continuum:
        value = continuum_tail(
            args.eps, args.kappa, args.p, args.a, args.b, args.c, cap=not args.raw
        )
        payload = {
            "schema_version": SCHEMA_VERSION,
            "bound": value,
            "eps": args.eps,
            "kappa": args.kappa,
            "domain": {"p": args.p, "a": args.a, "b": args.b, "c": args.c},
        }
    else:
        value = finite_set_tail(
            args.eps, args.kappa, args.set_size, modified=args.modified, cap=not args.raw
        )
        payload = {
            "schema_version": SCHEMA_VERSION,
            "bound": value,
            "eps": args.eps,
            "kappa": args.kappa,
            "set_size": args.set_size,
            "modified": bool(args.modified),
        }
    _emit(payload)
    return 0


def _fit_pieces(args):
    dataset, kernel, covariate_cols, _ = _load_with_kernel(args, response=args.response)
    rows = dataset.rows(covariate_cols)
    factor = pivoted_ichol(kernel, rows, rel_tol=args.tol_rel, m_max=args.m_max)
    mu = float(np.mean(dataset.y)) if args.mu is None else args.mu
    tau2 = float(np.var(dataset.y)) if args.tau2 is None else args.tau2
    loglik = marginal_loglik(
        dataset.y, factor, sigma2=args.sigma2, mu=mu, tau2=tau2, mode=args.mode
    )
    summary = {
        "schema_version": SCHEMA_VERSION,
        "n": int(dataset.n),
        "mode": args.mode,
        "rank": int(factor.rank),
        "kappa_s": float(kappa_s(factor)),
        "abs_tol": float(factor.abs_tol),
        "terminated_by": factor.terminated_by,
        "loglik": float(loglik),
        "mu": float(mu),
        "tau2": float(tau2),
        "sigma2": float(args.sigma2),
    }
    return dataset, kernel, covariate_cols, factor, mu, tau2, summary


def cmd_fit(args):
    *_, summary = _fit_pieces(args)
    _emit(summary)
    _note(f"loglik {summary['loglik']:.6f} at rank {summary['rank']}")
    return 0


def cmd_predict(args):
    dataset, kernel, covariate_cols, factor, mu, tau2, summary = _fit_pieces(args)
    new = load_csv(
        args.new,
        coords=_coord_names(args) or [f"x{j + 1}" for j in range(dataset.p)],
        covariates=covariate_cols,
        id_column=args.id_col,
    )
    new_rows = new.rows(covariate_cols)
    post = posterior_predict(
        dataset.y, factor, new_rows, sigma2=args.sigma2, mu=mu, tau2=tau2, mode=args.mode
    )
    comp = None
    comp_names = []
    if isinstance(kernel, VaryingCoefficientSum):
        comp = component_posterior(
            dataset.y, factor, new_rows, sigma2=args.sigma2, mu=mu, tau2=tau2, mode=args.mode
        )
        comp_names = ["intercept"] + list(covariate_cols)
    ids = new.ids if new.ids is not None else [str(i) for i in range(new.n)]
    with open(args.out, "w", newline="") as handle:
        writer = csv.writer(handle)
        header = ["id", "mean", "sd"]
        for name in comp_names:
            header += [f"coef_{name}_mean", f"coef_{name}_sd", f"coef_{name}_effect"]
        writer.writerow(header)
        sd = post.sd
        for i in range(new.n):
            record = [ids[i], repr(float(post.mean[i])), repr(float(sd[i]))]
            if comp is not None:
                for j in range(comp.n_components):
                    record += [
                        repr(float(comp.means[j, i])),
                        repr(float(np.sqrt(comp.variances[j, i]))),
                        repr(float(comp.effect_sizes[j, i])),
                    ]
            writer.writerow(record)
    summary["n_new"] = int(new.n)
    summary["predictions_out"] = args.out
    if comp_names:
        summary["components"] = comp_names
    _emit(summary)
    _note(f"wrote {new.n} predictions to {args.out}")
    return 0


def _config_float(config, key, default=None):
    if key not in config:
        if default is None:
            raise ValueError(f"sampler config needs {key!r}")
        return default
    return float(config[key])


def _config_int(config, key, default=None):
    if key not in config:
        if default is None:
            raise ValueError(f"sampler config needs {key!r}")
        return default
    return int(config[key])


def cmd_sample(args):
    config = read_config(args.config)
    coords = _coord_names(args)
    response = config.get("response", "y")
    peek = load_csv(args.data, coords=coords, response=response)
    kernel, covariate_cols = kernel_from_config(config, peek.p)
    wanted_coords = coords or [f"x{j + 1}" for j in range(peek.p)]
    dataset = load_csv(
        args.data, coords=wanted_coords, response=response, covariates=covariate_cols
    )
    n_par = len(kernel.param_names) + 1

    steps_text = config.get("steps", "0.2")
    steps = _floats(steps_text, "steps")
    init = _floats(config["init"], "init") if "init" in config else None
    seed = args.seed if args.seed is not None else _config_int(config, "seed", 0)
    sampler = SamplerConfig(
        n_sweeps=_config_int(config, "sweeps"),
        burn_in=_config_int(config, "burn_in"),
        thin=_config_int(config, "thin", 1),
        step_sizes=steps[0] if len(steps) == 1 else np.asarray(steps),
        seed=seed,
        rel_tol=_config_float(config, "tol_rel", 1e-2),
        m_max=_config_int(config, "m_max", 0) or None,
        adapt_steps=config.get("adapt", "true").lower() != "false",
        init=np.asarray(init) if init is not None else None,
    )
    mu = float(config["mu"]) if "mu" in config else None
    tau2 = float(config["tau2"]) if "tau2" in config else None
    mode = config.get("mode", "dtc")
    chain = run_chain(sampler, dataset.rows(covariate_cols), dataset.y, kernel,
                      mu=mu, tau2=tau2, mode=mode)

    with open(args.chain_out, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sweep"] + chain.param_names + ["log_post", "m", "accepted"])
        for t in range(chain.n_sweeps):
            writer.writerow(
                [t]
                + [repr(float(v)) for v in chain.params[t]]
                + [repr(float(chain.log_post[t])), int(chain.rank[t]), int(chain.accepted[t])]
            )
    summary = {
        "schema_version": SCHEMA_VERSION,
        "n": int(dataset.n),
        "n_sweeps": int(chain.n_sweeps),
        "burn_in": int(chain.burn_in),
        "thin": int(chain.thin),
        "seed": int(seed),
        "acceptance_rate": float(chain.acceptance_rate),
        "params": {
            name: {
                "median": float(chain.medians[j]),
                "ci_lower": float(chain.ci_lower[j]),
                "ci_upper": float(chain.ci_upper[j]),
            }
            for j, name in enumerate(chain.param_names)
        },
        "rank": {
            "min": int(chain.rank.min()),
            "max": int(chain.rank.max()),
            "final": int(chain.rank[-1]),
        },
        "chain_out": args.chain_out,
    }
    _emit(summary)
    _note(f"acceptance {chain.acceptance_rate:.3f} over {chain.n_sweeps} sweeps")
    return 0


def cmd_simulate(args):
    from .regression import simulate_pp

    dataset, kernel, covariate_cols, _ = _load_with_kernel(args)
    factor = pivoted_ichol(
        kernel, dataset.rows(covariate_cols), rel_tol=args.tol_rel, m_max=args.m_max
    )
    _, xi = simulate_pp(factor, n_draws=args.draws, seed=args.seed)
    max_abs = np.abs(xi).max(axis=1)
    if args.out:
        with open(args.out, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["draw", "max_abs_xi"])
            for t, value in enumerate(max_abs):
                writer.writerow([t, repr(float(value))])
    summary = factor_summary(factor)
    summary["draws"] = int(args.draws)
    summary["seed"] = int(args.seed)
    summary["max_abs_xi"] = {
        "mean": float(max_abs.mean()),
        "q50": float(np.quantile(max_abs, 0.5)),
        "q90": float(np.quantile(max_abs, 0.9)),
        "q99": float(np.quantile(max_abs, 0.99)),
        "max": float(max_abs.max()),
    }
    if args.out:
        summary["draws_out"] = args.out
    _emit(summary)
    return 0


def _add_data_arguments(parser, with_response=False):
    parser.add_argument("--data", required=True, help="input CSV with a header row")
    parser.add_argument("--coords",
                        help="comma-separated coordinate column names (default: x1, x2, ...)")
    parser.add_argument("--id-col", help="optional id column name")
    if with_response:
        parser.add_argument("--response", default="y", help="response column name")


def _add_factor_arguments(parser):
    parser.add_argument("--kernel-config", required=True,
                        help="key=value file describing the kernel")
    parser.add_argument("--tol-rel", type=float, default=1e-2,
                        help="relative stopping tolerance on the sd scale")
    parser.add_argument("--m-max", type=int, default=None, help="rank cap")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="adapp",
        description="Adaptive predictive-process Gaussian processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factor", help="run the pivoted incomplete Cholesky")
    _add_data_arguments(p)
    _add_factor_arguments(p)
    p.add_argument("--rows-out", help="optional CSV for the factor rows")
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("knots", help="export the selected knots as CSV")
    _add_data_arguments(p)
    _add_factor_arguments(p)
    p.add_argument("--out", required=True, help="knots CSV path")
    p.set_defaults(func=cmd_knots)

    p = sub.add_parser("bound", help="evaluate the accuracy tail bounds")
    p.add_argument("--eps", type=float, help="deviation threshold")
    p.add_argument("--prob", type=float,
                   help="invert the finite-set bound for this tail probability")
    p.add_argument("--kappa", type=float, required=True,
                   help="largest residual standard deviation")
    p.add_argument("--set-size", type=int, default=1, help="candidate set size")
    p.add_argument("--modified", action="store_true",
                   help="variance-restoring (diagonal-corrected) variant")
    p.add_argument("--continuum", action="store_true", help="whole-domain bound")
    p.add_argument("--p", type=int, default=1, help="domain dimension (continuum)")
    p.add_argument("--a", type=float, default=0.0, help="box lower edge (continuum)")
    p.add_argument("--b", type=float, default=1.0, help="box upper edge (continuum)")
    p.add_argument("--c", type=float, default=1.0,
                   help="increment-variance growth constant (continuum)")
    p.add_argument("--raw", action="store_true", help="report values above 1 uncapped")
    p.set_defaults(func=cmd_bound)

    for name, func in (("fit", cmd_fit), ("predict", cmd_predict)):
        p = sub.add_parser(name, help=f"{name} the low-rank regression model")
        _add_data_arguments(p, with_response=True)
        _add_factor_arguments(p)
        p.add_argument("--mode", choices=["dtc", "modified"], default="dtc")
        p.add_argument("--sigma2", type=float, default=0.1,
                       help="noise variance relative to tau2")
        p.add_argument("--mu", type=float, default=None,
                       help="fixed mean (default: sample mean of the response)")
        p.add_argument("--tau2", type=float, default=None,
                       help="fixed scale (default: sample variance of the response)")
        if name == "predict":
            p.add_argument("--new", required=True, help="CSV of prediction points")
            p.add_argument("--out", required=True, help="predictions CSV path")
        p.set_defaults(func=func)

    p = sub.add_parser("sample", help="random-walk Metropolis over the parameters")
    _add_data_arguments(p)
    p.add_argument("--config", required=True,
                   help="key=value file with kernel and sampler settings")
    p.add_argument("--chain-out", required=True, help="chain CSV path")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate", help="draw the process and its rank-m residual")
    _add_data_arguments(p)
    _add_factor_arguments(p)
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="optional per-draw CSV (draw, max_abs_xi)")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None):
    """Entry point returning the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run():
    """Console-script wrapper."""
    raise SystemExit(main())


if __name__ == "__main__":
    run()
