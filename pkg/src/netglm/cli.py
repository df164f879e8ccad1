"""Command-line interface.

Subcommands: generate, fit, test, select-r, simulate, analyze. Exit codes:
0 success, 2 configuration error, 3 numerical failure, 4 data error.
"""

from __future__ import annotations

import json
import logging
import os
import sys

import click
import numpy as np

from . import __version__
from .analysis import (
    FitConfig,
    assortativity,
    backward_eliminate,
    centralities,
    centrality_correlations,
    cv_auc,
    effect_strength,
    top_effect_groups,
)
from .dataio import (
    align_to_network,
    dumps_report,
    load_relational,
    load_tabular,
    write_dense_csv,
    write_edgelist,
    write_report,
)
from .errors import ConfigError, DataError, NetglmError, NumericalError
from .estimator import fit_network_glm
from .families import make_family
from .inference import coef_test, network_effect_test_fit
from .netgen import (
    avg_degree_rule,
    dcbm_matrix,
    graphon_matrix,
    paper_design,
    sample_adjacency,
    sbm_matrix,
)
from .rng import stream
from .simharness import ScenarioConfig, report_row, run_scenario
from .subspace import (
    ADJACENCY_LEADING,
    LAPLACIAN_SMALLEST,
    align_subspaces,
    orthonormal_basis,
    r_threshold,
    select_r,
    spectral_basis,
)

_MODES = {"adjacency": ADJACENCY_LEADING, "laplacian": LAPLACIAN_SMALLEST}

logger = logging.getLogger("netglm")


class _JsonLogFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps(
            {"level": record.levelname, "logger": record.name, "message": record.getMessage()}
        )


def _setup_logging(json_logs: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(_JsonLogFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("netglm")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--out", type=click.Path(), default=None, help="Output directory.")
@click.option("--threads", type=int, default=1, show_default=True, help="Worker processes.")
@click.option("--json-logs", is_flag=True, help="Emit logs as JSON lines.")
@click.version_option(version=__version__, prog_name="netglm")
@click.pass_context
def cli(ctx, seed, out, threads, json_logs):
    """Subspace-constrained GLMs for network-linked data."""
    _setup_logging(json_logs)
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    ctx.obj = {"seed": seed, "out": out, "threads": threads}


def _outdir(ctx) -> str:
    out = ctx.obj["out"] or "."
    os.makedirs(out, exist_ok=True)
    return out


def _emit(ctx, payload: dict, filename: str) -> None:
    """Print a JSON report and also write it when --out was given."""
    text = dumps_report(payload)
    click.echo(text)
    if ctx.obj["out"]:
        path = os.path.join(_outdir(ctx), filename)
        with open(path, "w") as fh:
            fh.write(text)
            fh.write("\n")


def _load_relational_inputs(network, embedding, n=None) -> np.ndarray:
    if embedding is not None:
        if network:
            raise ConfigError("pass either --network or --embedding, not both")
        F = np.loadtxt(embedding, delimiter=",", comments="#", ndmin=2)
        return F @ F.T
    if not network:
        raise ConfigError("a --network file (or --embedding) is required")
    return load_relational(list(network), n=n)


def _load_fit_inputs(network, embedding, covariates, response, group=None):
    P_hat = _load_relational_inputs(network, embedding)
    tab = load_tabular(covariates, response=response, group=group)
    tab, ids = align_to_network(tab, P_hat.shape[0])
    if tab.ids.size == 0:
        raise DataError("no covariate rows align with the network")
    P_sub = P_hat[np.ix_(ids, ids)]
    return P_sub, tab


# -- generate ----------------------------------------------------------------


@cli.command()
@click.option("--model", type=click.Choice(["sbm", "dcbm", "graphon"]), required=True)
@click.option("--n", type=int, required=True)
@click.option("--avg-degree", type=float, default=None, help="Explicit expected average degree.")
@click.option(
    "--degree-rule",
    type=click.Choice(["2logn", "sqrt_n", "n_two_thirds"]),
    default=None,
    help="Average-degree rule (alternative to --avg-degree).",
)
@click.option("--family", type=click.Choice(["logit", "poisson", "gaussian"]), default="logit")
@click.option("--null-alpha", is_flag=True, help="Zero out the network-only effect.")
@click.option("--format", "fmt", type=click.Choice(["dense", "edgelist"]), default="dense")
@click.option(
    "--emit",
    default="p,a,truth",
    show_default=True,
    help="Comma-separated subset of {p, a, truth}.",
)
@click.pass_context
def generate(ctx, model, n, avg_degree, degree_rule, family, null_alpha, fmt, emit):
    """Generate a probability matrix, an adjacency draw, and the design truth."""
    if (avg_degree is None) == (degree_rule is None):
        raise ConfigError("pass exactly one of --avg-degree / --degree-rule")
    deg = avg_degree if avg_degree is not None else avg_degree_rule(degree_rule, n)
    seed = ctx.obj["seed"]
    if model == "sbm":
        prob = sbm_matrix(n, avg_deg=deg)
    elif model == "dcbm":
        prob = dcbm_matrix(n, avg_deg=deg, seed=stream(seed, "dcbm-psi"))
    else:
        prob = graphon_matrix(n, deg)
    out = _outdir(ctx)
    wanted = {item.strip() for item in emit.split(",") if item.strip()}
    unknown = wanted - {"p", "a", "truth"}
    if unknown:
        raise ConfigError(f"unknown --emit items: {sorted(unknown)}")

    written = {}
    if "p" in wanted:
        path = os.path.join(out, "P.csv" if fmt == "dense" else "P.edges")
        (write_dense_csv if fmt == "dense" else write_edgelist)(prob.P, path)
        written["p"] = path
    if "a" in wanted:
        A = sample_adjacency(prob, stream(seed, "adjacency"))
        path = os.path.join(out, "A.csv" if fmt == "dense" else "A.edges")
        (write_dense_csv if fmt == "dense" else write_edgelist)(A, path)
        written["a"] = path
    if "truth" in wanted:
        fam = make_family(family)
        truth = paper_design(prob, fam, null_alpha=null_alpha)
        path = os.path.join(out, "truth.json")
        write_report(
            {
                "X": truth.X,
                "beta": truth.beta,
                "theta": truth.theta,
                "gamma": truth.gamma,
                "alpha": truth.alpha,
                "eta": truth.eta,
                "sigma": truth.sigma,
                "r": truth.r,
                "s": truth.s,
                "family": family,
                "generator": model,
                "avg_degree": deg,
            },
            "json",
            path,
            seed=seed,
            config={"model": model, "n": n, "avg_degree": deg, "null_alpha": null_alpha},
        )
        written["truth"] = path
    click.echo(dumps_report({"written": written, "avg_degree_achieved": prob.avg_degree()}))


# -- fit / test / select-r ----------------------------------------------------

_fit_options = [
    click.option("--covariates", type=click.Path(exists=True), required=True),
    click.option("--response", required=True, help="Response column name."),
    click.option(
        "--network",
        type=click.Path(exists=True),
        multiple=True,
        help="Edge list or dense CSV; repeat for two waves (averaged).",
    ),
    click.option(
        "--embedding",
        type=click.Path(exists=True),
        default=None,
        help="n x d embedding CSV; the similarity F F' is used as the relational matrix.",
    ),
    click.option("--family", type=click.Choice(["logit", "poisson", "gaussian"]), default="logit"),
    click.option("--dispersion", type=float, default=1.0, show_default=True),
    click.option("--k", "K", type=int, required=True, help="Network subspace dimension."),
    click.option("--r", "r", default="auto", show_default=True, help="Intersection dim or 'auto'."),
    click.option(
        "--mode", type=click.Choice(["adjacency", "laplacian"]), default="adjacency", show_default=True
    ),
]


def _with_options(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn

    return wrap


def _parse_r(r: str):
    if r == "auto":
        return "auto"
    try:
        return int(r)
    except ValueError:
        raise ConfigError(f"--r must be an integer or 'auto', got {r!r}") from None


def _fit_payload(fit) -> dict:
    return {
        "gamma": fit.gamma,
        "theta": fit.theta,
        "beta": fit.beta,
        "alpha": fit.alpha,
        "r": fit.design.r,
        "K": fit.design.K,
        "p": fit.design.p,
        "n": fit.design.n,
        "convergence": {
            "iterations": fit.convergence.iterations,
            "score_norm": fit.convergence.score_norm,
            "converged": fit.convergence.converged,
            "step_halvings": fit.convergence.step_halvings,
            "separation_flag": fit.convergence.separation_flag,
        },
    }


@cli.command()
@_with_options(_fit_options)
@click.pass_context
def fit(ctx, covariates, response, network, embedding, family, dispersion, K, r, mode):
    """Fit the subspace GLM and report the estimated effects."""
    P_hat, tab = _load_fit_inputs(network, embedding, covariates, response)
    fam = make_family(family, dispersion)
    model = fit_network_glm(
        tab.X, P_hat, tab.response, fam, K=K, r=_parse_r(r), mode=_MODES[mode]
    )
    payload = _fit_payload(model)
    payload["columns"] = tab.columns
    _emit(ctx, payload, "fit.json")


@cli.command()
@_with_options(_fit_options)
@click.option(
    "--effect",
    required=True,
    help="network, beta:<j>, or theta:<j> (j is a 0-based column index).",
)
@click.pass_context
def test(ctx, covariates, response, network, embedding, family, dispersion, K, r, mode, effect):
    """Run the network-effect chi-square test or a coefficient Wald test."""
    P_hat, tab = _load_fit_inputs(network, embedding, covariates, response)
    fam = make_family(family, dispersion)
    model = fit_network_glm(
        tab.X, P_hat, tab.response, fam, K=K, r=_parse_r(r), mode=_MODES[mode]
    )
    if effect == "network":
        res = network_effect_test_fit(model)
        payload = {"effect": effect, "statistic": res.statistic, "df": res.df, "p_value": res.p_value}
    elif effect.startswith(("beta:", "theta:")):
        which, _, idx_text = effect.partition(":")
        try:
            j = int(idx_text)
        except ValueError:
            raise ConfigError(f"bad --effect index in {effect!r}") from None
        p = model.design.p
        if not 0 <= j < p:
            raise ConfigError(f"--effect index {j} out of range for p={p}")
        u = np.zeros(p)
        u[j] = 1.0
        res = coef_test(u, which, model)
        payload = {
            "effect": effect,
            "column": tab.columns[j] if j < len(tab.columns) else str(j),
            "estimate": res.estimate,
            "se": res.se,
            "z": res.z,
            "p_value": res.p_value,
            "ci95": list(res.ci95),
            "condition_value": res.condition_value,
        }
    else:
        raise ConfigError(f"unknown --effect {effect!r}")
    _emit(ctx, payload, "test.json")


@cli.command(name="select-r")
@click.option("--covariates", type=click.Path(exists=True), required=True)
@click.option("--network", type=click.Path(exists=True), multiple=True)
@click.option("--embedding", type=click.Path(exists=True), default=None)
@click.option("--k", "K", type=int, required=True)
@click.option("--response", default=None, help="Column to exclude from the design.")
@click.option(
    "--mode", type=click.Choice(["adjacency", "laplacian"]), default="adjacency", show_default=True
)
@click.pass_context
def select_r_cmd(ctx, covariates, network, embedding, K, response, mode):
    """Report alignment singular values, density, threshold, and the selected r."""
    P_hat = _load_relational_inputs(network, embedding)
    tab = load_tabular(covariates, response=response)
    tab, ids = align_to_network(tab, P_hat.shape[0])
    P_sub = P_hat[np.ix_(ids, ids)]
    n = P_sub.shape[0]
    z_bar = orthonormal_basis(tab.X)
    basis = spectral_basis(P_sub, K, _MODES[mode])
    bases = align_subspaces(z_bar, basis.vectors)
    d_hat = float(P_sub.sum() / n)
    r_hat = select_r(bases.sigma, d_hat, bases.p, K, n)
    _emit(
        ctx,
        {
            "sigma": bases.sigma,
            "d_hat": d_hat,
            "threshold": r_threshold(d_hat, bases.p, K, n),
            "r_hat": r_hat,
            "n": n,
            "p": bases.p,
            "K": K,
        },
        "select_r.json",
    )


# -- simulate ------------------------------------------------------------------


@cli.command()
@click.option("--config", type=click.Path(exists=True), required=True)
@click.pass_context
def simulate(ctx, config):
    """Run Monte Carlo scenarios from a JSON config and write table rows + figures."""
    from .plots import save_scenario_figure

    with open(config) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON in {config}: {exc}") from exc
    if isinstance(payload, dict) and "scenarios" in payload:
        configs = [ScenarioConfig.from_dict(item) for item in payload["scenarios"]]
    elif isinstance(payload, dict):
        configs = [ScenarioConfig.from_dict(payload)]
    else:
        raise ConfigError("config must be an object or {'scenarios': [...]}")

    out = _outdir(ctx)
    figdir = os.path.join(out, "figures")
    os.makedirs(figdir, exist_ok=True)
    rows = []
    for k, cfg in enumerate(configs):
        report = run_scenario(cfg, workers=ctx.obj["threads"])
        rows.append(report_row(report))
        label = cfg.label or f"scenario{k}"
        write_report(
            report.to_dict(),
            "json",
            os.path.join(out, f"{label}.json"),
            seed=cfg.seed,
            config=cfg.to_dict(),
        )
        save_scenario_figure(
            report.per_outer, os.path.join(figdir, f"{label}.png"), title=label
        )
        logger.info(
            "scenario %s: coverage %.3f, median MSE x100 %.3f",
            label,
            report.coverage_beta2,
            100 * report.median_mse_beta2,
        )
    write_report(
        rows,
        "csv",
        os.path.join(out, "scenarios.csv"),
        seed=configs[0].seed,
        config={"scenarios": [c.to_dict() for c in configs]},
    )
    click.echo(dumps_report({"rows": rows}))


# -- analyze -------------------------------------------------------------------


@cli.command()
@click.option(
    "--edges", type=click.Path(exists=True), multiple=True, required=True,
    help="Edge list / dense CSV; pass twice for two waves (averaged).",
)
@click.option("--covariates", type=click.Path(exists=True), required=True)
@click.option("--response", required=True)
@click.option("--group", required=True)
@click.option("--family", type=click.Choice(["logit", "poisson", "gaussian"]), default="logit")
@click.option("--k", "K", type=int, required=True)
@click.option("--r", "r", default="auto", show_default=True)
@click.option(
    "--mode", type=click.Choice(["adjacency", "laplacian"]), default="adjacency", show_default=True
)
@click.option("--folds", type=int, default=200, show_default=True)
@click.option("--level", type=float, default=0.05, show_default=True, help="Elimination level.")
@click.option("--top-groups", type=int, default=5, show_default=True)
@click.option("--skip-cv", is_flag=True, help="Skip the cross-validated AUC step.")
@click.pass_context
def analyze(
    ctx, edges, covariates, response, group, family, K, r, mode, folds, level, top_groups, skip_cv
):
    """Full applied-analysis pass: fit, select, test, validate, describe."""
    from .plots import save_alpha_figure, save_roc_figure

    seed = ctx.obj["seed"]
    out = _outdir(ctx)
    figdir = os.path.join(out, "figures")
    os.makedirs(figdir, exist_ok=True)

    A = load_relational(list(edges))
    tab = load_tabular(covariates, response=response, group=group)
    tab, ids = align_to_network(tab, A.shape[0])
    A = A[np.ix_(ids, ids)]
    n = A.shape[0]
    labels = sorted(set(tab.group.tolist()))

    # design: intercept + covariates + group dummies (reference level dropped)
    design = np.column_stack(
        [np.ones(n), tab.X]
        + [(tab.group == lv).astype(float) for lv in labels[1:]]
    )
    columns = ["intercept"] + list(tab.columns) + [f"group[{lv}]" for lv in labels[1:]]

    fam = make_family(family)
    config = FitConfig(family=fam, K=K, r=_parse_r(r), mode=_MODES[mode])
    result = backward_eliminate(design, columns, A, tab.response, config, level=level)
    fit = result.fit

    coef_rows = []
    for j, name in enumerate(result.columns):
        u = np.zeros(len(result.columns))
        u[j] = 1.0
        try:
            w = coef_test(u, "beta", fit)
            coef_rows.append(
                {"column": name, "estimate": w.estimate, "se": w.se, "z": w.z,
                 "p_value": w.p_value, "ci_lo": w.ci95[0], "ci_hi": w.ci95[1]}
            )
        except NetglmError:
            coef_rows.append(
                {"column": name, "estimate": float(fit.beta[j]), "se": float("nan"),
                 "z": float("nan"), "p_value": float("nan"),
                 "ci_lo": float("nan"), "ci_hi": float("nan")}
            )
    write_report(coef_rows, "csv", os.path.join(out, "coefficients.csv"), seed=seed)

    trace_rows = [
        {"step": k + 1, "dropped": s.dropped, "p_value": s.p_value,
         "p_adjusted": s.p_adjusted, "candidates": s.candidates}
        for k, s in enumerate(result.trace)
    ] or [{"step": 0, "dropped": "", "p_value": float("nan"),
           "p_adjusted": float("nan"), "candidates": len(columns) - 1}]
    write_report(trace_rows, "csv", os.path.join(out, "elimination_trace.csv"), seed=seed)

    edge_idx = np.column_stack(np.nonzero(np.triu(A, k=1) > 0)).astype(int)
    assort_rows = []
    attributes = dict(tab.categoricals)
    attributes[group] = tab.group
    for name, values in attributes.items():
        try:
            res = assortativity(edge_idx, values)
            assort_rows.append({"attribute": name, "assortativity": res.r, "se": res.se})
        except NetglmError as exc:
            logger.info("assortativity for %s skipped: %s", name, exc)
    if assort_rows:
        write_report(assort_rows, "csv", os.path.join(out, "assortativity.csv"), seed=seed)

    metrics = centralities(edge_idx, n)
    corr = centrality_correlations(fit.alpha, metrics)
    write_report(
        [{"metric": k, "pearson_correlation_with_abs_alpha": v} for k, v in corr.items()],
        "csv",
        os.path.join(out, "centrality_correlations.csv"),
        seed=seed,
    )

    strengths = effect_strength(fit, tab.group)
    strong = top_effect_groups(strengths, m=top_groups)
    write_report(
        [{"group": g, "effect_strength": strengths[g], "selected": g in strong}
         for g in sorted(strengths, key=str)],
        "csv",
        os.path.join(out, "effect_strength.csv"),
        seed=seed,
    )

    network_payload = {
        "selected_columns": result.columns,
        "network_p_value": result.network_p_value,
        "r": fit.design.r,
        "K": K,
        "top_groups": strong,
    }

    if not skip_cv:
        cv = cv_auc(
            result.design, A, tab.response, config, folds=min(folds, n), seed=seed,
            group=tab.group,
        )
        write_report(
            [{"fpr": p_, "tpr": t_} for p_, t_ in cv.roc],
            "csv",
            os.path.join(out, "roc_points.csv"),
            seed=seed,
        )
        write_report(
            [{"group": g, "auc": v} for g, v in sorted(cv.per_group_auc.items(), key=lambda kv: str(kv[0]))]
            + [{"group": "__all__", "auc": cv.auc}],
            "csv",
            os.path.join(out, "auc_per_group.csv"),
            seed=seed,
        )
        save_roc_figure({"subspace model": cv.roc}, os.path.join(figdir, "roc.png"))
        network_payload["auc"] = cv.auc
        network_payload["skipped_folds"] = cv.skipped_folds

    save_alpha_figure(fit.alpha, tab.group, os.path.join(figdir, "alpha.png"))
    write_report(network_payload, "json", os.path.join(out, "analysis.json"), seed=seed)
    click.echo(dumps_report(network_payload))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 2
    except click.exceptions.ClickException as exc:
        exc.show()
        return 2
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 4


if __name__ == "__main__":
    sys.exit(main())
