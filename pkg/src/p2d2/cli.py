"""
Command-line harness.

    p2d2 run CONFIG          solve, write the trace CSV (+ final W, + figure)
    p2d2 certify CONFIG      print the rate certificate only
    p2d2 compare CONFIG --forms agent,stacked,reference

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 forms diverge.
Log verbosity comes from ``P2D2_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import certificate_for_steps, certify, fit_linear_rate
from .config import ConfigError, load_config, substream, substream_seed
from .errors import (
    CertificateUnavailable,
    InsufficientData,
    InvalidConfig,
    NotStronglyConvex,
    NumericalFailure,
    P2D2Error,
)
from .model import Dataset, estimate_constants, partition, read_libsvm, synthesize_logistic, synthesize_quadratic
from .prox import RegularizerSpec
from .solver import Problem, SolverConfig, ista_oracle, run
from .topology import graph_from_spec, load_combination_csv, metropolis_weights, spectral_bounds

logger = logging.getLogger("p2d2")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DIVERGE = 0, 2, 3, 4
COMPARE_TOL = 1e-8


@dataclass
class Harness:
    """Everything derived from a config before any solver runs."""

    config: object
    problem: Problem
    spectrum: object
    constants: object | None


def build(cfg):
    graph_seed = substream_seed(cfg.seed, "graph")
    try:
        graph = graph_from_spec(cfg.graph, default_seed=graph_seed)
    except ValueError as exc:
        raise ConfigError("graph", str(exc)) from exc
    if cfg.combination_csv is not None:
        A = load_combination_csv(cfg.combination_csv, graph)
    else:
        A = metropolis_weights(graph)

    K = graph.num_agents
    data = cfg.data
    data_seed = substream_seed(cfg.seed, "data")
    if data["type"] == "libsvm":
        dataset = read_libsvm(data["path"], n_features=data.get("n_features"),
                              negative_labels=data.get("negative_labels"),
                              keep_labels=data.get("keep_labels"),
                              normalize=data.get("normalize", True))
        if data.get("max_samples") is not None:
            n = int(data["max_samples"])
            dataset = Dataset(dataset.features[:n], dataset.labels[:n], dataset.normalized)
        costs = partition(dataset, K, data_seed, cfg.l2_reg)
    elif cfg.cost_kind == "quadratic":
        costs = synthesize_quadratic(K, int(data["M"]), seed=data_seed,
                                     condition=float(data.get("condition", 10.0)),
                                     rank=data.get("rank"), l2_reg=cfg.l2_reg)
    else:
        costs, _ = synthesize_logistic(K, int(data["L_per_agent"]), int(data["M"]),
                                       sparsity=float(data.get("sparsity", 0.2)),
                                       noise=float(data.get("noise", 0.0)),
                                       seed=data_seed, l2_reg=cfg.l2_reg)
    try:
        reg = RegularizerSpec.from_dict(cfg.regularizer)
    except P2D2Error as exc:
        raise ConfigError("regularizer", str(exc)) from exc
    problem = Problem(costs, reg, A)
    spectrum = spectral_bounds(problem.B)
    try:
        constants = estimate_constants(costs)
    except NotStronglyConvex:
        constants = None
    return Harness(cfg, problem, spectrum, constants)


def resolve_steps(h):
    """``(mu, alpha, certificate or None)`` for the configured step mode."""
    cfg = h.config
    r_zero = h.problem.regularizer.is_zero
    if cfg.step_mode == "certified":
        if h.constants is None:
            raise NotStronglyConvex("certified steps need a strongly convex average cost (l2_reg > 0)")
        cert = certify(h.constants, h.spectrum, cfg.safety, r_is_zero=r_zero, B=h.problem.B)
        return cert.mu, cert.alpha, cert
    cert = None
    if h.constants is not None:
        try:
            cert = certificate_for_steps(cfg.mu, cfg.alpha, h.constants, h.spectrum, r_zero, h.problem.B)
        except (CertificateUnavailable, P2D2Error) as exc:
            warnings.warn(f"manual steps are not certified: {exc}", stacklevel=2)
    return cfg.mu, cfg.alpha, cert


def solver_config(h, mu, alpha):
    cfg = h.config
    w0 = None
    if cfg.w0 == "random":
        w0 = substream(cfg.seed, "init").standard_normal((h.problem.num_agents, h.problem.dim))
    try:
        return SolverConfig(mu=mu, alpha=alpha, max_iters=cfg.max_iters, tol=cfg.tol, w0=w0,
                            workers=cfg.workers)
    except InvalidConfig as exc:
        raise ConfigError("steps", str(exc)) from exc


def _fmt(val):
    return repr(val) if isinstance(val, float) else str(val)


def _emit(lines, stream=None):
    stream = stream or sys.stdout
    for key, val in lines.items():
        print(f"{key} = {_fmt(val)}", file=stream)


def cmd_certify(path):
    cfg = load_config(path)
    h = build(cfg)
    if h.constants is None:
        raise NotStronglyConvex("average cost is not strongly convex (nu <= 0)")
    if cfg.step_mode == "manual":
        cert = certificate_for_steps(cfg.mu, cfg.alpha, h.constants, h.spectrum,
                                     h.problem.regularizer.is_zero, h.problem.B)
    else:
        cert = certify(h.constants, h.spectrum, cfg.safety, h.problem.regularizer.is_zero, h.problem.B)
    _emit(cert.as_dict())
    return EXIT_OK


def _sidecar(output, suffix):
    output = Path(output)
    return output.with_name(output.stem + suffix)


def cmd_run(path, figure=None):
    cfg = load_config(path)
    h = build(cfg)
    mu, alpha, cert = resolve_steps(h)
    sc = solver_config(h, mu, alpha)
    w_star, r_star = ista_oracle(h.problem.costs, h.problem.regularizer)
    trace = run(h.problem, sc, form=cfg.form, w_star=w_star, r_star=r_star, advise=cert is None)

    trace.meta.update(seed=cfg.seed, K=h.problem.num_agents, M=h.problem.dim,
                      regularizer=h.problem.regularizer.kind)
    if cert is not None:
        trace.meta.update({f"cert_{k}": _fmt(v) for k, v in cert.as_dict().items()})

    try:
        gamma_hat, r2 = fit_linear_rate(trace)
    except InsufficientData:
        gamma_hat, r2 = None, None
    summary = {
        "form": cfg.form,
        "iterations": trace.records[-1].iter,
        "final_rel_sq_error": trace.records[-1].rel_sq_error,
        "fitted_gamma": gamma_hat,
        "fit_r_squared": r2,
        "certified_gamma": None if cert is None else cert.gamma,
        "mu": mu,
        "alpha": alpha,
    }
    if cfg.output is not None:
        out = Path(cfg.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(trace.to_csv())
        np.savetxt(_sidecar(out, ".final_w.csv"), trace.final_W, delimiter=",", fmt="%.17g")
        summary["trace"] = str(out)
        if cfg.figure if figure is None else figure:
            from .plotting import plot_trace

            fig_path = plot_trace(trace, _sidecar(out, ".png"), title=f"P2D2 ({cfg.form} form)",
                                  certified_gamma=None if cert is None else cert.gamma)
            summary["figure"] = str(fig_path)
    _emit(summary)
    return EXIT_OK


def max_divergence(histories):
    """Largest componentwise gap between any two W trajectories."""
    names = list(histories)
    worst = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            n = min(len(histories[a]), len(histories[b]))
            gap = max(float(np.max(np.abs(histories[a][t].W - histories[b][t].W))) for t in range(n))
            worst[(a, b)] = gap
    return worst


def cmd_compare(path, forms, figure=None):
    if len(forms) < 2:
        raise ConfigError("--forms", "need at least two forms to compare")
    cfg = load_config(path)
    h = build(cfg)
    if "extra" in forms and not h.problem.regularizer.is_zero:
        raise InvalidConfig("EXTRA requires the zero regularizer")
    mu, alpha, _ = resolve_steps(h)
    sc = solver_config(h, mu, alpha)
    w_star, _ = ista_oracle(h.problem.costs, h.problem.regularizer)
    traces = {f: run(h.problem, sc, form=f, w_star=w_star, keep_history=True,
                     track_fixed_point=False, advise=False) for f in forms}
    gaps = max_divergence({f: t.history for f, t in traces.items()})
    for (a, b), gap in gaps.items():
        print(f"{a} vs {b}: max divergence = {gap!r}")
    worst = max(gaps.values())
    print(f"max_divergence = {worst!r}")
    if cfg.output is not None and (cfg.figure if figure is None else figure):
        from .plotting import plot_comparison

        out = Path(cfg.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        print(f"figure = {plot_comparison(traces, _sidecar(out, '.compare.png'))}")
    return EXIT_OK if worst < COMPARE_TOL else EXIT_DIVERGE


def build_parser():
    parser = argparse.ArgumentParser(prog="p2d2", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the solver and write the trace")
    p_run.add_argument("config")
    p_run.add_argument("--no-figure", dest="figure", action="store_false", default=None,
                       help="skip the PNG rendered next to the trace CSV")
    p_cert = sub.add_parser("certify", help="print the rate certificate")
    p_cert.add_argument("config")
    p_cmp = sub.add_parser("compare", help="check equivalence of solver forms")
    p_cmp.add_argument("config")
    p_cmp.add_argument("--forms", default="agent,stacked,reference")
    p_cmp.add_argument("--no-figure", dest="figure", action="store_false", default=None)
    return parser


def main(argv=None):
    logging.basicConfig(level=os.environ.get("P2D2_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.figure)
        if args.command == "certify":
            return cmd_certify(args.config)
        forms = [f.strip() for f in args.forms.split(",") if f.strip()]
        return cmd_compare(args.config, forms, args.figure)
    except (ConfigError, InvalidConfig) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, NotStronglyConvex, CertificateUnavailable) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except P2D2Error as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
