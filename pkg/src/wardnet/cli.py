"""Command-line entry point.

Exit codes: 0 when every check passes, 1 when a check fails, 2 when the
configuration cannot be read or is invalid.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from ._validation import InvariantViolation, column_sum_error
from .campaign import ExperimentConfig, run_campaign
from .dnn import validate_dnn, weight_product
from .game import game_report
from .io import DocumentError, game_to_dict, problem_from_dict, read_json, write_json
from .optim import TrainConfig, train, verify_minima_are_equilibria
from .reduction import build_game, certify, factorize, flow_to_weights, weights_to_flow
from .relu import ReluPathModel, expected_outputs, sample_outputs, scaling_report
from .squared import binary_squared_loss_check, loss_decomposition

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


# ---- helpers ---------------------------------------------------------------


def _load_problem(args, need_loss=True):
    if not args.config:
        raise ConfigError("--config is required")
    dnn, data, loss = problem_from_dict(read_json(args.config))
    if need_loss and loss is None:
        raise ConfigError(f"{args.config}: missing field 'loss'")
    return dnn, data, loss


def _train_config(args) -> TrainConfig:
    kw = {}
    for flag, key in (("seed", "seed"), ("restarts", "restarts"), ("mode", "mode"),
                      ("max_iters", "max_iter"), ("tol", "tol")):
        v = getattr(args, flag, None)
        if v is not None:
            kw[key] = v
    try:
        return TrainConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_losses(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["restart", "seed", "final_loss", "converged"])
        for i, (seed, value, conv) in enumerate(rows):
            w.writerow([i, seed, repr(value), conv])


def _emit(args, doc: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        print("\n".join(lines))


# ---- subcommands -----------------------------------------------------------


def cmd_validate(args) -> int:
    dnn, data, _ = _load_problem(args, need_loss=False)
    report = validate_dnn(dnn)
    doc = {**report.to_dict(), "n_samples": data.n_samples}
    if data.n_features != dnn.n_inputs:
        doc["passed"] = False
        doc["dimension_error"] = f"data has {data.n_features} features, network expects {dnn.n_inputs}"
    lines = [f"{name}: {'ok' if c.passed else 'FAIL'}  {c.detail}" for name, c in report.checks.items()]
    _emit(args, doc, lines + [f"valid: {doc['passed']}"])
    return EXIT_OK if doc["passed"] else EXIT_FAIL


def cmd_build_game(args) -> int:
    dnn, data, loss = _load_problem(args)
    game = build_game(dnn, data, loss)
    cert = certify(dnn, data, loss, game)
    counts = {k: game.count(k) for k in ("B", "J", "T")}
    doc = {"counts": counts, "n_populations": game.n_populations,
           "strategies_per_population": [len(p.strategies) for p in game.populations],
           "certificate": cert.to_dict()}
    out = _out_dir(args)
    if out:
        write_json(out / "game.json", game_to_dict(game))
        write_json(out / "certificate.json", cert.to_dict())
    _emit(args, doc, [f"resources B={counts['B']} J={counts['J']} T={counts['T']}",
                      f"loss={cert.loss_value!r} social_cost={cert.social_cost!r} ok={cert.ok}"])
    return EXIT_OK if cert.ok else EXIT_FAIL


def cmd_train(args) -> int:
    dnn, data, loss = _load_problem(args)
    cfg = _train_config(args)
    report = train(dnn, data, loss, cfg)
    doc = report.to_dict()
    out = _out_dir(args)
    if out:
        write_json(out / "train_report.json", doc)
        _write_losses(out / "losses.csv",
                      [(r.seed, r.final_loss, r.converged) for r in report.restarts])
    _emit(args, doc, [f"restart {r.seed}: loss={r.final_loss!r} iters={r.iterations} "
                      f"converged={r.converged}" for r in report.restarts]
          + [f"best loss {report.final_loss!r}"])
    return EXIT_OK if all(r.converged for r in report.restarts) else EXIT_FAIL


def cmd_verify(args) -> int:
    dnn, data, loss = _load_problem(args)
    cfg = _train_config(args)
    report = verify_minima_are_equilibria(dnn, data, loss, cfg)
    doc = report.to_dict()
    out = _out_dir(args)
    if out:
        write_json(out / "verification.json", doc)
        _write_losses(out / "losses.csv", [(c.seed, c.loss, c.converged) for c in report.checks])
    _emit(args, doc, [f"equilibria {report.n_equilibria}/{len(report.checks)} (both checks "
                      f"{report.n_both_checks}), SO={report.so_value!r}, PoA={report.poa!r}",
                      f"success: {report.success}"])
    return EXIT_OK if report.success else EXIT_FAIL


def cmd_poa(args) -> int:
    dnn, data, loss = _load_problem(args)
    game = build_game(dnn, data, loss)
    doc = game_report(game, weights_to_flow(dnn, game))
    poa = doc["poa"]
    ok = abs(poa - 1.0) <= 1e-6
    out = _out_dir(args)
    if out:
        write_json(out / "poa.json", doc)
    _emit(args, doc, [f"SO={doc['so']!r} WE={doc['we_value']!r} PoA={poa!r}"])
    return EXIT_OK if ok else EXIT_FAIL


def cmd_factorize(args) -> int:
    if not args.config:
        raise ConfigError("--config is required")
    doc = read_json(args.config)
    if "target" not in doc:
        raise DocumentError(f"{args.config}: missing field 'target'")
    if "widths" not in doc:
        raise DocumentError(f"{args.config}: missing field 'widths'")
    target = np.array(doc["target"], dtype=np.float64)
    mats = factorize(target, doc["widths"])
    product_error = float(np.max(np.abs(weight_product(mats) - target)))
    col_error = max(column_sum_error(m) for m in mats)
    dnn = flow_to_weights(target, doc["widths"])
    roundtrip = float(np.max(np.abs(weights_to_flow(dnn).z - target)))
    ok = product_error <= 1e-12 and col_error <= 1e-14 and roundtrip <= 1e-12
    result = {"weights": [m.tolist() for m in mats], "product_error": product_error,
              "column_sum_error": col_error, "roundtrip_error": roundtrip, "ok": ok}
    out = _out_dir(args)
    if out:
        write_json(out / "factorization.json", result)
    _emit(args, result, [f"{len(mats)} matrices, product error {product_error:.3g}, "
                         f"column-sum error {col_error:.3g}, ok={ok}"])
    return EXIT_OK if ok else EXIT_FAIL


def cmd_relu_scaling(args) -> int:
    dnn, data, loss = _load_problem(args)
    rho = 0.5 if args.rho is None else args.rho
    try:
        model = ReluPathModel(dnn, rho)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rep = scaling_report(model, data, loss)
    doc = rep.to_dict()
    if args.samples:
        s = sample_outputs(model, data, args.samples, args.seed)
        exp = expected_outputs(model, data)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(s.stderr > 0, np.abs(s.mean - exp) / s.stderr,
                         np.where(s.mean == exp, 0.0, np.inf))
        doc["monte_carlo"] = {"n_samples": s.n_samples, "mean": s.mean.tolist(),
                              "stderr": s.stderr.tolist(), "expected": exp.tolist(),
                              "max_z": float(z.max())}
    out = _out_dir(args)
    if out:
        write_json(out / "relu_scaling.json", doc)
    _emit(args, doc, [f"linear={rep.linear_loss!r} model={rep.model_loss!r} "
                      f"ratio={rep.ratio!r} expected={rep.expected_ratio!r}"])
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_sqloss_check(args) -> int:
    dnn, data, _ = _load_problem(args, need_loss=False)
    dec = loss_decomposition(dnn, data)
    doc = dec.to_dict(data.n_classes)
    ok = True
    if data.n_classes == 2:
        ok = abs(dec.squared_loss - 2.0 * dec.classification_loss) <= 1e-12 * max(1.0, dec.squared_loss)
        if args.restarts or args.seed is not None:
            check = binary_squared_loss_check(dnn, data, _train_config(args))
            doc["training"] = check.to_dict()
            ok = ok and check.ok
    doc["ok"] = ok
    out = _out_dir(args)
    if out:
        write_json(out / "sqloss.json", doc)
    _emit(args, doc, [f"classification={dec.classification_loss!r} const={dec.const!r} "
                      f"squared={dec.squared_loss!r} ratio={dec.ratio!r}"])
    return EXIT_OK if ok else EXIT_FAIL


def cmd_campaign(args) -> int:
    if not args.config:
        raise ConfigError("--config is required")
    path = Path(args.config)
    doc = read_json(path)
    if args.seed is not None:
        doc = {**doc, "seeds": [args.seed]}
    cfg = ExperimentConfig.from_dict(doc, base_dir=path.parent, out=args.out)
    record = run_campaign(cfg, workers=args.workers)
    summary = {k: v for k, v in record.to_dict().items() if k != "results"}
    lines = [f"seed {r.seed}: {'pass' if r.passed else 'FAIL'} loss={r.final_loss!r} poa={r.poa!r}"
             for r in record.results]
    _emit(args, record.to_dict() if args.json else summary,
          lines + [f"{record.n_passed}/{len(record.results)} seeds passed, "
                   f"loss spread {record.loss_spread:.3g}"])
    return EXIT_OK if record.passed else EXIT_FAIL


COMMANDS = {
    "validate": (cmd_validate, "check a network against the structural assumptions"),
    "build-game": (cmd_build_game, "build the congestion game and certify loss = social cost"),
    "train": (cmd_train, "train with projected gradient descent"),
    "verify": (cmd_verify, "train and check that the trained flows are equilibria"),
    "poa": (cmd_poa, "social optimum, equilibrium value and price of anarchy"),
    "factorize": (cmd_factorize, "factor a column-stochastic matrix into layer weights"),
    "relu-scaling": (cmd_relu_scaling, "loss scaling under the path-failure model"),
    "sqloss-check": (cmd_sqloss_check, "squared loss versus classification loss"),
    "campaign": (cmd_campaign, "run a seeded verification campaign"),
}


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted both before and after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON document")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="machine-readable output on stdout")

    parser = argparse.ArgumentParser(prog="wardnet", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name in ("train", "verify", "sqloss-check"):
            p.add_argument("--restarts", type=int)
            p.add_argument("--mode", choices=["weight", "marginal"])
            p.add_argument("--max-iters", type=int, dest="max_iters")
            p.add_argument("--tol", type=float)
        if name == "relu-scaling":
            p.add_argument("--rho", type=float)
            p.add_argument("--samples", type=int, default=0)
        if name == "campaign":
            p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    for name, default in (("config", None), ("out", None), ("seed", None), ("json", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    handler = COMMANDS[args.command][0]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return handler(args)
    except (ConfigError, DocumentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
