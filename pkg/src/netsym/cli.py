"""Command-line client for the netsym service.

Every command builds a request document, sends it through the service
layer, and writes the response to files or stdout.  By default requests
are dispatched in process; ``--server URL`` routes them to a running
instance instead (start one with ``netsym serve``).  All stochastic
commands require an explicit ``--seed``; nothing draws entropy from the
clock, so a repeated invocation reproduces its outputs byte for byte
(reports carry a timestamp field, which is the documented exception).

Exit codes: 0 success, 1 usage error, 2 runtime or validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone

from pydantic import ValidationError

from .errors import NetsymError

REPORT_SCHEMA_VERSION = 1


class CommandError(Exception):
    """Runtime failure with a one-line diagnostic (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the CLI contract is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


class LocalClient:
    """Dispatch requests straight to the handler functions."""

    def post(self, path: str, payload: dict) -> dict:
        from .service.handlers import ROUTES

        if path not in ROUTES:
            raise CommandError(f"unknown service path {path}")
        request_model, handler, _ = ROUTES[path]
        try:
            response = handler(request_model(**payload))
        except ValidationError as exc:
            raise CommandError(_first_validation_line(exc)) from exc
        except (NetsymError, ValueError) as exc:
            raise CommandError(str(exc)) from exc
        return response.model_dump()


class HttpClient:
    """Dispatch requests to a remote service instance."""

    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")

    def post(self, path: str, payload: dict) -> dict:
        import httpx

        try:
            resp = httpx.post(self.base_url + path, json=payload, timeout=None)
        except httpx.HTTPError as exc:
            raise CommandError(f"request to {self.base_url + path} failed: {exc}") from exc
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise CommandError(f"service returned {resp.status_code}: {detail}")
        return resp.json()


def _first_validation_line(exc: ValidationError) -> str:
    err = exc.errors()[0]
    loc = ".".join(str(p) for p in err["loc"])
    return f"invalid field {loc}: {err['msg']}"


def _read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CommandError(f"{path}: invalid JSON: {exc}") from exc


def _write_json(path, doc: dict) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CommandError(f"cannot write {path}: {exc.strerror}") from exc


def _write_network_file(path, network_doc: dict) -> None:
    # Route through the canonical writer so weights keep 17 significant digits.
    from . import netcore

    try:
        netcore.save_network(netcore.network_from_doc(network_doc), path)
    except OSError as exc:
        raise CommandError(f"cannot write {path}: {exc.strerror}") from exc


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CommandError(f"cannot write {path}: {exc.strerror}") from exc


def _write_report(path, command: str, config: dict, results: dict) -> None:
    _write_json(
        path,
        {
            "schema_version": REPORT_SCHEMA_VERSION,
            "command": command,
            "config": config,
            "results": results,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        },
    )


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise CommandError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _parse_arch(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise CommandError(f"expected a comma-separated list of integers, got {text!r}") from exc


def _read_xy_csv(path, n_inputs: int) -> tuple[list[list[float]], list[list[float]]]:
    """Dataset CSV: header, then n_inputs x-columns followed by y-columns."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise CommandError(f"{path}: empty dataset")
            rows = [[float(v) for v in row] for row in reader if row]
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc.strerror}") from exc
    except ValueError as exc:
        raise CommandError(f"{path}: non-numeric cell: {exc}") from exc
    if not rows:
        raise CommandError(f"{path}: dataset has a header but no rows")
    width = len(rows[0])
    if width <= n_inputs or any(len(r) != width for r in rows):
        raise CommandError(
            f"{path}: need {n_inputs} input columns plus target columns in every row"
        )
    xs = [r[:n_inputs] for r in rows]
    ys = [r[n_inputs:] for r in rows]
    return xs, ys


# ---------------------------------------------------------------------------
# Commands


def _cmd_count(client, args) -> int:
    resp = client.post("/symmetry/count", {"architecture": _parse_arch(args.arch)})
    print(resp["count"])
    return 0


def _cmd_train(client, args) -> int:
    if args.network is not None:
        network = _read_json(args.network)
    else:
        if args.init_arch is None or args.init_seed is None:
            raise CommandError(
                "either give a network file or --init-arch with --init-seed"
            )
        network = client.post(
            "/network/build",
            {
                "architecture": _parse_arch(args.init_arch),
                "activation": args.activation,
                "init_scale": args.init_scale,
                "seed": args.init_seed,
            },
        )
    n_inputs = network.get("architecture", [0])[0]
    xs, ys = _read_xy_csv(args.data, n_inputs)
    payload = {
        "network": network,
        "inputs": xs,
        "targets": ys,
        "lr": args.lr,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "seed": args.seed,
    }
    if args.mask:
        depth = len(network.get("layers", []))
        masks: list[dict | None] = [None] * depth
        for item in args.mask:
            try:
                idx_text, mask_path = item.split("=", 1)
                idx = int(idx_text)
            except ValueError:
                raise CommandError(f"--mask expects LAYER=FILE, got {item!r}") from None
            if not 1 <= idx <= depth:
                raise CommandError(f"--mask layer {idx} out of range 1..{depth}")
            masks[idx - 1] = _read_json(mask_path)
        payload["masks"] = masks
    resp = client.post("/network/train", payload)
    _write_network_file(args.out, resp["network"])
    if args.loss_out:
        lines = ["epoch,loss"] + [f"{i},{v!r}" for i, v in enumerate(resp["loss_trace"])]
        _write_text(args.loss_out, "\n".join(lines) + "\n")
    if args.report:
        config = {k: v for k, v in vars(args).items() if k not in ("func", "server")}
        _write_report(args.report, "train", config, {"loss_trace": resp["loss_trace"]})
    return 0


def _cmd_canon(client, args) -> int:
    resp = client.post(
        "/network/canonicalize",
        {"network": _read_json(args.network), "method": args.method},
    )
    _write_network_file(args.out, resp["network"])
    if args.perm_out:
        _write_json(args.perm_out, resp["permutation"])
    return 0


def _cmd_compare(client, args) -> int:
    resp = client.post(
        "/network/compare",
        {"network_a": _read_json(args.network_a), "network_b": _read_json(args.network_b)},
    )
    out = io.StringIO()
    out.write("layer_index,phi_raw,phi_lex,phi_maximin\n")
    for row in resp["rows"]:
        out.write(
            f"{row['layer_index']},{row['phi_raw']!r},{row['phi_lex']!r},{row['phi_maximin']!r}\n"
        )
    sys.stdout.write(out.getvalue())
    if args.report:
        config = {
            "network_a": args.network_a,
            "network_b": args.network_b,
            "method": args.method,
        }
        _write_report(args.report, "compare", config, {"rows": resp["rows"]})
    return 0


def _cmd_mask_gen(client, args) -> int:
    resp = client.post(
        "/mask/generate",
        {"rows": args.rows, "cols": args.cols, "rho": args.rho, "seed": args.seed},
    )
    _write_json(args.out, resp)
    return 0


def _cmd_mask_apply(client, args) -> int:
    network = _read_json(args.network)
    layers = network.get("layers", [])
    if not 1 <= args.layer <= len(layers):
        raise CommandError(f"--layer {args.layer} out of range 1..{len(layers)}")
    layer = layers[args.layer - 1]
    rows, cols = layer["rows"], layer["cols"]
    matrix = [layer["data"][r * cols : (r + 1) * cols] for r in range(rows)]
    resp = client.post("/mask/apply", {"matrix": matrix, "mask": _read_json(args.mask)})
    layer["data"] = [v for row in resp["matrix"] for v in row]
    _write_network_file(args.out, network)
    return 0


def _cmd_poly_fit(client, args) -> int:
    xs, ys = _read_xy_csv(args.data, 1)
    payload = {
        "xs": [x[0] for x in xs],
        "ys": ys,
        "family": args.family,
        "degree": args.degree,
        "mode": args.mode,
        "weighted": not args.unweighted,
    }
    if args.mode == "gradient":
        if args.lr is None or args.steps is None:
            raise CommandError("gradient mode requires --lr and --steps")
        payload["lr"] = args.lr
        payload["steps"] = args.steps
    if args.mask:
        payload["mask"] = _read_json(args.mask)
    resp = client.post("/poly/fit", payload)
    _write_json(args.out, resp["polytron"])
    if args.trace_out:
        lines = ["step,residual"] + [
            f"{i},{v!r}" for i, v in enumerate(resp["residual_trace"])
        ]
        _write_text(args.trace_out, "\n".join(lines) + "\n")
    return 0


def _cmd_poly_eval(client, args) -> int:
    polytron = _read_json(args.polytron)
    xs = _parse_floats(args.x)
    resp = client.post("/poly/eval", {"polytron": polytron, "xs": xs})
    n_out = polytron.get("outputs", 1)
    sys.stdout.write("x," + ",".join(f"f_{m + 1}" for m in range(n_out)) + "\n")
    for x, outputs in zip(xs, resp["outputs"]):
        sys.stdout.write(f"{x!r}," + ",".join(repr(v) for v in outputs) + "\n")
    return 0


def _parse_target(text: str) -> dict:
    if text.startswith("exp:"):
        try:
            return {"kind": "exp_decay", "rate": float(text[4:])}
        except ValueError:
            raise CommandError(f"bad exp target {text!r}; expected exp:RATE") from None
    if text.startswith("polytron:"):
        return {"kind": "polytron", "polytron": _read_json(text[len("polytron:") :])}
    raise CommandError(f"unknown target {text!r}; expected exp:RATE or polytron:FILE")


def _cmd_poly_residual(client, args) -> int:
    resp = client.post(
        "/poly/residual",
        {
            "polytron": _read_json(args.polytron),
            "target": _parse_target(args.target),
            "nodes": args.nodes,
        },
    )
    print(f"residual,{resp['residual']!r}")
    print(f"f_norm_sq,{resp['f_norm_sq']!r}")
    print(f"ratio,{resp['ratio']!r}")
    if args.report:
        config = {"polytron": args.polytron, "target": args.target, "nodes": args.nodes}
        _write_report(args.report, "poly residual", config, resp)
    return 0


def _cmd_simulate(client, args) -> int:
    lambdas = _parse_floats(args.lambdas)
    sigmas = _parse_floats(args.sigmas)
    if args.n is not None:
        # a single value broadcasts to n directions
        if len(lambdas) == 1:
            lambdas = lambdas * args.n
        if len(sigmas) == 1:
            sigmas = sigmas * args.n
        if len(lambdas) != args.n:
            raise CommandError(f"--n {args.n} but {len(lambdas)} lambdas given")
    payload = {
        "lambdas": lambdas,
        "sigmas": sigmas,
        "dist": args.dist,
        "eta": args.eta,
        "steps": args.steps,
        "seed": args.seed,
        "include_trace": bool(args.out),
    }
    if args.burn_in is not None:
        payload["burn_in"] = args.burn_in
    if args.df is not None:
        payload["df"] = args.df
    if args.theta0 is not None:
        payload["theta0"] = _parse_floats(args.theta0)
    if args.theta_star is not None:
        payload["theta_star"] = _parse_floats(args.theta_star)
    resp = client.post("/simulate", payload)
    if args.out:
        _write_text(args.out, resp.pop("trace_csv") or "")
    else:
        resp.pop("trace_csv", None)
    if args.report:
        config = {k: v for k, v in vars(args).items() if k not in ("func", "server")}
        _write_report(args.report, "simulate", config, resp)
    if not args.out and not args.report:
        print(json.dumps(resp, indent=2, sort_keys=True))
    return 0


def _cmd_experiment_run(client, args) -> int:
    payload: dict = {"config": _read_json(args.config)}
    if args.benchmark:
        payload["benchmark"] = _read_json(args.benchmark)
    resp = client.post("/experiment/run", payload)
    report = resp["report"]
    _write_report(args.out, "experiment run", report.pop("config"), report)
    return 0


def _cmd_experiment_benchmark(client, args) -> int:
    resp = client.post("/experiment/benchmark", {"config": _read_json(args.config)})
    _write_network_file(args.out, resp)
    return 0


def _cmd_serve(client, args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netsym", description=__doc__, allow_abbrev=False)
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", parser_class=_Parser, help="number of equivalent optima")
    p.add_argument("--arch", required=True, help="comma-separated layer widths, e.g. 2,3,2")
    p.set_defaults(func=_cmd_count)

    p = sub.add_parser("train", parser_class=_Parser, help="train a network on a CSV dataset")
    p.add_argument("network", nargs="?", help="network file; omit to initialize a fresh one")
    p.add_argument("--init-arch", help="widths for a fresh network, e.g. 2,8,1")
    p.add_argument("--init-scale", type=float, default=0.5)
    p.add_argument("--init-seed", type=int)
    p.add_argument("--activation", choices=("tanh", "identity", "relu"), default="tanh")
    p.add_argument("--data", required=True, help="CSV with input columns then target columns")
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--batch-size", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="trained network file")
    p.add_argument("--loss-out", help="per-epoch loss CSV")
    p.add_argument("--mask", action="append", help="LAYER=FILE, repeatable; trains masked")
    p.add_argument("--report", help="JSON report path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("canon", parser_class=_Parser, help="canonicalize node order")
    p.add_argument("network")
    p.add_argument("--method", choices=("lexicographic", "maximin"), default="maximin")
    p.add_argument("--out", required=True)
    p.add_argument("--perm-out", help="write the applied permutation JSON")
    p.set_defaults(func=_cmd_canon)

    p = sub.add_parser("compare", parser_class=_Parser, help="per-layer phi CSV on stdout")
    p.add_argument("network_a")
    p.add_argument("network_b")
    p.add_argument(
        "--method",
        choices=("all", "raw", "lexicographic", "maximin"),
        default="all",
        help="method of record for the JSON report; the CSV always has all columns",
    )
    p.add_argument("--report", help="JSON report path")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("mask", parser_class=_Parser, help="binary pre-pruning masks")
    msub = p.add_subparsers(dest="mask_command", required=True)
    g = msub.add_parser("gen", parser_class=_Parser, help="generate a distinct-column mask")
    g.add_argument("--rows", type=int, required=True)
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--rho", type=float, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_mask_gen)
    a = msub.add_parser("apply", parser_class=_Parser, help="mask one layer of a network")
    a.add_argument("network")
    a.add_argument("--layer", type=int, required=True, help="1-based weight matrix index")
    a.add_argument("--mask", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=_cmd_mask_apply)

    p = sub.add_parser("poly", parser_class=_Parser, help="polynomial layers")
    psub = p.add_subparsers(dest="poly_command", required=True)
    f = psub.add_parser("fit", parser_class=_Parser, help="fit coefficients to x,y samples")
    f.add_argument("--data", required=True, help="CSV with one x column then target columns")
    f.add_argument("--family", choices=("laguerre", "legendre", "chebyshev"), default="laguerre")
    f.add_argument("--degree", type=int, required=True)
    f.add_argument("--mode", choices=("normal", "gradient"), default="normal")
    f.add_argument("--lr", type=float)
    f.add_argument("--steps", type=int)
    f.add_argument("--unweighted", action="store_true", help="plain least squares")
    f.add_argument("--mask", help="mask JSON over the coefficient matrix")
    f.add_argument("--out", required=True)
    f.add_argument("--trace-out", help="residual trace CSV")
    f.set_defaults(func=_cmd_poly_fit)
    e = psub.add_parser("eval", parser_class=_Parser, help="evaluate a polytron file")
    e.add_argument("polytron")
    e.add_argument("--x", required=True, help="comma-separated evaluation points")
    e.set_defaults(func=_cmd_poly_eval)
    r = psub.add_parser("residual", parser_class=_Parser, help="weighted approximation error")
    r.add_argument("polytron")
    r.add_argument("--target", required=True, help="exp:RATE or polytron:FILE")
    r.add_argument("--nodes", type=int, default=64)
    r.add_argument("--report", help="JSON report path")
    r.set_defaults(func=_cmd_poly_residual)

    p = sub.add_parser("simulate", parser_class=_Parser, help="noisy gradient iterates")
    p.add_argument("--n", type=int, help="dimension; single lambda/sigma values broadcast")
    p.add_argument("--lambdas", required=True, help="comma-separated eigenvalues, descending")
    p.add_argument("--sigmas", required=True, help="comma-separated noise std per direction")
    p.add_argument("--dist", choices=("gaussian", "uniform", "student_t"), default="gaussian")
    p.add_argument("--df", type=float, help="degrees of freedom for student_t")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--theta0", help="comma-separated start point (default: the optimum)")
    p.add_argument("--theta-star", help="comma-separated optimum (default: origin)")
    p.add_argument("--out", help="trace CSV path (columns t, x_1..x_n)")
    p.add_argument("--report", help="JSON report with measured and exact quantities")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("experiment", parser_class=_Parser, help="composite experiments")
    esub = p.add_subparsers(dest="experiment_command", required=True)
    er = esub.add_parser("run", parser_class=_Parser, help="run a config file")
    er.add_argument("config")
    er.add_argument("--benchmark", help="benchmark network (stopping experiments)")
    er.add_argument("--out", required=True, help="JSON report path")
    er.set_defaults(func=_cmd_experiment_run)
    eb = esub.add_parser("benchmark", parser_class=_Parser, help="train a config's benchmark")
    eb.add_argument("config")
    eb.add_argument("--out", required=True, help="network file path")
    eb.set_defaults(func=_cmd_experiment_benchmark)

    p = sub.add_parser("serve", parser_class=_Parser, help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    client = HttpClient(args.server) if args.server else LocalClient()
    try:
        return args.func(client, args)
    except CommandError as exc:
        sys.stderr.write(f"netsym: error: {exc}\n")
        return 2
    except (NetsymError, ValueError) as exc:
        sys.stderr.write(f"netsym: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
