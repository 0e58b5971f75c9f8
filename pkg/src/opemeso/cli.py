"""Command-line front end: sweeps, variance limits, decay studies, sampling.

Every file-writing run drops a ``<output>.manifest.json`` next to its output
(config echo + git describe + wall clock); ``--from-manifest`` replays a
manifest and reproduces the outputs bit-exactly.  Exit codes: 0 success,
1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import (
    EdgeSpec,
    Side,
    TridiagonalMatrix,
    check_hypotheses,
    convergence_sweep,
    decay_profile,
    empirical_statistic,
    fit_resolvent_approximation,
    from_json,
    parse_test_function,
    sample_spectra,
    sigma2_quadrature,
    sigma2_residue,
)
from .errors import OpemesoError
from .sampling import load_batch, save_batch, standardized_skewness

_FMT = "%.17g"  # full round-trip precision for golden-file stability


def _fmt(x: float) -> str:
    return _FMT % x


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            check=False,
            text=True,
        )
        return out.stdout.strip() or "nogit"
    except OSError:
        return "nogit"


def _write_manifest(output: Path, command: str, config: dict, wallclock: float, outputs):
    manifest = {
        "schema": 1,
        "command": command,
        "config": config,
        "git_describe": _git_describe(),
        "wallclock_s": wallclock,
        "outputs": [str(p) for p in outputs],
    }
    path = output.with_suffix(output.suffix + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _edge_from_args(args) -> EdgeSpec:
    side = Side.LEFT if args.side == "left" else Side.RIGHT
    return EdgeSpec(side=side, alpha=args.alpha, x0=args.x0, epsilon=args.epsilon)


def _ensemble_from_args(args):
    params = json.loads(args.params) if args.params else {}
    return from_json({"family": args.ensemble, "params": params})


def _add_ensemble_args(p: argparse.ArgumentParser):
    p.add_argument("--ensemble", required=True, help="family name, e.g. chebyshev2")
    p.add_argument("--params", default=None, help='family params as JSON, e.g. \'{"gamma": 0}\'')


def _add_edge_args(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float, required=True, help="mesoscopic exponent in (0, 2)")
    p.add_argument("--epsilon", type=float, default=None, help="window exponent margin")
    p.add_argument("--side", choices=["left", "right"], default="right")
    p.add_argument("--x0", type=float, default=None, help="override the exact finite-n edge")


def _parse_n_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opemeso",
        description="Mesoscopic edge statistics of orthogonal polynomial ensembles",
    )
    parser.add_argument("--from-manifest", default=None, help="replay a manifest file")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("cumulants", help="scaled-cumulant convergence sweep")
    _add_ensemble_args(p)
    _add_edge_args(p)
    p.add_argument("--n", required=True, help="comma-separated ascending sizes")
    p.add_argument("--m-max", type=int, default=4)
    p.add_argument("--f", required=True, help='test function, e.g. "im:1/(x-i)"')
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("variance-limit", help="limiting variance by quadrature/residue")
    p.add_argument("--f", required=True)
    p.add_argument("--side", choices=["left", "right"], default="right")
    p.add_argument("--method", choices=["quadrature", "residue", "both"], default="both")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--output", "-o", default=None)

    p = sub.add_parser("decay", help="off-diagonal resolvent decay profile")
    p.add_argument("--n-alpha", type=float, required=True, help="zoom scale n^alpha")
    p.add_argument("--eta", default="i", help="complex spectral offset, e.g. i or 0.5+2i")
    p.add_argument("--x0", type=float, default=2.0)
    p.add_argument("--size", type=int, default=2000)
    p.add_argument("--ref-row", type=int, default=None)
    p.add_argument("--output", "-o", required=True)

    p = sub.add_parser("hypotheses", help="slow-variation hypothesis report")
    _add_ensemble_args(p)
    _add_edge_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--output", "-o", default=None)

    p = sub.add_parser("sample", help="Monte-Carlo spectra and empirical statistics")
    _add_ensemble_args(p)
    _add_edge_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--f", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-batch", default=None, help="persist spectra to a binary file")
    p.add_argument("--resume", action="store_true", help="extend an existing batch file")
    p.add_argument("--output", "-o", default=None)

    p = sub.add_parser("fit", help="rational approximation of a test function")
    p.add_argument("--target", required=True, help='"bump:a,b", "hat:a,b", or a pole spec')
    p.add_argument("--poles", type=int, default=20)
    p.add_argument("--height", type=float, default=0.25)
    p.add_argument("--output", "-o", required=True)

    p = sub.add_parser("selftest", help="run the acceptance criteria")
    p.add_argument("--only", default=None, help="comma-separated criterion numbers")

    return parser


def _parse_complex_arg(text: str) -> complex:
    from .testfun import _parse_complex

    return _parse_complex(text)


def _make_target(text: str):
    if text.startswith("bump:"):
        a, b = (float(t) for t in text[5:].split(","))

        def bump(x):
            x = np.asarray(x, dtype=float)
            t = (2 * (x - a) / (b - a)) - 1  # [-1, 1] inside the support
            inside = np.abs(t) < 1
            out = np.zeros_like(x)
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                vals = np.exp(-1.0 / np.clip(1 - t ** 2, 1e-300, None))
            out[inside] = vals[inside]
            return out

        return bump
    if text.startswith("hat:"):
        a, b = (float(t) for t in text[4:].split(","))
        mid = 0.5 * (a + b)

        def hat(x):
            x = np.asarray(x, dtype=float)
            left = np.clip((x - a) / (mid - a), 0, None)
            right = np.clip((b - x) / (b - mid), 0, None)
            return np.maximum(0.0, np.minimum(left, right))

        return hat
    return parse_test_function(text)


def cmd_cumulants(args) -> list[Path]:
    spec = _ensemble_from_args(args)
    edge = _edge_from_args(args)
    f = parse_test_function(args.f)
    n_list = _parse_n_list(args.n)
    reports = convergence_sweep(spec, edge, f, n_list, m_max=args.m_max)
    out = Path(args.output)
    if args.format == "csv":
        lines = ["n,alpha,m,value_re,value_im"]
        for rep in reports:
            for n, alpha, m, re_, im_ in rep.csv_rows():
                lines.append(f"{n},{_fmt(alpha)},{m},{_fmt(re_)},{_fmt(im_)}")
        out.write_text("\n".join(lines) + "\n")
    else:
        out.write_text(
            json.dumps({"schema": 1, "reports": [r.to_json() for r in reports]}, indent=2)
            + "\n"
        )
    return [out]


def cmd_variance_limit(args) -> list[Path]:
    f = parse_test_function(args.f)
    side = Side.LEFT if args.side == "left" else Side.RIGHT
    payload = {"schema": 1}
    if args.method in ("quadrature", "both"):
        q = sigma2_quadrature(f, side, tol=args.tol)
        payload["quadrature"] = q.to_json()
        payload["value"] = q.value
    if args.method in ("residue", "both"):
        r = sigma2_residue(f, side)
        payload["residue"] = r.to_json()
        payload["value"] = r.value
    text = json.dumps(payload, indent=2) + "\n"
    if args.output:
        out = Path(args.output)
        out.write_text(text)
        return [out]
    sys.stdout.write(text)
    return []


def cmd_decay(args) -> list[Path]:
    eta = _parse_complex_arg(args.eta)
    N = args.size
    J = TridiagonalMatrix(np.zeros(N), np.ones(N - 1), args.x0 + eta / args.n_alpha)
    ref = args.ref_row if args.ref_row is not None else N // 2
    fit = decay_profile(J, ref_row=ref)
    out = Path(args.output)
    lines = ["distance,log_abs"]
    for dist, val in fit.csv_rows():
        lines.append(f"{dist},{_fmt(val)}")
    out.write_text("\n".join(lines) + "\n")
    fit_path = out.with_suffix(out.suffix + ".fit.json")
    fit_path.write_text(
        json.dumps(
            {
                "schema": 1,
                "rate": fit.rate,
                "intercept": fit.intercept,
                "ref_row": fit.ref_row,
                "n_points": fit.n_points,
            },
            indent=2,
        )
        + "\n"
    )
    return [out, fit_path]


def cmd_hypotheses(args) -> list[Path]:
    spec = _ensemble_from_args(args)
    edge = _edge_from_args(args)
    report = check_hypotheses(spec, args.n, edge)
    text = json.dumps(report.to_json(), indent=2) + "\n"
    if args.output:
        out = Path(args.output)
        out.write_text(text)
        return [out]
    sys.stdout.write(text)
    return []


def cmd_sample(args, threads: int) -> list[Path]:
    spec = _ensemble_from_args(args)
    edge = _edge_from_args(args)
    f = parse_test_function(args.f)
    batch = None
    outputs = []
    if args.resume and args.out_batch and Path(args.out_batch).exists():
        existing = load_batch(args.out_batch, spec)
        if existing.seed != args.seed or existing.n != args.n:
            raise OpemesoError("existing batch does not match the requested seed/n")
        missing = args.count - existing.count
        if missing > 0:
            extra = sample_spectra(
                spec, args.n, missing, args.seed, threads=threads,
                start_index=existing.count,
            )
            spectra = np.vstack([existing.spectra, extra.spectra])
            from .sampling import SampleBatch

            batch = SampleBatch(spec, args.n, args.seed, spectra)
        else:
            batch = existing
    else:
        batch = sample_spectra(spec, args.n, args.count, args.seed, threads=threads)
    if args.out_batch:
        save_batch(batch, args.out_batch)
        outputs.append(Path(args.out_batch))
    mean, var, se = empirical_statistic(batch, f, edge)
    payload = {
        "schema": 1,
        "n": batch.n,
        "count": batch.count,
        "seed": batch.seed,
        "x0": edge.center(spec, batch.n),
        "mean": mean,
        "variance": var,
        "variance_std_error": se,
        "skewness": standardized_skewness(batch, f, edge),
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.output:
        out = Path(args.output)
        out.write_text(text)
        outputs.append(out)
    else:
        sys.stdout.write(text)
    return outputs


def cmd_fit(args) -> list[Path]:
    target = _make_target(args.target)
    fitted, achieved = fit_resolvent_approximation(target, args.poles, args.height)
    out = Path(args.output)
    lines = ["pole_re,pole_im,weight_re,weight_im"]
    for pole, weight in zip(fitted.poles, fitted.weights):
        lines.append(
            f"{_fmt(pole.real)},{_fmt(pole.imag)},{_fmt(weight.real)},{_fmt(weight.imag)}"
        )
    out.write_text("\n".join(lines) + "\n")
    meta = out.with_suffix(out.suffix + ".fit.json")
    meta.write_text(
        json.dumps({"schema": 1, "achieved_lw_norm": achieved, "poles": args.poles}, indent=2)
        + "\n"
    )
    return [out, meta]


def cmd_selftest(args) -> int:
    from .acceptance import run

    only = [int(t) for t in args.only.split(",")] if args.only else None
    results = run(only=only)
    return 0 if all(r.ok for r in results) else 1


def _config_echo(args) -> dict:
    skip = {"from_manifest"}
    return {k: v for k, v in vars(args).items() if k not in skip and not callable(v)}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.from_manifest:
        manifest = json.loads(Path(args.from_manifest).read_text())
        replay = [manifest["command"]]
        for key, value in manifest["config"].items():
            if value is None or key == "command":
                continue
            flag = "--" + key.replace("_", "-")
            if isinstance(value, bool):
                if value:
                    replay.append(flag)
            else:
                replay.extend([flag, str(value)])
        return main(replay)

    if args.command is None:
        parser.print_help()
        return 2

    threads = getattr(args, "threads", None)
    if threads is None:
        threads = int(os.environ.get("OPE_MESO_THREADS", "1"))

    start = time.perf_counter()
    try:
        if args.command == "cumulants":
            outputs = cmd_cumulants(args)
        elif args.command == "variance-limit":
            outputs = cmd_variance_limit(args)
        elif args.command == "decay":
            outputs = cmd_decay(args)
        elif args.command == "hypotheses":
            outputs = cmd_hypotheses(args)
        elif args.command == "sample":
            outputs = cmd_sample(args, threads)
        elif args.command == "fit":
            outputs = cmd_fit(args)
        elif args.command == "selftest":
            return cmd_selftest(args)
        else:  # pragma: no cover
            parser.error(f"unknown command {args.command}")
    except OpemesoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    wallclock = time.perf_counter() - start
    if outputs:
        _write_manifest(outputs[0], args.command, _config_echo(args), wallclock, outputs)
    return 0


if __name__ == "__main__":
    sys.exit(main())
