"""``summatrix`` command line.

Exit status: 0 success, 1 a verification or audit failed, 2 bad usage or a
malformed input file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path

from .digits import StreamExhausted, count_prefix, parse_stream, read_digit_file, write_digit_file
from .rational import fraction_str, parse_fraction
from .schedule import (ConstantUnavailable, PsiFunction, PsiTooSlow, build_psi, compute_constants,
                       psi_from_text)
from .simplex import format_vector, parse_targets
from .synthesis import (VerificationFailure, load_schedule, synthesize_for_transform,
                        synthesize_property_P, trace_rows, triangle_transfer, verify_accumulation)
from .transforms import (ContractBreach, SpecError, averaged_freq, builtin_transform,
                         load_transform, silverman_toeplitz_audit)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


def _transform(args):
    spec = getattr(args, "transform", None)
    if spec is None:
        return builtin_transform("cesaro")
    if spec in ("identity", "cesaro"):
        return builtin_transform(spec)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"--transform: no such file {spec}")
    return load_transform(path)


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_freq(args) -> int:
    stream = parse_stream(args.stream, args.base)
    cv = count_prefix(stream, args.n)
    freqs = cv.frequencies()
    print(format_vector(freqs))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n"] + [f"count_{i}" for i in range(args.base)] + [f"freq_{i}" for i in range(args.base)])
    w.writerow([cv.n, *cv.counts, *(fraction_str(f) for f in freqs)])
    sys.stdout.write(buf.getvalue())
    if args.csv:
        Path(args.csv).write_text(buf.getvalue())
    return EXIT_OK


def cmd_transform(args) -> int:
    t = _transform(args)
    stream = parse_stream(args.stream, args.base)
    eps = parse_fraction(args.eps) if args.eps else None
    if not t.finite_rows and eps is None:
        raise ConfigError("--eps is required for transforms with infinite rows")
    res = averaged_freq(t, stream, args.m, eps)
    print(format_vector(res.entries))
    print(f"truncation_error_bound {fraction_str(res.truncation_error_bound)}")
    return EXIT_OK


def cmd_audit(args) -> int:
    t = _transform(args)
    report = silverman_toeplitz_audit(t, args.m_horizon, args.n_horizon, args.h)
    print(report.summary())
    if args.json:
        _dump(report.to_json(), args.json)
    return EXIT_FAIL if report.failed else EXIT_OK


def cmd_constants(args) -> int:
    t = _transform(args)
    c = compute_constants(t, args.h, args.m_range, args.n_range)
    _dump(c.to_json())
    return EXIT_OK


def cmd_psi(args) -> int:
    t = _transform(args)
    c = compute_constants(t, args.h, max(args.n, 1), max(args.n, 1))
    psi = build_psi(c)
    for k in range(args.n + 1):
        print(f"psi({k}) = {psi(k)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    schedule = load_schedule(args.schedule)
    if args.base != schedule.base:
        raise ConfigError(f"--base {args.base} but schedule targets have {schedule.base} entries")
    if args.transform:
        t = _transform(args)
        psi = psi_from_text(args.psi) if args.psi else None
        stream, report = synthesize_for_transform(t, args.base, schedule, args.horizon, psi, seed=args.seed)
    else:
        psi = psi_from_text(args.psi or "n^2+1")
        stream, report = synthesize_property_P(args.base, schedule, psi, args.horizon)
    if args.out:
        write_digit_file(args.out, stream.digits_array(args.horizon), args.base)
    if args.report:
        _dump(report.to_json(), args.report)
    for p in report.phases:
        state = "complete" if p.complete else "incomplete"
        window = p.averaged_window or p.raw_window
        print(f"phase {p.index} q={format_vector(p.q.entries)} h={p.h}: {state}"
              + (f", window {list(window)}" if window else "") + (f" ({p.note})" if p.note else ""))
    return EXIT_OK if report.all_phases_realized(schedule) else EXIT_FAIL


def cmd_verify(args) -> int:
    t = _transform(args)
    stream = read_digit_file(args.digits, args.base)
    if len(stream) < args.horizon:
        raise ConfigError(f"--digits holds {len(stream)} digits, horizon is {args.horizon}")
    targets = parse_targets(args.targets)
    report = verify_accumulation(stream, t, targets, args.h, args.horizon, args.min_hits)
    transfer = triangle_transfer(report, args.h, seed=args.seed)
    out = report.to_json()
    out["triangle_transfer"] = {"checked": transfer.checked, "passed": transfer.passed,
                                "worst_upper": float(transfer.worst)}
    if args.report:
        _dump(out, args.report)
    if args.csv:
        header, rows = trace_rows(report, stream, t)
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    for tgt in report.targets:
        print(f"{format_vector(tgt.q.entries)}: {tgt.count} hits")
    print("PASS" if report.passed and transfer.passed else "FAIL")
    return EXIT_OK if report.passed and transfer.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="summatrix", description=__doc__.split("\n")[0])
    p.add_argument("--config", help="TOML or JSON file whose keys fill in the options below")
    sub = p.add_subparsers(dest="command", required=True)

    def transform_opt(sp, required=False):
        sp.add_argument("--transform", required=required,
                        help="transform spec JSON file, or the name 'cesaro' / 'identity'")

    sp = sub.add_parser("freq", help="digit frequencies of a stream prefix")
    sp.add_argument("--stream", required=True, help="periodic:<digits> | rational:<p>/<q> | random:<seed> | file:<path>")
    sp.add_argument("--base", type=int, default=2)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--csv", help="also write the CSV row to this file")
    sp.set_defaults(func=cmd_freq)

    sp = sub.add_parser("transform", help="T-averaged frequency vector at row m")
    transform_opt(sp)
    sp.add_argument("--stream", required=True)
    sp.add_argument("--base", type=int, default=2)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--eps", help="tail tolerance for infinite rows, e.g. 1/1000")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("audit", help="Silverman-Toeplitz audit at finite horizons")
    transform_opt(sp, required=True)
    sp.add_argument("--m-horizon", type=int, default=1000)
    sp.add_argument("--n-horizon", type=int, default=50)
    sp.add_argument("--h", type=int, default=1)
    sp.add_argument("--json", help="write the full report here")
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("constants", help="regularity constants M_m, N_n, K as JSON")
    transform_opt(sp, required=True)
    sp.add_argument("--h", type=int, default=1)
    sp.add_argument("--m-range", type=int, default=100)
    sp.add_argument("--n-range", type=int, default=3)
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("psi", help="exact values psi(0..n) built from the constants")
    transform_opt(sp)
    sp.add_argument("--h", type=int, default=1)
    sp.add_argument("--n", type=int, default=3)
    sp.set_defaults(func=cmd_psi)

    sp = sub.add_parser("synth", help="synthesize a digit stream following a schedule")
    sp.add_argument("--base", type=int, default=2)
    transform_opt(sp)
    sp.add_argument("--schedule", required=True, help="schedule JSON file")
    sp.add_argument("--horizon", type=int, default=10**6)
    sp.add_argument("--psi", help="window function: n+1 (default with a transform), n^2+1 (default without), 2n")
    sp.add_argument("--seed", type=int, default=0, help="seed for sampled decomposition checks")
    sp.add_argument("--out", help="write the first `horizon` digits here")
    sp.add_argument("--report", help="write the synthesis report JSON here")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("verify", help="list r with the averaged frequencies within 1/h of each target")
    sp.add_argument("--digits", required=True, help="digit file, one ASCII digit per byte")
    sp.add_argument("--base", type=int, default=2)
    transform_opt(sp)
    sp.add_argument("--targets", required=True, help='e.g. "3/4,1/4;1/4,3/4"')
    sp.add_argument("--h", type=int, required=True)
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("--min-hits", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv", help="write the trace CSV here")
    sp.add_argument("--report", help="write the report JSON here")
    sp.set_defaults(func=cmd_verify)
    return p


def _load_config(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _config_argv(config: dict) -> tuple[str | None, list[str]]:
    """Turn ``{"command": "audit", "m_horizon": 500}`` into argv pieces."""
    command = config.get("command")
    argv = []
    for key, value in config.items():
        if key == "command":
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
            continue
        if isinstance(value, list):
            value = ";".join(",".join(map(str, v)) if isinstance(v, list) else str(v) for v in value)
        argv += [flag, str(value)]
    return command, argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    parser = build_parser()
    try:
        if known.config:
            command, extra = _config_argv(_load_config(known.config))
            if rest and rest[0] in parser._subparsers._group_actions[0].choices:
                command, rest = rest[0], rest[1:]
            if command is None:
                raise ConfigError("config has no 'command' and none was given")
            argv = [command] + extra + rest
        args = parser.parse_args(argv)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, SpecError, ContractBreach, ConstantUnavailable, PsiTooSlow,
            StreamExhausted, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
