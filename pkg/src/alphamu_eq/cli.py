"""
Command-line front end.

    alphamu-eq presets
    alphamu-eq ber      [--config FILE] [flags] --out DIR
    alphamu-eq converge [--config FILE] [flags] --out DIR
    alphamu-eq sweep    --param NAME --values V1,V2,... [--config FILE] [flags] --out DIR

Configuration files are plain ``key = value`` lines (``#`` starts a comment)
using the field names of :class:`~alphamu_eq.harness.ExperimentConfig`.
Flags override file values.  Each run writes its CSV files, the fully
resolved ``config.cfg`` and a ``manifest.json`` into ``--out``.  The
``ALPHAMU_EQ_WORKERS`` environment variable sets the number of worker
processes.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import typing
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, harness
from .alpha_mu import PRESETS, get_preset
from .harness import CurvePoint, ExperimentConfig

CSV_HEADER = ("x", "y", "ci_low", "ci_high", "n_errors", "n_bits")


class ConfigError(ValueError):
    pass


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_HINTS = typing.get_type_hints(ExperimentConfig)


def parse_grid(text: str) -> tuple[float, ...]:
    """Expand ``"0:2:12"`` style ranges and comma lists into SNR values."""
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            pieces = [float(p) for p in part.split(":")]
            if len(pieces) == 2:
                start, stop, step = pieces[0], pieces[1], 1.0
            elif len(pieces) == 3:
                start, step, stop = pieces
            else:
                raise ValueError(f"bad range {part!r}")
            if step <= 0:
                raise ValueError(f"range step must be positive in {part!r}")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values.extend(start + i * step for i in range(count))
        else:
            values.append(float(part))
    if not values:
        raise ValueError("empty grid")
    return tuple(values)


def _convert(key: str, raw: str):
    hint = _HINTS[key]
    text = raw.strip()
    optional = type(None) in typing.get_args(hint)
    if optional and text.lower() in ("", "none", "null"):
        return None
    base = next((a for a in typing.get_args(hint) if a is not type(None)), hint)
    if key == "snr_grid_db":
        return parse_grid(text)
    if base is bool:
        if text.lower() in ("true", "yes", "1", "on"):
            return True
        if text.lower() in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if base is int:
        return int(text)
    if base is float:
        return float(text)
    return text


def _read_pairs(path) -> dict[str, str]:
    pairs = {}
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return pairs


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Resolve a config file plus overrides into an :class:`ExperimentConfig`.

    Values in ``overrides`` may be strings (parsed like file values) or
    already-typed values.  Unknown keys and invalid values raise
    :class:`ConfigError` naming the key.
    """
    pairs: dict = _read_pairs(path) if path is not None else {}
    pairs.update(overrides or {})
    kwargs = {}
    for key, raw in pairs.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kwargs[key] = _convert(key, raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise ConfigError(f"invalid value for {key!r}: {exc}") from None
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        bad = next((k for k in kwargs if k in str(exc)), None)
        where = f" (key {bad!r})" if bad else ""
        raise ConfigError(f"invalid configuration{where}: {exc}") from None


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(config: ExperimentConfig) -> str:
    """Serialize every resolved field, defaults included."""
    return "".join(
        f"{name} = {_format_value(getattr(config, name))}\n" for name in _FIELDS
    )


def _fmt(value) -> str:
    return f"{value:.12g}"


def emit_csv(points, path) -> None:
    """Write curve points as ``x,y,ci_low,ci_high,n_errors,n_bits`` rows."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for p in points:
                writer.writerow(
                    [_fmt(p.x), _fmt(p.y), _fmt(p.ci_low), _fmt(p.ci_high), int(p.n_errors), int(p.n_bits)]
                )
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_csv(path) -> list[CurvePoint]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        CurvePoint(float(r["x"]), float(r["y"]), float(r["ci_low"]), float(r["ci_high"]),
                   int(r["n_errors"]), int(r["n_bits"]))
        for r in rows
    ]


@dataclass
class RunManifest:
    command: str
    config: dict[str, str]
    master_seed: int
    version: str
    started: str
    finished: str
    results: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def experiment_config(self) -> ExperimentConfig:
        return parse_config(overrides=self.config)


def _config_dict(config: ExperimentConfig) -> dict[str, str]:
    return {name: _format_value(getattr(config, name)) for name in _FIELDS}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _slug(value) -> str:
    return str(value).replace("-", "").replace(".", "p").lower()


def _sweep_values(param: str, text: str) -> list:
    items = [v.strip() for v in text.split(",") if v.strip()]
    if not items:
        raise ConfigError("--values is empty")
    if param == "preset":
        return [get_preset(v).key for v in items]
    try:
        values = [int(v) for v in items]
    except ValueError:
        raise ConfigError(f"--values for {param} must be integers") from None
    if any(v < 1 for v in values):
        raise ConfigError(f"--values for {param} must be >= 1")
    return values


_FLAG_KEYS = {
    "seed": "master_seed",
    "snr": "snr_grid_db",
    "equalizer": "equalizer",
    "preset": "preset",
    "channel_taps": "channel_taps",
    "training_length": "training_length",
    "eq_taps": "equalizer_taps",
    "streams": "num_streams",
    "step_size": "step_size",
    "forgetting": "forgetting",
}


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = str(value)
    return out


def _cmd_presets(args) -> int:
    print(f"{'name':<8} {'alpha':>6} {'mu':>6}  link")
    for p in PRESETS.values():
        link = {True: "LOS", False: "NLOS", None: "n/a"}[p.los]
        print(f"{p.name.value:<8} {p.alpha:>6.2f} {p.mu:>6.2f}  {link}")
    print()
    print("alpha and mu come from empirical sub-THz channel measurements; beta is")
    print("not measured and is set per run so the channel taps have unit total mean power.")
    return 0


def _run(args) -> int:
    config = parse_config(args.config, _overrides(args))
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    started = _now()
    results = []
    if args.command == "ber":
        points = harness.run_ber_experiment(config)
        emit_csv(points, out / "ber.csv")
        results.append({"file": "ber.csv", "excluded": [p.excluded for p in points]})
    elif args.command == "converge":
        points = harness.run_convergence_experiment(config)
        emit_csv(points, out / "converge.csv")
        results.append({"file": "converge.csv", "excluded": [points[0].excluded if points else 0]})
    else:
        values = _sweep_values(args.param, args.values)
        curves = harness.run_sweep(config, args.param, values)
        for value, points in curves.items():
            name = f"sweep_{args.param}_{_slug(value)}.csv"
            emit_csv(points, out / name)
            results.append({"file": name, args.param: str(value), "excluded": [p.excluded for p in points]})
    (out / "config.cfg").write_text(format_config(config))
    manifest = RunManifest(
        command=args.command,
        config=_config_dict(config),
        master_seed=config.master_seed,
        version=__version__,
        started=started,
        finished=_now(),
        results=results,
    )
    (out / "manifest.json").write_text(manifest.to_json())
    for r in results:
        print(out / r["file"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alphamu-eq",
        description="ZF/LMS/RLS equalization over alpha-mu fading channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("presets", help="list the measured RX-TX parameter sets")

    run_parent = argparse.ArgumentParser(add_help=False)
    run_parent.add_argument("--config", help="key = value configuration file")
    run_parent.add_argument("--out", default="results", help="output directory (default: results)")
    run_parent.add_argument("--seed", type=int)
    run_parent.add_argument("--snr", help='SNR grid in dB, e.g. "0:2:12" or "0,5,10"')
    run_parent.add_argument("--equalizer", choices=("zf", "lms", "rls", "none"))
    run_parent.add_argument("--preset", choices=sorted(PRESETS))
    run_parent.add_argument("--channel-taps", type=int)
    run_parent.add_argument("--training-length", type=int)
    run_parent.add_argument("--eq-taps", type=int)
    run_parent.add_argument("--streams", type=int)
    run_parent.add_argument("--step-size", type=float)
    run_parent.add_argument("--forgetting", type=float)
    run_parent.add_argument("--set", action="append", metavar="KEY=VALUE",
                            help="override any config key (repeatable)")

    sub.add_parser("ber", parents=[run_parent], help="BER versus SNR")
    sub.add_parser("converge", parents=[run_parent], help="training MSE versus iteration")
    sweep = sub.add_parser("sweep", parents=[run_parent], help="BER curves over one parameter")
    sweep.add_argument("--param", required=True, choices=harness.SWEEPABLE)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            return _cmd_presets(args)
        return _run(args)
    except ConfigError as exc:
        print(f"alphamu-eq: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"alphamu-eq: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
