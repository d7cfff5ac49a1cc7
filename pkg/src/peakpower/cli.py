"""Command line front end: one subcommand per scenario plus ``preset``.

Settings are layered: scenario defaults (or a preset), then ``--config``
(a JSON object of spec fields, with scenario knobs under ``"knobs"``), then
command line flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from .harness import (PRESETS, SCENARIOS, ExperimentSpec, SpecError, emit, preset, run)

_FLAG_FIELDS = ("n", "oversample", "antennas", "candidates", "constellation", "metric",
                "hpa", "clip_db", "trials", "seed")


def _knob_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [_knob_value(p) for p in text.split(",") if p]
    return text


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise SpecError(f"--set expects key=value, got {item!r}")
        out[key.strip().replace("-", "_")] = _knob_value(value.strip())
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, help="number of subcarriers N")
    p.add_argument("--oversample", type=int, help="oversampling factor I")
    p.add_argument("--antennas", type=int, help="transmit antennas N_t")
    p.add_argument("--candidates", type=int, help="SLM candidates U")
    p.add_argument("--constellation", help="BPSK, QPSK, 16QAM, 8PSK, ...")
    p.add_argument("--metric", help="papr, peak, cm, aom, sdr or clipped")
    p.add_argument("--hpa", help="identity, soft:A, rapp:p:A or cubic[:c3]")
    p.add_argument("--clip-db", dest="clip_db", type=float, help="clip level in dB above RMS")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--config", help="JSON file with spec fields")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="scenario knob, e.g. snr_db=8,10,12 (repeatable)")
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--threads", type=int, help="worker threads (default from PEAKPOWER_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peakpower", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        _common(sub.add_parser(name, help=f"run the {name} scenario"))
    p = sub.add_parser("preset", help="run a figure preset")
    p.add_argument("name", choices=sorted(PRESETS))
    _common(p)
    sub.add_parser("presets", help="list figure presets")
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise SpecError("config file must hold a JSON object")
    names = {f.name for f in fields(ExperimentSpec)}
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - names
    if unknown:
        raise SpecError(f"unknown config keys {sorted(unknown)}")
    return data


def spec_from_args(args) -> ExperimentSpec:
    if args.command == "preset":
        base = preset(args.name).to_dict()
    else:
        base = ExperimentSpec(args.command).to_dict()
    if args.config:
        cfg = _load_config(args.config)
        if args.command != "preset" and cfg.get("scenario", args.command) != args.command:
            raise SpecError(f"config scenario {cfg['scenario']!r} does not match subcommand {args.command!r}")
        knobs = cfg.pop("knobs", {})
        base.update(cfg)
        base["knobs"] = {**base["knobs"], **knobs}
    for name in _FLAG_FIELDS:
        value = getattr(args, name)
        if value is not None:
            base[name] = value
    base["knobs"] = {**base["knobs"], **_parse_set(args.set)}
    return ExperimentSpec.from_dict(base)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "presets":
        for name, cfg in PRESETS.items():
            print(f"{name}: {json.dumps(cfg, sort_keys=True)}")
        return 0
    try:
        spec = spec_from_args(args)
        table = run(spec, args.threads)
        data = emit(table, args.format)
    except SpecError as exc:
        print(f"peakpower: spec error: {exc}", file=sys.stderr)
        return 2
    if args.out == "-":
        sys.stdout.write(data.decode())
    else:
        with open(args.out, "wb") as fh:
            fh.write(data)
        if args.format == "csv":
            with open(args.out + ".meta.json", "w") as fh:
                json.dump(table.meta, fh, sort_keys=True, indent=1)
                fh.write("\n")
    return 0
