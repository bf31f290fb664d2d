"""Command-line front end.

    rpesim list
    rpesim run hardy --format json
    rpesim run mzi --bs out
    rpesim run rpe-coherent --erasure unite_and_spin --shots 100000 --seed 42

Exit codes: 0 success, 2 usage error, 3 physics-domain error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys

from . import _kernels
from .atoms import AtomPrep
from .experiments import SCENARIOS, ConfigError, ExperimentConfig, list_scenarios, run
from .fockspace import SimulationError

EXIT_OK, EXIT_USAGE, EXIT_PHYSICS = 0, 2, 3

ALIASES = {
    "mzi": "mzi_delayed_choice",
    "two-source": "two_source_interference",
    "ifm": "two_source_ifm",
}
ERASURE_ALIASES = {"position": "position_measurement", "unite": "unite_and_spin"}
PREP_ALIASES = {"eq1": AtomPrep.I_UP, "eq8": AtomPrep.I_DOWN,
                "i_up": AtomPrep.I_UP, "i_down": AtomPrep.I_DOWN}


def scenario_name(text: str) -> str:
    name = ALIASES.get(text, text.replace("-", "_"))
    if name not in SCENARIOS:
        raise argparse.ArgumentTypeError(f"unknown scenario {text!r}; run 'rpesim list'")
    return name


def _finite(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return value


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpesim", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("list", help="list the canned scenarios")

    p = sub.add_parser("run", help="run one scenario and print its report")
    p.add_argument("scenario", nargs="?", type=scenario_name)
    p.add_argument("--scenario", dest="scenario_opt", type=scenario_name)
    p.add_argument("--config", help="JSON file with the same keys as the report's config block")
    p.add_argument("--bs", choices=("in", "out"))
    p.add_argument("--phase", type=_finite, help="relative phase in radians (default: auto-tuned)")
    p.add_argument("--erasure", choices=("none", "position", "unite", "position_measurement", "unite_and_spin"))
    p.add_argument("--blocker", action="store_true", default=None)
    p.add_argument("--p", type=_finite, help="single-photon amplitude of each weak source")
    p.add_argument("--epsilon", type=_finite, help="excitation amplitude of the three-level atoms")
    p.add_argument("--nmax", type=int, choices=(1, 2))
    p.add_argument("--prep", choices=tuple(PREP_ALIASES))
    p.add_argument("--shots", type=_positive_int)
    p.add_argument("--seed", type=_u64)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--deterministic", action="store_true", help="omit the timestamp")
    return parser


def config_from_args(args) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    scenario = args.scenario or args.scenario_opt or data.get("scenario")
    if scenario is None:
        raise ConfigError("no scenario given")
    data["scenario"] = scenario_name(scenario) if isinstance(scenario, str) else scenario
    overrides = {
        "bs_present": None if args.bs is None else args.bs == "in",
        "phase": args.phase,
        "erasure": None if args.erasure is None else ERASURE_ALIASES.get(args.erasure, args.erasure),
        "blocker": args.blocker,
        "prep": None if args.prep is None else PREP_ALIASES[args.prep].value,
        "p": args.p,
        "epsilon": args.epsilon,
        "n_max": args.nmax,
        "shots": args.shots,
        "seed": args.seed,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if data.get("seed") is not None and data.get("shots") is None:
        raise ConfigError("--seed needs --shots")
    if data.get("scenario") == "two_source_ifm" and "blocker" not in data:
        data["blocker"] = False
    return ExperimentConfig.from_dict(data)


def _fmt(x) -> str:
    return f"{x:.12g}"


def render_text(doc: dict) -> str:
    probs = doc["probabilities"]
    lines = [f"scenario: {doc['scenario']}"]
    if "p_detector_c" in probs:
        lines.append(f"P(C)={_fmt(probs['p_detector_c'])} P(D)={_fmt(probs['p_detector_d'])}")
    lines.append("probabilities:")
    lines += [f"  {k} = {_fmt(v)}" for k, v in probs.items()]
    if doc.get("discard_probability") is not None:
        lines.append(f"discard probability: {_fmt(doc['discard_probability'])}")
    for name, rows in doc["conditional_states"].items():
        lines.append(f"state {name}:")
        lines += [f"  {_fmt(r['re'])}{r['im']:+.12g}i  |{r['ket']}>" for r in rows]
    if doc.get("concurrence") is not None:
        lines.append(f"concurrence: {_fmt(doc['concurrence'])}")
    if doc.get("chsh"):
        lines.append(f"CHSH: {_fmt(doc['chsh']['value'])} (max over settings {_fmt(doc['chsh']['max'])})")
    if doc.get("samples"):
        s = doc["samples"]
        lines.append(f"samples ({s['shots']} shots, seed {s['seed']}, {s['algorithm']}):")
        lines += [f"  {k}: {v}" for k, v in s["counts"].items()]
        if "chsh" in s:
            lines.append(f"  CHSH estimate: {_fmt(s['chsh']['value'])} +/- {_fmt(s['chsh']['sigma'])}")
    for key, value in doc["provenance"].items():
        if key != "config":
            lines.append(f"{key}: {value}")
    return "\n".join(lines)


def report_document(cfg: ExperimentConfig, deterministic: bool = False) -> dict:
    doc = run(cfg).to_dict()
    doc["provenance"]["backend"] = _kernels.BACKEND
    if not deterministic:
        doc["provenance"]["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return doc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "list":
        print(list_scenarios())
        return EXIT_OK
    if args.command != "run":
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = config_from_args(args)
    except (ConfigError, ValueError, argparse.ArgumentTypeError, OSError) as exc:
        print(f"rpesim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        doc = report_document(cfg, args.deterministic)
    except SimulationError as exc:
        print(f"rpesim: physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    if args.format == "json":
        print(json.dumps(doc, indent=2))
    else:
        print(render_text(doc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
