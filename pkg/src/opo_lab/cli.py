"""``opo-lab`` command line: dynamics | bounds | train | compare.

Settings resolve as built-in preset < ``--config`` file < flags. Config
files hold ``key = value`` lines (``#`` starts a comment) whose keys are
the long flag names without dashes.

Exit codes: 0 success, 1 failed assertion, 2 usage error.

OPO's adaptive temperature setting reported for the LLM-scale runs has no
definition to implement, so there is no flag for it.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .environments import make_env
from .harness import (
    SuiteFailure,
    compare_runs,
    run_bounds_suite,
    run_dynamics_suite,
    run_train_suite,
    write_manifest,
)
from .trainer import TrainConfig

log = logging.getLogger("opo_lab")

PRESET = {
    "alpha": 0.6,
    "mu": 1.0,
    "eta": 0.05,
    "beta": 1.0,
    "lambda": 0.1,
    "steps": 400,
    "rollouts": 6,
    "seed": "7",
    "env": "bandit10",
    "algo": "opo",
    "coord": "ratio",
    "anchor": None,
    "trials": 1000,
}
DYNAMICS_PRESET = {"mu": 1.0, "eta": 0.5, "alpha": 0.6, "beta": 1.0, "seed": "0"}
BOUNDS_PRESET = {"trials": 1000, "seed": "42"}
COMPARE_PRESET = {"algo": "opo,grpo,dpo,l2pg"}

FLAGS = {
    "alpha": float, "mu": float, "eta": float, "beta": float, "lambda": float,
    "steps": int, "rollouts": int, "trials": int, "seed": str,
    "env": str, "algo": str, "coord": str, "anchor": str,
}
SUITE_FLAGS = {
    "dynamics": ("alpha", "mu", "eta", "beta", "seed"),
    "bounds": ("trials", "seed"),
    "train": ("alpha", "mu", "eta", "beta", "lambda", "steps", "rollouts", "seed",
              "env", "algo", "coord", "anchor"),
    "compare": ("alpha", "mu", "eta", "beta", "lambda", "steps", "rollouts", "seed",
                "env", "algo", "coord", "anchor"),
}
CHOICES = {
    "env": ("bandit10", "seq4x4"),
    "algo": ("opo", "grpo", "dpo", "klpg", "l2pg"),
    "coord": ("ratio", "log"),
    "anchor": ("onpolicy", "fixed"),
}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opo-lab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="suite", required=True)
    for suite, names in SUITE_FLAGS.items():
        sp = sub.add_parser(suite)
        for name in names:
            kw = {"type": FLAGS[name], "default": None, "dest": name}
            if name in CHOICES and not (suite == "compare" and name == "algo"):
                kw["choices"] = CHOICES[name]
            if suite == "compare" and name in ("algo", "seed"):
                kw["help"] = "comma-separated list"
            sp.add_argument(f"--{name}", **kw)
        sp.add_argument("--out", default=None)
        sp.add_argument("--config", default=None, help="file of key = value lines")
    return parser


def read_config_file(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def resolve(suite: str, args: argparse.Namespace) -> dict:
    allowed = set(SUITE_FLAGS[suite])
    settings = {k: v for k, v in PRESET.items() if k in allowed}
    settings.update({k: v for k, v in {"dynamics": DYNAMICS_PRESET, "bounds": BOUNDS_PRESET,
                                       "compare": COMPARE_PRESET}.get(suite, {}).items()})
    if args.config:
        try:
            from_file = read_config_file(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        for key, value in from_file.items():
            if key not in allowed:
                raise UsageError(f"unknown config key {key!r} for {suite}")
            try:
                settings[key] = FLAGS[key](value)
            except ValueError:
                raise UsageError(f"bad value for {key}: {value!r}") from None
    for key in allowed:
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    for key, choices in CHOICES.items():
        if key in settings and settings[key] is not None:
            values = str(settings[key]).split(",") if (suite, key) == ("compare", "algo") else [settings[key]]
            bad = [v for v in values if v not in choices]
            if bad:
                raise UsageError(f"invalid {key}: {','.join(bad)}")
    default_out = os.environ.get("OPO_LAB_OUT") or os.path.join("runs", suite)
    settings["out"] = args.out or default_out
    return settings


def _seeds(value) -> list:
    try:
        return [int(s) for s in str(value).split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad seed list {value!r}") from None


def _train_config(s: dict, algo: str, seed: int) -> TrainConfig:
    return TrainConfig(
        algo=algo, alpha=s["alpha"], mu=s["mu"], eta=s["eta"],
        beta=s["beta"] if algo in ("dpo", "klpg") else None,
        lam=s["lambda"] if algo == "l2pg" else None,
        steps=s["steps"], rollouts_per_step=s["rollouts"], seed=seed,
        coordinate_mode=s["coord"], anchor_mode=s["anchor"],
    )


def run_suite(suite: str, s: dict) -> list:
    out = Path(s["out"])
    if suite == "dynamics":
        seed = _seeds(s["seed"])[0]
        return run_dynamics_suite(out, mu=s["mu"], eta=s["eta"], alpha=s["alpha"], beta=s["beta"], seed=seed)
    if suite == "bounds":
        return run_bounds_suite(out, trials=s["trials"], seed=_seeds(s["seed"])[0])
    env = make_env(s["env"])
    if suite == "train":
        cfg = _train_config(s, s["algo"], _seeds(s["seed"])[0])
        s["anchor"] = cfg.anchor_mode.value
        _, artifacts = run_train_suite(out, env, cfg)
        return artifacts
    configs = [_train_config(s, algo, seed)
               for algo in str(s["algo"]).split(",") for seed in _seeds(s["seed"])]
    if len(configs) < 2:
        raise UsageError("compare needs at least two algorithm/seed combinations")
    if s["anchor"] is None:
        s["anchor"] = "per-algorithm default"
    _, artifacts = compare_runs(configs, env, out)
    return artifacts


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    suite = args.suite
    try:
        settings = resolve(suite, args)
        artifacts = run_suite(suite, settings)
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"opo-lab: error: {exc}", file=sys.stderr)
        return 2
    except SuiteFailure as exc:
        print(f"opo-lab: assertion failed: {exc}", file=sys.stderr)
        write_manifest(settings["out"], suite, settings, [], status="failed")
        return 1
    write_manifest(settings["out"], suite, settings, artifacts)
    log.info("wrote %d artifacts under %s", len(artifacts), settings["out"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
