"""Command-line entry point.

Runs are driven by a single JSON config per invocation; flags only pick the
config (or a named preset), the output directory, and override the seed,
replicate count, worker count, and figure rendering.  Exit codes: 0 on
success, 2 for validation problems, 3 for numerical non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import jsonschema

from . import __version__
from .errors import ConvergenceError, VisibilityError
from .models import get_family
from .sampler import (
    DesignParams,
    draw_complete,
    draw_complete_imperfect,
    read_dataset_csv,
    write_dataset_csv,
)
from .complete import (
    complete_ml,
    general_mml,
    mans_mml,
    mins_closed_form,
    select_closed_form,
    srs_ml,
    unbiased_mml,
)
from .em import EmConfig, em_type1, em_type2, em_type3
from .mm import mm_estimate
from .montecarlo import EmPolicy, ExperimentSpec, PrecisionTable, run_experiment
from .casestudy import load_population_csv, run_case_study, synth_population
from .presets import PRESETS
from . import figures

_DESIGN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["rho", "zeta", "m"],
    "properties": {
        "rho": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "zeta": {"type": "number", "minimum": 0, "maximum": 1},
        "m": {"type": "integer", "minimum": 1},
        "pattern": {"enum": ["erss", "mrss", None]},
    },
}

_EM_VALUES_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "max_iters": {"type": "integer", "minimum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "zeta_known": {"type": ["number", "null"]},
        "rho_known": {"type": ["array", "null"], "items": {"type": "number"}},
        "zeta_init": {"type": ["number", "null"]},
        "rho_init": {"type": ["array", "null"], "items": {"type": "number"}},
        "type3_estep": {"enum": ["joint", "plugin"]},
    },
}

_EM_POLICY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "zeta_known": {"type": "boolean"},
        "rho_known": {"type": "boolean"},
        "zeta_init": {"type": ["number", "null"]},
        "rho_init": {"type": ["array", "null"], "items": {"type": "number"}},
        "max_iters": {"type": "integer", "minimum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "type3_estep": {"enum": ["joint", "plugin"]},
    },
}

_FAMILY = {"enum": ["phr-exp", "phr-pareto", "prhr-beta", "prhr-gexp"]}
_VISIBILITY = {"enum": ["complete", "type1", "type2", "type3"]}

SAMPLE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family", "gamma", "design", "visibility", "seed"],
    "properties": {
        "family": _FAMILY,
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "design": _DESIGN_SCHEMA,
        "visibility": _VISIBILITY,
        "seed": {"type": "integer", "minimum": 0},
        "imperfect": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["copula_rho"],
            "properties": {"copula_rho": {"type": "number"}},
        },
        "output": {"type": "string"},
    },
}

ESTIMATE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dataset", "family", "estimator"],
    "properties": {
        "dataset": {"type": "string"},
        "family": _FAMILY,
        "estimator": {"enum": ["srs_ml", "complete_ml", "mins_closed_form",
                               "mans_mml", "general_mml", "unbiased_mml",
                               "closed_form", "mm", "em_type1", "em_type2",
                               "em_type3"]},
        "design": {**_DESIGN_SCHEMA, "type": ["object", "null"]},
        "em": _EM_VALUES_SCHEMA,
        "output": {"type": "string"},
    },
}

_EXPERIMENT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family", "estimator", "data_type", "gammas", "zetas",
                 "rhos", "m", "replicates"],
    "properties": {
        "label": {"type": "string"},
        "family": _FAMILY,
        "estimator": {"enum": ["complete_ml", "mins_closed_form", "mans_mml",
                               "general_mml", "unbiased_mml", "mm",
                               "em_type1", "em_type2", "em_type3"]},
        "data_type": _VISIBILITY,
        "gammas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "zetas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "rhos": {"type": "array", "minItems": 1,
                 "items": {"type": "array", "items": {"type": "number"},
                           "minItems": 1}},
        "m": {"type": "integer", "minimum": 1},
        "replicates": {"type": "integer", "minimum": 1},
        "em": _EM_POLICY_SCHEMA,
    },
}

SIMULATE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiments", "master_seed"],
    "properties": {
        "experiments": {"type": "array", "items": _EXPERIMENT_SCHEMA,
                        "minItems": 1},
        "master_seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
    },
}

CASESTUDY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["population", "zeta_grid", "rhos", "em_inits", "m",
                 "replicates", "master_seed"],
    "properties": {
        "population": {
            "oneOf": [
                {"type": "object", "additionalProperties": False,
                 "required": ["mode", "n", "lambda", "kendall_tau"],
                 "properties": {"mode": {"const": "synthetic"},
                                "n": {"type": "integer", "minimum": 1},
                                "lambda": {"type": "number",
                                           "exclusiveMinimum": 0},
                                "kendall_tau": {"type": "number"},
                                "seed": {"type": "integer", "minimum": 0}}},
                {"type": "object", "additionalProperties": False,
                 "required": ["mode", "path"],
                 "properties": {"mode": {"const": "csv"},
                                "path": {"type": "string"}}},
            ],
        },
        "zeta_grid": {"type": "array", "items": {"type": "number"},
                      "minItems": 1},
        "rhos": {"type": "array", "minItems": 1,
                 "items": {"type": "array", "items": {"type": "number"}}},
        "em_inits": {"type": "array", "minItems": 1,
                     "items": {"type": "object", "additionalProperties": False,
                               "required": ["zeta_init", "rho_init"],
                               "properties": {
                                   "zeta_init": {"type": "number"},
                                   "rho_init": {"type": "array",
                                                "items": {"type": "number"}}}}},
        "ranking": {"type": "array", "minItems": 1,
                    "items": {"enum": ["perfect", "imperfect"]}},
        "m": {"type": "integer", "minimum": 1},
        "replicates": {"type": "integer", "minimum": 1},
        "master_seed": {"type": "integer", "minimum": 0},
        "em": {"type": "object", "additionalProperties": False,
               "properties": {"max_iters": {"type": "integer", "minimum": 1},
                              "tol": {"type": "number",
                                      "exclusiveMinimum": 0},
                              "type3_estep": {"enum": ["joint", "plugin"]}}},
        "output": {"type": "string"},
    },
}

_ESTIMATORS = {
    "srs_ml": lambda fam, ds, design, em: srs_ml(fam, ds.y),
    "complete_ml": lambda fam, ds, design, em: complete_ml(fam, ds),
    "mins_closed_form": lambda fam, ds, design, em: mins_closed_form(fam, ds),
    "mans_mml": lambda fam, ds, design, em: mans_mml(fam, ds),
    "general_mml": lambda fam, ds, design, em: general_mml(fam, ds),
    "unbiased_mml": lambda fam, ds, design, em: unbiased_mml(fam, ds),
    "closed_form": lambda fam, ds, design, em: select_closed_form(fam, ds),
}


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _load_config(args, command: str) -> dict:
    if getattr(args, "preset", None):
        preset = PRESETS.get(args.preset)
        if preset is None:
            raise ValueError(f"unknown preset {args.preset!r}; run "
                             "'rnstat presets list'")
        if preset["command"] != command:
            raise ValueError(
                f"preset {args.preset!r} belongs to the "
                f"'{preset['command']}' command")
        return json.loads(json.dumps(preset["config"]))
    if not args.config:
        raise ValueError("provide --config FILE or --preset NAME")
    with open(args.config) as fh:
        return json.load(fh)


def _validate(config: dict, schema: dict) -> None:
    try:
        jsonschema.validate(config, schema)
    except jsonschema.ValidationError as err:
        raise ValueError(f"config is invalid: {err.message}") from err


def _design_from(config: dict) -> DesignParams:
    return DesignParams(rho=tuple(config["rho"]), zeta=config["zeta"],
                        m=config["m"], fixed_pattern=config.get("pattern"))


def _write_sidecar(path: Path, payload: dict) -> None:
    path.with_suffix(path.suffix + ".meta.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_sample(args) -> int:
    config = _load_config(args, "sample")
    _validate(config, SAMPLE_SCHEMA)
    if args.seed is not None:
        config["seed"] = args.seed
    fam = get_family(config["family"])
    design = _design_from(config["design"])
    digest = config_hash(config)
    if config.get("imperfect"):
        ds = draw_complete_imperfect(fam, config["gamma"], design,
                                     config["imperfect"]["copula_rho"],
                                     config["seed"])
    else:
        ds = draw_complete(fam, config["gamma"], design, config["seed"])
    ds = ds.project(config["visibility"])
    out = Path(args.out_dir) / config.get("output", "dataset.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = {"config": digest, "seed": config["seed"], "version": __version__}
    write_dataset_csv(ds, out, meta)
    _write_sidecar(out, {"command": "sample", "config_hash": digest,
                         "seed": config["seed"], "version": __version__})
    print(f"wrote {out}")
    return 0


def cmd_estimate(args) -> int:
    config = _load_config(args, "estimate")
    _validate(config, ESTIMATE_SCHEMA)
    fam = get_family(config["family"])
    ds = read_dataset_csv(config["dataset"])
    estimator = config["estimator"]
    design = _design_from(config["design"]) if config.get("design") else None
    digest = config_hash(config)
    out = Path(args.out_dir) / config.get("output", "report.json")
    out.parent.mkdir(parents=True, exist_ok=True)

    trace = None
    if estimator in _ESTIMATORS:
        report = _ESTIMATORS[estimator](fam, ds, design, None)
    elif estimator == "mm":
        if design is None:
            raise ValueError("the moment estimator needs the design block "
                             "(rho, zeta, m) to build its correction factors")
        report = mm_estimate(fam, ds, design)
    else:
        em_cfg = EmConfig(**{k: tuple(v) if isinstance(v, list) else v
                             for k, v in config.get("em", {}).items()})
        fn = {"em_type1": em_type1, "em_type2": em_type2,
              "em_type3": em_type3}[estimator]
        report, trace = fn(fam, ds, em_cfg)

    payload = report.to_dict()
    payload.update({"config_hash": digest, "version": __version__,
                    "dataset": config["dataset"],
                    "visibility": ds.visibility.value})
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if trace is not None:
        trace_path = out.with_suffix(".trace.csv")
        trace.to_csv(trace_path, meta={"config": digest,
                                       "version": __version__})
        print(f"wrote {trace_path}")
    print(f"wrote {out}")
    if not report.converged:
        print(f"estimator stopped at the iteration cap without converging "
              f"(iterations={report.iterations})", file=sys.stderr)
        return 3
    return 0


def cmd_simulate(args) -> int:
    config = _load_config(args, "simulate")
    _validate(config, SIMULATE_SCHEMA)
    if args.seed is not None:
        config["master_seed"] = args.seed
    if args.replicates is not None:
        for exp in config["experiments"]:
            exp["replicates"] = args.replicates
    digest = config_hash(config)

    all_rows, labels, nonconverged = [], [], 0
    for index, exp in enumerate(config["experiments"]):
        em = EmPolicy(**{k: tuple(v) if isinstance(v, list) else v
                         for k, v in exp.get("em", {}).items()})
        spec = ExperimentSpec(
            family=exp["family"], estimator=exp["estimator"],
            data_type=exp["data_type"], gammas=tuple(exp["gammas"]),
            zetas=tuple(exp["zetas"]),
            rhos=tuple(tuple(r) for r in exp["rhos"]), m=exp["m"],
            replicates=exp["replicates"],
            master_seed=config["master_seed"],
            label=exp.get("label", f"exp{index}"), em=em)
        table = run_experiment(spec, threads=args.threads)
        nonconverged += table.meta.get("em_nonconverged", 0)
        all_rows.append(table.rows)
        labels.append(spec.label)

    out = Path(args.out_dir) / config.get("output", "precision.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    merged = PrecisionTable([r for rows in all_rows for r in rows],
                            {"seed": config["master_seed"],
                             "em_nonconverged": nonconverged})
    merged.to_csv(out, extra_meta={"config": digest, "version": __version__})
    outputs = [str(out)]
    if not args.no_figures:
        for rows, label in zip(all_rows, labels):
            fig_path = out.with_name(f"{out.stem}_{label}.png")
            figures.plot_precision(rows, fig_path, title=label)
            outputs.append(str(fig_path))
    _write_sidecar(out, {"command": "simulate", "config_hash": digest,
                         "seed": config["master_seed"],
                         "version": __version__, "outputs": outputs,
                         "em_nonconverged": nonconverged})
    for line in outputs:
        print(f"wrote {line}")
    return 0


def cmd_case_study(args) -> int:
    config = _load_config(args, "case-study")
    _validate(config, CASESTUDY_SCHEMA)
    if args.seed is not None:
        config["master_seed"] = args.seed
    if args.replicates is not None:
        config["replicates"] = args.replicates
    digest = config_hash(config)

    pop_cfg = config["population"]
    if pop_cfg["mode"] == "synthetic":
        pop = synth_population(pop_cfg["n"], pop_cfg["lambda"],
                               pop_cfg["kendall_tau"],
                               pop_cfg.get("seed", config["master_seed"]))
    else:
        pop = load_population_csv(pop_cfg["path"])

    table = run_case_study(
        pop,
        zeta_grid=config["zeta_grid"],
        rho_presets=[tuple(r) for r in config["rhos"]],
        em_inits=[(i["zeta_init"], tuple(i["rho_init"]))
                  for i in config["em_inits"]],
        m=config["m"], replicates=config["replicates"],
        seed=config["master_seed"],
        ranking_modes=tuple(config.get("ranking", ["perfect", "imperfect"])),
        em=config.get("em"), threads=args.threads)

    out = Path(args.out_dir) / config.get("output", "casestudy.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out, extra_meta={"config": digest, "version": __version__})
    outputs = [str(out)]
    if not args.no_figures:
        fig_path = out.with_suffix(".png")
        figures.plot_case_study(table.rows, fig_path)
        outputs.append(str(fig_path))
    sidecar = {"command": "case-study", "config_hash": digest,
               "seed": config["master_seed"], "version": __version__,
               "outputs": outputs}
    sidecar.update(table.meta)
    _write_sidecar(out, sidecar)
    for line in outputs:
        print(f"wrote {line}")
    return 0


def cmd_presets(args) -> int:
    if args.action == "list":
        width = max(len(name) for name in PRESETS)
        for name, preset in PRESETS.items():
            print(f"{name:<{width}}  {preset['command']:<10}  "
                  f"{preset['config'].get('output', '')}")
        return 0
    preset = PRESETS.get(args.name or "")
    if preset is None:
        raise ValueError(f"unknown preset {args.name!r}; run "
                         "'rnstat presets list'")
    print(json.dumps(preset["config"], indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnstat",
        description="Randomized nomination sampling: data generation, "
                    "estimation, and relative-precision studies.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, preset_ok=False, sim_overrides=False):
        p.add_argument("--config", help="path to the JSON run config")
        if preset_ok:
            p.add_argument("--preset", help="name of a built-in config")
        p.add_argument("--out-dir", default=".",
                       help="directory for output files")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's seed")
        if sim_overrides:
            p.add_argument("--replicates", type=int, default=None,
                           help="override the replicate count")
            p.add_argument("--threads", type=int, default=1,
                           help="worker processes for replicate chunks")
            p.add_argument("--no-figures", action="store_true",
                           help="skip PNG rendering next to the CSV")

    p_sample = sub.add_parser("sample", help="write one dataset CSV")
    add_common(p_sample)
    p_sample.set_defaults(fn=cmd_sample)

    p_est = sub.add_parser("estimate", help="fit one dataset, write a report")
    add_common(p_est)
    p_est.set_defaults(fn=cmd_estimate)

    p_sim = sub.add_parser("simulate", help="run a relative-precision grid")
    add_common(p_sim, preset_ok=True, sim_overrides=True)
    p_sim.set_defaults(fn=cmd_simulate)

    p_case = sub.add_parser("case-study",
                            help="finite-population study with unknown design")
    add_common(p_case, preset_ok=True, sim_overrides=True)
    p_case.set_defaults(fn=cmd_case_study)

    p_presets = sub.add_parser("presets", help="list or show built-in configs")
    p_presets.add_argument("action", choices=["list", "show"])
    p_presets.add_argument("name", nargs="?")
    p_presets.set_defaults(fn=cmd_presets)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ValueError, VisibilityError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
