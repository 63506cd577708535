"""Command-line front end: config-driven experiment runs with durable records.

Subcommands:

* ``run <config.json>``: execute the configured experiment, write a run
  directory (record.json, results.csv, trace.csv for iterative runs).
* ``report <run_dir>``: print a summary of a recorded run.
* ``list-families``: show the map families, experiments, and gauges.
* ``validate <config.json>``: schema-check a config without running it.

Exit codes: 0 success (converged / satisfied / all checks pass), 2 a
negative result (gate failed, collision, non-member, invalid config for
``validate``), 1 operational error (unreadable file, bad schema on ``run``,
crash).  The default output root is ``$HOMCONJ_RUNS`` or ``./runs``.
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import subprocess
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .conjugacy import (
    PicardContext,
    cauchy_envelope,
    envelope_threshold,
    picard_solve,
)
from .families import (
    FAMILIES,
    BumpSpec,
    FamilySpec,
    build_contraction_pair,
    build_lozi,
    build_perturbed_linear,
    build_pure_linear,
    build_translation,
)
from .funcspace import (
    BUILTIN_TRIPLE_NAMES,
    Domain,
    SampleScheme,
    Tolerances,
    builtin_triple,
    doubling_sample_sets,
    validate_gauge,
    validate_scale_pair,
)
from .homspace import (
    EstimateContext,
    group_membership,
    identity,
    koopman_lambda,
    roundtrip_error,
)
from .koopman import (
    ConvergenceError,
    abel_check,
    check_p_alpha,
    koenigs_eigenfunction,
    r_lipschitz,
    schroeder_functional_check,
    wandering_check,
)

__all__ = ["main", "load_config", "ConfigError", "EXPERIMENTS", "TRACE_COLUMNS"]

EXPERIMENTS = (
    "validate",
    "eigen_check",
    "picard",
    "lozi_membership",
    "koenigs",
    "abel",
    "wandering",
    "fk_sweep",
)

TRACE_COLUMNS = ("n", "rho_increment", "conj_residual", "fk_envelope",
                 "compact_bound")

ENV_RUNS = "HOMCONJ_RUNS"


class ConfigError(ValueError):
    """Schema violation; the message carries the config path of the offender."""


# ---------------------------------------------------------------------------
# config parsing


_TOP_KEYS = {
    "schema": True,
    "experiment": True,
    "family": False,
    "sampling": False,
    "tolerances": False,
    "output_dir": False,
    "options": False,
}

_SAMPLING_KEYS = ("window_radius", "grid_points_per_axis",
                  "quasirandom_count", "exhaustion_levels", "seed")

_TOLERANCE_KEYS = tuple(f.name for f in dataclasses.fields(Tolerances))

_FAMILY_PARAMS = {
    "contraction_pair": ({"eta"}, {"bump_center", "bump_halfwidth"}),
    "lozi": ({"a", "b"}, {"norm"}),
    "pure_linear": ({"scale"}, {"lo"}),
    "translation": ({"offset"}, set()),
    "perturbed_linear": ({"scale"},
                         {"dim", "bump_center", "bump_halfwidth",
                          "bump_height"}),
}

_EXPERIMENT_OPTIONS = {
    "validate": {"gauge"},
    "eigen_check": {"alpha", "gauge"},
    "picard": {"alpha", "h0", "n_max", "n_bnd"},
    "lozi_membership": set(),
    "koenigs": {"use", "multiplier", "n_max"},
    "abel": {"inner_radius", "residual_tol"},
    "wandering": {"cloud", "covering_radius", "nu", "n_max"},
    "fk_sweep": {"epsilons", "Cs", "k_max"},
}


def _check_keys(obj: dict, path: str, allowed, required=()):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(
            f"{path}: unknown key(s) {', '.join(map(repr, unknown))} "
            f"(allowed: {', '.join(sorted(allowed))})")
    missing = sorted(set(required) - set(obj))
    if missing:
        raise ConfigError(f"{path}: missing required key(s) "
                          f"{', '.join(map(repr, missing))}")


def _number(val, path: str) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {val!r}")
    return float(val)


def _integer(val, path: str) -> int:
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{path}: expected an integer, got {val!r}")
    return int(val)


def _string(val, path: str) -> str:
    if not isinstance(val, str):
        raise ConfigError(f"{path}: expected a string, got {val!r}")
    return val


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    experiment: str
    family: FamilySpec | None
    scheme: SampleScheme
    tol: Tolerances
    output_dir: str | None
    options: dict


def parse_config(raw: dict, source: str = "config") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    _check_keys(raw, source, _TOP_KEYS,
                [k for k, req in _TOP_KEYS.items() if req])

    if raw["schema"] != 1:
        raise ConfigError(f"{source}.schema: unsupported value {raw['schema']!r}"
                          " (this tool reads schema 1)")

    experiment = _string(raw["experiment"], f"{source}.experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"{source}.experiment: unknown experiment "
                          f"{experiment!r} (one of: {', '.join(EXPERIMENTS)})")

    family = None
    if "family" in raw:
        if experiment == "fk_sweep":
            raise ConfigError(f"{source}.family: fk_sweep takes no family")
        fam = raw["family"]
        if not isinstance(fam, dict):
            raise ConfigError(f"{source}.family: expected an object")
        _check_keys(fam, f"{source}.family", ("name", "params"), ("name",))
        name = _string(fam["name"], f"{source}.family.name")
        if name not in _FAMILY_PARAMS:
            raise ConfigError(
                f"{source}.family.name: unknown family {name!r} "
                f"(one of: {', '.join(sorted(_FAMILY_PARAMS))})")
        params = fam.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"{source}.family.params: expected an object")
        req, opt = _FAMILY_PARAMS[name]
        _check_keys(params, f"{source}.family.params", req | opt, req)
        family = FamilySpec(family=name, params=dict(params))
    elif experiment != "fk_sweep":
        raise ConfigError(f"{source}: experiment {experiment!r} needs a family")

    sampling = raw.get("sampling", {})
    if not isinstance(sampling, dict):
        raise ConfigError(f"{source}.sampling: expected an object")
    _check_keys(sampling, f"{source}.sampling", _SAMPLING_KEYS)
    scheme_kwargs = {"window_radius": 8.0}
    for key in _SAMPLING_KEYS:
        if key not in sampling:
            continue
        if key == "window_radius":
            scheme_kwargs[key] = _number(sampling[key], f"{source}.sampling.{key}")
        else:
            scheme_kwargs[key] = _integer(sampling[key], f"{source}.sampling.{key}")
    try:
        scheme = SampleScheme(**scheme_kwargs)
    except ValueError as e:
        raise ConfigError(f"{source}.sampling: {e}") from e

    tols = raw.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigError(f"{source}.tolerances: expected an object")
    _check_keys(tols, f"{source}.tolerances", _TOLERANCE_KEYS)
    tol_kwargs = {k: _number(v, f"{source}.tolerances.{k}")
                  for k, v in tols.items()}
    try:
        tol = dataclasses.replace(Tolerances(), **tol_kwargs)
    except ValueError as e:
        raise ConfigError(f"{source}.tolerances: {e}") from e

    output_dir = None
    if "output_dir" in raw:
        output_dir = _string(raw["output_dir"], f"{source}.output_dir")

    options = raw.get("options", {})
    if not isinstance(options, dict):
        raise ConfigError(f"{source}.options: expected an object")
    _check_keys(options, f"{source}.options", _EXPERIMENT_OPTIONS[experiment])

    return RunConfig(raw=raw, experiment=experiment, family=family,
                     scheme=scheme, tol=tol, output_dir=output_dir,
                     options=dict(options))


def load_config(path: str) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON: {e}") from e
    return parse_config(raw, source=p.name)


# ---------------------------------------------------------------------------
# family construction helpers


def _build_single_map(spec: FamilySpec, path: str):
    p = spec.params
    if spec.family == "lozi":
        return build_lozi(float(p["a"]), float(p["b"]),
                          norm=p.get("norm", "euclidean"))
    if spec.family == "pure_linear":
        domain = None
        if "lo" in p:
            lo = _number(p["lo"], f"{path}.lo")
            domain = Domain(dim=1, region="half_line", bounds=((lo, np.inf),))
        return build_pure_linear(_number(p["scale"], f"{path}.scale"), domain)
    if spec.family == "translation":
        off = p["offset"]
        if isinstance(off, (int, float)) and not isinstance(off, bool):
            off = [off]
        return build_translation(np.asarray(off, dtype=float))
    if spec.family == "perturbed_linear":
        dim = int(p.get("dim", 1))
        scale = _number(p["scale"], f"{path}.scale")
        height = float(p.get("bump_height", 0.0))
        pert = None
        if height > 0:
            pert = BumpSpec(center=float(p.get("bump_center", 2.0)),
                            halfwidth=float(p.get("bump_halfwidth", 1.0)),
                            height=height)
        return build_perturbed_linear(scale * np.eye(dim), pert, dim=dim)
    raise ConfigError(f"{path}: family {spec.family!r} does not define a "
                      "single map")


def _require_family(cfg: RunConfig, allowed: tuple):
    if cfg.family is None or cfg.family.family not in allowed:
        have = "none" if cfg.family is None else repr(cfg.family.family)
        raise ConfigError(
            f"experiment {cfg.experiment!r} needs family "
            f"{' or '.join(map(repr, allowed))}, got {have}")
    return cfg.family


def _gauge_for(cfg: RunConfig, domain: Domain):
    name = cfg.options.get("gauge", "linear_plus")
    if name not in BUILTIN_TRIPLE_NAMES:
        raise ConfigError(f"config.options.gauge: unknown gauge {name!r} "
                          f"(one of: {', '.join(BUILTIN_TRIPLE_NAMES)})")
    return builtin_triple(name, domain)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class Outcome:
    exit_code: int
    results: dict
    trace_rows: tuple | None = None
    results_rows: tuple | None = None    # (header, rows)
    warnings: tuple = ()


def _displacement_dict(est) -> dict:
    return {"value": float(est.value), "finiteness": est.finiteness}


def _eigen_dict(rep) -> dict:
    return {
        "alpha": rep.alpha,
        "lambda_f": rep.lambda_f,
        "lambda_g": rep.lambda_g,
        "min_slack_f": rep.min_slack_f,
        "min_slack_g": rep.min_slack_g,
        "satisfied": rep.satisfied,
        "worst_point": None if rep.worst_point is None
        else [float(v) for v in rep.worst_point],
    }


def _exp_validate(cfg: RunConfig) -> Outcome:
    spec = _require_family(cfg, tuple(_FAMILY_PARAMS))
    warnings = ()
    if spec.family == "contraction_pair":
        if "gauge" in cfg.options:
            raise ConfigError("config.options.gauge: contraction_pair carries "
                              "its own gauge")
        bundle = build_contraction_pair(float(spec.params["eta"]),
                                        **{k: float(v) for k, v in
                                           spec.params.items() if k != "eta"})
        growth, r, cross, phi, domain = (bundle.growth, bundle.r, bundle.cross,
                                         bundle.phi, bundle.domain)
        warnings = bundle.notes
    else:
        mp = _build_single_map(spec, "config.family.params")
        growth, r, cross, phi = _gauge_for(cfg, mp.domain)
        domain = mp.domain
    scale_rep = validate_scale_pair(growth, r, cross, cfg.scheme, cfg.tol)
    gauge_rep = validate_gauge(phi, growth, domain, cfg.scheme, cfg.tol)
    passed = scale_rep.passed and gauge_rep.passed
    results = {
        "family": spec.family,
        "scale_pair": scale_rep.as_dict(),
        "gauge": gauge_rep.as_dict(),
        "passed": passed,
    }
    return Outcome(exit_code=0 if passed else 2, results=results,
                   warnings=warnings)


def _exp_eigen_check(cfg: RunConfig) -> Outcome:
    spec = _require_family(cfg, tuple(_FAMILY_PARAMS))
    warnings = ()
    if spec.family == "contraction_pair":
        bundle = build_contraction_pair(float(spec.params["eta"]))
        alpha = float(cfg.options.get("alpha", bundle.alpha))
        rep = check_p_alpha(bundle.f, bundle.g, bundle.phi, bundle.r, alpha,
                            cfg.scheme, cfg.tol)
        warnings = bundle.notes
    else:
        if "alpha" not in cfg.options:
            raise ConfigError("config.options.alpha: required for "
                              "eigen_check outside contraction_pair")
        mp = _build_single_map(spec, "config.family.params")
        _, r, _, phi = _gauge_for(cfg, mp.domain)
        rep = check_p_alpha(mp, None, phi, r,
                            float(cfg.options["alpha"]), cfg.scheme, cfg.tol)
    results = {"family": spec.family, "eigen": _eigen_dict(rep)}
    return Outcome(exit_code=0 if rep.satisfied else 2, results=results,
                   warnings=warnings)


def _exp_picard(cfg: RunConfig) -> Outcome:
    spec = _require_family(cfg, ("contraction_pair",))
    bundle = build_contraction_pair(
        float(spec.params["eta"]),
        **{k: float(v) for k, v in spec.params.items() if k != "eta"})
    alpha = float(cfg.options.get("alpha", bundle.alpha))
    h0_name = cfg.options.get("h0", "g")
    if h0_name == "g":
        h0 = bundle.g
    elif h0_name == "identity":
        h0 = identity(bundle.domain)
    else:
        raise ConfigError("config.options.h0: expected 'g' or 'identity', "
                          f"got {h0_name!r}")
    est = EstimateContext(domain=bundle.domain, scheme=cfg.scheme,
                          phi=bundle.phi, r=bundle.r, cross=bundle.cross,
                          tol=cfg.tol)
    pctx = PicardContext(
        est=est, alpha=alpha,
        n_max=int(cfg.options.get("n_max", 200)),
        n_bnd=int(cfg.options.get("n_bnd", 32)),
    )
    res = picard_solve(bundle.f, bundle.g, h0, pctx)
    tr = res.trace
    trace_rows = tuple(
        {"n": s.n, "rho_increment": s.rho_increment,
         "conj_residual": s.conj_residual, "fk_envelope": s.fk_envelope,
         "compact_bound": s.compact_bound}
        for s in tr.steps)
    results = {
        "family": spec.family,
        "eta": bundle.eta,
        "alpha": alpha,
        "h0": h0_name,
        "verdict": tr.verdict,
        "n_steps": tr.n_steps,
        "delta": tr.constants.delta,
        "gate_constant_A": tr.constants.A,
        "gate_threshold": tr.constants.threshold,
        "failed_gate": tr.failed_gate,
        "anchor": tr.anchor,
        "eps_monitor": tr.eps_monitor,
        "incrementally_bounded": tr.incrementally_bounded,
        "final_residual": res.residual,
        "membership": None if res.membership is None
        else res.membership.verdict,
        "eigen": None if tr.eigen is None else _eigen_dict(tr.eigen),
        "family_notes": list(bundle.notes),
    }
    return Outcome(exit_code=0 if res.converged else 2, results=results,
                   trace_rows=trace_rows, warnings=bundle.notes)


def _exp_lozi_membership(cfg: RunConfig) -> Outcome:
    spec = _require_family(cfg, ("lozi",))
    mp = _build_single_map(spec, "config.family.params")
    _, r, cross, phi = _gauge_for(cfg, mp.domain)
    verdict = group_membership(mp, phi, r, cfg.scheme, cfg.tol)
    lam = r_lipschitz(mp, r, cfg.scheme, cfg.tol)
    coeff = None
    if verdict.forward.finiteness == "finite":
        coeff = koopman_lambda(verdict.forward.value, phi, cross)
    pts = doubling_sample_sets(mp.domain, cfg.scheme)[0][1]
    results = {
        "family": spec.family,
        "params": dict(spec.params),
        "verdict": verdict.verdict,
        "displacement_forward": _displacement_dict(verdict.forward),
        "displacement_inverse": _displacement_dict(verdict.inverse),
        "r_lipschitz": {"value": lam.value, "finiteness": lam.finiteness},
        "koopman_coefficient": coeff,
        "roundtrip_error": roundtrip_error(mp, pts),
    }
    code = 0 if verdict.verdict == "member" else 2
    return Outcome(exit_code=code, results=results)


def _exp_koenigs(cfg: RunConfig) -> Outcome:
    spec = _require_family(cfg, ("contraction_pair", "pure_linear"))
    if spec.family == "contraction_pair":
        bundle = build_contraction_pair(float(spec.params["eta"]))
        use = cfg.options.get("use", "g")
        if use not in ("f", "g"):
            raise ConfigError("config.options.use: expected 'f' or 'g', "
                              f"got {use!r}")
        mp = bundle.g if use == "g" else bundle.f
        multiplier = float(cfg.options.get("multiplier", bundle.eta))
    else:
        scale = _number(spec.params["scale"], "config.family.params.scale")
        if not 0.0 < scale < 1.0:
            raise ConfigError("config.family.params.scale: the linearization "
                              "needs scale in (0, 1)")
        mp = _build_single_map(spec, "config.family.params")
        multiplier = float(cfg.options.get("multiplier", scale))
    fixed_point = np.zeros(mp.domain.dim)
    try:
        _, rep = koenigs_eigenfunction(
            mp, fixed_point, multiplier, cfg.scheme,
            n_max=int(cfg.options.get("n_max", 100)), tol=cfg.tol)
    except ConvergenceError as e:
        return Outcome(exit_code=2, results={
            "family": spec.family, "converged": False, "reason": str(e)})
    results = {
        "family": spec.family,
        "multiplier": multiplier,
        "converged": rep.converged,
        "n_steps": rep.n_steps,
        "final_increment": rep.final_increment,
        "residual": rep.residual,
        "growth_exponent": rep.growth_exponent,
    }
    return Outcome(exit_code=0, results=results)


def _exp_abel(cfg: RunConfig) -> Outcome:
    spec = _require_family(cfg, ("pure_linear",))
    if "lo" in spec.params:
        raise ConfigError("config.family.params.lo: the shift check manages "
                          "its own domain")
    scale = _number(spec.params["scale"], "config.family.params.scale")
    if not (scale > 0 and scale != 1.0):
        raise ConfigError("config.family.params.scale: need scale > 0 and "
                          "scale != 1")
    inner = float(cfg.options.get("inner_radius", 0.125))
    domain = Domain(dim=1, region="box_minus_ball", inner_radius=inner)
    mp = build_pure_linear(scale, domain)
    log_scale = np.log(scale)

    def varphi(pts):
        return np.log(domain.norm_of(pts)) / log_scale

    rep = abel_check(mp, varphi, cfg.scheme)
    results = {
        "family": spec.family,
        "scale": scale,
        "residual": rep.residual,
        "worst_point": [float(v) for v in rep.worst_point],
    }
    if 0.0 < scale < 1.0:
        low = schroeder_functional_check(mp, cfg.scheme)
        results["log_margin"] = low.margin
        results["contraction_factor"] = low.contraction_factor
    residual_tol = float(cfg.options.get("residual_tol", 1e-9))
    code = 0 if rep.residual <= residual_tol else 2
    return Outcome(exit_code=code, results=results)


def _exp_wandering(cfg: RunConfig) -> Outcome:
    spec = _require_family(cfg, ("translation", "pure_linear"))
    mp = _build_single_map(spec, "config.family.params")
    if "cloud" not in cfg.options or "covering_radius" not in cfg.options:
        raise ConfigError("config.options: wandering needs 'cloud' and "
                          "'covering_radius'")
    cloud = np.asarray(cfg.options["cloud"], dtype=float)
    if cloud.ndim == 1:
        cloud = cloud[:, None]
    if cloud.ndim != 2 or cloud.shape[1] != mp.domain.dim:
        raise ConfigError("config.options.cloud: expected points of dimension "
                          f"{mp.domain.dim}")
    rep = wandering_check(
        mp, cloud,
        covering_radius=float(cfg.options["covering_radius"]),
        nu=int(cfg.options.get("nu", 1)),
        n_max=int(cfg.options.get("n_max", 8)))
    results = {
        "family": spec.family,
        "verdict": rep.verdict,
        "collision_pair": None if rep.collision_pair is None
        else list(rep.collision_pair),
        "min_separation": rep.min_separation,
        "radii_trace": list(rep.radii_trace),
    }
    return Outcome(exit_code=0 if rep.verdict == "wandering" else 2,
                   results=results)


def _exp_fk_sweep(cfg: RunConfig) -> Outcome:
    opts = cfg.options
    epsilons = [float(e) for e in opts.get("epsilons", (1e-3, 1e-2, 1e-1))]
    cs = [float(c) for c in opts.get("Cs", (0.3, 0.5, 0.9))]
    k_max = int(opts.get("k_max", 64))
    header = ("epsilon", "C", "threshold_n", "a_m", "tail", "bound",
              "max_envelope", "ok")
    rows = []
    grid = []
    all_ok = True
    for eps in epsilons:
        for c in cs:
            n_star = envelope_threshold(eps, c)
            env = cauchy_envelope(m=n_star + 1, n=n_star, epsilon=eps, C=c,
                                  k_max=k_max)
            max_env = max(env.values)
            ok = bool(max_env <= 2.0 * eps + cfg.tol.tau_env)
            all_ok = all_ok and ok
            entry = {"epsilon": eps, "C": c, "threshold_n": n_star,
                     "a_m": env.a_m, "tail": env.tail, "bound": env.bound,
                     "max_envelope": max_env, "ok": ok}
            grid.append(entry)
            rows.append([entry[h] for h in header])
    results = {"grid": grid, "all_ok": all_ok}
    return Outcome(exit_code=0 if all_ok else 2, results=results,
                   results_rows=(header, rows))


_DISPATCH = {
    "validate": _exp_validate,
    "eigen_check": _exp_eigen_check,
    "picard": _exp_picard,
    "lozi_membership": _exp_lozi_membership,
    "koenigs": _exp_koenigs,
    "abel": _exp_abel,
    "wandering": _exp_wandering,
    "fk_sweep": _exp_fk_sweep,
}


# ---------------------------------------------------------------------------
# record writing


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (np.floating, float)):
        return repr(float(v))
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return json.dumps(_to_jsonable(v), sort_keys=True)


def _flatten(obj, prefix: str, out: list):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k), out)
    else:
        out.append((prefix, _csv_cell(obj)))


def _git_rev() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _write_record(outdir: Path, cfg: RunConfig, outcome: Outcome,
                  wall_time: float) -> None:
    record = {
        "meta": {
            "tool": "homconj",
            "version": __version__,
            "git_rev": _git_rev(),
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_time_s": wall_time,
        },
        "config": cfg.raw,
        "results": _to_jsonable(outcome.results),
    }
    (outdir / "record.json").write_text(
        json.dumps(record, sort_keys=True, indent=2) + "\n")

    with (outdir / "results.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        if outcome.results_rows is not None:
            header, rows = outcome.results_rows
            writer.writerow(header)
            for row in rows:
                writer.writerow([_csv_cell(v) for v in row])
        else:
            writer.writerow(("key", "value"))
            flat = []
            _flatten(_to_jsonable(outcome.results), "", flat)
            for key, val in flat:
                writer.writerow((key, val))

    if outcome.trace_rows is not None:
        with (outdir / "trace.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in outcome.trace_rows:
                writer.writerow([_csv_cell(row[c]) for c in TRACE_COLUMNS])


def _run_dir_name(cfg: RunConfig) -> str:
    digest = hashlib.sha256(
        json.dumps(_to_jsonable(cfg.raw), sort_keys=True).encode()).hexdigest()
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return f"{cfg.experiment}-{stamp}-{digest[:8]}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    root = args.out or cfg.output_dir or os.environ.get(ENV_RUNS) or "runs"
    outdir = Path(root) / _run_dir_name(cfg)
    outdir.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    outcome = _DISPATCH[cfg.experiment](cfg)
    wall = time.perf_counter() - start

    _write_record(outdir, cfg, outcome, wall)
    for note in outcome.warnings:
        print(f"note: {note}", file=sys.stderr)
    print(f"run directory: {outdir}")
    headline = outcome.results.get("verdict") \
        or ("pass" if outcome.exit_code == 0 else "fail")
    print(f"experiment {cfg.experiment}: {headline} "
          f"(exit {outcome.exit_code}, {wall:.2f}s)")
    return outcome.exit_code


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    record_path = run_dir / "record.json"
    if not record_path.is_file():
        print(f"error: {record_path} not found", file=sys.stderr)
        return 1
    record = json.loads(record_path.read_text())
    meta = record.get("meta", {})
    config = record.get("config", {})
    print(f"run: {run_dir.name}")
    print(f"tool: {meta.get('tool', '?')} {meta.get('version', '?')} "
          f"(rev {meta.get('git_rev', '?')})")
    print(f"timestamp: {meta.get('timestamp', '?')}  "
          f"wall: {meta.get('wall_time_s', float('nan')):.3f}s")
    print(f"experiment: {config.get('experiment', '?')}")
    fam = config.get("family")
    if fam:
        print(f"family: {fam.get('name')} {json.dumps(fam.get('params', {}), sort_keys=True)}")
    print("results:")
    flat = []
    _flatten(record.get("results", {}), "", flat)
    for key, val in flat:
        print(f"  {key}: {val}")
    trace_path = run_dir / "trace.csv"
    if trace_path.is_file():
        with trace_path.open() as fh:
            rows = list(csv.reader(fh))
        print(f"trace: {len(rows) - 1} steps")
        if len(rows) > 1:
            print(f"  first: {dict(zip(rows[0], rows[1]))}")
            print(f"  last:  {dict(zip(rows[0], rows[-1]))}")
    return 0


def cmd_list_families(args) -> int:
    print("families:")
    for name in sorted(FAMILIES):
        info = FAMILIES[name]
        print(f"  {name}: {info['description']}")
        for pname, desc in info["params"].items():
            print(f"    {pname}: {desc}")
        for pname, desc in info.get("optional", {}).items():
            print(f"    [{pname}]: {desc}")
    print("experiments:", ", ".join(EXPERIMENTS))
    print("gauges:", ", ".join(BUILTIN_TRIPLE_NAMES))
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"invalid: {e}", file=sys.stderr)
        return 2
    fam = "-" if cfg.family is None else cfg.family.family
    print(f"config valid: experiment={cfg.experiment} family={fam}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homconj",
        description="Premetric estimates and gated Picard conjugacy runs "
                    "for homeomorphism families.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured experiment")
    p_run.add_argument("config", help="path to a JSON config (schema 1)")
    p_run.add_argument("--out", default=None,
                       help=f"output root (default: $"
                            f"{ENV_RUNS} or ./runs)")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("report", help="summarize a recorded run")
    p_rep.add_argument("run_dir", help="run directory written by 'run'")
    p_rep.set_defaults(func=cmd_report)

    p_fam = sub.add_parser("list-families",
                           help="show families, experiments, and gauges")
    p_fam.set_defaults(func=cmd_list_families)

    p_val = sub.add_parser("validate",
                           help="schema-check a config without running")
    p_val.add_argument("config", help="path to a JSON config")
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
