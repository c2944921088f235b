"""Config-driven experiment runner: every module behind one subcommand.

A run is a JSON config naming a family and an ordered command list; outputs
are CSV tables, SVG plots, and a JSON report embedding the config so every
artifact is reproducible from itself.  ``verify`` executes the cross-route
identity suite and is the release gate: symplecticity, the periodic
determinant identity, Poisson/Cramer Green entries against direct inversion,
exponent duality, and the scalar determinant recursion.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import QpspecError
from .families import builtin_family
from .family import OperatorFamily

CONFIG_VERSION = 1

_COMMAND_SCHEMAS = {
    "lyapunov": {
        "E": {"type": "number"},
        "n": {"type": "integer", "minimum": 1},
        "grid": {"type": "integer", "minimum": 1},
        "eps": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "plot": {"type": "boolean"},
    },
    "acceleration": {
        "E": {"type": "number"},
        "eps0": {"type": "number", "minimum": 0},
        "n": {"type": "integer", "minimum": 1},
        "grid": {"type": "integer", "minimum": 1},
        "h": {"type": "number", "exclusiveMinimum": 0},
    },
    "zeros": {
        "E": {"type": "number"},
        "n": {"type": "integer", "minimum": 2},
        "eps_half": {"type": "number", "exclusiveMinimum": 0},
        "kind": {"enum": ["dirichlet", "periodic"]},
        "plot": {"type": "boolean"},
    },
    "local-zeros": {
        "E": {"type": "number"},
        "n": {"type": "integer", "minimum": 2},
        "centers": {"type": "integer", "minimum": 1},
        "kappa_cap": {"type": "integer", "minimum": 1},
        "kind": {"enum": ["dirichlet", "periodic"]},
    },
    "ids": {
        "E0": {"type": "number"},
        "N": {"type": "integer", "minimum": 1},
        "eta": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 1,
        },
        "theta": {"type": "number"},
    },
    "holder": {
        "E0": {"type": "number"},
        "N": {"type": "integer", "minimum": 3},
        "eta": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 3,
        },
        "phases": {"type": "integer", "minimum": 1},
        "kappa_rounded": {"type": "integer", "minimum": 1},
        "nu_gap": {"type": ["number", "null"]},
        "plot": {"type": "boolean"},
    },
    "verify": {},
}


def _command_schema(name: str, extra: dict) -> dict:
    props = {"command": {"const": name}}
    props.update(extra)
    return {
        "type": "object",
        "properties": props,
        "required": ["command"],
        "additionalProperties": False,
    }


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "config_version": {"const": CONFIG_VERSION},
        "family": {
            "type": "object",
            "properties": {
                "name": {"type": "string"},
                "params": {"type": "object"},
                "tables": {"type": "object"},
            },
            "additionalProperties": False,
            "oneOf": [{"required": ["name"]}, {"required": ["tables"]}],
        },
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "commands": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [_command_schema(k, v) for k, v in _COMMAND_SCHEMAS.items()]
            },
        },
    },
    "required": ["config_version", "family", "commands"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Config file unreadable, unparsable, or schema-invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    family: dict
    commands: tuple
    out: str = "qpspec-out"
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        import jsonschema

        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = list(validator.iter_errors(raw))
        if errors:
            e = jsonschema.exceptions.best_match(errors)
            # descend into the oneOf branch matching the declared command so
            # an unknown key is reported by name, not as a failed oneOf
            while e.context:
                matching = [c for c in e.context if "const" not in list(c.schema_path)]
                if not matching and isinstance(e.instance, dict):
                    cmd = e.instance.get("command")
                    raise ConfigError(
                        f"unknown command {cmd!r}; known: {sorted(_COMMAND_SCHEMAS)}"
                    )
                e = jsonschema.exceptions.best_match(matching or e.context)
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {path}: {e.message}")
        return cls(
            family=raw["family"],
            commands=tuple(raw["commands"]),
            out=raw.get("out", "qpspec-out"),
            seed=int(raw.get("seed", 0)),
        )

    def echo(self) -> dict:
        return {
            "config_version": CONFIG_VERSION,
            "family": self.family,
            "commands": list(self.commands),
            "out": self.out,
            "seed": self.seed,
        }

    def resolve_family(self) -> OperatorFamily:
        if "tables" in self.family:
            return OperatorFamily.deserialize(self.family["tables"])
        return builtin_family(self.family["name"], self.family.get("params"))


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return ExperimentConfig.from_dict(raw)


@dataclass
class RunReport:
    config: dict
    version: str = __version__
    results: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "wall_clock_seconds": self.wall_clock,
            "config": self.config,
            "results": self.results,
            "artifacts": self.artifacts,
        }


def emit_plot(series, kind: str, path, annotation: str | None = None) -> None:
    """Write a static SVG of (label, x, y) series; no display, no service.

    loglog drops nonpositive points (with a warning) instead of letting the
    backend clip them silently.  Text stays text in the SVG so annotations
    survive a round-trip read.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if kind not in ("line", "loglog"):
        raise ValueError(f"plot kind must be line or loglog, got {kind!r}")
    series = list(series)
    if not series:
        raise ValueError("emit_plot needs at least one series")
    with plt.rc_context({"svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.2))
        for label, x, y in series:
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            if kind == "loglog":
                keep = (x > 0) & (y > 0)
                if not np.all(keep):
                    warnings.warn(
                        f"dropping {int(np.sum(~keep))} nonpositive points from {label!r}",
                        stacklevel=2,
                    )
                x, y = x[keep], y[keep]
            if x.size == 0:
                continue
            ax.plot(x, y, marker="o", label=str(label))
        if kind == "loglog":
            ax.set_xscale("log")
            ax.set_yscale("log")
        if annotation:
            ax.text(0.05, 0.95, annotation, transform=ax.transAxes, va="top")
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path, format="svg")
        plt.close(fig)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def _run_lyapunov(fam, spec, outdir, rng):
    from .lyapunov import lyapunov_profile

    n = spec.get("n", 128)
    grid = spec.get("grid", 200)
    eps_values = spec.get("eps", [0.0])
    E = spec.get("E", 0.0)
    prof = lyapunov_profile(fam, E, eps_values, n, grid)
    rows = []
    for i, eps in enumerate(prof.eps_values):
        for j in range(1, 2 * fam.d + 1):
            rows.append([n, _fmt(eps), j, _fmt(prof.L(i, j)), _fmt(prof.L_sum(i, j))])
    path = outdir / "lyapunov.csv"
    _write_csv(path, ["n", "eps", "j", "L_j", "L_sum_j"], rows)
    artifacts = [str(path)]
    if spec.get("plot"):
        ppath = outdir / "lyapunov.svg"
        emit_plot(
            [
                (f"L^{j}", prof.eps_values, prof.l_sums[:, j - 1])
                for j in range(1, fam.d + 1)
            ],
            "line",
            ppath,
        )
        artifacts.append(str(ppath))
    return {"n": n, "grid": grid, "L_top": prof.L(0, 1)}, artifacts


def _run_acceleration(fam, spec, outdir, rng):
    from .lyapunov import acceleration

    ests = acceleration(
        fam,
        spec.get("E", 0.0),
        spec.get("eps0", 0.0),
        spec.get("n", 128),
        spec.get("grid", 200),
        h=spec.get("h", 0.005),
    )
    return {
        "estimates": [
            {
                "j": e.j,
                "kappa_hat": e.kappa_hat,
                "kappa_rounded": e.kappa_rounded,
                "residual": e.residual,
                "degraded": e.degraded,
            }
            for e in ests
        ]
    }, []


def _run_zeros(fam, spec, outdir, rng):
    from .zeros import AnnulusSpec, annulus_zero_count

    n = spec["n"]
    eps_half = spec.get("eps_half", fam.delta / 2)
    ann = AnnulusSpec(eps_half=eps_half)
    rep = annulus_zero_count(
        fam, spec.get("E", 0.0), n, ann, kind=spec.get("kind", "dirichlet")
    )
    r_in, r_out = ann.radii
    path = outdir / "zeros.csv"
    _write_csv(
        path,
        ["center", "shift", "count", "ring_index", "radius_inner", "radius_outer"],
        [["", "", rep.count, "", _fmt(r_in), _fmt(r_out)]],
    )
    return {
        "count": rep.count,
        "normalized": rep.normalized,
        "contour_points_used": rep.contour_points_used,
    }, [str(path)]


def _run_local_zeros(fam, spec, outdir, rng):
    from .zeros import default_search_radius, local_shift_search

    n = spec["n"]
    centers = spec.get("centers", 5)
    kind = spec.get("kind", "dirichlet")
    rows = []
    counts = []
    for _ in range(centers):
        z0 = complex(np.exp(2j * np.pi * rng.uniform()))
        res = local_shift_search(
            fam,
            spec.get("E", 0.0),
            n,
            z0,
            kappa_cap=spec.get("kappa_cap", 2),
            kind=kind,
        )
        counts.append(res.count)
        rows.append(
            [
                f"{z0.real!r}{z0.imag:+}j",
                res.k,
                res.count,
                res.ring_index,
                _fmt(res.r),
                _fmt(res.accept_radius),
            ]
        )
    path = outdir / "local_zeros.csv"
    _write_csv(
        path,
        ["center", "shift", "count", "ring_index", "radius_inner", "radius_outer"],
        rows,
    )
    return {
        "centers": centers,
        "max_count": max(counts),
        "search_radius": default_search_radius(n),
    }, [str(path)]


def _run_ids(fam, spec, outdir, rng):
    from .ids import window_count

    N = spec.get("N", 2000)
    E0 = spec.get("E0", 0.0)
    theta = spec.get("theta", 0.5)
    etas = sorted(spec.get("eta", [1e-3, 1e-2]), reverse=True)
    rows = []
    for eta in etas:
        wc = window_count(fam, theta, E0, eta, N)
        rows.append([_fmt(eta), _fmt(wc.eigen), _fmt(wc.resolvent)])
    path = outdir / "ids.csv"
    _write_csv(path, ["eta", "window_count", "resolvent_estimate"], rows)
    return {"N": N, "E0": E0, "points": len(rows)}, [str(path)]


def _run_holder(fam, spec, outdir, rng):
    from .ids import holder_fit

    rep = holder_fit(
        fam,
        spec.get("E0", 0.0),
        spec["eta"],
        spec.get("N", 20000),
        phases=spec.get("phases", 8),
        kappa_rounded=spec.get("kappa_rounded"),
        nu_gap=spec.get("nu_gap", 0.05),
    )
    path = outdir / "holder.csv"
    _write_csv(
        path,
        ["eta", "window_count", "resolvent_estimate"],
        [
            [_fmt(eta), _fmt(d), _fmt(r)]
            for eta, d, r in zip(rep.eta_grid, rep.d_values, rep.resolvent_values)
        ],
    )
    artifacts = [str(path)]
    if spec.get("plot"):
        ppath = outdir / "holder.svg"
        emit_plot(
            [("window counts", 2.0 * rep.eta_grid, rep.d_values)],
            "loglog",
            ppath,
            annotation=f"slope beta_hat = {rep.beta_hat:.6f}",
        )
        artifacts.append(str(ppath))
    return {
        "beta_hat": rep.beta_hat,
        "beta_bound": rep.beta_bound,
        "confidence": rep.confidence,
        "dropped": rep.dropped,
    }, artifacts


def _run_verify(fam, spec, outdir, rng):
    checks = verify_family(fam, rng)
    failed = [c for c in checks if not c["passed"]]
    return {"checks": checks, "failed": len(failed)}, []


_RUNNERS = {
    "lyapunov": _run_lyapunov,
    "acceleration": _run_acceleration,
    "zeros": _run_zeros,
    "local-zeros": _run_local_zeros,
    "ids": _run_ids,
    "holder": _run_holder,
    "verify": _run_verify,
}


def verify_family(fam: OperatorFamily, rng=None, samples: int = 12) -> list:
    """Cross-route identity suite; each entry has name, passed, worst, tol.

    Covers symplecticity of random transfer factors, the periodic determinant
    identity, both Green-entry formulas against direct inversion, exponent
    duality at eps = 0, and the scalar three-term recursion against banded LU.
    """
    from .cocycle import as_cocycle, symplectic_defect
    from .determinants import (
        assemble,
        det_values_grid,
        detp_residual,
        green_entry_dirichlet,
        green_entry_periodic,
        logdet_banded,
    )
    from .lyapunov import finite_scale_le
    from .sampling import Phase

    rng = np.random.default_rng(rng)
    checks = []

    def record(name, worst, tol):
        checks.append({"name": name, "worst": float(worst), "tol": tol, "passed": bool(worst <= tol)})

    cocycle = as_cocycle(fam, float(rng.uniform(-2, 2)))
    worst = 0.0
    for _ in range(samples):
        factor = cocycle.factor_grid(np.array([float(rng.uniform())]), 0.0)[0]
        worst = max(worst, symplectic_defect(factor))
    record("symplecticity", worst, 1e-10)

    worst = 0.0
    for n in (4, 16):
        for eps in (0.0, 0.01):
            worst = max(
                worst,
                detp_residual(fam, Phase(float(rng.uniform()), eps), float(rng.uniform(-2, 2)), n),
            )
    record("periodic_det_identity", worst, 1e-7)

    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(4, 9))
        interval = (0, n * fam.d - 1)
        E = float(rng.uniform(-2, 2)) + 0.3j  # off-axis keeps instances nonsingular
        p = Phase(float(rng.uniform()), 0.0)
        if fam.d == 1:
            k, j = sorted(rng.choice(n, size=2, replace=False))
            got = green_entry_dirichlet(fam, p, E, interval, int(k), int(j), method="formula")
            ref = green_entry_dirichlet(fam, p, E, interval, int(k), int(j), method="direct")
            worst = max(worst, abs(got - ref) / max(abs(ref), 1e-30))
        x, y = rng.integers(0, n * fam.d, size=2)
        got = green_entry_periodic(fam, p, E, interval, int(x), int(y), method="formula")
        ref = green_entry_periodic(fam, p, E, interval, int(x), int(y), method="direct")
        worst = max(worst, abs(got - ref) / max(abs(ref), 1e-30))
    record("green_vs_direct", worst, 1e-8)

    exps = finite_scale_le(fam, float(rng.uniform(-2, 2)), 0.0, 64, 100)
    singles = exps.singles
    record("exponent_duality", np.max(np.abs(singles + singles[::-1])), 1e-8)

    worst = 0.0
    if fam.d == 1:
        E = float(rng.uniform(-2, 2))
        w = np.asarray([float(rng.uniform()) for _ in range(4)])
        lm, ph = det_values_grid(fam, E, 12, "dirichlet", w + 0j)
        for i, wi in enumerate(w):
            op = assemble(fam, (0, 11), "dirichlet", Phase(float(wi), 0.0))
            ld = logdet_banded(*op.banded_ab(E))
            worst = max(worst, abs(lm[i] - ld.log_mag), abs(ph[i] - ld.phase_unit))
    record("scalar_recursion_vs_lu", worst, 1e-9)
    return checks


def run(config: ExperimentConfig, out_override=None, seed=None) -> tuple[RunReport, int]:
    """Execute the config's command list; returns (report, exit_code)."""
    from pathlib import Path

    outdir = Path(out_override or config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    report = RunReport(config=config.echo())
    rng = np.random.default_rng(config.seed if seed is None else seed)
    t0 = time.time()
    exit_code = 0
    try:
        fam = config.resolve_family()
        for i, spec in enumerate(config.commands):
            name = spec["command"]
            params = {k: v for k, v in spec.items() if k != "command"}
            result, artifacts = _RUNNERS[name](fam, params, outdir, rng)
            report.results[f"{i}:{name}"] = result
            report.artifacts.extend(artifacts)
            if name == "verify" and result["failed"]:
                exit_code = 1
    except (QpspecError, np.linalg.LinAlgError, FloatingPointError) as e:
        report.results["error"] = f"{type(e).__name__}: {e}"
        exit_code = 3
    except (ValueError, KeyError) as e:
        report.results["error"] = f"{type(e).__name__}: {e}"
        exit_code = 2
    report.wall_clock = time.time() - t0
    report_path = outdir / "report.json"
    with open(report_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    report.artifacts.append(str(report_path))
    return report, exit_code


def _threads_context(threads):
    if threads is None:
        import contextlib

        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qpspec", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("run", "verify"):
        p = sub.add_parser(mode)
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--threads", type=int, default=None, help="BLAS thread cap")
        p.add_argument("--seed", type=int, default=None, help="seed override")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.mode == "verify":
        config = ExperimentConfig(
            family=config.family,
            commands=({"command": "verify"},),
            out=config.out,
            seed=config.seed,
        )
    with _threads_context(args.threads):
        report, code = run(config, out_override=args.out, seed=args.seed)
    for key, result in report.results.items():
        if key == "error":
            print(f"error: {result}", file=sys.stderr)
            continue
        if key.endswith(":verify"):
            for check in result["checks"]:
                status = "ok" if check["passed"] else "FAIL"
                print(f"  {status} {check['name']}: worst {check['worst']:.3e} (tol {check['tol']:.0e})")
        print(f"{key}: {json.dumps(result, default=str)[:200]}")
    print(f"report: {report.artifacts[-1]} ({report.wall_clock:.1f}s)")
    return code


if __name__ == "__main__":
    sys.exit(main())
