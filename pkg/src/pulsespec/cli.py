"""Command-line interface: ``pulsespec COMMAND --config run.toml``.

Commands: existence, spectrum (with --mode), cancelation, instability.
Exit codes: 0 success, 2 config error, 3 missing input, 4 solver failure,
5 accuracy failure.

Config schema (TOML)::

    [model]
    family = "gierer_meinhardt"     # or "custom"
    alpha1 = 0.0                    # GM exponents, variant, mu, coupling
    alpha2 = 2.0
    beta1 = 2
    beta2 = 2
    variant = "minus_mu"            # "mu" | "minus_mu" | "sin"
    mu = 1.0
    coupling = 1.0                  # 0 gives H2 = 0
    # family = "custom" takes factory = "module:function" and a [model.params] table;
    # the factory must return a ModelSpec.

    [existence]
    u0 = 1.0
    eps = [0.04, 0.02, 0.01]        # strictly decreasing
    shoot_tol = 1e-9
    h = 0.05

    [spectrum]
    region = [-0.5, 4.0, -1.0, 1.0] # box for fast zeros and cancelation
    contours = [{center = [0.35, 0.0], radius = 0.1}]
    gamma = [1.0]                   # list of numbers or [re, im]; an int k gives k roots of unity
    guard = 0.05
    cancel_tol = 1e-6
    root_tol = 1e-10
    lambda_scan = [-0.49, 10.0, 400]  # trace-scan mode

    [output]
    directory = "pulsespec-out"
    formats = ["csv", "json", "svg"]

Linearization variables.  The perturbation (U, V) of a pulse solves the
eigenvalue problem in first-order form with state (U, P, V, Q), where
P = D1 U_x / sqrt(eps) and Q = D2 V_x.  With delta = sqrt(eps):

    U_x = delta D1^-1 P
    P_x = delta ((eps dH1/du + dH2/du + eps lam) U + (eps dH1/dv + dH2/dv) V)
    V_x = D2^-1 Q
    Q_x = dG/du U + (dG/dv + lam) V

Compared with the physical derivative variable D1 U_x the slow derivative
is divided by sqrt(eps).  This is a constant change of basis, so Evans
values differ from the physical ones by a nonzero constant factor and
zeros and counts are unaffected.
"""
from __future__ import annotations

import argparse
import importlib
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import evans as ev
from . import output as out
from . import spectrum as sp
from .errors import (AccuracyError, ConfigError, MissingInputError, PulseSpecError,
                     UnsupportedMultiplicityError, WeakCouplingWarning)
from .model import GMParams, ModelSpec
from .profile import read_profile, shoot_periodic_orbit, singular_orbit, write_profile

log = logging.getLogger("pulsespec")

MODES = ("fast", "slow", "full", "reduced", "trace-scan")
COMMANDS = ("existence", "spectrum", "cancelation", "instability")


# ------------------------------------------------------------- config

@dataclass
class RunConfig:
    model: dict
    existence: dict
    spectrum: dict
    output: dict
    source: str = ""
    _model: ModelSpec | None = field(default=None, repr=False)

    def build_model(self) -> ModelSpec:
        if self._model is None:
            self._model = _build_model(self.model)
        return self._model

    @property
    def u0(self):
        return float(self.existence["u0"])

    @property
    def eps_list(self):
        return [float(e) for e in self.existence.get("eps", [])]

    @property
    def out_dir(self):
        return self.output.get("directory", "pulsespec-out")

    @property
    def formats(self):
        return tuple(self.output.get("formats", ("csv", "json")))


_GM_KEYS = {"alpha1", "alpha2", "beta1", "beta2", "variant", "mu", "coupling"}


def _build_model(sec):
    fam = sec.get("family")
    if fam in ("gierer_meinhardt", "gm"):
        kw = {k: v for k, v in sec.items() if k != "family"}
        unknown = set(kw) - _GM_KEYS
        if unknown:
            raise ConfigError(f"model.{sorted(unknown)[0]}: unknown parameter for gierer_meinhardt")
        try:
            return GMParams(**kw).to_model()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from None
    if fam == "custom":
        target = sec.get("factory")
        if not isinstance(target, str) or ":" not in target:
            raise ConfigError("model.factory: expected 'module:function' for a custom model")
        mod, fn = target.split(":", 1)
        try:
            factory = getattr(importlib.import_module(mod), fn)
        except (ImportError, AttributeError) as exc:
            raise ConfigError(f"model.factory: cannot import {target} ({exc})") from None
        model = factory(**sec.get("params", {}))
        if not isinstance(model, ModelSpec):
            raise ConfigError("model.factory: factory did not return a ModelSpec")
        return model
    raise ConfigError(f"model.family: unknown model family {fam!r}")


def _positive(sec, name, key):
    if key in sec:
        v = sec[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise ConfigError(f"{name}.{key}: must be a positive number")


def validate_config(raw, source="") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a table")
    for s in ("model", "existence", "spectrum", "output"):
        if s not in raw:
            raise ConfigError(f"{s}: missing section")
        if not isinstance(raw[s], dict):
            raise ConfigError(f"{s}: must be a table")
    ex = raw["existence"]
    if "u0" not in ex or not isinstance(ex["u0"], (int, float)):
        raise ConfigError("existence.u0: required number")
    eps = ex.get("eps", [])
    if not isinstance(eps, list) or not all(isinstance(e, (int, float)) and e > 0 for e in eps):
        raise ConfigError("existence.eps: must be a list of positive numbers")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("existence.eps: ladder must be strictly decreasing")
    for k in ("shoot_tol", "h"):
        _positive(ex, "existence", k)
    spc = raw["spectrum"]
    for k in ("root_tol", "guard", "cancel_tol", "omega", "varpi"):
        _positive(spc, "spectrum", k)
    if "region" in spc:
        r = spc["region"]
        if not (isinstance(r, list) and len(r) == 4 and r[0] < r[1] and r[2] < r[3]):
            raise ConfigError("spectrum.region: expected [re_min, re_max, im_min, im_max]")
    for i, c in enumerate(spc.get("contours", [])):
        if not isinstance(c, dict) or "center" not in c or "radius" not in c:
            raise ConfigError(f"spectrum.contours[{i}]: expected a table with center and radius")
        _positive(c, f"spectrum.contours[{i}]", "radius")
    fm = raw["output"].get("formats", ["csv", "json"])
    if not set(fm) <= {"csv", "json", "svg"}:
        raise ConfigError("output.formats: allowed values are csv, json, svg")
    cfg = RunConfig(raw["model"], ex, spc, raw["output"], source)
    cfg.build_model()
    return cfg


def load_config(path) -> RunConfig:
    if not os.path.exists(path):
        raise MissingInputError(f"config file {path} not found")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: {exc}") from None
    return validate_config(raw, path)


# ------------------------------------------------------------- helpers

def _provenance(cfg, model, extra=None):
    prov = {"package": "pulsespec", "version": __version__, "model": model.name,
            "model_fingerprint": model.fingerprint(), "params": {k: v for k, v in sorted(model.params.items())
                                                                 if isinstance(v, (int, float, str))},
            "tolerances": {"root_tol": cfg.spectrum.get("root_tol", 1e-10),
                           "cancel_tol": cfg.spectrum.get("cancel_tol", sp.CANCEL_TOL),
                           "guard": cfg.spectrum.get("guard", sp.GUARD_DEFAULT),
                           "shoot_tol": cfg.existence.get("shoot_tol", 1e-9)}}
    if extra:
        prov.update(extra)
    return prov


def _gammas(spc):
    g = spc.get("gamma", [1.0])
    if isinstance(g, int) and not isinstance(g, bool):
        return list(np.exp(2j * np.pi * np.arange(g) / g))
    res = []
    for x in g:
        res.append(complex(x[0], x[1]) if isinstance(x, list) else complex(x))
    return res


def _contours(spc):
    cs = []
    for c in spc.get("contours", []):
        ctr = c["center"]
        ctr = complex(ctr[0], ctr[1]) if isinstance(ctr, list) else complex(ctr)
        cs.append(sp.ContourSpec.circle(ctr, c["radius"], int(c.get("nodes", 64))))
    return cs


def _region(spc):
    return tuple(spc.get("region", (sp.LAMBDA_DEFAULT, 4.0, -1.0, 1.0)))


def _orbit(cfg):
    return singular_orbit(cfg.build_model(), cfg.u0)


def _eps_tag(eps):
    return format(eps, ".6g").replace(".", "p")


def _profile_paths(cfg):
    return {e: os.path.join(cfg.out_dir, f"profile_eps{_eps_tag(e)}.txt") for e in cfg.eps_list}


# ------------------------------------------------------------- commands

def cmd_existence(cfg: RunConfig, workers=1):
    model = cfg.build_model()
    d = out.ensure_dir(cfg.out_dir)
    if model.weak_coupling and model.n == 1:
        warnings.warn("H2 vanishes identically: every periodic pulse of this model is spectrally unstable",
                      WeakCouplingWarning)
    orbit = _orbit(cfg)
    sl = orbit.slow
    summary = {"u0": orbit.u0, "u1": sl.u1, "L0": orbit.L0, "J0": orbit.J0, "p0": orbit.p0,
               "touchdown": orbit.touchdown, "gluing_defect": orbit.defect,
               "homoclinic_residual": orbit.homoclinic.residual, "symmetric_segment": bool(sl.symmetric),
               "profiles": []}
    tol = float(cfg.existence.get("shoot_tol", 1e-9))
    h = float(cfg.existence.get("h", 0.05))
    for eps, path in _profile_paths(cfg).items():
        prof = shoot_periodic_orbit(model, eps, orbit, tol=tol, h=h)
        if prof.shooting_residual > 10 * tol:
            raise AccuracyError(f"shooting residual {prof.shooting_residual:.3g} at eps = {eps} exceeds tolerance")
        write_profile(prof, path)
        summary["profiles"].append({"eps": eps, "L_eps": prof.L_eps, "eps_L_minus_L0": eps * prof.L_eps - orbit.L0,
                                    "shooting_residual": prof.shooting_residual, "file": os.path.basename(path)})
        log.info("eps=%g L_eps=%.10g residual=%.3g", eps, prof.L_eps, prof.shooting_residual)
    out.write_json(os.path.join(d, "singular_orbit.json"), {"orbit": summary,
                                                            "provenance": _provenance(cfg, model)})
    print(f"L0 = {orbit.L0:.17g}  J0 = {orbit.J0:.17g}  u1 = {sl.u1:.17g}")
    for p in summary["profiles"]:
        print(f"eps = {p['eps']:.6g}  L_eps = {p['L_eps']:.17g}  residual = {p['shooting_residual']:.3g}")
    return summary


def _write_roots(cfg, name, roots, extra, model, curves=()):
    d = out.ensure_dir(cfg.out_dir)
    rep = sp.SpectrumReport(roots=roots, curves=list(curves), verdicts=extra,
                            provenance=_provenance(cfg, model))
    if "json" in cfg.formats:
        out.write_json(os.path.join(d, f"{name}.json"), rep.to_dict())
    if "svg" in cfg.formats:
        out.plot_spectrum_svg(os.path.join(d, f"{name}.svg"), curves, roots, title=name)
    return rep


def _sample_contours(fn, contours, gammas):
    vals = []
    for c in contours:
        _, pts = c.nodes()
        for g in gammas:
            vals.extend(fn(z, g) for z in pts)
    return vals


def cmd_spectrum(cfg: RunConfig, mode: str, workers=1):
    if mode not in MODES:
        raise ConfigError(f"--mode: expected one of {', '.join(MODES)}")
    model = cfg.build_model()
    spc = cfg.spectrum
    d = out.ensure_dir(cfg.out_dir)
    h = float(spc.get("h", 0.05))
    tol = float(spc.get("root_tol", 1e-10))
    gammas = _gammas(spc)
    contours = _contours(spc)
    orbit = _orbit(cfg)
    hom = orbit.homoclinic
    result = {"mode": mode}

    if mode == "fast":
        roots = sp.find_roots(lambda z: ev.evans_fast_reduced(model, hom, z, h), _region(spc), tol=tol,
                              workers=workers)
        result["fast_zeros"] = roots
        _write_roots(cfg, "spectrum_fast", roots, {"region": list(_region(spc))}, model)
        if "csv" in cfg.formats and contours:
            vals = _sample_contours(lambda z, g: ev.evans_fast_reduced(model, hom, z, h), contours, [1.0])
            out.write_evans_csv(os.path.join(d, "evans_fast.csv"), vals)
        for z, k in roots:
            print(f"fast zero {z.real:.17g} {z.imag:+.17g}i  multiplicity {k}")
        return result

    if mode == "trace-scan":
        if model.m != 1:
            raise ConfigError("spectrum.mode: trace-scan needs m = 1")
        a, b, n = spc.get("lambda_scan", [sp.LAMBDA_DEFAULT + 0.01, 10.0, 400])
        lam = np.linspace(float(a), float(b), int(n))
        fz = [z.real for z, _ in sp.fast_zeros(model, orbit, region=(float(a), float(b), -0.5, 0.5), h=h)]
        guard = float(spc.get("guard", sp.GUARD_DEFAULT))
        lam = np.array([x for x in lam if all(abs(x - z) > guard for z in fz)])
        bands, t = sp.trace_bands(model, orbit, lam, h=h, poles=fz)
        result.update(bands=bands, fast_zeros=fz)
        if "csv" in cfg.formats:
            out.write_csv(os.path.join(d, "trace_scan.csv"), ("lambda", "t", "in_band"),
                          [(x, y, "1" if -2 <= y <= 2 else "0") for x, y in zip(lam, t)])
        if "json" in cfg.formats:
            out.write_json(os.path.join(d, "trace_scan.json"), {"bands": [list(b) for b in bands],
                                                                "fast_zeros": fz,
                                                                "provenance": _provenance(cfg, model)})
        if "svg" in cfg.formats:
            out.plot_bands_svg(os.path.join(d, "trace_scan.svg"), lam, t, bands, "t(lambda)")
        for a_, b_ in bands:
            print(f"band [{a_:.17g}, {b_:.17g}]")
        return result

    if mode in ("slow", "reduced"):
        E0, fast, trace = sp._reduced_parts(model, orbit, h)
        if mode == "slow":
            fn = lambda z, g: ev.evans_slow_reduced(model, orbit, z, g, h)
        else:
            fn = E0
        counts = []
        for i, c in enumerate(contours):
            for g in gammas:
                k = sp.count_roots_contour(lambda z: fn(z, g), c, workers=workers)
                counts.append({"contour": i, "center": c.center, "radius": c.radius, "gamma": g, "count": k})
                print(f"contour {i} gamma {g.real:+.6f}{g.imag:+.6f}i  {mode} count {k}")
        result["counts"] = counts
        curves = []
        if mode == "reduced" and model.m == 1 and spc.get("curves", False):
            seeds = [complex(s) for s in spc.get("curve_seeds", [])]
            F = lambda lam, g: trace(complex(lam)) - g - 1 / g
            curves = sp.trace_gamma_curves(F, seeds, np.linspace(0, 2 * np.pi, int(spc.get("theta_nodes", 64)) + 1))
        _write_roots(cfg, f"spectrum_{mode}", [], {"counts": counts}, model, curves)
        if "csv" in cfg.formats and contours:
            out.write_evans_csv(os.path.join(d, f"evans_{mode}.csv"), _sample_contours(fn, contours, gammas))
        return result

    # full
    paths = _profile_paths(cfg)
    missing = [p for p in paths.values() if not os.path.exists(p)]
    if not paths or missing:
        raise MissingInputError(f"profile files missing ({', '.join(missing) or 'no eps ladder'}); "
                                "run 'pulsespec existence' first")
    profiles = [read_profile(p, model) for p in paths.values()]
    rows = []
    for i, c in enumerate(contours):
        for g in gammas:
            cmp_ = sp.compare_convergence(model, orbit, cfg.eps_list, c, g, h=h, workers=workers, profiles=profiles,
                                          locate=bool(spc.get("locate", True)))
            for r in cmp_["rows"]:
                r.update(contour=i, gamma=g, count_fast=cmp_["count_fast"])
                rows.append(r)
                ok = r.get("count_full") == r["count_reduced"]
                print(f"contour {i} gamma {g.real:+.6f}{g.imag:+.6f}i eps {r['eps']:.6g}: full {r.get('count_full')} "
                      f"reduced {r['count_reduced']} {'match' if ok else 'MISMATCH'}")
    result["compare"] = rows
    if "json" in cfg.formats:
        out.write_json(os.path.join(d, "compare_full_reduced.json"), {"rows": rows,
                                                                      "provenance": _provenance(cfg, model)})
    if "csv" in cfg.formats and contours:
        vals = []
        for prof in profiles:
            vals += _sample_contours(lambda z, g, p=prof: ev.evans_full(p, model, z, g, gauge=True), contours, gammas)
        out.write_evans_csv(os.path.join(d, "evans_full.csv"), vals)
    return result


def cmd_cancelation(cfg: RunConfig, workers=1):
    model = cfg.build_model()
    spc = cfg.spectrum
    h = float(spc.get("h", 0.05))
    orbit = _orbit(cfg)
    zeros = sp.fast_zeros(model, orbit, region=_region(spc), h=h, workers=workers)
    entries = []
    for z, k in zeros:
        entry = {"lambda_diamond": z, "multiplicity": k}
        try:
            rep = sp.residue_slow_at_fast_zero(model, orbit, z.real if abs(z.imag) < 1e-12 else z,
                                               multiplicity=k, h=h,
                                               cancel_tol=float(spc.get("cancel_tol", sp.CANCEL_TOL)))
            scan = sp.cancelation_scan(model, orbit, rep.lambda_diamond, int(spc.get("gamma_samples", 16)),
                                       radius=float(spc.get("guard", sp.GUARD_DEFAULT)), report=rep, h=h)
            entry.update(residue=rep.residue, inner_products=list(rep.inner_products), u_boundary=rep.u_boundary,
                         verdict=rep.verdict, scan_counts=scan["counts"], scan_verdict=scan["verdict"],
                         consistent=scan["consistent"])
        except UnsupportedMultiplicityError as exc:
            entry.update(skipped=str(exc))
        entries.append(entry)
        print(f"lambda = {z.real:.17g}: {entry.get('verdict', 'skipped')}")
    out.write_json(os.path.join(out.ensure_dir(cfg.out_dir), "cancelation.json"),
                   {"entries": entries, "provenance": _provenance(cfg, model)})
    return entries


def cmd_instability(cfg: RunConfig, workers=1):
    model = cfg.build_model()
    orbit = _orbit(cfg)
    res = sp.instability_criteria(model, orbit, h=float(cfg.spectrum.get("h", 0.05)))
    if res["I2"] is not None and orbit.slow.symmetric:
        res["t0"] = ev.trace_criterion(model, orbit, 0.0)["t"]
    out.write_json(os.path.join(out.ensure_dir(cfg.out_dir), "instability.json"),
                   {"criteria": res, "provenance": _provenance(cfg, model)})
    print(f"I1 = {res['I1']:.17g}  I2 = {res['I2']}  G0 = {res['G0']:.17g}  verdict: {res['verdict']}")
    return res


# ------------------------------------------------------------- entry point

def build_parser():
    p = argparse.ArgumentParser(prog="pulsespec", description="Spectra of periodic pulses via Evans functions")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--mode", default="reduced", help="spectrum mode: " + ", ".join(MODES))
    p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
    p.add_argument("--workers", type=int, default=1, help="parallel evaluations")
    p.add_argument("--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.output["directory"] = args.out
        if args.workers < 1:
            raise ConfigError("--workers: must be at least 1")
        if args.command == "existence":
            cmd_existence(cfg, args.workers)
        elif args.command == "spectrum":
            cmd_spectrum(cfg, args.mode, args.workers)
        elif args.command == "cancelation":
            cmd_cancelation(cfg, args.workers)
        else:
            cmd_instability(cfg, args.workers)
    except PulseSpecError as exc:
        print(f"pulsespec: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
