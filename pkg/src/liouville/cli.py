"""``liouville`` command-line interface.

Usage::

    liouville <pdf|mc|fp|moments|fhhs|fit> CONFIG.json [--seed N] [--out-dir DIR] [--threads N]

Exit status 0 on success, 2 for usage/config errors and 3 for numerical
failures; errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from . import analytic, characteristics, fhhs, fokker_planck, langevin, moments
from .config import CONFIGS, load_config
from .curves import fmt
from .errors import ConfigError, LiouvilleError, NumericalError
from .models import FhhsModel, PositionModel, RandomForcingModel, VelocityModel
from .rand_inputs import XiDistribution


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser():
    parser = _Parser(prog="liouville", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "pdf": "closed-form marginal densities at requested times",
        "mc": "Monte Carlo marginals (Liouville and Langevin) with KS report",
        "fp": "finite-difference Fokker-Planck snapshots with L1 report",
        "moments": "closed-form and integrated moment series",
        "fhhs": "FHHS temperature, source/sink and diffusion tables",
        "fit": "calibrate FHHS parameters to temperature data",
    }
    for name in CONFIGS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--threads", type=int, default=None)
    return parser


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _tag(t):
    return "t" + ("%.6g" % t).replace("+", "")


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _write_table(path, header, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([fmt(v) if isinstance(v, float) and math.isfinite(v) else
                    ("nan" if isinstance(v, float) else v) for v in row])
    return _write_text(path, buf.getvalue())


def _write_json(path, obj):
    return _write_text(path, json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _dist_name(dist):
    return dist.family if dist is not None else "coefficients"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _analytic_curves(model, dist, t, points):
    """{component name: PdfCurve} of the closed-form marginals at t."""
    if isinstance(model, PositionModel):
        return {"x": analytic.position_pdf_curve(model, dist, t, points=points)}
    if isinstance(model, VelocityModel):
        fx, fu = analytic.velocity_model_pdfs(model, dist, t, points=points)
        return {"x": fx, "u": fu}
    if isinstance(model, FhhsModel):
        return {"u": fhhs.fhhs_pdf_curve(model, dist, t, points=points)}
    names = model.state_names
    return {name: characteristics.transform_pdf(model, None, None, t, component=k)
            for k, name in enumerate(names)}


def cmd_pdf(cfg):
    written = []
    for dist in cfg.distributions:
        for t in cfg.times:
            curves = _analytic_curves(cfg.model, dist, t, cfg.points)
            for comp, curve in curves.items():
                curve.meta.update({"distribution": _dist_name(dist), "component": comp})
                name = f"pdf_{curve.meta['model']}_{_dist_name(dist)}_{comp}_{_tag(t)}.csv"
                path = os.path.join(cfg.out_dir, name)
                curve.to_csv(path)
                written.append({"file": name, "t": t, "mass": curve.mass()})
    _write_json(os.path.join(cfg.out_dir, "pdf_manifest.json"), {"curves": written})
    return written


def _analytic_cdf(model, dist, t, comp):
    """CDF callable of the exact marginal, or None when unavailable or degenerate."""
    try:
        if isinstance(model, RandomForcingModel):
            a, b = characteristics.affine_response(model, t)
            k = model.state_names.index(comp)
            law = model.coefficients[0] if dist is None else dist
            if model.n_coefficients != 1:
                return None
            off, sc = a[k], b[k]
        elif isinstance(model, PositionModel):
            law, off, sc = dist, model.u_p * t, math.sqrt(2 * model.D * t)
        elif isinstance(model, VelocityModel):
            law = dist
            off, sc = (model.mean_x(t), model.sigma_x(t)) if comp == "x" else \
                (model.mean_u(t), model.sigma_u(t))
        else:
            # dist is the law of Xi itself, in velocity units
            law, off, sc = dist, 0.0, float(model.eta(t))
    except LiouvilleError:
        return None
    if sc == 0 or law.is_degenerate:
        return None
    if sc > 0:
        return lambda y: law.cdf((np.asarray(y) - off) / sc)
    return lambda y: 1.0 - law.cdf((np.asarray(y) - off) / sc)


def _langevin_ensemble(cfg, t_end):
    m = cfg.model
    args = dict(n=cfg.n, dt=cfg.dt, t_end=t_end, seed=cfg.seed, record_times=cfg.times,
                threads=cfg.threads)
    if isinstance(m, PositionModel):
        return langevin.simulate_position_langevin(m, **args)
    if isinstance(m, VelocityModel):
        return langevin.simulate_velocity_langevin(m, **args)
    if isinstance(m, FhhsModel):
        return langevin.simulate_fhhs_langevin(m, rule=cfg.diffusion_rule, **args)
    return None


def cmd_mc(cfg):
    model, dist = cfg.model, cfg.distribution
    if isinstance(model, FhhsModel) and dist is not None and dist.standardized:
        # a standardized shape is scaled to the model's coefficient spread
        dist = dist.scaled(model.sigma_xi)
    names = model.state_names
    report = {"n": cfg.n, "seed": cfg.seed, "dt": cfg.dt, "runs": []}
    bins = cfg.bins
    if cfg.liouville:
        for t in cfg.times:
            for k, comp in enumerate(names):
                curve = characteristics.mc_marginal_pdf(model, dist, cfg.n, t, bins, cfg.seed, k,
                                                        cfg.dt, cfg.threads, cfg.exact)
                curve.meta.update({"component": comp})
                name = f"mc_liouville_{comp}_{_tag(t)}.csv"
                curve.to_csv(os.path.join(cfg.out_dir, name))
                cdf = _analytic_cdf(model, dist, t, comp)
                report["runs"].append({
                    "method": "liouville_mc", "t": t, "component": comp, "file": name,
                    "bins": int(curve.density.size),
                    "ks": None if cdf is None else langevin.ks_distance(curve, cdf),
                })
    if cfg.langevin and not isinstance(model, RandomForcingModel):
        ens = _langevin_ensemble(cfg, max(cfg.times))
        if cfg.dump_paths:
            ens.dump(os.path.join(cfg.out_dir, "paths.bin"))
        for t in cfg.times:
            for k, comp in enumerate(names):
                curve = langevin.empirical_pdf(ens, t, bins, k)
                curve.meta.update({"component": comp})
                name = f"mc_langevin_{comp}_{_tag(t)}.csv"
                curve.to_csv(os.path.join(cfg.out_dir, name))
                base = XiDistribution.normal()
                if isinstance(model, FhhsModel):
                    base = base.scaled(model.sigma_xi)
                cdf = _analytic_cdf(model, base, t, comp)
                report["runs"].append({
                    "method": "langevin_mc", "t": t, "component": comp, "file": name,
                    "bins": int(curve.density.size),
                    "ks": None if cdf is None else langevin.ks_distance(curve, cdf),
                })
        ens.moments().to_csv(os.path.join(cfg.out_dir, "langevin_moments.csv"))
    _write_json(os.path.join(cfg.out_dir, "mc_report.json"), report)
    return report


def cmd_fp(cfg):
    model = cfg.model
    t_first = min(cfg.times)
    kw = {"n": cfg.n}
    if cfg.domain is not None:
        kw["domain"] = cfg.domain
    if isinstance(model, PositionModel):
        t0 = 0.05 if cfg.t0 is None else cfg.t0
        problem = fokker_planck.heat_problem(model, t0, **kw)
        exact = lambda t: (lambda y: analytic.heat_kernel(y, t, model.u_p, model.D))  # noqa: E731
    elif isinstance(model, VelocityModel):
        t0 = 0.05 if cfg.t0 is None else cfg.t0
        problem = fokker_planck.ou_problem(model, t0, t_end=max(cfg.times), **kw)
        exact = lambda t: (lambda y: analytic.ou_pdf(y, t, model))  # noqa: E731
    else:
        t0 = 0.05 * model.tau_p if cfg.t0 is None else cfg.t0
        problem = fokker_planck.fhhs_problem(model, t0, **kw)
        exact = lambda t: (lambda y: fhhs.fhhs_pdf(model, None, y, t))  # noqa: E731
    if t_first < t0:
        raise ConfigError(f"output times must be >= t0 = {t0}")
    curves = fokker_planck.solve_fp(problem, max(cfg.times), cfg.dt, snapshot_times=cfg.times)
    rows = []
    for curve in curves:
        t = curve.meta["t"]
        name = f"fp_{_tag(t)}.csv"
        curve.to_csv(os.path.join(cfg.out_dir, name))
        rows.append({"t": t, "file": name, "mass": curve.mass(),
                     "l1_vs_analytic": curve.l1_distance(exact(t))})
    report = {"model": model.kind, "n": cfg.n, "dt": cfg.dt, "t0": t0, "snapshots": rows}
    _write_json(os.path.join(cfg.out_dir, "fp_report.json"), report)
    return report


def cmd_moments(cfg):
    model, times = cfg.model, cfg.times
    dist = cfg.distribution
    if isinstance(model, PositionModel):
        dist = dist or analytic.STANDARD_NORMAL
        closed = analytic.position_moments(model, times, dist)
        ode = moments.integrate_position_moments(model, dist, times=times, dt=cfg.dt)
    elif isinstance(model, VelocityModel):
        dist = dist or analytic.STANDARD_NORMAL
        closed = analytic.velocity_model_moments(model, times, cfg.init, dist)
        ode = moments.integrate_velocity_moments(model, cfg.init, times=times, dist=dist,
                                                 dt=cfg.dt)
    else:
        dist = dist or XiDistribution.normal(0.0, model.sigma_xi)
        var_u = np.asarray(model.eta(times)) ** 2 * dist.var
        closed = moments.MomentSeries.build(
            times, var_xi=dist.var, mean_u=dist.mean * np.asarray(model.eta(times)),
            var_u=var_u, cov_xi_u=dist.var * np.asarray(model.eta(times)))
        ode = moments.integrate_fhhs_moments(model, times=times, dist=dist)
    closed.to_csv(os.path.join(cfg.out_dir, "moments_closed.csv"))
    ode.to_csv(os.path.join(cfg.out_dir, "moments_ode.csv"))
    worst = {}
    for name in ("mean_x", "mean_u", "var_x", "cov_xu", "var_u", "cov_xi_x", "cov_xi_u"):
        a, b = closed.column(name), ode.column(name)
        ok = np.isfinite(a) & (np.abs(a) > 1e-300)
        if ok.any():
            worst[name] = float(np.max(np.abs(b[ok] - a[ok]) / np.abs(a[ok])))
    report = {"model": model.kind, "init": cfg.init, "max_relative_difference": worst,
              "cauchy_schwarz": bool(ode.cauchy_schwarz_ok())}
    _write_json(os.path.join(cfg.out_dir, "moments_report.json"), report)
    return report


def cmd_fhhs(cfg):
    m, t = cfg.model, cfg.times
    T = np.asarray(fhhs.granular_temperature(m, t))
    _write_table(
        os.path.join(cfg.out_dir, "fhhs_temperature.csv"),
        ["t", "T", "Re_T", "eta", "phi", "D"],
        [list(map(float, t)), list(map(float, T)),
         list(map(float, np.asarray(fhhs.re_t(T, cfg.re_t_scale)))),
         list(map(float, np.asarray(m.eta(t)))), list(map(float, np.asarray(m.phi(t)))),
         list(map(float, np.asarray(fhhs.diffusion_of_time(m, t))))],
    )
    grid_T = np.linspace(0.0, fhhs.steady_temperature(m), cfg.n_temperatures)
    S, G = fhhs.source_sink(m, grid_T)
    D = fhhs.diffusion_of_temperature(m, grid_T)
    _write_table(os.path.join(cfg.out_dir, "fhhs_source_sink.csv"), ["T", "S", "Gamma", "D"],
                 [list(map(float, grid_T)), list(map(float, S)), list(map(float, G)),
                  list(map(float, D))])
    report = {"model": m.to_config(), "steady_temperature": fhhs.steady_temperature(m),
              "steady_diffusion": m.sigma_xi ** 2 / m.tau_p}
    _write_json(os.path.join(cfg.out_dir, "fhhs_report.json"), report)
    return report


def cmd_fit(cfg):
    series = {}
    if cfg.synthetic is not None:
        syn = cfg.synthetic
        for re_m in syn["Re_m"]:
            model = fhhs.model_for_re(re_m, cfg.tau_p, cfg.C2)
            times = fhhs.synthetic_times(model, syn["n"])
            series[re_m] = fhhs.synthetic_temperature(model, times, syn["noise"],
                                                      cfg.seed + int(round(re_m * 1000)))
    else:
        for i, item in enumerate(cfg.data):
            path = item["path"]
            if not os.path.isabs(path):
                path = os.path.join(cfg.base_dir, path)
            key = item["Re_m"] if item["Re_m"] is not None else float(i)
            series[key] = fhhs.read_temperature_csv(path)
    report = fhhs.fit_fhhs_series(series, cfg.C2, cfg.tau_p, cfg.refine_c2)
    _write_text(os.path.join(cfg.out_dir, "fit_report.json"), report.to_json() + "\n")
    return report.to_dict()


COMMANDS = {"pdf": cmd_pdf, "mc": cmd_mc, "fp": cmd_fp, "moments": cmd_moments,
            "fhhs": cmd_fhhs, "fit": cmd_fit}


def _fail(code, payload):
    sys.stderr.write(json.dumps(_plain(payload), sort_keys=True) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        overrides = {"seed": args.seed, "out_dir": args.out_dir, "threads": args.threads}
        cfg = load_config(args.command, args.config, overrides)
        os.makedirs(cfg.out_dir, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            COMMANDS[args.command](cfg)
    except _UsageError as exc:
        return _fail(2, {"error": "usage", "message": str(exc)})
    except NumericalError as exc:
        return _fail(3, exc.payload())
    except LiouvilleError as exc:
        payload = exc.payload()
        if not isinstance(exc, ConfigError):
            payload = {"error": "usage", "kind": exc.kind, "message": str(exc)}
        return _fail(2, payload)
    except OSError as exc:
        return _fail(2, {"error": "usage", "message": f"{exc.strerror}: {exc.filename}"})
    return 0


if __name__ == "__main__":
    sys.exit(main())
