"""``billiard-lab``: reproducible experiments with CSV/JSON output.

Every subcommand writes its artifacts into ``--out`` together with
``manifest.json`` (config echo, versions, wall time). Settings come from
defaults, then an optional ``--config`` file of ``key=value`` lines, then
explicit flags. ``--threads`` falls back to ``BILLIARD_LAB_THREADS``.
"""
import argparse
from dataclasses import asdict, dataclass, field, fields
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .errors import BilliardError, ConfigError
from .io import write_csv, write_json

BETA_SNAP = 1e-4
COMMANDS = ("orbit", "expansion-check", "adiabatic-check", "return-map", "normal-form",
            "island-scan", "sawtooth", "fermi-ulam", "acceptance")


@dataclass
class ExperimentConfig:
    command: str
    beta: float = math.pi / 2
    n: list = field(default_factory=list)
    seeds: int = 1000
    steps: int = 0
    tol: float = 1e-9
    out: str = "billiard_lab_out"
    seed: int = 0
    threads: int = 1
    start: tuple = (2 + math.sqrt(3), 1.0)
    m: list = field(default_factory=lambda: [3])
    delta: float = None
    grid: int = 10
    horizon: int = 10**4
    suite: str = "all"

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        # a rounded pi/2 such as 1.5708 means the semi-disc
        if abs(self.beta - math.pi / 2) < BETA_SNAP:
            self.beta = math.pi / 2
        if not 0 < self.beta <= math.pi / 2:
            raise ConfigError(f"--beta must lie in (0, pi/2], got {self.beta}")
        if self.seeds < 1:
            raise ConfigError("--seeds must be at least 1")
        if self.steps < 0:
            raise ConfigError("--steps must be non-negative")
        if not self.tol > 0:
            raise ConfigError("--tol must be positive")
        if self.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if any(m < 3 for m in self.m):
            raise ConfigError("--m values must be at least 3 (rotation angle pi/m)")
        if self.delta is not None and not 0 < self.delta < 4:
            raise ConfigError("--delta must lie in (0, 4)")
        if self.command in ("normal-form", "island-scan") and any(n < 20 for n in self.n):
            raise ConfigError("--n must be at least 20 for the normal-form pipeline")
        if self.command == "return-map" and any(n < 1 for n in self.n):
            raise ConfigError("--n must be positive")
        if self.grid < 2:
            raise ConfigError("--grid must be at least 2")
        if self.horizon < 1:
            raise ConfigError("--horizon must be at least 1")
        if self.command == "acceptance":
            from .acceptance import CRITERIA
            if self.suite != "all" and any(s not in CRITERIA for s in self.suite.split(",")):
                raise ConfigError(f"--suite must be 'all' or a comma list of: {', '.join(CRITERIA)}")
        return self


def _ints(text):
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _number(text):
    """Float or a closed-form expression such as ``2+sqrt(3)``."""
    try:
        return float(text)
    except ValueError:
        import sympy
        try:
            return float(sympy.sympify(text, rational=True))
        except (sympy.SympifyError, TypeError, ValueError):
            raise ConfigError(f"cannot read {text!r} as a number") from None


def _pair(text):
    parts = [_number(v) for v in str(text).split(",")]
    if len(parts) != 2:
        raise ConfigError(f"expected 'x,y', got {text!r}")
    return tuple(parts)


_PARSE = {"beta": _number, "n": _ints, "seeds": int, "steps": int, "tol": float, "out": str,
          "seed": int, "threads": int, "start": _pair, "m": _ints,
          "delta": float, "grid": int, "horizon": int, "suite": str}


def read_config(path):
    """Flat ``key=value`` file; ``#`` starts a comment, dashes equal underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{k}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _PARSE:
                raise ConfigError(f"{path}:{k}: unknown key {key!r}")
            try:
                out[key] = _PARSE[key](val)
            except ValueError as exc:
                raise ConfigError(f"{path}:{k}: bad value for {key}: {exc}") from None
    return out


_DEFAULT_STEPS = {"orbit": 5, "return-map": 100, "sawtooth": 10**6, "fermi-ulam": 10**6,
                  "island-scan": 10**4, "normal-form": 10**4}
_DEFAULT_N = {"return-map": [10**4], "normal-form": [160], "island-scan": [160],
              "sawtooth": [10], "fermi-ulam": [10]}


def build_parser():
    p = argparse.ArgumentParser(prog="billiard-lab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key=value file; flags given here override it")
    p.add_argument("--beta", type=_number, help="sector half-angle in (0, pi/2]")
    p.add_argument("--n", type=_ints, help="island indices, comma separated")
    p.add_argument("--seeds", type=int, help="ensemble size")
    p.add_argument("--steps", type=int, help="step or return horizon")
    p.add_argument("--tol", type=float, help="pass/fail tolerance where applicable")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--threads", type=int, help="worker threads (default $BILLIARD_LAB_THREADS or 1)")
    p.add_argument("--start", type=_pair, help="orbit start 'x,y'; entries may be expressions like 2+sqrt(3)")
    p.add_argument("--m", type=_ints, help="polygon orders, comma separated")
    p.add_argument("--delta", type=float, help="shear parameter (overrides 2 - 2 cos(pi/m))")
    p.add_argument("--grid", type=int, help="island-scan grid resolution per axis")
    p.add_argument("--horizon", type=int, help="returns for the island fraction in normal-form")
    p.add_argument("--suite", help="acceptance criteria to run, comma separated, or 'all'")
    return p


def config_from_args(argv=None):
    args = build_parser().parse_args(argv)
    vals = {}
    if args.config:
        vals.update(read_config(args.config))
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if f.name != "command" and v is not None:
            vals[f.name] = v
    if "threads" not in vals:
        env = os.environ.get("BILLIARD_LAB_THREADS")
        if env:
            try:
                vals["threads"] = int(env)
            except ValueError:
                raise ConfigError(f"BILLIARD_LAB_THREADS must be an integer, got {env!r}") from None
    cfg = ExperimentConfig(args.command, **vals)
    if not cfg.n:
        cfg.n = list(_DEFAULT_N.get(cfg.command, [160]))
    if cfg.steps == 0:
        cfg.steps = _DEFAULT_STEPS.get(cfg.command, 0)
    return cfg.validate()


def _versions():
    import mpmath
    import numba
    import scipy
    import sympy
    return {"outerbilliards": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__,
            "mpmath": mpmath.__version__, "sympy": sympy.__version__}


# ------------------------------------------------------------ subcommands

def cmd_orbit(cfg, out):
    from .geometry import SectorShape, classify_region, orbit
    from .errors import OnSingularity, RegionExit
    shape = SectorShape(cfg.beta)
    pts = orbit(shape, cfg.start, cfg.steps)
    rows = []
    for i, (x, y) in enumerate(pts):
        try:
            reg = classify_region(shape, (x, y)).name
        except (OnSingularity, RegionExit):
            reg = ""
        rows.append((i, x, y, reg))
    write_csv(os.path.join(out, "orbit.csv"), ["step", "x", "y", "region"], rows)
    res = float(math.dist(pts[-1], pts[0]))
    summary = {"beta": cfg.beta, "start": list(cfg.start), "steps": cfg.steps,
               "closure_residual": res, "closed": res < cfg.tol}
    write_json(os.path.join(out, "orbit.json"), summary)
    print(f"closure residual after {cfg.steps} steps: {res:.3e}")
    return 0


def cmd_expansion_check(cfg, out):
    from . import asymptotics as asy
    from .geometry import Region
    rg = 320.0 * 2.0 ** np.arange(8)
    semi = abs(cfg.beta - math.pi / 2) < 1e-12
    order, want = (4, (-4, -5)) if semi else (2, (-2, -3))
    report, ok = {}, True
    for reg in (Region.I, Region.II, Region.III, Region.IV):
        ex, ap = asy.semidisc_pair(reg, order) if semi else asy.sector_pair(cfg.beta, reg, order)
        f = asy.order_fit(ex, ap, reg, rg, lambda r, reg=reg: asy.default_theta_grid(cfg.beta, reg, r, 3),
                          beta=cfg.beta, csv_path=os.path.join(out, f"order_fit_{reg.name}.csv"))
        good = abs(f.slope_r - want[0]) <= 0.3 and abs(f.slope_theta - want[1]) <= 0.3
        ok &= good
        report[reg.name] = {"slope_r": f.slope_r, "slope_theta": f.slope_theta, "pass": good}
        print(f"region {reg.name}: slopes {f.slope_r:.3f}, {f.slope_theta:.3f}")
    write_json(os.path.join(out, "expansion.json"),
               {"beta": cfg.beta, "order": order, "expected": list(want), "regions": report})
    return 0 if ok else 1


def cmd_adiabatic_check(cfg, out):
    from . import adiabatic as ad
    from .geometry import Region
    ad.export_tables_csv(os.path.join(out, "tables_published.csv"), "published")
    ad.export_tables_csv(os.path.join(out, "tables_corrected.csv"), "corrected")
    report = {}
    for reg in (Region.I, Region.II, Region.III, Region.IV):
        ch = ad.solve_phi_psi_odes(reg)
        ad.export_chart_csv(ch, os.path.join(out, f"chart_{reg.name}.csv"))
        lo, hi = ch.domain
        ths = np.linspace(lo + 0.2, hi - 0.2, 5)
        sr, sp, _, _ = ad.drift_fit(ch, [1000.0 * 2**k for k in range(6)], ths, order=4)
        report[reg.name] = {"slope_rho": sr, "slope_psi": sp, "e": ch.tail.e, "f": ch.tail.f}
        print(f"region {reg.name}: drift slopes {sr:.3f}, {sp:.3f}")
    write_json(os.path.join(out, "adiabatic.json"), report)
    return 0


def cmd_return_map(cfg, out):
    from . import return_map as rm
    from .geometry import SEMIDISC, classify_region
    from .errors import OnSingularity, RegionExit
    summaries = []
    for n in cfg.n:
        cyc = rm.anchor_cycle(n)
        write_csv(os.path.join(out, f"anchor_cycle_n{n}.csv"), ["stage", "rho", "phi"],
                  [(i, s.rho, s.phi) for i, s in enumerate(cyc)])
        xt, yt = rm.model_fixed_point(n)
        z = rm.tilde_to_plane(n, xt, yt)
        rows = [(0, z[0], z[1], "I")]
        for i in range(1, cfg.steps + 1):
            z, _ = rm.exact_first_return(SEMIDISC, z)
            try:
                reg = classify_region(SEMIDISC, z).name
            except (OnSingularity, RegionExit):
                reg = ""
            rows.append((i, z[0], z[1], reg))
        write_csv(os.path.join(out, f"return_orbit_n{n}.csv"), ["step", "x", "y", "region"], rows)
        summaries.append({"n": n, "fixed_point": list(map(float, rm.tilde_to_plane(n, xt, yt))),
                          "steps": cfg.steps,
                          "cycle_deviation": float(max(abs(cyc[-1].rho - cyc[0].rho),
                                                       abs(cyc[-1].phi - cyc[0].phi)))})
    slope, res = rm.sawtooth_residual(cfg.beta, [200, 400, 800, 1600, 3200, 6400], k=32,
                                      seed=cfg.seed,
                                      csv_path=os.path.join(out, "sawtooth_residual.csv"))
    for s in summaries:
        s["residual_slope"] = slope
    write_json(os.path.join(out, "return_map.json"), summaries)
    print(f"sawtooth residual slope at beta={cfg.beta:.6g}: {slope:.3f}")
    return 0


def cmd_normal_form(cfg, out):
    from . import normal_form as nf
    reports = []
    for n in cfg.n:
        p = nf.find_fixed_point(n)
        model = nf.taylor_fit(n, p)
        diag = nf.diagonalize(model)
        res = nf.birkhoff_twist(diag)
        prof = nf.rotation_profile(n, [0.002, 0.004, 0.006, 0.008, 0.01], fixed_point=p,
                                   threads=cfg.threads)
        write_csv(os.path.join(out, f"rotation_profile_n{n}.csv"), ["radius2", "rotation"], prof)
        frac = nf.island_scan(n, grid=cfg.grid, horizon=cfg.horizon, sub=0.5, fixed_point=p,
                              threads=cfg.threads)
        rep = {"n": n, "fixed_point": list(p), "A": model.A.tolist(),
               "cos_alpha": model.half_trace, "alpha2_re": res.alpha2.real,
               "alpha2_im": res.alpha2.imag, "alpha2_times_n2": res.alpha2.real * n * n,
               "island_fraction": frac}
        write_json(os.path.join(out, f"normal_form_n{n}.json"), rep)
        reports.append(rep)
        print(f"n={n}: cos alpha {model.half_trace:.6f}, n^2 alpha2 {res.alpha2.real * n * n:.4f}, "
              f"island fraction {frac:.2f}")
    return 0


def cmd_island_scan(cfg, out):
    from . import normal_form as nf
    rep = []
    for n in cfg.n:
        frac = nf.island_scan(n, grid=cfg.grid, horizon=cfg.steps, threads=cfg.threads)
        rep.append({"n": n, "grid": cfg.grid, "horizon": cfg.steps, "fraction": frac})
        print(f"n={n}: bounded fraction {frac:.3f}")
    write_json(os.path.join(out, "island_scan.json"), rep)
    return 0


def cmd_sawtooth(cfg, out):
    from . import sawtooth as sw
    rep = []
    total = 0
    for m in cfg.m:
        delta = cfg.delta if cfg.delta is not None else sw.delta_for(m)
        sys_ = sw.SawtoothSystem(delta)
        n = cfg.n[0] if cfg.n else 10
        poly = sw.build_invariant_polygon(m, n, delta, check=False)
        write_csv(os.path.join(out, f"polygon_m{m}.csv"), ["Rb", "phib"], poly.vertices)
        seeds = sw.seeds_left_of(sys_, poly, cfg.seeds, seed=cfg.seed)
        st = sw.escape_experiment(sys_, seeds, cfg.steps, barriers=[poly], threads=cfg.threads)
        thin = max(1, min(cfg.steps, 10**5) // 1000)
        orb = sw.orbit(sys_, sw.CylinderState(*seeds[0]), min(cfg.steps, 10**5), thin)
        write_csv(os.path.join(out, f"orbit_m{m}.csv"), ["step", "R", "phi"],
                  [(int(a), b, c) for a, b, c in orb])
        s = st.summary()
        s.update({"m": m, "delta": delta, "barrier_index": n, "closure": poly.closure})
        rep.append(s)
        total += s["crossings"]
        print(f"m={m}: delta {delta:.6f}, crossings {s['crossings']}")
    write_json(os.path.join(out, "sawtooth.json"), rep)
    return 0


def cmd_fermi_ulam(cfg, out):
    from . import sawtooth as sw
    m = cfg.m[0]
    delta = cfg.delta if cfg.delta is not None else sw.delta_for(m)
    model = sw.FermiUlamModel(delta, delta1=1.0)
    n = cfg.n[0] if cfg.n else 10
    mI, cr, poly = sw.fermi_ulam_experiment(model, m, n, seeds=cfg.seeds, steps=cfg.steps,
                                            seed=cfg.seed, threads=cfg.threads)
    alpha = sw.SawtoothSystem(delta).alpha
    jumps = [{"j": j, "jump": sw.fermi_ulam_jump(model, j, seed=cfg.seed),
              "bound": sw.jump_bound(j, alpha)} for j in (5, 6, 7)]
    q = np.quantile(mI, [0, 0.5, 1])
    rep = {"delta": delta, "m": m, "seeds": cfg.seeds, "steps": cfg.steps,
           "max_I_distribution": {"min": q[0], "median": q[1], "max": q[2]},
           "crossings": int(cr.sum()), "jump_checks": jumps}
    write_json(os.path.join(out, "fermi_ulam.json"), rep)
    print(f"delta {delta:.6f}: crossings {int(cr.sum())}")
    return 0


def cmd_acceptance(cfg, out):
    from . import acceptance as acc
    names = list(acc.CRITERIA) if cfg.suite == "all" else cfg.suite.split(",")
    results = []
    for name in names:
        kw = {}
        if name in ("twist", "island-persistence", "invariant-polygons", "fermi-ulam"):
            kw["threads"] = cfg.threads
        r = acc.run(name, **kw)
        print(r.line(), flush=True)
        results.append({"number": r.number, "name": r.name, "passed": r.passed,
                        "summary": r.summary, "seconds": r.seconds})
    write_json(os.path.join(out, "acceptance.json"), results)
    return 0 if all(r["passed"] for r in results) else 1


HANDLERS = {"orbit": cmd_orbit, "expansion-check": cmd_expansion_check,
            "adiabatic-check": cmd_adiabatic_check, "return-map": cmd_return_map,
            "normal-form": cmd_normal_form, "island-scan": cmd_island_scan,
            "sawtooth": cmd_sawtooth, "fermi-ulam": cmd_fermi_ulam,
            "acceptance": cmd_acceptance}


def run(cfg):
    """Dispatch one validated config; returns the exit status."""
    os.makedirs(cfg.out, exist_ok=True)
    os.environ["BILLIARD_LAB_THREADS"] = str(cfg.threads)
    t = time.perf_counter()
    status = HANDLERS[cfg.command](cfg, cfg.out)
    manifest = {"command": cfg.command, "config": asdict(cfg), "versions": _versions(),
                "wall_time": time.perf_counter() - t, "status": status,
                "files": sorted(f for f in os.listdir(cfg.out) if f != "manifest.json")}
    write_json(os.path.join(cfg.out, "manifest.json"), manifest)
    return status


def main(argv=None):
    try:
        cfg = config_from_args(argv)
        return run(cfg)
    except ConfigError as exc:
        print(f"billiard-lab: config error: {exc}", file=sys.stderr)
        return 2
    except BilliardError as exc:
        print(f"billiard-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
