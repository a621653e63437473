"""Command-line entry point: ``dbar-spectra <command> [flags]``.

Settings come from three layers: built-in defaults, a flat ``key=value``
config file given with ``--config``, and command-line flags, later layers
overriding earlier ones.  Exit codes: 0 success, 1 verification failure,
2 configuration error, 3 numerical non-convergence.
"""
import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import analytic, fem, holo, mesh, resolvent, spectra
from .verify import bundled_domains, run_checks

__all__ = ["RunConfig", "ConfigError", "main", "run", "load_config_file"]

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = ("disk-curves", "annulus-curves", "fem-curves", "robin-compare", "faber-krahn",
            "steklov", "bergman-demo", "resolvent", "verify", "mesh-info")


class ConfigError(ValueError):
    pass


_COMMON = {
    "domain": "disk", "radius": 1.0, "r_in": 1.0, "r_out": math.sqrt(10.0),
    "alpha": 1.2, "beta": None, "vertices": None,
    "a_min": 0.01, "a_max": 60.0, "points": 30, "spacing": "log", "a_values": None,
    "h": 0.1, "refinements": 0, "count": 12, "out": None, "format": "csv", "seed": 0,
    "holomorphic_degree": 0, "kind": "dbar-robin",
}

_DEFAULTS = {
    "disk-curves": {"radius": 3.0, "a_min": 0.01, "a_max": 60.0, "points": 200, "spacing": "log"},
    "annulus-curves": {"a_min": 0.01, "a_max": 10.0, "points": 200, "spacing": "log",
                       "family": "upper"},
    "fem-curves": {"a_min": 0.01, "a_max": 1000.0, "points": 30, "count": 6},
    "robin-compare": {"a_values": "0.5,1,5"},
    "faber-krahn": {"domain": "ellipse", "a_values": "0.5,2,10"},
    "steklov": {"count": 10, "n_max": 30},
    "bergman-demo": {},
    "resolvent": {"mode": "dirichlet", "holomorphic_degree": 20, "lam": "1j",
                  "a_values": None, "a0": 1.0},
    "verify": {"level": "quick"},
    "mesh-info": {"write_mesh": None, "read_mesh": None},
}

_FLOAT = {"radius", "r_in", "r_out", "alpha", "beta", "a_min", "a_max", "h", "a0"}
_INT = {"points", "refinements", "count", "seed", "holomorphic_degree", "n_max"}


@dataclass
class RunConfig:
    """Resolved settings of one invocation."""

    command: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    def a_grid(self):
        if self.a_min <= 0 or self.a_max <= self.a_min:
            raise ConfigError("need 0 < a-min < a-max")
        if self.points < 2:
            raise ConfigError("points must be at least 2")
        if self.spacing == "log":
            return np.geomspace(self.a_min, self.a_max, self.points)
        if self.spacing == "linear":
            return np.linspace(self.a_min, self.a_max, self.points)
        raise ConfigError("spacing must be 'log' or 'linear'")

    def a_list(self):
        try:
            vals = [float(x) for x in str(self.a_values).split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"bad a-values {self.a_values!r}") from None
        if not vals:
            raise ConfigError("a-values is empty")
        return vals

    def domain_spec(self):
        d = self.domain
        try:
            if d == "disk":
                return mesh.DomainSpec.disk(self.radius)
            if d == "annulus":
                return mesh.DomainSpec.annulus(self.r_in, self.r_out)
            if d == "ellipse":
                beta = self.beta if self.beta is not None else 1.0 / self.alpha
                return mesh.DomainSpec.ellipse(self.alpha, beta)
            if d == "smoothed-square":
                return mesh.smoothed_square()
            if d == "square":
                return bundled_domains()["square"]
            if d == "polygon":
                if not self.vertices:
                    raise ConfigError("polygon needs --vertices 'x,y;x,y;...'")
                pts = [tuple(float(c) for c in p.split(",")) for p in self.vertices.split(";")]
                return mesh.DomainSpec.polygon(pts)
        except mesh.MeshError as exc:
            raise ConfigError(str(exc)) from None
        raise ConfigError(f"unknown domain {d!r}")


def load_config_file(path):
    """Parse a flat key=value file; '#' starts a comment."""
    out = {}
    try:
        fh = open(path, encoding="ascii")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    with fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _coerce(key, value):
    if value is None or not isinstance(value, str):
        return value
    try:
        if key in _FLOAT:
            return float(value)
        if key in _INT:
            return int(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def _parser():
    p = argparse.ArgumentParser(prog="dbar-spectra", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS
    for name in COMMANDS:
        sp = sub.add_parser(name, argument_default=S)
        sp.add_argument("--config")
        sp.add_argument("--out")
        sp.add_argument("--format", choices=["csv", "json"])
        sp.add_argument("--seed", type=int)
        if name == "verify":
            sp.add_argument("--level", choices=["quick", "full"])
            continue
        sp.add_argument("--count", type=int)
        sp.add_argument("--domain", choices=["disk", "annulus", "ellipse", "smoothed-square",
                                             "square", "polygon"])
        sp.add_argument("--radius", type=float)
        sp.add_argument("--r-in", type=float, dest="r_in")
        sp.add_argument("--r-out", type=float, dest="r_out")
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--vertices")
        sp.add_argument("--a-min", type=float, dest="a_min")
        sp.add_argument("--a-max", type=float, dest="a_max")
        sp.add_argument("--points", type=int)
        sp.add_argument("--spacing", choices=["log", "linear"])
        sp.add_argument("--a-values", dest="a_values")
        sp.add_argument("--h", type=float)
        sp.add_argument("--refinements", type=int)
        sp.add_argument("--holomorphic-degree", type=int, dest="holomorphic_degree")
        sp.add_argument("--kind", choices=["dbar-robin", "robin", "dirichlet", "dbar-neumann"])
        if name == "annulus-curves":
            sp.add_argument("--family", choices=["upper", "all"])
        if name == "steklov":
            sp.add_argument("--n-max", type=int, dest="n_max")
        if name == "resolvent":
            sp.add_argument("--mode", choices=["dirichlet", "zero", "continuity"])
            sp.add_argument("--lam")
            sp.add_argument("--a0", type=float)
        if name == "mesh-info":
            sp.add_argument("--write-mesh", dest="write_mesh")
            sp.add_argument("--read-mesh", dest="read_mesh")
    return p


def build_config(argv):
    ns = vars(_parser().parse_args(argv))
    cmd = ns.pop("command")
    values = dict(_COMMON)
    values.update(_DEFAULTS[cmd])
    path = ns.pop("config", None)
    if path:
        for k, v in load_config_file(path).items():
            if k not in values:
                raise ConfigError(f"unknown config key {k!r}")
            values[k] = _coerce(k, v)
    values.update(ns)
    if values["count"] is not None and values["count"] < 1:
        raise ConfigError("count must be at least 1")
    if values["h"] <= 0:
        raise ConfigError("h must be positive")
    return RunConfig(cmd, values)


def _mesh(cfg):
    m = mesh.triangulate(cfg.domain_spec(), cfg.h)
    for _ in range(cfg.refinements):
        m = mesh.refine(m)
    return m


def _forms(cfg):
    return fem.assemble(_mesh(cfg), holomorphic_degree=cfg.holomorphic_degree)


def _need_out(cfg):
    if not cfg.out:
        raise ConfigError("--out is required")
    return cfg.out


# ------------------------------------------------------------------ commands

def cmd_disk_curves(cfg, out):
    a = cfg.a_grid()
    modes, vals, slopes = analytic.disk_branch_curves(cfg.radius, a, cfg.count)
    labels = [m.label() for m in modes]
    path = _need_out(cfg)
    if cfg.format == "json":
        spectra.write_curve_json(path, a, vals, slopes, labels=labels,
                                 meta={"radius": cfg.radius})
    else:
        spectra.write_curve_csv(path, a, vals, slopes)
    for k, m in enumerate(modes):
        mono = bool(np.all(np.diff(vals[:, k]) > 0))
        out(f"curve {k + 1} {m.label()}: mu({a[0]:g})={vals[0, k]:.10g} "
            f"mu({a[-1]:g})={vals[-1, k]:.10g} increasing={mono}")
    return EXIT_OK


def _convex_regions(a, vals, labels):
    regions = []
    flags = np.zeros(vals.shape, dtype=float)
    for k in range(vals.shape[1]):
        sd = spectra.second_differences(a, vals[:, k])
        noise = 1e-12 * max(1.0, float(np.max(np.abs(vals[:, k]))))
        hit = np.nonzero(sd > 10 * noise)[0]
        flags[hit + 1, k] = 1.0
        if len(hit):
            regions.append({"index": k + 1, "label": list(labels[k]),
                            "a_start": float(a[hit[0] + 1]), "a_end": float(a[hit[-1] + 1]),
                            "max_second_difference": float(sd.max()),
                            "noise_floor": noise})
    return regions, flags


def cmd_annulus_curves(cfg, out):
    a = cfg.a_grid()
    spec = analytic.AnnulusSpec(cfg.r_in, cfg.r_out)
    labels, vals, slopes = analytic.annulus_branch_curves(spec, a, cfg.count, family=cfg.family)
    regions, flags = _convex_regions(a, vals, labels)
    path = _need_out(cfg)
    if cfg.format == "json":
        spectra.write_curve_json(path, a, vals, slopes, labels=labels, convex=regions,
                                 meta={"r_in": cfg.r_in, "r_out": cfg.r_out,
                                       "family": cfg.family})
    else:
        extra = {f"convex_{k + 1}": flags[:, k] for k in range(vals.shape[1])}
        spectra.write_curve_csv(path, a, vals, slopes, extra=extra)
    conv = {r["index"] for r in regions}
    for k, lab in enumerate(labels):
        out(f"curve {k + 1} (j={lab[0]}, {lab[1]}, root {lab[2]}): "
            f"mu({a[0]:g})={vals[0, k]:.10g} mu({a[-1]:g})={vals[-1, k]:.10g} "
            f"convex_region={'yes' if k + 1 in conv else 'no'}")
    return EXIT_OK


def cmd_fem_curves(cfg, out):
    forms = _forms(cfg)
    a = cfg.a_grid()
    c = spectra.sweep_curves(forms, a, cfg.count, kind=cfg.kind, seed=cfg.seed)
    path = _need_out(cfg)
    if cfg.format == "json":
        spectra.write_curve_json(path, a, c.values, c.slopes, crossings=c.crossings,
                                 meta={"mesh": forms.mesh.summary(), "kind": cfg.kind})
    else:
        spectra.write_curve_csv(path, a, c.values, c.slopes)
    for k in range(c.count):
        rep = spectra.concavity_report(c, k + 1)
        out(f"curve {k + 1}: mu({a[0]:g})={c.values[0, k]:.10g} "
            f"mu({a[-1]:g})={c.values[-1, k]:.10g} {rep.verdict}")
    return EXIT_OK


def cmd_robin_compare(cfg, out):
    forms = _forms(cfg)
    for a in cfg.a_list():
        d, r = spectra.robin_comparison(forms, a)
        out(f"a={a:g}: dbar-robin {d:.10g} robin {r:.10g} difference {r - d:.3e}")
    return EXIT_OK


def cmd_faber_krahn(cfg, out):
    rows = spectra.faber_krahn_probe(cfg.domain_spec(), cfg.a_list(), h=cfg.h,
                                     holomorphic_degree=cfg.holomorphic_degree)
    if cfg.out:
        with open(cfg.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write("a,mu_domain,mu_disk,margin,error,inconclusive\n")
            for r in rows:
                fh.write(f"{r.a!r},{r.mu_domain!r},{r.mu_disk!r},{r.margin!r},{r.error!r},"
                         f"{int(r.inconclusive)}\n")
    for r in rows:
        verdict = "inconclusive" if r.inconclusive else ("supports" if r.margin > 0 else "contradicts")
        out(f"a={r.a:g}: mu_domain {r.mu_domain:.8f} mu_disk {r.mu_disk:.8f} "
            f"margin {r.margin:.3e} error {r.error:.1e} ({verdict})")
    return EXIT_OK


def cmd_steklov(cfg, out):
    basis = holo.HolomorphicBasis(cfg.domain_spec(), cfg.n_max)
    levels = holo.hardy_steklov_levels(basis, cfg.count)
    if cfg.out:
        holo.write_steklov_csv(cfg.out, levels)
    out(f"gram condition {basis.condition:.3e}")
    for k, s in enumerate(levels, 1):
        out(f"S_{k} = {s:.12g}")
    return EXIT_OK


def cmd_bergman_demo(cfg, out):
    forms = fem.assemble(_mesh(cfg))
    z = forms.mesh.complex_nodes
    n = lambda v: forms.mnorm(forms.nodal(v))
    _, perp = holo.bergman_project(forms, z)
    pz, _ = holo.bergman_project(forms, np.conj(z))
    out(f"|P_perp z| / |z| = {n(perp) / n(z):.3e}")
    out(f"|P conj(z)| / |conj(z)| = {n(pz) / n(z):.3e}")
    r = holo.sharp_constant_probe(forms)
    out(f"sharp constant: ratio {r['ratio']:.8f} bound {r['bound']:.8f} "
        f"ratio/bound {r['ratio'] / r['bound']:.6f}")
    return EXIT_OK


def cmd_resolvent(cfg, out):
    forms = _forms(cfg)
    try:
        lam = complex(cfg.lam)
    except ValueError:
        raise ConfigError(f"bad lam {cfg.lam!r}") from None
    if lam.imag == 0:
        raise ConfigError("lam must have nonzero imaginary part")
    rows = []
    if cfg.mode == "dirichlet":
        a = cfg.a_list() if cfg.a_values else [10.0, 30.0, 100.0, 300.0, 1000.0]
        norms = [resolvent.resolvent_diff_norm(forms, ("dbar-robin", x), "dirichlet", lam,
                                               seed=cfg.seed) for x in a]
        s = resolvent.fit_loglog_slope(a, norms)
        rows = [{"a": x, "norm_projected": float("nan"), "norm_unprojected": v,
                 "fitted_slope": s} for x, v in zip(a, norms)]
        out(f"Dirichlet limit: fitted slope {s:.4f}")
    elif cfg.mode == "zero":
        a = cfg.a_list() if cfg.a_values else [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
        rows = resolvent.unprojected_zero_limit_report(forms, a, lam, seed=cfg.seed)
        out(f"zero limit: projected slope {rows[0]['fitted_slope']:.4f}")
    else:
        d = cfg.a_list() if cfg.a_values else [1e-1, 1e-2, 1e-3]
        norms = resolvent.resolvent_continuity(forms, cfg.a0, d, lam, seed=cfg.seed)
        s = resolvent.fit_loglog_slope(np.abs(d), norms)
        rows = [{"a": cfg.a0 + x, "norm_projected": float("nan"), "norm_unprojected": v,
                 "fitted_slope": s} for x, v in zip(d, norms)]
        out(f"continuity at a0={cfg.a0:g}: fitted slope {s:.4f}")
    for r in rows:
        out(f"a={r['a']:g}: projected {r['norm_projected']:.6e} "
            f"unprojected {r['norm_unprojected']:.6e}")
    if cfg.out:
        resolvent.write_resolvent_csv(cfg.out, rows)
    return EXIT_OK


def cmd_verify(cfg, out):
    ok, _ = run_checks(cfg.level, out=out)
    out("verify: " + ("all checks passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_mesh_info(cfg, out):
    if cfg.read_mesh:
        m = mesh.read_mesh(cfg.read_mesh)
    else:
        m = _mesh(cfg)
    s = m.summary()
    out(" ".join(f"{k}={v}" for k, v in s.items()))
    if cfg.write_mesh:
        mesh.write_mesh(m, cfg.write_mesh)
    if cfg.out:
        with open(cfg.out, "w", encoding="ascii", newline="\n") as fh:
            json.dump(s, fh, indent=1, sort_keys=True, default=str)
            fh.write("\n")
    return EXIT_OK


_HANDLERS = {
    "disk-curves": cmd_disk_curves, "annulus-curves": cmd_annulus_curves,
    "fem-curves": cmd_fem_curves, "robin-compare": cmd_robin_compare,
    "faber-krahn": cmd_faber_krahn, "steklov": cmd_steklov,
    "bergman-demo": cmd_bergman_demo, "resolvent": cmd_resolvent,
    "verify": cmd_verify, "mesh-info": cmd_mesh_info,
}


def run(argv=None, out=print):
    """Run one command; returns the exit code."""
    try:
        cfg = build_config(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _HANDLERS[cfg.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (spectra.SolverConvergenceError, resolvent.StagnationError,
            analytic.BracketError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (mesh.MeshError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
