"""Scenario runner: ``procalab <subcommand> [--config FILE] [--out DIR]``.

Every subcommand reads an INI config (schema in ``CONFIG_SCHEMA`` and the
README), writes CSV files and a ``manifest.ini`` into the output directory.
The manifest repeats the full config, so it can be fed back as a config.

Exit codes: 0 success, 1 unknown subcommand, 2 invalid config, 3 numerical
failure.
"""
import argparse
import configparser
import csv
import hashlib
import io
import os
import sys
import tempfile
import time

import numpy as np

SUBCOMMANDS = ("solve", "observable", "sweep", "decompose", "symplectic", "commutator",
               "maxwell", "gauge-probe", "energy", "algebra")

# section -> key -> (type, default)
CONFIG_SCHEMA = {
    "grid": {
        "circumference": (float, 2 * np.pi),
        "scale_factor": (str, "1"),
        "t_min": (float, -4.0),
        "t_max": (float, 4.0),
        "mode_cutoff": (int, 32),
        "grid_points": (int, 2048),
        "jet_order": (int, 12),
    },
    "masses": {
        "m": (float, 1.0),
        "m_min": (float, 1e-3),
        "m_max": (float, 1e-1),
        "n_masses": (int, 9),
        "r_max": (float, 4.0),
    },
    "forms": {
        "n_forms": (int, 3),
        "max_mode": (int, 3),
        "support_min": (float, -1.5),
        "support_max": (float, 1.5),
        "slice_t": (float, 0.3),
        "slices": (str, "-0.5, 0.0, 0.3, 0.8"),
        "scenario": (str, "default"),
        "source": (str, "random"),
        "data": (str, "random"),
        "generators": (int, 3),
        "max_degree": (int, 4),
        "arc": (str, "1.0, 4.0"),
        "horizon": (float, 2.0),
    },
    "tolerances": {
        "lorenz": (float, 1e-6),
        "observable": (float, 1e-6),
        "mismatch": (float, 1e-6),
        "symplectic": (float, 1e-6),
        "divergence": (float, 1e-6),
        "maxwell": (float, 1e-5),
        "algebra": (float, 1e-10),
        "energy_margin": (float, 0.05),
    },
    "run": {
        "seed": (int, 0),
        "workers": (int, 1),
        "method": (str, "taylor"),
    },
}

CHOICES = {
    ("forms", "source"): ("random", "zero"),
    ("forms", "data"): ("random", "zero"),
    ("run", "method"): ("taylor", "rk4"),
}

USAGE = (f"usage: procalab {{{','.join(SUBCOMMANDS)}}} [--config FILE] [--out DIR]\n"
         "run 'procalab <subcommand> --help' for options")


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def load_config(path=None, text=None):
    """Parse and validate; returns (dict of typed sections, canonical text)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        if text is not None:
            cp.read_string(text)
        elif path is not None:
            with open(path) as fh:
                cp.read_file(fh)
    except configparser.Error as e:
        raise ConfigError(f"config parse error: {e}") from None
    cfg = {}
    for sec, keys in CONFIG_SCHEMA.items():
        cfg[sec] = {k: d for k, (_, d) in keys.items()}
    for sec in cp.sections():
        if sec in ("manifest", "results"):
            continue
        if sec not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in CONFIG_SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            typ = CONFIG_SCHEMA[sec][key][0]
            try:
                val = typ(raw.strip())
            except ValueError:
                raise ConfigError(f"invalid value for {sec}.{key}: {raw!r}") from None
            if (sec, key) in CHOICES and val not in CHOICES[sec, key]:
                raise ConfigError(f"invalid value for {sec}.{key}: {raw!r}")
            cfg[sec][key] = val
    _validate(cfg)
    return cfg, canonical_text(cfg)


def _floats(s, key):
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {s!r}") from None


def _validate(cfg):
    g, m, f = cfg["grid"], cfg["masses"], cfg["forms"]
    checks = [
        ("grid.grid_points", g["grid_points"] >= 16),
        ("grid.t_max", g["t_max"] > g["t_min"]),
        ("grid.circumference", g["circumference"] > 0),
        ("grid.mode_cutoff", g["mode_cutoff"] >= 0),
        ("grid.jet_order", 2 <= g["jet_order"] <= 30),
        ("masses.m", m["m"] > 0),
        ("masses.m_min", m["m_min"] > 0),
        ("masses.m_max", m["m_max"] > m["m_min"]),
        ("masses.n_masses", m["n_masses"] >= 3),
        ("masses.r_max", m["r_max"] > 0),
        ("forms.n_forms", f["n_forms"] >= 1),
        ("forms.max_mode", 0 <= f["max_mode"] <= g["mode_cutoff"]),
        ("forms.support_max", g["t_min"] < f["support_min"] < f["support_max"] < g["t_max"]),
        ("forms.slice_t", g["t_min"] <= f["slice_t"] <= g["t_max"]),
        ("forms.generators", 1 <= f["generators"]),
        ("forms.max_degree", 0 <= f["max_degree"]),
        ("forms.horizon", f["horizon"] > 0),
        ("run.workers", cfg["run"]["workers"] >= 1),
    ]
    for key, ok in checks:
        if not ok:
            raise ConfigError(f"invalid value for {key}")
    for key in ("slices", "arc"):
        vals = _floats(f[key], f"forms.{key}")
        if key == "arc" and (len(vals) != 2 or not vals[0] < vals[1]):
            raise ConfigError("invalid value for forms.arc")
        if key == "slices" and (not vals or any(not g["t_min"] <= v <= g["t_max"] for v in vals)):
            raise ConfigError("invalid value for forms.slices")


def canonical_text(cfg):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for sec, vals in cfg.items():
        cp[sec] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in vals.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_atomic(path, text):
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    write_atomic(path, buf.getvalue())


def write_manifest(path, sub, cfg, cfg_text, results, wall):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    g, m = cfg["grid"], cfg["masses"]
    tol = ", ".join(f"{k}={v!r}" for k, v in cfg["tolerances"].items())
    cp["manifest"] = {
        "subcommand": sub,
        "config_sha": hashlib.sha256(cfg_text.encode()).hexdigest(),
        "seed": str(cfg["run"]["seed"]),
        "grid_points": str(g["grid_points"]),
        "modes": str(2 * g["mode_cutoff"] + 1),
        "m_min": repr(m["m_min"]),
        "m_max": repr(m["m_max"]),
        "tolerances": tol,
        "wall_time": f"{wall:.3f}",
    }
    cp["results"] = {k: _fmt(v) for k, v in results.items()}
    cfg_cp = configparser.ConfigParser(interpolation=None)
    cfg_cp.optionxform = str
    cfg_cp.read_string(cfg_text)
    for sec in cfg_cp.sections():
        cp[sec] = dict(cfg_cp[sec])
    buf = io.StringIO()
    cp.write(buf)
    write_atomic(path, buf.getvalue())


def read_manifest(path):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read(path)
    return {s: dict(cp[s]) for s in cp.sections()}


# ---------------------------------------------------------------------------
# context
# ---------------------------------------------------------------------------

class Context:
    def __init__(self, cfg):
        from .geometry import SpacetimeModel
        self.cfg = cfg
        g = cfg["grid"]
        self.model = SpacetimeModel(g["circumference"], g["scale_factor"], g["t_min"], g["t_max"],
                                    g["mode_cutoff"], g["grid_points"], g["jet_order"])
        self.rng = np.random.default_rng(cfg["run"]["seed"])
        self.tol = cfg["tolerances"]
        self.method = cfg["run"]["method"]
        self.workers = cfg["run"]["workers"]
        f = cfg["forms"]
        self.support = (f["support_min"], f["support_max"])
        self.max_mode = f["max_mode"]
        self.slice = self.model.slice(f["slice_t"])
        self.slices = [self.model.slice(t) for t in _floats(f["slices"], "forms.slices")]

    @property
    def m(self):
        return self.cfg["masses"]["m"]

    def masses(self):
        m = self.cfg["masses"]
        return np.geomspace(m["m_min"], m["m_max"], m["n_masses"])

    def test_form(self):
        from .scenarios import varied_form
        return varied_form(self.model, self.rng, 1, self.max_mode, self.support)

    def current(self):
        from .fields import random_test_form
        if self.cfg["forms"]["source"] == "zero":
            return None
        lo, hi = self.model.t_min, self.model.t_max
        w = 0.75 * (hi - lo) / 2
        mid = 0.5 * (hi + lo)
        return random_test_form(self.model, self.rng, 1, min(2, self.max_mode), (mid - w, mid + w))

    def data(self, slice_=None):
        from .fields import ProcaData, random_proca_data
        sl = slice_ or self.slice
        if self.cfg["forms"]["data"] == "zero":
            return ProcaData.zeros(self.model, sl)
        return random_proca_data(self.model, self.rng, sl, self.max_mode)


# ---------------------------------------------------------------------------
# subcommands; each returns a results dict and writes its CSVs
# ---------------------------------------------------------------------------

def cmd_solve(ctx, out):
    from .fields import write_field_csv
    from .solver import solve_proca
    j = ctx.current()
    data = ctx.data()
    A, rec = solve_proca(ctx.m, j, data, ctx.slice, ctx.method)
    write_field_csv(A, os.path.join(out, "field.csv.tmp"))
    os.replace(os.path.join(out, "field.csv.tmp"), os.path.join(out, "field.csv"))
    write_csv(os.path.join(out, "constraint.csv"), ["t", "lorenz_residual"], zip(rec.t, rec.residual))
    return {"max_lorenz_residual": rec.max_residual, "max_field": A.max_abs(),
            "pass": rec.max_residual <= ctx.tol["lorenz"]}


def cmd_observable(ctx, out):
    from .geometry import pairing
    from .solver import observable_formula, solve_proca
    rows, worst, worst_slice = [], 0.0, 0.0
    for i in range(ctx.cfg["forms"]["n_forms"]):
        F = ctx.test_form()
        j = ctx.current()
        data = ctx.data()
        A, _ = solve_proca(ctx.m, j, data, ctx.slice, ctx.method)
        direct = pairing(A, F)
        vals = []
        for sl in [ctx.slice] + ctx.slices:
            d2 = data if sl is ctx.slice else _data_on(A, sl)
            v = observable_formula(ctx.m, j, d2, F, ctx.method)
            rel = abs(v - direct) / max(abs(direct), 1e-300)
            vals.append(rel)
            rows.append((i, sl.t, v.real, v.imag, direct.real, direct.imag, rel))
        worst = max(worst, vals[0])
        worst_slice = max(worst_slice, max(vals))
    write_csv(os.path.join(out, "observable.csv"),
              ["instance", "slice_t", "formula_re", "formula_im", "direct_re", "direct_im", "rel_diff"], rows)
    return {"max_rel_diff": worst, "max_rel_diff_all_slices": worst_slice,
            "pass": worst_slice <= ctx.tol["observable"]}


def _data_on(A, sl):
    from .fields import ProcaData
    from .geometry import restrict
    return ProcaData(restrict("rho0", A, sl), restrict("rho_d", A, sl))


def _sweep_task(ctx):
    from . import scenarios
    from .limits import ObservableTask
    scen = ctx.cfg["forms"]["scenario"]
    model, rng = ctx.model, ctx.rng
    if scen in ("default", "closed"):
        # closed F'' = dψ paired with a non-conserved current: m^-2 divergence
        F = scenarios.exact_form(model, rng, ctx.max_mode, ctx.support)
        j = scenarios.generic_current(model, rng)
    elif scen == "zero_mode":
        F = scenarios.zero_mode_form(model, rng, ctx.support)
        j = scenarios.zero_mode_current(model)
    elif scen == "coclosed":
        F = scenarios.coclosed_form(model, rng, ctx.max_mode, ctx.support)
        j = scenarios.coclosed_current(model, rng)
    elif scen == "generic":
        F = ctx.test_form()
        j = ctx.current()
    else:
        raise ConfigError(f"invalid value for forms.scenario: {scen!r}")
    return ObservableTask(j, ctx.data(), F)


def cmd_sweep(ctx, out):
    from .limits import mass_sweep, write_sweep_csv
    task = _sweep_task(ctx)
    res = mass_sweep(task, ctx.masses(), ctx.workers, ctx.method, ctx.tol["divergence"])
    write_sweep_csv(res, os.path.join(out, "sweep.csv.tmp"))
    os.replace(os.path.join(out, "sweep.csv.tmp"), os.path.join(out, "sweep.csv"))
    return {"scenario": ctx.cfg["forms"]["scenario"], "fitted_exponent": res.exponent,
            "divergent_amplitude": res.divergent_amplitude, "verdict": res.verdict,
            "limit_re": res.limit.real, "limit_im": res.limit.imag, "limit_error": res.limit_error}


def cmd_decompose(ctx, out):
    from . import scenarios
    from .limits import decompose_observable
    rows = []
    kinds = ("coclosed", "exact", "zero_mode", "mixed", "generic")
    for i in range(ctx.cfg["forms"]["n_forms"]):
        kind = kinds[i % len(kinds)]
        F = scenarios.form_of_kind(kind, ctx.model, ctx.rng, ctx.max_mode, ctx.support)
        d = decompose_observable(F, ctx.tol["mismatch"], ctx.method)
        rows.append((i, kind, d.mismatch, d.coclosed_defect, d.closed_defect, d.sum_defect, d.decomposable))
    write_csv(os.path.join(out, "decompose.csv"),
              ["form", "kind", "mismatch", "coclosed_defect", "closed_defect", "sum_defect", "decomposable"], rows)
    return {"n_forms": len(rows), "n_decomposable": sum(r[-1] for r in rows)}


def cmd_symplectic(ctx, out):
    from .limits import symplectic_check
    F, F2 = ctx.test_form(), ctx.test_form()
    rep = symplectic_check(ctx.m, F, F2, ctx.slices, ctx.method)
    rows = [("spacetime", rep.spacetime.real, rep.spacetime.imag)]
    rows += [(repr(sl.t), v.real, v.imag) for sl, v in zip(ctx.slices, rep.surface)]
    write_csv(os.path.join(out, "symplectic.csv"), ["where", "re", "im"], rows)
    return {"max_rel_disagreement": rep.max_rel_disagreement, "antisymmetry_defect": rep.antisymmetry_defect,
            "pass": rep.max_rel_disagreement <= ctx.tol["symplectic"]}


def cmd_commutator(ctx, out):
    from . import scenarios
    from .limits import commutator_limit
    F = scenarios.coclosed_form(ctx.model, ctx.rng, ctx.max_mode, ctx.support)
    F2 = scenarios.coclosed_form(ctx.model, ctx.rng, ctx.max_mode, ctx.support)
    H = ctx.test_form()
    rep = commutator_limit(F, F2, ctx.masses(), H, workers=ctx.workers, method=ctx.method)
    rows = [(m, v.real, v.imag, e.real, e.imag, abs(v - rep.limit))
            for m, v, e in zip(rep.masses, rep.values, rep.via_E)]
    write_csv(os.path.join(out, "commutator.csv"),
              ["m", "symplectic_re", "symplectic_im", "via_E_re", "via_E_im", "diff_to_massless"], rows)
    return {"limit_re": rep.limit.real, "limit_im": rep.limit.imag, "fitted_exponent": rep.exponent,
            "degenerate_direction": rep.degenerate}


def cmd_maxwell(ctx, out):
    from . import scenarios
    from .fields import ProcaData, random_slice_form
    from .limits import maxwell_residual
    model, rng, sl = ctx.model, ctx.rng, ctx.slice
    F = ctx.test_form()
    rows = []
    j = scenarios.coclosed_current(model, rng)
    cases = [
        ("conserved", j, ProcaData(random_slice_form(model, rng, sl, 1, ctx.max_mode),
                                   scenarios.lorenz_compatible_Ad(model, rng, j, sl, ctx.max_mode))),
        ("nonconserved", scenarios.generic_current(model, rng),
         ProcaData(random_slice_form(model, rng, sl, 1, ctx.max_mode),
                   random_slice_form(model, rng, sl, 1, ctx.max_mode))),
        ("sourcefree_violating", None, ProcaData(random_slice_form(model, rng, sl, 1, ctx.max_mode),
                                                 random_slice_form(model, rng, sl, 1, ctx.max_mode))),
    ]
    res = {}
    for name, jj, data in cases:
        rep = maxwell_residual(jj, data, F, ctx.masses(), ctx.workers, ctx.method)
        rows.append((name, rep.residual.real, rep.residual.imag, rep.residual_error,
                     rep.closed_form.real, rep.closed_form.imag, rep.data_term.real, rep.data_term.imag))
        res[f"{name}_abs_residual"] = abs(rep.residual)
    write_csv(os.path.join(out, "maxwell.csv"),
              ["case", "residual_re", "residual_im", "residual_error", "closed_form_re", "closed_form_im",
               "data_term_re", "data_term_im"], rows)
    return res


def cmd_gauge_probe(ctx, out):
    from .limits import pure_gauge_probe
    F = ctx.test_form()
    rep = pure_gauge_probe(F, ctx.slices, ctx.method)
    rows = [(sl.t, a, b) for sl, a, b in zip(ctx.slices, rep.rho_d, rep.rho0_defect)]
    write_csv(os.path.join(out, "gauge.csv"), ["slice_t", "rho_d", "rho0_defect"], rows)
    return {"box_defect": rep.box_defect, "exact_defect": rep.exact_defect,
            "max_rho_d": max(rep.rho_d), "max_rho0_defect": max(rep.rho0_defect)}


def cmd_energy(ctx, out):
    from .fields import WaveData, random_slice_form, random_test_form
    from .limits import Probe, energy_estimates, default_energy_split
    model, rng = ctx.model, ctx.rng
    sl = ctx.slice
    lo, hi = sl.t + 0.2, sl.t + 0.9 * ctx.cfg["forms"]["horizon"]
    probes = []
    for i in range(ctx.cfg["forms"]["n_forms"]):
        deg = i % 2
        parts = [random_slice_form(model, rng, sl, deg, ctx.max_mode) for _ in range(2 if deg == 0 else 4)]
        f = random_test_form(model, rng, deg, ctx.max_mode, (lo, hi)) if i >= 2 else None
        probes.append(Probe(WaveData(*parts), f))
    train, test = default_energy_split(ctx.cfg["masses"]["r_max"])
    arc = tuple(_floats(ctx.cfg["forms"]["arc"], "forms.arc"))
    reps = energy_estimates(train, test, probes, sl, (None, arc), ctx.cfg["forms"]["horizon"],
                            ctx.tol["energy_margin"], ctx.method)
    rows = []
    for name, rep in zip(("circle", "arc"), reps):
        for which, rr in (("train", rep.train), ("test", rep.test)):
            rows += [(name, which, r.r, r.lhs, r.rhs, r.ratio) for r in rr]
    write_csv(os.path.join(out, "energy.csv"), ["region", "set", "r", "lhs", "rhs", "ratio"], rows)
    return {"C_circle": reps[0].C, "C_arc": reps[1].C, "verdict_circle": reps[0].verdict,
            "verdict_arc": reps[1].verdict}


def cmd_algebra(ctx, out):
    from .algebra import (commutator_reduce, format_trace, ideal_membership_oracle, random_element,
                          symmetrize, symmetrize_wick, table_from_forms)
    from . import scenarios
    n = ctx.cfg["forms"]["generators"]
    forms = [scenarios.coclosed_form(ctx.model, ctx.rng, ctx.max_mode, ctx.support) for _ in range(n)]
    table = table_from_forms(forms, ctx.m, method=ctx.method)
    tol = ctx.tol["algebra"]
    rows = []
    use_oracle = n <= 3 and ctx.cfg["forms"]["max_degree"] <= 4
    for i in range(ctx.cfg["forms"]["n_forms"]):
        f = random_element(table, ctx.rng, ctx.cfg["forms"]["max_degree"])
        S = symmetrize(f)
        member = ideal_membership_oracle(f - S, tol=tol) if use_oracle else ""
        rows.append((i, S.is_symmetric(), (symmetrize(S) - S).norm(), (S - symmetrize_wick(f)).norm(), member))
    write_csv(os.path.join(out, "algebra.csv"),
              ["element", "symmetric", "idempotence_defect", "wick_defect", "difference_in_ideal"], rows)
    trace = []
    red = commutator_reduce(table, 0, min(1, n - 1), trace)
    write_atomic(os.path.join(out, "trace.txt"), format_trace(trace, table.labels) + "\n")
    expect = 1j * table.G[0, min(1, n - 1)]
    return {"commutator_defect": abs(red.scalar() - expect), "G_asymmetry": table.asymmetry,
            "max_idempotence_defect": max(r[2] for r in rows),
            "all_in_ideal": all(r[4] for r in rows) if use_oracle else "skipped"}


COMMANDS = {
    "solve": cmd_solve, "observable": cmd_observable, "sweep": cmd_sweep, "decompose": cmd_decompose,
    "symplectic": cmd_symplectic, "commutator": cmd_commutator, "maxwell": cmd_maxwell,
    "gauge-probe": cmd_gauge_probe, "energy": cmd_energy, "algebra": cmd_algebra,
}


def run(sub, config=None, out="out", config_text=None):
    if sub not in COMMANDS:
        print(USAGE, file=sys.stderr)
        return 1
    try:
        cfg, text = load_config(config, config_text)
        if cfg["forms"]["scenario"] not in ("default", "closed", "zero_mode", "coclosed", "generic"):
            raise ConfigError(f"invalid value for forms.scenario: {cfg['forms']['scenario']!r}")
        ctx = Context(cfg)
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    try:
        results = COMMANDS[sub](ctx, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - t0
    write_manifest(os.path.join(out, "manifest.ini"), sub, cfg, text, results, wall)
    for k, v in results.items():
        print(f"{k} = {_fmt(v)}")
    return 0


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE)
        return 0 if argv else 1
    sub, rest = argv[0], argv[1:]
    if sub not in COMMANDS:
        print(f"unknown subcommand {sub!r}\n{USAGE}", file=sys.stderr)
        return 1
    ap = argparse.ArgumentParser(prog=f"procalab {sub}")
    ap.add_argument("--config", help="INI config file (defaults are used for missing keys)")
    ap.add_argument("--out", default="out", help="output directory")
    args = ap.parse_args(rest)
    return run(sub, args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
