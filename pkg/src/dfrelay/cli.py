"""Command-line entry point: ``dfrelay <command> CONFIG [section.key=value ...]``.

Configs are INI files with sections ``[signal]``, ``[labeling]``,
``[channel]``, ``[sim]``, ``[pep]``, ``[compare]`` and ``[output]``. A
config may declare several curves as ``[curve.<name>]`` sections whose keys
are ``section.key`` overrides of the base config; command-line overrides are
applied last and win.

Exit codes: 0 success, 1 config error, 2 runtime precondition failure.
"""
from __future__ import annotations

import argparse
import configparser
import itertools
import os
import sys
import time

import numpy as np

from . import pep, sim
from .channel import ChannelParams
from .constellation import SignalSet, make_mpsk, min_sq_dist, read_constellation, write_constellation
from .labeling import Scheme, identity_profile, read_profile_table, write_profile_table
from .labeling_search import GreedyLabeler, exhaustive_best
from .metrics import (MetricContext, format_labeling_table, labeling_gain_db,
                      labeling_min_metric, labeling_table)

__all__ = ["main", "ConfigError", "load_config", "RunSpec"]

COMMANDS = ("label-search", "tables", "pep", "simulate", "compare")


class ConfigError(Exception):
    """Invalid or incomplete configuration (exit status 1)."""


class PreconditionError(Exception):
    """Valid configuration that cannot be evaluated as asked (exit status 2)."""


class Settings:
    """Flat ``section.key -> str`` view with typed accessors that name missing keys.

    Keys are case-insensitive.
    """

    def __init__(self, values, source=""):
        self.values = {k.lower(): v for k, v in dict(values).items()}
        self.source = source

    def has(self, key):
        v = self.values.get(key.lower())
        return v is not None and v.strip() != ""

    def raw(self, key, default=None):
        if self.has(key):
            return self.values[key.lower()].strip()
        if default is None:
            raise ConfigError(f"missing config key '{key}'" + (f" in {self.source}" if self.source else ""))
        return default

    def _typed(self, key, default, cast, what):
        text = self.raw(key, None if default is None else str(default))
        try:
            return cast(text)
        except ValueError:
            raise ConfigError(f"config key '{key}' must be {what}, got {text!r}") from None

    def int(self, key, default=None):
        return self._typed(key, default, _to_int, "an integer")

    def float(self, key, default=None):
        return self._typed(key, default, float, "a number")

    def str(self, key, default=None):
        return self.raw(key, default)

    def optional_int(self, key):
        if not self.has(key) or self.raw(key).lower() in ("none", "off"):
            return None
        return self.int(key)

    def bool(self, key, default=False):
        text = self.raw(key, "true" if default else "false").lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key '{key}' must be a boolean, got {text!r}")

    def grid(self, key):
        return parse_grid(self.raw(key), key)

    def with_overrides(self, pairs):
        vals = dict(self.values)
        vals.update((k.lower(), v) for k, v in pairs)
        return Settings(vals, self.source)


def _to_int(text):
    try:
        return int(text)
    except ValueError:
        v = float(text)
        if not v.is_integer():
            raise
        return int(v)


def parse_grid(text, key="grid"):
    """``'0:40:5'`` (inclusive) or ``'0, 5, 10'``."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            lo, hi, step = parts
            n = int(np.floor((hi - lo) / step + 1e-9)) + 1
            return tuple(round(lo + k * step, 10) for k in range(n))
        vals = tuple(float(p) for p in text.replace(";", ",").split(",") if p.strip())
        if not vals:
            raise ValueError
        return vals
    except ValueError:
        raise ConfigError(f"config key '{key}' must be 'lo:hi:step' or a comma list, got {text!r}") from None


def parse_override(item):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form section.key=value")
    key, value = item.split("=", 1)
    key = key.strip()
    if "." not in key:
        raise ConfigError(f"override key {key!r} must be section.key")
    return key, value.strip()


class RunSpec:
    """Parsed command line: command, config path and override pairs."""

    def __init__(self, command, config_path, overrides=(), out=None, extra=()):
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        self.command = command
        self.config_path = config_path
        self.overrides = [parse_override(o) for o in overrides]
        self.out = out
        self.extra = list(extra)


def load_config(path):
    """Read an INI file into ``(base Settings, {curve name: overrides})``."""
    if not os.path.exists(path):
        raise ConfigError(f"config file {path!r} not found")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    base, curves = {}, {}
    for section in cp.sections():
        if section.startswith("curve."):
            pairs = {}
            for k, v in cp.items(section):
                if "." not in k:
                    raise ConfigError(f"[{section}] key {k!r} must be section.key")
                pairs[k] = v
            curves[section[len("curve."):]] = pairs
        else:
            for k, v in cp.items(section):
                base[f"{section}.{k}"] = v
    return Settings(base, path), curves


# ---------------------------------------------------------------------------
# building library objects from settings


def build_signal_set(s):
    kind = s.str("signal.kind", "psk").lower()
    if kind == "psk":
        try:
            return make_mpsk(s.int("signal.M"))
        except ValueError as exc:
            raise ConfigError(f"signal.M: {exc}") from None
    if kind == "file":
        try:
            return read_constellation(s.str("signal.file"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"signal.file: {exc}") from None
    raise ConfigError(f"signal.kind must be 'psk' or 'file', got {kind!r}")


def _scheme(s):
    try:
        return Scheme.parse(s.str("labeling.scheme"))
    except ValueError as exc:
        raise ConfigError(f"labeling.scheme: {exc}") from None


def _labeler(s, scheme):
    overrides = s.str("labeling.tie_overrides", "table").lower()
    if overrides not in ("table", "none"):
        raise ConfigError(f"labeling.tie_overrides must be 'table' or 'none', got {overrides!r}")
    tie_rule = s.str("labeling.tie_rule", "lowest").lower()
    if tie_rule not in ("lowest", "random"):
        raise ConfigError(f"labeling.tie_rule must be 'lowest' or 'random', got {tie_rule!r}")
    return GreedyLabeler(scheme=scheme.value, alpha=s.float("labeling.alpha", 0.1),
                         tie_rule=tie_rule, tie_overrides=None if overrides == "none" else "table",
                         random_state=s.int("labeling.random_state", 0))


def build_profile(s, signal_set):
    """Profile named by ``labeling.profile``: greedy, identity, exhaustive or a CSV path."""
    scheme = _scheme(s)
    source = s.str("labeling.profile", "greedy")
    key = source.lower()
    if key == "greedy":
        return _labeler(s, scheme).fit(signal_set).profile_
    if key == "identity":
        return identity_profile(scheme, signal_set.M)
    if key == "exhaustive":
        if signal_set.M > 8:
            raise PreconditionError("exhaustive search is limited to M <= 8")
        return exhaustive_best(signal_set, scheme, s.float("labeling.alpha", 0.1),
                               workers=s.int("labeling.workers", 1)).profile
    try:
        profile = read_profile_table(source, scheme)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"labeling.profile: {exc}") from None
    if profile.M != signal_set.M:
        raise ConfigError(f"labeling.profile has {profile.M} messages but the signal set has {signal_set.M}")
    return profile


def build_params(s):
    return ChannelParams(sigma_ds_db=s.float("channel.sigma_ds_db"),
                         sigma_rs_db=s.float("channel.sigma_rs_db"),
                         sigma_dr_db=s.float("channel.sigma_dr_db"))


def build_sim_config(s):
    S = build_signal_set(s)
    profile = build_profile(s, S)
    mode = s.str("sim.relay_mode", "realistic").lower()
    decoder = s.str("sim.decoder", "auto").lower()
    if mode not in ("realistic", "genie"):
        raise ConfigError(f"sim.relay_mode must be 'realistic' or 'genie', got {mode!r}")
    if decoder not in ("auto", "near_ml", "ideal_ml"):
        raise ConfigError(f"sim.decoder must be auto, near_ml or ideal_ml, got {decoder!r}")
    relay_set = None
    theta = s.float("sim.relay_rotation", 0.0)
    if theta:
        relay_set = S.rotated(theta)
    try:
        return sim.SimConfig(
            signal_set=S, profile=profile, params=build_params(s), es_grid=s.grid("sim.es_grid"),
            trials_per_point=s.int("sim.trials_per_point"), target_errors=s.optional_int("sim.target_errors"),
            master_seed=s.int("sim.master_seed"), workers=s.int("sim.workers", 1), relay_mode=mode,
            decoder=decoder, noiseless=s.bool("sim.noiseless", False), relay_set=relay_set,
            batch_size=s.int("sim.batch_size", 65536))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def expand_runs(base, curves, overrides):
    """``[(name, Settings)]``: one run per curve section, or the base config alone."""
    if not curves:
        name = base.str("output.name", os.path.splitext(os.path.basename(base.source))[0] or "run")
        return [(name, base.with_overrides(overrides))]
    return [(name, base.with_overrides(list(pairs.items()) + list(overrides)))
            for name, pairs in curves.items()]


def _out_dir(run, s):
    d = run.out or s.str("output.dir", "out")
    os.makedirs(d, exist_ok=True)
    return d


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def effective_config(s):
    return {k: s.values[k].strip() for k in sorted(s.values)}


# ---------------------------------------------------------------------------
# commands


def _summary_lines(ctx):
    d = labeling_min_metric(ctx)
    d0 = labeling_min_metric(ctx.with_profile(identity_profile(ctx.profile.scheme, ctx.signal_set.M)))
    gain = labeling_gain_db(ctx)
    return [f"d(L) = {d:.4f}", f"d(L0) = {d0:.4f}", f"gain = {gain:.4f} dB"]


def cmd_label_search(run, base, curves):
    for name, s in expand_runs(base, curves, run.overrides):
        S = build_signal_set(s)
        scheme = _scheme(s)
        alpha = s.float("labeling.alpha", 0.1)
        method = s.str("labeling.method", "greedy").lower()
        extra = []
        if method == "greedy":
            est = _labeler(s, scheme).fit(S)
            profile = est.profile_
            if not est.exceeded_delta_sq_:
                extra.append(f"note: relay map could not push min m1*m2 above delta^2 = "
                             f"{min_sq_dist(S) ** 2:.4f} after {est.revisions_} revisions")
        elif method == "exhaustive":
            if S.M > 8:
                raise PreconditionError("exhaustive search is limited to M <= 8")
            res = exhaustive_best(S, scheme, alpha, workers=s.int("labeling.workers", 1))
            profile = res.profile
            extra.append(f"candidates = {res.n_candidates}")
        else:
            raise ConfigError(f"labeling.method must be 'greedy' or 'exhaustive', got {method!r}")
        ctx = MetricContext(S, profile, alpha)
        lines = [format_labeling_table(labeling_table(ctx))] + _summary_lines(ctx) + extra
        text = "\n".join(lines) + "\n"
        sys.stdout.write(f"[{name}]\n{text}")
        out = _out_dir(run, s)
        with open(os.path.join(out, f"{name}_profile.csv"), "w") as fh:
            write_profile_table(profile, fh)
        with open(os.path.join(out, f"{name}_constellation.tsv"), "w") as fh:
            write_constellation(S, fh)
        _write(os.path.join(out, f"{name}_table.txt"), text)
    return 0


def cmd_tables(run, base, curves):
    """Labelling table with neighbour sets and worst-case metrics for the chosen profile."""
    for name, s in expand_runs(base, curves, run.overrides):
        S = build_signal_set(s)
        profile = build_profile(s, S)
        ctx = MetricContext(S, profile, s.float("labeling.alpha", 0.1))
        text = "\n".join([format_labeling_table(labeling_table(ctx))] + _summary_lines(ctx)) + "\n"
        sys.stdout.write(f"[{name}]\n{text}")
        _write(os.path.join(_out_dir(run, s), f"{name}_table.txt"), text)
    return 0


def cmd_pep(run, base, curves):
    for name, s in expand_runs(base, curves, run.overrides):
        S = build_signal_set(s)
        profile = build_profile(s, S)
        params = build_params(s)
        grid = s.grid("pep.es_grid") if s.has("pep.es_grid") else s.grid("sim.es_grid")
        names = [b.strip().lower() for b in s.str("pep.bounds", "auto").split(",") if b.strip()]
        ctx = pep.BoundContext(S, profile, params)
        cols = []
        for b in names:
            if b == "auto":
                cols.append(("bound", pep.union_bound(ctx, grid)))
            elif b in pep.BOUNDS:
                if b == "odf" and profile.scheme is not Scheme.ODF:
                    raise ConfigError("pep.bounds 'odf' needs labeling.scheme = odf")
                cols.append((f"{b}_bound", pep.union_bound(ctx, grid, b)))
            else:
                raise ConfigError(f"pep.bounds entries must be auto or one of {sorted(pep.BOUNDS)}, got {b!r}")
        lines = [",".join(["es_db"] + [c for c, _ in cols])]
        for i, es in enumerate(grid):
            lines.append(",".join([f"{es:g}"] + [f"{v[i]:.10e}" for _, v in cols]))
        text = "\n".join(lines) + "\n"
        _write(os.path.join(_out_dir(run, s), f"{name}_bound.csv"), text)
        sys.stdout.write(f"[{name}]\n{text}")
    return 0


def simulate_runs(run, base, curves, write=True):
    """Run every curve of a config; returns ``[(name, BerCurve)]``."""
    results = []
    for name, s in expand_runs(base, curves, run.overrides):
        config = build_sim_config(s)
        t0 = time.perf_counter()
        curve = sim.run_sweep(config, label=name)
        wall = time.perf_counter() - t0
        if write:
            out = _out_dir(run, s)
            with open(os.path.join(out, f"{name}.csv"), "w", newline="") as fh:
                sim.write_curve_csv(curve, fh)
            sim.write_manifest(os.path.join(out, f"{name}.manifest.json"), config, wall,
                               {"effective_config": effective_config(s), "source": base.source})
        results.append((name, curve))
    return results


def cmd_simulate(run, base, curves):
    for name, curve in simulate_runs(run, base, curves):
        sys.stdout.write(f"[{name}]\n" + sim.write_curve_csv(curve))
    return 0


def compare_report(named_curves, ber_target, slope_range=None, pairs=None):
    """Text report of pairwise gaps at ``ber_target`` and optional slopes."""
    lines = [f"gap at BER {ber_target:g} (positive: second curve needs less Es)"]
    if pairs is None:
        pairs = list(itertools.combinations(range(len(named_curves)), 2))
    for i, j in pairs:
        (na, a), (nb, b) = named_curves[i], named_curves[j]
        try:
            lines.append(f"  {na} vs {nb}: {sim.gap_at_ber(a, b, ber_target):.3f} dB")
        except ValueError as exc:
            lines.append(f"  {na} vs {nb}: not available ({exc})")
    if slope_range is not None:
        lo, hi = slope_range
        lines.append(f"slope between {lo:g} and {hi:g} dB")
        for n, c in named_curves:
            try:
                lines.append(f"  {n}: {sim.measure_slope(c, lo, hi):.3f}")
            except (ValueError, KeyError) as exc:
                lines.append(f"  {n}: not available ({exc})")
    return "\n".join(lines) + "\n"


def _parse_pairs(text, names):
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ConfigError(f"compare.pairs entries must be name:name, got {item!r}")
        a, b = (x.strip() for x in item.split(":", 1))
        for x in (a, b):
            if x not in names:
                raise ConfigError(f"compare.pairs names unknown curve {x!r}")
        pairs.append((names.index(a), names.index(b)))
    return pairs


def cmd_compare(run, base, curves):
    """Compare curves from CSV files (positional extras) or by simulating the config's curves."""
    s = base.with_overrides(run.overrides)
    if run.extra:
        named = []
        for path in [run.config_path] + run.extra if run.config_path.endswith(".csv") else run.extra:
            try:
                named.append((os.path.splitext(os.path.basename(path))[0], sim.read_curve_csv(path)))
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read curve {path!r}: {exc}") from None
    else:
        named = simulate_runs(run, base, curves)
    if len(named) < 2:
        raise ConfigError("compare needs two or more curves")
    target = s.float("compare.ber_target", 1e-4)
    slope = None
    if s.has("compare.slope_lo") or s.has("compare.slope_hi"):
        slope = (s.float("compare.slope_lo"), s.float("compare.slope_hi"))
    names = [n for n, _ in named]
    pairs = _parse_pairs(s.str("compare.pairs"), names) if s.has("compare.pairs") else None
    text = compare_report(named, target, slope, pairs)
    sys.stdout.write(text)
    if not run.config_path.endswith(".csv"):
        _write(os.path.join(_out_dir(run, s), f"{s.str('output.name', 'compare')}_report.txt"), text)
    return 0


HANDLERS = {
    "label-search": cmd_label_search,
    "tables": cmd_tables,
    "pep": cmd_pep,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def build_parser():
    p = argparse.ArgumentParser(prog="dfrelay", description="Decode-and-forward relay labelling, bounds and BER simulation.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "label-search": "construct a labelling profile and report d(L), d(L0) and the gain",
        "tables": "print the labelling table of a profile",
        "pep": "write union-bound curves as CSV",
        "simulate": "run BER sweeps and write CSV plus manifest",
        "compare": "report gaps and slopes between curves (CSV files or a config)",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("config", help="INI config (compare also accepts curve CSVs)")
        sp.add_argument("args", nargs="*", help="section.key=value overrides; for compare, extra curve CSVs")
        sp.add_argument("--out", help="output directory (default: output.dir or ./out)")
    return p


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        overrides = [a for a in ns.args if "=" in a]
        extra = [a for a in ns.args if "=" not in a]
        if ns.command == "compare" and ns.config.endswith(".csv"):
            base, curves = Settings({}, ""), {}
            extra = extra or []
            if not extra:
                raise ConfigError("compare needs two or more curves")
        else:
            if extra and ns.command != "compare":
                raise ConfigError(f"unexpected arguments {extra}; overrides must be section.key=value")
            base, curves = load_config(ns.config)
        run = RunSpec(ns.command, ns.config, overrides, ns.out, extra)
        return HANDLERS[ns.command](run, base, curves)
    except ConfigError as exc:
        print(f"dfrelay: config error: {exc}", file=sys.stderr)
        return 1
    except (PreconditionError, sim.InsufficientErrors) as exc:
        print(f"dfrelay: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"dfrelay: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
