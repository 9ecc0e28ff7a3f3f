"""Named sweep presets, the sweep runner and its file outputs.

A preset fixes a system (map or stadium), a discretisation and a list of
noise amplitudes.  :func:`run_preset` measures ``||rho_eps - rho_0||_1`` at
every amplitude with one of three methods and fits power laws:

``operator``    eigenvectors of the discretised transfer operators
``histogram``   visit frequencies of long noisy orbits (quadratic map)
``observable``  the signed-indicator lower bound (stadium)

Overrides are flat ``key = value`` pairs; :data:`CONFIG_KEYS` lists them.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .billiard import StadiumGeometry
from .eigen import DEFAULT_MAX_ITER, DEFAULT_TOL, STRATEGIES, dominant_eigenpair
from .errors import (InsufficientDataError, NonConvergenceError, NumericError,
                     ParameterError)
from .grid import build_grid, l1_distance
from .maps import MISIUREWICZ_A, MISIUREWICZ_A2, make_map
from .montecarlo import (DEFAULT_BURN_IN, REFERENCE_SAMPLES, StadiumObservable,
                         histogram_invariant, histogram_std, l1_from_histograms,
                         stadium_phi)
from .scaling import (fit_power_law, gamma_error_from_counting,
                      gamma_error_from_value_errors)
from .transfer import (NoiseKernel, NoisyOperator, averaging_operator,
                       heuristic_deviation, transfer_operator)

__all__ = [
    "PRESETS",
    "CONFIG_KEYS",
    "CSV_HEADER",
    "ExperimentConfig",
    "SweepRow",
    "SweepResult",
    "run_preset",
    "emit_outputs",
    "parse_config_file",
    "parse_assignment",
    "histogram_heuristic",
    "build_operator_grid",
    "read_sweep_csv",
    "fit_rows",
]

CSV_HEADER = "eps,l1_rho,err_rho,l1_heuristic,err_heuristic,method,status"

# value type of every recognised override
CONFIG_KEYS = {
    "map.a": float,
    "map.alpha": float,
    "grid.n": int,
    "grid.kind": str,
    "grid.offset": float,
    "eps.lo": float,          # log10
    "eps.hi": float,          # log10
    "eps.count": int,
    "eps.list": "floats",
    "fit.range.lo": float,    # log10
    "fit.range.hi": float,    # log10
    "eigen.tol": float,
    "eigen.max_iter": int,
    "eigen.strategy": str,
    "heuristic.steps": int,
    "err.refine": bool,
    "mc.steps": int,
    "mc.burn_in": int,
    "mc.bins": int,
    "mc.seed": int,
    "mc.chunks": int,
    "mc.reference": int,
    "stadium.half_width": float,
    "stadium.radius": float,
    "stadium.depth": int,
    "workers": int,
}


def _operator_preset(map_name, params, n, kind, noise, lo, hi, strategy="power",
                     offset=0.0):
    return {
        "method": "operator", "map": map_name, "map.params": params,
        "noise": noise, "grid.n": n, "grid.kind": kind, "grid.offset": offset,
        "eps.lo": lo, "eps.hi": hi, "eps.count": 12,
        "fit.range.lo": lo, "fit.range.hi": hi,
        "eigen.strategy": strategy,
    }


def _histogram_preset(a, lo, hi):
    return {
        "method": "histogram", "map": "quadratic", "map.params": {"a": a},
        "noise": "symmetric-uniform", "mc.bins": 1 << 12, "mc.steps": 10 ** 8,
        "mc.chunks": 8, "eps.lo": lo, "eps.hi": hi, "eps.count": 12,
        "fit.range.lo": lo, "fit.range.hi": hi,
    }


PRESETS = {
    "map1": _operator_preset("smooth-expanding", {"a": 0.15}, 4000, "uniform",
                             "symmetric-uniform", -2.5, -1.0),
    "map2": _operator_preset("piecewise", {}, 5000, "uniform",
                             "symmetric-uniform", -3.0, -1.0, offset=0.5),
    "map3": _histogram_preset(MISIUREWICZ_A, -4.0, -2.5),
    "map3+": _histogram_preset(MISIUREWICZ_A2, -4.0, -3.0),
    "map4-a03": _operator_preset("neutral", {"alpha": 0.3}, 4000, "graded",
                                 "one-sided-uniform", -4.0, -1.5, "auto"),
    "map4-a05": _operator_preset("neutral", {"alpha": 0.5}, 4000, "graded",
                                 "one-sided-uniform", -4.0, -1.5, "auto"),
    "map4-a07": _operator_preset("neutral", {"alpha": 0.7}, 4000, "graded",
                                 "one-sided-uniform", -4.0, -1.5, "auto"),
    "stadium": {
        "method": "observable", "mc.steps": 10 ** 8, "mc.chunks": 1,
        "stadium.half_width": 1.0, "stadium.radius": 1.0, "stadium.depth": 4,
        "eps.lo": -2.0, "eps.hi": -1.0, "eps.count": 10,
        "fit.range.lo": -2.0, "fit.range.hi": -1.0,
    },
}

_COMMON = {
    "eigen.tol": DEFAULT_TOL, "eigen.max_iter": DEFAULT_MAX_ITER,
    "eigen.strategy": "power", "heuristic.steps": 1, "err.refine": True,
    "mc.burn_in": DEFAULT_BURN_IN, "mc.seed": 0, "mc.chunks": 1,
    "mc.reference": REFERENCE_SAMPLES, "grid.offset": 0.0, "workers": 1,
}


# --- configuration -----------------------------------------------------------

def _convert(key, raw):
    if key not in CONFIG_KEYS:
        raise ParameterError(f"unknown config key {key!r}")
    kind = CONFIG_KEYS[key]
    if not isinstance(raw, str):
        if kind == "floats":
            return tuple(float(v) for v in raw)
        if kind is bool:
            return bool(raw)
        if kind is int and isinstance(raw, float) and not raw.is_integer():
            raise ParameterError(f"{key} expects an integer, got {raw!r}")
        return kind(raw)
    text = raw.strip()
    try:
        if kind == "floats":
            return tuple(float(v) for v in text.replace(",", " ").split())
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            v = float(text)
            if not v.is_integer():
                raise ValueError(text)
            return int(v)
        return kind(text)
    except ValueError:
        raise ParameterError(f"bad value {raw!r} for {key}") from None


def parse_assignment(text):
    """Split ``key=value`` (or ``key = value``) and type-check the value."""
    if "=" not in text:
        raise ParameterError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    key = key.strip()
    return key, _convert(key, value)


def parse_config_file(path):
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                key, value = parse_assignment(line)
            except ParameterError as exc:
                raise ParameterError(f"{path}:{lineno}: {exc}") from None
            out[key] = value
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str
    overrides: dict = field(default_factory=dict)
    output_dir: str | None = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ParameterError(
                f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        checked = {k: _convert(k, v) for k, v in self.overrides.items()}
        object.__setattr__(self, "overrides", checked)

    def settings(self):
        s = dict(_COMMON)
        s.update(PRESETS[self.preset])
        s["map.params"] = dict(s.get("map.params", {}))
        for key, value in self.overrides.items():
            if key == "map.a" or key == "map.alpha":
                s["map.params"][key[4:]] = value
            else:
                s[key] = value
        if self.overrides.keys() & {"eps.lo", "eps.hi"}:
            for end in ("lo", "hi"):
                if f"fit.range.{end}" not in self.overrides:
                    s[f"fit.range.{end}"] = s[f"eps.{end}"]
        _validate(s)
        return s

    def eps_values(self):
        s = self.settings()
        if "eps.list" in s:
            eps = np.array(s["eps.list"], dtype=float)
        else:
            eps = np.logspace(s["eps.lo"], s["eps.hi"], s["eps.count"])
        return [float(e) for e in eps]


def _validate(s):
    if s.get("eps.list") is not None:
        eps = s["eps.list"]
        if len(set(eps)) != len(eps):
            raise ParameterError("eps.list repeats a value")
        if any(not (e >= 0.0 and math.isfinite(e)) for e in eps):
            raise ParameterError("eps values must be finite and >= 0")
    elif s["eps.count"] < 1 or s["eps.lo"] > s["eps.hi"]:
        raise ParameterError("need eps.count >= 1 and eps.lo <= eps.hi")
    if s["fit.range.lo"] > s["fit.range.hi"]:
        raise ParameterError("fit.range.lo exceeds fit.range.hi")
    if s["workers"] < 1:
        raise ParameterError("workers must be >= 1")
    if s["eigen.strategy"] not in STRATEGIES:
        raise ParameterError(f"eigen.strategy must be one of {STRATEGIES}")
    if s["heuristic.steps"] < 1:
        raise ParameterError("heuristic.steps must be >= 1")
    for key in ("mc.steps", "mc.bins", "mc.chunks", "grid.n"):
        if key in s and s[key] < 1:
            raise ParameterError(f"{key} must be positive")
    if s["mc.burn_in"] < 0:
        raise ParameterError("mc.burn_in must be >= 0")


# --- results -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    eps: float
    l1_rho: float
    err_rho: float
    l1_heuristic: float = math.nan
    err_heuristic: float = math.nan
    method: str = "operator"
    status: str = "ok"

    @property
    def converged(self):
        return self.status in ("ok", "low-signal")


@dataclass(frozen=True)
class SweepResult:
    preset: str
    rows: tuple
    fits: dict
    settings: dict = field(default_factory=dict, repr=False)

    @property
    def eps(self):
        return [r.eps for r in self.rows]


def _fit_column(rows, column, lo, hi, counting=None):
    pts = []
    for r in rows:
        v = getattr(r, f"l1_{column}")
        e = getattr(r, f"err_{column}")
        if r.converged and r.eps > 0.0 and v > 0.0 and math.isfinite(v):
            pts.append((r.eps, v, e if math.isfinite(e) else 0.0))
    rng = (10.0 ** lo, 10.0 ** hi)
    try:
        fit = fit_power_law(pts, rng)
    except (InsufficientDataError, ParameterError):
        return None
    if counting is not None:
        bins, steps = counting
        dg = gamma_error_from_counting(fit.points, bins, steps, rng)
    else:
        logs = [(e, v, _log_err(v, err)) for e, v, err in fit.points]
        dg = gamma_error_from_value_errors(logs, rng)
    return replace(fit, delta_gamma=dg)


def _log_err(v, err):
    """Absolute error of ``log10 v`` for an absolute error ``err`` of ``v``."""
    return math.log10(1.0 + err / v) if err > 0.0 else 0.0


# --- operator pipeline -------------------------------------------------------

def build_operator_grid(m, n, kind="uniform", offset=0.0):
    if kind == "graded":
        return build_grid("graded", n, m.domain, m.periodic, alpha=m.alpha or 0.5)
    if kind != "uniform":
        raise ParameterError(f"grid.kind must be uniform or graded, not {kind!r}")
    return build_grid("uniform", n, m.domain, m.periodic, offset=offset)


class _OperatorSolver:
    """Fixed point and noisy fixed points of one map on one grid."""

    def __init__(self, m, n, s):
        self.grid = build_operator_grid(m, n, s["grid.kind"], s["grid.offset"])
        self.T = transfer_operator(m, self.grid)
        self.noise = s["noise"]
        self.kw = dict(tol=s["eigen.tol"], max_iter=s["eigen.max_iter"],
                       strategy=s["eigen.strategy"])
        self.steps = s["heuristic.steps"]
        self.rho0 = dominant_eigenpair(self.T, **self.kw).density

    def measure(self, eps):
        G = averaging_operator(NoiseKernel(self.noise, eps), self.grid)
        heur = heuristic_deviation(self.T, G, self.rho0, self.steps)
        if eps == 0.0:
            return 0.0, heur
        res = dominant_eigenpair(NoisyOperator(self.T, G), init=self.rho0, **self.kw)
        return l1_distance(res.density, self.rho0), heur


def _sub_seed(seed, i):
    """Independent integer seed for sweep point ``i``."""
    return int(np.random.SeedSequence([seed, i]).generate_state(1, np.uint64)[0] >> 1)


def _operator_rows(s, eps_list, pool):
    m = make_map(s["map"], **s["map.params"])
    fine = _OperatorSolver(m, s["grid.n"], s)
    coarse = None
    if s["err.refine"]:
        try:
            coarse = _OperatorSolver(m, max(s["grid.n"] // 2, 8), s)
        except NonConvergenceError:
            coarse = None

    def one(eps):
        try:
            l1, heur = fine.measure(eps)
        except NumericError as exc:
            return SweepRow(eps, math.nan, math.nan, method="operator",
                            status=f"failed:{type(exc).__name__}")
        err_l1 = err_h = math.nan
        if coarse is not None:
            try:
                c_l1, c_h = coarse.measure(eps)
                err_l1, err_h = abs(l1 - c_l1), abs(heur - c_h)
            except NumericError:
                pass
        return SweepRow(eps, l1, err_l1, heur, err_h, "operator", "ok")

    return list(pool.map(one, eps_list))


# --- histogram pipeline ------------------------------------------------------

def histogram_heuristic(h, eps):
    """``sum_i |(G_eps p)_i - p_i|`` for the piecewise-constant density of ``h``.

    The averaged density is integrated exactly over every bin through the
    twice-integrated distribution function of the histogram.
    """
    if eps == 0.0:
        return 0.0
    edges = h.edges
    width = (h.hi - h.lo) / h.bins
    cdf = np.concatenate([[0.0], np.cumsum(h.p_hat)])
    # Q(x) = int_lo^x F, exact on the knots; linear F inside each bin
    q_knots = np.concatenate([[0.0], np.cumsum(0.5 * width * (cdf[1:] + cdf[:-1]))])

    def Q(x):
        x = np.asarray(x, dtype=float)
        below = x <= h.lo
        above = x >= h.hi
        xc = np.clip(x, h.lo, h.hi)
        k = np.clip(((xc - h.lo) / width).astype(np.int64), 0, h.bins - 1)
        t = xc - edges[k]
        f0 = cdf[k]
        slope = (cdf[k + 1] - cdf[k]) / width
        inside = q_knots[k] + f0 * t + 0.5 * slope * t * t
        return np.where(below, 0.0,
                        np.where(above, q_knots[-1] + cdf[-1] * (x - h.hi), inside))

    a, b = edges[:-1], edges[1:]
    smoothed = (Q(b + eps) - Q(a + eps) - Q(b - eps) + Q(a - eps)) / (2.0 * eps)
    return float(np.abs(smoothed - h.p_hat).sum())


def _histogram_rows(s, eps_list, pool):
    m = make_map(s["map"], **s["map.params"])
    args = dict(bins=s["mc.bins"], steps=s["mc.steps"], burn_in=s["mc.burn_in"],
                chains=s["mc.chunks"])
    seed = s["mc.seed"]
    h0 = histogram_invariant(m, NoiseKernel(s["noise"], 0.0), seed=seed, **args)
    _, bound = histogram_std(h0)

    def one(item):
        i, eps = item
        if eps == 0.0:
            return SweepRow(0.0, 0.0, 0.0, 0.0, 0.0, "histogram", "ok")
        h = histogram_invariant(m, NoiseKernel(s["noise"], eps),
                                seed=_sub_seed(seed, i + 1), **args)
        return SweepRow(eps, l1_from_histograms(h, h0), bound,
                        histogram_heuristic(h0, eps), bound, "histogram", "ok")

    return list(pool.map(one, enumerate(eps_list)))


# --- observable pipeline -----------------------------------------------------

def _observable_rows(s, eps_list, pool):
    import warnings

    from .montecarlo import LowSignalWarning

    geom = StadiumGeometry(s["stadium.half_width"], s["stadium.radius"])

    def one(item):
        i, eps = item
        obs = StadiumObservable(eps, s["stadium.depth"])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LowSignalWarning)
            est = stadium_phi(geom, obs, eps, s["mc.steps"], s["mc.burn_in"],
                              seed=_sub_seed(s["mc.seed"], i), chunks=s["mc.chunks"],
                              reference_samples=s["mc.reference"])
        status = "low-signal" if est.low_signal and eps > 0.0 else "ok"
        return SweepRow(eps, est.value, est.std_error, method="observable",
                        status=status)

    return list(pool.map(one, enumerate(eps_list)))


_PIPELINES = {
    "operator": _operator_rows,
    "histogram": _histogram_rows,
    "observable": _observable_rows,
}


def run_preset(cfg):
    """Run the sweep described by ``cfg`` and fit both curves.

    Rows whose eigensolve fails are kept with a ``failed:...`` status; when
    every row fails (or the noiseless fixed point itself cannot be found)
    :class:`NonConvergenceError` is raised.  Outputs are written when
    ``cfg.output_dir`` is set.
    """
    s = cfg.settings()
    eps_list = cfg.eps_values()
    with ThreadPoolExecutor(max_workers=s["workers"]) as pool:
        rows = _PIPELINES[s["method"]](s, eps_list, pool)
    rows = sorted(rows, key=lambda r: r.eps)
    if rows and not any(r.converged for r in rows):
        raise NonConvergenceError(f"{cfg.preset}: every sweep point failed")
    counting = (s["mc.bins"], s["mc.steps"]) if s["method"] == "histogram" else None
    lo, hi = s["fit.range.lo"], s["fit.range.hi"]
    fits = {"rho": _fit_column(rows, "rho", lo, hi, counting)}
    if s["method"] != "observable":
        fits["heuristic"] = _fit_column(rows, "heuristic", lo, hi, counting)
    result = SweepResult(cfg.preset, tuple(rows), fits, s)
    if cfg.output_dir is not None:
        emit_outputs(result, cfg.output_dir)
    return result


# --- outputs -----------------------------------------------------------------

def _num(v):
    return "nan" if not math.isfinite(v) else f"{v:.17g}"


def _csv_text(result):
    lines = [CSV_HEADER]
    for r in result.rows:
        lines.append(",".join([_num(r.eps), _num(r.l1_rho), _num(r.err_rho),
                               _num(r.l1_heuristic), _num(r.err_heuristic),
                               r.method, r.status]))
    return "\n".join(lines) + "\n"


def _fit_text(result):
    lines = [f"preset = {result.preset}"]
    for name, fit in result.fits.items():
        if fit is None:
            continue
        lines += [f"{name}.gamma = {fit.gamma:.17g}",
                  f"{name}.intercept = {fit.intercept:.17g}",
                  f"{name}.delta_gamma = {fit.delta_gamma:.17g}",
                  f"{name}.points = {len(fit.points)}"]
    lo, hi = result.settings.get("fit.range.lo"), result.settings.get("fit.range.hi")
    if lo is not None:
        lines += [f"fit.range.lo = {lo:.17g}", f"fit.range.hi = {hi:.17g}"]
    return "\n".join(lines) + "\n"


def _plot_text(result):
    # bars with end caps plus a zero-length bar whose cap marks the value
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        "set format xy '10^{%L}'",
        "set xlabel 'eps'",
        "set ylabel 'L1 distance'",
        "set key top left",
        "set bars 2",
        "set terminal pngcairo size 800,600",
        "set output 'sweep.png'",
    ]
    plots = []
    for lc, (col, ecol, name) in enumerate(((2, 3, "rho"), (4, 5, "heuristic")), 1):
        if name not in result.fits:
            continue
        sel = f"(stringcolumn(7) eq 'ok' || stringcolumn(7) eq 'low-signal' ? ${col} : NaN)"
        plots.append(f"'sweep.csv' every ::1 using 1:{sel}:(${col}-${ecol}):(${col}+${ecol}) "
                     f"with yerrorbars pt 0 lc {lc} title '{name}'")
        plots.append(f"'' every ::1 using 1:{sel}:{sel}:{sel} with yerrorbars pt 0 "
                     f"lc {lc} notitle")
        fit = result.fits[name]
        if fit is not None:
            lines.append(f"f_{name}(x) = 10**({fit.intercept:.17g}) * x**({fit.gamma:.17g})")
            plots.append(f"f_{name}(x) dt 2 lc {lc} "
                         f"title sprintf('slope %.3f', {fit.gamma:.6g})")
    if plots:
        lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def emit_outputs(result, directory):
    """Write ``sweep.csv``, ``fit.txt`` and ``plot.gp`` into ``directory``.

    An empty result gives a header-only CSV and no fit summary.  Returns the
    written paths.
    """
    paths = []
    try:
        os.makedirs(directory, exist_ok=True)
        files = [("sweep.csv", _csv_text(result))]
        if result.rows and any(f is not None for f in result.fits.values()):
            files.append(("fit.txt", _fit_text(result)))
        if result.rows:
            files.append(("plot.gp", _plot_text(result)))
        for name, text in files:
            path = os.path.join(directory, name)
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            paths.append(path)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write outputs: {exc.strerror}",
                      exc.filename or directory) from exc
    return paths


def read_sweep_csv(path):
    """Rows of a ``sweep.csv`` file as :class:`SweepRow` objects."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ParameterError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise ParameterError(f"{path}:{lineno}: expected 7 fields")
            try:
                nums = [float(p) for p in parts[:5]]
            except ValueError:
                raise ParameterError(f"{path}:{lineno}: bad number") from None
            rows.append(SweepRow(*nums, parts[5], parts[6]))
    return rows


def fit_rows(rows, lo, hi, column="rho"):
    """Power-law fit of one CSV column over ``[10^lo, 10^hi]``."""
    if column not in ("rho", "heuristic"):
        raise ParameterError("column must be 'rho' or 'heuristic'")
    fit = _fit_column(rows, column, lo, hi)
    if fit is None:
        raise InsufficientDataError(
            f"fewer than 3 usable {column} points in [1e{lo}, 1e{hi}]")
    return fit


