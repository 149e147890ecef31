"""Declarative parameter sweeps: config files in, CSV tables out.

A config is flat ``key = value`` text (``#`` comments allowed).  Each
scenario names one way of producing the coherence/phase factors over a
grid of interrogation times or pulse counts; every grid point is pushed
through the channel -> discrimination pipeline and lands as one CSV row.
Rows are pure functions of the config, so output bytes are identical
across runs and worker counts.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import channel, discrim, noise_sim
from .errors import ConfigError, UndefinedConditionalError

#: Coherence floor substituted for an underflowed dephasing factor so the
#: far tail of a sweep stays well-defined (the solver then reports the
#: identical-state limit).
NU_FLOOR = 1e-300

SCENARIOS = (
    "static_single",
    "static_gaussian_single",
    "cpmg_single",
    "static_ensemble",
    "static_ensemble_dq",
    "gaussian_ensemble",
    "cpmg_ensemble",
)

_N_AXIS_SCENARIOS = ("cpmg_single", "cpmg_ensemble")

CSV_HEADER = (
    "axis,nu,mu_abs,mu_arg,c0_max,c1_max,p_inc_opt,"
    "c0_thresh,c1_thresh,p_inc_thresh,helstrom_err,cond_err,rel_err,branch"
)

_KEYS = {
    "scenario": str,
    "b0_uT": float,
    "sigma_b_uT": float,
    "f_MHz": float,
    "kappa_per_us": float,
    "tau_c_us": float,
    "T2_star_us": float,
    "p": float,
    "s": float,
    "T2_us": float,
    "delta_ms": int,
    "eta0": float,
    "p_inc_threshold": float,
    "grid_start": float,
    "grid_stop": float,
    "grid_points": int,
    "grid_scale": str,
    "seed": int,
    "shots": int,
    "n_traj": int,
    "point": float,
    "out": str,
}

_DEFAULT_P = {
    "static_single": 2.0,
    "static_gaussian_single": 2.0,
    "static_ensemble": 1.0,
    "static_ensemble_dq": 1.0,
    "gaussian_ensemble": 1.0,
    "cpmg_ensemble": 1.0,
}

_REQUIRED = {
    "static_single": ("T2_star_us", "b0_uT"),
    "static_gaussian_single": ("T2_star_us", "b0_uT", "sigma_b_uT"),
    "cpmg_single": ("kappa_per_us", "tau_c_us", "f_MHz", "b0_uT"),
    "static_ensemble": ("T2_star_us", "b0_uT"),
    "static_ensemble_dq": ("T2_star_us", "b0_uT"),
    "gaussian_ensemble": ("T2_star_us", "b0_uT", "sigma_b_uT"),
    "cpmg_ensemble": ("T2_us", "s", "f_MHz", "b0_uT"),
}


@dataclass(frozen=True)
class SweepConfig:
    scenario: str
    grid_start: float
    grid_stop: float
    grid_points: int
    grid_scale: str = "lin"
    b0_uT: float = 0.0
    sigma_b_uT: float = 0.0
    f_MHz: float | None = None
    kappa_per_us: float | None = None
    tau_c_us: float | None = None
    T2_star_us: float | None = None
    p: float | None = None
    s: float | None = None
    T2_us: float | None = None
    delta_ms: int | None = None
    eta0: float = 0.5
    p_inc_threshold: float | None = None
    seed: int = 0
    shots: int = 100_000
    n_traj: int = 20_000
    point: float | None = None
    out: str | None = None


@dataclass(frozen=True)
class SweepRow:
    axis: float
    nu: float
    mu_abs: float
    mu_arg: float
    c0_max: float
    c1_max: float
    p_inc_opt: float
    c0_thresh: float | None
    c1_thresh: float | None
    p_inc_thresh: float | None
    helstrom_err: float
    cond_err: float | None
    rel_err: float | None
    branch: str


def parse_config_text(text: str) -> SweepConfig:
    """Parse flat ``key = value`` config text into a validated SweepConfig."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    typed: dict[str, object] = {}
    for key, value in raw.items():
        caster = _KEYS[key]
        try:
            typed[key] = caster(value)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: cannot parse {value!r}") from exc

    for key in ("scenario", "grid_start", "grid_stop", "grid_points"):
        if key not in typed:
            raise ConfigError(f"missing required key {key!r}")
    cfg = SweepConfig(**typed)
    validate_config(cfg)
    return cfg


def load_config(path: str) -> SweepConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def validate_config(cfg: SweepConfig) -> None:
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}")
    for key in _REQUIRED[cfg.scenario]:
        if getattr(cfg, key) is None:
            raise ConfigError(f"scenario {cfg.scenario!r} requires key {key!r}")
    if cfg.grid_scale not in ("lin", "log"):
        raise ConfigError("grid_scale must be 'lin' or 'log'")
    if not cfg.grid_start < cfg.grid_stop:
        raise ConfigError("grid_start must be < grid_stop")
    if cfg.grid_points < 2:
        raise ConfigError("grid_points must be >= 2")
    if cfg.grid_scale == "log" and cfg.grid_start <= 0:
        raise ConfigError("log grid requires grid_start > 0")
    if not 0.0 < cfg.eta0 < 1.0:
        raise ConfigError("eta0 must be in (0, 1)")
    if cfg.p_inc_threshold is not None and not 0.0 <= cfg.p_inc_threshold <= 1.0:
        raise ConfigError("p_inc_threshold must be in [0, 1]")
    if cfg.scenario in _N_AXIS_SCENARIOS:
        if cfg.grid_start < 2:
            raise ConfigError("pulse-count grid must start at >= 2")
    elif cfg.grid_start < 0:
        raise ConfigError("time grid must start at >= 0")
    # Eagerly build the models so bad physics parameters fail with a
    # named error before any worker starts.
    try:
        _models_for(cfg)
    except Exception as exc:  # noqa: BLE001 - rewrap with the scenario name
        raise ConfigError(f"scenario {cfg.scenario!r}: {exc}") from exc


def _models_for(cfg: SweepConfig):
    """(noise model, field model) pair implied by the config."""
    delta_default = 2 if cfg.scenario == "static_ensemble_dq" else 1
    delta_ms = cfg.delta_ms if cfg.delta_ms is not None else delta_default
    p = cfg.p if cfg.p is not None else _DEFAULT_P.get(cfg.scenario, 1.0)

    if cfg.scenario in ("static_single", "static_ensemble", "static_ensemble_dq"):
        if cfg.sigma_b_uT != 0.0:
            raise ConfigError("known-field scenario requires sigma_b_uT = 0")
        noise = channel.NoiseModel(kind="stretched_exp", T2_star=cfg.T2_star_us, p=p)
        field = channel.FieldModel(
            kind="static_known", b0=cfg.b0_uT, delta_ms=delta_ms
        )
    elif cfg.scenario in ("static_gaussian_single", "gaussian_ensemble"):
        noise = channel.NoiseModel(kind="stretched_exp", T2_star=cfg.T2_star_us, p=p)
        field = channel.FieldModel(
            kind="static_gaussian",
            b0=cfg.b0_uT,
            sigma_b=cfg.sigma_b_uT,
            delta_ms=delta_ms,
        )
    elif cfg.scenario == "cpmg_single":
        noise = channel.NoiseModel(
            kind="ou_cpmg", kappa=cfg.kappa_per_us, tau_c=cfg.tau_c_us
        )
        field = channel.FieldModel(
            kind="oscillating_gaussian",
            b0=cfg.b0_uT,
            sigma_b=cfg.sigma_b_uT,
            f=cfg.f_MHz,
            delta_ms=delta_ms,
        )
    else:  # cpmg_ensemble
        noise = channel.NoiseModel(kind="ensemble_cpmg", T2=cfg.T2_us, s=cfg.s, p=p)
        field = channel.FieldModel(
            kind="oscillating_gaussian",
            b0=cfg.b0_uT,
            sigma_b=cfg.sigma_b_uT,
            f=cfg.f_MHz,
            delta_ms=delta_ms,
        )
    return noise, field


def grid_values(cfg: SweepConfig) -> list[float]:
    """Strictly increasing axis values; pulse counts snap to even integers."""
    if cfg.grid_scale == "log":
        values = np.geomspace(cfg.grid_start, cfg.grid_stop, cfg.grid_points)
    else:
        values = np.linspace(cfg.grid_start, cfg.grid_stop, cfg.grid_points)
    if cfg.scenario not in _N_AXIS_SCENARIOS:
        return [float(v) for v in values]
    evens = []
    for v in values:
        n = max(2, int(round(v / 2.0)) * 2)
        if not evens or n > evens[-1]:
            evens.append(n)
    return [float(n) for n in evens]


def factors_at(cfg: SweepConfig, axis_value: float) -> tuple[float, complex]:
    """Coherence and phase factors of one grid point."""
    noise, field = _models_for(cfg)
    if cfg.scenario in _N_AXIS_SCENARIOS:
        n_pulses = int(axis_value)
        mu = channel.mu_cpmg(field, n_pulses)
        if cfg.scenario == "cpmg_single":
            tau = 1.0 / (2.0 * field.f)
            nu = channel.nu_ou(noise.kappa, noise.tau_c, channel.cpmg_switching(n_pulses, tau))
        else:
            nu = channel.nu_ensemble_cpmg(noise, n_pulses, field.f)
    else:
        t = float(axis_value)
        nu = channel.nu_stretched(noise, t)
        mu = channel.mu_static(field, t)
    return nu, mu


def evaluate_point(cfg: SweepConfig, axis_value: float) -> SweepRow:
    nu, mu = factors_at(cfg, axis_value)
    pair = channel.build_state_pair(max(nu, NU_FLOOR), mu, cfg.eta0)
    sol = discrim.solve_max_confidence(pair)
    helstrom = discrim.min_error_probability(pair)

    c0_t = c1_t = p_inc_t = None
    effective = sol.povm
    if cfg.p_inc_threshold is not None:
        capped = discrim.threshold_inconclusive(sol, pair, cfg.p_inc_threshold)
        c0_t, c1_t, p_inc_t = capped.c0, capped.c1, capped.p_inc
        effective = capped.povm

    try:
        cond = discrim.conditional_error(effective, pair)
    except UndefinedConditionalError:
        cond = None
    rel = cond / helstrom if (cond is not None and helstrom > 1e-300) else None

    return SweepRow(
        axis=float(axis_value),
        nu=nu,
        mu_abs=abs(mu),
        mu_arg=math.atan2(mu.imag, mu.real),
        c0_max=sol.c0_max,
        c1_max=sol.c1_max,
        p_inc_opt=sol.p_inc_opt,
        c0_thresh=c0_t,
        c1_thresh=c1_t,
        p_inc_thresh=p_inc_t,
        helstrom_err=helstrom,
        cond_err=cond,
        rel_err=rel,
        branch=sol.branch,
    )


def worker_count() -> int:
    raw = os.environ.get("MCMAG_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError("MCMAG_THREADS must be an integer") from exc
    return max(1, n)


def run_sweep(cfg: SweepConfig) -> list[SweepRow]:
    """Evaluate every grid point; rows come back in grid order."""
    values = grid_values(cfg)
    workers = worker_count()
    if workers == 1:
        return [evaluate_point(cfg, v) for v in values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda v: evaluate_point(cfg, v), values))


def _fmt(x: float | None) -> str:
    return "NA" if x is None else format(x, ".17g")


def rows_to_csv(rows: list[SweepRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    _fmt(r.axis),
                    _fmt(r.nu),
                    _fmt(r.mu_abs),
                    _fmt(r.mu_arg),
                    _fmt(r.c0_max),
                    _fmt(r.c1_max),
                    _fmt(r.p_inc_opt),
                    _fmt(r.c0_thresh),
                    _fmt(r.c1_thresh),
                    _fmt(r.p_inc_thresh),
                    _fmt(r.helstrom_err),
                    _fmt(r.cond_err),
                    _fmt(r.rel_err),
                    r.branch,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_sweep(cfg: SweepConfig, out_path: str | None = None) -> str:
    path = out_path or cfg.out
    if path is None:
        raise ConfigError("no output path: set 'out' in the config")
    csv_text = rows_to_csv(run_sweep(cfg))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text)
    return path


# ---------------------------------------------------------------------------
# Monte Carlo validation report
# ---------------------------------------------------------------------------


def _zline(name: str, analytic: float, observed: float, se: float) -> tuple[str, bool]:
    if se == 0.0:
        z = 0.0 if observed == analytic else math.inf
    else:
        z = (observed - analytic) / se
    ok = abs(z) <= 3.0
    line = (
        f"{name}: analytic={analytic:.9g} observed={observed:.9g} "
        f"std_err={se:.3g} z={z:+.3f} {'PASS' if ok else 'FAIL'}"
    )
    return line, ok


def validate_report(cfg: SweepConfig) -> tuple[str, bool]:
    """Cross-check analytics against the stochastic estimators.

    Dephasing checks run when the scenario carries a correlated-bath
    description (kappa, tau_c); click checks run for every scenario at
    the middle grid point.  A check passes when |z| <= 3.
    """
    lines = [f"validation report: scenario={cfg.scenario} seed={cfg.seed}"]
    all_ok = True
    values = grid_values(cfg)

    noise, field = _models_for(cfg)
    if cfg.kappa_per_us is not None and cfg.tau_c_us is not None:
        kappa, tau_c = cfg.kappa_per_us, cfg.tau_c_us
        if cfg.scenario == "cpmg_single":
            picks = sorted({values[0], values[len(values) // 2], values[-1]})
            for n_val in picks:
                n_pulses = int(n_val)
                tau = 1.0 / (2.0 * field.f)
                switching = channel.cpmg_switching(n_pulses, tau)
                analytic = channel.nu_ou(kappa, tau_c, switching)
                dt = min(tau_c / 50.0, tau / 50.0)
                params = noise_sim.OuParams(
                    kappa=kappa,
                    tau_c=tau_c,
                    dt=dt,
                    T=switching.total_time,
                    seed=cfg.seed,
                    n_traj=cfg.n_traj,
                )
                est = noise_sim.empirical_dephasing(params, switching)
                line, ok = _zline(f"nu_cpmg[N={n_pulses}]", analytic, est.nu_hat, est.std_err)
                lines.append(line)
                all_ok &= ok
        else:
            t_hi = values[-1] if cfg.scenario not in _N_AXIS_SCENARIOS else 1.0
            for t in (0.25 * t_hi, 0.5 * t_hi, t_hi):
                switching = channel.free_decay(t)
                analytic = channel.nu_ou(kappa, tau_c, switching)
                dt = min(tau_c / 50.0, t / 100.0)
                params = noise_sim.OuParams(
                    kappa=kappa,
                    tau_c=tau_c,
                    dt=dt,
                    T=t,
                    seed=cfg.seed,
                    n_traj=cfg.n_traj,
                )
                est = noise_sim.empirical_dephasing(params)
                line, ok = _zline(f"nu_free[T={t:g}]", analytic, est.nu_hat, est.std_err)
                lines.append(line)
                all_ok &= ok
                line, ok = _zline(f"nu_free_imag[T={t:g}]", 0.0, est.imag_hat, est.imag_std_err)
                lines.append(line)
                all_ok &= ok

    mid = values[len(values) // 2]
    nu, mu = factors_at(cfg, mid)
    pair = channel.build_state_pair(max(nu, NU_FLOOR), mu, cfg.eta0)
    sol = discrim.solve_max_confidence(pair)
    tally = noise_sim.simulate_clicks(sol.povm, pair, cfg.shots, cfg.seed)
    est = noise_sim.empirical_confidence(tally)
    lines.append(f"clicks at axis={mid:g}: shots={cfg.shots} branch={sol.branch}")

    # Score-style standard errors: binomial spread at the analytic value,
    # so a zero observed count against a tiny true rate stays a pass.
    def score_se(p_true: float, n: int) -> float:
        return math.sqrt(max(0.0, p_true * (1.0 - p_true)) / n) if n > 0 else 0.0

    counts = tally.counts
    for j, (hat, analytic) in enumerate(
        ((est.c0_hat, sol.c0_max), (est.c1_hat, sol.c1_max))
    ):
        if hat is None:
            continue
        fired = int(counts[0, j] + counts[1, j])
        line, ok = _zline(f"C{j}", analytic, hat, score_se(analytic, fired))
        lines.append(line)
        all_ok &= ok
    line, ok = _zline(
        "P_inc", sol.p_inc_opt, est.p_inc_hat, score_se(sol.p_inc_opt, cfg.shots)
    )
    lines.append(line)
    all_ok &= ok

    lines.append("RESULT: " + ("PASS" if all_ok else "FAIL"))
    return "\n".join(lines) + "\n", all_ok


# ---------------------------------------------------------------------------
# Measurement-dilation report
# ---------------------------------------------------------------------------


def neumark_report(cfg: SweepConfig) -> str:
    """Text dump of the projective extension at one parameter point."""
    from . import dilation as _dilation

    if cfg.point is None:
        raise ConfigError("neumark requires key 'point' (time or pulse count)")
    axis_value = cfg.point
    if cfg.scenario in _N_AXIS_SCENARIOS:
        axis_value = float(max(2, int(round(cfg.point / 2.0)) * 2))
    nu, mu = factors_at(cfg, axis_value)
    pair = channel.build_state_pair(max(nu, NU_FLOOR), mu, cfg.eta0)
    sol = discrim.solve_max_confidence(pair)
    povm = sol.povm
    if cfg.p_inc_threshold is not None:
        povm = discrim.threshold_inconclusive(sol, pair, cfg.p_inc_threshold).povm
    dil = _dilation.dilate_povm(povm)
    factors = _dilation.decompose_two_level(dil.u)
    residual = _dilation.born_residual(dil, povm, (pair.rho0, pair.rho1))
    unit_dev = float(np.max(np.abs(dil.u.conj().T @ dil.u - np.eye(3))))

    def mat_lines(name: str, m: np.ndarray) -> list[str]:
        out = [f"{name}:"]
        for row in m:
            out.append("  " + "  ".join(f"{z.real:+.17g}{z.imag:+.17g}j" for z in row))
        return out

    lines = [
        f"neumark dump: scenario={cfg.scenario} axis={axis_value:g}",
        f"nu={nu:.17g} mu={mu.real:+.17g}{mu.imag:+.17g}j eta0={cfg.eta0:g}",
        f"branch={sol.branch} C0={sol.c0_max:.17g} C1={sol.c1_max:.17g} "
        f"P_inc={sol.p_inc_opt:.17g}",
    ]
    for name, op in zip(("Pi0", "Pi1", "Pi_inc"), povm.operators()):
        lines.extend(mat_lines(name, op))
    lines.append(
        "ancilla coefficients: "
        f"c0={dil.c0.real:+.17g}{dil.c0.imag:+.17g}j "
        f"c1={dil.c1.real:+.17g}{dil.c1.imag:+.17g}j "
        f"c_inc={dil.c2.real:+.17g}{dil.c2.imag:+.17g}j"
    )
    lines.extend(mat_lines("U", dil.u))
    lines.append(f"two-level factors: {len(factors)}")
    for i, f in enumerate(factors):
        lines.extend(mat_lines(f"factor[{i}]", f))
    lines.append(f"born_residual={residual:.3e}")
    lines.append(f"unitarity_residual={unit_dev:.3e}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV -> SVG rendering
# ---------------------------------------------------------------------------

_PLOT_COLUMNS = (
    ("c0_max", "#c0392b"),
    ("c1_max", "#2980b9"),
    ("p_inc_opt", "#7f8c8d"),
    ("c0_thresh", "#e67e22"),
    ("c1_thresh", "#16a085"),
)


def plot_csv(csv_text: str, title: str = "") -> str:
    """Render probability columns of a sweep CSV as a standalone SVG."""
    lines = [ln for ln in csv_text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("axis,"):
        raise ConfigError("not a sweep CSV (missing header)")
    header = lines[0].split(",")
    idx = {name: i for i, name in enumerate(header)}
    rows = [ln.split(",") for ln in lines[1:]]
    if not rows:
        raise ConfigError("CSV has no data rows")
    xs = [float(r[idx["axis"]]) for r in rows]
    x_lo, x_hi = min(xs), max(xs)
    span = (x_hi - x_lo) or 1.0

    width, height = 800.0, 520.0
    ml, mr, mt, mb = 60.0, 20.0, 30.0, 40.0

    def to_xy(x: float, y: float) -> tuple[float, float]:
        px = ml + (x - x_lo) / span * (width - ml - mr)
        py = mt + (1.0 - y) * (height - mt - mb)
        return px, py

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" '
        f'height="{height:g}" viewBox="0 0 {width:g} {height:g}">',
        f'<rect width="{width:g}" height="{height:g}" fill="white"/>',
    ]
    ax_x0, ax_y0 = to_xy(x_lo, 0.0)
    ax_x1, ax_y1 = to_xy(x_hi, 1.0)
    parts.append(
        f'<rect x="{ax_x0:.2f}" y="{ax_y1:.2f}" width="{ax_x1 - ax_x0:.2f}" '
        f'height="{ax_y0 - ax_y1:.2f}" fill="none" stroke="#333" stroke-width="1"/>'
    )
    for column, color in _PLOT_COLUMNS:
        if column not in idx:
            continue
        pts = []
        for r, x in zip(rows, xs):
            cell = r[idx[column]]
            if cell == "NA":
                continue
            px, py = to_xy(x, float(cell))
            pts.append(f"{px:.2f},{py:.2f}")
        if len(pts) >= 2:
            parts.append(
                f'<polyline points="{" ".join(pts)}" fill="none" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
    label = title or "probability vs axis"
    parts.append(
        f'<text x="{ml:.0f}" y="20" font-family="monospace" font-size="13">'
        f"{label} [{x_lo:g} .. {x_hi:g}]</text>"
    )
    legend_y = 36.0
    for column, color in _PLOT_COLUMNS:
        if column not in idx:
            continue
        parts.append(
            f'<text x="{width - 180:.0f}" y="{legend_y:.0f}" fill="{color}" '
            f'font-family="monospace" font-size="12">{column}</text>'
        )
        legend_y += 14.0
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def shipped_config(path: str, **overrides) -> SweepConfig:
    """Load a config file and apply keyword overrides (tests use this)."""
    cfg = load_config(path)
    if overrides:
        cfg = replace(cfg, **overrides)
        validate_config(cfg)
    return cfg
