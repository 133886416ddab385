"""Simulate-and-fit identification of the uncertain plant parameters.

The measured channels live at the steam header downstream of the boiler, so
the model is first adapted: the boiler steam outflow is eliminated through
the header mass balance and the header pressure becomes the output. The fit
minimizes the summed per-sample output error over theta = (header volume,
boiler-exit area, header area, burner efficiency, heat-transfer coefficient)
plus the uncertain initial temperatures, with a box-projected simplex search
and several multistarts. A periodogram utility reports the persistent-
excitation content of an input record.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from . import plant
from .errors import IdentificationError, NumericalError, ValidationError
from .plant import IL_W, IT_W

TAU_ID = 10.0  # s, datalogger sampling time

THETA_NAMES = ("V_H", "A_B", "A_H", "eta_B", "beta")


def apply_theta(params, theta):
    """Plant parameters with the uncertain subset replaced."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (5,):
        raise ValidationError("theta must have 5 entries")
    return replace(params, V_H=theta[0], A_B=theta[1], A_H=theta[2],
                   eta_B=theta[3], beta=theta[4])


def theta_of(params):
    return np.array([params.V_H, params.A_B, params.A_H, params.eta_B,
                     params.beta])


@dataclass
class IdDataset:
    """Uniformly sampled header measurements and model inputs.

    u_meas rows are (q_f, q_g_B, q_s_H) [kg/s]; y_meas is the header
    pressure [Pa]; l0 is the measured initial level [m] (the level sensor
    exists on the plant, so it is not a fitted initial state).
    """

    u_meas: np.ndarray
    y_meas: np.ndarray
    tau_id: float = TAU_ID
    l0: float = 0.7

    def __post_init__(self):
        self.u_meas = np.atleast_2d(np.asarray(self.u_meas, dtype=float))
        self.y_meas = np.asarray(self.y_meas, dtype=float)
        if self.u_meas.shape[1] != 3:
            raise ValidationError("u_meas needs columns (q_f, q_g_B, q_s_H)")
        if len(self.y_meas) != len(self.u_meas):
            raise ValidationError("input/output sample counts differ")
        if len(self.y_meas) < 100:
            raise ValidationError("dataset too short (N >= 100 required)")
        if self.tau_id <= 0:
            raise ValidationError("sampling time must be positive")

    def __len__(self):
        return len(self.y_meas)


@dataclass(frozen=True)
class ThetaBounds:
    """Box bounds on theta; efficiencies strictly below one."""

    lower: np.ndarray = field(default_factory=lambda: np.array(
        [0.2, 5e-4, 5e-4, 0.5, 5e3]))
    upper: np.ndarray = field(default_factory=lambda: np.array(
        [3.0, 8e-3, 1e-2, 0.995, 4e4]))

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (5,) or hi.shape != (5,):
            raise ValidationError("bounds must have 5 entries")
        if np.any(lo <= 0):
            raise ValidationError("all parameters are positive quantities")
        if np.any(lo >= hi):
            raise ValidationError("lower bounds must be below upper bounds")
        if hi[3] >= 1.0:
            raise ValidationError("efficiency must stay strictly below one")

    def project(self, theta):
        return np.clip(theta, self.lower, self.upper)

    def sample(self, rng):
        return rng.uniform(self.lower, self.upper)


def simulate_tilde(theta, x0, u_seq, params=None, tau_id=TAU_ID,
                   substeps=1):
    """Header-pressure trajectory of the adapted model.

    Zero-order-hold inputs per sample interval; the output at sample h is
    the header pressure at the end of interval h under its input. Raises
    NumericalError naming the failing time on integration blow-up.
    """
    params = apply_theta(params or plant.nominal_params(), theta)
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    x = np.asarray(x0, dtype=float).copy()
    y = np.zeros(len(u_seq))
    for h, u_t in enumerate(u_seq):
        try:
            x = plant.rk4_step_generic(
                lambda xs, us: plant.tilde_rhs(xs, us, params), x, u_t,
                tau_id, substeps)
            if not np.all(np.isfinite(x)):
                raise NumericalError(f"integration blew up at t="
                                     f"{(h + 1) * tau_id:.1f} s")
            q_s_B = plant.header_outflow(x, u_t, params)
            y[h] = plant.header_pressure(x, max(q_s_B, 0.0),
                                         max(u_t[2], 0.0), params)
        except (ValueError, FloatingPointError) as exc:
            raise NumericalError(f"simulation failed at t="
                                 f"{(h + 1) * tau_id:.1f} s: {exc}") from None
    return y


def _objective(ds, params, theta, T_tg0, T_w0):
    x0 = np.array([T_tg0, ds.l0, T_w0, T_w0])
    try:
        y = simulate_tilde(theta, x0, ds.u_meas, params, ds.tau_id)
    except NumericalError:
        return np.inf
    return float(np.sum(np.abs(y - ds.y_meas)))


@dataclass
class FitResult:
    theta: np.ndarray
    x0: np.ndarray
    residual: float
    history: list
    starts: list


def fit_parameters(ds, bounds=None, theta_init=None, params=None,
                   n_starts=8, seed=0, maxfev=300, restarts=2,
                   T_w0_bounds=(280.0, 470.0)):
    """Fit theta and the uncertain initial temperatures to a dataset.

    Box-projected Nelder-Mead from ``n_starts`` points (the given init plus
    seeded samples of the bound box); each start runs ``restarts`` simplex
    rounds (a restart re-expands a collapsed simplex), and the global best
    receives one final polishing round. Returns the best fit with the
    accepted-residual history (monotone nonincreasing best-so-far).
    Raises IdentificationError when every start fails.
    """
    bounds = bounds or ThetaBounds()
    params = params or plant.nominal_params()
    rng = np.random.default_rng(seed)
    if theta_init is None:
        theta_init = 0.5 * (bounds.lower + bounds.upper)
    theta_init = bounds.project(np.asarray(theta_init, dtype=float))

    # Initial temperature guesses anchored to the first pressure sample.
    from . import thermo
    T_guess = thermo.T_sat(float(np.clip(ds.y_meas[0], thermo.p_sat(274.0),
                                         thermo.p_sat(599.0))))
    lo = np.concatenate([bounds.lower, [T_w0_bounds[0], T_w0_bounds[0]]])
    hi = np.concatenate([bounds.upper, [600.0, T_w0_bounds[1]]])

    history = []
    best = None
    starts = []

    def wrapped(z):
        v = lo + np.clip(z, 0.0, 1.0) * (hi - lo)
        r = _objective(ds, params, v[:5], v[5], v[6])
        if np.isfinite(r) and (not history or r < history[-1]):
            history.append(r)
        return r

    def nm_rounds(z0, rounds, budget):
        z = np.clip(z0, 0.0, 1.0)
        fun = np.inf
        for _ in range(rounds):
            res = minimize(wrapped, z, method="Nelder-Mead",
                           options={"maxfev": budget, "xatol": 1e-7,
                                    "fatol": 1e-10, "adaptive": True})
            z, fun = np.clip(res.x, 0.0, 1.0), float(res.fun)
        return z, fun

    for s in range(n_starts):
        if s == 0:
            theta0 = theta_init
        else:
            theta0 = bounds.sample(rng)
        T_w0 = float(np.clip(T_guess + rng.normal(0, 5.0) * (s > 0),
                             *T_w0_bounds))
        T_tg0 = T_w0 + abs(rng.normal(20.0, 10.0))
        z0 = (np.concatenate([theta0, [T_tg0, T_w0]]) - lo) / (hi - lo)
        z, fun = nm_rounds(z0, restarts, maxfev)
        v = lo + z * (hi - lo)
        starts.append({"theta": v[:5], "T_tg0": v[5], "T_w0": v[6],
                       "residual": fun, "z": z})
        if np.isfinite(fun) and (best is None or fun < best["residual"]):
            best = starts[-1]
    if best is None or not np.isfinite(best["residual"]):
        raise IdentificationError("all multistarts diverged")
    # polish the global best
    z, fun = nm_rounds(best["z"], restarts, 2 * maxfev)
    if fun < best["residual"]:
        v = lo + z * (hi - lo)
        best = {"theta": v[:5], "T_tg0": v[5], "T_w0": v[6],
                "residual": fun, "z": z}
    x0 = np.array([best["T_tg0"], ds.l0, best["T_w0"], best["T_w0"]])
    return FitResult(theta=bounds.project(best["theta"]), x0=x0,
                     residual=best["residual"], history=history,
                     starts=starts)


def pe_spectrum(u_seq, tau_id=TAU_ID, negligible=1e-4):
    """Per-channel periodogram up to the Nyquist frequency 1/(2*tau_id).

    Returns frequencies, per-channel power densities, and the fraction of
    the band carrying non-negligible power (relative to the peak away from
    DC).
    """
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    if u_seq.shape[0] < 64:
        raise ValidationError("need at least 64 samples for a spectrum")
    n = u_seq.shape[0]
    freqs = np.fft.rfftfreq(n, d=tau_id)
    psd = []
    fractions = []
    for ch in range(u_seq.shape[1]):
        spec = np.abs(np.fft.rfft(u_seq[:, ch] - u_seq[:, ch].mean())) ** 2
        spec /= n
        psd.append(spec)
        peak = spec[1:].max() if spec[1:].size else 0.0
        if peak > 0:
            fractions.append(float((spec[1:] > negligible * peak).mean()))
        else:
            fractions.append(0.0)
    return {"freqs": freqs, "psd": np.array(psd),
            "band_fraction": np.array(fractions),
            "nyquist_hz": 0.5 / tau_id}


def synthetic_dataset(params=None, theta_true=None, N=150, tau_id=TAU_ID,
                      T_w0=430.0, l0=0.7, noise_rel=0.0, seed=1234):
    """Synthetic late-startup dataset with a staged, step-rich input record.

    Mirrors the process condition used for identification: gas staged at
    discrete levels, feedwater paced with the steam draw, header draw
    pulsing. Returns (IdDataset, theta_true, x0_true).
    """
    params = params or plant.nominal_params()
    if theta_true is not None:
        params = apply_theta(params, theta_true)
    theta_true = theta_of(params)
    rng = np.random.default_rng(seed)
    t = np.arange(N) * tau_id
    q_g = np.where(t < N * tau_id / 3, 0.013,
                   np.where(t < 2 * N * tau_id / 3, 0.016, 0.011))
    q_g = q_g + 0.0015 * np.sign(np.sin(2 * np.pi * t / (16 * tau_id)))
    q_s_H = 0.10 + 0.06 * (np.sin(2 * np.pi * t / (25 * tau_id)) > 0.2) \
        + 0.04 * (np.sin(2 * np.pi * t / (7 * tau_id)) > 0.5)
    q_f = np.clip(q_s_H + 0.01 * np.sin(2 * np.pi * t / (40 * tau_id)),
                  0.0, 0.35)
    u = np.column_stack([q_f, q_g, q_s_H])
    T_tg0 = T_w0 + 25.0
    x0 = np.array([T_tg0, l0, T_w0, T_w0])
    y = simulate_tilde(theta_true, x0, u, params, tau_id)
    if noise_rel > 0:
        y = y * (1.0 + noise_rel * rng.standard_normal(N))
    ds = IdDataset(u_meas=u, y_meas=y, tau_id=tau_id, l0=l0)
    return ds, theta_true, x0


def dataset_to_csv(ds, path):
    """Write the dataset CSV (time_s, q_f, q_g_B, q_s_H, p_s_H)."""
    with open(path, "w") as f:
        f.write("time_s,q_f,q_g_B,q_s_H,p_s_H\n")
        for h in range(len(ds)):
            t = h * ds.tau_id
            f.write(f"{t},{ds.u_meas[h, 0]!r},{ds.u_meas[h, 1]!r},"
                    f"{ds.u_meas[h, 2]!r},{ds.y_meas[h]!r}\n")


def dataset_from_csv(path, l0=0.7):
    rows = []
    with open(path) as f:
        header = f.readline().strip().split(",")
        expected = ["time_s", "q_f", "q_g_B", "q_s_H", "p_s_H"]
        if header != expected:
            raise ValidationError(f"dataset CSV must have columns {expected}")
        for i, line in enumerate(f):
            parts = line.strip().split(",")
            if len(parts) != 5:
                raise ValidationError(f"malformed CSV row {i + 2}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise ValidationError(
                    f"malformed CSV row {i + 2}: non-numeric value") from None
    arr = np.array(rows)
    if len(arr) < 2:
        raise ValidationError("dataset CSV has no rows")
    tau = arr[1, 0] - arr[0, 0]
    return IdDataset(u_meas=arr[:, 1:4], y_meas=arr[:, 4], tau_id=tau, l0=l0)
