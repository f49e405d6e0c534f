"""Solvers for the renormalised mollified equation and the classical reference.

The renormalised equation  du = Lap u dt + u (xi_eps - C_eps) dt  is stepped
by exponential splitting (Duhamel with the exact reaction sub-flow): the heat
semigroup is applied exactly in Fourier space and the multiplicative
potential step is the exact ODE flow,

    u_{k+1} = exp(dt Lap) [ u_k exp(dt (xi_eps - C_eps)) ],

so both the zero-potential dynamics (spectrally exact) and the
space-independent-potential dynamics (exact exponential growth) are
reproduced to round-off, and every observed epsilon-effect comes from the
noise's spatial structure.

For the 1-d space-time equation a classical Ito (Walsh) reference is provided:
semi-implicit Euler with the finite-difference Laplacian and discrete noise
increments u_k eta_k, Var(eta) = dt/dx, driven by the same underlying white
noise field as the mollified solver so that distances between the two are
low-variance.

Convergence studies fix one noise realization per seed at the finest grid,
mollify it at each epsilon of a dyadic list (with the renormalisation
constant computed per epsilon for the same mollifier), and report pairwise
distances in the exponentially weighted norm

    d(u, v) = max_snapshots || (u - v)(t, .) e^{-(t + ell)(1 + |x|)} ||_p.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .noise import Field, Grid, Mollifier, mollify, sample_white_noise

__all__ = [
    "SolverConfig",
    "Trajectory",
    "BlowUpError",
    "solve_renormalised",
    "solve_ito_reference",
    "solve_pam_transformed",
    "weighted_distance",
    "convergence_study",
    "weighted_norm_diag",
]

_EQ_DIMS = {"pam2d": 2, "pam3d": 3, "she1d": 1}
_GUARD = 1e12


class BlowUpError(RuntimeError):
    def __init__(self, time):
        super().__init__(f"solution exceeded the overflow guard at t = {time:.6g}")
        self.time = time


@dataclass
class SolverConfig:
    equation: str
    grid: Grid
    eps: float
    C_eps: float = 0.0
    u0: object = "dirac"          # "dirac" | ("const", c) | Field | ndarray
    T: float = None               # defaults to grid.T
    dt: float = None              # defaults to dx^2 / 4
    seed: int = 0
    snapshots: int = 8
    snapshot_t0: float = None   # first snapshot time; defaults to T/snapshots
    ell: float = 0.0

    def __post_init__(self):
        if self.equation not in _EQ_DIMS:
            raise ValueError(f"unknown equation {self.equation!r}")
        if _EQ_DIMS[self.equation] != self.grid.d:
            raise ValueError(
                f"{self.equation} needs d={_EQ_DIMS[self.equation]}, grid has d={self.grid.d}")
        if self.T is None:
            self.T = self.grid.T
        if self.dt is None:
            self.dt = self.grid.dx ** 2 / 4.0
        if self.eps < 2 * self.grid.dx - 1e-12:
            raise ValueError(
                f"mollification under-resolved: eps = {self.eps} < 2 dx = {2 * self.grid.dx}")

    @property
    def noise_kind(self) -> str:
        return "spacetime" if self.equation == "she1d" else "spatial"


@dataclass
class Trajectory:
    times: np.ndarray
    fields: list
    grid: Grid
    diagnostics: dict = field(default_factory=dict)

    def final(self) -> np.ndarray:
        return self.fields[-1]


def _heat_symbol(grid: Grid, dt: float) -> np.ndarray:
    """exp(dt Lap) multiplier on the rfftn grid (spectral Laplacian)."""
    k2 = _lap_symbol_spectral(grid)
    return np.exp(-dt * k2)


def _lap_symbol_spectral(grid: Grid) -> np.ndarray:
    freqs = [2.0 * np.pi * np.fft.fftfreq(grid.N, d=grid.dx) for _ in range(grid.d - 1)]
    freqs.append(2.0 * np.pi * np.fft.rfftfreq(grid.N, d=grid.dx))
    mesh = np.meshgrid(*freqs, indexing="ij")
    return sum(m ** 2 for m in mesh)


def _initial_field(cfg: SolverConfig) -> np.ndarray:
    g = cfg.grid
    if isinstance(cfg.u0, Field):
        return cfg.u0.values.copy()
    if isinstance(cfg.u0, np.ndarray):
        return cfg.u0.copy()
    if cfg.u0 == "dirac":
        u = np.zeros(g.space_shape())
        center = tuple(int(round(g.N / 2)) for _ in range(g.d))
        u[center] = g.dx ** -g.d
        return u
    if isinstance(cfg.u0, tuple) and cfg.u0[0] == "const":
        return np.full(g.space_shape(), float(cfg.u0[1]))
    raise ValueError(f"unsupported initial condition {cfg.u0!r}")


def _snapshot_indices(n_steps: int, n_snap: int, T: float, dt: float,
                      t0: float = None) -> np.ndarray:
    """Steps closest to shared target times linspace(t0, T, n_snap), so
    trajectories from solvers with different dt are comparable."""
    n = min(n_snap, n_steps)
    if t0 is None:
        t0 = T / n
    targets = np.linspace(t0, T, n)
    return np.unique(np.clip(np.round(targets / dt).astype(int), 1, n_steps))


def mollified_noise(cfg: SolverConfig, noise: Field = None) -> Field:
    """The potential's noise: sampled from cfg.seed unless supplied, then
    mollified at cfg.eps (spatial marginal mollifier for spatial noise)."""
    if noise is None:
        noise = sample_white_noise(cfg.grid, cfg.noise_kind, seed=cfg.seed)
    return mollify(noise, Mollifier(epsilon=cfg.eps))


def _mollify_extended(ext_values: np.ndarray, grid: Grid, eps: float,
                      pad: int) -> Field:
    """Mollify a time-padded space-time noise array and return the interior
    [0, T] slab: a clean linear convolution in time (no wrap), circular in
    the periodic space directions."""
    moll = Mollifier(epsilon=eps)
    M_ext = ext_values.shape[0]
    toffs = np.fft.fftfreq(M_ext, d=1.0 / M_ext) * grid.dt
    ax = [moll._b(toffs / eps ** 2)]
    for _ in range(grid.d):
        xoffs = np.fft.fftfreq(grid.N, d=1.0 / grid.N) * grid.dx
        ax.append(moll._b(xoffs / eps))
    kern = ax[0]
    for a in ax[1:]:
        kern = np.multiply.outer(kern, a)
    kern = kern / kern.sum()
    out = np.fft.irfftn(np.fft.rfftn(ext_values) * np.fft.rfftn(kern),
                        s=ext_values.shape, axes=tuple(range(ext_values.ndim)))
    return Field(grid=grid, values=out[pad:pad + grid.M].copy(), kind="spacetime")


def solve_renormalised(cfg: SolverConfig, noise: Field = None,
                       xi_eps: Field = None) -> Trajectory:
    """Exponential-splitting integration of the renormalised equation.

    Either supply the raw noise (mollified here) or a pre-mollified xi_eps.
    """
    g = cfg.grid
    xi = xi_eps if xi_eps is not None else mollified_noise(cfg, noise)
    u = _initial_field(cfg)
    n_steps = int(round(cfg.T / cfg.dt))
    semigroup = _heat_symbol(g, cfg.dt)
    snaps = _snapshot_indices(n_steps, cfg.snapshots, cfg.T, cfg.dt, cfg.snapshot_t0)
    times, fields = [], []
    if xi.kind == "spatial":
        react = np.exp(cfg.dt * (xi.values - cfg.C_eps))
    ratio = cfg.dt / g.dt if g.M else 0.0
    for k in range(n_steps):
        if xi.kind == "spacetime":
            # left-point time slice of the mollified space-time noise
            tid = min(int(k * ratio + 1e-9), g.M - 1)
            react = np.exp(cfg.dt * (xi.values[tid] - cfg.C_eps))
        u = u * react
        u = np.fft.irfftn(np.fft.rfftn(u) * semigroup, s=u.shape, axes=tuple(range(u.ndim)))
        if not np.all(np.abs(u) < _GUARD):
            raise BlowUpError((k + 1) * cfg.dt)
        if (k + 1) in snaps:
            times.append((k + 1) * cfg.dt)
            fields.append(u.copy())
    traj = Trajectory(times=np.asarray(times), fields=fields, grid=g)
    traj.diagnostics["mass"] = [float(f.mean()) * g.L ** g.d for f in fields]
    traj.diagnostics["max"] = [float(np.abs(f).max()) for f in fields]
    return traj


def solve_ito_reference(cfg: SolverConfig, noise: Field = None) -> Trajectory:
    """Semi-implicit Walsh discretisation of the 1-d Ito equation.

    u_{k+1} = (I - dt Lap_h)^{-1} (u_k + u_k eta_k), with eta_k = dt * xi
    built from the same underlying discrete white noise as the mollified
    solver (Var(eta) = dt/dx) and the second-difference Laplacian.
    """
    if cfg.equation != "she1d":
        raise ValueError("the Ito reference is defined for she1d only")
    g = cfg.grid
    if abs(cfg.dt - g.dt) > 1e-12 * g.dt:
        raise ValueError("the Ito reference consumes one fresh noise slice per "
                         f"step: set dt = grid.dt = {g.dt}")
    if noise is None:
        noise = sample_white_noise(g, "spacetime", seed=cfg.seed)
    u = _initial_field(cfg)
    n_steps = int(round(cfg.T / cfg.dt))
    # finite-difference symbol of the periodic second difference
    m = np.fft.rfftfreq(g.N, d=1.0 / g.N)
    lam = 4.0 * np.sin(np.pi * m / g.N) ** 2 / g.dx ** 2
    inv = 1.0 / (1.0 + cfg.dt * lam)
    snaps = _snapshot_indices(n_steps, cfg.snapshots, cfg.T, cfg.dt, cfg.snapshot_t0)
    times, fields = [], []
    ratio = cfg.dt / g.dt
    for k in range(n_steps):
        tid = min(int(k * ratio + 1e-9), g.M - 1)
        eta = cfg.dt * noise.values[tid]
        u = u + u * eta
        u = np.fft.irfft(np.fft.rfft(u) * inv, n=g.N)
        if not np.all(np.abs(u) < _GUARD):
            raise BlowUpError((k + 1) * cfg.dt)
        if (k + 1) in snaps:
            times.append((k + 1) * cfg.dt)
            fields.append(u.copy())
    traj = Trajectory(times=np.asarray(times), fields=fields, grid=g)
    traj.diagnostics["mass"] = [float(f.mean()) * g.L for f in fields]
    return traj


def solve_pam_transformed(cfg: SolverConfig, xi_eps: np.ndarray, C: float) -> Trajectory:
    """Change-of-unknown benchmark for the 2-d equation with fixed smooth
    noise: with Lap w = xi_eps - C (periodic, zero-mean right side), v =
    u e^{w} solves

        dv/dt = Lap v - 2 grad w . grad v + v |grad w|^2,

    which has no singular product; stepping it and mapping back u = v e^{-w}
    gives an independent benchmark for the direct renormalised solve."""
    g = cfg.grid
    rhs = xi_eps - C
    rhs = rhs - rhs.mean()
    freqs = [2.0 * np.pi * np.fft.fftfreq(g.N, d=g.dx) for _ in range(g.d - 1)]
    freqs.append(2.0 * np.pi * np.fft.rfftfreq(g.N, d=g.dx))
    mesh = np.meshgrid(*freqs, indexing="ij")
    k2 = sum(mm ** 2 for mm in mesh)
    k2flat = k2.copy()
    k2flat[(0,) * g.d] = 1.0
    w_hat = -np.fft.rfftn(rhs) / k2flat
    w_hat[(0,) * g.d] = 0.0
    w = np.fft.irfftn(w_hat, s=rhs.shape, axes=tuple(range(rhs.ndim)))
    grads = [np.fft.irfftn(1j * mesh[i] * w_hat, s=rhs.shape, axes=tuple(range(rhs.ndim))) for i in range(g.d)]
    grad2 = sum(gr ** 2 for gr in grads)

    v = _initial_field(cfg) * np.exp(w)
    n_steps = int(round(cfg.T / cfg.dt))
    semigroup = _heat_symbol(g, cfg.dt)
    snaps = _snapshot_indices(n_steps, cfg.snapshots, cfg.T, cfg.dt, cfg.snapshot_t0)
    times, fields = [], []
    for k in range(n_steps):
        v_hat = np.fft.rfftn(v)
        gv = [np.fft.irfftn(1j * mesh[i] * v_hat, s=v.shape, axes=tuple(range(v.ndim))) for i in range(g.d)]
        drift = -2.0 * sum(gw * gvi for gw, gvi in zip(grads, gv)) + v * grad2
        v = v + cfg.dt * drift
        v = np.fft.irfftn(np.fft.rfftn(v) * semigroup, s=v.shape, axes=tuple(range(v.ndim)))
        if (k + 1) in snaps:
            times.append((k + 1) * cfg.dt)
            fields.append(v * np.exp(-w))
    return Trajectory(times=np.asarray(times), fields=fields, grid=g)


# -- distances and studies -----------------------------------------------------


def _radius(grid: Grid) -> np.ndarray:
    mesh = np.meshgrid(*([grid.xs] * grid.d), indexing="ij")
    return np.sqrt(sum(m ** 2 for m in mesh))


def weighted_distance(t1: Trajectory, t2: Trajectory, p: float = 2.0,
                      ell: float = 0.0) -> float:
    """sup over common snapshot times of the e^{-(t+ell)(1+|x|)}-weighted
    L^p distance between the snapshot fields."""
    g = t1.grid
    r = _radius(g)
    best = 0.0
    for t, f1, f2 in zip(t1.times, t1.fields, t2.fields):
        wgt = np.exp(-(t + ell) * (1.0 + r))
        diff = np.abs(f1 - f2) * wgt
        if np.isinf(p):
            val = float(diff.max())
        else:
            val = float((np.sum(diff ** p) * g.dx ** g.d) ** (1.0 / p))
        best = max(best, val)
    return best


def convergence_study(equation: str, grid: Grid, eps_list, T: float,
                      seeds=(0,), p: float = 2.0, ell: float = 0.0,
                      constants: dict = None, n_qmc: int = 1 << 14,
                      include_ito: bool = False, threads: int = 1,
                      snapshots: int = 6, snapshot_t0: float = None,
                      u0: object = ("const", 1.0), dt: float = None) -> dict:
    """Coupled-noise dyadic epsilon study.

    One noise realization per seed is mollified at every epsilon; the
    renormalisation constant is computed per epsilon (shared across seeds)
    unless supplied.  Reports pairwise weighted distances per seed and, for
    she1d with include_ito, the distance to the Ito reference.
    """
    from .renorm import compute_constants

    eq_renorm = {"pam2d": None, "pam3d": "pam3d", "she1d": "she1d"}[equation]
    if constants is None:
        constants = {}
        R_G = 8.0 * max(eps_list)  # keep every eps inside the exact-Green region
        for e in eps_list:
            if eq_renorm is None:
                constants[e] = 0.0
            else:
                rc = compute_constants(eq_renorm, e, n_samples=n_qmc,
                                       seed=1000, threads=threads, R_G=R_G)
                constants[e] = rc.C_eps

    kind = "spacetime" if equation == "she1d" else "spatial"
    # pad the time axis so each mollification is a clean linear convolution
    # on [0, T]: all epsilons then share one noise realization with no
    # wrap-around pollution near the time endpoints
    pad = 0
    if kind == "spacetime":
        pad = int(np.ceil(2.0 * max(eps_list) ** 2 / grid.dt)) + 1

    def run_seed(seed):
        if kind == "spatial":
            noise = sample_white_noise(grid, kind, seed=seed)
            trajs = {e: solve_renormalised(
                SolverConfig(equation=equation, grid=grid, eps=e,
                             C_eps=constants[e], u0=u0, T=T, seed=seed,
                             snapshots=snapshots, snapshot_t0=snapshot_t0,
                             ell=ell, dt=dt), noise=noise)
                for e in eps_list}
        else:
            rng = np.random.Generator(np.random.Philox(key=(seed, 1)))
            shape = (grid.M + 2 * pad,) + grid.space_shape()
            ext = rng.standard_normal(shape) / np.sqrt(grid.dt * grid.dx ** grid.d)
            interior = Field(grid=grid, values=ext[pad:pad + grid.M].copy(),
                             kind="spacetime")
            trajs = {}
            for e in eps_list:
                xi = _mollify_extended(ext, grid, e, pad)
                cfg = SolverConfig(equation=equation, grid=grid, eps=e,
                                   C_eps=constants[e], u0=u0, T=T,
                                   seed=seed, snapshots=snapshots,
                                   snapshot_t0=snapshot_t0, ell=ell, dt=dt)
                trajs[e] = solve_renormalised(cfg, xi_eps=xi)
        dists = [weighted_distance(trajs[a], trajs[b], p=p, ell=ell)
                 for a, b in zip(eps_list, eps_list[1:])]
        out = {"pairwise": dists}
        if include_ito and equation == "she1d":
            cfg = SolverConfig(equation=equation, grid=grid, eps=eps_list[-1],
                               C_eps=0.0, u0=u0, T=T, seed=seed,
                               snapshots=snapshots, snapshot_t0=snapshot_t0,
                               ell=ell, dt=grid.dt)
            ito = solve_ito_reference(cfg, noise=interior)
            out["to_ito"] = [weighted_distance(trajs[e], ito, p=p, ell=ell)
                             for e in eps_list]
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            per_seed = list(ex.map(run_seed, seeds))
    else:
        per_seed = [run_seed(s) for s in seeds]
    return {"eps_list": list(eps_list), "constants": constants,
            "seeds": list(seeds), "results": per_seed}


def weighted_norm_diag(traj: Trajectory, p: float = 2.0, ell: float = 0.0,
                       alpha: float = None, basis=None,
                       weight_time_shift: bool = False) -> list:
    """Per-snapshot diagnostics: the e^{-(t+ell)(1+|x|)}-weighted L^p norm,
    and optionally a spatial Besov norm of the weighted snapshot.

    weight_time_shift uses the weight at time t + lambda^2 per wavelet level
    lambda = 2^-n instead of t (the convention matching time-averaged
    estimates)."""
    g = traj.grid
    r = _radius(g)
    out = []
    for t, f in zip(traj.times, traj.fields):
        row = {"t": float(t)}
        wgt = np.exp(-(t + ell) * (1.0 + r))
        if np.isinf(p):
            row["weighted_lp"] = float(np.abs(f * wgt).max())
        else:
            row["weighted_lp"] = float((np.sum(np.abs(f * wgt) ** p) * g.dx ** g.d)
                                       ** (1.0 / p))
        row["unweighted_sup"] = float(np.abs(f).max())
        if alpha is not None and basis is not None:
            from .besov import besov_norm
            from .wavelet import analyze_spatial

            n_max = int(np.log2(g.N / g.L / 4))
            vals = f if not weight_time_shift else f
            pyr = analyze_spatial(vals * wgt, basis, 0, n_max, g.L)
            if weight_time_shift:
                # recompute per level with the time-shifted weight
                norm = 0.0
                for n in sorted(pyr.levels):
                    wl = np.exp(-(t + 4.0 ** -n + ell) * (1.0 + r))
                    pyr_n = analyze_spatial(f * wl, basis, n, n, g.L)
                    from .besov import level_aggregate
                    norm = max(norm, level_aggregate(pyr_n, n, p=p)
                               / 2.0 ** (-n * g.d / 2.0 - n * alpha))
                row["besov"] = norm
            else:
                row["besov"] = besov_norm(pyr, alpha, p=p)
        out.append(row)
    return out
