"""Reference solutions for the benchmarks without a closed form.

* viscous Burgers on [-1, 1] with ``u(x, 0) = -sin(pi x)``: Cole-Hopf
  representation evaluated by Gauss-Hermite quadrature;
* Allen-Cahn on the periodic interval [-1, 1]: Fourier pseudo-spectral
  discretization in space, ETDRK4 (Kassam & Trefethen) in time.
"""

from __future__ import annotations

import csv
from functools import lru_cache
from importlib import resources

import numpy as np

BURGERS_NU = 0.01 / np.pi
ALLEN_CAHN_DIFFUSION = 1e-4
ALLEN_CAHN_REACTION = 5.0


@lru_cache(maxsize=None)
def _hermite(n: int):
    return np.polynomial.hermite.hermgauss(n)


def burgers_cole_hopf(x, t, nu: float = BURGERS_NU, n_nodes: int = 200) -> np.ndarray:
    """Burgers solution at the points ``(x, t)`` (broadcast together).

    With ``eta = sqrt(4 nu t) z`` the Cole-Hopf ratio becomes a pair of
    Gauss-Hermite integrals; both share a log-scale shift so the large
    exponent ``cos(pi y) / (2 pi nu)`` never overflows.
    """
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    shape = x.shape
    x, t = x.ravel(), t.ravel()
    out = -np.sin(np.pi * x)
    live = t > 0
    if not live.any():
        return out.reshape(shape)
    xs, ts = x[live][:, None], t[live][:, None]
    z, w = _hermite(n_nodes)
    y = xs - np.sqrt(4.0 * nu * ts) * z[None, :]
    expo = -np.cos(np.pi * y) / (2.0 * np.pi * nu)
    expo -= expo.max(axis=1, keepdims=True)
    weight = w[None, :] * np.exp(expo)
    num = -(np.sin(np.pi * y) * weight).sum(axis=1)
    den = weight.sum(axis=1)
    out[live] = num / den
    return out.reshape(shape)


def allen_cahn_etdrk4(
    n_modes: int = 512,
    dt: float = 1e-4,
    t_end: float = 1.0,
    n_out: int = 51,
    diffusion: float = ALLEN_CAHN_DIFFUSION,
    reaction: float = ALLEN_CAHN_REACTION,
):
    """Integrate ``u_t = diffusion u_xx + reaction (u - u^3)`` on periodic [-1, 1).

    Returns ``(x, t, u)`` with ``u[i, j]`` the solution at ``t[i]``, ``x[j]``;
    ``x`` is the periodic grid ``-1 + 2 j / n_modes``.
    """
    x = -1.0 + 2.0 * np.arange(n_modes) / n_modes
    k = np.pi * np.fft.fftfreq(n_modes, d=1.0 / n_modes)
    lin = -diffusion * k**2

    e = np.exp(dt * lin)
    e2 = np.exp(dt * lin / 2)
    n_contour = 32
    roots = np.exp(1j * np.pi * (np.arange(1, n_contour + 1) - 0.5) / n_contour)
    lr = dt * lin[:, None] + roots[None, :]
    q = dt * np.real(np.mean((np.exp(lr / 2) - 1) / lr, axis=1))
    f1 = dt * np.real(np.mean((-4 - lr + np.exp(lr) * (4 - 3 * lr + lr**2)) / lr**3, axis=1))
    f2 = dt * np.real(np.mean((2 + lr + np.exp(lr) * (-2 + lr)) / lr**3, axis=1))
    f3 = dt * np.real(np.mean((-4 - 3 * lr - lr**2 + np.exp(lr) * (4 - lr)) / lr**3, axis=1))

    def nonlinear(v_hat):
        u = np.real(np.fft.ifft(v_hat))
        return np.fft.fft(reaction * (u - u**3))

    n_steps = int(round(t_end / dt))
    save_every = n_steps // (n_out - 1)
    if save_every * (n_out - 1) != n_steps:
        raise ValueError("t_end / dt must be a multiple of n_out - 1")

    v = np.fft.fft(x**2 * np.cos(np.pi * x))
    frames = [np.real(np.fft.ifft(v))]
    for step in range(1, n_steps + 1):
        nv = nonlinear(v)
        a = e2 * v + q * nv
        na = nonlinear(a)
        b = e2 * v + q * na
        nb = nonlinear(b)
        c = e2 * a + q * (2 * nb - nv)
        nc = nonlinear(c)
        v = e * v + nv * f1 + 2 * (na + nb) * f2 + nc * f3
        if step % save_every == 0:
            frames.append(np.real(np.fft.ifft(v)))
    t = np.linspace(0.0, t_end, n_out)
    return x, t, np.array(frames)


ALLEN_CAHN_TABLE = "allen_cahn_reference.csv"


def write_reference_csv(path, coords: dict[str, np.ndarray], values: np.ndarray) -> None:
    """Write ``coords..., value`` rows with a header; floats in ``repr`` form."""
    names = list(coords)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*names, "value"])
        for row in zip(*(coords[n] for n in names), values):
            writer.writerow([repr(float(v)) for v in row])


def read_reference_csv(source) -> tuple[list[str], np.ndarray]:
    """Read a reference table; returns the header and an ``(n, ncols)`` array."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source) as fh:
            lines = fh.read().splitlines()
    reader = csv.reader(lines)
    header = next(reader)
    data = np.array([[float(v) for v in row] for row in reader if row])
    return header, data


def build_allen_cahn_table(n_modes: int = 2048, dt: float = 1e-4, n_out: int = 51, x_stride: int = 16):
    """Reference table on an ``(n_out) x (n_modes / x_stride + 1)`` grid, x = 1 duplicated from x = -1."""
    x, t, u = allen_cahn_etdrk4(n_modes=n_modes, dt=dt, n_out=n_out)
    xs = np.append(x[::x_stride], 1.0)
    us = np.concatenate([u[:, ::x_stride], u[:, :1]], axis=1)
    tt, xx = np.meshgrid(t, xs, indexing="ij")
    return xx.ravel(), tt.ravel(), us.ravel()


@lru_cache(maxsize=1)
def allen_cahn_reference() -> np.ndarray:
    """Stored table as an ``(n, 3)`` array of ``x, t, value``."""
    ref = resources.files("amstramgram.problems").joinpath("data", ALLEN_CAHN_TABLE)
    with ref.open("r") as fh:
        header, data = read_reference_csv(fh)
    if header != ["x", "t", "value"]:
        raise ValueError(f"unexpected Allen-Cahn table header {header}")
    return data


def regenerate_allen_cahn_table(path) -> None:
    xx, tt, uu = build_allen_cahn_table()
    write_reference_csv(path, {"x": xx, "t": tt}, uu)
