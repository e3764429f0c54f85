"""Steady states, generator spectra, sector labeling, and the two
relaxation-rate extraction protocols.

Both rate protocols start from the steady state with one extra qubit
excitation injected (``rho0 ~ a_dag rho_ss a``): `t1_rate_diag` reads the
rate off the slowest excited eigenmode, `t1_rate_fit` fits the tail of a
direct time evolution.  Agreement between the two is itself a physics
check, so they share as little code as possible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .fockspace import (
    TruncatedSpace,
    ladder_operators,
    trace_functional,
    unvectorize,
    vectorize,
)
from .liouvillian import GeneratorBundle

# Superoperator dimension up to which the dense eigensolver is preferred.
_DENSE_LIMIT = 1300
# Relative eigenvalue spacing below which modes are treated as one
# near-degenerate cluster during biorthonormalization.
_CLUSTER_RTOL = 1e-9
# Weight floor for the excited-mode search in the eigenmode rate protocol.
WEIGHT_FLOOR = 1e-8


@dataclass
class ModeLabel:
    """Coherence-sector label (m_c, m_a), intra-sector rank k, and kind.

    kind is "T1" when m_c = m_a = 0 (population sector), "T2" for any
    definite nonzero sector, and "mixed" when no single sector holds the
    required fraction of the mode's weight (m_c and m_a are then None).
    """

    m_c: int | None
    m_a: int | None
    k: int
    kind: str


@dataclass
class SpectralMode:
    """One eigenmode of a generator: eigenvalue plus right/left vectors."""

    lam: complex
    right: np.ndarray
    left: np.ndarray
    label: ModeLabel | None = None
    weight: complex | None = None


@dataclass(frozen=True)
class FitResult:
    """Outcome of an exponential-tail fit."""

    gamma: float
    amplitude: float
    fit_window: tuple[float, float]
    residual: float


@dataclass(frozen=True)
class T1DiagResult:
    """Eigenmode-protocol rate under both selection criteria.

    gamma/mode come from the slowest decaying excited mode with weight
    above the floor; gamma_by_weight/mode_by_weight from the excited mode
    with the largest weight.  agree is False when the two disagree.
    """

    gamma: float
    mode: SpectralMode
    gamma_by_weight: float
    mode_by_weight: SpectralMode
    agree: bool


def coherence_sectors(space: TruncatedSpace) -> np.ndarray:
    """Per-component coherence numbers of vectorized operators.

    Returns an integer array of shape (total_dim**2, n_modes): component v
    of a vectorized operator is the matrix element (row, col) =
    (v % N, v // N), and its sector for mode j is
    occupations(row)[j] - occupations(col)[j].
    """
    n = space.total_dim
    occ = np.array([space.occupations(i) for i in range(n)], dtype=int)
    rows = np.tile(np.arange(n), n)
    cols = np.repeat(np.arange(n), n)
    return occ[rows] - occ[cols]


def _eigs_with_retry(mat, k, sigma, dim, attempts=3):
    """Shift-invert ARPACK with a deterministic start vector and retries.

    A shift landing on (or numerically too close to) an eigenvalue makes
    the LU factorization singular; retries nudge the shift off the real
    axis.
    """
    v0 = np.ones(dim) / np.sqrt(dim)
    sig = sigma
    last = None
    for _ in range(attempts):
        try:
            return spla.eigs(mat, k=k, sigma=sig, v0=v0)
        except (RuntimeError, spla.ArpackError, np.linalg.LinAlgError) as exc:
            last = exc
            sig = sig * (1 + 1e-3) + 1e-3j * max(abs(sigma), 1e-12)
    raise RuntimeError(
        f"sparse eigensolver failed near shift {sigma!r}: {last}"
    )


def steady_state(bundle: GeneratorBundle, psd_floor: float = -1e-10) -> np.ndarray:
    """Unique trace-1 steady density matrix of the generator.

    Raises RuntimeError when the steady space is degenerate or the null
    vector is not a physical state (eigenvalues below ``psd_floor``).
    Small negative populations above the floor are clipped away with a
    warning and the state renormalized.
    """
    superop = bundle.superop
    dim = superop.data.shape[0]
    scale = bundle.t1_rate_scale
    if dim <= _DENSE_LIMIT:
        w, v = np.linalg.eig(superop.as_dense())
        order = np.argsort(np.abs(w))
        lam1 = w[order[1]]
        vec = v[:, order[0]]
    else:
        w, v = _eigs_with_retry(
            superop.as_sparse().tocsc(), k=2, sigma=0.1 * scale, dim=dim
        )
        order = np.argsort(np.abs(w))
        lam1 = w[order[1]]
        vec = v[:, order[0]]
    if abs(lam1) < 1e-6 * scale:
        raise RuntimeError(
            f"degenerate steady space: second eigenvalue {lam1:.3e} within "
            f"1e-6 of zero on the scale {scale:.3e}"
        )
    rho = unvectorize(vec, bundle.space)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho)
    if abs(tr) < 1e-12 * max(np.max(np.abs(rho)), 1e-300):
        raise RuntimeError("steady null vector is traceless")
    rho = rho / tr
    evals, evecs = np.linalg.eigh(rho)
    if evals.min() < psd_floor:
        raise RuntimeError(
            f"steady state is not positive semidefinite: min eigenvalue "
            f"{evals.min():.3e} below floor {psd_floor:.1e}"
        )
    if evals.min() < -1e-14:
        warnings.warn(
            "steady state has small negative populations within tolerance; "
            "clipping and renormalizing"
        )
        evals = np.clip(evals, 0.0, None)
        rho = (evecs * evals) @ evecs.conj().T
        rho = rho / np.trace(rho).real
    return rho


def _biorthonormalize(modes: list[SpectralMode], mag: float) -> None:
    """In-place: unit-norm lefts, rights rescaled so <l_i, r_j> = delta_ij.

    Near-degenerate eigenvalues (within _CLUSTER_RTOL * mag) are handled
    as a block via a pseudo-inverse of the cluster Gram matrix.
    """
    for m in modes:
        m.left = m.left / np.linalg.norm(m.left)
    used = np.zeros(len(modes), dtype=bool)
    lams = np.array([m.lam for m in modes])
    for i in range(len(modes)):
        if used[i]:
            continue
        cluster = np.flatnonzero(
            (~used) & (np.abs(lams - lams[i]) < _CLUSTER_RTOL * mag)
        )
        used[cluster] = True
        if len(cluster) == 1:
            m = modes[i]
            ip = np.vdot(m.left, m.right)
            if abs(ip) < 1e-12:
                raise RuntimeError(
                    f"defective eigenpair at lambda={m.lam:.6e}: left/right "
                    "vectors are numerically orthogonal"
                )
            m.right = m.right / ip
        else:
            lmat = np.column_stack([modes[j].left for j in cluster])
            rmat = np.column_stack([modes[j].right for j in cluster])
            gram = lmat.conj().T @ rmat
            rmat = rmat @ np.linalg.pinv(gram, rcond=1e-12)
            if np.max(np.abs(lmat.conj().T @ rmat - np.eye(len(cluster)))) > 1e-9:
                raise RuntimeError(
                    f"defective near-degenerate cluster at lambda={lams[i]:.6e}"
                )
            for col, j in enumerate(cluster):
                modes[j].right = rmat[:, col]


def spectrum(
    bundle: GeneratorBundle,
    count: int | None = None,
    normalize: bool = True,
    method: str = "auto",
    sigma: complex | None = None,
) -> list[SpectralMode]:
    """Slowest eigenmodes of the generator, sorted by |Re lambda| ascending.

    Parameters
    ----------
    count : number of modes to return (None = all computed; the sparse
        path defaults to 12).
    method : "auto" picks dense full diagonalization for small
        superoperators and shift-invert ARPACK otherwise.
    sigma : sparse-path shift; defaults to -0.5 * bundle.t1_rate_scale so
        the slow relaxation ladder is favored.
    """
    superop = bundle.superop
    dim = superop.data.shape[0]
    if method == "auto":
        method = "dense" if dim <= _DENSE_LIMIT else "sparse"
    mag = superop.max_abs()

    if method == "dense":
        if dim > 20000:
            raise ValueError(
                f"dense diagonalization infeasible at superoperator dim {dim}"
            )
        mat = superop.as_dense()
        w, rights = np.linalg.eig(mat)
        lefts = np.linalg.inv(rights).conj().T
        order = np.argsort(np.abs(w.real), kind="stable")
        if count is not None:
            order = order[:count]
        modes = [
            SpectralMode(lam=w[i], right=rights[:, i].copy(), left=lefts[:, i].copy())
            for i in order
        ]
    elif method == "sparse":
        if count is None:
            count = 12
        k = max(count + 4, 12)
        sig = sigma if sigma is not None else -0.5 * bundle.t1_rate_scale
        mat = superop.as_sparse().tocsc()
        adjoint = mat.conj().T.tocsc()
        # The forward and adjoint solver windows may disagree on which
        # eigenvalues sit at their outer edge; widen both until every kept
        # forward eigenvalue has its adjoint partner.
        unmatched = None
        for _ in range(3):
            wr, vr = _eigs_with_retry(mat, k=k, sigma=sig, dim=dim)
            wl, vl = _eigs_with_retry(adjoint, k=k, sigma=np.conj(sig), dim=dim)
            wl_as_right = np.conj(wl)
            pairs = []
            for i in np.argsort(np.abs(wr.real), kind="stable")[:count]:
                j = int(np.argmin(np.abs(wl_as_right - wr[i])))
                if abs(wl_as_right[j] - wr[i]) > 1e-8 * max(1.0, abs(wr[i])):
                    unmatched = wr[i]
                    pairs = None
                    break
                pairs.append((i, j))
            if pairs is not None:
                break
            k *= 2
        else:
            raise RuntimeError(
                f"no adjoint eigenvalue matches lambda={unmatched:.6e} even "
                "after widening the solver window; move the shift"
            )
        modes = [
            SpectralMode(lam=wr[i], right=vr[:, i].copy(), left=vl[:, j].copy())
            for i, j in pairs
        ]
    else:
        raise ValueError(f"unknown method {method!r}")

    # defectiveness / convergence check on the raw (unit-norm-ish) vectors
    lop = superop.as_sparse()
    for m in modes:
        res = np.linalg.norm(lop @ m.right - m.lam * m.right)
        if res > 1e-8 * mag * np.linalg.norm(m.right):
            raise RuntimeError(
                f"eigenpair residual {res:.3e} at lambda={m.lam:.6e}; "
                "generator may be defective or the solver did not converge"
            )

    if normalize:
        _biorthonormalize(modes, mag)
        check = modes if len(modes) <= 300 else modes[:50]
        lmat = np.column_stack([m.left for m in check])
        rmat = np.column_stack([m.right for m in check])
        gram = lmat.conj().T @ rmat
        lams = np.array([m.lam for m in check])
        distinct = np.abs(lams[:, None] - lams[None, :]) >= _CLUSTER_RTOL * mag
        gram[distinct] = 0.0  # cross terms between distinct eigenvalues are exact zeros in theory
        if np.max(np.abs(gram - np.eye(len(check)))) > 1e-9:
            raise RuntimeError("biorthonormalization failed beyond 1e-9")
    return modes


def block_labels(
    bundle: GeneratorBundle,
    modes: list[SpectralMode] | None = None,
    count: int | None = None,
    support_fraction: float = 0.9,
) -> list[SpectralMode]:
    """Label modes by coherence sector; returns the modes with label set.

    A mode gets the (m_c, m_a) sector holding at least ``support_fraction``
    of its right vector's weight, or a "mixed" label otherwise.  k ranks
    modes within each sector by |Re lambda| ascending.
    """
    if modes is None:
        modes = spectrum(bundle, count=count)
    sectors = coherence_sectors(bundle.space)
    uniq, inv = np.unique(sectors, axis=0, return_inverse=True)
    assignments = []
    for mode in modes:
        p = np.abs(mode.right) ** 2
        w = np.bincount(inv, weights=p, minlength=len(uniq))
        best = int(np.argmax(w))
        if w[best] >= support_fraction * p.sum():
            m_c, m_a = int(uniq[best][0]), int(uniq[best][1])
            kind = "T1" if (m_c == 0 and m_a == 0) else "T2"
            assignments.append((m_c, m_a, kind))
        else:
            assignments.append((None, None, "mixed"))
    ranks: dict[tuple, int] = {}
    for idx in np.argsort([abs(m.lam.real) for m in modes], kind="stable"):
        key = assignments[idx]
        k = ranks.get(key, 0)
        ranks[key] = k + 1
        m_c, m_a, kind = key
        modes[idx].label = ModeLabel(m_c=m_c, m_a=m_a, k=k, kind=kind)
    return modes


def _injected_excitation(bundle: GeneratorBundle, rho_ss: np.ndarray) -> np.ndarray:
    """Normalized rho_ss with one extra qubit excitation added."""
    _, a_raise, _ = ladder_operators(bundle.space, 1)
    rho0 = a_raise.data @ rho_ss @ a_raise.data.conj().T
    tr = np.trace(rho0).real
    if tr <= 0:
        raise RuntimeError("cannot inject an excitation: zero-weight result")
    return rho0 / tr


def t1_rate_diag(
    bundle: GeneratorBundle,
    count: int | None = None,
    weight_floor: float = WEIGHT_FLOOR,
    rho_ss: np.ndarray | None = None,
    modes: list[SpectralMode] | None = None,
) -> T1DiagResult:
    """Eigenmode readout of the slow qubit relaxation rate.

    Injects one qubit excitation on top of the steady state, computes mode
    weights w = <l, rho0>, and selects the excited mode by two criteria
    (slowest decaying above the weight floor; largest weight).  Their
    disagreement is flagged in the result and as a warning.
    """
    if rho_ss is None:
        rho_ss = steady_state(bundle)
    rho0 = _injected_excitation(bundle, rho_ss)
    if modes is None:
        dim = bundle.superop.data.shape[0]
        modes = spectrum(
            bundle, count=None if dim <= _DENSE_LIMIT else max(count or 12, 12)
        )
    v0 = vectorize(rho0)
    scale = bundle.t1_rate_scale
    excited = []
    for m in modes:
        m.weight = complex(np.vdot(m.left, v0))
        if abs(m.lam) > 1e-6 * scale:
            excited.append(m)
    candidates = [m for m in excited if abs(m.weight) > weight_floor]
    if not candidates:
        raise RuntimeError(
            f"no excited eigenmode carries weight above {weight_floor:.1e}"
        )
    slowest = min(candidates, key=lambda m: abs(m.lam.real))
    heaviest = max(excited, key=lambda m: abs(m.weight))
    gamma = -slowest.lam.real
    gamma_w = -heaviest.lam.real
    agree = bool(np.isclose(gamma, gamma_w, rtol=1e-9, atol=1e-15))
    if not agree:
        warnings.warn(
            f"rate criteria disagree: slowest-excited {gamma:.6e} vs "
            f"largest-weight {gamma_w:.6e}"
        )
    return T1DiagResult(
        gamma=gamma,
        mode=slowest,
        gamma_by_weight=gamma_w,
        mode_by_weight=heaviest,
        agree=agree,
    )


def evolve(
    bundle: GeneratorBundle,
    rho0: np.ndarray,
    times,
    trace_tol: float = 1e-9,
) -> np.ndarray:
    """Propagate rho0 through the generator; returns (len(times), N, N).

    Uses one dense matrix exponential per distinct time step (steps equal
    to within 1e-9 relative are grouped), then repeated matrix-vector
    products.  Trace drift beyond ``trace_tol`` raises.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-d grid")
    if times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted and non-negative")
    dim = bundle.superop.data.shape[0]
    if dim > 4096:
        raise RuntimeError(
            f"dense propagation infeasible at superoperator dim {dim}"
        )
    dense = bundle.superop.as_dense()
    t_func = trace_functional(bundle.space)
    v = vectorize(np.asarray(rho0, dtype=complex))
    tr0 = t_func @ v

    dts = np.diff(np.concatenate([[0.0], times]))
    dt_max = max(dts.max(), 1e-300)
    keys = np.round(dts / dt_max, 9)
    props: dict[float, np.ndarray] = {}
    for key in np.unique(keys):
        if key == 0.0:
            continue
        dt = dts[keys == key].mean()
        props[key] = sla.expm(dense * dt)

    out = np.empty((times.size, bundle.space.total_dim, bundle.space.total_dim), dtype=complex)
    for i, key in enumerate(keys):
        if key != 0.0:
            v = props[key] @ v
        drift = abs(t_func @ v - tr0)
        if drift > trace_tol * max(1.0, abs(tr0)):
            raise RuntimeError(
                f"trace drift {drift:.3e} at t={times[i]:.6e} exceeds {trace_tol:.1e}"
            )
        out[i] = unvectorize(v, bundle.space)
    return out


def fit_exponential_tail(
    times: np.ndarray,
    values: np.ndarray,
    ss_value: float,
    window: tuple[float, float] = (0.95, 1.0),
) -> FitResult:
    """Fit values(t) - ss_value ~ A exp(-gamma t) on a fractional window.

    The residual is the RMS relative misfit on the window; callers decide
    whether to reject.  Raises when the window has fewer than three
    samples, the signal sits at the numerical floor, or it changes sign
    (a sign change means the window still contains non-exponential
    transients or noise).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    horizon = times[-1]
    t_lo, t_hi = window[0] * horizon, window[1] * horizon
    pad = 1e-12 * max(horizon, 1.0)
    mask = (times >= t_lo - pad) & (times <= t_hi + pad)
    if mask.sum() < 3:
        raise ValueError(
            f"fit window [{t_lo:.3e}, {t_hi:.3e}] contains fewer than 3 samples"
        )
    y = values[mask] - ss_value
    amp0 = max(abs(values[0] - ss_value), 1e-300)
    if np.min(np.abs(y)) < 1e-13 * amp0:
        raise RuntimeError(
            "observable is at the numerical floor inside the fit window"
        )
    if not (np.all(y > 0) or np.all(y < 0)):
        raise RuntimeError("observable crosses its steady value in the window")
    ts = times[mask]
    slope, intercept = np.polyfit(ts, np.log(np.abs(y)), 1)
    gamma = -float(slope)
    amplitude = float(np.sign(y[0]) * np.exp(intercept))
    model = amplitude * np.exp(slope * ts)
    residual = float(np.sqrt(np.mean(((y - model) / y) ** 2)))
    return FitResult(
        gamma=gamma,
        amplitude=amplitude,
        fit_window=(float(t_lo), float(t_hi)),
        residual=residual,
    )


def t1_rate_fit(
    bundle: GeneratorBundle,
    horizon: float | None = None,
    window: tuple[float, float] = (0.95, 1.0),
    n_steps: int = 400,
    residual_tol: float = 1e-2,
    rho_ss: np.ndarray | None = None,
) -> FitResult:
    """Time-domain readout of the slow qubit relaxation rate.

    Evolves the injected-excitation state on a uniform grid out to
    ``horizon`` (default 20 / t1_rate_scale, late enough for fast modes to
    die), then fits the tail of <n_qubit>(t).  A fit residual above
    ``residual_tol`` rejects the fit.
    """
    scale = bundle.t1_rate_scale
    horizon = horizon if horizon is not None else 20.0 / scale
    if rho_ss is None:
        rho_ss = steady_state(bundle)
    rho0 = _injected_excitation(bundle, rho_ss)
    _, _, n_qubit = ladder_operators(bundle.space, 1)
    times = np.linspace(0.0, horizon, n_steps + 1)
    traj = evolve(bundle, rho0, times)
    nvals = np.einsum("tij,ji->t", traj, n_qubit.data).real
    n_ss = float(np.trace(n_qubit.data @ rho_ss).real)
    result = fit_exponential_tail(times, nvals, n_ss, window)
    if result.residual > residual_tol:
        raise RuntimeError(
            f"fit rejected: relative residual {result.residual:.3e} exceeds "
            f"{residual_tol:.1e} (window likely contains transients)"
        )
    return result


def coupled_mode_complex_frequencies(
    omega_c: float,
    omega_a: float,
    kappa_c: float,
    kappa_a: float,
    coherent: float,
    dissipative: float,
) -> tuple[complex, complex]:
    """Normal-mode complex frequencies of two linearly coupled damped modes.

    Amplitude equations: i d/dt (b_c, b_a) = M (b_c, b_a) with
    M = [[omega_c - i kappa_c/2, coherent - i dissipative],
    [coherent - i dissipative, omega_a - i kappa_a/2]].  Returns
    (cavity_like, qubit_like); the energy decay rate of a branch is
    -2 Im(mu).
    """
    m = np.array(
        [
            [omega_c - 0.5j * kappa_c, coherent - 1j * dissipative],
            [coherent - 1j * dissipative, omega_a - 0.5j * kappa_a],
        ]
    )
    mu = np.linalg.eigvals(m)
    if abs(mu[0].real - omega_a) < abs(mu[1].real - omega_a):
        mu = mu[::-1]
    return complex(mu[0]), complex(mu[1])
