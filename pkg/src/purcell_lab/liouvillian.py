"""Generator (Liouvillian) builders for the four model variants.

Each builder returns a :class:`GeneratorBundle` whose superoperator is
assembled under the repo-wide column-stacking convention.  The hybridized
("blackbox") builder works directly in the dressed basis: the dressed mode
ladder operators ARE the mode operators of the space, and the basis change
is absorbed entirely into the frame constants.  This avoids double-counting
the O(g/Delta) basis rotation.

Builders emit sparse superoperators (the cutoff-scan representation);
spectral-layer consumers convert to dense on demand for small spaces.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fockspace import (
    OperatorMatrix,
    Superoperator,
    TruncatedSpace,
    ladder_operators,
    left_mult,
    lindblad_superoperator,
    right_mult,
    sandwich,
)
from .model import (
    DisplacedFrame,
    DriveParams,
    PolaritonFrame,
    SystemParams,
    bare_hamiltonian,
    polariton_frame,
)


@dataclass(frozen=True)
class TermToggles:
    """Book-keeping switches for the interaction and dissipation terms.

    include_crs : cross-Kerr density-density coupling
    include_nc : nonlinear (excitation-number-dependent) conversion
    include_cd : correlated dissipation coupling the two dressed modes
    include_drive : residual nonlinear drive (displaced builder only)
    """

    include_crs: bool = True
    include_nc: bool = True
    include_cd: bool = True
    include_drive: bool = True


@dataclass(frozen=True)
class GeneratorBundle:
    """A generator plus the context it was built in.

    basis is one of "bare", "blackbox", "displaced", "jc".  frame is the
    PolaritonFrame (bare/blackbox/jc) or DisplacedFrame (displaced) whose
    constants parameterize the generator.
    """

    superop: Superoperator
    frame: object
    basis: str
    toggles: TermToggles
    params: SystemParams
    space: TruncatedSpace

    @property
    def t1_rate_scale(self) -> float:
        """Characteristic slow relaxation rate used for eigensolver shifts."""
        if isinstance(self.frame, DisplacedFrame):
            scale = self.frame.kappa_a_tp
        else:
            scale = self.frame.kappa_a_t
        if scale <= 0:
            scale = 1e-3 * max(
                self.params.kappa_a, self.params.kappa_c, 1e-9
            )
        return scale


def _thermal_channels(kappa, nbar, lower, raise_):
    chans = []
    if kappa > 0:
        chans.append((kappa * (1.0 + nbar), lower))
        if nbar > 0:
            chans.append((kappa * nbar, raise_))
    return chans


def build_bare(params: SystemParams, space: TruncatedSpace) -> GeneratorBundle:
    """Lab-frame generator: bare Hamiltonian plus independent thermal baths."""
    h = bare_hamiltonian(params, space)
    c, cd, _ = ladder_operators(space, 0)
    a, ad, _ = ladder_operators(space, 1)
    chans = _thermal_channels(params.kappa_c, params.nbar_c0, c, cd)
    chans += _thermal_channels(params.kappa_a, params.nbar_a0, a, ad)
    superop = lindblad_superoperator(h, chans, storage="sparse")
    return GeneratorBundle(
        superop=superop,
        frame=polariton_frame(params),
        basis="bare",
        toggles=TermToggles(),
        params=params,
        space=space,
    )


def _blackbox_hamiltonian_terms(
    space: TruncatedSpace,
    omega_c_t: float,
    omega_a_t: float,
    chi_aa: float,
    chi_ca: float,
    chi_t: float,
) -> dict[str, OperatorMatrix]:
    c, cd, nc = ladder_operators(space, 0)
    a, ad, na = ladder_operators(space, 1)
    h0 = omega_c_t * nc + omega_a_t * na
    slf = chi_aa * (ad @ ad @ a @ a)
    crs = chi_ca * (nc @ na)
    nc_op = ad @ ad @ a @ c
    nc_term = chi_t * (nc_op + nc_op.dag())
    return {"h0": h0, "slf": slf, "crs": crs, "nc": nc_term}


def correlated_dissipation_superoperator(
    space: TruncatedSpace, gamma_down: float, gamma_up: float
) -> sp.csr_matrix:
    """Non-secular dissipative coupling between the two dressed modes.

    L_cd rho = -((gamma_up + gamma_down)/2) {a^dag c + c^dag a, rho}
               + gamma_down (a rho c^dag + c rho a^dag)
               + gamma_up   (a^dag rho c + c^dag rho a)

    Trace-preserving for any real gamma_up, gamma_down (the anti-commutator
    line exactly cancels the sandwich lines under the trace).
    """
    c, cd, _ = ladder_operators(space, 0)
    a, ad, _ = ladder_operators(space, 1)
    x = (ad @ c + cd @ a).data
    gen = -0.5 * (gamma_up + gamma_down) * (left_mult(x) + right_mult(x))
    gen = gen + gamma_down * (sandwich(a.data, cd.data) + sandwich(c.data, ad.data))
    gen = gen + gamma_up * (sandwich(ad.data, c.data) + sandwich(cd.data, a.data))
    return gen.tocsr()


def build_blackbox(
    frame: PolaritonFrame,
    params: SystemParams,
    space: TruncatedSpace,
    toggles: TermToggles = TermToggles(),
) -> GeneratorBundle:
    """Dressed-basis generator: independent dressed baths + optional couplings.

    Always includes the dressed harmonic part and the qubit self-Kerr;
    cross-Kerr, nonlinear conversion, and correlated dissipation follow the
    toggles.
    """
    terms = _blackbox_hamiltonian_terms(
        space, frame.omega_c_t, frame.omega_a_t, frame.chi_aa, frame.chi_ca, frame.chi_t
    )
    h = terms["h0"] + terms["slf"]
    if toggles.include_crs:
        h = h + terms["crs"]
    if toggles.include_nc:
        h = h + terms["nc"]
    c, cd, _ = ladder_operators(space, 0)
    a, ad, _ = ladder_operators(space, 1)
    chans = _thermal_channels(frame.kappa_c_t, frame.n_c_t, c, cd)
    chans += _thermal_channels(frame.kappa_a_t, frame.n_a_t, a, ad)
    gen = lindblad_superoperator(h, chans, storage="sparse").data
    if toggles.include_cd:
        gen = gen + correlated_dissipation_superoperator(
            space, frame.gamma_down, frame.gamma_up
        )
    return GeneratorBundle(
        superop=Superoperator(space, gen.tocsr(), storage="sparse"),
        frame=frame,
        basis="blackbox",
        toggles=toggles,
        params=params,
        space=space,
    )


def blackbox_perturbation_parts(
    frame: PolaritonFrame, space: TruncatedSpace
) -> dict[str, Superoperator]:
    """The three interaction terms as separate superoperators.

    Keys: "crs" (cross-Kerr commutator), "nc" (nonlinear conversion
    commutator), "cd" (correlated dissipation).  Their sum is exactly the
    difference between the full dressed generator and the decoupled one.
    """
    terms = _blackbox_hamiltonian_terms(
        space, frame.omega_c_t, frame.omega_a_t, frame.chi_aa, frame.chi_ca, frame.chi_t
    )
    out = {}
    for key in ("crs", "nc"):
        hdata = terms[key].data
        gen = -1j * (left_mult(hdata) - right_mult(hdata))
        out[key] = Superoperator(space, gen.tocsr(), storage="sparse")
    out["cd"] = Superoperator(
        space,
        correlated_dissipation_superoperator(space, frame.gamma_down, frame.gamma_up),
        storage="sparse",
    )
    return out


def displaced_drive_superoperator(
    dframe: DisplacedFrame, space: TruncatedSpace
) -> Superoperator:
    """Residual nonlinear single-photon drive -i[V, .] with
    V = drive_coeff * a^dag a^dag a + h.c. (dressed-mode operators)."""
    a, ad, _ = ladder_operators(space, 1)
    v = dframe.drive_coeff * (ad @ ad @ a).data
    v = v + v.conj().T
    gen = -1j * (left_mult(v) - right_mult(v))
    return Superoperator(space, gen.tocsr(), storage="sparse")


def build_displaced(
    dframe: DisplacedFrame,
    params: SystemParams,
    space: TruncatedSpace,
    toggles: TermToggles = TermToggles(),
) -> GeneratorBundle:
    """Displaced rotating-frame generator (zero-temperature baths only)."""
    if params.nbar_a0 > 0 or params.nbar_c0 > 0:
        raise ValueError(
            "the displaced generator is derived for zero-temperature baths; "
            "got nbar_a0={}, nbar_c0={}".format(params.nbar_a0, params.nbar_c0)
        )
    terms = _blackbox_hamiltonian_terms(
        space,
        dframe.omega_c_tp,
        dframe.omega_a_tp,
        dframe.chi_aa_p,
        dframe.chi_ca_p,
        dframe.chi_t_p,
    )
    h = terms["h0"] + terms["slf"]
    if toggles.include_crs:
        h = h + terms["crs"]
    if toggles.include_nc:
        h = h + terms["nc"]
    c, cd, _ = ladder_operators(space, 0)
    a, ad, _ = ladder_operators(space, 1)
    chans = _thermal_channels(dframe.kappa_c_tp, 0.0, c, cd)
    chans += _thermal_channels(dframe.kappa_a_tp, 0.0, a, ad)
    gen = lindblad_superoperator(h, chans, storage="sparse").data
    if toggles.include_cd:
        gen = gen + correlated_dissipation_superoperator(
            space, dframe.gamma_down_p, 0.0
        )
    if toggles.include_drive:
        gen = gen + displaced_drive_superoperator(dframe, space).data
    return GeneratorBundle(
        superop=Superoperator(space, gen.tocsr(), storage="sparse"),
        frame=dframe,
        basis="displaced",
        toggles=toggles,
        params=params,
        space=space,
    )


def build_jc(params: SystemParams, space: TruncatedSpace) -> GeneratorBundle:
    """Two-level-qubit comparison model: linear coupling, lossy thermal cavity.

    Requires the qubit mode truncated to two levels (the Kerr term vanishes
    identically there) and kappa_a = 0; the cavity bath is the only channel.
    """
    if space.n_modes != 2 or space.dims[1] != 2:
        raise ValueError(
            f"two-level-qubit model needs space dims (d_c, 2), got {space.dims}"
        )
    if params.kappa_a != 0.0:
        raise ValueError("two-level-qubit comparison model assumes kappa_a = 0")
    h = bare_hamiltonian(params, space)  # Kerr term is identically zero at cutoff 2
    c, cd, _ = ladder_operators(space, 0)
    chans = _thermal_channels(params.kappa_c, params.nbar_c0, c, cd)
    superop = lindblad_superoperator(h, chans, storage="sparse")
    return GeneratorBundle(
        superop=superop,
        frame=polariton_frame(params),
        basis="jc",
        toggles=TermToggles(),
        params=params,
        space=space,
    )
