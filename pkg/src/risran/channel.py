"""Channel coefficients and the composite RIS-assisted power gain.

Path loss is amplitude-domain, g = d**(-alpha/2), so power scales d**(-alpha).
Direct BS-UE and RIS-UE links are NLOS Rayleigh; the BS-RIS link is a
deterministic LOS phasor per element. The composite gain is

    G = |direct + sum_n beta * exp(j*theta_n) * ris_to_ue[n] * bs_to_ris[n]|**2
"""

from __future__ import annotations

import warnings

import numpy as np

from .scenario import BaseStationSpec, Position, RisSpec

TWO_PI = 2.0 * np.pi


def _pathloss_amplitude(distance: float, exponent: float) -> float:
    if distance <= 0:
        raise ValueError("zero distance: path loss undefined")
    return distance ** (-exponent / 2.0)


def rayleigh_fading(rng: np.random.Generator, size=None) -> np.ndarray:
    """CN(0,1) draws: zero-mean complex Gaussian with unit power."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) / np.sqrt(2.0)


def direct_channel(bs: BaseStationSpec, ue_pos: Position, alpha_nlos: float,
                   rng: np.random.Generator) -> complex:
    """NLOS BS-to-UE coefficient: path loss times a CN(0,1) fading draw."""
    g = _pathloss_amplitude(bs.position.distance_to(ue_pos), alpha_nlos)
    return g * complex(rayleigh_fading(rng))


def ris_element_positions(ris: RisSpec, bs_pos: Position) -> np.ndarray:
    """Element coordinates of the uniform linear array, broadside to the BS.

    The panel is centred at ris.position and laid out perpendicular to the
    BS-to-panel line so successive elements see distinct BS distances.
    """
    c = ris.position.as_array()
    d = c - bs_pos.as_array()
    norm = np.hypot(*d)
    if norm <= 0:
        raise ValueError("zero distance: RIS placed on top of the BS")
    perp = np.array([-d[1], d[0]]) / norm
    n = ris.num_elements
    offsets = (np.arange(n) - (n - 1) / 2.0) * ris.element_spacing
    return c[None, :] + offsets[:, None] * perp[None, :]


def bs_ris_channel(bs_pos: Position, ris: RisSpec, wavelength: float,
                   alpha_los: float) -> np.ndarray:
    """LOS BS-to-RIS coefficients, one unit-modulus phasor per element.

    Per-element distances set the phases; the panel-centre distance sets the
    common path-loss amplitude.
    """
    g = _pathloss_amplitude(bs_pos.distance_to(ris.position), alpha_los)
    elem = ris_element_positions(ris, bs_pos)
    d_n = np.hypot(elem[:, 0] - bs_pos.x, elem[:, 1] - bs_pos.y)
    return g * np.exp(-2j * np.pi * d_n / wavelength)


def ris_ue_channel(ris: RisSpec, ue_pos: Position, alpha_nlos: float,
                   rng: np.random.Generator) -> np.ndarray:
    """NLOS RIS-to-UE coefficients: shared path loss, i.i.d. fading per element."""
    g = _pathloss_amplitude(ris.position.distance_to(ue_pos), alpha_nlos)
    return g * rayleigh_fading(rng, ris.num_elements)


def optimal_phase_shifts(direct: complex, bs_to_ris: np.ndarray,
                         ris_to_ue: np.ndarray) -> np.ndarray:
    """Per-element shifts aligning every reflected term with the direct one.

    theta_n = arg(direct) - arg(bs_to_ris[n] * ris_to_ue[n]), in [0, 2*pi).
    Zero-magnitude coefficients have no phase; those elements get theta = 0.
    """
    bs_to_ris = np.asarray(bs_to_ris)
    ris_to_ue = np.asarray(ris_to_ue)
    if bs_to_ris.shape != ris_to_ue.shape:
        raise ValueError("coefficient lists must share length")
    product = bs_to_ris * ris_to_ue
    degenerate = (product == 0) | (direct == 0)
    if np.any(degenerate):
        warnings.warn("zero-magnitude coefficient: defaulting phase shift to 0",
                      stacklevel=2)
    theta = np.where(degenerate, 0.0,
                     np.angle(direct) - np.angle(np.where(product == 0, 1, product)))
    return np.mod(theta, TWO_PI)


def quantize_phases(theta: np.ndarray, psr_bits: int) -> np.ndarray:
    """Snap each phase to the nearest of the 2**b uniform grid points.

    Wrap-around aware: values just below 2*pi snap to 0.
    """
    if psr_bits < 1:
        raise ValueError("psr_bits must be >= 1")
    levels = 2 ** psr_bits
    step = TWO_PI / levels
    return np.mod(np.round(np.asarray(theta, dtype=float) / step) * step, TWO_PI)


def composite_gain(direct: complex, bs_to_ris: np.ndarray, ris_to_ue: np.ndarray,
                   theta: np.ndarray, beta) -> float:
    """Power gain of the direct plus RIS-reflected superposition.

    With beta = 0 (or empty element lists) this reduces to |direct|**2, the
    degenerate form used for links without an assigned panel.
    """
    bs_to_ris = np.asarray(bs_to_ris)
    ris_to_ue = np.asarray(ris_to_ue)
    theta = np.asarray(theta, dtype=float)
    if not (bs_to_ris.shape == ris_to_ue.shape == theta.shape):
        raise ValueError("coefficient and phase lists must share length")
    reflected = np.sum(beta * np.exp(1j * theta) * ris_to_ue * bs_to_ris)
    return float(np.abs(direct + reflected) ** 2)
