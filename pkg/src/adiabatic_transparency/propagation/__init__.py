"""Reduced Maxwell-Schroedinger propagation in the retarded frame (x, tau)."""

from .medium import (
    F_MAX,
    FieldGrid,
    LengthScale,
    MediumParams,
    adiabaticity_lengths,
    b_coefficient,
    depletion_factor_printed,
    df_dtheta,
    f1_printed,
    f_theta,
    group_slowness_w,
    group_slowness_w_printed,
    theta2_speed,
)
from .reduced import energy_audit, fit_slope, mixing_angle, propagate_reduced, regime_closure
from .transport import (
    breaking_length,
    characteristic_theta,
    contour_position,
    gaussian_pair_entrance,
    m_system_transport,
    smooth_ramp,
    theta2_characteristics,
    w_one_photon,
    w_sech_entrance,
    w_system_transport,
)

__all__ = [
    "F_MAX",
    "FieldGrid",
    "LengthScale",
    "MediumParams",
    "adiabaticity_lengths",
    "b_coefficient",
    "breaking_length",
    "characteristic_theta",
    "contour_position",
    "depletion_factor_printed",
    "df_dtheta",
    "energy_audit",
    "f1_printed",
    "f_theta",
    "fit_slope",
    "gaussian_pair_entrance",
    "group_slowness_w",
    "group_slowness_w_printed",
    "m_system_transport",
    "mixing_angle",
    "propagate_reduced",
    "regime_closure",
    "smooth_ramp",
    "theta2_characteristics",
    "theta2_speed",
    "w_one_photon",
    "w_sech_entrance",
    "w_system_transport",
]
