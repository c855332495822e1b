"""Thermal emission shading: color ramp, Schlick Fresnel and view-angle falloff."""
from __future__ import annotations

import numpy as np

from .mesh import ThermalMaterial


def fresnel_schlick(cos_theta, f0):
    """Schlick reflectance ``f0 + (1 - f0) * (1 - cos)^5``; cos is clamped to [0, 1]."""
    c = np.clip(cos_theta, 0.0, 1.0)
    out = f0 + (1.0 - f0) * (1.0 - c) ** 5
    return float(out) if np.ndim(out) == 0 else out


def ramp_eval(ramp, t):
    """Piecewise-linear lookup; ``t`` outside [0, 1] is clamped."""
    pos = np.array([p for p, _ in ramp], dtype=np.float64)
    val = np.array([v for _, v in ramp], dtype=np.float64)
    out = np.interp(np.clip(t, 0.0, 1.0), pos, val)
    return float(out) if np.ndim(out) == 0 else out


def shade_thermal(material: ThermalMaterial, cos_theta):
    """Apparent emission in [0, 1] for a surface seen at ``cos_theta``.

    Face-on emission comes from the ramp at the material temperature; the
    non-reflected share ``1 - F`` raised to ``angle_falloff`` dims it toward
    grazing angles, so output is maximal face-on.
    """
    base = ramp_eval(material.ramp, material.temperature_norm)
    emissive = 1.0 - fresnel_schlick(cos_theta, material.fresnel_f0)
    out = base * np.power(np.clip(emissive, 0.0, 1.0), material.angle_falloff)
    return float(out) if np.ndim(out) == 0 else out
