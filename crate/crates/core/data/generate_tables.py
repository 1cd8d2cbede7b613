#!/usr/bin/env python3
"""Regenerate the bundled atmosphere tables.

Density and speed of sound follow the 1976 U.S. Standard Atmosphere
(NOAA-S/T 76-1562) layer model below 86 km, sampled every 1,000 ft of
geometric altitude from 0 to 150,000 ft and converted to slug/ft^3 and ft/s.
"""
import math
import os

R_EARTH = 6356766.0           # m, effective earth radius for geopotential
G0 = 9.80665                  # m/s^2
R_AIR = 8314.32 / 28.9644     # J/(kg K)
GAMMA = 1.4
FT = 0.3048
KG_M3_TO_SLUG_FT3 = 0.0019403203

# (base geopotential altitude [m], lapse rate [K/m])
LAYERS = [
    (0.0, -0.0065),
    (11000.0, 0.0),
    (20000.0, 0.0010),
    (32000.0, 0.0028),
    (47000.0, 0.0),
    (51000.0, -0.0028),
    (71000.0, -0.0020),
]


def layer_bases():
    t, p = 288.15, 101325.0
    out = []
    for i, (hb, lapse) in enumerate(LAYERS):
        out.append((hb, lapse, t, p))
        if i + 1 < len(LAYERS):
            dh = LAYERS[i + 1][0] - hb
            if lapse == 0.0:
                p = p * math.exp(-G0 * dh / (R_AIR * t))
            else:
                t_next = t + lapse * dh
                p = p * (t_next / t) ** (-G0 / (R_AIR * lapse))
                t = t_next
    return out


def atmosphere(z_m):
    h = R_EARTH * z_m / (R_EARTH + z_m)
    bases = layer_bases()
    hb, lapse, tb, pb = bases[0]
    for b in bases:
        if h >= b[0]:
            hb, lapse, tb, pb = b
    dh = h - hb
    if lapse == 0.0:
        t = tb
        p = pb * math.exp(-G0 * dh / (R_AIR * tb))
    else:
        t = tb + lapse * dh
        p = pb * (t / tb) ** (-G0 / (R_AIR * lapse))
    rho = p / (R_AIR * t)
    a = math.sqrt(GAMMA * R_AIR * t)
    return rho, a


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    dens = ["# 1976 U.S. Standard Atmosphere density", "# altitude_ft  density_slug_per_ft3"]
    sos = ["# 1976 U.S. Standard Atmosphere speed of sound", "# altitude_ft  speed_of_sound_ft_per_s"]
    for alt_ft in range(0, 150001, 1000):
        rho, a = atmosphere(alt_ft * FT)
        dens.append(f"{alt_ft:7d}  {rho * KG_M3_TO_SLUG_FT3:.7e}")
        sos.append(f"{alt_ft:7d}  {a / FT:.4f}")
    with open(os.path.join(here, "us1976_density.dat"), "w") as f:
        f.write("\n".join(dens) + "\n")
    with open(os.path.join(here, "us1976_speed_of_sound.dat"), "w") as f:
        f.write("\n".join(sos) + "\n")


if __name__ == "__main__":
    main()
