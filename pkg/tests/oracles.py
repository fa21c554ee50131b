"""Expected values derived by hand, independent of the package's numerics.

Areas use the density (|f_x|^2 + |f_y|^2) / 2 integrated in closed form over
the unit disk; each derivation is noted next to its value.
"""

import math

CLIFFORD = "(exp(i*x) + j*exp(i*y))*0.7071067811865476"

# name -> expression
MAPS = {
    "E1": "z",
    "E2": "z^2/2",
    "E3": "z + j*conj(z)^2",
    "E4": "z + j*z^2",
    "E5": CLIFFORD,
}

AREA_UNIT_DISK = {
    "E1": math.pi,  # density 1
    "E2": math.pi / 2,  # density |z|^2
    "E3": 3 * math.pi,  # density 1 + 4|z|^2
    "E4": 3 * math.pi,  # density 1 + 4|z|^2
    "E5": math.pi / 2,  # |f_x| = |f_y| = 1/sqrt(2)
}

# a~ = z, zeta = dz on D_r: area of z^2/2 is pi r^4 / 2 and the bound attains it
BOUND_R = 0.5
BOUND_EXACT = math.pi * BOUND_R**4 / 2  # 0.09817477042468103

# f = z, h = z + 2, g = int h dz with g(0) = 2: g = (z + 2)^2 / 2, fhat = z/2 - 1,
# d(f - fhat) = dz/2 so both sides equal (1/4) pi r^2
DARBOUX_R = 0.8
DARBOUX_EXACT = math.pi * DARBOUX_R**2 / 4

# a~ = z (1 + z) / 2, zeta = dz at r = 0.5: vanishing order 1 so m = 2 and the
# constant is sup |a~| = 1 on the unit disk, giving pi r^4 / 2; the area density
# |z|^2 |1 + z|^2 / 4 integrates to pi (r^4/8 + r^6/12)
GAP_AREA = math.pi * (BOUND_R**4 / 8 + BOUND_R**6 / 12)
GAP_BOUND = math.pi * BOUND_R**4 / 2

# the sixteen products of 1, i, j, k as (sign, unit)
TABLE = {
    ("1", "1"): (1, "1"), ("1", "i"): (1, "i"), ("1", "j"): (1, "j"), ("1", "k"): (1, "k"),
    ("i", "1"): (1, "i"), ("i", "i"): (-1, "1"), ("i", "j"): (1, "k"), ("i", "k"): (-1, "j"),
    ("j", "1"): (1, "j"), ("j", "i"): (-1, "k"), ("j", "j"): (-1, "1"), ("j", "k"): (1, "i"),
    ("k", "1"): (1, "k"), ("k", "i"): (1, "j"), ("k", "j"): (-1, "i"), ("k", "k"): (-1, "1"),
}
