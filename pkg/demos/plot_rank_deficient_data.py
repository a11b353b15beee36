"""
When the data cannot be enough
==============================

If the recorded states never span the whole state space, some directions
were never excited.  Plants that differ only along those directions explain
the data equally well, and they can be as unstable as we like.
"""

import numpy as np

from quantstab import build_ellipsoid, build_witness, informativity_report, membership
from quantstab.fixtures import example1
from quantstab.lti import spectral_radius

###############################################################################
# Two samples along one direction
# -------------------------------
# Both recorded states equal ``e1``.  Every nilpotent ``[[0, k], [0, 0]]`` is
# consistent, yet those plants all have zero spectrum.

data, B, bound = example1()
ell = build_ellipsoid(data, B, bound)
for k in (0.0, 1.0, 1e3, 1e6):
    print(f"k={k:g}: consistent={membership(ell, np.array([[0.0, k], [0.0, 0.0]]))}")

###############################################################################
# A family with growing eigenvalues
# ---------------------------------
# Moving along the unexcited direction keeps consistency and pushes an
# eigenvalue out linearly in ``k``.

w = build_witness(ell, data)
for k in (10.0, 1e3, 1e5):
    A = w.matrix(k)
    print(f"k={k:g}: consistent={membership(ell, A)}, spectral radius={spectral_radius(A):.3g}")

print(informativity_report(data, ell))
