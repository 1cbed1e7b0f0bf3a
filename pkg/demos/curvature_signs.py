"""How curvature sign changes distances between the same two coordinates.

Run: python3 demos/curvature_signs.py
"""

import numpy as np

from kstereo import stereographic as st

x = np.array([[0.3, 0.0]])
y = np.array([[-0.2, 0.4]])

print("kappa      d(x, y)     x (+) y")
for k in (-1.0, -0.1, 0.0, 0.1, 1.0):
    d = float(st.distance(x, y, k)[0])
    s = st.mobius_add(x, y, k)[0]
    print(f"{k:+6.2f}   {d:9.6f}   [{s[0]:+.4f}, {s[1]:+.4f}]")

# a geodesic step has metric length lambda(x) * |u|
u = np.array([[0.05, 0.1]])
for k in (-1.0, 1.0):
    z = st.exp_map(x, u, k)
    lam = float(st.conformal_factor(x, k)[0])
    print(f"kappa {k:+.0f}: d(x, exp_x(u)) = {float(st.distance(x, z, k)[0]):.12f}, "
          f"lambda |u| = {lam * np.linalg.norm(u):.12f}")
