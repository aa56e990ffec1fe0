"""
Local spectral modes see the channels
=====================================

On a neighborhood cut by high-permeability channels the kappa-weighted
Neumann problem has one near-zero eigenvalue per channel, followed by a
large gap.  Keeping those modes lets the coarse space carry the channels.
"""
# %%
import numpy as np

from mfgmsfem.basis import local_spectral_basis
from mfgmsfem.coarsening import neighborhoods_from_cells
from mfgmsfem.fem import PermeabilityField, build_structured_mesh

mesh = build_structured_mesh(24, 24)
squares = np.ones((24, 24))
for row in (5, 11, 17):
    squares[row:row + 2, 3:21] = 1e4
kappa = PermeabilityField.from_squares(squares.ravel(), mesh)
whole = neighborhoods_from_cells(mesh, [np.arange(mesh.n_cells)])
basis = local_spectral_basis(whole, 0, mesh, kappa, 6)
print("lowest eigenvalues:", np.array2string(basis.eigenvalues, precision=4))
print("gap after the third mode:", basis.eigenvalues[3] / basis.eigenvalues[2])
