"""
phi-functions and exponential Euler on a scalar decay
=====================================================

phi_1(z) = (e^z - 1)/z loses every digit to cancellation near z = 0 when
evaluated naively.  The library switches to a Taylor series there.
"""
# %%
import numpy as np

from mfgmsfem.linalg import phi

z = -np.logspace(-14, 2, 9)
naive = (np.exp(z) - 1.0) / z
for zi, a, b in zip(z, naive, phi(1, z)):
    print(f"z = {zi:10.2e}   naive {a:.16f}   phi_1 {b:.16f}")

# %%
# One exponential Euler step is exact for p' = -p, whatever the step size;
# backward Euler is only first order.
import scipy.sparse as sp

from mfgmsfem.basis import MultiscaleSpace
from mfgmsfem.timeint import TimeGrid, fine_backward_euler, mfgmsfem_ei_run

one = sp.csr_matrix([[1.0]])
space = MultiscaleSpace(one, np.zeros((1, 2), dtype=int))
p0 = np.array([1.0])
for n in (1, 4, 16, 64):
    grid = TimeGrid(1.0, n)
    be = fine_backward_euler(one, one, None, p0, grid).final[0]
    ei = mfgmsfem_ei_run(space, one, one, None, p0, grid).final[0]
    print(f"N = {n:3d}   backward Euler {be:.12f}   exponential Euler {ei:.12f}"
          f"   exact {np.exp(-1.0):.12f}")
