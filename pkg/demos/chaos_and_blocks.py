"""
Chaos terms and spatial blocks
==============================

W splits into terms with exactly k centered insertions; different orders
are uncorrelated across fields.  Space is cut into blocks of width about
2 sqrt(n), and block-restricted sums feed the upper bracket.
"""

import numpy as np

from dprelab import EnvironmentSpec, FieldHandle, chaos_decompose, log_partition
from dprelab.coarse_grain import block_range, block_tail_mass, tail_statistic
from dprelab.transfer import chaos_orthogonality_probe

h = FieldHandle(3)
d = chaos_decompose(h, 0.7, 10)
print("Theta^(k):", np.round(d.terms, 5))
print("sum", d.total, " W", np.exp(log_partition(h, 0.7, 10)))

p = chaos_orthogonality_probe(EnvironmentSpec(), 0.5, 10, 3, 5000, seed=1)
print("sample variances", np.round(np.diag(p.cov)[1:], 5), " exact", np.round(p.exact_variances[1:], 5))
print("largest off-diagonal z", round(float(np.abs(p.offdiag_z()).max()), 2))

n = 64
print("blocks at n = 64:", [block_range(y, n) for y in (-1, 0, 1)])
for T in (1, 2, 4):
    mass, bound = block_tail_mass(2, T, n, 0)
    print(f"T = {T}  mass of block 2 from the origin {mass:.4f}  vs exp(-4/T) = {bound:.4f}")
for T in (2, 3, 4):
    ts = tail_statistic(EnvironmentSpec(), n ** -0.25, 0.5, T, n, replicas=16, seed=5)
    print(f"T = {T}  theta-tail {ts.value:.3e}  (|I| = {ts.index_set_size})")
