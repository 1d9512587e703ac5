"""Exact and numerical tools for the XXZ chain fractured by a staggered edge field.

Submodules:

- ``exactalg``, ``qprod``: truncated q-series with Laurent-polynomial coefficients
  and infinite q-products.
- ``model``: R- and K-matrices and the field map.
- ``freefield``: mode coefficients, vacuum norms and the overlap.
- ``correlator``: integrand inventory and exact series extraction.
- ``magnet``: site-1 magnetisation series and curves.
- ``numkernel``: residue-sum evaluation and the qKZ checks.
- ``edlab``: finite-chain exact diagonalisation.
- ``cli``: the ``fxxz`` command.
"""

__version__ = "0.1.0"
