"""Topological invariants of time-reversal symmetric band structures from gerbe holonomy.

Modules
-------
numerics      small dense linear algebra (logs, Pfaffians, windings)
simplicial    involutive triangulations of tori
deligne       local gerbe data, holonomy and its equivariant square root
wz            Wess-Zumino 3-form quadrature on unitary grids
equivariant   equivariant extensions of maps from tori to unitaries
bands         Bloch models, Fermi unitaries and a Wilson-loop oracle
floquet       driven models, quasienergy gaps, periodized evolutions
pipelines     end-to-end invariant computations
cli           command line front end
"""

from .errors import GerbeholoError

__version__ = "0.1.0"

__all__ = ["GerbeholoError", "__version__"]
