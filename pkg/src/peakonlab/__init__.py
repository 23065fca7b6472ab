"""peakonlab: a numerical laboratory for interacting peakon ensembles.

Subpackages cover the mollified particle dynamics, the zero-width limiting
dynamics with sticky and dispersive continuations, a shallow-water reference
system for cross-checks, weak-form residual verification, and mean-field
discretization of initial measures.
"""

from peakonlab.kernels import Mollifier, peak_kernel, peak_kernel_dx

__all__ = ["Mollifier", "peak_kernel", "peak_kernel_dx"]
__version__ = "0.1.0"
