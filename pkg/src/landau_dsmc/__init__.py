"""Particle solver for space-homogeneous collisional relaxation of a plasma
in the grazing-collision regime, with polynomial-chaos propagation of
uncertain initial data.

Subpackages follow the pipeline: ``rng``/``basis`` (deterministic streams,
orthonormal basis, quadrature), ``kinetics`` (scattering kernels and the
binary collision transform), ``sgproj`` (coefficient-space collisions and
the collision log), ``schedulers`` (time-stepping drivers), ``observables``
(moments, errors, series), ``benchmarks`` (reference solutions and initial
conditions), ``cli`` (the ``sim`` command).
"""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
