"""Hot pointwise physics kernels with a compiled core and a NumPy fallback.

The multicomponent-MHD solvers evaluate mixture pressure, directional fluxes,
two-state wave speeds, and the Godunov source vector at large batches of
quadrature points every stage; these calls dominate runtime.  A Cython
extension implements them as fused C loops and is selected automatically at
import when available; otherwise the package falls back to the vectorized
NumPy reference implementation with identical semantics.

Set ``GQLIN_KERNELS=python`` (or ``cython``) to force a backend.
``benchmarks/bench_backends.py`` compares the two.

All kernels take C-contiguous ``(n, n_c + 7)`` state batches plus the
per-species heat capacities and specific-heat ratios.
"""

import os

from . import _pykernels

_forced = os.environ.get("GQLIN_KERNELS", "").strip().lower()

_impl = None
if _forced in ("", "cython"):
    try:
        from . import _cykernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = None
        if _forced == "cython":
            raise
if _impl is None:
    _impl = _pykernels

BACKEND = getattr(_impl, "BACKEND", "python")

pressure = _impl.pressure
energy_margin = _impl.energy_margin
flux = _impl.flux
source_vec = _impl.source_vec
wave_speed_pair = _impl.wave_speed_pair

# fused whole-loop kernels exist only in the compiled backend; the solvers
# fall back to their vectorized NumPy assembly when these are absent
HAS_FUSED = hasattr(_impl, "volume_residual")
volume_residual = getattr(_impl, "volume_residual", None)
edge_accumulate = getattr(_impl, "edge_accumulate", None)
scaling_limiter = getattr(_impl, "scaling_limiter", None)
eval_cell_points = getattr(_impl, "eval_cell_points", None)
eval_cell_points_pm = getattr(_impl, "eval_cell_points_pm", None)
interface_quantities = getattr(_impl, "interface_quantities", None)
lf_combine = getattr(_impl, "lf_combine", None)
mean_admissibility = getattr(_impl, "mean_admissibility", None)
tvb_linear = getattr(_impl, "tvb_linear", None)

__all__ = [
    "BACKEND",
    "HAS_FUSED",
    "pressure",
    "energy_margin",
    "flux",
    "source_vec",
    "wave_speed_pair",
    "volume_residual",
    "edge_accumulate",
    "scaling_limiter",
    "eval_cell_points",
    "eval_cell_points_pm",
    "interface_quantities",
    "lf_combine",
    "mean_admissibility",
    "tvb_linear",
]
