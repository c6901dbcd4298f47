"""Backend selection for the collision hot loops.

The compiled extension (``_corecy``) carries the per-collision scalar loops:
the sequential Bird chain and the pair-batch transform.  When it is missing
(no compiler at install time) the numpy fallback is used; results agree to
floating-point rounding and every run is deterministic within a backend.

Set ``LANDAU_DSMC_BACKEND`` to ``cy`` or ``py`` to force a choice
(``cy`` raises if the extension is unavailable); default is ``auto``.
"""

import os

_requested = os.environ.get("LANDAU_DSMC_BACKEND", "auto")
if _requested not in ("auto", "cy", "py"):
    raise RuntimeError(
        f"LANDAU_DSMC_BACKEND must be 'auto', 'cy' or 'py', got {_requested!r}"
    )

core = None
if _requested in ("auto", "cy"):
    try:
        from . import _corecy as core
    except ImportError:
        if _requested == "cy":
            raise
        core = None
if core is None:
    from . import _pure as core

BACKEND = core.BACKEND_NAME
