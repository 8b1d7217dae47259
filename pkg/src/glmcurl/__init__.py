"""GLM curl cleaning for first-order hyperbolic systems and FO-CCZ4."""
import os

# The kernels only need a plain fork-join pool; this also avoids a noisy
# TBB version probe on import.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"
