"""SAR despeckling toolkit.

Speckle simulation, a residual CNN filter with from-scratch training,
classical adaptive filters, and evaluation metrics, tied together by a
small binary raster format (SARG) and a command line front end.
"""

__version__ = "0.1.0"
