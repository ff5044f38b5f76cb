"""Wasserstein convergence laboratory for weakly dependent sequences.

Modules: ``transport`` (exact W_r), ``distributions`` (reference laws),
``dynamics`` (intermittent maps), ``transfer_operator`` (Ulam method and
dependence coefficients), ``bounds`` (moment and tail bounds), ``montecarlo``
(experiments) and ``cli``.
"""

__version__ = "0.1.0"
