"""Hybrid local/global optimisation with doubly stochastic coordinate descent.

Modules:

* :mod:`dscd.objective` benchmark functions and the objective interface
* :mod:`dscd.proposal` Beta-annealed coordinate proposals
* :mod:`dscd.global_step` the DSCD global step and its loss window
* :mod:`dscd.local` Adam and learning-rate schedules
* :mod:`dscd.hybrid` local/global alternation and run traces
* :mod:`dscd.bilevel` toy differentiable architecture search
* :mod:`dscd.harness` replicated benchmarks, aggregation, CSV/JSON output
"""

from .global_step import DscdState, LossWindow, dscd_step, window_best
from .hybrid import HybridConfig, HybridOptimizer, RunTrace, run_adam, run_baseline_uniform, run_dscd, run_hybrid
from .local import AdamState, LrSchedule, adam_step, lr_at
from .objective import ObjectiveSpec, evaluate, get_objective, gradient, schwefel, styblinski_tang
from .proposal import BetaParams, ConcentrationSchedule, ProposalDomain, beta_params, phi_at, sample_proposal

__version__ = "0.1.0"
