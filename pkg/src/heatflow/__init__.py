"""Numerical and exact checks of entropy-power, McKean and completely monotone
inequalities along the heat flow of one-dimensional Gaussian mixtures."""

from .bell import (
    bell_complete_all,
    bell_partition_oracle,
    bell_scale,
    faa_di_bruno_exp,
    lemma1_check,
    log_derivatives_from_function_derivatives,
    sign_flip,
)
from .conjectures import ConjectureReport, evaluate_conjectures, verify_proposition_chain
from .functionals import (
    FlowFunctionals,
    QuadratureConfig,
    entropy,
    entropy_power_derivatives,
    entropy_time_derivatives,
    fisher_information,
    flow_functionals,
    integrate,
)
from .mixture import FlowedMixture, MixtureSpec, moments

__all__ = [
    "bell_complete_all",
    "bell_partition_oracle",
    "bell_scale",
    "faa_di_bruno_exp",
    "lemma1_check",
    "log_derivatives_from_function_derivatives",
    "sign_flip",
    "ConjectureReport",
    "evaluate_conjectures",
    "verify_proposition_chain",
    "FlowFunctionals",
    "QuadratureConfig",
    "entropy",
    "entropy_power_derivatives",
    "entropy_time_derivatives",
    "fisher_information",
    "flow_functionals",
    "integrate",
    "FlowedMixture",
    "MixtureSpec",
    "moments",
]

__version__ = "0.1.0"
