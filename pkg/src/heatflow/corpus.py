"""Named test mixtures.

``CORPUS`` holds the bimodal and asymmetric mixtures used for evidence runs.
``EP_COUNTEREXAMPLES`` are well-separated bimodal mixtures for which the
entropy power inequality at orders 3 and 4 fails numerically at small ``t``
while the McKean and completely monotone inequalities still hold.
"""

from .mixture import MixtureSpec

CORPUS = {
    "symmetric-bimodal": MixtureSpec.from_components([(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)]),
    "asymmetric-bimodal": MixtureSpec.from_components([(0.3, -1.0, 0.5), (0.7, 2.0, 2.0)]),
    "skewed-bimodal": MixtureSpec.from_components([(0.2, -3.0, 0.5), (0.8, 1.0, 1.0)]),
    "trimodal": MixtureSpec.from_components([(0.25, -2.0, 0.3), (0.5, 0.0, 1.0), (0.25, 2.5, 0.6)]),
    "lopsided": MixtureSpec.from_components([(0.7, 0.0, 0.5), (0.3, 3.0, 1.0)]),
}

EP_COUNTEREXAMPLES = {
    "narrow-bimodal": MixtureSpec.from_components([(0.5, -1.5, 0.25), (0.5, 1.5, 0.25)]),
    "separated-bimodal": MixtureSpec.from_components([(0.5, -3.0, 1.0), (0.5, 3.0, 1.0)]),
}

STANDARD_GAUSSIAN = MixtureSpec.gaussian()
