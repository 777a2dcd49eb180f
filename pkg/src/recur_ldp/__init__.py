"""Large deviations of return times, nonoverlapping return times and waiting times.

Exact pressures and rate functions for Bernoulli and Markov measures,
finite-``n`` approximations for hidden Markov measures, exact laws by
enumeration, Monte Carlo estimators and finite-``n`` decoupling checks.
"""

__version__ = "0.1.0"

from .core import Alphabet, Bernoulli, HiddenMarkov, Markov, Word, load_model, parse_model  # noqa: E402
from .errors import *  # noqa: E402,F401,F403

__all__ = ["Alphabet", "Bernoulli", "HiddenMarkov", "Markov", "Word", "load_model", "parse_model", "__version__"]
