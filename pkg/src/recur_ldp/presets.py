"""Built-in models used by the figure commands and the examples.

Every preset is stored as a model document so it can be written to disk
and read back with :func:`recur_ldp.core.load_model`.
"""

from .core import parse_model
from .errors import UnknownFigure

DOCUMENTS = {
    "bern_37": "type=bernoulli\nalphabet=0,1\nprobs=0.3,0.7\n",
    "figP": "type=bernoulli\nalphabet=0,1,2\nprobs=0.2,0.3,0.5\n",
    "figQ": "type=bernoulli\nalphabet=0,1,2\nprobs=0.6,0.3,0.1\n",
    "bern_degenerate": "type=bernoulli\nalphabet=0,1,2\nprobs=0.15,0.15,0.7\n",
    "markov_example": "type=markov\nalphabet=a,b\nrows=0.9,0.1;0.5,0.5\n",
    "period2": "type=markov\nalphabet=a,b\nrows=0,1;1,0\n",
    "uniform2": "type=bernoulli\nalphabet=a,b\nprobs=0.5,0.5\n",
    # finite-hidden-alphabet stand-ins for the countable-state examples:
    # hidden 0 emits a, hidden 1 and 2 emit b; state 2 produces long b-runs
    "hmm_uniform": "type=bernoulli\nalphabet=a,b\nprobs=0.5,0.5\n",
    "hmm_runs": (
        "type=hmm\nalphabet=a,b\nhidden_alphabet=0,1,2\n"
        "hidden_rows=0.5,0.5,0.0;0.3,0.2,0.5;0.1,0.0,0.9\nletter_map=a,b,b\n"
    ),
}

# figure name -> (P preset, Q preset or None, reproducible from a finite model)
FIGURES = {
    "fig1": ("figP", "figQ", True),
    "fig2": ("bern_37", None, True),
    "fig3": ("bern_degenerate", None, True),
    "fig4": ("hmm_uniform", "hmm_runs", False),
    "fig5": ("hmm_runs", None, False),
}


def preset(name):
    """Model for a preset name (see ``DOCUMENTS``)."""
    try:
        return parse_model(DOCUMENTS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(DOCUMENTS)}") from None


def figure_models(name):
    """``(P, Q or None, reproducible)`` for a figure name."""
    if name not in FIGURES:
        raise UnknownFigure(f"unknown figure {name!r}; choose one of {sorted(FIGURES)}")
    p, q, ok = FIGURES[name]
    return preset(p), (preset(q) if q else None), ok


__all__ = ["DOCUMENTS", "FIGURES", "preset", "figure_models"]
