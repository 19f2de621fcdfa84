"""Neural regression with Tukey g-and-h predictive distributions.

Public API is re-exported lazily so that importing the bare package (as
the CLI entry point does before applying the TGH_THREADS cap) does not
pull in numpy.
"""

__version__ = "0.1.0"

_SUBMODULES = ("tgh", "loss", "nn", "synth", "data", "config", "evaluate", "errors")


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
