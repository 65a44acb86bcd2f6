"""Abstract machines for a small functional language and analyses derived from them.

Modules:

* ``syntax``      parser and AST for the lambda language with ``if`` and permissions
* ``machine``     the CESK-style machine, allocation policies and lazy/compiled modes
* ``store``       flat, chained and value-stack stores with change logs
* ``engine``      naive, widened and frontier fixpoint engines
* ``pushdown``    continuation-store analyses with memoization
* ``inspection``  ``terminal``, abstract GC and stack inspection
* ``cli``         command-line front end
"""

from importlib import resources as _resources

__version__ = "0.1.0"


def corpus_dir():
    """Directory of the bundled ``.lif`` programs."""
    return _resources.files(__name__) / "corpus"
