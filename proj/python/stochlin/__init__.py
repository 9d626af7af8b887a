"""Mean-square analysis and synthesis for linear Ito systems."""

import json as _json

from ._core import (  # noqa: F401
    InternalConsistencyError,
    InvalidInput,
    NumericalFailure,
    SystemQuad,
    Tolerances,
    __version__,
    closed_loop_lift,
    commands,
    is_exactly_observable,
    is_stabilizable,
    output_lift,
    smat,
    solve_gare_maximal,
    spectrum,
    svec,
    synthesize_quadratic_stabilizer,
)
from ._core import run_command as _run_command


def run(command, document, gain=None, seed=None):
    """Run a CLI command on a document (dict or JSON text).

    Returns (exit_code, report) with the report decoded from JSON.
    """
    text = document if isinstance(document, str) else _json.dumps(document)
    code, report = _run_command(command, text, gain, seed)
    return code, _json.loads(report)
