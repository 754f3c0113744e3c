"""Auxiliary-qubit validation and likelihood-based post-selection."""

__version__ = "0.1.0"

from .circuit import (  # noqa: E402
    Circuit,
    CircuitError,
    CircuitSyntaxError,
    Gate,
    Kind,
    MeasurementPoint,
    Qubit,
    Role,
    Verdict,
    check_uncomputation_structure,
    parse_circuit,
    serialize_circuit,
    validation_candidates,
    with_measurements,
)
from .lightcone import Lightcone, LightconeSet, backward_lightcone, lightcone_set  # noqa: E402
from .noise import NoiseParams, ShotBatch, ShotRecord, sample_batch, sample_shot  # noqa: E402
from .postselect import (  # noqa: E402
    Decision,
    PostSelectPolicy,
    Strategy,
    decide,
    decide_batch,
    shot_likelihood,
    single_likelihood,
)
