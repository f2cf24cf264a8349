from .model import (Leaf, Measurement, Outcome, ProjTerm, ProtocolTree, Round, rounds,
                    validate)
from .execute import RunReport, execute
from .local import local_identifier, pair_distinguisher
from .builders import build_one_ebit, build_plain, build_two_ebit, input_family

__all__ = [
    "Leaf", "Measurement", "Outcome", "ProjTerm", "ProtocolTree", "Round", "RunReport",
    "build_one_ebit", "build_plain", "build_two_ebit", "execute", "input_family",
    "local_identifier", "pair_distinguisher", "rounds", "validate",
]
