"""Simulation and exact analysis of two-particle semiquantum secret sharing."""

from .adversary import STRATEGIES, AttackerKnowledge, AttackKind, AttackStrategy
from .cases import ActionKind, CaseClass, PartyAction, classify_case
from .protocol import ProtocolConfig, ProtocolResult, RoundRecord, run_protocol, run_round
from .qstate import Basis, Qubit, StateVector

__version__ = "0.1.0"
