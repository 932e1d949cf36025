"""Simulator for arbitrated teleportation and hash-signed QSDC, with
eavesdropping and dispute adjudication."""

from avowable.crypto import BitString, Ciphertext, Digest, Key, hash_digest, otp_decrypt, otp_encrypt
from avowable.harness import QsdcConfig, TeleportConfig, adjudicate, replay, run_qsdc, run_teleport
from avowable.quantum import BellOutcome, PauliOp, StateVector, fidelity_up_to_phase, new_register
from avowable.transcript import Claim, Transcript, Verdict

__all__ = [
    "BellOutcome",
    "BitString",
    "Ciphertext",
    "Claim",
    "Digest",
    "Key",
    "PauliOp",
    "QsdcConfig",
    "StateVector",
    "TeleportConfig",
    "Transcript",
    "Verdict",
    "adjudicate",
    "fidelity_up_to_phase",
    "hash_digest",
    "new_register",
    "otp_decrypt",
    "otp_encrypt",
    "replay",
    "run_qsdc",
    "run_teleport",
]
