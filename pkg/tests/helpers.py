"""Shared test utilities: state extraction and transcript forgery."""

import numpy as np

from avowable.crypto import BitString, Ciphertext
from avowable.quantum import QubitId
from avowable.transcript import EventKind, PartyId, Transcript, encode_payload, payload_hash


def pair_state(a: QubitId, b: QubitId) -> np.ndarray:
    """Two-qubit state of (a, b), assuming the pair is unentangled with the rest
    of its register."""
    reg = a.register
    psi = np.moveaxis(reg.amplitudes.reshape((2,) * reg.num_qubits), [a.index, b.index], [-2, -1])
    rows = psi.reshape(-1, 4)
    row = rows[np.argmax(np.linalg.norm(rows, axis=1))]
    return row / np.linalg.norm(row)


def forge_s_a(t: Transcript, rng: np.random.Generator) -> Transcript:
    """Replace S_a, as sent by Alice and as received by Charlie, with the same
    record wrapped under a fresh random key, keeping payload hashes consistent."""
    logged = t.first("s_a", EventKind.SEND, PartyId.ALICE).payload()
    fake = Ciphertext(BitString.random(rng, len(logged)), logged.key_offset)
    enc = encode_payload(fake)
    for e in t.find("s_a"):
        e.details["payload"] = enc
        e.details["payload_hash"] = payload_hash(enc)
    return t
