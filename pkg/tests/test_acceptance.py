"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line through the ``acceptance`` fixture (shown
in the terminal summary) and then asserts the same condition.
"""

import math
import time

import numpy as np

from avowable.adversary import EveKind, EveStrategy
from avowable.cli import EXIT_OK, main
from avowable.crypto import (
    BB84_ABORT_QBER,
    BitString,
    Key,
    KeyReuseError,
    bb84_run,
    otp_decrypt,
    otp_encrypt,
)
from avowable.harness import (
    QsdcConfig,
    TeleportConfig,
    adjudicate_transcript,
    execute_qsdc,
    execute_teleport,
)
from avowable.qsdc import SignatureResult
from avowable.quantum import BellOutcome, fidelity_up_to_phase
from avowable.seeding import derive_seed
from avowable.teleport import (
    TeleportKeys,
    TeleportSession,
    ka_bits_needed,
    kb_bits_needed,
    random_state,
)
from avowable.transcript import Claim, Protocol, Transcript, Verdict
from helpers import forge_s_a, pair_state

S = 1 / math.sqrt(2)


def _session(n: int, seed: int, inputs) -> TeleportSession:
    rng = np.random.default_rng(seed)
    keys = TeleportKeys.from_bits(BitString.random(rng, ka_bits_needed(n)), BitString.random(rng, kb_bits_needed(n)))
    return TeleportSession(n, inputs, seed, keys, Transcript("acceptance", seed, Protocol.TELEPORT, {}))


def _open_channel(s: TeleportSession) -> list[BellOutcome]:
    s.request_session()
    s.verify_application()
    return s.swap_entanglement()


def test_1_teleportation_correctness(acceptance):
    start = time.perf_counter()
    fids = []
    for seed in range(50):
        run = execute_teleport(TeleportConfig(20, seed))
        assert run.ok, run.error
        fids.extend(run.fidelities)
    elapsed = time.perf_counter() - start
    worst = max(abs(f - 1) for f in fids)
    ok = len(fids) == 1000 and worst <= 1e-9 and elapsed < 10
    acceptance(1, "teleportation correctness", ok, f"{len(fids)} states, max |F-1| = {worst:.1e}, {elapsed:.2f} s")
    assert ok


def test_2_entanglement_swapping(acceptance):
    counts = np.zeros(4)
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        s = _session(100, seed, [random_state(rng) for _ in range(100)])
        outcomes = _open_channel(s)
        for slot, o in zip(s.slots, outcomes):
            counts[o.value] += 1
            worst = max(worst, abs(1 - fidelity_up_to_phase(pair_state(slot.a, slot.b), o.vector)))
    freqs = counts / counts.sum()
    ok = counts.sum() == 10_000 and np.all(np.abs(freqs - 0.25) <= 0.02) and worst <= 1e-9
    acceptance(2, "entanglement swapping", ok, f"freqs {np.round(freqs, 4).tolist()}, max |F-1| = {worst:.1e}")
    assert ok


def test_3_outcome_uniformity(acceptance):
    kinds = {"|0>": lambda rng: (1, 0), "|+>": lambda rng: (S, S), "random": random_state}
    results, ok = {}, True
    for k, (name, make) in enumerate(kinds.items()):
        counts = np.zeros(4)
        for seed in range(100):
            rng = np.random.default_rng([k, seed])
            s = _session(100, 1000 * k + seed, [make(rng) for _ in range(100)])
            _open_channel(s)
            s.correct_channel(s.alice_receive_outcomes())
            s.alice_measure_and_wrap()
            for o in s.alice_outcomes:
                counts[o.value] += 1
        freqs = counts / counts.sum()
        results[name] = np.round(freqs, 4).tolist()
        ok &= bool(counts.sum() == 10_000 and np.all(np.abs(freqs - 0.25) <= 0.02))
    acceptance(3, "outcome uniformity", ok, ", ".join(f"{k} {v}" for k, v in results.items()))
    assert ok


def test_4_qsdc_round_trip(acceptance):
    rng = np.random.default_rng(4)
    good = 0
    for seed in range(500):
        msg = BitString.random(rng, int(rng.integers(1, 65)))
        run = execute_qsdc(QsdcConfig(msg, seed))
        good += run.decoded == msg and run.result is SignatureResult.ACCEPT
    ok = good == 500
    acceptance(4, "QSDC round trip", ok, f"{good}/500 accepted with M' = M")
    assert ok


def test_5_eavesdropping_detection(acceptance):
    mismatches = checked = 0
    escape = {}
    for c in (5, 10):
        trials, undetected = 5000, 0
        for t in range(trials):
            seed = derive_seed(5, c, t)
            eve = EveStrategy(EveKind.INTERCEPT_RESEND_RANDOM, 1.0, seed=derive_seed(seed, "eve"))
            run = execute_qsdc(QsdcConfig(BitString.zeros(c), seed, eve))
            mismatches += run.report.mismatches
            checked += run.report.checked
            undetected += not run.aborted
        escape[c] = undetected / trials
    rate = mismatches / checked
    ok = checked >= 10_000 and abs(rate - 0.25) <= 0.01
    ok &= all(abs(escape[c] - 0.75**c) <= 0.03 for c in escape)
    detail = f"mismatch {rate:.4f} over {checked} positions; " + ", ".join(
        f"c={c} undetected {escape[c]:.4f} vs {0.75**c:.4f}" for c in escape
    )
    acceptance(5, "eavesdropping detection", ok, detail)
    assert ok


def test_6_tamper_rejection(acceptance):
    rng = np.random.default_rng(6)
    rejected = {}
    for target in ("announced", "digest", "decoded"):
        hits = 0
        for t in range(1000):
            msg = BitString.random(rng, int(rng.integers(1, 33)))
            limit = 256 if target == "digest" else len(msg)
            config = QsdcConfig(msg, t, tamper_target=target, tamper_bit=int(rng.integers(limit)))
            hits += execute_qsdc(config).result is SignatureResult.REJECT
        rejected[target] = hits
    ok = all(v == 1000 for v in rejected.values())
    acceptance(6, "tamper rejection", ok, ", ".join(f"{k} {v}/1000" for k, v in rejected.items()))
    assert ok


def test_7_non_repudiation(acceptance):
    rng = np.random.default_rng(7)
    guilty = flagged = 0
    for seed in range(1000):
        t = execute_teleport(TeleportConfig(8, seed)).transcript
        guilty += all(adjudicate_transcript(t, c).verdict is Verdict.GUILTY for c in Claim)
        forged = forge_s_a(t, rng)
        flagged += adjudicate_transcript(forged, Claim.ALICE_DENIES_SENDING).verdict is Verdict.FORGERY
    ok = guilty == 1000 and flagged >= 999
    acceptance(7, "non-repudiation", ok, f"honest Guilty {guilty}/1000, forged flagged {flagged}/1000 (n = 8)")
    assert ok


def test_8_one_time_pad(acceptance):
    rng = np.random.default_rng(8)
    round_trips = 0
    ones = np.zeros(64)
    for _ in range(10_000):
        n = 64
        key_bits, msg = BitString.random(rng, n), BitString.random(rng, n)
        c = otp_encrypt(Key(key_bits, ("A", "C")), msg)
        round_trips += otp_decrypt(Key(key_bits, ("A", "C")), c) == msg
    fixed = BitString.random(rng, 64)
    for _ in range(10_000):
        ones += np.array(otp_encrypt(Key(BitString.random(rng, 64), ("A", "C")), fixed).bits)
    freq = ones / 10_000
    refused = 0
    for _ in range(10_000):
        k = Key(BitString.random(rng, 32), ("A", "C"))
        used = int(rng.integers(1, 32))
        otp_encrypt(k, BitString.zeros(used))
        try:
            otp_encrypt(k, BitString.zeros(1), offset=int(rng.integers(0, used)))
        except KeyReuseError:
            refused += 1
    ok = round_trips == 10_000 and np.all(np.abs(freq - 0.5) <= 0.02) and refused == 10_000
    detail = f"round trips {round_trips}/10000, bit freq in [{freq.min():.4f}, {freq.max():.4f}], reuse refused {refused}/10000"
    acceptance(8, "one-time pad", ok, detail)
    assert ok


def test_9_determinism(acceptance, tmp_path, capsys):
    rng = np.random.default_rng(9)
    exits = []
    for k in range(100):
        path = tmp_path / f"run{k}.jsonl"
        if k % 2:
            execute_teleport(TeleportConfig(int(rng.integers(1, 6)), k)).transcript.save(path)
        else:
            eve = EveStrategy(EveKind.INTERCEPT_RESEND_RANDOM, 0.5, seed=k) if k % 4 == 0 else None
            msg = BitString.random(rng, int(rng.integers(1, 17)))
            execute_qsdc(QsdcConfig(msg, k, eve, check_threshold=2)).transcript.save(path)
        exits.append(main(["replay", "--transcript", str(path)]))
    capsys.readouterr()
    good = sum(e == EXIT_OK for e in exits)
    ok = good == 100
    acceptance(9, "determinism", ok, f"{good}/100 transcripts replayed byte-identically")
    assert ok


def test_10_bb84(acceptance):
    identical = 0
    fractions = []
    for seed in range(100):
        run = bb84_run(512, seed)
        identical += run.alice_sifted == run.bob_sifted and run.alice_key == run.bob_key
        fractions.append(run.sifted_fraction)
    qbers, aborts, samples = [], 0, []
    for seed in range(200):
        eve = EveStrategy(EveKind.INTERCEPT_RESEND_RANDOM, 1.0, seed=derive_seed(seed, "bb84-eve"))
        run = bb84_run(640, 10_000 + seed, eve)  # about 320 sampled bits per run
        qbers.append(run.qber)
        samples.append(len(run.sample_positions))
        aborts += run.qber > BB84_ABORT_QBER
    frac, qber = float(np.mean(fractions)), float(np.mean(qbers))
    ok = identical == 100 and abs(frac - 0.5) <= 0.02
    ok &= abs(qber - 0.25) <= 0.02 and aborts / 200 >= 0.99 and min(samples) >= 256
    detail = (
        f"identical keys {identical}/100, sifted fraction {frac:.4f}; "
        f"intercept-resend qber {qber:.4f}, aborts {aborts}/200, min sample {min(samples)}"
    )
    acceptance(10, "BB84 layer", ok, detail)
    assert ok
