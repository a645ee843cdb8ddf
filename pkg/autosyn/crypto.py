"""Substitutos determinísticos para VRF, KES e oráculo aleatório.

As funcionalidades mantêm um registro interno (como funcionalidades ideais):
a verificação só aceita tuplas produzidas pelo estado secreto correspondente.
"""
from dataclasses import dataclass
from typing import Dict, Optional, Set, Tuple
import hashlib
import logging

logger = logging.getLogger(__name__)

TEST = b"TEST"
NONCE = b"NONCE"


class ForwardSecurityError(RuntimeError):
    """Assinatura KES solicitada para um período já expirado."""


def ro_hash(data: bytes, seed: bytes = b"") -> bytes:
    """Oráculo aleatório semeado (sha256)."""
    return hashlib.sha256(seed + b"|" + data).digest()


class RandomOracle:
    """Oráculo aleatório com contador de consultas."""

    def __init__(self, seed: int = 0):
        self.seed = str(seed).encode()
        self.queries = 0
        self.registered: Set[str] = set()

    def hash(self, data: bytes) -> bytes:
        self.queries += 1
        return ro_hash(data, self.seed)

    def hexdigest(self, data: bytes) -> str:
        return self.hash(data).hex()

    def register(self, party: str) -> None:
        self.registered.add(party)

    def deregister(self, party: str) -> None:
        self.registered.discard(party)

    def is_registered(self, party: str) -> bool:
        return party in self.registered


@dataclass(frozen=True)
class VrfKeypair:
    sk: bytes
    v_vrf: str


@dataclass(frozen=True)
class VrfOutput:
    y: int
    pi: str


@dataclass
class KesKey:
    v_kes: str
    sk: bytes
    current_period: int = 0


def _derive(seed: bytes, label: bytes, party: str) -> bytes:
    return hashlib.sha256(seed + b"|" + label + b"|" + party.encode()).digest()


class VrfFunctionality:
    """VRF ideal: saída uniforme em [0, 2^l_vrf) e prova ligada a (sk, entrada)."""

    def __init__(self, seed: int = 0, l_vrf: int = 32):
        if not 1 <= l_vrf <= 256:
            raise ValueError(f"l_vrf deve estar em [1, 256]: {l_vrf}")
        self.seed = str(seed).encode()
        self.l_vrf = l_vrf
        self._keys: Dict[str, bytes] = {}
        self._outputs: Dict[Tuple[str, bytes], VrfOutput] = {}
        self._programmed: Dict[Tuple[str, bytes], int] = {}

    def keygen(self, party: str) -> VrfKeypair:
        sk = _derive(self.seed, b"vrf-sk", party)
        v_vrf = hashlib.sha256(b"vrf-pk|" + sk).hexdigest()[:32]
        self._keys[v_vrf] = sk
        return VrfKeypair(sk=sk, v_vrf=v_vrf)

    def _compute(self, sk: bytes, v_vrf: str, data: bytes) -> VrfOutput:
        programmed = self._programmed.get((v_vrf, data))
        if programmed is not None:
            y = programmed
        else:
            digest = hashlib.sha256(b"vrf|" + sk + b"|" + data).digest()
            y = int.from_bytes(digest, "big") >> (256 - self.l_vrf)
        pi = hashlib.sha256(b"proof|" + sk + b"|" + data).hexdigest()[:32]
        return VrfOutput(y=y, pi=pi)

    def eval(self, keypair: VrfKeypair, data: bytes) -> VrfOutput:
        out = self._compute(keypair.sk, keypair.v_vrf, data)
        self._outputs[(keypair.v_vrf, data)] = out
        return out

    def verify(self, v_vrf: str, data: bytes, y: int, pi: str) -> bool:
        sk = self._keys.get(v_vrf)
        if sk is None:
            return False
        expected = self._compute(sk, v_vrf, data)
        return expected.y == y and expected.pi == pi

    def program(self, v_vrf: str, data: bytes, y: int) -> None:
        """Fixa a saída de uma entrada (cenários roteirizados)."""
        if not 0 <= y < 2 ** self.l_vrf:
            raise ValueError(f"Saída programada fora de [0, 2^{self.l_vrf}): {y}")
        self._programmed[(v_vrf, data)] = y


class KesFunctionality:
    """Assinaturas com evolução de chave: períodos anteriores ficam inutilizáveis."""

    def __init__(self, seed: int = 0):
        self.seed = str(seed).encode()
        self._keys: Dict[str, bytes] = {}
        self._signed: Set[Tuple[str, int, str]] = set()

    def keygen(self, party: str) -> KesKey:
        sk = _derive(self.seed, b"kes-sk", party)
        v_kes = hashlib.sha256(b"kes-pk|" + sk).hexdigest()[:32]
        self._keys[v_kes] = sk
        return KesKey(v_kes=v_kes, sk=sk)

    @staticmethod
    def _signature(sk: bytes, message: bytes, slot: int) -> str:
        return hashlib.sha256(b"kes|" + sk + b"|" + str(slot).encode() + b"|" + message).hexdigest()

    def sign(self, key: KesKey, message: bytes, slot: int) -> str:
        """Assina ``message`` no período ``slot``.

        Raises:
            ForwardSecurityError: se slot < período corrente da chave
        """
        if slot < key.current_period:
            raise ForwardSecurityError(
                f"Período {slot} já expirado para a chave {key.v_kes} (atual: {key.current_period})"
            )
        sig = self._signature(key.sk, message, slot)
        self._signed.add((key.v_kes, slot, hashlib.sha256(message).hexdigest()))
        key.current_period = slot
        return sig

    def evolve(self, key: KesKey, slot: int) -> None:
        """Evolui a chave para além de ``slot`` (mensagem vazia); nunca regride."""
        key.current_period = max(key.current_period, slot + 1)

    def verify(self, v_kes: str, message: bytes, slot: int, signature: str) -> bool:
        sk = self._keys.get(v_kes)
        if sk is None:
            return False
        if (v_kes, slot, hashlib.sha256(message).hexdigest()) not in self._signed:
            return False
        return self._signature(sk, message, slot) == signature
