"""Paillier cryptosystem with g = n + 1 and a signed fixed-point codec.

Not hardened: no constant-time arithmetic, no CCA protection.  Randomness is
passed in explicitly so simulation runs are reproducible.
"""
from __future__ import annotations

import json
import math
import random
import secrets
from dataclasses import dataclass
from typing import Union

from .errors import (
    InvalidCiphertext,
    PlaintextOutOfRange,
    PrimeGenFailed,
    ValueOutOfRange,
)

try:
    import gmpy2

    def powmod(base: int, exp: int, mod: int) -> int:
        return int(gmpy2.powmod(base, exp, mod))

except ImportError:  # pragma: no cover
    powmod = pow

Rng = Union[random.Random, secrets.SystemRandom]

_SMALL_PRIMES = [p for p in range(3, 1000) if all(p % d for d in range(2, int(p**0.5) + 1))]


def _rng(seed: int | Rng | None) -> Rng:
    if seed is None:
        return secrets.SystemRandom()
    if isinstance(seed, random.Random):
        return seed
    return random.Random(seed)


def is_probable_prime(n: int, rounds: int = 40, rng: Rng | None = None) -> bool:
    """Miller-Rabin with ``rounds`` random bases."""
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    rng = rng or random.Random(n)
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = powmod(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def random_prime(bits: int, rng: Rng, max_tries: int = 100_000) -> int:
    """Random probable prime with exactly ``bits`` bits."""
    if bits < 2:
        raise ValueError("bits must be >= 2")
    for _ in range(max_tries):
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if is_probable_prime(cand, rng=rng):
            return cand
    raise PrimeGenFailed(f"no {bits}-bit prime found in {max_tries} tries")


@dataclass(frozen=True)
class PaillierPublicKey:
    n: int
    g: int
    n_squared: int

    @classmethod
    def from_n(cls, n: int) -> "PaillierPublicKey":
        return cls(n, n + 1, n * n)

    def to_json(self) -> dict[str, str]:
        return {"n": format(self.n, "x"), "g": format(self.g, "x")}

    @classmethod
    def from_json(cls, data: dict[str, str]) -> "PaillierPublicKey":
        n = int(data["n"], 16)
        return cls(n, int(data["g"], 16), n * n)


@dataclass(frozen=True)
class PaillierPrivateKey:
    lambda_: int
    mu: int
    p: int
    q: int

    def to_json(self) -> dict[str, str]:
        return {k: format(getattr(self, k), "x") for k in ("lambda_", "mu", "p", "q")}

    @classmethod
    def from_json(cls, data: dict[str, str]) -> "PaillierPrivateKey":
        return cls(*(int(data[k], 16) for k in ("lambda_", "mu", "p", "q")))

    def __repr__(self) -> str:
        return "PaillierPrivateKey(<redacted>)"


@dataclass(frozen=True)
class Ciphertext:
    value: int

    def hex(self) -> str:
        return format(self.value, "x")


def _L(x: int, n: int) -> int:
    return (x - 1) // n


def keypair_from_primes(p: int, q: int) -> tuple[PaillierPublicKey, PaillierPrivateKey]:
    if p == q:
        raise ValueError("p and q must differ")
    n = p * q
    pub = PaillierPublicKey.from_n(n)
    lam = math.lcm(p - 1, q - 1)
    mu = pow(_L(powmod(pub.g, lam, pub.n_squared), n), -1, n)
    return pub, PaillierPrivateKey(lam, mu, p, q)


def keygen(prime_bits: int = 512, seed: int | Rng | None = None, max_retries: int = 32):
    """Fresh keypair built from two distinct ``prime_bits``-bit primes.

    Returns:
        ``(PaillierPublicKey, PaillierPrivateKey)``.
    """
    if prime_bits < 16:
        raise ValueError("prime_bits must be >= 16")
    rng = _rng(seed)
    for _ in range(max_retries):
        p = random_prime(prime_bits, rng)
        q = random_prime(prime_bits, rng)
        if p != q and math.gcd(p * q, (p - 1) * (q - 1)) == 1:
            return keypair_from_primes(p, q)
    raise PrimeGenFailed("could not find a usable prime pair")


def encrypt(pub: PaillierPublicKey, m: int, seed: int | Rng | None = None) -> Ciphertext:
    """c = g^m r^n mod n^2 with fresh r coprime to n; g^m = 1 + m n for g = n + 1."""
    if not 0 <= m < pub.n:
        raise PlaintextOutOfRange(f"plaintext must lie in [0, n)")
    rng = _rng(seed)
    while True:
        r = rng.randrange(1, pub.n)
        if math.gcd(r, pub.n) == 1:
            break
    c = (1 + m * pub.n) % pub.n_squared * powmod(r, pub.n, pub.n_squared) % pub.n_squared
    return Ciphertext(c)


def decrypt(priv: PaillierPrivateKey, pub: PaillierPublicKey, c: Ciphertext) -> int:
    """m = L(c^lambda mod n^2) * mu mod n."""
    if not 1 <= c.value < pub.n_squared or math.gcd(c.value, pub.n) != 1:
        raise InvalidCiphertext("ciphertext is not a unit modulo n^2")
    return _L(powmod(c.value, priv.lambda_, pub.n_squared), pub.n) * priv.mu % pub.n


def hom_add(pub: PaillierPublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """E(m1) * E(m2) = E(m1 + m2 mod n)."""
    return Ciphertext(c1.value * c2.value % pub.n_squared)


def hom_scale(pub: PaillierPublicKey, c: Ciphertext, a: int) -> Ciphertext:
    """E(m)^a = E(a m mod n) for integer a >= 0."""
    if a < 0:
        raise ValueError("scale factor must be a non-negative integer")
    return Ciphertext(powmod(c.value, a, pub.n_squared))


@dataclass(frozen=True)
class FixedPointCodec:
    """Signed reals <-> Z_n: round(x 2^f), negatives as n - |.|.

    A product of two encoded values sits at scale level 2 (factor 2^(2f)).
    """

    frac_bits: int
    modulus: int

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def max_abs(self) -> float:
        """Largest |x| accepted by :meth:`encode` so that level-2 products stay signed."""
        return self.modulus / 2 ** (2 * self.frac_bits + 2)

    def encode(self, x: float) -> int:
        if not math.isfinite(x) or abs(x) >= self.max_abs:
            raise ValueOutOfRange(f"{x!r} outside codec range +-{self.max_abs:.3g}")
        m = round(x * self.scale)
        return m % self.modulus

    def decode(self, m: int, scale_levels: int = 1) -> float:
        if scale_levels not in (1, 2):
            raise ValueError("scale_levels must be 1 or 2")
        m %= self.modulus
        if m > self.modulus // 2:
            m -= self.modulus
        return m / self.scale**scale_levels


def dump_keys(pub: PaillierPublicKey, priv: PaillierPrivateKey | None = None) -> str:
    data = {"public": pub.to_json()}
    if priv is not None:
        data["private"] = priv.to_json()
    return json.dumps(data)


def load_keys(text: str) -> tuple[PaillierPublicKey, PaillierPrivateKey | None]:
    data = json.loads(text)
    priv = PaillierPrivateKey.from_json(data["private"]) if "private" in data else None
    return PaillierPublicKey.from_json(data["public"]), priv
