"""
签名抽象模块

用每节点私有密钥的带密钥 BLAKE2b 模拟不可伪造的签名：只有持有密钥的节点
（由模拟器代管）能为自己产生有效标签。
"""
import hmac
from dataclasses import dataclass
from hashlib import blake2b
from typing import Dict

import numpy as np

from ..utils.exceptions import SignatureError


@dataclass(frozen=True)
class SignatureTag:
    """签名标签"""
    signer: int
    digest: bytes
    timestamp: int


class SignatureAuthority:
    """密钥代管与签名校验"""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._keys: Dict[int, bytes] = {}
        self.revoked: set = set()

    def enroll(self, node: int) -> None:
        if node not in self._keys:
            self._keys[node] = self._rng.bytes(16)

    def revoke(self, node: int) -> None:
        """吊销证书；已签出的证据仍可校验"""
        self.revoked.add(node)

    def _mac(self, key: bytes, payload: bytes, timestamp: int) -> bytes:
        h = blake2b(payload, key=key, digest_size=16)
        h.update(timestamp.to_bytes(8, "little", signed=False))
        return h.digest()

    def sign(self, signer: int, payload: bytes, timestamp: int) -> SignatureTag:
        """以 signer 的身份签名

        Raises:
            SignatureError: signer 未登记
        """
        key = self._keys.get(signer)
        if key is None:
            raise SignatureError(f"Node {signer} holds no signing key")
        return SignatureTag(signer=signer, digest=self._mac(key, payload, timestamp), timestamp=timestamp)

    def verify(self, tag: SignatureTag, payload: bytes) -> bool:
        key = self._keys.get(tag.signer)
        if key is None:
            return False
        return hmac.compare_digest(tag.digest, self._mac(key, payload, tag.timestamp))
