"""
回执/见证人模块

匿名路径上的每个中继把消息转发给下一跳后应收到下一跳签名的回执；
截止前没有收到时，请求自己的见证人（后继与前驱）代为投递，见证人转交回执
或签署投递失败声明。所有证据在发送时同步生成，由 CA 在收到报告后逐跳核查。
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from .adversary import DropStrategy
from .signing import SignatureAuthority, SignatureTag


def _receipt_payload(message_id: int, forwarder: int, receiver: int) -> bytes:
    return f"receipt|{message_id}|{forwarder}|{receiver}".encode("ascii")


def _statement_payload(message_id: int, forwarder: int, receiver: int, witness: int) -> bytes:
    return f"failure|{message_id}|{forwarder}|{receiver}|{witness}".encode("ascii")


@dataclass(frozen=True)
class Receipt:
    """receiver 签署的收讫回执"""
    message_id: int
    forwarder: int
    receiver: int
    tag: SignatureTag
    via_witness: Optional[int] = None

    def verify(self, authority: SignatureAuthority) -> bool:
        return self.tag.signer == self.receiver and authority.verify(
            self.tag, _receipt_payload(self.message_id, self.forwarder, self.receiver)
        )


@dataclass(frozen=True)
class FailureStatement:
    """见证人签署的投递失败声明"""
    message_id: int
    forwarder: int
    receiver: int
    witness: int
    tag: SignatureTag

    def verify(self, authority: SignatureAuthority) -> bool:
        return self.tag.signer == self.witness and authority.verify(
            self.tag, _statement_payload(self.message_id, self.forwarder, self.receiver, self.witness)
        )


@dataclass(frozen=True)
class HopEvidence:
    """一个转发义务（forwarder → next_hop）对应的证据"""
    forwarder: int
    next_hop: int
    receipt: Optional[Receipt] = None
    statements: Tuple[FailureStatement, ...] = ()

    @property
    def empty(self) -> bool:
        return self.receipt is None and not self.statements


@dataclass
class DeliveryEvidence:
    """一次路径传输的全部逐跳证据"""
    message_id: int
    path: Tuple[int, ...]
    sent_at: int
    hops: List[HopEvidence] = field(default_factory=list)
    dropped_at: Optional[int] = None
    strategy: Optional[DropStrategy] = None

    def for_forwarder(self, node: int) -> Optional[HopEvidence]:
        for hop in self.hops:
            if hop.forwarder == node:
                return hop
        return None


class ReceiptProtocol:
    """回执往返

    Args:
        authority: 签名代管
        witnesses_of: 返回某节点见证人集合（其后继与前驱）
        alive: 存活判断
    """

    def __init__(
        self,
        authority: SignatureAuthority,
        witnesses_of: Callable[[int], Sequence[int]],
        alive: Callable[[int], bool],
    ):
        self.authority = authority
        self.witnesses_of = witnesses_of
        self.alive = alive
        self._next_id = 0
        self.receipts = 0
        self.statements = 0

    def _receipt(self, message_id: int, forwarder: int, receiver: int, now: int, witness: Optional[int] = None) -> Receipt:
        self.receipts += 1
        payload = _receipt_payload(message_id, forwarder, receiver)
        return Receipt(message_id, forwarder, receiver, self.authority.sign(receiver, payload, now), witness)

    def _statements(self, message_id: int, forwarder: int, receiver: int, now: int) -> Tuple[FailureStatement, ...]:
        out = []
        for w in self.witnesses_of(forwarder):
            if w == receiver or not self.alive(w):
                continue
            payload = _statement_payload(message_id, forwarder, receiver, w)
            out.append(FailureStatement(message_id, forwarder, receiver, w, self.authority.sign(w, payload, now)))
        self.statements += len(out)
        return tuple(out)

    def roundtrip(
        self,
        message_id: int,
        forwarder: int,
        receiver: int,
        now: int = 0,
        receiver_cooperates: bool = True,
        witness_only: bool = False,
    ) -> HopEvidence:
        """forwarder 向 receiver 转发一次消息并收集证据

        Args:
            message_id: 消息编号
            forwarder: 转发者 X
            receiver: 下一跳 Y
            receiver_cooperates: Y 是否向 X 直接回执
            witness_only: Y 只向见证人回执

        Returns:
            HopEvidence: 回执、失败声明或两者皆无
        """
        if self.alive(receiver) and receiver_cooperates and not witness_only:
            return HopEvidence(forwarder, receiver, receipt=self._receipt(message_id, forwarder, receiver, now))
        if self.alive(receiver) and witness_only:
            witnesses = [w for w in self.witnesses_of(forwarder) if w != receiver and self.alive(w)]
            if witnesses:
                return HopEvidence(
                    forwarder,
                    receiver,
                    receipt=self._receipt(message_id, forwarder, receiver, now, witness=witnesses[0]),
                )
        return HopEvidence(forwarder, receiver, statements=self._statements(message_id, forwarder, receiver, now))

    def transmit(
        self,
        path: Sequence[int],
        now: int,
        drop_at: Optional[int] = None,
        strategy: Optional[DropStrategy] = None,
    ) -> DeliveryEvidence:
        """沿 path 传输并生成逐跳证据；drop_at 为丢包中继在 path 中的下标

        丢包者之前的各跳正常回执；丢包者对上一跳按 strategy 处理回执；
        丢包者自身没有转发，因此拿不出下一跳的任何证据。
        """
        message_id = self._next_id
        self._next_id += 1
        evidence = DeliveryEvidence(message_id, tuple(path), now, dropped_at=drop_at, strategy=strategy)
        last = len(path) - 1
        for k in range(1, last):
            forwarder, receiver = path[k], path[k + 1]
            if drop_at is not None and k == drop_at:
                evidence.hops.append(HopEvidence(forwarder, receiver))
                break
            if drop_at is not None and k + 1 == drop_at:
                evidence.hops.append(
                    self.roundtrip(
                        message_id,
                        forwarder,
                        receiver,
                        now,
                        receiver_cooperates=strategy is not DropStrategy.WITHHOLD,
                        witness_only=strategy is DropStrategy.WITNESS_ONLY,
                    )
                )
                continue
            evidence.hops.append(self.roundtrip(message_id, forwarder, receiver, now))
        return evidence

    def attributes(self, evidence: DeliveryEvidence) -> bool:
        """证据能否指认丢包的中继

        某个转发者拿不出任何证据，或见证人声明投递失败而接收者仍存活时成立；
        接收者已经离开造成的丢失不成立。
        """
        for hop in evidence.hops:
            if hop.empty:
                return True
            if hop.receipt is None and self.alive(hop.next_hop):
                return True
        return False
