"""
可链接性推断模块

攻击者视角下的查询可观测性与可链接性。每个查询的路径是
I → A → B → C_i → D_i → E_i（位置 0..5）。恶意节点只知道自己的上一跳和下一跳，
两个恶意位置相距不超过 2 时共享一个身份（直接相邻或同一个诚实中间节点），
因而可以串成一条链。

- I 被观测：A 恶意，或某次随机游走中有可链接到 I 的恶意中继；
- 查询被观测：E_i 恶意或出口 D_i 恶意；
- 可链接到 I：从 I 的锚点（恶意 A，或经随机游走可链接到 I 的恶意中继）出发的链能到达 D_i 或 E_i；
- 可链接到 B：从位置 1..3 的恶意节点（都能看到 B）出发的链能到达 D_i 或 E_i；
- 共同 B：若某个查询既可链接到 I 又经过知道 B 的链，则同一查找中所有可链接到 B 的查询都可链接到 I。

攻击者只掌握共享观测日志：每个查询的恶意位置由日志中属于该查询的观测者确定。
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Set, Tuple

from ..core.observations import Observation, ObservationLog, SharedIntel

POS_A, POS_B, POS_C, POS_D, POS_E = 1, 2, 3, 4, 5
MaliciousFn = Callable[[int], bool]


@dataclass(frozen=True)
class QueryRecord:
    """一次查询传输（真实身份，攻击者只看到其中恶意位置附近的部分）"""
    lookup: int
    relays: Tuple[int, int, int, int]
    queried: int
    index: int
    dummy: bool = False

    def node_at(self, position: int) -> int:
        if position == POS_E:
            return self.queried
        return self.relays[position - 1]


@dataclass
class LookupTranscript:
    """一次匿名查找的全部传输"""
    lookup: int
    initiator: int
    target: int
    queries: List[QueryRecord]
    walk_relays: FrozenSet[int] = frozenset()
    walk_observed: bool = False

    @property
    def entry(self) -> int:
        return self.queries[0].relays[0] if self.queries else -1

    @property
    def middle(self) -> int:
        return self.queries[0].relays[1] if self.queries else -1

    def true_queries(self) -> List[QueryRecord]:
        return [q for q in self.queries if not q.dummy]

    def path_of(self, query: QueryRecord) -> List[int]:
        """I → A → B → C_i → D_i → E_i"""
        return [self.initiator, *query.relays, query.queried]


@dataclass
class QueryLinks:
    """单个查询的链接结果"""
    observed: bool
    to_initiator: bool
    to_middle: bool
    knows_middle: bool


def _reach(anchors: Iterable[int], mal: Sequence[bool]) -> Set[int]:
    """从锚点出发，经相距不超过 2 的恶意位置向前可到达的位置"""
    seen: Set[int] = set()
    stack = [p for p in anchors if mal[p]]
    while stack:
        p = stack.pop()
        if p in seen:
            continue
        seen.add(p)
        for q in (p + 1, p + 2):
            if q <= POS_E and mal[q] and q not in seen:
                stack.append(q)
    return seen


def query_links(query: QueryRecord, malicious: MaliciousFn, walk_relays: FrozenSet[int] = frozenset()) -> QueryLinks:
    """按链规则计算单个查询的可观测与可链接情况"""
    mal = [False] + [malicious(query.node_at(p)) for p in range(POS_A, POS_E + 1)]
    observed = mal[POS_D] or mal[POS_E]
    anchors = [POS_A] + [p for p in (POS_B, POS_C, POS_D) if query.node_at(p) in walk_relays]
    i_chain = _reach(anchors, mal)
    to_initiator = observed and any(p >= POS_D for p in i_chain)
    b_chain = _reach((POS_A, POS_B, POS_C), mal)
    to_middle = observed and any(p >= POS_D for p in b_chain)
    knows_middle = to_initiator and any(p <= POS_C for p in i_chain)
    return QueryLinks(observed=observed, to_initiator=to_initiator, to_middle=to_middle, knows_middle=knows_middle)


@dataclass
class LookupView:
    """攻击者对一次查找的观测"""
    transcript: LookupTranscript
    initiator_observed: bool
    target_observed: bool
    indexed: bool
    linkable: List[QueryRecord] = field(default_factory=list)
    linkable_to_middle: List[QueryRecord] = field(default_factory=list)
    observed: List[QueryRecord] = field(default_factory=list)

    @property
    def lookup(self) -> int:
        return self.transcript.lookup

    def true_linkable(self) -> List[QueryRecord]:
        return [q for q in self.linkable if not q.dummy]

    def true_linkable_to_middle(self) -> List[QueryRecord]:
        return [q for q in self.linkable_to_middle if not q.dummy]

    def true_observed(self) -> List[QueryRecord]:
        return [q for q in self.observed if not q.dummy]


@dataclass
class LinkabilityGraph:
    """全部并发查找的观测汇总"""
    views: Dict[int, LookupView] = field(default_factory=dict)

    def view(self, lookup: int) -> LookupView:
        return self.views[lookup]

    def with_linkable(self) -> List[LookupView]:
        """至少有一个可链接查询的查找（Ψ^l）"""
        return [v for v in self.views.values() if v.linkable]

    def with_middle_links(self) -> List[LookupView]:
        """至少有一个可链接到 B 的查询的查找（Ψ^B）"""
        return [v for v in self.views.values() if v.linkable_to_middle]

    def observed_queries(self) -> List[QueryRecord]:
        """所有并发查找中被观测到的查询（Q^o）"""
        out: List[QueryRecord] = []
        for v in self.views.values():
            out.extend(v.observed)
        return out

    def observed_honest_initiators(self, malicious: MaliciousFn) -> int:
        return len({v.transcript.initiator for v in self.views.values() if v.initiator_observed and not malicious(v.transcript.initiator)})

    def malicious_targets(self, malicious: MaliciousFn) -> int:
        return len({v.transcript.target for v in self.views.values() if malicious(v.transcript.target)})

    def linked_pairs(self) -> Tuple[int, int]:
        """同一发起者的并发查找中，有可链接查询的查找对数与全部查找对数"""
        by_init: Dict[int, List[LookupView]] = {}
        for v in self.views.values():
            by_init.setdefault(v.transcript.initiator, []).append(v)
        linked = total = 0
        for views in by_init.values():
            k = len(views)
            total += k * (k - 1) // 2
            hit = sum(1 for v in views if v.linkable)
            linked += hit * (hit - 1) // 2
        return linked, total


def view_lookup(
    transcript: LookupTranscript,
    malicious: MaliciousFn,
    seen: Optional[Dict[Hashable, Set[int]]] = None,
) -> LookupView:
    """计算单次查找的观测

    Args:
        transcript: 查找的传输记录
        malicious: 恶意判定（目标与游走中继）
        seen: 每个查询（按 (查找, 序号)）在日志中的观测者；为空时直接用 malicious 判定路径上的节点
    """

    def on_path(q: QueryRecord) -> MaliciousFn:
        if seen is None:
            return malicious
        observers = seen.get(query_token(q), set())
        return lambda x: x in observers

    walk = frozenset(r for r in transcript.walk_relays if malicious(r))
    entry_bad = any(on_path(q)(transcript.entry) for q in transcript.queries)
    middle_bad = any(on_path(q)(transcript.middle) for q in transcript.queries)
    view = LookupView(
        transcript=transcript,
        initiator_observed=entry_bad or transcript.walk_observed,
        target_observed=malicious(transcript.target),
        indexed=entry_bad or middle_bad,
    )
    bridged = False
    links: List[Tuple[QueryRecord, QueryLinks]] = []
    for q in transcript.queries:
        ql = query_links(q, on_path(q), walk)
        links.append((q, ql))
        bridged = bridged or ql.knows_middle
    for q, ql in links:
        if ql.observed:
            view.observed.append(q)
        if ql.to_middle:
            view.linkable_to_middle.append(q)
        if ql.to_initiator or (bridged and ql.to_middle):
            view.linkable.append(q)
    if view.linkable:
        view.initiator_observed = True
    return view


def query_token(query: QueryRecord) -> Tuple[int, int]:
    return query.lookup, query.index


def observe_transcripts(transcripts: Iterable[LookupTranscript], intel: SharedIntel) -> ObservationLog:
    """按事件模拟中匿名查询的同一规则，把每条查询路径上恶意节点的观测写入共享日志"""
    for t in transcripts:
        for q in t.queries:
            intel.observe_path(t.path_of(q), 0, query_token(q))
    return intel.log


def build_linkability(
    log: Iterable[Observation],
    transcripts: Iterable[LookupTranscript],
    malicious: MaliciousFn,
) -> LinkabilityGraph:
    """由共享观测日志构建攻击者的可链接性图

    Args:
        log: 合谋节点的观测日志（token 为 (查找, 查询序号)）
        transcripts: 并发查找的传输记录（提供查找编号、查询序号与真实身份）
        malicious: 恶意成员判定

    Returns:
        LinkabilityGraph: 每个查找的观测与各类可链接集合
    """
    seen: Dict[Hashable, Set[int]] = {}
    for obs in log:
        seen.setdefault(obs.token, set()).add(obs.observer)
    graph = LinkabilityGraph()
    for t in transcripts:
        graph.views[t.lookup] = view_lookup(t, malicious, seen)
    return graph


def walk_linkable(hops: Sequence[int], malicious: MaliciousFn) -> Tuple[bool, Set[int]]:
    """随机游走中可链接到发起者的恶意中继

    第 j 跳可链接当且仅当它与前面所有跳都是恶意的。

    Returns:
        Tuple[bool, Set[int]]: (发起者是否经游走被观测, 可链接的中继集合)
    """
    linked: Set[int] = set()
    for node in hops:
        if not malicious(node):
            break
        linked.add(node)
    return bool(linked), linked
