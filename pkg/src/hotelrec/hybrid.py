"""Rank-interleaving hybrid of the content and CF lists."""

from __future__ import annotations

from dataclasses import dataclass

from .ranking import RankedList

CONTENT = "content"
CF = "cf"


@dataclass(frozen=True)
class HybridSpec:
    n: int
    first: str = CONTENT
    odd_slot_source: str = CONTENT

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("hybrid list length must be >= 1")
        for value in (self.first, self.odd_slot_source):
            if value not in (CONTENT, CF):
                raise ValueError(f"unknown hybrid source {value!r}")


def interleave(content: RankedList, cf: RankedList, spec: HybridSpec) -> RankedList:
    """Alternate same-rank items of the two lists: [A1, B1, A2, B2, ...].

    A hotel already placed is skipped and the same source's next item takes
    the slot; an exhausted source hands its slot to the other one. When
    ``spec.n`` is odd the final slot comes from ``spec.odd_slot_source``.
    Scores are reciprocal ranks since the engines' scores are not comparable.
    """
    lists = {CONTENT: content.hotels, CF: cf.hotels}
    pos = {CONTENT: 0, CF: 0}
    other = {CONTENT: CF, CF: CONTENT}
    seen: set[str] = set()
    picked: list[str] = []
    sources: list[str] = []

    def take(src: str) -> str | None:
        items = lists[src]
        while pos[src] < len(items):
            code = items[pos[src]]
            pos[src] += 1
            if code not in seen:
                return code
        return None

    for slot in range(spec.n):
        if spec.n % 2 == 1 and slot == spec.n - 1:
            src = spec.odd_slot_source
        else:
            src = spec.first if slot % 2 == 0 else other[spec.first]
        code = take(src)
        if code is None:
            src = other[src]
            code = take(src)
            if code is None:
                break
        seen.add(code)
        picked.append(code)
        sources.append(src)

    user = content.user_id or cf.user_id
    items = [(code, 1.0 / (rank + 1)) for rank, code in enumerate(picked)]
    return RankedList(user, items, sources, truncated=len(picked) < spec.n)
