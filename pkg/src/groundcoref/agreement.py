"""Inter-annotator agreement between two complete records of one document.

Exact match counts markables whose link targets are equivalent outright.
F1 is micro-averaged over (markable, item) pairs, where an item is an
entity id (grounded protocol) or a span (span protocol, matched by
character overlap); a No-Reference mark contributes a single sentinel
item. Partial span overlap therefore earns credit that exact match does
not, which is why span-task F1 can exceed span-task exact match.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import AnnotationRecord, Document, EntitySet, LinkTarget, NoReference, SpanSet

# Item stand-in for an explicit no-reference mark.
_NO_REF_ITEM = "∅"


@dataclass(frozen=True)
class MarkableAgreement:
    markable_id: str
    matched: bool
    precision: float
    recall: float

    def to_dict(self) -> dict:
        return {
            "markable_id": self.markable_id,
            "matched": self.matched,
            "precision": self.precision,
            "recall": self.recall,
        }


@dataclass(frozen=True)
class AgreementReport:
    exact_match: float
    f1: float
    per_markable: tuple[MarkableAgreement, ...]

    def to_dict(self) -> dict:
        return {
            "exact_match": self.exact_match,
            "f1": self.f1,
            "per_markable": [m.to_dict() for m in self.per_markable],
        }


def _check_pair(a: AnnotationRecord, b: AnnotationRecord) -> None:
    if a.document_id != b.document_id:
        raise ValueError(f"records address different documents: {a.document_id} vs {b.document_id}")
    if a.protocol != b.protocol:
        raise ValueError(f"records use different protocols: {a.protocol} vs {b.protocol}")
    if set(a.links) != set(b.links):
        raise ValueError("records cover different markable sets; agreement needs complete records")


def _targets_equal(x: LinkTarget, y: LinkTarget) -> bool:
    if isinstance(x, NoReference) or isinstance(y, NoReference):
        return isinstance(x, NoReference) and isinstance(y, NoReference)
    if isinstance(x, EntitySet) and isinstance(y, EntitySet):
        return x.entity_ids == y.entity_ids
    if isinstance(x, SpanSet) and isinstance(y, SpanSet):
        return set(x.spans) == set(y.spans)
    return False


def _spans_overlap(s: tuple[int, int, int], t: tuple[int, int, int]) -> bool:
    return s[0] == t[0] and s[1] < t[2] and t[1] < s[2]


def _max_overlap_matching(left: list, right: list) -> int:
    """Size of a maximum one-to-one matching between overlapping spans."""
    match_of_right: dict[int, int] = {}

    def augment(i: int, seen: set[int]) -> bool:
        for j in range(len(right)):
            if j in seen or not _spans_overlap(left[i], right[j]):
                continue
            seen.add(j)
            if j not in match_of_right or augment(match_of_right[j], seen):
                match_of_right[j] = i
                return True
        return False

    for i in range(len(left)):
        augment(i, set())
    return len(match_of_right)


def _pair_counts(x: LinkTarget, y: LinkTarget) -> tuple[int, int, int]:
    """(true positives, items in x, items in y) for one markable."""
    if isinstance(x, NoReference) or isinstance(y, NoReference):
        tp = 1 if isinstance(x, NoReference) and isinstance(y, NoReference) else 0
        nx = 1 if isinstance(x, NoReference) else _item_count(x)
        ny = 1 if isinstance(y, NoReference) else _item_count(y)
        return tp, nx, ny
    if isinstance(x, EntitySet) and isinstance(y, EntitySet):
        return len(x.entity_ids & y.entity_ids), len(x.entity_ids), len(y.entity_ids)
    if isinstance(x, SpanSet) and isinstance(y, SpanSet):
        xs, ys = list(dict.fromkeys(x.spans)), list(dict.fromkeys(y.spans))
        return _max_overlap_matching(xs, ys), len(xs), len(ys)
    return 0, _item_count(x), _item_count(y)


def _item_count(t: LinkTarget) -> int:
    if isinstance(t, EntitySet):
        return len(t.entity_ids)
    if isinstance(t, SpanSet):
        return len(set(t.spans))
    return 1


def match_counts(a: AnnotationRecord, b: AnnotationRecord) -> tuple[int, int]:
    """(markables with equivalent targets, total markables); the raw
    counts behind exact_match, for pooling across documents."""
    _check_pair(a, b)
    agree = sum(1 for mid in a.links if _targets_equal(a.links[mid], b.links[mid]))
    return agree, len(a.links)


def pair_totals(a: AnnotationRecord, b: AnnotationRecord) -> tuple[int, int, int]:
    """(true positives, items in a, items in b) summed over markables;
    the raw counts behind link_f1, for pooling across documents."""
    _check_pair(a, b)
    tp = na = nb = 0
    for mid in a.links:
        t, x, y = _pair_counts(a.links[mid], b.links[mid])
        tp, na, nb = tp + t, na + x, nb + y
    return tp, na, nb


def exact_match(a: AnnotationRecord, b: AnnotationRecord) -> float:
    """Fraction of markables with equivalent link targets."""
    agree, total = match_counts(a, b)
    if not total:
        return 1.0
    return agree / total


def link_f1(a: AnnotationRecord, b: AnnotationRecord) -> float:
    """Micro-averaged pair F1, treating a as reference and b as candidate.

    Computed as 2*tp / (|a items| + |b items|), which is the harmonic
    mean of micro precision and recall and is symmetric in a and b.
    """
    tp, na, nb = pair_totals(a, b)
    if na + nb == 0:
        return 1.0
    return 2 * tp / (na + nb)


def agreement_report(a: AnnotationRecord, b: AnnotationRecord, doc: Document) -> AgreementReport:
    """Full report over the document's markables, in document order."""
    _check_pair(a, b)
    if set(a.links) != doc.markable_ids():
        raise ValueError("records do not cover the document's markables")
    per = []
    for markable in doc.markables:
        x, y = a.links[markable.id], b.links[markable.id]
        tp, nx, ny = _pair_counts(x, y)
        per.append(
            MarkableAgreement(
                markable_id=markable.id,
                matched=_targets_equal(x, y),
                precision=tp / ny if ny else 0.0,
                recall=tp / nx if nx else 0.0,
            )
        )
    return AgreementReport(
        exact_match=exact_match(a, b),
        f1=link_f1(a, b),
        per_markable=tuple(per),
    )
