"""沿访问树自顶向下分发秘密、自底向上重建。"""

from __future__ import annotations

from collections.abc import Mapping

from ..errors import FieldTooSmall, Unsatisfied
from ..sharing import PrimeField, RandomSource, SharePoint, dedup_shares, lagrange_at_zero, shamir_share
from .tree import AccessTree, AttributeId, AttributeLeaf, EvaluationContext, Gate, Node, leaf_holds


def distribute_tree_shares(
    tree: AccessTree,
    root_secret: int,
    field: PrimeField,
    rng: RandomSource,
) -> dict[str, SharePoint]:
    """THRESH(m) 门把自己的秘密在孩子间做 m-of-c Shamir 分享（孩子 j 拿编号 j）；
    OR 门把 (1, σ) 原样交给每个孩子。返回 叶子路径 → 分片。"""
    if field.modulus <= tree.max_fanout():
        raise FieldTooSmall(f"域模数 {field.modulus} 必须大于最大扇出 {tree.max_fanout()}")
    if not field.contains(root_secret):
        raise FieldTooSmall(f"根秘密 {root_secret} 不在 GF({field.modulus}) 内")

    out: dict[str, SharePoint] = {}

    def push(node: Node, path: str, point: SharePoint) -> None:
        if not isinstance(node, Gate):
            out[path] = point
            return
        if node.is_or:
            for j, child in enumerate(node.children):
                push(child, f"{path}.{j}", SharePoint(index=1, value=point.value))
            return
        share_set = shamir_share(point.value, node.threshold, len(node.children), field, rng)
        for j, (child, child_point) in enumerate(zip(node.children, share_set.points, strict=True)):
            push(child, f"{path}.{j}", child_point)

    push(tree.root, "root", SharePoint(index=1, value=root_secret))
    return out


def reconstruct_from_leaves(
    tree: AccessTree,
    leaf_shares: Mapping[str, SharePoint],
    ctx: EvaluationContext,
    field: PrimeField,
    *,
    attributes: frozenset[AttributeId] | set[AttributeId] | None = None,
) -> int:
    """自底向上重建根秘密。

    叶子在谓词成立时贡献分片；OR 取去重后第一个可用孩子，
    THRESH(m) 用编号最小的 m 个可用孩子插值。

    ``attributes`` 为空时，出现在 ``leaf_shares`` 中的属性叶子即视为已验证。
    """

    def recover(node: Node, path: str, own_index: int) -> SharePoint | None:
        if not isinstance(node, Gate):
            point = leaf_shares.get(path)
            if point is None:
                return None
            if isinstance(node, AttributeLeaf):
                if attributes is not None and node.attribute not in attributes:
                    return None
            elif not leaf_holds(node, frozenset(), ctx):
                return None
            return point

        if node.is_or:
            available = [
                p for j, c in enumerate(node.children) if (p := recover(c, f"{path}.{j}", 1)) is not None
            ]
            distinct = dedup_shares(available, field.modulus)
            if not distinct:
                return None
            return SharePoint(index=own_index, value=distinct[0].value)

        available = [
            p for j, c in enumerate(node.children) if (p := recover(c, f"{path}.{j}", j + 1)) is not None
        ]
        distinct = dedup_shares(available, field.modulus)
        if len(distinct) < node.threshold:
            return None
        chosen = sorted(distinct, key=lambda p: p.index)[: node.threshold]
        return SharePoint(index=own_index, value=lagrange_at_zero(chosen, field))

    result = recover(tree.root, "root", 1)
    if result is None:
        raise Unsatisfied("可用叶子分片不足以恢复根秘密")
    return result.value
