"""访问树：属性 / 时间窗 / 地点叶子与 THRESH 门。

JSON 形式：
- 门 ``{"thresh": m, "children": [...]}``（AND、OR 序列化时统一为 THRESH）；
- 叶子 ``{"attr": "ns/name"}``、``{"time": [a, b]}``、``{"loc": ["x", "y"]}``。

叶子路径：根为 ``"root"``，第 j 个孩子（从 0 开始）为 ``父路径 + ".j"``。
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_serializer, model_validator

ROOT_PATH = "root"


class AttributeId(BaseModel):
    """属性标识，规范形式 ``namespace/name``。"""

    model_config = ConfigDict(frozen=True)

    namespace: str = Field(min_length=1)
    name: str = Field(min_length=1)

    @model_validator(mode="before")
    @classmethod
    def _parse_text(cls, data: Any) -> Any:
        if isinstance(data, str):
            namespace, sep, name = data.partition("/")
            if not sep:
                raise ValueError(f"属性必须写成 namespace/name: {data!r}")
            return {"namespace": namespace.strip(), "name": name.strip()}
        return data

    @model_serializer
    def _as_text(self) -> str:
        return str(self)

    def __str__(self) -> str:
        return f"{self.namespace}/{self.name}"

    @classmethod
    def parse(cls, text: str) -> AttributeId:
        return cls.model_validate(text)


def parse_attributes(texts: Iterable[str]) -> frozenset[AttributeId]:
    return frozenset(AttributeId.parse(t) for t in texts if t.strip())


class EvaluationContext(BaseModel):
    """访问时的外部条件：当前纪元与自报地点。"""

    model_config = ConfigDict(frozen=True)

    now_epoch: int = Field(ge=0)
    declared_location: str | None = None


@dataclass(frozen=True)
class AttributeLeaf:
    attribute: AttributeId


@dataclass(frozen=True)
class TimeWindow:
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"时间窗非法: [{self.start}, {self.end}]")


@dataclass(frozen=True)
class LocationSet:
    locations: frozenset[str]

    def __post_init__(self) -> None:
        if not self.locations:
            raise ValueError("地点集合不能为空")


@dataclass(frozen=True)
class Gate:
    threshold: int
    children: tuple[Node, ...]

    def __post_init__(self) -> None:
        if not self.children:
            raise ValueError("门至少需要一个孩子")
        if not 1 <= self.threshold <= len(self.children):
            raise ValueError(f"THRESH 门限非法: m={self.threshold}, 孩子数={len(self.children)}")

    @property
    def is_or(self) -> bool:
        return self.threshold == 1


Leaf = AttributeLeaf | TimeWindow | LocationSet
Node = Leaf | Gate


def attr(text: str) -> AttributeLeaf:
    return AttributeLeaf(AttributeId.parse(text))


def time_window(start: int, end: int) -> TimeWindow:
    return TimeWindow(start, end)


def location(*labels: str) -> LocationSet:
    return LocationSet(frozenset(labels))


def thresh(m: int, *children: Node) -> Gate:
    return Gate(m, tuple(children))


def and_(*children: Node) -> Gate:
    return Gate(len(children), tuple(children))


def or_(*children: Node) -> Gate:
    return Gate(1, tuple(children))


def leaf_holds(leaf: Leaf, attributes: frozenset[AttributeId] | set[AttributeId], ctx: EvaluationContext) -> bool:
    if isinstance(leaf, AttributeLeaf):
        return leaf.attribute in attributes
    if isinstance(leaf, TimeWindow):
        return leaf.start <= ctx.now_epoch <= leaf.end
    return ctx.declared_location is not None and ctx.declared_location in leaf.locations


def node_to_json(node: Node) -> dict[str, Any]:
    if isinstance(node, Gate):
        return {"thresh": node.threshold, "children": [node_to_json(c) for c in node.children]}
    if isinstance(node, AttributeLeaf):
        return {"attr": str(node.attribute)}
    if isinstance(node, TimeWindow):
        return {"time": [node.start, node.end]}
    return {"loc": sorted(node.locations)}


def node_from_json(data: Any) -> Node:
    if not isinstance(data, dict) or len(data) == 0:
        raise ValueError(f"访问树节点必须是非空对象: {data!r}")
    if "thresh" in data:
        children = data.get("children")
        if not isinstance(children, list):
            raise ValueError("THRESH 门缺少 children 列表")
        return Gate(int(data["thresh"]), tuple(node_from_json(c) for c in children))
    # 便于手写策略文件，接受 and / or 简写
    if "and" in data:
        return and_(*(node_from_json(c) for c in data["and"]))
    if "or" in data:
        return or_(*(node_from_json(c) for c in data["or"]))
    if "attr" in data:
        return AttributeLeaf(AttributeId.parse(data["attr"]))
    if "time" in data:
        start, end = data["time"]
        return TimeWindow(int(start), int(end))
    if "loc" in data:
        return LocationSet(frozenset(str(x) for x in data["loc"]))
    raise ValueError(f"无法识别的访问树节点: {data!r}")


class AccessTree(BaseModel):
    """公开的访问策略树。序列化为上面的 JSON 形式。"""

    model_config = ConfigDict(frozen=True)

    root: Any

    @model_validator(mode="before")
    @classmethod
    def _parse(cls, data: Any) -> Any:
        if isinstance(data, AttributeLeaf | TimeWindow | LocationSet | Gate):
            return {"root": data}
        if isinstance(data, dict) and "root" not in data:
            return {"root": node_from_json(data)}
        return data

    @model_validator(mode="after")
    def _check_root(self) -> AccessTree:
        if not isinstance(self.root, AttributeLeaf | TimeWindow | LocationSet | Gate):
            raise ValueError(f"访问树根节点类型非法: {type(self.root).__name__}")
        return self

    @model_serializer
    def _as_json(self) -> dict[str, Any]:
        return node_to_json(self.root)

    @classmethod
    def of(cls, root: Node) -> AccessTree:
        return cls(root=root)

    def iter_leaves(self) -> Iterator[tuple[str, Leaf]]:
        """按声明顺序深度优先列出 (路径, 叶子)。"""

        def walk(node: Node, path: str) -> Iterator[tuple[str, Leaf]]:
            if isinstance(node, Gate):
                for j, child in enumerate(node.children):
                    yield from walk(child, f"{path}.{j}")
            else:
                yield path, node

        return walk(self.root, ROOT_PATH)

    def attribute_leaves(self) -> set[AttributeId]:
        return {leaf.attribute for _, leaf in self.iter_leaves() if isinstance(leaf, AttributeLeaf)}

    def max_fanout(self) -> int:
        def fanout(node: Node) -> int:
            if not isinstance(node, Gate):
                return 1
            return max(len(node.children), *(fanout(c) for c in node.children))

        return fanout(self.root)

    def depth(self) -> int:
        def depth_of(node: Node) -> int:
            if not isinstance(node, Gate):
                return 1
            return 1 + max(depth_of(c) for c in node.children)

        return depth_of(self.root)


def satisfies(
    tree: AccessTree,
    attributes: frozenset[AttributeId] | set[AttributeId],
    ctx: EvaluationContext,
) -> bool:
    """THRESH(m) 当且仅当至少 m 个孩子为真。"""

    def evaluate(node: Node) -> bool:
        if isinstance(node, Gate):
            return sum(1 for c in node.children if evaluate(c)) >= node.threshold
        return leaf_holds(node, attributes, ctx)

    return evaluate(tree.root)
