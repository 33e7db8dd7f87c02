"""abe-policy：访问树、属性标签签发与校验、委托与撤销。"""

from .revocation import ARL_UPDATE_KIND, RevocationList, RevocationTarget, revoke
from .tags import (
    BINDING_LABEL,
    AttributeKey,
    binding_matches,
    delegate,
    fold_tag,
    issue_key_tags,
    issue_tag,
    tag_matches,
    verify_attribute_tag,
)
from .tree import (
    AccessTree,
    AttributeId,
    AttributeLeaf,
    EvaluationContext,
    Gate,
    LocationSet,
    TimeWindow,
    and_,
    attr,
    location,
    or_,
    parse_attributes,
    satisfies,
    thresh,
    time_window,
)
from .tree_shares import distribute_tree_shares, reconstruct_from_leaves

__all__ = [
    "ARL_UPDATE_KIND",
    "BINDING_LABEL",
    "AccessTree",
    "AttributeId",
    "AttributeKey",
    "AttributeLeaf",
    "EvaluationContext",
    "Gate",
    "LocationSet",
    "RevocationList",
    "RevocationTarget",
    "TimeWindow",
    "and_",
    "attr",
    "binding_matches",
    "delegate",
    "distribute_tree_shares",
    "fold_tag",
    "issue_key_tags",
    "issue_tag",
    "location",
    "or_",
    "parse_attributes",
    "reconstruct_from_leaves",
    "revoke",
    "satisfies",
    "tag_matches",
    "thresh",
    "time_window",
    "verify_attribute_tag",
]
