"""active-bundle：自保护数据容器。"""

from .lifecycle import (
    apoptose,
    arrive,
    disclose_item,
    evaluate_arrival,
    evaporate,
    make_bundle,
    seal_bundle,
    verify_integrity,
    wipe_items,
)
from .structs import (
    ActiveBundle,
    Authenticator,
    BundleItem,
    BundlePolicy,
    CredentialEnvelope,
    Decision,
    DecisionKind,
    HostProfile,
    SealedShare,
)

__all__ = [
    "ActiveBundle",
    "Authenticator",
    "BundleItem",
    "BundlePolicy",
    "CredentialEnvelope",
    "Decision",
    "DecisionKind",
    "HostProfile",
    "SealedShare",
    "apoptose",
    "arrive",
    "disclose_item",
    "evaluate_arrival",
    "evaporate",
    "make_bundle",
    "seal_bundle",
    "verify_integrity",
    "wipe_items",
]
