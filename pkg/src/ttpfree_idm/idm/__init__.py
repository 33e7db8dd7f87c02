"""idm-core：五算法 IDM 协议、等级策略、SSO 令牌与群组认证。"""

from .authority import AuthnRequest, AuthorityParty, ShareRelease
from .cipher import keystream, open_sealed, seal
from .group import GroupAuthResult, group_authenticate, group_commitment, group_setup
from .sso import SsoVerdict, token_digest_value, verify_sso_token
from .store import StateStore, read_model, write_model
from .structs import GroupAuthState, IdentityRecord, PartySecret, PublicParameters, RankPolicy, SsoToken
from .system import AuthResult, EnrollmentSubmission, IdmSystem, sharing_field

__all__ = [
    "AuthResult",
    "AuthnRequest",
    "AuthorityParty",
    "EnrollmentSubmission",
    "GroupAuthResult",
    "GroupAuthState",
    "IdentityRecord",
    "IdmSystem",
    "PartySecret",
    "PublicParameters",
    "RankPolicy",
    "ShareRelease",
    "SsoToken",
    "SsoVerdict",
    "StateStore",
    "group_authenticate",
    "group_commitment",
    "group_setup",
    "keystream",
    "open_sealed",
    "read_model",
    "seal",
    "sharing_field",
    "token_digest_value",
    "verify_sso_token",
    "write_model",
]
