"""SSO 令牌的摘要映射与验证（验证只需公开参数）。"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict

from ..canonical import digest
from ..dkg import RsaPublicKey
from .structs import SsoToken

ACCEPTED = "Accepted"


class SsoVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    accepted: bool
    reason: str


def token_digest_value(token: SsoToken, n: int) -> int:
    """SHA-256(canonical(body)) 映射到 [2, N)：mod (N-2) + 2。"""
    h = int.from_bytes(digest(token.body()), "big")
    return h % (n - 2) + 2


def verify_sso_token(token: SsoToken, public_key: RsaPublicKey, audience: str, now_epoch: int) -> SsoVerdict:
    n, e = public_key.n, public_key.e
    if not 0 < token.signature < n or pow(token.signature, e, n) != token_digest_value(token, n):
        return SsoVerdict(accepted=False, reason="BadSignature")
    if audience not in token.audiences:
        return SsoVerdict(accepted=False, reason="AudienceMismatch")
    if now_epoch > token.expiry_epoch:
        return SsoVerdict(accepted=False, reason="Expired")
    return SsoVerdict(accepted=True, reason=ACCEPTED)
