"""field-share：素数域运算、Shamir / 加法分享、分片去重与 BGW 共享乘积。"""

from .additive import additive_reconstruct, additive_share
from .bgw import BgwResult, bgw_shared_product, bgw_shared_products
from .shamir import dedup_shares, lagrange_at_zero, shamir_reconstruct, shamir_share, share_digest, zero_share
from .structs import AdditiveShareVector, PrimeField, RandomSource, SharePoint, ShareSet

__all__ = [
    "AdditiveShareVector",
    "BgwResult",
    "PrimeField",
    "RandomSource",
    "SharePoint",
    "ShareSet",
    "additive_reconstruct",
    "additive_share",
    "bgw_shared_product",
    "bgw_shared_products",
    "dedup_shares",
    "lagrange_at_zero",
    "shamir_reconstruct",
    "shamir_share",
    "share_digest",
    "zero_share",
]
