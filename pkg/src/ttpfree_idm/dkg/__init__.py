"""dkg-rsa：无分发者的共享 RSA 密钥生成与门限部分解密 / 签名。"""

from .biprimality import (
    BiprimalityOutcome,
    biprimality_test,
    compute_shared_moduli,
    compute_shared_modulus,
    generate_candidate_shares,
)
from .exponent import ExponentResult, compute_shared_private_exponent, phi_shares
from .keygen import run_distributed_keygen
from .numbers import jacobi, trial_division_public
from .structs import (
    BiprimalityRound,
    KeygenConfig,
    KeygenResult,
    Partial,
    PrivateShare,
    RsaPublicKey,
    ShareBackup,
)
from .threshold import (
    backup_field,
    combine_partials,
    partial_decrypt,
    recover_absent_partial,
    recover_share,
    replicate_share,
    threshold_sign,
)

__all__ = [
    "BiprimalityOutcome",
    "BiprimalityRound",
    "ExponentResult",
    "KeygenConfig",
    "KeygenResult",
    "Partial",
    "PrivateShare",
    "RsaPublicKey",
    "ShareBackup",
    "backup_field",
    "biprimality_test",
    "combine_partials",
    "compute_shared_moduli",
    "compute_shared_modulus",
    "compute_shared_private_exponent",
    "generate_candidate_shares",
    "jacobi",
    "partial_decrypt",
    "phi_shares",
    "recover_absent_partial",
    "recover_share",
    "replicate_share",
    "run_distributed_keygen",
    "threshold_sign",
    "trial_division_public",
]
