"""统一异常定义。

每个异常类名即协议层面的 verdict 名称，CLI 依据 ``exit_code`` 决定退出码：
拒绝类结论为 1，用法/配置错误为 2，其余内部错误为 3。
"""

from __future__ import annotations

from typing import ClassVar


class IdmError(RuntimeError):
    """所有协议错误的基类。"""

    exit_code: ClassVar[int] = 3

    @property
    def verdict(self) -> str:
        return type(self).__name__


class ConfigError(ValueError):
    """配置非法或缺失。"""

    exit_code: ClassVar[int] = 2

    @property
    def verdict(self) -> str:
        return "ConfigError"


class DenialError(IdmError):
    """访问被拒绝类结论（不是故障）。"""

    exit_code: ClassVar[int] = 1


class UsageError(IdmError):
    exit_code: ClassVar[int] = 2


# --- field-share ---


class ThresholdOutOfRange(IdmError):
    pass


class SecretOutOfField(IdmError):
    pass


class FieldTooSmall(IdmError):
    pass


class InsufficientShares(DenialError):
    pass


class IndexCollision(IdmError):
    pass


class PartyCountTooSmall(IdmError):
    pass


# --- dkg-rsa ---


class NotInvertible(IdmError):
    pass


class CorrectionNotFound(IdmError):
    pass


class NonInvertibleCiphertext(IdmError):
    pass


class MissingParty(IdmError):
    pass


class DuplicatePartyPartial(IdmError):
    pass


class MaxAttemptsExceeded(IdmError):
    pass


# --- abe-policy ---


class Unsatisfied(DenialError):
    pass


class NotASubset(UsageError):
    pass


class SelfDelegation(UsageError):
    pass


class NotMaintainer(DenialError):
    pass


class StaleRevocationList(IdmError):
    pass


# --- active-bundle ---


class IntegrityFailure(DenialError):
    pass


class ThresholdViolation(UsageError):
    pass


class LabelUnknown(DenialError):
    pass


class BundleApoptosed(DenialError):
    pass


# --- idm-core ---


class PolicyDenied(DenialError):
    pass


class Revoked(DenialError):
    pass


class Expired(DenialError):
    pass


class UnknownRank(UsageError):
    pass


class UnknownUser(UsageError):
    pass


class EpochMismatch(DenialError):
    pass


class Consumed(DenialError):
    pass


# --- net-sim ---


class Deadlock(IdmError):
    pass


class AlreadyCrashed(UsageError):
    pass
