"""子命令实现。每个命令只读写状态目录，输出通过 CommandResult 交给 main 打印。"""

from __future__ import annotations

import argparse
import logging
import time
from pathlib import Path
from typing import Any

import sympy

from ..bundle import ActiveBundle, HostProfile, arrive
from ..dkg import KeygenResult, run_distributed_keygen
from ..errors import MaxAttemptsExceeded, UsageError
from ..idm import IdentityRecord, IdmSystem, SsoToken, group_authenticate, group_setup, verify_sso_token, write_model
from ..idm.group import GROUP_AUTHORITY
from ..idm.system import DEFAULT_TOKEN_TTL, sharing_field
from ..netsim import Network, find_leaks
from ..policy import AccessTree, AttributeId, AttributeKey, EvaluationContext, delegate, parse_attributes
from .context import CliContext, read_input_model, split_list
from .registry import CommandResult, command

logger = logging.getLogger(__name__)


def _attributes(text: str) -> list[str]:
    attrs = split_list(text)
    if not attrs:
        raise UsageError("--attrs 至少需要一个属性 (ns/name, 逗号分隔)")
    return attrs


def _audiences(text: str | None) -> list[str]:
    return split_list(text)


# ----------------------------------------------------------------------
# setup / enroll / keygen-user / encrypt
# ----------------------------------------------------------------------


@command("setup", "分布式生成共享 RSA 密钥并初始化状态目录")
class SetupCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--parties", type=int, default=None, help="权威方数量 k（覆盖配置）")
        parser.add_argument("--force", action="store_true", help="覆盖已有状态目录")
        parser.add_argument(
            "--export-party-secret",
            type=int,
            default=None,
            metavar="PID",
            help="同时输出某一方自己的秘密材料（仅供该方备份）",
        )

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        if ctx.store.exists() and not args.force:
            raise UsageError(f"状态目录 {ctx.store.root} 已初始化, 如需重建请加 --force")
        cfg = ctx.config
        network = ctx.new_network(cfg.parties)
        system = IdmSystem.setup(
            cfg.keygen,
            network,
            rank_policy=cfg.effective_rank_policy(),
            bundle_policy=cfg.bundle,
        )
        ctx.store.save_system(system)

        payload: dict[str, Any] = {
            "publicKey": system.params.public_key,
            "k": system.k,
            "rankPolicy": system.params.rank_policy,
            "metrics": network.metrics.to_dict(include_wall_clock=False),
            "state": str(ctx.store.root),
        }
        export_pid = args.export_party_secret
        if export_pid is not None:
            if export_pid not in system.parties:
                raise UsageError(f"参与方编号 {export_pid} 不在 [1, {system.k}] 内")
            logger.warning("[SECRET] 正在输出参与方 %d 的秘密材料, 请勿转发给其他参与方", export_pid)
            payload["partySecret"] = system.parties[export_pid].secret
        return CommandResult(payload)


@command("enroll", "用户注册：门限解密会话密钥后各方保存身份记录")
class EnrollCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--record", required=True, help="身份记录 JSON 文件 {user_id, claims, rank}")

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        record = read_input_model(args.record, IdentityRecord)
        system = ctx.load_system()
        stored = system.enroll(record)
        ctx.store.save_system(system)
        return CommandResult(
            {
                "user": stored.user_id,
                "rank": stored.rank,
                "labels": sorted(stored.claims),
                "storedAt": [p.party_id for p in system.live_parties()],
            }
        )


@command("keygen-user", "为已注册用户签发属性密钥")
class KeygenUserCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--user", required=True)
        parser.add_argument("--attrs", required=True, help="逗号分隔的 ns/name 属性")
        parser.add_argument("--rank", default=None, help="身份等级（默认取注册记录中的等级）")
        parser.add_argument("--epoch", type=int, default=0)
        parser.add_argument("--expiry", type=int, default=None, help="密钥过期纪元")

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        attributes = parse_attributes(_attributes(args.attrs))
        system = ctx.load_system()
        key = system.key_gen(args.user, attributes, args.rank, epoch=args.epoch, expiry_epoch=args.expiry)
        path = ctx.store.save_key(key)
        return CommandResult(
            {
                "user": key.user_id,
                "rank": key.rank,
                "attributes": [str(a) for a in key.sorted_attributes()],
                "expiryEpoch": key.expiry_epoch,
                "key": str(path),
            }
        )


@command("encrypt", "把用户身份数据封装成 Active Bundle")
class EncryptCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--user", required=True)
        parser.add_argument("--tree", required=True, help="访问树 JSON 文件")
        parser.add_argument("--bundle-id", default=None)
        parser.add_argument("--epoch", type=int, default=0, help="创建纪元")
        parser.add_argument("--operation", default=None, help="操作安全级别（rank_policy.operation_levels）")

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        tree = read_input_model(args.tree, AccessTree)
        system = ctx.load_system()
        record = system.find_record(args.user)
        bundle = system.encrypt(
            record,
            tree,
            operation=args.operation,
            bundle_id=args.bundle_id,
            creation_epoch=args.epoch,
        )
        path = ctx.store.save_bundle(bundle)
        credential = bundle.credential
        assert credential is not None
        return CommandResult(
            {
                "bundleId": bundle.bundle_id,
                "bundle": str(path),
                "labels": bundle.labels,
                "threshold": credential.threshold,
                "roster": list(credential.roster),
            }
        )


# ----------------------------------------------------------------------
# authn / delegate / revoke
# ----------------------------------------------------------------------


@command("authn", "认证并按最小披露解密请求的数据项")
class AuthnCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--bundle", required=True)
        parser.add_argument("--key", required=True, help="属性密钥 JSON 文件")
        parser.add_argument("--labels", required=True, help="逗号分隔的数据项")
        parser.add_argument("--epoch", type=int, required=True, help="当前纪元（时钟由调用方注入）")
        parser.add_argument("--loc", default=None, help="自报地点")
        parser.add_argument("--audiences", default=None, help="逗号分隔的 SSO 受众；为空则不签发令牌")
        parser.add_argument("--ttl", type=int, default=DEFAULT_TOKEN_TTL)
        parser.add_argument("--anonymous", action="store_true", help="令牌使用假名主体")

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        bundle = read_input_model(args.bundle, ActiveBundle)
        key = read_input_model(args.key, AttributeKey)
        labels = split_list(args.labels)
        eval_ctx = EvaluationContext(now_epoch=args.epoch, declared_location=args.loc)
        system = ctx.load_system()
        try:
            result = system.authenticate(
                bundle,
                key,
                eval_ctx,
                labels,
                audiences=_audiences(args.audiences),
                ttl_epochs=args.ttl,
                anonymous=args.anonymous,
            )
        finally:
            # 撤销列表同步与假名映射都写回各方状态
            ctx.store.save_system(system)

        payload: dict[str, Any] = {
            "verdict": "Granted",
            "claims": result.claims,
            "releasedParties": result.released_parties,
            "partyVerdicts": {str(pid): v for pid, v in sorted(result.verdicts.items())},
            "token": None,
        }
        if result.token is not None:
            payload["token"] = str(ctx.store.save_token(result.token))
            payload["tokenId"] = result.token.token_id
        return CommandResult(payload)


@command("delegate", "离线把属性子集委托给另一个用户")
class DelegateCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--parent", required=True, help="父属性密钥 JSON 文件")
        parser.add_argument("--child", required=True)
        parser.add_argument("--attrs", required=True)
        parser.add_argument("--expiry", type=int, default=None)
        parser.add_argument("--out", default=None, help="输出路径（默认写入状态目录 keys/）")

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        parent = read_input_model(args.parent, AttributeKey)
        child = delegate(parent, args.child, parse_attributes(_attributes(args.attrs)), expiry_epoch=args.expiry)
        path = write_model(Path(args.out), child) if args.out else ctx.store.save_key(child)
        return CommandResult(
            {
                "user": child.user_id,
                "delegationChain": list(child.delegation_chain),
                "attributes": [str(a) for a in child.sorted_attributes()],
                "expiryEpoch": child.expiry_epoch,
                "key": str(path),
            }
        )


@command("revoke", "撤销用户的整个凭据或单个属性（沿委托链级联）")
class RevokeCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--user", required=True)
        parser.add_argument("--attr", default=None, help="只撤销该属性")
        parser.add_argument("--caller", type=int, default=None, help="发起方编号（默认维护方）")

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        attribute = AttributeId.parse(args.attr) if args.attr else None
        system = ctx.load_system()
        arl = system.revoke(args.user, attribute, caller=args.caller)
        ctx.store.save_system(system)
        return CommandResult({"arl": arl})


# ----------------------------------------------------------------------
# SSO
# ----------------------------------------------------------------------


@command("sso-issue", "k 方门限签发 SSO 令牌")
class SsoIssueCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--subject", required=True)
        parser.add_argument("--audiences", required=True)
        parser.add_argument("--epoch", type=int, required=True)
        parser.add_argument("--ttl", type=int, default=DEFAULT_TOKEN_TTL)

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        system = ctx.load_system()
        token = system.issue_sso_token(args.subject, _audiences(args.audiences), args.ttl, args.epoch)
        path = ctx.store.save_token(token)
        return CommandResult({"token": token, "tokenId": token.token_id, "path": str(path)})


@command("sso-verify", "只用公开参数验证 SSO 令牌")
class SsoVerifyCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--token", required=True, help="令牌 JSON 文件")
        parser.add_argument("--audience", required=True)
        parser.add_argument("--epoch", type=int, required=True)

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        token = read_input_model(args.token, SsoToken)
        params = ctx.store.load_public()
        verdict = verify_sso_token(token, params.public_key, args.audience, args.epoch)
        return CommandResult(
            {"verdict": verdict.reason, "accepted": verdict.accepted, "subject": token.subject},
            exit_code=0 if verdict.accepted else 1,
        )


# ----------------------------------------------------------------------
# 群组认证
# ----------------------------------------------------------------------


@command("group-setup", "为群组的一个纪元生成秘密、承诺与成员分片")
class GroupSetupCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--group", required=True)
        parser.add_argument("--members", required=True, help="逗号分隔的成员")
        parser.add_argument("--t", type=int, required=True, help="认证所需成员数")
        parser.add_argument("--epoch", type=int, required=True)

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        params = ctx.store.load_public()
        network = ctx.new_network(params.k)
        members = split_list(args.members)
        rng = network.party_rng(GROUP_AUTHORITY, f"group.{args.group}.{args.epoch}")
        state = group_setup(args.group, members, args.t, sharing_field(), args.epoch, rng, network=network)
        path = ctx.store.save_group(state)
        return CommandResult(
            {
                "group": state.group_id,
                "epoch": state.epoch,
                "t": state.t,
                "n": state.n,
                "commitment": state.commitment,
                "state": str(path),
            }
        )


@command("group-auth", "成员提交分片完成一次性群组认证")
class GroupAuthCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--group", required=True)
        parser.add_argument("--members", required=True, help="提交分片的成员")
        parser.add_argument("--epoch", type=int, required=True)

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        state = ctx.store.load_group(args.group)
        submitted = []
        for member in split_list(args.members):
            point = state.member_shares.get(member)
            if point is None:
                raise UsageError(f"{member} 不是群组 {state.group_id} 的成员")
            submitted.append(point)
        result = group_authenticate(state, submitted, args.epoch)
        ctx.store.save_group(result.state)
        return CommandResult(
            {"verdict": "Accepted" if result.accepted else "Rejected", "group": state.group_id, "epoch": args.epoch},
            exit_code=0 if result.accepted else 1,
        )


# ----------------------------------------------------------------------
# Active Bundle 传输
# ----------------------------------------------------------------------


@command("bundle-send", "把 bundle 发送到给定信任度的主机并执行凋亡 / 蒸发判定")
class BundleSendCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--bundle", required=True)
        parser.add_argument("--host", required=True)
        parser.add_argument("--trust", type=float, required=True, help="主机信任度 τ ∈ [0, 1]")
        parser.add_argument("--out", default=None, help="到达后的 bundle 写到这里（默认原地覆盖）")

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        bundle = read_input_model(args.bundle, ActiveBundle)
        if not 0.0 <= args.trust <= 1.0:
            raise UsageError(f"--trust 必须在 [0, 1] 内, 实际 {args.trust}")
        decision, arrived = arrive(bundle, HostProfile(host_id=args.host, trust_level=args.trust))
        path = write_model(Path(args.out or args.bundle), arrived)
        return CommandResult(
            {
                "decision": decision.kind.value,
                "retained": list(decision.retained_labels),
                "integrityOk": decision.integrity_ok,
                "bundle": str(path),
            }
        )


# ----------------------------------------------------------------------
# 密钥生成基准
# ----------------------------------------------------------------------


def parse_seed_range(text: str) -> list[int]:
    """``a..b``（含两端）、``a,b,c`` 或单个整数。"""
    try:
        if ".." in text:
            start, _, end = text.partition("..")
            low, high = int(start), int(end)
            if low > high:
                raise UsageError(f"种子区间非法: {text}")
            return list(range(low, high + 1))
        return [int(part) for part in split_list(text)]
    except ValueError as exc:
        raise UsageError(f"--seeds 格式应为 a..b 或逗号分隔整数, 实际 {text!r}") from exc


def check_keygen_oracle(result: KeygenResult) -> bool:
    """用 sympy 分解 N：恰为两个不同的 ≡ 3 (mod 4) 素数，且 e·(Σd_i + c) ≡ 1 (mod φ(N))。"""
    n = result.public_key.n
    factors = sympy.factorint(n)
    if len(factors) != 2 or any(exp != 1 for exp in factors.values()):
        return False
    p, q = factors
    if p % 4 != 3 or q % 4 != 3:
        return False
    phi = (p - 1) * (q - 1)
    shares = list(result.shares.values())
    d = sum(s.d for s in shares) + shares[0].correction
    return (result.public_key.e * d) % phi == 1


def keygen_secrets(result: KeygenResult) -> dict[str, int]:
    shares = list(result.shares.values())
    return {
        "p": sum(s.p for s in shares),
        "q": sum(s.q for s in shares),
        "phi": sum(s.phi for s in shares),
        "d": sum(s.d for s in shares),
    }


@command("bench-dkg", "对一组种子运行分布式密钥生成并检验结果")
class BenchDkgCommand:
    @staticmethod
    def configure(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--seeds", default="1..20", help="种子区间 a..b 或逗号分隔列表")
        parser.add_argument("--parties", type=int, default=None)
        parser.add_argument("--audit", action="store_true", help="检查被腐化方视图中是否出现秘密值")
        parser.add_argument("--corrupt", type=int, default=1, help="审计时被动腐化的参与方")
        parser.add_argument("--timing", action="store_true", help="输出耗时（输出不再可逐字节重放）")

    @staticmethod
    def run(ctx: CliContext, args: argparse.Namespace) -> CommandResult:
        cfg = ctx.config
        seeds = parse_seed_range(args.seeds)
        if not seeds:
            raise UsageError("--seeds 不能为空")
        corrupted = (args.corrupt,) if args.audit else ()

        runs: list[dict[str, Any]] = []
        failures = 0
        started = time.perf_counter()
        for seed in seeds:
            network: Network = ctx.new_network(cfg.parties, seed=seed, corrupted=corrupted)
            entry: dict[str, Any] = {"seed": seed}
            try:
                result = run_distributed_keygen(cfg.keygen, network)
            except MaxAttemptsExceeded as exc:
                logger.warning("种子 %d 未生成合格模数: %s", seed, exc)
                entry["verdict"] = exc.verdict
                failures += 1
                runs.append(entry)
                continue

            ok = check_keygen_oracle(result)
            entry.update(
                {
                    "verdict": "Accepted" if ok else "OracleMismatch",
                    "nBits": result.public_key.n.bit_length(),
                    "attempts": result.attempts,
                    "rejections": result.rejections,
                    "metrics": result.metrics.to_dict(include_wall_clock=args.timing),
                }
            )
            if not ok:
                failures += 1
            if args.audit:
                leaks = find_leaks(network.corrupt_view(), keygen_secrets(result))
                entry["leaks"] = sorted({name for name, _ in leaks})
                if leaks:
                    logger.error("种子 %d 的被腐化视图中出现秘密值: %s", seed, entry["leaks"])
                    failures += 1
            runs.append(entry)
            logger.info("种子 %d 完成: %s", seed, entry["verdict"])

        summary: dict[str, Any] = {
            "runs": len(runs),
            "failures": failures,
            "totalRounds": sum(n.metrics.rounds for n in ctx.networks),
            "totalBytes": sum(n.metrics.total_bytes for n in ctx.networks),
        }
        if args.timing:
            summary["wallClockSeconds"] = round(time.perf_counter() - started, 6)
        return CommandResult({"runs": runs, "summary": summary}, exit_code=1 if failures else 0)
