"""net-sim：确定性的内存多方网络模拟器。"""

from .leakage import find_leaks
from .network import Network, PartyProtocol, ProtocolRun, corrupt_view, derive_rng, run_protocol
from .structs import BROADCAST, CLIENT_ID, AdversaryConfig, Message, Metrics, Outgoing, Recipient, as_int

__all__ = [
    "BROADCAST",
    "CLIENT_ID",
    "AdversaryConfig",
    "Message",
    "Metrics",
    "Network",
    "Outgoing",
    "PartyProtocol",
    "ProtocolRun",
    "Recipient",
    "as_int",
    "corrupt_view",
    "derive_rng",
    "find_leaks",
    "run_protocol",
]
