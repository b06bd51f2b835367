from .messages import Message, Phase, decode_message, encode_message
from .runner import (
    BuildingAgent,
    MaskedUpload,
    InProcessBus,
    ProtocolConfig,
    ProtocolError,
    ProtocolRunner,
    run_protocol,
)
from .sap import PairwiseMaskSet, assemble_sp1_inputs, compute_share_s, sap_aggregate, sap_mask
from .te import (
    compute_hat_tau_col,
    compute_te_uploads,
    gen_encryption_col,
    solve_sp2_masked,
    te_recover,
)
from .transcript import ProtocolTranscript, scan_payloads

__all__ = [
    "Message",
    "Phase",
    "encode_message",
    "decode_message",
    "BuildingAgent",
    "MaskedUpload",
    "InProcessBus",
    "ProtocolConfig",
    "ProtocolError",
    "ProtocolRunner",
    "run_protocol",
    "PairwiseMaskSet",
    "sap_mask",
    "sap_aggregate",
    "compute_share_s",
    "assemble_sp1_inputs",
    "gen_encryption_col",
    "compute_hat_tau_col",
    "compute_te_uploads",
    "solve_sp2_masked",
    "te_recover",
    "ProtocolTranscript",
    "scan_payloads",
]
