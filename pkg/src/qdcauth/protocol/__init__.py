from .auth import (
    RECOVERY_DERIVED,
    RECOVERY_PUBLISHED,
    RECOVERY_TABLES,
    AuthenticationAborted,
    AuthenticatorRole,
    AuthExchange,
    AuthOutcome,
    MutualAuthResult,
    UserRole,
    attach_ancilla,
    choose_positions,
    detection_probability,
    recover_pair,
    run_exchange,
    run_mutual_auth,
    verify_outcomes,
)
from .comm import (
    DecodeError,
    EavesdropDetected,
    MessageCapacityError,
    SessionKey,
    SessionResult,
    dense_decode,
    dense_decode_label,
    dense_encode,
    run_session,
    swap_decode,
    swap_encode,
    swap_to_session_key,
)
from .config import DENSE_MAP, SWAP_MAP, CommScheme, ConfigError, Session, SessionConfig
from .keys import AuthKey, Convention, derive_auth_key, keyed_code_sequence, keyed_transform
