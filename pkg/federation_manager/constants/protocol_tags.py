# Frame type tags (one byte after the length prefix)
TAG_HELLO = 0x01
TAG_HELLO_ACK = 0x02
TAG_GET_PARAMETERS_INS = 0x10
TAG_GET_PARAMETERS_RES = 0x11
TAG_FIT_INS = 0x12
TAG_FIT_RES = 0x13
TAG_EVALUATE_INS = 0x14
TAG_EVALUATE_RES = 0x15
TAG_DISCONNECT = 0x20

# Protocol cap on the length field (bytes following the length prefix)
MAX_FRAME_BYTES = 64 * 1024 * 1024

# ConfigMap value tags
VALUE_TAG_BOOL = 0x00
VALUE_TAG_INT = 0x01
VALUE_TAG_FLOAT = 0x02
VALUE_TAG_STRING = 0x03

# Disconnect reasons
REASON_DONE = 0
REASON_DUPLICATE_ID = 1
REASON_PROTOCOL_VIOLATION = 2
REASON_SERVER_SHUTDOWN = 3

DISCONNECT_REASON_LABELS = {
    REASON_DONE: "terminé",
    REASON_DUPLICATE_ID: "identifiant déjà utilisé",
    REASON_PROTOCOL_VIOLATION: "violation de protocole",
    REASON_SERVER_SHUTDOWN: "arrêt du serveur",
}

HANDSHAKE_TIMEOUT_S = 10.0
