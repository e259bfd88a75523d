import math
import re
from typing import List, Tuple

CLIENT_ID_PATTERN = r"^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$"
PROCESSOR_CLASS_PATTERN = r"^[a-z][a-z0-9_-]{0,31}$"


def is_int(value: object) -> bool:
    """bool is an int subclass in Python; it is never accepted where a count is expected."""
    return isinstance(value, int) and not isinstance(value, bool)


def is_number(value: object) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def is_positive_int(value: object) -> bool:
    return is_int(value) and value >= 1


def is_non_negative_int(value: object) -> bool:
    return is_int(value) and value >= 0


def is_positive_float(value: object) -> bool:
    """Finite number strictly above zero."""
    return is_number(value) and math.isfinite(value) and value > 0


def is_non_negative_float(value: object) -> bool:
    return is_number(value) and math.isfinite(value) and value >= 0


def is_valid_client_id(client_id: str) -> bool:
    """
    Validate a client identifier:
      - starts with a letter or digit,
      - then letters, digits, dots, underscores or hyphens,
      - 64 characters at most.

    Example:
      - Valid: jetson-01, cpu_3
      - Invalid: -a, "", "a b"
    """
    return isinstance(client_id, str) and bool(re.match(CLIENT_ID_PATTERN, client_id))


def is_valid_processor_class(name: str) -> bool:
    return isinstance(name, str) and bool(re.match(PROCESSOR_CLASS_PATTERN, name))


def parse_bind_address(text: str) -> Tuple[str, int]:
    """
    Split "host:port" into (host, port).

    Raises:
        ValueError: Si le format ou le port est invalide.
    """
    host, sep, port_text = (text or "").strip().rpartition(":")
    if not sep or not host or not port_text.isdigit():
        raise ValueError(f"Adresse invalide : {text!r} (attendu hôte:port).")
    port = int(port_text)
    if not 0 <= port <= 65535:
        raise ValueError(f"Port hors plage : {port}.")
    return host, port



def parse_value_list(text: str, as_int: bool) -> List[float]:
    """
    Parse a comma-separated list of sweep values ("1,5,10").

    Raises:
        ValueError: Si la liste est vide ou contient une valeur invalide.
    """
    parts = [p.strip() for p in (text or "").split(",") if p.strip()]
    if not parts:
        raise ValueError("Liste de valeurs vide.")
    values = []
    for part in parts:
        try:
            values.append(int(part) if as_int else float(part))
        except ValueError as e:
            raise ValueError(f"Valeur invalide : {part!r}.") from e
    return values


def is_valid_value_list(text: str, as_int: bool) -> bool:
    try:
        parse_value_list(text, as_int)
        return True
    except ValueError:
        return False
