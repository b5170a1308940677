"""Dense-representation size caps.

The defaults can be overridden with the ``QSQLAB_DENSE_CAP`` environment
variable, either as a single integer (sets the state cap) or as a comma
separated list such as ``state=10,superop=6,observable=12``.
"""

import os

from .errors import ConfigurationError, ResourceLimitError

_DEFAULTS = {"state": 10, "superop": 6, "observable": 12}


def _parse(raw):
    caps = dict(_DEFAULTS)
    raw = raw.strip()
    if not raw:
        return caps
    if raw.isdigit():
        caps["state"] = int(raw)
        return caps
    for item in raw.split(","):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in caps or not value.strip().isdigit():
            raise ConfigurationError(f"bad QSQLAB_DENSE_CAP entry {item!r}")
        caps[key] = int(value)
    return caps


def cap(kind: str) -> int:
    """Return the current qubit cap for ``kind`` ('state', 'superop', 'observable')."""
    return _parse(os.environ.get("QSQLAB_DENSE_CAP", ""))[kind]


def check(kind: str, n_qubits: int, what: str = "") -> None:
    limit = cap(kind)
    if n_qubits > limit:
        label = what or kind
        raise ResourceLimitError(
            f"{label} on {n_qubits} qubits exceeds the {kind} cap of {limit} qubits"
        )
