"""
Bol vocabulary: the 31 vocal syllables and the stick-only class, with fixed codes.

Codes are stable identifiers used in model files, CSV tables and signatures. The stick
class has code 32 and also answers to the legacy alias 99. ``UNDEFINED_CODE`` (0) marks
a slice the classifier could not attribute to any class.
"""
from dataclasses import dataclass
from typing import Dict, Optional, Union

STICK_CODE = 32
STICK_ALIAS = 99
STICK_LABEL = "stick"
UNDEFINED_CODE = 0
UNDEFINED_LABEL = "undef"

_LABELS = (
    "a", "da", "dha", "dhat", "dhi", "dhin", "dhit", "ding", "e", "gadu",
    "gin", "ha", "hat", "hi", "jag", "jham", "ka", "ki", "ku", "na",
    "ri", "ta", "tak", "tam", "tan", "tat", "tei", "tom", "tta", "ya",
    "yum", STICK_LABEL,
)


@dataclass(frozen=True, order=True)
class BolClass:
    code: int
    label: str

    @property
    def is_stick(self) -> bool:
        return self.code == STICK_CODE


BOL_CLASSES: Dict[int, BolClass] = {code: BolClass(code, label) for code, label in enumerate(_LABELS, start=1)}
_BY_LABEL: Dict[str, BolClass] = {bol.label: bol for bol in BOL_CLASSES.values()}

STICK = BOL_CLASSES[STICK_CODE]


def get_bol(key: Union[int, str]) -> BolClass:
    """
    Looks a bol up by code (int or numeric string) or by label.

    Args:
        key (Union[int, str]): ``27``, ``"27"``, ``"tei"`` or the stick alias ``99``.

    Returns:
        BolClass: The matching class.

    Raises:
        KeyError: If the key names no bol.
    """
    if isinstance(key, str):
        token = key.strip().lower()
        if token in _BY_LABEL:
            return _BY_LABEL[token]
        if not token.lstrip("-").isdigit():
            raise KeyError(f"Unknown bol label: {key!r}")
        key = int(token)
    if key == STICK_ALIAS:
        return STICK
    if key not in BOL_CLASSES:
        raise KeyError(f"Unknown bol code: {key!r}")
    return BOL_CLASSES[key]


def bol_label(bol: Optional[BolClass]) -> str:
    return UNDEFINED_LABEL if bol is None else bol.label


def bol_code(bol: Optional[BolClass]) -> int:
    return UNDEFINED_CODE if bol is None else bol.code


def parse_bol(label: str, code: Union[int, str, None] = None) -> Optional[BolClass]:
    """Inverse of ``bol_label``/``bol_code`` for CSV rows; ``undef`` maps to None."""
    if label.strip().lower() == UNDEFINED_LABEL or (code is not None and int(code) == UNDEFINED_CODE):
        return None
    return get_bol(label)
