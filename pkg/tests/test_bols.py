"""
Unit tests for `bols.py`.

### Test Cases:

- Lookup by code, numeric string, label and the legacy stick alias.
- Unknown keys raise KeyError.
- The undefined marker round-trips through label and code.
"""
import unittest

from hypothesis import given
from hypothesis import strategies as st

from src.bols import (
    BOL_CLASSES,
    STICK,
    STICK_ALIAS,
    STICK_CODE,
    UNDEFINED_CODE,
    UNDEFINED_LABEL,
    bol_code,
    bol_label,
    get_bol,
    parse_bol,
)


class TestBols(unittest.TestCase):
    """
    Test case for the bol vocabulary.
    """

    def test_vocabulary(self):
        """
        31 vocal bols plus the stick class, codes 1..32 in label order.
        """
        self.assertEqual(sorted(BOL_CLASSES), list(range(1, 33)))
        self.assertEqual(get_bol(1).label, "a")
        self.assertEqual(get_bol("tei").code, 27)
        self.assertEqual(STICK.code, STICK_CODE)
        self.assertEqual(sum(1 for b in BOL_CLASSES.values() if b.is_stick), 1)

    def test_lookup_forms(self):
        self.assertIs(get_bol("27"), get_bol(27))
        self.assertIs(get_bol(" TEI "), get_bol(27))
        self.assertIs(get_bol(STICK_ALIAS), STICK)
        self.assertIs(get_bol("99"), STICK)

    def test_unknown(self):
        for key in ("zzz", 0, 33, "-1"):
            with self.subTest(key=key):
                with self.assertRaises(KeyError):
                    get_bol(key)

    def test_undefined(self):
        self.assertEqual((bol_label(None), bol_code(None)), (UNDEFINED_LABEL, UNDEFINED_CODE))
        self.assertIsNone(parse_bol("undef"))
        self.assertIsNone(parse_bol("whatever", 0))

    @given(st.sampled_from(sorted(BOL_CLASSES)))
    def test_label_and_code_agree(self, code):
        """
        Parsing a bol's own label and code gives the bol back.
        """
        bol = get_bol(code)
        self.assertIs(parse_bol(bol_label(bol), bol_code(bol)), bol)
        self.assertIs(get_bol(bol.label), bol)


if __name__ == "__main__":
    unittest.main()
