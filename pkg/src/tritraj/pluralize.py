import re

IRREGULAR = {
    "vertex": "vertices",
    "index": "indices",
    "matrix": "matrices",
    "child": "children",
}


def pluralize_numbers(text: str) -> str:
    """
    Pluralizes a word following a number (integer or float)
    if the number is not ±1. Works even if Rich markup tags
    like [/orange1] appear between the number and the word.
    """
    pattern = re.compile(
        r'\b(-?\d+(?:\.\d+)?)'        # number
        r'(?:\[[^\]]+\])*'            # optional Rich tags, e.g. [orange1], [/orange1]
        r'\s+([A-Za-z]+)\b'           # the word itself
    )

    def replacer(match):
        number = float(match.group(1))
        word = match.group(2)
        if abs(number) == 1:
            return match.group(0)
        plural = IRREGULAR.get(word.lower())
        if plural is None:
            plural = word + ("es" if word.endswith(("s", "x", "ch", "sh")) else "s")
        elif word[0].isupper():
            plural = plural.capitalize()
        return match.group(0)[:-len(word)] + plural

    return pattern.sub(replacer, text)
