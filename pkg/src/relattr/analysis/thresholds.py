"""Decision thresholds on class probabilities."""

DEFAULT_THRESHOLDS = {"AF": 0.39, "LBBB": 0.05}


def classify_with_threshold(probability: float, label: str, thresholds=None) -> bool:
    """True iff ``probability`` is strictly above the class threshold."""
    table = DEFAULT_THRESHOLDS if thresholds is None else thresholds
    key = {k.upper(): k for k in table}.get(str(label).upper())
    if key is None:
        raise ValueError(f"no threshold for class {label!r}; known: {sorted(table)}")
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {probability}")
    return probability > table[key]
