"""The canonical 98-name feature registry and its group partition.

Names are a stable public contract: they appear as CSV column headers and
in every report. The sliding-acceleration block reuses the force descriptor
set minus the friction coefficient (s13), renamed sAcc1..sAcc24 in the same
order.
"""

PRESSING_FEATURES = ("aP1", "bP1", "aP2", "bP2", "cP2", "deltaP")

HEATFLUX_FEATURES = ("aH1", "bH1", "cH1", "aH2", "bH2", "cH2")

TEMPERATURE_FEATURES = ("aT", "bT", "cT", "dT",
                        "aT0", "bT0", "cT0", "dT0", "madPeak")

SLIDING_FORCE_FEATURES = tuple(f"s{i}" for i in range(1, 26))

# force descriptor order minus s13 (friction has no acceleration analogue)
ACCEL_SOURCE_KEYS = tuple(f"s{i}" for i in range(1, 26) if i != 13)
SLIDING_ACCEL_FEATURES = tuple(f"sAcc{i}" for i in range(1, 25))

MFCC_FORCE_FEATURES = tuple(f"mfccF{i}" for i in range(1, 15))
MFCC_ACCEL_FEATURES = tuple(f"mfccA{i}" for i in range(1, 15))

THERMAL_FEATURES = HEATFLUX_FEATURES + TEMPERATURE_FEATURES
SLIDING_FEATURES = (SLIDING_FORCE_FEATURES + SLIDING_ACCEL_FEATURES
                    + MFCC_FORCE_FEATURES + MFCC_ACCEL_FEATURES)

FEATURE_NAMES = PRESSING_FEATURES + THERMAL_FEATURES + SLIDING_FEATURES

FEATURE_GROUPS = {
    "pressing": PRESSING_FEATURES,
    "thermal": THERMAL_FEATURES,
    "sliding": SLIDING_FEATURES,
}

GROUP_OF = {name: group
            for group, names in FEATURE_GROUPS.items()
            for name in names}

assert len(FEATURE_NAMES) == 98
assert len(set(FEATURE_NAMES)) == 98


def group_mask(group: str) -> tuple[str, ...]:
    """Feature names belonging to a group; 'all' selects the full registry."""
    if group == "all":
        return FEATURE_NAMES
    try:
        return FEATURE_GROUPS[group]
    except KeyError:
        raise ValueError(f"unknown feature group {group!r}; expected one of "
                         f"{sorted(FEATURE_GROUPS)} or 'all'") from None
