"""Stopword lists for candidate filtering in the TF-IDF baseline."""

ENGLISH = frozenset("""
a about above after again against all almost also am among an and any are
aren as at be because been before being below between both but by can cannot
could did do does doing done down during each either else etc even ever every
few for from further had has have having he her here hers herself him himself
his how however i if in into is isn it its itself just least less like may me
might more most much must my myself neither no nor not now of off often on once
one only or other others otherwise our ours ourselves out over own per rather
same several shall she should since so some such than that the their theirs
them themselves then there therefore these they this those though through thus
to too toward towards under until up upon us use used uses using very via was
we well were what whatever when whenever where whereas whether which while who
whom whose why will with within without would yet you your yours yourself
yourselves
""".split())

LISTS = {"en": ENGLISH, "none": frozenset()}


def get(list_id: str) -> frozenset:
    try:
        return LISTS[list_id]
    except KeyError:
        raise ValueError(f"unknown stopword list {list_id!r}; choose from {sorted(LISTS)}") from None
