"""Shared BIO tag helpers.

A tag is "O", "B-<type>", or "I-<type>".  Several modules need the same two
operations: checking prefix consistency and rebuilding prefixes from a type
sequence (label projection re-tags maximal same-type runs left to right).
"""


def split_tag(tag):
    """Returns (prefix, type); type is None for "O".  Raises on malformed tags."""
    if tag == "O":
        return "O", None
    if len(tag) > 2 and tag[1] == "-" and tag[0] in ("B", "I"):
        return tag[0], tag[2:]
    raise ValueError(f"malformed BIO tag: {tag!r}")


def strict_violations(tags):
    """(index, message) for every I- tag without a same-type B/I predecessor."""
    out = []
    prev_type = None
    for i, tag in enumerate(tags):
        prefix, typ = split_tag(tag)
        if prefix == "I" and typ != prev_type:
            if prev_type is None:
                out.append((i, f"I-{typ} at position {i} does not continue a span"))
            else:
                out.append((i, f"I-{typ} at position {i} follows type {prev_type}"))
        prev_type = typ
    return out


def repair(tags):
    """Turn orphan I-X tags into B-X; already-consistent tags pass through."""
    out = []
    prev_type = None
    for tag in tags:
        prefix, typ = split_tag(tag)
        if prefix == "I" and typ != prev_type:
            out.append(f"B-{typ}")
        else:
            out.append(tag)
        prev_type = typ
    return out


def types_to_bio(types):
    """Type-or-None sequence -> BIO tags, B at the start of each maximal run."""
    out = []
    prev = None
    for typ in types:
        if typ is None:
            out.append("O")
        elif typ == prev:
            out.append(f"I-{typ}")
        else:
            out.append(f"B-{typ}")
        prev = typ
    return out
