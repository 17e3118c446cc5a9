"""Hand-built 3-user corpus with hand-traced expected splits.

alice: 60 steps. 0-14 would qualify but fall in the burn-in; 15-54 all
qualify (40 candidates, thinned to 20 by the even-spread rule); 55-59
fail on rating. bob: qualifying steps only at 16, 20, 25, with decoys
that each violate exactly one rule (burn-in at 14, short review at 18,
thin descriptions at 19, rating 3 at 22). carol: a single qualifying
step at 18, so she contributes a test sample but no train/validation.
"""

from __future__ import annotations

from acrec.ingest import write_jsonl

# round(i * 39 / 19) for i in 0..19 over alice's 40 candidates
ALICE_KEEP_POSITIONS = [0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 21, 23, 25, 27, 29, 31, 33, 35, 37, 39]
ALICE_USEFUL_INDICES = [15 + p for p in ALICE_KEEP_POSITIONS]

BOB_USEFUL_INDICES = [16, 20, 25]
CAROL_USEFUL_INDICES = [18]

_BIG_DESC = " ".join(f"w{i:03d}" for i in range(250))  # exactly 250 tokens
_THIN_DESC = " ".join(f"w{i}" for i in range(10))

REVIEW_20 = " ".join(f"tok{i}" for i in range(20))
REVIEW_19 = " ".join(f"tok{i}" for i in range(19))
REVIEW_25 = " ".join(f"tok{i}" for i in range(25))


def _book(bid, desc):
    return {"id": bid, "title": f"title {bid}", "description": desc}


def build_handtraced_corpus():
    """Returns (book_records, interaction_records, expected) where
    expected maps user -> {"useful": [...], "train": [...],
    "validation": ..., "test": ...}."""
    books = [_book(f"big{i:03d}", _BIG_DESC) for i in range(130)]
    books.append(_book("thin000", _THIN_DESC))

    interactions = []

    def add(user, index, book, rating, review):
        interactions.append(
            {
                "user_id": user,
                "book_id": book,
                "rating": rating,
                "review": review,
                "timestamp": index * 10,
                "_expected_index": index,
            }
        )

    # alice: 60 steps over books big000..big059
    for i in range(60):
        if i <= 14:
            add("alice", i, f"big{i:03d}", 5, REVIEW_20)  # burn-in
        elif i <= 54:
            add("alice", i, f"big{i:03d}", 5, REVIEW_25)  # candidate
        else:
            add("alice", i, f"big{i:03d}", 3, REVIEW_25)  # rating fails

    # bob: 30 steps over big060..big089
    for i in range(30):
        book = f"big{60 + i:03d}"
        if i == 14:
            add("bob", i, book, 5, REVIEW_25)  # qualifies but burn-in
        elif i == 16:
            add("bob", i, book, 5, REVIEW_25)  # useful
        elif i == 18:
            add("bob", i, book, 4, REVIEW_19)  # review one token short
        elif i == 19:
            add("bob", i, "thin000", 5, REVIEW_25)  # descriptions too thin
        elif i == 20:
            add("bob", i, book, 4, REVIEW_20)  # useful (exactly at thresholds)
        elif i == 22:
            add("bob", i, book, 3, REVIEW_25)  # rating 3 fails
        elif i == 25:
            add("bob", i, book, 5, REVIEW_25)  # useful
        else:
            add("bob", i, book, 2, "meh")

    # carol: 20 steps over big090..big109
    for i in range(20):
        book = f"big{90 + i:03d}"
        if i == 18:
            add("carol", i, book, 5, REVIEW_25)
        else:
            add("carol", i, book, 1, "nope")

    for rec in interactions:
        rec.pop("_expected_index")

    expected = {
        "alice": {
            "useful": ALICE_USEFUL_INDICES,
            "train": ALICE_USEFUL_INDICES[:-2],
            "validation": ALICE_USEFUL_INDICES[-2],
            "test": ALICE_USEFUL_INDICES[-1],
        },
        "bob": {
            "useful": BOB_USEFUL_INDICES,
            "train": [16],
            "validation": 20,
            "test": 25,
        },
        "carol": {
            "useful": CAROL_USEFUL_INDICES,
            "train": [],
            "validation": None,
            "test": 18,
        },
    }
    return books, interactions, expected


def write_handtraced_corpus(out_dir):
    books, interactions, expected = build_handtraced_corpus()
    write_jsonl(out_dir / "books.jsonl", books)
    write_jsonl(out_dir / "interactions.jsonl", interactions)
    return out_dir / "books.jsonl", out_dir / "interactions.jsonl", expected
