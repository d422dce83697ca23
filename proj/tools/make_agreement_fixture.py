#!/usr/bin/env python3
"""Write a 9337-row corpus whose label pairs reproduce the double-validation
confusion matrix, with the published source and script counts."""

import argparse
import json
import random

# rows: first validation, cols: second validation, order Positive/Negative/Ambiguous
MATRIX = [[2817, 538, 392], [178, 3864, 404], [27, 95, 1022]]
LABELS = ["1", "0", "A"]
SOURCES = [("facebook", 4621), ("twitter", 2610), ("youtube", 801), ("news", 1255), ("review", 50)]
BANGLA_ROWS = 6698

BANGLA_WORDS = ["গান", "খেলা", "দাম", "ছবি", "কথা", "খবর", "মোবাইল", "দোকান", "সেবা", "রাস্তা"]
ROMANIZED_WORDS = ["gan", "khela", "dam", "chobi", "kotha", "khobor", "mobile", "dokan", "sheba", "rasta"]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output")
    parser.add_argument("--seed", type=int, default=20)
    args = parser.parse_args()
    rng = random.Random(args.seed)

    pairs = [(LABELS[r], LABELS[c]) for r in range(3) for c in range(3) for _ in range(MATRIX[r][c])]
    sources = [name for name, count in SOURCES for _ in range(count)]
    scripts = ["bangla"] * BANGLA_ROWS + ["romanized"] * (len(pairs) - BANGLA_ROWS)
    assert len(pairs) == len(sources) == len(scripts) == 9337
    for column in (pairs, sources, scripts):
        rng.shuffle(column)

    with open(args.output, "w", encoding="utf-8") as out:
        for i, ((first, second), source, script) in enumerate(zip(pairs, sources, scripts), start=1):
            words = BANGLA_WORDS if script == "bangla" else ROMANIZED_WORDS
            text = " ".join(rng.choice(words) for _ in range(rng.randint(3, 8)))
            row = {"id": i, "raw": text, "modified": None, "label1": first, "label2": second,
                   "source": source}
            out.write(json.dumps(row, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
