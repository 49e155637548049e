"""Export the English frequency table and POS lexicon shipped in data/.

Frequencies come from the wordfreq package (word_frequency, "best" list).
POS tags come from the Brill tagger lexicon distributed with pattern3
(pattern3/text/en/en-lexicon.txt); the first listed tag of each word is its
most frequent one and is mapped to the coarse tag set used by the lexstats
module.

    pip install wordfreq
    pip download pattern3 --no-deps && tar xzf pattern3-3.0.0.tar.gz
    python scripts/export_lexical_data.py --brill pattern3-3.0.0/pattern3/text/en/en-lexicon.txt
"""

import argparse
from pathlib import Path

import wordfreq
from importlib.metadata import version

PENN_TO_COARSE = {
    "NN": "NOUN", "NNS": "NOUN", "NNP": "NOUN", "NNPS": "NOUN",
    "PRP": "PRON", "PRP$": "PRON", "WP": "PRON", "WP$": "PRON",
    "VB": "VERB", "VBD": "VERB", "VBP": "VERB", "VBZ": "VERB", "MD": "VERB",
    "VBG": "VERB_PART", "VBN": "VERB_PART",
    "RB": "ADV", "RBR": "ADV", "RBS": "ADV", "WRB": "ADV",
    "JJ": "ADJ", "JJR": "ADJ", "JJS": "ADJ",
    "DT": "DET", "PDT": "DET", "WDT": "DET",
    "IN": "ADP",
    "CC": "CONJ",
    "CD": "NUM",
    "RP": "PRT", "TO": "PRT", "POS": "PRT",
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--brill", required=True, type=Path)
    ap.add_argument("--out", default=Path(__file__).resolve().parent.parent / "data", type=Path)
    ap.add_argument("--words", type=int, default=30000)
    args = ap.parse_args()

    words = [w for w in wordfreq.top_n_list("en", args.words) if w.isalpha() or "'" in w]
    vocab = set(words)

    with open(args.out / "freq_en.tsv", "w", encoding="utf-8") as f:
        f.write(f"# wordfreq {version('wordfreq')} English word_frequency, top {args.words} words\n")
        for w in words:
            p = wordfreq.word_frequency(w, "en")
            if p > 0:
                f.write(f"{w}\t{p:.6g}\n")

    lexicon = {}
    for line in args.brill.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith(";"):
            continue
        parts = line.split()
        word, tag = parts[0], parts[1]
        if word != word.lower() or word not in vocab or word in lexicon:
            continue
        lexicon[word] = PENN_TO_COARSE.get(tag, "X")

    with open(args.out / "pos_lexicon_en.tsv", "w", encoding="utf-8") as f:
        f.write("# Brill tagger lexicon (via pattern3), most frequent tag mapped to coarse tags\n")
        for w in sorted(lexicon):
            f.write(f"{w}\t{lexicon[w]}\n")
    print(f"{len(words)} frequency entries, {len(lexicon)} lexicon entries")


if __name__ == "__main__":
    main()
