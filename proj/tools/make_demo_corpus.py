#!/usr/bin/env python3
"""Generate the synthetic demo corpus: demo/corpus.jsonl plus matching
spaCy-style dependency parses in demo/corpus.conllu.

Output is fully determined by --seed, so the committed files can be
regenerated byte for byte.
"""

import argparse
import json
import random
from pathlib import Path

CATEGORIES = {
    "astro-ph.GA": {
        "nouns": ["galaxy", "star", "telescope", "redshift", "supernova", "nebula", "quasar", "halo", "spectrum", "disk"],
        "adjs": ["distant", "massive", "luminous", "stellar", "cosmic"],
        "verbs": [("observe", "observes", "observed"), ("detect", "detects", "detected"),
                  ("constrain", "constrains", "constrained"), ("trace", "traces", "traced")],
    },
    "math.AG": {
        "nouns": ["theorem", "manifold", "operator", "group", "conjecture", "polynomial", "variety", "bound", "invariant", "sheaf"],
        "adjs": ["compact", "algebraic", "finite", "smooth", "convex"],
        "verbs": [("prove", "proves", "proved"), ("characterize", "characterizes", "characterized"),
                  ("generalize", "generalizes", "generalized"), ("establish", "establishes", "established")],
    },
    "cs.LG": {
        "nouns": ["network", "algorithm", "model", "dataset", "benchmark", "transformer", "encoder", "accuracy", "policy", "embedding"],
        "adjs": ["neural", "efficient", "scalable", "distributed", "robust"],
        "verbs": [("improve", "improves", "improved"), ("train", "trains", "trained"),
                  ("outperform", "outperforms", "outperformed"), ("optimize", "optimizes", "optimized")],
    },
    "cond-mat.str-el": {
        "nouns": ["spin", "phonon", "superconductor", "magnet", "crystal", "electron", "phase", "film", "defect", "lattice"],
        "adjs": ["magnetic", "topological", "thin", "correlated", "disordered"],
        "verbs": [("exhibit", "exhibits", "exhibited"), ("induce", "induces", "induced"),
                  ("suppress", "suppresses", "suppressed"), ("probe", "probes", "probed")],
    },
    "q-bio.MN": {
        "nouns": ["protein", "gene", "cell", "neuron", "enzyme", "tissue", "pathway", "genome", "receptor", "mutation"],
        "adjs": ["cellular", "genetic", "metabolic", "molecular", "regulatory"],
        "verbs": [("regulate", "regulates", "regulated"), ("express", "expresses", "expressed"),
                  ("bind", "binds", "bound"), ("activate", "activates", "activated")],
    },
}

# Cross-listing partners, so some records carry several categories.
CROSS = {
    "astro-ph.GA": "astro-ph.CO",
    "math.AG": "math.NT",
    "cs.LG": "stat.ML",
    "cond-mat.str-el": "cond-mat.mtrl-sci",
    "q-bio.MN": "q-bio.GN",
}

PREP_VERBS = [("focus", "focus"), ("rely", "rely"), ("report", "report"), ("build", "build")]
PREPS = {"focus": "on", "rely": "on", "report": "on", "build": "upon"}
PASSIVE_PREPS = ["in", "for", "with"]


class Sentence:
    def __init__(self):
        self.tokens = []  # (form, lemma, upos, head, deprel)

    def add(self, form, lemma, upos, head, deprel):
        self.tokens.append((form, lemma, upos, head, deprel))
        return len(self.tokens)

    def text(self):
        out = ""
        for i, (form, *_rest) in enumerate(self.tokens):
            nxt = self.tokens[i + 1][2] if i + 1 < len(self.tokens) else None
            out += form + ("" if nxt == "PUNCT" or nxt is None else " ")
        return out

    def conllu(self):
        lines = []
        for i, (form, lemma, upos, head, deprel) in enumerate(self.tokens, start=1):
            nxt = self.tokens[i][2] if i < len(self.tokens) else None
            misc = "SpaceAfter=No" if nxt == "PUNCT" or nxt is None else "_"
            lines.append(f"{i}\t{form}\t{lemma}\t{upos}\t_\t_\t{head}\t{deprel}\t_\t{misc}")
        return lines


def cap(word):
    return word[:1].upper() + word[1:]


def svo(rng, v):
    # The ADJ N1 V-s the N2 .
    s = Sentence()
    n1, n2 = rng.sample(v["nouns"], 2)
    verb = rng.choice(v["verbs"])
    s.add("The", "the", "DET", 3, "det")
    s.add(rng.choice(v["adjs"]), None, "ADJ", 3, "amod")
    s.add(n1, n1, "NOUN", 4, "nsubj")
    s.add(verb[1], verb[0], "VERB", 0, "ROOT")
    s.add("the", "the", "DET", 6, "det")
    s.add(n2, n2, "NOUN", 4, "dobj")
    s.add(".", ".", "PUNCT", 4, "punct")
    return s


def prep_object(rng, v):
    # We V P ADJ N .
    s = Sentence()
    verb, _ = rng.choice(PREP_VERBS)
    n = rng.choice(v["nouns"])
    s.add("We", "we", "PRON", 2, "nsubj")
    s.add(verb, verb, "VERB", 0, "ROOT")
    s.add(PREPS[verb], PREPS[verb], "ADP", 2, "prep")
    s.add(rng.choice(v["adjs"]), None, "ADJ", 5, "amod")
    s.add(n + "s", n, "NOUN", 3, "pobj")
    s.add(".", ".", "PUNCT", 2, "punct")
    return s


def copular(rng, v):
    # The N is ADJ .   (no VERB, so no triple)
    s = Sentence()
    n = rng.choice(v["nouns"])
    s.add("The", "the", "DET", 2, "det")
    s.add(n, n, "NOUN", 3, "nsubj")
    s.add("is", "be", "AUX", 0, "ROOT")
    s.add(rng.choice(v["adjs"]), None, "ADJ", 3, "acomp")
    s.add(".", ".", "PUNCT", 3, "punct")
    return s


def passive(rng, v):
    # The N1 was V-ed P the N2 .
    s = Sentence()
    n1, n2 = rng.sample(v["nouns"], 2)
    verb = rng.choice(v["verbs"])
    s.add("The", "the", "DET", 2, "det")
    s.add(n1, n1, "NOUN", 4, "nsubjpass")
    s.add("was", "be", "AUX", 4, "auxpass")
    s.add(verb[2], verb[0], "VERB", 0, "ROOT")
    s.add(rng.choice(PASSIVE_PREPS), None, "ADP", 4, "prep")
    s.add("the", "the", "DET", 7, "det")
    s.add(n2, n2, "NOUN", 5, "pobj")
    s.add(".", ".", "PUNCT", 4, "punct")
    return s


def coordinated(rng, v):
    # ADJ N1s V N2s and V the N3 .   (second verb has no subject)
    s = Sentence()
    n1, n2, n3 = rng.sample(v["nouns"], 3)
    v1, v2 = rng.sample(v["verbs"], 2)
    s.add(cap(rng.choice(v["adjs"])), None, "ADJ", 2, "amod")
    s.add(n1 + "s", n1, "NOUN", 3, "nsubj")
    s.add(v1[0], v1[0], "VERB", 0, "ROOT")
    s.add(n2 + "s", n2, "NOUN", 3, "dobj")
    s.add("and", "and", "CCONJ", 3, "cc")
    s.add(v2[0], v2[0], "VERB", 3, "conj")
    s.add("the", "the", "DET", 8, "det")
    s.add(n3, n3, "NOUN", 6, "dobj")
    s.add(".", ".", "PUNCT", 3, "punct")
    return s


TEMPLATES = [svo, svo, prep_object, copular, passive, coordinated]


def fill_lemmas(s):
    s.tokens = [(f, l if l is not None else f.lower(), u, h, d) for f, l, u, h, d in s.tokens]
    return s


def make_corpus(seed, n_docs, noise):
    rng = random.Random(seed)
    cats = sorted(CATEGORIES)
    assignment = [cats[i % len(cats)] for i in range(n_docs)]
    rng.shuffle(assignment)
    records, parses = [], []
    for i, cat in enumerate(assignment):
        doc_id = f"demo.{i + 1:04d}"
        sentences = []
        for _ in range(rng.randint(3, 6)):
            vocab_cat = cat if rng.random() >= noise else rng.choice(cats)
            sentences.append(fill_lemmas(rng.choice(TEMPLATES)(rng, CATEGORIES[vocab_cat])))
        texts = [s.text() for s in sentences]
        # Occasional hard line breaks, as in raw metadata dumps.
        abstract = ""
        for j, t in enumerate(texts):
            if j:
                abstract += "\n  " if rng.random() < 0.3 else " "
            abstract += t
        categories = [cat] + ([CROSS[cat]] if rng.random() < 0.2 else [])
        records.append({"id": doc_id, "abstract": abstract, "categories": categories})
        parses.append((doc_id, sentences))
    return records, parses


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--docs", type=int, default=200)
    ap.add_argument("--noise", type=float, default=0.25, help="chance a sentence borrows another category's vocabulary")
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "demo")
    args = ap.parse_args()

    records, parses = make_corpus(args.seed, args.docs, args.noise)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "corpus.jsonl", "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")
    with open(args.out / "corpus.conllu", "w", encoding="utf-8", newline="\n") as f:
        for doc_id, sentences in parses:
            f.write(f"# newdoc id = {doc_id}\n")
            for k, s in enumerate(sentences, start=1):
                f.write(f"# sent_id = {doc_id}-{k}\n# text = {s.text()}\n")
                f.write("\n".join(s.conllu()) + "\n\n")
    print(f"wrote {len(records)} documents to {args.out}")


if __name__ == "__main__":
    main()
