#!/usr/bin/env python3
"""Generates the bundled 50-sentence fixture and its count manifest.

Outputs (next to this script):
  fixture.conll      CoNLL-2003 columns, IOB1 tags, three documents
  fixture.conllu     matching CoNLL-U dependency trees
  fixture.glove      synthetic 300-d vectors (lower-cased keys)
  fixture.ctxe       synthetic 32-d contextual vectors at subword granularity
  fixture_manifest.json   counts computed here, independently of the C++ code

Run once; outputs are committed. Deterministic for a fixed seed.
"""

import json
import os
import random
import struct

HERE = os.path.dirname(os.path.abspath(__file__))
SEED = 20211201
N_SENTENCES = 50
GLOVE_DIM = 300
CTX_DIM = 32

ENTITIES = {
    "LOC": [["U.S."], ["Germany"], ["Australia"], ["MACEDONIA"], ["Skopje"],
            ["New", "York"], ["Britain"], ["Moscow"]],
    "PER": [["Clinton"], ["Helmut", "Kohl"], ["Boris", "Yeltsin"], ["Jobs"],
            ["Peter", "Blackburn"], ["Washington"]],
    "ORG": [["European", "Commission"], ["Reuters"], ["NATO"],
            ["Bank", "of", "England"], ["Wall", "Street", "Journal"]],
    "MISC": [["German"], ["British"], ["Olympic"], ["Macedonian"],
             ["Euro", "96"]],
}
FILLER = ["the", "said", "on", "in", "a", "talks", "government", "will",
          "visit", "officials", "told", "after", "week", "minister", "to",
          "of", "and", "with", "market", "shares", "rose", "fell", "percent",
          "new", "president", "meeting", "report", "Thursday", "."]
POS = {"the": "DT", "a": "DT", "said": "VBD", "told": "VBD", "rose": "VBD",
       "fell": "VBD", "will": "MD", "visit": "VB", "on": "IN", "in": "IN",
       "after": "IN", "of": "IN", "with": "IN", "to": "TO", "and": "CC",
       ".": ".", "percent": "NN", "talks": "NNS", "officials": "NNS",
       "shares": "NNS"}
DEPRELS = ["nsubj", "obj", "obl", "det", "amod", "compound", "case", "punct",
           "conj", "cc", "nmod", "aux"]


def make_sentence(rng):
    """Returns a list of (surface, pos, iob1_tag)."""
    out = []
    prev_type = None
    n_chunks = rng.randint(3, 8)
    for _ in range(n_chunks):
        if rng.random() < 0.45:
            etype = rng.choice(sorted(ENTITIES))
            words = rng.choice(ENTITIES[etype])
            # IOB1: B- only when directly following a same-type entity.
            for k, w in enumerate(words):
                tag = "I-" + etype
                if k == 0 and prev_type == etype:
                    tag = "B-" + etype
                out.append((w, "NNP", tag))
            prev_type = etype
        else:
            w = rng.choice(FILLER)
            out.append((w, POS.get(w, "NN"), "O"))
            prev_type = None
    if out[-1][0] != ".":
        out.append((".", ".", "O"))
    return out


def random_tree(rng, n):
    """Random recursive tree; returns 1-based heads with exactly one 0."""
    order = list(range(1, n + 1))
    rng.shuffle(order)
    heads = [0] * (n + 1)
    placed = [order[0]]
    for node in order[1:]:
        heads[node] = rng.choice(placed)
        placed.append(node)
    return heads[1:]


def iob1_spans(tags):
    spans = []
    cur = None
    for i, t in enumerate(tags):
        if t == "O":
            cur = None
            continue
        pfx, ty = t.split("-", 1)
        if pfx == "B" or cur is None or cur[2] != ty:
            cur = [i, i, ty]
            spans.append(cur)
        else:
            cur[1] = i
    return [tuple(s) for s in spans]


def main():
    rng = random.Random(SEED)
    docs = [18, 17, 15]
    sentences = []
    for d, count in enumerate(docs):
        for _ in range(count):
            sentences.append((d, make_sentence(rng)))
    assert len(sentences) == N_SENTENCES

    # CoNLL-2003 file.
    lines = []
    sent_idx = 0
    for d, count in enumerate(docs):
        lines.append("-DOCSTART- -X- -X- O")
        lines.append("")
        for _ in range(count):
            _, toks = sentences[sent_idx]
            sent_idx += 1
            for w, pos, tag in toks:
                chunk = "I-NP" if pos.startswith("NN") else "O"
                lines.append(f"{w} {pos} {chunk} {tag}")
            lines.append("")
    with open(os.path.join(HERE, "fixture.conll"), "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")

    # CoNLL-U dependencies; one multiword range line in sentence 3.
    out = []
    rels_seen = set()
    for si, (_, toks) in enumerate(sentences):
        out.append(f"# sent_id = {si}")
        heads = random_tree(rng, len(toks))
        for i, (w, pos, _) in enumerate(toks, start=1):
            if si == 3 and i == 1 and len(toks) >= 2:
                out.append(f"1-2\t{w}{toks[1][0]}\t_\t_\t_\t_\t_\t_\t_\t_")
            rel = "root" if heads[i - 1] == 0 else rng.choice(DEPRELS)
            rels_seen.add(rel)
            out.append(f"{i}\t{w}\t_\t{pos}\t{pos}\t_\t{heads[i - 1]}\t{rel}\t_\t_")
        out.append("")
    with open(os.path.join(HERE, "fixture.conllu"), "w", newline="\n") as f:
        f.write("\n".join(out) + "\n")

    # GloVe vectors for every lower-cased surface except a few OOV words.
    vocab = sorted({w.lower() for _, toks in sentences for w, _, _ in toks})
    oov = {"thursday", "euro"}
    with open(os.path.join(HERE, "fixture.glove"), "w", newline="\n") as f:
        for w in vocab:
            if w in oov:
                continue
            vec = " ".join(f"{rng.gauss(0.0, 0.4):.4f}" for _ in range(GLOVE_DIM))
            f.write(f"{w} {vec}\n")

    # CTXE: words longer than six characters split into two subwords.
    with open(os.path.join(HERE, "fixture.ctxe"), "wb") as f:
        f.write(b"CTXE")
        f.write(struct.pack("<III", 1, CTX_DIM, len(sentences)))
        for si, (_, toks) in enumerate(sentences):
            mask = []
            for w, _, _ in toks:
                mask.append(1)
                if len(w) > 6:
                    mask.append(0)
            f.write(struct.pack("<III", si, len(mask), len(toks)))
            f.write(bytes(mask))
            for _ in range(len(mask) * CTX_DIM):
                f.write(struct.pack("<f", rng.gauss(0.0, 1.0)))

    # Manifest: independent counts.
    n_tokens = sum(len(t) for _, t in sentences)
    ent_counts = {k: 0 for k in ("LOC", "MISC", "ORG", "PER")}
    surface = {}
    for _, toks in sentences:
        for s, e, ty in iob1_spans([t for _, _, t in toks]):
            ent_counts[ty] += 1
            for i in range(s, e + 1):
                surface[toks[i][0]] = surface.get(toks[i][0], 0) + 1
    pos_vocab = sorted({p for _, t in sentences for _, p, _ in t})
    manifest = {
        "sentences": len(sentences),
        "documents": len(docs),
        "tokens": n_tokens,
        "entities": ent_counts,
        "entity_surface_mentions": dict(sorted(surface.items())),
        "pos_vocab_size": len(pos_vocab),
        "deprel_vocab_size": len(rels_seen),
        "glove_dim": GLOVE_DIM,
        "glove_entries": len(vocab) - len(oov & set(vocab)),
        "ctx_dim": CTX_DIM,
    }
    with open(os.path.join(HERE, "fixture_manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
