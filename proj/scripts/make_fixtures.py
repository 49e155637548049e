"""Regenerate the synthetic fixtures in data/fixtures/.

All texts are template-built and carry no clinical data. Outputs are a pure
function of the seeds below.
"""

import csv
import json
import random
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "data" / "fixtures"

PT_CONTROL = [
    "O menino ia passando na rua e viu um cachorrinho.",
    "Ele gostou do cachorrinho e chamou o animal para perto.",
    "O cachorrinho veio correndo e acompanhou o menino até a casa.",
    "Chegando em casa, o menino escondeu o cachorro dentro do armário.",
    "A mãe abriu o armário para guardar as roupas e encontrou o cachorro.",
    "A mãe ficou brava e disse que não queria bicho dentro de casa.",
    "O menino explicou que o cachorro estava sozinho na rua.",
    "Depois de conversar, a mãe deixou o cachorro ficar.",
    "Os dois arrumaram uma caminha com um cobertor velho na varanda.",
    "No fim, o menino e o cachorro ficaram muito amigos.",
    "O menino deu água e comida para o cachorrinho na cozinha.",
    "A história termina com a família feliz e o cachorro dormindo.",
]
PT_AD = [
    "O menino, né, ele viu o cachorro.",
    "Aí ele levou, levou ele para casa.",
    "Aí ele escondeu, escondeu lá, né.",
    "A mãe, ela achou, achou ele lá.",
    "Ela não gostou, né, ela não gostou.",
    "Aí depois ficou, ficou com ele.",
    "É isso, o cachorro, né.",
    "Ele pegou e aí, aí foi embora.",
]
EN_CONTROL = [
    "The boy is standing on a wobbly stool reaching into the cookie jar.",
    "The stool is tipping over and he is about to fall.",
    "His sister is reaching up and asking for a cookie.",
    "The mother is drying a plate at the kitchen sink.",
    "Water is overflowing from the sink onto the floor.",
    "She does not seem to notice the puddle at her feet.",
    "The window is open and the curtains are blowing.",
    "Outside the window you can see a path and some bushes in the garden.",
    "There are two cups and a plate on the counter beside the sink.",
    "The cupboard door is open above the counter.",
    "The girl has her finger to her lips so the mother will not hear.",
    "It looks like a warm afternoon in a tidy kitchen.",
]
EN_AD = [
    "The boy is, he is up there getting the, the thing.",
    "He is going to fall, fall down.",
    "And she is, she is doing the dishes I think.",
    "The water, it is, it is coming out.",
    "There is a, a girl there and she wants it.",
    "I don't know what that is over there.",
    "They are in the, the kitchen.",
    "He is getting it for her I guess.",
]


def transcript(rng, pool, lo, hi):
    n = rng.randint(lo, hi)
    return " ".join(rng.sample(pool, min(n, len(pool))))


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def bilingual40():
    rng = random.Random(40)
    groups = ["AD"] * 10 + ["C"] * 30
    rng.shuffle(groups)
    rows = []
    for i, g in enumerate(groups):
        text = transcript(rng, PT_AD, 3, 6) if g == "AD" else transcript(rng, PT_CONTROL, 5, 9)
        rows.append({"id": f"pt{i + 1:03d}", "text": text, "group": g, "language": "pt"})
    write_jsonl(OUT / "bilingual40.jsonl", rows)


def english40():
    rng = random.Random(41)
    rows = []
    for g, pool, lo, hi in (("AD", EN_AD, 3, 6), ("C", EN_CONTROL, 5, 9)):
        for j in range(20):
            rows.append({"id": f"en_{g.lower()}{j + 1:02d}", "text": transcript(rng, pool, lo, hi), "group": g,
                         "language": "en", "split": "train" if j < 14 else "test"})
    rng.shuffle(rows)
    write_jsonl(OUT / "english40.jsonl", rows)


def counts_fixture(name, n_ad, n_c, seed):
    rng = random.Random(seed)
    rows = []
    for g, n, pool in (("AD", n_ad, EN_AD), ("C", n_c, EN_CONTROL)):
        for j in range(n):
            rows.append({"id": f"{g.lower()}{j + 1:03d}", "text": transcript(rng, pool, 2, 4), "group": g,
                         "language": "en"})
    write_jsonl(OUT / f"{name}.jsonl", rows)


def imbalanced_blobs():
    rng = np.random.default_rng(15)
    dim = 8
    shift = np.zeros(dim)
    shift[:3] = 0.9
    minority = rng.normal(loc=shift, scale=1.0, size=(40, dim))
    majority = rng.normal(loc=-shift, scale=1.0, size=(200, dim))
    with open(OUT / "imbalanced_blobs.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["label"] + [f"x{i}" for i in range(dim)])
        for label, block in (("AD", minority), ("C", majority)):
            for row in block:
                w.writerow([label] + [f"{v:.6f}" for v in row])


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    bilingual40()
    english40()
    counts_fixture("dogstory_counts139", 23, 116, 139)
    counts_fixture("balanced156", 78, 78, 156)
    imbalanced_blobs()
