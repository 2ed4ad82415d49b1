"""Seeded synthetic sentence-pair dataset for smoke runs.

Sentences are strings of pseudo-words built from a stem and an inflectional
suffix, plus a few function words. The gold score is a clipped noisy affine
function of token overlap, mixing two overlap counts: shared stems
(visible to character n-gram metrics and lemmatized variants) and shared
exact content-word forms (visible to word-level metrics). Counts are not
length-normalized, so no single normalized metric sees the whole signal.

Run ``python -m stsabc.synthetic OUTDIR`` to regenerate the bundled files.
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import Dataset, Sentence, SentencePair

CONSONANTS = "bcčdďfghjklľmnňprsštťvzž"
VOWELS = "aáeéiíoóuúyý"
SUFFIXES = ("", "a", "u", "om", "y", "e", "ou", "ách", "ami", "ov")
FUNCTION_WORDS = ("a", "je", "na", "v", "sa", "to", "s", "že")
DEFAULT_SEED = 20240611
NOISE_SD = 0.15
STEM_WEIGHT = 0.5
SLOPE = 0.5


def _stem(rng) -> str:
    syllables = rng.integers(1, 3, endpoint=True)
    out = []
    for _ in range(syllables):
        out.append(CONSONANTS[rng.integers(len(CONSONANTS))])
        out.append(VOWELS[rng.integers(len(VOWELS))])
    out.append(CONSONANTS[rng.integers(len(CONSONANTS))])
    return "".join(out)


def _word(stem, rng) -> str:
    return stem + SUFFIXES[rng.integers(len(SUFFIXES))]


def make_synthetic(n_pairs: int = 200, seed: int = DEFAULT_SEED,
                   vocab_size: int = 400) -> tuple[Dataset, dict[str, str]]:
    """Return the dataset and the surface-form to stem lemma map."""
    rng = np.random.default_rng(seed)
    stems = sorted({_stem(rng) for _ in range(vocab_size * 2)})[:vocab_size]
    stems = [stems[i] for i in rng.permutation(len(stems))]
    lemmas: dict[str, str] = {}
    pairs = []
    for pid in range(n_pairs):
        length = int(rng.integers(5, 10, endpoint=True))
        a_stems = [stems[i] for i in rng.choice(len(stems), size=length, replace=False)]
        keep = rng.uniform(0.0, 1.0)
        b_stems = [s if rng.uniform() < keep else stems[rng.integers(len(stems))]
                   for s in a_stems]
        a_words, b_words = [], []
        for s in a_stems:
            w = _word(s, rng)
            lemmas[w] = s
            a_words.append(w)
        for s, orig in zip(b_stems, a_words):
            # kept stems keep their exact form half of the time
            if s == lemmas[orig] and rng.uniform() < 0.5:
                w = orig
            else:
                w = _word(s, rng)
            lemmas[w] = s
            b_words.append(w)
        for _ in range(int(rng.integers(0, 3))):
            b_words.insert(int(rng.integers(len(b_words) + 1)), str(rng.choice(FUNCTION_WORDS)))
        for _ in range(int(rng.integers(0, 3))):
            a_words.insert(int(rng.integers(len(a_words) + 1)), str(rng.choice(FUNCTION_WORDS)))
        if rng.uniform() < 0.5:
            i = int(rng.integers(len(b_words) - 1))
            b_words[i], b_words[i + 1] = b_words[i + 1], b_words[i]
        shared_stems = len(set(a_stems) & set(b_stems))
        fa = {w for w in a_words if w not in FUNCTION_WORDS}
        fb = {w for w in b_words if w not in FUNCTION_WORDS}
        shared_forms = len(fa & fb)
        overlap = STEM_WEIGHT * shared_stems + (1.0 - STEM_WEIGHT) * shared_forms
        gold = float(np.clip(0.3 + SLOPE * overlap + rng.normal(0.0, NOISE_SD), 0.0, 5.0))
        gold = round(gold, 3)
        text_a = " ".join(a_words).capitalize() + "."
        text_b = " ".join(b_words).capitalize() + "."
        pairs.append(SentencePair(str(pid + 1), Sentence.from_text(text_a),
                                  Sentence.from_text(text_b), gold))
    return Dataset("synthetic", pairs, 5.0), lemmas


CONFIG_TEMPLATE = """\
# Bundled synthetic smoke-test configuration.
seed = 7
output_dir = "out"

[datasets.synthetic]
path = "synthetic.tsv"
format = "sts-benchmark-tsv"
lemmas = "synthetic_lemmas.tsv"

[split]
train_fraction = 0.8
bins = 5

[abc]
n_sources = 20
iterations = 10
limit = 20
cv_folds = 10
"""


def write_synthetic(outdir: str | Path, n_pairs: int = 200, seed: int = DEFAULT_SEED) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ds, lemmas = make_synthetic(n_pairs, seed)
    with open(outdir / "synthetic.tsv", "w", encoding="utf-8") as fh:
        for p in ds.pairs:
            fh.write(f"{p.gold}\t{p.a.raw}\t{p.b.raw}\n")
    with open(outdir / "synthetic_lemmas.tsv", "w", encoding="utf-8") as fh:
        for form in sorted(lemmas):
            fh.write(f"{form}\t{lemmas[form]}\n")
    (outdir / "synthetic.toml").write_text(CONFIG_TEMPLATE, encoding="utf-8")
    return outdir / "synthetic.toml"


def bundled_path(name: str = "synthetic.toml") -> Path:
    return Path(str(resources.files("stsabc") / "data" / name))


if __name__ == "__main__":
    print(write_synthetic(sys.argv[1] if len(sys.argv) > 1 else "."))
