"""Fixtures: meme images rendered with Pillow, job records, knowledge source."""

import json

import numpy as np
import pytest
from PIL import Image, ImageDraw

from embexport import formats

MEMES = [
    {"id": "osman", "ocr_text": "first time? Janissaries to the young sultan",
     "color": (180, 40, 40),
     "context": [
         "The Janissaries were elite infantry units of the Ottoman army.",
         "The result was a palace uprising that imprisoned the young sultan.",
         "His ear was cut off and shown to the court to confirm his death.",
         "It was the first time a sultan was executed by his own troops."],
     "evidence": [1, 3]},
    {"id": "elba", "ocr_text": "napoleon leaving elba speedrun any percent",
     "color": (40, 90, 180),
     "context": [
         "Napoleon managed to sneak past his guards and escape from Elba.",
         "French police were sent to arrest him but knelt before him instead.",
         "Paris welcomed him with celebration and the new king fled."],
     "evidence": [0]},
    {"id": "peanut", "ocr_text": "vote for the grinning peanut 1976",
     "color": (200, 160, 40),
     "context": [
         "The statue depicts a large peanut with a toothy grin.",
         "It was built to support a presidential campaign in 1976.",
         "The statue references the candidate's career as a peanut farmer.",
         "It remains a roadside attraction in Georgia."],
     "evidence": [0, 1]},
    {"id": "dday", "ocr_text": "steppin on the beach june 6 1944",
     "color": (60, 140, 70),
     "context": [
         "The landings were the largest seaborne invasion in history.",
         "The operation began the liberation of France.",
         "Allied troops landed on five beaches in Normandy."],
     "evidence": [2]},
    {"id": "conrad", "ocr_text": "reading heart of darkness for the vibes",
     "color": (110, 60, 150),
     "context": [
         "The novella tells the story of a sailor on the Congo river.",
         "It is widely regarded as a critique of colonial rule.",
         "The river is never named in the narrative."],
     "evidence": [1]},
]


def render_meme(path, text, color):
    img = Image.new("RGB", (240, 180), color)
    draw = ImageDraw.Draw(img)
    draw.rectangle([8, 8, 232, 60], fill=(245, 245, 245))
    draw.text((14, 20), text[:28], fill=(10, 10, 10))
    draw.text((14, 150), text[28:56], fill=(250, 250, 250))
    img.save(path)


@pytest.fixture(scope="session")
def meme_job(tmp_path_factory):
    """Job directory with five rendered meme images and a JSONL record file."""
    root = tmp_path_factory.mktemp("job")
    (root / "imgs").mkdir()
    records = []
    for meme in MEMES:
        image_rel = f"imgs/{meme['id']}.png"
        render_meme(root / image_rel, meme["ocr_text"], meme["color"])
        records.append({"id": meme["id"], "image": image_rel,
                        "ocr_text": meme["ocr_text"],
                        "context": meme["context"],
                        "evidence": meme["evidence"]})
    job_path = root / "records.jsonl"
    with open(job_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return {"root": root, "job_path": job_path, "records": records}


@pytest.fixture(scope="session")
def knowledge_source_files(tmp_path_factory):
    """Node-embedding source covering the OCR vocabulary of the fixtures."""
    root = tmp_path_factory.mktemp("ksource")
    rng = np.random.default_rng(17)
    words = sorted({tok.casefold() for meme in MEMES
                    for tok in meme["ocr_text"].split()} | {"sultan", "beach"})
    matrix = rng.normal(size=(len(words), 24)).astype(np.float32)
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    emb = root / "nodes.memx"
    wl = root / "nodes.words"
    formats.write_embedding(matrix, emb)
    formats.write_wordlist(words, wl)
    return {"emb": str(emb), "words": str(wl), "words_list": words,
            "matrix": matrix}
