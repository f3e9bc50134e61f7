#!/usr/bin/env python3
"""Scripted walk through the annotation API against an in-process service.

Shows the cold-start path: an unlabeled corpus, a first random batch, then
strategy-driven batches with stopping advice after each submission.
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from fastapi.testclient import TestClient

from altext.classification import TrainConfig
from altext.corpus import build_dataset
from altext.loop import LoopConfig
from altext.service import create_app
from altext.synth import generate_synthetic


def main():
    texts, truth = generate_synthetic(80, 2, seed=21)
    dataset = build_dataset(texts, [None] * len(texts), class_names=["class0", "class1"])
    config = LoopConfig(
        strategy="breaking_ties",
        batch_size=8,
        max_rounds=100,
        seed=1,
        stopping=[{"name": "kappa_average", "window": 3}],
        train=TrainConfig(epochs=30),
    )
    with tempfile.TemporaryDirectory() as session_dir:
        client = TestClient(create_app(dataset, config, session_dir))
        sid = client.post("/api/session").json()["session_id"]
        print(f"session {sid[:8]}..., classes {client.post('/api/session').json()['classes']}")
        for _ in range(6):
            batch = client.get(f"/api/session/{sid}/batch").json()
            if batch["done"]:
                print("pool exhausted")
                break
            labels = {str(d["doc_id"]): [truth[d["doc_id"]]] for d in batch["batch"]}
            reply = client.post(
                f"/api/session/{sid}/labels", json={"seq": batch["seq"], "labels": labels}
            ).json()
            stop = reply["stopping"]
            print(
                f"round {reply['round']:>2}: labeled={reply['labeled']:>3} "
                f"{stop['name']}={stop['value'] if stop['value'] is not None else '-'} "
                f"stop={stop['should_stop']}"
            )
        exported = client.get(f"/api/session/{sid}/export?format=csv").text
        print(f"exported {len(exported.strip().splitlines()) - 1} labels")


if __name__ == "__main__":
    main()
