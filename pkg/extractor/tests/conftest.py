import json

import numpy as np
import pytest
import torch
from PIL import Image
from transformers import (
    CLIPConfig,
    CLIPImageProcessor,
    CLIPModel,
    CLIPProcessor,
    CLIPTokenizer,
)


def build_tiny_clip(directory, image_size=336, patch_size=14, hidden=32, seed=0):
    """Write a small random-weight CLIP checkpoint + processor to disk.

    Char-level vocabulary so any lowercase ASCII prompt tokenizes; text
    hidden size equals the projection dim so the qwen-style backend works.
    """
    directory.mkdir(parents=True, exist_ok=True)
    chars = "abcdefghijklmnopqrstuvwxyz0123456789 .,!?'-"
    vocab = {"<|startoftext|>": 0, "<|endoftext|>": 1}
    for c in chars:
        if c == " ":
            continue
        vocab.setdefault(c, len(vocab))
        vocab.setdefault(c + "</w>", len(vocab))
    (directory / "vocab.json").write_text(json.dumps(vocab))
    (directory / "merges.txt").write_text("#version: 0.2\n")
    tokenizer = CLIPTokenizer(str(directory / "vocab.json"), str(directory / "merges.txt"))

    config = CLIPConfig(
        projection_dim=hidden,
        text_config={
            "hidden_size": hidden,
            "intermediate_size": 2 * hidden,
            "num_hidden_layers": 2,
            "num_attention_heads": 2,
            "max_position_embeddings": 77,
            "vocab_size": len(tokenizer),
            "bos_token_id": 0,
            "eos_token_id": 1,
        },
        vision_config={
            "image_size": image_size,
            "patch_size": patch_size,
            "hidden_size": hidden,
            "intermediate_size": 2 * hidden,
            "num_hidden_layers": 2,
            "num_attention_heads": 2,
        },
    )
    torch.manual_seed(seed)
    model = CLIPModel(config).eval()
    processor = CLIPProcessor(
        image_processor=CLIPImageProcessor(
            size={"shortest_edge": image_size},
            crop_size={"height": image_size, "width": image_size},
        ),
        tokenizer=tokenizer,
    )
    model.save_pretrained(directory)
    processor.save_pretrained(directory)
    return directory


@pytest.fixture(scope="session")
def tiny_clip_336(tmp_path_factory):
    return build_tiny_clip(tmp_path_factory.mktemp("clip336"), image_size=336, patch_size=14)


@pytest.fixture(scope="session")
def tiny_clip_64(tmp_path_factory):
    return build_tiny_clip(tmp_path_factory.mktemp("clip64"), image_size=64, patch_size=16)


@pytest.fixture(scope="session")
def sample_image(tmp_path_factory):
    rng = np.random.RandomState(7)
    img = Image.fromarray((rng.rand(180, 240, 3) * 255).astype("uint8"))
    path = tmp_path_factory.mktemp("imgs") / "sample.png"
    img.save(path)
    return path
