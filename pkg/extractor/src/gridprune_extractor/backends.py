"""Run a CLIP-architecture checkpoint and export token-field directories.

The engine's interchange format is produced through the engine's own
public API (``TokenField`` + ``save_field``), so what lands on disk is by
construction what ``load_field`` validates. Every written directory is
reloaded once as a self-check before the function returns.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from gridprune import TokenField, load_field, save_field

from .jobs import ExtractionJob, ImageDecodeFailure, ModelLoadFailure


def _load_model(model_id: str):
    from transformers import CLIPModel, CLIPProcessor

    try:
        # eager attention: attention weights must be materialized
        model = CLIPModel.from_pretrained(model_id, attn_implementation="eager")
        processor = CLIPProcessor.from_pretrained(model_id)
    except Exception as e:
        raise ModelLoadFailure(f"cannot load CLIP checkpoint {model_id!r}: {e}") from e
    model.eval()
    return model, processor


def _open_image(path: str):
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (OSError, UnidentifiedImageError) as e:
        raise ImageDecodeFailure(f"cannot decode image {path!r}: {e}") from e


def _text_tensors(model, processor, prompt: str, backend: str) -> np.ndarray:
    tokens = processor.tokenizer([prompt], return_tensors="pt", padding=True)
    ids = tokens["input_ids"]
    if backend == "qwen_lastlayer":
        # instruction vector: mean-pooled rows of the word-embedding table
        word_rows = model.text_model.embeddings.token_embedding(ids)[0]
        vec = word_rows.mean(dim=0)
        proj_dim = model.config.projection_dim
        if vec.shape[0] != proj_dim:
            raise ModelLoadFailure(
                f"qwen_lastlayer needs text hidden size ({vec.shape[0]}) equal to "
                f"the projection dim ({proj_dim}) so embeddings and instruction "
                "vector share a space"
            )
        return vec.numpy()
    text_out = model.text_model(
        input_ids=ids, attention_mask=tokens.get("attention_mask")
    )
    # pooler output is the [EOS]-position hidden state
    projected = model.text_projection(text_out.pooler_output)[0]
    return projected.numpy()


def extract_field(model, processor, image_path: str, prompt: str, backend: str,
                  model_id: str = "") -> TokenField:
    """Build the in-memory TokenField for one image (no I/O besides decode)."""
    image = _open_image(image_path)
    vision_cfg = model.config.vision_config
    grid = vision_cfg.image_size // vision_cfg.patch_size
    n = grid * grid

    with torch.no_grad():
        pixel = processor(images=image, return_tensors="pt")["pixel_values"]
        out = model.vision_model(pixel, output_hidden_states=True, output_attentions=True)
        penultimate = out.hidden_states[-2][0]  # (1 + N, hidden)
        if penultimate.shape[0] != n + 1:
            raise ModelLoadFailure(
                f"expected {n} patch tokens (+CLS) for a {grid}x{grid} grid, "
                f"got sequence length {penultimate.shape[0]}"
            )
        patches = penultimate[1:]
        projected = model.visual_projection(model.vision_model.post_layernorm(patches))

        if backend == "qwen_lastlayer":
            last = out.attentions[-1][0]  # (heads, S, S)
            received = last.mean(dim=0).mean(dim=0)[1:]  # per-key, CLS column dropped
            saliency = received.numpy()
        else:
            cls_attn = out.attentions[-2][0, :, 0, 1:]  # (heads, N), raw weights
            saliency = cls_attn.numpy()

        text_embedding = _text_tensors(model, processor, prompt, backend)

    n_layers = vision_cfg.num_hidden_layers
    meta = {
        "backend": backend,
        "model": model_id,
        "prompt": prompt,
        "embedding_layer": f"vision hidden_states[-2] (layer {n_layers - 1} of {n_layers}), post_layernorm + visual_projection",
        "saliency_layer": (
            f"vision attentions[-1] (layer {n_layers}), mean over heads and queries"
            if backend == "qwen_lastlayer"
            else f"vision attentions[-2] (layer {n_layers - 1}), CLS row per head"
        ),
        "text_source": (
            "word-embedding table, mean pooled over prompt tokens"
            if backend == "qwen_lastlayer"
            else "text encoder [EOS] pooled output, text_projection applied"
        ),
    }
    return TokenField(
        grid_h=grid,
        grid_w=grid,
        embeddings=projected.numpy(),
        saliency=saliency,
        text_embedding=text_embedding,
        meta=meta,
    )


def extract(job: ExtractionJob) -> list[Path]:
    """Run the job and return the written field directories.

    Alongside the manifest blobs, each directory gets
    ``hidden_states_preproj.bin`` with the raw pre-projection patch hidden
    states (row-major f32le, shape recorded in meta) for research use; the
    engine ignores it.
    """
    model, processor = _load_model(job.model)
    written = []
    for image_path in job.images:
        field = extract_field(model, processor, image_path, job.prompt, job.backend,
                              model_id=job.model)
        # re-derive the pre-projection states for the side-channel export
        image = _open_image(image_path)
        with torch.no_grad():
            pixel = processor(images=image, return_tensors="pt")["pixel_values"]
            out = model.vision_model(pixel, output_hidden_states=True)
            preproj = out.hidden_states[-2][0, 1:].numpy().astype("<f4")
        meta = dict(field.meta)
        meta["preproj_file"] = "hidden_states_preproj.bin"
        meta["preproj_shape"] = f"{preproj.shape[0]}x{preproj.shape[1]}"
        field = TokenField(
            grid_h=field.grid_h,
            grid_w=field.grid_w,
            embeddings=field.embeddings,
            saliency=field.saliency,
            text_embedding=field.text_embedding,
            meta=meta,
        )
        out_dir = job.output_dir_for(image_path)
        save_field(field, out_dir)
        (out_dir / "hidden_states_preproj.bin").write_bytes(preproj.tobytes())
        load_field(out_dir)  # self-check: emitted directory must validate
        written.append(out_dir)
    return written
