import json

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "add", "sum", "list", "count", "string", "graph", "node", "edge",
    "flow", "hull", "convex", "the", "a", "function", "write",
    "##s", "##ing", "##ed",
]


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    """A locally constructed encoder so tests never touch the network."""
    d = tmp_path_factory.mktemp("tiny-encoder")
    vocab_file = d / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB))
    tokenizer = BertTokenizerFast(str(vocab_file), model_max_length=64)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.save_pretrained(d)
    tokenizer.save_pretrained(d)
    return str(d)


def write_problems(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for pid, prompt in rows:
            fh.write(json.dumps({"problem_id": pid, "source": "Other", "prompt": prompt}) + "\n")
