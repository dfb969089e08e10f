"""Builds the external-model fixture bundle used by the integration tests.

The bundle stands in for one exported by the Python fine-tuning tool: a tiny
mean-pooled embedding classifier in ONNX, a WordPiece tokenizer and metadata.
Expected outputs for 32 texts are computed here with numpy, independently of
any ONNX runtime.

    python3 make_bundle.py [OUT_DIR]
"""

import json
import pathlib
import sys

import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors

MAX_LENGTH = 24
INTENTS = ["action-triggering", "information-seeking"]
DIM = 8

WORDS = """
remind me to call mom please can you schedule a meeting tomorrow what time is it
why how where who when tell about the task promise i will do todo list ok sure
thanks hello hi yes no maybe lunch dinner plan question know wonder book send
""".split()

TEXTS = [
    "please remind me to call mom",
    "ok",
    "what time is it?",
    "hello [SEP] hi [SEP] can you schedule a meeting tomorrow",
    "i will do the task",
    "tell me about the plan",
    "thanks [SEP] sure",
    "why",
    "",
    "unknownword another unknown",
    "who is coming to dinner",
    "i wonder how it works",
    "add it to the todo list",
    "yes [SEP] no [SEP] maybe",
    "promise me you will book lunch",
    "where is the meeting",
    "send the list please",
    "hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello hello",
    "When",
    "REMIND ME",
    "a question about lunch",
    "do you know the time",
    "sure thanks [SEP] ok",
    "schedule dinner",
    "i will",
    "maybe tomorrow",
    "how about a plan",
    "hi [SEP] what",
    "the the the",
    "can you",
    "book it",
    "no thanks",
]


def build_tokenizer():
    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3, "?": 4}
    for w in WORDS:
        vocab.setdefault(w, len(vocab))
    tok = Tokenizer(models.WordPiece(vocab, unk_token="[UNK]"))
    tok.normalizer = normalizers.BertNormalizer(lowercase=True)
    tok.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    tok.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]", special_tokens=[("[CLS]", 2), ("[SEP]", 3)]
    )
    tok.add_special_tokens(["[PAD]", "[UNK]", "[CLS]", "[SEP]"])
    return tok, len(vocab)


def build_graph(vocab_size, rng):
    emb = rng.normal(0.0, 1.0, (vocab_size, DIM)).astype(np.float32)
    w = rng.normal(0.0, 1.0, (DIM, len(INTENTS))).astype(np.float32)
    b = rng.normal(0.0, 0.3, (len(INTENTS),)).astype(np.float32)

    nodes = [
        helper.make_node("Gather", ["emb", "input_ids"], ["tok"], axis=0),
        helper.make_node("Cast", ["attention_mask"], ["maskf"], to=TensorProto.FLOAT),
        helper.make_node("Unsqueeze", ["maskf", "axis2"], ["mask3"]),
        helper.make_node("Mul", ["tok", "mask3"], ["masked"]),
        helper.make_node("ReduceSum", ["masked", "axis1"], ["summed"], keepdims=0),
        helper.make_node("ReduceSum", ["maskf", "axis1"], ["count"], keepdims=1),
        helper.make_node("Div", ["summed", "count"], ["pooled"]),
        helper.make_node("Tanh", ["pooled"], ["hidden"]),
        helper.make_node("MatMul", ["hidden", "w"], ["proj"]),
        helper.make_node("Add", ["proj", "b"], ["logits"]),
    ]
    graph = helper.make_graph(
        nodes,
        "fixture-classifier",
        [
            helper.make_tensor_value_info("input_ids", TensorProto.INT64, [1, MAX_LENGTH]),
            helper.make_tensor_value_info("attention_mask", TensorProto.INT64, [1, MAX_LENGTH]),
        ],
        [helper.make_tensor_value_info("logits", TensorProto.FLOAT, [1, len(INTENTS)])],
        initializer=[
            numpy_helper.from_array(emb, "emb"),
            numpy_helper.from_array(w, "w"),
            numpy_helper.from_array(b, "b"),
            numpy_helper.from_array(np.array([1], dtype=np.int64), "axis1"),
            numpy_helper.from_array(np.array([2], dtype=np.int64), "axis2"),
        ],
    )
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 13)])
    model.ir_version = 8
    onnx.checker.check_model(model)
    return model, emb, w, b


def encode(tok, text):
    ids = tok.encode(text).ids[:MAX_LENGTH]
    mask = [1] * len(ids) + [0] * (MAX_LENGTH - len(ids))
    return ids + [0] * (MAX_LENGTH - len(ids)), mask


def reference_scores(tok, emb, w, b, text):
    ids, mask = encode(tok, text)
    m = np.array(mask, dtype=np.float64)[:, None]
    pooled = (emb.astype(np.float64)[ids] * m).sum(axis=0) / m.sum()
    logits = np.tanh(pooled) @ w.astype(np.float64) + b.astype(np.float64)
    return (1.0 / (1.0 + np.exp(-logits))).tolist()


def main():
    here = pathlib.Path(__file__).resolve().parent
    out = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else here / "bundle"
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240611)
    tok, vocab_size = build_tokenizer()
    model, emb, w, b = build_graph(vocab_size, rng)

    onnx.save(model, out / "model.onnx")
    tok.save(str(out / "tokenizer.json"))
    metadata = {
        "intents": INTENTS,
        "thresholds": [0.5, 0.5],
        "max_length": MAX_LENGTH,
        "pad_id": 0,
        "separator": "[SEP]",
        "trained_on": "fixture",
        "steps": 0,
    }
    (out / "metadata.json").write_text(json.dumps(metadata, indent=2) + "\n")
    expected = {
        "texts": TEXTS,
        "scores": [reference_scores(tok, emb, w, b, t) for t in TEXTS],
        "token_counts": [len(tok.encode(t, add_special_tokens=False).ids) for t in TEXTS],
    }
    assert len(TEXTS) == 32
    (out / "expected.json").write_text(json.dumps(expected, indent=1) + "\n")


if __name__ == "__main__":
    main()
