"""Shared fixtures: a tiny randomly initialized BERT that runs offline.

The tokenizer is built by hand (WordPiece over a small fixed vocabulary)
so no files need to be downloaded.  The vocabulary includes "good" and the
continuation piece "##s" so that "goods" tokenizes to two pieces, which the
multi-token label word test relies on.
"""

import pytest
import torch
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
from transformers import BertConfig, BertForMaskedLM, PreTrainedTokenizerFast

from promptextract.prompts import PromptSpec
from promptextract.runner import Example, FeatureExtractor

VOCAB_WORDS = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    ".", ",", "?", "!", "[", "]", ":",
    "in", "summary", "it", "was", "bad", "great", "good", "##s",
    "no", "yes", "maybe", "topic", "the", "a", "an", "movie", "film",
    "fun", "dull", "boring", "nice", "very", "really", "story", "plot",
    "sports", "politics", "business", "technology", "acting", "long",
]

HIDDEN = 32


@pytest.fixture(scope="session")
def hidden_dim():
    return HIDDEN


@pytest.fixture(scope="session")
def vocab():
    return {word: i for i, word in enumerate(VOCAB_WORDS)}


@pytest.fixture(scope="session")
def tokenizer(vocab):
    t = Tokenizer(models.WordPiece(vocab, unk_token="[UNK]"))
    t.normalizer = normalizers.Lowercase()
    t.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    t.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    return PreTrainedTokenizerFast(
        tokenizer_object=t,
        pad_token="[PAD]", unk_token="[UNK]", cls_token="[CLS]",
        sep_token="[SEP]", mask_token="[MASK]", model_max_length=64)


@pytest.fixture(scope="session")
def model(vocab):
    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=HIDDEN, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=64,
        max_position_embeddings=64, pad_token_id=vocab["[PAD]"])
    return BertForMaskedLM(config).eval()


@pytest.fixture
def extractor(model, tokenizer):
    return FeatureExtractor(model, tokenizer)


@pytest.fixture(scope="session")
def spec():
    return PromptSpec("{text} In summary, it was [MASK].",
                      ("bad", "great"), "sst2")


@pytest.fixture
def examples():
    texts = ["a really fun movie", "dull boring plot", "the acting was nice",
             "very long and dull", "a great story", "it was bad"]
    return [Example(id=f"ex{i}", label=i % 2, values={"text": t}, text=t)
            for i, t in enumerate(texts)]
