import pytest

_acceptance_results: dict[str, bool] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): names the acceptance criterion a test realizes"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        marker = item.get_closest_marker("acceptance")
        if marker:
            _acceptance_results[marker.args[0]] = report.passed


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, passed in _acceptance_results.items():
        terminalreporter.write_line(f"  {'PASS' if passed else 'FAIL'}  {name}")


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """Small randomly initialized causal LM with a word-level tokenizer."""
    import torch
    from tokenizers import Tokenizer, models, pre_tokenizers
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    words = [
        "<unk>", "<eos>",
        "context", "question", "answer", "based", "on", "the", "let", "s",
        "think", "step", "by", "and", "in", "detail", ":", "?", ".", ",", "\n",
        "paris", "is", "capital", "of", "france", "rome", "city", "what",
        "seine", "flows", "through", "river", "large", "old", "famous",
    ]
    vocab = {w: i for i, w in enumerate(words)}
    tok = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="<unk>", eos_token="<eos>", pad_token="<eos>"
    )

    torch.manual_seed(1234)
    config = GPT2Config(
        vocab_size=len(vocab),
        n_positions=128,
        n_embd=16,
        n_layer=2,
        n_head=2,
        eos_token_id=vocab["<eos>"],
        bos_token_id=vocab["<eos>"],
    )
    model = GPT2LMHeadModel(config)

    path = tmp_path_factory.mktemp("tinymodel")
    model.save_pretrained(path)
    fast.save_pretrained(path)
    return str(path)
