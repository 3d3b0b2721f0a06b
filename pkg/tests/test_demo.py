from copyfaith.demo import DemoBackend
from copyfaith.llmclient import LLMClient, cosine, user_request
from copyfaith.prefbuild import CandidateStatus
from copyfaith.promptgen import CandidateMethod, QueryContextPair, TemplateSet, generate_candidate

TEMPLATES = TemplateSet()


def client():
    return LLMClient(DemoBackend(), chat_model_id="demo")


def test_embeddings_reflect_shared_vocabulary():
    c = client()
    near = cosine(c.embed("the reactor output rose"), c.embed("reactor output rose sharply"))
    far = cosine(c.embed("the reactor output rose"), c.embed("violets bloom quietly downhill"))
    assert near > far


def test_unrouted_prompt_gets_parametric_reply():
    resp = client().chat(user_request("demo", "Why is the sky blue?"))
    assert "background knowledge" in resp.text


def test_empty_reply_yields_failed_candidate():
    from copyfaith.llmclient import MockBackend

    pair = QueryContextPair(id="d1", query="q?", context="some context here.")
    silent = LLMClient(MockBackend("   "), chat_model_id="demo")
    cand = generate_candidate(pair, CandidateMethod.BASE, silent, TEMPLATES)
    assert cand.status is CandidateStatus.GEN_FAILED
    assert cand.note == "empty-response"


def test_judge_rule_is_swap_consistent():
    from copyfaith.judge import JudgeDimension, Verdict, compare_pair

    context = "the reactor output rose to 42 megawatts during the second trial"
    faithful = "the reactor output rose to 42 megawatts"
    vague = "something happened somewhere"
    out = compare_pair(context, faithful, vague, JudgeDimension.TWIST, client(), TEMPLATES)
    assert out.verdict is Verdict.A
    out = compare_pair(context, vague, faithful, JudgeDimension.TWIST, client(), TEMPLATES)
    assert out.verdict is Verdict.B
