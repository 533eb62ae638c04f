import json
import random

import httpx
import pytest

from kphomog.corpus import Corpus, Document, Provenance
from kphomog.errors import EmptyOriginal, MalformedResponse, NoReferences, RateLimited, TransportError
from kphomog.prmu import PrmuClass
from kphomog.reformulation import (
    DELIMITER,
    ChatClient,
    ClientConfig,
    Method,
    PromptSet,
    ReformulationRecord,
    ResponseCache,
    TokenBucket,
    diversity,
    filter_pipeline,
    generate,
    generate_many,
    load_records,
    qc_keyphrase_preservation,
    qc_word_count,
    save_records,
    split_response,
)

DOC = Document(
    "inspec-1",
    "Graph kernels for speech recognition",
    "We propose graph kernels that improve speech recognition on noisy data.",
    ("graph kernels", "speech recognition", "noisy data", "acoustic model"),
)


def document_block(prompt: str) -> str:
    return prompt.rsplit("\n\n", 1)[1]


def echo_handler(calls):
    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        calls.append(body)
        return httpx.Response(200, json={"choices": [{"message": {"content": document_block(body["messages"][0]["content"])}}]})
    return handler


def make_client(handler, **cfg):
    cfg.setdefault("backoff", 0.0)
    return ChatClient(ClientConfig(endpoint="http://mock/v1", **cfg),
                      transport=httpx.MockTransport(handler), sleep=lambda s: None)


# ------------------------------------------------------------ generation


def test_split_response():
    assert split_response(f"A  title\n{DELIMITER}\nThe body.\n") == ("A title", "The body.")
    with pytest.raises(MalformedResponse):
        split_response("no delimiter here")
    with pytest.raises(MalformedResponse):
        split_response(f"title mentions {DELIMITER} inline only")


def test_paraphrase_passthrough():
    calls = []
    rec = generate(DOC, Method.PARAPHRASE, make_client(echo_handler(calls)))
    assert rec.reformulated_text == DOC.text
    assert rec.method is Method.PARAPHRASE and rec.intermediate_text is None
    assert len(calls) == 1
    assert calls[0]["model"] == "gpt-4o"
    assert DELIMITER in calls[0]["messages"][0]["content"]
    assert rec.model_label == "gpt-4o;temperature=default"


def test_backtranslation_two_hops():
    calls = []
    rec = generate(DOC, Method.BACKTRANSLATION, make_client(echo_handler(calls)))
    assert len(calls) == 2
    assert "English to Spanish" in calls[0]["messages"][0]["content"]
    assert "Spanish to English" in calls[1]["messages"][0]["content"]
    assert rec.intermediate_text == f"{DOC.title}\n{DELIMITER}\n{DOC.body}"
    assert rec.reformulated_text == DOC.text


def test_dropped_delimiter():
    def handler(request):
        return httpx.Response(200, json={"choices": [{"message": {"content": "Just some text"}}]})
    with pytest.raises(MalformedResponse):
        generate(DOC, Method.PARAPHRASE, make_client(handler))
    with pytest.raises(MalformedResponse):
        generate(DOC, Method.BACKTRANSLATION, make_client(handler))


def test_non_completion_payload():
    def handler(request):
        return httpx.Response(200, json={"unexpected": True})
    with pytest.raises(MalformedResponse):
        generate(DOC, Method.PARAPHRASE, make_client(handler))


def test_cache_serves_without_network(tmp_path):
    calls = []
    cache = ResponseCache(tmp_path / "cache")
    first = generate(DOC, Method.BACKTRANSLATION, make_client(echo_handler(calls)), cache=cache)
    assert len(calls) == 2
    assert len(list((tmp_path / "cache").iterdir())) == 1

    def refuse(request):
        raise AssertionError("network used despite cache")
    again = generate(DOC, Method.BACKTRANSLATION, make_client(refuse), cache=cache)
    assert again == first
    offline = generate(DOC, Method.BACKTRANSLATION, None, cache=cache, model_label=first.model_label)
    assert offline == first


def test_cache_key_tracks_prompts_and_text(tmp_path):
    cache = ResponseCache(tmp_path)
    calls = []
    client = make_client(echo_handler(calls))
    generate(DOC, Method.PARAPHRASE, client, cache=cache)
    changed = Document(DOC.id, DOC.title, DOC.body + " Extra sentence.", DOC.references)
    generate(changed, Method.PARAPHRASE, client, cache=cache)
    base = PromptSet.load()
    custom = PromptSet("Say it differently.\n\n$text", base.to_pivot, base.from_pivot)
    generate(DOC, Method.PARAPHRASE, client, prompts=custom, cache=cache)
    assert len(calls) == 3
    assert len(list(tmp_path.iterdir())) == 3


def test_retry_then_success():
    attempts = []

    def handler(request):
        attempts.append(1)
        if len(attempts) == 1:
            raise httpx.ConnectError("refused")
        if len(attempts) == 2:
            return httpx.Response(503)
        return echo_handler([])(request)
    sleeps = []
    client = ChatClient(ClientConfig(endpoint="http://mock", backoff=0.5),
                        transport=httpx.MockTransport(handler), sleep=sleeps.append)
    rec = generate(DOC, Method.PARAPHRASE, client)
    assert rec.reformulated_text == DOC.text
    assert sleeps == [0.5, 1.0]


def test_transport_error_after_max_attempts():
    def handler(request):
        raise httpx.ConnectError("refused")
    client = make_client(handler, max_attempts=3)
    with pytest.raises(TransportError):
        generate(DOC, Method.PARAPHRASE, client)
    assert client.calls == 3


def test_rate_limited_honours_retry_after():
    sleeps = []

    def handler(request):
        return httpx.Response(429, headers={"Retry-After": "2"})
    client = ChatClient(ClientConfig(endpoint="http://mock", max_attempts=3),
                        transport=httpx.MockTransport(handler), sleep=sleeps.append)
    with pytest.raises(RateLimited):
        generate(DOC, Method.PARAPHRASE, client)
    assert sleeps == [2.0, 2.0]


def test_client_error_not_retried():
    def handler(request):
        return httpx.Response(401)
    client = make_client(handler)
    with pytest.raises(TransportError):
        client.complete([{"role": "user", "content": "hi"}])
    assert client.calls == 1


def test_api_key_from_environment(monkeypatch):
    seen = []
    monkeypatch.setenv("MY_KEY", "sk-test")

    def handler(request):
        seen.append(request.headers.get("authorization"))
        return echo_handler([])(request)
    generate(DOC, Method.PARAPHRASE, make_client(handler, api_key_env="MY_KEY"))
    assert seen == ["Bearer sk-test"]


def test_endpoint_url_forms():
    assert ClientConfig("http://x/v1").url == "http://x/v1/chat/completions"
    assert ClientConfig("http://x/v1/chat/completions/").url == "http://x/v1/chat/completions"


def test_token_bucket_spacing():
    now = [0.0]

    def sleep(s):
        now[0] += s
    bucket = TokenBucket(2.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(6):
        bucket.acquire()
    # burst of 2, then one token every 0.5 s
    assert now[0] == pytest.approx(2.0)


def test_generate_many_keeps_order_and_reports_failures(tmp_path):
    docs = [Document(f"d{i}", f"Title {i}", f"Body text {i}.", ("body",)) for i in range(12)]

    def handler(request):
        content = json.loads(request.content)["messages"][0]["content"]
        if "Title 3" in content:
            return httpx.Response(200, json={"choices": [{"message": {"content": "broken"}}]})
        return echo_handler([])(request)
    records, failures = generate_many(docs, Method.PARAPHRASE, make_client(handler),
                                      cache=ResponseCache(tmp_path), max_workers=4)
    assert [r.original for r in records] == [f"d{i}" for i in range(12) if i != 3]
    assert [f.doc_id for f in failures] == ["d3"]
    assert failures[0].error.startswith("MalformedResponse")


def test_records_round_trip(tmp_path):
    recs = [ReformulationRecord("a", "T\nB", Method.PARAPHRASE, None, "m"),
            ReformulationRecord("b", "T\nB", Method.BACKTRANSLATION, "T\nES\nB", "m")]
    save_records(recs, tmp_path / "r.jsonl")
    assert load_records(tmp_path / "r.jsonl") == recs


# ------------------------------------------------------------------- QC


def test_preservation_verbatim_passes():
    ok, table = qc_keyphrase_preservation(DOC, DOC.text)
    assert ok
    assert {c.keyphrase: c.original_class for c in table}["acoustic model"] is PrmuClass.UNSEEN


def test_preservation_reordered_allowed():
    text = "Kernels on graphs for speech recognition\nRecognition of speech with noisy data."
    ok, table = qc_keyphrase_preservation(DOC, text)
    assert {c.keyphrase: c.reformulated_class for c in table}["graph kernels"] is PrmuClass.REORDERED
    assert ok


def test_preservation_mixed_fails():
    text = "Kernels for speech recognition\nThey improve speech recognition on noisy data."
    ok, table = qc_keyphrase_preservation(DOC, text)
    assert {c.keyphrase: c.reformulated_class for c in table}["graph kernels"] is PrmuClass.MIXED
    assert not ok


def test_preservation_ignores_absent_references():
    # "acoustic model" is absent from the original, so losing it is irrelevant
    ok, _ = qc_keyphrase_preservation(DOC, DOC.text.replace("acoustic", ""))
    assert ok


def test_preservation_requires_references():
    with pytest.raises(NoReferences):
        qc_keyphrase_preservation(Document("x", "t", "b"), "t b")


def words(n):
    return " ".join(f"w{i}" for i in range(n))


@pytest.mark.parametrize("n, ok, ratio", [
    (100, True, 1.0), (89, False, 0.89), (90, True, 0.9), (110, True, 1.1), (111, False, 1.11),
])
def test_word_count_window(n, ok, ratio):
    original = Document("x", "", words(100), ("w1",))
    assert qc_word_count(original, words(n)) == (ok, ratio)


def test_word_count_empty_original():
    with pytest.raises(EmptyOriginal):
        qc_word_count(Document("x", " ", " "), "a")


def test_diversity():
    assert diversity(DOC, DOC.text) == (0.0, 1.0)
    w, r = diversity(DOC, "Completely unrelated prose about planets\nand galaxies far away indeed.")
    assert r == 0.0 and w >= 0.9


# ------------------------------------------------------------- pipeline


def test_pipeline_accept_and_reject():
    corpus = Corpus([DOC])
    good = ReformulationRecord(DOC.id, DOC.text, Method.PARAPHRASE)
    short = ReformulationRecord(DOC.id, "Graph kernels for speech recognition\nnoisy data.",
                                Method.BACKTRANSLATION, "intermedio")
    result = filter_pipeline([good, short], corpus)
    assert [r.accepted for r in result.reports] == [True, False]
    assert not result.reports[1].length_ok
    assert len(result.pairs) == 1
    pair = result.pairs[0]
    assert pair.provenance is Provenance.REFORMULATION_PARAPHRASE
    assert (pair.doc_a, pair.doc_b) == (DOC.id, "inspec-1#paraphrase")
    new = result.documents[0]
    assert new.references == DOC.references
    assert new.meta["reformulation_of"] == DOC.id
    assert (new.title, new.body) == (DOC.title, DOC.body)
    assert len(corpus) == 1


def test_pipeline_reports_unknown_and_duplicates():
    corpus = Corpus([DOC])
    recs = [ReformulationRecord("ghost", "x", Method.PARAPHRASE),
            ReformulationRecord(DOC.id, DOC.text, Method.PARAPHRASE),
            ReformulationRecord(DOC.id, DOC.text, Method.PARAPHRASE)]
    result = filter_pipeline(recs, corpus)
    assert len(result.reports) == 3
    assert result.reports[0].error and result.reports[2].error
    assert len(result.pairs) == 1


def test_identity_always_accepted():
    rng = random.Random(2)
    vocab = "graph kernel speech signal robot matrix vector cluster".split()
    for i in range(50):
        body = " ".join(rng.choice(vocab) for _ in range(rng.randint(5, 40)))
        refs = tuple({" ".join(rng.sample(vocab, 2)) for _ in range(3)})
        doc = Document(f"d{i}", "A title", body, refs)
        rep = filter_pipeline([ReformulationRecord(doc.id, doc.text, Method.PARAPHRASE)], Corpus([doc])).reports[0]
        if rep.error:  # all references normalized away cannot happen here
            pytest.fail(rep.error)
        assert rep.accepted and rep.wer == 0.0 and rep.rouge1 == 1.0


def test_window_monotonicity():
    original = Document("x", "", words(100), ("w1",))
    corpus = Corpus([original])
    for n in range(70, 131):
        rec = ReformulationRecord("x", words(n), Method.PARAPHRASE)
        accepted = [filter_pipeline([rec], corpus, w).reports[0].accepted for w in (0.05, 0.1, 0.2, 0.3)]
        assert accepted == sorted(accepted)


def test_local_http_endpoint(tmp_path):
    """Exercise the client over real HTTP against a local stand-in server."""
    import threading
    from http.server import BaseHTTPRequestHandler, HTTPServer

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            out = json.dumps({"choices": [{"message": {"content": document_block(body["messages"][0]["content"])}}]}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)

        def log_message(self, *args):
            pass

    server = HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        client = ChatClient(ClientConfig(endpoint=f"http://127.0.0.1:{server.server_port}/v1"))
        rec = generate(DOC, Method.BACKTRANSLATION, client, cache=ResponseCache(tmp_path))
        assert rec.reformulated_text == DOC.text
    finally:
        server.shutdown()
