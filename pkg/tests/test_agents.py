import pytest
from hypothesis import given, strategies as st

from conftest import GOLDEN
from spiral_sim.agents import (
    AgentContext, AuthError, ChatClient, MissingHistory, MissingPersona, NoRatingFound,
    ParseError, SyntheticBackend, TransportError, llm_rate, parse_rating, persona_offset,
    render_prompt, synthetic_rate,
)
from spiral_sim.agents.synthetic import persona_base
from spiral_sim.model import (
    LlmBackendConfig, MovieItem, Persona, RatingScale, ScenarioConfig, SyntheticPolicy,
)
from spiral_sim.stub_server import ScriptError, parse_script, start_in_thread

MOVIE = MovieItem("norma", "Norma", ("Drama", "Thriller"), "A singer returns home.", "2025-02-14")
PERSONA = Persona("p1", "A computer enthusiast who is interested in optimizing the performance of their system.")
M10 = RatingScale(10)


def ctx(persona=None, display=None, avg=None, n=0, seed=1):
    return AgentContext(MOVIE, persona, display, M10, seed, avg, n)


def golden(name, persona=None, history=None):
    text = (GOLDEN / f"prompt_{name}.txt").read_text(encoding="utf-8")
    text = text.replace("[Movie Title]", MOVIE.title).replace("[Genres]", ", ".join(MOVIE.genres))
    text = text.replace("[Movie Overview]", MOVIE.overview)
    if persona is not None:
        text = text.replace("[persona]", persona.description)
    if history is not None:
        text = text.replace("[Historical Average]", history)
    return text


@pytest.mark.parametrize("scenario, persona, history", [
    ("I", PERSONA, "7.3"),
    ("II", None, "7.3"),
    ("III", PERSONA, None),
    ("IV", None, None),
])
def test_prompt_matches_template(scenario, persona, history):
    from spiral_sim.model import SCENARIOS
    use_h, use_p = SCENARIOS[scenario]
    cfg = ScenarioConfig(use_history=use_h, use_persona=use_p)
    text = render_prompt(ctx(persona, history, 7.3 if history else None, 5 if history else 0), cfg)
    assert text == golden(scenario, persona, history)


def test_prompt_sections():
    cfg = ScenarioConfig(use_history=True, use_persona=True)
    text = render_prompt(ctx(PERSONA, "7.3", 7.3, 3), cfg)
    assert "# Your Character Profile" in text
    assert "Movie average rating: 7.3 (1-10)" in text
    assert "Genres: Drama, Thriller" in text
    assert text.index("# Your Character Profile") < text.index("# Movie Information") < text.index("# Rating Principle")
    assert text.endswith("Provide only a single integer (1-10) without extra text.")


def test_prompt_mismatch_errors():
    with pytest.raises(MissingPersona):
        render_prompt(ctx(), ScenarioConfig(use_history=False, use_persona=True))
    with pytest.raises(MissingHistory):
        render_prompt(ctx(n=3), ScenarioConfig(use_history=True, use_persona=False))


def test_first_rater_without_history_sees_no_average():
    text = render_prompt(ctx(), ScenarioConfig(use_history=True, use_persona=False))
    assert "Movie average rating" not in text


# -- synthetic ---------------------------------------------------------------

def test_positivity_prior_constant():
    pol = SyntheticPolicy("POSITIVITY_PRIOR", base_rating=8)
    for seed in range(20):
        assert synthetic_rate(pol, ctx(PERSONA, seed=seed)) == 8


def test_conformist_pure_anchoring():
    pol = SyntheticPolicy("CONFORMIST", conformity_weight=1.0)
    assert synthetic_rate(pol, ctx(display="3.4", avg=3.4, n=4)) == 3
    assert synthetic_rate(pol, ctx(display="3.5", avg=3.5, n=4)) == 4


def test_conformist_mixing_hand_evaluated():
    # persona_base 9 (no persona, base 9), history 3, lambda 0.5 -> 6.0
    pol = SyntheticPolicy("CONFORMIST", base_rating=9, conformity_weight=0.5)
    assert synthetic_rate(pol, ctx(display="3.0", avg=3.0, n=2)) == 6


def test_conformist_needs_history():
    with pytest.raises(MissingHistory):
        synthetic_rate(SyntheticPolicy("CONFORMIST", conformity_weight=0.5), ctx())


def test_persona_base_spread():
    pol = SyntheticPolicy("PERSONA_PRIOR", base_rating=5.5, persona_hash_spread=4)
    assert persona_base(pol, ctx(PERSONA)) == 5.5 + 4 * persona_offset("p1")
    assert persona_offset("p1") == persona_offset("p1")
    offsets = [persona_offset(f"p{i}") for i in range(500)]
    assert all(-1 <= u <= 1 for u in offsets)
    assert min(offsets) < -0.9 and max(offsets) > 0.9


def test_persona_offset_pinned():
    # frozen regression values: a change here breaks comparability of stored runs
    assert persona_offset("p1") == 0.13911682031429318
    assert persona_offset("agent") == -0.503643821572177


@given(st.floats(1, 10), st.integers(0, 2**64 - 1))
def test_anchoring_limit(h, seed):
    pol = SyntheticPolicy("CONFORMIST", conformity_weight=1.0)
    import math
    assert synthetic_rate(pol, ctx(display=f"{h:.1f}", avg=h, n=1, seed=seed)) == min(10, max(1, math.floor(h + 0.5)))


@given(st.integers(0, 2**64 - 1), st.floats(0, 5))
def test_synthetic_pure_and_on_scale(seed, sd):
    pol = SyntheticPolicy("PERSONA_PRIOR", base_rating=5.5, noise_sd=sd, persona_hash_spread=4)
    c = ctx(PERSONA, seed=seed)
    r = synthetic_rate(pol, c)
    assert r == synthetic_rate(pol, c)
    assert 1 <= r <= 10


def test_backend_samples_use_given_seeds():
    pol = SyntheticPolicy("PERSONA_PRIOR", noise_sd=2.0)
    b = SyntheticBackend(pol)
    assert b.rate(ctx(), None, [1, 2, 3]) == b.rate(ctx(), None, [1, 2, 3])
    assert len(b.rate(ctx(), None, [1, 2, 3, 4])) == 4


# -- parsing -----------------------------------------------------------------

@pytest.mark.parametrize("text, value", [
    ("7", 7), ("10", 10), (" 10\n", 10), ("Rating: 9. A masterpiece.", 9),
    ("I'd say 7/10", 7), ("**8**", 8), ("My rating is 6 out of 10.", 6),
    ("0, no wait, 4", 4), ("11? no: 3", 3), ("Score: 7.5", 7),
])
def test_parse_rating(text, value):
    assert parse_rating(text, M10) == value


@pytest.mark.parametrize("text", ["eleven", "", "0", "11", "100"])
def test_parse_rating_none(text):
    with pytest.raises(NoRatingFound):
        parse_rating(text, M10)


@given(st.text())
def test_parse_rating_stays_on_scale(text):
    try:
        assert 1 <= parse_rating(text, M10) <= 10
    except NoRatingFound:
        pass


# -- remote backend against the stub ------------------------------------------

@pytest.fixture
def stub():
    servers = []

    def start(script_text):
        srv = start_in_thread(parse_script(script_text))
        servers.append(srv)
        return srv

    yield start
    for s in servers:
        s.shutdown()
        s.server_close()


def llm_cfg(url, **kw):
    return LlmBackendConfig(endpoint_url=url, timeout_ms=5000, **kw)


def test_llm_constant_stub(stub):
    srv = stub("always: 8")
    assert llm_rate(llm_cfg(srv.url), "prompt", 3, seed=1) == [8, 8, 8]
    assert srv.count == 3


def test_llm_lenient_parse(stub):
    srv = stub("always: I'd say 7/10")
    assert llm_rate(llm_cfg(srv.url), "prompt", 2, seed=1) == [7, 7]


def test_llm_parse_error_after_retries(stub):
    srv = stub("always: eleven")
    with pytest.raises(ParseError):
        llm_rate(llm_cfg(srv.url, max_retries=2), "prompt", 1, seed=1)
    assert srv.count == 3


def test_llm_reask_recovers(stub):
    srv = stub("count: 1 => eleven\nalways: 6")
    assert llm_rate(llm_cfg(srv.url), "p", 2, seed=1) == [6, 6]
    assert srv.count == 3


def test_llm_transport_error():
    cfg = llm_cfg("http://127.0.0.1:9/v1/chat/completions", max_retries=1)
    with pytest.raises(TransportError):
        llm_rate(cfg, "p", 1, seed=1)


def test_llm_request_shape_and_auth(monkeypatch):
    import json
    import threading
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
    seen = {}

    class H(BaseHTTPRequestHandler):
        def log_message(self, *a):
            pass

        def do_POST(self):
            seen["body"] = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            seen["auth"] = self.headers.get("Authorization")
            status = 401 if seen["auth"] == "Bearer bad" else 200
            data = json.dumps({"choices": [{"message": {"content": "5"}}]}).encode()
            self.send_response(status)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    srv = ThreadingHTTPServer(("127.0.0.1", 0), H)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    url = f"http://127.0.0.1:{srv.server_address[1]}/v1/chat/completions"
    try:
        monkeypatch.setenv("SPIRAL_TEST_TOKEN", "tok")
        cfg = llm_cfg(url, auth_token_env_var="SPIRAL_TEST_TOKEN", model_name="m-x")
        assert llm_rate(cfg, "hello", 1, seed=3) == [5]
        assert seen["body"] == {"model": "m-x", "messages": [{"role": "user", "content": "hello"}],
                                "temperature": 0.1}
        assert seen["auth"] == "Bearer tok"
        monkeypatch.setenv("SPIRAL_TEST_TOKEN", "bad")
        with pytest.raises(AuthError):
            llm_rate(cfg, "hello", 1, seed=3)
    finally:
        srv.shutdown()
        srv.server_close()


def test_audit_log(stub, tmp_path):
    import json
    from spiral_sim.agents.llm import AuditLog
    srv = stub("always: 9")
    client = ChatClient(llm_cfg(srv.url), AuditLog(tmp_path / "audit.jsonl"))
    try:
        llm_rate(client.cfg, "abc", 2, seed=7, client=client)
    finally:
        client.close()
    lines = [json.loads(l) for l in (tmp_path / "audit.jsonl").read_text().splitlines()]
    assert len(lines) == 2
    assert lines[0]["request"]["messages"][0]["content"] == "abc"
    assert lines[0]["response"]["choices"][0]["message"]["content"] == "9"


# -- stub script ---------------------------------------------------------------

def test_stub_routing(stub):
    srv = stub("always: 4\nregex: Character Profile => 9")
    cfg = llm_cfg(srv.url)
    assert llm_rate(cfg, "# Your Character Profile\nYou are x", 1, seed=1) == [9]
    assert llm_rate(cfg, "# Movie Information", 1, seed=1) == [4]


@pytest.mark.parametrize("text, line", [
    ("always: 8\nbogus line", 2),
    ("always: 8\n\nregex: ( => 3", 3),
    ("count: zero => 3", 1),
    ("regex: x 3", 1),
])
def test_stub_malformed_script(text, line):
    with pytest.raises(ScriptError) as exc:
        parse_script(text)
    assert exc.value.line == line
