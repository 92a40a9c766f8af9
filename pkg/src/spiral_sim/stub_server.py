"""Scripted chat-completion server for offline tests of the LLM path.

Script format, one rule per line (``#`` starts a comment)::

    always: 8                       # default reply
    count: 3 => eleven              # reply to the 3rd request (1-based)
    regex: Character Profile => 9   # reply when the prompt matches

Count rules win over regex rules, regex rules are tried in file order, and
``always`` is the fallback. A request matching nothing gets an empty reply.
"""
from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path


class ScriptError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"script line {line}: {message}")


@dataclass
class StubScript:
    always: str | None = None
    by_count: dict[int, str] = field(default_factory=dict)
    by_regex: list[tuple[re.Pattern, str]] = field(default_factory=list)

    def reply(self, count: int, prompt: str) -> str:
        if count in self.by_count:
            return self.by_count[count]
        for pattern, text in self.by_regex:
            if pattern.search(prompt):
                return text
        return self.always if self.always is not None else ""


def parse_script(text: str) -> StubScript:
    script = StubScript()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        if not sep:
            raise ScriptError(lineno, f"expected 'kind: ...', got {raw!r}")
        key = key.strip().lower()
        rest = rest.strip()
        if key == "always":
            script.always = rest
            continue
        cond, arrow, reply = rest.partition("=>")
        if not arrow:
            raise ScriptError(lineno, "missing '=>' between condition and reply")
        cond, reply = cond.strip(), reply.strip()
        if key == "count":
            if not cond.isdigit() or int(cond) < 1:
                raise ScriptError(lineno, f"count must be a positive integer, got {cond!r}")
            script.by_count[int(cond)] = reply
        elif key == "regex":
            try:
                script.by_regex.append((re.compile(cond), reply))
            except re.error as exc:
                raise ScriptError(lineno, f"bad regex: {exc}") from None
        else:
            raise ScriptError(lineno, f"unknown rule kind {key!r}")
    return script


def load_script(path) -> StubScript:
    return parse_script(Path(path).read_text(encoding="utf-8"))


class StubServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, script: StubScript):
        self.script = script
        self.count = 0
        self.prompts: list[str] = []
        self._lock = threading.Lock()
        super().__init__(address, _Handler)

    def next_reply(self, prompt: str) -> str:
        with self._lock:
            self.count += 1
            self.prompts.append(prompt)
            return self.script.reply(self.count, prompt)

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length") or 0)
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
            prompt = "\n".join(m.get("content", "") for m in body.get("messages", []))
        except (json.JSONDecodeError, AttributeError):
            self._send(400, {"error": {"message": "invalid JSON body"}})
            return
        reply = self.server.next_reply(prompt)
        self._send(200, {
            "id": f"stub-{self.server.count}",
            "object": "chat.completion",
            "model": body.get("model", "stub"),
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": reply},
                "finish_reason": "stop",
            }],
        })

    def _send(self, status, payload):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def start_in_thread(script: StubScript, host: str = "127.0.0.1", port: int = 0) -> StubServer:
    server = StubServer((host, port), script)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server
