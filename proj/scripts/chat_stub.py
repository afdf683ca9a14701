#!/usr/bin/env python3
"""OpenAI-compatible chat-completions stub backed by the mock rule script.

Serves POST /v1/chat/completions: first rule whose match_all substrings all
occur in the newline-joined message contents wins; logprob_per_token rules
emit token logprobs whose texts concatenate exactly to the content.
"""

import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

RULES = json.load(open(sys.argv[1]))["rules"]
PORT = int(sys.argv[2])


def chunk_text(text):
    out, i = [], 0
    while i < len(text):
        start = i
        while i < len(text) and text[i].isspace():
            i += 1
        while i < len(text) and not text[i].isspace():
            i += 1
        out.append(text[start:i])
    return out


class Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        if self.path != "/v1/chat/completions":
            self.send_error(404)
            return
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        haystack = "".join(m["content"] + "\n" for m in body["messages"])

        hit = None
        for rule in RULES:
            if all(needle in haystack for needle in rule.get("match_all", [])):
                hit = rule
                break
        if hit is None:
            self.send_error(500, "no rule matched")
            return

        text = hit.get("text", "")
        choice = {"message": {"role": "assistant", "content": text}}
        if "logprob_per_token" in hit:
            lp = hit["logprob_per_token"]
            choice["logprobs"] = {
                "content": [{"token": c, "logprob": lp} for c in chunk_text(text)]
            }
        payload = json.dumps({"choices": [choice]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


ThreadingHTTPServer(("127.0.0.1", PORT), Handler).serve_forever()
