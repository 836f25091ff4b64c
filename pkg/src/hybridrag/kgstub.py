"""Stand-alone mock knowledge-graph API server for local runs.

Serves the default endpoint registry with small canned datasets over the
mock-API wire protocol (POST /<function_name>, body {"args": [...]}).
Intended as a test fixture: `python -m hybridrag.kgstub --port 8920`.
"""

from __future__ import annotations

import argparse
import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

_MEMBERS = {
    "eagles": ["Don Henley", "Joe Walsh", "Timothy B. Schmit", "Vince Gill"],
    "the beatles": ["John Lennon", "Paul McCartney", "George Harrison", "Ringo Starr"],
}
_BIRTH_DATES = {
    "don henley": "1947-07-22",
    "adele": "1988-05-05",
}
_MARKET_CAPS = {"hri": 1.6e9, "imppp": 2.4e8, "acme": 5.1e10}
_STOCK_PRICES = {"hri": 52.75, "imppp": 4.1, "acme": 142.5}
_LAST_MATCHES = {
    "lakers": {"opponent": "celtics", "result": "W 115-112 (OT)"},
    "celtics": {"opponent": "lakers", "result": "L 112-115 (OT)"},
}


def _lookup(table, key):
    value = table.get(key.lower().strip())
    if value is None:
        return {"error": "not found"}
    return {"result": value}


HANDLERS = {
    "music_get_members": lambda args: _lookup(_MEMBERS, args[0]),
    "music_get_artist_birth_date": lambda args: _lookup(_BIRTH_DATES, args[0]),
    "finance_get_market_capitalization": lambda args: _lookup(_MARKET_CAPS, args[0]),
    "finance_get_stock_price": lambda args: _lookup(_STOCK_PRICES, args[0]),
    "sports_get_team_last_match": lambda args: _lookup(_LAST_MATCHES, args[0]),
}


class StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        name = self.path.strip("/")
        handler = HANDLERS.get(name)
        if handler is None:
            self.send_response(404)
            self.end_headers()
            self.wfile.write(b'{"error": "unknown function"}')
            return
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
            args = body.get("args", [])
            payload = handler(args)
        except Exception as exc:
            self.send_response(400)
            self.end_headers()
            self.wfile.write(json.dumps({"error": str(exc)}).encode())
            return
        encoded = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(encoded)))
        self.end_headers()
        self.wfile.write(encoded)

    def log_message(self, *args):
        pass


def serve(port: int = 8920) -> ThreadingHTTPServer:
    return ThreadingHTTPServer(("127.0.0.1", port), StubHandler)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--port", type=int, default=8920)
    args = parser.parse_args(argv)
    server = serve(args.port)
    print(f"mock KG API on http://127.0.0.1:{args.port} "
          f"({len(HANDLERS)} endpoints)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
