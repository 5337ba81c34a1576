"""
The same story over HTTP: serve, register, chat, inspect
========================================================

Boots the gateway as a real server process (mock backend, demo user and
calculator preregistered), then walks the wire interface with httpx:
health, chat, traces, service registration, and the admin views.
"""

import socket
import subprocess
import sys
import time

import httpx

# grab a free port so the demo never collides with a running gateway
with socket.socket() as probe:
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
base = f"http://127.0.0.1:{port}"

server = subprocess.Popen(
    [sys.executable, "-m", "promptgate.cli", "serve", "--demo", "--port", str(port)],
    stdout=subprocess.PIPE,
    stderr=subprocess.DEVNULL,
    text=True,
)
try:
    # serve --demo prints the generated auth key before the server comes up
    line = server.stdout.readline()
    auth_key = line.strip().split(": ", 1)[1]

    for _ in range(100):
        try:
            if httpx.get(f"{base}/healthz").status_code == 200:
                break
        except httpx.TransportError:
            time.sleep(0.1)
    print("health:", httpx.get(f"{base}/healthz").json())

    body = {"auth_key": auth_key, "session_id": "wire", "prompt": "Would you add 10 and 45?"}
    chat = httpx.post(f"{base}/v1/chat", json=body).json()
    print("\nchat:", chat["status"], "->", chat["answer"])

    # every response resolves to a trace
    events = httpx.get(f"{base}/v1/traces/{chat['request_id']}").json()["events"]
    print("trace:", " -> ".join(e["event"] for e in events))

    # register a second service over the wire, then list what is routable
    descriptor = {
        "name": "notes",
        "description": "Stores short notes.",
        "utterances": ["note down {text}", "remember {text}"],
        "procedures": [
            {
                "name": "save",
                "parameters": [{"name": "text", "type": "string"}],
                "description": "Save a note.",
            }
        ],
        "endpoint": "http://127.0.0.1:9/invoke",
    }
    created = httpx.post(f"{base}/v1/services", json=descriptor)
    print("\nregister notes:", created.status_code)
    listed = httpx.get(f"{base}/v1/services").json()["services"]
    print("services:", [s["name"] for s in listed])

    # read-only admin views
    print("\nscheduler:", httpx.get(f"{base}/v1/admin/scheduler").json()["sticky_sessions"])
    print("cache:", httpx.get(f"{base}/v1/admin/cache").json()["prompt_cache"])
    print("drift:", httpx.get(f"{base}/v1/admin/drift").json()["reference_count"], "references")
finally:
    server.terminate()
    server.wait(timeout=10)
