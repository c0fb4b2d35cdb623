"""Command-line front end.

`meshmem daemon` runs a peer plus its HTTP control API on a local unix
socket; every other command is a thin client against that socket. All
stdout output is machine-parseable (JSON or newline-delimited wire
records); prose goes to stderr. Exit codes: 0 success, 1 domain error,
2 usage error.
"""

from __future__ import annotations

import json
import os
import socket
import sys

import click
import httpx

from .errors import ConfigError, MeshMemError
from .peer import MeshPeer, PeerConfig


def _fail(payload: dict, code: int = 1):
    click.echo(json.dumps(payload, separators=(",", ":")))
    sys.exit(code)


def _load_config(path: str) -> PeerConfig:
    try:
        return PeerConfig.from_file(path)
    except ConfigError as exc:
        _fail({"error": {"type": "ConfigError", "field": exc.field,
                         "detail": exc.reason}})


def _client(config: PeerConfig) -> httpx.Client:
    transport = httpx.HTTPTransport(uds=config.control_socket_path)
    return httpx.Client(transport=transport, base_url="http://meshmem", timeout=10.0)


def _request(config: PeerConfig, method: str, path: str, **kwargs) -> httpx.Response:
    try:
        with _client(config) as client:
            resp = client.request(method, path, **kwargs)
    except httpx.HTTPError as exc:
        _fail({"error": {"type": "DaemonUnreachable", "detail": str(exc)}})
    if resp.status_code >= 400:
        try:
            payload = resp.json()
        except ValueError:
            payload = {"error": {"type": "DaemonError", "detail": resp.text}}
        _fail(payload)
    return resp


config_option = click.option(
    "--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False),
    help="Peer config file (JSON).",
)


@click.group()
def main():
    """Mesh memory peer and tools."""


@main.command()
@config_option
def daemon(config_path: str):
    """Run the peer until interrupted, serving the control API."""
    import uvicorn

    from .service import create_app

    config = _load_config(config_path)
    sock_path = config.control_socket_path
    if os.path.exists(sock_path):
        probe = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        try:
            probe.connect(sock_path)
        except OSError:
            os.unlink(sock_path)  # stale socket from a dead daemon
        else:
            probe.close()
            _fail({"error": {"type": "DaemonAlreadyRunning",
                             "detail": sock_path}})
    try:
        peer = MeshPeer.start(config)
    except MeshMemError as exc:
        _fail({"error": {"type": type(exc).__name__, "detail": str(exc)}})
    click.echo(f"listening on {config.listen_address}, control {sock_path}",
               err=True)
    try:
        uvicorn.run(create_app(peer), uds=sock_path, log_level="warning")
    finally:
        peer.shutdown()


def _observe_options(fn):
    for name in ("perspective", "commitment", "motivation", "intent", "issue",
                 "focus"):
        fn = click.option(f"--{name}", required=True)(fn)
    fn = click.option("--mood", "mood_text", required=True)(fn)
    fn = click.option("--valence", type=float, required=True)(fn)
    fn = click.option("--arousal", type=float, required=True)(fn)
    fn = click.option("--body", "body_file", type=click.Path(exists=True),
                      default=None, help="JSON file with the optional body.")(fn)
    return fn


def _observe_payload(focus, issue, intent, motivation, commitment, perspective,
                     mood_text, valence, arousal, body_file, to=None) -> dict:
    payload = {
        "focus": focus, "issue": issue, "intent": intent,
        "motivation": motivation, "commitment": commitment,
        "perspective": perspective, "mood": mood_text,
        "valence": valence, "arousal": arousal,
    }
    if body_file:
        with open(body_file, "r", encoding="utf-8") as fh:
            payload["body"] = json.load(fh)
    if to:
        payload["to"] = list(to)
    return payload


@main.command()
@config_option
@_observe_options
def observe(config_path, focus, issue, intent, motivation, commitment,
            perspective, mood_text, valence, arousal, body_file):
    """Emit a self-observation and broadcast it to all peers."""
    config = _load_config(config_path)
    payload = _observe_payload(focus, issue, intent, motivation, commitment,
                               perspective, mood_text, valence, arousal, body_file)
    resp = _request(config, "POST", "/observe", json=payload)
    click.echo(resp.text.strip())


@main.command()
@config_option
@_observe_options
@click.option("--to", multiple=True, required=True,
              help="Peer id(s) to restrict delivery to.")
def send(config_path, focus, issue, intent, motivation, commitment,
         perspective, mood_text, valence, arousal, body_file, to):
    """Emit an observation delivered only to the named peers."""
    config = _load_config(config_path)
    payload = _observe_payload(focus, issue, intent, motivation, commitment,
                               perspective, mood_text, valence, arousal,
                               body_file, to=to)
    resp = _request(config, "POST", "/observe", json=payload)
    click.echo(resp.text.strip())


@main.command()
@config_option
@click.option("--limit", type=click.IntRange(min=1), default=10)
@click.option("--focus", default=None)
@click.option("--issue", default=None)
@click.option("--intent", default=None)
@click.option("--motivation", default=None)
@click.option("--commitment", default=None)
@click.option("--perspective", default=None)
@click.option("--mood", "mood_text", default=None)
def recall(config_path, limit, focus, issue, intent, motivation, commitment,
           perspective, mood_text):
    """Print stored entries as newline-delimited wire records."""
    config = _load_config(config_path)
    query = {k: v for k, v in {
        "focus": focus, "issue": issue, "intent": intent,
        "motivation": motivation, "commitment": commitment,
        "perspective": perspective, "mood": mood_text,
    }.items() if v}
    payload = {"limit": limit}
    if query:
        payload["query"] = query
    resp = _request(config, "POST", "/recall", json=payload)
    if resp.text:
        click.echo(resp.text.rstrip("\n"))


@main.command()
@config_option
@click.option("--key", required=True)
def fetch(config_path, key):
    """Print one stored entry by key."""
    config = _load_config(config_path)
    resp = _request(config, "GET", f"/fetch/{key}")
    click.echo(resp.text.rstrip("\n"))


@main.command()
@config_option
def peers(config_path):
    """Print the peer table."""
    config = _load_config(config_path)
    resp = _request(config, "GET", "/peers")
    click.echo(resp.text.strip())


@main.command()
@config_option
def status(config_path):
    """Print the node status report."""
    config = _load_config(config_path)
    resp = _request(config, "GET", "/status")
    click.echo(resp.text.strip())


if __name__ == "__main__":
    main()
