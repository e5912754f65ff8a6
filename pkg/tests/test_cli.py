"""Command-line behavior: argument handling, exit codes, full scan runs."""

import json
import socket

import pytest

from xsstap.cli import main
from xsstap.dbclient import Connection
from xsstap.fixture.app import DemoApp
from xsstap.fixture.mysql_stub import StubMySQL
from xsstap.fixture.seed import seed_database
from xsstap.proxy import ProxyServer


def dead_port() -> tuple[str, int]:
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    address = probe.getsockname()
    probe.close()
    return address


def endpoint(address: tuple[str, int]) -> str:
    return "%s:%d" % address


class TestArgumentErrors:
    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_bad_endpoint_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["proxy", "--upstream", "nocolon"])
        assert exc.value.code == 2

    def test_bad_port_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["proxy", "--upstream", "h:99999"])
        assert exc.value.code == 2

    def test_bad_granularity_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(
                ["scan", "c.jsonl", "--target", "h:1", "--control", "h:1",
                 "--granularity", "per-row"]
            )
        assert exc.value.code == 2


class TestProxyCommand:
    def test_bind_conflict_is_environment_error(self, capsys):
        holder = socket.socket()
        holder.bind(("127.0.0.1", 0))
        holder.listen(1)
        try:
            code = main(
                [
                    "proxy",
                    "--listen", endpoint(holder.getsockname()),
                    "--upstream", "127.0.0.1:3306",
                    "--control", "127.0.0.1:0",
                ]
            )
        finally:
            holder.close()
        assert code == 3
        assert "cannot start relay" in capsys.readouterr().err


class TestScanCommandErrors:
    def test_missing_corpus_is_input_error(self, tmp_path, capsys):
        code = main(
            ["scan", str(tmp_path / "absent.jsonl"), "--target", "127.0.0.1:1",
             "--control", "127.0.0.1:1"]
        )
        assert code == 2
        assert "cannot read corpus" in capsys.readouterr().err

    def test_malformed_corpus_is_input_error(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text("{nope\n")
        code = main(
            ["scan", str(corpus), "--target", "127.0.0.1:1",
             "--control", "127.0.0.1:1"]
        )
        assert code == 2
        assert "bad corpus" in capsys.readouterr().err

    def test_malformed_config_is_input_error(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text('{"url": "/"}\n')
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2")
        code = main(
            ["scan", str(corpus), "--target", "127.0.0.1:1",
             "--control", "127.0.0.1:1", "--config", str(cfg)]
        )
        assert code == 2
        assert "bad config" in capsys.readouterr().err

    def test_unreachable_control_is_environment_error(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text('{"url": "/"}\n')
        code = main(
            ["scan", str(corpus), "--target", "127.0.0.1:1",
             "--control", endpoint(dead_port())]
        )
        assert code == 3
        assert "control endpoint" in capsys.readouterr().err


@pytest.fixture(scope="module")
def stack():
    from types import SimpleNamespace

    with StubMySQL() as stub:
        with Connection(*stub.address) as db:
            seed_database(db)
        proxy = ProxyServer(("127.0.0.1", 0), stub.address, control=("127.0.0.1", 0))
        proxy.start()
        try:
            with DemoApp(proxy.listen_address) as app:
                yield SimpleNamespace(proxy=proxy, app=app)
        finally:
            proxy.stop()


def write_corpus(tmp_path) -> str:
    lines = [
        {"id": "front", "url": "/", "headers": [["Cookie", "SESSIONID=1"]]},
        {"id": "text", "url": "/htmltext-unsanitized"},
        {"id": "uri", "url": "/uri-else-vuln"},
        {"id": "ok", "url": "/htmltext-correct"},
    ]
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(json.dumps(line) for line in lines) + "\n")
    return str(path)


class TestScanCommand:
    def test_full_scan_writes_jsonl_and_summary(self, stack, tmp_path, capsys):
        out = tmp_path / "findings.jsonl"
        code = main(
            [
                "scan", write_corpus(tmp_path),
                "--target", endpoint(stack.app.address),
                "--control", endpoint(stack.proxy.control_address),
                "--granularity", "table-column",
                "--seed", "11",
                "--output", str(out),
            ]
        )
        assert code == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert {r["request"] for r in records} == {"front", "text", "uri"}
        verdicts = {r["request"]: r["verdict"] for r in records}
        assert verdicts["front"] == "flaw-arbitrary-js"
        assert verdicts["uri"] == "flaw-no-js-execution"
        summary = capsys.readouterr().out
        assert "flaws found: 3" in summary
        assert "correct sanitizations observed: 1" in summary

    def test_config_file_login_and_skip(self, stack, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text(
            json.dumps({"id": "front", "url": "/"})
            + "\n"
            + json.dumps({"id": "text", "url": "/htmltext-unsanitized"})
            + "\n"
        )
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "login": [
                        {
                            "method": "POST",
                            "url": "/login",
                            "headers": [["Content-Type", "application/x-www-form-urlencoded"]],
                            "body": "user=a&pass=b",
                        }
                    ],
                    "skip_urls": ["htmltext"],
                    "timeout": 5,
                }
            )
        )
        out = tmp_path / "findings.jsonl"
        code = main(
            [
                "scan", str(corpus),
                "--target", endpoint(stack.app.address),
                "--control", endpoint(stack.proxy.control_address),
                "--config", str(cfg),
                "--output", str(out),
            ]
        )
        assert code == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        # login made the cookieless front request reach the session row;
        # the skip pattern excluded the other template
        assert {r["request"] for r in records} == {"front"}
        assert "skipped 1" in capsys.readouterr().out


class TestControlTokenEnv:
    def test_token_env_round_trip(self, tmp_path, capsys, monkeypatch):
        with StubMySQL() as stub:
            with Connection(*stub.address) as db:
                seed_database(db)
            proxy = ProxyServer(
                ("127.0.0.1", 0),
                stub.address,
                control=("127.0.0.1", 0),
                control_token="tok",
            )
            proxy.start()
            try:
                with DemoApp(proxy.listen_address) as app:
                    args = [
                        "scan", write_corpus(tmp_path),
                        "--target", endpoint(app.address),
                        "--control", endpoint(proxy.control_address),
                    ]
                    monkeypatch.setenv("XSSTAP_CONTROL_TOKEN", "wrong")
                    assert main(args) == 3
                    assert "ABORTED" in capsys.readouterr().out
                    monkeypatch.setenv("XSSTAP_CONTROL_TOKEN", "tok")
                    assert main(args) == 0
            finally:
                proxy.stop()
