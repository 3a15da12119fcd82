#!/usr/bin/env python3
"""Validates state, event and metrics documents produced by the CLI and the
HTTP service against the versioned JSON schemas."""

import argparse
import json
import pathlib
import shutil
import socket
import subprocess
import sys
import time
import urllib.error
import urllib.request

import jsonschema
from referencing import Registry, Resource

PROMPT = "An 8-bit combinational ALU with add, subtract, and, or and xor, plus a zero flag."


class Checker:
    def __init__(self, schema_dir):
        self.schemas = {}
        resources = []
        for path in sorted(pathlib.Path(schema_dir).glob("*.schema.json")):
            doc = json.loads(path.read_text())
            jsonschema.Draft202012Validator.check_schema(doc)
            self.schemas[path.name.split("-")[0]] = doc
            resources.append((doc["$id"], Resource.from_contents(doc)))
        self.registry = Registry().with_resources(resources)
        self.checked = 0
        self.failures = []

    def validator(self, kind):
        return jsonschema.Draft202012Validator(self.schemas[kind], registry=self.registry)

    def check(self, kind, doc, where):
        self.checked += 1
        errors = sorted(self.validator(kind).iter_errors(doc), key=lambda e: list(e.path))
        for e in errors[:3]:
            self.failures.append(f"{where}: {'/'.join(map(str, e.path))}: {e.message}")

    def must_reject(self, kind, doc, where):
        self.checked += 1
        if self.validator(kind).is_valid(doc):
            self.failures.append(f"{where}: invalid document accepted")


def run_cli(cli, args, stdin=""):
    return subprocess.run([cli, *args], input=stdin, capture_output=True, text=True, timeout=120)


def check_store(checker, state_dir):
    for design in sorted(p for p in state_dir.iterdir() if p.is_dir()):
        for snap in sorted(design.glob("snapshot-*.json")):
            checker.check("state", json.loads(snap.read_text()), str(snap))
        for n, line in enumerate((design / "events.jsonl").read_text().splitlines(), 1):
            checker.check("event", json.loads(line), f"{design.name}/events.jsonl:{n}")
        for metrics in sorted(design.glob("runs/*/*/metrics.json")):
            checker.check("metrics", json.loads(metrics.read_text()), str(metrics))


def negative_cases(checker, state, event):
    bad = json.loads(json.dumps(state))
    bad["schema_version"] = 2
    checker.must_reject("state", bad, "state with schema_version 2")
    bad = json.loads(json.dumps(state))
    bad["phase"] = "sleeping"
    checker.must_reject("state", bad, "state with unknown phase")
    bad = json.loads(json.dumps(state))
    del bad["history"]
    checker.must_reject("state", bad, "state without history")
    bad = json.loads(json.dumps(event))
    bad["seq"] = 0
    checker.must_reject("event", bad, "event with seq 0")
    bad = json.loads(json.dumps(event))
    bad["type"] = "gossip"
    checker.must_reject("event", bad, "event with unknown type")
    checker.must_reject("event", {**event, "type": "question", "data": {"question": 3}}, "question without id")
    checker.must_reject("metrics", {"design_name": "x", "area_um2": -1}, "negative area")


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def http(method, url, body=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as r:
            return r.status, r.read().decode(), dict(r.headers)
    except urllib.error.HTTPError as e:
        return e.code, e.read().decode(), dict(e.headers)


def check_service(checker, cli, common, work):
    port = free_port()
    proc = subprocess.Popen([cli, *common, "--state-dir", str(work / "served"), "serve", "--bind", f"127.0.0.1:{port}"],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    base = f"http://127.0.0.1:{port}"
    try:
        for _ in range(200):
            try:
                http("GET", base + "/designs")
                break
            except OSError:
                time.sleep(0.05)
        goal = {"priority": "area", "weights": {"area": 0.6, "delay": 0.2, "power": 0.2},
                "stop_after_runs": 6, "stop_after_stale_rounds": 3}
        status, body, _ = http("POST", base + "/designs", {"prompt": PROMPT, "design_id": "api", "goal": goal})
        if status != 201:
            checker.failures.append(f"POST /designs returned {status}: {body}")
            return
        answers = ["add, subtract, and, or, xor", "no, purely combinational"]
        asked = 0
        deadline = time.time() + 60
        doc = None
        while time.time() < deadline:
            status, body, _ = http("GET", base + "/designs/api")
            doc = json.loads(body)
            checker.check("state", doc, f"GET /designs/api ({doc.get('phase')})")
            q = doc.get("pending_question")
            if q and asked < len(answers):
                http("POST", base + "/designs/api/answers", {"question_id": q["question_id"], "answer": answers[asked]})
                asked += 1
            if doc.get("phase") in ("done", "aborted") and not doc.get("running"):
                break
            time.sleep(0.02)
        if not doc or doc.get("phase") != "done":
            checker.failures.append(f"served design did not finish: {doc and doc.get('phase')}")
        status, body, headers = http("GET", base + "/designs/api/events?follow=0")
        if not headers.get("Content-Type", "").startswith("text/event-stream"):
            checker.failures.append("events endpoint is not text/event-stream")
        ids = []
        for block in body.split("\n\n"):
            fields = dict(line.split(": ", 1) for line in block.splitlines() if ": " in line and not line.startswith(":"))
            if "data" in fields:
                event = json.loads(fields["data"])
                checker.check("event", event, f"SSE event {fields.get('id')}")
                ids.append(int(fields["id"]))
                if fields.get("event") != event["type"]:
                    checker.failures.append(f"SSE event name {fields.get('event')} != {event['type']}")
        if ids != list(range(1, len(ids) + 1)) or not ids:
            checker.failures.append(f"SSE ids not dense from 1: {ids[:10]}")
        status, body, _ = http("GET", base + "/designs/api/runs")
        for run in json.loads(body)["runs"]:
            status, mbody, _ = http("GET", base + f"/designs/api/runs/{run['job_id']}/metrics")
            if status == 200:
                checker.check("metrics", json.loads(mbody), f"GET metrics {run['job_id']}")
        status, body, _ = http("GET", base + "/designs/missing")
        if status != 404 or json.loads(body).get("error") != "NotFound":
            checker.failures.append(f"unknown design gave {status} {body}")
    except OSError as e:
        checker.failures.append(f"service request failed: {e}")
    finally:
        proc.terminate()
        try:
            _, err = proc.communicate(timeout=20)
            if proc.returncode not in (0, -15):
                checker.failures.append(f"serve exited {proc.returncode}: {err[-2000:]}")
        except subprocess.TimeoutExpired:
            proc.kill()
            checker.failures.append("serve did not stop on SIGTERM")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True)
    ap.add_argument("--schemas", required=True)
    ap.add_argument("--fixtures", required=True)
    ap.add_argument("--work", required=True)
    args = ap.parse_args()

    fixtures = pathlib.Path(args.fixtures)
    work = pathlib.Path(args.work)
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    checker = Checker(args.schemas)
    common = ["--mock-script", str(fixtures / "mock_script" / "alu8")]
    state_dir = work / "state"

    r = run_cli(args.cli, [*common, "--state-dir", str(state_dir), "new", "--prompt", PROMPT, "--answers",
                           str(fixtures / "answers" / "alu8.json"), "--id", "alu8", "--stop-after-runs", "8"])
    if r.returncode != 0:
        checker.failures.append(f"new alu8 exited {r.returncode}: {r.stderr}")
    r = run_cli(args.cli, [*common, "--state-dir", str(state_dir), "optimize", "alu8", "--runs", "2"])
    if r.returncode != 0:
        checker.failures.append(f"optimize exited {r.returncode}: {r.stderr}")
    # Closed stdin during planning leaves an aborted design behind.
    r = run_cli(args.cli, [*common, "--state-dir", str(state_dir), "new", "--prompt", PROMPT, "--id", "closed"])
    if r.returncode != 5:
        checker.failures.append(f"closed-input design exited {r.returncode}, expected 5")

    check_store(checker, state_dir)
    r = run_cli(args.cli, [*common, "--state-dir", str(state_dir), "status", "--json"])
    docs = json.loads(r.stdout)
    if len(docs) != 2:
        checker.failures.append(f"status --json listed {len(docs)} designs")
    for doc in docs:
        checker.check("state", doc, f"status --json {doc.get('design_id')}")
    for metrics in sorted(fixtures.glob("reports/*/*/metrics.json")):
        checker.check("metrics", json.loads(metrics.read_text()), str(metrics))

    state = json.loads(sorted((state_dir / "alu8").glob("snapshot-*.json"))[-1].read_text())
    event = json.loads((state_dir / "alu8" / "events.jsonl").read_text().splitlines()[0])
    negative_cases(checker, state, event)

    check_service(checker, args.cli, common, work)

    for f in checker.failures:
        print("FAIL", f)
    print(f"{checker.checked} documents checked, {len(checker.failures)} failures")
    return 1 if checker.failures else 0


if __name__ == "__main__":
    sys.exit(main())
