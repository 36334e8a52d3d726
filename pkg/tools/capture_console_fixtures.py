"""Capture live operator-API payloads as fixtures for the console tests.

Runs the real pipeline behind the HTTP app with a scripted inference
client and records the actual wire payloads: bootstrap, two intent cards,
history, an override, and raw SSE stream text before and after the
override. The console test suite asserts against these files so its
expectations stay anchored to what the server really sends.

Usage: python3 tools/capture_console_fixtures.py
"""

import json
from pathlib import Path

from starlette.testclient import TestClient

from hiaer.config import AppConfig
from hiaer.intent import ScriptedInferenceClient
from hiaer.server import build_app, make_pipeline

OUT = Path(__file__).resolve().parents[1] / "frontend" / "tests" / "fixtures"


def reply(description, intent, confidence, valence, arousal, motion):
    return (
        "```\n"
        f"Description: {description}\n"
        f"Intent: {intent}\n"
        f"Confidence: {confidence}\n"
        f"Valence: {valence}\n"
        f"Arousal: {arousal}\n"
        f"Motion: {motion}\n"
        "```"
    )


HOSTILE = reply(
    "A man shouts and shakes his fist at the camera.",
    "Aggression, hostile confrontation",
    0.91,
    -0.46,
    0.64,
    "guard_stance",
)

GREETING = reply(
    "A visitor smiles and waves hello.",
    "CalmGreeting, friendly hello",
    0.88,
    0.36,
    0.29,
    "wave_right_hand",
)


def dump(name, doc):
    (OUT / name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print("wrote", OUT / name)


def extract_windows(raw: str):
    """Pull the JSON documents of kind 'window' out of raw SSE text."""
    docs = []
    kind = None
    for line in raw.splitlines():
        if line.startswith("event: "):
            kind = line[len("event: ") :]
        elif line.startswith("data: ") and kind == "window":
            docs.append(json.loads(line[len("data: ") :]))
    return docs


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    client = ScriptedInferenceClient(
        [(0.05, HOSTILE), (0.05, GREETING)], exhausted="repeat_last"
    )
    pipe = make_pipeline(AppConfig(), inference_client=client)
    app = build_app(pipe, AppConfig())
    pipe.start()
    try:
        with TestClient(app) as tc:
            dump("bootstrap.json", tc.get("/bootstrap").json())
            dump(
                "input_hostile.json",
                tc.post(
                    "/session/input",
                    json={"text": "A man shouts and shakes his fist at the robot."},
                ).json(),
            )
            dump(
                "input_greeting.json",
                tc.post(
                    "/session/input",
                    json={"text": "A visitor smiles and waves at the robot."},
                ).json(),
            )
            pre = tc.get("/stream", params={"limit": 120}).text
            (OUT / "stream_pre_override.txt").write_text(pre)
            print("wrote", OUT / "stream_pre_override.txt")
            dump(
                "override.json",
                tc.post("/session/override", json={"primitive_id": "cheer"}).json(),
            )
            post = tc.get("/stream", params={"limit": 120}).text
            (OUT / "stream_post_override.txt").write_text(post)
            print("wrote", OUT / "stream_post_override.txt")
            dump("history.json", tc.get("/session/history").json())

            before = extract_windows(pre)
            after = extract_windows(post)
            if not before or not after:
                raise SystemExit("stream captures missed a window; raise the limit")
            dump("window_greeting.json", before[-1])
            dump("window_forced.json", after[-1])
    finally:
        pipe.stop()
        pipe.join(2.0)


if __name__ == "__main__":
    main()
