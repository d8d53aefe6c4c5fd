"""Crowd session end to end: HTTP service, scripted workers, final result.

Starts the session service on a local port, uploads a photo, then plays
three workers who fetch microtasks, compare slider previews by a local
quality score, and submit their positions.  One slot per microtask is a
hidden check; honest workers pass it by leaving the check slider neutral.
"""

import json
import socket
import tempfile
import threading
import time
import urllib.error
import urllib.request
import uuid
from pathlib import Path

import numpy as np
import uvicorn

from localenhance import Image, image_from_bytes, save_image
from localenhance.quality import nr_score
from localenhance.service import ServiceConfig, create_app

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

BASE = None  # set once the server is up


def get(path, expect_json=True):
    with urllib.request.urlopen(BASE + path) as resp:
        blob = resp.read()
    return json.loads(blob) if expect_json else blob


def post_json(path, payload):
    req = urllib.request.Request(
        BASE + path,
        data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def post_multipart(path, png, config):
    # stdlib-only multipart upload: one file field plus the config field
    boundary = "demo" + uuid.uuid4().hex
    body = (
        f'--{boundary}\r\nContent-Disposition: form-data; name="config"'
        f"\r\n\r\n{json.dumps(config)}\r\n"
        f'--{boundary}\r\nContent-Disposition: form-data; name="image"; '
        f'filename="input.png"\r\nContent-Type: image/png\r\n\r\n'
    ).encode() + png + f"\r\n--{boundary}--\r\n".encode()
    req = urllib.request.Request(
        BASE + path,
        data=body,
        headers={"Content-Type": f"multipart/form-data; boundary={boundary}"},
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def answer_slot(slot):
    """Pick the raw slider position whose preview scores best locally."""
    if slot["kind"] == "check":
        return 0.5  # neutral looks right on the check card either way
    best_raw, best_score = 0.5, -np.inf
    for raw in np.linspace(0.0, 1.0, 9):
        query = (f"?alpha={raw}&reversed={str(slot['reversed']).lower()}"
                 f"&max_edge=64")
        preview = image_from_bytes(get(slot["preview_path"] + query, False))
        score = nr_score(preview)
        if score > best_score:
            best_raw, best_score = float(raw), score
    return best_raw


# underexposed test shot, small enough for fast previews
h, w = 48, 64
yy, xx = np.mgrid[0:h, 0:w]
grid = 0.15 + 0.25 * (xx / (w - 1.0)) + 0.08 * np.sin(10 * yy / h)
grid = np.clip(np.stack([grid, grid * 0.9, grid * 0.8], axis=-1), 0.0, 1.0)
photo = Image.from_pixels(grid)
save_image(photo, OUT / "04_input.png")

sock = socket.socket()
sock.bind(("127.0.0.1", 0))
port = sock.getsockname()[1]
sock.close()
BASE = f"http://127.0.0.1:{port}"

data_dir = tempfile.mkdtemp(prefix="localenhance_demo_")
app = create_app(ServiceConfig(data_dir=data_dir, bundle_size=5, seed=0))
server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                       log_level="warning"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)
print(f"service listening on {BASE}, sessions persisted under {data_dir}")

config = {"n_key_pixels": 2, "n_sliders": 2, "responses_per_slider": 3,
          "preview_max_edge": 64, "seed": 5}
session_id = post_multipart(
    "/sessions", (OUT / "04_input.png").read_bytes(), config
)["session_id"]
print(f"created session {session_id}: 2 key pixels x 2 sliders, "
      f"3 responses per step")

workers = ["ann", "bob", "cam"]
while True:
    status = get(f"/sessions/{session_id}")
    if status["status"] == "done":
        break
    print(f"step {status['step']} of {status['total_steps']} "
          f"(s={status['s']}, l={status['l']}), "
          f"{status['accepted_responses']}/3 responses in")
    for worker in workers:
        try:
            task = get(f"/microtask?worker={worker}")
        except urllib.error.HTTPError as err:
            if err.code == 404:
                continue  # this worker already answered the bundle
            raise
        alphas = [answer_slot(slot) for slot in task["slots"]]
        verdict = post_json("/responses", {
            "worker": worker,
            "microtask_id": task["microtask_id"],
            "alphas": alphas,
        })
        print(f"  {worker} answered {len(alphas)} sliders -> "
              f"{verdict['status']}")

result = get(f"/sessions/{session_id}/result")
print("session done; chosen alphas per step:")
for row in result["trace"]:
    print(f"  step {row['step']} (s={row['s']}, l={row['l']}): "
          f"alpha {row['alpha']:.4f}")

(OUT / "04_result.png").write_bytes(get(result["result_path"], False))
(OUT / "04_params.csv").write_bytes(get(result["param_map_path"], False))
before = nr_score(photo)
after = nr_score(image_from_bytes((OUT / "04_result.png").read_bytes()))
print(f"nr_score {before:.4f} -> {after:.4f}; "
      f"artifacts in {OUT}")

server.should_exit = True
thread.join(timeout=5)
