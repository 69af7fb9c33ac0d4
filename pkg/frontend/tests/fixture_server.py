"""Launches the platform for the frontend end-to-end test.

Usage: python3 fixture_server.py PORT DATA_DIR
Prints "READY <port> <transcript-path>" once listening.
"""

import sys
import threading
from pathlib import Path

import uvicorn

from fareaudit.api import AppConfig, Platform, create_app


def main() -> None:
    port = int(sys.argv[1])
    data_dir = Path(sys.argv[2])
    transcript = data_dir / "sms.jsonl"
    config = AppConfig(
        admin_key="e2e-admin",
        webhook_secret="e2e-secret",
        base_url=f"http://127.0.0.1:{port}",
        data_dir=str(data_dir),
        sms_transcript=str(transcript),
    )
    app = create_app(Platform.build(config))
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    )

    def announce() -> None:
        import time

        while not server.started:
            time.sleep(0.02)
        print(f"READY {port} {transcript}", flush=True)

    threading.Thread(target=announce, daemon=True).start()
    server.run()


if __name__ == "__main__":
    main()
