"""Minimal fake frame extractor: writes deterministic bytes derived from
the media file and timestamp.  No image library involved, so the per-call
startup cost stays tiny for large synthetic corpora.

    fake_extract_raw.py MEDIA TIMESTAMP_MS OUT
"""

import hashlib
import sys


def main() -> int:
    media, timestamp_ms, out = sys.argv[1], sys.argv[2], sys.argv[3]
    with open(media, "rb") as f:
        payload = f.read() + b"@" + timestamp_ms.encode()
    with open(out, "wb") as f:
        f.write(hashlib.sha256(payload).digest() * 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
