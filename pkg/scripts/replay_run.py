#!/usr/bin/env python3
"""
Run replay script for checking determinism: re-executes the argv recorded in a manifest into a
scratch directory and byte-compares every listed output
"""
import json
import sys
import tempfile
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

from services.cli.app import main as cli_main


def replay_run(manifest_file: str) -> bool:
    """Replay one recorded run; True when every output is byte-identical"""
    manifest_path = Path(manifest_file)
    if not manifest_path.exists():
        print(f"Manifest not found: {manifest_file}")
        return False

    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    original_dir = manifest_path.parent
    print(f"Replaying '{manifest['command']}' (config {manifest['config_hash'][:12]}, seed {manifest['seed']})")

    with tempfile.TemporaryDirectory() as scratch:
        code = cli_main(["--out", scratch, *manifest["argv"]])
        if code not in (0, 1):
            print(f"❌ Replay exited with code {code}")
            return False

        mismatches = []
        for name in manifest["outputs"]:
            original = original_dir / name
            replayed = Path(scratch) / name
            if not replayed.exists() or original.read_bytes() != replayed.read_bytes():
                mismatches.append(name)

    if mismatches:
        for name in mismatches:
            print(f"❌ DIFFERS: {name}")
        return False

    print(f"✅ {len(manifest['outputs'])} outputs reproduced byte-for-byte")
    return True


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("usage: replay_run.py <manifest.json>")
        sys.exit(2)
    sys.exit(0 if replay_run(sys.argv[1]) else 1)
