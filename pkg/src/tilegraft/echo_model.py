"""Reference echo-back patch worker: gray in, replicated RGB out.

Run as ``python3 -m tilegraft.echo_model``.  Serves the stdin/stdout patch
protocol (see tilegraft.wire) until stdin closes, then exits 0.  The fault
flags deliberately misbehave so the parent-side error handling can be
exercised:

  --corrupt-magic      reply frames carry a wrong magic
  --truncate           reply frames stop halfway through the payload
  --fail-after N       exit with status 3 before answering request N
  --offset X           add X to every sample (handy for seam experiments)
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from tilegraft import wire


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corrupt-magic", action="store_true")
    ap.add_argument("--truncate", action="store_true")
    ap.add_argument("--fail-after", type=int, default=-1)
    ap.add_argument("--offset", type=float, default=0.0)
    args = ap.parse_args(argv)

    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    served = 0
    while True:
        patch = wire.try_read_frame(stdin)
        if patch is None:
            return 0
        if args.fail_after >= 0 and served >= args.fail_after:
            return 3
        if patch.ndim == 2:
            reply = np.stack([patch] * 3, axis=2)
        else:
            reply = patch
        reply = reply + args.offset
        if args.corrupt_magic:
            stdout.write(b"XXX1")
            stdout.write(np.array([reply.shape[1], reply.shape[0], 3], dtype="<u4").tobytes())
            stdout.write(np.ascontiguousarray(np.moveaxis(reply, 2, 0), dtype="<f4").tobytes())
            stdout.flush()
        elif args.truncate:
            payload = np.ascontiguousarray(np.moveaxis(reply, 2, 0), dtype="<f4").tobytes()
            stdout.write(wire.MAGIC)
            stdout.write(np.array([reply.shape[1], reply.shape[0], 3], dtype="<u4").tobytes())
            stdout.write(payload[: len(payload) // 2])
            stdout.flush()
            return 0
        else:
            wire.write_frame(stdout, reply)
        served += 1


if __name__ == "__main__":
    sys.exit(main())
