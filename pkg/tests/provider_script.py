"""Test saliency provider speaking the subprocess protocol.

Reads a P6 PPM image from stdin and writes a P5 PGM raw map to stdout.
Modes (argv[1]): proxy (default) echoes the built-in raw map, constant
returns a flat map, truncated violates the payload contract, hang sleeps
past any sane timeout.
"""

import sys
import time


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "proxy"
    data = sys.stdin.buffer.read()

    from salshift.fileio import decode_ppm, encode_pgm
    from salshift.saliency import proxy_raw_map

    image = decode_ppm(data)
    if mode == "hang":
        time.sleep(60)
        return
    if mode == "constant":
        import numpy as np

        payload = encode_pgm(np.zeros((image.height, image.width)), maxval=255)
    elif mode == "truncated":
        payload = b"P5\n10 10\n255\n\x00\x01"
    else:
        payload = encode_pgm(proxy_raw_map(image), maxval=65535)
    sys.stdout.buffer.write(payload)


if __name__ == "__main__":
    main()
