"""Echo trainer: score is the first control coordinate, cost is fixed.

Run as ``python -m autobct_trainers.echo``; useful for protocol tests.
"""

from .protocol import serve


def handler(u, params):
    return u[0], params.get("cost", 0.1)


def main():
    serve(handler)


if __name__ == "__main__":
    main()
