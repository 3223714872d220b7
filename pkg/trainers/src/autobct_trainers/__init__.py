"""Example external trainers for the autobct optimizer.

Each trainer is a standalone process speaking newline-delimited JSON on
stdin/stdout; see ``protocol.serve`` for the message loop.
"""
