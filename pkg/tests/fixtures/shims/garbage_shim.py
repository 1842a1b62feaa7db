"""Shim stand-in that violates the one-JSON-verdict-per-line protocol."""
print("verdict: everything is fine, trust me")
print("...")
