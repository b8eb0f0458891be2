"""
infostream package.

Entropy and information-divergence estimation over oracle-access
distributions and insert-only data streams, split into focused modules by
responsibility:

- ``dist_core``: exact distributions, divergences and entropy (ground truth)
- ``oracles``: budgeted generative/evaluative access with call tracing
- ``testers``: sublinear-sample testers and combined-oracle estimators
- ``streaming``: one-pass and two-pass stream estimators
- ``harness`` / ``cli``: generation, execution and sweep reporting
"""


def main():
    """Convenience entry point; delegates to infostream.cli.main()."""
    from infostream.cli import main as _main
    return _main()


__all__ = ["main"]
