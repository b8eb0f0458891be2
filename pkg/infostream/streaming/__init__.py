"""
Stream-model estimators over insert-only token streams.

- tokens: TokenStream, stream generation and stream files
- sketches: F0 (distinct-count) sketch and vectorized hashing
- level_bank: entropy from distinct counts of subsampled levels
- large_small: entropy upper estimate from exactly tracked heavy items
- random_order: (1+ε) entropy for randomly ordered streams
- simulation: oracle algorithms served from one or two passes
"""
from infostream.streaming.tokens import StreamOrder, TokenStream, generate_stream, load_stream, save_stream

__all__ = ["StreamOrder", "TokenStream", "generate_stream", "load_stream", "save_stream"]
