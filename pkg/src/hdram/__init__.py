"""Hypertoken codebooks and a holographic key-value memory simulator.

Modules
-------
codebook
    Product and general hypertoken codebooks with bifix-free checks.
latent_channel
    Seeded embeddings, phase operator and codeword projection.
despread
    Matched-filter decoding, Krylov refinement, coherence and horizons.
store
    Outer-product memory with K:V and V:K lookup, recall simulations.
diagnostics
    RIP, JL, conditioning, spectral gap, channel and coverage metrics.
promptc
    Prompt compilation and tokenizer verification for real LLMs.
bench
    Benchmark runners and report emission; ``cli`` wraps them.
"""

__version__ = "0.1.0"
