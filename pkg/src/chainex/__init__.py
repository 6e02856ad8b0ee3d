"""chainex: evidence-chain extraction for multi-paragraph QA.

Pipeline: synthesize or load a JSONL corpus, derive pseudogold chains over an
entity graph, train a pointer-network chain extractor on them, decode chains
with beam search, and evaluate chains intrinsically or through a
multiple-choice answer scorer.
"""

__version__ = "0.1.0"
