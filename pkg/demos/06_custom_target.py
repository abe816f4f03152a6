"""Writing your own target.

A target is a plain function ``fn(data, h)``.  Report basic blocks with
``h.report_block``, route every interesting comparison through
``h.report_cmp`` (it returns the comparison result and records the
distance), and signal a bug with ``h.report_bug``.
"""

from finch import Budget, EngineConfig, Target, hot_fuzz
from finch.distance import Relation


def parse_header(data, h):
    h.report_block(0)
    if len(data) < 6:
        return
    version = int.from_bytes(data[0:2], "little")
    if h.report_cmp(0, Relation.EQ, version, 0x0302):
        h.report_block(1)
        size = int.from_bytes(data[2:6], "little")
        if h.report_cmp(1, Relation.GT, size, 0xF0000000):
            h.report_block(2)
            h.report_bug("huge-size")


target = Target("header", parse_header, max_input_len=16, site_count=2, block_count=3,
                description="two-stage header check")

r = hot_fuzz(target, [bytes(8)], Budget(execs=100_000), EngineConfig(campaign_seed=0, hidden_width=64))
print("bugs:", [(bug, data.hex()) for data, bug in r.crash_pool])
print("execs:", r.stats[-1].execs, "edges:", r.stats[-1].edges_covered)
