"""One BB84 execution per channel, with the phase flags and transcript size.

Run with ``python3 demos/protocol_run.py``.
"""

# %%
from qkdfinite import protocol as pr
from qkdfinite.protocol import ChannelModel, ProtocolConfig

channels = [ChannelModel("ideal"), ChannelModel("depolarizing", 0.04),
            ChannelModel("amplitude_damping", 0.05), ChannelModel("intercept_resend", 1.0)]
cfg = ProtocolConfig(M=10 ** 5, k=5000, delta=0.05, seed=11)

# %%
for ch in channels:
    run = pr.run_protocol(cfg, ch)
    print(f"{ch.kind:18s} {run.summary()}  transcript={run.transcript_bits} bits")

# %% Identical inputs reproduce the transcript byte for byte.
ch = ChannelModel("depolarizing", 0.04)
print(pr.run_protocol(cfg, ch).to_json() == pr.run_protocol(cfg, ch).to_json())
