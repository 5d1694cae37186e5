"""Desk-scale laboratory for NTCF-based extraction protocols.

Modules:
  ntcf     - claw-free function family and the simulated quantum device
  commit   - binding commitments, XOR sharing, extractable grids
  circuits - two-party functionality descriptions (native + gate-level)
  sfe      - two-message secure function evaluation (ideal / garbled)
  cqext    - classical-channel extraction protocol, extractor, simulators
  qqext    - qFHE-based non-black-box extraction protocol
  qzk      - constant-round zero-knowledge argument with WI for R_wi
  session  - message schedules, snapshots, transcripts
  cli      - command-line surface
"""

__version__ = "0.1.0"
