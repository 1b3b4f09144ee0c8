"""shiftwatch: end-of-shift construction-safety compliance engine.

Turns per-frame detector and pose output from two camera streams (a fixed
wall camera and a body-worn camera) into a deterministic, evidence-linked
shift compliance report, cross-checking machine signals against a scripted
or remote vision-language verifier.
"""

__version__ = "0.1.0"
