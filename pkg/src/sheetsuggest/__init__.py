"""Formula suggestion for spreadsheets.

Subpackages cover the whole pipeline: grid files and A1 addressing
(:mod:`sheetsuggest.grid`), formula parsing and the sketch/range IR
(:mod:`sheetsuggest.formula`), tabular context extraction
(:mod:`sheetsuggest.context`), corpus mining (:mod:`sheetsuggest.dataset`),
the reverse-mode autodiff core (:mod:`sheetsuggest.nn`), the encoder/decoder
model (:mod:`sheetsuggest.model`), evaluation (:mod:`sheetsuggest.metrics`),
and the CLI/HTTP entry points (:mod:`sheetsuggest.cli`,
:mod:`sheetsuggest.service`).
"""

__version__ = "0.1.0"
