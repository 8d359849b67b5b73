"""meetmine: template mining and decision analytics for meeting transcripts.

The package treats a meeting as a sequence of categorical dialogue acts and
provides:

* a template formalism (label chain plus backward jump edges) whose fit to a
  corpus is measured by edit distance to the nearest template walk,
* a simulated-annealing miner for such templates,
* a counting-based generalization bound for the mined template class,
* Markov-chain and profile-HMM sequence baselines,
* decision-window detection from dialogue-act count vectors,
* wrap-up-time regression, and
* exact conditional tests for persuasive-word effects on suggestion uptake.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
