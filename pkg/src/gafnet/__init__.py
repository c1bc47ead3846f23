"""Multimodal ECG classification with Gramian Angular Field imaging.

Submodules:
    dsp      -- bandpass filtering, normalization, windowing
    gaf      -- time series to Gramian Angular Field images
    ops      -- differentiable array primitives with hand-written backward passes
    model    -- dual-branch network with split attention fusion
    optim    -- loss, Adam, learning-rate schedules, training loop
    data     -- UCR and WFDB/MIT-BIH loaders, splits, batching
    metrics  -- accuracy, macro F1, macro one-vs-rest AUC
    cli      -- command-line entry point
"""

__version__ = "0.1.0"
