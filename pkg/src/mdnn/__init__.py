"""Multimodal late-fusion binary classifier with verified numeric kernels.

Subpackages:
  ops / layers   dense float64 kernels and hand-written backprop
  dsp            MFCC front-end (STFT, mel filterbank, DCT-II)
  audio_net      MFCC convolutional classifier (sigmoid outputs)
  video_net      (2+1)D factorized residual video classifier
  fusion         decision-level fusion head and binary cross-entropy
  trainer        Adam, L1/L2 regularization, splits, metrics, training loop
  data           tensor container format, preprocessing, synthetic datasets
  model_io       model directory / fusion bundle persistence
  cli            the ``mdnn`` command-line tool
"""

__version__ = "0.1.0"
