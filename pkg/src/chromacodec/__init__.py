"""chromacodec: compress the color of an image down to a few hundred bytes.

A small fully-convolutional network predicts K chroma hypotheses per pixel
from the grayscale plane; the encoder stores only which hypothesis to use
(per pixel or per region) plus a 4-parameter global correction, and the
decoder regenerates the same hypotheses from the shared grayscale image to
reconstruct the colors.
"""

__version__ = "0.1.0"
