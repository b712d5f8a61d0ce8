"""Reference trainer for segfair sampler plans."""
